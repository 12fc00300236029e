from django.core.management.base import BaseCommand

from classifiers.services import classifier_from_dict
from corpus.services import load_jsonl
from ensemble.services import Ensemble
from harness import reports
from harness.cli import Timer, add_output_arguments, command_errors, finish_run, start_run
from harness.services import evaluate


class Command(BaseCommand):
    help = 'Evaluate a saved classifier or ensemble on a labeled test corpus'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, help="ensemble.json or classifier JSON")
        parser.add_argument('--test', required=True, help="Labeled test corpus (JSONL)")
        parser.add_argument('--seed', type=int, default=0, help="Only used to name the run directory")
        add_output_arguments(parser)

    def handle(self, *args, **options):
        with command_errors():
            data = reports.read_json(options['model'])
            model = Ensemble.from_dict(data) if 'beta' in data else classifier_from_dict(data)
            test = load_jsonl(options['test'], num_classes=model.num_classes)
            with Timer() as timer:
                run_dir = start_run('eval', options, options['seed'])
                config_echo = {'model': str(options['model']), 'test': str(options['test'])}
                report = evaluate(model, test, config=config_echo)
                reports.write_json(run_dir / 'report.json', report.to_dict())
            finish_run('eval', options, run_dir, config_echo, timer.seconds, seed=options['seed'], report=report)

        self.stdout.write(self.style.SUCCESS(
            f"P={report.precision:.4f} R={report.recall:.4f} F1={report.f1:.4f} "
            f"accuracy={report.accuracy:.4f} error={100 * report.error_rate:.2f}%"
        ))
