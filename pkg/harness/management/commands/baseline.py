from dataclasses import asdict

from django.core.management.base import BaseCommand

from classifiers.services import save_classifier
from ensemble.services import Ensemble
from harness import reports
from harness.cli import (
    Timer, add_config_arguments, add_data_arguments, add_output_arguments, build_config, command_errors,
    finish_run, load_partition, load_splits, load_test_set, start_run,
)
from harness.services import BASELINES, run_baseline_experiment

POLICY_ALIASES = {'confidence': 'high-confidence'}


class Command(BaseCommand):
    help = 'Run a baseline: random or high-confidence co-training, or a supervised classifier'

    def add_arguments(self, parser):
        parser.add_argument('--policy', required=True, choices=sorted(set(BASELINES) | set(POLICY_ALIASES)))
        add_data_arguments(parser, partition_required=False, test=True)
        add_config_arguments(parser)
        add_output_arguments(parser)

    def handle(self, *args, **options):
        kind = POLICY_ALIASES.get(options['policy'], options['policy'])
        with command_errors():
            config = build_config(options)
            splits = load_splits(options)
            partition = load_partition(options)
            train = splits['train']
            test = load_test_set(options, train.num_classes)
            with Timer() as timer:
                run_dir = start_run('baseline', options, config.seed)
                result = run_baseline_experiment(kind, config, train, splits['validation'], partition,
                                                 splits['unlabeled'], test_set=test)
                config_echo = {**config.to_dict(), 'policy': kind}
                reports.write_json(run_dir / 'config.json', config_echo)
                if isinstance(result.model, Ensemble):
                    result.model.save(run_dir / 'ensemble.json')
                    reports.write_csv(run_dir / 'trace.csv', reports.TRACE_HEADER,
                                      [asdict(row) for row in result.trace])
                else:
                    save_classifier(result.model, run_dir / 'model.json')
                report = result.report
                reports.write_json(run_dir / 'report.json', {**report.to_dict(), 'config': config_echo})
            finish_run('baseline', options, run_dir, config_echo, timer.seconds, seed=config.seed,
                       report=report, trace=result.trace)

        self.stdout.write(self.style.SUCCESS(
            f"{kind}: P={report.precision:.4f} R={report.recall:.4f} F1={report.f1:.4f} "
            f"error={100 * report.error_rate:.2f}%"
        ))
