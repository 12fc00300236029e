from dataclasses import asdict

from django.core.management.base import BaseCommand, CommandError

from harness import reports
from harness.cli import (
    Timer, add_config_arguments, add_data_arguments, add_output_arguments, build_config, command_errors,
    finish_run, load_partition, load_qnet, load_splits, load_test_set, start_run,
)
from harness.services import run_test_time


class Command(BaseCommand):
    help = 'Greedy test-time co-training with a learned Q-policy, then evaluation on a test set'

    def add_arguments(self, parser):
        parser.add_argument('--qnet', required=True, help="Q-network JSON written by the train command")
        parser.add_argument('--holdout-split', default='validation',
                            help="Split used to fit beta after the rollout")
        add_data_arguments(parser, test=True)
        add_config_arguments(parser, seed_required=True)
        add_output_arguments(parser)

    def handle(self, *args, **options):
        with command_errors():
            config = build_config(options)
            splits = load_splits(options)
            partition = load_partition(options)
            params = load_qnet(options['qnet'])
            train = splits['train']
            test = load_test_set(options, train.num_classes)
            if options['holdout_split'] not in splits:
                raise CommandError(f"Unknown split {options['holdout_split']!r}; manifest has {sorted(splits)}")
            holdout = splits[options['holdout_split']]
            with Timer() as timer:
                run_dir = start_run('rollout', options, config.seed)
                spec = config.classifier_spec(train.num_classes)
                rollout = run_test_time(params, train, partition, splits['unlabeled'], config.steps, spec,
                                        holdout=holdout, test_set=test)
                config_echo = config.to_dict()
                report = rollout.report
                reports.write_json(run_dir / 'config.json', config_echo)
                reports.write_csv(run_dir / 'rollout_trace.csv', reports.TRACE_HEADER,
                                  [asdict(row) for row in rollout.trace])
                rollout.ensemble.save(run_dir / 'ensemble.json')
                reports.write_json(run_dir / 'report.json', {**report.to_dict(), 'config': config_echo})
            finish_run('rollout', options, run_dir, config_echo, timer.seconds, seed=config.seed,
                       report=report, trace=rollout.trace)

        self.stdout.write(self.style.SUCCESS(
            f"Rollout chose subsets {list(rollout.actions)}; beta={rollout.ensemble.beta}; "
            f"P={report.precision:.4f} R={report.recall:.4f} F1={report.f1:.4f} "
            f"error={100 * report.error_rate:.2f}%"
        ))
