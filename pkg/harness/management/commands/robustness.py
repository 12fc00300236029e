from django.core.management.base import BaseCommand

from harness import reports
from harness.cli import (
    Timer, add_config_arguments, add_data_arguments, add_output_arguments, build_config, command_errors,
    finish_run, load_corpus, load_partition, load_qnet, load_splits, load_test_set, start_run,
)
from harness.services import METRICS, ROBUSTNESS_MODES, robustness_eval


class Command(BaseCommand):
    help = 'Re-run a trained policy over re-sampled seeding sets or re-partitioned data'

    def add_arguments(self, parser):
        parser.add_argument('--qnet', required=True, help="Q-network JSON written by the train command")
        parser.add_argument('--mode', choices=ROBUSTNESS_MODES, default='seeds')
        parser.add_argument('--replicas', type=int, default=10)
        parser.add_argument('--metric', choices=METRICS, default='f1')
        parser.add_argument('--identical', action='store_true', help="Reuse the first replica's inputs everywhere")
        parser.add_argument('--workers', type=int, default=1, help="Replicas run concurrently")
        add_data_arguments(parser, test=True)
        add_config_arguments(parser, seed_required=True)
        add_output_arguments(parser)

    def handle(self, *args, **options):
        with command_errors():
            config = build_config(options)
            corpus = load_corpus(options)
            splits = load_splits(options, corpus)
            partition = load_partition(options)
            params = load_qnet(options['qnet'])
            test = load_test_set(options, corpus.num_classes)
            mode = options['mode']
            replicas = options['replicas']

            if mode == 'seeds':
                pool = splits['train']
                seed_size = config.seed_size or len(pool) // (1 if options['identical'] else replicas)
            else:
                pool = corpus
                seed_size = None

            with Timer() as timer:
                run_dir = start_run('robustness', options, config.seed)
                result = robustness_eval(
                    params, pool, config, test, partition=partition, unlabeled=splits['unlabeled'],
                    validation=splits['validation'], num_replicas=replicas, seed=config.seed, mode=mode,
                    seed_size=seed_size, metric=options['metric'], identical=options['identical'],
                    workers=options['workers'],
                )
                config_echo = {**config.to_dict(), 'mode': mode, 'replicas': replicas,
                               'identical': options['identical'], 'metric': options['metric']}
                reports.write_json(run_dir / 'config.json', config_echo)
                reports.write_csv(run_dir / 'replicas.csv', reports.REPLICA_HEADER, [
                    [outcome.replica, outcome.seed, result.metric, getattr(outcome.report, result.metric),
                     outcome.beta, outcome.validation_reads_during_rollout]
                    for outcome in result.replicas
                ])
                reports.write_csv(run_dir / 'summary.csv', reports.SUMMARY_HEADER,
                                  reports.summary_rows(result.summaries))
            finish_run('robustness', options, run_dir, config_echo, timer.seconds, seed=config.seed,
                       replicas=result.replicas, metric=result.metric, metrics=result.summaries)

        self.stdout.write(reports.format_summary_table(result.summaries))
        self.stdout.write(self.style.SUCCESS(f"{len(result.replicas)} replicas written to {run_dir}"))
