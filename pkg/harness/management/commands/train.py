from dataclasses import asdict

from django.core.management.base import BaseCommand

from harness import reports
from harness.cli import (
    Timer, add_config_arguments, add_data_arguments, add_output_arguments, build_config, command_errors,
    finish_run, load_partition, load_splits, start_run,
)
from harness.services import train_policy


class Command(BaseCommand):
    help = 'Learn the subset-selection Q-policy on the train/validation/unlabeled splits'

    def add_arguments(self, parser):
        add_data_arguments(parser)
        add_config_arguments(parser, seed_required=True)
        add_output_arguments(parser)

    def handle(self, *args, **options):
        with command_errors():
            config = build_config(options)
            splits = load_splits(options)
            partition = load_partition(options)
            with Timer() as timer:
                run_dir = start_run('train', options, config.seed)
                result = train_policy(config, splits['train'], splits['validation'], partition, splits['unlabeled'])
                config_echo = config.to_dict()
                reports.write_json(run_dir / 'config.json', config_echo)
                result.params.save(run_dir / 'qnet.json')
                reports.write_csv(
                    run_dir / 'training_log.csv', reports.TRAINING_LOG_HEADER,
                    [asdict(row) for row in result.log],
                )
            mean_return = sum(result.episode_returns) / len(result.episode_returns)
            finish_run('train', options, run_dir, config_echo, timer.seconds, seed=config.seed,
                       training_log=result.log, metrics={'mean_episode_return': mean_return})

        self.stdout.write(self.style.SUCCESS(
            f"Trained for {config.episodes} episodes x {config.steps} steps "
            f"(mean discounted return {mean_return:.6f}); Q-network saved to {run_dir / 'qnet.json'}"
        ))
