from django.core.management.base import BaseCommand

from corpus.services import export_split_manifest, split_stratified
from harness import reports
from harness.cli import (
    Timer, add_config_arguments, add_output_arguments, build_config, command_errors, finish_run,
    load_corpus, load_splits, start_run,
)
from partition.services import partition_unlabeled


class Command(BaseCommand):
    help = 'Split a labeled corpus into train/validation/unlabeled and partition the unlabeled split into K subsets'

    def add_arguments(self, parser):
        parser.add_argument('--corpus', required=True, help="Labeled corpus (JSONL)")
        parser.add_argument('--num-classes', type=int, help="Class count N (inferred from labels when omitted)")
        parser.add_argument('--splits', help="Reuse an existing split manifest instead of splitting")
        parser.add_argument('--shingle-width', type=int)
        parser.add_argument('--num-hashes', type=int)
        parser.add_argument('--bands', type=int)
        parser.add_argument('--rows', type=int)
        parser.add_argument('--hash-seed', type=int, help="Seed of the MinHash family")
        add_config_arguments(parser)
        add_output_arguments(parser)

    def handle(self, *args, **options):
        with command_errors():
            partition_overrides = {
                key: options[option] for key, option in (
                    ('shingle_width', 'shingle_width'), ('num_hashes', 'num_hashes'),
                    ('bands', 'bands'), ('rows', 'rows'), ('seed', 'hash_seed'),
                ) if options.get(option) is not None
            }
            config = build_config(options).with_overrides(partition=partition_overrides or None)
            with Timer() as timer:
                run_dir = start_run('partition', options, config.seed)
                corpus = load_corpus(options)
                if options.get('splits'):
                    splits = load_splits(options, corpus)
                    train, validation, unlabeled = splits['train'], splits['validation'], splits['unlabeled']
                else:
                    train, validation, unlabeled = split_stratified(corpus, config.split_spec())
                export_split_manifest(
                    {'train': train, 'validation': validation, 'unlabeled': unlabeled}, run_dir / 'splits.csv',
                )
                partition = partition_unlabeled(unlabeled, config.subsets, config.partition)
                partition.save(run_dir / 'partition.json')
                config_echo = config.to_dict()
                reports.write_json(run_dir / 'config.json', config_echo)
            finish_run('partition', options, run_dir, config_echo, timer.seconds, seed=config.seed)

        sizes = [len(members) for members in partition.subsets]
        self.stdout.write(self.style.SUCCESS(
            f"Partitioned {len(unlabeled)} unlabeled documents into {partition.k} subsets "
            f"(sizes {min(sizes)}..{max(sizes)}); outputs in {run_dir}"
        ))
