from django.core.management.base import BaseCommand

from corpus.services import dump_jsonl, swap_views, synth_generate
from harness import reports
from harness.cli import Timer, add_output_arguments, command_errors, finish_run, start_run


class Command(BaseCommand):
    help = 'Generate a synthetic two-view corpus (and optionally a test corpus) as JSONL'

    def add_arguments(self, parser):
        parser.add_argument('--num-classes', type=int, default=2)
        parser.add_argument('--docs-per-class', type=int, default=100)
        parser.add_argument('--vocab', type=int, default=200, help="Vocabulary size per class and view")
        parser.add_argument('--noise', type=float, default=0.1, help="Per-token probability of an off-class token")
        parser.add_argument('--view1-length', type=int, default=8)
        parser.add_argument('--view2-length', type=int, default=24)
        parser.add_argument('--swap-rate', type=float, default=0.0,
                            help="Fraction of corpus documents whose view2 is taken from another class")
        parser.add_argument('--test-docs-per-class', type=int, default=0,
                            help="Also write test.jsonl with this many documents per class")
        parser.add_argument('--seed', type=int, default=0)
        add_output_arguments(parser)

    def handle(self, *args, **options):
        seed = options['seed']
        params = {
            'num_classes': options['num_classes'],
            'vocab_per_view': options['vocab'],
            'view_noise': options['noise'],
            'view1_length': options['view1_length'],
            'view2_length': options['view2_length'],
        }
        with command_errors():
            with Timer() as timer:
                run_dir = start_run('synth', options, seed)
                corpus = synth_generate(docs_per_class=options['docs_per_class'], seed=seed, **params)
                if options['swap_rate'] > 0:
                    corpus = swap_views(corpus, options['swap_rate'], seed=seed + 2)
                dump_jsonl(corpus, run_dir / 'corpus.jsonl')
                if options['test_docs_per_class'] > 0:
                    test = synth_generate(docs_per_class=options['test_docs_per_class'], seed=seed + 1,
                                          id_prefix='test', **params)
                    dump_jsonl(test, run_dir / 'test.jsonl')
                config_echo = {**params, 'docs_per_class': options['docs_per_class'],
                               'test_docs_per_class': options['test_docs_per_class'],
                               'swap_rate': options['swap_rate'], 'seed': seed}
                reports.write_json(run_dir / 'config.json', config_echo)
            finish_run('synth', options, run_dir, config_echo, timer.seconds, seed=seed)

        self.stdout.write(self.style.SUCCESS(f"Wrote {len(corpus)} documents to {run_dir / 'corpus.jsonl'}"))
