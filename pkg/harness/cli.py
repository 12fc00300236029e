"""
Argument wiring shared by the harness management commands.
"""
import logging
import time
from contextlib import contextmanager
from pathlib import Path

from django.core.management.base import CommandError

from classifiers.services import ClassifierError
from corpus.documents import CorpusError
from corpus.services import load_jsonl, load_split_manifest
from cotrain.services import CoTrainError
from ensemble.services import EnsembleError
from partition.minhash import PartitionError
from partition.services import Partition
from qagent.network import AgentError, QNetworkParams

from . import reports
from .config import EpisodeConfig, HarnessError
from .services import record_run, recording_enabled

logger = logging.getLogger(__name__)

DOMAIN_ERRORS = (
    CorpusError, PartitionError, ClassifierError, CoTrainError, AgentError, EnsembleError, HarnessError,
)

# EpisodeConfig field -> command-line flag
CONFIG_FLAGS = {
    'episodes': ('--episodes', int, "Training episodes M"),
    'steps': ('--steps', int, "Co-training steps per episode T"),
    'subsets': ('--subsets', int, "Number of unlabeled subsets K"),
    'gamma': ('--gamma', float, "Discount factor"),
    'epsilon_start': ('--epsilon-start', float, "Initial exploration rate"),
    'epsilon_end': ('--epsilon-end', float, "Final exploration rate"),
    'epsilon_decay_fraction': ('--epsilon-decay-fraction', float, "Share of training steps spent decaying epsilon"),
    'learning_rate': ('--learning-rate', float, "Q-network SGD step size"),
    'target_refresh_interval': ('--target-refresh-interval', int, "Q-updates between target network refreshes"),
    'embed_dim': ('--embed-dim', int, "Per-subset embedding size y"),
    'hidden_units': ('--hidden-units', int, "Hidden layer width"),
    'head': ('--head', str, "Q-network output head: softmax or linear"),
    'init_scale': ('--init-scale', float, "Half-width of the uniform weight initialisation"),
    'classifier_kind': ('--classifier', str, "View classifier: naive-bayes or logistic"),
    'seed_size': ('--seed-size', int, "Seeding-set size for the robustness seeds protocol"),
}


def add_config_arguments(parser, seed_required=False):
    parser.add_argument('--config', help="JSON file overlaying the settings defaults")
    parser.add_argument('--seed', type=int, required=seed_required, help="Random seed")
    for name, (flag, kind, help_text) in CONFIG_FLAGS.items():
        parser.add_argument(flag, dest=name, type=kind, help=help_text)


def add_data_arguments(parser, partition=True, partition_required=True, test=False):
    parser.add_argument('--corpus', required=True, help="Labeled corpus (JSONL)")
    parser.add_argument('--num-classes', type=int, help="Class count N (inferred from labels when omitted)")
    parser.add_argument('--splits', required=True, help="Split manifest CSV written by the partition command")
    if partition:
        parser.add_argument('--partition', dest='partition_file', required=partition_required, help="Partition JSON")
    if test:
        parser.add_argument('--test', required=True, help="Labeled test corpus (JSONL)")


def add_output_arguments(parser):
    parser.add_argument('--runs-dir', help="Directory under which the run directory is created")
    parser.add_argument('--no-record', action='store_true', help="Do not store the run in the database")


def build_config(options):
    """Settings defaults, then --config, then explicit flags."""
    config = EpisodeConfig.from_settings()
    if options.get('config'):
        config = EpisodeConfig.from_json(options['config'], base=config)
    overrides = {name: options.get(name) for name in CONFIG_FLAGS}
    overrides['seed'] = options.get('seed')
    return config.with_overrides(**overrides)


def load_corpus(options):
    return load_jsonl(options['corpus'], num_classes=options.get('num_classes'))


def load_splits(options, corpus=None):
    """train / validation / unlabeled datasets named by the split manifest."""
    if corpus is None:
        corpus = load_corpus(options)
    splits = load_split_manifest(corpus, options['splits'])
    missing = {'train', 'validation', 'unlabeled'} - set(splits)
    if missing:
        raise HarnessError(f"{options['splits']}: missing splits {sorted(missing)}")
    return splits


def load_partition(options):
    if not options.get('partition_file'):
        return None
    return Partition.load(options['partition_file'])


def load_test_set(options, num_classes):
    return load_jsonl(options['test'], num_classes=num_classes)


def load_qnet(path):
    return QNetworkParams.load(path)


@contextmanager
def command_errors():
    """Turn domain errors into CommandError so the CLI exits with one line."""
    try:
        yield
    except DOMAIN_ERRORS as exc:
        raise CommandError(str(exc)) from exc
    except OSError as exc:
        raise CommandError(f"{exc.strerror}: {exc.filename}") from exc


class Timer:
    def __enter__(self):
        self.started = time.perf_counter()
        self.seconds = 0.0
        return self

    def __exit__(self, *exc_info):
        self.seconds = time.perf_counter() - self.started
        return False


def start_run(command, options, seed):
    return reports.make_run_dir(command, seed, root=options.get('runs_dir'))


def finish_run(command, options, run_dir, config_echo, seconds, seed=None, **record):
    """Write timing.json and store the run unless recording is off."""
    reports.write_json(Path(run_dir) / 'timing.json', {'command': command, 'wall_clock_seconds': seconds})
    if options.get('no_record') or not recording_enabled():
        return None
    try:
        return record_run(command, config_echo, run_dir=run_dir, seed=seed, wall_clock_seconds=seconds, **record)
    except Exception as e:
        logger.error(f"Error recording {command} run: {str(e)}")
        raise
