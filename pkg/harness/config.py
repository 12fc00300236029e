"""
Episode configuration: defaults from settings.COTRAINING, overlaid by a JSON file,
overlaid by explicit values (later wins).
"""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from django.conf import settings

from classifiers.services import KINDS, ClassifierError, ClassifierSpec, Hyperparams
from corpus.services import SplitSpec
from partition.minhash import PartitionError
from partition.services import PartitionParams
from qagent.network import HEADS
from qagent.services import EpsilonSchedule


class HarnessError(ValueError):
    """Raised for invalid experiment configuration or harness inputs."""


# settings.COTRAINING keys that map onto nested configuration objects
PARTITION_KEYS = {
    'SHINGLE_WIDTH': 'shingle_width',
    'NUM_HASHES': 'num_hashes',
    'BANDS': 'bands',
    'ROWS': 'rows',
}


@dataclass(frozen=True)
class EpisodeConfig:
    episodes: int = 30
    steps: int = 20
    subsets: int = 16
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    epsilon_decay_fraction: float = 0.6
    learning_rate: float = 0.01
    target_refresh_interval: int = 20
    embed_dim: int = 3
    hidden_units: int = 128
    head: str = 'softmax'
    init_scale: float = 0.05
    classifier_kind: str = 'naive-bayes'
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    partition: PartitionParams = field(default_factory=PartitionParams)
    seed_size: int = 0
    frac_train: float = 0.1
    frac_validation: float = 0.1
    frac_unlabeled: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.hyperparams, dict):
            object.__setattr__(self, 'hyperparams', Hyperparams.from_dict(self.hyperparams))
        if isinstance(self.partition, dict):
            try:
                object.__setattr__(self, 'partition', PartitionParams.from_dict(self.partition))
            except PartitionError as exc:
                raise HarnessError(f"Invalid partition configuration: {exc}") from exc
        self.validate()

    def validate(self):
        for name in ('episodes', 'steps', 'subsets', 'target_refresh_interval', 'embed_dim', 'hidden_units'):
            if getattr(self, name) < 1:
                raise HarnessError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ('gamma', 'epsilon_start', 'epsilon_end', 'epsilon_decay_fraction'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise HarnessError(f"{name} must be in [0, 1], got {value}")
        if self.learning_rate <= 0:
            raise HarnessError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.init_scale < 0:
            raise HarnessError(f"init_scale must be >= 0, got {self.init_scale}")
        if self.head not in HEADS:
            raise HarnessError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.classifier_kind not in KINDS:
            raise HarnessError(f"classifier_kind must be one of {KINDS}, got {self.classifier_kind!r}")
        if self.seed_size < 0:
            raise HarnessError(f"seed_size must be >= 0, got {self.seed_size}")
        self.split_spec()
        return True

    @property
    def total_steps(self):
        return self.episodes * self.steps

    def classifier_spec(self, num_classes):
        try:
            return ClassifierSpec(self.classifier_kind, num_classes, self.hyperparams)
        except ClassifierError as exc:
            raise HarnessError(str(exc)) from exc

    def epsilon_schedule(self):
        return EpsilonSchedule(total_steps=self.total_steps, start=self.epsilon_start,
                               end=self.epsilon_end, decay_fraction=self.epsilon_decay_fraction)

    def split_spec(self, seed=None):
        try:
            return SplitSpec(self.frac_train, self.frac_validation, self.frac_unlabeled,
                             self.seed if seed is None else seed)
        except ValueError as exc:
            raise HarnessError(f"Invalid split fractions: {exc}") from exc

    def with_overrides(self, **overrides):
        """Copy with every non-None override applied."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise HarnessError(f"Unknown configuration keys: {sorted(unknown)}")
        values = {key: value for key, value in overrides.items() if value is not None}
        if isinstance(values.get('partition'), dict):
            values['partition'] = {**asdict(self.partition), **values['partition']}
        try:
            if isinstance(values.get('hyperparams'), dict):
                values['hyperparams'] = replace(self.hyperparams, **values['hyperparams'])
            return replace(self, **values)
        except TypeError as exc:
            raise HarnessError(f"Invalid configuration value: {exc}") from exc

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_settings(cls, **overrides):
        """Defaults from settings.COTRAINING, then the given overrides."""
        defaults = getattr(settings, 'COTRAINING', {})
        known = {f.name for f in fields(cls)}
        values = {}
        partition = {}
        for key, value in defaults.items():
            if key in PARTITION_KEYS:
                partition[PARTITION_KEYS[key]] = value
            elif key.lower() in known:
                values[key.lower()] = value
        if partition:
            values['partition'] = partition
        return cls(**values).with_overrides(**overrides)

    @classmethod
    def from_json(cls, path, base=None):
        """Overlay a JSON configuration file onto base (settings defaults when omitted)."""
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as exc:
            raise HarnessError(f"Cannot read configuration {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise HarnessError(f"{path}: configuration must be a JSON object")
        base = base or cls.from_settings()
        return base.with_overrides(**data)
