"""
The Q-network.

Each of the K state blocks P1_i || P2_i (length 2N) goes through a shared embedding
F: 2N -> y with tanh; the K embeddings are concatenated and fed to a tanh hidden
layer, then to an output layer with one score per subset. The 'softmax' head turns
the scores into Q-values that sum to 1; the 'linear' head uses the raw scores.

Forward and backward passes are written out by hand over numpy arrays.
"""
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.special import softmax

HEADS = ('softmax', 'linear')
ARRAY_NAMES = ('W_f', 'b_f', 'W_h', 'b_h', 'W_o', 'b_o')


class AgentError(ValueError):
    """Raised for inconsistent network dimensions or invalid learning parameters."""


@dataclass(frozen=True)
class QNetworkParams:
    num_subsets: int
    num_classes: int
    embed_dim: int
    hidden_units: int
    head: str
    seed: int
    W_f: np.ndarray = field(repr=False)
    b_f: np.ndarray = field(repr=False)
    W_h: np.ndarray = field(repr=False)
    b_h: np.ndarray = field(repr=False)
    W_o: np.ndarray = field(repr=False)
    b_o: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.head not in HEADS:
            raise AgentError(f"Unknown head {self.head!r}; expected one of {HEADS}")
        K, y, H = self.num_subsets, self.embed_dim, self.hidden_units
        expected = {
            'W_f': (self.block_dim, y), 'b_f': (y,),
            'W_h': (K * y, H), 'b_h': (H,),
            'W_o': (H, K), 'b_o': (K,),
        }
        for name, shape in expected.items():
            array = np.asarray(getattr(self, name), dtype=np.float64)
            if array.shape != shape:
                raise AgentError(f"{name} has shape {array.shape}, expected {shape}")
            object.__setattr__(self, name, array)

    @property
    def block_dim(self):
        return 2 * self.num_classes

    @property
    def state_dim(self):
        return self.num_subsets * self.block_dim

    def arrays(self):
        return {name: getattr(self, name) for name in ARRAY_NAMES}

    def copy(self):
        return self.with_arrays({name: array.copy() for name, array in self.arrays().items()})

    def with_arrays(self, arrays):
        meta = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ARRAY_NAMES}
        return QNetworkParams(**meta, **arrays)

    def to_dict(self):
        data = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ARRAY_NAMES}
        data['arrays'] = {name: array.tolist() for name, array in self.arrays().items()}
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            arrays = {name: np.asarray(data['arrays'][name], dtype=np.float64) for name in ARRAY_NAMES}
            meta = {key: data[key] for key in ('num_subsets', 'num_classes', 'embed_dim', 'hidden_units', 'head', 'seed')}
        except KeyError as exc:
            raise AgentError(f"Malformed Q-network record: missing {exc.args[0]!r}") from exc
        return cls(**meta, **arrays)

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True) + '\n', encoding='utf-8')
        return path

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))


def init_params(num_subsets, num_classes, embed_dim=3, hidden_units=128, seed=0,
                init_scale=0.05, head='softmax'):
    """Seeded uniform(-init_scale, init_scale) initialisation of every weight and bias."""
    for name, value in (('num_subsets', num_subsets), ('num_classes', num_classes),
                        ('embed_dim', embed_dim), ('hidden_units', hidden_units)):
        if value < 1:
            raise AgentError(f"{name} must be >= 1, got {value}")
    rng = np.random.default_rng(seed)
    K, y, H = num_subsets, embed_dim, hidden_units
    shapes = {
        'W_f': (2 * num_classes, y), 'b_f': (y,),
        'W_h': (K * y, H), 'b_h': (H,),
        'W_o': (H, K), 'b_o': (K,),
    }
    arrays = {name: rng.uniform(-init_scale, init_scale, size=shape) for name, shape in shapes.items()}
    return QNetworkParams(num_subsets=K, num_classes=num_classes, embed_dim=y, hidden_units=H,
                          head=head, seed=seed, **arrays)


def forward(params, state):
    """Q-values for every action plus the activations backward() needs."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (params.state_dim,):
        raise AgentError(f"State has shape {state.shape}, expected ({params.state_dim},)")
    blocks = state.reshape(params.num_subsets, params.block_dim)
    e = np.tanh(blocks @ params.W_f + params.b_f)
    x = e.reshape(-1)
    h = np.tanh(x @ params.W_h + params.b_h)
    z = h @ params.W_o + params.b_o
    q = softmax(z) if params.head == 'softmax' else z
    return q, (blocks, e, x, h, q)


def backward(params, cache, grad_q):
    """Gradients of sum(grad_q * Q) with respect to every parameter array."""
    blocks, e, x, h, q = cache
    grad_q = np.asarray(grad_q, dtype=np.float64)
    if params.head == 'softmax':
        grad_z = q * (grad_q - grad_q @ q)
    else:
        grad_z = grad_q

    grad_h = (params.W_o @ grad_z) * (1.0 - h ** 2)
    grad_e = (params.W_h @ grad_h).reshape(e.shape) * (1.0 - e ** 2)
    return {
        'W_o': np.outer(h, grad_z),
        'b_o': grad_z,
        'W_h': np.outer(x, grad_h),
        'b_h': grad_h,
        'W_f': blocks.T @ grad_e,
        'b_f': grad_e.sum(axis=0),
    }


def q_forward(params, state):
    """K action scores for a state vector."""
    return forward(params, state)[0]
