"""
Q-learning over subset selection: state construction, epsilon-greedy action choice,
the accuracy-delta reward and the one-transition Bellman update.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .network import AgentError, backward, forward, init_params, q_forward

logger = logging.getLogger(__name__)


def _check_unit_interval(name, value):
    if not 0.0 <= value <= 1.0:
        raise AgentError(f"{name} must be in [0, 1], got {value}")


def state_representation(c1, c2, representatives):
    """
    Build the state vector from both classifiers' view of every representative.

    Block i is predict_proba(c1, S_i) followed by predict_proba(c2, S_i); the blocks
    are laid out in partition order, giving a vector of length K * 2N.
    """
    representatives = list(representatives)
    if not representatives:
        raise AgentError("At least one representative is required")
    if c1.num_classes != c2.num_classes:
        raise AgentError(f"Classifiers disagree on class count ({c1.num_classes} vs {c2.num_classes})")
    p1 = c1.predict_proba_many(representatives)
    p2 = c2.predict_proba_many(representatives)
    return np.hstack([p1, p2]).reshape(-1)


def select_action(q_values, epsilon, rng):
    """Uniform random action with probability epsilon, otherwise the first argmax."""
    _check_unit_interval('epsilon', epsilon)
    q_values = np.asarray(q_values, dtype=np.float64)
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))


def reward(acc1_prev, acc1_now, acc2_prev, acc2_now):
    """Product of both accuracy gains when both are strictly positive, else 0."""
    r1 = acc1_now - acc1_prev
    r2 = acc2_now - acc2_prev
    if r1 > 0 and r2 > 0:
        return float(r1 * r2)
    return 0.0


def bellman_target(r, s_next, target_params, gamma, terminal):
    _check_unit_interval('gamma', gamma)
    if terminal:
        return float(r)
    return float(r + gamma * np.max(q_forward(target_params, s_next)))


@dataclass(frozen=True)
class Transition:
    s: np.ndarray = field(repr=False)
    a: int
    r: float
    s_next: np.ndarray = field(repr=False)
    terminal: bool = False

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64)
        s_next = np.asarray(self.s_next, dtype=np.float64)
        if s.shape != s_next.shape:
            raise AgentError(f"State shapes differ: {s.shape} vs {s_next.shape}")
        if self.r < 0:
            raise AgentError(f"Reward must be >= 0, got {self.r}")
        if self.a < 0:
            raise AgentError(f"Action must be >= 0, got {self.a}")
        object.__setattr__(self, 's', s)
        object.__setattr__(self, 's_next', s_next)

    def check_actions(self, num_actions):
        if not 0 <= self.a < num_actions:
            raise AgentError(f"Action {self.a} outside [0, {num_actions})")


def td_loss_and_grads(params, transition, target_value):
    """Squared error (V - Q(s, a))^2 and its gradient with respect to params."""
    transition.check_actions(params.num_subsets)
    q, cache = forward(params, transition.s)
    error = target_value - q[transition.a]
    grad_q = np.zeros_like(q)
    grad_q[transition.a] = -2.0 * error
    return float(error ** 2), backward(params, cache, grad_q)


def q_update(params, transition, target_params, gamma, learning_rate):
    """One SGD step on the Bellman loss; target_params stay frozen. Returns new params."""
    if learning_rate <= 0:
        raise AgentError(f"learning_rate must be > 0, got {learning_rate}")
    target_value = bellman_target(transition.r, transition.s_next, target_params, gamma, transition.terminal)
    _, grads = td_loss_and_grads(params, transition, target_value)
    return params.with_arrays({
        name: array - learning_rate * grads[name] for name, array in params.arrays().items()
    })


def discounted_return(rewards, gamma):
    _check_unit_interval('gamma', gamma)
    total = 0.0
    for reward_value in reversed(list(rewards)):
        total = reward_value + gamma * total
    return float(total)


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from start to end over the first decay_fraction of total_steps, then flat."""
    total_steps: int
    start: float = 1.0
    end: float = 0.1
    decay_fraction: float = 0.6

    def __post_init__(self):
        if self.total_steps < 1:
            raise AgentError(f"total_steps must be >= 1, got {self.total_steps}")
        _check_unit_interval('epsilon start', self.start)
        _check_unit_interval('epsilon end', self.end)
        _check_unit_interval('decay_fraction', self.decay_fraction)

    def value(self, step):
        decay_steps = self.decay_fraction * self.total_steps
        if decay_steps <= 0 or step >= decay_steps:
            return self.end
        return self.start + (self.end - self.start) * (step / decay_steps)


class QAgent:
    """
    Online learner owning the Q-network, its frozen target copy and the exploration RNG.

    The target copy is refreshed every ``target_refresh_interval`` updates; an interval
    of 1 makes every Bellman target use the parameters as they stand before that update.
    """

    def __init__(self, params, gamma=0.9, learning_rate=0.01, target_refresh_interval=20, seed=0):
        _check_unit_interval('gamma', gamma)
        if learning_rate <= 0:
            raise AgentError(f"learning_rate must be > 0, got {learning_rate}")
        if target_refresh_interval < 1:
            raise AgentError(f"target_refresh_interval must be >= 1, got {target_refresh_interval}")
        self.params = params
        self.target_params = params.copy()
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.target_refresh_interval = target_refresh_interval
        self.rng = np.random.default_rng(seed)
        self.updates = 0

    @classmethod
    def create(cls, num_subsets, num_classes, embed_dim=3, hidden_units=128, head='softmax',
               init_scale=0.05, gamma=0.9, learning_rate=0.01, target_refresh_interval=20, seed=0):
        params = init_params(num_subsets, num_classes, embed_dim=embed_dim, hidden_units=hidden_units,
                             seed=seed, init_scale=init_scale, head=head)
        return cls(params, gamma=gamma, learning_rate=learning_rate,
                   target_refresh_interval=target_refresh_interval, seed=seed)

    def q_values(self, state):
        return q_forward(self.params, state)

    def act(self, state, epsilon):
        return select_action(self.q_values(state), epsilon, self.rng)

    def learn(self, transition):
        """Apply one update; returns (loss before the step, Bellman target)."""
        target_value = bellman_target(transition.r, transition.s_next, self.target_params,
                                      self.gamma, transition.terminal)
        loss, grads = td_loss_and_grads(self.params, transition, target_value)
        self.params = self.params.with_arrays({
            name: array - self.learning_rate * grads[name] for name, array in self.params.arrays().items()
        })
        self.updates += 1
        if self.updates % self.target_refresh_interval == 0:
            self.target_params = self.params.copy()
            logger.debug(f"Target network refreshed after {self.updates} updates")
        return loss, target_value
