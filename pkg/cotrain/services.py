"""
Co-training engine: pseudo-labeling, the mutual update step, and the baseline
subset-selection policies (random and high-confidence).
"""
import logging
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Optional, Tuple

import numpy as np

from classifiers.services import ClassifierSpec, LabeledExample, accuracy
from ensemble.services import Ensemble

logger = logging.getLogger(__name__)


class CoTrainError(ValueError):
    """Raised for invalid co-training steps or baseline parameters."""


def pseudo_label(model, docs):
    """Label documents with the model's argmax prediction, weight 1.0."""
    docs = list(docs)
    if not docs:
        return ()
    predictions = np.argmax(model.predict_proba_many(docs), axis=1)
    return tuple(LabeledExample(doc, int(label), 1.0) for doc, label in zip(docs, predictions))


@dataclass(frozen=True)
class CoTrainState:
    """
    Classifier pair and pseudo-label pools of one co-training episode.

    pool_for_c1 holds labels produced by C2 (they train C1); pool_for_c2 holds labels
    produced by C1. Both are keyed by subset index.
    """
    c1: object
    c2: object
    seed_set: Tuple[LabeledExample, ...]
    subsets: Tuple[Tuple[object, ...], ...]
    spec: ClassifierSpec
    pool_for_c1: Mapping[int, Tuple[LabeledExample, ...]] = field(default_factory=dict)
    pool_for_c2: Mapping[int, Tuple[LabeledExample, ...]] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        if self.c1.view != 'view1' or self.c2.view != 'view2':
            raise CoTrainError(f"C1 must read view1 and C2 view2, got {self.c1.view}/{self.c2.view}")
        object.__setattr__(self, 'seed_set', tuple(self.seed_set))
        object.__setattr__(self, 'pool_for_c1', MappingProxyType(dict(self.pool_for_c1)))
        object.__setattr__(self, 'pool_for_c2', MappingProxyType(dict(self.pool_for_c2)))

    @property
    def k(self):
        return len(self.subsets)

    def training_set(self, pool):
        """Seed set plus every pooled pseudo-label, in subset-index order."""
        examples = list(self.seed_set)
        for index in sorted(pool):
            examples.extend(pool[index])
        return examples


def seed_state(seed_set, subsets, spec):
    """Train C1 and C2 on the seeding set and start an episode."""
    seed_set = tuple(seed_set)
    c1 = spec.fit(seed_set, 'view1')
    c2 = spec.fit(seed_set, 'view2')
    return CoTrainState(c1=c1, c2=c2, seed_set=seed_set, subsets=tuple(map(tuple, subsets)), spec=spec)


def cotrain_step(state, subset_index):
    """
    One mutual update on subset U_i:
    C1 labels U_i, C2 retrains on L + its pool; the updated C2 labels U_i, C1 retrains likewise.
    Re-selecting a subset replaces its pool entry with fresh labels.
    """
    if not 0 <= subset_index < state.k:
        raise CoTrainError(f"Subset index {subset_index} out of range for K={state.k}")
    docs = state.subsets[subset_index]
    if not docs:
        logger.warning(f"Step {state.step}: subset {subset_index} is empty")

    pool_for_c2 = dict(state.pool_for_c2)
    pool_for_c2[subset_index] = pseudo_label(state.c1, docs)
    c2 = state.spec.fit(state.training_set(pool_for_c2), 'view2')

    pool_for_c1 = dict(state.pool_for_c1)
    pool_for_c1[subset_index] = pseudo_label(c2, docs)
    c1 = state.spec.fit(state.training_set(pool_for_c1), 'view1')

    return replace(state, c1=c1, c2=c2, pool_for_c1=pool_for_c1, pool_for_c2=pool_for_c2, step=state.step + 1)


class SelectionPolicy:
    """Chooses the next subset to co-train on."""
    kind = None

    def reset(self):
        """Forget per-episode history."""

    def choose(self, state):
        raise NotImplementedError


class RandomPolicy(SelectionPolicy):
    """Uniform choice over all K subsets (standard co-training)."""
    kind = 'random'

    def __init__(self, seed=0):
        self.seed = seed
        self.reset()

    def reset(self):
        self._rng = np.random.default_rng(self.seed)

    def choose(self, state):
        return int(self._rng.integers(state.k))


class ConfidencePolicy(SelectionPolicy):
    """
    Picks the unused subset on which both classifiers are most confident:
    mean over its documents of max(P1) * max(P2). Once every subset has been used,
    all become selectable again.
    """
    kind = 'high-confidence'

    def __init__(self):
        self.reset()

    def reset(self):
        self._used = set()

    def scores(self, state):
        scores = np.full(state.k, -np.inf)
        for index, docs in enumerate(state.subsets):
            if not docs:
                continue
            top1 = state.c1.predict_proba_many(docs).max(axis=1)
            top2 = state.c2.predict_proba_many(docs).max(axis=1)
            scores[index] = float(np.mean(top1 * top2))
        return scores

    def choose(self, state):
        if len(self._used) >= state.k:
            self._used.clear()
        scores = self.scores(state)
        for index in self._used:
            scores[index] = -np.inf
        if np.isneginf(scores).all():
            # only empty subsets remain
            choice = min(set(range(state.k)) - self._used)
        else:
            choice = int(np.argmax(scores))
        self._used.add(choice)
        return choice


def make_policy(kind, seed=0):
    if kind == 'random':
        return RandomPolicy(seed)
    if kind in ('high-confidence', 'confidence'):
        return ConfidencePolicy()
    raise CoTrainError(f"Unknown baseline policy {kind!r}")


@dataclass(frozen=True)
class StepMetrics:
    """One row of a co-training trace."""
    step: int
    chosen_subset: int
    acc_c1: Optional[float] = None
    acc_c2: Optional[float] = None
    acc_ensemble: Optional[float] = None


def step_metrics(state, chosen_subset, eval_set=None, beta=0.5):
    """Trace row after a step; accuracies only when an evaluation set is given."""
    if eval_set is None or len(eval_set) == 0:
        return StepMetrics(state.step, chosen_subset)
    return StepMetrics(
        step=state.step,
        chosen_subset=chosen_subset,
        acc_c1=accuracy(state.c1, eval_set),
        acc_c2=accuracy(state.c2, eval_set),
        acc_ensemble=accuracy(Ensemble(state.c1, state.c2, beta), eval_set),
    )


def run_baseline(policy, partition, unlabeled, seed_set, steps, spec, eval_set=None):
    """
    Co-train for a fixed number of steps, choosing subsets with a baseline policy.

    Args:
        policy: SelectionPolicy (random or high-confidence)
        partition: Partition of the unlabeled dataset
        unlabeled: the unlabeled dataset the partition refers to
        seed_set: gold LabeledExamples (L)
        steps: number of co-training steps T
        spec: ClassifierSpec used for every (re)training
        eval_set: optional labeled dataset for per-step accuracies

    Returns:
        (final CoTrainState, tuple of StepMetrics)
    """
    if steps < 1:
        raise CoTrainError(f"T must be >= 1, got {steps}")
    policy.reset()
    state = seed_state(seed_set, partition.documents(unlabeled), spec)
    trace = []
    for _ in range(steps):
        choice = policy.choose(state)
        state = cotrain_step(state, choice)
        trace.append(step_metrics(state, choice, eval_set))
        logger.debug(f"{policy.kind} baseline step {state.step}: subset {choice}")
    logger.info(f"{policy.kind} baseline finished {steps} steps")
    return state, tuple(trace)
