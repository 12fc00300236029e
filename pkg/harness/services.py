"""
Experiment orchestration: Q-policy training episodes, greedy test-time rollout,
evaluation, baseline runs, the robustness protocol and run recording.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
from django.conf import settings
from django.db import transaction
from sklearn.metrics import accuracy_score, precision_recall_fscore_support

from classifiers.services import LabeledExample, accuracy, as_examples
from cotrain.services import CoTrainError, cotrain_step, make_policy, run_baseline, seed_state, step_metrics
from corpus.documents import CorpusError
from corpus.services import split_stratified
from ensemble.services import Ensemble, fit_beta
from partition.minhash import PartitionError
from partition.services import partition_unlabeled
from qagent.network import q_forward
from qagent.services import QAgent, Transition, discounted_return, reward, select_action, state_representation

from .config import HarnessError
from .models import ExperimentRun, ReplicaResult, StepRecord

logger = logging.getLogger(__name__)

BASELINES = ('random', 'high-confidence', 'supervised-view1', 'supervised-document', 'supervised-all')
ROBUSTNESS_MODES = ('seeds', 'partitions')
METRICS = ('precision', 'recall', 'f1', 'accuracy', 'error_rate')
LOWER_IS_BETTER = {'error_rate'}


class GuardedDataset:
    """
    Read-through wrapper that counts every access to a labeled dataset.

    Used to show that the test-time rollout never looks at the validation data.
    """

    def __init__(self, dataset):
        self._dataset = dataset
        self.reads = 0

    def __iter__(self):
        self.reads += 1
        return iter(self._dataset)

    def __len__(self):
        self.reads += 1
        return len(self._dataset)

    def __getattr__(self, name):
        self.reads += 1
        return getattr(self._dataset, name)


@dataclass(frozen=True)
class TrainingLogRow:
    episode: int
    step: int
    epsilon: float
    action: int
    reward: float
    loss: float
    target: float
    acc_c1: float
    acc_c2: float


@dataclass(frozen=True)
class TrainingResult:
    params: object
    log: Tuple[TrainingLogRow, ...]
    episode_returns: Tuple[float, ...]


@dataclass(frozen=True)
class RunReport:
    """
    Final metrics of a classifier or ensemble on a test set.

    Binary tasks report precision/recall/F1 of class 1; multi-class tasks report
    macro averages. error_rate is 1 - accuracy.
    """
    num_classes: int
    support: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    error_rate: float
    per_class: dict
    beta: Optional[float] = None
    rows: Tuple[dict, ...] = ()
    config: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0

    def headline(self):
        return {name: getattr(self, name) for name in METRICS}

    def to_dict(self, include_timing=False):
        data = asdict(self)
        data['rows'] = [dict(row) for row in self.rows]
        if not include_timing:
            del data['wall_clock_seconds']
        return data


@dataclass(frozen=True)
class RolloutResult:
    ensemble: Ensemble
    actions: Tuple[int, ...]
    trace: tuple
    report: Optional[RunReport] = None


@dataclass(frozen=True)
class BaselineResult:
    kind: str
    model: object
    trace: tuple
    report: Optional[RunReport] = None


@dataclass(frozen=True)
class ReplicaOutcome:
    replica: int
    seed: int
    beta: float
    report: RunReport
    validation_reads_during_rollout: int


@dataclass(frozen=True)
class RobustnessResult:
    mode: str
    metric: str
    replicas: Tuple[ReplicaOutcome, ...]
    summaries: dict

    @property
    def summary(self):
        return self.summaries[self.metric]


def _check_training_inputs(config, labeled, validation, partition, unlabeled):
    if partition.k != config.subsets:
        raise HarnessError(f"Partition has {partition.k} subsets but the configuration asks for K={config.subsets}")
    if len(labeled) == 0:
        raise HarnessError("The labeled seeding set is empty")
    if len(validation) == 0:
        raise HarnessError("The validation set is empty")
    overlap = set(labeled.ids) & set(validation.ids)
    if overlap:
        raise HarnessError(f"Labeled and validation sets share {len(overlap)} documents, e.g. {sorted(overlap)[0]!r}")
    try:
        partition.validate(unlabeled.ids)
    except PartitionError as exc:
        raise HarnessError(f"Partition does not match the unlabeled set: {exc}") from exc


def train_policy(config, labeled, validation, partition, unlabeled):
    """
    Learn the subset-selection Q-policy.

    Every episode re-trains both classifiers from the labeled set, then runs
    config.steps steps of: epsilon-greedy action, co-training step on the chosen
    subset, reward from the validation accuracy gains, new state, Q-update.
    The Q-network persists across episodes.

    Args:
        config: validated EpisodeConfig
        labeled: gold seeding set L
        validation: labeled set L' used for rewards
        partition: Partition of the unlabeled set with exactly config.subsets subsets
        unlabeled: the unlabeled dataset the partition refers to

    Returns:
        TrainingResult with the final parameters and one log row per transition
    """
    _check_training_inputs(config, labeled, validation, partition, unlabeled)
    num_classes = labeled.num_classes
    spec = config.classifier_spec(num_classes)
    subsets = partition.documents(unlabeled)
    representatives = partition.representative_documents(unlabeled)
    seed_set = as_examples(labeled)
    validation_docs = list(validation)

    agent = QAgent.create(
        config.subsets, num_classes, embed_dim=config.embed_dim, hidden_units=config.hidden_units,
        head=config.head, init_scale=config.init_scale, gamma=config.gamma,
        learning_rate=config.learning_rate, target_refresh_interval=config.target_refresh_interval,
        seed=config.seed,
    )
    schedule = config.epsilon_schedule()
    logger.info(
        f"Training Q-policy: M={config.episodes}, T={config.steps}, K={config.subsets}, "
        f"N={num_classes}, head={config.head}, seed={config.seed}"
    )

    log = []
    episode_returns = []
    global_step = 0
    for episode in range(config.episodes):
        state = seed_state(seed_set, subsets, spec)
        acc1 = accuracy(state.c1, validation_docs)
        acc2 = accuracy(state.c2, validation_docs)
        s = state_representation(state.c1, state.c2, representatives)
        rewards = []
        for t in range(config.steps):
            epsilon = schedule.value(global_step)
            action = agent.act(s, epsilon)
            state = cotrain_step(state, action)
            acc1_now = accuracy(state.c1, validation_docs)
            acc2_now = accuracy(state.c2, validation_docs)
            r = reward(acc1, acc1_now, acc2, acc2_now)
            s_next = state_representation(state.c1, state.c2, representatives)
            terminal = t == config.steps - 1
            loss, target = agent.learn(Transition(s, action, r, s_next, terminal))
            log.append(TrainingLogRow(episode, t, epsilon, action, r, loss, target, acc1_now, acc2_now))
            logger.debug(
                f"episode {episode} step {t}: eps={epsilon:.3f} a={action} r={r:.6f} "
                f"loss={loss:.6f} V={target:.6f}"
            )
            rewards.append(r)
            s, acc1, acc2 = s_next, acc1_now, acc2_now
            global_step += 1
        episode_returns.append(discounted_return(rewards, config.gamma))
        logger.info(
            f"Episode {episode + 1}/{config.episodes}: return={episode_returns[-1]:.6f}, "
            f"final acc C1={acc1:.4f} C2={acc2:.4f}"
        )
    return TrainingResult(agent.params, tuple(log), tuple(episode_returns))


def run_test_time(params, labeled, partition, unlabeled, steps, spec, holdout=None, test_set=None,
                  step_callback=None):
    """
    Greedy co-training with a learned policy.

    The rollout loop reads only the labeled seeding set and the unlabeled subsets.
    After the loop, beta is fitted on the holdout set (0.5 when none is given) and,
    when a test set is given, the ensemble is evaluated on it.

    step_callback(step, state) is invoked after every co-training step.
    """
    if steps < 1:
        raise HarnessError(f"T must be >= 1, got {steps}")
    if len(labeled) == 0:
        raise HarnessError("The labeled seeding set is empty")
    if params.num_subsets != partition.k:
        raise HarnessError(f"Q-network expects K={params.num_subsets} but the partition has {partition.k} subsets")
    if params.num_classes != spec.num_classes:
        raise HarnessError(f"Q-network expects N={params.num_classes} but the classifiers use {spec.num_classes}")

    state = seed_state(as_examples(labeled), partition.documents(unlabeled), spec)
    representatives = partition.representative_documents(unlabeled)
    trace_docs = list(test_set) if test_set is not None else None
    actions = []
    trace = []
    for _ in range(steps):
        s = state_representation(state.c1, state.c2, representatives)
        action = select_action(q_forward(params, s), 0.0, None)
        state = cotrain_step(state, action)
        actions.append(action)
        trace.append(step_metrics(state, action, trace_docs))
        if step_callback is not None:
            step_callback(state.step, state)
    logger.info(f"Greedy rollout chose subsets {actions}")

    if holdout is not None:
        beta = fit_beta(state.c1, state.c2, holdout)
    else:
        beta = 0.5
        logger.warning("No holdout set given; using beta=0.5")
    ensemble = Ensemble(state.c1, state.c2, beta)
    report = evaluate(ensemble, test_set, trace=trace) if test_set is not None else None
    return RolloutResult(ensemble, tuple(actions), tuple(trace), report)


def evaluate(model, test_set, trace=(), config=None):
    """
    Precision/recall/F1, accuracy and error rate of a classifier or ensemble.

    Zero denominators give 0. The binary positive class is class 1.
    """
    documents = list(test_set)
    if not documents:
        raise HarnessError("Cannot evaluate on an empty test set")
    if any(doc.label is None for doc in documents):
        raise HarnessError("The test set must be labeled")
    num_classes = model.num_classes
    labels = np.array([doc.label for doc in documents])
    predictions = np.argmax(model.predict_proba_many(documents), axis=1)

    precision, recall, f1, support = precision_recall_fscore_support(
        labels, predictions, labels=list(range(num_classes)), average=None, zero_division=0,
    )
    if num_classes == 2:
        headline = (precision[1], recall[1], f1[1])
    else:
        headline = (np.mean(precision), np.mean(recall), np.mean(f1))
    acc = float(accuracy_score(labels, predictions))

    return RunReport(
        num_classes=num_classes,
        support=len(documents),
        precision=float(headline[0]),
        recall=float(headline[1]),
        f1=float(headline[2]),
        accuracy=acc,
        error_rate=1.0 - acc,
        per_class={
            'precision': [float(v) for v in precision],
            'recall': [float(v) for v in recall],
            'f1': [float(v) for v in f1],
            'support': [int(v) for v in support],
        },
        beta=getattr(model, 'beta', None),
        rows=tuple(asdict(row) if not isinstance(row, dict) else row for row in trace),
        config=dict(config or {}),
    )


def revealed_examples(unlabeled):
    """Gold-labeled examples for the unlabeled split, from the labels withheld at split time."""
    hidden = unlabeled.reveal_labels()
    missing = [doc.id for doc in unlabeled if doc.id not in hidden]
    if missing:
        raise HarnessError(f"{len(missing)} unlabeled documents have no withheld label (first: {missing[0]!r})")
    return tuple(LabeledExample(doc, int(hidden[doc.id])) for doc in unlabeled)


def supervised_baseline(kind, labeled, validation, spec, unlabeled=None):
    """
    A single supervised classifier: view1 on L, merged views on L plus L', or merged
    views on every gold label available (L, L' and the withheld unlabeled labels).
    """
    if kind == 'supervised-view1':
        return spec.fit(as_examples(labeled), 'view1')
    if kind == 'supervised-document':
        return spec.fit(as_examples(labeled) + as_examples(validation), 'document')
    if kind == 'supervised-all':
        if unlabeled is None:
            raise HarnessError("The supervised-all baseline needs the unlabeled split")
        return spec.fit(as_examples(labeled) + as_examples(validation) + revealed_examples(unlabeled), 'document')
    raise HarnessError(f"Unknown supervised baseline {kind!r}")


def run_baseline_experiment(kind, config, labeled, validation, partition=None, unlabeled=None, test_set=None):
    """
    Run one of the baseline comparisons.

    'random' and 'high-confidence' co-train for config.steps steps and fit beta on the
    validation set afterwards; the supervised baselines train a single classifier.
    """
    if kind not in BASELINES:
        raise HarnessError(f"Unknown baseline {kind!r}; expected one of {BASELINES}")
    spec = config.classifier_spec(labeled.num_classes)
    if kind.startswith('supervised'):
        model = supervised_baseline(kind, labeled, validation, spec, unlabeled)
        trace = ()
    else:
        if partition is None or unlabeled is None:
            raise HarnessError(f"The {kind} baseline needs a partition and its unlabeled set")
        try:
            policy = make_policy(kind, seed=config.seed)
            state, trace = run_baseline(
                policy, partition, unlabeled, as_examples(labeled), config.steps, spec,
                eval_set=list(test_set) if test_set is not None else None,
            )
        except CoTrainError as exc:
            raise HarnessError(str(exc)) from exc
        model = Ensemble(state.c1, state.c2, fit_beta(state.c1, state.c2, validation))
    report = evaluate(model, test_set, trace=trace, config=config.to_dict()) if test_set is not None else None
    return BaselineResult(kind, model, tuple(trace), report)


def summarize(values, lower_is_better=False):
    """Best/worst/average/sample-stddev of replica values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise HarnessError("No replica values to summarize")
    # identical replicas report exactly zero spread
    if values.size < 2 or np.all(values == values[0]):
        stddev = 0.0
    else:
        stddev = float(np.std(values, ddof=1))
    best, worst = (values.min(), values.max()) if lower_is_better else (values.max(), values.min())
    return {'best': float(best), 'worst': float(worst), 'average': float(values.mean()), 'stddev': stddev}


def _seed_replicas(pool, num_replicas, seed_size, seed, identical):
    needed = seed_size if identical else seed_size * num_replicas
    if seed_size < 1:
        raise HarnessError("The seeds protocol needs a positive seeding-set size")
    if len(pool) < needed:
        raise HarnessError(
            f"Labeled pool of {len(pool)} documents is too small for {num_replicas} "
            f"seeding sets of {seed_size}"
        )
    order = np.random.default_rng(seed).permutation(len(pool))
    ids = pool.ids
    replicas = []
    for replica in range(num_replicas):
        start = 0 if identical else replica * seed_size
        chosen = sorted(order[start:start + seed_size])
        replicas.append(pool.subset([ids[i] for i in chosen]))
    return replicas


def robustness_eval(params, pool, config, test_set, partition=None, unlabeled=None, validation=None,
                    num_replicas=10, seed=0, mode='seeds', seed_size=None, metric='f1',
                    identical=False, workers=1):
    """
    Re-run the greedy rollout of a trained policy over re-sampled inputs.

    mode='seeds' keeps the partition fixed and draws disjoint seeding sets from the
    labeled pool; beta is fitted on the given validation set. mode='partitions'
    re-splits the whole labeled pool per replica, re-partitions the new unlabeled
    split and fits beta on the replica's own validation split. With identical=True
    every replica reuses the first replica's inputs.

    Returns:
        RobustnessResult with per-replica outcomes ordered by replica index and
        Best/Worst/Average/STDDEV summaries for every metric
    """
    if mode not in ROBUSTNESS_MODES:
        raise HarnessError(f"Unknown robustness mode {mode!r}; expected one of {ROBUSTNESS_MODES}")
    if metric not in METRICS:
        raise HarnessError(f"Unknown metric {metric!r}; expected one of {METRICS}")
    if num_replicas < 1:
        raise HarnessError(f"num_replicas must be >= 1, got {num_replicas}")
    spec = config.classifier_spec(pool.num_classes)
    replica_seeds = [seed if identical else seed + replica for replica in range(num_replicas)]

    if mode == 'seeds':
        if partition is None or unlabeled is None or validation is None:
            raise HarnessError("The seeds protocol needs a partition, its unlabeled set and a validation set")
        seeding_sets = _seed_replicas(pool, num_replicas, seed_size or config.seed_size, seed, identical)

        def replica_inputs(replica):
            return seeding_sets[replica], validation, partition, unlabeled
    else:
        def replica_inputs(replica):
            try:
                train, held_out, unlabeled_split = split_stratified(pool, config.split_spec(replica_seeds[replica]))
                replica_partition = partition_unlabeled(unlabeled_split, config.subsets, config.partition)
            except (CorpusError, PartitionError) as exc:
                raise HarnessError(f"Replica {replica}: labeled pool too small to re-split: {exc}") from exc
            return train, held_out, replica_partition, unlabeled_split

    def run_replica(replica):
        labeled, holdout, replica_partition, replica_unlabeled = replica_inputs(replica)
        guard = GuardedDataset(holdout)
        reads = [0]

        def during_rollout(step, state):
            reads.append(guard.reads)

        rollout = run_test_time(params, labeled, replica_partition, replica_unlabeled, config.steps, spec,
                                holdout=guard, test_set=test_set, step_callback=during_rollout)
        logger.info(f"Replica {replica}: {metric}={getattr(rollout.report, metric):.4f}, beta={rollout.ensemble.beta}")
        return ReplicaOutcome(replica, replica_seeds[replica], rollout.ensemble.beta, rollout.report, max(reads))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        outcomes = tuple(executor.map(run_replica, range(num_replicas)))

    summaries = {
        name: summarize([getattr(outcome.report, name) for outcome in outcomes], name in LOWER_IS_BETTER)
        for name in METRICS
    }
    logger.info(f"Robustness ({mode}, {num_replicas} replicas): {metric} {summaries[metric]}")
    return RobustnessResult(mode, metric, outcomes, summaries)


def recording_enabled():
    return settings.COTRAINING.get('RECORD_RUNS', True)


@transaction.atomic
def record_run(kind, config, run_dir='', seed=None, report=None, training_log=(), trace=(),
               replicas=(), metric=None, metrics=None, wall_clock_seconds=0.0):
    """
    Store a finished run with its step rows and replica results.

    Args:
        kind: command name (one of ExperimentRun.KIND_CHOICES)
        config: JSON-serialisable configuration echo
        report: optional RunReport supplying beta and headline metrics
        training_log: TrainingLogRow sequence of a train run
        trace: StepMetrics sequence of a rollout or baseline run
        replicas: ReplicaOutcome sequence of a robustness run
        metric: metric stored for each replica

    Returns:
        The created ExperimentRun
    """
    run = ExperimentRun.objects.create(
        kind=kind,
        seed=seed,
        config=config or {},
        run_dir=str(run_dir),
        beta=report.beta if report is not None else None,
        metrics=metrics if metrics is not None else (report.headline() if report is not None else {}),
        wall_clock_seconds=wall_clock_seconds,
    )
    steps = [
        StepRecord(run=run, episode=row.episode, step=row.step, action=row.action, epsilon=row.epsilon,
                   reward=row.reward, loss=row.loss, target=row.target, acc_c1=row.acc_c1, acc_c2=row.acc_c2)
        for row in training_log
    ]
    steps.extend(
        StepRecord(run=run, step=row.step, action=row.chosen_subset, acc_c1=row.acc_c1,
                   acc_c2=row.acc_c2, acc_ensemble=row.acc_ensemble)
        for row in trace
    )
    StepRecord.objects.bulk_create(steps)
    ReplicaResult.objects.bulk_create([
        ReplicaResult(run=run, replica=outcome.replica, seed=outcome.seed, metric=metric or 'f1',
                      value=getattr(outcome.report, metric or 'f1'), beta=outcome.beta)
        for outcome in replicas
    ])
    logger.info(f"Recorded {kind} run {run.id} with {len(steps)} steps and {len(replicas)} replicas")
    return run
