import json
import tempfile
from datetime import datetime
from io import StringIO
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag

from classifiers.services import ClassifierSpec, LabeledExample, accuracy, as_examples
from corpus.documents import Dataset, Document, UnlabeledDataset
from corpus.services import SplitSpec, load_jsonl, split_stratified, synth_generate
from cotrain.services import StepMetrics, cotrain_step, seed_state
from partition.services import Partition, partition_unlabeled
from qagent.network import init_params, q_forward
from qagent.services import reward, state_representation
from . import reports
from .config import EpisodeConfig, HarnessError
from .models import ExperimentRun, ReplicaResult, StepRecord
from .services import (
    GuardedDataset, ReplicaOutcome, TrainingLogRow, evaluate, record_run, robustness_eval, run_baseline_experiment,
    run_test_time, summarize, train_policy,
)


class FixedPredictions:
    """Model stub predicting a stored class per document id."""

    def __init__(self, predictions, num_classes=2):
        self.predictions = predictions
        self.num_classes = num_classes

    def predict_proba_many(self, documents):
        return np.eye(self.num_classes)[[self.predictions[doc.id] for doc in documents]]


def labeled_docs(labels):
    return [Document(f"t{i}", (), (), int(label)) for i, label in enumerate(labels)]


def small_config(**overrides):
    values = dict(episodes=1, steps=2, subsets=4, hidden_units=8)
    values.update(overrides)
    return EpisodeConfig(**values)


class SmallTask:
    """Two-class synthetic task: 8 train, 8 validation, 64 unlabeled in 4 subsets, 20 test."""

    @classmethod
    def build_task(cls, docs_per_class=40):
        corpus = synth_generate(2, docs_per_class, 30, 0.1, seed=1)
        cls.train, cls.validation, cls.unlabeled = split_stratified(corpus, SplitSpec(seed=3))
        cls.partition = partition_unlabeled(cls.unlabeled, 4)
        cls.test_set = synth_generate(2, 10, 30, 0.1, seed=2, id_prefix='test')
        cls.spec = ClassifierSpec('naive-bayes', 2)


class EpisodeConfigTests(SimpleTestCase):
    def test_settings_defaults(self):
        config = EpisodeConfig.from_settings()
        self.assertEqual(config.subsets, settings.COTRAINING['SUBSETS'])
        self.assertEqual(config.partition.num_hashes, settings.COTRAINING['NUM_HASHES'])
        self.assertEqual(config.total_steps, config.episodes * config.steps)

    def test_invalid_values(self):
        for overrides in ({'gamma': 1.5}, {'steps': 0}, {'head': 'relu'}, {'learning_rate': 0.0},
                          {'classifier_kind': 'svm'}, {'frac_train': 0.5}):
            with self.subTest(overrides=overrides):
                with self.assertRaises(HarnessError):
                    EpisodeConfig(**overrides)

    def test_overrides_skip_none(self):
        config = small_config().with_overrides(steps=None, gamma=0.5)
        self.assertEqual(config.steps, 2)
        self.assertEqual(config.gamma, 0.5)
        with self.assertRaises(HarnessError):
            config.with_overrides(alpha=1.0)

    def test_json_overlay_merges_nested_values(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'config.json'
            path.write_text(json.dumps({'steps': 5, 'partition': {'bands': 16, 'rows': 8},
                                        'hyperparams': {'alpha': 0.5}}))
            config = EpisodeConfig.from_json(path, base=small_config())
        self.assertEqual(config.steps, 5)
        self.assertEqual(config.episodes, 1)
        self.assertEqual((config.partition.bands, config.partition.rows, config.partition.num_hashes), (16, 8, 128))
        self.assertEqual(config.hyperparams.alpha, 0.5)

    def test_json_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'config.json'
            path.write_text('[1, 2]')
            with self.assertRaises(HarnessError):
                EpisodeConfig.from_json(path)
            path.write_text('{"partition": {"bands": 10}}')
            with self.assertRaises(HarnessError):
                EpisodeConfig.from_json(path)
            with self.assertRaises(HarnessError):
                EpisodeConfig.from_json(Path(tmp) / 'missing.json')


class EvaluateTests(SimpleTestCase):
    def test_perfect_predictions(self):
        docs = labeled_docs([0, 1, 1, 0])
        report = evaluate(FixedPredictions({d.id: d.label for d in docs}), docs)
        self.assertEqual((report.precision, report.recall, report.f1, report.accuracy), (1.0, 1.0, 1.0, 1.0))
        self.assertEqual(report.error_rate, 0.0)

    def test_counts_example(self):
        """Test TP=2, FP=1, FN=2 on the positive class"""
        docs = labeled_docs([1, 1, 1, 1, 0, 0])
        predictions = dict(zip([d.id for d in docs], [1, 1, 0, 0, 1, 0]))
        report = evaluate(FixedPredictions(predictions), docs)
        self.assertAlmostEqual(report.precision, 2 / 3)
        self.assertAlmostEqual(report.recall, 0.5)
        self.assertAlmostEqual(report.f1, 4 / 7)
        self.assertAlmostEqual(report.accuracy, 0.5)

    def test_no_positive_predictions(self):
        docs = labeled_docs([1, 0, 1, 0])
        report = evaluate(FixedPredictions({d.id: 0 for d in docs}), docs)
        self.assertEqual((report.precision, report.recall, report.f1), (0.0, 0.0, 0.0))
        self.assertEqual(report.accuracy, 0.5)

    def test_multiclass_uses_macro_average(self):
        docs = labeled_docs([0, 1, 2, 2])
        predictions = dict(zip([d.id for d in docs], [0, 2, 2, 2]))
        report = evaluate(FixedPredictions(predictions, num_classes=3), docs)
        self.assertAlmostEqual(report.precision, np.mean(report.per_class['precision']))
        self.assertAlmostEqual(report.f1, np.mean(report.per_class['f1']))

    def test_error_rate_complements_accuracy(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            docs = labeled_docs(rng.integers(0, 2, size=15))
            report = evaluate(FixedPredictions({d.id: int(rng.integers(2)) for d in docs}), docs)
            self.assertAlmostEqual(report.error_rate + report.accuracy, 1.0)

    def test_rejects_empty_or_unlabeled(self):
        with self.assertRaises(HarnessError):
            evaluate(FixedPredictions({}), [])
        with self.assertRaises(HarnessError):
            evaluate(FixedPredictions({'u': 0}), [Document('u', (), ())])


class SummarizeTests(SimpleTestCase):
    def test_identical_values_have_zero_spread(self):
        self.assertEqual(summarize([0.7] * 10)['stddev'], 0.0)

    def test_sample_stddev_and_direction(self):
        summary = summarize([0.2, 0.4])
        self.assertEqual((summary['best'], summary['worst']), (0.4, 0.2))
        self.assertAlmostEqual(summary['stddev'], np.std([0.2, 0.4], ddof=1))
        errors = summarize([0.2, 0.4], lower_is_better=True)
        self.assertEqual((errors['best'], errors['worst']), (0.2, 0.4))


class ReportsTests(SimpleTestCase):
    def test_run_dir_name(self):
        with tempfile.TemporaryDirectory() as tmp:
            now = datetime(2024, 3, 5, 14, 7, 9)
            first = reports.make_run_dir('train', 7, root=tmp, now=now)
            second = reports.make_run_dir('train', 7, root=tmp, now=now)
            self.assertEqual(first.name, 'train-20240305-140709-seed7')
            self.assertEqual(second.name, 'train-20240305-140709-seed7-1')

    def test_csv_cells(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = reports.write_csv(Path(tmp) / 'trace.csv', reports.TRACE_HEADER,
                                     [{'step': 1, 'chosen_subset': 3, 'acc_c1': 0.1, 'acc_c2': None}])
            self.assertEqual(path.read_text().splitlines(), [','.join(reports.TRACE_HEADER), '1,3,0.1,,'])


class TrainPolicyTests(SmallTask, SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.build_task()

    def test_single_step_episode(self):
        original = ClassifierSpec.fit
        with patch.object(ClassifierSpec, 'fit', autospec=True, side_effect=original) as fit:
            result = train_policy(small_config(steps=1), self.train, self.validation, self.partition, self.unlabeled)
        self.assertEqual(fit.call_count, 4)
        self.assertEqual(len(result.log), 1)
        row = result.log[0]
        self.assertEqual((row.episode, row.step), (0, 0))
        self.assertEqual(row.target, row.reward)
        self.assertGreaterEqual(row.reward, 0.0)

    def test_log_covers_every_step(self):
        result = train_policy(small_config(episodes=2, steps=3), self.train, self.validation, self.partition,
                              self.unlabeled)
        self.assertEqual([(row.episode, row.step) for row in result.log],
                         [(e, t) for e in range(2) for t in range(3)])
        self.assertEqual(len(result.episode_returns), 2)
        self.assertEqual(result.params.num_subsets, 4)

    def test_deterministic(self):
        config = small_config(episodes=2, steps=2, seed=5)
        first = train_policy(config, self.train, self.validation, self.partition, self.unlabeled)
        second = train_policy(config, self.train, self.validation, self.partition, self.unlabeled)
        self.assertEqual(first.log, second.log)
        np.testing.assert_array_equal(first.params.W_h, second.params.W_h)

    def test_input_checks(self):
        with self.assertRaises(HarnessError):
            train_policy(small_config(subsets=5), self.train, self.validation, self.partition, self.unlabeled)
        with self.assertRaises(HarnessError):
            train_policy(small_config(), self.train, self.train, self.partition, self.unlabeled)
        with self.assertRaises(HarnessError):
            train_policy(small_config(), self.train, self.validation, self.partition,
                         self.unlabeled.subset(self.unlabeled.ids[1:]))


class TestTimeRolloutTests(SmallTask, SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.build_task()

    def test_uniform_q_picks_first_subset(self):
        params = init_params(4, 2, hidden_units=8, init_scale=0.0)
        result = run_test_time(params, self.train, self.partition, self.unlabeled, 3, self.spec)
        self.assertEqual(result.actions, (0, 0, 0))
        self.assertEqual(result.ensemble.beta, 0.5)
        self.assertIsNone(result.report)

    def test_holdout_untouched_during_loop(self):
        guard = GuardedDataset(self.validation)
        reads = []
        params = init_params(4, 2, hidden_units=8, init_scale=0.5, seed=3)
        result = run_test_time(params, self.train, self.partition, self.unlabeled, 3, self.spec, holdout=guard,
                               test_set=self.test_set, step_callback=lambda step, state: reads.append(guard.reads))
        self.assertEqual(reads, [0, 0, 0])
        self.assertGreater(guard.reads, 0)
        self.assertEqual([row.step for row in result.trace], [1, 2, 3])
        self.assertEqual(result.report.support, len(self.test_set))
        self.assertEqual(len(result.report.rows), 3)

    def test_network_must_match_partition(self):
        with self.assertRaises(HarnessError):
            run_test_time(init_params(5, 2, hidden_units=8), self.train, self.partition, self.unlabeled, 2,
                          self.spec)
        with self.assertRaises(HarnessError):
            run_test_time(init_params(4, 2, hidden_units=8), self.train, self.partition, self.unlabeled, 0,
                          self.spec)


class BaselineTests(SmallTask, SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.build_task()

    def test_cotraining_baselines(self):
        for kind in ('random', 'high-confidence'):
            result = run_baseline_experiment(kind, small_config(steps=3), self.train, self.validation,
                                             self.partition, self.unlabeled, self.test_set)
            self.assertEqual(len(result.trace), 3)
            self.assertTrue(0.0 <= result.model.beta <= 1.0)
            self.assertEqual(result.report.support, len(self.test_set))

    def test_supervised_baselines(self):
        view1 = run_baseline_experiment('supervised-view1', small_config(), self.train, self.validation,
                                        test_set=self.test_set)
        self.assertEqual(view1.model.view, 'view1')
        merged = run_baseline_experiment('supervised-document', small_config(), self.train, self.validation,
                                         test_set=self.test_set)
        self.assertEqual(merged.model.view, 'document')
        self.assertEqual(merged.trace, ())

    def test_supervised_all_trains_on_every_gold_label(self):
        result = run_baseline_experiment('supervised-all', small_config(), self.train, self.validation,
                                         unlabeled=self.unlabeled, test_set=self.test_set)
        hidden = self.unlabeled.reveal_labels()
        examples = (as_examples(self.train) + as_examples(self.validation)
                    + tuple(LabeledExample(doc, hidden[doc.id]) for doc in self.unlabeled))
        expected = self.spec.fit(examples, 'document')
        self.assertEqual(result.model.view, 'document')
        self.assertEqual(result.model.vocabulary, expected.vocabulary)
        np.testing.assert_allclose(result.model.predict_proba_many(self.test_set),
                                   expected.predict_proba_many(self.test_set))
        self.assertEqual(result.report.support, len(self.test_set))

    def test_supervised_all_needs_withheld_labels(self):
        with self.assertRaises(HarnessError):
            run_baseline_experiment('supervised-all', small_config(), self.train, self.validation)
        stripped = UnlabeledDataset(self.unlabeled.documents, 2)
        with self.assertRaises(HarnessError):
            run_baseline_experiment('supervised-all', small_config(), self.train, self.validation,
                                    unlabeled=stripped)

    def test_errors(self):
        with self.assertRaises(HarnessError):
            run_baseline_experiment('greedy', small_config(), self.train, self.validation)
        with self.assertRaises(HarnessError):
            run_baseline_experiment('random', small_config(), self.train, self.validation)


class RobustnessTests(SmallTask, SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.build_task(docs_per_class=100)
        cls.params = init_params(4, 2, hidden_units=8, init_scale=0.3, seed=1)

    def run_seeds(self, **kwargs):
        return robustness_eval(self.params, self.train, small_config(), self.test_set, self.partition,
                               self.unlabeled, self.validation, num_replicas=10, seed_size=2, **kwargs)

    def test_ten_replicas(self):
        result = self.run_seeds(workers=2)
        self.assertEqual([outcome.replica for outcome in result.replicas], list(range(10)))
        self.assertEqual([outcome.seed for outcome in result.replicas], list(range(10)))
        self.assertTrue(all(outcome.validation_reads_during_rollout == 0 for outcome in result.replicas))
        self.assertEqual(set(result.summaries), {'precision', 'recall', 'f1', 'accuracy', 'error_rate'})
        values = [outcome.report.f1 for outcome in result.replicas]
        self.assertEqual(result.summary['best'], max(values))

    def test_identical_replicas_have_zero_spread(self):
        result = self.run_seeds(identical=True)
        for summary in result.summaries.values():
            self.assertEqual(summary['stddev'], 0.0)
            self.assertEqual(summary['best'], summary['worst'])

    def test_pool_too_small(self):
        with self.assertRaisesMessage(HarnessError, 'too small'):
            robustness_eval(self.params, self.train, small_config(), self.test_set, self.partition,
                            self.unlabeled, self.validation, num_replicas=10, seed_size=3)

    def test_partitions_mode(self):
        pool = synth_generate(2, 40, 30, 0.1, seed=9)
        result = robustness_eval(self.params, pool, small_config(), self.test_set, num_replicas=3,
                                 mode='partitions', seed=4)
        self.assertEqual([outcome.seed for outcome in result.replicas], [4, 5, 6])

    def test_unknown_mode_and_metric(self):
        with self.assertRaises(HarnessError):
            self.run_seeds(mode='bootstrap')
        with self.assertRaises(HarnessError):
            self.run_seeds(metric='auc')


class RecordRunTests(TestCase):
    def test_stores_steps_and_replicas(self):
        docs = labeled_docs([0, 1])
        report = evaluate(FixedPredictions({'t0': 0, 't1': 1}), docs)
        log = [TrainingLogRow(0, t, 1.0, t, 0.0, 0.1, 0.0, 0.5, 0.5) for t in range(3)]
        trace = [StepMetrics(1, 2, 0.5, 0.6, 0.7)]
        replicas = [ReplicaOutcome(r, r, 0.5, report, 0) for r in range(2)]
        run = record_run('robustness', {'steps': 3}, run_dir='runs/x', seed=1, report=report,
                         training_log=log, trace=trace, replicas=replicas, metric='accuracy')
        self.assertEqual(ExperimentRun.objects.count(), 1)
        self.assertEqual(run.steps.count(), 4)
        self.assertEqual(StepRecord.objects.filter(run=run, acc_ensemble=0.7).count(), 1)
        self.assertEqual(list(ReplicaResult.objects.values_list('value', flat=True)), [1.0, 1.0])
        self.assertEqual(run.metrics['f1'], 1.0)


class CommandPipelineTests(SimpleTestCase):
    """synth -> partition -> train -> rollout through the management commands."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def call(self, name, runs_dir, **options):
        call_command(name, runs_dir=str(self.root / runs_dir), no_record=True, stdout=StringIO(), **options)
        (run_dir,) = (self.root / runs_dir).iterdir()
        return run_dir

    def test_same_seed_gives_identical_outputs(self):
        synth = self.call('synth', 'synth', num_classes=2, docs_per_class=40, vocab=30, noise=0.1,
                          test_docs_per_class=10, seed=1)
        corpus = str(synth / 'corpus.jsonl')
        prepared = self.call('partition', 'partition', corpus=corpus, subsets=4, seed=2)
        data = {'corpus': corpus, 'splits': str(prepared / 'splits.csv'),
                'partition_file': str(prepared / 'partition.json')}
        knobs = {'episodes': 1, 'steps': 2, 'subsets': 4, 'hidden_units': 8, 'seed': 3}

        outputs = []
        for attempt in ('a', 'b'):
            trained = self.call('train', f'train-{attempt}', **data, **knobs)
            rolled = self.call('rollout', f'rollout-{attempt}', qnet=str(trained / 'qnet.json'),
                               test=str(synth / 'test.jsonl'), **data, **knobs)
            outputs.append({
                name: path.read_bytes() for name, path in (
                    ('qnet', trained / 'qnet.json'), ('log', trained / 'training_log.csv'),
                    ('trace', rolled / 'rollout_trace.csv'), ('report', rolled / 'report.json'),
                )
            })
            self.assertTrue((rolled / 'timing.json').exists())
        self.assertEqual(outputs[0], outputs[1])
        self.assertNotIn(b'wall_clock', outputs[0]['report'])

    def test_supervised_all_baseline_command(self):
        synth = self.call('synth', 'synth', num_classes=2, docs_per_class=40, vocab=30, noise=0.1,
                          test_docs_per_class=10, seed=1)
        corpus = str(synth / 'corpus.jsonl')
        prepared = self.call('partition', 'partition', corpus=corpus, subsets=4, seed=2)
        run_dir = self.call('baseline', 'baseline', policy='supervised-all', corpus=corpus,
                            splits=str(prepared / 'splits.csv'), test=str(synth / 'test.jsonl'), seed=3)
        model = json.loads((run_dir / 'model.json').read_text())
        self.assertEqual(model['view'], 'document')
        report = json.loads((run_dir / 'report.json').read_text())
        self.assertEqual(report['config']['policy'], 'supervised-all')
        self.assertEqual(report['support'], 20)

    def test_synth_swap_rate_corrupts_second_views(self):
        synth = self.call('synth', 'synth', num_classes=2, docs_per_class=20, vocab=30, noise=0.0,
                          swap_rate=0.25, seed=1)
        corpus = load_jsonl(synth / 'corpus.jsonl')
        swapped = [doc.id for doc in corpus if not doc.view2[0].startswith(f"p{doc.label}w")]
        self.assertEqual(len(swapped), 10)
        self.assertTrue(all(token.startswith(f"h{doc.label}w") for doc in corpus for token in doc.view1))
        with self.assertRaises(CommandError):
            self.call('synth', 'bad', docs_per_class=5, swap_rate=1.5)

    def test_missing_file_is_a_command_error(self):
        with self.assertRaises(CommandError):
            call_command('eval', model=str(self.root / 'none.json'), test=str(self.root / 'none.jsonl'),
                         runs_dir=str(self.root / 'eval'), no_record=True, stdout=StringIO())


def rigged_task(seed, fresh=10, seeds_per_class=2):
    """
    Two-class task over hand-built words: subset 5 is clean, the other seven pair every
    clean document with a copy whose second view belongs to the other class.

    Validation documents only use words the seed set lacks, so both seed classifiers tie
    on all of them and score 0.5. One step on the clean subset teaches both classifiers
    those words (1.0); a step on a noisy subset leaves each of them split evenly between
    the classes.
    """
    def clean(doc_id, label, j):
        return Document(doc_id, (f"h{label}s", f"h{label}f{j}"), (f"p{label}s", f"p{label}f{j}"), label)

    labeled = Dataset(tuple(Document(f"seed-{c}-{i}", (f"h{c}s",), (f"p{c}s",), c)
                            for c in (0, 1) for i in range(seeds_per_class)), 2)
    validation = Dataset(tuple(Document(f"val-{c}-{j}", (f"h{c}f{j}",), (f"p{c}f{j}",), c)
                               for c in (0, 1) for j in range(fresh)), 2)
    rng = np.random.default_rng(seed)
    groups = []
    for index in range(8):
        group = []
        for c in (0, 1):
            for j in range(fresh):
                group.append(clean(f"u{index}-{c}-{j}a", c, j))
                if index != 5:
                    group.append(Document(f"u{index}-{c}-{j}b", (f"h{c}s", f"h{c}f{j}"),
                                          (f"p{1 - c}s", f"p{1 - c}f{j}"), c))
        groups.append([group[i] for i in rng.permutation(len(group))])
    unlabeled = UnlabeledDataset.from_labeled(Dataset(tuple(d for group in groups for d in group), 2))
    partition = Partition(tuple(tuple(d.id for d in group) for group in groups),
                          tuple(group[0].id for group in groups))
    return labeled, validation, partition, unlabeled


def new_vocabulary(dataset):
    """The same documents with every word replaced by one the old vocabulary never uses."""
    return Dataset(tuple(
        Document(doc.id, tuple(f"new-{t}" for t in doc.view1), tuple(f"new-{t}" for t in doc.view2), doc.label)
        for doc in dataset
    ), dataset.num_classes)


def drifted_task(seed):
    """
    Two-class task whose vocabulary changed after the labeled seed was collected.

    The 200 seed documents use the old vocabulary; validation and test use the new one,
    so the seed classifiers tie on every validation document. The 2000 unlabeled
    documents come from 16 sources of 125. Each joins an old view to a new view; in
    eight sources both views share a class, in the other eight the second view belongs
    to the other class.
    """
    def corpus(docs_per_class, offset, prefix):
        return synth_generate(2, docs_per_class, 60, 0.15, seed=seed * 10 + offset,
                              view1_length=4, view2_length=4, id_prefix=prefix)

    labeled = corpus(100, 0, 'seed')
    validation = new_vocabulary(corpus(50, 1, 'val'))
    test_set = new_vocabulary(corpus(250, 2, 'test'))
    old = [[doc for doc in corpus(1100, 3, 'old') if doc.label == c] for c in (0, 1)]
    new = [[doc for doc in new_vocabulary(corpus(1100, 4, 'new')) if doc.label == c] for c in (0, 1)]
    mismatched = sorted(int(i) for i in np.random.default_rng(seed).permutation(16)[:8])
    groups = []
    for source in range(16):
        group = []
        for position in range(125):
            label = position % 2
            other = 1 - label if source in mismatched else label
            if position % 4 < 2:
                head, paragraph = old[label].pop(), new[other].pop()
            else:
                head, paragraph = new[label].pop(), old[other].pop()
            group.append(Document(f"u{source:02d}-{position:03d}", head.view1, paragraph.view2, label))
        groups.append(group)
    unlabeled = UnlabeledDataset.from_labeled(Dataset(tuple(d for group in groups for d in group), 2))
    partition = Partition(tuple(tuple(d.id for d in group) for group in groups),
                          tuple(group[0].id for group in groups))
    return labeled, validation, partition, unlabeled, test_set, mismatched


def first_step_rewards(labeled, validation, partition, unlabeled, spec, after=()):
    """Reward of every subset as the next step, after co-training on the subsets in `after`."""
    docs = list(validation)
    state = seed_state(as_examples(labeled), partition.documents(unlabeled), spec)
    for index in after:
        state = cotrain_step(state, index)
    acc1, acc2 = accuracy(state.c1, docs), accuracy(state.c2, docs)
    rewards = []
    for index in range(partition.k):
        moved = cotrain_step(state, index)
        rewards.append(reward(acc1, accuracy(moved.c1, docs), acc2, accuracy(moved.c2, docs)))
    return (acc1, acc2), rewards


class RewardStructureTests(SimpleTestCase):
    spec = ClassifierSpec('naive-bayes', 2)

    def test_rigged_task_noise_rate(self):
        _, _, partition, unlabeled = rigged_task(0)
        hidden = unlabeled.reveal_labels()
        for index, group in enumerate(partition.documents(unlabeled)):
            swapped = sum(doc.view2[0] != f"p{hidden[doc.id]}s" for doc in group)
            self.assertEqual(swapped / len(group), 0.0 if index == 5 else 0.5, msg=f"subset {index}")

    def test_only_the_clean_subset_pays(self):
        task = rigged_task(3)
        accuracies, rewards = first_step_rewards(*task, self.spec)
        self.assertEqual(accuracies, (0.5, 0.5))
        self.assertEqual(rewards, [0.25 if i == 5 else 0.0 for i in range(8)])

    def test_clean_subset_still_pays_after_a_noisy_one(self):
        accuracies, rewards = first_step_rewards(*rigged_task(3), self.spec, after=(2,))
        self.assertEqual(accuracies, (0.5, 0.5))
        self.assertEqual(rewards[5], 0.25)
        self.assertEqual(sum(rewards), 0.25)

    def test_drifted_task_rewards_follow_the_sources(self):
        labeled, validation, partition, unlabeled, _, mismatched = drifted_task(0)
        self.assertEqual((len(labeled), len(validation), len(unlabeled), partition.k), (200, 100, 2000, 16))
        accuracies, rewards = first_step_rewards(labeled, validation, partition, unlabeled, self.spec)
        self.assertEqual(accuracies, (0.5, 0.5))
        for index, value in enumerate(rewards):
            if index in mismatched:
                self.assertEqual(value, 0.0, msg=f"subset {index}")
            else:
                # a softmax head over 16 actions with gamma 0.9 only moves for r > 0.1 / 16
                self.assertGreater(value, 0.01, msg=f"subset {index}")


@tag('slow')
class PolicyAcceptanceTests(SimpleTestCase):
    def test_rigged_partition_prefers_clean_subset(self):
        config = EpisodeConfig(episodes=30, steps=5, subsets=8, init_scale=1e-5)
        hits = 0
        for seed in range(5):
            labeled, validation, partition, unlabeled = rigged_task(seed)
            result = train_policy(config.with_overrides(seed=seed), labeled, validation, partition, unlabeled)
            state = seed_state(as_examples(labeled), partition.documents(unlabeled), config.classifier_spec(2))
            s0 = state_representation(state.c1, state.c2, partition.representative_documents(unlabeled))
            hits += int(np.argmax(q_forward(result.params, s0))) == 5
        self.assertGreaterEqual(hits, 4)

    def test_learned_policy_matches_random_selection(self):
        config = EpisodeConfig(episodes=30, steps=5, subsets=16, init_scale=1e-5)
        learned, standard = [], []
        for seed in range(5):
            labeled, validation, partition, unlabeled, test_set, _ = drifted_task(seed)
            seeded = config.with_overrides(seed=seed)
            trained = train_policy(seeded, labeled, validation, partition, unlabeled)
            rollout = run_test_time(trained.params, labeled, partition, unlabeled, seeded.steps,
                                    seeded.classifier_spec(2), holdout=validation, test_set=test_set)
            baseline = run_baseline_experiment('random', seeded, labeled, validation, partition, unlabeled,
                                               test_set)
            learned.append(rollout.report.f1)
            standard.append(baseline.report.f1)
        self.assertGreaterEqual(np.mean(learned), np.mean(standard))
