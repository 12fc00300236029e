import numpy as np
from django.test import SimpleTestCase

from classifiers.services import ClassifierSpec, as_examples
from corpus.services import SplitSpec, split_stratified, synth_generate
from partition.services import partition_unlabeled
from .services import (
    ConfidencePolicy, CoTrainError, CoTrainState, RandomPolicy, cotrain_step, make_policy, pseudo_label,
    run_baseline, seed_state, step_metrics,
)


class CoTrainFixture(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        corpus = synth_generate(2, 40, 30, 0.1, seed=1)
        cls.train, cls.validation, cls.unlabeled = split_stratified(corpus, SplitSpec(seed=3))
        cls.partition = partition_unlabeled(cls.unlabeled, 4)
        cls.subsets = cls.partition.documents(cls.unlabeled)
        cls.spec = ClassifierSpec('naive-bayes', 2)
        cls.seed_set = as_examples(cls.train)


class PseudoLabelTests(CoTrainFixture):
    def test_labels_are_argmax_with_unit_weight(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        docs = self.subsets[0]
        labeled = pseudo_label(state.c1, docs)
        expected = np.argmax(state.c1.predict_proba_many(docs), axis=1)
        self.assertEqual([ex.label for ex in labeled], list(expected))
        self.assertTrue(all(ex.weight == 1.0 for ex in labeled))
        self.assertEqual([ex.document.id for ex in labeled], [d.id for d in docs])

    def test_empty_input(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        self.assertEqual(pseudo_label(state.c1, []), ())


class CoTrainStepTests(CoTrainFixture):
    def test_mutual_update_order(self):
        """Test that C2 learns from C1's labels and C1 from the updated C2's labels"""
        state = seed_state(self.seed_set, self.subsets, self.spec)
        after = cotrain_step(state, 2)
        docs = self.subsets[2]
        self.assertEqual(after.step, 1)
        self.assertEqual(set(after.pool_for_c2), {2})
        self.assertEqual(
            [ex.label for ex in after.pool_for_c2[2]],
            list(np.argmax(state.c1.predict_proba_many(docs), axis=1)),
        )
        self.assertEqual(
            [ex.label for ex in after.pool_for_c1[2]],
            list(np.argmax(after.c2.predict_proba_many(docs), axis=1)),
        )
        self.assertEqual(after.c1.view, 'view1')
        self.assertEqual(after.c2.view, 'view2')

    def test_reselecting_replaces_pool_entry(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        once = cotrain_step(state, 1)
        twice = cotrain_step(once, 1)
        self.assertEqual(len(twice.training_set(twice.pool_for_c1)), len(self.seed_set) + len(self.subsets[1]))
        self.assertEqual(len(twice.training_set(twice.pool_for_c2)), len(self.seed_set) + len(self.subsets[1]))

    def test_pools_accumulate_over_subsets(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        for index in (0, 3):
            state = cotrain_step(state, index)
        self.assertEqual(sorted(state.pool_for_c1), [0, 3])
        expected = len(self.seed_set) + len(self.subsets[0]) + len(self.subsets[3])
        self.assertEqual(len(state.training_set(state.pool_for_c2)), expected)

    def test_input_state_is_untouched(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        cotrain_step(state, 0)
        self.assertEqual(state.step, 0)
        self.assertEqual(dict(state.pool_for_c1), {})

    def test_subset_index_out_of_range(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        with self.assertRaises(CoTrainError):
            cotrain_step(state, 4)

    def test_views_are_checked(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        with self.assertRaises(CoTrainError):
            CoTrainState(state.c2, state.c1, self.seed_set, self.subsets, self.spec)


class PolicyTests(CoTrainFixture):
    def test_random_policy_is_seeded(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        first = RandomPolicy(seed=5)
        second = RandomPolicy(seed=5)
        self.assertEqual([first.choose(state) for _ in range(10)], [second.choose(state) for _ in range(10)])
        first.reset()
        replay = [first.choose(state) for _ in range(10)]
        second.reset()
        self.assertEqual(replay, [second.choose(state) for _ in range(10)])

    def test_confidence_policy_uses_each_subset_once(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        policy = ConfidencePolicy()
        first_round = [policy.choose(state) for _ in range(4)]
        self.assertEqual(sorted(first_round), [0, 1, 2, 3])
        scores = ConfidencePolicy().scores(state)
        self.assertEqual(first_round[0], int(np.argmax(scores)))
        self.assertIn(policy.choose(state), range(4))

    def test_make_policy(self):
        self.assertIsInstance(make_policy('random', seed=1), RandomPolicy)
        self.assertIsInstance(make_policy('confidence'), ConfidencePolicy)
        self.assertIsInstance(make_policy('high-confidence'), ConfidencePolicy)
        with self.assertRaises(CoTrainError):
            make_policy('greedy')


class BaselineRunTests(CoTrainFixture):
    def test_trace_has_one_row_per_step(self):
        state, trace = run_baseline(RandomPolicy(seed=2), self.partition, self.unlabeled, self.seed_set, 5,
                                    self.spec, eval_set=self.validation)
        self.assertEqual(state.step, 5)
        self.assertEqual([row.step for row in trace], [1, 2, 3, 4, 5])
        for row in trace:
            self.assertTrue(0.0 <= row.acc_ensemble <= 1.0)

    def test_deterministic(self):
        runs = [
            run_baseline(make_policy('random', seed=4), self.partition, self.unlabeled, self.seed_set, 4, self.spec)[1]
            for _ in range(2)
        ]
        self.assertEqual(runs[0], runs[1])

    def test_needs_at_least_one_step(self):
        with self.assertRaises(CoTrainError):
            run_baseline(RandomPolicy(), self.partition, self.unlabeled, self.seed_set, 0, self.spec)

    def test_step_metrics_without_eval_set(self):
        state = seed_state(self.seed_set, self.subsets, self.spec)
        row = step_metrics(state, 1)
        self.assertIsNone(row.acc_c1)
        self.assertEqual(row.chosen_subset, 1)
