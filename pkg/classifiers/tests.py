import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy.special import softmax
from sklearn.metrics import log_loss
from sklearn.naive_bayes import MultinomialNB

from corpus.documents import Document
from corpus.services import synth_generate
from .services import (
    PAD_FEATURE, ClassDistribution, ClassifierError, ClassifierSpec, Hyperparams, LabeledExample,
    accuracy, as_examples, load_classifier, logistic_loss_and_grad, predict_proba, save_classifier, train,
)


def example(doc_id, view1, view2, label, weight=1.0):
    return LabeledExample(Document(doc_id, tuple(view1), tuple(view2), label), label, weight)


def relative_error(analytic, numeric):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    return np.linalg.norm(analytic - numeric) / max(1e-12, np.linalg.norm(analytic) + np.linalg.norm(numeric))


TOY = (
    example('a', ['good', 'good', 'fun'], ['x'], 0),
    example('b', ['good', 'plot'], ['y'], 0),
    example('c', ['bad', 'plot'], ['x'], 1),
)


class ClassDistributionTests(SimpleTestCase):
    def test_valid_distribution(self):
        dist = ClassDistribution([0.2, 0.5, 0.3])
        self.assertEqual(dist.argmax(), 1)
        self.assertEqual(dist.top(), 0.5)

    def test_argmax_ties_go_low(self):
        self.assertEqual(ClassDistribution([0.5, 0.5]).argmax(), 0)

    def test_rejects_non_distributions(self):
        with self.assertRaises(ClassifierError):
            ClassDistribution([0.7, 0.7])
        with self.assertRaises(ClassifierError):
            ClassDistribution([1.2, -0.2])

    def test_read_only(self):
        dist = ClassDistribution([0.4, 0.6])
        with self.assertRaises(ValueError):
            dist.probs[0] = 1.0


class NaiveBayesTests(SimpleTestCase):
    def test_matches_hand_computed_posterior(self):
        """Test naive Bayes against brute-force smoothed counts"""
        model = train(TOY, 'view1', num_classes=2, hyperparams=Hyperparams(alpha=1.0))
        vocabulary = ['bad', 'fun', 'good', 'plot']
        counts = {
            0: {'good': 3, 'fun': 1, 'plot': 1, 'bad': 0},
            1: {'good': 0, 'fun': 0, 'plot': 1, 'bad': 1},
        }
        prior = {0: (2 + 1) / (3 + 2), 1: (1 + 1) / (3 + 2)}
        query = Document('q', ('good', 'bad', 'unseen'), ())
        joint = []
        for label in (0, 1):
            total = sum(counts[label].values())
            likelihood = np.prod([(counts[label][t] + 1) / (total + len(vocabulary)) for t in ('good', 'bad')])
            joint.append(prior[label] * likelihood)
        expected = np.array(joint) / sum(joint)
        np.testing.assert_allclose(predict_proba(model, query).probs, expected, rtol=1e-10)

    def test_absent_class_keeps_prior_mass(self):
        model = train(TOY, 'view1', num_classes=3)
        probs = predict_proba(model, Document('q', ('nothing',), ())).probs
        self.assertGreater(probs[2], 0.0)
        np.testing.assert_allclose(probs, [3 / 6, 2 / 6, 1 / 6])

    def test_weight_equals_duplication(self):
        weighted = TOY[:2] + (example('c', ['bad', 'plot'], ['x'], 1, weight=2.0),)
        duplicated = TOY + (example('c2', ['bad', 'plot'], ['x'], 1),)
        query = [Document('q', ('bad', 'good'), ())]
        np.testing.assert_allclose(
            train(weighted, 'view1').predict_proba_many(query),
            train(duplicated, 'view1').predict_proba_many(query),
        )

    def test_only_reads_its_view(self):
        """Test that poisoning the other view does not change a view1 classifier"""
        poisoned = tuple(
            example(ex.document.id, ex.document.view1, ['poison', str(i)], ex.label) for i, ex in enumerate(TOY)
        )
        query = [Document('q', ('good', 'plot'), ('poison', 'bad'))]
        np.testing.assert_array_equal(
            train(TOY, 'view1').predict_proba_many(query), train(poisoned, 'view1').predict_proba_many(query),
        )

    def test_empty_view_uses_padding_feature(self):
        examples = (example('a', [], ['x'], 0), example('b', [], ['y'], 1), example('c', [], ['z'], 1))
        model = train(examples, 'view1', num_classes=2)
        self.assertEqual(model.vocabulary, (PAD_FEATURE,))
        np.testing.assert_allclose(predict_proba(model, Document('q', ('any',), ())).probs, [2 / 5, 3 / 5])


class LogisticTests(SimpleTestCase):
    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        eps = 1e-6
        for _ in range(20):
            n, V, N = 8, 5, 3
            X = rng.poisson(1.0, size=(n, V)).astype(np.float64)
            Y = np.eye(N)[rng.integers(0, N, size=n)]
            weights = rng.uniform(0.5, 2.0, size=n)
            W = rng.normal(scale=0.5, size=(V, N))
            b = rng.normal(scale=0.5, size=N)
            _, dW, db = logistic_loss_and_grad(W, b, X, Y, weights, l2=0.01)
            numeric_W = np.zeros_like(W)
            for index in np.ndindex(W.shape):
                plus, minus = W.copy(), W.copy()
                plus[index] += eps
                minus[index] -= eps
                numeric_W[index] = (logistic_loss_and_grad(plus, b, X, Y, weights, 0.01)[0]
                                    - logistic_loss_and_grad(minus, b, X, Y, weights, 0.01)[0]) / (2 * eps)
            numeric_b = np.zeros_like(b)
            for j in range(N):
                plus, minus = b.copy(), b.copy()
                plus[j] += eps
                minus[j] -= eps
                numeric_b[j] = (logistic_loss_and_grad(W, plus, X, Y, weights, 0.01)[0]
                                - logistic_loss_and_grad(W, minus, X, Y, weights, 0.01)[0]) / (2 * eps)
            self.assertLess(relative_error(dW, numeric_W), 1e-4)
            self.assertLess(relative_error(db, numeric_b), 1e-4)

    def test_learns_separable_views(self):
        dataset = synth_generate(2, 30, 20, 0.0, seed=4)
        model = train(as_examples(dataset), 'view2', kind='logistic', num_classes=2)
        self.assertEqual(accuracy(model, dataset), 1.0)

    def test_example_order_does_not_matter(self):
        examples = as_examples(synth_generate(3, 10, 15, 0.2, seed=6))
        queries = list(synth_generate(3, 4, 15, 0.2, seed=7))
        forward = train(examples, 'view1', kind='logistic', num_classes=3)
        backward = train(examples[::-1], 'view1', kind='logistic', num_classes=3)
        np.testing.assert_allclose(forward.predict_proba_many(queries), backward.predict_proba_many(queries),
                                   atol=1e-10)


class TrainingInterfaceTests(SimpleTestCase):
    def test_empty_examples(self):
        with self.assertRaises(ClassifierError):
            train((), 'view1')

    def test_unknown_kind(self):
        with self.assertRaises(ClassifierError):
            train(TOY, 'view1', kind='svm')
        with self.assertRaises(ClassifierError):
            ClassifierSpec(kind='svm')

    def test_label_outside_declared_classes(self):
        with self.assertRaises(ClassifierError):
            train(TOY, 'view1', num_classes=1)

    def test_accuracy_needs_documents(self):
        model = train(TOY, 'view1')
        with self.assertRaises(ClassifierError):
            accuracy(model, [])
        self.assertEqual(accuracy(model, [ex.document for ex in TOY]), 1.0)

    def test_document_view_merges_views(self):
        model = train(TOY, 'document')
        self.assertIn('x', model.vocabulary)
        self.assertIn('good', model.vocabulary)

    def test_save_and_load(self):
        queries = [Document('q1', ('good', 'bad'), ('x',)), Document('q2', ('plot',), ('y',))]
        with tempfile.TemporaryDirectory() as tmp:
            for kind in ('naive-bayes', 'logistic'):
                model = ClassifierSpec(kind, 2).fit(TOY, 'view1')
                loaded = load_classifier(save_classifier(model, Path(tmp) / f'{kind}.json'))
                self.assertEqual(loaded.kind, kind)
                np.testing.assert_allclose(loaded.predict_proba_many(queries), model.predict_proba_many(queries))


class ClassifierPropertyTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = synth_generate(3, 15, 12, 0.2, seed=8)
        cls.queries = list(synth_generate(3, 5, 12, 0.2, seed=9))

    def test_relabelling_permutes_the_output(self):
        perm = np.array([2, 0, 1])
        examples = as_examples(self.dataset)
        relabelled = tuple(LabeledExample(ex.document, int(perm[ex.label]), ex.weight) for ex in examples)
        for kind in ('naive-bayes', 'logistic'):
            original = train(examples, 'view1', kind=kind, num_classes=3).predict_proba_many(self.queries)
            permuted = train(relabelled, 'view1', kind=kind, num_classes=3).predict_proba_many(self.queries)
            np.testing.assert_allclose(permuted[:, perm], original, rtol=1e-7, atol=1e-10, err_msg=kind)

    def test_unit_weights_match_unweighted_fit(self):
        docs = list(self.dataset)
        model = train(as_examples(self.dataset, weight=1.0), 'view1', num_classes=3)
        X = model.features(docs)
        y = np.array([doc.label for doc in docs])
        counts = np.bincount(y, minlength=3)
        reference = MultinomialNB(alpha=1.0, class_prior=(counts + 1.0) / (len(y) + 3.0)).fit(X, y)
        np.testing.assert_allclose(model.predict_proba_many(self.queries),
                                   reference.predict_proba(model.features(self.queries)), rtol=1e-10)

    def test_unit_weights_give_mean_cross_entropy(self):
        rng = np.random.default_rng(2)
        X = rng.poisson(1.0, size=(12, 6)).astype(np.float64)
        y = rng.integers(0, 3, size=12)
        W = rng.normal(scale=0.5, size=(6, 3))
        b = rng.normal(scale=0.5, size=3)
        loss, _, _ = logistic_loss_and_grad(W, b, X, np.eye(3)[y], np.ones(12), l2=0.0)
        self.assertAlmostEqual(loss, log_loss(y, softmax(X @ W + b, axis=1), labels=[0, 1, 2]), places=10)

    def test_distributions_over_random_documents(self):
        rng = np.random.default_rng(5)
        vocabulary = sorted({token for doc in self.dataset for token in doc.view1}) + ['unseen-a', 'unseen-b']
        documents = []
        for i in range(1000):
            picks = rng.integers(0, len(vocabulary), size=rng.integers(0, 13))
            documents.append(Document(f"r{i}", tuple(vocabulary[j] for j in picks), ()))
        examples = as_examples(self.dataset)
        for kind in ('naive-bayes', 'logistic'):
            probs = train(examples, 'view1', kind=kind, num_classes=3).predict_proba_many(documents)
            self.assertEqual(probs.shape, (1000, 3))
            self.assertTrue(np.all(probs >= 0), msg=kind)
            np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9, err_msg=kind)

    def test_balanced_empty_documents_give_uniform_output(self):
        examples = tuple(example(f"e{i}", [], [], i % 3) for i in range(6))
        query = Document('q', ('anything', 'at', 'all'), ())
        for kind in ('naive-bayes', 'logistic'):
            model = train(examples, 'view1', kind=kind, num_classes=3)
            np.testing.assert_allclose(predict_proba(model, query).probs, np.full(3, 1 / 3), atol=1e-12,
                                       err_msg=kind)
