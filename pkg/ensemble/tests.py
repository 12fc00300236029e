import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from classifiers.services import as_examples, train
from corpus.documents import Document
from corpus.services import synth_generate
from .services import BETA_GRID, Ensemble, EnsembleError, beta_accuracies, ensemble_predict, fit_beta


class FixedClassifier:
    """Returns a stored distribution per document id."""

    def __init__(self, table):
        self.table = {doc_id: np.asarray(probs, dtype=np.float64) for doc_id, probs in table.items()}
        self.num_classes = len(next(iter(self.table.values())))

    def predict_proba_many(self, documents):
        return np.array([self.table[doc.id] for doc in documents])


def labeled(doc_id, label):
    return Document(doc_id, (), (), label)


class EnsembleTests(SimpleTestCase):
    def setUp(self):
        self.doc = labeled('a', 0)
        self.c1 = FixedClassifier({'a': [0.8, 0.2]})
        self.c2 = FixedClassifier({'a': [0.4, 0.6]})

    def test_even_mix(self):
        np.testing.assert_allclose(ensemble_predict(Ensemble(self.c1, self.c2, 0.5), self.doc).probs, [0.6, 0.4])

    def test_endpoints_reduce_to_single_classifiers(self):
        np.testing.assert_allclose(Ensemble(self.c1, self.c2, 1.0).predict_proba(self.doc).probs, [0.8, 0.2])
        np.testing.assert_allclose(Ensemble(self.c1, self.c2, 0.0).predict_proba(self.doc).probs, [0.4, 0.6])

    def test_beta_range(self):
        with self.assertRaises(EnsembleError):
            Ensemble(self.c1, self.c2, 1.2)

    def test_save_and_load(self):
        dataset = synth_generate(2, 10, 20, 0.1, seed=1)
        examples = as_examples(dataset)
        ens = Ensemble(train(examples, 'view1'), train(examples, 'view2'), 0.37)
        with tempfile.TemporaryDirectory() as tmp:
            loaded = Ensemble.load(ens.save(Path(tmp) / 'ensemble.json'))
        self.assertEqual(loaded.beta, 0.37)
        np.testing.assert_allclose(loaded.predict_proba_many(dataset), ens.predict_proba_many(dataset))


class FitBetaTests(SimpleTestCase):
    def test_grid(self):
        self.assertEqual(len(BETA_GRID), 101)
        self.assertEqual(BETA_GRID[37], 0.37)

    def test_ties_go_to_smallest_beta(self):
        table = {'a': [0.9, 0.1], 'b': [0.2, 0.8]}
        validation = [labeled('a', 0), labeled('b', 1)]
        self.assertEqual(fit_beta(FixedClassifier(table), FixedClassifier(table), validation), 0.0)

    def test_prefers_the_accurate_classifier(self):
        validation = [labeled('a', 0), labeled('b', 1)]
        good = FixedClassifier({'a': [0.9, 0.1], 'b': [0.1, 0.9]})
        bad = FixedClassifier({'a': [0.45, 0.55], 'b': [0.55, 0.45]})
        beta = fit_beta(good, bad, validation)
        # 0.9b + 0.45(1-b) > 0.5 needs b > 1/9
        self.assertEqual(beta, 0.12)

    def test_never_worse_than_either_classifier(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            ids = [f"d{i}" for i in range(30)]
            validation = [labeled(doc_id, int(rng.integers(3))) for doc_id in ids]
            c1 = FixedClassifier({doc_id: rng.dirichlet(np.ones(3)) for doc_id in ids})
            c2 = FixedClassifier({doc_id: rng.dirichlet(np.ones(3)) for doc_id in ids})
            correct = beta_accuracies(c1, c2, validation)
            best = correct[int(round(fit_beta(c1, c2, validation) * 100))]
            self.assertGreaterEqual(best, correct[0])
            self.assertGreaterEqual(best, correct[-1])

    def test_deterministic(self):
        dataset = synth_generate(2, 15, 20, 0.3, seed=2)
        examples = as_examples(dataset)
        c1, c2 = train(examples, 'view1'), train(examples, 'view2')
        self.assertEqual(fit_beta(c1, c2, dataset), fit_beta(c1, c2, dataset))

    def test_empty_validation(self):
        with self.assertRaises(EnsembleError):
            fit_beta(FixedClassifier({'a': [1.0, 0.0]}), FixedClassifier({'a': [1.0, 0.0]}), [])
