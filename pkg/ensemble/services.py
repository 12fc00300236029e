"""
Weighted-vote ensemble C = beta * C1 + (1 - beta) * C2 over class probabilities.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from classifiers.services import ClassDistribution, classifier_from_dict

logger = logging.getLogger(__name__)

BETA_GRID = np.arange(101) / 100.0


class EnsembleError(ValueError):
    """Raised for an out-of-range beta or an empty validation set."""


@dataclass(frozen=True)
class Ensemble:
    c1: object
    c2: object
    beta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise EnsembleError(f"beta must be in [0, 1], got {self.beta}")

    @property
    def num_classes(self):
        return self.c1.num_classes

    def predict_proba_many(self, documents):
        documents = list(documents)
        return self.beta * self.c1.predict_proba_many(documents) + (1.0 - self.beta) * self.c2.predict_proba_many(documents)

    def predict_proba(self, document):
        return ClassDistribution(self.predict_proba_many([document])[0])

    def to_dict(self):
        return {'beta': self.beta, 'c1': self.c1.to_dict(), 'c2': self.c2.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(classifier_from_dict(data['c1']), classifier_from_dict(data['c2']), float(data['beta']))

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True) + '\n', encoding='utf-8')
        return path

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))


def ensemble_predict(ens, doc):
    return ens.predict_proba(doc)


def beta_accuracies(c1, c2, validation):
    """Number of correct validation predictions for every beta on the grid."""
    documents = list(validation)
    if not documents:
        raise EnsembleError("fit_beta needs a non-empty validation set")
    labels = np.array([doc.label for doc in documents])
    p1 = c1.predict_proba_many(documents)
    p2 = c2.predict_proba_many(documents)
    correct = np.empty(len(BETA_GRID), dtype=np.int64)
    for i, beta in enumerate(BETA_GRID):
        predictions = np.argmax(beta * p1 + (1.0 - beta) * p2, axis=1)
        correct[i] = int((predictions == labels).sum())
    return correct


def fit_beta(c1, c2, validation):
    """
    Grid-search beta in {0, 0.01, ..., 1} for the highest validation accuracy;
    ties go to the smallest beta.
    """
    correct = beta_accuracies(c1, c2, validation)
    best = int(np.argmax(correct))
    beta = float(BETA_GRID[best])
    logger.info(f"Fitted beta={beta} ({correct[best]}/{len(validation)} correct on validation)")
    return beta
