"""
Single-view probabilistic classifiers used as C1 (headline view) and C2 (paragraph view).

Both kinds share one interface: train on weighted labeled examples, read exactly one
view of a document, and return an N-class probability distribution.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Tuple

import numpy as np
from scipy.special import logsumexp, softmax
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.naive_bayes import MultinomialNB

from corpus.documents import VIEWS, Document

logger = logging.getLogger(__name__)

KINDS = ('naive-bayes', 'logistic')

# tokenize() never yields an empty token, so this feature never fires
PAD_FEATURE = ''


class ClassifierError(ValueError):
    """Raised for invalid training input or malformed model files."""


@dataclass(frozen=True)
class ClassDistribution:
    """A length-N probability vector."""
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ClassifierError(f"A class distribution must be a non-empty vector, got shape {probs.shape}")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
            raise ClassifierError(f"Not a probability distribution: {probs}")
        probs.setflags(write=False)
        object.__setattr__(self, 'probs', probs)

    def __len__(self):
        return len(self.probs)

    def argmax(self):
        """Most probable class; ties go to the lowest index."""
        return int(np.argmax(self.probs))

    def top(self):
        return float(self.probs.max())


@dataclass(frozen=True)
class LabeledExample:
    """A document with a gold or pseudo label and a training weight."""
    document: Document
    label: int
    weight: float = 1.0

    def __post_init__(self):
        if self.label < 0:
            raise ClassifierError(f"Example {self.document.id!r} has negative label {self.label}")
        if self.weight < 0:
            raise ClassifierError(f"Example {self.document.id!r} has negative weight {self.weight}")


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 1.0
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    seed: int = 0

    @classmethod
    def from_dict(cls, data):
        known = {key: data[key] for key in cls.__dataclass_fields__ if key in data}
        return cls(**known)


def as_examples(dataset, weight=1.0):
    """Gold-labeled examples from a labeled dataset."""
    return tuple(LabeledExample(doc, doc.label, weight) for doc in dataset)


def _passthrough(tokens):
    return list(tokens)


def make_vectorizer(vocabulary):
    """Bag-of-words counter over a fixed vocabulary; out-of-vocabulary tokens are dropped."""
    return CountVectorizer(
        analyzer=_passthrough,
        token_pattern=None,
        vocabulary={token: i for i, token in enumerate(vocabulary)},
        dtype=np.float64,
    )


class ViewClassifier:
    """Base class: vocabulary handling and the predict interface over one view."""
    kind = None

    def __init__(self, view, num_classes, vocabulary, hyperparams):
        if view not in VIEWS:
            raise ClassifierError(f"Unknown view {view!r}; expected one of {VIEWS}")
        self.view = view
        self.num_classes = num_classes
        self.vocabulary = tuple(vocabulary)
        self.hyperparams = hyperparams
        self._vectorizer = make_vectorizer(self.vocabulary)

    def features(self, documents):
        """Bag-of-words counts of the classifier's view."""
        return self._vectorizer.transform([doc.view(self.view) for doc in documents])

    def _proba(self, X):
        raise NotImplementedError

    def predict_proba_many(self, documents):
        documents = list(documents)
        if not documents:
            return np.zeros((0, self.num_classes))
        return self._proba(self.features(documents))

    def predict_proba(self, document):
        return ClassDistribution(self.predict_proba_many([document])[0])

    def _parameters(self):
        raise NotImplementedError

    def to_dict(self):
        return {
            'kind': self.kind,
            'view': self.view,
            'num_classes': self.num_classes,
            'vocabulary': list(self.vocabulary),
            'hyperparams': asdict(self.hyperparams),
            'parameters': {name: np.asarray(value).tolist() for name, value in self._parameters().items()},
        }


class NaiveBayesClassifier(ViewClassifier):
    """Multinomial naive Bayes with Laplace smoothing of both the likelihoods and the class prior."""
    kind = 'naive-bayes'

    def __init__(self, view, num_classes, vocabulary, hyperparams, model):
        super().__init__(view, num_classes, vocabulary, hyperparams)
        self.model = model

    @classmethod
    def fit(cls, X, y, weights, view, num_classes, vocabulary, hyperparams):
        class_weight = np.bincount(y, weights=weights, minlength=num_classes)
        alpha = hyperparams.alpha
        prior = (class_weight + alpha) / (class_weight.sum() + alpha * num_classes)
        model = MultinomialNB(alpha=alpha, class_prior=prior)
        model.partial_fit(X, y, classes=np.arange(num_classes), sample_weight=weights)
        return cls(view, num_classes, vocabulary, hyperparams, model)

    def _proba(self, X):
        # sklearn accumulates the joint log-likelihood, then normalises with logsumexp
        return self.model.predict_proba(X)

    def _parameters(self):
        return {
            'class_log_prior': self.model.class_log_prior_,
            'feature_log_prob': self.model.feature_log_prob_,
        }

    @classmethod
    def restore(cls, view, num_classes, vocabulary, hyperparams, parameters):
        model = MultinomialNB(alpha=hyperparams.alpha)
        model.classes_ = np.arange(num_classes)
        model.class_log_prior_ = np.asarray(parameters['class_log_prior'], dtype=np.float64)
        model.feature_log_prob_ = np.asarray(parameters['feature_log_prob'], dtype=np.float64)
        model.n_features_in_ = len(vocabulary)
        return cls(view, num_classes, vocabulary, hyperparams, model)


def logistic_loss_and_grad(W, b, X, Y, weights, l2):
    """
    Weighted softmax cross-entropy with an L2 penalty on W, and its gradient.

    Args:
        W: (V, N) weights; b: (N,) biases
        X: (n, V) features (dense or sparse); Y: (n, N) one-hot targets
        weights: (n,) non-negative example weights
        l2: penalty strength

    Returns:
        (loss, dW, db)
    """
    weights = np.asarray(weights, dtype=np.float64)
    total = weights.sum()
    if total <= 0:
        raise ClassifierError("Example weights sum to zero")
    Z = X @ W + b
    log_P = Z - logsumexp(Z, axis=1, keepdims=True)
    loss = -(weights * (Y * log_P).sum(axis=1)).sum() / total + 0.5 * l2 * np.sum(W * W)
    D = (np.exp(log_P) - Y) * (weights / total)[:, None]
    dW = np.asarray(X.T @ D) + l2 * W
    db = D.sum(axis=0)
    return loss, dW, db


class LogisticClassifier(ViewClassifier):
    """Multinomial logistic regression trained by full-batch gradient descent from zero weights."""
    kind = 'logistic'

    def __init__(self, view, num_classes, vocabulary, hyperparams, W, b):
        super().__init__(view, num_classes, vocabulary, hyperparams)
        self.W = W
        self.b = b

    @classmethod
    def fit(cls, X, y, weights, view, num_classes, vocabulary, hyperparams):
        Y = np.eye(num_classes)[y]
        W = np.zeros((X.shape[1], num_classes))
        b = np.zeros(num_classes)
        for _ in range(hyperparams.epochs):
            _, dW, db = logistic_loss_and_grad(W, b, X, Y, weights, hyperparams.l2)
            W -= hyperparams.learning_rate * dW
            b -= hyperparams.learning_rate * db
        return cls(view, num_classes, vocabulary, hyperparams, W, b)

    def _proba(self, X):
        return softmax(np.asarray(X @ self.W) + self.b, axis=1)

    def _parameters(self):
        return {'W': self.W, 'b': self.b}

    @classmethod
    def restore(cls, view, num_classes, vocabulary, hyperparams, parameters):
        W = np.asarray(parameters['W'], dtype=np.float64).reshape(len(vocabulary), num_classes)
        b = np.asarray(parameters['b'], dtype=np.float64)
        return cls(view, num_classes, vocabulary, hyperparams, W, b)


CLASSIFIER_TYPES = {cls.kind: cls for cls in (NaiveBayesClassifier, LogisticClassifier)}


def train(examples, view, kind='naive-bayes', hyperparams=None, num_classes=None):
    """
    Fit a classifier of the given kind on one view of the examples.

    Args:
        examples: non-empty sequence of LabeledExample
        view: 'view1', 'view2' or 'document'
        kind: 'naive-bayes' or 'logistic'
        hyperparams: Hyperparams (defaults when omitted)
        num_classes: N; inferred from the labels when omitted

    Returns:
        A fitted ViewClassifier
    """
    examples = tuple(examples)
    if not examples:
        raise ClassifierError("Cannot train a classifier on an empty example list")
    if kind not in CLASSIFIER_TYPES:
        raise ClassifierError(f"Unknown classifier kind {kind!r}; expected one of {KINDS}")
    hyperparams = hyperparams or Hyperparams()
    labels = np.array([ex.label for ex in examples], dtype=np.int64)
    if num_classes is None:
        num_classes = max(2, int(labels.max()) + 1)
    if labels.max() >= num_classes:
        raise ClassifierError(f"Label {int(labels.max())} out of range for {num_classes} classes")

    vocabulary = sorted({token for ex in examples for token in ex.document.view(view)}) or [PAD_FEATURE]
    weights = np.array([ex.weight for ex in examples], dtype=np.float64)

    X = make_vectorizer(vocabulary).transform([ex.document.view(view) for ex in examples])
    cls = CLASSIFIER_TYPES[kind]
    return cls.fit(X, labels, weights, view, num_classes, vocabulary, hyperparams)


def predict_proba(model, doc):
    """Class distribution of a fitted classifier (or ensemble) on one document."""
    return model.predict_proba(doc)


def accuracy(model, documents):
    """
    Fraction of labeled documents whose argmax prediction equals the label
    (argmax ties go to the lowest class index).
    """
    documents = list(documents)
    if not documents:
        raise ClassifierError("Accuracy needs at least one labeled document")
    if any(doc.label is None for doc in documents):
        raise ClassifierError("Accuracy needs labeled documents")
    predictions = np.argmax(model.predict_proba_many(documents), axis=1)
    labels = np.array([doc.label for doc in documents])
    return int((predictions == labels).sum()) / len(documents)


@dataclass(frozen=True)
class ClassifierSpec:
    """What it takes to (re)train a view classifier: kind, class count, hyperparameters."""
    kind: str = 'naive-bayes'
    num_classes: int = 2
    hyperparams: Hyperparams = field(default_factory=Hyperparams)

    def __post_init__(self):
        if self.kind not in CLASSIFIER_TYPES:
            raise ClassifierError(f"Unknown classifier kind {self.kind!r}; expected one of {KINDS}")

    def fit(self, examples, view):
        return train(examples, view, self.kind, self.hyperparams, self.num_classes)


def classifier_from_dict(data):
    try:
        cls = CLASSIFIER_TYPES[data['kind']]
        return cls.restore(
            data['view'], int(data['num_classes']), data['vocabulary'],
            Hyperparams.from_dict(data.get('hyperparams', {})), data['parameters'],
        )
    except KeyError as exc:
        raise ClassifierError(f"Malformed classifier record: missing {exc.args[0]!r}") from exc


def save_classifier(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(), sort_keys=True) + '\n', encoding='utf-8')
    return path


def load_classifier(path):
    return classifier_from_dict(json.loads(Path(path).read_text(encoding='utf-8')))
