"""
Document model for two-view text corpora.

A document has a headline view (view1) and a paragraph view (view2). Partitioning
works on the merged token sequence, classification on one view at a time, so both
are exposed here.
"""
import re
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Iterator, Mapping, Optional, Tuple

VIEWS = ('view1', 'view2', 'document')

# Words are runs of letters/digits; an apostrophe is kept only between two of them.
TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*")


class CorpusError(ValueError):
    """Raised for invalid documents, datasets, splits or generator parameters."""


def tokenize(text):
    """Lowercase word-level tokenization; punctuation is dropped except intra-word apostrophes."""
    if not text:
        return ()
    return tuple(TOKEN_RE.findall(text.replace('’', "'").lower()))


def jaccard(a, b):
    """
    Exact Jaccard similarity |a ∩ b| / |a ∪ b| of two token sets.

    Two empty sets are treated as identical (similarity 1.0).
    """
    a = set(a)
    b = set(b)
    union = len(a | b)
    if union == 0:
        return 1.0
    return len(a & b) / union


@dataclass(frozen=True)
class Document:
    """A two-view example with an optional class label."""
    id: str
    view1: Tuple[str, ...]
    view2: Tuple[str, ...]
    label: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, 'view1', tuple(self.view1))
        object.__setattr__(self, 'view2', tuple(self.view2))
        if self.label is not None and self.label < 0:
            raise CorpusError(f"Document {self.id!r} has negative label {self.label}")

    @property
    def tokens(self):
        """The merged view1 + view2 token sequence."""
        return self.view1 + self.view2

    @property
    def token_set(self):
        return frozenset(self.tokens)

    def view(self, name):
        if name == 'view1':
            return self.view1
        if name == 'view2':
            return self.view2
        if name == 'document':
            return self.tokens
        raise CorpusError(f"Unknown view {name!r}; expected one of {VIEWS}")

    def without_label(self):
        return replace(self, label=None)


@dataclass(frozen=True)
class Dataset:
    """An immutable, ordered collection of documents over a fixed number of classes."""
    documents: Tuple[Document, ...]
    num_classes: int
    vocabulary: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'documents', tuple(self.documents))
        if self.num_classes < 2:
            raise CorpusError(f"num_classes must be >= 2, got {self.num_classes}")

        seen = set()
        vocabulary = set()
        for doc in self.documents:
            if doc.id in seen:
                raise CorpusError(f"Duplicate document id {doc.id!r}")
            seen.add(doc.id)
            if doc.label is not None and doc.label >= self.num_classes:
                raise CorpusError(
                    f"Document {doc.id!r} has label {doc.label} but the dataset declares "
                    f"{self.num_classes} classes"
                )
            vocabulary.update(doc.view1)
            vocabulary.update(doc.view2)
        object.__setattr__(self, 'vocabulary', frozenset(vocabulary))

    def __len__(self):
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    @property
    def ids(self):
        return tuple(doc.id for doc in self.documents)

    @property
    def is_labeled(self):
        return all(doc.label is not None for doc in self.documents)

    def labels(self):
        return tuple(doc.label for doc in self.documents)

    def class_counts(self):
        counts = [0] * self.num_classes
        for doc in self.documents:
            if doc.label is not None:
                counts[doc.label] += 1
        return counts

    def by_id(self) -> Mapping[str, Document]:
        return MappingProxyType({doc.id: doc for doc in self.documents})

    def subset(self, ids):
        """Documents with the given ids, in the order given."""
        index = self.by_id()
        try:
            return Dataset(tuple(index[doc_id] for doc_id in ids), self.num_classes)
        except KeyError as exc:
            raise CorpusError(f"Unknown document id {exc.args[0]!r}") from exc


class UnlabeledDataset(Dataset):
    """
    The unlabeled split: documents carry no label.

    Gold labels withheld at split time are kept aside and are only reachable through
    reveal_labels(), for post-hoc diagnostics.
    """

    def __init__(self, documents, num_classes, hidden_labels=None):
        super().__init__(tuple(doc.without_label() for doc in documents), num_classes)
        object.__setattr__(self, '_hidden_labels', MappingProxyType(dict(hidden_labels or {})))

    @classmethod
    def from_labeled(cls, dataset):
        hidden = {doc.id: doc.label for doc in dataset if doc.label is not None}
        return cls(dataset.documents, dataset.num_classes, hidden)

    def reveal_labels(self) -> Mapping[str, int]:
        return self._hidden_labels

    def subset(self, ids):
        index = self.by_id()
        try:
            docs = tuple(index[doc_id] for doc_id in ids)
        except KeyError as exc:
            raise CorpusError(f"Unknown document id {exc.args[0]!r}") from exc
        hidden = {doc.id: self._hidden_labels[doc.id] for doc in docs if doc.id in self._hidden_labels}
        return UnlabeledDataset(docs, self.num_classes, hidden)
