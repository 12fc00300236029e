"""
Corpus services: JSONL ingestion, stratified splitting, split manifests and the
synthetic two-view generator.
"""
import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .documents import CorpusError, Dataset, Document, UnlabeledDataset, tokenize

logger = logging.getLogger(__name__)

SPLIT_NAMES = ('train', 'validation', 'unlabeled')


def load_jsonl(path, num_classes=None):
    """
    Load a two-view dataset from a JSONL file.

    Args:
        path: file with one {"id", "view1", "view2", "label"?} object per line
        num_classes: declared class count; inferred as max(label) + 1 (at least 2) when omitted

    Returns:
        Dataset with documents in file order
    """
    documents = []
    seen = {}
    with open(path, encoding='utf-8') as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: line {line_no}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"{path}: line {line_no}: expected a JSON object")

            for key in ('id', 'view1', 'view2'):
                if not isinstance(record.get(key), str):
                    raise CorpusError(f"{path}: line {line_no}: missing or non-string field {key!r}")

            label = record.get('label')
            if label is not None and (isinstance(label, bool) or not isinstance(label, int) or label < 0):
                raise CorpusError(f"{path}: line {line_no}: label must be a non-negative integer")
            if label is not None and num_classes is not None and label >= num_classes:
                raise CorpusError(
                    f"{path}: line {line_no}: label {label} out of range for {num_classes} classes"
                )

            doc_id = record['id']
            if doc_id in seen:
                raise CorpusError(
                    f"{path}: line {line_no}: duplicate id {doc_id!r} (first seen on line {seen[doc_id]})"
                )
            seen[doc_id] = line_no

            documents.append(Document(
                id=doc_id,
                view1=tokenize(record['view1']),
                view2=tokenize(record['view2']),
                label=label,
            ))

    if num_classes is None:
        labels = [doc.label for doc in documents if doc.label is not None]
        num_classes = max(2, max(labels) + 1) if labels else 2

    dataset = Dataset(tuple(documents), num_classes)
    logger.info(f"Loaded {len(dataset)} documents ({num_classes} classes) from {path}")
    return dataset


def dump_jsonl(dataset, path):
    """Write a dataset in the JSONL ingestion format (views joined by single spaces)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as handle:
        for doc in dataset:
            record = {'id': doc.id, 'view1': ' '.join(doc.view1), 'view2': ' '.join(doc.view2)}
            if doc.label is not None:
                record['label'] = doc.label
            handle.write(json.dumps(record, ensure_ascii=False) + '\n')
    return path


@dataclass(frozen=True)
class SplitSpec:
    """Fractions of the labeled/validation/unlabeled split."""
    frac_train: float = 0.1
    frac_validation: float = 0.1
    frac_unlabeled: float = 0.8
    seed: int = 0

    def __post_init__(self):
        fractions = (self.frac_train, self.frac_validation, self.frac_unlabeled)
        if any(f <= 0 for f in fractions):
            raise CorpusError(f"Split fractions must be positive, got {fractions}")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise CorpusError(f"Split fractions must sum to 1, got {sum(fractions)!r}")


def split_stratified(dataset, spec):
    """
    Split a fully labeled dataset into (train, validation, unlabeled), class by class.

    Per class, the train and validation counts are the rounded fractions of that
    class's size and the remainder goes to the unlabeled split, so every split is
    within one document per class of its exact proportion. Documents keep their
    original order inside each split. The unlabeled split withholds its labels.
    """
    if not dataset.is_labeled:
        raise CorpusError("split_stratified requires every document to be labeled")

    rng = np.random.default_rng(spec.seed)
    by_class = [[] for _ in range(dataset.num_classes)]
    for index, doc in enumerate(dataset):
        by_class[doc.label].append(index)

    assignment = {}
    for label, indices in enumerate(by_class):
        if not indices:
            continue
        if len(indices) < len(SPLIT_NAMES):
            raise CorpusError(
                f"Class {label} has {len(indices)} documents; at least {len(SPLIT_NAMES)} are needed to split"
            )
        shuffled = rng.permutation(indices)
        n_train = int(round(len(indices) * spec.frac_train))
        n_validation = int(round(len(indices) * spec.frac_validation))
        for position, index in enumerate(shuffled):
            if position < n_train:
                assignment[int(index)] = 'train'
            elif position < n_train + n_validation:
                assignment[int(index)] = 'validation'
            else:
                assignment[int(index)] = 'unlabeled'

    buckets = {name: [] for name in SPLIT_NAMES}
    for index, doc in enumerate(dataset):
        buckets[assignment[index]].append(doc)

    train = Dataset(tuple(buckets['train']), dataset.num_classes)
    validation = Dataset(tuple(buckets['validation']), dataset.num_classes)
    unlabeled = UnlabeledDataset.from_labeled(Dataset(tuple(buckets['unlabeled']), dataset.num_classes))
    logger.info(
        f"Split {len(dataset)} documents into train={len(train)}, "
        f"validation={len(validation)}, unlabeled={len(unlabeled)} (seed {spec.seed})"
    )
    return train, validation, unlabeled


def export_split_manifest(splits, path):
    """
    Write a CSV manifest (doc_id, split) for a mapping of split name -> dataset.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['doc_id', 'split'])
        for name, dataset in splits.items():
            for doc in dataset:
                writer.writerow([doc.id, name])
    return path


def load_split_manifest(dataset, path):
    """
    Rebuild named splits of a corpus from a manifest written by export_split_manifest.

    The 'unlabeled' split comes back as an UnlabeledDataset.
    """
    ids_by_split = {}
    with open(path, newline='', encoding='utf-8') as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or set(reader.fieldnames) != {'doc_id', 'split'}:
            raise CorpusError(f"{path}: expected header doc_id,split")
        for row in reader:
            ids_by_split.setdefault(row['split'], []).append(row['doc_id'])

    splits = {}
    for name, ids in ids_by_split.items():
        subset = dataset.subset(ids)
        splits[name] = UnlabeledDataset.from_labeled(subset) if name == 'unlabeled' else subset
    return splits


def synth_generate(num_classes, docs_per_class, vocab_per_view, view_noise, seed,
                   view1_length=8, view2_length=24, id_prefix='doc'):
    """
    Generate a synthetic two-view corpus where either view alone suffices to classify.

    Each class owns a disjoint vocabulary in each view (tokens like 'h3w17' for the
    headline view and 'p3w17' for the paragraph view). Every token is drawn from the
    document's own class vocabulary, except that with probability view_noise it is
    drawn from another, uniformly chosen class. With view_noise=0 each view is
    linearly separable.
    """
    for name, value in (('num_classes', num_classes), ('docs_per_class', docs_per_class),
                        ('vocab_per_view', vocab_per_view), ('view1_length', view1_length),
                        ('view2_length', view2_length)):
        if value < 1:
            raise CorpusError(f"{name} must be positive, got {value}")
    if num_classes < 2:
        raise CorpusError(f"num_classes must be >= 2, got {num_classes}")
    if not 0.0 <= view_noise < 0.5:
        raise CorpusError(f"view_noise must be in [0, 0.5), got {view_noise}")

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.repeat(np.arange(num_classes), docs_per_class))

    def draw_view(prefix, label, length):
        classes = np.full(length, label)
        noisy = rng.random(length) < view_noise
        if noisy.any():
            # shift by 1..N-1 so a noisy token always comes from a different class
            offsets = rng.integers(1, num_classes, size=int(noisy.sum()))
            classes[noisy] = (label + offsets) % num_classes
        words = rng.integers(0, vocab_per_view, size=length)
        return tuple(f"{prefix}{c}w{w}" for c, w in zip(classes, words))

    documents = []
    for index, label in enumerate(labels):
        label = int(label)
        documents.append(Document(
            id=f"{id_prefix}{index:06d}",
            view1=draw_view('h', label, view1_length),
            view2=draw_view('p', label, view2_length),
            label=label,
        ))
    return Dataset(tuple(documents), num_classes)


def swap_views(dataset, rate, seed):
    """
    Corrupt a fraction of documents by replacing their view2 with the view2 of a
    document from a different class, so the two views disagree on the label.
    """
    if not 0.0 <= rate <= 1.0:
        raise CorpusError(f"rate must be in [0, 1], got {rate}")
    if not dataset.is_labeled:
        raise CorpusError("swap_views requires a labeled dataset")

    rng = np.random.default_rng(seed)
    docs = list(dataset.documents)
    n_swapped = int(round(rate * len(docs)))
    chosen = sorted(int(i) for i in rng.choice(len(docs), size=n_swapped, replace=False))
    originals = dataset.documents
    for index in chosen:
        donors = [d for d in originals if d.label != docs[index].label]
        if not donors:
            continue
        donor = donors[int(rng.integers(len(donors)))]
        docs[index] = Document(docs[index].id, docs[index].view1, donor.view2, docs[index].label)
    return Dataset(tuple(docs), dataset.num_classes)
