"""
Similarity partitioning of the unlabeled corpus into exactly K subsets.

Documents are scanned in dataset order. A document joins the subset it shares an LSH
bucket with whose representative is most similar; otherwise it opens a new subset and
becomes its representative. The subset count is then merged down or split up to K.
"""
import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Tuple

from .minhash import PartitionError, estimate_jaccard, lsh_buckets, minhash_signature, shingle

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PartitionParams:
    """Shingle/hash/band configuration of a partition run."""
    shingle_width: int = 3
    num_hashes: int = 128
    bands: int = 32
    rows: int = 4
    seed: int = 1

    def __post_init__(self):
        if self.shingle_width < 1:
            raise PartitionError(f"shingle_width must be >= 1, got {self.shingle_width}")
        if self.num_hashes < 1:
            raise PartitionError(f"num_hashes must be >= 1, got {self.num_hashes}")
        if self.bands * self.rows != self.num_hashes:
            raise PartitionError(
                f"bands*rows must equal num_hashes ({self.bands}*{self.rows} != {self.num_hashes})"
            )

    @classmethod
    def from_dict(cls, data):
        return cls(**{key: int(data[key]) for key in ('shingle_width', 'num_hashes', 'bands', 'rows', 'seed')
                      if key in data})


@dataclass(frozen=True)
class Partition:
    """K disjoint subsets of unlabeled document ids, each with its representative."""
    subsets: Tuple[Tuple[str, ...], ...]
    representatives: Tuple[str, ...]
    params: Optional[PartitionParams] = None

    def __post_init__(self):
        object.__setattr__(self, 'subsets', tuple(tuple(s) for s in self.subsets))
        object.__setattr__(self, 'representatives', tuple(self.representatives))
        self.validate()

    @property
    def k(self):
        return len(self.subsets)

    def validate(self, ids=None):
        """
        Check disjointness, representative membership (as first element) and, when
        ids is given, that the subsets cover exactly those ids.
        """
        if not self.subsets:
            raise PartitionError("A partition needs at least one subset")
        if len(self.representatives) != len(self.subsets):
            raise PartitionError(
                f"{len(self.representatives)} representatives for {len(self.subsets)} subsets"
            )
        seen = set()
        for index, (members, representative) in enumerate(zip(self.subsets, self.representatives)):
            if not members or members[0] != representative:
                raise PartitionError(f"Subset {index}: representative {representative!r} is not its first member")
            overlap = seen.intersection(members)
            if overlap or len(set(members)) != len(members):
                raise PartitionError(f"Subset {index} overlaps earlier subsets: {sorted(overlap)[:3]}")
            seen.update(members)
        if ids is not None and seen != set(ids):
            missing = set(ids) - seen
            extra = seen - set(ids)
            raise PartitionError(
                f"Partition does not cover the unlabeled set (missing={sorted(missing)[:3]}, extra={sorted(extra)[:3]})"
            )
        return True

    def subset_of(self, doc_id):
        for index, members in enumerate(self.subsets):
            if doc_id in members:
                return index
        raise PartitionError(f"Document {doc_id!r} is not in the partition")

    def documents(self, unlabeled):
        """Materialise the subsets as tuples of documents from the unlabeled dataset."""
        index = unlabeled.by_id()
        try:
            return tuple(tuple(index[doc_id] for doc_id in members) for members in self.subsets)
        except KeyError as exc:
            raise PartitionError(f"Partition references unknown document {exc.args[0]!r}") from exc

    def representative_documents(self, unlabeled):
        index = unlabeled.by_id()
        return tuple(index[doc_id] for doc_id in self.representatives)

    def to_dict(self):
        return {
            'params': asdict(self.params) if self.params else None,
            'subsets': [list(members) for members in self.subsets],
            'representatives': list(self.representatives),
        }

    @classmethod
    def from_dict(cls, data):
        params = PartitionParams.from_dict(data['params']) if data.get('params') else None
        return cls(subsets=data['subsets'], representatives=data['representatives'], params=params)

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
        return path

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding='utf-8')))


def compute_signatures(documents, params):
    """Signatures of all documents with at least one token, keyed by document id."""
    signatures = {}
    for doc in documents:
        shingles = shingle(doc, params.shingle_width)
        if shingles:
            signatures[doc.id] = minhash_signature(shingles, params.num_hashes, params.seed)
    return signatures


def _nearest_subset(signature, candidates, representatives, signatures):
    # highest estimated similarity to the representative; ties go to the lowest index
    best_index, best_score = None, -1.0
    for index in sorted(candidates):
        score = estimate_jaccard(signature, signatures[representatives[index]])
        if score > best_score:
            best_index, best_score = index, score
    return best_index


def partition_unlabeled(unlabeled, k, params=None):
    """
    Partition the unlabeled dataset into exactly k similarity-based subsets.

    Args:
        unlabeled: Dataset (or UnlabeledDataset) to partition
        k: number of subsets
        params: PartitionParams (defaults when omitted)

    Returns:
        Partition whose invariants have been checked against the unlabeled ids
    """
    params = params or PartitionParams()
    if k < 1:
        raise PartitionError(f"K must be >= 1, got {k}")
    if len(unlabeled) < k:
        raise PartitionError(f"Cannot form {k} subsets from {len(unlabeled)} documents")

    signatures = compute_signatures(unlabeled, params)
    empty_ids = [doc.id for doc in unlabeled if doc.id not in signatures]
    if empty_ids:
        logger.warning(f"{len(empty_ids)} documents have no tokens; they are assigned after partitioning")

    # Assignment scan in dataset order
    subsets = []
    representatives = []
    bucket_members = defaultdict(set)
    for doc in unlabeled:
        signature = signatures.get(doc.id)
        if signature is None:
            continue
        keys = lsh_buckets(signature, params.bands, params.rows)
        candidates = set().union(*(bucket_members.get(key, ()) for key in keys))
        if candidates:
            target = _nearest_subset(signature, candidates, representatives, signatures)
            subsets[target].append(doc.id)
        else:
            target = len(subsets)
            subsets.append([doc.id])
            representatives.append(doc.id)
        for key in keys:
            bucket_members[key].add(target)
    logger.debug(f"LSH scan formed {len(subsets)} subsets for K={k}")

    # Too many subsets: fold the smallest into the subset with the nearest representative
    while len(subsets) > k:
        sizes = [len(members) for members in subsets]
        smallest = max(i for i, size in enumerate(sizes) if size == min(sizes))
        others = set(range(len(subsets))) - {smallest}
        target = _nearest_subset(signatures[representatives[smallest]], others, representatives, signatures)
        # the target is never smaller, so it keeps its representative
        subsets[target] = subsets[target] + subsets[smallest]
        logger.debug(f"Merged subset {smallest} into {target}")
        del subsets[smallest]
        del representatives[smallest]

    # Too few: split the largest at its midpoint in insertion order
    while len(subsets) < k:
        sizes = [len(members) for members in subsets]
        if not sizes or max(sizes) < 2:
            break
        largest = sizes.index(max(sizes))
        members = subsets[largest]
        middle = (len(members) + 1) // 2
        subsets[largest] = members[:middle]
        subsets.append(members[middle:])
        representatives.append(members[middle])
        logger.debug(f"Split subset {largest} at position {middle}")

    # Documents without tokens: open subsets while short of K, then round-robin
    pending = list(empty_ids)
    while pending and len(subsets) < k:
        doc_id = pending.pop(0)
        subsets.append([doc_id])
        representatives.append(doc_id)
    for offset, doc_id in enumerate(pending):
        subsets[offset % k].append(doc_id)

    partition = Partition(tuple(map(tuple, subsets)), tuple(representatives), params)
    partition.validate(unlabeled.ids)
    if partition.k != k:
        raise PartitionError(f"Partitioning produced {partition.k} subsets instead of {k}")
    logger.info(
        f"Partitioned {len(unlabeled)} documents into {k} subsets "
        f"(sizes {min(map(len, partition.subsets))}..{max(map(len, partition.subsets))})"
    )
    return partition
