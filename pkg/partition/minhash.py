"""
Shingling, MinHash signatures and LSH banding.

Signatures come from datasketch's MinHash, whose permutations form a seeded
universal hash family ((a*x + b) mod p); values are stored as uint64.
"""
import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from datasketch import LeanMinHash, MinHash


class PartitionError(ValueError):
    """Raised for invalid partition parameters or inconsistent signatures."""


def shingle(doc, w=3):
    """
    Set of w-grams of consecutive tokens over the merged view1 + view2 sequence.

    Documents shorter than w yield the singleton set holding the whole sequence;
    a document without tokens yields the empty set.
    """
    if w < 1:
        raise PartitionError(f"Shingle width must be >= 1, got {w}")
    tokens = doc.tokens
    if not tokens:
        return frozenset()
    if len(tokens) < w:
        return frozenset({tuple(tokens)})
    return frozenset(tuple(tokens[i:i + w]) for i in range(len(tokens) - w + 1))


@lru_cache(maxsize=32)
def _hash_family(num_hashes, seed):
    # building the permutations is the slow part of MinHash(); share them per (H, seed)
    return MinHash(num_perm=num_hashes, seed=seed).permutations


def _encode(shingle_tuple):
    return '\x1f'.join(shingle_tuple).encode('utf-8')


@dataclass(frozen=True)
class MinHashSignature:
    """H minimum hash values of a shingle set under a seeded hash family."""
    minhash: LeanMinHash

    @property
    def values(self):
        return self.minhash.hashvalues

    @property
    def num_hashes(self):
        return len(self.minhash.hashvalues)

    @property
    def seed(self):
        return self.minhash.seed


def minhash_signature(shingles, num_hashes, seed):
    """Compute the MinHash signature of a non-empty shingle set."""
    if num_hashes < 1:
        raise PartitionError(f"num_hashes must be >= 1, got {num_hashes}")
    if not shingles:
        raise PartitionError("Cannot sign an empty shingle set; filter empty documents first")
    minhash = MinHash(num_perm=num_hashes, seed=seed, permutations=_hash_family(num_hashes, seed))
    # sorted so the signature never depends on set iteration order
    minhash.update_batch([_encode(s) for s in sorted(shingles)])
    return MinHashSignature(LeanMinHash(minhash))


def estimate_jaccard(a, b):
    """Fraction of signature positions on which two signatures agree."""
    if a.num_hashes != b.num_hashes or a.seed != b.seed:
        raise PartitionError(
            f"Signatures are not comparable: H={a.num_hashes}/seed={a.seed} "
            f"vs H={b.num_hashes}/seed={b.seed}"
        )
    return float(a.minhash.jaccard(b.minhash))


def lsh_buckets(signature, bands, rows):
    """
    One bucket key per band: a digest of the band's contiguous block of r values.

    Keys carry the band index so equal blocks in different bands never collide.
    """
    if bands < 1 or rows < 1 or bands * rows != signature.num_hashes:
        raise PartitionError(
            f"bands*rows must equal num_hashes ({bands}*{rows} != {signature.num_hashes})"
        )
    values = np.asarray(signature.values, dtype='<u8')
    keys = []
    for band in range(bands):
        block = values[band * rows:(band + 1) * rows]
        digest = hashlib.blake2b(block.tobytes(), digest_size=8).hexdigest()
        keys.append(f"{band}:{digest}")
    return tuple(keys)
