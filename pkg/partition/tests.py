import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from corpus.documents import Document, UnlabeledDataset, jaccard
from corpus.services import synth_generate
from .minhash import PartitionError, estimate_jaccard, lsh_buckets, minhash_signature, shingle
from .services import Partition, PartitionParams, partition_unlabeled


def doc(doc_id, tokens):
    return Document(doc_id, tuple(tokens), ())


def unlabeled(docs):
    return UnlabeledDataset(tuple(docs), 2)


def cluster(prefix, count, length=30, seed=0):
    """Near-duplicate documents: one base sequence with a single token changed per copy."""
    rng = np.random.default_rng(seed)
    base = [f"{prefix}{int(i)}" for i in rng.integers(0, 1000, size=length)]
    docs = []
    for index in range(count):
        tokens = list(base)
        tokens[index % length] = f"{prefix}edit{index}"
        docs.append(doc(f"{prefix}-{index:02d}", tokens))
    return docs


def random_set_pair(rng):
    universe = rng.integers(20, 200)
    a = {(f"t{int(i)}",) for i in rng.integers(0, universe, size=rng.integers(5, 80))}
    b = {(f"t{int(i)}",) for i in rng.integers(0, universe, size=rng.integers(5, 80))}
    return a, b


class ShingleTests(SimpleTestCase):
    def test_bigrams(self):
        self.assertEqual(shingle(doc('a', 'abc'), 2), {('a', 'b'), ('b', 'c')})

    def test_short_document_is_singleton(self):
        self.assertEqual(shingle(doc('a', 'a'), 3), {('a',)})

    def test_duplicates_collapse(self):
        self.assertEqual(shingle(doc('a', 'abab'), 2), {('a', 'b'), ('b', 'a')})

    def test_merges_both_views(self):
        self.assertEqual(shingle(Document('a', ('x',), ('y',)), 2), {('x', 'y')})

    def test_empty_document(self):
        self.assertEqual(shingle(doc('a', ''), 3), frozenset())

    def test_width_must_be_positive(self):
        with self.assertRaises(PartitionError):
            shingle(doc('a', 'abc'), 0)


class MinHashTests(SimpleTestCase):
    def test_signature_shape_and_determinism(self):
        shingles = {('a', 'b'), ('b', 'c')}
        first = minhash_signature(shingles, 64, seed=3)
        second = minhash_signature(set(reversed(sorted(shingles))), 64, seed=3)
        self.assertEqual(first.num_hashes, 64)
        self.assertTrue(np.array_equal(first.values, second.values))

    def test_identical_sets_estimate_one(self):
        shingles = {('x',), ('y',), ('z',)}
        a = minhash_signature(shingles, 128, seed=1)
        b = minhash_signature(shingles, 128, seed=1)
        self.assertEqual(estimate_jaccard(a, b), 1.0)

    def test_mismatched_configurations(self):
        a = minhash_signature({('x',)}, 64, seed=1)
        with self.assertRaises(PartitionError):
            estimate_jaccard(a, minhash_signature({('x',)}, 128, seed=1))
        with self.assertRaises(PartitionError):
            estimate_jaccard(a, minhash_signature({('x',)}, 64, seed=2))

    def test_empty_set_rejected(self):
        with self.assertRaises(PartitionError):
            minhash_signature(set(), 64, seed=1)

    def test_estimate_tracks_exact_jaccard(self):
        """Test MinHash fidelity over 1000 random pairs with 256 hashes"""
        rng = np.random.default_rng(2024)
        errors = []
        for _ in range(1000):
            a, b = random_set_pair(rng)
            estimate = estimate_jaccard(minhash_signature(a, 256, seed=5), minhash_signature(b, 256, seed=5))
            errors.append(estimate - jaccard(a, b))
        errors = np.array(errors)
        self.assertLess(np.mean(np.abs(errors)), 0.05)
        self.assertGreaterEqual(np.mean(errors), -0.02)
        self.assertLessEqual(np.mean(errors), 0.02)


class LshTests(SimpleTestCase):
    def test_one_key_per_band(self):
        signature = minhash_signature({('a',), ('b',)}, 128, seed=1)
        keys = lsh_buckets(signature, 32, 4)
        self.assertEqual(len(keys), 32)
        self.assertEqual(len(set(keys)), 32)

    def test_bands_times_rows_must_match(self):
        signature = minhash_signature({('a',)}, 128, seed=1)
        with self.assertRaises(PartitionError):
            lsh_buckets(signature, 30, 4)

    def test_collision_rate_grows_with_similarity(self):
        rng = np.random.default_rng(11)
        rates = []
        for similarity in (0.1, 0.5, 0.9):
            collisions = 0
            for trial in range(100):
                # |a & b| / |a | b| = similarity with |a | b| = 100
                shared = int(round(100 * similarity))
                items = [(f"s{trial}-{int(i)}",) for i in rng.permutation(1000)[:100]]
                rest = items[shared:]
                a = set(items[:shared]) | set(rest[:len(rest) // 2])
                b = set(items[:shared]) | set(rest[len(rest) // 2:])
                keys_a = set(lsh_buckets(minhash_signature(a, 128, seed=4), 32, 4))
                keys_b = set(lsh_buckets(minhash_signature(b, 128, seed=4), 32, 4))
                collisions += bool(keys_a & keys_b)
            rates.append(collisions / 100)
        self.assertLessEqual(rates[0], rates[1])
        self.assertLessEqual(rates[1], rates[2])
        self.assertLess(rates[0], 0.2)
        self.assertGreater(rates[2], 0.95)

    def test_collision_rate_grows_with_band_count(self):
        """Test that with r fixed, more bands make a J=0.5 pair collide more often"""
        rng = np.random.default_rng(12)
        rows = 4
        rates = {}
        for bands in (4, 8, 16):
            collisions = 0
            for trial in range(300):
                items = [(f"b{trial}-{int(i)}",) for i in rng.permutation(1000)[:100]]
                a = set(items[:50]) | set(items[50:75])
                b = set(items[:50]) | set(items[75:])
                num_hashes = bands * rows
                keys_a = set(lsh_buckets(minhash_signature(a, num_hashes, seed=6), bands, rows))
                keys_b = set(lsh_buckets(minhash_signature(b, num_hashes, seed=6), bands, rows))
                collisions += bool(keys_a & keys_b)
            rates[bands] = collisions / 300
        self.assertLess(rates[4], rates[8])
        self.assertLess(rates[8], rates[16])
        for bands, rate in rates.items():
            # 1 - (1 - J^r)^b
            self.assertAlmostEqual(rate, 1 - (1 - 0.5 ** rows) ** bands, delta=0.12, msg=f"b={bands}")


class PartitionTests(SimpleTestCase):
    def assertValidPartition(self, partition, dataset, k):
        self.assertEqual(partition.k, k)
        self.assertTrue(partition.validate(dataset.ids))
        members = [doc_id for subset in partition.subsets for doc_id in subset]
        self.assertEqual(sorted(members), sorted(dataset.ids))
        for subset, representative in zip(partition.subsets, partition.representatives):
            self.assertEqual(subset[0], representative)

    def test_near_duplicate_clusters_become_subsets(self):
        clusters = [cluster('a', 6, seed=1), cluster('b', 5, seed=2), cluster('c', 4, seed=3)]
        dataset = unlabeled(clusters[0] + clusters[1] + clusters[2])
        partition = partition_unlabeled(dataset, 3)
        self.assertEqual(
            [set(s) for s in partition.subsets],
            [{d.id for d in group} for group in clusters],
        )
        self.assertEqual(partition.representatives, ('a-00', 'b-00', 'c-00'))

    def test_merges_down_to_k(self):
        groups = [cluster(prefix, 3, seed=i) for i, prefix in enumerate('pqrst')]
        dataset = unlabeled([d for group in groups for d in group])
        partition = partition_unlabeled(dataset, 2)
        self.assertValidPartition(partition, dataset, 2)
        # whole clusters move together
        for group in groups:
            ids = {d.id for d in group}
            self.assertTrue(any(ids <= set(subset) for subset in partition.subsets))

    def test_splits_up_to_k(self):
        dataset = unlabeled(cluster('z', 9))
        partition = partition_unlabeled(dataset, 3)
        self.assertValidPartition(partition, dataset, 3)
        self.assertEqual(sorted(len(s) for s in partition.subsets), [2, 3, 4])

    def test_empty_documents_are_placed(self):
        docs = cluster('a', 4) + [doc('empty-1', ''), doc('empty-2', ''), doc('empty-3', '')]
        dataset = unlabeled(docs)
        partition = partition_unlabeled(dataset, 3)
        self.assertValidPartition(partition, dataset, 3)

    def test_contract_on_random_corpora(self):
        """Test the partition invariants over 50 corpora for K in {2, 5, |U|}"""
        params = PartitionParams(shingle_width=2, num_hashes=32, bands=8, rows=4, seed=3)
        for seed in range(50):
            corpus = synth_generate(2, 5 + seed % 7, 15, 0.3, seed=seed, view1_length=3, view2_length=5)
            dataset = UnlabeledDataset.from_labeled(corpus)
            for k in (2, 5, len(dataset)):
                self.assertValidPartition(partition_unlabeled(dataset, k, params), dataset, k)

    def test_deterministic(self):
        dataset = UnlabeledDataset.from_labeled(synth_generate(2, 20, 30, 0.2, seed=8))
        self.assertEqual(partition_unlabeled(dataset, 4), partition_unlabeled(dataset, 4))

    def test_k_larger_than_corpus(self):
        with self.assertRaises(PartitionError):
            partition_unlabeled(unlabeled(cluster('a', 3)), 4)

    def test_invalid_band_configuration(self):
        with self.assertRaises(PartitionError):
            PartitionParams(num_hashes=128, bands=10, rows=4)

    def test_invariants_enforced_on_construction(self):
        with self.assertRaises(PartitionError):
            Partition((('a', 'b'), ('b',)), ('a', 'b'))
        with self.assertRaises(PartitionError):
            Partition((('a', 'b'),), ('b',))

    def test_save_and_load(self):
        dataset = UnlabeledDataset.from_labeled(synth_generate(2, 10, 30, 0.2, seed=8))
        partition = partition_unlabeled(dataset, 3)
        with tempfile.TemporaryDirectory() as tmp:
            loaded = Partition.load(partition.save(Path(tmp) / 'partition.json'))
        self.assertEqual(loaded, partition)
        self.assertEqual(loaded.params, PartitionParams())

    def test_documents_follow_subsets(self):
        dataset = unlabeled(cluster('a', 4) + cluster('b', 4, seed=5))
        partition = partition_unlabeled(dataset, 2)
        docs = partition.documents(dataset)
        self.assertEqual([tuple(d.id for d in group) for group in docs], [tuple(s) for s in partition.subsets])
        self.assertEqual(partition.subset_of('b-02'), 1)
