import json
import random
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from classifiers.services import accuracy, as_examples, train
from .documents import CorpusError, Dataset, Document, UnlabeledDataset, jaccard, tokenize
from .services import (
    SplitSpec, dump_jsonl, export_split_manifest, load_jsonl, load_split_manifest, split_stratified,
    swap_views, synth_generate,
)


def balanced_dataset(per_class=50, num_classes=2):
    docs = []
    for index in range(per_class * num_classes):
        label = index % num_classes
        docs.append(Document(f"d{index:03d}", (f"h{label}", f"x{index}"), (f"p{label}",), label))
    return Dataset(tuple(docs), num_classes)


class TokenizeTests(SimpleTestCase):
    def test_empty_text(self):
        self.assertEqual(tokenize(''), ())

    def test_headline_golden(self):
        """Test punctuation stripping with intra-word apostrophes kept"""
        self.assertEqual(tokenize("You Won't Believe This!"), ('you', "won't", 'believe', 'this'))

    def test_repetition_preserved(self):
        self.assertEqual(tokenize('a a a'), ('a', 'a', 'a'))

    def test_curly_apostrophe_and_edges(self):
        self.assertEqual(tokenize("Don’t 'quote' me_now"), ("don't", 'quote', 'me', 'now'))


class JaccardTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(jaccard({'x', 'y', 'z'}, {'x', 'y', 'z'}), 1.0)
        self.assertEqual(jaccard({'x'}, {'y'}), 0.0)
        self.assertEqual(jaccard({'a', 'b', 'c'}, {'b', 'c', 'd'}), 0.5)

    def test_both_empty_is_one(self):
        self.assertEqual(jaccard(set(), set()), 1.0)

    def test_properties_over_random_sets(self):
        rng = random.Random(7)
        for _ in range(200):
            a = {rng.randrange(30) for _ in range(rng.randrange(1, 15))}
            b = {rng.randrange(30) for _ in range(rng.randrange(0, 15))}
            value = jaccard(a, b)
            self.assertEqual(value, jaccard(b, a))
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 1.0)
            self.assertEqual(jaccard(a, a), 1.0)


class DatasetTests(SimpleTestCase):
    def test_vocabulary_is_union_of_both_views(self):
        dataset = Dataset((Document('a', ('x', 'y'), ('z',), 0), Document('b', ('y',), ('w',), 1)), 2)
        self.assertEqual(dataset.vocabulary, frozenset({'x', 'y', 'z', 'w'}))

    def test_duplicate_ids_rejected(self):
        with self.assertRaises(CorpusError):
            Dataset((Document('a', (), (), 0), Document('a', (), (), 1)), 2)

    def test_label_out_of_range_rejected(self):
        with self.assertRaises(CorpusError):
            Dataset((Document('a', (), (), 2),), 2)

    def test_needs_two_classes(self):
        with self.assertRaises(CorpusError):
            Dataset((), 1)

    def test_document_views(self):
        doc = Document('a', ('h',), ('p', 'q'), 0)
        self.assertEqual(doc.view('document'), ('h', 'p', 'q'))
        self.assertEqual(doc.token_set, frozenset({'h', 'p', 'q'}))
        with self.assertRaises(CorpusError):
            doc.view('body')

    def test_unlabeled_dataset_hides_labels(self):
        dataset = balanced_dataset(per_class=3)
        unlabeled = UnlabeledDataset.from_labeled(dataset)
        self.assertTrue(all(doc.label is None for doc in unlabeled))
        self.assertEqual(unlabeled.reveal_labels()['d001'], 1)
        subset = unlabeled.subset(['d004', 'd001'])
        self.assertEqual(subset.ids, ('d004', 'd001'))
        self.assertEqual(dict(subset.reveal_labels()), {'d004': 0, 'd001': 1})


class LoadJsonlTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, lines):
        path = Path(self.tmp.name) / 'corpus.jsonl'
        path.write_text('\n'.join(lines) + '\n', encoding='utf-8')
        return path

    def test_two_valid_lines(self):
        path = self.write([
            json.dumps({'id': 'a', 'view1': 'Big News', 'view2': 'the body', 'label': 0}),
            json.dumps({'id': 'b', 'view1': 'Other', 'view2': 'text here', 'label': 1}),
        ])
        dataset = load_jsonl(path)
        self.assertEqual(len(dataset), 2)
        self.assertEqual(dataset.ids, ('a', 'b'))
        self.assertEqual(dataset.documents[0].view1, ('big', 'news'))

    def test_missing_view2_cites_line(self):
        path = self.write([
            json.dumps({'id': 'a', 'view1': 'x', 'view2': 'y', 'label': 0}),
            json.dumps({'id': 'b', 'view1': 'x', 'view2': 'y', 'label': 1}),
            json.dumps({'id': 'c', 'view1': 'x', 'label': 1}),
        ])
        with self.assertRaisesMessage(CorpusError, 'line 3'):
            load_jsonl(path)

    def test_malformed_json_cites_line(self):
        path = self.write([json.dumps({'id': 'a', 'view1': 'x', 'view2': 'y'}), '{not json'])
        with self.assertRaisesMessage(CorpusError, 'line 2'):
            load_jsonl(path)

    def test_duplicate_id(self):
        record = json.dumps({'id': 'a', 'view1': 'x', 'view2': 'y', 'label': 0})
        with self.assertRaisesMessage(CorpusError, 'duplicate id'):
            load_jsonl(self.write([record, record]))

    def test_labels_within_declared_classes(self):
        path = self.write([
            json.dumps({'id': str(i), 'view1': 'x', 'view2': 'y', 'label': label})
            for i, label in enumerate([0, 1, 1])
        ])
        self.assertEqual(load_jsonl(path, num_classes=2).labels(), (0, 1, 1))

    def test_label_out_of_range(self):
        path = self.write([json.dumps({'id': 'a', 'view1': 'x', 'view2': 'y', 'label': 2})])
        with self.assertRaises(CorpusError):
            load_jsonl(path, num_classes=2)

    def test_dump_then_load_keeps_tokens(self):
        dataset = synth_generate(2, 5, 20, 0.1, seed=3)
        path = dump_jsonl(dataset, Path(self.tmp.name) / 'out.jsonl')
        self.assertEqual(load_jsonl(path, num_classes=2), dataset)


class SplitTests(SimpleTestCase):
    def test_split_sizes_per_class(self):
        dataset = balanced_dataset(per_class=50)
        train, validation, unlabeled = split_stratified(dataset, SplitSpec(0.1, 0.1, 0.8, seed=1))
        self.assertEqual((len(train), len(validation), len(unlabeled)), (10, 10, 80))
        self.assertEqual(train.class_counts(), [5, 5])
        self.assertEqual(validation.class_counts(), [5, 5])
        self.assertEqual(sorted(unlabeled.reveal_labels().values()).count(0), 40)

    def test_splits_are_disjoint_and_covering(self):
        dataset = synth_generate(3, 37, 30, 0.2, seed=5)
        train, validation, unlabeled = split_stratified(dataset, SplitSpec(seed=9))
        ids = [set(train.ids), set(validation.ids), set(unlabeled.ids)]
        self.assertEqual(set.union(*ids), set(dataset.ids))
        self.assertEqual(sum(map(len, ids)), len(dataset))
        for label, count in enumerate(dataset.class_counts()):
            self.assertLessEqual(abs(train.class_counts()[label] - 0.1 * count), 1)
            self.assertLessEqual(abs(validation.class_counts()[label] - 0.1 * count), 1)

    def test_deterministic_given_seed(self):
        dataset = balanced_dataset(per_class=20)
        self.assertEqual(split_stratified(dataset, SplitSpec(seed=4)), split_stratified(dataset, SplitSpec(seed=4)))

    def test_invalid_fractions(self):
        with self.assertRaises(CorpusError):
            SplitSpec(0.5, 0.5, 0.5)

    def test_too_small_class(self):
        docs = balanced_dataset(per_class=10).documents + (Document('rare', ('r',), ('r',), 2),)
        with self.assertRaises(CorpusError):
            split_stratified(Dataset(docs, 3), SplitSpec())

    def test_manifest_round_trip(self):
        dataset = balanced_dataset(per_class=20)
        train, validation, unlabeled = split_stratified(dataset, SplitSpec(seed=2))
        with tempfile.TemporaryDirectory() as tmp:
            path = export_split_manifest(
                {'train': train, 'validation': validation, 'unlabeled': unlabeled}, Path(tmp) / 'splits.csv',
            )
            self.assertTrue(path.read_text(encoding='utf-8').startswith('doc_id,split\n'))
            splits = load_split_manifest(dataset, path)
        self.assertEqual(splits['train'], train)
        self.assertIsInstance(splits['unlabeled'], UnlabeledDataset)
        self.assertEqual(splits['unlabeled'].ids, unlabeled.ids)


class SynthTests(SimpleTestCase):
    def test_noise_free_views_are_separable(self):
        """Test that a naive Bayes classifier on either single view fits noise-free data exactly"""
        dataset = synth_generate(2, 50, 40, 0.0, seed=0)
        for view in ('view1', 'view2'):
            model = train(as_examples(dataset), view, num_classes=2)
            self.assertEqual(accuracy(model, dataset), 1.0)

    def test_deterministic(self):
        self.assertEqual(synth_generate(3, 10, 20, 0.2, seed=11), synth_generate(3, 10, 20, 0.2, seed=11))

    def test_noise_out_of_range(self):
        with self.assertRaises(CorpusError):
            synth_generate(2, 10, 20, 0.9, seed=0)

    def test_class_balance_and_ids(self):
        dataset = synth_generate(4, 7, 10, 0.1, seed=1, id_prefix='s')
        self.assertEqual(dataset.class_counts(), [7, 7, 7, 7])
        self.assertEqual(dataset.ids[0], 's000000')

    def test_swap_views_makes_views_disagree(self):
        dataset = synth_generate(2, 20, 30, 0.0, seed=2)
        swapped = swap_views(dataset, 0.5, seed=3)
        changed = [a for a, b in zip(dataset, swapped) if a.view2 != b.view2]
        self.assertEqual(len(changed), 20)
        for original, corrupted in zip(dataset, swapped):
            self.assertEqual(original.view1, corrupted.view1)
            self.assertEqual(original.label, corrupted.label)
