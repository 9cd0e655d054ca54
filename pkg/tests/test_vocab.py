"""Sort & Slice vocabulary and tokenisation tests.

The oracle is an independent brute-force frequency counter over sparse
fingerprints; the vocabulary builder must match it exactly, including
tie-breaks, slicing, and UNK assignment.
"""

import numpy as np
import pytest

from fingertrain.chem.parser import parse_smiles
from fingertrain.chem.writer import to_smiles
from fingertrain.errors import ConfigError, DataError
from fingertrain.fingerprints import FingerprintConfig, morgan_enumerate
from fingertrain.toydata import toy_smiles
from fingertrain.vocab import (
    build_vocabulary,
    load_vocabulary,
    require_matching_config,
    save_vocabulary,
    sort_slice_vector,
    tokenize,
)


def brute_force_vocab(graphs, r_max, k, use_chirality=True):
    """Plain dict-and-sort reference: molecule-set counts, stable ordering."""
    config = FingerprintConfig(radius=r_max, nbits=2048, use_chirality=use_chirality)
    counts = {}
    for g in graphs:
        for sid in {e.id for e in morgan_enumerate(g, config).entries}:
            counts[sid] = counts.get(sid, 0) + 1
    ordered = sorted(counts, key=lambda s: (-counts[s], s))
    ranks = {sid: rank for rank, sid in enumerate(ordered[:k], start=1)}
    unk = len(ranks) + 1
    return ranks, unk, counts


class TestBuildVocabulary:
    def test_three_methanes(self):
        graphs = [parse_smiles("C")] * 3
        vocab = build_vocabulary(graphs, r_max=0, k=8)
        assert len(vocab.entries) == 1
        assert vocab.entries[0].rank == 1
        assert vocab.entries[0].count == 3
        # UNK follows the last assigned rank (slice is a no-op here).
        assert vocab.unk_token == 2

    def test_slicing_to_k(self):
        graphs = [parse_smiles(s) for s in ("CC", "CCO", "CO")]
        vocab = build_vocabulary(graphs, r_max=0, k=1)
        assert len(vocab.entries) == 1
        assert vocab.entries[0].count == 3  # the carbon environment, present everywhere
        assert vocab.unk_token == 2
        oxygen_ids = {
            e.id
            for e in morgan_enumerate(parse_smiles("CO"), vocab.fingerprint_config()).entries
        } - set(vocab.rank_of)
        assert oxygen_ids  # sliced-out oxygen environments map to UNK

    def test_k_larger_than_unique(self):
        graphs = [parse_smiles("CCO")]
        vocab = build_vocabulary(graphs, r_max=0, k=100)
        unique = len(vocab.entries)
        assert 0 < unique < 100
        assert vocab.unk_token == unique + 1

    def test_empty_corpus(self):
        with pytest.raises(DataError):
            build_vocabulary([], r_max=0, k=4)
        with pytest.raises(ConfigError):
            build_vocabulary([parse_smiles("C")], r_max=0, k=0)

    def test_oracle_equivalence_toy_corpus(self):
        graphs = [parse_smiles(s) for _, s in toy_smiles()]
        for r_max, k in ((0, 8), (1, 64), (2, 200)):
            vocab = build_vocabulary(graphs, r_max=r_max, k=k)
            ranks, unk, counts = brute_force_vocab(graphs, r_max, k)
            assert vocab.rank_of == ranks
            assert vocab.unk_token == unk
            for e in vocab.entries:
                assert e.count == counts[e.id]

    def test_rank_monotonicity(self):
        graphs = [parse_smiles(s) for _, s in toy_smiles()]
        vocab = build_vocabulary(graphs, r_max=1, k=500)
        counts = [e.count for e in sorted(vocab.entries, key=lambda e: e.rank)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_tie_break_ascending_id(self):
        graphs = [parse_smiles(s) for _, s in toy_smiles()[:50]]
        vocab = build_vocabulary(graphs, r_max=1, k=300)
        by_rank = sorted(vocab.entries, key=lambda e: e.rank)
        for a, b in zip(by_rank, by_rank[1:]):
            if a.count == b.count:
                assert a.id < b.id


class TestTokenize:
    def test_methane_tokens(self):
        graphs = [parse_smiles("C")] * 3
        vocab = build_vocabulary(graphs, r_max=0, k=8)
        tg = tokenize(parse_smiles("C"), vocab)
        assert tg.tokens.shape == (1, 1)
        assert tg.tokens[0, 0] == 1

    def test_unknown_maps_to_unk(self):
        vocab = build_vocabulary([parse_smiles("C")], r_max=0, k=8)
        tg = tokenize(parse_smiles("O"), vocab)
        assert tg.tokens[0, 0] == vocab.unk_token

    def test_benzene_columns_uniform(self):
        graphs = [parse_smiles(s) for _, s in toy_smiles()[:40]]
        vocab = build_vocabulary(graphs, r_max=1, k=256)
        tg = tokenize(parse_smiles("c1ccccc1"), vocab)
        assert tg.tokens.shape == (6, 2)
        assert len(set(tg.tokens[:, 0].tolist())) == 1
        assert len(set(tg.tokens[:, 1].tolist())) == 1

    def test_pad_marks_removed_environments(self):
        vocab = build_vocabulary([parse_smiles("CC")], r_max=1, k=8)
        tg = tokenize(parse_smiles("CC"), vocab)
        # the two radius-1 environments cover the same atom pair; one cell stays padded
        col = tg.tokens[:, 1].tolist()
        assert sorted(col)[0] == 0 and sorted(col)[1] > 0

    def test_token_range(self):
        graphs = [parse_smiles(s) for _, s in toy_smiles()[:60]]
        vocab = build_vocabulary(graphs, r_max=2, k=64)
        for g in graphs[:20]:
            tg = tokenize(g, vocab)
            assert tg.tokens.min() >= 0
            assert tg.tokens.max() <= vocab.unk_token

    def test_determinism_across_atom_orderings(self, rng):
        graphs = [parse_smiles(s) for _, s in toy_smiles()[:60]]
        vocab = build_vocabulary(graphs, r_max=1, k=128)
        g = parse_smiles("CC(=O)Nc1ccc(O)cc1")
        base = tokenize(g, vocab)
        base_multiset = sorted(map(tuple, base.tokens.tolist()))
        for _ in range(10):
            g2 = parse_smiles(to_smiles(g, rng=rng))
            again = tokenize(g2, vocab)
            assert sorted(map(tuple, again.tokens.tolist())) == base_multiset


class TestSortSliceVector:
    def test_methane_vector(self):
        vocab = build_vocabulary([parse_smiles("C")] * 3, r_max=0, k=1)
        vec = sort_slice_vector(parse_smiles("C"), vocab)
        assert vec.tolist() == [1.0]

    def test_out_of_vocab_all_zero(self):
        vocab = build_vocabulary([parse_smiles("C")], r_max=0, k=4)
        vec = sort_slice_vector(parse_smiles("O"), vocab)
        assert vec.sum() == 0.0

    def test_disjoint_molecules_orthogonal(self):
        graphs = [parse_smiles("CCCC"), parse_smiles("OO")]
        vocab = build_vocabulary(graphs, r_max=1, k=32)
        va = sort_slice_vector(graphs[0], vocab)
        vb = sort_slice_vector(graphs[1], vocab)
        assert float(va @ vb) == 0.0

    def test_collision_free(self):
        graphs = [parse_smiles(s) for _, s in toy_smiles()[:80]]
        vocab = build_vocabulary(graphs, r_max=1, k=128)
        positions = [e.rank - 1 for e in vocab.entries]
        assert len(set(positions)) == len(positions)
        assert max(positions) < vocab.k


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        graphs = [parse_smiles(s) for _, s in toy_smiles()[:30]]
        vocab = build_vocabulary(graphs, r_max=1, k=64, corpus_hash="abc123")
        path = tmp_path / "vocab.json"
        save_vocabulary(vocab, path)
        loaded = load_vocabulary(path)
        assert loaded.rank_of == vocab.rank_of
        assert loaded.unk_token == vocab.unk_token
        assert loaded.corpus_fingerprint == "abc123"
        assert [e.__dict__ for e in loaded.entries] == [e.__dict__ for e in vocab.entries]

    def test_config_mismatch_refused(self):
        vocab = build_vocabulary([parse_smiles("C")], r_max=0, k=4)
        require_matching_config(vocab, "ecfp", 0, True)
        with pytest.raises(ConfigError):
            require_matching_config(vocab, "ecfp", 2, True)
        with pytest.raises(ConfigError):
            require_matching_config(vocab, "fcfp", 0, True)
