import math

import numpy as np
import pytest

from conftest import make_corpus, rand_bipartite_hin
from csmtag.hin import (Hin, HinError, MetaPath, MetaPathMatrix, build_hin,
                        direct_adjacency, edges_to_csv, enumerate_metapaths,
                        matrix_from_csv, matrix_to_csv, metapath_adjacency,
                        path_score, walk_prob)
from csmtag.schema import TagSchema
from oracle_hin import brute_force_matrix, enumerate_node_paths, node_path_product


@pytest.fixture
def schema_fig():
    return TagSchema(["PER", "GPE", "WEA"], ["Movement", "Conflict"])


@pytest.fixture
def fig_corpus(schema_fig):
    # troops/people go to Iraq/the country; violence in Iraq involving a gun
    text = ("U.S.\tB-ENT:PER\n"
            "troops\tI-ENT:PER\n"
            "go\tB-TRG:Movement\n"
            "to\tO\n"
            "Iraq\tB-ENT:GPE\n"
            "\n"
            "most\tB-ENT:PER\n"
            "people\tI-ENT:PER\n"
            "go\tB-TRG:Movement\n"
            "to\tO\n"
            "the\tB-ENT:GPE\n"
            "country\tI-ENT:GPE\n"
            "\n"
            "violence\tB-TRG:Conflict\n"
            "in\tO\n"
            "Iraq\tB-ENT:GPE\n"
            "with\tO\n"
            "a\tO\n"
            "gun\tB-ENT:WEA\n"
            "\n")
    return make_corpus(text, schema_fig)


class TestBuildHin:
    def test_single_sentence_structure(self, schema2x2):
        text = ("U.S.\tB-ENT:PER\ntroops\tI-ENT:PER\ngo\tB-TRG:Movement\n"
                "to\tO\nIraq\tB-ENT:GPE\n\n")
        hin = build_hin(make_corpus(text, schema2x2))
        assert hin.n_nodes == 3
        assert hin.n_edges == 2
        assert hin.weight(("u.s. troops", "PER"), ("go", "Movement")) == 1
        assert hin.weight(("iraq", "GPE"), ("go", "Movement")) == 1

    def test_repeat_cooccurrence_weight(self, schema2x2):
        text = ("troops\tB-ENT:PER\ngo\tB-TRG:Movement\n\n") * 2
        hin = build_hin(make_corpus(text, schema2x2))
        assert hin.n_edges == 1
        assert hin.weight("troops", "go") == 2

    def test_entities_without_triggers(self, schema2x2):
        hin = build_hin(make_corpus("Iraq\tB-ENT:GPE\n\n", schema2x2))
        assert hin.n_nodes == 1
        assert hin.n_edges == 0

    def test_case_folding_merges(self, schema2x2):
        text = ("Troops\tB-ENT:PER\ngo\tB-TRG:Movement\n\n"
                "troops\tB-ENT:PER\ngo\tB-TRG:Movement\n\n")
        hin = build_hin(make_corpus(text, schema2x2))
        assert hin.n_nodes == 2
        assert hin.weight("troops", "go") == 2

    def test_bipartite_enforced(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        a = hin.add_node("a", "PER")
        b = hin.add_node("b", "GPE")
        with pytest.raises(HinError):
            hin.add_cooccurrence(a, b)

    def test_same_key_two_types(self, schema2x2):
        text = ("fight\tB-ENT:PER\nfight\tB-TRG:Conflict\n\n")
        hin = build_hin(make_corpus(text, schema2x2))
        assert hin.n_nodes == 2
        with pytest.raises(HinError, match="ambiguous"):
            hin.resolve("fight")
        assert hin.weight(("fight", "PER"), ("fight", "Conflict")) == 1


class TestDirectAdjacency:
    def test_fixture_counts(self, schema2x2, two_sentence_corpus):
        m = direct_adjacency(build_hin(two_sentence_corpus), schema2x2)
        assert m.tolist() == [[1.0, 0.0], [1.0, 1.0]]

    def test_empty(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        assert direct_adjacency(hin, schema2x2).sum() == 0

    def test_doubling_corpus_doubles_counts(self, schema2x2, two_sentence_corpus):
        from csmtag.corpus import Corpus
        m1 = direct_adjacency(build_hin(two_sentence_corpus), schema2x2)
        doubled = Corpus(schema2x2, two_sentence_corpus.sentences * 2)
        m2 = direct_adjacency(build_hin(doubled), schema2x2)
        assert np.array_equal(m2, 2 * m1)

    def test_sentence_permutation_invariant(self, schema_synth):
        from csmtag.corpus import Corpus, generate_synthetic
        corpus = generate_synthetic(schema_synth, 60, seed=5)
        m1 = direct_adjacency(build_hin(corpus), schema_synth)
        flipped = Corpus(schema_synth, corpus.sentences[::-1])
        m2 = direct_adjacency(build_hin(flipped), schema_synth)
        assert np.array_equal(m1, m2)


class TestWalkProb:
    def test_two_neighbors(self, fig_corpus, schema_fig):
        hin = build_hin(fig_corpus)
        probs = walk_prob(hin, "go", "GPE")
        assert probs == {("iraq", "GPE"): 0.5, ("the country", "GPE"): 0.5}

    def test_single_neighbor(self, fig_corpus):
        hin = build_hin(fig_corpus)
        probs = walk_prob(hin, "gun", "Conflict")
        assert probs == {("violence", "Conflict"): 1.0}

    def test_no_neighbor(self, fig_corpus):
        hin = build_hin(fig_corpus)
        assert walk_prob(hin, "gun", "Movement") == {}

    def test_unknown_node(self, fig_corpus):
        with pytest.raises(HinError, match="unknown node"):
            walk_prob(build_hin(fig_corpus), "nope", "GPE")

    def test_sums_to_one(self, rng, schema_synth):
        for trial in range(20):
            hin = rand_bipartite_hin(rng, schema_synth)
            for nid in range(hin.n_nodes):
                for ty in schema_synth.entity_types + schema_synth.trigger_types:
                    probs = walk_prob(hin, nid, ty)
                    if probs:
                        assert math.isclose(sum(probs.values()), 1.0)


class TestPathScore:
    def test_weighted_two_step(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        e1 = hin.add_node("e1", "PER")
        t1 = hin.add_node("t1", "Movement")
        e2 = hin.add_node("e2", "GPE")
        hin.add_cooccurrence(e1, t1, 2)
        hin.add_cooccurrence(e2, t1, 1)
        rho = MetaPath(["PER", "Movement", "GPE"])
        assert path_score(hin, rho, "e1", "e2") == pytest.approx(2.0)

    def test_no_matching_path(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        e1 = hin.add_node("e1", "PER")
        t1 = hin.add_node("t1", "Movement")
        e2 = hin.add_node("e2", "GPE")
        hin.add_cooccurrence(e1, t1, 1)
        rho = MetaPath(["PER", "Movement", "GPE"])
        assert path_score(hin, rho, "e1", "e2") == 0.0

    def test_length_one_degree_normalization(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        e = hin.add_node("e", "PER")
        w = 5
        d = 3
        tids = [hin.add_node(f"t{i}", "Movement") for i in range(d)]
        hin.add_cooccurrence(e, tids[0], w)
        for t in tids[1:]:
            hin.add_cooccurrence(e, t, 1)
        rho = MetaPath(["PER", "Movement"])
        assert path_score(hin, rho, "e", "t0") == pytest.approx(w / d)

    def test_endpoint_type_mismatch(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        hin.add_node("e", "PER")
        hin.add_node("t", "Movement")
        with pytest.raises(HinError, match="type"):
            path_score(hin, MetaPath(["GPE", "Movement"]), "e", "t")

    def test_matches_literal_enumeration(self, rng, schema_synth):
        rho_types = ["PER", "Movement", "GPE", "Conflict"]
        for trial in range(10):
            hin = rand_bipartite_hin(rng, schema_synth, max_nodes=12, max_edges=30)
            paths = enumerate_node_paths(hin, rho_types)
            by_pair = {}
            for p in paths:
                key = (p[0], p[-1])
                by_pair[key] = by_pair.get(key, 0.0) + node_path_product(hin, p)
            for (u, v), expected in by_pair.items():
                got = path_score(hin, MetaPath(rho_types), u, v)
                assert got == pytest.approx(expected, abs=1e-12)


class TestEnumerate:
    def test_reverse_of_reported_chain_realized(self, fig_corpus, schema_fig):
        hin = build_hin(fig_corpus)
        paths = enumerate_metapaths(hin, schema_fig, 3)
        assert MetaPath(["WEA", "Conflict", "GPE", "Movement"]) in paths

    def test_single_edge(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        e = hin.add_node("e", "PER")
        t = hin.add_node("t", "Movement")
        hin.add_cooccurrence(e, t)
        assert enumerate_metapaths(hin, schema2x2, 1) == [MetaPath(["PER", "Movement"])]

    def test_no_edges(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        hin.add_node("e", "PER")
        for length in (1, 3, 5):
            assert enumerate_metapaths(hin, schema2x2, length) == []

    def test_even_length_rejected(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        with pytest.raises(HinError):
            enumerate_metapaths(hin, schema2x2, 2)

    def test_lexicographic_order(self, rng, schema_synth):
        index = {ty: i for i, ty in
                 enumerate(schema_synth.entity_types + schema_synth.trigger_types)}
        for trial in range(5):
            hin = rand_bipartite_hin(rng, schema_synth)
            paths = enumerate_metapaths(hin, schema_synth, 3)
            keys = [tuple(index[t] for t in p.types) for p in paths]
            assert keys == sorted(keys)
            assert len(set(keys)) == len(keys)

    def test_only_realized(self, rng, schema_synth):
        for trial in range(5):
            hin = rand_bipartite_hin(rng, schema_synth, max_nodes=10, max_edges=15)
            paths = enumerate_metapaths(hin, schema_synth, 3)
            for rho in paths:
                assert enumerate_node_paths(hin, list(rho.types))


class TestMetapathAdjacency:
    def test_score_one_gives_zero_cell(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        e = hin.add_node("e", "PER")
        t = hin.add_node("t", "Movement")
        hin.add_cooccurrence(e, t, 1)
        meta, unreached = metapath_adjacency(
            hin, schema2x2, [MetaPath(["PER", "Movement"])])
        assert meta[0, 0] == 0.0
        assert not unreached[0, 0]
        assert unreached[0, 1] and unreached[1, 0] and unreached[1, 1]

    def test_two_paths_same_cell_logs_add(self, schema2x2):
        # PER-Movement-GPE-Movement aggregates 0.5 (one of two Movement
        # branches dead-ends), PER-Conflict-GPE-Movement aggregates 0.25.
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        p = hin.add_node("p", "PER")
        g = hin.add_node("g", "GPE")
        m1 = hin.add_node("m1", "Movement")
        m2 = hin.add_node("m2", "Movement")
        cs = [hin.add_node(f"c{i}", "Conflict") for i in range(4)]
        hin.add_cooccurrence(p, m1)
        hin.add_cooccurrence(p, m2)
        hin.add_cooccurrence(g, m1)
        for c in cs:
            hin.add_cooccurrence(p, c)
        hin.add_cooccurrence(g, cs[0])
        rho1 = MetaPath(["PER", "Movement", "GPE", "Movement"])
        rho2 = MetaPath(["PER", "Conflict", "GPE", "Movement"])
        meta, unreached = metapath_adjacency(hin, schema2x2, [rho1, rho2])
        assert meta[0, 0] == pytest.approx(math.log(0.5) + math.log(0.25))
        assert not unreached[0, 0]

    def test_matches_brute_force(self, rng, schema_synth):
        for trial in range(12):
            hin = rand_bipartite_hin(rng, schema_synth, max_nodes=12, max_edges=30)
            for length in (1, 3):
                paths = enumerate_metapaths(hin, schema_synth, length)
                meta, unreached = metapath_adjacency(hin, schema_synth, paths)
                ref, ref_unreached, realized = brute_force_matrix(
                    hin, schema_synth, length)
                assert np.array_equal(unreached, ref_unreached)
                assert sorted(tuple(p.types) for p in paths) == sorted(realized)
                assert np.max(np.abs(np.where(unreached, 0.0, meta - ref))) <= 1e-9

    def test_endpoint_validation(self, schema2x2):
        hin = Hin(schema2x2.entity_types, schema2x2.trigger_types)
        with pytest.raises(HinError):
            metapath_adjacency(hin, schema2x2, [MetaPath(["Movement", "PER"])])


class TestMatrixContainer:
    def test_from_corpus(self, two_sentence_corpus, schema2x2):
        mpm = MetaPathMatrix.from_corpus(two_sentence_corpus, length=3)
        assert mpm.direct.shape == (2, 2)
        assert mpm.meta.shape == (2, 2)
        assert all(p.length == 3 for p in mpm.paths)

    def test_meta_filled_below_min(self, two_sentence_corpus):
        mpm = MetaPathMatrix.from_corpus(two_sentence_corpus, length=3)
        filled = mpm.meta_filled()
        if mpm.unreached.any():
            finite_min = mpm.meta[~mpm.unreached].min()
            assert filled[mpm.unreached].max() == finite_min - 1.0

    def test_csv_round_trip(self, two_sentence_corpus, schema2x2):
        mpm = MetaPathMatrix.from_corpus(two_sentence_corpus, length=3)
        text = matrix_to_csv(mpm.meta, schema2x2, mpm.unreached)
        back, unreached = matrix_from_csv(text, schema2x2)
        assert np.array_equal(unreached, mpm.unreached)
        assert np.array_equal(back[~unreached], mpm.meta[~unreached])
        assert "unreached" in text or not mpm.unreached.any()

    def test_edge_csv(self, two_sentence_corpus):
        hin = build_hin(two_sentence_corpus)
        text = edges_to_csv(hin)
        lines = text.strip().split("\n")
        assert lines[0] == "entity_key,entity_type,trigger_key,trigger_type,weight"
        assert len(lines) == 1 + hin.n_edges
        assert "iraq,GPE,go,Movement,1" in lines


def test_removing_path_subset_never_increases(rng, schema_synth):
    # reachability scores are sums of non-negative per-path products, so
    # any subset of node paths contributes at most the total
    rho_types = ["PER", "Movement", "GPE", "Conflict"]
    for trial in range(5):
        hin = rand_bipartite_hin(rng, schema_synth, max_nodes=12, max_edges=30)
        paths = enumerate_node_paths(hin, rho_types)
        if not paths:
            continue
        total = sum(node_path_product(hin, p) for p in paths)
        for drop in range(len(paths)):
            kept = sum(node_path_product(hin, p)
                       for i, p in enumerate(paths) if i != drop)
            assert kept <= total + 1e-12
