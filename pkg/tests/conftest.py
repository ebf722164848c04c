import numpy as np
import pytest

from csmtag.corpus import parse_corpus
from csmtag.schema import TagSchema


@pytest.fixture
def schema2x2():
    return TagSchema(["PER", "GPE"], ["Movement", "Conflict"])


@pytest.fixture
def schema_synth():
    return TagSchema(["PER", "GPE", "ORG", "WEA", "FAC"],
                     ["Movement", "Conflict", "Transaction"])


def make_corpus(text, schema):
    return parse_corpus(text, schema)


@pytest.fixture
def two_sentence_corpus(schema2x2):
    # S1: PER + GPE entities with a Movement trigger; S2: GPE with Conflict.
    text = ("troops\tB-ENT:PER\n"
            "go\tB-TRG:Movement\n"
            "to\tO\n"
            "Iraq\tB-ENT:GPE\n"
            "\n"
            "violence\tB-TRG:Conflict\n"
            "in\tO\n"
            "Baghdad\tB-ENT:GPE\n"
            "\n")
    return make_corpus(text, schema2x2)


def rand_bipartite_hin(rng, schema, max_nodes=20, max_edges=60):
    """Random weighted bipartite graph over the schema's types."""
    from csmtag.hin import Hin

    n_e = int(rng.integers(1, max_nodes // 2 + 1))
    n_t = int(rng.integers(1, max_nodes - n_e + 1))
    hin = Hin(schema.entity_types, schema.trigger_types)
    eids = [hin.add_node(f"e{i}", schema.entity_types[rng.integers(len(schema.entity_types))])
            for i in range(n_e)]
    tids = [hin.add_node(f"t{i}", schema.trigger_types[rng.integers(len(schema.trigger_types))])
            for i in range(n_t)]
    n_edges = int(rng.integers(0, max_edges + 1))
    for _ in range(n_edges):
        e = eids[rng.integers(n_e)]
        t = tids[rng.integers(n_t)]
        hin.add_cooccurrence(e, t, int(rng.integers(1, 4)))
    return hin


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
