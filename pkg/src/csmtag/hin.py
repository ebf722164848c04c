"""Entity-trigger co-occurrence graph and its adjacency matrices.

The graph is bipartite: nodes are distinct (case-folded span text, type)
pairs from the gold annotations, and an edge of weight ``w`` joins an entity
node and a trigger node that co-occur in ``w`` sentences.

Two matrices over (entity type x trigger type) are derived from it:

* ``direct``: type-aggregated co-occurrence counts.
* ``meta``: for every realized meta-path (an alternating sequence of node
  types), sum the reachability score over all node paths matching it, then
  add the log of that score into the cell of the path's endpoint types.
  Per-step reachability is edge weight times a uniform typed random-walk
  probability, so scores are not normalized and may exceed 1.  Type pairs
  not reached by any path are flagged ``unreached`` instead of carrying a
  fake number.
"""

import csv
import io
import math

import numpy as np

from .schema import ROLE_ENTITY


class HinError(ValueError):
    pass


class MetaPath:
    """Alternating type sequence; length counts edges, not nodes."""

    def __init__(self, types):
        types = tuple(types)
        if len(types) < 2:
            raise HinError("meta-path needs at least two types")
        self.types = types

    @property
    def length(self):
        return len(self.types) - 1

    def __eq__(self, other):
        return isinstance(other, MetaPath) and self.types == other.types

    def __hash__(self):
        return hash(self.types)

    def __repr__(self):
        return "-".join(self.types)


class Hin:
    """Weighted bipartite graph over (span text, type) nodes."""

    def __init__(self, entity_types, trigger_types):
        self.entity_types = tuple(entity_types)
        self.trigger_types = tuple(trigger_types)
        self.nodes = []            # (key, type), in first-seen order
        self._id = {}              # (key, type) -> node id
        self._by_key = {}          # key -> [node ids]
        self.edges = {}            # (entity id, trigger id) -> weight
        self._nbrs = {}            # node id -> {nbr id: weight}

    def _is_entity_type(self, ty):
        return ty in self.entity_types

    def add_node(self, key, ty):
        if not (self._is_entity_type(ty) or ty in self.trigger_types):
            raise HinError(f"unknown node type: {ty!r}")
        nid = self._id.get((key, ty))
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append((key, ty))
            self._id[(key, ty)] = nid
            self._by_key.setdefault(key, []).append(nid)
            self._nbrs[nid] = {}
        return nid

    def add_cooccurrence(self, entity_node, trigger_node, count=1):
        e_key, e_ty = self.nodes[entity_node]
        t_key, t_ty = self.nodes[trigger_node]
        if not self._is_entity_type(e_ty) or self._is_entity_type(t_ty):
            raise HinError("edges must join an entity node and a trigger node")
        pair = (entity_node, trigger_node)
        self.edges[pair] = self.edges.get(pair, 0) + count
        self._nbrs[entity_node][trigger_node] = self.edges[pair]
        self._nbrs[trigger_node][entity_node] = self.edges[pair]

    def resolve(self, node):
        """Node id from a (key, type) pair or a bare key (if unambiguous)."""
        if isinstance(node, int):
            if not 0 <= node < len(self.nodes):
                raise HinError(f"unknown node id: {node}")
            return node
        if isinstance(node, tuple):
            try:
                return self._id[node]
            except KeyError:
                raise HinError(f"unknown node key: {node!r}") from None
        ids = self._by_key.get(node, [])
        if not ids:
            raise HinError(f"unknown node key: {node!r}")
        if len(ids) > 1:
            raise HinError(f"ambiguous node key {node!r}; "
                           f"pass a (key, type) pair")
        return ids[0]

    def node_type(self, nid):
        return self.nodes[nid][1]

    def weight(self, a, b):
        a, b = self.resolve(a), self.resolve(b)
        return self._nbrs[a].get(b, 0)

    def neighbors(self, nid, ty=None):
        """Neighbor ids, optionally restricted to one type, insertion order."""
        nbrs = self._nbrs[nid]
        if ty is None:
            return list(nbrs)
        return [b for b in nbrs if self.nodes[b][1] == ty]

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_edges(self):
        return len(self.edges)


def build_hin(corpus):
    """Merge all gold spans of a corpus into the co-occurrence graph.

    Node keys are case-folded so surface variants of one mention share a
    node; an edge weight counts the sentences where both spans appear.
    """
    schema = corpus.schema
    hin = Hin(schema.entity_types, schema.trigger_types)
    for sent in corpus.sentences:
        ents = {(text.casefold(), ty) for text, ty in sent.entity_spans(schema)}
        trgs = {(text.casefold(), ty) for text, ty in sent.trigger_spans(schema)}
        eids = [hin.add_node(k, ty) for k, ty in sorted(ents)]
        tids = [hin.add_node(k, ty) for k, ty in sorted(trgs)]
        for e in eids:
            for t in tids:
                hin.add_cooccurrence(e, t)
    return hin


def direct_adjacency(hin, schema):
    """Type-level co-occurrence counts, shape |entity types| x |trigger types|."""
    m = np.zeros((len(schema.entity_types), len(schema.trigger_types)))
    for (e, t), w in hin.edges.items():
        e_ty, t_ty = hin.node_type(e), hin.node_type(t)
        if not schema.is_entity_type(e_ty) or not schema.is_trigger_type(t_ty):
            raise HinError(f"node type outside schema: {e_ty!r}/{t_ty!r}")
        m[schema.entity_type_index(e_ty), schema.trigger_type_index(t_ty)] += w
    return m


def walk_prob(hin, node, next_type):
    """Uniform step distribution over a node's neighbors of one type.

    Returns {(key, type): probability}; empty when the node has no neighbor
    of that type.
    """
    nid = hin.resolve(node)
    nbrs = hin.neighbors(nid, next_type)
    if not nbrs:
        return {}
    p = 1.0 / len(nbrs)
    return {hin.nodes[b]: p for b in nbrs}


def _expand(hin, frontier, next_type):
    """One DP step: push scores across edges into nodes of the next type.

    The per-edge factor is weight(a, b) / |typed neighbors of a|, i.e. the
    edge weight times the uniform typed-walk probability.
    """
    new = {}
    for a, score in frontier.items():
        nbrs = hin.neighbors(a, next_type)
        if not nbrs:
            continue
        inv = 1.0 / len(nbrs)
        for b in nbrs:
            new[b] = new.get(b, 0.0) + score * hin._nbrs[a][b] * inv
    return new


def path_score(hin, rho, u, v):
    """Reachability score from node u to node v along a meta-path.

    Sums, over every node path matching the type sequence, the product of
    per-step transition values.  Zero when no node path matches.
    """
    u, v = hin.resolve(u), hin.resolve(v)
    if hin.node_type(u) != rho.types[0]:
        raise HinError(f"start node type {hin.node_type(u)!r} != {rho.types[0]!r}")
    if hin.node_type(v) != rho.types[-1]:
        raise HinError(f"end node type {hin.node_type(v)!r} != {rho.types[-1]!r}")
    frontier = {u: 1.0}
    for next_type in rho.types[1:]:
        frontier = _expand(hin, frontier, next_type)
    return frontier.get(v, 0.0)


def enumerate_metapaths(hin, schema, length):
    """All meta-paths of odd length realized by at least one node path.

    Paths start at an entity type and end at a trigger type; the order is
    lexicographic by schema type indices.
    """
    if length < 1 or length % 2 == 0:
        raise HinError(f"meta-path length must be odd and >= 1, got {length}")
    for key, ty in hin.nodes:
        if not (schema.is_entity_type(ty) or schema.is_trigger_type(ty)):
            raise HinError(f"node type outside schema: {ty!r}")

    by_type = {}
    for nid, (key, ty) in enumerate(hin.nodes):
        by_type.setdefault(ty, set()).add(nid)

    out = []

    def extend(types, frontier):
        depth = len(types) - 1
        if depth == length:
            out.append(MetaPath(types))
            return
        side = schema.trigger_types if depth % 2 == 0 else schema.entity_types
        for ty in side:
            nxt = {b for a in frontier for b in hin.neighbors(a, ty)}
            if nxt:
                extend(types + [ty], nxt)

    for ety in schema.entity_types:
        start = by_type.get(ety, set())
        if start:
            extend([ety], start)
    return out


def _type_level_score(hin, rho):
    """Sum of path_score over all (start, end) node pairs of a meta-path."""
    frontier = {}
    for nid, (key, ty) in enumerate(hin.nodes):
        if ty == rho.types[0]:
            frontier[nid] = 1.0
    for next_type in rho.types[1:]:
        frontier = _expand(hin, frontier, next_type)
    return sum(frontier.values())


def metapath_adjacency(hin, schema, paths):
    """Log-score matrix over (entity type, trigger type) from a path set.

    Each path adds log(aggregated score) into its endpoint-type cell; cells
    no path reaches with positive score stay flagged unreached.
    """
    n_e, n_t = len(schema.entity_types), len(schema.trigger_types)
    meta = np.zeros((n_e, n_t))
    unreached = np.ones((n_e, n_t), dtype=bool)
    for rho in paths:
        if not schema.is_entity_type(rho.types[0]):
            raise HinError(f"meta-path must start at an entity type: {rho!r}")
        if not schema.is_trigger_type(rho.types[-1]):
            raise HinError(f"meta-path must end at a trigger type: {rho!r}")
        score = _type_level_score(hin, rho)
        if score <= 0.0:
            continue
        u = schema.entity_type_index(rho.types[0])
        v = schema.trigger_type_index(rho.types[-1])
        if unreached[u, v]:
            meta[u, v] = 0.0
            unreached[u, v] = False
        meta[u, v] += math.log(score)
    return meta, unreached


class MetaPathMatrix:
    """Direct and meta-path adjacency over (entity type x trigger type)."""

    def __init__(self, direct, meta, unreached, paths):
        self.direct = np.asarray(direct, dtype=float)
        self.meta = np.asarray(meta, dtype=float)
        self.unreached = np.asarray(unreached, dtype=bool)
        self.paths = list(paths)
        if not np.isfinite(self.direct).all() or not np.isfinite(self.meta).all():
            raise HinError("adjacency matrices must be finite")

    @classmethod
    def from_corpus(cls, corpus, length=3):
        hin = build_hin(corpus)
        return cls.from_hin(hin, corpus.schema, length)

    @classmethod
    def from_hin(cls, hin, schema, length=3):
        direct = direct_adjacency(hin, schema)
        paths = enumerate_metapaths(hin, schema, length)
        meta, unreached = metapath_adjacency(hin, schema, paths)
        return cls(direct, meta, unreached, paths)

    def meta_filled(self):
        """Meta matrix with unreached cells set below the finite minimum."""
        if self.unreached.all():
            return None
        fill = self.meta[~self.unreached].min() - 1.0
        out = self.meta.copy()
        out[self.unreached] = fill
        return out


UNREACHED = "unreached"


def matrix_to_csv(matrix, schema, unreached=None):
    """Type-labelled CSV: first row trigger types, first column entity types."""
    matrix = np.asarray(matrix)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + list(schema.trigger_types))
    for i, ety in enumerate(schema.entity_types):
        row = [ety]
        for j in range(len(schema.trigger_types)):
            if unreached is not None and unreached[i, j]:
                row.append(UNREACHED)
            else:
                row.append(repr(float(matrix[i, j])))
        w.writerow(row)
    return buf.getvalue()


def matrix_from_csv(text, schema):
    """Inverse of matrix_to_csv; returns (matrix, unreached mask)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][1:] != list(schema.trigger_types):
        raise HinError("matrix CSV header does not match schema trigger types")
    n_e, n_t = len(schema.entity_types), len(schema.trigger_types)
    matrix = np.zeros((n_e, n_t))
    unreached = np.zeros((n_e, n_t), dtype=bool)
    if len(rows) != n_e + 1:
        raise HinError("matrix CSV row count does not match schema entity types")
    for i, row in enumerate(rows[1:]):
        if row[0] != schema.entity_types[i] or len(row) != n_t + 1:
            raise HinError(f"bad matrix CSV row: {row!r}")
        for j, cell in enumerate(row[1:]):
            if cell == UNREACHED:
                unreached[i, j] = True
            else:
                matrix[i, j] = float(cell)
    return matrix, unreached


def edges_to_csv(hin):
    """Edge list CSV: entity_key,entity_type,trigger_key,trigger_type,weight."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["entity_key", "entity_type", "trigger_key", "trigger_type",
                "weight"])
    rows = []
    for (e, t), weight in hin.edges.items():
        (ek, ety), (tk, tty) = hin.nodes[e], hin.nodes[t]
        rows.append((ek, ety, tk, tty, weight))
    for row in sorted(rows):
        w.writerow(row)
    return buf.getvalue()
