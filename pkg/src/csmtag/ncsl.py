"""Cross-supervision layer: type distributions, conversions, and the dual
KL penalty.

Predicted tag probabilities are pooled into an entity-type and a
trigger-type distribution; each is converted into a distribution over the
other side through the co-occurrence matrices and compared (KL) against the
gold distributions.  Everything is differentiable with respect to the
predicted tag probabilities, so the penalty can back-propagate into the
tagger.

Conversion conventions (the matrices have shape |entity| x |trigger|):

* direct matrix: counts are non-negative, so converted vectors are
  L1-normalized after an epsilon floor.
* meta-path matrix: entries are log-score sums and may be negative, so
  converted scores go through a softmax; ``unreached`` cells are filled
  with (finite minimum - 1), keeping them strictly least.
"""

import numpy as np

from .schema import ROLE_ENTITY, ROLE_TRIGGER

EPS = 1e-8        # strict positivity floor for distributions
DEGENERATE = 1e-12  # below this total mass, fall back to uniform


class NcslError(ValueError):
    pass


class TypeDistribution:
    """Probability vector over entity types or over trigger types."""

    def __init__(self, over, values, flagged=False):
        if over not in (ROLE_ENTITY, ROLE_TRIGGER):
            raise NcslError(f"bad side: {over!r}")
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise NcslError("distribution must be a non-empty vector")
        if (values < 0).any() or abs(values.sum() - 1.0) > 1e-6:
            raise NcslError("distribution must be non-negative and sum to 1")
        self.over = over
        self.values = values
        self.flagged = flagged

    def __len__(self):
        return self.values.size

    def __repr__(self):
        flag = ", flagged" if self.flagged else ""
        return f"TypeDistribution({self.over}, {self.values.round(4)}{flag})"


def _uniform(over, n):
    return TypeDistribution(over, np.full(n, 1.0 / n), flagged=True)


def _floor(v):
    """Strictly positive renormalization, differentiable (additive floor)."""
    return (v + EPS) / (1.0 + v.size * EPS)


def _floor_normalize(over, raw):
    raw = np.asarray(raw, dtype=float)
    total = raw.sum()
    if total < DEGENERATE:
        return _uniform(over, raw.size)
    return TypeDistribution(over, _floor(raw / total))


def _mass_selectors(schema):
    """0/1 matrices pooling tag probabilities into per-type mass.

    sel_e: (n_tags, |entity types|); sel_t: (n_tags, |trigger types|).
    The outside tag selects nothing on either side.
    """
    sel_e = np.zeros((schema.n_tags, len(schema.entity_types)))
    sel_t = np.zeros((schema.n_tags, len(schema.trigger_types)))
    for k, ty in enumerate(schema.entity_types):
        b, i = schema.entity_tag_ids(ty)
        sel_e[b, k] = sel_e[i, k] = 1.0
    for k, ty in enumerate(schema.trigger_types):
        b, i = schema.trigger_tag_ids(ty)
        sel_t[b, k] = sel_t[i, k] = 1.0
    return sel_e, sel_t


def aggregate_predicted(probs_list, schema):
    """Pool predicted token probabilities into the two type distributions.

    Entity mass of a type is the total predicted probability on its B and I
    tags over every token of the batch; outside mass is discarded.  A side
    with (near) zero total mass comes back uniform and flagged.
    """
    fe, ft, _cache = aggregate_predicted_with_cache(probs_list, schema)
    return fe, ft


def aggregate_predicted_with_cache(probs_list, schema):
    if not probs_list:
        raise NcslError("empty batch")
    mass = np.zeros(schema.n_tags)
    for probs in probs_list:
        mass += probs.sum(axis=0)
    sel_e, sel_t = _mass_selectors(schema)
    raw_e = mass @ sel_e
    raw_t = mass @ sel_t
    fe = _floor_normalize(ROLE_ENTITY, raw_e)
    ft = _floor_normalize(ROLE_TRIGGER, raw_t)
    cache = {"raw_e": raw_e, "raw_t": raw_t, "sel_e": sel_e, "sel_t": sel_t,
             "flag_e": fe.flagged, "flag_t": ft.flagged}
    return fe, ft, cache


def _floor_normalize_backward(dout, raw, flagged):
    """Gradient of _floor_normalize w.r.t. its raw mass vector."""
    if flagged:
        return np.zeros_like(raw)
    total = raw.sum()
    dv = dout / (1.0 + raw.size * EPS)
    return dv / total - (dv @ raw) / total ** 2


def aggregate_predicted_backward(dfe, dft, cache):
    """Per-tag gradient vector: d(loss)/d(probs[t, tag]) for every token.

    Pooling sums identically over tokens, so one vector over tags serves the
    whole batch.
    """
    draw_e = _floor_normalize_backward(dfe, cache["raw_e"], cache["flag_e"])
    draw_t = _floor_normalize_backward(dft, cache["raw_t"], cache["flag_t"])
    return cache["sel_e"] @ draw_e + cache["sel_t"] @ draw_t


def _span_type_counts(tags, schema):
    """Span counts per type from a gold tag id sequence (B starts a span)."""
    e_counts = np.zeros(len(schema.entity_types))
    t_counts = np.zeros(len(schema.trigger_types))
    for tag in tags:
        if schema.is_begin(tag):
            if schema.role(tag) == ROLE_ENTITY:
                e_counts[schema.entity_type_index(schema.type_name(tag))] += 1
            else:
                t_counts[schema.trigger_type_index(schema.type_name(tag))] += 1
    return e_counts, t_counts


def aggregate_gold(tags_list, schema):
    """Empirical span-type distributions of the gold annotations."""
    if not tags_list:
        raise NcslError("empty batch")
    e_counts = np.zeros(len(schema.entity_types))
    t_counts = np.zeros(len(schema.trigger_types))
    for tags in tags_list:
        e, t = _span_type_counts(tags, schema)
        e_counts += e
        t_counts += t
    return (_floor_normalize(ROLE_ENTITY, e_counts),
            _floor_normalize(ROLE_TRIGGER, t_counts))


def _other_side(over):
    return ROLE_TRIGGER if over == ROLE_ENTITY else ROLE_ENTITY


def convert_direct(dist, m):
    """Push a distribution through the count matrix to the other side."""
    m = np.asarray(m, dtype=float)
    if (m < 0).any():
        raise NcslError("direct matrix must be non-negative")
    mat = m if dist.over == ROLE_ENTITY else m.T
    if len(dist) != mat.shape[0]:
        raise NcslError("distribution length does not match matrix")
    return _floor_normalize(_other_side(dist.over), dist.values @ mat)


def convert_metapath(dist, meta, unreached=None):
    """Push a distribution through the log-score matrix (softmax output)."""
    meta = np.asarray(meta, dtype=float)
    if unreached is not None and unreached.all():
        n = meta.shape[1] if dist.over == ROLE_ENTITY else meta.shape[0]
        return _uniform(_other_side(dist.over), n)
    filled = _fill_unreached(meta, unreached)
    mat = filled if dist.over == ROLE_ENTITY else filled.T
    if len(dist) != mat.shape[0]:
        raise NcslError("distribution length does not match matrix")
    return TypeDistribution(_other_side(dist.over),
                            _softmax(dist.values @ mat))


def _fill_unreached(meta, unreached):
    if unreached is None or not unreached.any():
        return meta
    out = meta.copy()
    out[unreached] = meta[~unreached].min() - 1.0
    return out


def _softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def kl(p, q):
    """KL divergence between two distributions on the same side."""
    if isinstance(p, TypeDistribution) or isinstance(q, TypeDistribution):
        if p.over != q.over:
            raise NcslError(f"KL sides differ: {p.over} vs {q.over}")
        p, q = p.values, q.values
    p, q = np.asarray(p, float), np.asarray(q, float)
    if p.shape != q.shape:
        raise NcslError("KL operands differ in length")
    return float(np.sum(p * np.log(p / q)))


def hin_loss(fhat_e, fhat_t, f_e, f_t, matrix, mode):
    """KL(gold triggers || converted predicted entities) plus the mirrored
    entity term; ``mode`` picks the direct or the meta-path conversion."""
    loss, _dfe, _dft = hin_loss_and_grad(fhat_e, fhat_t, f_e, f_t, matrix, mode)
    return loss


def hin_loss_and_grad(fhat_e, fhat_t, f_e, f_t, matrix, mode):
    """hin_loss plus its gradients w.r.t. the predicted distributions."""
    if mode == "direct":
        t_from_e, de = _convert_direct_grad(fhat_e, matrix.direct, f_t)
        e_from_t, dt = _convert_direct_grad(fhat_t, matrix.direct, f_e)
    elif mode == "metapath":
        filled = matrix.meta_filled()
        t_from_e, de = _convert_metapath_grad(fhat_e, filled, f_t,
                                              matrix.meta.shape)
        e_from_t, dt = _convert_metapath_grad(fhat_t, filled, f_e,
                                              matrix.meta.shape)
    else:
        raise NcslError(f"bad conversion mode: {mode!r}")
    loss = kl(f_t, t_from_e) + kl(f_e, e_from_t)
    return loss, de, dt


def _convert_direct_grad(dist, m, gold):
    """(converted distribution, d kl(gold, converted) / d dist.values)."""
    m = np.asarray(m, dtype=float)
    mat = m if dist.over == ROLE_ENTITY else m.T
    raw = dist.values @ mat
    out = _floor_normalize(_other_side(dist.over), raw)
    if out.flagged:
        return out, np.zeros(len(dist))
    dq = -gold.values / out.values
    draw = _floor_normalize_backward(dq, raw, False)
    return out, mat @ draw


def _convert_metapath_grad(dist, filled, gold, shape):
    if filled is None:  # every cell unreached
        n = shape[1] if dist.over == ROLE_ENTITY else shape[0]
        return _uniform(_other_side(dist.over), n), np.zeros(len(dist))
    mat = filled if dist.over == ROLE_ENTITY else filled.T
    q = _softmax(dist.values @ mat)
    out = TypeDistribution(_other_side(dist.over), q)
    return out, mat @ (q - gold.values)


def combined_loss(l_seq, l_hin, alpha):
    """Convex mix of the labeling loss and the cross-supervision loss."""
    if not 0.0 <= alpha <= 1.0:
        raise NcslError(f"alpha must be in [0, 1], got {alpha}")
    return (1.0 - alpha) * l_seq + alpha * l_hin
