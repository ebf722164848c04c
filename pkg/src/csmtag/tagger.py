"""BiLSTM sequence tagger: parameters, forward/backward, Adam, decoding,
and checkpoint serialization.

The per-token flow is embedding -> bidirectional LSTM stack -> linear
projection -> softmax over the combined tag set.  Backward produces
gradients of the combined training objective: the per-token cross-entropy
mixed with the cross-supervision penalty, whose gradient enters through the
predicted tag probabilities (see :mod:`csmtag.ncsl`).

Only the time-step recurrence runs in the kernel backend; all batched
matrix products stay in numpy.  Sentences are processed independently (no
padding) and accumulated in batch order, so results are deterministic for
a fixed seed.
"""

import json
import struct

import numpy as np

from . import ncsl
from .kernels import lstm_seq_backward, lstm_seq_forward

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_MAGIC = b"CSM1"


class TaggerError(ValueError):
    pass


class NumericsError(RuntimeError):
    """A non-finite value surfaced during training."""


def param_names(n_layers):
    names = ["embedding"]
    for layer in range(n_layers):
        for d in ("fw", "bw"):
            names += [f"lstm{layer}_{d}_wx", f"lstm{layer}_{d}_wh",
                      f"lstm{layer}_{d}_b"]
    names += ["proj_w", "proj_b"]
    return names


def _expected_shapes(vocab_size, n_tags, d_emb, d_hid, n_layers):
    shapes = {"embedding": (vocab_size, d_emb)}
    for layer in range(n_layers):
        d_in = d_emb if layer == 0 else 2 * d_hid
        for d in ("fw", "bw"):
            shapes[f"lstm{layer}_{d}_wx"] = (d_in, 4 * d_hid)
            shapes[f"lstm{layer}_{d}_wh"] = (d_hid, 4 * d_hid)
            shapes[f"lstm{layer}_{d}_b"] = (4 * d_hid,)
    shapes["proj_w"] = (2 * d_hid, n_tags)
    shapes["proj_b"] = (n_tags,)
    return shapes


class TaggerParams:
    """Named parameter arrays with mutually consistent shapes."""

    def __init__(self, vocab_size, n_tags, d_emb, d_hid, n_layers, arrays):
        self.vocab_size = vocab_size
        self.n_tags = n_tags
        self.d_emb = d_emb
        self.d_hid = d_hid
        self.n_layers = n_layers
        expected = _expected_shapes(vocab_size, n_tags, d_emb, d_hid, n_layers)
        if set(arrays) != set(expected):
            raise TaggerError("parameter arrays do not match the layout")
        for name, shape in expected.items():
            if arrays[name].shape != shape:
                raise TaggerError(f"{name}: expected shape {shape}, "
                                  f"got {arrays[name].shape}")
            if not np.isfinite(arrays[name]).all():
                raise NumericsError(f"parameter array {name} is not finite")
        self.arrays = {n: np.asarray(arrays[n], dtype=float) for n in arrays}

    def names(self):
        return param_names(self.n_layers)

    def __getitem__(self, name):
        return self.arrays[name]

    def copy(self):
        return TaggerParams(self.vocab_size, self.n_tags, self.d_emb,
                            self.d_hid, self.n_layers,
                            {n: a.copy() for n, a in self.arrays.items()})

    def zeros_like(self):
        return {n: np.zeros_like(a) for n, a in self.arrays.items()}


def init_params(vocab_size, n_tags, cfg, seed):
    """Uniform +-1/sqrt(fan_in) initialization, fully seeded."""
    rng = np.random.default_rng([seed, 0])
    d_emb, d_hid, n_layers = cfg.d_emb, cfg.d_hid, cfg.n_layers
    fan_in = {"embedding": d_emb, "proj_w": 2 * d_hid, "proj_b": 2 * d_hid}
    for layer in range(n_layers):
        d_in = d_emb if layer == 0 else 2 * d_hid
        for d in ("fw", "bw"):
            fan_in[f"lstm{layer}_{d}_wx"] = d_in
            fan_in[f"lstm{layer}_{d}_wh"] = d_hid
            fan_in[f"lstm{layer}_{d}_b"] = d_hid
    shapes = _expected_shapes(vocab_size, n_tags, d_emb, d_hid, n_layers)
    arrays = {}
    for name in param_names(n_layers):
        bound = 1.0 / np.sqrt(fan_in[name])
        arrays[name] = rng.uniform(-bound, bound, shapes[name])
    return TaggerParams(vocab_size, n_tags, d_emb, d_hid, n_layers, arrays)


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _run_direction(params, layer, d, x, reverse):
    wx = params[f"lstm{layer}_{d}_wx"]
    wh = params[f"lstm{layer}_{d}_wh"]
    b = params[f"lstm{layer}_{d}_b"]
    x_proc = x[::-1] if reverse else x
    zx = np.ascontiguousarray(x_proc @ wx + b)
    h, gates, c = lstm_seq_forward(zx, np.ascontiguousarray(wh))
    return {"x_proc": x_proc, "h_proc": h, "gates": gates, "c": c,
            "h_time": h[::-1] if reverse else h}


def _forward_cached(params, tokens, train, dropout, rng):
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1 or tokens.size == 0:
        raise TaggerError("sentence must be a non-empty index vector")
    if tokens.min() < 0 or tokens.max() >= params.vocab_size:
        raise TaggerError(f"token index out of range for vocab of "
                          f"{params.vocab_size}")
    drop = train and dropout > 0.0
    if drop and rng is None:
        raise TaggerError("train-mode dropout needs an rng")

    x = params["embedding"][tokens]
    emb_mask = None
    if drop:
        emb_mask = (rng.random(x.shape) >= dropout) / (1.0 - dropout)
        x = x * emb_mask

    layers = []
    for layer in range(params.n_layers):
        fw = _run_direction(params, layer, "fw", x, reverse=False)
        bw = _run_direction(params, layer, "bw", x, reverse=True)
        h_cat = np.concatenate([fw["h_time"], bw["h_time"]], axis=1)
        inter_mask = None
        if drop and layer < params.n_layers - 1:
            inter_mask = (rng.random(h_cat.shape) >= dropout) / (1.0 - dropout)
            h_cat = h_cat * inter_mask
        layers.append({"fw": fw, "bw": bw, "mask": inter_mask})
        x = h_cat

    logits = x @ params["proj_w"] + params["proj_b"]
    probs = _softmax_rows(logits)
    cache = {"tokens": tokens, "emb_mask": emb_mask, "layers": layers,
             "h_final": x, "probs": probs}
    return probs, cache


def forward(params, tokens, mode="eval", rng=None, dropout=0.0):
    """Per-token probability rows over the combined tags; each row sums
    to 1.  Dropout (embeddings and inter-layer activations) applies only in
    train mode, with masks drawn from ``rng``."""
    if mode not in ("train", "eval"):
        raise TaggerError(f"mode must be 'train' or 'eval', got {mode!r}")
    probs, _ = _forward_cached(params, tokens, mode == "train", dropout, rng)
    return probs


def predict_tags(params, tokens):
    """Greedy per-token decode; argmax ties resolve to the lowest tag id."""
    return np.argmax(forward(params, tokens), axis=1)


def seq_loss(probs, gold):
    """Mean over tokens of -log(predicted probability of the gold tag)."""
    gold = np.asarray(gold, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != gold.size:
        raise TaggerError("probability rows do not match the tag sequence")
    if gold.size and (gold.min() < 0 or gold.max() >= probs.shape[1]):
        raise TaggerError("gold tag index out of range")
    picked = probs[np.arange(gold.size), gold]
    return float(-np.log(picked).mean())


def _backward_cached(params, cache, dprobs, grads):
    probs = cache["probs"]
    dlogits = probs * (dprobs - np.sum(dprobs * probs, axis=1, keepdims=True))
    grads["proj_w"] += cache["h_final"].T @ dlogits
    grads["proj_b"] += dlogits.sum(axis=0)
    dh = dlogits @ params["proj_w"].T

    hd = params.d_hid
    for layer in range(params.n_layers - 1, -1, -1):
        entry = cache["layers"][layer]
        if entry["mask"] is not None:
            dh = dh * entry["mask"]
        dx = None
        for d, sl in (("fw", slice(0, hd)), ("bw", slice(hd, 2 * hd))):
            dirc = entry[d]
            dh_dir = dh[:, sl]
            dh_proc = np.ascontiguousarray(dh_dir[::-1] if d == "bw" else dh_dir)
            wh = params[f"lstm{layer}_{d}_wh"]
            dz = lstm_seq_backward(np.ascontiguousarray(wh), dirc["gates"],
                                   dirc["c"], dh_proc)
            grads[f"lstm{layer}_{d}_wx"] += dirc["x_proc"].T @ dz
            h_prev = np.vstack([np.zeros((1, hd)), dirc["h_proc"][:-1]])
            grads[f"lstm{layer}_{d}_wh"] += h_prev.T @ dz
            grads[f"lstm{layer}_{d}_b"] += dz.sum(axis=0)
            dx_proc = dz @ params[f"lstm{layer}_{d}_wx"].T
            dx_dir = dx_proc[::-1] if d == "bw" else dx_proc
            dx = dx_dir if dx is None else dx + dx_dir
        dh = dx

    if cache["emb_mask"] is not None:
        dh = dh * cache["emb_mask"]
    np.add.at(grads["embedding"], cache["tokens"], dh)


def _effective_ncsl(cfg):
    return cfg.alpha if cfg.matrix_mode != "none" else 0.0


def loss_and_grads(params, batch, cfg, schema=None, matrix=None, rng=None):
    """Forward and backward over one batch.

    batch is a list of (token id vector, gold tag id vector) pairs.
    Returns ({'l_seq', 'l_hin', 'l_c'}, gradient dict).  Aborts with
    NumericsError naming the offending array if anything turns non-finite.
    """
    if not batch:
        raise TaggerError("empty batch")
    alpha = _effective_ncsl(cfg)
    if alpha > 0 and (schema is None or matrix is None):
        raise TaggerError("cross-supervised training needs a schema and a matrix")

    probs_list, caches = [], []
    l_seq = 0.0
    for tokens, tags in batch:
        probs, cache = _forward_cached(params, tokens, True, cfg.dropout, rng)
        probs_list.append(probs)
        caches.append(cache)
        l_seq += seq_loss(probs, tags)
    l_seq /= len(batch)

    l_hin = 0.0
    gvec = None
    if alpha > 0:
        fe, ft, agg = ncsl.aggregate_predicted_with_cache(probs_list, schema)
        ge, gt = ncsl.aggregate_gold([tags for _, tags in batch], schema)
        l_hin, dfe, dft = ncsl.hin_loss_and_grad(fe, ft, ge, gt, matrix,
                                                 cfg.matrix_mode)
        gvec = ncsl.aggregate_predicted_backward(dfe, dft, agg)
    l_c = ncsl.combined_loss(l_seq, l_hin, alpha)

    grads = params.zeros_like()
    n_sent = len(batch)
    for (tokens, tags), probs, cache in zip(batch, probs_list, caches):
        n = probs.shape[0]
        rows = np.arange(n)
        gold = np.asarray(tags, dtype=np.int64)
        dprobs = np.zeros_like(probs)
        dprobs[rows, gold] = -(1.0 - alpha) / (n * n_sent * probs[rows, gold])
        if gvec is not None:
            dprobs += alpha * gvec
        _backward_cached(params, cache, dprobs, grads)

    if not np.isfinite(l_c):
        raise NumericsError("loss is not finite")
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericsError(f"gradient array {name} is not finite")
    return {"l_seq": l_seq, "l_hin": l_hin, "l_c": l_c}, grads


def backward(params, batch, cfg, schema=None, matrix=None, rng=None):
    """Gradients of the combined objective for every parameter array."""
    _parts, grads = loss_and_grads(params, batch, cfg, schema, matrix, rng)
    return grads


def batch_loss(params, batch, cfg, schema=None, matrix=None):
    """Combined loss with dropout disabled; deterministic, no gradients."""
    if not batch:
        raise TaggerError("empty batch")
    alpha = _effective_ncsl(cfg)
    probs_list = []
    l_seq = 0.0
    for tokens, tags in batch:
        probs, _ = _forward_cached(params, tokens, False, 0.0, None)
        probs_list.append(probs)
        l_seq += seq_loss(probs, tags)
    l_seq /= len(batch)
    l_hin = 0.0
    if alpha > 0:
        fe, ft = ncsl.aggregate_predicted(probs_list, schema)
        ge, gt = ncsl.aggregate_gold([tags for _, tags in batch], schema)
        l_hin = ncsl.hin_loss(fe, ft, ge, gt, matrix, cfg.matrix_mode)
    return ncsl.combined_loss(l_seq, l_hin, alpha)


class AdamState:
    """First/second moment accumulators plus the step count."""

    def __init__(self, params):
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.t = 0


def adam_step(params, grads, state, lr):
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    c1 = 1.0 - ADAM_BETA1 ** state.t
    c2 = 1.0 - ADAM_BETA2 ** state.t
    for name, arr in params.arrays.items():
        g = grads[name]
        if g.shape != arr.shape:
            raise TaggerError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        arr -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    return params, state


def save_checkpoint(path, params, cfg, schema, vocab):
    """Single self-describing binary container (magic ``CSM1``)."""
    vocab_list = [None] * len(vocab)
    for tok, idx in vocab.items():
        if not 0 <= idx < len(vocab) or vocab_list[idx] is not None:
            raise TaggerError("vocab indices must be contiguous and unique")
        vocab_list[idx] = tok
    header = {
        "version": 1,
        "schema_digest": schema.digest(),
        "vocab": vocab_list,
        "config": json.loads(cfg.to_json()),
        "dims": {"vocab_size": params.vocab_size, "n_tags": params.n_tags,
                 "d_emb": params.d_emb, "d_hid": params.d_hid,
                 "n_layers": params.n_layers},
        "arrays": [{"name": n, "shape": list(params[n].shape)}
                   for n in params.names()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for name in params.names():
            f.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (params, config, schema digest, vocab dict)."""
    from .config import TrainConfig

    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise TaggerError(f"{path}: not a checkpoint (bad magic)")
    (blob_len,) = struct.unpack("<Q", data[4:12])
    header = json.loads(data[12:12 + blob_len].decode("utf-8"))
    if header.get("version") != 1:
        raise TaggerError(f"unsupported checkpoint version: {header.get('version')}")
    dims = header["dims"]
    arrays = {}
    offset = 12 + blob_len
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        arrays[spec["name"]] = arr.reshape(shape).copy()
        offset += count * 8
    if offset != len(data):
        raise TaggerError("checkpoint has trailing or missing data")
    params = TaggerParams(dims["vocab_size"], dims["n_tags"], dims["d_emb"],
                          dims["d_hid"], dims["n_layers"], arrays)
    cfg = TrainConfig(**header["config"])
    vocab = {tok: i for i, tok in enumerate(header["vocab"])}
    return params, cfg, header["schema_digest"], vocab
