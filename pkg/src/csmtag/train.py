"""Batched training loop with per-batch loss logging.

Three independent seeded streams keep every reported number reproducible:
parameter init, per-epoch batch order, and dropout masks.
"""

import numpy as np

from .hin import MetaPathMatrix, build_hin, direct_adjacency
from .tagger import AdamState, adam_step, init_params, loss_and_grads

LOSS_HEADER = "epoch,batch,L_seq,L_hin,L_c,alpha,mode"


def build_matrix(corpus, cfg):
    """Adjacency matrices from a training corpus, as the config needs them."""
    if cfg.matrix_mode == "none":
        return None
    if cfg.matrix_mode == "direct":
        # skip the meta-path work; the meta side stays fully unreached
        direct = direct_adjacency(build_hin(corpus), corpus.schema)
        empty = np.zeros_like(direct)
        return MetaPathMatrix(direct, empty, np.ones(direct.shape, dtype=bool), [])
    return MetaPathMatrix.from_corpus(corpus, cfg.meta_path_length)


def encode_corpus(corpus):
    return [(corpus.encode(s), np.asarray(s.tags, dtype=np.int64))
            for s in corpus.sentences]


def train_tagger(corpus, cfg, matrix=None):
    """Train on a corpus; returns (params, loss rows).

    The matrix is built from the corpus when cross-supervision is active
    and none is passed in (cross-validation passes the train-fold matrix
    explicitly so nothing leaks from held-out data).
    """
    if matrix is None and cfg.matrix_mode != "none" and cfg.alpha > 0:
        matrix = build_matrix(corpus, cfg)
    schema = corpus.schema
    data = encode_corpus(corpus)
    params = init_params(len(corpus.vocab), schema.n_tags, cfg, cfg.seed)
    state = AdamState(params)
    batch_rng = np.random.default_rng([cfg.seed, 1])
    drop_rng = np.random.default_rng([cfg.seed, 2])

    rows = []
    for epoch in range(cfg.epochs):
        order = batch_rng.permutation(len(data))
        for bi, start in enumerate(range(0, len(data), cfg.batch_size)):
            batch = [data[j] for j in order[start:start + cfg.batch_size]]
            parts, grads = loss_and_grads(params, batch, cfg, schema, matrix,
                                          drop_rng)
            adam_step(params, grads, state, cfg.learning_rate)
            rows.append((epoch, bi, parts))
    return params, rows


def losses_to_csv(rows, cfg):
    lines = [LOSS_HEADER]
    for epoch, bi, parts in rows:
        lines.append(f"{epoch},{bi},{parts['l_seq']:.8f},{parts['l_hin']:.8f},"
                     f"{parts['l_c']:.8f},{cfg.alpha:g},{cfg.matrix_mode}")
    return "\n".join(lines) + "\n"
