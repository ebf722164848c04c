"""Corpus ingestion, validation, k-fold splitting, and synthetic generation.

File format: UTF-8, one ``token<TAB>tag`` per line, one blank line after each
sentence.  Tags come from a :class:`~csmtag.schema.TagSchema`'s combined tag
set.  The vocabulary maps tokens to contiguous indices with index 0 reserved
for unknown tokens, and is always built from training text only.
"""

import numpy as np

from .schema import ROLE_ENTITY, ROLE_TRIGGER, TagSchema

UNK = "<unk>"


class CorpusError(ValueError):
    pass


class AnnotatedSentence:
    """Token sequence with gold tag indices over a schema's combined tags."""

    def __init__(self, tokens, tags):
        if len(tokens) != len(tags) or not tokens:
            raise CorpusError("sentence needs equally many tokens and tags (>= 1)")
        self.tokens = list(tokens)
        self.tags = list(tags)

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return (isinstance(other, AnnotatedSentence)
                and self.tokens == other.tokens and self.tags == other.tags)

    def spans(self, schema):
        """Maximal B/I runs as (span text, role, type) triples.

        Tolerates BIO-invalid sequences (predicted tags): a dangling I tag
        opens a new span, like a B would.
        """
        out = []
        start = None
        for i in range(len(self.tags) + 1):
            tag = self.tags[i] if i < len(self.tags) else 0
            if start is not None:
                run = self.tags[start]
                cont = (i < len(self.tags)
                        and not schema.is_outside(tag)
                        and not schema.is_begin(tag)
                        and schema.role(tag) == schema.role(run)
                        and schema.type_name(tag) == schema.type_name(run))
                if not cont:
                    out.append((" ".join(self.tokens[start:i]),
                                schema.role(run), schema.type_name(run)))
                    start = None
            if i < len(self.tags) and start is None and not schema.is_outside(tag):
                start = i
        return out

    def entity_spans(self, schema):
        """Gold entities as (span text, entity type) pairs."""
        return [(t, ty) for t, role, ty in self.spans(schema) if role == ROLE_ENTITY]

    def trigger_spans(self, schema):
        return [(t, ty) for t, role, ty in self.spans(schema) if role == ROLE_TRIGGER]


def _check_bio(tags, schema, line_of):
    """Every I tag must continue a same-type B/I run."""
    prev = 0
    for i, tag in enumerate(tags):
        if not schema.is_outside(tag) and not schema.is_begin(tag):
            ok = (not schema.is_outside(prev)
                  and schema.role(prev) == schema.role(tag)
                  and schema.type_name(prev) == schema.type_name(tag))
            if not ok:
                raise CorpusError(
                    f"line {line_of[i]}: BIO violation: "
                    f"{schema.tag_name(tag)} does not continue a span")
        prev = tag


def build_vocab(sentences):
    """Token -> index map, first-seen order, index 0 reserved for unknowns."""
    vocab = {UNK: 0}
    for sent in sentences:
        for tok in sent.tokens:
            if tok not in vocab:
                vocab[tok] = len(vocab)
    return vocab


class Corpus:
    def __init__(self, schema, sentences, vocab=None):
        self.schema = schema
        self.sentences = list(sentences)
        self.vocab = build_vocab(self.sentences) if vocab is None else vocab

    def __len__(self):
        return len(self.sentences)

    def encode(self, sentence):
        """Token ids for a sentence; unseen tokens map to the unknown index."""
        return np.array([self.vocab.get(t, 0) for t in sentence.tokens],
                        dtype=np.int64)


def parse_corpus(text, schema):
    """Parse ``token<TAB>tag`` lines into a validated Corpus.

    Accepts str or UTF-8 bytes.  Raises CorpusError with a 1-based line
    number for malformed lines, unknown tags, BIO violations, and empty
    sentences (two blank lines in a row).
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusError(f"corpus is not valid UTF-8: {exc}") from None

    sentences = []
    tokens, tags, line_of = [], [], []

    def flush(lineno):
        if not tokens:
            raise CorpusError(f"line {lineno}: empty sentence")
        _check_bio(tags, schema, line_of)
        sentences.append(AnnotatedSentence(tokens[:], tags[:]))
        tokens.clear()
        tags.clear()
        line_of.clear()

    lineno = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line == "":
            flush(lineno)
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise CorpusError(f"line {lineno}: malformed line "
                              f"(expected 'token<TAB>tag'): {line!r}")
        tok, tagname = parts
        if tagname not in schema._tag_index:
            raise CorpusError(f"line {lineno}: unknown tag name: {tagname!r}")
        tokens.append(tok)
        tags.append(schema.tag_index(tagname))
        line_of.append(lineno)
    if tokens:  # EOF directly after the last token line
        flush(lineno + 1)

    return Corpus(schema, sentences)


def load_corpus(path, schema):
    with open(path, "rb") as f:
        return parse_corpus(f.read(), schema)


def serialize_corpus(corpus):
    """Canonical text form: every sentence is followed by one blank line."""
    parts = []
    for sent in corpus.sentences:
        for tok, tag in zip(sent.tokens, sent.tags):
            parts.append(f"{tok}\t{corpus.schema.tag_name(tag)}\n")
        parts.append("\n")
    return "".join(parts)


def save_corpus(corpus, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(serialize_corpus(corpus))


def kfold_split(corpus, k, seed):
    """k disjoint (train, test) pairs covering the corpus exactly once.

    Fold assignment is a seeded permutation dealt round-robin; train
    vocabularies are rebuilt from the train split only.
    """
    n = len(corpus)
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} sentences into {k} folds")
    perm = np.random.default_rng([k, seed]).permutation(n)
    folds = [sorted(perm[i::k].tolist()) for i in range(k)]
    pairs = []
    for i in range(k):
        test_idx = set(folds[i])
        train = [s for j, s in enumerate(corpus.sentences) if j not in test_idx]
        test = [corpus.sentences[j] for j in folds[i]]
        pairs.append((Corpus(corpus.schema, train),
                      Corpus(corpus.schema, test, vocab=build_vocab(train))))
    return pairs


def default_profile(schema):
    """A structured co-occurrence profile.

    Each trigger type leans on a near-disjoint pair of entity types with
    strong 9:1 dominance, so the type marginals are skewed, tie-free, and
    permuting type labels visibly breaks the co-occurrence pattern.
    """
    profile = {}
    n_e = len(schema.entity_types)
    support = [9.0, 1.0][:n_e]
    for j, t in enumerate(schema.trigger_types):
        weights = {e: 0.0 for e in schema.entity_types}
        for rank, w in enumerate(support):
            weights[schema.entity_types[(2 * j + rank) % n_e]] += w
        profile[t] = weights
    return profile


def _validate_profile(schema, profile):
    for t in schema.trigger_types:
        if t not in profile:
            raise CorpusError(f"co-occurrence profile missing trigger type {t!r}")
        weights = profile[t]
        unknown = set(weights) - set(schema.entity_types)
        if unknown:
            raise CorpusError(f"profile for {t!r} names unknown entity types "
                              f"{sorted(unknown)}")
        if any(w < 0 for w in weights.values()):
            raise CorpusError(f"profile for {t!r} has negative weights")
        if not any(w > 0 for w in weights.values()):
            raise CorpusError(f"profile for {t!r} has no positive weight")


def generate_synthetic(schema, n_sentences, seed, cooccurrence_profile=None):
    """Deterministic synthetic corpus with one trigger and 1-3 entities per
    sentence; entity types follow the trigger's co-occurrence profile.

    Type-specific lexicons make the task learnable; a shared "ambiguous"
    mention pool (resolvable only through the trigger context) leaves room
    for co-occurrence information to matter.
    """
    if cooccurrence_profile is None:
        cooccurrence_profile = default_profile(schema)
    _validate_profile(schema, cooccurrence_profile)

    rng = np.random.default_rng([17, seed])
    trig_words = {t: [f"{t.lower()}_act{k}" for k in range(5)]
                  for t in schema.trigger_types}
    ent_words = {e: [f"{e.lower()}_m{k}" for k in range(7)]
                 for e in schema.entity_types}
    shared_words = [f"mention_x{k}" for k in range(6)]
    fillers = [f"filler_{k}" for k in range(18)]

    # mildly skewed trigger frequencies keep the trigger marginal
    # informative without distorting the conversion too far
    n_t = len(schema.trigger_types)
    trig_p = np.arange(n_t + 1, 1, -1, dtype=float)
    trig_p /= trig_p.sum()

    sentences = []
    for _ in range(n_sentences):
        ttype = schema.trigger_types[rng.choice(n_t, p=trig_p)]
        weights = cooccurrence_profile[ttype]
        etypes = [e for e in schema.entity_types if weights.get(e, 0.0) > 0]
        p = np.array([weights[e] for e in etypes], dtype=float)
        p /= p.sum()

        spans = [(ROLE_TRIGGER, ttype)]
        for _ in range(int(rng.integers(1, 4))):
            spans.append((ROLE_ENTITY, etypes[rng.choice(len(etypes), p=p)]))
        rng.shuffle(spans)

        tokens, tags = [], []

        def emit_fillers():
            for _ in range(int(rng.integers(0, 3))):
                tokens.append(fillers[rng.integers(len(fillers))])
                tags.append(0)

        emit_fillers()
        for role, ty in spans:
            if role == ROLE_TRIGGER:
                pool = trig_words[ty]
                b, i = schema.trigger_tag_ids(ty)
                length = 1 if rng.random() < 0.85 else 2
            else:
                if rng.random() < 0.3:
                    pool = shared_words
                else:
                    pool = ent_words[ty]
                b, i = schema.entity_tag_ids(ty)
                length = 1 if rng.random() < 0.75 else 2
            for k in range(length):
                tokens.append(pool[rng.integers(len(pool))])
                tags.append(b if k == 0 else i)
            emit_fillers()

        sentences.append(AnnotatedSentence(tokens, tags))

    return Corpus(schema, sentences)
