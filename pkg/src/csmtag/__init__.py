"""Joint entity/trigger extraction with cross-supervised training.

One sequence-labeling pass tags entities and event triggers with a combined
tag set; training optionally adds a cross-supervision term that converts
predicted entity/trigger type distributions into each other through the
adjacency matrices of the corpus' entity-trigger co-occurrence graph and
penalizes the divergence from the gold distributions.
"""

__version__ = "0.1.0"

from .schema import TagSchema, SchemaError
from .corpus import (AnnotatedSentence, Corpus, CorpusError, parse_corpus,
                     serialize_corpus, load_corpus, save_corpus, kfold_split,
                     generate_synthetic, default_profile)
from .hin import (Hin, HinError, MetaPath, MetaPathMatrix, build_hin,
                  direct_adjacency, walk_prob, path_score,
                  enumerate_metapaths, metapath_adjacency)

__all__ = [
    "TagSchema", "SchemaError",
    "AnnotatedSentence", "Corpus", "CorpusError", "parse_corpus",
    "serialize_corpus", "load_corpus", "save_corpus", "kfold_split",
    "generate_synthetic", "default_profile",
    "Hin", "HinError", "MetaPath", "MetaPathMatrix", "build_hin",
    "direct_adjacency", "walk_prob", "path_score", "enumerate_metapaths",
    "metapath_adjacency",
    "__version__",
]
