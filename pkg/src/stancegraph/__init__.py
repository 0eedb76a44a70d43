"""Epistemic stance graphs over dependency-parsed text.

The package is organised around one object: the sentence graph, a cross
product of belief sources and events extracted from a parsed sentence. The
submodules cover the pipeline stages around it:

- ``ingest``: CoNLL-U corpora, tuple stores (JSONL), annotation CSVs,
  NER spans, and book metadata.
- ``extract``: source and event extraction from dependency parses.
- ``predict``: the rule baseline, file-backed and remote predictors, and
  restart ensembling.
- ``mace``: EM aggregation of crowd annotations with annotator
  reliability modelling.
- ``stats``: macro F1, bootstrap confidence intervals and paired
  comparison, raw agreement, Krippendorff's alpha.
- ``analytics``: belief-holder aggregation, hedging rates, citation
  ratios, and epistemological difference between sources.
"""

from .core import (
    CoarseLabel,
    EventRef,
    LABEL_ORDER,
    SentenceGraph,
    SourceKind,
    SourceRef,
    StanceDistribution,
    StanceLabel,
    StanceTuple,
    build_graph,
    coarsen,
)

__version__ = "0.1.0"

__all__ = [
    "CoarseLabel",
    "EventRef",
    "LABEL_ORDER",
    "SentenceGraph",
    "SourceKind",
    "SourceRef",
    "StanceDistribution",
    "StanceLabel",
    "StanceTuple",
    "build_graph",
    "coarsen",
    "__version__",
]
