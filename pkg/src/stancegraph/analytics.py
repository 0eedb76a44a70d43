"""Corpus analytics over labeled tuple stores.

Everything here consumes sentence graphs whose tuples carry labels (and, for
the expectation scores, distributions), plus optional NER spans and book
metadata. Document ids double as book ids: the corpus convention is one
parsed document per book.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .core import (
    CoarseLabel,
    SentenceGraph,
    SourceKind,
    StanceDistribution,
    StanceLabel,
    coarsen_dist,
)
from .ingest import BookMeta, Ideology, NerSpan

__all__ = [
    "canonicalize",
    "BeliefHolderRecord",
    "CitationRatioRow",
    "HedgingReport",
    "UndefinedScoreError",
    "belief_holders",
    "belief_holder_eval",
    "belief_score_by_type",
    "jaccard_ner_overlap",
    "citation_ratios",
    "hedging_report",
    "hedging_uncertainty",
    "expected_stance",
    "epistemological_difference",
]


class UndefinedScoreError(ValueError):
    """An analytic has an empty or degenerate input."""


def canonicalize(text: str) -> str:
    """NFC-normalize, case-fold, and collapse runs of whitespace."""
    return " ".join(unicodedata.normalize("NFC", text).casefold().split())


@dataclass(frozen=True)
class BeliefHolderRecord:
    canonical: str
    books: frozenset[str]
    mention_count: int
    n_l: int = 0
    n_r: int = 0
    n_c: int = 0


@dataclass(frozen=True)
class CitationRatioRow:
    canonical: str
    n_l: int
    n_r: int
    p_l: float
    p_r: float
    ratio: float


@dataclass(frozen=True)
class HedgingReport:
    uncertain: int       # PR+ or PS+ tuples
    non_ne: int          # tuples with any epistemic stance
    total: int           # all tuples considered
    rate: float          # uncertain / non_ne (primary)
    rate_all: float      # uncertain / total (secondary denominator)


def _span_lookup(ner_spans: Iterable[NerSpan]) -> dict[tuple[str, str], list[NerSpan]]:
    table: dict[tuple[str, str], list[NerSpan]] = {}
    for span in ner_spans:
        table.setdefault((span.doc_id, span.sent_id), []).append(span)
    for spans in table.values():
        spans.sort(key=lambda s: (s.start, -s.end))
    return table


def _covering_span(
    spans: Optional[list[NerSpan]], token_index: int
) -> Optional[NerSpan]:
    if not spans:
        return None
    for span in spans:
        if span.covers(token_index):
            return span
    return None


def _require_label(t, graph: SentenceGraph) -> StanceLabel:
    if t.label is None:
        raise UndefinedScoreError(
            f"unlabeled tuple in {graph.doc_id}/{graph.sent_id}; run a predictor first"
        )
    return t.label


def belief_holders(
    tuple_store: Iterable[SentenceGraph],
    ner_spans: Iterable[NerSpan],
    book_meta: Optional[Mapping[str, BookMeta]] = None,
) -> list[BeliefHolderRecord]:
    """Mention sources holding at least one epistemic stance, canonicalized.

    A source token inside an NER span is named by the full span text,
    otherwise by its own surface. Ideology counts are filled when metadata is
    given. Records come back sorted by canonical name.
    """
    spans_by_sentence = _span_lookup(ner_spans)
    books: dict[str, set[str]] = {}
    mentions: dict[str, int] = {}

    for graph in tuple_store:
        sentence_spans = spans_by_sentence.get((graph.doc_id, graph.sent_id))
        for source in graph.sources:
            if source.kind is not SourceKind.MENTION:
                continue
            holds = any(
                _require_label(t, graph) is not StanceLabel.NE
                for t in graph.tuples
                if t.source == source
            )
            if not holds:
                continue
            span = _covering_span(sentence_spans, source.token_index)
            name = canonicalize(span.surface if span is not None else source.surface)
            books.setdefault(name, set()).add(graph.doc_id)
            mentions[name] = mentions.get(name, 0) + 1

    records = []
    for name in sorted(books):
        n_l = n_r = n_c = 0
        if book_meta is not None:
            for book_id in books[name]:
                meta = book_meta.get(book_id)
                if meta is None:
                    raise UndefinedScoreError(f"book {book_id!r} missing from metadata")
                if meta.ideology is Ideology.LEFT:
                    n_l += 1
                elif meta.ideology is Ideology.RIGHT:
                    n_r += 1
                else:
                    n_c += 1
        records.append(
            BeliefHolderRecord(
                canonical=name,
                books=frozenset(books[name]),
                mention_count=mentions[name],
                n_l=n_l,
                n_r=n_r,
                n_c=n_c,
            )
        )
    return records


def _holder_keys(store: Iterable[SentenceGraph]) -> tuple[set, set]:
    sentences = set()
    holders = set()
    for graph in store:
        key = (graph.doc_id, graph.sent_id)
        sentences.add(key)
        for source in graph.sources:
            if source.kind is not SourceKind.MENTION:
                continue
            if any(
                _require_label(t, graph) is not StanceLabel.NE
                for t in graph.tuples
                if t.source == source
            ):
                holders.add(key + (source.token_index,))
    return sentences, holders


def belief_holder_eval(
    pred_store: Iterable[SentenceGraph], gold_store: Iterable[SentenceGraph]
) -> tuple[float, float]:
    """Set precision/recall (0-100) of predicted belief-holder mentions."""
    pred_sentences, pred_holders = _holder_keys(pred_store)
    gold_sentences, gold_holders = _holder_keys(gold_store)
    if pred_sentences != gold_sentences:
        raise ValueError(
            f"stores cover different sentences ({len(pred_sentences)} vs {len(gold_sentences)})"
        )
    hits = len(pred_holders & gold_holders)
    if not pred_holders and not gold_holders:
        return 100.0, 100.0
    precision = 100.0 * hits / len(pred_holders) if pred_holders else 0.0
    recall = 100.0 * hits / len(gold_holders) if gold_holders else 0.0
    return precision, recall


def belief_score_by_type(
    tuple_store: Iterable[SentenceGraph], ner_spans: Iterable[NerSpan]
) -> dict[str, float]:
    """Mean fraction of epistemic stances per entity type.

    Each mention-source instance inside a span contributes the share of its
    sentence's events it holds a non-NE stance toward; types without
    instances are absent.
    """
    spans_by_sentence = _span_lookup(ner_spans)
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for graph in tuple_store:
        if not graph.events:
            continue
        sentence_spans = spans_by_sentence.get((graph.doc_id, graph.sent_id))
        for source in graph.sources:
            if source.kind is not SourceKind.MENTION:
                continue
            span = _covering_span(sentence_spans, source.token_index)
            if span is None:
                continue
            non_ne = sum(
                1
                for t in graph.tuples
                if t.source == source and _require_label(t, graph) is not StanceLabel.NE
            )
            share = non_ne / len(graph.events)
            sums[span.entity_type] = sums.get(span.entity_type, 0.0) + share
            counts[span.entity_type] = counts.get(span.entity_type, 0) + 1
    return {etype: sums[etype] / counts[etype] for etype in sorted(sums)}


def jaccard_ner_overlap(belief_set: set[str], ner_entity_set: set[str]) -> float:
    """|intersection| / |union|, with 0 for two empty sets."""
    union = belief_set | ner_entity_set
    if not union:
        return 0.0
    return len(belief_set & ner_entity_set) / len(union)


def citation_ratios(
    records: Sequence[BeliefHolderRecord],
    book_meta: Mapping[str, BookMeta],
    min_books: int = 8,
) -> list[CitationRatioRow]:
    """Pseudocounted left/right citation proportions, sorted by ratio.

    Centrist books count toward neither the proportions nor the min_books
    threshold. Rows come back descending by ratio (most left-skewed first);
    read them in reverse for the right-leaning list.
    """
    n_left_total = sum(1 for m in book_meta.values() if m.ideology is Ideology.LEFT)
    n_right_total = sum(1 for m in book_meta.values() if m.ideology is Ideology.RIGHT)

    rows = []
    for rec in records:
        n_l = n_r = 0
        for book_id in rec.books:
            meta = book_meta.get(book_id)
            if meta is None:
                raise ValueError(f"book {book_id!r} missing from metadata")
            if meta.ideology is Ideology.LEFT:
                n_l += 1
            elif meta.ideology is Ideology.RIGHT:
                n_r += 1
        if n_l + n_r < min_books:
            continue
        p_l = (n_l + 1) / (n_left_total + 1)
        p_r = (n_r + 1) / (n_right_total + 1)
        rows.append(
            CitationRatioRow(
                canonical=rec.canonical, n_l=n_l, n_r=n_r, p_l=p_l, p_r=p_r, ratio=p_l / p_r
            )
        )
    rows.sort(key=lambda r: (-r.ratio, r.canonical))
    return rows


def hedging_report(
    tuple_store: Iterable[SentenceGraph], author_only: bool = True
) -> HedgingReport:
    """Share of hedged (PR+/PS+) stances among the author's epistemic stances.

    The primary rate divides by non-NE tuples; the all-events rate is kept
    alongside since the excluded-NE convention is a choice.
    """
    uncertain = non_ne = total = 0
    for graph in tuple_store:
        for t in graph.tuples:
            if author_only and t.source.kind is not SourceKind.AUTHOR:
                continue
            label = _require_label(t, graph)
            total += 1
            if label is not StanceLabel.NE:
                non_ne += 1
            if label in (StanceLabel.PR_POS, StanceLabel.PS_POS):
                uncertain += 1
    if non_ne == 0:
        raise UndefinedScoreError("no epistemic stances to divide by")
    return HedgingReport(
        uncertain=uncertain,
        non_ne=non_ne,
        total=total,
        rate=uncertain / non_ne,
        rate_all=uncertain / total,
    )


def hedging_uncertainty(tuple_store: Iterable[SentenceGraph], author_only: bool = True) -> float:
    return hedging_report(tuple_store, author_only=author_only).rate


def expected_stance(dist: StanceDistribution) -> float:
    """Continuous stance in [-1, 1]: polarity balance given any stance at all."""
    coarse = coarsen_dist(dist)
    p_ne = coarse[CoarseLabel.NE]
    if p_ne >= 1.0 - 1e-9:
        raise UndefinedScoreError("all probability mass on NE; expected stance undefined")
    return (coarse[CoarseLabel.POS] - coarse[CoarseLabel.NEG]) / (1.0 - p_ne)


def _source_matches(source, selector: str) -> bool:
    if selector == "author":
        return source.kind is SourceKind.AUTHOR
    return source.kind is SourceKind.MENTION and canonicalize(source.surface) == selector


def _source_score(store: Sequence[SentenceGraph], selector: str) -> float:
    values = []
    for graph in store:
        for t in graph.tuples:
            if not _source_matches(t.source, selector):
                continue
            if _require_label(t, graph) is StanceLabel.NE:
                continue
            if t.dist is None:
                raise UndefinedScoreError(
                    f"tuple in {graph.doc_id}/{graph.sent_id} has no distribution; "
                    "expectation scores need probabilities"
                )
            values.append(expected_stance(t.dist))
    if not values:
        raise UndefinedScoreError(f"source {selector!r} holds no epistemic stance anywhere")
    return sum(values) / len(values)


def epistemological_difference(
    store: Sequence[SentenceGraph], source_a: str, source_b: str
) -> float:
    """Absolute gap between two sources' mean expected stances.

    Sources are selected by canonicalized surface, with "author" naming the
    synthetic Author. Only tuples whose label is epistemic enter the means.
    """
    a = _source_score(store, canonicalize(source_a))
    b = _source_score(store, canonicalize(source_b))
    return abs(a - b)
