"""Core data model: stance labels, probability distributions, and sentence graphs.

A sentence graph pairs every candidate belief source in a sentence with every
candidate event, yielding one stance tuple per (source, event) pair. The
synthetic Author source is always present, so a sentence with no extracted
mention sources still carries the narrator's perspective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional

__all__ = [
    "StanceLabel",
    "CoarseLabel",
    "SourceKind",
    "LABEL_ORDER",
    "StanceDistribution",
    "Token",
    "SourceRef",
    "EventRef",
    "StanceTuple",
    "SentenceGraph",
    "GraphError",
    "DuplicateSourceError",
    "TokenBoundsError",
    "build_graph",
    "coarsen",
    "coarsen_dist",
]

PROB_TOLERANCE = 1e-6


class StanceLabel(Enum):
    """Fine-grained epistemic stance a source takes toward an event."""

    CT_POS = "CT+"  # certain that the event holds
    CT_NEG = "CT-"  # certain that the event does not hold
    PR_POS = "PR+"  # probable
    PS_POS = "PS+"  # possible
    UU = "Uu"       # underspecified / uncommitted
    NE = "NE"       # source holds no epistemic stance toward the event

    @classmethod
    def parse(cls, text: str) -> "StanceLabel":
        try:
            return cls(text)
        except ValueError:
            valid = ", ".join(l.value for l in cls)
            raise ValueError(f"unknown stance label {text!r} (expected one of: {valid})") from None

    def __str__(self) -> str:
        return self.value


# Canonical label order. Argmax ties are broken in favour of the earlier label.
LABEL_ORDER: tuple[StanceLabel, ...] = (
    StanceLabel.CT_POS,
    StanceLabel.CT_NEG,
    StanceLabel.PR_POS,
    StanceLabel.PS_POS,
    StanceLabel.UU,
    StanceLabel.NE,
)

_LABEL_INDEX = {label: i for i, label in enumerate(LABEL_ORDER)}


class CoarseLabel(Enum):
    """Collapsed four-way stance used by polarity-level analytics."""

    POS = "Pos"
    NEG = "Neg"
    UNCOMMITTED = "Uu"
    NE = "NE"

    def __str__(self) -> str:
        return self.value


_COARSE_MAP = {
    StanceLabel.CT_POS: CoarseLabel.POS,
    StanceLabel.CT_NEG: CoarseLabel.NEG,
    StanceLabel.PR_POS: CoarseLabel.UNCOMMITTED,
    StanceLabel.PS_POS: CoarseLabel.UNCOMMITTED,
    StanceLabel.UU: CoarseLabel.UNCOMMITTED,
    StanceLabel.NE: CoarseLabel.NE,
}


def coarsen(label: StanceLabel) -> CoarseLabel:
    """Collapse a fine-grained label to its polarity class."""
    return _COARSE_MAP[label]


class SourceKind(Enum):
    AUTHOR = "author"
    MENTION = "mention"


class GraphError(ValueError):
    """Invalid sentence graph construction."""


class DuplicateSourceError(GraphError):
    """Two sources with the same kind and token index."""


class TokenBoundsError(GraphError):
    """A source or event points outside the sentence's token list."""


@dataclass(frozen=True, order=True)
class StanceDistribution:
    """Probability distribution over the six stance labels.

    Probabilities are stored in canonical label order and must sum to one
    within ``PROB_TOLERANCE``.
    """

    probs: tuple[float, float, float, float, float, float]

    def __post_init__(self) -> None:
        if len(self.probs) != len(LABEL_ORDER):
            raise ValueError(f"expected {len(LABEL_ORDER)} probabilities, got {len(self.probs)}")
        for p in self.probs:
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"probability {p!r} outside [0, 1]")
        total = sum(self.probs)
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise ValueError(f"probabilities sum to {total!r}, not 1 within {PROB_TOLERANCE}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[StanceLabel | str, float]) -> "StanceDistribution":
        """Build from a label -> probability mapping; all six labels required."""
        resolved: dict[StanceLabel, float] = {}
        for key, value in mapping.items():
            label = key if isinstance(key, StanceLabel) else StanceLabel.parse(key)
            if label in resolved:
                raise ValueError(f"duplicate probability for label {label.value!r}")
            resolved[label] = float(value)
        missing = [l.value for l in LABEL_ORDER if l not in resolved]
        if missing:
            raise ValueError(f"missing probabilities for labels: {', '.join(missing)}")
        return cls(tuple(resolved[l] for l in LABEL_ORDER))

    @classmethod
    def point_mass(cls, label: StanceLabel) -> "StanceDistribution":
        return cls(tuple(1.0 if l is label else 0.0 for l in LABEL_ORDER))

    @classmethod
    def uniform(cls) -> "StanceDistribution":
        k = len(LABEL_ORDER)
        return cls(tuple(1.0 / k for _ in LABEL_ORDER))

    def __getitem__(self, label: StanceLabel) -> float:
        return self.probs[_LABEL_INDEX[label]]

    def argmax(self) -> StanceLabel:
        """Most probable label; ties go to the earlier label in canonical order."""
        best = 0
        for i in range(1, len(self.probs)):
            if self.probs[i] > self.probs[best]:
                best = i
        return LABEL_ORDER[best]

    def as_mapping(self) -> dict[StanceLabel, float]:
        return {label: p for label, p in zip(LABEL_ORDER, self.probs)}


def coarsen_dist(dist: StanceDistribution) -> dict[CoarseLabel, float]:
    """Sum fine-grained probability mass into the four polarity classes."""
    out = {c: 0.0 for c in CoarseLabel}
    for label, p in zip(LABEL_ORDER, dist.probs):
        out[_COARSE_MAP[label]] += p
    return out


@dataclass(frozen=True)
class Token:
    """A sentence token as seen by the graph: zero-based index and surface form."""

    index: int
    form: str


@dataclass(frozen=True)
class SourceRef:
    """A belief source: either the synthetic Author or a mention token."""

    kind: SourceKind
    token_index: Optional[int]
    surface: str

    def __post_init__(self) -> None:
        if self.kind is SourceKind.AUTHOR:
            if self.token_index is not None:
                raise GraphError("Author source must not carry a token index")
        else:
            if self.token_index is None:
                raise GraphError("mention source requires a token index")

    @classmethod
    def author(cls) -> "SourceRef":
        return cls(SourceKind.AUTHOR, None, "Author")

    @classmethod
    def mention(cls, token_index: int, surface: str) -> "SourceRef":
        return cls(SourceKind.MENTION, token_index, surface)

    def sort_key(self) -> tuple[int, int]:
        # Author sorts before any mention; mentions sort by token position.
        if self.kind is SourceKind.AUTHOR:
            return (0, -1)
        return (1, self.token_index)  # type: ignore[arg-type]


@dataclass(frozen=True)
class EventRef:
    """A candidate event, anchored at a token."""

    token_index: int
    surface: str


@dataclass(frozen=True)
class StanceTuple:
    """One (source, event) pair with an optional label and distribution.

    When both a hard label and a distribution are present the label must be
    the distribution's argmax under the canonical tie-break.
    """

    source: SourceRef
    event: EventRef
    label: Optional[StanceLabel] = None
    dist: Optional[StanceDistribution] = None

    def __post_init__(self) -> None:
        if self.label is not None and self.dist is not None:
            expected = self.dist.argmax()
            if self.label is not expected:
                raise GraphError(
                    f"label {self.label.value!r} disagrees with distribution argmax {expected.value!r}"
                )


@dataclass(frozen=True)
class SentenceGraph:
    """Cross product of a sentence's sources and events.

    Tuples are ordered source-major: all events for the first source, then all
    events for the second, and so on. ``tokens`` may be empty for graphs
    reconstructed from a tuple store, which does not persist token lists.
    """

    doc_id: str
    sent_id: str
    tokens: tuple[Token, ...]
    sources: tuple[SourceRef, ...]
    events: tuple[EventRef, ...]
    tuples: tuple[StanceTuple, ...] = field(default=())

    def tuple_for(self, source: SourceRef, event: EventRef) -> StanceTuple:
        si = self.sources.index(source)
        ei = self.events.index(event)
        return self.tuples[si * len(self.events) + ei]


def _check_bounds(index: Optional[int], n_tokens: int, what: str) -> None:
    if index is not None and not (0 <= index < n_tokens):
        raise TokenBoundsError(f"{what} token index {index} outside sentence of {n_tokens} tokens")


def build_graph(
    doc_id: str,
    sent_id: str,
    tokens: Iterable[Token],
    sources: Iterable[SourceRef],
    events: Iterable[EventRef],
    tuples: Optional[Iterable[StanceTuple]] = None,
) -> SentenceGraph:
    """Assemble a sentence graph, injecting the Author source if absent.

    Args:
        tuples: pre-labeled tuples in source-major order. When omitted, one
            unlabeled tuple per (source, event) pair is generated.

    Raises:
        DuplicateSourceError: two sources share a kind and token index.
        TokenBoundsError: a source or event points outside the token list.
        GraphError: supplied tuples do not match the cross product.
    """
    token_tuple = tuple(tokens)
    source_list = list(sources)
    event_tuple = tuple(events)

    if not any(s.kind is SourceKind.AUTHOR for s in source_list):
        source_list.insert(0, SourceRef.author())

    seen: set[tuple[SourceKind, Optional[int]]] = set()
    for s in source_list:
        key = (s.kind, s.token_index)
        if key in seen:
            where = "Author" if s.kind is SourceKind.AUTHOR else f"token {s.token_index}"
            raise DuplicateSourceError(f"duplicate source at {where}")
        seen.add(key)
        _check_bounds(s.token_index, len(token_tuple), "source")
    for e in event_tuple:
        _check_bounds(e.token_index, len(token_tuple), "event")

    source_tuple = tuple(source_list)
    if tuples is None:
        tuple_seq = tuple(
            StanceTuple(source=s, event=e) for s in source_tuple for e in event_tuple
        )
    else:
        tuple_seq = tuple(tuples)
        expected = [(s, e) for s in source_tuple for e in event_tuple]
        if len(tuple_seq) != len(expected):
            raise GraphError(
                f"expected {len(expected)} tuples for {len(source_tuple)} sources x "
                f"{len(event_tuple)} events, got {len(tuple_seq)}"
            )
        for t, (s, e) in zip(tuple_seq, expected):
            if t.source != s or t.event != e:
                raise GraphError(
                    f"tuple for ({t.source.surface!r}, {t.event.surface!r}) out of "
                    "source-major order"
                )

    return SentenceGraph(
        doc_id=doc_id,
        sent_id=sent_id,
        tokens=token_tuple,
        sources=source_tuple,
        events=event_tuple,
        tuples=tuple_seq,
    )
