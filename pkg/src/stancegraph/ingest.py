"""Readers and writers for the on-disk formats the toolkit consumes and emits.

Formats handled here:

* CoNLL-U dependency parses (one file per document or a directory per corpus).
* Book metadata TSV with an ideology code per book.
* Named-entity span JSONL.
* Annotation CSV with a ``#labels=`` sidecar header, for agreement and
  aggregation work.
* The tuple store: JSON Lines, one stance tuple per line, floats fixed to six
  decimals so goldens stay byte-stable.
"""

from __future__ import annotations

import csv
import json
import logging
from contextlib import nullcontext
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Optional, TextIO, Union

from .core import (
    EventRef,
    LABEL_ORDER,
    SentenceGraph,
    SourceKind,
    SourceRef,
    StanceDistribution,
    StanceLabel,
    StanceTuple,
    build_graph,
    Token,
)

log = logging.getLogger(__name__)

__all__ = [
    "IngestError",
    "ConlluParseError",
    "ParsedToken",
    "ParsedSentence",
    "ReadCounters",
    "read_conllu",
    "read_conllu_dir",
    "Ideology",
    "BookMeta",
    "read_book_meta",
    "NerSpan",
    "ENTITY_TYPES",
    "read_ner_spans",
    "write_ner_spans",
    "AnnotationRecord",
    "AnnotationData",
    "read_annotations",
    "TupleRecord",
    "write_tuples",
    "read_tuples",
    "iter_tuple_records",
]


class IngestError(ValueError):
    """Malformed input data."""


class ConlluParseError(IngestError):
    def __init__(self, path: str | Path, line_no: int, message: str) -> None:
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


# ---------------------------------------------------------------------------
# CoNLL-U
# ---------------------------------------------------------------------------

# Column layout of a CoNLL-U token line.
ID, FORM, LEMMA, UPOS, XPOS, FEATS, HEAD, DEPREL, DEPS, MISC = range(10)


@dataclass(frozen=True)
class ParsedToken:
    """One syntactic token. ``index`` and ``head`` use CoNLL-U numbering:
    indices start at 1 and head 0 denotes the root."""

    index: int
    form: str
    upos: str
    head: int
    deprel: str
    lemma: Optional[str] = None


@dataclass(frozen=True)
class ParsedSentence:
    doc_id: str
    sent_id: str
    tokens: tuple[ParsedToken, ...]

    @cached_property
    def _children(self) -> dict[int, tuple[ParsedToken, ...]]:
        by_head: dict[int, list[ParsedToken]] = {}
        for tok in self.tokens:
            by_head.setdefault(tok.head, []).append(tok)
        return {h: tuple(ts) for h, ts in by_head.items()}

    def token(self, index: int) -> ParsedToken:
        """Look up a token by its one-based CoNLL-U index."""
        return self.tokens[index - 1]

    def children(self, index: int) -> tuple[ParsedToken, ...]:
        """Direct dependents of the token at ``index`` (0 for the root's child)."""
        return self._children.get(index, ())

    def root(self) -> ParsedToken:
        return self.children(0)[0]

    def subtree(self, index: int) -> tuple[ParsedToken, ...]:
        """The token at ``index`` plus all transitive dependents, in word order."""
        out = [self.token(index)]
        stack = [index]
        while stack:
            for child in self.children(stack.pop()):
                out.append(child)
                stack.append(child.index)
        out.sort(key=lambda t: t.index)
        return tuple(out)


@dataclass
class ReadCounters:
    """Sentences dropped while reading noisy parsed text."""

    skipped_no_root: int = 0
    skipped_multi_root: int = 0
    skipped_bad_structure: int = 0

    @property
    def total_skipped(self) -> int:
        return self.skipped_no_root + self.skipped_multi_root + self.skipped_bad_structure


def _finish_sentence(
    path: str | Path,
    doc_id: str,
    sent_id: str,
    tokens: list[ParsedToken],
    counters: ReadCounters,
) -> Optional[ParsedSentence]:
    n = len(tokens)
    if any(t.index != i + 1 for i, t in enumerate(tokens)) or any(
        not (0 <= t.head <= n) for t in tokens
    ):
        counters.skipped_bad_structure += 1
        log.warning("%s: sentence %s skipped: token ids or heads out of range", path, sent_id)
        return None
    roots = sum(1 for t in tokens if t.head == 0)
    if roots == 0:
        counters.skipped_no_root += 1
        log.warning("%s: sentence %s skipped: no root", path, sent_id)
        return None
    if roots > 1:
        counters.skipped_multi_root += 1
        log.warning("%s: sentence %s skipped: %d roots", path, sent_id, roots)
        return None
    return ParsedSentence(doc_id=doc_id, sent_id=sent_id, tokens=tuple(tokens))


def read_conllu(
    path: str | Path,
    counters: Optional[ReadCounters] = None,
) -> Iterator[ParsedSentence]:
    """Stream sentences from a CoNLL-U file.

    ``# newdoc id`` and ``# sent_id`` comments set document and sentence ids;
    without them the file stem and a running ordinal are used. Multiword token
    ranges (``1-2``) and empty nodes (``5.1``) are skipped. Sentences with zero
    or several roots, or with broken indices, are dropped and counted in
    ``counters`` rather than aborting the read.

    Raises:
        ConlluParseError: a token line has the wrong column count or a field
            that does not parse.
    """
    path = Path(path)
    if counters is None:
        counters = ReadCounters()

    doc_id = path.stem
    sent_id: Optional[str] = None
    ordinal = 0
    tokens: list[ParsedToken] = []

    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if tokens:
                    ordinal += 1
                    sent = _finish_sentence(
                        path, doc_id, sent_id or str(ordinal), tokens, counters
                    )
                    if sent is not None:
                        yield sent
                    tokens = []
                    sent_id = None
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    key = key.strip()
                    if key == "sent_id":
                        sent_id = value.strip()
                    elif key == "newdoc id":
                        doc_id = value.strip()
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise ConlluParseError(path, line_no, f"expected 10 columns, found {len(cols)}")
            if "-" in cols[ID] or "." in cols[ID]:
                continue  # multiword token range or empty node
            try:
                index = int(cols[ID])
                head = int(cols[HEAD])
            except ValueError:
                raise ConlluParseError(
                    path, line_no, f"non-integer id or head: {cols[ID]!r}, {cols[HEAD]!r}"
                ) from None
            lemma = cols[LEMMA] if cols[LEMMA] != "_" else None
            tokens.append(
                ParsedToken(
                    index=index,
                    form=cols[FORM],
                    upos=cols[UPOS],
                    head=head,
                    deprel=cols[DEPREL],
                    lemma=lemma,
                )
            )
        if tokens:
            ordinal += 1
            sent = _finish_sentence(path, doc_id, sent_id or str(ordinal), tokens, counters)
            if sent is not None:
                yield sent


def read_conllu_dir(
    directory: str | Path,
    counters: Optional[ReadCounters] = None,
) -> Iterator[ParsedSentence]:
    """Stream sentences from every ``*.conllu`` file in a directory, in sorted
    file order so downstream output is stable."""
    directory = Path(directory)
    for path in sorted(directory.glob("*.conllu")):
        yield from read_conllu(path, counters=counters)


# ---------------------------------------------------------------------------
# Book metadata
# ---------------------------------------------------------------------------


class Ideology(Enum):
    LEFT = "L"
    RIGHT = "R"
    CENTER = "C"


@dataclass(frozen=True)
class BookMeta:
    book_id: str
    title: str
    author: str
    year: int
    ideology: Ideology


_META_COLUMNS = ["book_id", "title", "author", "year", "ideology"]


def read_book_meta(path: str | Path) -> dict[str, BookMeta]:
    """Read the book metadata TSV into a dict keyed by book id."""
    out: dict[str, BookMeta] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty metadata file") from None
        if header != _META_COLUMNS:
            raise IngestError(
                f"{path}: bad header {header!r}, expected {_META_COLUMNS!r}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise IngestError(f"{path}: row {row_no}: expected 5 fields, found {len(row)}")
            book_id, title, author, year_text, code = row
            try:
                ideology = Ideology(code)
            except ValueError:
                raise IngestError(
                    f"{path}: row {row_no}: unknown ideology code {code!r} for book {book_id!r}"
                ) from None
            try:
                year = int(year_text)
            except ValueError:
                raise IngestError(f"{path}: row {row_no}: bad year {year_text!r}") from None
            if book_id in out:
                raise IngestError(f"{path}: row {row_no}: duplicate book id {book_id!r}")
            out[book_id] = BookMeta(book_id, title, author, year, ideology)
    return out


# ---------------------------------------------------------------------------
# Named-entity spans
# ---------------------------------------------------------------------------

# Non-numeric entity types kept by the span format; anything else is OTHER.
ENTITY_TYPES = (
    "Event",
    "Facility",
    "GPE",
    "Language",
    "Law",
    "Location",
    "NORP",
    "Organization",
    "Person",
    "Product",
    "Work_of_Art",
)

_ENTITY_BY_FOLD = {name.casefold(): name for name in ENTITY_TYPES}


def normalize_entity_type(text: str) -> str:
    return _ENTITY_BY_FOLD.get(text.casefold(), "OTHER")


@dataclass(frozen=True)
class NerSpan:
    """A named-entity span over zero-based, inclusive token indices."""

    doc_id: str
    sent_id: str
    start: int
    end: int
    entity_type: str
    surface: str

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise IngestError(f"span start {self.start} after end {self.end}")
        object.__setattr__(self, "entity_type", normalize_entity_type(self.entity_type))

    def covers(self, token_index: int) -> bool:
        return self.start <= token_index <= self.end


def read_ner_spans(path: str | Path) -> list[NerSpan]:
    spans: list[NerSpan] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                spans.append(
                    NerSpan(
                        doc_id=obj["doc_id"],
                        sent_id=obj["sent_id"],
                        start=int(obj["start"]),
                        end=int(obj["end"]),
                        entity_type=obj["type"],
                        surface=obj["surface"],
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise IngestError(f"{path}:{line_no}: bad span record: {exc}") from None
    return spans


def write_ner_spans(path: str | Path, spans: Iterable[NerSpan]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for span in spans:
            fh.write(
                json.dumps(
                    {
                        "doc_id": span.doc_id,
                        "sent_id": span.sent_id,
                        "start": span.start,
                        "end": span.end,
                        "type": span.entity_type,
                        "surface": span.surface,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# Annotation CSV
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotationRecord:
    item_id: str
    annotator_id: str
    label_index: int


@dataclass(frozen=True)
class AnnotationData:
    labels: tuple[str, ...]
    records: tuple[AnnotationRecord, ...]
    dropped_duplicates: int = 0

    @property
    def k(self) -> int:
        return len(self.labels)


def read_annotations(path: str | Path) -> AnnotationData:
    """Read an annotation CSV.

    The first line must declare the label set as ``#labels=a|b|c``; the label
    count K is inferred from it. A repeated (item, annotator) pair keeps the
    last judgment and counts the earlier one as dropped.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("#labels="):
            raise IngestError(f"{path}: missing '#labels=' header line")
        labels = tuple(first[len("#labels=") :].split("|"))
        if len(labels) < 2 or any(not l for l in labels):
            raise IngestError(f"{path}: label set {labels!r} needs at least two nonempty labels")
        label_index = {l: i for i, l in enumerate(labels)}

        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: missing column header") from None
        if header != ["item_id", "annotator_id", "label"]:
            raise IngestError(f"{path}: bad column header {header!r}")

        by_pair: dict[tuple[str, str], AnnotationRecord] = {}
        dropped = 0
        for row_no, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != 3:
                raise IngestError(f"{path}: row {row_no}: expected 3 fields, found {len(row)}")
            item_id, annotator_id, label = row
            if label not in label_index:
                raise IngestError(
                    f"{path}: row {row_no}: label {label!r} not in declared set"
                )
            key = (item_id, annotator_id)
            if key in by_pair:
                dropped += 1
                log.warning(
                    "%s: row %d: duplicate judgment for item %r by %r, keeping the later one",
                    path,
                    row_no,
                    item_id,
                    annotator_id,
                )
            by_pair[key] = AnnotationRecord(item_id, annotator_id, label_index[label])
    return AnnotationData(labels=labels, records=tuple(by_pair.values()), dropped_duplicates=dropped)


# ---------------------------------------------------------------------------
# Tuple store
# ---------------------------------------------------------------------------

# Store readers and writers take a filesystem path or an already-open text
# stream, so CLI stages can hand stores through pipes.
TextSource = Union[str, Path, TextIO]

_MICRO = 10**6


def _open_text(src: TextSource, mode: str = "r"):
    if hasattr(src, "read") or hasattr(src, "write"):
        return nullcontext(src), getattr(src, "name", "<stream>")
    return open(src, mode, encoding="utf-8"), str(src)


def _format_probs(dist: StanceDistribution, argmax: StanceLabel) -> str:
    """Render a distribution as JSON with fixed six-decimal values.

    Probabilities are quantized to micro units and patched so that the emitted
    numbers sum to exactly 1.000000 and the stored argmax survives rounding.
    """
    units = [int(p * _MICRO + 0.5) for p in dist.probs]
    order = {label: i for i, label in enumerate(LABEL_ORDER)}
    target = order[argmax]
    units[target] += _MICRO - sum(units)

    def quantized_argmax() -> int:
        best = 0
        for i in range(1, len(units)):
            if units[i] > units[best]:
                best = i
        return best

    while quantized_argmax() != target:
        leader = quantized_argmax()
        units[leader] -= 1
        units[target] += 1

    parts = []
    for label, u in zip(LABEL_ORDER, units):
        parts.append(f'"{label.value}": {u // _MICRO}.{u % _MICRO:06d}')
    return "{" + ", ".join(parts) + "}"


def _tuple_line(graph: SentenceGraph, t: StanceTuple) -> str:
    source_obj = {
        "kind": t.source.kind.value,
        "token": t.source.token_index,
        "surface": t.source.surface,
    }
    event_obj = {"token": t.event.token_index, "surface": t.event.surface}
    head = json.dumps(
        {
            "doc_id": graph.doc_id,
            "sent_id": graph.sent_id,
            "source": source_obj,
            "event": event_obj,
            "label": t.label.value if t.label is not None else None,
        },
        ensure_ascii=False,
    )
    if t.dist is None:
        return head[:-1] + ', "probs": null}'
    probs = _format_probs(t.dist, t.label if t.label is not None else t.dist.argmax())
    return head[:-1] + ', "probs": ' + probs + "}"


def write_tuples(path: TextSource, graphs: Iterable[SentenceGraph]) -> None:
    """Write graphs to a tuple store, one JSON line per stance tuple.

    Lines follow graph order and the source-major tuple order inside each
    graph, so the same graphs always produce byte-identical files.
    """
    cm, _ = _open_text(path, "w")
    with cm as fh:
        for graph in graphs:
            for t in graph.tuples:
                fh.write(_tuple_line(graph, t) + "\n")


@dataclass(frozen=True)
class TupleRecord:
    """One tuple store line in flat form, for lookup-style consumers."""

    doc_id: str
    sent_id: str
    source_kind: SourceKind
    source_token: Optional[int]
    source_surface: str
    event_token: int
    event_surface: str
    label: Optional[StanceLabel]
    dist: Optional[StanceDistribution]

    @property
    def pair_key(self) -> tuple[str, str, str, Optional[int], int]:
        return (
            self.doc_id,
            self.sent_id,
            self.source_kind.value,
            self.source_token,
            self.event_token,
        )


def _parse_tuple_line(path: str | Path, line_no: int, line: str) -> TupleRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}:{line_no}: bad JSON: {exc}") from None
    try:
        source = obj["source"]
        event = obj["event"]
        kind = SourceKind(source["kind"])
        label_text = obj.get("label")
        label = StanceLabel.parse(label_text) if label_text is not None else None
        probs = obj.get("probs")
        dist = StanceDistribution.from_mapping(probs) if probs is not None else None
        return TupleRecord(
            doc_id=obj["doc_id"],
            sent_id=obj["sent_id"],
            source_kind=kind,
            source_token=source["token"],
            source_surface=source["surface"],
            event_token=event["token"],
            event_surface=event["surface"],
            label=label,
            dist=dist,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"{path}:{line_no}: bad tuple record: {exc}") from None


def iter_tuple_records(path: TextSource) -> Iterator[TupleRecord]:
    """Stream tuple store lines without regrouping them into graphs."""
    cm, name = _open_text(path)
    with cm as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            yield _parse_tuple_line(name, line_no, line)


def _graph_from_records(records: list[TupleRecord]) -> SentenceGraph:
    first = records[0]
    sources: list[SourceRef] = []
    seen_sources: set[tuple[SourceKind, Optional[int]]] = set()
    events: list[EventRef] = []
    seen_events: set[int] = set()
    for rec in records:
        skey = (rec.source_kind, rec.source_token)
        if skey not in seen_sources:
            seen_sources.add(skey)
            if rec.source_kind is SourceKind.AUTHOR:
                sources.append(SourceRef.author())
            else:
                sources.append(SourceRef.mention(rec.source_token, rec.source_surface))
        if len(sources) == 1 and rec.event_token not in seen_events:
            seen_events.add(rec.event_token)
            events.append(EventRef(rec.event_token, rec.event_surface))

    source_by_key = {(s.kind, s.token_index): s for s in sources}
    event_by_token = {e.token_index: e for e in events}
    tuples = []
    for rec in records:
        source = source_by_key[(rec.source_kind, rec.source_token)]
        event = event_by_token.get(rec.event_token)
        if event is None:
            raise IngestError(
                f"tuple store sentence {first.doc_id}/{first.sent_id}: event token "
                f"{rec.event_token} missing from the first source's block"
            )
        tuples.append(StanceTuple(source=source, event=event, label=rec.label, dist=rec.dist))

    # Token lists are not persisted, so the rebuilt graph carries none and
    # bounds checks are skipped by construction.
    max_token = max(
        [s.token_index for s in sources if s.token_index is not None]
        + [e.token_index for e in events],
        default=-1,
    )
    placeholder = tuple(Token(i, "") for i in range(max_token + 1)) if max_token >= 0 else ()
    return build_graph(
        doc_id=first.doc_id,
        sent_id=first.sent_id,
        tokens=placeholder,
        sources=sources,
        events=events,
        tuples=tuples,
    )


def read_tuples(path: TextSource) -> list[SentenceGraph]:
    """Read a tuple store back into sentence graphs.

    Lines for one sentence must be contiguous and form a complete cross
    product in source-major order, which is what ``write_tuples`` emits.
    Token lists are not stored, so rebuilt graphs carry placeholder tokens.
    """
    graphs: list[SentenceGraph] = []
    seen_keys: set[tuple[str, str]] = set()
    current_key: Optional[tuple[str, str]] = None
    current: list[TupleRecord] = []

    cm, name = _open_text(path)

    def flush() -> None:
        if current:
            try:
                graphs.append(_graph_from_records(current))
            except ValueError as exc:
                raise IngestError(f"{name}: sentence {current_key}: {exc}") from None

    with cm as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = _parse_tuple_line(name, line_no, line)
            key = (rec.doc_id, rec.sent_id)
            if key != current_key:
                if key in seen_keys:
                    raise IngestError(
                        f"{path}:{line_no}: tuples for sentence {key} are not contiguous"
                    )
                flush()
                seen_keys.add(key)
                current_key = key
                current = []
            current.append(rec)
    flush()
    return graphs
