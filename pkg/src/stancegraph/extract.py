"""Source and event candidate extraction over dependency parses.

Events are clausal: the tree root plus everything reachable from it through
clause-embedding relations. Sources come in two flavours. LOOSE mode takes
every noun or pronoun that is not nested under another nominal, which
over-generates and lets the stance labels sort out the rest. SIP mode keeps
only subjects of source-introducing predicates (say, claim, think, ...),
mirroring FactBank's convention.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .core import EventRef, SentenceGraph, SourceRef, Token, build_graph
from .ingest import IngestError, ParsedSentence, ParsedToken

__all__ = [
    "ExtractionMode",
    "ExtractionConfig",
    "DEFAULT_CLAUSE_RELATIONS",
    "DEFAULT_SOURCE_UPOS",
    "DEFAULT_SIP_LEXICON",
    "extract_events",
    "extract_sources",
    "extract_graph",
]

DEFAULT_CLAUSE_RELATIONS = frozenset(
    {"acl:relcl", "advcl", "ccomp", "csubj", "parataxis", "xcomp"}
)
DEFAULT_SOURCE_UPOS = frozenset({"NOUN", "PROPN", "PRON"})
DEFAULT_SIP_LEXICON = frozenset({"claim", "doubt", "feel", "know", "say", "think"})

# A nominal source must not hang under one of these; the set is fixed by the
# heuristic ("no noun or adjective parent") and is not part of the config.
_NOMINAL_PARENT_UPOS = frozenset({"NOUN", "PROPN", "ADJ"})


class ExtractionMode(Enum):
    LOOSE = "loose"
    SIP = "sip"


@dataclass(frozen=True)
class ExtractionConfig:
    mode: ExtractionMode = ExtractionMode.LOOSE
    clause_relations: frozenset[str] = DEFAULT_CLAUSE_RELATIONS
    source_upos: frozenset[str] = DEFAULT_SOURCE_UPOS
    sip_lexicon: frozenset[str] = DEFAULT_SIP_LEXICON
    # Comparison mode: only clauses attached directly to the root count as
    # events, instead of the transitive closure.
    direct_only: bool = False

    @classmethod
    def from_file(cls, path: str | Path) -> "ExtractionConfig":
        """Load overrides from a small key=value file.

        Recognized keys: ``mode``, ``clause_relations``, ``source_upos``
        (comma-separated), ``sip_lexicon_path`` (one entry per line) and
        ``direct_only`` (true/false).
        """
        config = cls()
        path = Path(path)
        for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise IngestError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key == "mode":
                try:
                    config = replace(config, mode=ExtractionMode(value.lower()))
                except ValueError:
                    raise IngestError(f"{path}:{line_no}: unknown mode {value!r}") from None
            elif key == "clause_relations":
                config = replace(
                    config,
                    clause_relations=frozenset(v.strip() for v in value.split(",") if v.strip()),
                )
            elif key == "source_upos":
                config = replace(
                    config,
                    source_upos=frozenset(v.strip() for v in value.split(",") if v.strip()),
                )
            elif key == "sip_lexicon_path":
                lexicon_path = Path(value)
                if not lexicon_path.is_absolute():
                    lexicon_path = path.parent / lexicon_path
                entries = frozenset(
                    w.strip().casefold()
                    for w in lexicon_path.read_text(encoding="utf-8").splitlines()
                    if w.strip()
                )
                config = replace(config, sip_lexicon=entries)
            elif key == "direct_only":
                config = replace(config, direct_only=value.lower() in {"true", "1", "yes"})
            else:
                raise IngestError(f"{path}:{line_no}: unknown config key {key!r}")
        return config


def _base_deprel(deprel: str) -> str:
    return deprel.split(":", 1)[0]


def is_sip_token(token: ParsedToken, lexicon: frozenset[str]) -> bool:
    """A token introduces sources when its form or lemma is in the lexicon."""
    if token.form.casefold() in lexicon:
        return True
    return token.lemma is not None and token.lemma.casefold() in lexicon


def extract_events(sentence: ParsedSentence, config: ExtractionConfig) -> list[EventRef]:
    """The root plus every token whose path to the root consists entirely of
    clause-embedding relations, sorted by position.

    Relation matching is exact against ``config.clause_relations``, so
    subtyped relations like acl:relcl must be listed as such.
    """
    root = sentence.root()
    selected: set[int] = {root.index}
    frontier = [root.index]
    while frontier:
        head = frontier.pop()
        for child in sentence.children(head):
            if child.deprel in config.clause_relations and child.index not in selected:
                selected.add(child.index)
                if not config.direct_only:
                    frontier.append(child.index)
    return [
        EventRef(token_index=tok.index - 1, surface=tok.form)
        for tok in sentence.tokens
        if tok.index in selected
    ]


def extract_sources(sentence: ParsedSentence, config: ExtractionConfig) -> list[SourceRef]:
    """Candidate sources for the sentence, Author first, then by position.

    LOOSE mode: tokens whose UPOS is in ``source_upos`` and whose head is not
    itself nominal (NOUN, PROPN or ADJ); root attachment qualifies. SIP mode:
    subjects (nsubj, including subtypes) of lexicon predicates.
    """
    picked: list[ParsedToken] = []
    if config.mode is ExtractionMode.LOOSE:
        for tok in sentence.tokens:
            if tok.upos not in config.source_upos:
                continue
            if tok.head != 0 and sentence.token(tok.head).upos in _NOMINAL_PARENT_UPOS:
                continue
            picked.append(tok)
    else:
        for tok in sentence.tokens:
            if _base_deprel(tok.deprel) != "nsubj" or tok.head == 0:
                continue
            if is_sip_token(sentence.token(tok.head), config.sip_lexicon):
                picked.append(tok)

    sources = [SourceRef.author()]
    sources.extend(
        SourceRef.mention(tok.index - 1, tok.form) for tok in sorted(picked, key=lambda t: t.index)
    )
    return sources


def extract_graph(sentence: ParsedSentence, config: ExtractionConfig) -> SentenceGraph:
    """Build the unlabeled cross-product graph for one sentence."""
    return build_graph(
        doc_id=sentence.doc_id,
        sent_id=sentence.sent_id,
        tokens=tuple(Token(tok.index - 1, tok.form) for tok in sentence.tokens),
        sources=extract_sources(sentence, config),
        events=extract_events(sentence, config),
    )
