"""Data plumbing: corpus tokens, tuple-store rows, training examples.

This package talks to the graph toolkit only through its file formats.
Tuple stores are JSONL with one stance tuple per line; they carry token
indices but not the tokens themselves, so sentence text always comes from
the CoNLL-U corpus on the side, joined by (doc_id, sent_id).

A request with ``source_index = null`` means the text's author. The model
handles that by prefixing the sentence with "Author: " and using the prefix
token as the source word, so every request reduces to an indexed pair.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

from modelsvc.heads import LABELS

AUTHOR_PREFIX = "Author:"

LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}


class DataError(ValueError):
    pass


# ---------------------------------------------------------------------------
# CoNLL-U sentence forms
# ---------------------------------------------------------------------------

def read_corpus_forms(path: str | Path) -> dict[tuple[str, str], list[str]]:
    """Map (doc_id, sent_id) to the sentence's word forms.

    Reads one file or every ``*.conllu`` under a directory. Only the FORM
    column is kept. Ids follow the usual comment conventions, falling back
    to the file stem and a running ordinal, which matches how the graph
    toolkit names sentences it extracts.
    """
    path = Path(path)
    files = sorted(path.glob("*.conllu")) if path.is_dir() else [path]
    if not files:
        raise DataError(f"no .conllu files under {path}")
    forms: dict[tuple[str, str], list[str]] = {}
    for file in files:
        doc_id = file.stem
        sent_id: Optional[str] = None
        ordinal = 0
        current: list[str] = []

        def flush() -> None:
            nonlocal ordinal, current, sent_id
            if current:
                ordinal += 1
                forms[(doc_id, sent_id or f"s{ordinal}")] = current
            current = []
            sent_id = None

        with open(file, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.rstrip("\n")
                if not line.strip():
                    flush()
                    continue
                if line.startswith("#"):
                    key, _, value = line[1:].partition("=")
                    key = key.strip()
                    if key == "newdoc id":
                        doc_id = value.strip()
                    elif key == "sent_id":
                        sent_id = value.strip()
                    continue
                first, _, rest = line.partition("\t")
                if "-" in first or "." in first:  # ranges and empty nodes
                    continue
                current.append(rest.split("\t", 1)[0])
        flush()
    return forms


# ---------------------------------------------------------------------------
# tuple store rows
# ---------------------------------------------------------------------------

def iter_store_rows(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: bad JSON: {exc}") from None


def group_rows_by_sentence(rows) -> list[tuple[tuple[str, str], list[dict]]]:
    groups: list[tuple[tuple[str, str], list[dict]]] = []
    for row in rows:
        key = (row["doc_id"], row["sent_id"])
        if groups and groups[-1][0] == key:
            groups[-1][1].append(row)
        else:
            groups.append((key, [row]))
    return groups


# ---------------------------------------------------------------------------
# author resolution and training examples
# ---------------------------------------------------------------------------

def resolve_author(
    words: list[str], source_index: Optional[int], event_index: int
) -> tuple[list[str], int, int]:
    """Reduce an author request to an indexed pair by prefixing the sentence."""
    if source_index is None:
        return [AUTHOR_PREFIX, *words], 0, event_index + 1
    return words, source_index, event_index


@dataclass(frozen=True)
class StanceExample:
    words: tuple[str, ...]
    source_index: int  # already author-resolved
    event_index: int
    label: int


@dataclass(frozen=True)
class TaggingExample:
    words: tuple[str, ...]
    labels: tuple  # one 0/1 per word; the joint model packs (source, event) pairs


def build_stance_examples(
    store_path: str | Path, forms: dict[tuple[str, str], list[str]]
) -> list[StanceExample]:
    """Labeled training pairs from a tuple store plus its corpus.

    Raises on missing sentences, unlabeled tuples, and out-of-range indices;
    a training set with holes is a setup bug, not something to paper over.
    """
    examples = []
    for row in iter_store_rows(store_path):
        key = (row["doc_id"], row["sent_id"])
        if key not in forms:
            raise DataError(f"sentence {key} is not in the corpus")
        words = forms[key]
        label_text = row.get("label")
        if label_text is None:
            raise DataError(f"unlabeled tuple in {key}; training needs labels")
        if label_text not in LABEL_INDEX:
            raise DataError(f"unknown label {label_text!r} in {key}")
        source_index = row["source"]["token"]
        event_index = row["event"]["token"]
        if event_index >= len(words) or (
            source_index is not None and source_index >= len(words)
        ):
            raise DataError(
                f"tuple index out of range in {key}: "
                f"source={source_index} event={event_index} len={len(words)}"
            )
        resolved_words, s, e = resolve_author(words, source_index, event_index)
        examples.append(
            StanceExample(tuple(resolved_words), s, e, LABEL_INDEX[label_text])
        )
    if not examples:
        raise DataError(f"no tuples in {store_path}")
    return examples


def build_tagging_examples(
    store_path: str | Path, forms: dict[tuple[str, str], list[str]], task: str
) -> list[TaggingExample]:
    """Per-word binary examples from a tuple store's candidate indices."""
    if task not in ("source", "event"):
        raise DataError(f"unknown tagging task {task!r}")
    positives: dict[tuple[str, str], set[int]] = {}
    for row in iter_store_rows(store_path):
        key = (row["doc_id"], row["sent_id"])
        if key not in forms:
            raise DataError(f"sentence {key} is not in the corpus")
        marked = positives.setdefault(key, set())
        if task == "event":
            marked.add(row["event"]["token"])
        elif row["source"]["token"] is not None:
            marked.add(row["source"]["token"])
    examples = []
    for key, marked in positives.items():
        words = forms[key]
        if marked and max(marked) >= len(words):
            raise DataError(f"tuple index out of range in {key}")
        labels = tuple(1 if i in marked else 0 for i in range(len(words)))
        examples.append(TaggingExample(tuple(words), labels))
    if not examples:
        raise DataError(f"no sentences in {store_path}")
    return examples


def build_joint_examples(
    store_path: str | Path, forms: dict[tuple[str, str], list[str]]
) -> list[TaggingExample]:
    """Examples for the two-headed comparison tagger: (source, event) pairs."""
    by_task = [
        build_tagging_examples(store_path, forms, task) for task in ("source", "event")
    ]
    examples = []
    for src, evt in zip(*by_task):
        pairs = tuple(zip(src.labels, evt.labels))
        examples.append(TaggingExample(src.words, pairs))
    return examples
