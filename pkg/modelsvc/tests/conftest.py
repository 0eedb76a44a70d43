"""Shared fixtures: a small synthetic corpus, tuple stores over it, and
deterministic seeded checkpoints.

Checkpoints here are seeded random initializations, not trained models;
service and export behavior is about plumbing, and random weights exercise
it just as well while keeping the suite fast. Training quality has its own
tests.
"""

import json
from pathlib import Path

import pytest
import torch

from modelsvc.config import StanceModelConfig
from modelsvc.heads import StanceClassifier, TokenTagger
from modelsvc.train import Checkpoint

DOCS = {
    "docA": [
        ["Mercer", "said", "the", "board", "approved", "the", "merger"],
        ["Nobody", "doubted", "the", "figures", "were", "audited"],
        ["The", "committee", "denied", "the", "request"],
        ["Walsh", "thinks", "the", "audit", "missed", "several", "accounts"],
        ["Rain", "delayed", "the", "vote"],
    ],
    "docB": [
        ["Okafor", "claimed", "the", "ministry", "approved", "funding", "quietly"],
        ["The", "senator", "wondered", "whether", "the", "tally", "held"],
        ["Reporters", "watched", "the", "count", "finish"],
        ["Vance", "suspected", "the", "ledger", "hid", "losses"],
    ],
}

# (source_token | None for the author, event_tokens) per sentence, in
# source-major order with the author first; the store writer below expands
# the cross product row by row.
SENTENCE_PLANS = {
    ("docA", "s1"): [(None, [1, 4]), (0, [1, 4])],
    ("docA", "s2"): [(None, [1, 5]), (0, [1, 5])],
    ("docA", "s3"): [(None, [2])],
    # six events and three sources: 18 tuples, more than one model batch
    ("docA", "s4"): [(None, [1, 4, 0, 2, 5, 6]), (0, [1, 4, 0, 2, 5, 6]), (3, [1, 4, 0, 2, 5, 6])],
    ("docA", "s5"): [(None, [1])],
    ("docB", "s1"): [(None, [1, 4]), (0, [1, 4])],
    ("docB", "s2"): [(None, [2, 6]), (1, [2, 6])],
    ("docB", "s3"): [(None, [1])],
    ("docB", "s4"): [(None, [1, 4]), (0, [1, 4])],
}

LABEL_CYCLE = ["CT+", "CT-", "PR+", "PS+", "Uu", "NE"]


def write_corpus(directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    for doc_id, sentences in DOCS.items():
        lines = [f"# newdoc id = {doc_id}"]
        for i, words in enumerate(sentences, start=1):
            lines.append(f"# sent_id = s{i}")
            for t, form in enumerate(words, start=1):
                head = 0 if t == 1 else 1
                lines.append(
                    f"{t}\t{form}\t{form.lower()}\tNOUN\t_\t_\t{head}\tdep\t_\t_"
                )
            lines.append("")
        (directory / f"{doc_id}.conllu").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
    return directory


def store_rows(labeled: bool):
    n = 0
    for (doc_id, sent_id), plan in SENTENCE_PLANS.items():
        words = DOCS[doc_id][int(sent_id[1:]) - 1]
        for source_token, event_tokens in plan:
            for event_token in event_tokens:
                if source_token is None:
                    source = {"kind": "author", "token": None, "surface": "Author"}
                else:
                    source = {
                        "kind": "mention",
                        "token": source_token,
                        "surface": words[source_token],
                    }
                row = {
                    "doc_id": doc_id,
                    "sent_id": sent_id,
                    "source": source,
                    "event": {"token": event_token, "surface": words[event_token]},
                    "label": LABEL_CYCLE[n % 6] if labeled else None,
                    "probs": None,
                }
                n += 1
                yield row


def write_store(path: Path, labeled: bool) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for row in store_rows(labeled):
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    return write_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def labeled_store(tmp_path_factory) -> Path:
    return write_store(tmp_path_factory.mktemp("stores") / "labeled.jsonl", True)


@pytest.fixture(scope="session")
def unlabeled_store(tmp_path_factory) -> Path:
    return write_store(tmp_path_factory.mktemp("stores") / "unlabeled.jsonl", False)


def seeded_stance_checkpoint(seed: int) -> Checkpoint:
    config = StanceModelConfig(seed=seed, restarts=1)
    torch.manual_seed(seed)
    model = StanceClassifier(config.encoder_spec)
    return Checkpoint("stance", None, config, model.state_dict())


def seeded_tagger_checkpoint(task: str, seed: int) -> Checkpoint:
    config = StanceModelConfig(seed=seed, restarts=1)
    torch.manual_seed(seed)
    model = TokenTagger(config.encoder_spec)
    return Checkpoint("token", task, config, model.state_dict())


@pytest.fixture(scope="session")
def stance_checkpoints() -> list[Checkpoint]:
    return [seeded_stance_checkpoint(seed) for seed in (11, 12, 13)]


@pytest.fixture(scope="session")
def tagger_checkpoints() -> dict[str, Checkpoint]:
    return {
        "source": seeded_tagger_checkpoint("source", 21),
        "event": seeded_tagger_checkpoint("event", 22),
    }
