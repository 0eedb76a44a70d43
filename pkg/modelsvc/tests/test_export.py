"""Prediction-file export: quantization, ensembling identities, and
readability by the toolkit that consumes the files."""

import json
import subprocess
import sys

import pytest

from modelsvc.data import group_rows_by_sentence, iter_store_rows, read_corpus_forms
from modelsvc.export import export_predictions, format_probs
from modelsvc.heads import LABELS
from modelsvc.infer import predict_probs

from conftest import seeded_stance_checkpoint


def test_format_probs_sums_to_exactly_one_in_decimal():
    for probs, target in [
        ([0.2, 0.2, 0.2, 0.2, 0.1, 0.1], 0),
        ([1 / 3, 1 / 3, 1 / 3, 0.0, 0.0, 0.0], 1),
        ([0.9999999, 0.0000001, 0.0, 0.0, 0.0, 0.0], 0),
    ]:
        rendered = json.loads(format_probs(probs, target))
        units = [round(v * 10**6) for v in rendered.values()]
        assert sum(units) == 10**6
        values = [rendered[label] for label in LABELS]
        assert values.index(max(values)) == target


def test_format_probs_preserves_argmax_through_rounding():
    # both slots round to 0.500000 and the decimal tie would fall to the
    # earlier label; the nudge must hand the winning unit back to CT-
    probs = [0.4999996, 0.5000004, 0.0, 0.0, 0.0, 0.0]
    rendered = json.loads(format_probs(probs, 1))
    assert rendered["CT-"] > rendered["CT+"]
    units = [round(v * 10**6) for v in rendered.values()]
    assert sum(units) == 10**6


def test_export_single_checkpoint_matches_raw_model(
    tmp_path, corpus_dir, unlabeled_store, stance_checkpoints
):
    out = tmp_path / "pred.jsonl"
    ck = stance_checkpoints[0]
    n = export_predictions([ck], unlabeled_store, out, corpus_dir)
    input_rows = list(iter_store_rows(unlabeled_store))
    assert n == len(input_rows)

    written = list(iter_store_rows(out))
    assert len(written) == n

    model = ck.build_model()
    forms = read_corpus_forms(corpus_dir)
    cursor = 0
    for (doc_id, sent_id), rows in group_rows_by_sentence(input_rows):
        words = forms[(doc_id, sent_id)]
        requests = [
            {
                "tokens": words,
                "source_index": row["source"]["token"],
                "event_index": row["event"]["token"],
            }
            for row in rows
        ]
        results = predict_probs([model], requests, ck.config.batch_size)
        for row, result in zip(rows, results):
            got = written[cursor]
            cursor += 1
            assert got["doc_id"] == row["doc_id"]
            assert got["sent_id"] == row["sent_id"]
            assert got["source"] == row["source"]
            assert got["event"] == row["event"]
            assert isinstance(result, dict)
            raw = [result[label] for label in LABELS]
            target = raw.index(max(raw))
            assert got["label"] == LABELS[target]
            assert got["probs"] == json.loads(format_probs(raw, target))
    assert cursor == n


def test_export_five_identical_checkpoints_matches_single(
    tmp_path, corpus_dir, unlabeled_store
):
    ck = seeded_stance_checkpoint(31)
    single = tmp_path / "single.jsonl"
    five = tmp_path / "five.jsonl"
    export_predictions([ck], unlabeled_store, single, corpus_dir)
    export_predictions([ck] * 5, unlabeled_store, five, corpus_dir)
    assert single.read_bytes() == five.read_bytes()


def test_export_is_deterministic(tmp_path, corpus_dir, unlabeled_store, stance_checkpoints):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    export_predictions(stance_checkpoints, unlabeled_store, a, corpus_dir)
    export_predictions(stance_checkpoints, unlabeled_store, b, corpus_dir)
    assert a.read_bytes() == b.read_bytes()


def test_export_round_trip_is_readable_downstream(
    tmp_path, corpus_dir, unlabeled_store, stance_checkpoints
):
    """The produced file must pass the consuming toolkit's own parser and
    metrics path, driven through its CLI so only public surfaces touch."""
    out = tmp_path / "pred.jsonl"
    export_predictions(stance_checkpoints, unlabeled_store, out, corpus_dir)
    result = subprocess.run(
        [
            sys.executable,
            "-m",
            "stancegraph.cli",
            "evaluate",
            "--gold",
            str(out),
            "--pred",
            str(out),
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    report = json.loads(result.stdout)
    assert report["n"] == sum(1 for _ in iter_store_rows(out))
    # a label the models never choose scores zero and caps the macro, but
    # self-agreement must be perfect on every class that actually occurs
    scored = [m for m in report["per_class"].values() if m["support"] > 0]
    assert scored
    assert all(m["f1"] == 100.0 for m in scored)


def test_export_writes_null_rows_for_unscorable_tuples(
    tmp_path, corpus_dir, stance_checkpoints, caplog
):
    rows = [
        {
            "doc_id": "docA",
            "sent_id": "s3",
            "source": {"kind": "author", "token": None, "surface": "Author"},
            "event": {"token": 2, "surface": "denied"},
            "label": None,
            "probs": None,
        },
        {
            "doc_id": "docA",
            "sent_id": "s3",
            "source": {"kind": "mention", "token": 99, "surface": "ghost"},
            "event": {"token": 2, "surface": "denied"},
            "label": None,
            "probs": None,
        },
    ]
    store = tmp_path / "store.jsonl"
    store.write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8"
    )
    out = tmp_path / "pred.jsonl"
    with caplog.at_level("WARNING"):
        n = export_predictions(stance_checkpoints[:1], store, out, corpus_dir)
    assert n == 2
    written = list(iter_store_rows(out))
    assert written[0]["label"] in LABELS
    assert written[1]["label"] is None
    assert written[1]["probs"] is None
    assert any("out of range" in r.getMessage() for r in caplog.records)


def test_export_rejects_mismatched_corpus(tmp_path, unlabeled_store, stance_checkpoints):
    empty = tmp_path / "empty"
    empty.mkdir()
    (empty / "none.conllu").write_text("", encoding="utf-8")
    with pytest.raises(Exception, match="not in the corpus"):
        export_predictions(
            stance_checkpoints[:1], unlabeled_store, tmp_path / "out.jsonl", empty
        )


def test_export_rejects_non_stance_checkpoints(tmp_path, corpus_dir, unlabeled_store):
    from conftest import seeded_tagger_checkpoint

    with pytest.raises(ValueError, match="stance checkpoint"):
        export_predictions(
            [seeded_tagger_checkpoint("source", 5)],
            unlabeled_store,
            tmp_path / "out.jsonl",
            corpus_dir,
        )
