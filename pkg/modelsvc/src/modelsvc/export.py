"""Batch export of model predictions into a tuple store.

Reads an existing store for its tuple structure (who says what about which
event), rescores every row with a model ensemble, and writes a new store
with the predicted label and distribution in place of the old ones. Head
fields are copied through untouched, rows stay in input order, and
distributions are rendered with the same micro-unit quantization the
toolkit's own writer uses: six-decimal values that sum to exactly 1.000000
with the argmax preserved through rounding.

The store format does not persist token lists, so the original corpus has
to ride along to rebuild each sentence's words.
"""

import json
import logging
from pathlib import Path
from typing import Sequence, Union

from modelsvc.data import (
    DataError,
    group_rows_by_sentence,
    iter_store_rows,
    read_corpus_forms,
)
from modelsvc.heads import LABELS
from modelsvc.infer import predict_probs
from modelsvc.train import Checkpoint

log = logging.getLogger(__name__)

_MICRO = 10**6


def _argmax(probs: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(probs)):
        if probs[i] > probs[best]:
            best = i
    return best


def format_probs(probs: Sequence[float], target: int) -> str:
    """Quantize to micro units summing to one, argmax pinned to ``target``."""
    units = [int(p * _MICRO + 0.5) for p in probs]
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
    for label, u in zip(LABELS, units):
        parts.append(f'"{label}": {u // _MICRO}.{u % _MICRO:06d}')
    return "{" + ", ".join(parts) + "}"


def _row_line(row: dict, result: Union[dict[str, float], str, None]) -> str:
    """Serialize one store row with the model's result spliced in."""
    if isinstance(result, dict):
        probs = [result[label] for label in LABELS]
        target = _argmax(probs)
        label: Union[str, None] = LABELS[target]
    else:
        probs = None
        target = 0
        label = None
    head = json.dumps(
        {
            "doc_id": row["doc_id"],
            "sent_id": row["sent_id"],
            "source": {
                "kind": row["source"]["kind"],
                "token": row["source"]["token"],
                "surface": row["source"]["surface"],
            },
            "event": {
                "token": row["event"]["token"],
                "surface": row["event"]["surface"],
            },
            "label": label,
        },
        ensure_ascii=False,
    )
    if probs is None:
        return head[:-1] + ', "probs": null}'
    return head[:-1] + ', "probs": ' + format_probs(probs, target) + "}"


def export_predictions(
    checkpoints: Sequence[Checkpoint],
    store_in: Union[str, Path],
    store_out: Union[str, Path],
    corpus: Union[str, Path],
) -> int:
    """Rescore a tuple store and write the predictions to ``store_out``.

    Returns the number of rows written. Rows whose source or event cannot
    be scored (index out of range for the corpus sentence, or pushed past
    the encoder's position limit) are written with null label and probs and
    logged as warnings. Sentences are scored one graph at a time, in chunks
    of the checkpoint config's batch size, which is the same slicing the
    prediction service applies to each request batch.
    """
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    for ck in checkpoints:
        if ck.kind != "stance":
            raise ValueError(f"expected a stance checkpoint, got kind {ck.kind!r}")
    config = checkpoints[0].config
    models = [ck.build_model().eval() for ck in checkpoints]
    forms = read_corpus_forms(corpus)

    written = 0
    with open(store_out, "w", encoding="utf-8") as out:
        for (doc_id, sent_id), rows in group_rows_by_sentence(iter_store_rows(store_in)):
            words = forms.get((doc_id, sent_id))
            if words is None:
                raise DataError(
                    f"sentence {doc_id}/{sent_id} from the store is not in the corpus"
                )
            requests = []
            for row in rows:
                source_token = row["source"]["token"]
                requests.append(
                    {
                        "tokens": words,
                        "source_index": source_token,
                        "event_index": row["event"]["token"],
                    }
                )
            results = predict_probs(models, requests, config.batch_size)
            for row, result in zip(rows, results):
                if isinstance(result, str):
                    log.warning(
                        "skipping %s/%s source=%r event=%r: %s",
                        doc_id,
                        sent_id,
                        row["source"]["surface"],
                        row["event"]["surface"],
                        result,
                    )
                    out.write(_row_line(row, None) + "\n")
                else:
                    out.write(_row_line(row, result) + "\n")
                written += 1
    return written
