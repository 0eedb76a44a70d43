"""Shared inference path for the server and the exporter.

Both consumers funnel through :func:`predict_probs` with the same chunking
policy, so a tuple scored over HTTP and the same tuple scored during export
see bit-identical arithmetic: same batch composition, same padding, same
reduction order. Restart ensembling is the plain mean of the per-model
softmax distributions.
"""

from typing import Optional, Sequence, Union

import torch

from modelsvc.data import resolve_author
from modelsvc.heads import LABELS, StanceClassifier, TokenTagger


def validate_request(item: object) -> Optional[str]:
    """Schema check for one prediction request; None means well-formed."""
    if not isinstance(item, dict):
        return "request must be an object"
    tokens = item.get("tokens")
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        return "tokens must be a list of strings"
    if not tokens:
        return "tokens must not be empty"
    source = item.get("source_index")
    if source is not None and not isinstance(source, int):
        return "source_index must be an integer or null"
    event = item.get("event_index")
    if not isinstance(event, int):
        return "event_index must be an integer"
    return None


def semantic_error(item: dict) -> Optional[str]:
    tokens = item["tokens"]
    source = item.get("source_index")
    event = item["event_index"]
    if not (0 <= event < len(tokens)):
        return f"event_index {event} out of range for {len(tokens)} tokens"
    if source is not None and not (0 <= source < len(tokens)):
        return f"source_index {source} out of range for {len(tokens)} tokens"
    return None


Result = Union[dict[str, float], str]  # six-key distribution or error text


def predict_probs(
    models: Sequence[StanceClassifier], requests: Sequence[dict], batch_size: int
) -> list[Result]:
    """Score requests, averaging distributions over the given models.

    Returns one entry per request, in order: a label-to-probability map, or
    an error string for requests whose indices are unusable (out of range,
    or pushed past the encoder's position limit). Work is done in chunks of
    ``batch_size``; errors are resolved first so they do not disturb the
    chunk layout of their neighbors... only valid requests are batched.
    """
    if not models:
        raise ValueError("need at least one model")
    results: list[Optional[Result]] = [None] * len(requests)
    runnable: list[tuple[int, list[str], int, int]] = []
    for i, item in enumerate(requests):
        problem = semantic_error(item)
        if problem is not None:
            results[i] = problem
            continue
        words, s, e = resolve_author(
            list(item["tokens"]), item.get("source_index"), item["event_index"]
        )
        runnable.append((i, words, s, e))

    with torch.no_grad():
        for start in range(0, len(runnable), batch_size):
            chunk = runnable[start:start + batch_size]
            words = [c[1] for c in chunk]
            sources = [c[2] for c in chunk]
            events = [c[3] for c in chunk]
            # accumulate in double so averaging k copies of one model is
            # exact to the quantization the store writer applies later
            summed = torch.zeros(len(chunk), len(LABELS), dtype=torch.float64)
            ok_all = torch.ones(len(chunk), dtype=torch.bool)
            for model in models:
                logits, ok = model(words, sources, events)
                summed += torch.softmax(logits, dim=1).double()
                ok_all &= ok
            mean = summed / len(models)
            for row, (i, _, _, _) in enumerate(chunk):
                if not bool(ok_all[row]):
                    results[i] = "source or event token fell outside the position limit"
                else:
                    results[i] = {
                        name: float(mean[row, j]) for j, name in enumerate(LABELS)
                    }
    return results  # type: ignore[return-value]


def tag_tokens(model: TokenTagger, tokens: list[str]) -> list[int]:
    """Indices of words the binary tagger marks positive."""
    with torch.no_grad():
        logits, mask = model([tokens])
        positive = logits.argmax(dim=2)[0]
        return [i for i in range(len(tokens)) if bool(mask[0, i]) and int(positive[i]) == 1]
