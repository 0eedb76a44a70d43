"""HTTP prediction service.

Speaks the tuple-prediction wire protocol: POST ``/predict`` with a JSON
body ``{"requests": [{"tokens": [...], "source_index": int|null,
"event_index": int}, ...]}`` and get back ``{"responses": [...]}`` with one
entry per request, each either ``{"probs": {label: p}}`` or
``{"error": "..."}``. A body that is not valid JSON, or not shaped like a
request envelope, gets a 400 with ``{"error": "..."}``.

Request bodies are parsed by hand instead of through the framework's
validation layer; the framework would answer malformed input with its own
422 envelope, and the protocol pins 400.
"""

import json
import threading
from typing import Optional, Sequence

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from modelsvc.infer import predict_probs, tag_tokens, validate_request
from modelsvc.train import Checkpoint


def _bad(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)


def create_app(
    stance_checkpoints: Sequence[Checkpoint],
    source_tagger: Optional[Checkpoint] = None,
    event_tagger: Optional[Checkpoint] = None,
) -> FastAPI:
    """Build the app around already-loaded checkpoints.

    All stance checkpoints must share a config; their distributions are
    averaged per request. The optional taggers power ``/extract``.
    """
    if not stance_checkpoints:
        raise ValueError("need at least one stance checkpoint")
    for ck in stance_checkpoints:
        if ck.kind != "stance":
            raise ValueError(f"expected a stance checkpoint, got kind {ck.kind!r}")
    for ck in (source_tagger, event_tagger):
        if ck is not None and ck.kind != "token":
            raise ValueError(f"expected a token checkpoint, got kind {ck.kind!r}")
    config = stance_checkpoints[0].config
    models = [ck.build_model().eval() for ck in stance_checkpoints]
    source_model = source_tagger.build_model().eval() if source_tagger else None
    event_model = event_tagger.build_model().eval() if event_tagger else None
    lock = threading.Lock()

    app = FastAPI(title="stance prediction service", docs_url=None, redoc_url=None)

    @app.get("/healthz")
    def healthz() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.post("/predict")
    async def predict(request: Request) -> JSONResponse:
        raw = await request.body()
        try:
            body = json.loads(raw)
        except (ValueError, UnicodeDecodeError):
            return _bad("request body is not valid JSON")
        if not isinstance(body, dict) or not isinstance(body.get("requests"), list):
            return _bad('request body must be {"requests": [...]}')
        items = body["requests"]
        schema_errors = {
            i: err
            for i, item in enumerate(items)
            if (err := validate_request(item)) is not None
        }
        runnable = [item for i, item in enumerate(items) if i not in schema_errors]
        with lock:
            scored = predict_probs(models, runnable, config.batch_size)
        responses: list[dict] = []
        scored_iter = iter(scored)
        for i in range(len(items)):
            if i in schema_errors:
                responses.append({"error": schema_errors[i]})
                continue
            result = next(scored_iter)
            if isinstance(result, str):
                responses.append({"error": result})
            else:
                responses.append({"probs": result})
        return JSONResponse({"responses": responses})

    @app.post("/extract")
    async def extract(request: Request) -> JSONResponse:
        if source_model is None or event_model is None:
            return _bad("no tagger checkpoints are loaded")
        raw = await request.body()
        try:
            body = json.loads(raw)
        except (ValueError, UnicodeDecodeError):
            return _bad("request body is not valid JSON")
        tokens = body.get("tokens") if isinstance(body, dict) else None
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            return _bad("tokens must be a list of strings")
        if not tokens:
            return _bad("tokens must not be empty")
        with lock:
            sources = tag_tokens(source_model, tokens)
            events = tag_tokens(event_model, tokens)
        return JSONResponse({"source_indices": sources, "event_indices": events})

    return app
