"""Regenerate the recorded service fixture under tests/fixtures/golden_service/.

The fixture pins a seeded checkpoint, one /predict request body, and the
response the service gave when the fixture was made. The test replays the
request against the committed checkpoint and compares probabilities within
1e-4, so it survives library-version drift in low-order float digits; if a
torch upgrade moves numerics past that tolerance, rerun this script and
commit the refreshed response alongside the version bump.

    python3 scripts/make_golden.py
"""

import json
from pathlib import Path

import torch
from fastapi.testclient import TestClient

from modelsvc.config import StanceModelConfig
from modelsvc.heads import StanceClassifier
from modelsvc.service import create_app
from modelsvc.train import Checkpoint

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "golden_service"

REQUEST_BODY = {
    "requests": [
        {
            "tokens": ["Mercer", "said", "the", "board", "approved", "the", "merger"],
            "source_index": 0,
            "event_index": 4,
        },
        {
            "tokens": ["Mercer", "said", "the", "board", "approved", "the", "merger"],
            "source_index": None,
            "event_index": 1,
        },
        {
            "tokens": ["Rain", "delayed", "the", "vote"],
            "source_index": None,
            "event_index": 99,
        },
    ]
}


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    config = StanceModelConfig(seed=777, restarts=1)
    torch.manual_seed(777)
    model = StanceClassifier(config.encoder_spec)
    checkpoint = Checkpoint("stance", None, config, model.state_dict())
    checkpoint.save(FIXTURE_DIR / "checkpoint")

    app = create_app([checkpoint])
    with TestClient(app) as client:
        reply = client.post("/predict", json=REQUEST_BODY)
    reply.raise_for_status()

    (FIXTURE_DIR / "request.json").write_text(
        json.dumps(REQUEST_BODY, indent=2) + "\n", encoding="utf-8"
    )
    (FIXTURE_DIR / "response.json").write_text(
        json.dumps(reply.json(), indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {FIXTURE_DIR}")


if __name__ == "__main__":
    main()
