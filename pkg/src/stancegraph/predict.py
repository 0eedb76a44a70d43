"""Stance predictors over sentence graphs.

Three interchangeable implementations sit behind one contract: a
dependency-pattern baseline, a lookup over a prediction file, and an HTTP
client for a model service. All of them attach a full probability
distribution to every tuple; hard labels are always the argmax.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import requests

from .core import (
    LABEL_ORDER,
    SentenceGraph,
    SourceKind,
    SourceRef,
    EventRef,
    StanceDistribution,
    StanceLabel,
    StanceTuple,
)
from .extract import DEFAULT_SIP_LEXICON, is_sip_token
from .ingest import ParsedSentence, TupleRecord, iter_tuple_records

log = logging.getLogger(__name__)

__all__ = [
    "PredictorKind",
    "PredictorSpec",
    "parse_predictor_spec",
    "HedgeLexicon",
    "PredictError",
    "MissingPredictionError",
    "RemotePredictError",
    "baseline_rules",
    "BaselinePredictor",
    "FilePredictor",
    "RemotePredictor",
    "EnsemblePredictor",
    "build_predictor",
    "predict_graph",
    "ensemble",
    "remote_predict",
]

# Probability put on the chosen label by the rule baseline; the remainder is
# spread evenly so downstream expectation analytics stay finite.
BASE_CONFIDENCE = 0.9


class PredictorKind(Enum):
    BASELINE = "baseline"
    FILE = "file"
    REMOTE = "remote"


@dataclass(frozen=True)
class PredictorSpec:
    kind: PredictorKind
    target: str = ""
    restarts: int = 5

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


def parse_predictor_spec(text: str, restarts: int = 5) -> PredictorSpec:
    """Parse a --predictor argument: baseline, file:PATH or remote:URL."""
    if text == "baseline":
        return PredictorSpec(PredictorKind.BASELINE, restarts=restarts)
    if text.startswith("file:"):
        return PredictorSpec(PredictorKind.FILE, target=text[5:], restarts=restarts)
    if text.startswith("remote:"):
        return PredictorSpec(PredictorKind.REMOTE, target=text[7:], restarts=restarts)
    raise ValueError(f"bad predictor {text!r}: expected baseline, file:PATH or remote:URL")


@dataclass(frozen=True)
class HedgeLexicon:
    npi: frozenset[str] = frozenset({"no", "not", "n't", "never", "nobody", "none"})
    hedge_pr: frozenset[str] = frozenset({"probably", "likely", "should"})
    hedge_ps: frozenset[str] = frozenset({"may", "might", "could", "possibly", "perhaps"})
    sip: frozenset[str] = DEFAULT_SIP_LEXICON


class PredictError(ValueError):
    """Prediction could not be produced."""


class MissingPredictionError(PredictError):
    def __init__(self, pairs: Sequence[tuple]) -> None:
        listing = "; ".join(str(p) for p in pairs[:10])
        more = f" (+{len(pairs) - 10} more)" if len(pairs) > 10 else ""
        super().__init__(f"prediction file is missing {len(pairs)} pair(s): {listing}{more}")
        self.pairs = list(pairs)


class RemotePredictError(PredictError):
    def __init__(self, message: str, item_errors: Optional[list] = None) -> None:
        super().__init__(message)
        self.item_errors = item_errors or []


def _smeared(label: StanceLabel) -> StanceDistribution:
    rest = (1.0 - BASE_CONFIDENCE) / (len(LABEL_ORDER) - 1)
    return StanceDistribution(
        tuple(BASE_CONFIDENCE if l is label else rest for l in LABEL_ORDER)
    )


class _SentenceRules:
    """Per-sentence state for the rule baseline.

    Scope convention: a mention source only holds stances toward events inside
    the clausal complement (ccomp/xcomp subtree) of the source-introducing
    predicate it is subject of. The predicate token itself is out of scope;
    the author asserts that the saying happened, not its subject.
    """

    def __init__(self, parse: ParsedSentence, lexicon: HedgeLexicon) -> None:
        self.parse = parse
        self.lexicon = lexicon
        # complement cover: token index -> indices of the SIP predicates whose
        # clausal complement subtree contains it
        self.complement_of: dict[int, set[int]] = {}
        for tok in parse.tokens:
            if not is_sip_token(tok, lexicon.sip):
                continue
            for child in parse.children(tok.index):
                if child.deprel.split(":", 1)[0] in ("ccomp", "xcomp"):
                    for member in parse.subtree(child.index):
                        self.complement_of.setdefault(member.index, set()).add(tok.index)

    def _scoped(self, source: SourceRef, event_index: int) -> bool:
        if source.kind is SourceKind.AUTHOR:
            return True
        tok = self.parse.token(source.token_index + 1)  # type: ignore[operator]
        if tok.deprel.split(":", 1)[0] != "nsubj" or tok.head == 0:
            return False
        head = self.parse.token(tok.head)
        if not is_sip_token(head, self.lexicon.sip):
            return False
        return head.index in self.complement_of.get(event_index, set())

    def _negated(self, event_index: int) -> bool:
        chain = [event_index]
        for child in self.parse.children(event_index):
            if child.deprel.split(":", 1)[0] in ("aux", "cop"):
                chain.append(child.index)
        for idx in chain:
            for child in self.parse.children(idx):
                if child.form.casefold() in self.lexicon.npi:
                    return True
        return False

    def _hedge(self, event_index: int) -> Optional[StanceLabel]:
        forms = {c.form.casefold() for c in self.parse.children(event_index)}
        if forms & self.lexicon.hedge_ps:
            return StanceLabel.PS_POS
        if forms & self.lexicon.hedge_pr:
            return StanceLabel.PR_POS
        return None

    def label(self, source: SourceRef, event: EventRef) -> StanceLabel:
        event_index = event.token_index + 1
        if not self._scoped(source, event_index):
            return StanceLabel.NE
        if self._negated(event_index):
            return StanceLabel.CT_NEG
        hedge = self._hedge(event_index)
        if hedge is not None:
            return hedge
        if source.kind is SourceKind.AUTHOR and event_index in self.complement_of:
            return StanceLabel.UU
        return StanceLabel.CT_POS


def baseline_rules(
    pair: tuple[SourceRef, EventRef],
    parse: ParsedSentence,
    lexicon: Optional[HedgeLexicon] = None,
) -> StanceLabel:
    """Label one (source, event) pair by the first matching baseline rule."""
    source, event = pair
    return _SentenceRules(parse, lexicon or HedgeLexicon()).label(source, event)


def _relabel(graph: SentenceGraph, dists: Sequence[StanceDistribution]) -> SentenceGraph:
    tuples = tuple(
        StanceTuple(source=t.source, event=t.event, label=d.argmax(), dist=d)
        for t, d in zip(graph.tuples, dists)
    )
    return replace(graph, tuples=tuples)


class BaselinePredictor:
    """Deterministic dependency-pattern rules."""

    def __init__(self, lexicon: Optional[HedgeLexicon] = None) -> None:
        self.lexicon = lexicon or HedgeLexicon()

    def predict_graph(self, graph: SentenceGraph, parse: Optional[ParsedSentence]) -> SentenceGraph:
        if parse is None:
            raise PredictError("the baseline predictor needs the sentence parse")
        rules = _SentenceRules(parse, self.lexicon)
        dists = [_smeared(rules.label(t.source, t.event)) for t in graph.tuples]
        return _relabel(graph, dists)


class FilePredictor:
    """Lookup over a labeled tuple store, keyed by sentence and token indices."""

    def __init__(self, path: str | Path) -> None:
        self.path = str(path)
        self.index: dict[tuple, TupleRecord] = {}
        for rec in iter_tuple_records(path):
            self.index[rec.pair_key] = rec

    def predict_graph(self, graph: SentenceGraph, parse: Optional[ParsedSentence]) -> SentenceGraph:
        dists = []
        missing = []
        for t in graph.tuples:
            key = (
                graph.doc_id,
                graph.sent_id,
                t.source.kind.value,
                t.source.token_index,
                t.event.token_index,
            )
            rec = self.index.get(key)
            if rec is None:
                missing.append(key)
                continue
            if rec.dist is not None:
                dists.append(rec.dist)
            elif rec.label is not None:
                dists.append(StanceDistribution.point_mass(rec.label))
            else:
                missing.append(key)
        if missing:
            raise MissingPredictionError(missing)
        return _relabel(graph, dists)


def _request_payload(graph: SentenceGraph) -> list[dict]:
    tokens = [tok.form for tok in graph.tokens]
    payload = []
    for t in graph.tuples:
        payload.append(
            {
                "tokens": tokens,
                "source_index": t.source.token_index,
                "event_index": t.event.token_index,
            }
        )
    return payload


def remote_predict(
    endpoint: str,
    batch: list[dict],
    retries: int = 3,
    session: Optional[requests.Session] = None,
    cache_dir: Optional[str] = None,
) -> list[StanceDistribution]:
    """POST a batch of prediction requests and return distributions in order.

    ``endpoint`` may be the service base URL or the full /predict route. When
    ``cache_dir`` is set, responses are cached on disk keyed by the request
    body hash, so repeated runs skip the network.
    """
    if not batch:
        return []
    url = endpoint.rstrip("/")
    if not url.endswith("/predict"):
        url += "/predict"
    body = json.dumps({"requests": batch}, ensure_ascii=False, sort_keys=True)

    cache_path = None
    if cache_dir:
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        cache_path = Path(cache_dir) / f"{digest}.json"
        if cache_path.exists():
            responses = json.loads(cache_path.read_text(encoding="utf-8"))
            return _parse_responses(responses, len(batch))

    http = session or requests
    last_exc: Optional[Exception] = None
    for attempt in range(retries):
        try:
            resp = http.post(url, data=body.encode("utf-8"),
                             headers={"Content-Type": "application/json"}, timeout=30)
            break
        except (requests.ConnectionError, requests.Timeout) as exc:
            last_exc = exc
            if attempt + 1 < retries:
                time.sleep(0.2 * (attempt + 1))
    else:
        raise RemotePredictError(f"endpoint {url} unreachable after {retries} attempts: {last_exc}")

    if resp.status_code != 200:
        raise RemotePredictError(f"endpoint {url} returned {resp.status_code}: {resp.text[:500]}")
    try:
        responses = resp.json()["responses"]
    except (ValueError, KeyError) as exc:
        raise RemotePredictError(f"malformed response from {url}: {exc}") from None

    dists = _parse_responses(responses, len(batch))
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        cache_path.write_text(json.dumps(responses), encoding="utf-8")
    return dists


def _parse_responses(responses: list, expected: int) -> list[StanceDistribution]:
    if len(responses) != expected:
        raise RemotePredictError(f"expected {expected} responses, got {len(responses)}")
    item_errors = [
        (i, r["error"]) for i, r in enumerate(responses) if isinstance(r, dict) and "error" in r
    ]
    if item_errors:
        raise RemotePredictError(
            f"{len(item_errors)} request(s) failed on the model side", item_errors=item_errors
        )
    try:
        return [StanceDistribution.from_mapping(r["probs"]) for r in responses]
    except (KeyError, TypeError, ValueError) as exc:
        raise RemotePredictError(f"bad response distribution: {exc}") from None


class RemotePredictor:
    """Client for a model service speaking the /predict protocol."""

    def __init__(
        self,
        endpoint: str,
        retries: int = 3,
        cache_dir: Optional[str] = None,
    ) -> None:
        self.endpoint = endpoint
        self.retries = retries
        if cache_dir is None:
            cache_dir = os.environ.get("STANCEGRAPH_CACHE") or None
        self.cache_dir = cache_dir
        self.session = requests.Session()

    def predict_graph(self, graph: SentenceGraph, parse: Optional[ParsedSentence]) -> SentenceGraph:
        dists = remote_predict(
            self.endpoint,
            _request_payload(graph),
            retries=self.retries,
            session=self.session,
            cache_dir=self.cache_dir,
        )
        return _relabel(graph, dists)


class EnsemblePredictor:
    """Average several predictors' distributions, tuple by tuple.

    This is how per-restart prediction files get combined: pass one
    FilePredictor per restart and the ensemble mean becomes the output.
    """

    def __init__(self, predictors: Sequence) -> None:
        if not predictors:
            raise ValueError("cannot ensemble zero predictors")
        self.predictors = list(predictors)

    def predict_graph(self, graph: SentenceGraph, parse: Optional[ParsedSentence]) -> SentenceGraph:
        labeled = [p.predict_graph(graph, parse) for p in self.predictors]
        dists = [
            ensemble([g.tuples[i].dist for g in labeled])
            for i in range(len(graph.tuples))
        ]
        return _relabel(graph, dists)


def build_predictor(spec: PredictorSpec, lexicon: Optional[HedgeLexicon] = None):
    if spec.kind is PredictorKind.BASELINE:
        return BaselinePredictor(lexicon)
    if spec.kind is PredictorKind.FILE:
        paths = [p for p in spec.target.split(",") if p]
        if len(paths) > 1:
            return EnsemblePredictor([FilePredictor(p) for p in paths])
        return FilePredictor(spec.target)
    return RemotePredictor(spec.target)


def predict_graph(
    graph: SentenceGraph,
    sentence_parse: Optional[ParsedSentence],
    spec: PredictorSpec,
) -> SentenceGraph:
    """Label every tuple of ``graph`` according to ``spec``."""
    return build_predictor(spec).predict_graph(graph, sentence_parse)


def ensemble(dists: Iterable[StanceDistribution]) -> StanceDistribution:
    """Element-wise mean of distributions, renormalized only on drift."""
    dist_list = list(dists)
    if not dist_list:
        raise ValueError("cannot ensemble zero distributions")
    n = len(dist_list)
    means = [sum(d.probs[i] for d in dist_list) / n for i in range(len(LABEL_ORDER))]
    total = sum(means)
    if abs(total - 1.0) > 1e-6:
        means = [m / total for m in means]
    return StanceDistribution(tuple(means))
