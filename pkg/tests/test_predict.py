"""Predictor tests: baseline rules, file lookup, ensembling, remote client."""

import io
import json

import pytest
import requests
from hypothesis import given, settings
import hypothesis.strategies as st

from stancegraph.core import (
    EventRef,
    LABEL_ORDER,
    SourceKind,
    SourceRef,
    StanceDistribution,
    StanceLabel,
    StanceTuple,
    Token,
    build_graph,
)
from stancegraph.extract import ExtractionConfig, extract_graph
from stancegraph.ingest import ParsedSentence, ParsedToken, write_tuples
from stancegraph.predict import (
    BASE_CONFIDENCE,
    BaselinePredictor,
    EnsemblePredictor,
    FilePredictor,
    MissingPredictionError,
    PredictError,
    PredictorKind,
    PredictorSpec,
    RemotePredictError,
    RemotePredictor,
    baseline_rules,
    build_predictor,
    ensemble,
    parse_predictor_spec,
    remote_predict,
)


_LEMMAS = {"said": "say", "left": "leave", "won": "win", "ran": "run", "did": "do"}


def _sent(rows, doc="d", sent="s"):
    """rows: (form, upos, head, deprel) with 1-based heads, 0 = root."""
    tokens = tuple(
        ParsedToken(
            index=i + 1,
            form=f,
            upos=u,
            head=h,
            deprel=r,
            lemma=_LEMMAS.get(f.lower(), f.lower()),
        )
        for i, (f, u, h, r) in enumerate(rows)
    )
    return ParsedSentence(doc_id=doc, sent_id=sent, tokens=tokens)


JOHN_SAID = _sent(
    [
        ("John", "PROPN", 2, "nsubj"),
        ("said", "VERB", 0, "root"),
        ("he", "PRON", 4, "nsubj"),
        ("left", "VERB", 2, "ccomp"),
        (".", "PUNCT", 2, "punct"),
    ]
)


def _labels_for(parse, config=None):
    g = extract_graph(parse, config or ExtractionConfig())
    labeled = BaselinePredictor().predict_graph(g, parse)
    out = {}
    for t in labeled.tuples:
        name = "Author" if t.source.kind is SourceKind.AUTHOR else t.source.surface
        out[(name, t.event.surface)] = t.label
    return out


def test_baseline_worked_example():
    got = _labels_for(JOHN_SAID)
    assert got == {
        ("Author", "said"): StanceLabel.CT_POS,
        ("Author", "left"): StanceLabel.UU,
        ("John", "said"): StanceLabel.NE,
        ("John", "left"): StanceLabel.CT_POS,
        ("he", "said"): StanceLabel.NE,
        ("he", "left"): StanceLabel.NE,
    }


def test_baseline_npi_gives_ct_neg():
    parse = _sent(
        [
            ("He", "PRON", 4, "nsubj"),
            ("did", "AUX", 4, "aux"),
            ("not", "PART", 4, "advmod"),
            ("leave", "VERB", 0, "root"),
            (".", "PUNCT", 4, "punct"),
        ]
    )
    got = _labels_for(parse)
    assert got[("Author", "leave")] is StanceLabel.CT_NEG


def test_baseline_npi_on_aux_chain_beats_hedge():
    # "n't" hangs off the auxiliary, and "could" is also a hedge token:
    # negation is checked first, so CT- wins.
    parse = _sent(
        [
            ("He", "PRON", 4, "nsubj"),
            ("could", "AUX", 4, "aux"),
            ("n't", "PART", 2, "advmod"),
            ("leave", "VERB", 0, "root"),
        ]
    )
    got = _labels_for(parse)
    assert got[("Author", "leave")] is StanceLabel.CT_NEG


def test_baseline_hedges():
    may_win = _sent(
        [
            ("She", "PRON", 3, "nsubj"),
            ("may", "AUX", 3, "aux"),
            ("win", "VERB", 0, "root"),
            (".", "PUNCT", 3, "punct"),
        ]
    )
    assert _labels_for(may_win)[("Author", "win")] is StanceLabel.PS_POS

    probably = _sent(
        [
            ("She", "PRON", 3, "nsubj"),
            ("probably", "ADV", 3, "advmod"),
            ("won", "VERB", 0, "root"),
        ]
    )
    assert _labels_for(probably)[("Author", "won")] is StanceLabel.PR_POS


def test_baseline_rules_function_matches_predictor():
    g = extract_graph(JOHN_SAID, ExtractionConfig())
    labeled = BaselinePredictor().predict_graph(g, JOHN_SAID)
    for t in labeled.tuples:
        assert baseline_rules((t.source, t.event), JOHN_SAID) is t.label


def test_baseline_distribution_shape():
    g = extract_graph(JOHN_SAID, ExtractionConfig())
    labeled = BaselinePredictor().predict_graph(g, JOHN_SAID)
    for t in labeled.tuples:
        assert t.dist is not None
        assert t.dist[t.label] == pytest.approx(BASE_CONFIDENCE)
        others = [p for l, p in t.dist.as_mapping().items() if l is not t.label]
        assert all(p == pytest.approx((1 - BASE_CONFIDENCE) / 5) for p in others)


def test_baseline_requires_parse():
    g = extract_graph(JOHN_SAID, ExtractionConfig())
    with pytest.raises(PredictError):
        BaselinePredictor().predict_graph(g, None)


# Property: without an NPI form anywhere in the sentence, the baseline never
# produces CT-. Random projective-ish trees over an NPI-free vocabulary.
FORMS = ["John", "Mary", "said", "think", "left", "win", "may", "probably", "apple", "ran"]
UPOS = ["NOUN", "PROPN", "PRON", "VERB", "AUX", "ADV", "ADJ"]
DEPRELS = ["nsubj", "obj", "ccomp", "xcomp", "advcl", "aux", "advmod", "det", "acl:relcl"]


@st.composite
def random_parse(draw):
    n = draw(st.integers(min_value=1, max_value=9))
    rows = []
    for i in range(1, n + 1):
        form = draw(st.sampled_from(FORMS))
        upos = draw(st.sampled_from(UPOS))
        head = 0 if i == 1 else draw(st.integers(min_value=1, max_value=i - 1))
        deprel = "root" if i == 1 else draw(st.sampled_from(DEPRELS))
        rows.append((form, upos, head, deprel))
    return _sent(rows)


@given(random_parse())
@settings(max_examples=200)
def test_no_npi_means_no_ct_neg(parse):
    got = _labels_for(parse)
    assert StanceLabel.CT_NEG not in got.values()


@given(random_parse())
@settings(max_examples=100)
def test_baseline_totality(parse):
    g = extract_graph(parse, ExtractionConfig())
    labeled = BaselinePredictor().predict_graph(g, parse)
    assert len(labeled.tuples) == len(g.tuples)
    assert all(t.label is not None and t.dist is not None for t in labeled.tuples)


# --- predictor specs --------------------------------------------------------

def test_parse_predictor_spec():
    assert parse_predictor_spec("baseline").kind is PredictorKind.BASELINE
    spec = parse_predictor_spec("file:/tmp/x.jsonl", restarts=3)
    assert spec.kind is PredictorKind.FILE and spec.target == "/tmp/x.jsonl"
    assert spec.restarts == 3
    spec = parse_predictor_spec("remote:http://svc:8000")
    assert spec.kind is PredictorKind.REMOTE and spec.target == "http://svc:8000"
    with pytest.raises(ValueError):
        parse_predictor_spec("magic")
    with pytest.raises(ValueError):
        PredictorSpec(PredictorKind.BASELINE, restarts=0)


# --- file predictor ---------------------------------------------------------

def _labeled_graph(doc="d", sent="s", dists=None):
    g = extract_graph(JOHN_SAID, ExtractionConfig())
    g = build_graph(doc, sent, g.tokens, g.sources[1:], g.events)
    if dists is None:
        dists = [
            StanceDistribution.point_mass(LABEL_ORDER[i % 6]) for i in range(len(g.tuples))
        ]
    tuples = [
        StanceTuple(t.source, t.event, d.argmax(), d) for t, d in zip(g.tuples, dists)
    ]
    return build_graph(doc, sent, g.tokens, g.sources[1:], g.events, tuples=tuples)


def test_file_predictor_returns_fixture_labels(tmp_path):
    fixture = _labeled_graph()
    path = tmp_path / "preds.jsonl"
    write_tuples(path, [fixture])

    bare = build_graph("d", "s", fixture.tokens, fixture.sources[1:], fixture.events)
    out = FilePredictor(path).predict_graph(bare, None)
    assert [t.label for t in out.tuples] == [t.label for t in fixture.tuples]
    assert [t.dist for t in out.tuples] == [t.dist for t in fixture.tuples]


def test_file_predictor_missing_pair(tmp_path):
    fixture = _labeled_graph()
    buf = io.StringIO()
    write_tuples(buf, [fixture])
    lines = buf.getvalue().splitlines()
    path = tmp_path / "short.jsonl"
    path.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")

    bare = build_graph("d", "s", fixture.tokens, fixture.sources[1:], fixture.events)
    with pytest.raises(MissingPredictionError) as exc:
        FilePredictor(path).predict_graph(bare, None)
    assert len(exc.value.pairs) == 1
    assert "missing 1 pair" in str(exc.value)


def test_file_predictor_hard_label_becomes_point_mass(tmp_path):
    # fixture rows with a label but probs null
    row = {
        "doc_id": "d",
        "sent_id": "s",
        "source": {"kind": "author", "token": None, "surface": "Author"},
        "event": {"token": 0, "surface": "x"},
        "label": "PR+",
        "probs": None,
    }
    path = tmp_path / "hard.jsonl"
    path.write_text(json.dumps(row) + "\n", encoding="utf-8")
    g = build_graph("d", "s", [Token(0, "x")], [], [EventRef(0, "x")])
    out = FilePredictor(path).predict_graph(g, None)
    assert out.tuples[0].label is StanceLabel.PR_POS
    assert out.tuples[0].dist == StanceDistribution.point_mass(StanceLabel.PR_POS)


# --- ensembling -------------------------------------------------------------

def test_ensemble_basic():
    a = StanceDistribution.point_mass(StanceLabel.CT_POS)
    b = StanceDistribution.point_mass(StanceLabel.UU)
    mixed = ensemble([a, b])
    assert mixed[StanceLabel.CT_POS] == pytest.approx(0.5)
    assert mixed[StanceLabel.UU] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ensemble([])


unit_probs = st.lists(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=6, max_size=6
).filter(lambda ps: sum(ps) > 1e-3)
dists_strategy = unit_probs.map(
    lambda ps: StanceDistribution(tuple(p / sum(ps) for p in ps))
)


@given(st.lists(dists_strategy, min_size=1, max_size=6), st.randoms())
def test_ensemble_permutation_invariant(ds, rng):
    shuffled = list(ds)
    rng.shuffle(shuffled)
    a, b = ensemble(ds), ensemble(shuffled)
    assert all(abs(x - y) < 1e-12 for x, y in zip(a.probs, b.probs))


@given(dists_strategy, st.integers(min_value=1, max_value=7))
def test_ensemble_idempotent_on_copies(d, n):
    out = ensemble([d] * n)
    assert all(abs(x - y) < 1e-12 for x, y in zip(out.probs, d.probs))
    assert out.argmax() is d.argmax()


def test_ensemble_predictor_averages_files(tmp_path):
    d1 = [StanceDistribution((0.9, 0.02, 0.02, 0.02, 0.02, 0.02))] * 6
    d2 = [StanceDistribution((0.5, 0.3, 0.05, 0.05, 0.05, 0.05))] * 6
    p1, p2 = tmp_path / "r1.jsonl", tmp_path / "r2.jsonl"
    write_tuples(p1, [_labeled_graph(dists=d1)])
    write_tuples(p2, [_labeled_graph(dists=d2)])

    spec = parse_predictor_spec(f"file:{p1},{p2}")
    predictor = build_predictor(spec)
    assert isinstance(predictor, EnsemblePredictor)

    fixture = _labeled_graph()
    bare = build_graph("d", "s", fixture.tokens, fixture.sources[1:], fixture.events)
    out = predictor.predict_graph(bare, None)
    assert out.tuples[0].dist[StanceLabel.CT_POS] == pytest.approx(0.7)
    assert out.tuples[0].label is StanceLabel.CT_POS

    with pytest.raises(ValueError):
        EnsemblePredictor([])


# --- remote client ----------------------------------------------------------

def _uniform_probs():
    return {l.value: 1 / 6 for l in LABEL_ORDER}


class FakeSession:
    """Scripted stand-in for requests.Session."""

    def __init__(self, responses=None, fail_times=0, status=200, text="boom"):
        self.responses = responses
        self.fail_times = fail_times
        self.status = status
        self.text = text
        self.calls = []

    def post(self, url, data=None, headers=None, timeout=None):
        self.calls.append(url)
        if self.fail_times > 0:
            self.fail_times -= 1
            raise requests.ConnectionError("refused")
        sess = self

        class Resp:
            status_code = sess.status
            text = sess.text

            def json(self):
                return {"responses": sess.responses}

        return Resp()


def test_remote_empty_batch_skips_network():
    session = FakeSession()
    assert remote_predict("http://svc", [], session=session) == []
    assert session.calls == []


def test_remote_round_trip_and_url_normalization():
    batch = [{"tokens": ["a"], "source_index": None, "event_index": 0}] * 2
    session = FakeSession(responses=[{"probs": _uniform_probs()}] * 2)
    dists = remote_predict("http://svc:9000", batch, session=session)
    assert session.calls == ["http://svc:9000/predict"]
    assert all(d == StanceDistribution.uniform() for d in dists)

    session2 = FakeSession(responses=[{"probs": _uniform_probs()}] * 2)
    remote_predict("http://svc:9000/predict", batch, session=session2)
    assert session2.calls == ["http://svc:9000/predict"]


def test_remote_preserves_order():
    batch = [{"tokens": ["a"], "source_index": None, "event_index": 0}] * 3
    probs = []
    for label in ("CT+", "CT-", "Uu"):
        p = {l.value: 0.02 for l in LABEL_ORDER}
        p[label] = 0.9
        probs.append({"probs": p})
    session = FakeSession(responses=probs)
    dists = remote_predict("http://svc", batch, session=session)
    assert [d.argmax().value for d in dists] == ["CT+", "CT-", "Uu"]


def test_remote_retries_then_succeeds(monkeypatch):
    monkeypatch.setattr("stancegraph.predict.time.sleep", lambda s: None)
    batch = [{"tokens": ["a"], "source_index": None, "event_index": 0}]
    session = FakeSession(responses=[{"probs": _uniform_probs()}], fail_times=2)
    dists = remote_predict("http://svc", batch, retries=3, session=session)
    assert len(dists) == 1
    assert len(session.calls) == 3


def test_remote_unreachable_after_retries(monkeypatch):
    monkeypatch.setattr("stancegraph.predict.time.sleep", lambda s: None)
    batch = [{"tokens": ["a"], "source_index": None, "event_index": 0}]
    session = FakeSession(fail_times=99)
    with pytest.raises(RemotePredictError, match="unreachable after 3 attempts"):
        remote_predict("http://svc", batch, retries=3, session=session)


def test_remote_non_200_carries_body():
    batch = [{"tokens": ["a"], "source_index": None, "event_index": 0}]
    session = FakeSession(status=500, text="model exploded")
    with pytest.raises(RemotePredictError, match="model exploded"):
        remote_predict("http://svc", batch, session=session)


def test_remote_item_errors_surface():
    batch = [{"tokens": ["a"], "source_index": None, "event_index": 0}] * 2
    session = FakeSession(
        responses=[{"probs": _uniform_probs()}, {"error": "token index out of range"}]
    )
    with pytest.raises(RemotePredictError) as exc:
        remote_predict("http://svc", batch, session=session)
    assert exc.value.item_errors == [(1, "token index out of range")]


def test_remote_count_mismatch():
    batch = [{"tokens": ["a"], "source_index": None, "event_index": 0}] * 2
    session = FakeSession(responses=[{"probs": _uniform_probs()}])
    with pytest.raises(RemotePredictError, match="expected 2 responses"):
        remote_predict("http://svc", batch, session=session)


def test_remote_cache_round_trip(tmp_path):
    batch = [{"tokens": ["a"], "source_index": None, "event_index": 0}]
    session = FakeSession(responses=[{"probs": _uniform_probs()}])
    first = remote_predict("http://svc", batch, session=session, cache_dir=str(tmp_path))
    assert len(session.calls) == 1

    # a session that would fail proves the cache is serving
    dead = FakeSession(fail_times=99)
    second = remote_predict("http://svc", batch, session=dead, cache_dir=str(tmp_path))
    assert dead.calls == []
    assert second == first


def test_remote_predictor_payload_shape(tmp_path):
    g = extract_graph(JOHN_SAID, ExtractionConfig())
    captured = {}

    class Capture(FakeSession):
        def post(self, url, data=None, headers=None, timeout=None):
            captured["body"] = json.loads(data.decode("utf-8"))
            return super().post(url, data, headers, timeout)

    session = Capture(responses=[{"probs": _uniform_probs()}] * len(g.tuples))
    predictor = RemotePredictor("http://svc")
    predictor.session = session
    out = predictor.predict_graph(g, JOHN_SAID)
    assert all(t.dist == StanceDistribution.uniform() for t in out.tuples)

    reqs = captured["body"]["requests"]
    assert len(reqs) == len(g.tuples)
    assert reqs[0]["tokens"] == ["John", "said", "he", "left", "."]
    assert reqs[0]["source_index"] is None  # Author
    assert {r["event_index"] for r in reqs} == {1, 3}
