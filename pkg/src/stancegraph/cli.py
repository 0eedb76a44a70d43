"""Command-line pipeline: extract -> predict -> aggregate/evaluate/analyze.

Each stage reads and writes files (or stdin/stdout with ``-``), so stages
compose with shell pipes and every intermediate is reviewable. All commands
are deterministic given their inputs and seeds, at any ``--jobs`` level.

Exit codes: 0 success, 2 usage, 3 I/O or transport, 4 invalid data.
"""

from __future__ import annotations

import functools
import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import click

from .analytics import (
    UndefinedScoreError,
    belief_holders,
    belief_score_by_type,
    canonicalize,
    citation_ratios,
    epistemological_difference,
    hedging_report,
    jaccard_ner_overlap,
)
from .core import GraphError, SentenceGraph, Token
from .extract import ExtractionConfig, ExtractionMode, extract_graph
from .ingest import (
    Ideology,
    IngestError,
    ParsedSentence,
    read_annotations,
    read_book_meta,
    read_conllu,
    read_conllu_dir,
    read_ner_spans,
    read_tuples,
    write_tuples,
)
from .mace import em_fit
from .predict import (
    PredictError,
    PredictorKind,
    RemotePredictError,
    build_predictor,
    parse_predictor_spec,
)
from .stats import bootstrap_ci, krippendorff_alpha, macro_f1, raw_agreement


class CommandError(click.ClickException):
    """A failure with a pinned exit code and machine-readable kind."""

    def __init__(self, message: str, exit_code: int, kind: str) -> None:
        super().__init__(message)
        self.exit_code = exit_code
        self.kind = kind


def _print_error(json_errors: bool, code: int, kind: str, message: str) -> None:
    if json_errors:
        sys.stderr.write(
            json.dumps({"error": {"code": code, "kind": kind, "message": message}}) + "\n"
        )
    else:
        sys.stderr.write(f"error: {message}\n")


class _Cli(click.Group):
    """Group that renders errors per the exit-code contract."""

    def main(self, args=None, **extra):  # type: ignore[override]
        argv = list(sys.argv[1:] if args is None else args)
        json_errors = "--json-errors" in argv
        try:
            super().main(args=argv, standalone_mode=False, **extra)
            sys.exit(0)
        except click.exceptions.Exit as exc:
            sys.exit(exc.exit_code)
        except click.UsageError as exc:
            _print_error(json_errors, 2, "usage", exc.format_message())
            sys.exit(2)
        except CommandError as exc:
            _print_error(json_errors, exc.exit_code, exc.kind, exc.message)
            sys.exit(exc.exit_code)
        except click.ClickException as exc:
            _print_error(json_errors, exc.exit_code, "error", exc.format_message())
            sys.exit(exc.exit_code)
        except click.Abort:
            sys.stderr.write("aborted\n")
            sys.exit(130)
        except BrokenPipeError:
            sys.exit(3)


def _guarded(fn):
    """Map domain exceptions onto the exit-code contract."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except RemotePredictError as exc:
            raise CommandError(str(exc), 3, "remote") from exc
        except OSError as exc:
            raise CommandError(str(exc), 3, "io") from exc
        except (IngestError, GraphError, PredictError, UndefinedScoreError, ValueError) as exc:
            raise CommandError(str(exc), 4, "validation") from exc

    return wrapper


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _in_stream(path: str):
    return sys.stdin if path == "-" else path


def _jsonify(obj):
    """Round floats to six decimals so reports stay byte-stable and readable."""
    if isinstance(obj, float):
        return round(obj, 6)
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def _emit_report(out: str, payload: dict, table: Optional[str] = None) -> None:
    """Write the JSON report; with a table, the table takes over stdout."""
    text = json.dumps(_jsonify(payload), indent=2, ensure_ascii=False) + "\n"
    if table is not None:
        sys.stdout.write(table)
        if out != "-":
            Path(out).write_text(text, encoding="utf-8")
    elif out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_parses(corpus: str) -> dict[tuple[str, str], ParsedSentence]:
    path = Path(corpus)
    sentences = read_conllu_dir(path) if path.is_dir() else read_conllu(path)
    parses: dict[tuple[str, str], ParsedSentence] = {}
    for sent in sentences:
        key = (sent.doc_id, sent.sent_id)
        if key in parses:
            raise IngestError(f"{corpus}: duplicate sentence id {key}")
        parses[key] = sent
    return parses


def _by_document(items: Iterable, doc_of) -> Iterator[list]:
    for _, group in itertools.groupby(items, key=doc_of):
        yield list(group)


def _map_documents(jobs: int, fn, groups: Iterable[list]) -> Iterator[list]:
    """Apply fn per document group, in order, optionally on a thread pool."""
    if jobs <= 1:
        yield from map(fn, groups)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            yield from pool.map(fn, groups)


@click.group(cls=_Cli)
@click.option("--json-errors", is_flag=True, help="Emit errors as JSON on stderr.")
@click.version_option(package_name="stancegraph", prog_name="stancegraph")
def main(json_errors: bool) -> None:
    """Multi-source stance graphs: extraction, prediction, and analysis."""


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------


@main.command()
@click.argument("corpus")
@click.option("-o", "--out", default="-", help="Output tuple store (JSONL), - for stdout.")
@click.option("--mode", type=click.Choice(["loose", "sip"]), default=None,
              help="Source extraction mode (default loose).")
@click.option("--config", "config_path", default=None, help="Extraction config file.")
@click.option("--direct-only", is_flag=True,
              help="Only clauses attached directly to the root count as events.")
@click.option("--jobs", default=1, show_default=True, help="Documents processed in parallel.")
@_guarded
def extract(corpus: str, out: str, mode: Optional[str], config_path: Optional[str],
            direct_only: bool, jobs: int) -> None:
    """Extract unlabeled (source, event) cross products from CoNLL-U input.

    CORPUS is a .conllu file or a directory of them.
    """
    config = ExtractionConfig.from_file(config_path) if config_path else ExtractionConfig()
    if mode is not None:
        config = replace(config, mode=ExtractionMode(mode))
    if direct_only:
        config = replace(config, direct_only=True)

    path = Path(corpus)
    sentences = read_conllu_dir(path) if path.is_dir() else read_conllu(path)

    def run(group: list[ParsedSentence]) -> list[SentenceGraph]:
        return [extract_graph(sent, config) for sent in group]

    groups = _by_document(sentences, lambda s: s.doc_id)
    graphs = (g for batch in _map_documents(jobs, run, groups) for g in batch)
    write_tuples(sys.stdout if out == "-" else out, graphs)


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def _with_parse_tokens(graph: SentenceGraph, parse: ParsedSentence) -> SentenceGraph:
    if len(parse.tokens) < len(graph.tokens):
        raise IngestError(
            f"sentence {graph.doc_id}/{graph.sent_id}: corpus parse has "
            f"{len(parse.tokens)} tokens but the store references {len(graph.tokens)}"
        )
    tokens = tuple(Token(i, tok.form) for i, tok in enumerate(parse.tokens))
    return replace(graph, tokens=tokens)


@main.command()
@click.argument("store", default="-")
@click.option("-o", "--out", default="-", help="Output labeled store, - for stdout.")
@click.option("--predictor", "predictor_text", required=True,
              help="baseline, file:PATH[,PATH...] or remote:URL.")
@click.option("--restarts", default=5, show_default=True,
              help="Restart count recorded on the predictor spec.")
@click.option("--corpus", default=None,
              help="CoNLL-U file or directory with the parses; required unless "
                   "the predictor is file-based.")
@click.option("--jobs", default=1, show_default=True, help="Documents processed in parallel.")
@_guarded
def predict(store: str, out: str, predictor_text: str, restarts: int,
            corpus: Optional[str], jobs: int) -> None:
    """Attach stance labels and distributions to every tuple of STORE."""
    spec = parse_predictor_spec(predictor_text, restarts=restarts)
    if spec.kind is not PredictorKind.FILE and corpus is None:
        raise click.UsageError(
            f"--corpus is required for the {spec.kind.value} predictor: the tuple "
            "store does not carry sentence tokens"
        )

    parses = _load_parses(corpus) if corpus is not None else {}
    graphs = read_tuples(_in_stream(store))

    shared = None
    if not (spec.kind is PredictorKind.REMOTE and jobs > 1):
        shared = build_predictor(spec)

    def run(group: list[SentenceGraph]) -> list[SentenceGraph]:
        # remote sessions are created per worker batch instead of shared
        predictor = shared if shared is not None else build_predictor(spec)
        labeled = []
        for graph in group:
            parse = parses.get((graph.doc_id, graph.sent_id))
            if parse is None and spec.kind is not PredictorKind.FILE:
                raise PredictError(
                    f"sentence {graph.doc_id}/{graph.sent_id} is not in the corpus"
                )
            if parse is not None:
                graph = _with_parse_tokens(graph, parse)
            labeled.append(predictor.predict_graph(graph, parse))
        return labeled

    groups = _by_document(graphs, lambda g: g.doc_id)
    labeled = (g for batch in _map_documents(jobs, run, groups) for g in batch)
    write_tuples(sys.stdout if out == "-" else out, labeled)


# ---------------------------------------------------------------------------
# aggregate
# ---------------------------------------------------------------------------


@main.command()
@click.argument("annotations_csv")
@click.option("-o", "--out", default="-", help="Report path, - for stdout.")
@click.option("--iters", default=50, show_default=True, help="EM iterations per restart.")
@click.option("--restarts", default=10, show_default=True, help="Random restarts.")
@click.option("--smoothing", default=None, type=float,
              help="Additive smoothing delta (default 0.1/K).")
@click.option("--seed", default=0, show_default=True)
@click.option("--table", is_flag=True, help="Human-readable table on stdout.")
@_guarded
def aggregate(annotations_csv: str, out: str, iters: int, restarts: int,
              smoothing: Optional[float], seed: int, table: bool) -> None:
    """Aggregate crowd annotations into item labels with per-item entropy."""
    data = read_annotations(annotations_csv)
    params, result = em_fit(
        data.records, data.k, iters=iters, restarts=restarts,
        smoothing=smoothing, rng_seed=seed,
    )
    labels = data.labels
    payload = {
        "k": data.k,
        "labels": list(labels),
        "n_items": len(result.items),
        "n_annotators": len(params.theta),
        "dropped_duplicates": data.dropped_duplicates,
        "iters": iters,
        "restarts": restarts,
        "seed": seed,
        "objective": result.log_likelihood[-1],
        "items": [
            {
                "item": item.item_id,
                "label": labels[item.hard_label],
                "entropy": item.entropy,
                "posterior": {l: p for l, p in zip(labels, item.posterior)},
            }
            for item in result.items
        ],
        "theta": {ann: params.theta[ann] for ann in sorted(params.theta)},
    }
    rendered = None
    if table:
        width = max((len(i.item_id) for i in result.items), default=4)
        lines = [f"{'item':<{width}}  label  entropy"]
        for item in result.items:
            lines.append(
                f"{item.item_id:<{width}}  {labels[item.hard_label]:<5}  {item.entropy:.4f}"
            )
        lines.append("")
        for ann in sorted(params.theta):
            lines.append(f"theta[{ann}] = {params.theta[ann]:.4f}")
        rendered = "\n".join(lines) + "\n"
    _emit_report(out, payload, rendered)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _aligned_labels(gold_path: str, pred_path: str):
    gold_graphs = read_tuples(gold_path)
    pred_graphs = read_tuples(pred_path)
    gold, pred, keys = [], [], []
    flat_gold = [(g, t) for g in gold_graphs for t in g.tuples]
    flat_pred = [(g, t) for g in pred_graphs for t in g.tuples]
    if len(flat_gold) != len(flat_pred):
        raise IngestError(
            f"stores disagree: {len(flat_gold)} gold tuples vs {len(flat_pred)} predicted"
        )
    for (gg, gt), (pg, pt) in zip(flat_gold, flat_pred):
        if (gg.doc_id, gg.sent_id, gt.source, gt.event) != (
            pg.doc_id, pg.sent_id, pt.source, pt.event,
        ):
            raise IngestError(
                f"stores disagree at {gg.doc_id}/{gg.sent_id}: tuple "
                f"({gt.source.surface!r}, {gt.event.surface!r}) vs "
                f"({pt.source.surface!r}, {pt.event.surface!r})"
            )
        if gt.label is None or pt.label is None:
            raise IngestError(
                f"unlabeled tuple at {gg.doc_id}/{gg.sent_id}; both stores must be labeled"
            )
        gold.append(gt.label.value)
        pred.append(pt.label.value)
        keys.append((gg.doc_id, gg.sent_id))
    return gold, pred, keys


@main.command()
@click.option("--gold", "gold_path", required=True, help="Gold tuple store.")
@click.option("--pred", "pred_path", required=True, help="Predicted tuple store.")
@click.option("--unit", type=click.Choice(["sentence", "tuple"]), default="sentence",
              show_default=True, help="Bootstrap resampling unit.")
@click.option("-B", "--bootstrap-samples", "bootstrap_samples", default=10_000,
              show_default=True)
@click.option("--level", default=0.95, show_default=True, help="Confidence level.")
@click.option("--seed", default=0, show_default=True)
@click.option("-o", "--out", default="-", help="Report path, - for stdout.")
@click.option("--table", is_flag=True, help="Human-readable table on stdout.")
@_guarded
def evaluate(gold_path: str, pred_path: str, unit: str, bootstrap_samples: int,
             level: float, seed: int, out: str, table: bool) -> None:
    """Score a predicted store against gold: per-class F1, macros, and a
    bootstrap confidence interval on the non-NE macro F1."""
    gold, pred, keys = _aligned_labels(gold_path, pred_path)
    report = macro_f1(gold, pred)

    if unit == "sentence":
        grouped: dict[tuple[str, str], list[tuple[str, str]]] = {}
        for g, p, key in zip(gold, pred, keys):
            grouped.setdefault(key, []).append((g, p))
        units: Sequence = list(grouped.values())
    else:
        units = [[(g, p)] for g, p in zip(gold, pred)]

    def metric(groups) -> float:
        flat_gold = [pair[0] for group in groups for pair in group]
        flat_pred = [pair[1] for group in groups for pair in group]
        return macro_f1(flat_gold, flat_pred).macro_f1_non_ne

    boot = bootstrap_ci(metric, units, B=bootstrap_samples, level=level, seed=seed)

    payload = {
        "n": report.n,
        "labels": list(report.labels),
        "confusion": [list(row) for row in report.confusion],
        "per_class": {
            name: {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
            }
            for name, m in report.per_class.items()
        },
        "macro_f1_all": report.macro_f1_all,
        "macro_f1_non_ne": report.macro_f1_non_ne,
        "bootstrap": {
            "metric": "macro_f1_non_ne",
            "unit": unit,
            "point": boot.point,
            "ci_low": boot.ci_low,
            "ci_high": boot.ci_high,
            "B": boot.B,
            "level": boot.level,
            "seed": seed,
        },
    }
    rendered = None
    if table:
        lines = ["label  precision  recall     f1  support"]
        for name in report.labels:
            m = report.per_class[name]
            lines.append(
                f"{name:<5}  {m.precision:9.1f}  {m.recall:6.1f}  {m.f1:5.1f}  {m.support:7d}"
            )
        lines.append(f"macro (all)    {report.macro_f1_all:.1f}")
        lines.append(f"macro (non-NE) {report.macro_f1_non_ne:.1f}")
        lines.append(
            f"95% CI [{boot.ci_low:.1f}, {boot.ci_high:.1f}] "
            f"(B={boot.B}, unit={unit})"
        )
        rendered = "\n".join(lines) + "\n"
    _emit_report(out, payload, rendered)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


@main.group()
def analyze() -> None:
    """Corpus analytics over labeled tuple stores."""


def _read_store(store: str) -> list[SentenceGraph]:
    return read_tuples(_in_stream(store))


def _holder_payload(rec) -> dict:
    return {
        "canonical": rec.canonical,
        "books": sorted(rec.books),
        "mentions": rec.mention_count,
        "n_l": rec.n_l,
        "n_r": rec.n_r,
        "n_c": rec.n_c,
    }


@analyze.command("belief-holders")
@click.argument("store", default="-")
@click.option("--ner", "ner_path", required=True, help="NER span JSONL.")
@click.option("--meta", "meta_path", default=None, help="Book metadata TSV.")
@click.option("-o", "--out", default="-")
@_guarded
def analyze_belief_holders(store: str, ner_path: str, meta_path: Optional[str], out: str) -> None:
    """List mention sources holding at least one epistemic stance."""
    meta = read_book_meta(meta_path) if meta_path else None
    records = belief_holders(_read_store(store), read_ner_spans(ner_path), meta)
    _emit_report(out, {"count": len(records), "holders": [_holder_payload(r) for r in records]})


@analyze.command("belief-score")
@click.argument("store", default="-")
@click.option("--ner", "ner_path", required=True, help="NER span JSONL.")
@click.option("-o", "--out", default="-")
@_guarded
def analyze_belief_score(store: str, ner_path: str, out: str) -> None:
    """Mean fraction of epistemic stances per NER entity type."""
    scores = belief_score_by_type(_read_store(store), read_ner_spans(ner_path))
    _emit_report(out, {"scores": scores})


@analyze.command("jaccard")
@click.argument("store", default="-")
@click.option("--ner", "ner_path", required=True, help="NER span JSONL.")
@click.option("-o", "--out", default="-")
@_guarded
def analyze_jaccard(store: str, ner_path: str, out: str) -> None:
    """Jaccard overlap between belief-holder names and NER entity names."""
    graphs = _read_store(store)
    spans = read_ner_spans(ner_path)
    holders = {rec.canonical for rec in belief_holders(graphs, spans)}
    entities = {canonicalize(span.surface) for span in spans}
    _emit_report(
        out,
        {
            "jaccard": jaccard_ner_overlap(holders, entities),
            "belief_holders": len(holders),
            "ner_entities": len(entities),
        },
    )


@analyze.command("citation-ratio")
@click.argument("store", default="-")
@click.option("--ner", "ner_path", required=True, help="NER span JSONL.")
@click.option("--meta", "meta_path", required=True, help="Book metadata TSV.")
@click.option("--min-books", default=8, show_default=True,
              help="Minimum L+R books mentioning a holder.")
@click.option("-o", "--out", default="-")
@_guarded
def analyze_citation_ratio(store: str, ner_path: str, meta_path: str,
                           min_books: int, out: str) -> None:
    """Left/right citation proportions per belief holder, most left-cited first."""
    meta = read_book_meta(meta_path)
    records = belief_holders(_read_store(store), read_ner_spans(ner_path))
    rows = citation_ratios(records, meta, min_books=min_books)
    _emit_report(
        out,
        {
            "left_books": sum(1 for m in meta.values() if m.ideology is Ideology.LEFT),
            "right_books": sum(1 for m in meta.values() if m.ideology is Ideology.RIGHT),
            "min_books": min_books,
            "rows": [
                {
                    "canonical": r.canonical,
                    "n_l": r.n_l,
                    "n_r": r.n_r,
                    "p_l": r.p_l,
                    "p_r": r.p_r,
                    "ratio": r.ratio,
                }
                for r in rows
            ],
        },
    )


def _hedging_payload(graphs: list[SentenceGraph]) -> dict:
    report = hedging_report(graphs)
    return {
        "uncertain": report.uncertain,
        "non_ne": report.non_ne,
        "total": report.total,
        "rate": report.rate,
        "rate_all": report.rate_all,
        "percent": f"{report.rate * 100:.3g}",
    }


@analyze.command("hedging")
@click.argument("store", default="-")
@click.option("-o", "--out", default="-")
@_guarded
def analyze_hedging(store: str, out: str) -> None:
    """Share of hedged (PR+/PS+) stances among the author's epistemic stances,
    overall and per document."""
    graphs = _read_store(store)
    by_doc = {}
    for doc_id in sorted({g.doc_id for g in graphs}):
        doc_graphs = [g for g in graphs if g.doc_id == doc_id]
        try:
            by_doc[doc_id] = _hedging_payload(doc_graphs)
        except UndefinedScoreError:
            by_doc[doc_id] = None
    _emit_report(out, {"overall": _hedging_payload(graphs), "by_doc": by_doc})


@analyze.command("ed")
@click.argument("store", default="-")
@click.option("--source-a", required=True, help="First source surface, or 'author'.")
@click.option("--source-b", required=True, help="Second source surface, or 'author'.")
@click.option("--experimental", is_flag=True,
              help="Acknowledge that expectation scores are experimental.")
@click.option("-o", "--out", default="-")
@_guarded
def analyze_ed(store: str, source_a: str, source_b: str, experimental: bool, out: str) -> None:
    """Absolute gap between two sources' mean expected stances."""
    if not experimental:
        raise click.UsageError(
            "expectation-score analytics are experimental; pass --experimental to enable"
        )
    value = epistemological_difference(_read_store(store), source_a, source_b)
    _emit_report(out, {"source_a": source_a, "source_b": source_b, "ed": value})


# ---------------------------------------------------------------------------
# agreement / corpus-stats
# ---------------------------------------------------------------------------


@main.command()
@click.argument("annotations_csv")
@click.option("-o", "--out", default="-")
@click.option("--table", is_flag=True, help="Human-readable table on stdout.")
@_guarded
def agreement(annotations_csv: str, out: str, table: bool) -> None:
    """Raw inter-annotator agreement and Krippendorff's alpha."""
    data = read_annotations(annotations_csv)
    raw = raw_agreement(data.records)
    alpha = krippendorff_alpha(data.records)
    payload = {
        "raw_agreement": raw,
        "krippendorff_alpha": alpha,
        "n_items": len({r.item_id for r in data.records}),
        "n_annotators": len({r.annotator_id for r in data.records}),
        "n_judgments": len(data.records),
        "labels": list(data.labels),
    }
    rendered = None
    if table:
        rendered = (
            f"raw agreement       {raw:.3f}\n"
            f"krippendorff alpha  {alpha:.3f}\n"
        )
    _emit_report(out, payload, rendered)


@main.command("corpus-stats")
@click.option("--meta", "meta_path", required=True, help="Book metadata TSV.")
@click.option("-o", "--out", default="-")
@_guarded
def corpus_stats(meta_path: str, out: str) -> None:
    """Ideology breakdown of the book metadata."""
    meta = read_book_meta(meta_path)
    years = [m.year for m in meta.values()]
    _emit_report(
        out,
        {
            "books": len(meta),
            "left": sum(1 for m in meta.values() if m.ideology is Ideology.LEFT),
            "right": sum(1 for m in meta.values() if m.ideology is Ideology.RIGHT),
            "center": sum(1 for m in meta.values() if m.ideology is Ideology.CENTER),
            "year_min": min(years) if years else None,
            "year_max": max(years) if years else None,
        },
    )


if __name__ == "__main__":
    main()
