"""Evaluation metrics, bootstrap inference, and inter-annotator agreement.

Metrics are reported on a 0-100 scale. Bootstrap replicates each draw their
random stream from (seed, replicate index), so splitting replicates across
workers can never change the numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .core import LABEL_ORDER, StanceLabel
from .ingest import AnnotationRecord

__all__ = [
    "ClassMetrics",
    "MetricsReport",
    "BootstrapResult",
    "macro_f1",
    "bootstrap_ci",
    "bootstrap_compare",
    "raw_agreement",
    "krippendorff_alpha",
]

STANCE_CLASS_NAMES = tuple(label.value for label in LABEL_ORDER)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    labels: tuple[str, ...]
    confusion: tuple[tuple[int, ...], ...]  # gold rows, predicted columns
    per_class: dict[str, ClassMetrics]
    macro_f1_all: float
    macro_f1_non_ne: float
    n: int


def _as_name(label) -> str:
    return label.value if isinstance(label, StanceLabel) else str(label)


def macro_f1(
    gold: Sequence,
    pred: Sequence,
    exclude: Optional[set[str]] = None,
    labels: Optional[Sequence[str]] = None,
) -> MetricsReport:
    """Confusion matrix plus per-class and macro P/R/F1 on a 0-100 scale.

    The macro averages run over the fixed class list (the six stance labels
    unless ``labels`` overrides it). ``exclude`` drops classes from the
    ``macro_f1_non_ne`` average only; their per-class rows remain. By default
    NE is excluded when present, matching the usual non-NE reporting.
    """
    if len(gold) != len(pred):
        raise ValueError(f"gold has {len(gold)} labels but pred has {len(pred)}")
    names = tuple(labels) if labels is not None else STANCE_CLASS_NAMES
    if exclude is None:
        exclude = {"NE"} & set(names)
    unknown = exclude - set(names)
    if unknown:
        raise ValueError(f"excluded classes {sorted(unknown)} not in class list")
    index = {name: i for i, name in enumerate(names)}
    k = len(names)

    confusion = [[0] * k for _ in range(k)]
    for g, p in zip(gold, pred):
        gn, pn = _as_name(g), _as_name(p)
        if gn not in index or pn not in index:
            raise ValueError(f"label outside class list: gold={gn!r} pred={pn!r}")
        confusion[index[gn]][index[pn]] += 1

    per_class: dict[str, ClassMetrics] = {}
    f1_values: dict[str, float] = {}
    for name in names:
        i = index[name]
        tp = confusion[i][i]
        gold_count = sum(confusion[i])
        pred_count = sum(row[i] for row in confusion)
        precision = 100.0 * tp / pred_count if pred_count else 0.0
        recall = 100.0 * tp / gold_count if gold_count else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[name] = ClassMetrics(precision, recall, f1, gold_count)
        f1_values[name] = f1

    kept = [f1_values[n] for n in names if n not in exclude]
    return MetricsReport(
        labels=names,
        confusion=tuple(tuple(row) for row in confusion),
        per_class=per_class,
        macro_f1_all=sum(f1_values.values()) / len(names),
        macro_f1_non_ne=sum(kept) / len(kept) if kept else 0.0,
        n=len(gold),
    )


@dataclass(frozen=True)
class BootstrapResult:
    point: float
    ci_low: float
    ci_high: float
    B: int
    level: float
    p_value: Optional[float] = None


def _unit_array(units: Sequence) -> np.ndarray:
    try:
        arr = np.asarray(units)
        if arr.dtype != object and arr.shape and arr.shape[0] == len(units):
            return arr
    except (ValueError, TypeError):
        pass
    arr = np.empty(len(units), dtype=object)
    for i, u in enumerate(units):
        arr[i] = u
    return arr


def _replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(replicate,)))


def bootstrap_ci(
    metric_fn: Callable[[Sequence], float],
    units: Sequence,
    B: int = 10_000,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapResult:
    """Normal-interval bootstrap: point estimate +/- z * stddev of replicates."""
    if B < 2:
        raise ValueError("need at least 2 bootstrap replicates")
    if not len(units):
        raise ValueError("no units to resample")
    arr = _unit_array(units)
    n = len(arr)
    point = float(metric_fn(arr))
    replicates = np.empty(B)
    for b in range(B):
        idx = _replicate_rng(seed, b).integers(0, n, size=n)
        replicates[b] = metric_fn(arr[idx])
    se = float(replicates.std(ddof=1))
    z = NormalDist().inv_cdf((1.0 + level) / 2.0)
    return BootstrapResult(
        point=point, ci_low=point - z * se, ci_high=point + z * se, B=B, level=level
    )


def bootstrap_compare(
    metric_fn: Callable[[Sequence, Sequence], float],
    preds_a: Sequence,
    preds_b: Sequence,
    gold: Sequence,
    units: Optional[Sequence[Sequence[int]]] = None,
    B: int = 10_000,
    seed: int = 0,
) -> float:
    """Two-sided paired bootstrap test for metric(A) - metric(B).

    ``units`` groups element indices into resampling units (sentences, say);
    by default every element is its own unit. ``metric_fn(gold, pred)``
    is evaluated on paired resamples and the p-value counts centered
    replicate deltas at least as extreme as the observed one, with the
    add-one convention so p is never zero.
    """
    if not (len(preds_a) == len(preds_b) == len(gold)):
        raise ValueError(
            f"misaligned systems: |A|={len(preds_a)} |B|={len(preds_b)} |gold|={len(gold)}"
        )
    if B < 2:
        raise ValueError("need at least 2 bootstrap replicates")
    gold_arr = _unit_array(gold)
    a_arr = _unit_array(preds_a)
    b_arr = _unit_array(preds_b)
    if units is None:
        groups = [np.asarray([i]) for i in range(len(gold))]
    else:
        groups = [np.asarray(list(g), dtype=np.int64) for g in units]
        flat = np.concatenate(groups) if groups else np.asarray([], dtype=np.int64)
        if flat.size and (flat.min() < 0 or flat.max() >= len(gold)):
            raise ValueError("unit indices out of range")
    if not groups:
        raise ValueError("no resampling units")

    observed = float(metric_fn(gold_arr, a_arr)) - float(metric_fn(gold_arr, b_arr))
    m = len(groups)
    extreme = 0
    for b in range(B):
        picked = _replicate_rng(seed, b).integers(0, m, size=m)
        idx = np.concatenate([groups[g] for g in picked])
        delta = float(metric_fn(gold_arr[idx], a_arr[idx])) - float(
            metric_fn(gold_arr[idx], b_arr[idx])
        )
        if abs(delta - observed) >= abs(observed):
            extreme += 1
    return (1 + extreme) / (B + 1)


def _grouped_counts(annotations: Iterable[AnnotationRecord]) -> dict[str, dict[int, int]]:
    by_item: dict[str, dict[int, int]] = {}
    for rec in annotations:
        by_item.setdefault(rec.item_id, {}).setdefault(rec.label_index, 0)
        by_item[rec.item_id][rec.label_index] += 1
    return by_item


def raw_agreement(annotations: Iterable[AnnotationRecord]) -> float:
    """Fraction of agreeing judgment pairs, pooled over all items (micro).

    Items with a single judgment contribute no pairs.
    """
    agree = 0
    total = 0
    for counts in _grouped_counts(annotations).values():
        n = sum(counts.values())
        if n < 2:
            continue
        total += n * (n - 1) // 2
        agree += sum(c * (c - 1) // 2 for c in counts.values())
    if total == 0:
        raise ValueError("no item carries two or more judgments")
    return agree / total


def krippendorff_alpha(annotations: Iterable[AnnotationRecord], metric: str = "nominal") -> float:
    """Chance-corrected agreement via the coincidence matrix, nominal metric.

    alpha = 1 - D_o / D_e where D_o pools within-item disagreement (each item
    weighted by n_u - 1) and D_e is the disagreement expected from the pooled
    value marginals.
    """
    if metric != "nominal":
        raise ValueError(f"unsupported metric {metric!r}; only nominal distance is implemented")
    pairable = [c for c in _grouped_counts(annotations).values() if sum(c.values()) >= 2]
    if not pairable:
        raise ValueError("no item carries two or more judgments")

    values = sorted({label for counts in pairable for label in counts})
    v_index = {v: i for i, v in enumerate(values)}
    k = len(values)
    coincidence = np.zeros((k, k))
    for counts in pairable:
        n_u = sum(counts.values())
        for a, n_a in counts.items():
            for b, n_b in counts.items():
                pairs = n_a * (n_b - 1) if a == b else n_a * n_b
                coincidence[v_index[a], v_index[b]] += pairs / (n_u - 1)

    n_c = coincidence.sum(axis=1)
    n = n_c.sum()
    off_diag = coincidence.sum() - np.trace(coincidence)
    d_o = off_diag / n
    d_e = (n_c.sum() ** 2 - (n_c**2).sum()) / (n * (n - 1.0))
    if d_e == 0.0:
        raise ValueError("expected disagreement is zero; alpha undefined on single-valued data")
    return float(1.0 - d_o / d_e)
