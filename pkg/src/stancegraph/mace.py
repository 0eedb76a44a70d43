"""EM estimation of annotator competence for crowd-label aggregation.

The generative story: each item i has a true label T_i drawn uniformly; for
every judgment, annotator j flips a spam coin S_ij ~ Bernoulli(1 - theta_j).
A faithful judgment copies T_i; a spammed one draws from the annotator's own
label distribution xi_j, independent of the truth. The E-step is exact
because, given T_i, the spam flags decouple across judgments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .ingest import AnnotationRecord

__all__ = [
    "MaceParams",
    "ItemResult",
    "AggregationResult",
    "em_fit",
    "log_likelihood",
    "entropy",
]


@dataclass(frozen=True)
class MaceParams:
    k: int
    theta: dict[str, float]            # annotator -> P(not spamming)
    xi: dict[str, tuple[float, ...]]   # annotator -> spam label distribution

    def __post_init__(self) -> None:
        for ann, row in self.xi.items():
            if abs(sum(row) - 1.0) > 1e-9:
                raise ValueError(f"xi row for annotator {ann!r} does not sum to 1")
        for ann, t in self.theta.items():
            if not (0.0 < t < 1.0):
                raise ValueError(f"theta for annotator {ann!r} must be in (0, 1)")


@dataclass(frozen=True)
class ItemResult:
    item_id: str
    posterior: tuple[float, ...]
    hard_label: int
    entropy: float


@dataclass(frozen=True)
class AggregationResult:
    """Aggregated items plus the optimization trace of the best restart.

    The trace holds the objective EM maximizes: the marginal log-likelihood
    plus the log-prior terms implied by the additive smoothing (Beta on theta,
    Dirichlet on xi). With smoothing 0 it is exactly the marginal
    log-likelihood. Tracing the bare marginal instead would not be monotone,
    since the smoothed M-step can trade likelihood for prior mass.
    """

    items: tuple[ItemResult, ...]
    log_likelihood: tuple[float, ...]  # one value per E-step of the best restart


def entropy(posterior: Sequence[float]) -> float:
    """Shannon entropy in nats; zero-probability terms contribute nothing."""
    return float(-sum(p * math.log(p) for p in posterior if p > 0.0))


class _Dataset:
    """Annotation records in array form for vectorized EM."""

    def __init__(self, annotations: Iterable[AnnotationRecord], k: int) -> None:
        records = list(annotations)
        if k < 2:
            raise ValueError(f"need at least 2 labels, got {k}")
        self.k = k
        self.item_ids: list[str] = []
        self.annotator_ids: list[str] = []
        item_index: dict[str, int] = {}
        annotator_index: dict[str, int] = {}
        items = []
        annotators = []
        labels = []
        for rec in records:
            if not (0 <= rec.label_index < k):
                raise ValueError(
                    f"label index {rec.label_index} out of range for K={k} "
                    f"(item {rec.item_id!r})"
                )
            if rec.item_id not in item_index:
                item_index[rec.item_id] = len(self.item_ids)
                self.item_ids.append(rec.item_id)
            if rec.annotator_id not in annotator_index:
                annotator_index[rec.annotator_id] = len(self.annotator_ids)
                self.annotator_ids.append(rec.annotator_id)
            items.append(item_index[rec.item_id])
            annotators.append(annotator_index[rec.annotator_id])
            labels.append(rec.label_index)
        self.items = np.asarray(items, dtype=np.int64)
        self.annotators = np.asarray(annotators, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.n_items = len(self.item_ids)
        self.n_annotators = len(self.annotator_ids)

    def empty(self) -> bool:
        return self.items.size == 0


def _e_step(
    data: _Dataset, theta: np.ndarray, xi: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Posterior over true labels, per-judgment faithfulness, and the LL.

    For judgment (i, j) with answer a, the per-label factor is
    w(t) = theta_j * [a == t] + (1 - theta_j) * xi_j[a].
    """
    k = data.k
    th = theta[data.annotators]
    spam_mass = (1.0 - th) * xi[data.annotators, data.labels]
    log_other = np.log(spam_mass)
    log_match = np.log(spam_mass + th)

    # log posterior over T_i: a shared sum of mismatch terms per item, plus a
    # match-minus-mismatch correction at each judged label.
    base = np.zeros(data.n_items)
    np.add.at(base, data.items, log_other)
    logpost = np.full((data.n_items, k), -math.log(k))
    logpost += base[:, None]
    np.add.at(logpost, (data.items, data.labels), log_match - log_other)

    peak = logpost.max(axis=1, keepdims=True)
    unnorm = np.exp(logpost - peak)
    norm = unnorm.sum(axis=1, keepdims=True)
    posterior = unnorm / norm
    ll = float((np.log(norm) + peak).sum())

    # P(faithful | answer) per judgment: only possible when T equals the answer.
    post_at_answer = posterior[data.items, data.labels]
    faithful = post_at_answer * th / (spam_mass + th)
    return posterior, faithful, ll


def _m_step(
    data: _Dataset, faithful: np.ndarray, smoothing: float
) -> tuple[np.ndarray, np.ndarray]:
    k = data.k
    spam = 1.0 - faithful
    judged = np.bincount(data.annotators, minlength=data.n_annotators).astype(float)
    faithful_sum = np.zeros(data.n_annotators)
    np.add.at(faithful_sum, data.annotators, faithful)
    theta = (faithful_sum + smoothing) / (judged + 2.0 * smoothing)

    xi = np.zeros((data.n_annotators, k))
    np.add.at(xi, (data.annotators, data.labels), spam)
    xi += smoothing
    xi /= xi.sum(axis=1, keepdims=True)
    return theta, xi


def _log_prior(theta: np.ndarray, xi: np.ndarray, smoothing: float) -> float:
    """Log-prior terms matching the smoothed M-step (zero when unsmoothed)."""
    if smoothing == 0.0:
        return 0.0
    return float(
        smoothing * (np.log(theta).sum() + np.log1p(-theta).sum() + np.log(xi).sum())
    )


def _params_object(data: _Dataset, theta: np.ndarray, xi: np.ndarray) -> MaceParams:
    return MaceParams(
        k=data.k,
        theta={a: float(theta[j]) for j, a in enumerate(data.annotator_ids)},
        xi={a: tuple(float(x) for x in xi[j]) for j, a in enumerate(data.annotator_ids)},
    )


def log_likelihood(params: MaceParams, annotations: Iterable[AnnotationRecord]) -> float:
    """Exact marginal log-likelihood of the annotations under fixed parameters."""
    data = _Dataset(annotations, params.k)
    if data.empty():
        return 0.0
    theta = np.asarray([params.theta[a] for a in data.annotator_ids])
    xi = np.asarray([params.xi[a] for a in data.annotator_ids])
    _, _, ll = _e_step(data, theta, xi)
    return ll


def posterior_step(
    params: MaceParams, annotations: Iterable[AnnotationRecord]
) -> dict[str, tuple[float, ...]]:
    """One exact E-step under frozen parameters, keyed by item id."""
    data = _Dataset(annotations, params.k)
    theta = np.asarray([params.theta[a] for a in data.annotator_ids])
    xi = np.asarray([params.xi[a] for a in data.annotator_ids])
    posterior, _, _ = _e_step(data, theta, xi)
    return {item: tuple(map(float, posterior[i])) for i, item in enumerate(data.item_ids)}


def em_fit(
    annotations: Iterable[AnnotationRecord],
    k: int,
    iters: int = 50,
    restarts: int = 10,
    smoothing: Optional[float] = None,
    rng_seed: int = 0,
) -> tuple[MaceParams, AggregationResult]:
    """Fit the model by EM and aggregate items under the best restart.

    Restarts draw theta ~ Uniform(0.3, 0.9) and a jittered-uniform xi from
    seeds spawned off ``rng_seed``; the restart with the highest final
    log-likelihood wins, earlier restarts winning ties. The trace holds one
    log-likelihood per E-step, including a final refresh after the last
    M-step, and is non-decreasing.
    """
    data = _Dataset(annotations, k)
    if data.empty():
        raise ValueError("no annotations to aggregate")
    if smoothing is None:
        smoothing = 0.1 / k
    if iters < 1:
        raise ValueError("iters must be >= 1")

    best: Optional[tuple[float, int, np.ndarray, np.ndarray, np.ndarray, list[float]]] = None
    seeds = np.random.SeedSequence(rng_seed).spawn(restarts)
    for restart, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        theta = rng.uniform(0.3, 0.9, size=data.n_annotators)
        xi = np.full((data.n_annotators, k), 1.0 / k)
        xi += rng.uniform(0.0, 0.01, size=xi.shape)
        xi /= xi.sum(axis=1, keepdims=True)

        trace: list[float] = []
        posterior = None
        for _ in range(iters):
            posterior, faithful, ll = _e_step(data, theta, xi)
            trace.append(ll + _log_prior(theta, xi, smoothing))
            theta, xi = _m_step(data, faithful, smoothing)
        posterior, _, ll = _e_step(data, theta, xi)
        final = ll + _log_prior(theta, xi, smoothing)
        trace.append(final)

        if best is None or final > best[0]:
            best = (final, restart, theta, xi, posterior, trace)

    _, _, theta, xi, posterior, trace = best
    items = []
    for i, item_id in enumerate(data.item_ids):
        row = tuple(float(p) for p in posterior[i])
        hard = int(np.argmax(posterior[i]))
        items.append(ItemResult(item_id=item_id, posterior=row, hard_label=hard,
                                entropy=entropy(row)))
    result = AggregationResult(items=tuple(items), log_likelihood=tuple(trace))
    return _params_object(data, theta, xi), result
