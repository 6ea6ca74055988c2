"""Two-class detection metrics: error-rate sweep, DCF, EER and C_llr.

Decision rule used throughout: a trial is accepted (as bona fide / target)
iff ``score >= threshold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyClassError
from .model import DEFAULT_CM_COST, CmCostModel, ScorePartition

__all__ = [
    "ErrorRateCurve",
    "Track1Metrics",
    "compute_act_dcf",
    "compute_cllr",
    "compute_dcf",
    "compute_eer",
    "compute_min_dcf",
    "error_rate_curve",
    "evaluate_track1",
    "fixed_order_mean",
    "softplus",
    "sweep_error_rates",
]

EER_METHODS = ("step", "rocch")


@dataclass(frozen=True, eq=False)
class ErrorRateCurve:
    """Miss / false-alarm rates at every distinct score plus -inf/+inf.

    ``miss_counts[k]`` positives score below ``thresholds[k]``;
    ``fa_counts[k]`` negatives score at or above it.
    """

    thresholds: np.ndarray
    miss_counts: np.ndarray
    fa_counts: np.ndarray
    n_pos: int
    n_neg: int

    @property
    def p_miss(self) -> np.ndarray:
        return self.miss_counts / self.n_pos

    @property
    def p_fa(self) -> np.ndarray:
        return self.fa_counts / self.n_neg

    def __len__(self) -> int:
        return self.thresholds.shape[0]

    def index_at(self, tau: float) -> int:
        # rates at tau equal those at the first vertex >= tau
        return int(np.searchsorted(self.thresholds, tau, side="left"))

    def rates_at(self, tau: float) -> tuple[float, float]:
        k = self.index_at(tau)
        return self.miss_counts[k] / self.n_pos, self.fa_counts[k] / self.n_neg


def error_rate_curve(positives, negatives, pos_name="bonafide", neg_name="spoof") -> ErrorRateCurve:
    pos = np.sort(np.asarray(positives, dtype=np.float64))
    neg = np.sort(np.asarray(negatives, dtype=np.float64))
    if pos.size == 0:
        raise EmptyClassError(pos_name)
    if neg.size == 0:
        raise EmptyClassError(neg_name)
    distinct = np.unique(np.concatenate([pos, neg]))
    thresholds = np.concatenate([[-np.inf], distinct, [np.inf]])
    miss = np.searchsorted(pos, thresholds, side="left")
    fa = neg.size - np.searchsorted(neg, thresholds, side="left")
    return ErrorRateCurve(thresholds, miss, fa, int(pos.size), int(neg.size))


def sweep_error_rates(partition: ScorePartition) -> ErrorRateCurve:
    """Bona fide vs. spoof error-rate curve of a Track 1 partition."""
    return error_rate_curve(partition.bonafide, partition.spoof)


def compute_dcf(curve: ErrorRateCurve, model: CmCostModel, tau: float) -> float:
    p_miss, p_fa = curve.rates_at(tau)
    return float(model.beta * p_miss + p_fa)


def dcf_curve(curve: ErrorRateCurve, model: CmCostModel) -> np.ndarray:
    return model.beta * curve.p_miss + curve.p_fa


def compute_min_dcf(curve: ErrorRateCurve, model: CmCostModel = DEFAULT_CM_COST) -> tuple[float, float]:
    """Minimum DCF over all curve thresholds and the (smallest) argmin."""
    dcf = dcf_curve(curve, model)
    k = int(np.argmin(dcf))
    return float(dcf[k]), float(curve.thresholds[k])


def compute_act_dcf(partition: ScorePartition, model: CmCostModel = DEFAULT_CM_COST) -> float:
    """DCF at the Bayes threshold -log(beta), scores taken as LLRs."""
    partition.require("bonafide", "spoof")
    tau = model.tau_bayes
    p_miss = np.count_nonzero(partition.bonafide < tau) / partition.bonafide.size
    p_fa = np.count_nonzero(partition.spoof >= tau) / partition.spoof.size
    return float(model.beta * p_miss + p_fa)


def _interp_threshold(lo: float, hi: float, t: float) -> float:
    if not math.isfinite(lo):
        return hi
    if not math.isfinite(hi):
        return lo
    return lo + t * (hi - lo)


def eer_from_rates(p_miss: np.ndarray, p_fa: np.ndarray) -> tuple[float, int, float]:
    """Crossing of a non-decreasing miss and non-increasing false-alarm path.

    Returns ``(eer, k, t)``: the crossing sits at fraction ``t`` of the way from
    vertex ``k-1`` to vertex ``k`` (``t == 1`` means exactly on vertex ``k``).
    """
    d = p_miss - p_fa
    k = int(np.argmax(d >= 0))
    if d[k] == 0 or k == 0:
        return float(p_miss[k]), k, 1.0
    d0, d1 = d[k - 1], d[k]
    t = -d0 / (d1 - d0)
    eer = p_miss[k - 1] + t * (p_miss[k] - p_miss[k - 1])
    return float(eer), k, float(t)


def _rocch_eer(curve: ErrorRateCurve) -> tuple[float, float]:
    pfa = curve.p_fa
    pmiss = curve.p_miss
    order = np.lexsort((pmiss, pfa))
    hull: list[int] = []
    for i in order:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (pfa[a] - pfa[o]) * (pmiss[i] - pmiss[o]) - (pmiss[a] - pmiss[o]) * (pfa[i] - pfa[o])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(int(i))
    # hull runs from pfa=0 (pmiss=1) to pfa=1 (pmiss=0)
    h = np.asarray(hull)
    d = pmiss[h] - pfa[h]
    j = int(np.argmax(d <= 0))
    if d[j] == 0 or j == 0:
        return float(pmiss[h[j]]), float(curve.thresholds[h[j]])
    a, b = h[j - 1], h[j]
    t = d[j - 1] / (d[j - 1] - d[j])
    eer = pfa[a] + t * (pfa[b] - pfa[a])
    # hull vertices run in decreasing-threshold order
    thr = _interp_threshold(curve.thresholds[b], curve.thresholds[a], 1.0 - t)
    return float(eer), thr


def compute_eer(curve: ErrorRateCurve, method: str = "step") -> tuple[float, float]:
    """Equal error rate and its threshold.

    ``step`` interpolates linearly between the two adjacent curve vertices
    where miss minus false-alarm changes sign; ``rocch`` does the same on the
    ROC convex hull and is never larger.
    """
    if method == "rocch":
        return _rocch_eer(curve)
    if method != "step":
        raise ValueError(f"unknown EER method {method!r}; expected one of {EER_METHODS}")
    eer, k, t = eer_from_rates(curve.p_miss, curve.p_fa)
    if t == 1.0:
        return eer, float(curve.thresholds[k])
    return eer, _interp_threshold(curve.thresholds[k - 1], curve.thresholds[k], t)


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + e^x) without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def fixed_order_mean(values: np.ndarray) -> float:
    """Correctly rounded mean about the first element.

    Shifting by ``values[0]`` makes a constant array return that constant
    exactly; fsum makes the result independent of chunking or thread count.
    """
    values = np.asarray(values, dtype=np.float64)
    ref = float(values[0])
    return ref + math.fsum((values - ref).tolist()) / values.size


_LOG2 = math.log(2.0)


def compute_cllr(partition: ScorePartition) -> float:
    partition.require("bonafide", "spoof")
    miss_term = fixed_order_mean(softplus(-partition.bonafide))
    fa_term = fixed_order_mean(softplus(partition.spoof))
    return (miss_term + fa_term) / (2.0 * _LOG2)


@dataclass(frozen=True, slots=True)
class Track1Metrics:
    min_dcf: float
    act_dcf: float
    cllr: float
    eer: float
    min_dcf_threshold: float
    eer_threshold: float


def evaluate_track1(
    partition: ScorePartition,
    model: CmCostModel = DEFAULT_CM_COST,
    eer_method: str = "step",
) -> Track1Metrics:
    curve = sweep_error_rates(partition)
    min_dcf, min_thr = compute_min_dcf(curve, model)
    eer, eer_thr = compute_eer(curve, eer_method)
    return Track1Metrics(
        min_dcf=min_dcf,
        act_dcf=compute_act_dcf(partition, model),
        cllr=compute_cllr(partition),
        eer=eer,
        min_dcf_threshold=min_thr,
        eer_threshold=eer_thr,
    )
