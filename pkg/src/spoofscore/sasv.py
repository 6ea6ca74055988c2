"""Three-class metrics for spoofing-robust speaker verification.

* a-DCF and its minimum over a single SASV threshold.
* ASV-constrained minimum t-DCF of a CM evaluated behind a fixed ASV
  operating point.
* Concurrent tandem EER of an (ASV, CM) cascade.

Tandem convention: a trial is accepted iff ``asv >= tau_asv`` and
``cm >= tau_cm``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .detection import _interp_threshold, compute_eer, error_rate_curve
from .errors import DegenerateError, EmptyClassError, NoCrossingError
from .model import DEFAULT_SASV_COST, SasvCostModel, ScorePartition, TrialClass

__all__ = [
    "AsvOperatingPoint",
    "SasvErrorRates",
    "TandemThresholdPair",
    "Track2Metrics",
    "a_dcf_curve",
    "compute_a_dcf",
    "compute_asv_constrained_min_tdcf",
    "compute_asv_operating_point",
    "compute_concurrent_teer",
    "compute_min_a_dcf",
    "evaluate_track2",
    "sasv_error_rates",
    "tdcf_constants",
    "tdcf_curve",
]

TDCF_NORMS = ("v1", "v2")


@dataclass(frozen=True, slots=True)
class SasvErrorRates:
    threshold: float
    p_miss: float
    p_fa_non: float
    p_fa_spf: float


def sasv_error_rates(partition: ScorePartition, tau: float) -> SasvErrorRates:
    partition.require("target", "nontarget", "spoof")
    return SasvErrorRates(
        threshold=float(tau),
        p_miss=np.count_nonzero(partition.target < tau) / partition.target.size,
        p_fa_non=np.count_nonzero(partition.nontarget >= tau) / partition.nontarget.size,
        p_fa_spf=np.count_nonzero(partition.spoof >= tau) / partition.spoof.size,
    )


def _a_dcf(model: SasvCostModel, p_miss, p_fa_non, p_fa_spf):
    return model.alpha * p_miss + (1.0 - model.gamma) * p_fa_non + model.gamma * p_fa_spf


def compute_a_dcf(
    partition: ScorePartition, model: SasvCostModel = DEFAULT_SASV_COST, tau: float = 0.0
) -> float:
    r = sasv_error_rates(partition, tau)
    return float(_a_dcf(model, r.p_miss, r.p_fa_non, r.p_fa_spf))


def a_dcf_curve(
    partition: ScorePartition, model: SasvCostModel = DEFAULT_SASV_COST
) -> tuple[np.ndarray, np.ndarray]:
    """(thresholds, a-DCF) at every distinct SASV score plus -inf/+inf."""
    partition.require("target", "nontarget", "spoof")
    tar = np.sort(partition.target)
    non = np.sort(partition.nontarget)
    spf = np.sort(partition.spoof)
    distinct = np.unique(np.concatenate([tar, non, spf]))
    thr = np.concatenate([[-np.inf], distinct, [np.inf]])
    p_miss = np.searchsorted(tar, thr, side="left") / tar.size
    p_fa_non = (non.size - np.searchsorted(non, thr, side="left")) / non.size
    p_fa_spf = (spf.size - np.searchsorted(spf, thr, side="left")) / spf.size
    return thr, _a_dcf(model, p_miss, p_fa_non, p_fa_spf)


def compute_min_a_dcf(
    partition: ScorePartition, model: SasvCostModel = DEFAULT_SASV_COST
) -> tuple[float, float]:
    thr, cost = a_dcf_curve(partition, model)
    k = int(np.argmin(cost))
    return float(cost[k]), float(thr[k])


# ---------------------------------------------------------------------------
# ASV-constrained t-DCF


@dataclass(frozen=True, slots=True)
class AsvOperatingPoint:
    p_miss: float
    p_fa: float
    p_miss_spf: float
    threshold: float


def compute_asv_operating_point(
    asv_partition: ScorePartition, threshold: float | None = None
) -> AsvOperatingPoint:
    """ASV error rates at its target/non-target EER threshold.

    Pass ``threshold`` to reuse an operating point fixed elsewhere (e.g. on
    the pooled trials when scoring a single condition).
    """
    asv_partition.require("target", "nontarget")
    if threshold is None:
        curve = error_rate_curve(asv_partition.target, asv_partition.nontarget, "target", "nontarget")
        _, threshold = compute_eer(curve, "step")
    tau = float(threshold)
    spf = asv_partition.spoof
    return AsvOperatingPoint(
        p_miss=np.count_nonzero(asv_partition.target < tau) / asv_partition.target.size,
        p_fa=np.count_nonzero(asv_partition.nontarget >= tau) / asv_partition.nontarget.size,
        p_miss_spf=(np.count_nonzero(spf < tau) / spf.size) if spf.size else math.nan,
        threshold=tau,
    )


def tdcf_constants(asv: AsvOperatingPoint, model: SasvCostModel) -> tuple[float, float, float]:
    """(C0, C1, C2) of t-DCF(s) = C0 + C1 * Pmiss_cm(s) + C2 * Pfa_cm(s).

    C0: cost of ASV errors on bona fide trials that the CM lets through.
    C1: extra cost of the CM rejecting a target that ASV would accept.
    C2: cost of a spoof passing the CM and then ASV.
    """
    if math.isnan(asv.p_miss_spf):
        raise EmptyClassError("spoof")
    c0 = model.prior_tar * model.c_miss * asv.p_miss + model.prior_non * model.c_fa_non * asv.p_fa
    c1 = model.prior_tar * model.c_miss - c0
    c2 = model.prior_spf * model.c_fa_spf * (1.0 - asv.p_miss_spf)
    return c0, c1, c2


def tdcf_curve(
    cm_partition: ScorePartition,
    asv: AsvOperatingPoint,
    model: SasvCostModel = DEFAULT_SASV_COST,
    norm: str = "v2",
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized t-DCF at every CM threshold.

    ``v2``: (C0 + C1 Pmiss + C2 Pfa) / (C0 + min(C1, C2)), i.e. relative to
    the better of the accept-all / reject-all CM policies.
    ``v1``: (C1 Pmiss + C2 Pfa) / min(C1, C2), the older form without the
    ASV-only floor.
    """
    if norm not in TDCF_NORMS:
        raise ValueError(f"unknown t-DCF normalization {norm!r}; expected one of {TDCF_NORMS}")
    c0, c1, c2 = tdcf_constants(asv, model)
    if c1 <= 0:
        raise DegenerateError(f"C1={c1:.6g} <= 0: ASV is worse than chance at its operating point")
    curve = error_rate_curve(cm_partition.bonafide, cm_partition.spoof)
    if norm == "v2":
        num = c0 + c1 * curve.p_miss + c2 * curve.p_fa
        den = c0 + min(c1, c2)
    else:
        num = c1 * curve.p_miss + c2 * curve.p_fa
        den = min(c1, c2)
    if den <= 0:
        raise DegenerateError(f"t-DCF normalizer {den:.6g} <= 0 (no spoof passes ASV)")
    return curve.thresholds, num / den


def compute_asv_constrained_min_tdcf(
    cm_partition: ScorePartition,
    asv: AsvOperatingPoint,
    model: SasvCostModel = DEFAULT_SASV_COST,
    norm: str = "v2",
) -> tuple[float, float]:
    thr, cost = tdcf_curve(cm_partition, asv, model, norm)
    k = int(np.argmin(cost))
    return float(cost[k]), float(thr[k])


# ---------------------------------------------------------------------------
# concurrent t-EER


@dataclass(frozen=True, slots=True)
class TandemThresholdPair:
    tau_asv: float
    tau_cm: float
    common_error: float
    p_miss: float
    p_fa_non: float
    p_fa_spf: float

    @property
    def max_gap(self) -> float:
        r = (self.p_miss, self.p_fa_non, self.p_fa_spf)
        return max(r) - min(r)


_CLASS_CODE = {TrialClass.TARGET: 0, TrialClass.NONTARGET: 1, TrialClass.SPOOF: 2}


def _as_codes(classes) -> np.ndarray:
    arr = np.asarray(classes)
    if arr.dtype.kind in "iu":
        return arr.astype(np.int8)
    return np.array([_CLASS_CODE[TrialClass(c)] for c in arr], dtype=np.int8)


def _lattice(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    distinct = np.unique(values)
    rank = np.searchsorted(distinct, values) + 1
    return np.concatenate([[-np.inf], distinct, [np.inf]]), rank


def _column_rates(asv, cm, codes, a_lat, tau_cm, totals):
    """Tandem rates at every ASV vertex for one fixed CM threshold."""
    keep = cm >= tau_cm
    out = []
    for c in range(3):
        kept = np.sort(asv[keep & (codes == c)])
        accepted = kept.size - np.searchsorted(kept, a_lat, side="left")
        rate = accepted / totals[c]
        out.append(1.0 - rate if c == 0 else rate)
    return out


# blended rates closer than this count as equal
_RATE_TIE = 1e-12


def _run_position(sf, k: int, b: int, e: float) -> tuple[int, float, float]:
    """Where to sit on a run of ASV vertices k..b that all have miss == FA.

    The common error is ``e`` all along the run while spoof FA falls, so take
    the point whose spoof FA is closest to ``e``. Returns (vertex, weight,
    spoof FA) in the (k, t) convention of :func:`_cell_crossing`.
    """
    if sf[k] <= e:
        return k, 1.0, float(sf[k])
    if sf[b] >= e:
        return b, 1.0, float(sf[b])
    v = k + 1
    while sf[v] > e:
        v += 1
    if sf[v] == e:
        return v, 1.0, e
    return v, float((sf[v - 1] - e) / (sf[v - 1] - sf[v])), e


def _cell_crossing(lo_cols, hi_cols, f):
    """Conditional miss/non-target crossing at fraction f between two CM columns.

    Returns (spoof FA - common error, common error, non-target FA, spoof FA,
    ASV vertex index, weight).
    """
    pm, pf, sf = ((1.0 - f) * a + f * b for a, b in zip(lo_cols, hi_cols))
    d = pm - pf
    d[np.abs(d) <= _RATE_TIE] = 0.0
    k = int(np.argmax(d >= 0))
    if d[k] == 0:
        b = k
        while b + 1 < d.size and d[b + 1] == 0:
            b += 1
        e = pm[k]
        v, t, spf = _run_position(sf, k, b, e)
        return spf - e, e, pf[k], spf, v, t
    if k == 0:
        return sf[0] - pm[0], pm[0], pf[0], sf[0], 0, 1.0
    t = -d[k - 1] / (d[k] - d[k - 1])
    e = pm[k - 1] + t * (pm[k] - pm[k - 1])
    fa = pf[k - 1] + t * (pf[k] - pf[k - 1])
    spf = sf[k - 1] + t * (sf[k] - sf[k - 1])
    return spf - e, e, fa, spf, k, t


def compute_concurrent_teer(asv_scores, cm_scores, classes) -> TandemThresholdPair:
    """Concurrent t-EER: the (tau_asv, tau_cm) pair where tandem miss,
    non-target false alarm and spoof false alarm coincide.

    The CM threshold is swept upward over every distinct CM score. At each
    one, the ASV threshold equalising tandem miss and non-target false alarm
    is found by linear interpolation between adjacent ASV vertices (the
    crossing index can only move down as the CM gets stricter, so a single
    pointer serves the whole sweep). The spoof false-alarm rate is
    interpolated with the same weight. The first CM step where spoof false
    alarm crosses that common value brackets the answer; inside it the rates
    are blended linearly between the two CM columns and the blend where all
    three meet is solved for. Where miss equals non-target false alarm
    along a run of ASV vertices, the point of the run whose spoof false
    alarm is closest to the common value is used.

    Only rates enter the interpolation, so the value is unchanged by any
    strictly increasing transform of either score.
    """
    asv = np.asarray(asv_scores, dtype=np.float64)
    cm = np.asarray(cm_scores, dtype=np.float64)
    codes = _as_codes(classes)
    if not (asv.shape == cm.shape == codes.shape):
        raise ValueError("asv, cm and class arrays must be aligned")
    totals = [int(np.count_nonzero(codes == c)) for c in range(3)]
    for name, n in zip(("target", "nontarget", "spoof"), totals):
        if n == 0:
            raise EmptyClassError(name)
    n_tar, n_non, n_spf = totals

    a_lat, a_rank = _lattice(asv)
    c_lat, c_rank = _lattice(cm)
    n_a = a_lat.size
    n_c = c_lat.size

    # surviving-trial counts per ASV vertex, per class
    counts = [np.bincount(a_rank[codes == c], minlength=n_a).tolist() for c in range(3)]
    tar_cnt, non_cnt, spf_cnt = counts
    order = np.argsort(c_rank, kind="stable")
    drop_cls = codes[order].tolist()
    drop_rank = a_rank[order].tolist()
    drop_end = np.searchsorted(c_rank[order], np.arange(n_c), side="right").tolist()

    k = n_a - 1  # trials at or above vertex k are counted in *_above
    tar_above = non_above = spf_above = 0
    dropped = 0

    e_path: list[float] = []
    pf_path: list[float] = []
    sf_path: list[float] = []
    ta_path: list[float] = []

    for j in range(n_c):
        # slide k down to the first ASV vertex where miss >= non-target FA
        while k > 0:
            t_above = tar_above + tar_cnt[k - 1]
            n_above = non_above + non_cnt[k - 1]
            if (1.0 - t_above / n_tar) - n_above / n_non < 0:
                break
            k -= 1
            tar_above = t_above
            non_above = n_above
            spf_above += spf_cnt[k]

        pm1 = 1.0 - tar_above / n_tar
        pf1 = non_above / n_non
        sf1 = spf_above / n_spf
        # exact integer test for miss == FA at vertex k
        tie = (n_tar - tar_above) * n_non == non_above * n_tar
        if k == 0 and not tie:
            break  # CM already rejects more targets than non-targets it passes
        if tie:
            # miss == FA may hold on a run of vertices above k; spoof FA falls along it
            run = [sf1]
            v, s_left = k, spf_above
            while v + 1 < n_a and tar_cnt[v] == 0 and non_cnt[v] == 0:
                s_left -= spf_cnt[v]
                v += 1
                run.append(s_left / n_spf)
            i, t, sf = _run_position(run, 0, len(run) - 1, pm1)
            e_path.append(pm1)
            pf_path.append(pf1)
            sf_path.append(sf)
            v = k + i
            ta_path.append(float(a_lat[v]) if t == 1.0 else _interp_threshold(a_lat[v - 1], a_lat[v], t))
        else:
            pm0 = 1.0 - (tar_above + tar_cnt[k - 1]) / n_tar
            pf0 = (non_above + non_cnt[k - 1]) / n_non
            sf0 = (spf_above + spf_cnt[k - 1]) / n_spf
            # same arithmetic as eer_from_rates, inlined for speed
            d0 = pm0 - pf0
            d1 = pm1 - pf1
            t = -d0 / (d1 - d0)
            e = pm0 + t * (pm1 - pm0)
            e_path.append(e)
            pf_path.append(pf0 + t * (pf1 - pf0))
            sf_path.append(sf0 + t * (sf1 - sf0))
            ta_path.append(_interp_threshold(a_lat[k - 1], a_lat[k], t))

        # trials whose CM score equals vertex j fall out before vertex j+1
        stop = drop_end[j]
        while dropped < stop:
            c = drop_cls[dropped]
            r = drop_rank[dropped]
            counts[c][r] -= 1
            if r >= k:
                if c == 0:
                    tar_above -= 1
                elif c == 1:
                    non_above -= 1
                else:
                    spf_above -= 1
            dropped += 1

    h = [s - e for s, e in zip(sf_path, e_path)]
    for j, hj in enumerate(h):
        if hj == 0:
            return TandemThresholdPair(
                ta_path[j], float(c_lat[j]), e_path[j], e_path[j], pf_path[j], sf_path[j]
            )
        if j and (h[j - 1] > 0) != (hj > 0):
            return _solve_cell(asv, cm, codes, a_lat, c_lat, j, totals)
    raise NoCrossingError(
        "spoof false-alarm rate never meets the tandem miss/non-target crossing "
        f"over {len(h)} feasible CM thresholds"
    )


def _solve_cell(asv, cm, codes, a_lat, c_lat, j, totals) -> TandemThresholdPair:
    # rates between CM vertices j-1 and j are blended bilinearly in rank
    # coordinates; solve for the blend where spoof FA meets the common error
    lo_cols = _column_rates(asv, cm, codes, a_lat, c_lat[j - 1], totals)
    hi_cols = _column_rates(asv, cm, codes, a_lat, c_lat[j], totals)

    def gap(f):
        return _cell_crossing(lo_cols, hi_cols, f)[0]

    g0, g1 = gap(0.0), gap(1.0)
    if g0 == 0 or g1 == 0 or (g0 > 0) == (g1 > 0):
        # a root sits on a cell edge (or rounding hid the sign change)
        f = 0.0 if abs(g0) <= abs(g1) else 1.0
    else:
        f = brentq(gap, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    _, e, fa, spf, k, t = _cell_crossing(lo_cols, hi_cols, f)
    tau_asv = float(a_lat[k]) if t == 1.0 else _interp_threshold(a_lat[k - 1], a_lat[k], t)
    return TandemThresholdPair(
        tau_asv=float(tau_asv),
        tau_cm=float(_interp_threshold(c_lat[j - 1], c_lat[j], f)),
        common_error=float(e),
        p_miss=float(e),
        p_fa_non=float(fa),
        p_fa_spf=float(spf),
    )


@dataclass(frozen=True, slots=True)
class Track2Metrics:
    min_a_dcf: float
    a_dcf_threshold: float
    min_tdcf: float | None = None
    tdcf_threshold: float | None = None
    teer: float | None = None
    teer_tau_asv: float | None = None
    teer_tau_cm: float | None = None
    notes: tuple[str, ...] = ()


def evaluate_track2(
    sasv_scores,
    classes,
    model: SasvCostModel = DEFAULT_SASV_COST,
    *,
    cm_scores=None,
    asv_scores=None,
    tdcf_asv_scores=None,
    asv_threshold: float | None = None,
    tdcf_norm: str = "v2",
) -> Track2Metrics:
    """Track 2 metrics for aligned per-trial score arrays.

    min a-DCF always. min t-DCF and t-EER need both ``cm_scores`` and
    ``asv_scores``; otherwise they stay None. ``tdcf_asv_scores`` (default:
    ``asv_scores``) sets the ASV operating point for t-DCF, at
    ``asv_threshold`` when given. When a tandem metric is undefined for the
    data it is left None and the reason is added to ``notes``.
    """
    codes = _as_codes(classes)

    def split(values):
        v = np.asarray(values, dtype=np.float64)
        return ScorePartition.from_classes(v[codes == 0], v[codes == 1], v[codes == 2])

    min_a_dcf, a_thr = compute_min_a_dcf(split(sasv_scores), model)
    if cm_scores is None or asv_scores is None:
        return Track2Metrics(min_a_dcf, a_thr)

    notes = []
    min_tdcf = tdcf_thr = None
    teer = None
    try:
        op_scores = asv_scores if tdcf_asv_scores is None else tdcf_asv_scores
        op = compute_asv_operating_point(split(op_scores), asv_threshold)
        min_tdcf, tdcf_thr = compute_asv_constrained_min_tdcf(split(cm_scores), op, model, tdcf_norm)
    except (DegenerateError, EmptyClassError) as exc:
        notes.append(f"min_tdcf undefined: {exc}")
    try:
        teer = compute_concurrent_teer(asv_scores, cm_scores, codes)
    except (NoCrossingError, EmptyClassError) as exc:
        notes.append(f"teer undefined: {exc}")
    return Track2Metrics(
        min_a_dcf=min_a_dcf,
        a_dcf_threshold=a_thr,
        min_tdcf=min_tdcf,
        tdcf_threshold=tdcf_thr,
        teer=None if teer is None else teer.common_error,
        teer_tau_asv=None if teer is None else teer.tau_asv,
        teer_tau_cm=None if teer is None else teer.tau_cm,
        notes=tuple(notes),
    )
