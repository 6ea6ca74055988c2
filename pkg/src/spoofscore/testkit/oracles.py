"""Brute-force reference metrics.

Written for clarity, not speed, and deliberately independent of the metric
engines: every rate here is obtained by direct comparison of each score
against each candidate threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyClassError, NoCrossingError

__all__ = [
    "GridTeer",
    "OracleTrack1",
    "brute_force_act_dcf",
    "brute_force_cllr",
    "brute_force_eer",
    "brute_force_min_a_dcf",
    "brute_force_min_dcf",
    "brute_force_min_tdcf",
    "brute_force_rocch_eer",
    "brute_force_teer",
    "brute_force_track1",
]


def _candidates(*groups) -> np.ndarray:
    values = sorted({float(x) for g in groups for x in g})
    return np.array([-math.inf] + values + [math.inf])


def _miss_fa(pos, neg, thresholds):
    pos = np.asarray(pos, dtype=float)
    neg = np.asarray(neg, dtype=float)
    miss = (pos[None, :] < thresholds[:, None]).sum(axis=1) / pos.size
    fa = (neg[None, :] >= thresholds[:, None]).sum(axis=1) / neg.size
    return miss, fa


def _check(**buckets):
    for name, b in buckets.items():
        if len(b) == 0:
            raise EmptyClassError(name)


def brute_force_min_dcf(bonafide, spoof, beta: float) -> tuple[float, float]:
    _check(bonafide=bonafide, spoof=spoof)
    thr = _candidates(bonafide, spoof)
    miss, fa = _miss_fa(bonafide, spoof, thr)
    best, best_t = math.inf, math.nan
    for t, m, f in zip(thr, miss, fa):
        c = beta * m + f
        if c < best:
            best, best_t = c, t
    return float(best), float(best_t)


def brute_force_act_dcf(bonafide, spoof, beta: float) -> float:
    _check(bonafide=bonafide, spoof=spoof)
    tau = -math.log(beta)
    m = sum(1 for s in bonafide if s < tau) / len(bonafide)
    f = sum(1 for s in spoof if s >= tau) / len(spoof)
    return beta * m + f


def brute_force_eer(pos, neg) -> float:
    """Scan consecutive vertex pairs for the first miss/false-alarm crossing."""
    _check(pos=pos, neg=neg)
    thr = _candidates(pos, neg)
    miss, fa = _miss_fa(pos, neg, thr)
    for i in range(len(thr)):
        d = miss[i] - fa[i]
        if d == 0:
            return float(miss[i])
        if d < 0 and i + 1 < len(thr) and miss[i + 1] - fa[i + 1] > 0:
            d_next = miss[i + 1] - fa[i + 1]
            w = -d / (d_next - d)
            return float(miss[i] + w * (miss[i + 1] - miss[i]))
    raise AssertionError("rates never cross")  # pragma: no cover


def brute_force_rocch_eer(pos, neg) -> float:
    """Convex-hull EER as max over operating weights of the minimum risk.

    For every weight w the minimum of w*Pmiss + (1-w)*Pfa over ROC points is
    the hull's support function; its maximum over w is where the hull meets
    the diagonal. The maximum sits at w in {0, 1} or where two points tie,
    so all pairwise tie weights are enumerated (cubic; small inputs only).
    """
    _check(pos=pos, neg=neg)
    thr = _candidates(pos, neg)
    miss, fa = _miss_fa(pos, neg, thr)
    weights = {0.0, 1.0}
    n = len(thr)
    for i in range(n):
        for j in range(i + 1, n):
            # w*m_i + (1-w)*f_i == w*m_j + (1-w)*f_j
            den = (miss[i] - fa[i]) - (miss[j] - fa[j])
            if den != 0:
                w = (fa[j] - fa[i]) / den
                if 0.0 <= w <= 1.0:
                    weights.add(float(w))
    return float(max(np.min(w * miss + (1 - w) * fa) for w in weights))


def _softplus(x: float) -> float:
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def brute_force_cllr(bonafide, spoof) -> float:
    _check(bonafide=bonafide, spoof=spoof)
    b = sum(_softplus(-float(s)) for s in bonafide) / len(bonafide)
    s = sum(_softplus(float(x)) for x in spoof) / len(spoof)
    return (b + s) / (2 * math.log(2))


@dataclass(frozen=True)
class OracleTrack1:
    min_dcf: float
    min_dcf_threshold: float
    act_dcf: float
    cllr: float
    eer: float


def brute_force_track1(bonafide, spoof, beta: float) -> OracleTrack1:
    min_dcf, thr = brute_force_min_dcf(bonafide, spoof, beta)
    return OracleTrack1(
        min_dcf=min_dcf,
        min_dcf_threshold=thr,
        act_dcf=brute_force_act_dcf(bonafide, spoof, beta),
        cllr=brute_force_cllr(bonafide, spoof),
        eer=brute_force_eer(bonafide, spoof),
    )


def brute_force_min_a_dcf(target, nontarget, spoof, alpha: float, gamma: float) -> tuple[float, float]:
    _check(target=target, nontarget=nontarget, spoof=spoof)
    thr = _candidates(target, nontarget, spoof)
    best, best_t = math.inf, math.nan
    for t in thr:
        pm = sum(1 for s in target if s < t) / len(target)
        pn = sum(1 for s in nontarget if s >= t) / len(nontarget)
        ps = sum(1 for s in spoof if s >= t) / len(spoof)
        c = alpha * pm + (1 - gamma) * pn + gamma * ps
        if c < best:
            best, best_t = c, t
    return float(best), float(best_t)


def brute_force_min_tdcf(
    cm_bonafide,
    cm_spoof,
    asv_target,
    asv_nontarget,
    asv_spoof,
    tau_asv: float,
    costs: tuple[float, float, float],
    priors: tuple[float, float, float],
    norm: str = "v2",
) -> float:
    """Two-loop t-DCF oracle; every constant re-derived from raw ASV scores."""
    c_miss, c_fa_non, c_fa_spf = costs
    p_tar, p_non, p_spf = priors
    pm_asv = sum(1 for s in asv_target if s < tau_asv) / len(asv_target)
    pfa_asv = sum(1 for s in asv_nontarget if s >= tau_asv) / len(asv_nontarget)
    pms_asv = sum(1 for s in asv_spoof if s < tau_asv) / len(asv_spoof)
    c0 = p_tar * c_miss * pm_asv + p_non * c_fa_non * pfa_asv
    c1 = p_tar * c_miss - c0
    c2 = p_spf * c_fa_spf * (1 - pms_asv)
    best = math.inf
    for t in _candidates(cm_bonafide, cm_spoof):
        pm = sum(1 for s in cm_bonafide if s < t) / len(cm_bonafide)
        pf = sum(1 for s in cm_spoof if s >= t) / len(cm_spoof)
        if norm == "v2":
            v = (c0 + c1 * pm + c2 * pf) / (c0 + min(c1, c2))
        else:
            v = (c1 * pm + c2 * pf) / min(c1, c2)
        best = min(best, v)
    return float(best)


@dataclass(frozen=True)
class GridTeer:
    common_error: float
    max_gap: float
    tau_asv: float
    tau_cm: float


def _interp_matrix(n_vertices: int, grid_n: int) -> tuple[np.ndarray, np.ndarray]:
    pos = np.linspace(0.0, n_vertices - 1, grid_n)
    lo = np.minimum(np.floor(pos).astype(int), n_vertices - 2)
    frac = pos - lo
    w = np.zeros((grid_n, n_vertices))
    w[np.arange(grid_n), lo] = 1.0 - frac
    w[np.arange(grid_n), lo + 1] += frac
    return w, pos


def _vertex_value(lattice: np.ndarray, pos: float) -> float:
    i = min(int(math.floor(pos)), lattice.size - 2)
    f = pos - i
    lo, hi = lattice[i], lattice[i + 1]
    if f == 0:
        return float(lo)
    if not math.isfinite(lo):
        return float(hi)
    if not math.isfinite(hi):
        return float(lo)
    return float(lo + f * (hi - lo))


def brute_force_teer(asv, cm, classes, grid_n: int = 2000, tolerance: float = 0.05) -> GridTeer:
    """Exhaustive grid search for the concurrent t-EER.

    Tandem rates are counted exactly at every pair of (ASV, CM) score
    vertices, extended between vertices by bilinear interpolation in rank
    coordinates, and probed on a ``grid_n`` x ``grid_n`` grid spanning every
    vertex of both axes. The probe with the smallest spread between the
    three rates wins; its mean rate is the common error. A spread above
    ``tolerance`` means the rates never meet.
    """
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")
    asv = np.asarray(asv, dtype=float)
    cm = np.asarray(cm, dtype=float)
    classes = np.asarray(classes)
    names = ("target", "nontarget", "spoof")
    for c, name in enumerate(names):
        if not np.any(classes == c):
            raise EmptyClassError(name)

    a_lat = _candidates(asv)
    c_lat = _candidates(cm)
    rates = []
    for c in range(3):
        sel = classes == c
        passes_asv = (asv[sel][:, None] >= a_lat[None, :]).astype(float)
        passes_cm = (cm[sel][:, None] >= c_lat[None, :]).astype(float)
        accepted = passes_asv.T @ passes_cm / sel.sum()
        rates.append(1.0 - accepted if c == 0 else accepted)

    wa, pos_a = _interp_matrix(a_lat.size, grid_n)
    wc, pos_c = _interp_matrix(c_lat.size, grid_n)
    surf = [wa @ r @ wc.T for r in rates]
    hi = np.maximum(np.maximum(surf[0], surf[1]), surf[2])
    lo = np.minimum(np.minimum(surf[0], surf[1]), surf[2])
    gap = hi - lo
    g = int(np.argmin(gap))
    ia, ic = np.unravel_index(g, gap.shape)
    best_gap = float(gap[ia, ic])
    if best_gap > tolerance:
        raise NoCrossingError(f"closest grid point still has rate spread {best_gap:.4f}")
    common = float((surf[0][ia, ic] + surf[1][ia, ic] + surf[2][ia, ic]) / 3.0)
    return GridTeer(
        common_error=common,
        max_gap=best_gap,
        tau_asv=_vertex_value(a_lat, pos_a[ia]),
        tau_cm=_vertex_value(c_lat, pos_c[ic]),
    )
