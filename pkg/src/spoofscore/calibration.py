"""Score-to-LLR calibration: affine logistic fit and a PAV monotone map.

Both maps are order-preserving, so threshold-free metrics such as minDCF
are unchanged by them while actDCF and C_llr can improve.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .detection import fixed_order_mean, softplus
from .errors import ConstantCalibrationWarning, SeparableWarning
from .model import DEFAULT_CM_COST, ScorePartition, ScoreSet

__all__ = [
    "MAX_SCALE",
    "AffineFit",
    "CalibrationMap",
    "apply",
    "fit_affine",
    "fit_monotone",
]

MAX_SCALE = 1e3
_LOG2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class CalibrationMap:
    """A fitted score -> LLR map.

    ``affine``: llr = scale * score + offset.
    ``monotone``: piecewise-linear through ``(knots, values)``, constant
    beyond the first and last knot.
    """

    kind: str
    scale: float = 1.0
    offset: float = 0.0
    knots: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "affine":
            if not (self.scale >= 0 and math.isfinite(self.scale) and math.isfinite(self.offset)):
                raise ValueError("affine map needs a finite, non-negative scale")
        elif self.kind == "monotone":
            if len(self.knots) == 0 or len(self.knots) != len(self.values):
                raise ValueError("monotone map needs matching, non-empty knots and values")
            if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
                raise ValueError("monotone knots must be strictly increasing")
            if any(b < a for a, b in zip(self.values, self.values[1:])):
                raise ValueError("monotone values must be non-decreasing")
        else:
            raise ValueError(f"unknown calibration kind {self.kind!r}")

    def __call__(self, scores) -> np.ndarray:
        x = np.asarray(scores, dtype=np.float64)
        if self.kind == "affine":
            return self.scale * x + self.offset
        return np.interp(x, self.knots, self.values)

    def to_dict(self) -> dict:
        if self.kind == "affine":
            return {"kind": "affine", "scale": self.scale, "offset": self.offset}
        return {"kind": "monotone", "knots": list(self.knots), "values": list(self.values)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> CalibrationMap:
        d = json.loads(text)
        if d.get("kind") == "affine":
            return cls("affine", scale=float(d["scale"]), offset=float(d["offset"]))
        return cls(
            d.get("kind", "?"),
            knots=tuple(float(v) for v in d.get("knots", ())),
            values=tuple(float(v) for v in d.get("values", ())),
        )


@dataclass(frozen=True)
class AffineFit:
    """Affine map plus the optimizer trace (normalized objective per iterate)."""

    map: CalibrationMap
    objective: tuple[float, ...]
    converged: bool
    capped: bool


def _objective(a, b, pos, neg, prior, logit):
    zp = a * pos + b + logit
    zn = a * neg + b + logit
    miss = fixed_order_mean(softplus(-zp))
    fa = fixed_order_mean(softplus(zn))
    return (prior * miss + (1.0 - prior) * fa) / _LOG2


def _grad_hess(a, b, pos, neg, prior, logit, fix_scale=False):
    zp = a * pos + b + logit
    zn = a * neg + b + logit
    rp = -expit(-zp) * (prior / pos.size)
    rn = expit(zn) * ((1.0 - prior) / neg.size)
    wp = expit(zp) * expit(-zp) * (prior / pos.size)
    wn = expit(zn) * expit(-zn) * ((1.0 - prior) / neg.size)
    g = np.array([rp @ pos + rn @ neg, rp.sum() + rn.sum()]) / _LOG2
    h = np.array(
        [
            [wp @ (pos * pos) + wn @ (neg * neg), wp @ pos + wn @ neg],
            [wp @ pos + wn @ neg, wp.sum() + wn.sum()],
        ]
    ) / _LOG2
    if fix_scale:
        g[0] = 0.0
        h[0, :] = h[:, 0] = 0.0
        h[0, 0] = 1.0
    return g, h


def fit_affine(
    partition: ScorePartition,
    prior: float | None = None,
    *,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> AffineFit:
    """Prior-weighted logistic-regression calibration.

    Minimizes ``prior * E_bona[softplus(-z)] + (1 - prior) * E_spoof[softplus(z)]``
    with ``z = a*s + b + logit(prior)``, divided by log 2 so that at prior
    0.5 it equals C_llr of the mapped scores. ``prior`` defaults to the
    bona fide prior whose Bayes threshold is the default actDCF threshold.

    Damped Newton with backtracking from (a, b) = (1, 0). If the classes are
    separable the scale is capped at ``MAX_SCALE`` (SeparableWarning); if the
    best scale is not positive the map collapses to the constant LLR 0
    (ConstantCalibrationWarning).
    """
    partition.require("bonafide", "spoof")
    if prior is None:
        prior = DEFAULT_CM_COST.effective_prior
    if not 0.0 < prior < 1.0:
        raise ValueError("prior must lie strictly between 0 and 1")
    pos = partition.bonafide
    neg = partition.spoof
    logit = math.log(prior / (1.0 - prior))

    lo = min(pos.min(), neg.min())
    hi = max(pos.max(), neg.max())
    if lo == hi:
        return _constant_fit(pos, neg, prior, logit, "all scores are equal")

    a, b = 1.0, 0.0
    capped = bool(pos.min() > neg.max())
    if capped:
        # the loss keeps falling as the scale grows: pin it and centre the gap
        a = MAX_SCALE
        b = -a * 0.5 * (pos.min() + neg.max()) - logit
    f = _objective(a, b, pos, neg, prior, logit)
    history = [f]
    converged = False
    for _ in range(max_iter):
        g, h = _grad_hess(a, b, pos, neg, prior, logit, fix_scale=capped)
        if math.hypot(g[0], g[1]) < tol:
            converged = True
            break
        try:
            step = np.linalg.solve(h + 1e-12 * np.eye(2), -g)
        except np.linalg.LinAlgError:
            step = -g
        if step @ g >= 0:  # not a descent direction; fall back to gradient
            step = -g
        t = 1.0
        while t > 1e-12:
            na = min(a + t * step[0], MAX_SCALE)
            nb = b + t * step[1]
            nf = _objective(na, nb, pos, neg, prior, logit)
            if nf <= f:
                break
            t *= 0.5
        else:
            converged = True  # no further decrease representable
            break
        a, b, f = na, nb, nf
        history.append(f)
        capped = capped or a == MAX_SCALE

    if a <= 0.0:
        return _constant_fit(pos, neg, prior, logit, "scores are not positively related to the labels")
    if capped:
        warnings.warn(
            f"classes are (nearly) separable; affine scale capped at {MAX_SCALE:g}",
            SeparableWarning,
            stacklevel=2,
        )
    return AffineFit(CalibrationMap("affine", scale=float(a), offset=float(b)), tuple(history), converged, capped)


def _constant_fit(pos, neg, prior, logit, reason: str) -> AffineFit:
    warnings.warn(
        f"{reason}; calibration falls back to the constant LLR 0",
        ConstantCalibrationWarning,
        stacklevel=3,
    )
    f = _objective(0.0, 0.0, pos, neg, prior, logit)
    return AffineFit(CalibrationMap("affine", scale=0.0, offset=0.0), (f,), True, False)


def _pav_blocks(pos: np.ndarray, neg: np.ndarray):
    """Pool-adjacent-violators over distinct scores.

    Returns per-block (lowest score, highest score, bona fide count, spoof count)
    with the bona fide proportion strictly increasing from block to block.
    """
    values = np.concatenate([pos, neg])
    is_pos = np.concatenate([np.ones(pos.size, dtype=np.int64), np.zeros(neg.size, dtype=np.int64)])
    distinct, inv = np.unique(values, return_inverse=True)
    n_pos = np.bincount(inv, weights=is_pos, minlength=distinct.size).astype(np.int64)
    n_all = np.bincount(inv, minlength=distinct.size).astype(np.int64)

    lo: list[float] = []
    hi: list[float] = []
    bp: list[int] = []
    bn: list[int] = []
    for x, p, n in zip(distinct.tolist(), n_pos.tolist(), n_all.tolist()):
        lo.append(x)
        hi.append(x)
        bp.append(p)
        bn.append(n)
        # merge while the previous block's proportion is not below this one's
        while len(bp) > 1 and bp[-2] * bn[-1] >= bp[-1] * bn[-2]:
            p_top, n_top, hi_top = bp.pop(), bn.pop(), hi.pop()
            lo.pop()
            bp[-1] += p_top
            bn[-1] += n_top
            hi[-1] = hi_top
    return lo, hi, bp, [n - p for n, p in zip(bn, bp)]


def fit_monotone(partition: ScorePartition, *, threshold: float | None = None) -> CalibrationMap:
    """Isotonic (PAV) calibration to LLRs.

    Each pooled block gets LLR ``log(bona/spoof) - log(N_bona/N_spoof)``.
    The two pure end blocks, whose LLR would be infinite, use add-half
    counts instead. With few trials that estimate can land on the wrong side
    of the decision ``threshold`` (default: the Bayes threshold of the
    default cost model), so a pure block is also kept on its own side of it,
    and pushed just past its neighbour if needed so the table stays strictly
    increasing.
    """
    partition.require("bonafide", "spoof")
    if threshold is None:
        threshold = DEFAULT_CM_COST.tau_bayes
    pos = partition.bonafide
    neg = partition.spoof
    lo, hi, bp, bs = _pav_blocks(pos, neg)
    prior_log_odds = math.log(pos.size) - math.log(neg.size)

    llr = []
    for p, s in zip(bp, bs):
        if p == 0 or s == 0:
            llr.append(math.log((p + 0.5) / (s + 0.5)) - prior_log_odds)
        else:
            llr.append(math.log(p / s) - prior_log_odds)
    if len(llr) > 1:
        if bs[-1] == 0:
            llr[-1] = max(llr[-1], threshold, math.nextafter(llr[-2], math.inf))
        if bp[0] == 0:
            llr[0] = min(llr[0], math.nextafter(threshold, -math.inf), math.nextafter(llr[1], -math.inf))

    knots: list[float] = []
    values: list[float] = []
    for x0, x1, v in zip(lo, hi, llr):
        knots.append(x0)
        values.append(v)
        if x1 != x0:
            knots.append(x1)
            values.append(v)
    return CalibrationMap("monotone", knots=tuple(knots), values=tuple(values))


def apply(cmap: CalibrationMap, scores: ScoreSet, field: str = "cm") -> ScoreSet:
    """Return ``scores`` with ``field`` passed through ``cmap``; order kept."""
    return scores.replace(**{f"{field}_scores": cmap(scores.field(field))})
