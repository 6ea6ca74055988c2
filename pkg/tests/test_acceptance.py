"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line that pytest prints in an
"acceptance criteria" section at the end of the run. Running this file
directly (``python3 tests/test_acceptance.py``) prints the same lines.
"""

from __future__ import annotations

import contextlib
import io
import json
import math
import time
import warnings

import numpy as np
import pytest
from scipy.interpolate import PchipInterpolator

from scoregen import tandem_set, track1_set, track2_set
from spoofscore import (
    DEFAULT_CM_COST,
    DEFAULT_SASV_COST,
    NoCrossingError,
    ScorePartition,
    compute_act_dcf,
    compute_cllr,
    compute_concurrent_teer,
    compute_eer,
    compute_min_a_dcf,
    compute_min_dcf,
    error_rate_curve,
    fit_monotone,
    sweep_error_rates,
)
from spoofscore.cli import main as cli_main
from spoofscore.testkit import oracles
from spoofscore.testkit.synthetic import gaussian_llr_partition

# tolerances and sizes fixed by the acceptance criteria
BETA = 1.9
ALPHA_REF, GAMMA_REF, COST_TOL = 1.58, 0.84, 0.005
N_ORACLE_SETS, ORACLE_SIZES, ORACLE_TOL = 1000, (3, 500), 1e-12
N_TEER_SETS, TEER_MAX_TRIALS, TEER_GRID, TEER_TOL = 200, 300, 2000, 1e-3
ORACLE_BUDGET_S = 300.0
N_INVARIANCE_SETS = 100
LLR_TRIALS, LLR_REL_TOL = 1_000_000, 0.05
PAV_TOL, PAV_DECIMALS = 1e-9, 6
REDUCTION_TOL = 1e-9
N_BONAFIDE_FULL, N_SPOOF_FULL, THROUGHPUT_BUDGET_S = 138_688, 542_086, 10.0
EVAL_ATTACKS = [f"A{i}" for i in range(17, 33)]


def _emit(verdict, number, ok, detail):
    verdict(number, ok, detail)
    assert ok, detail


def _run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = cli_main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


# 1 -------------------------------------------------------------------------


def test_cost_constants(verdict):
    m, s = DEFAULT_CM_COST, DEFAULT_SASV_COST
    ok = (
        m.beta == BETA
        and m.tau_bayes == -math.log(BETA)
        and abs(s.alpha - ALPHA_REF) <= COST_TOL
        and abs(s.gamma - GAMMA_REF) <= COST_TOL
    )
    detail = f"beta={m.beta!r} tau={m.tau_bayes!r} alpha={s.alpha:.4f} gamma={s.gamma:.4f}"
    _emit(verdict, 1, ok, detail)


# 2 -------------------------------------------------------------------------


def _track1_worst(rng) -> dict[str, float]:
    worst = dict.fromkeys(("min_dcf", "act_dcf", "eer", "cllr", "min_a_dcf"), 0.0)
    for _ in range(N_ORACLE_SETS):
        n = int(rng.integers(ORACLE_SIZES[0], ORACLE_SIZES[1] + 1))
        bona, spoof = track1_set(rng, n)
        part = ScorePartition(bonafide=bona, spoof=spoof)
        curve = sweep_error_rates(part)
        ref = oracles.brute_force_track1(bona, spoof, BETA)
        got = {
            "min_dcf": compute_min_dcf(curve)[0],
            "act_dcf": compute_act_dcf(part),
            "eer": compute_eer(curve)[0],
            "cllr": compute_cllr(part),
        }
        for k, v in got.items():
            worst[k] = max(worst[k], abs(v - getattr(ref, k)))

        tar, non, spf = track2_set(rng, n)
        mine = compute_min_a_dcf(ScorePartition.from_classes(tar, non, spf))[0]
        theirs = oracles.brute_force_min_a_dcf(tar, non, spf, DEFAULT_SASV_COST.alpha, DEFAULT_SASV_COST.gamma)[0]
        worst["min_a_dcf"] = max(worst["min_a_dcf"], abs(mine - theirs))
    return worst


def _teer_gaps(rng) -> tuple[list[float], int, int]:
    gaps, both_none, disagree = [], 0, 0
    for _ in range(N_TEER_SETS):
        n = int(rng.integers(TEER_MAX_TRIALS // 2, TEER_MAX_TRIALS + 1))
        asv, cm, cls = tandem_set(rng, n)
        try:
            mine = compute_concurrent_teer(asv, cm, cls).common_error
        except NoCrossingError:
            mine = None
        try:
            grid = oracles.brute_force_teer(asv, cm, cls, TEER_GRID).common_error
        except NoCrossingError:
            grid = None
        if mine is None and grid is None:
            both_none += 1
        elif mine is None or grid is None:
            disagree += 1
        else:
            gaps.append(abs(mine - grid))
    return gaps, both_none, disagree


def test_oracle_equivalence(verdict):
    start = time.perf_counter()
    worst = _track1_worst(np.random.default_rng(20240))
    gaps, both_none, disagree = _teer_gaps(np.random.default_rng(1))
    elapsed = time.perf_counter() - start
    n_over = sum(g > TEER_TOL for g in gaps)
    ok = (
        max(worst.values()) <= ORACLE_TOL
        and n_over == 0
        and disagree == 0
        and elapsed < ORACLE_BUDGET_S
    )
    detail = (
        "worst |engine-oracle| "
        + " ".join(f"{k}={v:.1e}" for k, v in worst.items())
        + f"; t-EER vs grid: {len(gaps)} sets, max gap {max(gaps):.2e}, "
        f"{n_over} over {TEER_TOL:g}, {both_none} no-crossing in both, {disagree} disagreements; "
        f"{elapsed:.0f}s"
    )
    _emit(verdict, 2, ok, detail)


# 3 -------------------------------------------------------------------------


def _spline(rng):
    knots = np.linspace(-12.0, 12.0, 9)
    values = np.cumsum(rng.uniform(0.2, 3.0, knots.size))
    return PchipInterpolator(knots, values, extrapolate=True)


def _transforms(rng):
    a, b = rng.uniform(0.1, 10.0), rng.uniform(-5.0, 5.0)
    spline = _spline(rng)
    return {
        "affine": lambda x: a * x + b,
        "exp": np.exp,
        "cube": lambda x: x**3,
        "softplus": lambda x: np.logaddexp(0.0, x),
        "spline": spline,
    }


def _keeps_order(x: np.ndarray, y: np.ndarray) -> bool:
    # the transforms are strictly increasing in exact arithmetic; make sure
    # floating point did not merge or swap any pair of observed values
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    return bool(np.all((np.diff(xs) > 0) == (np.diff(ys) > 0)) and np.all(np.diff(ys) >= 0))


def _invariant_metrics(bona, spoof, tar, non, spf, asv, cm, cls):
    curve = error_rate_curve(bona, spoof)
    try:
        teer = compute_concurrent_teer(asv, cm, cls).common_error
    except NoCrossingError:
        teer = None
    return (
        compute_min_dcf(curve)[0],
        compute_eer(curve)[0],
        compute_min_a_dcf(ScorePartition.from_classes(tar, non, spf))[0],
        teer,
    )


def test_monotone_invariance(verdict):
    rng = np.random.default_rng(31)
    failures, checked = [], 0
    for i in range(N_INVARIANCE_SETS):
        n = int(rng.integers(20, 301))
        bona, spoof = track1_set(rng, n)
        tar, non, spf = track2_set(rng, n)
        asv, cm, cls = tandem_set(rng, n)
        base = _invariant_metrics(bona, spoof, tar, non, spf, asv, cm, cls)
        for name, fn in _transforms(rng).items():
            pools = [bona, spoof, tar, non, spf, asv, cm]
            mapped = [fn(p) for p in pools]
            both = np.concatenate(pools[:2]), np.concatenate(mapped[:2])
            sasv = np.concatenate(pools[2:5]), np.concatenate(mapped[2:5])
            assert _keeps_order(*both) and _keeps_order(*sasv)
            assert _keeps_order(asv, mapped[5]) and _keeps_order(cm, mapped[6])
            got = _invariant_metrics(*mapped, cls)
            checked += 1
            if got != base:
                failures.append((i, name, base, got))
    ok = not failures
    detail = f"{checked} set/transform pairs, {len(failures)} differ (bitwise) in minDCF/EER/min a-DCF/t-EER"
    if failures:
        detail += f"; first: {failures[0]}"
    _emit(verdict, 3, ok, detail)


# 4 -------------------------------------------------------------------------


def test_calibration_pathologies(verdict):
    tau = DEFAULT_CM_COST.tau_bayes
    above = ScorePartition(bonafide=np.array([tau + 1.0, 3.0, 7.5]), spoof=np.array([tau + 1e-9, 0.0, 12.0]))
    zeros = ScorePartition(bonafide=np.zeros(7), spoof=np.zeros(11))
    act, cllr = compute_act_dcf(above), compute_cllr(zeros)
    _emit(verdict, 4, act == 1.0 and cllr == 1.0, f"actDCF(all above tau_Bayes)={act!r} C_llr(all zero)={cllr!r}")


# 5 -------------------------------------------------------------------------


def test_calibration_efficacy(verdict):
    llr = gaussian_llr_partition(LLR_TRIALS, seed=5)
    min_dcf = compute_min_dcf(sweep_error_rates(llr))[0]
    act_dcf = compute_act_dcf(llr)
    rel = act_dcf / min_dcf - 1.0
    ideal_ok = abs(rel) <= LLR_REL_TOL

    rng = np.random.default_rng(55)
    pav_worst, changed = -math.inf, 0
    for _ in range(50):
        n = int(rng.integers(20, 2001))
        bona, spoof = track1_set(rng, n)
        scale, shift = 10 ** rng.uniform(-2, 2), rng.uniform(-20, 20)
        part = ScorePartition(bonafide=scale * bona + shift, spoof=scale * spoof + shift)
        before = compute_min_dcf(sweep_error_rates(part))[0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cmap = fit_monotone(part)
        cal = ScorePartition(bonafide=cmap(part.bonafide), spoof=cmap(part.spoof))
        after = compute_min_dcf(sweep_error_rates(cal))[0]
        pav_worst = max(pav_worst, compute_act_dcf(cal) - after)
        changed += round(before, PAV_DECIMALS) != round(after, PAV_DECIMALS)
    pav_ok = pav_worst <= PAV_TOL and changed == 0
    detail = (
        f"ideal LLR actDCF/minDCF-1={rel:+.4f}; PAV: max(actDCF-minDCF)={pav_worst:.2e}, "
        f"{changed} of 50 minDCF changed"
    )
    _emit(verdict, 5, ideal_ok and pav_ok, detail)


# 6 -------------------------------------------------------------------------


def test_teer_reductions(verdict):
    rng = np.random.default_rng(66)
    worst_cm, worst_asv = 0.0, 0.0
    for _ in range(50):
        n = int(rng.integers(10, 400))
        asv, cm, cls = tandem_set(rng, n)
        tar, non, spf = cls == 0, cls == 1, cls == 2

        # CM rejects every spoof by an unbounded margin, and ASV accepts spoofs
        cm_perfect = cm.copy()
        cm_perfect[spf] = -1e300
        asv_hi = asv.copy()
        asv_hi[spf] = asv.max() + 1.0
        t = compute_concurrent_teer(asv_hi, cm_perfect, cls).common_error
        ref = compute_eer(error_rate_curve(asv[tar], asv[non]))[0]
        worst_cm = max(worst_cm, abs(t - ref), abs(t - oracles.brute_force_eer(asv[tar], asv[non])))

        # ASV rejects every nontarget by an unbounded margin
        asv_perfect = asv.copy()
        asv_perfect[non] = -1e300
        t = compute_concurrent_teer(asv_perfect, cm, cls).common_error
        ref = compute_eer(error_rate_curve(cm[tar], cm[spf]))[0]
        worst_asv = max(worst_asv, abs(t - ref), abs(t - oracles.brute_force_eer(cm[tar], cm[spf])))
    ok = worst_cm <= REDUCTION_TOL and worst_asv <= REDUCTION_TOL
    _emit(verdict, 6, ok, f"CM-perfect max dev {worst_cm:.1e}; ASV-perfect max dev {worst_asv:.1e}")


# 7 -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def full_scale(tmp_path_factory):
    d = tmp_path_factory.mktemp("full")
    code, _, err = _run_cli(
        ["generate", "--track", "1", "--out", d, "--seed", "2024",
         "--n-bonafide", N_BONAFIDE_FULL, "--n-spoof", N_SPOOF_FULL,
         "--attacks", *EVAL_ATTACKS, "--codecs", "all"]
    )
    assert code == 0, err
    return d / "synthetic.scores.tsv", d / "synthetic.keys.tsv"


def test_throughput_and_determinism(verdict, full_scale, tmp_path):
    scores, keys = full_scale
    timings, blobs = {}, {}
    for jobs in (1, 4):
        out = tmp_path / f"jobs{jobs}"
        start = time.perf_counter()
        code, _, err = _run_cli(["evaluate", scores, keys, "--track", "1", "--jobs", jobs, "--out", out])
        timings[jobs] = time.perf_counter() - start
        assert code == 0, err
        blobs[jobs] = tuple((out / f"{scores.name}.report.{fmt}").read_bytes() for fmt in ("tsv", "json"))
    report = json.loads(blobs[1][1])
    n_attack = sum(r["condition"] != "bonafide" for r in report["per_attack"])
    shape_ok = n_attack == 16 and len(report["per_codec"]) == 12
    ok = max(timings.values()) < THROUGHPUT_BUDGET_S and blobs[1] == blobs[4] and shape_ok
    detail = (
        f"{N_BONAFIDE_FULL}+{N_SPOOF_FULL} trials, {n_attack} attacks x {len(report['per_codec'])} codecs: "
        f"jobs=1 {timings[1]:.2f}s, jobs=4 {timings[4]:.2f}s, identical={blobs[1] == blobs[4]}"
    )
    _emit(verdict, 7, ok, detail)


# 8 -------------------------------------------------------------------------


def test_sasv_only_nulls(verdict, tmp_path):
    code, _, err = _run_cli(
        ["generate", "--track", "2", "--out", tmp_path, "--seed", "8", "--sasv-only",
         "--n-target", 300, "--n-nontarget", 300, "--n-spoof", 300,
         "--attacks", "A17", "A18", "--codecs", "C00", "C01"]
    )
    assert code == 0, err
    scores, keys = tmp_path / "synthetic.scores.tsv", tmp_path / "synthetic.keys.tsv"
    code, _, err = _run_cli(["evaluate", scores, keys, "--track", "2", "--out", tmp_path])
    assert code == 0, err
    report = json.loads((tmp_path / "synthetic.scores.tsv.report.json").read_text())
    tsv = (tmp_path / "synthetic.scores.tsv.report.tsv").read_text()
    rows = [report["pooled"], *report["per_attack"], *report["per_codec"]]
    evaluated = [r for r in rows if r["metrics"] is not None]
    ok = (
        bool(evaluated)
        and all(isinstance(r["metrics"]["min_a_dcf"], float) for r in evaluated)
        and all(r["metrics"]["min_tdcf"] is None and r["metrics"]["teer_percent"] is None for r in evaluated)
        and "min_tdcf and teer not evaluated" in " ".join(report["notes"])
    )
    pooled_line = next(line for line in tsv.splitlines() if line.startswith("pooled"))
    ok = ok and pooled_line.split("\t").count("-") >= 2
    m = report["pooled"]["metrics"]
    _emit(verdict, 8, ok, f"pooled min_a_dcf={m['min_a_dcf']} min_tdcf={m['min_tdcf']} teer={m['teer_percent']}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
