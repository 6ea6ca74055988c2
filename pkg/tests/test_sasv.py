import math

import numpy as np
import pytest
from scipy.stats import norm

from scoregen import tandem_set, track2_set
from spoofscore import (
    DEFAULT_SASV_COST,
    AsvOperatingPoint,
    DegenerateError,
    EmptyClassError,
    NoCrossingError,
    ScorePartition,
    compute_a_dcf,
    compute_asv_constrained_min_tdcf,
    compute_asv_operating_point,
    compute_concurrent_teer,
    compute_eer,
    compute_min_a_dcf,
    error_rate_curve,
    evaluate_track2,
)
from spoofscore.sasv import tdcf_constants, tdcf_curve
from spoofscore.testkit import oracles
from spoofscore.testkit.synthetic import generate, simple_spec

M = DEFAULT_SASV_COST


def sasv(tar, non, spf):
    return ScorePartition.from_classes(np.asarray(tar, float), np.asarray(non, float), np.asarray(spf, float))


class TestADcf:
    p = sasv([3.0, 4.0], [-1.0], [0.0, 1.0])

    def test_separating_threshold(self):
        assert compute_a_dcf(self.p, M, 2.0) == 0.0

    def test_accept_all(self):
        assert compute_a_dcf(self.p, M, -math.inf) == pytest.approx(1.0, abs=1e-15)

    def test_reject_all(self):
        assert compute_a_dcf(self.p, M, math.inf) == M.alpha

    def test_min_perfect(self):
        assert compute_min_a_dcf(self.p)[0] == 0.0

    def test_empty(self):
        with pytest.raises(EmptyClassError, match="nontarget"):
            compute_min_a_dcf(sasv([1.0], [], [0.0]))

    def test_one_distribution(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=90)
        tar, non, spf = x[:30], x[30:60], x[60:]
        got = compute_min_a_dcf(sasv(tar, non, spf))[0]
        assert got == pytest.approx(oracles.brute_force_min_a_dcf(tar, non, spf, M.alpha, M.gamma)[0], abs=1e-12)
        assert got <= 1.0

    def test_against_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            tar, non, spf = track2_set(rng, int(rng.integers(3, 500)))
            got, thr = compute_min_a_dcf(sasv(tar, non, spf))
            ref, ref_thr = oracles.brute_force_min_a_dcf(tar, non, spf, M.alpha, M.gamma)
            assert got == pytest.approx(ref, abs=1e-12)
            assert 0.0 <= got <= 1.0 + 1e-15

    def test_raising_spoof_scores_never_helps(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            tar, non, spf = track2_set(rng, int(rng.integers(3, 100)))
            before = compute_min_a_dcf(sasv(tar, non, spf))[0]
            after = compute_min_a_dcf(sasv(tar, non, spf + rng.uniform(0, 2, spf.size)))[0]
            assert after >= before - 1e-15


class TestOperatingPoint:
    def test_separable(self):
        op = compute_asv_operating_point(sasv([2.0, 3.0], [-1.0, 0.0], [1.0]))
        assert (op.p_miss, op.p_fa) == (0.0, 0.0)

    def test_spoofs_above_targets(self):
        op = compute_asv_operating_point(sasv([2.0, 3.0], [-1.0, 0.0], [5.0, 6.0]))
        assert op.p_miss_spf == 0.0

    def test_fixed_threshold(self):
        op = compute_asv_operating_point(sasv([2.0, 3.0], [-1.0, 0.0], [1.0]), threshold=2.5)
        assert op.threshold == 2.5 and op.p_miss == 0.5 and op.p_miss_spf == 1.0

    def test_gaussian_rates(self):
        spec = simple_spec(
            2, {"target": 200_000, "nontarget": 200_000, "spoof": 200_000},
            {"target": {"asv": 2.0}, "nontarget": {"asv": -2.0}, "spoof": {"asv": 1.5}}, seed=11,
        )
        data = generate(spec)
        cls = np.array([r.trial_class.value for r in data.keys])
        a = data.scores.asv_scores
        op = compute_asv_operating_point(sasv(a[cls == "target"], a[cls == "nontarget"], a[cls == "spoof"]))
        # equal-variance Gaussians at +-2 cross at 0
        assert op.p_miss == pytest.approx(norm.cdf(-2.0), abs=0.005)
        assert op.p_fa == pytest.approx(norm.cdf(-2.0), abs=0.005)
        assert op.p_miss_spf == pytest.approx(norm.cdf(-1.5), abs=0.005)


class TestTdcf:
    def test_perfect(self):
        cm = ScorePartition(bonafide=[1.0, 2.0], spoof=[-1.0])
        op = AsvOperatingPoint(0.0, 0.0, 0.0, 0.0)
        assert compute_asv_constrained_min_tdcf(cm, op)[0] == 0.0

    def test_accept_all_hand_value(self):
        op = AsvOperatingPoint(p_miss=0.5, p_fa=0.05, p_miss_spf=0.0, threshold=0.0)
        c0, c1, c2 = tdcf_constants(op, M)
        assert c0 == pytest.approx(0.9405 * 0.5 + 0.0095 * 10 * 0.05, abs=1e-15)
        assert c1 == pytest.approx(0.9405 - c0, abs=1e-15)
        assert c2 == pytest.approx(0.5, abs=1e-15)
        thr, cost = tdcf_curve(ScorePartition(bonafide=[0.0, 1.0], spoof=[0.5]), op, M)
        assert thr[0] == -math.inf
        assert cost[0] == pytest.approx((0.475 + 0.5) / (0.475 + 0.4655), abs=1e-12)

    def test_v1(self):
        op = AsvOperatingPoint(p_miss=0.5, p_fa=0.05, p_miss_spf=0.0, threshold=0.0)
        _, cost = tdcf_curve(ScorePartition(bonafide=[0.0, 1.0], spoof=[0.5]), op, M, norm="v1")
        assert cost[0] == pytest.approx(0.5 / 0.4655, abs=1e-12)

    def test_degenerate(self):
        op = AsvOperatingPoint(p_miss=1.0, p_fa=0.5, p_miss_spf=0.0, threshold=0.0)
        with pytest.raises(DegenerateError):
            compute_asv_constrained_min_tdcf(ScorePartition(bonafide=[1.0], spoof=[0.0]), op)

    def test_unknown_norm(self):
        with pytest.raises(ValueError):
            compute_asv_constrained_min_tdcf(
                ScorePartition(bonafide=[1.0], spoof=[0.0]), AsvOperatingPoint(0, 0, 0, 0), norm="v3"
            )

    @pytest.mark.parametrize("norm_", ["v1", "v2"])
    def test_against_oracle(self, norm_):
        rng = np.random.default_rng(4)
        checked = 0
        for _ in range(60):
            asv, cm, cls = tandem_set(rng, int(rng.integers(10, 300)))
            tar, non, spf = (asv[cls == c] for c in range(3))
            op = compute_asv_operating_point(sasv(tar, non, spf))
            cm_part = ScorePartition(bonafide=cm[cls != 2], spoof=cm[cls == 2])
            try:
                got = compute_asv_constrained_min_tdcf(cm_part, op, M, norm_)[0]
            except DegenerateError:
                continue
            ref = oracles.brute_force_min_tdcf(
                cm[cls != 2], cm[cls == 2], tar, non, spf, op.threshold,
                (M.c_miss, M.c_fa_non, M.c_fa_spf), (M.prior_tar, M.prior_non, M.prior_spf), norm_,
            )
            assert got == pytest.approx(ref, abs=1e-12)
            checked += 1
        assert checked > 40


class TestTeer:
    def test_cm_perfect_reduction(self):
        rng = np.random.default_rng(5)
        asv, cm, cls = tandem_set(rng, 300)
        cm[cls == 2] = -1e300
        asv[cls == 2] = 100.0
        t = compute_concurrent_teer(asv, cm, cls)
        ref = compute_eer(error_rate_curve(asv[cls == 0], asv[cls == 1]))[0]
        assert t.common_error == pytest.approx(ref, abs=1e-9)

    def test_asv_perfect_reduction(self):
        rng = np.random.default_rng(6)
        asv, cm, cls = tandem_set(rng, 300)
        asv[cls == 1] = -1e300
        t = compute_concurrent_teer(asv, cm, cls)
        ref = compute_eer(error_rate_curve(cm[cls == 0], cm[cls == 2]))[0]
        assert t.common_error == pytest.approx(ref, abs=1e-9)

    def test_rates_agree_at_solution(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            t = compute_concurrent_teer(*tandem_set(rng, int(rng.integers(30, 300))))
            assert t.max_gap <= 1e-6
            assert t.common_error == pytest.approx(t.p_miss, abs=1e-6)

    def test_accepts_class_names(self):
        rng = np.random.default_rng(8)
        asv, cm, cls = tandem_set(rng, 100)
        names = np.array(["target", "nontarget", "spoof"])[cls]
        assert compute_concurrent_teer(asv, cm, names) == compute_concurrent_teer(asv, cm, cls)

    def test_grid_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            asv, cm, cls = tandem_set(rng, int(rng.integers(100, 200)))
            g = oracles.brute_force_teer(asv, cm, cls, 600)
            assert compute_concurrent_teer(asv, cm, cls).common_error == pytest.approx(g.common_error, abs=5e-3)

    def test_no_crossing_parity(self):
        rng = np.random.default_rng(0)
        asv = np.r_[rng.normal(2, 1, 20), rng.normal(-2, 1, 20), [5.0]]
        cm = np.r_[rng.normal(2, 1, 40), [5.0]]
        cls = np.r_[np.zeros(20, int), np.ones(20, int), [2]]
        with pytest.raises(NoCrossingError):
            compute_concurrent_teer(asv, cm, cls)
        with pytest.raises(NoCrossingError):
            oracles.brute_force_teer(asv, cm, cls, 200)

    def test_empty_class(self):
        with pytest.raises(EmptyClassError):
            compute_concurrent_teer([1.0, 2.0], [1.0, 2.0], [0, 1])

    def test_grid_size_floor(self):
        with pytest.raises(ValueError):
            oracles.brute_force_teer([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0, 1, 2], grid_n=50)


class TestEvaluateTrack2:
    def test_sasv_only(self):
        rng = np.random.default_rng(10)
        asv, cm, cls = tandem_set(rng, 200)
        m = evaluate_track2(asv + cm, cls)
        assert m.min_tdcf is None and m.teer is None and m.min_a_dcf > 0

    def test_triplet(self):
        rng = np.random.default_rng(11)
        asv, cm, cls = tandem_set(rng, 200)
        m = evaluate_track2(asv + cm, cls, cm_scores=cm, asv_scores=asv)
        assert m.min_tdcf is not None and m.teer is not None and not m.notes

    def test_undefined_metrics_become_notes(self):
        rng = np.random.default_rng(0)
        asv = np.r_[rng.normal(2, 1, 20), rng.normal(-2, 1, 20), [5.0]]
        cm = np.r_[rng.normal(2, 1, 40), [5.0]]
        cls = np.r_[np.zeros(20, int), np.ones(20, int), [2]]
        m = evaluate_track2(asv + cm, cls, cm_scores=cm, asv_scores=asv)
        assert m.teer is None and any(n.startswith("teer undefined") for n in m.notes)
