import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import norm

from spoofscore import (
    EmptyClassError,
    SpecError,
    Track,
    compute_eer,
    error_rate_curve,
    validate_submission,
)
from spoofscore.testkit import oracles
from spoofscore.testkit.synthetic import ClassSpec, Component, SyntheticSpec, generate, simple_spec

TRACK2_MEANS = {"target": {"asv": 2.0}, "nontarget": {"asv": -2.0}, "spoof": {"asv": 1.5}}


def _spec(seed=7, n=500, **kw):
    return simple_spec(
        2, {"target": n, "nontarget": n, "spoof": n},
        {c: {"asv": m["asv"], "cm": -m["asv"]} for c, m in TRACK2_MEANS.items()},
        seed=seed, sasv_from_sum=True, **kw,
    )


class TestGenerator:
    def test_same_seed_same_bytes(self, tmp_path):
        a = generate(_spec(7)).write(tmp_path / "a")
        b = generate(_spec(7)).write(tmp_path / "b")
        for x, y in zip(a, b):
            assert x.read_bytes() == y.read_bytes()

    def test_different_seed(self, tmp_path):
        a = generate(_spec(7)).write(tmp_path / "a")[0]
        b = generate(_spec(8)).write(tmp_path / "b")[0]
        assert a.read_bytes() != b.read_bytes()

    def test_classes_use_their_own_streams(self):
        base = generate(_spec(7, n=100))
        spec = _spec(7, n=100)
        classes = tuple(replace(c, count=300) if c.name == "spoof" else c for c in spec.classes)
        other = generate(replace(spec, classes=classes))

        def asv_of(data, cls):
            return sorted(s for s, r in zip(data.scores.asv_scores, data.keys) if r.trial_class.value == cls)

        assert asv_of(base, "target") == asv_of(other, "target")

    def test_output_validates(self):
        data = generate(_spec(3))
        assert validate_submission(data.scores, data.keys, 2).passed
        assert np.array_equal(data.scores.sasv_scores, data.scores.asv_scores + data.scores.cm_scores)

    @pytest.mark.slow
    def test_gaussian_asv_eer(self):
        spec = simple_spec(2, {"target": 10**6, "nontarget": 10**6, "spoof": 10**6}, TRACK2_MEANS, seed=1)
        data = generate(spec)
        cls = np.array([r.trial_class.value for r in data.keys])
        a = data.scores.asv_scores
        eer = compute_eer(error_rate_curve(a[cls == "target"], a[cls == "nontarget"]))[0]
        assert eer == pytest.approx(norm.cdf(-2.0), abs=0.001)
        assert round(100 * norm.cdf(-2.0), 2) == 2.28

    def test_condition_probabilities(self):
        probs = {"A17": 0.5, "A22": 0.3, "A31": 0.2}
        codecs = {"C00": 0.25, "C07": 0.75}
        n = 20_000
        spec = simple_spec(1, {"bonafide": 10, "spoof": n}, {"bonafide": {"cm": 1}, "spoof": {"cm": -1}},
                           seed=5, attacks=probs, codecs=codecs)
        keys = [r for r in generate(spec).keys if r.attack_label != "bonafide"]
        for label, p in probs.items():
            k = sum(r.attack_label == label for r in keys)
            assert abs(k - n * p) <= 3 * math.sqrt(n * p * (1 - p))
        for label, p in codecs.items():
            k = sum(r.codec_label == label for r in keys)
            assert abs(k - n * p) <= 3 * math.sqrt(n * p * (1 - p))

    def test_mixture(self):
        comps = (Component(-3.0, 0.1, 0.5), Component(3.0, 0.1, 0.5))
        spec = SyntheticSpec(1, (
            ClassSpec("bonafide", 2000, {"cm": comps}),
            ClassSpec("spoof", 10, {"cm": (Component(0.0),)}, attacks={"A17": 1.0}),
        ), seed=2)
        data = generate(spec)
        bona = np.array([s for s, r in zip(data.scores.cm_scores, data.keys) if r.attack_label == "bonafide"])
        assert abs(np.mean(bona > 0) - 0.5) < 0.05 and np.all(np.abs(np.abs(bona) - 3) < 1)

    @pytest.mark.parametrize("bad", [
        dict(classes=(ClassSpec("bonafide", 0, {"cm": (Component(0),)}),)),
        dict(classes=(ClassSpec("bonafide", 5, {"cm": (Component(0, std=0.0),)}),)),
        dict(classes=(ClassSpec("bonafide", 5, {"cm": (Component(0, weight=0.4),)}),)),
        dict(classes=(ClassSpec("target", 5, {"cm": (Component(0),)}),)),
        dict(classes=(ClassSpec("spoof", 5, {"cm": (Component(0),)}),)),
        dict(classes=(ClassSpec("bonafide", 5, {"cm": (Component(0),)}, codecs={"C12": 1.0}),)),
        dict(classes=(ClassSpec("bonafide", 5, {"cm": (Component(0),)}),), seed=-1),
    ])
    def test_invalid_specs(self, bad):
        kw = dict(track=Track.CM, seed=0) | bad
        with pytest.raises(SpecError):
            generate(SyntheticSpec(**kw))

    def test_track1_only_codec_rejected_for_track2(self):
        with pytest.raises(SpecError):
            generate(_spec(codecs={"C05": 1.0}))


class TestOracles:
    def test_perfect_track1(self):
        r = oracles.brute_force_track1([3.0, 4.0], [-3.0], 1.9)
        assert (r.min_dcf, r.act_dcf, r.eer) == (0.0, 0.0, 0.0)

    def test_all_zero_cllr(self):
        assert oracles.brute_force_cllr([0.0] * 4, [0.0] * 3) == 1.0

    def test_empty(self):
        with pytest.raises(EmptyClassError):
            oracles.brute_force_track1([], [1.0], 1.9)
        with pytest.raises(EmptyClassError):
            oracles.brute_force_teer([1.0, 2.0], [1.0, 2.0], [0, 2])

    def test_grid_cm_perfect_reduction(self):
        rng = np.random.default_rng(4)
        n = 150
        cls = rng.integers(0, 3, n)
        cls[:3] = [0, 1, 2]
        asv = np.round(np.array([2.0, -2.0, 1.5])[cls] + rng.normal(size=n), 2)
        cm = np.where(cls == 2, -50.0, rng.normal(size=n))
        asv[cls == 2] = 50.0
        g = oracles.brute_force_teer(asv, cm, cls, 1000)
        ref = oracles.brute_force_eer(asv[cls == 0], asv[cls == 1])
        # one grid step along each axis moves the rates by at most one trial
        step = 1.0 / min(np.sum(cls == 0), np.sum(cls == 1))
        assert g.common_error == pytest.approx(ref, abs=step)
