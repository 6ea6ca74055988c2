"""Seeded synthetic score sets drawn from per-class Gaussian mixtures.

Randomness: ``SeedSequence(seed).spawn(len(classes) + 1)`` gives one PCG64
stream per class, in the order the classes are listed, plus a final stream
that shuffles the trial order. Inside a class stream the draws always run
in the same order: one mixture draw per score field (fields sorted by
name), then codec, then attack, then speaker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import SpecError
from ..fileio import write_keys, write_scores
from ..model import (
    ATTACKS,
    BONAFIDE_LABEL,
    CODECS,
    ScorePartition,
    ScoreSet,
    Track,
    TrialClass,
    TrialRecord,
)

__all__ = [
    "ClassSpec",
    "Component",
    "SyntheticData",
    "SyntheticSpec",
    "gaussian_llr_partition",
    "generate",
    "simple_spec",
]

SCORE_FIELDS = ("asv", "cm", "sasv")


@dataclass(frozen=True)
class Component:
    mean: float
    std: float = 1.0
    weight: float = 1.0


@dataclass(frozen=True)
class ClassSpec:
    """One trial class: its size, score mixtures and condition mix.

    ``scores`` maps a score field (cm, asv, sasv) to its mixture. ``codecs``
    and ``attacks`` map labels to assignment probabilities; spoof classes
    need ``attacks``, bona fide classes are always labelled "bonafide".
    """

    name: str
    count: int
    scores: Mapping[str, tuple[Component, ...]]
    codecs: Mapping[str, float] = field(default_factory=lambda: {"C00": 1.0})
    attacks: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SyntheticSpec:
    track: Track
    classes: tuple[ClassSpec, ...]
    seed: int = 0
    n_speakers: int = 50
    sasv_from_sum: bool = False  # derive sasv = asv + cm when not drawn directly

    def validate(self) -> None:
        track = Track(self.track)
        allowed = {"bonafide", "spoof"} if track is Track.CM else {"target", "nontarget", "spoof"}
        seen = set()
        for cs in self.classes:
            if cs.name not in allowed:
                raise SpecError(f"class {cs.name!r} not valid for track {int(track)}")
            if cs.name in seen:
                raise SpecError(f"class {cs.name!r} listed twice")
            seen.add(cs.name)
            if cs.count < 1:
                raise SpecError(f"{cs.name}: count must be >= 1")
            if not cs.scores:
                raise SpecError(f"{cs.name}: no score fields")
            for fname, comps in cs.scores.items():
                if fname not in SCORE_FIELDS:
                    raise SpecError(f"{cs.name}: unknown score field {fname!r}")
                if not comps:
                    raise SpecError(f"{cs.name}/{fname}: empty mixture")
                for c in comps:
                    if not (c.std > 0 and math.isfinite(c.std) and math.isfinite(c.mean)):
                        raise SpecError(f"{cs.name}/{fname}: stddev must be positive and finite")
                    if c.weight < 0:
                        raise SpecError(f"{cs.name}/{fname}: negative weight")
                if abs(sum(c.weight for c in comps) - 1.0) > 1e-9:
                    raise SpecError(f"{cs.name}/{fname}: weights must sum to 1")
            _check_probs(cs.name, "codec", cs.codecs, lambda c: c in CODECS and int(track) in CODECS[c][2])
            if cs.name == "spoof":
                if not cs.attacks:
                    raise SpecError("spoof class needs attack probabilities")
                _check_probs(cs.name, "attack", cs.attacks, lambda a: a in ATTACKS)
            elif cs.attacks:
                raise SpecError(f"{cs.name}: bona fide classes take no attack labels")
        fields = {frozenset(cs.scores) for cs in self.classes}
        if len(fields) != 1:
            raise SpecError("every class must draw the same score fields")
        if self.n_speakers < 1:
            raise SpecError("n_speakers must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise SpecError("seed must be a 64-bit unsigned integer")


def _check_probs(cls_name, what, probs, ok) -> None:
    for label, p in probs.items():
        if not ok(label):
            raise SpecError(f"{cls_name}: {what} label {label!r} not allowed")
        if p < 0:
            raise SpecError(f"{cls_name}: negative {what} probability")
    if abs(sum(probs.values()) - 1.0) > 1e-9:
        raise SpecError(f"{cls_name}: {what} probabilities must sum to 1")


@dataclass(frozen=True, eq=False)
class SyntheticData:
    track: Track
    scores: ScoreSet
    keys: tuple[TrialRecord, ...]

    def write(self, directory: str | Path, stem: str = "synthetic") -> tuple[Path, Path]:
        """Write canonical score and key files; returns their paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        score_path = directory / f"{stem}.scores.tsv"
        key_path = directory / f"{stem}.keys.tsv"
        write_scores(score_path, self.scores)
        write_keys(key_path, self.keys)
        return score_path, key_path


def _draw_mixture(rng: np.random.Generator, comps: tuple[Component, ...], n: int) -> np.ndarray:
    if len(comps) == 1:
        return rng.normal(comps[0].mean, comps[0].std, n)
    which = rng.choice(len(comps), size=n, p=[c.weight for c in comps])
    means = np.array([c.mean for c in comps])[which]
    stds = np.array([c.std for c in comps])[which]
    return means + stds * rng.standard_normal(n)


def _assign(rng: np.random.Generator, probs: Mapping[str, float], n: int) -> np.ndarray:
    labels = sorted(probs)
    if len(labels) == 1:
        return np.full(n, labels[0], dtype=object)
    idx = rng.choice(len(labels), size=n, p=[probs[k] for k in labels])
    return np.array(labels, dtype=object)[idx]


def generate(spec: SyntheticSpec) -> SyntheticData:
    """Draw the score set and key records described by ``spec``."""
    spec.validate()
    track = Track(spec.track)
    seeds = np.random.SeedSequence(int(spec.seed)).spawn(len(spec.classes) + 1)
    streams = [np.random.Generator(np.random.PCG64(s)) for s in seeds]
    fields = sorted(spec.classes[0].scores)

    columns: dict[str, list[np.ndarray]] = {f: [] for f in fields}
    classes, codecs, attacks, speakers = [], [], [], []
    for cs, rng in zip(spec.classes, streams):
        for fname in fields:
            columns[fname].append(_draw_mixture(rng, tuple(cs.scores[fname]), cs.count))
        codecs.append(_assign(rng, cs.codecs, cs.count))
        if cs.name == "spoof":
            attacks.append(_assign(rng, cs.attacks, cs.count))
        else:
            attacks.append(np.full(cs.count, BONAFIDE_LABEL, dtype=object))
        speakers.append(rng.integers(0, spec.n_speakers, size=cs.count))
        classes.append(np.full(cs.count, cs.name, dtype=object))

    order = streams[-1].permutation(sum(cs.count for cs in spec.classes))
    cat = {f: np.concatenate(v)[order] for f, v in columns.items()}
    cls = np.concatenate(classes)[order]
    cod = np.concatenate(codecs)[order]
    att = np.concatenate(attacks)[order]
    spk = np.concatenate(speakers)[order]

    n = order.size
    width = max(6, len(str(n)))
    ids = [f"T{i:0{width}d}" for i in range(n)]
    keys = tuple(
        TrialRecord(tid, f"S{s:04d}", TrialClass(c), a, k)
        for tid, s, c, a, k in zip(ids, spk.tolist(), cls.tolist(), att.tolist(), cod.tolist())
    )
    if spec.sasv_from_sum and "sasv" not in cat and {"asv", "cm"} <= set(cat):
        cat["sasv"] = cat["asv"] + cat["cm"]
    scores = ScoreSet(
        ids,
        cm_scores=cat.get("cm"),
        asv_scores=cat.get("asv"),
        sasv_scores=cat.get("sasv"),
    )
    return SyntheticData(track, scores, keys)


def simple_spec(
    track: Track | int,
    counts: Mapping[str, int],
    means: Mapping[str, Mapping[str, float]],
    *,
    std: float = 1.0,
    seed: int = 0,
    attacks: Mapping[str, float] | None = None,
    codecs: Mapping[str, float] | None = None,
    sasv_from_sum: bool = False,
) -> SyntheticSpec:
    """Single-Gaussian classes with shared condition mixes.

    ``means[class][field]`` gives each class mean; e.g.
    ``{"target": {"asv": 2, "cm": 1.5}, ...}``.
    """
    codecs = dict(codecs or {"C00": 1.0})
    classes = []
    for name, n in counts.items():
        classes.append(
            ClassSpec(
                name=name,
                count=int(n),
                scores={f: (Component(float(m), std),) for f, m in means[name].items()},
                codecs=codecs,
                attacks=dict(attacks or {"A17": 1.0}) if name == "spoof" else {},
            )
        )
    return SyntheticSpec(Track(track), tuple(classes), seed=seed, sasv_from_sum=sasv_from_sum)


def gaussian_llr_partition(n_per_class: int, mean: float = 2.0, std: float = 1.0, seed: int = 0) -> ScorePartition:
    """Bona fide ~ N(+mean, std), spoof ~ N(-mean, std), scored by their exact LLR.

    For two equal-variance Gaussians the LLR of an observation x is
    ``2 * mean * x / std**2``, so these scores are perfectly calibrated.
    """
    rb, rs = (np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(2))
    k = 2.0 * mean / std**2
    return ScorePartition(
        bonafide=k * rb.normal(mean, std, n_per_class),
        spoof=k * rs.normal(-mean, std, n_per_class),
    )
