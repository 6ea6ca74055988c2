"""Trials, scores, condition vocabularies and cost models.

Everything here is immutable once built. Score arrays are float64 and are
flagged read-only so they can be shared between worker threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, EmptyClassError, JoinError

__all__ = [
    "ATTACKS",
    "CODECS",
    "CmCostModel",
    "DEFAULT_CM_COST",
    "DEFAULT_SASV_COST",
    "SasvCostModel",
    "ScorePartition",
    "ScoreSet",
    "Track",
    "TrialClass",
    "TrialRecord",
    "Vocabulary",
    "derive_cm_cost_model",
    "derive_sasv_cost_model",
    "join_labels",
    "partition_scores",
]


class Track(enum.IntEnum):
    CM = 1
    SASV = 2


class TrialClass(str, enum.Enum):
    TARGET = "target"
    NONTARGET = "nontarget"
    SPOOF = "spoof"
    # Track 1 keys only say "bona fide"; target status is unknown there.
    BONAFIDE = "bonafide"

    @property
    def is_bonafide(self) -> bool:
        return self is not TrialClass.SPOOF


# Evaluation-set attack inventory; A01-A08 train, A09-A16 dev, A17-A32 eval.
ATTACKS: dict[str, tuple[str, str]] = {
    "A01": ("TTS", "GlowTTS"),
    "A02": ("TTS", "variant of A01"),
    "A03": ("TTS", "variant of A01"),
    "A04": ("TTS", "GradTTS"),
    "A05": ("TTS", "variant of A04"),
    "A06": ("TTS", "variant of A04"),
    "A07": ("TTS", "FastPitch"),
    "A08": ("TTS", "VITS"),
    "A09": ("TTS", "ToucanTTS"),
    "A10": ("TTS", "A09+HifiGANv2"),
    "A11": ("TTS", "Tacotron2"),
    "A12": ("TTS", "In-house unit-select"),
    "A13": ("VC", "StarGANv2-VC"),
    "A14": ("TTS", "YourTTS"),
    "A15": ("VC", "VAE-GAN"),
    "A16": ("VC", "In-house ASR-based"),
    "A17": ("TTS", "ZMM-TTS"),
    "A18": ("AT", "A17+Malafide"),
    "A19": ("TTS", "MaryTTS"),
    "A20": ("AT", "A12+Malafide"),
    "A21": ("TTS", "A09+BigVGAN"),
    "A22": ("TTS", "variant of A09"),
    "A23": ("AT", "A09+Malafide"),
    "A24": ("VC", "In-house ASR-based"),
    "A25": ("VC", "DiffVC"),
    "A26": ("VC", "A16+original genuine noise"),
    "A27": ("AT", "A26+Malacopula"),
    "A28": ("TTS", "Pre-trained YourTTS"),
    "A29": ("TTS", "Pre-trained XTTS"),
    "A30": ("AT", "A18+Malafide+Malacopula"),
    "A31": ("AT", "A22+Malacopula"),
    "A32": ("AT", "A25+Malacopula"),
}

# codec id -> (codec, bandwidth, tracks in which the condition is evaluated)
CODECS: dict[str, tuple[str, str, frozenset[int]]] = {
    "C00": ("-", "16 kHz", frozenset({1, 2})),
    "C01": ("opus", "16 kHz", frozenset({1, 2})),
    "C02": ("amr", "16 kHz", frozenset({1, 2})),
    "C03": ("speex", "16 kHz", frozenset({1, 2})),
    "C04": ("Encodec", "16 kHz", frozenset({1})),
    "C05": ("mp3", "16 kHz", frozenset({1})),
    "C06": ("m4a", "16 kHz", frozenset({1})),
    "C07": ("mp3+Encodec", "16 kHz", frozenset({1})),
    "C08": ("opus", "8 kHz", frozenset({1, 2})),
    "C09": ("amr", "8 kHz", frozenset({1, 2})),
    "C10": ("speex", "8 kHz", frozenset({1, 2})),
    "C11": ("varied", "8 kHz", frozenset({1, 2})),
}

BONAFIDE_LABEL = "bonafide"


@dataclass(frozen=True)
class Vocabulary:
    """Closed label sets used to validate key files.

    Defaults to the challenge inventories; other datasets can pass their own.
    """

    attacks: frozenset[str] = frozenset(ATTACKS)
    codec_tracks: dict[str, frozenset[int]] = field(
        default_factory=lambda: {c: t for c, (_, _, t) in CODECS.items()}
    )

    def attack_ok(self, label: str) -> bool:
        return label == BONAFIDE_LABEL or label in self.attacks

    def codec_ok(self, label: str, track: Track | int) -> bool:
        tracks = self.codec_tracks.get(label)
        return tracks is not None and int(track) in tracks


@dataclass(frozen=True, slots=True)
class TrialRecord:
    trial_id: str
    speaker_id: str
    trial_class: TrialClass
    attack_label: str
    codec_label: str

    def __post_init__(self):
        is_spoof = self.trial_class is TrialClass.SPOOF
        if is_spoof == (self.attack_label == BONAFIDE_LABEL):
            raise ValueError(
                f"trial {self.trial_id}: class {self.trial_class.value!r} "
                f"inconsistent with attack label {self.attack_label!r}"
            )


def _frozen_array(values, check_finite: bool, name: str) -> np.ndarray | None:
    if values is None:
        return None
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if check_finite and not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"{name} score at position {bad} is not finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ScoreSet:
    """Aligned score lists for an ordered list of trials.

    ``check_finite=False`` lets a submission carrying NaN/inf be built so the
    validator can report it; metric code never accepts such a set.
    """

    trial_ids: tuple[str, ...]
    cm_scores: np.ndarray | None = None
    asv_scores: np.ndarray | None = None
    sasv_scores: np.ndarray | None = None
    check_finite: bool = True

    def __post_init__(self):
        object.__setattr__(self, "trial_ids", tuple(self.trial_ids))
        n = len(self.trial_ids)
        present = 0
        for name in ("cm", "asv", "sasv"):
            arr = _frozen_array(getattr(self, f"{name}_scores"), self.check_finite, name)
            if arr is not None:
                present += 1
                if arr.shape[0] != n:
                    raise ValueError(f"{name} scores: {arr.shape[0]} values for {n} trials")
            object.__setattr__(self, f"{name}_scores", arr)
        if present == 0:
            raise ValueError("a ScoreSet needs at least one score list")

    def __len__(self) -> int:
        return len(self.trial_ids)

    @property
    def is_triplet(self) -> bool:
        return (
            self.sasv_scores is not None
            and self.cm_scores is not None
            and self.asv_scores is not None
        )

    def field(self, name: str) -> np.ndarray:
        arr = getattr(self, f"{name}_scores")
        if arr is None:
            raise KeyError(f"score set has no {name} scores")
        return arr

    def take(self, index: Sequence[int] | np.ndarray) -> ScoreSet:
        index = np.asarray(index, dtype=np.intp)
        ids = tuple(self.trial_ids[i] for i in index)

        def pick(a):
            return None if a is None else a[index]

        return ScoreSet(
            ids,
            pick(self.cm_scores),
            pick(self.asv_scores),
            pick(self.sasv_scores),
            check_finite=self.check_finite,
        )

    def replace(self, **arrays) -> ScoreSet:
        kw = {
            "cm_scores": self.cm_scores,
            "asv_scores": self.asv_scores,
            "sasv_scores": self.sasv_scores,
        }
        kw.update(arrays)
        return ScoreSet(self.trial_ids, check_finite=self.check_finite, **kw)


_EMPTY = np.zeros(0)
_EMPTY.flags.writeable = False


@dataclass(frozen=True, eq=False)
class ScorePartition:
    """Scores of one kind split by ground-truth class.

    For Track 2, ``bonafide`` is the union of target and non-target scores so
    a CM partition can be read straight off a SASV-keyed join.
    """

    bonafide: np.ndarray = _EMPTY
    spoof: np.ndarray = _EMPTY
    target: np.ndarray = _EMPTY
    nontarget: np.ndarray = _EMPTY

    def __post_init__(self):
        for name in ("bonafide", "spoof", "target", "nontarget"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), True, name))

    def require(self, *buckets: str) -> None:
        for b in buckets:
            if getattr(self, b).size == 0:
                raise EmptyClassError(b)

    @classmethod
    def from_classes(cls, target, nontarget, spoof) -> ScorePartition:
        target = np.asarray(target, dtype=np.float64)
        nontarget = np.asarray(nontarget, dtype=np.float64)
        return cls(
            bonafide=np.concatenate([target, nontarget]),
            spoof=spoof,
            target=target,
            nontarget=nontarget,
        )


def join_labels(
    trial_ids: Sequence[str], records: Iterable[TrialRecord]
) -> list[TrialRecord]:
    """Look up the key record of every scored trial, in score order.

    Raises JoinError when a scored trial has no key, or when a trial_id is
    duplicated among the keys or among the scores.
    """
    index: dict[str, TrialRecord] = {}
    dup_keys: list[str] = []
    for rec in records:
        if rec.trial_id in index:
            dup_keys.append(rec.trial_id)
        else:
            index[rec.trial_id] = rec
    seen: set[str] = set()
    missing: list[str] = []
    dup_scores: list[str] = []
    out: list[TrialRecord] = []
    for tid in trial_ids:
        if tid in seen:
            dup_scores.append(tid)
        seen.add(tid)
        rec = index.get(tid)
        if rec is None:
            missing.append(tid)
        else:
            out.append(rec)
    if missing or dup_keys or dup_scores:
        raise JoinError(missing=missing, duplicated=dup_keys + dup_scores)
    return out


def class_codes(records: Sequence[TrialRecord]) -> np.ndarray:
    """Vectorised class labels: 0 target, 1 nontarget, 2 spoof, 3 bonafide."""
    code = {TrialClass.TARGET: 0, TrialClass.NONTARGET: 1, TrialClass.SPOOF: 2, TrialClass.BONAFIDE: 3}
    return np.fromiter((code[r.trial_class] for r in records), dtype=np.int8, count=len(records))


def partition_from_codes(values: np.ndarray, codes: np.ndarray, track: Track | int) -> ScorePartition:
    if Track(track) is Track.CM:
        return ScorePartition(bonafide=values[codes != 2], spoof=values[codes == 2])
    if np.any(codes == 3):
        raise ValueError("Track 2 partition needs target/nontarget labels, got plain 'bonafide'")
    return ScorePartition.from_classes(values[codes == 0], values[codes == 1], values[codes == 2])


def partition_scores(
    scores: ScoreSet,
    records: Iterable[TrialRecord],
    track: Track | int,
    field: str | None = None,
) -> ScorePartition:
    """Split one score list of ``scores`` into class buckets.

    ``field`` defaults to ``"cm"`` for Track 1 and ``"sasv"`` for Track 2.
    """
    track = Track(track)
    if field is None:
        field = "cm" if track is Track.CM else "sasv"
    codes = class_codes(join_labels(scores.trial_ids, records))
    return partition_from_codes(scores.field(field), codes, track)


# ---------------------------------------------------------------------------
# cost models


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise DomainError(name, value, "must be a positive finite number")
    return value


def _open_unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 < value < 1.0):
        raise DomainError(name, value, "must lie strictly between 0 and 1")
    return value


@dataclass(frozen=True, slots=True)
class CmCostModel:
    c_miss: float
    c_fa: float
    prior_spoof: float
    beta: float
    tau_bayes: float

    @property
    def effective_prior(self) -> float:
        """Bona fide prior whose Bayes threshold equals ``tau_bayes``."""
        return self.beta / (1.0 + self.beta)


def derive_cm_cost_model(c_miss: float, c_fa: float, prior_spoof: float) -> CmCostModel:
    c_miss = _positive("c_miss", c_miss)
    c_fa = _positive("c_fa", c_fa)
    prior_spoof = _open_unit("prior_spoof", prior_spoof)
    # Grouped as one quotient: with the defaults this lands exactly on 1.9.
    beta = (c_miss * (1.0 - prior_spoof)) / (c_fa * prior_spoof)
    return CmCostModel(c_miss, c_fa, prior_spoof, beta, -math.log(beta))


@dataclass(frozen=True, slots=True)
class SasvCostModel:
    c_miss: float
    c_fa_non: float
    c_fa_spf: float
    prior_tar: float
    prior_non: float
    prior_spf: float
    alpha: float
    gamma: float


def derive_sasv_cost_model(
    costs: Sequence[float], priors: Sequence[float]
) -> SasvCostModel:
    """Build the a-DCF weights from (C_miss, C_fa_non, C_fa_spf) and
    (pi_tar, pi_non, pi_spf)."""
    if len(costs) != 3 or len(priors) != 3:
        raise DomainError("costs/priors", (costs, priors), "expected three of each")
    c_miss = _positive("c_miss", costs[0])
    c_fa_non = _positive("c_fa_non", costs[1])
    c_fa_spf = _positive("c_fa_spf", costs[2])
    p_tar = _open_unit("prior_tar", priors[0])
    p_non = _open_unit("prior_non", priors[1])
    p_spf = _open_unit("prior_spf", priors[2])
    if abs(p_tar + p_non + p_spf - 1.0) > 1e-9:
        raise DomainError("priors", (p_tar, p_non, p_spf), "must sum to 1")
    denom = c_fa_non * p_non + c_fa_spf * p_spf
    alpha = c_miss * p_tar / denom
    gamma = c_fa_spf * p_spf / denom
    return SasvCostModel(c_miss, c_fa_non, c_fa_spf, p_tar, p_non, p_spf, alpha, gamma)


DEFAULT_CM_COST = derive_cm_cost_model(1.0, 10.0, 0.05)
DEFAULT_SASV_COST = derive_sasv_cost_model((1.0, 10.0, 10.0), (0.9405, 0.0095, 0.05))
