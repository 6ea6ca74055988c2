"""Pooled and per-condition evaluation reports and their serialization.

Per-condition rows follow one rule per axis:

* attack: every bona fide trial (Track 2: every target and non-target)
  against the spoofed trials of that attack;
* codec: the trials recorded under that codec;
* attack x codec (optional): the codec's bona fide trials against the
  spoofs of that attack under that codec.

``counts`` are the trials carrying the row's label, so summing any one axis
gives the pooled counts. A row whose evaluation set has fewer than two
trials in a required class is marked insufficient instead of holding numbers.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._version import __version__
from .detection import evaluate_track1
from .errors import EmptyClassError
from .model import (
    BONAFIDE_LABEL,
    DEFAULT_CM_COST,
    DEFAULT_SASV_COST,
    CmCostModel,
    SasvCostModel,
    ScorePartition,
    ScoreSet,
    Track,
    TrialRecord,
    class_codes,
    join_labels,
)
from .sasv import compute_asv_operating_point, evaluate_track2

__all__ = [
    "ConditionResult",
    "EvaluationReport",
    "MIN_TRIALS",
    "build_report",
    "file_digest",
    "read_report",
    "write_report",
]

MIN_TRIALS = 2
BREAKDOWNS = ("attack", "codec", "both", "none")

TRACK1_CLASSES = ("bonafide", "spoof")
TRACK2_CLASSES = ("target", "nontarget", "spoof")
TRACK1_METRICS = ("min_dcf", "act_dcf", "cllr", "eer_percent")
TRACK2_METRICS = ("min_a_dcf", "min_tdcf", "teer_percent")
PERCENT_METRICS = ("eer_percent", "teer_percent")


def _cost(x: float | None) -> float | None:
    return None if x is None else round(float(x), 6) + 0.0


def _percent(x: float | None) -> float | None:
    return None if x is None else round(100.0 * float(x), 2) + 0.0


@dataclass(frozen=True)
class ConditionResult:
    axis: str
    label: str
    counts: dict[str, int]
    metrics: dict[str, float | None] | None
    notes: tuple[str, ...] = ()

    @property
    def status(self) -> str:
        return "ok" if self.metrics is not None else "insufficient"

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "condition": self.label,
            "counts": dict(self.counts),
            "metrics": None if self.metrics is None else dict(self.metrics),
            "notes": list(self.notes),
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ConditionResult:
        return cls(
            axis=d["axis"],
            label=d["condition"],
            counts=dict(d["counts"]),
            metrics=None if d["metrics"] is None else dict(d["metrics"]),
            notes=tuple(d.get("notes", ())),
        )


@dataclass(frozen=True)
class EvaluationReport:
    """Everything written to a report file, already at print precision.

    Costs carry 6 decimals and error rates are percent with 2 decimals, so a
    report read back from json re-serializes to identical bytes.
    """

    track: Track
    pooled: ConditionResult
    per_attack: tuple[ConditionResult, ...] = ()
    per_codec: tuple[ConditionResult, ...] = ()
    per_attack_codec: tuple[ConditionResult, ...] = ()
    inputs: tuple[tuple[str, str], ...] = ()
    settings: tuple[tuple[str, str], ...] = ()
    toolkit_version: str = __version__
    notes: tuple[str, ...] = field(default=())

    @property
    def rows(self) -> tuple[ConditionResult, ...]:
        return (self.pooled,) + self.per_attack + self.per_codec + self.per_attack_codec

    @property
    def metric_names(self) -> tuple[str, ...]:
        return TRACK1_METRICS if self.track is Track.CM else TRACK2_METRICS

    @property
    def class_names(self) -> tuple[str, ...]:
        return TRACK1_CLASSES if self.track is Track.CM else TRACK2_CLASSES

    def to_dict(self) -> dict:
        return {
            "inputs": [{"role": r, "sha256": h} for r, h in self.inputs],
            "notes": list(self.notes),
            "per_attack": [r.to_dict() for r in self.per_attack],
            "per_attack_codec": [r.to_dict() for r in self.per_attack_codec],
            "per_codec": [r.to_dict() for r in self.per_codec],
            "pooled": self.pooled.to_dict(),
            "settings": {k: v for k, v in self.settings},
            "toolkit_version": self.toolkit_version,
            "track": int(self.track),
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvaluationReport:
        return cls(
            track=Track(d["track"]),
            pooled=ConditionResult.from_dict(d["pooled"]),
            per_attack=tuple(ConditionResult.from_dict(r) for r in d.get("per_attack", ())),
            per_codec=tuple(ConditionResult.from_dict(r) for r in d.get("per_codec", ())),
            per_attack_codec=tuple(ConditionResult.from_dict(r) for r in d.get("per_attack_codec", ())),
            inputs=tuple((i["role"], i["sha256"]) for i in d.get("inputs", ())),
            settings=tuple(sorted(d.get("settings", {}).items())),
            toolkit_version=d["toolkit_version"],
            notes=tuple(d.get("notes", ())),
        )


def _fmt_metric(name: str, value: float | None) -> str:
    if value is None:
        return "-"
    return f"{value:.2f}" if name in PERCENT_METRICS else f"{value:.6f}"


def write_report(report: EvaluationReport, fmt: str = "tsv") -> bytes:
    """Serialize deterministically: fixed key order, no timestamps."""
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False)
        return (text + "\n").encode("utf-8")
    if fmt != "tsv":
        raise ValueError(f"unknown report format {fmt!r}")
    out = [
        "# spoofscore evaluation report",
        f"# toolkit_version\t{report.toolkit_version}",
        f"# track\t{int(report.track)}",
    ]
    out += [f"# input\t{role}\tsha256:{digest}" for role, digest in report.inputs]
    out += [f"# setting\t{k}\t{v}" for k, v in report.settings]
    out += [f"# note\t{n}" for n in report.notes]
    out.append("\t".join(("axis", "condition", *report.class_names, *report.metric_names, "status", "notes")))
    for row in report.rows:
        metrics = row.metrics or {}
        cells = [row.axis, row.label]
        cells += [str(row.counts.get(c, 0)) for c in report.class_names]
        cells += [_fmt_metric(m, metrics.get(m)) for m in report.metric_names]
        cells += [row.status, "; ".join(row.notes) or "-"]
        out.append("\t".join(cells))
    return ("\n".join(out) + "\n").encode("utf-8")


def read_report(data: bytes | str) -> EvaluationReport:
    """Parse a json report written by :func:`write_report`."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return EvaluationReport.from_dict(json.loads(data))


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class _Task:
    axis: str
    label: str
    counts: dict[str, int]
    index: np.ndarray  # trials entering the evaluation


@dataclass(frozen=True)
class _Trials:
    """Column view of the joined submission, shared read-only by workers."""

    codes: np.ndarray
    attacks: tuple[list[str], np.ndarray]  # sorted labels, per-trial label index
    codecs: tuple[list[str], np.ndarray]
    cm: np.ndarray | None
    asv: np.ndarray | None
    sasv: np.ndarray | None
    common_asv: np.ndarray | None


def _encode(labels: list[str]) -> tuple[list[str], np.ndarray]:
    names = sorted(set(labels))
    index = {name: i for i, name in enumerate(names)}
    return names, np.fromiter(map(index.__getitem__, labels), dtype=np.int32, count=len(labels))


def _label_counts(codes: np.ndarray, track: Track) -> dict[str, int]:
    if track is Track.CM:
        n_spf = int(np.count_nonzero(codes == 2))
        return {"bonafide": int(codes.size) - n_spf, "spoof": n_spf}
    return {
        "target": int(np.count_nonzero(codes == 0)),
        "nontarget": int(np.count_nonzero(codes == 1)),
        "spoof": int(np.count_nonzero(codes == 2)),
    }


def _tasks(t: _Trials, track: Track, breakdown: str, cross_product: bool) -> list[_Task]:
    n = t.codes.size
    all_idx = np.arange(n)
    spoof = t.codes == 2
    bona_idx = np.flatnonzero(~spoof)
    tasks = [_Task("pooled", "all", _label_counts(t.codes, track), all_idx)]

    attack_labels, attacks = t.attacks
    codec_labels, codecs = t.codecs
    if breakdown in ("attack", "both"):
        for ai, a in enumerate(attack_labels):
            own = attacks == ai
            idx = bona_idx if a == BONAFIDE_LABEL else np.concatenate([bona_idx, np.flatnonzero(own)])
            tasks.append(_Task("attack", a, _label_counts(t.codes[own], track), idx))
    if breakdown in ("codec", "both"):
        for ci, c in enumerate(codec_labels):
            own = codecs == ci
            tasks.append(_Task("codec", c, _label_counts(t.codes[own], track), np.flatnonzero(own)))
    if cross_product:
        for ai, a in enumerate(attack_labels):
            for ci, c in enumerate(codec_labels):
                own = (attacks == ai) & (codecs == ci)
                if not own.any():
                    continue
                codec_bona = np.flatnonzero((codecs == ci) & ~spoof)
                idx = codec_bona if a == BONAFIDE_LABEL else np.concatenate([codec_bona, np.flatnonzero(own)])
                tasks.append(_Task("attack_codec", f"{a}/{c}", _label_counts(t.codes[own], track), idx))
    return tasks


def _insufficient(codes: np.ndarray, track: Track) -> bool:
    counts = _label_counts(codes, track)
    return any(v < MIN_TRIALS for v in counts.values())


def _track1_row(task: _Task, t: _Trials, model: CmCostModel, eer_method: str) -> ConditionResult:
    codes = t.codes[task.index]
    if _insufficient(codes, Track.CM):
        return ConditionResult(task.axis, task.label, task.counts, None)
    values = t.cm[task.index]
    part = ScorePartition(bonafide=values[codes != 2], spoof=values[codes == 2])
    m = evaluate_track1(part, model, eer_method)
    metrics = {
        "act_dcf": _cost(m.act_dcf),
        "cllr": _cost(m.cllr),
        "eer_percent": _percent(m.eer),
        "min_dcf": _cost(m.min_dcf),
    }
    return ConditionResult(task.axis, task.label, task.counts, metrics)


def _track2_row(
    task: _Task,
    t: _Trials,
    model: SasvCostModel,
    tdcf_norm: str,
    asv_threshold: float | None,
) -> ConditionResult:
    idx = task.index
    codes = t.codes[idx]
    if _insufficient(codes, Track.SASV):
        return ConditionResult(task.axis, task.label, task.counts, None)
    triplet = t.cm is not None and t.asv is not None
    m = evaluate_track2(
        t.sasv[idx],
        codes,
        model,
        cm_scores=t.cm[idx] if triplet else None,
        asv_scores=t.asv[idx] if triplet else None,
        tdcf_asv_scores=t.common_asv[idx] if triplet and t.common_asv is not None else None,
        asv_threshold=asv_threshold,
        tdcf_norm=tdcf_norm,
    )
    metrics = {
        "min_a_dcf": _cost(m.min_a_dcf),
        "min_tdcf": _cost(m.min_tdcf),
        "teer_percent": _percent(m.teer),
    }
    return ConditionResult(task.axis, task.label, task.counts, metrics, m.notes)


def build_report(
    scores: ScoreSet,
    keys: Sequence[TrialRecord],
    track: Track | int,
    *,
    breakdown: str = "both",
    cross_product: bool = False,
    eer_method: str = "step",
    tdcf_norm: str = "v2",
    cm_model: CmCostModel = DEFAULT_CM_COST,
    sasv_model: SasvCostModel = DEFAULT_SASV_COST,
    common_asv: np.ndarray | None = None,
    jobs: int = 1,
    inputs: Sequence[tuple[str, str]] = (),
    extra_settings: Sequence[tuple[str, str]] = (),
) -> EvaluationReport:
    """Evaluate a joined submission pooled and per condition.

    Every scored trial must have a key (JoinError otherwise). Track 2 t-DCF
    and t-EER need CM and ASV scores; without them they are reported as null.
    ``common_asv`` (aligned to ``scores``) replaces the submission's own ASV
    scores when setting the t-DCF operating point. The ASV threshold is fixed
    on the pooled trials and reused for every condition. Rows are assembled in
    a fixed order, so output does not depend on ``jobs``.
    """
    track = Track(track)
    if breakdown not in BREAKDOWNS:
        raise ValueError(f"breakdown must be one of {BREAKDOWNS}")
    records = join_labels(scores.trial_ids, keys)
    trials = _Trials(
        codes=class_codes(records),
        attacks=_encode([r.attack_label for r in records]),
        codecs=_encode([r.codec_label for r in records]),
        cm=scores.cm_scores,
        asv=scores.asv_scores,
        sasv=scores.sasv_scores,
        common_asv=None if common_asv is None else np.asarray(common_asv, dtype=np.float64),
    )
    tasks = _tasks(trials, track, breakdown, cross_product)

    notes: list[str] = []
    settings = {"breakdown": breakdown, "cross_product": str(cross_product).lower()}
    if track is Track.CM:
        if scores.cm_scores is None:
            raise ValueError("track 1 evaluation needs CM scores")
        if np.any(trials.codes == 0) or np.any(trials.codes == 1):
            raise ValueError("track 1 keys must label trials bonafide/spoof")
        settings["eer_method"] = eer_method

        def run(task: _Task) -> ConditionResult:
            return _track1_row(task, trials, cm_model, eer_method)

    else:
        if scores.sasv_scores is None:
            raise ValueError("track 2 evaluation needs SASV scores")
        settings["tdcf_norm"] = tdcf_norm
        triplet = scores.cm_scores is not None and scores.asv_scores is not None
        asv_threshold = None
        if triplet:
            asv_all = trials.common_asv if trials.common_asv is not None else trials.asv
            c = trials.codes
            pooled_asv = ScorePartition.from_classes(asv_all[c == 0], asv_all[c == 1], asv_all[c == 2])
            try:
                asv_threshold = compute_asv_operating_point(pooled_asv).threshold
            except EmptyClassError:
                pass
            settings["asv_source"] = "common" if trials.common_asv is not None else "submission"
        else:
            notes.append("SASV-only submission: min_tdcf and teer not evaluated")

        def run(task: _Task) -> ConditionResult:
            return _track2_row(task, trials, sasv_model, tdcf_norm, asv_threshold)

    settings.update(extra_settings)
    rows = _run_all(run, tasks, jobs)
    by_axis: dict[str, list[ConditionResult]] = {}
    for row in rows[1:]:
        by_axis.setdefault(row.axis, []).append(row)
    return EvaluationReport(
        track=track,
        pooled=rows[0],
        per_attack=tuple(by_axis.get("attack", ())),
        per_codec=tuple(by_axis.get("codec", ())),
        per_attack_codec=tuple(by_axis.get("attack_codec", ())),
        inputs=tuple(inputs),
        settings=tuple(sorted(settings.items())),
        notes=tuple(notes),
    )


def _run_all(fn: Callable[[_Task], ConditionResult], tasks: list[_Task], jobs: int) -> list[ConditionResult]:
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))
