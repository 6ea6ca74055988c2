"""Score and key file readers/writers plus the submission validator.

Canonical format: one record per line, single ASCII tab between fields,
UTF-8, LF line endings, no header.

Score files are ``trial_id<TAB>score`` or, for Track 2 triplets,
``trial_id<TAB>sasv<TAB>cm<TAB>asv``. Key files are
``speaker_id<TAB>trial_id<TAB>codec<TAB>attack<TAB>key``; extra trailing
columns are ignored. Paths ending in ``.gz``, ``.bz2`` or ``.xz`` are
(de)compressed transparently.
"""

from __future__ import annotations

import bz2
import gc
import gzip
import lzma
import re
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, ParseError, VocabularyError
from .model import (
    ScoreSet,
    Track,
    TrialClass,
    TrialRecord,
    Vocabulary,
)

__all__ = [
    "ValidationReport",
    "read_keys",
    "read_scores",
    "validate_submission",
    "write_keys",
    "write_scores",
]

_OPENERS = {".gz": gzip.open, ".bz2": bz2.open, ".xz": lzma.open}

_FINITE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_NON_FINITE = re.compile(r"[+-]?(?:nan|inf|infinity)", re.IGNORECASE)
_FINITE_BLOCK = re.compile(rf"(?:{_FINITE.pattern})(?:\n(?:{_FINITE.pattern}))*")
_ANY_BLOCK = re.compile(
    rf"(?:{_FINITE.pattern}|{_NON_FINITE.pattern})(?:\n(?:{_FINITE.pattern}|{_NON_FINITE.pattern}))*",
    re.IGNORECASE,
)

_TRACK_KEYS = {
    Track.CM: {"bonafide": TrialClass.BONAFIDE, "spoof": TrialClass.SPOOF},
    Track.SASV: {
        "target": TrialClass.TARGET,
        "nontarget": TrialClass.NONTARGET,
        "spoof": TrialClass.SPOOF,
    },
}

SCORE_COLUMNS = {"single": 2, "triplet": 4}
TRIPLET_FIELDS = ("sasv", "cm", "asv")


def _open(path: str | Path, mode: str):
    path = Path(path)
    opener = _OPENERS.get(path.suffix.lower(), open)
    return opener(path, mode + "t", encoding="utf-8", newline="\n")


@contextmanager
def _gc_paused():
    # bulk parsing allocates millions of small lists that are never cyclic;
    # letting the cycle collector walk them repeatedly dominates run time
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def _read_rows(path: str | Path, whitespace: bool) -> list[list[str]]:
    """All lines of ``path`` split into fields; row i is file line i + 1."""
    with _open(path, "r") as fh:
        text = fh.read()
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    if "\r" in text:
        lines = [ln[:-1] if ln.endswith("\r") else ln for ln in lines]
    with _gc_paused():
        if whitespace:
            return [ln.split() for ln in lines]
        return [ln.split("\t") for ln in lines]


def parse_score(token: str, check_finite: bool = True) -> float:
    """Locale-independent score parsing; raises ValueError on bad input."""
    if _FINITE.fullmatch(token):
        return float(token)
    if _NON_FINITE.fullmatch(token):
        if check_finite:
            raise ValueError(f"non-finite score {token!r}")
        return float(token)
    raise ValueError(f"not a number: {token!r}")


def _parse_column(tokens: list[str], check_finite: bool, first_line: int, src: str) -> np.ndarray:
    # one regex pass over the whole column; the slow path only locates errors
    block = _FINITE_BLOCK if check_finite else _ANY_BLOCK
    if not tokens or block.fullmatch("\n".join(tokens)):
        return np.array([float(t) for t in tokens], dtype=np.float64)
    for offset, tok in enumerate(tokens):
        try:
            parse_score(tok, check_finite)
        except ValueError as exc:
            raise ParseError(first_line + offset, str(exc), src) from None
    raise AssertionError("unreachable")  # pragma: no cover


def read_scores(
    path: str | Path,
    expected: str | None = "single",
    *,
    single_field: str = "cm",
    allow_header: bool = False,
    whitespace: bool = False,
    check_finite: bool = True,
) -> ScoreSet:
    """Read a score file, keeping file order.

    ``expected`` is ``"single"``, ``"triplet"`` or None to infer the layout
    from the first record. Single scores land in ``single_field`` (``cm`` for
    Track 1, ``sasv`` for a SASV-only Track 2 submission). With
    ``check_finite=False`` NaN/inf are kept so a validator can report them.
    """
    if expected is not None and expected not in SCORE_COLUMNS:
        raise ValueError(f"expected must be one of {sorted(SCORE_COLUMNS)} or None")
    src = str(path)
    rows = _read_rows(path, whitespace)
    skip = 1 if rows and allow_header and not _looks_numeric(rows[0]) else 0
    body = rows[skip:]
    if expected is not None:
        ncol = SCORE_COLUMNS[expected]
    elif body:
        ncol = len(body[0])
        if ncol not in SCORE_COLUMNS.values():
            raise FormatError(skip + 1, f"expected 2 or 4 columns, found {ncol}", src)
    else:
        ncol = 2
    for i, row in enumerate(body):
        if len(row) != ncol:
            raise FormatError(skip + i + 1, f"expected {ncol} columns, found {len(row)}", src)
    ids = [row[0] for row in body]
    if "" in ids:
        raise ParseError(skip + ids.index("") + 1, "empty trial_id", src)
    cols = [_parse_column([row[k] for row in body], check_finite, skip + 1, src) for k in range(1, ncol)]
    if ncol == 2:
        return ScoreSet(ids, check_finite=check_finite, **{f"{single_field}_scores": cols[0]})
    return ScoreSet(
        ids,
        sasv_scores=cols[0],
        cm_scores=cols[1],
        asv_scores=cols[2],
        check_finite=check_finite,
    )


def _looks_numeric(fields: list[str]) -> bool:
    if len(fields) < 2:
        return False
    try:
        for tok in fields[1:]:
            parse_score(tok, check_finite=False)
    except ValueError:
        return False
    return True


def _fmt(x: float) -> str:
    return repr(float(x))


def write_scores(path: str | Path, scores: ScoreSet, fields: Sequence[str] | None = None) -> None:
    """Write ``scores`` in canonical form; floats use the shortest round-trip repr.

    ``fields`` defaults to the triplet layout when all three lists are
    present, else to the single list that is.
    """
    if fields is None:
        if scores.is_triplet:
            fields = TRIPLET_FIELDS
        else:
            fields = [n for n in ("cm", "sasv", "asv") if getattr(scores, f"{n}_scores") is not None][:1]
    columns = [scores.field(n).tolist() for n in fields]
    with _open(path, "w") as fh:
        for i, tid in enumerate(scores.trial_ids):
            fh.write(tid)
            for col in columns:
                fh.write("\t")
                fh.write(_fmt(col[i]))
            fh.write("\n")


def read_keys(
    path: str | Path,
    track: Track | int,
    vocabulary: Vocabulary | None = None,
    *,
    whitespace: bool = False,
) -> list[TrialRecord]:
    """Read a trial key file and validate every label against ``vocabulary``.

    Duplicate trial_ids are a hard error because keys are ground truth.
    """
    track = Track(track)
    vocab = vocabulary or Vocabulary()
    keys = _TRACK_KEYS[track]
    src = str(path)
    rows = _read_rows(path, whitespace)
    for i, row in enumerate(rows):
        if len(row) < 5:
            raise FormatError(i + 1, f"expected at least 5 columns, found {len(row)}", src)

    # vocabulary checks run once per distinct label, then point at the first offender
    def first_line(col: int, value: str) -> int:
        return next(i for i, row in enumerate(rows) if row[col] == value) + 1

    for key in sorted({row[4] for row in rows} - set(keys)):
        raise VocabularyError(
            first_line(4, key), f"unknown key {key!r} for track {int(track)} (expected {sorted(keys)})", src
        )
    for codec in sorted(c for c in {row[2] for row in rows} if not vocab.codec_ok(c, track)):
        raise VocabularyError(first_line(2, codec), f"codec {codec!r} not valid for track {int(track)}", src)
    for attack in sorted(a for a in {row[3] for row in rows} if not vocab.attack_ok(a)):
        raise VocabularyError(first_line(3, attack), f"unknown attack label {attack!r}", src)

    seen: dict[str, int] = {}
    records: list[TrialRecord] = []
    with _gc_paused():
        for i, (speaker, tid, codec, attack, key, *_) in enumerate(rows, start=1):
            if tid in seen:
                raise ParseError(i, f"trial_id {tid!r} already defined on line {seen[tid]}", src)
            seen[tid] = i
            try:
                records.append(TrialRecord(tid, speaker, keys[key], attack, codec))
            except ValueError as exc:
                raise ParseError(i, str(exc), src) from None
    return records


_KEY_NAME = {c: c.value for c in TrialClass}


def write_keys(path: str | Path, records: Iterable[TrialRecord]) -> None:
    with _open(path, "w") as fh:
        for r in records:
            fh.write(
                f"{r.speaker_id}\t{r.trial_id}\t{r.codec_label}\t{r.attack_label}\t{_KEY_NAME[r.trial_class]}\n"
            )


@dataclass(frozen=True)
class ValidationReport:
    """Findings of a submission check; an empty report passes."""

    track: Track
    condition: str
    n_scores: int
    n_keys: int
    missing: tuple[str, ...] = ()
    extra: tuple[str, ...] = ()
    duplicate: tuple[str, ...] = ()
    non_finite: tuple[str, ...] = ()
    problems: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return not (self.missing or self.extra or self.duplicate or self.non_finite or self.problems)

    def to_text(self, limit: int = 20) -> str:
        lines = [
            f"track\t{int(self.track)}",
            f"condition\t{self.condition}",
            f"scores\t{self.n_scores}",
            f"keys\t{self.n_keys}",
            f"status\t{'PASS' if self.passed else 'FAIL'}",
        ]
        for name in ("missing", "extra", "duplicate", "non_finite"):
            ids = getattr(self, name)
            lines.append(f"{name}\t{len(ids)}")
            lines.extend(f"  {tid}" for tid in ids[:limit])
            if len(ids) > limit:
                lines.append(f"  ... {len(ids) - limit} more")
        lines.extend(f"problem\t{p}" for p in self.problems)
        return "\n".join(lines) + "\n"


def validate_submission(
    scores: ScoreSet,
    keys: Sequence[TrialRecord],
    track: Track | int,
    condition: str = "closed",
) -> ValidationReport:
    """Compare a submission against the keys; never raises on bad content."""
    track = Track(track)
    if condition not in ("closed", "open"):
        raise ValueError("condition must be 'closed' or 'open'")
    key_ids = [r.trial_id for r in keys]
    key_set = set(key_ids)
    counts = Counter(scores.trial_ids)
    scored = set(counts)
    missing = tuple(t for t in key_ids if t not in scored)
    extra = tuple(t for t in dict.fromkeys(scores.trial_ids) if t not in key_set)
    duplicate = tuple(t for t, n in counts.items() if n > 1)

    bad = np.zeros(len(scores), dtype=bool)
    for name in ("cm", "asv", "sasv"):
        arr = getattr(scores, f"{name}_scores")
        if arr is not None:
            bad |= ~np.isfinite(arr)
    non_finite = tuple(dict.fromkeys(scores.trial_ids[i] for i in np.flatnonzero(bad)))

    problems = []
    if track is Track.SASV and scores.sasv_scores is None:
        problems.append("track 2 submissions must carry SASV scores")
    if track is Track.CM and scores.cm_scores is None:
        problems.append("track 1 submissions must carry CM scores")
    return ValidationReport(
        track=track,
        condition=condition,
        n_scores=len(scores),
        n_keys=len(keys),
        missing=missing,
        extra=extra,
        duplicate=duplicate,
        non_finite=non_finite,
        problems=tuple(problems),
    )

