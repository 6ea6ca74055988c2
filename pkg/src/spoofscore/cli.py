"""spoofscore command line.

Exit codes: 0 success, 1 unreadable or malformed input, 2 submission failed
validation, 64 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from . import calibration
from ._version import __version__
from .detection import EER_METHODS, compute_act_dcf, compute_cllr, compute_min_dcf, error_rate_curve
from .errors import JoinError, ParseError, SpecError
from .fileio import read_keys, read_scores, validate_submission, write_scores
from .model import CODECS, ScorePartition, ScoreSet, Track, partition_scores
from .report import BREAKDOWNS, build_report, file_digest, write_report
from .sasv import TDCF_NORMS
from .testkit.synthetic import generate, simple_spec

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_INVALID = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("scores", type=Path, help="score file")
    p.add_argument("keys", type=Path, help="trial key file")
    p.add_argument("--track", type=int, choices=(1, 2), default=1)
    p.add_argument("--allow-header", action="store_true", help="skip a non-numeric first line in the score file")
    p.add_argument("--whitespace", action="store_true", help="split on any whitespace instead of tabs")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spoofscore", description="Score spoofing CM and SASV submissions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="pooled and per-condition metrics")
    _add_input_flags(ev)
    ev.add_argument("--asv-scores", type=Path, help="common ASV scores for the t-DCF operating point (track 2)")
    ev.add_argument("--condition-breakdown", choices=BREAKDOWNS, default="both")
    ev.add_argument("--cross-product", action="store_true", help="also report every attack x codec cell")
    ev.add_argument("--eer-method", choices=EER_METHODS, default="step")
    ev.add_argument("--tdcf-norm", choices=TDCF_NORMS, default="v2")
    ev.add_argument("--format", choices=("tsv", "json"), default="tsv", help="format echoed to stdout")
    ev.add_argument("--jobs", type=_positive_int, default=1)
    ev.add_argument("--progress-subset", type=Path, help="file listing the trial_ids to evaluate")
    ev.add_argument("--condition", choices=("closed", "open"), default="closed")
    ev.add_argument("--out", type=Path, help="report directory (default: next to the score file)")

    det = sub.add_parser("det", help="DET curve vertices with probit columns")
    _add_input_flags(det)
    det.add_argument("--negatives", choices=("spoof", "nontarget", "both"), default="both",
                     help="track 2 negative class (positives are targets)")
    det.add_argument("--out", type=Path, help="output file (default: stdout)")

    cal = sub.add_parser("calibrate", help="fit and apply a score-to-LLR map (track 1)")
    _add_input_flags(cal)
    cal.add_argument("--method", choices=("affine", "monotone"), default="affine")
    cal.add_argument("--prior", type=float, help="bona fide prior the map is fitted for (default: the one implied by the costs)")
    cal.add_argument("--out-scores", type=Path, help="calibrated score file")
    cal.add_argument("--out-map", type=Path, help="calibration map (json)")

    val = sub.add_parser("validate", help="check a submission against the keys")
    _add_input_flags(val)
    val.add_argument("--condition", choices=("closed", "open"), default="closed")

    gen = sub.add_parser("generate", help="write a synthetic score/key pair")
    gen.add_argument("--track", type=int, choices=(1, 2), default=1)
    gen.add_argument("--out", type=Path, required=True, help="output directory")
    gen.add_argument("--stem", default="synthetic")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n-bonafide", type=_positive_int, default=1000, help="track 1 bona fide trials")
    gen.add_argument("--n-target", type=_positive_int, default=1000)
    gen.add_argument("--n-nontarget", type=_positive_int, default=1000)
    gen.add_argument("--n-spoof", type=_positive_int, default=1000)
    gen.add_argument("--attacks", nargs="+", default=["A17"], help="attack labels, drawn uniformly")
    gen.add_argument("--codecs", nargs="+", default=["C00"], help="codec labels, drawn uniformly ('all' for every codec of the track)")
    gen.add_argument("--sasv-only", action="store_true", help="track 2: write SASV scores only")
    return parser


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _read_submission(args, check_finite: bool) -> ScoreSet:
    track = Track(args.track)
    return read_scores(
        args.scores,
        "single" if track is Track.CM else None,
        single_field="cm" if track is Track.CM else "sasv",
        allow_header=args.allow_header,
        whitespace=args.whitespace,
        check_finite=check_finite,
    )


def _read_subset(path: Path) -> set[str]:
    with open(path, encoding="utf-8") as fh:
        return {line.split()[0] for line in fh if line.strip()}


def _restrict(scores: ScoreSet, keys, ids: set[str]):
    keep = [i for i, t in enumerate(scores.trial_ids) if t in ids]
    return scores.take(keep), [r for r in keys if r.trial_id in ids]


def _align(ids, other: ScoreSet, field: str) -> np.ndarray:
    lookup = dict(zip(other.trial_ids, other.field(field).tolist()))
    missing = [t for t in ids if t not in lookup]
    if missing:
        raise JoinError(missing=missing)
    return np.array([lookup[t] for t in ids])


def cmd_evaluate(args) -> int:
    track = Track(args.track)
    scores = _read_submission(args, check_finite=False)
    keys = read_keys(args.keys, track, whitespace=args.whitespace)
    inputs = [("scores", file_digest(args.scores)), ("keys", file_digest(args.keys))]
    extra = [("condition", args.condition)]
    if args.progress_subset:
        subset = _read_subset(args.progress_subset)
        scores, keys = _restrict(scores, keys, subset)
        inputs.append(("progress_subset", file_digest(args.progress_subset)))
        extra.append(("progress_subset", "true"))

    report = validate_submission(scores, keys, track, args.condition)
    if not report.passed:
        sys.stderr.write(report.to_text())
        return EXIT_INVALID

    common_asv = None
    if args.asv_scores:
        if track is not Track.SASV:
            raise _Usage("--asv-scores applies to track 2 only")
        asv = read_scores(args.asv_scores, "single", single_field="asv", whitespace=args.whitespace)
        common_asv = _align(scores.trial_ids, asv, "asv")
        inputs.append(("asv_scores", file_digest(args.asv_scores)))

    result = build_report(
        scores,
        keys,
        track,
        breakdown=args.condition_breakdown,
        cross_product=args.cross_product,
        eer_method=args.eer_method,
        tdcf_norm=args.tdcf_norm,
        common_asv=common_asv,
        jobs=args.jobs,
        inputs=inputs,
        extra_settings=extra,
    )
    out_dir = args.out or args.scores.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    blobs = {fmt: write_report(result, fmt) for fmt in ("tsv", "json")}
    for fmt, blob in blobs.items():
        (out_dir / f"{args.scores.name}.report.{fmt}").write_bytes(blob)
    sys.stdout.write(blobs[args.format].decode("utf-8"))
    return EXIT_OK


def _fmt_float(x: float) -> str:
    return repr(float(x))


def cmd_det(args) -> int:
    track = Track(args.track)
    scores = _read_submission(args, check_finite=True)
    keys = read_keys(args.keys, track, whitespace=args.whitespace)
    part = partition_scores(scores, keys, track)
    if track is Track.CM:
        curve = error_rate_curve(part.bonafide, part.spoof)
    else:
        neg = {
            "spoof": part.spoof,
            "nontarget": part.nontarget,
            "both": np.concatenate([part.nontarget, part.spoof]),
        }[args.negatives]
        curve = error_rate_curve(part.target, neg, "target", args.negatives)
    lines = ["threshold\tp_miss\tp_fa\tprobit_miss\tprobit_fa"]
    p_miss, p_fa = curve.p_miss, curve.p_fa
    z_miss, z_fa = ndtri(p_miss), ndtri(p_fa)
    for row in zip(curve.thresholds.tolist(), p_miss.tolist(), p_fa.tolist(), z_miss.tolist(), z_fa.tolist()):
        lines.append("\t".join(_fmt_float(v) for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _summary(part: ScorePartition) -> tuple[float, float, float]:
    min_dcf, _ = compute_min_dcf(error_rate_curve(part.bonafide, part.spoof))
    return min_dcf, compute_act_dcf(part), compute_cllr(part)


def cmd_calibrate(args) -> int:
    if args.track != 1:
        raise _Usage("calibrate works on track 1 (CM) scores")
    scores = _read_submission(args, check_finite=True)
    keys = read_keys(args.keys, Track.CM, whitespace=args.whitespace)
    part = partition_scores(scores, keys, Track.CM)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.method == "affine":
            cmap = calibration.fit_affine(part, args.prior).map
        else:
            threshold = None
            if args.prior is not None:
                if not 0.0 < args.prior < 1.0:
                    raise ValueError("prior must lie strictly between 0 and 1")
                threshold = -math.log(args.prior / (1.0 - args.prior))
            cmap = calibration.fit_monotone(part, threshold=threshold)
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")
    calibrated = calibration.apply(cmap, scores)
    after = partition_scores(calibrated, keys, Track.CM)

    print("stage\tmin_dcf\tact_dcf\tcllr")
    for stage, p in (("before", part), ("after", after)):
        print(stage + "\t" + "\t".join(f"{v:.6f}" for v in _summary(p)))
    out_scores = args.out_scores or args.scores.with_name(args.scores.name + ".calibrated")
    write_scores(out_scores, calibrated)
    out_map = args.out_map or args.scores.with_name(args.scores.name + ".calibration.json")
    out_map.write_text(cmap.to_json(), encoding="utf-8")
    return EXIT_OK


def cmd_validate(args) -> int:
    track = Track(args.track)
    scores = _read_submission(args, check_finite=False)
    keys = read_keys(args.keys, track, whitespace=args.whitespace)
    report = validate_submission(scores, keys, track, args.condition)
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_generate(args) -> int:
    track = Track(args.track)
    codecs = args.codecs
    if codecs == ["all"]:
        codecs = [c for c, (_, _, tracks) in CODECS.items() if int(track) in tracks]
    codec_mix = {c: 1.0 / len(codecs) for c in codecs}
    attack_mix = {a: 1.0 / len(args.attacks) for a in args.attacks}
    if track is Track.CM:
        counts = {"bonafide": args.n_bonafide, "spoof": args.n_spoof}
        means = {"bonafide": {"cm": 2.0}, "spoof": {"cm": -2.0}}
    else:
        counts = {"target": args.n_target, "nontarget": args.n_nontarget, "spoof": args.n_spoof}
        means = {
            "target": {"asv": 2.0, "cm": 2.0},
            "nontarget": {"asv": -2.0, "cm": 2.0},
            "spoof": {"asv": 1.5, "cm": -2.0},
        }
    spec = simple_spec(
        track, counts, means, seed=args.seed, attacks=attack_mix, codecs=codec_mix,
        sasv_from_sum=track is Track.SASV,
    )
    data = generate(spec)
    if track is Track.SASV and args.sasv_only:
        data = type(data)(data.track, ScoreSet(data.scores.trial_ids, sasv_scores=data.scores.sasv_scores), data.keys)
    score_path, key_path = data.write(args.out, args.stem)
    print(f"scores\t{score_path}\nkeys\t{key_path}")
    return EXIT_OK


class _Usage(Exception):
    pass


COMMANDS = {
    "evaluate": cmd_evaluate,
    "det": cmd_det,
    "calibrate": cmd_calibrate,
    "validate": cmd_validate,
    "generate": cmd_generate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code
    try:
        return COMMANDS[args.command](args)
    except (_Usage, SpecError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"spoofscore: error: {exc}\n")
        return EXIT_USAGE
    except (ParseError, OSError, UnicodeDecodeError) as exc:
        sys.stderr.write(f"spoofscore: {exc}\n")
        return EXIT_PARSE
    except (JoinError, ValueError) as exc:
        sys.stderr.write(f"spoofscore: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
