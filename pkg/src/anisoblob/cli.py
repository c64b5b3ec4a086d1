"""Command-line interface.

Subcommands: detect, baseline, kernels, synth, eval, match, compare.
Exit codes: 0 success, 1 usage/parameter error, 2 I/O error.  Text results go
to --out when given, else to standard output; files are written atomically.
The SOAGDD_THREADS environment variable caps internal parallelism (0 = one
worker per CPU).
"""

import argparse
import json
import math
import sys

from . import baselines, detector, filters, matching, synth, viz
from .image import ImageFormatError, atomic_write_text, load_gray, save_pgm, save_ppm

PROG = "anisoblob"


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bank(args) -> filters.FilterBank:
    sig2 = args.scales if args.scales else list(filters.DEFAULT_SIGMA2)
    rho2 = args.rhos if args.rhos else list(filters.DEFAULT_RHO2)
    return filters.FilterBank(sigmas=tuple(math.sqrt(v) for v in sig2),
                              rhos=tuple(math.sqrt(v) for v in rho2),
                              orientations=args.orientations)


def _detector_params(args) -> detector.DetectorParams:
    return detector.DetectorParams(bank=_bank(args), t=args.pyramid_t,
                                   threshold=args.threshold)


def _emit(text: str, path) -> None:
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def _blob_text(blobs, fmt: str) -> str:
    if fmt == "csv":
        return detector.blobs_to_csv(blobs)
    return detector.blobs_to_jsonl(blobs)


def _read_blobs(path: str) -> list:
    with open(path, "r", encoding="ascii") as f:
        text = f.read()
    if path.endswith(".csv"):
        return detector.blobs_from_csv(text)
    return detector.blobs_from_jsonl(text)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _add_io_flags(p, overlay=True):
    p.add_argument("--in", dest="input", required=True, help="input image (PGM or PNG)")
    p.add_argument("--out", help="output path (default: standard output)")
    if overlay:
        p.add_argument("--overlay", help="write an ellipse-overlay PPM here")


def _add_bank_flags(p):
    p.add_argument("--scales", type=_int_list, help="sigma^2 grid, comma separated (default 2..16)")
    p.add_argument("--rhos", type=_int_list, help="rho^2 grid, comma separated (default 1..5)")
    p.add_argument("--orientations", type=int, default=filters.DEFAULT_ORIENTATIONS,
                   help="number of filter orientations (default 8)")
    p.add_argument("--pyramid-t", type=int, default=2, help="pyramid depth exponent t (default 2)")
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="blob list format (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Multi-scale anisotropic blob detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[], help="detect blobs with the directional-derivative bank")
    _add_io_flags(p)
    _add_bank_flags(p)
    p.add_argument("--threshold", type=float, default=detector.DEFAULT_THRESHOLD,
                   help="response threshold (default 223)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("baseline", help="run a classical comparator detector")
    p.add_argument("--method", choices=("hessian", "dog"), required=True)
    _add_io_flags(p)
    p.add_argument("--scales", type=_int_list,
                   help="hessian only: sigma^2 grid, comma separated (default 2..16)")
    p.add_argument("--threshold", type=float, default=None,
                   help="detector threshold (default: per method)")
    p.add_argument("--varsigma", type=float, default=baselines.DEFAULT_VARSIGMA,
                   help="DoG edge-ratio threshold (default 6)")
    p.add_argument("--pyramid-t", type=int, default=2, help="DoG pyramid exponent (default 2)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("kernels", help="dump a filter kernel as text")
    p.add_argument("--sigma2", type=float, default=2.0, help="sigma^2 (default 2)")
    p.add_argument("--rho2", type=float, default=1.0, help="rho^2 (default 1)")
    p.add_argument("--theta", type=float, default=0.0, help="orientation in radians (default 0)")
    p.add_argument("--kind", choices=("soagdd", "foagdd", "gauss"), default="soagdd")
    p.add_argument("--out", help="output path (default: standard output)")
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("synth", help="render a synthetic blob scene")
    p.add_argument("--scene", required=True, help="SceneSpec JSON path")
    p.add_argument("--out", required=True, help="output image (PGM)")
    p.add_argument("--truth", help="write ground-truth blob JSON here")
    p.add_argument("--seed", type=int, default=None, help="override the scene's noise seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--dets", required=True, help="blob list (JSON lines, or CSV by extension)")
    p.add_argument("--truth", required=True, help="ground-truth blob JSON")
    p.add_argument("--tol", type=float, default=3.0, help="center match tolerance in px (default 3)")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("match", help="detect on two images and match descriptors")
    p.add_argument("--in", dest="input", required=True, help="first image")
    p.add_argument("--in2", dest="input2", required=True, help="second image")
    p.add_argument("--out", help="match list output (default: standard output)")
    p.add_argument("--overlay", help="write a side-by-side match PPM here")
    _add_bank_flags(p)
    p.add_argument("--threshold", type=float, default=detector.DEFAULT_THRESHOLD)
    p.add_argument("--ratio-max", type=float, default=0.8, help="ratio-test threshold (default 0.8)")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("compare", help="score all detectors on one synthetic scene")
    p.add_argument("--scene", required=True, help="SceneSpec JSON path")
    p.add_argument("--seed", type=int, default=None, help="override the scene's noise seed")
    p.add_argument("--tol", type=float, default=3.0, help="center match tolerance in px (default 3)")
    p.add_argument("--out", help="output path (default: standard output)")
    p.set_defaults(func=cmd_compare)

    return parser


def cmd_detect(args) -> int:
    img = load_gray(args.input)
    blobs = detector.detect_blobs(img, _detector_params(args))
    _emit(_blob_text(blobs, args.format), args.out)
    if args.overlay:
        save_ppm(viz.blob_overlay(img, blobs), args.overlay)
    return 0


BASELINE_HESSIAN_THRESHOLD = 400.0
BASELINE_DOG_THRESHOLD = 2.0


def cmd_baseline(args) -> int:
    img = load_gray(args.input)
    if args.method == "hessian":
        sig2 = args.scales if args.scales else list(filters.DEFAULT_SIGMA2)
        thr = BASELINE_HESSIAN_THRESHOLD if args.threshold is None else args.threshold
        blobs = baselines.hessian_det_detect(img, [math.sqrt(v) for v in sig2], thr)
    else:
        thr = BASELINE_DOG_THRESHOLD if args.threshold is None else args.threshold
        blobs = baselines.dog_detect_pyramid(img, t=args.pyramid_t,
                                             varsigma=args.varsigma, threshold=thr)
    _emit(_blob_text(blobs, args.format), args.out)
    if args.overlay:
        save_ppm(viz.blob_overlay(img, blobs), args.overlay)
    return 0


def cmd_kernels(args) -> int:
    p = filters.FilterParams(sigma=math.sqrt(args.sigma2), rho=math.sqrt(args.rho2),
                             theta=args.theta)
    builder = {"soagdd": filters.soagdd_kernel, "foagdd": filters.foagdd_kernel,
               "gauss": filters.aniso_gaussian_kernel}[args.kind]
    _emit(filters.format_kernel_dump(builder(p), p), args.out)
    return 0


def cmd_synth(args) -> int:
    spec = synth.scene_from_json(_read_text(args.scene))
    if args.seed is not None:
        spec = synth.SceneSpec(width=spec.width, height=spec.height,
                               background=spec.background, noise_std=spec.noise_std,
                               seed=args.seed, blobs=spec.blobs)
    img, truth = synth.render_blob_scene(spec)
    save_pgm(img, args.out)
    if args.truth:
        atomic_write_text(args.truth, synth.truth_to_json(truth))
    return 0


def cmd_eval(args) -> int:
    dets = _read_blobs(args.dets)
    truth = synth.truth_from_json(_read_text(args.truth))
    report = synth.evaluate_detections(dets, truth, args.tol)
    if args.format == "table":
        _emit(synth.report_table([("dets", report)]), args.out)
    else:
        _emit(synth.report_to_json(report), args.out)
    return 0


def cmd_match(args) -> int:
    img_a = load_gray(args.input)
    img_b = load_gray(args.input2)
    params = _detector_params(args)
    blobs_a = detector.detect_blobs(img_a, params)
    blobs_b = detector.detect_blobs(img_b, params)
    desc_a = [matching.describe(img_a, b) for b in blobs_a]
    desc_b = [matching.describe(img_b, b) for b in blobs_b]
    pairs = matching.match_descriptors(desc_a, desc_b, args.ratio_max)
    _emit(matching.matches_to_jsonl(pairs), args.out)
    if args.overlay:
        save_ppm(viz.match_canvas(img_a, img_b, blobs_a, blobs_b, pairs), args.overlay)
    return 0


def cmd_compare(args) -> int:
    spec = synth.scene_from_json(_read_text(args.scene))
    if args.seed is not None:
        spec = synth.SceneSpec(width=spec.width, height=spec.height,
                               background=spec.background, noise_std=spec.noise_std,
                               seed=args.seed, blobs=spec.blobs)
    img, truth = synth.render_blob_scene(spec)
    soagdd = detector.detect_blobs(img, detector.DetectorParams())
    sig = [math.sqrt(v) for v in filters.DEFAULT_SIGMA2]
    hessian = baselines.hessian_det_detect(img, sig, BASELINE_HESSIAN_THRESHOLD)
    dog = baselines.dog_detect_pyramid(img, threshold=BASELINE_DOG_THRESHOLD)
    reports = [(name, synth.evaluate_detections(dets, truth, args.tol))
               for name, dets in (("soagdd", soagdd), ("hessian", hessian), ("dog", dog))]
    _emit(synth.report_table(reports), args.out)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    try:
        return args.func(args)
    except ImageFormatError as e:
        print(f"{PROG}: {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as e:
        print(f"{PROG}: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(f"{PROG}: {e}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
