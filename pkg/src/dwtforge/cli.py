"""Command-line entry point.

Exit codes: 0 success, 1 a check or threshold failed, 2 usage or
precondition error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from .detect import DetectorParams, Feature, detect
from .forge import Blend, ForgerySpec, forge_dwt, forge_spatial, write_sidecar
from .imagecore import (
    ColorSpace,
    Image,
    Mask,
    Region,
    load_mask,
    load_png,
    quantize,
    rgb_to_ycbcr,
    save_mask,
    ycbcr_to_rgb,
)
from .metrics import score
from .wavelet import WaveletKind, dump_subbands, dwt2, idwt2

PR_TOL = 1e-9
COLOR_TOL = 1e-10

log = logging.getLogger("dwtforge")


class UsageError(Exception):
    pass


def _ints(text: str, n: int, flag: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{flag} expects {n} comma-separated integers, got {text!r}") from None
    if len(vals) != n:
        raise UsageError(f"{flag} expects {n} comma-separated integers, got {text!r}")
    return vals


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def cmd_forge(args) -> int:
    host = load_png(args.host)
    if host.colorspace is ColorSpace.GRAY:
        host = Image(np.repeat(host.planes, 3, axis=0), ColorSpace.RGB)
    x, y, w, h = _ints(args.patch, 4, "--patch")
    px, py = _ints(args.paste_at, 2, "--paste-at")
    feather = args.feather
    if feather is None:
        feather = 3.0 if args.blend == Blend.ALPHA.value else 0.0
    spec = ForgerySpec(
        patch_region=Region(x, y, w, h),
        paste_offset=(px, py),
        level=args.level,
        kind=WaveletKind(args.wavelet),
        blend=Blend(args.blend),
        feather=feather,
        smooth_sigma=args.smooth,
    )
    forger = forge_spatial if args.spatial else forge_dwt
    out = forger(host, spec)
    sidecar = args.sidecar or Path(args.out).with_suffix(".json")
    out.save(args.out, args.mask_out, sidecar)
    if args.source_mask_out:
        save_mask(out.source_mask, args.source_mask_out)
    if args.dump_subbands:
        forged_ycc = rgb_to_ycbcr(out.forged)
        for name, plane in zip(("Y", "Cb", "Cr"), forged_ycc.planes):
            dump_subbands(dwt2(plane, spec.kind, spec.level), f"{args.dump_subbands}_{name}")
    print(f"wrote {args.out} and {args.mask_out}")
    return 0


def _detector_params(args) -> DetectorParams:
    return DetectorParams(
        feature=Feature(args.feature),
        block_size=args.block,
        stride=args.stride,
        sort_window=args.sort_window,
        feature_tol=args.tol,
        min_shift_distance=args.min_shift,
        shift_vote_threshold=args.votes,
        low_variance_floor=args.variance_floor,
        morph_open_radius=args.open_radius,
        min_component_area=args.min_area,
    )


def cmd_detect(args) -> int:
    params = _detector_params(args)
    img = load_png(args.input)
    dmap = detect(img, params, workers=args.workers)
    save_mask(dmap.detected.astype(float), args.out)
    report = dmap.report(params)
    _write_json(args.report, report)
    print(
        f"blocks={report['block_count']} skipped={report['skipped_block_count']} "
        f"pairs={report['matched_pair_count']} detected_px={report['detected_pixels']}"
    )
    return 0


def cmd_evaluate(args) -> int:
    truths = [load_mask(p).binary() for p in args.truth]
    if any(t.shape != truths[0].shape for t in truths):
        raise UsageError("truth masks differ in size")
    truth = np.logical_or.reduce(truths)
    detected = load_mask(args.detected).binary()
    m = score(truth, detected)
    if args.report:
        _write_json(args.report, m.to_dict())
    print(f"r={100 * m.r:.2f}% w={100 * m.w:.2f}%")
    return 0


def cmd_corpus(args) -> int:
    config = corpus_mod.CorpusConfig.load(args.config)
    if args.workers is not None:
        config.workers = max(1, args.workers)
    summary = corpus_mod.run_corpus(config)
    sys.stdout.write(summary["table"])
    if summary["failures"]:
        print(f"{len(summary['failures'])} image(s) failed:")
        for f in summary["failures"]:
            print(f"  {f}")
    return 0


def cmd_selfcheck(args) -> int:
    img = load_png(args.input)
    planes = rgb_to_ycbcr(img).planes if img.colorspace is ColorSpace.RGB else img.planes
    ok = True
    for kind in WaveletKind:
        for level in range(1, args.level + 1):
            err = max(float(np.abs(idwt2(dwt2(p, kind, level)) - p).max()) for p in planes)
            good = err < PR_TOL
            ok &= good
            print(f"dwt {kind.value:<4} level {level}: max recon error {err:.3e} {'ok' if good else 'FAIL'}")
    if img.colorspace is ColorSpace.RGB:
        ycc = rgb_to_ycbcr(img)
        err = float(np.abs(ycbcr_to_rgb(ycc).planes - img.planes).max())
        good = err < COLOR_TOL
        ok &= good
        print(f"color real round trip: max error {err:.3e} {'ok' if good else 'FAIL'}")
        q = Image(quantize(ycc.planes).astype(np.float64), ColorSpace.YCBCR)
        back = quantize(ycbcr_to_rgb(q).planes).astype(np.int64)
        err8 = int(np.abs(back - img.planes.astype(np.int64)).max())
        good = err8 <= 1
        ok &= good
        print(f"color 8-bit round trip: max error {err8} {'ok' if good else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwtforge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("forge", help="synthesise a copy-move forgery")
    f.add_argument("--host", required=True)
    f.add_argument("--patch", required=True, metavar="X,Y,W,H")
    f.add_argument("--paste-at", required=True, metavar="X,Y")
    f.add_argument("--level", type=int, default=1, choices=(1, 2, 3))
    f.add_argument("--wavelet", default="haar", choices=[k.value for k in WaveletKind])
    f.add_argument("--blend", default="cutout", choices=[b.value for b in Blend])
    f.add_argument("--feather", type=float, default=None, help="alpha ramp width in px (default 3 for alpha)")
    f.add_argument("--smooth", type=float, default=0.0, help="Gaussian pre-smoothing sigma")
    f.add_argument("--spatial", action="store_true", help="paste in the pixel domain instead")
    f.add_argument("--out", required=True)
    f.add_argument("--mask-out", required=True)
    f.add_argument("--source-mask-out", help="also write the copied-from footprint")
    f.add_argument("--sidecar", help="spec JSON path (default: --out with .json suffix)")
    f.add_argument("--dump-subbands", metavar="PREFIX", help="write forged sub-bands as PNGs")
    f.set_defaults(func=cmd_forge)

    d = sub.add_parser("detect", help="run a block-matching detector")
    defaults = DetectorParams()
    d.add_argument("--input", required=True)
    d.add_argument("--feature", required=True, choices=[x.value for x in Feature])
    d.add_argument("--block", type=int, default=defaults.block_size)
    d.add_argument("--stride", type=int, default=defaults.stride)
    d.add_argument("--sort-window", type=int, default=defaults.sort_window)
    d.add_argument("--tol", type=float, default=None,
                   help="relative distance (tchebichef) or min correlation (dctsign)")
    d.add_argument("--min-shift", type=float, default=defaults.min_shift_distance)
    d.add_argument("--votes", type=int, default=defaults.shift_vote_threshold)
    d.add_argument("--variance-floor", type=float, default=defaults.low_variance_floor)
    d.add_argument("--open-radius", type=int, default=defaults.morph_open_radius)
    d.add_argument("--min-area", type=int, default=defaults.min_component_area)
    d.add_argument("--workers", type=int, default=1)
    d.add_argument("--out", required=True)
    d.add_argument("--report", required=True)
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("evaluate", help="score a detection mask against ground truth")
    e.add_argument("--truth", required=True, action="append",
                   help="ground-truth mask; repeat to take the union (e.g. source and paste)")
    e.add_argument("--detected", required=True)
    e.add_argument("--report")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("corpus", help="run the forge/detect/score experiment over a directory")
    c.add_argument("--config", required=True)
    c.add_argument("--workers", type=int, default=None)
    c.set_defaults(func=cmd_corpus)

    s = sub.add_parser("selfcheck", help="wavelet and colour round-trip checks on an image")
    s.add_argument("--input", required=True)
    s.add_argument("--level", type=int, default=3)
    s.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"dwtforge {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
