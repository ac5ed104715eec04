"""Command-line front end.

Exit codes: 0 on success, 1 when an input fails validation (or a check
fails), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .anchors import derive_head_anchors, generate_body_anchors, quantized_scales
from .assignment import VISIBLE_RATIO_DEFAULT, GroundTruth, label_rois, sample_minibatch
from .config import ConfigError, RunConfig, load_config
from .evaluation import SUBSETS, EvalConfig, SubsetSpec, average_recall_curve, evaluate
from .fusion import FusionConfig, group_by_image, pipeline_fuse
from .geometry import S_HEAD, cut_part
from .io import (
    AnnotationFile,
    ImageRecord,
    SchemaError,
    check_image_ids,
    parse_annotations,
    parse_detections,
    write_annotations,
    write_detections,
)
from .losses import GRAD_TOL, gradient_suite
from .plots import line_plot_svg, to_csv
from .synth import CONFIGURATIONS, run_benchmark

DEFAULT_AR_BUDGETS = (1, 2, 5, 10, 20, 50, 100, 200, 300, 500, 1000)


class ValidationFailure(Exception):
    pass


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _budgets(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid budget list {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("budgets must be non-negative integers")
    return vals


# -- subcommands ---------------------------------------------------------------


def cmd_derive_heads(args, cfg: RunConfig) -> int:
    ann = parse_annotations(args.annotations)
    spec = cfg.parts[args.part]
    images = []
    for im in ann.images:
        heads = [GroundTruth(cut_part(g.full, spec), None, False, g.id) for g in im.gts if not g.ignore]
        images.append(ImageRecord(im.id, im.width, im.height, heads))
    write_annotations(args.out, AnnotationFile(images))
    return 0


def cmd_anchors_quantize(args, cfg: RunConfig) -> int:
    ann = parse_annotations(args.annotations)
    heights = [g.full.height for im in ann.images for g in im.gts
               if not g.ignore and g.full.height >= args.min_height]
    bins = args.bins if args.bins is not None else cfg.anchors.num_bins
    scales = quantized_scales(heights, bins)
    if args.templates:
        acfg = dataclasses.replace(cfg.anchors, num_bins=bins)
        body = generate_body_anchors(acfg, scales)
        head = derive_head_anchors(body, S_HEAD)
        rows = []
        for branch, aset in (("body", body), ("s-head", head)):
            rows += [(branch, k, t.height, t.width, t.ratio) for k, t in enumerate(aset.templates)]
        _emit(to_csv(("branch", "k", "height", "width", "ratio"), rows), args.out)
    else:
        _emit(to_csv(("k", "scale"), list(enumerate(scales))), args.out)
    return 0


def cmd_assign(args, cfg: RunConfig) -> int:
    ann = parse_annotations(args.annotations)
    props = parse_detections(args.proposals)
    check_image_ids(props, ann)
    if not 0.0 <= args.pos_fraction <= 1.0:
        raise ValidationFailure("--pos-fraction must lie in [0, 1]")
    acfg = cfg.assign
    if args.pos_iou is not None:
        acfg = dataclasses.replace(acfg, pos_iou=args.pos_iou, neg_iou_hi=min(acfg.neg_iou_hi, args.pos_iou))
    if args.visible_ratio is not None:
        acfg = dataclasses.replace(acfg, visible_ratio_min=args.visible_ratio)
    grouped = group_by_image(props)
    rows = []
    for im in ann.images:
        dets = grouped.get(im.id, [])
        labels = label_rois([d.box for d in dets], im.gts, acfg)
        picked = set(range(len(labels)))
        if args.batch_size and labels:
            try:
                picked = set(sample_minibatch(labels, args.batch_size, args.pos_fraction, args.seed + im.id))
            except ValueError:
                picked = set()
        for i, (d, lab) in enumerate(zip(dets, labels)):
            bt = lab.body_target.as_tuple() if lab.body_target else ("",) * 4
            ht = lab.head_target.as_tuple() if lab.head_target else ("",) * 4
            rows.append((
                im.id, i, *d.box.as_tuple(), lab.body_label.name.lower(), lab.head_label.name.lower(),
                lab.body_iou, lab.head_iou,
                "" if lab.matched_gt_body is None else lab.matched_gt_body,
                "" if lab.matched_gt_head is None else lab.matched_gt_head,
                *bt, *ht, int(i in picked),
            ))
    header = ("image_id", "roi", "x1", "y1", "x2", "y2", "body_label", "head_label", "body_iou", "head_iou",
              "body_gt", "head_gt", "body_dx", "body_dy", "body_dw", "body_dh",
              "head_dx", "head_dy", "head_dw", "head_dh", "sampled")
    _emit(to_csv(header, rows), args.out)
    return 0


def cmd_losscheck(args, cfg: RunConfig) -> int:
    results = gradient_suite(args.points, args.seed, args.h, cfg.loss)
    rows = [(name, err, n, "ok" if err < args.tol else "FAIL") for name, err, n in results]
    _emit(to_csv(("function", "max_rel_error", "points", "status"), rows), args.out)
    return 0 if all(r[3] == "ok" for r in rows) else 1


def cmd_fuse(args, cfg: RunConfig) -> int:
    body = parse_detections(args.body, default_branch="body")
    head = parse_detections(args.head, default_branch="s-head")
    if any(d.branch != "body" for d in body) or any(d.branch != "s-head" for d in head):
        raise ValidationFailure("body file must hold body detections and head file s-head detections")
    fcfg = cfg.fusion
    fcfg = FusionConfig(
        args.nms_iou if args.nms_iou is not None else fcfg.nms_iou,
        False if args.no_prenms else fcfg.per_branch_prenms,
        args.max_keep if args.max_keep is not None else fcfg.max_keep,
    )
    b, h = group_by_image(body), group_by_image(head)
    fused = []
    for image_id in sorted(set(b) | set(h)):
        fused.extend(pipeline_fuse(b.get(image_id, []), h.get(image_id, []), fcfg))
    write_detections(args.out, fused)
    return 0


def _subset_from_args(args, cfg: RunConfig) -> SubsetSpec:
    if args.subset is None:
        return cfg.eval.subset
    if args.subset == "custom":
        return SubsetSpec("custom", args.min_height, args.occ_lo, args.occ_hi)
    return SUBSETS[args.subset]


def _curve_outputs(out_dir: Optional[str], stem: str, csv_text: str, svg_text: str) -> None:
    if out_dir:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{stem}.csv").write_text(csv_text, encoding="utf-8")
        (d / f"{stem}.svg").write_text(svg_text, encoding="utf-8")


def cmd_eval(args, cfg: RunConfig) -> int:
    ann = parse_annotations(args.gt)
    dets = parse_detections(args.dets)
    check_image_ids(dets, ann)
    ecfg = EvalConfig(args.iou if args.iou is not None else cfg.eval.iou_thresh, cfg.eval.fppi_refs,
                      _subset_from_args(args, cfg))
    mr, curve, _ = evaluate(group_by_image(dets), ann.gts_by_image(), ecfg)
    summary = to_csv(("subset", "mr2", "num_gt", "num_images"),
                     [(ecfg.subset.name, mr, curve.num_gt, curve.num_images)])
    sys.stdout.write(summary)
    curve_csv = to_csv(("fppi", "miss_rate"), curve.points())
    svg = line_plot_svg({f"{ecfg.subset.name} MR-2 {100 * mr:.2f}%": curve.points()},
                        "Miss rate vs. FPPI", "false positives per image", "miss rate",
                        xlog=True, ylog=True, xlim=(1e-3, 1e1), ylim=(1e-2, 1.0), step=True)
    if args.out:
        _curve_outputs(args.out, "curve", curve_csv, svg)
        (Path(args.out) / "mr2.csv").write_text(summary, encoding="utf-8")
    return 0


def cmd_ar_curve(args, cfg: RunConfig) -> int:
    ann = parse_annotations(args.gt)
    props = parse_detections(args.proposals)
    check_image_ids(props, ann)
    ar = average_recall_curve(group_by_image(props), ann.gts_by_image(), args.budgets, args.iou)
    text = to_csv(("k", "ar"), ar)
    sys.stdout.write(text)
    svg = line_plot_svg({"AR": [(k, a) for k, a in ar if k > 0]}, "Average recall", "#proposals per image",
                        "recall", xlog=True, ylim=(0.0, 1.0))
    _curve_outputs(args.out, "ar", text, svg)
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    scene_cfg = cfg.scene
    if args.seed is not None:
        scene_cfg = dataclasses.replace(scene_cfg, seed=args.seed)
    if args.occlusion is not None:
        scene_cfg = dataclasses.replace(scene_cfg, occlusion_prob=args.occlusion)
    report = run_benchmark(scene_cfg, cfg.scorer, cfg.fusion, cfg.eval, args.scenes, args.budgets)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    images = [ImageRecord(s.image_id, s.width, s.height, s.gts) for s in report.scenes]
    write_annotations(out / "annotations.json", AnnotationFile(images))
    ids = sorted(report.raw)
    write_detections(out / "dets_body_raw.json", [d for i in ids for d in report.raw[i][0]])
    write_detections(out / "dets_head_raw.json", [d for i in ids for d in report.raw[i][1]])
    for c in CONFIGURATIONS:
        write_detections(out / f"dets_{c.replace('-', '_')}.json", [d for i in ids for d in report.outputs[c][i]])
    budgets = list(args.budgets)
    header = ("configuration", "mr2_reasonable", "mr2_heavy", *[f"ar@{k}" for k in budgets], "detections")
    rows = [(r.configuration, r.mr_reasonable, r.mr_heavy, *[a for _, a in r.ar], r.num_detections)
            for r in report.rows]
    text = to_csv(header, rows)
    (out / "report.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    svg = line_plot_svg({r.configuration: [(k, a) for k, a in r.ar if k > 0] for r in report.rows},
                        "Average recall (all pedestrians)", "#proposals per image", "recall", xlog=True)
    (out / "ar.svg").write_text(svg, encoding="utf-8")
    if not report.conservation_ok:
        raise ValidationFailure("detection accounting does not balance (TP + FP + ignored != detections)")
    return 0


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON (default: $HBAN_CONFIG)")
    common.add_argument("--seed", type=int, default=None, help="random seed")

    p = argparse.ArgumentParser(prog="hban", description="Head-body alignment geometry, losses and evaluation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    s = sub.add_parser("derive-heads", parents=[common], help="write the s-head box of every non-ignore annotation")
    s.add_argument("--annotations", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--part", default="s-head", help="part name from the part pool")
    s.set_defaults(func=cmd_derive_heads)

    a = sub.add_parser("anchors", help="anchor utilities")
    asub = a.add_subparsers(dest="anchors_command", metavar="ACTION")
    asub.required = True
    q = asub.add_parser("quantize", parents=[common], help="print equal-population anchor scales as CSV")
    q.add_argument("--annotations", required=True)
    q.add_argument("--bins", type=int, default=None)
    q.add_argument("--min-height", type=float, default=0.0, help="skip annotations shorter than this")
    q.add_argument("--templates", action="store_true", help="print body and s-head templates instead")
    q.add_argument("--out", help="CSV path (default: stdout)")
    q.set_defaults(func=cmd_anchors_quantize)

    s = sub.add_parser("assign", parents=[common], help="label proposals for the body and s-head branches")
    s.add_argument("--annotations", required=True)
    s.add_argument("--proposals", required=True)
    s.add_argument("--pos-iou", type=float, default=None)
    s.add_argument("--visible-ratio", type=float, nargs="?", const=VISIBLE_RATIO_DEFAULT, default=None, metavar="MIN",
                   help=f"demote body positives whose GT is less visible than MIN (default {VISIBLE_RATIO_DEFAULT})")
    s.add_argument("--batch-size", type=int, default=0, help="also mark a seeded minibatch per image")
    s.add_argument("--pos-fraction", type=float, default=0.25)
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_assign)

    s = sub.add_parser("losscheck", parents=[common], help="verify analytic loss gradients by finite differences")
    s.add_argument("--points", type=int, default=100)
    s.add_argument("--h", type=float, default=1e-6)
    s.add_argument("--tol", type=float, default=GRAD_TOL)
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_losscheck)

    s = sub.add_parser("fuse", parents=[common], help="fuse body and s-head detections")
    s.add_argument("--body", required=True)
    s.add_argument("--head", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--nms-iou", type=float, default=None)
    s.add_argument("--max-keep", type=int, default=None)
    s.add_argument("--no-prenms", action="store_true", help="skip per-branch NMS before merging")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("eval", parents=[common], help="log-average miss rate and FPPI curve")
    s.add_argument("--gt", required=True)
    s.add_argument("--dets", required=True)
    s.add_argument("--subset", choices=("reasonable", "heavy", "all", "custom"), default=None)
    s.add_argument("--iou", type=float, default=None)
    s.add_argument("--min-height", type=float, default=50.0, help="custom subset only")
    s.add_argument("--occ-lo", type=float, default=0.0, help="custom subset only")
    s.add_argument("--occ-hi", type=float, default=1.0, help="custom subset only")
    s.add_argument("--out", help="directory for curve.csv, curve.svg and mr2.csv")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("ar-curve", parents=[common], help="average recall vs. proposals per image")
    s.add_argument("--proposals", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--budgets", type=_budgets, default=list(DEFAULT_AR_BUDGETS))
    s.add_argument("--iou", type=float, default=0.5)
    s.add_argument("--out", help="directory for ar.csv and ar.svg")
    s.set_defaults(func=cmd_ar_curve)

    s = sub.add_parser("simulate", parents=[common], help="run the synthetic crowd benchmark")
    s.add_argument("--scenes", type=int, default=200)
    s.add_argument("--occlusion", type=float, default=None)
    s.add_argument("--budgets", type=_budgets, default=[10, 100, 300])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = load_config(args.config)
        if args.seed is None and args.command in ("losscheck", "assign"):
            args.seed = 0
        return args.func(args, cfg)
    except (SchemaError, ConfigError, ValidationFailure, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
