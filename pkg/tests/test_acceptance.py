"""Acceptance checks, one per criterion.

Each check prints a single ``PASS``/``FAIL`` line with its measured numbers.
Run under pytest (lines are repeated in the terminal summary) or directly
with ``python3 tests/test_acceptance.py``.
"""
import contextlib
import io
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import brute_force_curve, brute_force_mr, box_iou, nms as oracle_nms  # noqa: E402
from test_anchors import oracle_quantiles  # noqa: E402
from test_assignment import frac_head, frac_iou  # noqa: E402

from hban.assignment import AssignConfig, GroundTruth, assign_labels  # noqa: E402
from hban.cli import main as cli_main  # noqa: E402
from hban.evaluation import ALL, MR_FLOOR, EvalConfig, default_fppi_refs, evaluate  # noqa: E402
from hban.fusion import Detection, greedy_nms  # noqa: E402
from hban.geometry import DEFAULT_PART_POOL, S_HEAD, Box, cut_array, expand_array  # noqa: E402
from hban.losses import GRAD_TOL, align_loss, gradient_suite  # noqa: E402
from hban.anchors import quantized_scales  # noqa: E402
from hban.synth import SceneConfig, run_benchmark  # noqa: E402

RESULTS = {}


def _record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n}: {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def _random_boxes(rng, n, lo=-2000.0, hi=2000.0):
    xy = rng.uniform(lo, hi, (n, 2))
    wh = rng.uniform(1.0, 800.0, (n, 2))
    return np.hstack([xy, xy + wh])


def check_1():
    rng = np.random.default_rng(1)
    boxes = _random_boxes(rng, 10_000)
    t0 = time.perf_counter()
    worst = 0.0
    for spec in DEFAULT_PART_POOL.values():
        worst = max(worst, float(np.abs(expand_array(cut_array(boxes, spec), spec) - boxes).max()))
    heads = cut_array(boxes, S_HEAD)
    ratio = ((heads[:, 2] - heads[:, 0]) * (heads[:, 3] - heads[:, 1])) / (
        (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1]))
    area_err = float(np.abs(ratio - 2 / 9).max())
    elapsed = time.perf_counter() - t0
    exact = all(
        (Fraction(s.fx2) - Fraction(s.fx1)) * (Fraction(s.fy2) - Fraction(s.fy1)) - Fraction(2, 9) < Fraction(1, 10**15)
        for s in DEFAULT_PART_POOL.values()
    )
    ok = worst <= 1e-9 and area_err <= 1e-12 and elapsed < 1.0 and exact
    return _record(1, ok, f"round-trip max err {worst:.2e} (<=1e-9), s-head area err {area_err:.2e} "
                          f"(<=1e-12), {elapsed:.3f}s (<1s)")


def check_2():
    t0 = time.perf_counter()
    res = gradient_suite(num_points=100, seed=0, h=1e-6)
    elapsed = time.perf_counter() - t0
    need = {"smooth_l1", "branch_loss", "align_loss"}
    by = {name: (err, n) for name, err, n in res}
    ok = need <= set(by) and all(by[k][1] >= 100 for k in need)
    ok = ok and all(err < GRAD_TOL for err, _ in by.values()) and elapsed < 5.0
    detail = ", ".join(f"{k} {e:.1e}/{n}pts" for k, (e, n) in by.items())
    return _record(2, ok, f"{detail} (<1e-5), {elapsed:.2f}s (<5s)")


def check_3():
    rng = np.random.default_rng(3)
    body = _random_boxes(rng, 5000)
    aligned, db, dh = align_loss(body, cut_array(body))
    zero_ok = aligned == 0.0 and not db.any() and not dh.any()
    # perturb one random coordinate of each head by at least 1e-3 of its size
    head = cut_array(body)
    size = np.tile(head[:, 2:] - head[:, :2], 2)
    mags = rng.uniform(1e-3, 0.2, 5000) * rng.choice([-1, 1], 5000)
    coord = rng.integers(0, 4, 5000)
    pert = head.copy()
    pert[np.arange(5000), coord] += mags * size[np.arange(5000), coord]
    pos = [align_loss(body[i:i + 1], pert[i:i + 1])[0] for i in range(5000)]
    min_pos = min(pos)
    # exact boundary case
    b1 = np.array([[0.0, 0.0, 12.0, 30.0]])
    h1 = cut_array(b1) + np.array([[8e-3, 0, 0, 0]])  # 1e-3 of the 8 px head width
    boundary = align_loss(b1, h1)[0]
    base = np.array([align_loss(body[i:i + 1], pert[i:i + 1])[0] for i in range(500)])
    worst = 0.0
    for _ in range(5):
        shift = np.tile(rng.uniform(-1e3, 1e3, 2), 2)
        s = rng.uniform(0.1, 10.0)
        moved = np.array([align_loss(s * (body[i:i + 1] + shift), s * (pert[i:i + 1] + shift))[0] for i in range(500)])
        worst = max(worst, float(np.abs(moved - base).max()))
    ok = zero_ok and min_pos > 0 and boundary > 0 and worst < 1e-9
    return _record(3, ok, f"aligned loss {aligned!r} on 5000 pairs, min perturbed {min_pos:.2e} (>0), "
                          f"boundary {boundary:.2e}, invariance diff {worst:.1e} (<1e-9)")


def check_4():
    rng = np.random.default_rng(4)
    mismatches = 0
    for k in range(1000):
        n = int(rng.integers(0, 51))
        if k % 2:
            boxes = _random_boxes(rng, n, 0, 200) / 4
            scores = rng.uniform(0, 1, n)
        else:  # integer grid with many ties and duplicates
            xy = rng.integers(0, 20, (n, 2))
            boxes = np.hstack([xy, xy + rng.integers(1, 10, (n, 2))]).astype(float)
            scores = rng.choice([0.2, 0.5, 0.9], n)
        thresh = float(rng.choice([0.3, 0.5, 0.7]))
        dets = [Detection(0, Box(*b), float(s), "body") for b, s in zip(boxes, scores)]
        got = greedy_nms(dets, thresh)
        want = [dets[i] for i in oracle_nms([(d.box.as_tuple(), d.score) for d in dets], thresh)]
        mismatches += got != want
    return _record(4, mismatches == 0, f"{1000 - mismatches}/1000 instances equal to the quadratic oracle")


def _micro(rng):
    images, dets_left = [], int(rng.integers(0, 11))
    for i in range(int(rng.integers(1, 4))):
        gts = []
        for _ in range(int(rng.integers(0, 4))):
            x, y = rng.integers(0, 5, 2)
            w, h = rng.integers(1, 4, 2)
            gts.append(((float(x), float(y), float(x + w), float(y + h)), bool(rng.uniform() < 0.8)))
        nd = int(rng.integers(0, dets_left + 1))
        dets_left -= nd
        dets = []
        for _ in range(nd):
            x, y = rng.integers(0, 5, 2)
            w, h = rng.integers(1, 4, 2)
            dets.append(((float(x), float(y), float(x + w), float(y + h)), float(rng.choice([0.2, 0.4, 0.6, 0.8]))))
        images.append((dets, gts))
    return images


def check_5():
    rng = np.random.default_rng(5)
    refs = default_fppi_refs()
    cfg = EvalConfig(subset=ALL)
    done = bad = 0
    while done < 500:
        images = _micro(rng)
        if not any(ev for _, gts in images for _, ev in gts):
            continue
        done += 1
        gts_by = {i: [GroundTruth(Box(*b), ignore=not ev, id=j) for j, (b, ev) in enumerate(g)]
                  for i, (_, g) in enumerate(images)}
        dets_by = {i: [Detection(i, Box(*b), s, "body") for b, s in d] for i, (d, _) in enumerate(images)}
        mr, curve, _ = evaluate(dets_by, gts_by, cfg)
        want = brute_force_curve(images)
        bad += curve.points() != want or mr != brute_force_mr(want, refs)
    gts = {0: [GroundTruth(Box(0, 0, 40, 100))], 1: [GroundTruth(Box(10, 10, 60, 130))]}
    none_mr = evaluate({}, gts, cfg)[0]
    perfect = {i: [Detection(i, g.full, 0.9, "body") for g in v] for i, v in gts.items()}
    perfect_mr = evaluate(perfect, gts, cfg)[0]
    ok = bad == 0 and none_mr == 1.0 and perfect_mr == MR_FLOOR
    return _record(5, ok, f"{500 - bad}/500 micro-instances equal brute force; no detections -> {none_mr!r}, "
                          f"perfect -> {perfect_mr!r}")


def check_6():
    gt_box, roi_box = (0, 0, 41, 100), (0, 20, 41, 120)
    body_ref = frac_iou(gt_box, roi_box)
    head_ref = frac_iou(frac_head(gt_box), frac_head(roi_box))
    (lab,) = assign_labels([Box(*roi_box)], [GroundTruth(Box(*gt_box))], AssignConfig(pos_iou=0.5))
    ok = (lab.body_label == 1 and lab.head_label == 0 and body_ref == Fraction(2, 3) and head_ref == Fraction(1, 4)
          and abs(lab.body_iou - float(body_ref)) < 1e-12 and abs(lab.head_iou - float(head_ref)) < 1e-12
          and abs(box_iou(gt_box, roi_box) - lab.body_iou) < 1e-12)
    return _record(6, ok, f"body IoU {lab.body_iou:.6f} ({body_ref}) -> {lab.body_label.name.lower()}, "
                          f"head IoU {lab.head_iou:.6f} ({head_ref}) -> {lab.head_label.name.lower()}")


def check_7():
    grid = [float(v) for v in np.linspace(50, 400, 11)]
    grid_ok = quantized_scales(grid, 10) == grid
    rng = np.random.default_rng(7)
    sample = rng.lognormal(4.6, 0.6, 1000)
    rand_ok = quantized_scales(sample, 10) == oracle_quantiles(sample, 10)
    extra = all(
        quantized_scales(s, b) == oracle_quantiles(s, b)
        for s, b in ((rng.uniform(20, 500, int(rng.integers(2, 1000))), int(rng.integers(1, 30))) for _ in range(200))
    )
    return _record(7, grid_ok and rand_ok and extra,
                   f"grid reproduced: {grid_ok}; 1000-sample quantiles equal oracle: {rand_ok}; 200 extra draws: {extra}")


def check_8():
    t0 = time.perf_counter()
    rep = run_benchmark(SceneConfig(occlusion_prob=0.5, seed=42), num_images=200, budgets=(10, 100, 300))
    elapsed = time.perf_counter() - t0
    body, fused = rep.row("body-only"), rep.row("fused")
    ar_ok = all(f >= b for (_, b), (_, f) in zip(body.ar, fused.ar))
    mr_ok = fused.mr_heavy <= body.mr_heavy
    ok = ar_ok and mr_ok and elapsed < 30 and rep.conservation_ok
    ars = " ".join(f"AR@{k} {f:.4f}>={b:.4f}" for (k, b), (_, f) in zip(body.ar, fused.ar))
    return _record(8, ok, f"{ars}; heavy MR-2 fused {fused.mr_heavy:.4f} <= body {body.mr_heavy:.4f}; "
                          f"{elapsed:.1f}s (<30s)")


def check_9():
    outputs = []
    with tempfile.TemporaryDirectory() as tmp, contextlib.redirect_stdout(io.StringIO()):
        for run in ("a", "b"):
            d = Path(tmp) / run
            rc = cli_main(["simulate", "--scenes", "40", "--seed", "42", "--occlusion", "0.5", "--out", str(d)])
            for c in ("fused", "body_only"):
                rc |= cli_main(["eval", "--gt", str(d / "annotations.json"), "--dets", str(d / f"dets_{c}.json"),
                                "--subset", "heavy", "--out", str(d / f"eval_{c}")])
            outputs.append((rc, {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}))
    (rc_a, a), (rc_b, b) = outputs
    same = a == b
    ok = rc_a == rc_b == 0 and same and len(a) > 0
    return _record(9, ok, f"{len(a)} files, byte-identical across runs: {same}")


CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5, 6: check_6, 7: check_7, 8: check_8, 9: check_9}


@pytest.mark.parametrize("n", sorted(CHECKS))
def test_criterion(n, capsys):
    ok = CHECKS[n]()
    with capsys.disabled():
        print("\n" + RESULTS[n])
    assert ok, RESULTS[n]


if __name__ == "__main__":
    results = [CHECKS[n]() for n in sorted(CHECKS)]
    sys.exit(0 if all(results) else 1)
