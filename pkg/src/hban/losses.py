"""RCNN-stage losses for the body and s-head branches, with analytic gradients.

Every loss here returns its value together with the partial derivatives with
respect to its continuous inputs, so the gradients can be checked against
central finite differences (:func:`finite_diff_check`).

Box regression uses the usual two-stage parameterization relative to a
reference box::

    dx = (cx - cx_ref) / w_ref     dw = log(w / w_ref)
    dy = (cy - cy_ref) / h_ref     dh = log(h / h_ref)

The alignment loss is computed in this normalized space, which makes it
invariant to translating or uniformly scaling a body/head pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import S_HEAD, Box, PartSpec, cut_array, expand_array


class Label(IntEnum):
    EXCLUDED = -1
    NEGATIVE = 0
    POSITIVE = 1


POSITIVE, NEGATIVE, EXCLUDED = Label.POSITIVE, Label.NEGATIVE, Label.EXCLUDED

# probabilities are floored here before taking logs
PROB_EPS = 1e-12
# alignment residuals within this many ulps of the coordinate magnitude are rounding noise
SNAP_ULPS = 16


@dataclass(frozen=True)
class RegressionTarget:
    dx: float
    dy: float
    dw: float
    dh: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise ValueError(f"non-finite regression target {self.as_tuple()}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.dx, self.dy, self.dw, self.dh)


@dataclass(frozen=True)
class BranchPrediction:
    score: float
    target: RegressionTarget
    reference: Box

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1.0
    smooth_l1_beta: float = 1.0
    align_weight: float = 1.0
    ohem_keep: int = 128

    def __post_init__(self):
        if self.alpha < 0 or self.align_weight < 0:
            raise ValueError("loss weights must be non-negative")
        if not self.smooth_l1_beta > 0:
            raise ValueError("smooth_l1_beta must be positive")
        if int(self.ohem_keep) != self.ohem_keep or self.ohem_keep < 1:
            raise ValueError("ohem_keep must be a positive integer")


@dataclass
class LossReport:
    l_body: float
    l_head: float
    l_align: float
    l_total: float
    gradients: dict = field(default_factory=dict)
    selected: Optional[np.ndarray] = None


# -- smooth L1 ---------------------------------------------------------------


def smooth_l1(x, beta: float = 1.0):
    """SmoothL1 value and derivative, elementwise.

    ``0.5 x^2 / beta`` inside ``|x| < beta``, ``|x| - beta / 2`` outside.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    inside = ax < beta
    value = np.where(inside, 0.5 * x * x / beta, ax - 0.5 * beta)
    grad = np.where(inside, x / beta, np.sign(x))
    if value.ndim == 0:
        return float(value), float(grad)
    return value, grad


# -- box encoding ------------------------------------------------------------


def _as_boxes(a) -> np.ndarray:
    if isinstance(a, Box):
        return np.array([a.as_tuple()], dtype=np.float64)
    return np.asarray(a, dtype=np.float64).reshape(-1, 4)


def encode_array(boxes, refs) -> np.ndarray:
    b = _as_boxes(boxes)
    r = _as_boxes(refs)
    wb, hb = b[:, 2] - b[:, 0], b[:, 3] - b[:, 1]
    wr, hr = r[:, 2] - r[:, 0], r[:, 3] - r[:, 1]
    dx = (0.5 * (b[:, 0] + b[:, 2]) - 0.5 * (r[:, 0] + r[:, 2])) / wr
    dy = (0.5 * (b[:, 1] + b[:, 3]) - 0.5 * (r[:, 1] + r[:, 3])) / hr
    return np.stack([dx, dy, np.log(wb / wr), np.log(hb / hr)], axis=1)


def decode_array(deltas, refs) -> np.ndarray:
    d = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    r = _as_boxes(refs)
    wr, hr = r[:, 2] - r[:, 0], r[:, 3] - r[:, 1]
    cx = 0.5 * (r[:, 0] + r[:, 2]) + d[:, 0] * wr
    cy = 0.5 * (r[:, 1] + r[:, 3]) + d[:, 1] * hr
    w = wr * np.exp(d[:, 2])
    h = hr * np.exp(d[:, 3])
    return np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=1)


def encode_deltas(box: Box, reference: Box) -> RegressionTarget:
    return RegressionTarget(*(float(v) for v in encode_array(box, reference)[0]))


def decode_deltas(t: RegressionTarget, reference: Box) -> Box:
    return Box(*(float(v) for v in decode_array([t.as_tuple()], reference)[0]))


def _encode_jacobians(b: np.ndarray, r: np.ndarray):
    """Per-row Jacobians of ``encode_array(b, r)`` w.r.t. ``b`` and ``r``, each ``(N, 4, 4)``."""
    n = b.shape[0]
    wb, hb = b[:, 2] - b[:, 0], b[:, 3] - b[:, 1]
    wr, hr = r[:, 2] - r[:, 0], r[:, 3] - r[:, 1]
    dx = (0.5 * (b[:, 0] + b[:, 2]) - 0.5 * (r[:, 0] + r[:, 2])) / wr
    dy = (0.5 * (b[:, 1] + b[:, 3]) - 0.5 * (r[:, 1] + r[:, 3])) / hr

    jb = np.zeros((n, 4, 4))
    jb[:, 0, 0] = jb[:, 0, 2] = 0.5 / wr
    jb[:, 1, 1] = jb[:, 1, 3] = 0.5 / hr
    jb[:, 2, 0], jb[:, 2, 2] = -1.0 / wb, 1.0 / wb
    jb[:, 3, 1], jb[:, 3, 3] = -1.0 / hb, 1.0 / hb

    jr = np.zeros((n, 4, 4))
    jr[:, 0, 0], jr[:, 0, 2] = (dx - 0.5) / wr, (-dx - 0.5) / wr
    jr[:, 1, 1], jr[:, 1, 3] = (dy - 0.5) / hr, (-dy - 0.5) / hr
    jr[:, 2, 0], jr[:, 2, 2] = 1.0 / wr, -1.0 / wr
    jr[:, 3, 1], jr[:, 3, 3] = 1.0 / hr, -1.0 / hr
    return jb, jr


def _decode_jacobian(deltas: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Jacobian of decoded corners w.r.t. deltas, ``(N, 4, 4)``."""
    n = deltas.shape[0]
    wr, hr = refs[:, 2] - refs[:, 0], refs[:, 3] - refs[:, 1]
    w = wr * np.exp(deltas[:, 2])
    h = hr * np.exp(deltas[:, 3])
    j = np.zeros((n, 4, 4))
    j[:, 0, 0] = j[:, 2, 0] = wr
    j[:, 1, 1] = j[:, 3, 1] = hr
    j[:, 0, 2], j[:, 2, 2] = -0.5 * w, 0.5 * w
    j[:, 1, 3], j[:, 3, 3] = -0.5 * h, 0.5 * h
    return j


def part_matrices(spec: PartSpec = S_HEAD) -> tuple[np.ndarray, np.ndarray]:
    """Linear maps (on corner vectors) for cutting and expanding a part."""
    fx1, fy1, fx2, fy2 = spec.as_tuple()
    cut = np.array([
        [1 - fx1, 0, fx1, 0],
        [0, 1 - fy1, 0, fy1],
        [1 - fx2, 0, fx2, 0],
        [0, 1 - fy2, 0, fy2],
    ])
    fw, fh = fx2 - fx1, fy2 - fy1
    expand = np.array([
        [1 + fx1 / fw, 0, -fx1 / fw, 0],
        [0, 1 + fy1 / fh, 0, -fy1 / fh],
        [1 + (fx1 - 1) / fw, 0, (1 - fx1) / fw, 0],
        [0, 1 + (fy1 - 1) / fh, 0, (1 - fy1) / fh],
    ])
    return cut, expand


# -- classification / regression branch --------------------------------------


def _cross_entropy(scores: np.ndarray, labels: np.ndarray):
    pos = labels == POSITIVE
    p = np.where(pos, scores, 1.0 - scores)
    value = -np.log(np.maximum(p, PROB_EPS))
    dp = np.where(p > PROB_EPS, -1.0 / np.maximum(p, PROB_EPS), 0.0)
    grad = np.where(pos, dp, -dp)
    return value, grad


def per_roi_branch_losses(scores, deltas, labels, target_deltas, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Unnormalized ``ce + alpha * reg`` per RoI; excluded RoIs get 0."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    ce, _ = _cross_entropy(scores, labels)
    pos = labels == POSITIVE
    reg = np.zeros_like(scores)
    if pos.any():
        r, _ = smooth_l1(np.asarray(deltas)[pos] - np.asarray(target_deltas)[pos], cfg.smooth_l1_beta)
        reg[pos] = r.sum(axis=1)
    out = ce + cfg.alpha * reg
    out[labels == EXCLUDED] = 0.0
    return out


def branch_loss(scores, deltas, labels, target_deltas, cfg: LossConfig = LossConfig()):
    """Classification plus weighted regression loss of one branch.

    ``scores`` are post-softmax pedestrian probabilities ``(N,)``, ``deltas``
    the predicted regression ``(N, 4)``, ``labels`` holds ``POSITIVE``,
    ``NEGATIVE`` or ``EXCLUDED`` and ``target_deltas`` the regression targets
    (rows of non-positive RoIs are ignored). The loss is the mean
    cross-entropy over non-excluded RoIs plus ``alpha`` times the mean over
    positives of the summed SmoothL1 of the four delta residuals.

    Returns ``(loss, d_scores, d_deltas)``.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    deltas = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    labels = np.asarray(labels).reshape(-1)
    n_all = scores.shape[0]
    if target_deltas is None:
        target_deltas = np.zeros((n_all, 4))
    target_deltas = np.asarray(target_deltas, dtype=np.float64).reshape(-1, 4)
    if not (deltas.shape[0] == labels.shape[0] == target_deltas.shape[0] == n_all):
        raise ValueError("scores, deltas, labels and targets must be aligned")
    active = labels != EXCLUDED
    n = int(active.sum())
    if n == 0:
        raise ValueError("branch_loss needs at least one non-excluded RoI")

    d_scores = np.zeros(n_all)
    d_deltas = np.zeros((n_all, 4))

    ce, dce = _cross_entropy(scores[active], labels[active])
    loss = ce.sum() / n
    d_scores[active] = dce / n

    pos = labels == POSITIVE
    n_pos = int(pos.sum())
    if n_pos:
        val, g = smooth_l1(deltas[pos] - target_deltas[pos], cfg.smooth_l1_beta)
        loss += cfg.alpha * val.sum() / n_pos
        d_deltas[pos] = cfg.alpha * g / n_pos
    return float(loss), d_scores, d_deltas


def stack_predictions(preds: Sequence[BranchPrediction]):
    """Split a list of predictions into ``(scores, deltas, references)`` arrays."""
    scores = np.array([p.score for p in preds], dtype=np.float64)
    deltas = np.array([p.target.as_tuple() for p in preds], dtype=np.float64).reshape(-1, 4)
    refs = np.array([p.reference.as_tuple() for p in preds], dtype=np.float64).reshape(-1, 4)
    return scores, deltas, refs


# -- alignment ---------------------------------------------------------------


def _snap(residuals: np.ndarray, body: np.ndarray, head: np.ndarray, refs: np.ndarray) -> np.ndarray:
    mag = np.maximum(np.abs(body).max(axis=1), np.abs(head).max(axis=1))
    size = np.minimum(refs[:, 2] - refs[:, 0], refs[:, 3] - refs[:, 1])
    tol = SNAP_ULPS * np.finfo(np.float64).eps * mag / size
    return np.where(np.abs(residuals) <= tol[:, None], 0.0, residuals)


def align_residuals(body, head, spec: PartSpec = S_HEAD):
    """Normalized residuals ``(body vs expanded head, head vs cut body)``, each ``(P, 4)``.

    Residuals at the level of floating-point rounding of the coordinates are
    reported as exactly zero, so a head produced by cutting its body scores 0.
    """
    body = _as_boxes(body)
    head = _as_boxes(head)
    s_exp = expand_array(head, spec)
    t_cut = cut_array(body, spec)
    r1 = _snap(encode_array(body, s_exp), body, head, s_exp)
    r2 = _snap(encode_array(head, t_cut), body, head, t_cut)
    return r1, r2


def align_loss(body, head, cfg: LossConfig = LossConfig(), spec: PartSpec = S_HEAD):
    """Alignment loss over paired body / s-head boxes.

    For each pair, the body box is compared against the body region expanded
    from its head box, and the head box against the head region cut from its
    body box. Both comparisons are SmoothL1 over the normalized residuals,
    summed per pair and averaged over pairs.

    Returns ``(loss, d_body, d_head)`` with gradients w.r.t. all corners.
    """
    body = _as_boxes(body)
    head = _as_boxes(head)
    if body.shape != head.shape:
        raise ValueError("body and head arrays must be paired")
    n = body.shape[0]
    if n == 0:
        raise ValueError("align_loss needs at least one pair")
    cut, expand = part_matrices(spec)
    s_exp = expand_array(head, spec)
    t_cut = cut_array(body, spec)
    r1, r2 = align_residuals(body, head, spec)
    v1, g1 = smooth_l1(r1, cfg.smooth_l1_beta)
    v2, g2 = smooth_l1(r2, cfg.smooth_l1_beta)
    # fixed left-to-right reduction keeps results bit-reproducible
    loss = 0.0
    for k in range(n):
        loss += float(v1[k].sum() + v2[k].sum())
    loss /= n

    jb1, jr1 = _encode_jacobians(body, s_exp)
    jb2, jr2 = _encode_jacobians(head, t_cut)
    d_body = np.einsum("nij,ni->nj", jb1, g1) + np.einsum("nij,ni->nj", jr2, g2) @ cut
    d_head = np.einsum("nij,ni->nj", jr1, g1) @ expand + np.einsum("nij,ni->nj", jb2, g2)
    return loss, d_body / n, d_head / n


# -- composition -------------------------------------------------------------


def ohem_select(per_roi_losses: Sequence[float], keep: int) -> list[int]:
    """Indices of the ``keep`` largest losses, lower index first on ties, in index order."""
    if keep < 1:
        raise ValueError("keep must be >= 1")
    losses = list(per_roi_losses)
    order = sorted(range(len(losses)), key=lambda i: (-losses[i], i))
    return sorted(order[:keep])


def rcnn_total_loss(
    rois,
    body_scores,
    body_deltas,
    body_labels,
    body_targets,
    head_scores,
    head_deltas,
    head_labels,
    head_targets,
    cfg: LossConfig = LossConfig(),
    use_ohem: bool = True,
) -> LossReport:
    """Body loss + s-head loss + weighted alignment loss for one RoI batch.

    Body deltas are relative to each RoI, head deltas relative to the s-head
    cut of the RoI. OHEM keeps the ``cfg.ohem_keep`` RoIs with the largest
    combined branch loss; the alignment term always averages over every RoI
    whose head label is positive. Gradients are reported w.r.t. the four
    prediction arrays, with the alignment term back-propagated through box
    decoding.
    """
    rois = _as_boxes(rois)
    n = rois.shape[0]
    body_labels = np.asarray(body_labels).reshape(-1)
    head_labels = np.asarray(head_labels).reshape(-1)
    body_scores = np.asarray(body_scores, dtype=np.float64).reshape(-1)
    head_scores = np.asarray(head_scores, dtype=np.float64).reshape(-1)
    body_deltas = np.asarray(body_deltas, dtype=np.float64).reshape(-1, 4)
    head_deltas = np.asarray(head_deltas, dtype=np.float64).reshape(-1, 4)
    body_targets = np.zeros((n, 4)) if body_targets is None else np.asarray(body_targets, dtype=np.float64).reshape(-1, 4)
    head_targets = np.zeros((n, 4)) if head_targets is None else np.asarray(head_targets, dtype=np.float64).reshape(-1, 4)

    selected = np.arange(n)
    if use_ohem and n > cfg.ohem_keep:
        per_roi = per_roi_branch_losses(body_scores, body_deltas, body_labels, body_targets, cfg) + \
            per_roi_branch_losses(head_scores, head_deltas, head_labels, head_targets, cfg)
        candidates = np.flatnonzero((body_labels != EXCLUDED) | (head_labels != EXCLUDED))
        picked = ohem_select(per_roi[candidates].tolist(), cfg.ohem_keep)
        selected = candidates[picked]
    mask = np.zeros(n, dtype=bool)
    mask[selected] = True
    b_lab = np.where(mask, body_labels, EXCLUDED)
    h_lab = np.where(mask, head_labels, EXCLUDED)

    grads = {
        "body_scores": np.zeros(n), "body_deltas": np.zeros((n, 4)),
        "head_scores": np.zeros(n), "head_deltas": np.zeros((n, 4)),
    }
    l_body = l_head = l_align = 0.0
    if (b_lab != EXCLUDED).any():
        l_body, gs, gd = branch_loss(body_scores, body_deltas, b_lab, body_targets, cfg)
        grads["body_scores"] += gs
        grads["body_deltas"] += gd
    if (h_lab != EXCLUDED).any():
        l_head, gs, gd = branch_loss(head_scores, head_deltas, h_lab, head_targets, cfg)
        grads["head_scores"] += gs
        grads["head_deltas"] += gd

    pairs = np.flatnonzero(head_labels == POSITIVE)
    if pairs.size:
        head_refs = cut_array(rois[pairs])
        body_box = decode_array(body_deltas[pairs], rois[pairs])
        head_box = decode_array(head_deltas[pairs], head_refs)
        l_align, d_body, d_head = align_loss(body_box, head_box, cfg)
        jb = _decode_jacobian(body_deltas[pairs], rois[pairs])
        jh = _decode_jacobian(head_deltas[pairs], head_refs)
        grads["body_deltas"][pairs] += cfg.align_weight * np.einsum("nij,ni->nj", jb, d_body)
        grads["head_deltas"][pairs] += cfg.align_weight * np.einsum("nij,ni->nj", jh, d_head)

    total = l_body + l_head + cfg.align_weight * l_align
    return LossReport(l_body, l_head, l_align, total, grads, selected)


# -- gradient verification ---------------------------------------------------


def finite_diff_check(fn: Callable, point, h: float = 1e-6) -> float:
    """Largest relative error between the analytic and central-difference gradient.

    ``fn(x)`` must return ``(value, grad)`` for a flat float array ``x``. The
    error for each coordinate is ``|g - g_fd| / max(1, |g|, |g_fd|)``, i.e.
    relative for large components and absolute below magnitude one. Any
    non-finite value makes the result ``inf``.
    """
    x = np.array(point, dtype=np.float64).ravel()
    _, grad = fn(x.copy())
    grad = np.asarray(grad, dtype=np.float64).ravel()
    worst = 0.0
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (fn(xp)[0] - fn(xm)[0]) / (2 * h)
        err = abs(grad[i] - fd) / max(1.0, abs(grad[i]), abs(fd))
        if not math.isfinite(err):
            return math.inf
        worst = max(worst, err)
    return worst


KINK_MARGIN = 1e-3
GRAD_TOL = 1e-5


def _random_boxes(rng: np.random.Generator, n: int) -> np.ndarray:
    xy = rng.uniform(-200, 800, size=(n, 2))
    wh = rng.uniform(10, 300, size=(n, 2))
    return np.hstack([xy, xy + wh])


def _clear_of_kink(r: np.ndarray, beta: float) -> bool:
    r = np.abs(np.asarray(r))
    return bool(np.all(np.abs(r - beta) > KINK_MARGIN) and np.all(r > KINK_MARGIN))


def gradient_suite(num_points: int = 100, seed: int = 0, h: float = 1e-6, cfg: LossConfig = LossConfig()):
    """Finite-difference check of every analytic gradient at random non-kink points.

    Returns ``[(name, max_relative_error, points_checked)]`` for smooth_l1,
    branch_loss, align_loss and the composed RCNN loss.
    """
    rng = np.random.default_rng(seed)
    beta = cfg.smooth_l1_beta
    results = []

    worst, n = 0.0, 0
    while n < num_points:
        x = rng.uniform(-3 * beta, 3 * beta)
        if not _clear_of_kink(x, beta):
            continue
        worst = max(worst, finite_diff_check(lambda v: (smooth_l1(v[0], beta)[0], [smooth_l1(v[0], beta)[1]]), [x], h))
        n += 1
    results.append(("smooth_l1", float(worst), n))

    worst, n = 0.0, 0
    while n < num_points:
        k = int(rng.integers(2, 9))
        labels = rng.integers(0, 2, size=k)
        scores = rng.uniform(0.05, 0.95, size=k)
        deltas = rng.normal(0, 0.8, size=(k, 4))
        targets = rng.normal(0, 0.8, size=(k, 4))
        if not _clear_of_kink((deltas - targets)[labels == POSITIVE], beta):
            continue

        def fn(v, labels=labels, targets=targets, k=k):
            loss, gs, gd = branch_loss(v[:k], v[k:].reshape(k, 4), labels, targets, cfg)
            return loss, np.concatenate([gs, gd.ravel()])

        worst = max(worst, finite_diff_check(fn, np.concatenate([scores, deltas.ravel()]), h))
        n += 1
    results.append(("branch_loss", float(worst), n))

    worst, n = 0.0, 0
    while n < num_points:
        k = int(rng.integers(1, 5))
        body = _random_boxes(rng, k)
        size = np.tile(body[:, 2:] - body[:, :2], 2)
        head = cut_array(body) + rng.normal(0, 0.05, size=(k, 4)) * size
        if np.any(head[:, 2] <= head[:, 0]) or np.any(head[:, 3] <= head[:, 1]):
            continue
        r1, r2 = align_residuals(body, head)
        if not (_clear_of_kink(r1, beta) and _clear_of_kink(r2, beta)):
            continue

        def fn(v, k=k):
            loss, db, dh = align_loss(v[: 4 * k].reshape(k, 4), v[4 * k:].reshape(k, 4), cfg)
            return loss, np.concatenate([db.ravel(), dh.ravel()])

        worst = max(worst, finite_diff_check(fn, np.concatenate([body.ravel(), head.ravel()]), h))
        n += 1
    results.append(("align_loss", float(worst), n))

    worst, n = 0.0, 0
    while n < max(1, num_points // 4):
        k = int(rng.integers(2, 7))
        rois = _random_boxes(rng, k)
        bl = rng.integers(0, 2, size=k)
        hl = rng.integers(0, 2, size=k)
        bs, hs = rng.uniform(0.05, 0.95, size=k), rng.uniform(0.05, 0.95, size=k)
        bd, hd = rng.normal(0, 0.1, size=(k, 4)), rng.normal(0, 0.1, size=(k, 4))
        bt, ht = rng.normal(0, 0.3, size=(k, 4)), rng.normal(0, 0.3, size=(k, 4))
        pos = hl == POSITIVE
        if not (_clear_of_kink((bd - bt)[bl == POSITIVE], beta) and _clear_of_kink((hd - ht)[pos], beta)):
            continue
        if pos.any():
            r1, r2 = align_residuals(decode_array(bd[pos], rois[pos]), decode_array(hd[pos], cut_array(rois[pos])))
            if not (_clear_of_kink(r1, beta) and _clear_of_kink(r2, beta)):
                continue

        def fn(v, k=k, rois=rois, bl=bl, hl=hl, bt=bt, ht=ht):
            rep = rcnn_total_loss(rois, v[:k], v[k:5 * k].reshape(k, 4), bl, bt,
                                  v[5 * k:6 * k], v[6 * k:].reshape(k, 4), hl, ht, cfg)
            g = rep.gradients
            return rep.l_total, np.concatenate([g["body_scores"], g["body_deltas"].ravel(),
                                                g["head_scores"], g["head_deltas"].ravel()])

        worst = max(worst, finite_diff_check(fn, np.concatenate([bs, bd.ravel(), hs, hd.ravel()]), h))
        n += 1
    results.append(("rcnn_total_loss", float(worst), n))
    return results
