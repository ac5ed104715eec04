import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hban.anchors import (
    BODY_RATIO,
    AnchorConfig,
    AnchorSet,
    AnchorTemplate,
    derive_head_anchors,
    generate_body_anchors,
    quantized_scales,
    tile_anchors,
)


def oracle_quantiles(heights, num_bins):
    """Sort, then interpolate between neighbouring order statistics."""
    h = sorted(float(v) for v in heights)
    n = len(h)
    out = []
    for k in range(num_bins + 1):
        pos = k * (n - 1) / num_bins
        lo = math.floor(pos)
        hi = min(lo + 1, n - 1)
        out.append(h[lo] + (pos - lo) * (h[hi] - h[lo]))
    return out


def test_uniform_grid_is_reproduced():
    grid = [50.0 + 35.0 * k for k in range(11)]
    assert quantized_scales(grid, 10) == grid
    assert quantized_scales(grid[::-1], 10) == grid


@given(st.lists(st.floats(1.0, 1000.0), min_size=2, max_size=300), st.integers(1, 20))
def test_matches_sort_oracle(heights, bins):
    assert quantized_scales(heights, bins) == oracle_quantiles(heights, bins)


def test_matches_numpy_linear_quantile():
    h = np.random.default_rng(0).lognormal(4.5, 0.5, size=777)
    ours = quantized_scales(h, 10)
    ref = np.quantile(h, np.arange(11) / 10, method="linear")
    assert np.allclose(ours, ref, rtol=1e-13)


def test_scales_monotone_and_span_range():
    h = np.random.default_rng(1).uniform(30, 500, size=100)
    s = quantized_scales(h, 10)
    assert s[0] == h.min() and s[-1] == h.max()
    assert all(b >= a for a, b in zip(s, s[1:]))


@pytest.mark.parametrize("bad", [[1.0], [1.0, -2.0], [1.0, float("nan")]])
def test_quantize_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        quantized_scales(bad, 10)


def test_quantize_rejects_bad_bins():
    with pytest.raises(ValueError):
        quantized_scales([1.0, 2.0], 0)


def test_body_and_head_templates():
    scales = [50.0, 100.0, 200.0]
    body = generate_body_anchors(AnchorConfig(num_bins=2), scales)
    assert body.heights == scales
    assert all(t.ratio == BODY_RATIO for t in body.templates)
    head = derive_head_anchors(body)
    for b, h in zip(body.templates, head.templates):
        assert h.height == pytest.approx(b.height / 3)
        assert h.width == pytest.approx(b.width * 2 / 3)
        assert h.area / b.area == pytest.approx(2 / 9, abs=1e-12)
        assert h.ratio == pytest.approx(BODY_RATIO / 2)


def test_duplicate_scales_collapse():
    body = generate_body_anchors(AnchorConfig(), [60.0, 60.0, 60.0, 90.0])
    assert body.heights == [60.0, 90.0]


def test_anchor_set_requires_increasing_heights():
    with pytest.raises(ValueError):
        AnchorSet((AnchorTemplate(2.0, 2.44), AnchorTemplate(1.0, 2.44)), "body")


def test_tile_anchors_grid():
    body = generate_body_anchors(AnchorConfig(), [10.0, 20.0])
    arr = tile_anchors(body, 32, 16, 8)
    assert arr.shape == (4 * 2 * 2, 4)
    assert arr[:, 0].min() >= 0 and arr[:, 2].max() <= 32
    assert arr[:, 1].min() >= 0 and arr[:, 3].max() <= 16
