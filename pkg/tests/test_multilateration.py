"""True-range multilateration: the solver, anchor sampling, and the retry ladder."""

from __future__ import annotations

import math

import numpy as np
import pytest

from heatpoint import (
    AnchorSet,
    CollinearAnchorError,
    Coordinate,
    DecodeConfig,
    EncodingConfig,
    Heatmap,
    InvalidInputError,
    SingularSystemError,
    decode_multilateration,
    encode,
    multilaterate,
    sample_anchors,
)


def reference_gaussian(cx, cy, width, height, sigma=1.5):
    grid = np.empty((height, width))
    for y in range(height):
        for x in range(width):
            grid[y, x] = math.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * sigma**2))
    return grid


def residual_oracle(xs, ys, ds):
    """Brute-force minimizer of sum (||p - a_i|| - d_i)^2 over a padded box.

    Coarse 0.1 grid over the anchor bounding box padded by 2, then a 0.001
    refinement around the coarse winner.  Independent of the linear solver.
    """

    def objective(px, py):
        r = np.zeros_like(px)
        for x, y, d in zip(xs, ys, ds):
            r += (np.hypot(px - x, py - y) - d) ** 2
        return r

    def best_on(gx, gy):
        px, py = np.meshgrid(gx, gy)
        obj = objective(px, py)
        j, i = divmod(int(np.argmin(obj)), obj.shape[1])
        return float(px[j, i]), float(py[j, i])

    lo_x, hi_x = min(xs) - 2.0, max(xs) + 2.0
    lo_y, hi_y = min(ys) - 2.0, max(ys) + 2.0
    cx, cy = best_on(np.arange(lo_x, hi_x, 0.1), np.arange(lo_y, hi_y, 0.1))
    return best_on(
        np.arange(cx - 0.15, cx + 0.15, 1e-3), np.arange(cy - 0.15, cy + 0.15, 1e-3)
    )


def test_multilaterate_hand_worked_system():
    # p = (0.3, 0.4): d to (0,0) is 0.5, to (1,0) is sqrt(0.65), to (0,1) sqrt(0.45)
    anchors = AnchorSet(
        xs=(0, 1, 0), ys=(0, 0, 1), distances=(0.5, math.sqrt(0.65), math.sqrt(0.45))
    )
    p = multilaterate(anchors)
    assert p.x == pytest.approx(0.3, abs=1e-12)
    assert p.y == pytest.approx(0.4, abs=1e-12)


def test_multilaterate_collinear_anchors_are_singular():
    with pytest.raises(SingularSystemError):
        multilaterate(AnchorSet(xs=(0, 1, 2), ys=(0, 1, 2), distances=(1.0, 1.0, 1.0)))


def test_multilaterate_duplicated_anchors_are_singular():
    with pytest.raises(SingularSystemError):
        multilaterate(AnchorSet(xs=(3, 3, 3), ys=(4, 4, 4), distances=(1.0, 1.0, 1.0)))


def test_anchor_set_validation():
    with pytest.raises(InvalidInputError):
        AnchorSet(xs=(0, 1), ys=(0, 0), distances=(1.0, 1.0))
    with pytest.raises(InvalidInputError):
        AnchorSet(xs=(0, 1, 2), ys=(0, 0), distances=(1.0, 1.0, 1.0))
    with pytest.raises(InvalidInputError):
        AnchorSet(xs=(0, 1, 2), ys=(0, 1, 0), distances=(1.0, -0.5, 1.0))
    with pytest.raises(InvalidInputError):
        AnchorSet(xs=(0, 1, 2), ys=(0, 1, 0), distances=(1.0, math.nan, 1.0))


def test_sample_anchors_brightest_window_and_ranking():
    h = Heatmap(reference_gaussian(2.4, 3.3, 5, 5))
    anchors = sample_anchors(h, DecodeConfig(kernel_size=2, anchor_count=4))
    picked = set(zip(anchors.xs, anchors.ys))
    assert picked == {(2, 3), (3, 3), (2, 4), (3, 4)}
    # brightest first: (2, 3) is nearest the center
    assert (anchors.xs[0], anchors.ys[0]) == (2, 3)
    for x, y, d in zip(anchors.xs, anchors.ys, anchors.distances):
        assert d == pytest.approx(math.hypot(x - 2.4, y - 3.3), abs=1e-9)


def test_sample_anchors_window_tie_prefers_left():
    h = Heatmap(np.array([[1.0, 0.0, 1.0], [0.0, 0.0, 0.0]]))
    anchors = sample_anchors(h, DecodeConfig(kernel_size=2, anchor_count=3))
    assert set(anchors.xs) <= {0, 1}


def test_sample_anchors_collinear_column_raises():
    values = np.zeros((5, 5))
    values[:, 2] = [5.0, 4.0, 3.0, 2.0, 1.0]
    with pytest.raises(CollinearAnchorError):
        sample_anchors(Heatmap(values), DecodeConfig(kernel_size=3, anchor_count=3))


def test_decode_multilateration_retries_with_larger_window():
    # k=3 picks three pixels on one column; the k=4 retry reaches the off-axis
    # pixel at (3, 3) and the solve goes through
    values = np.zeros((6, 6))
    values[0, 2], values[1, 2], values[2, 2] = 5.0, 4.0, 3.0
    values[3, 3] = 3.5
    r = decode_multilateration(Heatmap(values), DecodeConfig(kernel_size=3, anchor_count=3))
    assert r.fallback is None
    assert (3, 3) in set(zip(r.anchors_used.xs, r.anchors_used.ys))


def test_decode_multilateration_falls_back_to_two_hot():
    # a full-height bright column defeats both window sizes
    values = np.zeros((6, 6))
    values[:, 2] = [6.0, 5.0, 4.0, 3.0, 2.0, 1.0]
    r = decode_multilateration(Heatmap(values), DecodeConfig(kernel_size=3, anchor_count=3))
    assert r.fallback == "two-hot"
    assert r.condition == math.inf
    assert (r.beta_hat.x, r.beta_hat.y) == (2.0, 0.25)


def test_multilaterate_agrees_with_residual_search():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 20:
        n = int(rng.integers(3, 10))
        pts = rng.integers(0, 10, size=(n, 2))
        xs, ys = tuple(int(v) for v in pts[:, 0]), tuple(int(v) for v in pts[:, 1])
        if len(set(zip(xs, ys))) < n:
            continue
        p = (
            rng.uniform(min(xs) - 1.5, max(xs) + 1.5),
            rng.uniform(min(ys) - 1.5, max(ys) + 1.5),
        )
        ds = tuple(math.hypot(x - p[0], y - p[1]) for x, y in zip(xs, ys))
        try:
            est = multilaterate(AnchorSet(xs, ys, ds))
        except SingularSystemError:
            continue
        assert est.x == pytest.approx(p[0], abs=1e-9)
        assert est.y == pytest.approx(p[1], abs=1e-9)
        ox, oy = residual_oracle(xs, ys, ds)
        assert est.x == pytest.approx(ox, abs=2e-3)
        assert est.y == pytest.approx(oy, abs=2e-3)
        checked += 1


def test_pipeline_is_exact_at_every_resolution():
    rng = np.random.default_rng(11)
    cfg = DecodeConfig()
    for r in (64, 32, 16, 8, 4):
        lam = 256.0 / r
        margin = 4.5 if 9.0 < r else 0.5  # 6*sigma < r with sigma 1.5
        enc = EncodingConfig(downsample=lam)
        for _ in range(50):
            gx, gy = rng.uniform(margin * lam, 256.0 - margin * lam, size=2)
            h = encode(Coordinate(gx, gy), enc, r, r)
            res = decode_multilateration(h, cfg)
            assert res.fallback is None
            assert res.beta_hat.x == pytest.approx(gx / lam, abs=1e-9)
            assert res.beta_hat.y == pytest.approx(gy / lam, abs=1e-9)
