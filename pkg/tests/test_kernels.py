"""Both kernel backends against independent brute-force oracles."""
from collections import deque

import numpy as np
import pytest

from armloc import _kernels as K

NEIGHBOURS = {
    4: [(-1, 0), (1, 0), (0, -1), (0, 1)],
    8: [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)],
}


def flood_fill_labels(binary, connectivity):
    """BFS labeling; new labels are handed out in raster order of first pixel."""
    h, w = binary.shape
    out = np.zeros((h, w), dtype=np.int64)
    n = 0
    for y in range(h):
        for x in range(w):
            if binary[y, x] and out[y, x] == 0:
                n += 1
                out[y, x] = n
                q = deque([(y, x)])
                while q:
                    cy, cx = q.popleft()
                    for dy, dx in NEIGHBOURS[connectivity]:
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and binary[ny, nx] and out[ny, nx] == 0:
                            out[ny, nx] = n
                            q.append((ny, nx))
    return out, n


@pytest.mark.parametrize("density", [0.05, 0.3, 0.45, 0.6, 0.9])
@pytest.mark.parametrize("connectivity", [4, 8])
def test_label_matches_flood_fill(backend, density, connectivity):
    rng = np.random.default_rng(int(density * 100) + connectivity)
    for _ in range(5):
        b = rng.random((23, 37)) < density
        labels, n = K.label(b, connectivity)
        ref, n_ref = flood_fill_labels(b, connectivity)
        assert n == n_ref
        np.testing.assert_array_equal(labels, ref)


def test_label_checkerboard_needs_many_provisional_labels(backend):
    b = (np.add.outer(np.arange(40), np.arange(41)) % 2 == 0)
    labels, n = K.label(b, 4)
    assert n == b.sum()
    labels, n = K.label(b, 8)
    assert n == 1


def test_label_rejects_bad_connectivity():
    with pytest.raises(ValueError):
        K.label(np.zeros((3, 3), bool), 6)


def test_region_stats_against_pixel_lists(backend, rng):
    b = rng.random((30, 40)) < 0.5
    labels, n = K.label(b, 8)
    w = rng.random((30, 40))
    st = K.region_stats(labels, n, w)
    for k in range(1, n + 1):
        ys, xs = np.nonzero(labels == k)
        v = w[ys, xs]
        row = st[k - 1]
        assert row[K.COUNT] == xs.size
        assert row[K.WSUM] == pytest.approx(v.sum())
        assert row[K.WX] == pytest.approx((v * xs).sum())
        assert row[K.WMAX] == v.max()
        assert row[K.CX] == pytest.approx(xs.mean())
        assert row[K.MXX] == pytest.approx(np.var(xs), abs=1e-12)
        assert row[K.MYY] == pytest.approx(np.var(ys), abs=1e-12)
        assert row[K.MXY] == pytest.approx(np.mean((xs - xs.mean()) * (ys - ys.mean())), abs=1e-12)


def circular_median_oracle(theta):
    mu = np.arctan2(np.sin(theta).sum(), np.cos(theta).sum())
    d = [(t - mu + np.pi) % (2 * np.pi) - np.pi for t in theta]
    return mu + float(np.median(d))


def test_region_paf_stats_against_oracle(backend, rng):
    b = rng.random((25, 25)) < 0.55
    labels, n = K.label(b, 8)
    # angles clustered around the +-180 wrap to exercise unwrapping
    ang = np.pi + rng.normal(0, 0.3, size=b.shape)
    mag = rng.uniform(0.2, 1.0, size=b.shape)
    px, py = mag * np.cos(ang), mag * np.sin(ang)
    st = K.region_paf_stats(labels, n, px, py)
    for k in range(1, n + 1):
        m = labels == k
        theta = np.arctan2(py[m], px[m])
        assert np.exp(1j * st[k - 1, 0]) == pytest.approx(np.exp(1j * circular_median_oracle(theta)))
        assert st[k - 1, 1] == pytest.approx(np.median(np.hypot(px[m], py[m])))
        assert st[k - 1, 2] == pytest.approx(px[m].mean())


def test_select_joints_backends_agree(rng):
    for _ in range(50):
        n, m = rng.integers(1, 6), rng.integers(0, 6)
        est = rng.uniform(0, 10, (n, 2))
        es = rng.uniform(0, 1, n)
        loc = rng.uniform(0, 10, (m, 2))
        sc = rng.uniform(0, 1, m)
        results = []
        for b in K.available_backends():
            with K.using_backend(b):
                results.append(K.select_joints(est, es, loc, sc, 2.0))
        for idx, f in results[1:]:
            np.testing.assert_array_equal(idx, results[0][0])
            np.testing.assert_allclose(f, results[0][1], rtol=1e-12)


def test_backend_switching():
    prev = K.get_backend()
    with K.using_backend("numpy"):
        assert K.get_backend() == "numpy"
    assert K.get_backend() == prev
    with pytest.raises(ValueError):
        K.set_backend("fortran")
