"""Hot decoding kernels: connected-component labeling and per-region statistics.

Every kernel has a numba implementation and a pure numpy/scipy one with the
same contract. The numba path is used when numba imports and the environment
variable ``ARMLOC_NUMBA`` is not set to ``0``. :func:`set_backend` switches at
runtime (benchmarks and cross-checking tests use it).
"""
from __future__ import annotations

import contextlib
import os

import numpy as np
from scipy import ndimage as ndi

try:
    import numba
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

# Column layout of the array returned by region_stats.
COUNT, WSUM, WX, WY, WMAX, CX, CY, MXX, MYY, MXY = range(10)
N_STATS = 10

_STRUCTURES = {
    4: ndi.generate_binary_structure(2, 1),
    8: ndi.generate_binary_structure(2, 2),
}


# --------------------------------------------------------------------------
# numpy / scipy path

def label_numpy(binary: np.ndarray, connectivity: int = 8):
    labels, n = ndi.label(binary, structure=_STRUCTURES[connectivity])
    return labels.astype(np.int32, copy=False), int(n)


def region_stats_numpy(labels: np.ndarray, n: int, weights: np.ndarray) -> np.ndarray:
    out = np.zeros((n, N_STATS))
    if n == 0:
        return out
    lab = labels.ravel()
    fg = lab > 0
    idx = lab[fg] - 1
    ys, xs = np.divmod(np.flatnonzero(fg), labels.shape[1])
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)
    w = weights.ravel()[fg].astype(np.float64)

    count = np.bincount(idx, minlength=n).astype(np.float64)
    out[:, COUNT] = count
    out[:, WSUM] = np.bincount(idx, w, n)
    out[:, WX] = np.bincount(idx, w * xs, n)
    out[:, WY] = np.bincount(idx, w * ys, n)
    wmax = np.full(n, -np.inf)
    np.maximum.at(wmax, idx, w)
    out[:, WMAX] = wmax
    cx = np.bincount(idx, xs, n) / count
    cy = np.bincount(idx, ys, n) / count
    out[:, CX] = cx
    out[:, CY] = cy
    dx = xs - cx[idx]
    dy = ys - cy[idx]
    out[:, MXX] = np.bincount(idx, dx * dx, n) / count
    out[:, MYY] = np.bincount(idx, dy * dy, n) / count
    out[:, MXY] = np.bincount(idx, dx * dy, n) / count
    return out


def _grouped_median(idx: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    order = np.lexsort((values, idx))
    v = values[order]
    counts = np.bincount(idx, minlength=n)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    lo = starts + (counts - 1) // 2
    hi = starts + counts // 2
    return 0.5 * (v[lo] + v[hi])


def region_paf_stats_numpy(labels, n, paf_x, paf_y):
    """Per-region circular-median angle (radians), median magnitude and mean vector."""
    out = np.zeros((n, 4))
    if n == 0:
        return out
    lab = labels.ravel()
    fg = lab > 0
    idx = lab[fg] - 1
    vx = paf_x.ravel()[fg].astype(np.float64)
    vy = paf_y.ravel()[fg].astype(np.float64)
    theta = np.arctan2(vy, vx)
    mag = np.hypot(vx, vy)
    mu = np.arctan2(np.bincount(idx, np.sin(theta), n), np.bincount(idx, np.cos(theta), n))
    d = np.mod(theta - mu[idx] + np.pi, 2 * np.pi) - np.pi
    out[:, 0] = mu + _grouped_median(idx, d, n)
    out[:, 1] = _grouped_median(idx, mag, n)
    count = np.bincount(idx, minlength=n)
    out[:, 2] = np.bincount(idx, vx, n) / count
    out[:, 3] = np.bincount(idx, vy, n) / count
    return out


def select_joints_numpy(est, est_score, loc, score, sigma_s):
    n = est.shape[0]
    if loc.shape[0] == 0 or n == 0:
        return np.full(n, -1, dtype=np.int64), est_score.astype(np.float64)
    d2 = ((est[:, None, :] - loc[None, :, :]) ** 2).sum(axis=2)
    f = score[None, :] * np.exp(-d2 / (sigma_s * sigma_s))
    j = np.argmax(f, axis=1)
    fbest = f[np.arange(n), j]
    use_pcm = fbest >= est_score
    return np.where(use_pcm, j, -1), np.where(use_pcm, fbest, est_score)


# --------------------------------------------------------------------------
# numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _find(parent, i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            nxt = parent[i]
            parent[i] = root
            i = nxt
        return root

    @njit(cache=True)
    def _union(parent, a, b):
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra < rb:
            parent[rb] = ra
        elif rb < ra:
            parent[ra] = rb

    @njit(cache=True)
    def _label_nb(binary, diag):
        h, w = binary.shape
        labels = np.zeros((h, w), dtype=np.int32)
        parent = np.zeros(h * w // 2 + 2, dtype=np.int32)
        nxt = 1
        for y in range(h):
            for x in range(w):
                if not binary[y, x]:
                    continue
                cur = 0
                # previously visited neighbours: W, NW, N, NE
                for k in range(4):
                    if k == 0:
                        ny, nx = y, x - 1
                    elif k == 1:
                        if not diag:
                            continue
                        ny, nx = y - 1, x - 1
                    elif k == 2:
                        ny, nx = y - 1, x
                    else:
                        if not diag:
                            continue
                        ny, nx = y - 1, x + 1
                    if ny < 0 or nx < 0 or nx >= w:
                        continue
                    lb = labels[ny, nx]
                    if lb == 0:
                        continue
                    if cur == 0:
                        cur = lb
                    elif lb != cur:
                        _union(parent, cur, lb)
                if cur == 0:
                    if nxt >= parent.shape[0]:
                        grown = np.zeros(parent.shape[0] * 2, dtype=np.int32)
                        grown[:parent.shape[0]] = parent
                        parent = grown
                    parent[nxt] = nxt
                    cur = nxt
                    nxt += 1
                labels[y, x] = cur
        # roots are the smallest provisional label of each set, i.e. the
        # set's first pixel in raster order, so numbering roots in order
        # reproduces raster first-pixel labeling.
        final = np.zeros(nxt, dtype=np.int32)
        n = 0
        for i in range(1, nxt):
            r = _find(parent, i)
            if r == i:
                n += 1
                final[i] = n
        for i in range(1, nxt):
            final[i] = final[_find(parent, i)]
        for y in range(h):
            for x in range(w):
                if labels[y, x] > 0:
                    labels[y, x] = final[labels[y, x]]
        return labels, n

    @njit(cache=True)
    def _region_stats_nb(labels, n, weights):
        out = np.zeros((n, 10))
        for k in range(n):
            out[k, 4] = -np.inf
        h, w = labels.shape
        for y in range(h):
            for x in range(w):
                lb = labels[y, x]
                if lb == 0:
                    continue
                k = lb - 1
                v = np.float64(weights[y, x])
                out[k, 0] += 1.0
                out[k, 1] += v
                out[k, 2] += v * x
                out[k, 3] += v * y
                if v > out[k, 4]:
                    out[k, 4] = v
                out[k, 5] += x
                out[k, 6] += y
        for k in range(n):
            out[k, 5] /= out[k, 0]
            out[k, 6] /= out[k, 0]
        for y in range(h):
            for x in range(w):
                lb = labels[y, x]
                if lb == 0:
                    continue
                k = lb - 1
                dx = x - out[k, 5]
                dy = y - out[k, 6]
                out[k, 7] += dx * dx
                out[k, 8] += dy * dy
                out[k, 9] += dx * dy
        for k in range(n):
            out[k, 7] /= out[k, 0]
            out[k, 8] /= out[k, 0]
            out[k, 9] /= out[k, 0]
        return out

    @njit(cache=True)
    def _median_sorted(v):
        m = v.shape[0]
        return 0.5 * (v[(m - 1) // 2] + v[m // 2])

    @njit(cache=True)
    def _region_paf_stats_nb(labels, n, paf_x, paf_y):
        h, w = labels.shape
        counts = np.zeros(n + 1, dtype=np.int64)
        for y in range(h):
            for x in range(w):
                counts[labels[y, x]] += 1
        starts = np.zeros(n + 1, dtype=np.int64)
        for k in range(1, n):
            starts[k] = starts[k - 1] + counts[k]
        fill = starts.copy()
        total = 0
        for k in range(1, n + 1):
            total += counts[k]
        theta = np.empty(total)
        mag = np.empty(total)
        out = np.zeros((n, 4))
        ssin = np.zeros(n)
        scos = np.zeros(n)
        for y in range(h):
            for x in range(w):
                lb = labels[y, x]
                if lb == 0:
                    continue
                k = lb - 1
                vx = np.float64(paf_x[y, x])
                vy = np.float64(paf_y[y, x])
                t = np.arctan2(vy, vx)
                j = fill[k]
                theta[j] = t
                mag[j] = np.hypot(vx, vy)
                fill[k] = j + 1
                ssin[k] += np.sin(t)
                scos[k] += np.cos(t)
                out[k, 2] += vx
                out[k, 3] += vy
        for k in range(n):
            s = starts[k]
            e = s + counts[k + 1]
            mu = np.arctan2(ssin[k], scos[k])
            d = theta[s:e] - mu
            for i in range(d.shape[0]):
                d[i] = (d[i] + np.pi) % (2 * np.pi) - np.pi
            out[k, 0] = mu + _median_sorted(np.sort(d))
            out[k, 1] = _median_sorted(np.sort(mag[s:e]))
            out[k, 2] /= counts[k + 1]
            out[k, 3] /= counts[k + 1]
        return out

    @njit(cache=True)
    def _select_joints_nb(est, est_score, loc, score, sigma_s):
        n = est.shape[0]
        m = loc.shape[0]
        idx = np.full(n, -1, dtype=np.int64)
        best = np.empty(n)
        s2 = sigma_s * sigma_s
        for i in range(n):
            fb = -np.inf
            jb = -1
            for j in range(m):
                dx = est[i, 0] - loc[j, 0]
                dy = est[i, 1] - loc[j, 1]
                f = score[j] * np.exp(-(dx * dx + dy * dy) / s2)
                if f > fb:
                    fb = f
                    jb = j
            if jb >= 0 and fb >= est_score[i]:
                idx[i] = jb
                best[i] = fb
            else:
                best[i] = est_score[i]
        return idx, best

    def select_joints_numba(est, est_score, loc, score, sigma_s):
        return _select_joints_nb(np.ascontiguousarray(est, dtype=np.float64),
                                 np.ascontiguousarray(est_score, dtype=np.float64),
                                 np.ascontiguousarray(loc, dtype=np.float64),
                                 np.ascontiguousarray(score, dtype=np.float64),
                                 float(sigma_s))

    def label_numba(binary: np.ndarray, connectivity: int = 8):
        if connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        labels, n = _label_nb(np.ascontiguousarray(binary, dtype=np.bool_), connectivity == 8)
        return labels, int(n)

    def region_stats_numba(labels, n, weights):
        return _region_stats_nb(labels, n, np.ascontiguousarray(weights))

    def region_paf_stats_numba(labels, n, paf_x, paf_y):
        return _region_paf_stats_nb(labels, n, np.ascontiguousarray(paf_x),
                                    np.ascontiguousarray(paf_y))


# --------------------------------------------------------------------------
# dispatch

_IMPLS = {
    "numpy": (label_numpy, region_stats_numpy, region_paf_stats_numpy, select_joints_numpy),
}
if HAVE_NUMBA:
    _IMPLS["numba"] = (label_numba, region_stats_numba, region_paf_stats_numba,
                       select_joints_numba)

_backend = "numba" if HAVE_NUMBA and os.environ.get("ARMLOC_NUMBA", "1") != "0" else "numpy"


def get_backend() -> str:
    return _backend


def available_backends():
    return tuple(_IMPLS)


def set_backend(name: str) -> None:
    global _backend
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} unavailable; choose from {available_backends()}")
    _backend = name


@contextlib.contextmanager
def using_backend(name: str):
    prev = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def label(binary: np.ndarray, connectivity: int = 8):
    """Label connected foreground regions 1..n in raster first-pixel order."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    return _IMPLS[_backend][0](binary, connectivity)


def region_stats(labels: np.ndarray, n: int, weights: np.ndarray) -> np.ndarray:
    """Per-region sums, weighted sums, max weight and unweighted central moments.

    Returns an ``(n, 10)`` array indexed by the column constants of this
    module; moments are population (divide-by-count) values.
    """
    return _IMPLS[_backend][1](labels, n, weights)


def region_paf_stats(labels: np.ndarray, n: int, paf_x: np.ndarray, paf_y: np.ndarray) -> np.ndarray:
    """Per-region ``[circular median angle (rad), median magnitude, mean vx, mean vy]``."""
    return _IMPLS[_backend][2](labels, n, paf_x, paf_y)


def select_joints(est: np.ndarray, est_score: np.ndarray, loc: np.ndarray,
                  score: np.ndarray, sigma_s: float):
    """Distance-decayed argmax of PCM candidates against each PAF joint estimate.

    For estimate ``i`` every candidate ``j`` scores
    ``score[j] * exp(-|est[i] - loc[j]|^2 / sigma_s^2)``; the estimate itself
    scores ``est_score[i]``. Returns ``(index, value)`` where ``index`` is the
    winning candidate or -1 when the estimate wins. Ties go to the candidate,
    then to the lowest index.
    """
    return _IMPLS[_backend][3](est, est_score, loc, score, sigma_s)
