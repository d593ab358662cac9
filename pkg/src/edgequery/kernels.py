"""Hot numeric kernels with numba and numpy implementations.

Every public function here dispatches on :func:`edgequery._accel.use_numba`.
Both paths must agree bit-for-bit on integer outputs and to rounding on
float outputs; ``tests/test_kernels.py`` checks that.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ._accel import njit, use_numba

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# ---------------------------------------------------------------------------
# morphology: square max/min filters with truncated borders
# ---------------------------------------------------------------------------


@njit(cache=True)
def _max_filter_nb(img, radius):
    h, w = img.shape
    tmp = img.copy()
    # horizontal pass; inner loops run along contiguous rows and vectorize
    for y in range(h):
        for d in range(1, radius + 1):
            for x in range(w - d):
                if img[y, x + d] > tmp[y, x]:
                    tmp[y, x] = img[y, x + d]
            for x in range(d, w):
                if img[y, x - d] > tmp[y, x]:
                    tmp[y, x] = img[y, x - d]
    out = tmp.copy()
    for y in range(h):
        for yy in range(max(0, y - radius), min(h, y + radius + 1)):
            for x in range(w):
                if tmp[yy, x] > out[y, x]:
                    out[y, x] = tmp[yy, x]
    return out


def _rank_filter_np(img: np.ndarray, radius: int, use_max: bool) -> np.ndarray:
    # Padding with the identity of max (0) or min (255) is the same as
    # truncating the neighbourhood at the border.
    fill = 0 if use_max else 255
    reduce = np.maximum if use_max else np.minimum
    h, w = img.shape
    out = img
    for axis, n in ((1, w), (0, h)):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(out, pad, constant_values=fill)
        acc = padded.take(range(0, n), axis=axis)
        for off in range(1, 2 * radius + 1):
            acc = reduce(acc, padded.take(range(off, off + n), axis=axis))
        out = acc
    return np.ascontiguousarray(out, dtype=np.uint8)


def rank_filter(img: np.ndarray, radius: int, use_max: bool) -> np.ndarray:
    """Max (``use_max``) or min over a ``(2r+1)x(2r+1)`` square window."""
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if radius == 0:
        return img.copy()
    if use_numba():
        if use_max:
            return _max_filter_nb(img, int(radius))
        # min filter is the complement of the max filter of the complement
        return 255 - _max_filter_nb(255 - img, int(radius))
    return _rank_filter_np(img, int(radius), bool(use_max))


# ---------------------------------------------------------------------------
# 8-connected component bounding boxes
# ---------------------------------------------------------------------------


@njit(cache=True)
def _component_boxes_nb(mask):
    h, w = mask.shape
    seen = np.zeros((h, w), dtype=np.bool_)
    stack_y = np.empty(h * w, dtype=np.int64)
    stack_x = np.empty(h * w, dtype=np.int64)
    boxes = np.empty((h * w, 4), dtype=np.int64)
    nbox = 0
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or seen[y0, x0]:
                continue
            seen[y0, x0] = True
            stack_y[0] = y0
            stack_x[0] = x0
            top = 1
            ymin = y0
            ymax = y0
            xmin = x0
            xmax = x0
            while top > 0:
                top -= 1
                cy = stack_y[top]
                cx = stack_x[top]
                if cy < ymin:
                    ymin = cy
                if cy > ymax:
                    ymax = cy
                if cx < xmin:
                    xmin = cx
                if cx > xmax:
                    xmax = cx
                for dy in range(-1, 2):
                    ny = cy + dy
                    if ny < 0 or ny >= h:
                        continue
                    for dx in range(-1, 2):
                        nx = cx + dx
                        if nx < 0 or nx >= w:
                            continue
                        if mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            stack_y[top] = ny
                            stack_x[top] = nx
                            top += 1
            boxes[nbox, 0] = xmin
            boxes[nbox, 1] = ymin
            boxes[nbox, 2] = xmax - xmin + 1
            boxes[nbox, 3] = ymax - ymin + 1
            nbox += 1
    return boxes[:nbox].copy()


def _component_boxes_np(mask: np.ndarray) -> np.ndarray:
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return np.empty((0, 4), dtype=np.int64)
    out = np.empty((count, 4), dtype=np.int64)
    for i, (sy, sx) in enumerate(ndimage.find_objects(labels)):
        out[i] = (sx.start, sy.start, sx.stop - sx.start, sy.stop - sy.start)
    return out


def component_boxes(mask: np.ndarray) -> np.ndarray:
    """Bounding boxes ``(x, y, w, h)`` of 8-connected components, sorted by (y, x, h, w)."""
    mask = np.ascontiguousarray(mask != 0)
    if use_numba():
        boxes = _component_boxes_nb(mask)
    else:
        boxes = _component_boxes_np(mask)
    if len(boxes) == 0:
        return boxes
    order = np.lexsort((boxes[:, 2], boxes[:, 3], boxes[:, 0], boxes[:, 1]))
    return boxes[order]


# ---------------------------------------------------------------------------
# three-parameter lognormal: profile score in the location parameter
# ---------------------------------------------------------------------------


@njit(cache=True)
def _gamma_score_nb(x, gammas):
    n = x.shape[0]
    out = np.empty(gammas.shape[0], dtype=np.float64)
    y = np.empty(n, dtype=np.float64)
    wv = np.empty(n, dtype=np.float64)
    for k in range(gammas.shape[0]):
        g = gammas[k]
        sy = 0.0
        sw = 0.0
        for i in range(n):
            d = x[i] - g
            y[i] = np.log(d)
            wv[i] = 1.0 / d
            sy += y[i]
            sw += wv[i]
        ybar = sy / n
        wbar = sw / n
        var = 0.0
        cov = 0.0
        for i in range(n):
            dy = y[i] - ybar
            var += dy * dy
            cov += (wv[i] - wbar) * dy
        out[k] = -(cov / n + wbar * var / n)
    return out


def _gamma_score_np(x: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    out = np.empty(len(gammas), dtype=np.float64)
    for k, g in enumerate(gammas):
        d = x - g
        y = np.log(d)
        wv = 1.0 / d
        dy = y - y.mean()
        wbar = wv.mean()
        out[k] = -(np.mean((wv - wbar) * dy) + wbar * np.mean(dy * dy))
    return out


def gamma_score(x: np.ndarray, gammas) -> np.ndarray:
    """Location-parameter estimating equation, divided by ``n**2``.

    With ``y = ln(x - g)`` and ``w = 1/(x - g)`` the estimating equation in
    ``g`` (after substituting the closed-form mu and sigma^2) equals
    ``-n**2 * (cov(w, y) + mean(w) * var(y))``.  The centred form is used to
    avoid the cancellation in ``sum(y**2) - sum(y)**2 / n``.  The profile
    log-likelihood increases in ``g`` exactly where this value is negative.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    gammas = np.atleast_1d(np.asarray(gammas, dtype=np.float64))
    if use_numba():
        return _gamma_score_nb(x, np.ascontiguousarray(gammas))
    return _gamma_score_np(x, gammas)


# ---------------------------------------------------------------------------
# counter-based uniforms keyed on (seed, id, stream)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _mix64_nb(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _keyed_uniform_nb(base, ids):
    out = np.empty(ids.shape[0], dtype=np.float64)
    for i in range(ids.shape[0]):
        z = _mix64_nb(base ^ ids[i])
        out[i] = (np.float64(z >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)
    return out


def _mix64_np(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _stream_base(seed: int, stream: int) -> np.uint64:
    z = np.array([(seed + _GOLDEN * (stream + 1)) & _MASK64], dtype=np.uint64)
    return _mix64_np(z)[0]


def keyed_uniform(seed: int, ids, stream: int = 0) -> np.ndarray:
    """Uniforms in (0, 1), a pure function of ``(seed, id, stream)``.

    SplitMix64 finalizer over the key; the result never depends on call
    order or on which other ids are requested alongside.
    """
    ids = np.ascontiguousarray(np.atleast_1d(ids), dtype=np.uint64)
    base = _stream_base(int(seed), int(stream))
    if use_numba():
        return _keyed_uniform_nb(base, ids)
    z = _mix64_np(base ^ ids)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)
