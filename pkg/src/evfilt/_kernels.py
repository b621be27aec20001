"""Compiled inner loops.

Everything here works on plain numpy arrays and scalars so the same
functions serve the per-event Python API and the streaming loops.
Algorithm codes follow ``filters.Algorithm``.
"""

import math

import numpy as np
from numba import njit

IIR, TM, BI, BIF, DIF, NNB = 0, 1, 2, 3, 4, 5

INTERVAL_FLOOR = 1.0
DISTANCE_FLOOR = 0.5
NO_EVENT = np.iinfo(np.int64).min
NO_NEIGHBOUR = np.iinfo(np.int64).max


@njit(cache=True, nogil=True)
def axis_bracket(p, scale, n):
    """Bracketing region centres along one axis.

    Returns ``(i0, i1, two, d1, d2)``.  With two brackets ``d1``/``d2`` are the
    distances to the lower/upper centre and sum to ``scale``.  Otherwise
    ``i0 == i1`` and ``d1`` is the distance to that single centre.
    """
    half = (scale - 1) / 2.0
    k = int(math.floor((p - half) / scale))
    if k < 0:
        return 0, 0, False, abs(p - half), 0.0
    if k >= n - 1:
        c = (n - 1) * scale + half
        return n - 1, n - 1, False, abs(p - c), 0.0
    c0 = k * scale + half
    return k, k + 1, True, p - c0, (c0 + scale) - p


@njit(cache=True, nogil=True)
def _dist(a, b):
    d = math.sqrt(a * a + b * b)
    return d if d > DISTANCE_FLOOR else DISTANCE_FLOOR


@njit(cache=True, nogil=True)
def interpolate(algo, two_rows, two_cols, t11, t12, t21, t22, i11, i12, i21, i22,
                dx1, dx2, dy1, dy2, scale):
    """Combine neighbour timestamps into a decision threshold.

    Index convention: first digit is the row (1 = upper), second the column
    (1 = left).  With a single column only the ``*1`` entries are read, with a
    single row only the ``1*`` entries.  In single-column mode ``dx1`` holds
    the distance to that column's centre (likewise ``dy1`` for rows).
    IIR is resolved by the caller and never reaches here.
    """
    if not two_rows and not two_cols:
        return t11
    if algo == TM:
        if two_rows and two_cols:
            return max(max(t11, t12), max(t21, t22))
        if two_cols:
            return max(t11, t12)
        return max(t11, t21)
    if algo == BI:
        if two_rows and two_cols:
            a = (t11 * dx2 + t12 * dx1) / scale
            b = (t21 * dx2 + t22 * dx1) / scale
            return (a * dy2 + b * dy1) / scale
        if two_cols:
            return (t11 * dx2 + t12 * dx1) / scale
        return (t11 * dy2 + t21 * dy1) / scale
    if algo == BIF:
        if two_rows and two_cols:
            a = (t11 * i12 * dx2 + t12 * i11 * dx1) / (i12 * dx2 + i11 * dx1)
            b = (t21 * i22 * dx2 + t22 * i21 * dx1) / (i22 * dx2 + i21 * dx1)
            return ((a * i21 * i22 * dy2 + b * i11 * i12 * dy1)
                    / (i21 * i22 * dy2 + i11 * i12 * dy1))
        if two_cols:
            return (t11 * i12 * dx2 + t12 * i11 * dx1) / (i12 * dx2 + i11 * dx1)
        return (t11 * i21 * dy2 + t21 * i11 * dy1) / (i21 * dy2 + i11 * dy1)
    # DIF
    if two_rows and two_cols:
        c11 = 1.0 / (i11 * _dist(dx1, dy1))
        c12 = 1.0 / (i12 * _dist(dx2, dy1))
        c21 = 1.0 / (i21 * _dist(dx1, dy2))
        c22 = 1.0 / (i22 * _dist(dx2, dy2))
        return (t11 * c11 + t12 * c12 + t21 * c21 + t22 * c22) / (c11 + c12 + c21 + c22)
    if two_cols:
        c11 = 1.0 / (i11 * _dist(dx1, dy1))
        c12 = 1.0 / (i12 * _dist(dx2, dy1))
        return (t11 * c11 + t12 * c12) / (c11 + c12)
    c11 = 1.0 / (i11 * _dist(dx1, dy1))
    c21 = 1.0 / (i21 * _dist(dx1, dy2))
    return (t11 * c11 + t21 * c21) / (c11 + c21)


@njit(cache=True, nogil=True)
def grid_threshold(algo, ts, iv, x, y, scale):
    rows, cols = ts.shape
    if algo == IIR:
        return ts[y // scale, x // scale]
    r0, r1, two_r, dy1, dy2 = axis_bracket(y, scale, rows)
    c0, c1, two_c, dx1, dx2 = axis_bracket(x, scale, cols)
    return interpolate(algo, two_r, two_c,
                       ts[r0, c0], ts[r0, c1], ts[r1, c0], ts[r1, c1],
                       iv[r0, c0], iv[r0, c1], iv[r1, c0], iv[r1, c1],
                       dx1, dx2, dy1, dy2, scale)


@njit(cache=True, nogil=True)
def update_cell(ts, iv, active, r, c, t, u):
    old = ts[r, c]
    ts[r, c] = old * (1.0 - u) + t * u
    nv = iv[r, c] * (1.0 - u) + (t - old) * u
    iv[r, c] = nv if nv > INTERVAL_FLOOR else INTERVAL_FLOOR
    active[r, c] = True


@njit(cache=True, nogil=True)
def refresh(ts, iv, active, now, u):
    rows, cols = ts.shape
    for r in range(rows):
        for c in range(cols):
            if not active[r, c]:
                old = ts[r, c]
                ts[r, c] = old * (1.0 - u) + now * u
                nv = iv[r, c] * (1.0 - u) + (now - old) * u
                iv[r, c] = nv if nv > INTERVAL_FLOOR else INTERVAL_FLOOR
            active[r, c] = False


@njit(cache=True, nogil=True)
def grid_pass(algo, t, x, y, scale, u, period, ts, iv, active, last_t, out_thr):
    """Run the region grid over one chunk, writing each event's threshold.

    ``last_t`` is the timestamp of the last event processed before this chunk
    (-1 if none).  Returns ``(new_last_t, bad_index)`` where ``bad_index`` is
    the first out-of-order event or -1.
    """
    for i in range(len(t)):
        te = t[i]
        if last_t >= 0:
            if te < last_t:
                return last_t, i
            if period > 0 and te // period > last_t // period:
                refresh(ts, iv, active, float(last_t), u)
        ft = float(te)
        out_thr[i] = grid_threshold(algo, ts, iv, x[i], y[i], scale)
        update_cell(ts, iv, active, y[i] // scale, x[i] // scale, ft, u)
        last_t = te
    return last_t, -1


@njit(cache=True, nogil=True)
def nnb_gap(last_ts, x, y, t, radius):
    """Smallest ``t - last_ts`` over the neighbourhood, excluding the pixel itself."""
    h, w = last_ts.shape
    best = NO_NEIGHBOUR
    for yy in range(max(0, y - radius), min(h, y + radius + 1)):
        for xx in range(max(0, x - radius), min(w, x + radius + 1)):
            if xx == x and yy == y:
                continue
            lt = last_ts[yy, xx]
            if lt != NO_EVENT and t - lt < best:
                best = t - lt
    return best


@njit(cache=True, nogil=True)
def nnb_pass(t, x, y, radius, last_ts, last_t, out_gap):
    for i in range(len(t)):
        te = t[i]
        if last_t >= 0 and te < last_t:
            return last_t, i
        out_gap[i] = nnb_gap(last_ts, x[i], y[i], te, radius)
        last_ts[y[i], x[i]] = te
        last_t = te
    return last_t, -1
