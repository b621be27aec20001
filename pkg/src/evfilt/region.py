"""Per-region IIR state, the global refresh, and neighbour geometry.

The sensor is tiled by ``scale x scale`` regions.  Each region keeps a
filtered timestamp, a filtered inter-event interval and an activity flag.
Region ``(row, col)`` is centred at pixel
``(col * scale + (scale - 1) / 2, row * scale + (scale - 1) / 2)``; partial
regions at the right/bottom edges use the same formula.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .events import Event, SensorGeometry

INTERVAL_INIT = 1e6
INTERVAL_FLOOR = K.INTERVAL_FLOOR
DISTANCE_FLOOR = K.DISTANCE_FLOOR

# bits per stored word in the memory model (timestamps and intervals)
WORD_BITS = 32
NNB_BYTES_PER_PIXEL = 4


class ContextMode(enum.Enum):
    FOUR = "four"
    TWO_HORIZONTAL = "two_horizontal"
    TWO_VERTICAL = "two_vertical"
    ONE = "one"


class RegionGrid:
    """Mutable grid of region states; single writer.

    Attributes ``ts``, ``interval`` and ``active`` are ``(rows, cols)`` arrays.
    """

    def __init__(self, geometry: SensorGeometry, scale: int = 16, interval_init: float = INTERVAL_INIT):
        if scale < 1:
            raise ValueError("scale must be >= 1")
        self.geometry = geometry
        self.scale = int(scale)
        self.cols = -(-geometry.width // self.scale)
        self.rows = -(-geometry.height // self.scale)
        self.ts = np.zeros((self.rows, self.cols), dtype=np.float64)
        self.interval = np.full((self.rows, self.cols), float(interval_init), dtype=np.float64)
        self.active = np.zeros((self.rows, self.cols), dtype=np.bool_)

    def owner(self, x: int, y: int) -> tuple[int, int]:
        """``(row, col)`` of the region containing pixel ``(x, y)``."""
        return y // self.scale, x // self.scale

    def center(self, row: int, col: int) -> tuple[float, float]:
        half = (self.scale - 1) / 2
        return col * self.scale + half, row * self.scale + half

    def copy(self) -> "RegionGrid":
        g = RegionGrid.__new__(RegionGrid)
        g.geometry, g.scale, g.cols, g.rows = self.geometry, self.scale, self.cols, self.rows
        g.ts, g.interval, g.active = self.ts.copy(), self.interval.copy(), self.active.copy()
        return g


@dataclass(frozen=True)
class NeighborContext:
    """Regions bracketing one pixel, with their state and distances.

    ``rows``/``cols`` list the one or two bracketing region indices per axis
    (upper/left first).  ``ts``, ``intervals`` and ``distances`` are
    ``(len(rows), len(cols))`` arrays.  ``dx1``/``dx2`` are the horizontal
    distances to the left/right centres (``dx2`` is 0 with a single column);
    ``dy1``/``dy2`` likewise vertically.
    """

    mode: ContextMode
    rows: tuple
    cols: tuple
    dx1: float
    dx2: float
    dy1: float
    dy2: float
    ts: np.ndarray
    intervals: np.ndarray
    distances: np.ndarray
    owner_ts: float
    scale: int

    def as_quad(self):
        """Return ``(two_rows, two_cols, (t11, t12, t21, t22), (i11, i12, i21, i22))``.

        Missing neighbours duplicate the available ones; they are never read.
        """
        nr, nc = self.ts.shape
        idx = [(0, 0), (0, nc - 1), (nr - 1, 0), (nr - 1, nc - 1)]
        return (nr == 2, nc == 2,
                tuple(float(self.ts[i]) for i in idx),
                tuple(float(self.intervals[i]) for i in idx))


def update_region(grid: RegionGrid, event: Event, u: float) -> None:
    """Blend ``event`` into its owning region and mark it active."""
    r, c = grid.owner(event.x, event.y)
    K.update_cell(grid.ts, grid.interval, grid.active, r, c, float(event.t), float(u))


def global_refresh(grid: RegionGrid, now: int, u: float) -> None:
    """Decay every inactive region toward ``now``, then clear all activity flags."""
    K.refresh(grid.ts, grid.interval, grid.active, float(now), float(u))


def neighbor_context(grid: RegionGrid, x: int, y: int) -> NeighborContext:
    r0, r1, two_r, dy1, dy2 = K.axis_bracket(y, grid.scale, grid.rows)
    c0, c1, two_c, dx1, dx2 = K.axis_bracket(x, grid.scale, grid.cols)
    rows = (r0, r1) if two_r else (r0,)
    cols = (c0, c1) if two_c else (c0,)
    if two_r and two_c:
        mode = ContextMode.FOUR
    elif two_c:
        mode = ContextMode.TWO_HORIZONTAL
    elif two_r:
        mode = ContextMode.TWO_VERTICAL
    else:
        mode = ContextMode.ONE
    dxs = (dx1, dx2) if two_c else (dx1,)
    dys = (dy1, dy2) if two_r else (dy1,)
    dist = np.array([[max(DISTANCE_FLOOR, math.hypot(a, b)) for a in dxs] for b in dys])
    ix = np.ix_(rows, cols)
    orow, ocol = grid.owner(x, y)
    return NeighborContext(mode, rows, cols, dx1, dx2, dy1, dy2,
                           grid.ts[ix].copy(), grid.interval[ix].copy(), dist,
                           float(grid.ts[orow, ocol]), grid.scale)


def state_memory_bits(grid: RegionGrid, algorithm) -> int:
    """Storage needed by a filter under a 32-bit-word model.

    Timestamp-only algorithms (IIR, TM, BI) store one word plus an activity
    bit per region; BIF and DIF add an interval word.  NNB stores one word
    per pixel.
    """
    from .filters import Algorithm

    algorithm = Algorithm.parse(algorithm)
    if algorithm is Algorithm.NNB:
        return grid.geometry.n_pixels * NNB_BYTES_PER_PIXEL * 8
    words = 2 if algorithm in (Algorithm.BIF, Algorithm.DIF) else 1
    return grid.rows * grid.cols * words * (WORD_BITS + 1)


def nnb_memory_bytes(geometry: SensorGeometry) -> int:
    """Bytes for a per-pixel timestamp map (the NNb reference filter)."""
    return geometry.n_pixels * NNB_BYTES_PER_PIXEL
