"""Pass/reject decisions and the streaming filter driver.

Every event is first classified against the current state and then written
into the state, whatever the outcome.  For the region-grid algorithms the
state is a :class:`~evfilt.region.RegionGrid`; an event passes when the
interpolated region timestamp plus the filter length is strictly greater
than the event timestamp.  NNB keeps the last timestamp of every pixel and
passes an event when some *other* pixel in its neighbourhood fired within
the time window.

Because updates do not depend on the outcome, the state trajectory of a
stream is the same for every filter length (and NNB window).  The driver
exploits this: it computes a per-event decision statistic once and the
threshold comparison is a vectorised step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

import numpy as np

from . import _kernels as K
from .errors import NonMonotonic
from .events import Event, EventStream, SensorGeometry
from .region import INTERVAL_INIT, NeighborContext, RegionGrid, neighbor_context


class Algorithm(enum.IntEnum):
    IIR = K.IIR
    TM = K.TM
    BI = K.BI
    BIF = K.BIF
    DIF = K.DIF
    NNB = K.NNB

    @classmethod
    def parse(cls, value) -> "Algorithm":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown algorithm {value!r}; choose from "
                                 f"{', '.join(a.name.lower() for a in cls)}") from None
        return cls(value)

    @property
    def region_based(self) -> bool:
        return self is not Algorithm.NNB


REGION_ALGORITHMS = (Algorithm.IIR, Algorithm.TM, Algorithm.BI, Algorithm.BIF, Algorithm.DIF)


@dataclass(frozen=True)
class FilterConfig:
    """Filter parameters.

    ``refresh_period_us=None`` ties the global refresh period to
    ``filter_length_us``; a period of 0 disables the refresh.
    """

    algorithm: Algorithm = Algorithm.DIF
    filter_length_us: int = 1000
    scale: int = 16
    update_factor: float = 0.25
    refresh_period_us: int | None = None
    nnb_window_us: int = 2500
    nnb_radius: int = 1
    interval_init_us: float = INTERVAL_INIT

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if self.filter_length_us < 0:
            raise ValueError("filter_length_us must be >= 0")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if not 0.0 < self.update_factor <= 1.0:
            raise ValueError("update_factor must be in (0, 1]")
        if self.refresh_period_us is not None and self.refresh_period_us < 0:
            raise ValueError("refresh_period_us must be >= 0")
        if self.nnb_window_us < 0 or self.nnb_radius < 0:
            raise ValueError("NNB window and radius must be >= 0")

    @property
    def refresh_period(self) -> int:
        return self.filter_length_us if self.refresh_period_us is None else self.refresh_period_us

    @property
    def threshold(self) -> int:
        """The swept discrimination parameter: window for NNB, filter length otherwise."""
        return self.nnb_window_us if self.algorithm is Algorithm.NNB else self.filter_length_us

    def with_threshold(self, value: int) -> "FilterConfig":
        """Copy with the threshold replaced, pinning the refresh period first.

        Pinning keeps the state trajectory independent of the threshold.
        """
        pinned = replace(self, refresh_period_us=self.refresh_period)
        if self.algorithm is Algorithm.NNB:
            return replace(pinned, nnb_window_us=int(value))
        return replace(pinned, filter_length_us=int(value))

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm.name.lower(),
            "filter_length_us": self.filter_length_us,
            "scale": self.scale,
            "update_factor": self.update_factor,
            "refresh_period_us": self.refresh_period,
            "nnb_window_us": self.nnb_window_us,
            "nnb_radius": self.nnb_radius,
            "interval_init_us": self.interval_init_us,
        }


class NnbState:
    """Per-pixel timestamp of the most recent event (``NO_EVENT`` if none)."""

    NO_EVENT = K.NO_EVENT

    def __init__(self, geometry: SensorGeometry):
        self.geometry = geometry
        self.last_ts = np.full((geometry.height, geometry.width), K.NO_EVENT, dtype=np.int64)


@dataclass(frozen=True)
class FilterOutcome:
    passed: bool
    threshold_ts: float | None = None


def interpolate_threshold(ctx: NeighborContext, algorithm) -> float:
    """Threshold timestamp for one event from its neighbour context."""
    algorithm = Algorithm.parse(algorithm)
    if algorithm is Algorithm.NNB:
        raise ValueError("NNB has no region threshold")
    if algorithm is Algorithm.IIR:
        return ctx.owner_ts
    two_r, two_c, t, i = ctx.as_quad()
    return float(K.interpolate(int(algorithm), two_r, two_c, *t, *i,
                               float(ctx.dx1), float(ctx.dx2), float(ctx.dy1), float(ctx.dy2),
                               float(ctx.scale)))


def classify_event(state, event: Event, cfg: FilterConfig) -> FilterOutcome:
    """Decide one event against ``state`` without mutating it.

    ``state`` is a :class:`RegionGrid` for region algorithms or an
    :class:`NnbState` for NNB.
    """
    if cfg.algorithm is Algorithm.NNB:
        gap = K.nnb_gap(state.last_ts, event.x, event.y, event.t, cfg.nnb_radius)
        return FilterOutcome(bool(gap <= cfg.nnb_window_us))
    thr = interpolate_threshold(neighbor_context(state, event.x, event.y), cfg.algorithm)
    return FilterOutcome(bool(thr + float(cfg.filter_length_us) > float(event.t)), thr)


def passes(stat: np.ndarray, t: np.ndarray, cfg: FilterConfig, threshold=None) -> np.ndarray:
    """Boolean pass mask from decision statistics (see :meth:`StreamingFilter.statistics`)."""
    if threshold is None:
        threshold = cfg.threshold
    if cfg.algorithm is Algorithm.NNB:
        return stat <= np.int64(threshold)
    return stat + float(threshold) > t.astype(np.float64)


class StreamingFilter:
    """Stateful filter fed chunk by chunk.

    >>> f = StreamingFilter(FilterConfig(algorithm="dif"), SensorGeometry(128, 128))
    >>> mask = f.process(chunk)  # doctest: +SKIP
    """

    def __init__(self, cfg: FilterConfig, geometry: SensorGeometry):
        self.cfg = cfg
        self.geometry = geometry
        self.last_t = -1
        self.n_seen = 0
        if cfg.algorithm is Algorithm.NNB:
            self.state = NnbState(geometry)
        else:
            self.state = RegionGrid(geometry, cfg.scale, cfg.interval_init_us)

    def statistics(self, chunk: EventStream) -> np.ndarray:
        """Advance the state over ``chunk``, returning each event's decision statistic.

        Region algorithms: the threshold timestamp (float64).  NNB: the gap to
        the most recent neighbouring event (int64, ``NO_NEIGHBOUR`` if none).
        """
        if chunk.geometry != self.geometry:
            raise ValueError(f"chunk geometry {chunk.geometry} != filter geometry {self.geometry}")
        cfg = self.cfg
        if cfg.algorithm is Algorithm.NNB:
            out = np.empty(len(chunk), dtype=np.int64)
            self.last_t, bad = K.nnb_pass(chunk.t, chunk.x, chunk.y, cfg.nnb_radius,
                                          self.state.last_ts, self.last_t, out)
        else:
            g = self.state
            out = np.empty(len(chunk), dtype=np.float64)
            self.last_t, bad = K.grid_pass(int(cfg.algorithm), chunk.t, chunk.x, chunk.y, g.scale,
                                           float(cfg.update_factor), int(cfg.refresh_period),
                                           g.ts, g.interval, g.active, self.last_t, out)
        if bad >= 0:
            raise NonMonotonic(f"timestamp {chunk.t[bad]} after {self.last_t}", self.n_seen + bad)
        self.n_seen += len(chunk)
        return out

    def process(self, chunk: EventStream) -> np.ndarray:
        """Advance over ``chunk`` and return its pass mask."""
        return passes(self.statistics(chunk), chunk.t, self.cfg)


def filter_mask(stream: EventStream, cfg: FilterConfig) -> np.ndarray:
    return StreamingFilter(cfg, stream.geometry).process(stream)


def run_filter(stream: EventStream, cfg: FilterConfig) -> tuple[EventStream, EventStream]:
    """Split ``stream`` into ``(passed, rejected)``, order and labels preserved."""
    mask = filter_mask(stream, cfg)
    return stream[mask], stream[~mask]


def filter_chunks(chunks: Iterable[EventStream], cfg: FilterConfig,
                  geometry: SensorGeometry | None = None) -> Iterator[tuple[EventStream, EventStream]]:
    """Constant-memory variant of :func:`run_filter` over an iterable of chunks."""
    f = None
    for chunk in chunks:
        if f is None:
            f = StreamingFilter(cfg, geometry or chunk.geometry)
        mask = f.process(chunk)
        yield chunk[mask], chunk[~mask]
