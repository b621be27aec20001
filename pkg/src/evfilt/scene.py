"""Synthetic moving-object scenes with ground-truth SIGNAL labels.

Events follow a contour-crossing model: a pixel fires when the object's
contour passes its centre (integer coordinates).  A disk produces an ON
event (polarity 1) when its leading edge covers a pixel and an OFF event
(polarity 0) when the trailing edge uncovers it.  A vertical edge is a step:
one ON event per pixel it sweeps, over rows ``|y - y_edge| <= radius``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateScene
from .events import EventStream, Label, SensorGeometry
from .noise import canonical_order, make_rng

US_PER_S = 1_000_000


class SceneObject(str, enum.Enum):
    DISK = "disk"
    VERTICAL_EDGE = "vertical_edge"


@dataclass(frozen=True)
class SceneSpec:
    """A single object moving at constant velocity.

    ``radius`` is the disk radius, or the half-height of a vertical edge.
    With ``repeat_us > 0`` the object restarts from ``(x0, y0)`` every
    ``repeat_us`` microseconds, like a stream of falling objects.
    ``fire_probability`` drops each crossing event independently, mimicking
    pixels that miss low-contrast changes.
    """

    geometry: SensorGeometry
    object: SceneObject = SceneObject.DISK
    radius: float = 4.0
    vx: float = 0.0             # px/s
    vy: float = 1600.0          # px/s
    x0: float = 64.0
    y0: float = -8.0
    duration: int = 1_000_000   # us
    jitter_us: int = 50
    events_per_pixel_crossing: int = 1
    seed: int = 0
    repeat_us: int = 0
    fire_probability: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "object", SceneObject(self.object))
        if not 0.0 < self.fire_probability <= 1.0:
            raise ValueError("fire_probability must be in (0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(
            geometry=SensorGeometry(int(d["width"]), int(d["height"])),
            object=SceneObject(str(d.get("object", "disk")).lower()),
            radius=float(d.get("radius", 4.0)),
            vx=float(d.get("vx_px_s", 0.0)),
            vy=float(d.get("vy_px_s", 0.0)),
            x0=float(d.get("x0", 0.0)),
            y0=float(d.get("y0", 0.0)),
            duration=int(d["duration_us"]),
            jitter_us=int(d.get("jitter_us", 50)),
            events_per_pixel_crossing=int(d.get("events_per_pixel_crossing", 1)),
            seed=int(d.get("seed", 0)),
            repeat_us=int(d.get("repeat_us", 0)),
            fire_probability=float(d.get("fire_probability", 1.0)),
        )

    def to_dict(self) -> dict:
        return {
            "width": self.geometry.width, "height": self.geometry.height,
            "object": self.object.value, "radius": self.radius,
            "vx_px_s": self.vx, "vy_px_s": self.vy, "x0": self.x0, "y0": self.y0,
            "duration_us": self.duration, "jitter_us": self.jitter_us,
            "events_per_pixel_crossing": self.events_per_pixel_crossing,
            "seed": self.seed, "repeat_us": self.repeat_us,
            "fire_probability": self.fire_probability,
        }


def load_scene_spec(path) -> SceneSpec:
    with open(path) as f:
        return SceneSpec.from_dict(json.load(f))


def _disk_crossings(spec: SceneSpec, px, py):
    """Entry/exit times (µs) of every pixel the disk covers at some instant."""
    vx = spec.vx / US_PER_S
    vy = spec.vy / US_PER_S
    a = vx * vx + vy * vy
    dx = px - spec.x0
    dy = py - spec.y0
    b = dx * vx + dy * vy
    c = dx * dx + dy * dy - spec.radius ** 2
    disc = b * b - a * c
    hit = disc >= -1e-9 * (b * b + a * np.abs(c))
    root = np.sqrt(np.maximum(disc[hit], 0.0))
    t_in = (b[hit] - root) / a
    t_out = (b[hit] + root) / a
    xs, ys = px[hit], py[hit]
    return (np.concatenate([t_in, t_out]), np.concatenate([xs, xs]), np.concatenate([ys, ys]),
            np.concatenate([np.ones(len(xs), np.uint8), np.zeros(len(xs), np.uint8)]))


def _edge_crossings(spec: SceneSpec, px, py):
    vx = spec.vx / US_PER_S
    vy = spec.vy / US_PER_S
    t = (px - spec.x0) / vx
    hit = np.abs(py - (spec.y0 + vy * t)) <= spec.radius
    return t[hit], px[hit], py[hit], np.ones(int(hit.sum()), np.uint8)


def render_scene(spec: SceneSpec) -> EventStream:
    """Render ``spec`` into a sorted SIGNAL-labeled stream."""
    g = spec.geometry
    if spec.object is SceneObject.VERTICAL_EDGE:
        if spec.vx == 0:
            raise DegenerateScene("a vertical edge needs non-zero horizontal velocity")
    elif spec.vx == 0 and spec.vy == 0:
        raise DegenerateScene("object velocity is zero")
    py, px = np.mgrid[0:g.height, 0:g.width]
    px = px.ravel().astype(np.float64)
    py = py.ravel().astype(np.float64)
    crossings = _edge_crossings if spec.object is SceneObject.VERTICAL_EDGE else _disk_crossings
    tc, xs, ys, ps = crossings(spec, px, py)

    pass_len = spec.repeat_us if spec.repeat_us > 0 else spec.duration
    inside = (tc >= 0) & (tc < pass_len)
    tc, xs, ys, ps = tc[inside], xs[inside], ys[inside], ps[inside]
    k = max(1, spec.events_per_pixel_crossing)
    tc, xs, ys, ps = (np.repeat(a, k) for a in (tc, xs, ys, ps))
    base = np.rint(tc).astype(np.int64)

    rng = make_rng(spec.seed)
    parts = []
    offset = 0
    while offset < spec.duration:
        jit = rng.integers(-spec.jitter_us, spec.jitter_us + 1, len(base)) if spec.jitter_us > 0 else 0
        t = np.clip(base + jit, 0, pass_len - 1) + offset
        keep = t < spec.duration
        if spec.fire_probability < 1.0:
            keep &= rng.random(len(base)) < spec.fire_probability
        parts.append((t[keep], xs[keep], ys[keep], ps[keep]))
        if spec.repeat_us <= 0:
            break
        offset += spec.repeat_us
    t, x, y, p = (np.concatenate([pt[i] for pt in parts]) for i in range(4))
    out = EventStream(g, t, x.astype(np.int32), y.astype(np.int32), p,
                      np.full(len(t), Label.SIGNAL, np.uint8))
    return canonical_order(out)


class BoundaryReport(NamedTuple):
    rejected_in_band: int
    rejected_total: int
    signal_total: int


def _line_distance(p, scale, extent):
    """Pixel distance to the nearest interior grid line (inf if there is none).

    A line at ``L`` separates pixels ``L - 1`` and ``L``; both are at distance 0.
    """
    p = np.asarray(p, dtype=np.int64)
    best = np.full(p.shape, np.inf)
    lo = (p // scale) * scale
    for line in (lo, lo + scale):
        valid = (line > 0) & (line < extent)
        d = np.where(p >= line, p - line, line - 1 - p).astype(np.float64)
        best = np.where(valid, np.minimum(best, d), best)
    return best


def in_band_mask(stream: EventStream, scale: int, band: int) -> np.ndarray:
    g = stream.geometry
    return ((_line_distance(stream.x, scale, g.width) <= band)
            | (_line_distance(stream.y, scale, g.height) <= band))


def boundary_crossing_report(stream: EventStream, rejected: EventStream, scale: int = 16,
                             band: int = 2) -> BoundaryReport:
    """Count rejected events lying within ``band`` pixels of a region boundary."""
    if stream.geometry != rejected.geometry:
        raise ValueError("streams must share geometry")
    in_band = int(in_band_mask(rejected, scale, band).sum()) if len(rejected) else 0
    return BoundaryReport(in_band, len(rejected), stream.count(Label.SIGNAL))
