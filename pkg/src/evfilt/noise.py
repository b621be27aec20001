"""Artificial background noise, recorded-noise injection and noise-rate estimation.

Random streams use numpy's PCG64 bit generator seeded with the 64-bit
``seed``; for a given seed and numpy's PCG64 stream the output is
reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import GeometryMismatch, InsufficientBins
from .events import EventStream, Label, SensorGeometry, merge_streams

US_PER_S = 1_000_000


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


def canonical_order(s: EventStream) -> EventStream:
    """Sort by ``(t, y, x, polarity)``, stable."""
    return s[np.lexsort((s.p, s.x, s.y, s.t))]


@dataclass(frozen=True)
class NoiseSpec:
    rate: float                 # events per pixel per second
    geometry: SensorGeometry
    duration: int               # microseconds
    seed: int = 0

    def __post_init__(self):
        if self.rate < 0 or self.duration < 0:
            raise ValueError("noise rate and duration must be non-negative")

    @property
    def count(self) -> int:
        g = self.geometry
        return int(round(self.rate * g.width * g.height * self.duration / US_PER_S))


def generate_noise(spec: NoiseSpec, t0: int = 0) -> EventStream:
    """Exactly ``spec.count`` uniform events over ``[t0, t0 + duration)``, labeled NOISE."""
    g = spec.geometry
    n = spec.count
    if n == 0 or spec.duration == 0:
        return EventStream.empty(g)
    rng = make_rng(spec.seed)
    t = rng.integers(0, spec.duration, n, dtype=np.int64) + t0
    x = rng.integers(0, g.width, n)
    y = rng.integers(0, g.height, n)
    p = rng.integers(0, 2, n)
    return canonical_order(EventStream(g, t, x, y, p, np.full(n, Label.NOISE, np.uint8)))


def _as_signal(clean: EventStream) -> EventStream:
    lab = clean.label.copy()
    lab[lab == Label.UNKNOWN] = Label.SIGNAL
    return EventStream(clean.geometry, clean.t, clean.x, clean.y, clean.p, lab)


def inject_noise(clean: EventStream, spec: NoiseSpec | None = None, *, rate: float | None = None,
                 seed: int = 0) -> EventStream:
    """Merge uniform noise into ``clean``.

    UNKNOWN labels in ``clean`` become SIGNAL.  When ``spec`` is omitted the
    noise covers the clean stream's time span at ``rate``.  A spec with
    ``duration=0`` is likewise stretched over that span.
    """
    if spec is None:
        spec = NoiseSpec(rate or 0.0, clean.geometry, clean.span_us, seed)
    if spec.geometry != clean.geometry:
        raise GeometryMismatch(f"noise geometry {spec.geometry} != stream geometry {clean.geometry}")
    t0 = int(clean.t[0]) if len(clean) else 0
    if spec.duration == 0:
        spec = NoiseSpec(spec.rate, spec.geometry, clean.span_us, spec.seed)
    return merge_streams(_as_signal(clean), generate_noise(spec, t0=t0))


def stream_rate(s: EventStream) -> float:
    """Mean events per pixel per second over the stream's span."""
    if not len(s):
        return 0.0
    return len(s) / (s.geometry.n_pixels * s.span_us / US_PER_S)


def rescale_noise(noise: EventStream, target_rate: float, duration: int, seed: int = 0,
                  t0: int = 0) -> EventStream:
    """Fit a recorded noise stream to ``duration`` µs at ``target_rate`` Hz/pix.

    The recording is tiled in time (copy ``k`` shifted by ``k * span``) and,
    if more events are needed than one tiling layer provides, further layers
    with phase offsets are overlaid.  The pool is then uniformly thinned to the
    exact target count.  Events are relabeled NOISE and shifted to start at ``t0``.
    """
    g = noise.geometry
    want = int(round(target_rate * g.n_pixels * duration / US_PER_S))
    if want == 0 or not len(noise) or duration == 0:
        return EventStream.empty(g)
    span = noise.span_us
    base_t = noise.t - noise.t[0]
    n_tiles = -(-duration // span)
    per_layer = n_tiles * len(noise)
    n_layers = max(1, -(-want // per_layer))
    ts, xs, ys, ps = [], [], [], []
    for layer in range(n_layers):
        phase = (layer * span) // n_layers
        for k in range(n_tiles + 1):
            t = base_t + k * span - phase
            keep = (t >= 0) & (t < duration)
            ts.append(t[keep])
            xs.append(noise.x[keep])
            ys.append(noise.y[keep])
            ps.append(noise.p[keep])
    t = np.concatenate(ts)
    rng = make_rng(seed)
    pick = np.sort(rng.choice(len(t), size=min(want, len(t)), replace=False))
    out = EventStream(g, t[pick] + t0, np.concatenate(xs)[pick], np.concatenate(ys)[pick],
                      np.concatenate(ps)[pick], np.full(len(pick), Label.NOISE, np.uint8))
    return canonical_order(out)


def inject_recorded_noise(clean: EventStream, noise: EventStream, target_rate: float | None = None,
                          seed: int = 0) -> EventStream:
    """Relabel ``noise`` as NOISE and merge it into ``clean``.

    With ``target_rate`` the recording is rescaled over the clean span first;
    otherwise it is merged as recorded.
    """
    if noise.geometry != clean.geometry:
        raise GeometryMismatch(f"noise geometry {noise.geometry} != stream geometry {clean.geometry}")
    if target_rate is None:
        n = noise.with_label(Label.NOISE)
    else:
        t0 = int(clean.t[0]) if len(clean) else 0
        n = rescale_noise(noise, target_rate, clean.span_us, seed, t0=t0)
    return merge_streams(_as_signal(clean), n)


@dataclass(frozen=True)
class NoiseEstimate:
    mean_events_per_bin: float
    noise_rate: float
    min_noise_fraction: float
    bin_width: int
    trimmed: int

    def to_dict(self) -> dict:
        return {
            "mean_events_per_bin": self.mean_events_per_bin,
            "noise_rate_hz_per_pix": self.noise_rate,
            "min_noise_fraction": self.min_noise_fraction,
            "bin_width_us": self.bin_width,
            "trim": self.trimmed,
        }


def estimate_from_counts(counts, bin_width: int, trim: int, geometry: SensorGeometry,
                         total_events: int | None = None) -> NoiseEstimate:
    """Trimmed-mean noise estimate from a per-bin event histogram."""
    counts = np.sort(np.asarray(counts, dtype=np.int64))
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if len(counts) < 2 * trim + 1:
        raise InsufficientBins(f"need at least {2 * trim + 1} bins, have {len(counts)}")
    kept = counts[trim:len(counts) - trim]
    mean = float(kept.mean())
    rate = mean / (bin_width / US_PER_S * geometry.n_pixels)
    total = int(counts.sum()) if total_events is None else int(total_events)
    frac = min(1.0, mean * len(counts) / total) if total else 0.0
    return NoiseEstimate(mean, rate, frac, int(bin_width), int(trim))


def histogram(stream: EventStream, bin_width: int) -> np.ndarray:
    """Event counts in consecutive ``bin_width`` windows from t=0 to the last event."""
    if not len(stream):
        return np.zeros(0, dtype=np.int64)
    n_bins = int(stream.t[-1] // bin_width) + 1
    return np.bincount(stream.t // bin_width, minlength=n_bins)


def estimate_noise(stream: EventStream, bin_width: int = 200_000, trim: int = 16) -> NoiseEstimate:
    """Estimate the static-scene noise rate of ``stream``.

    The ``trim`` fullest and emptiest bins are dropped and the rest averaged.
    ``min_noise_fraction`` extrapolates that mean over all bins relative to
    the total event count (capped at 1).
    """
    return estimate_from_counts(histogram(stream, bin_width), bin_width, trim, stream.geometry, len(stream))


def noise_spec_dict(spec: NoiseSpec) -> dict:
    d = asdict(spec)
    d["geometry"] = {"width": spec.geometry.width, "height": spec.geometry.height}
    return d
