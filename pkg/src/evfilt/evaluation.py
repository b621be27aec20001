"""Retention metrics, ROC sweeps and algorithm comparison reports.

A ROC sweep varies the filter length (the NNB window for NNB) and records
TPR = signal passed / signal total and FPR = noise passed / noise total at
every value.  Because state updates do not depend on decisions, one pass
over the stream yields a per-event decision statistic from which every
threshold is evaluated exactly; ``method="rerun"`` instead re-runs the
filter per threshold and gives identical results.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import UnlabeledEvents
from .events import EventStream, Label
from .filters import Algorithm, FilterConfig, StreamingFilter, filter_mask, passes


@dataclass(frozen=True)
class RetentionMetrics:
    noise_total: int
    noise_passed: int
    signal_total: int
    signal_passed: int

    @property
    def pct_noise_remaining(self) -> float:
        return 100.0 * self.noise_passed / self.noise_total if self.noise_total else 0.0

    @property
    def pct_signal_remaining(self) -> float:
        return 100.0 * self.signal_passed / self.signal_total if self.signal_total else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pct_noise_remaining"] = self.pct_noise_remaining
        d["pct_signal_remaining"] = self.pct_signal_remaining
        return d


def _check_labeled(stream: EventStream):
    n = stream.count(Label.UNKNOWN)
    if n:
        raise UnlabeledEvents(f"{n} events carry the UNKNOWN label")


def retention_from_mask(labels: np.ndarray, mask: np.ndarray) -> RetentionMetrics:
    noise = labels == Label.NOISE
    sig = labels == Label.SIGNAL
    return RetentionMetrics(int(noise.sum()), int((noise & mask).sum()),
                            int(sig.sum()), int((sig & mask).sum()))


def compute_retention(input: EventStream, passed: EventStream) -> RetentionMetrics:
    """Label counts of ``passed`` relative to ``input``."""
    _check_labeled(input)
    return RetentionMetrics(input.count(Label.NOISE), passed.count(Label.NOISE),
                            input.count(Label.SIGNAL), passed.count(Label.SIGNAL))


def default_thresholds(n: int = 50, lo: float = 10, hi: float = 1e5) -> list[int]:
    """``n`` geometrically spaced thresholds in µs, rounded to integers."""
    return [int(round(v)) for v in np.geomspace(lo, hi, n)]


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    threshold: int | None  # None for the (0,0) and (1,1) anchors


@dataclass
class RocCurve:
    points: list[RocPoint]
    auc: float = field(init=False)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: (p.fpr, p.tpr))
        self.auc = auc_trapezoid([p.fpr for p in self.points], [p.tpr for p in self.points])

    def swept(self) -> list[RocPoint]:
        """The non-anchor points in threshold order."""
        return sorted((p for p in self.points if p.threshold is not None), key=lambda p: p.threshold)

    def to_list(self) -> list[dict]:
        return [{"threshold_us": p.threshold, "fpr": p.fpr, "tpr": p.tpr} for p in self.points]


def auc_trapezoid(fpr: Sequence[float], tpr: Sequence[float]) -> float:
    """Trapezoidal area under a ROC curve.

    Points are sorted by FPR and duplicate FPR values collapse to their
    largest TPR.
    """
    best: dict[float, float] = {}
    for f, t in zip(fpr, tpr):
        best[f] = max(t, best.get(f, -np.inf))
    xs = sorted(best)
    area = 0.0
    for a, b in zip(xs, xs[1:]):
        area += (b - a) * (best[a] + best[b]) / 2.0
    return area


def _curve(rates: Iterable[tuple[float, float, int]]) -> RocCurve:
    pts = [RocPoint(0.0, 0.0, None)]
    pts += [RocPoint(f, t, th) for f, t, th in rates]
    pts.append(RocPoint(1.0, 1.0, None))
    return RocCurve(pts)


def _rates(m: RetentionMetrics) -> tuple[float, float]:
    fpr = m.noise_passed / m.noise_total if m.noise_total else 0.0
    tpr = m.signal_passed / m.signal_total if m.signal_total else 0.0
    return fpr, tpr


def _map(fn, items, jobs):
    items = list(items)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def roc_sweep(stream: EventStream, cfg: FilterConfig, thresholds: Sequence[int] | None = None,
              method: str = "statistic", jobs: int | None = 1) -> RocCurve:
    """ROC curve of ``cfg.algorithm`` over ``thresholds`` (µs).

    The refresh period is pinned to ``cfg``'s value for every threshold.
    """
    _check_labeled(stream)
    thresholds = list(default_thresholds() if thresholds is None else thresholds)
    if not thresholds:
        raise ValueError("thresholds must be non-empty")
    if method == "statistic":
        pinned = cfg.with_threshold(cfg.threshold)
        stat = StreamingFilter(pinned, stream.geometry).statistics(stream)

        def one(th):
            return _rates(retention_from_mask(stream.label, passes(stat, stream.t, pinned, th))) + (th,)
    elif method == "rerun":
        def one(th):
            return _rates(retention_from_mask(stream.label, filter_mask(stream, cfg.with_threshold(th)))) + (th,)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _curve(_map(one, thresholds, jobs))


def roc_sweep_chunks(open_chunks: Callable[[], Iterator[EventStream]], cfg: FilterConfig,
                     thresholds: Sequence[int] | None = None) -> RocCurve:
    """Constant-memory ROC sweep; ``open_chunks()`` must return a fresh chunk iterator each call.

    The stream is re-read once per threshold.
    """
    thresholds = list(default_thresholds() if thresholds is None else thresholds)
    return _curve(_rates(retention_chunks(open_chunks, cfg.with_threshold(th))) + (th,)
                  for th in thresholds)


@dataclass
class AlgorithmResult:
    name: str
    auc: float
    roc: RocCurve
    retention: RetentionMetrics
    config: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "auc": self.auc, "roc": self.roc.to_list(),
                "retention": self.retention.to_dict(), "config": self.config}


@dataclass
class ComparisonReport:
    dataset: str
    geometry: dict
    algorithms: list[AlgorithmResult]
    thresholds: list[int]
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "geometry": self.geometry,
                "thresholds_us": self.thresholds, "settings": self.settings,
                "algorithms": [a.to_dict() for a in self.algorithms]}

    def auc_table(self) -> dict[str, float]:
        return {a.name: a.auc for a in self.algorithms}

    def write_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["algorithm", "threshold_us", "fpr", "tpr"])
            for a in self.algorithms:
                for p in a.roc.points:
                    w.writerow([a.name, "" if p.threshold is None else p.threshold, repr(p.fpr), repr(p.tpr)])


def compare_algorithms(stream: EventStream, base_cfg: FilterConfig, algorithms: Sequence,
                       thresholds: Sequence[int] | None = None, dataset: str = "",
                       jobs: int | None = 1, method: str = "statistic") -> ComparisonReport:
    """AUC per algorithm plus retention at ``base_cfg``'s own threshold."""
    _check_labeled(stream)
    thresholds = list(default_thresholds() if thresholds is None else thresholds)
    algos = [Algorithm.parse(a) for a in algorithms]

    def one(algo):
        cfg = FilterConfig(**{**base_cfg.to_dict(), "algorithm": algo})
        curve = roc_sweep(stream, cfg, thresholds, method=method, jobs=1)
        ret = retention_from_mask(stream.label, filter_mask(stream, cfg))
        return AlgorithmResult(algo.name.lower(), curve.auc, curve, ret, cfg.to_dict())

    results = _map(one, algos, jobs)
    g = stream.geometry
    return ComparisonReport(dataset, {"width": g.width, "height": g.height}, results, thresholds)


def retention_chunks(open_chunks: Callable[[], Iterator[EventStream]], cfg: FilterConfig) -> RetentionMetrics:
    f = None
    totals = np.zeros(4, dtype=np.int64)
    for chunk in open_chunks():
        _check_labeled(chunk)
        if f is None:
            f = StreamingFilter(cfg, chunk.geometry)
        m = retention_from_mask(chunk.label, f.process(chunk))
        totals += (m.noise_total, m.noise_passed, m.signal_total, m.signal_passed)
    return RetentionMetrics(*map(int, totals))


def compare_algorithms_chunks(open_chunks: Callable[[], Iterator[EventStream]], geometry,
                              base_cfg: FilterConfig, algorithms: Sequence,
                              thresholds: Sequence[int] | None = None,
                              dataset: str = "") -> ComparisonReport:
    """Constant-memory :func:`compare_algorithms`; the input is re-read per run."""
    thresholds = list(default_thresholds() if thresholds is None else thresholds)
    results = []
    for algo in (Algorithm.parse(a) for a in algorithms):
        cfg = FilterConfig(**{**base_cfg.to_dict(), "algorithm": algo})
        curve = roc_sweep_chunks(open_chunks, cfg, thresholds)
        results.append(AlgorithmResult(algo.name.lower(), curve.auc, curve,
                                       retention_chunks(open_chunks, cfg), cfg.to_dict()))
    return ComparisonReport(dataset, {"width": geometry.width, "height": geometry.height},
                            results, thresholds)
