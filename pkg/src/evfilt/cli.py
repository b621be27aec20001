"""``evfilt`` command-line interface.

Subcommands: filter, inject-noise, estimate-noise, synth, evaluate, roc.
Flags are long-form with units in their names.  ``--seed`` falls back to
the ``EVFILT_SEED`` environment variable, then 0.  Results are printed to
stdout as JSON; errors go to stderr with exit status 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import __version__
from .errors import EvfiltError
from .evaluation import (compare_algorithms, compare_algorithms_chunks, compute_retention,
                         default_thresholds, retention_from_mask)
from .events import (EventStream, SensorGeometry, StreamFormat, StreamWriter, iter_chunks,
                     read_stream, write_stream)
from .filters import Algorithm, FilterConfig, StreamingFilter
from .noise import NoiseSpec, estimate_noise, inject_noise, inject_recorded_noise
from .scene import boundary_crossing_report, load_scene_spec, render_scene

ALGO_NAMES = [a.name.lower() for a in Algorithm]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    return int(os.environ.get("EVFILT_SEED", "0"))


def _add_geometry(p):
    p.add_argument("--width", type=int, default=1280, help="sensor width for CSV input (default 1280)")
    p.add_argument("--height", type=int, default=720, help="sensor height for CSV input (default 720)")
    p.add_argument("--format", choices=["csv", "bin"], default=None,
                   help="input format (default: from extension)")
    p.add_argument("--sort", action="store_true", help="sort input by timestamp instead of rejecting disorder")


def _add_filter_flags(p, algo_default="dif"):
    p.add_argument("--algo", choices=ALGO_NAMES, default=algo_default)
    p.add_argument("--len-us", type=int, default=1000, help="filter length (default 1000)")
    p.add_argument("--scale", type=int, default=16, help="region side in pixels (default 16)")
    p.add_argument("--u", type=float, default=0.25, help="update factor (default 0.25)")
    p.add_argument("--refresh-us", type=int, default=None,
                   help="global refresh period; default = --len-us, 0 disables")
    p.add_argument("--window-us", type=int, default=2500, help="NNB time window (default 2500)")
    p.add_argument("--radius", type=int, default=1, help="NNB neighbourhood half-width (default 1)")


def _filter_config(a, algo=None) -> FilterConfig:
    return FilterConfig(algorithm=algo or a.algo, filter_length_us=a.len_us, scale=a.scale,
                        update_factor=a.u, refresh_period_us=a.refresh_us,
                        nnb_window_us=a.window_us, nnb_radius=a.radius)


def _geometry(a) -> SensorGeometry:
    return SensorGeometry(a.width, a.height)


def _read(a, path) -> EventStream:
    return read_stream(path, a.format, _geometry(a), sort=a.sort)


def _chunks(a, path):
    if a.sort:
        return iter([_read(a, path)])
    return iter_chunks(path, a.format, _geometry(a))


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
    print(text)


# ---------------------------------------------------------------- commands

def cmd_filter(a) -> int:
    cfg = _filter_config(a)
    counts = {"input": 0, "passed": 0, "rejected": 0}
    writers = []
    f = None
    try:
        for chunk in _chunks(a, a.input):
            if f is None:
                f = StreamingFilter(cfg, chunk.geometry)
                writers.append(StreamWriter(a.output, chunk.geometry, a.out_format))
                if a.rejected_out:
                    writers.append(StreamWriter(a.rejected_out, chunk.geometry, a.out_format))
            mask = f.process(chunk)
            writers[0].write(chunk[mask])
            if a.rejected_out:
                writers[1].write(chunk[~mask])
            counts["input"] += len(chunk)
            counts["passed"] += int(mask.sum())
        if f is None:  # empty input
            geo = _read(a, a.input).geometry
            writers.append(StreamWriter(a.output, geo, a.out_format))
            if a.rejected_out:
                writers.append(StreamWriter(a.rejected_out, geo, a.out_format))
    finally:
        for w in writers:
            w.close()
    counts["rejected"] = counts["input"] - counts["passed"]
    _emit({"counts": counts, "config": cfg.to_dict()})
    return 0


def cmd_inject(a) -> int:
    clean = _read(a, a.input)
    if a.noise_file:
        noise = read_stream(a.noise_file, None, clean.geometry)
        out = inject_recorded_noise(clean, noise, a.target_rate_hz, seed=a.seed)
    else:
        spec = NoiseSpec(a.rate_hz, clean.geometry, a.duration_us or 0, a.seed)
        out = inject_noise(clean, spec)
    write_stream(out, a.output, a.out_format)
    _emit({"counts": {"clean": len(clean), "noise": len(out) - len(clean), "output": len(out)},
           "config": {"rate_hz_per_pix": a.rate_hz, "noise_file": a.noise_file,
                      "target_rate_hz_per_pix": a.target_rate_hz, "duration_us": a.duration_us,
                      "seed": a.seed}})
    return 0


def cmd_estimate(a) -> int:
    s = _read(a, a.input)
    est = estimate_noise(s, bin_width=int(round(a.bin_ms * 1000)), trim=a.trim)
    _emit(est.to_dict(), a.out)
    return 0


def cmd_synth(a) -> int:
    spec = load_scene_spec(a.scene)
    if a.seed is not None:
        spec = replace(spec, seed=a.seed)
    s = render_scene(spec)
    write_stream(s, a.output, a.out_format)
    _emit({"counts": {"events": len(s)}, "scene": spec.to_dict()})
    return 0


def cmd_evaluate(a) -> int:
    s = _read(a, a.input)
    result = {"input": a.input}
    if a.passed:
        passed = read_stream(a.passed, a.format, s.geometry)
        result["retention"] = compute_retention(s, passed).to_dict()
    else:
        cfg = _filter_config(a)
        mask = StreamingFilter(cfg, s.geometry).process(s)
        result["config"] = cfg.to_dict()
        result["retention"] = retention_from_mask(s.label, mask).to_dict()
        if a.band is not None:
            rep = boundary_crossing_report(s, s[~mask], cfg.scale, a.band)
            result["boundary"] = dict(rep._asdict(), band=a.band)
    _emit(result, a.out)
    return 0


def _thresholds(a) -> list[int]:
    if a.thresholds_us:
        return [int(v) for v in a.thresholds_us.split(",") if v]
    return default_thresholds(a.n_thresholds, a.min_us, a.max_us)


def cmd_roc(a) -> int:
    algos = [Algorithm.parse(n) for n in a.algos.split(",") if n]
    thresholds = _thresholds(a)
    base = _filter_config(a, algo=algos[0])
    dataset = a.dataset or os.path.basename(a.input)
    if a.low_mem:
        geo = _geometry(a)
        if StreamFormat.infer(a.input, a.format) is StreamFormat.BIN:
            geo = next(iter_chunks(a.input, a.format), EventStream.empty(geo)).geometry
        report = compare_algorithms_chunks(lambda: _chunks(a, a.input), geo, base, algos,
                                           thresholds, dataset=dataset)
    else:
        s = _read(a, a.input)
        report = compare_algorithms(s, base, algos, thresholds, dataset=dataset, jobs=a.jobs)
    report.settings = {"base_config": base.to_dict(), "jobs": a.jobs, "low_mem": a.low_mem,
                       "input": a.input}
    report.write_json(a.report)
    if a.csv:
        report.write_csv(a.csv)
    print(json.dumps({"report": a.report, "auc": report.auc_table()}, indent=2))
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evfilt", description="Region-grid IIR event-camera noise filters")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("filter", help="filter an event file")
    _add_geometry(f)
    _add_filter_flags(f)
    f.add_argument("--rejected-out", default=None, help="also write rejected events here")
    f.add_argument("--out-format", choices=["csv", "bin"], default=None)
    f.add_argument("input")
    f.add_argument("output")
    f.set_defaults(func=cmd_filter)

    i = sub.add_parser("inject-noise", aliases=["inject"], help="add uniform or recorded noise")
    _add_geometry(i)
    i.add_argument("--rate-hz", "--rate", dest="rate_hz", type=float, default=0.0,
                   help="uniform noise rate in events per pixel per second")
    i.add_argument("--duration-us", type=int, default=None, help="noise duration (default: input span)")
    i.add_argument("--noise-file", default=None, help="recorded noise to merge instead of uniform noise")
    i.add_argument("--target-rate-hz", type=float, default=None,
                   help="rescale the recorded noise to this rate")
    i.add_argument("--seed", type=int, default=_default_seed())
    i.add_argument("--out-format", choices=["csv", "bin"], default=None)
    i.add_argument("input")
    i.add_argument("output")
    i.set_defaults(func=cmd_inject)

    e = sub.add_parser("estimate-noise", aliases=["estimate"], help="histogram noise-rate estimate")
    _add_geometry(e)
    e.add_argument("--bin-ms", type=float, default=200.0)
    e.add_argument("--trim", type=int, default=16)
    e.add_argument("--out", default=None, help="also write the JSON here")
    e.add_argument("input")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("synth", help="render a synthetic scene from a JSON spec")
    s.add_argument("--seed", type=int, default=None, help="override the scene seed")
    s.add_argument("--out-format", choices=["csv", "bin"], default=None)
    s.add_argument("scene")
    s.add_argument("output")
    s.set_defaults(func=cmd_synth)

    v = sub.add_parser("evaluate", help="retention metrics of a labeled stream")
    _add_geometry(v)
    _add_filter_flags(v)
    v.add_argument("--passed", default=None, help="score this passed file instead of running a filter")
    v.add_argument("--band", type=int, default=None, help="add a boundary-crossing report with this band")
    v.add_argument("--out", default=None)
    v.add_argument("input")
    v.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("roc", help="ROC/AUC comparison across algorithms")
    _add_geometry(r)
    _add_filter_flags(r)
    r.add_argument("--algos", default=",".join(ALGO_NAMES))
    r.add_argument("--thresholds-us", default=None, help="comma-separated thresholds")
    r.add_argument("--n-thresholds", type=int, default=50)
    r.add_argument("--min-us", type=float, default=10)
    r.add_argument("--max-us", type=float, default=1e5)
    r.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    r.add_argument("--low-mem", action="store_true", help="re-read the input per threshold")
    r.add_argument("--csv", default=None, help="also write ROC points as CSV")
    r.add_argument("--dataset", default=None)
    r.add_argument("input")
    r.add_argument("report")
    r.set_defaults(func=cmd_roc)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    if getattr(a, "command", None) == "roc":
        bad = [n for n in a.algos.split(",") if n and n not in ALGO_NAMES]
        if bad:
            parser.error(f"unknown algorithm(s): {', '.join(bad)}")
    try:
        return a.func(a)
    except (EvfiltError, OSError, ValueError) as exc:
        print(f"evfilt: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
