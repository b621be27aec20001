"""Event types, labeled streams and the CSV/BIN event file formats.

Streams are stored column-wise in numpy arrays.  An :class:`EventStream` is
immutable: its arrays are flagged read-only on construction, and every
transformation returns a new stream.

File formats
------------
CSV
    Header ``t_us,x,y,p,label``, one event per LF-terminated line, ``p`` in
    ``{0,1}`` and ``label`` in ``{S,N,U}``.  CSV does not carry the sensor
    geometry, so readers take it as an argument.
BIN
    ``EVF1`` magic, little-endian ``u32 width``, ``u32 height``, ``u64 count``,
    then ``count`` packed 14-byte records ``u64 t_us, u16 x, u16 y, u8 p,
    u8 label`` with labels encoded 0=S, 1=N, 2=U.
"""

from __future__ import annotations

import enum
import os
import struct
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import GeometryMismatch, MalformedRecord, NonMonotonic, OutOfBounds


class Label(enum.IntEnum):
    SIGNAL = 0
    NOISE = 1
    UNKNOWN = 2

    @property
    def code(self) -> str:
        return "SNU"[self]

    @classmethod
    def from_code(cls, c: str) -> "Label":
        return cls("SNU".index(c))


class StreamFormat(str, enum.Enum):
    CSV = "csv"
    BIN = "bin"

    @classmethod
    def infer(cls, path, fmt=None) -> "StreamFormat":
        """Resolve ``fmt`` (enum, string or None) using the file extension as fallback."""
        if fmt is not None:
            return cls(fmt.lower() if isinstance(fmt, str) else fmt)
        ext = os.path.splitext(str(path))[1].lower()
        if ext in (".bin", ".evf"):
            return cls.BIN
        return cls.CSV


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


class LabeledEvent(NamedTuple):
    event: Event
    label: Label


@dataclass(frozen=True)
class SensorGeometry:
    width: int = 1280
    height: int = 720

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"sensor geometry must be at least 1x1, got {self.width}x{self.height}")

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def contains(self, x, y) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


CSV_HEADER = "t_us,x,y,p,label"
BIN_MAGIC = b"EVF1"
BIN_HEADER = struct.Struct("<4sIIQ")
BIN_RECORD = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1"), ("label", "u1")])
assert BIN_RECORD.itemsize == 14

_COLUMNS = ("t", "x", "y", "p", "label")
_DTYPES = {"t": np.int64, "x": np.int32, "y": np.int32, "p": np.uint8, "label": np.uint8}


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.flags.writeable = False
    return a


class EventStream:
    """An ordered, immutable sequence of labeled events on a sensor."""

    __slots__ = ("geometry", "t", "x", "y", "p", "label")

    def __init__(self, geometry: SensorGeometry, t=(), x=(), y=(), p=(), label=None):
        t = _frozen(t, np.int64)
        n = len(t)
        if label is None:
            label = np.full(n, Label.UNKNOWN, dtype=np.uint8)
        cols = dict(t=t, x=_frozen(x, np.int32), y=_frozen(y, np.int32), p=_frozen(p, np.uint8),
                    label=_frozen(label, np.uint8))
        if any(len(v) != n for v in cols.values()):
            raise ValueError("event columns differ in length")
        object.__setattr__(self, "geometry", geometry)
        for k, v in cols.items():
            object.__setattr__(self, k, v)

    def __setattr__(self, name, value):
        raise AttributeError("EventStream is immutable")

    @classmethod
    def empty(cls, geometry: SensorGeometry) -> "EventStream":
        return cls(geometry)

    @classmethod
    def from_events(cls, geometry: SensorGeometry, events) -> "EventStream":
        """Build a stream from ``Event``/``LabeledEvent`` items (plain events get UNKNOWN)."""
        rows = []
        for e in events:
            if isinstance(e, LabeledEvent):
                rows.append((*e.event, int(e.label)))
            else:
                rows.append((*e, int(Label.UNKNOWN)))
        if not rows:
            return cls.empty(geometry)
        t, x, y, p, lab = zip(*rows)
        return cls(geometry, t, x, y, p, lab)

    @classmethod
    def concat(cls, geometry: SensorGeometry, parts) -> "EventStream":
        parts = list(parts)
        if not parts:
            return cls.empty(geometry)
        return cls(geometry, *(np.concatenate([getattr(s, c) for s in parts]) for c in _COLUMNS))

    def __len__(self):
        return len(self.t)

    def __iter__(self) -> Iterator[LabeledEvent]:
        for t, x, y, p, lab in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(),
                                   self.p.tolist(), self.label.tolist()):
            yield LabeledEvent(Event(t, x, y, p), Label(lab))

    def __getitem__(self, key):
        if isinstance(key, (int, np.integer)):
            i = int(key)
            return LabeledEvent(Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i])),
                                Label(int(self.label[i])))
        return EventStream(self.geometry, *(getattr(self, c)[key] for c in _COLUMNS))

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return self.geometry == other.geometry and all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in _COLUMNS)

    __hash__ = None

    def __repr__(self):
        g = self.geometry
        return f"EventStream({g.width}x{g.height}, n={len(self)})"

    def with_label(self, label: Label) -> "EventStream":
        return EventStream(self.geometry, self.t, self.x, self.y, self.p,
                           np.full(len(self), int(label), dtype=np.uint8))

    def with_times(self, t) -> "EventStream":
        return EventStream(self.geometry, t, self.x, self.y, self.p, self.label)

    def count(self, label: Label) -> int:
        return int(np.count_nonzero(self.label == label))

    @property
    def span_us(self) -> int:
        """``t_last - t_first + 1``, or 0 for an empty stream."""
        return int(self.t[-1] - self.t[0] + 1) if len(self) else 0

    def is_sorted(self) -> bool:
        return bool(np.all(self.t[1:] >= self.t[:-1]))

    def sorted(self) -> "EventStream":
        order = np.argsort(self.t, kind="stable")
        return self[order]

    def validate(self, offset: int = 0) -> None:
        """Check bounds and ordering; ``offset`` shifts reported record indices."""
        g = self.geometry
        bad = np.flatnonzero((self.x < 0) | (self.x >= g.width) | (self.y < 0) | (self.y >= g.height))
        if len(bad):
            i = int(bad[0])
            raise OutOfBounds(f"pixel ({self.x[i]}, {self.y[i]}) outside {g.width}x{g.height}", offset + i)
        bad = np.flatnonzero(self.t < 0)
        if len(bad):
            raise MalformedRecord("negative timestamp", offset + int(bad[0]))
        bad = np.flatnonzero(self.p > 1)
        if len(bad):
            raise MalformedRecord("polarity must be 0 or 1", offset + int(bad[0]))
        bad = np.flatnonzero(self.label > 2)
        if len(bad):
            raise MalformedRecord("unknown label code", offset + int(bad[0]))
        bad = np.flatnonzero(self.t[1:] < self.t[:-1])
        if len(bad):
            i = int(bad[0]) + 1
            raise NonMonotonic(f"timestamp {self.t[i]} after {self.t[i - 1]}", offset + i)


# ---------------------------------------------------------------- reading

def _parse_csv_lines(lines, start_index, geometry):
    n = len(lines)
    cols = {c: np.empty(n, dtype=_DTYPES[c]) for c in _COLUMNS}
    w, h = geometry.width, geometry.height
    for j, line in enumerate(lines):
        idx = start_index + j
        fields = line.split(",")
        if len(fields) != 5:
            raise MalformedRecord(f"expected 5 fields, got {len(fields)}", idx)
        try:
            t, x, y, p = (int(f) for f in fields[:4])
        except ValueError as exc:
            raise MalformedRecord(str(exc), idx) from None
        lab = fields[4].strip()
        if lab not in ("S", "N", "U"):
            raise MalformedRecord(f"bad label {lab!r}", idx)
        if p not in (0, 1):
            raise MalformedRecord(f"bad polarity {p}", idx)
        if t < 0:
            raise MalformedRecord("negative timestamp", idx)
        if not (0 <= x < w and 0 <= y < h):
            raise OutOfBounds(f"pixel ({x}, {y}) outside {w}x{h}", idx)
        cols["t"][j] = t
        cols["x"][j] = x
        cols["y"][j] = y
        cols["p"][j] = p
        cols["label"][j] = "SNU".index(lab)
    return EventStream(geometry, *(cols[c] for c in _COLUMNS))


def _iter_csv(path, geometry, chunk_size):
    with open(path, "r", encoding="ascii", newline="") as f:
        header = f.readline().rstrip("\r\n")
        if header != CSV_HEADER:
            raise MalformedRecord(f"bad CSV header {header!r}")
        index = 0
        buf = []
        for line in f:
            line = line.rstrip("\r\n")
            if not line:
                continue
            buf.append(line)
            if len(buf) >= chunk_size:
                yield _parse_csv_lines(buf, index, geometry)
                index += len(buf)
                buf = []
        if buf:
            yield _parse_csv_lines(buf, index, geometry)


def read_bin_header(f) -> tuple[SensorGeometry, int]:
    raw = f.read(BIN_HEADER.size)
    if len(raw) != BIN_HEADER.size:
        raise MalformedRecord("truncated BIN header")
    magic, w, h, count = BIN_HEADER.unpack(raw)
    if magic != BIN_MAGIC:
        raise MalformedRecord(f"bad magic {magic!r}")
    return SensorGeometry(w, h), count


def _iter_bin(path, chunk_size):
    with open(path, "rb") as f:
        geometry, count = read_bin_header(f)
        index = 0
        while index < count:
            n = min(chunk_size, count - index)
            raw = f.read(n * BIN_RECORD.itemsize)
            got = len(raw) // BIN_RECORD.itemsize
            if got < n:
                raise MalformedRecord("file ends before declared event count", index + got)
            rec = np.frombuffer(raw, dtype=BIN_RECORD)
            if np.any(rec["t"] > np.iinfo(np.int64).max):
                raise MalformedRecord("timestamp exceeds 63 bits", index + int(np.argmax(rec["t"] > np.iinfo(np.int64).max)))
            chunk = EventStream(geometry, rec["t"].astype(np.int64), rec["x"], rec["y"], rec["p"], rec["label"])
            chunk.validate(offset=index)
            yield chunk
            index += n
        if f.read(1):
            raise MalformedRecord("trailing bytes after last record", count)


def iter_chunks(path, fmt=None, geometry: SensorGeometry | None = None,
                chunk_size: int = 1 << 16) -> Iterator[EventStream]:
    """Yield validated chunks of an event file in order, in constant memory.

    Timestamp order is checked across chunk boundaries as well as within them.
    """
    fmt = StreamFormat.infer(path, fmt)
    if fmt is StreamFormat.BIN:
        chunks = _iter_bin(path, chunk_size)
    else:
        chunks = _iter_csv(path, geometry or SensorGeometry(), chunk_size)
    last_t = None
    index = 0
    for chunk in chunks:
        chunk.validate(offset=index)
        if last_t is not None and len(chunk) and chunk.t[0] < last_t:
            raise NonMonotonic(f"timestamp {chunk.t[0]} after {last_t}", index)
        if len(chunk):
            last_t = chunk.t[-1]
        index += len(chunk)
        yield chunk


def read_stream(path, fmt=None, geometry: SensorGeometry | None = None, sort: bool = False) -> EventStream:
    """Read a whole event file.

    With ``sort=True`` out-of-order timestamps are stably sorted instead of
    raising :class:`NonMonotonic`.
    """
    fmt = StreamFormat.infer(path, fmt)
    if not sort:
        parts = list(iter_chunks(path, fmt, geometry))
        geo = parts[0].geometry if parts else _file_geometry(path, fmt, geometry)
        return EventStream.concat(geo, parts)
    if fmt is StreamFormat.BIN:
        parts = list(_iter_bin_unchecked(path))
    else:
        parts = list(_iter_csv(path, geometry or SensorGeometry(), 1 << 16))
    geo = parts[0].geometry if parts else _file_geometry(path, fmt, geometry)
    return EventStream.concat(geo, parts).sorted()


def _iter_bin_unchecked(path):
    with open(path, "rb") as f:
        geometry, count = read_bin_header(f)
        rec = np.frombuffer(f.read(count * BIN_RECORD.itemsize), dtype=BIN_RECORD)
        if len(rec) != count:
            raise MalformedRecord("file ends before declared event count", len(rec))
    s = EventStream(geometry, rec["t"].astype(np.int64), rec["x"], rec["y"], rec["p"], rec["label"])
    g = s.geometry
    bad = np.flatnonzero((s.x >= g.width) | (s.y >= g.height))
    if len(bad):
        raise OutOfBounds("pixel outside geometry", int(bad[0]))
    yield s


def _file_geometry(path, fmt, geometry):
    if fmt is StreamFormat.BIN:
        with open(path, "rb") as f:
            return read_bin_header(f)[0]
    return geometry or SensorGeometry()


# ---------------------------------------------------------------- writing

class StreamWriter:
    """Incremental writer; use as a context manager and call :meth:`write` per chunk.

    BIN files get their event count patched into the header on close.
    """

    def __init__(self, path, geometry: SensorGeometry, fmt=None):
        self.path = path
        self.geometry = geometry
        self.fmt = StreamFormat.infer(path, fmt)
        self.count = 0
        if self.fmt is StreamFormat.BIN:
            self._f = open(path, "wb")
            self._f.write(BIN_HEADER.pack(BIN_MAGIC, geometry.width, geometry.height, 0))
        else:
            self._f = open(path, "w", encoding="ascii", newline="\n")
            self._f.write(CSV_HEADER + "\n")

    def write(self, stream: EventStream) -> None:
        if stream.geometry != self.geometry:
            raise GeometryMismatch(f"{stream.geometry} vs {self.geometry}")
        if not len(stream):
            return
        if self.fmt is StreamFormat.BIN:
            rec = np.empty(len(stream), dtype=BIN_RECORD)
            rec["t"] = stream.t
            rec["x"] = stream.x
            rec["y"] = stream.y
            rec["p"] = stream.p
            rec["label"] = stream.label
            self._f.write(rec.tobytes())
        else:
            codes = np.array(list("SNU"))[stream.label]
            self._f.write("".join(
                f"{t},{x},{y},{p},{c}\n" for t, x, y, p, c in zip(
                    stream.t.tolist(), stream.x.tolist(), stream.y.tolist(), stream.p.tolist(), codes.tolist())))
        self.count += len(stream)

    def close(self) -> None:
        if self._f.closed:
            return
        if self.fmt is StreamFormat.BIN:
            self._f.seek(0)
            self._f.write(BIN_HEADER.pack(BIN_MAGIC, self.geometry.width, self.geometry.height, self.count))
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_stream(stream: EventStream, path, fmt=None) -> None:
    with StreamWriter(path, stream.geometry, fmt) as w:
        w.write(stream)


# ---------------------------------------------------------------- merging

def merge_streams(a: EventStream, b: EventStream) -> EventStream:
    """Merge two streams into one timestamp-sorted stream.

    Ties are ordered by ``(t, y, x, polarity)`` and then source, with events
    of ``a`` before those of ``b``.  Merging with an empty stream returns the
    other stream unchanged.
    """
    if a.geometry != b.geometry:
        raise GeometryMismatch(f"cannot merge {a.geometry} with {b.geometry}")
    if not len(a):
        return b
    if not len(b):
        return a
    cat = EventStream.concat(a.geometry, [a, b])
    src = np.concatenate([np.zeros(len(a), np.uint8), np.ones(len(b), np.uint8)])
    order = np.lexsort((src, cat.p, cat.x, cat.y, cat.t))
    return cat[order]
