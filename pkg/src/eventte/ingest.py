"""Parsing of tick files into per-day series, and their log returns.

Input is a headed CSV with columns ``date,time,instrument,price``. Times are
session-local wall-clock times; they are converted to seconds since the
session open of the calendar in use.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

log = logging.getLogger(__name__)

HEADER = ("date", "time", "instrument", "price")


class MalformedLineError(ValueError):
    """A tick-CSV record could not be parsed."""

    def __init__(self, lineno: int, reason: str, source: str = "<input>"):
        self.lineno = lineno
        self.reason = reason
        self.source = source
        super().__init__(f"{source}:{lineno}: {reason}")


def _parse_clock_ms(text: str) -> int:
    """Milliseconds since midnight for ``HH:MM[:SS[.mmm]]``."""
    parts = text.strip().split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"bad time {text!r}")
    hh, mm = int(parts[0]), int(parts[1])
    ss, ms = 0, 0
    if len(parts) == 3:
        sec, _, frac = parts[2].partition(".")
        ss = int(sec)
        if frac:
            if len(frac) > 3 or not frac.isdigit():
                raise ValueError(f"bad time {text!r}")
            ms = int(frac.ljust(3, "0"))
    if not (0 <= hh < 24 and 0 <= mm < 60 and 0 <= ss < 60):
        raise ValueError(f"bad time {text!r}")
    return ((hh * 60 + mm) * 60 + ss) * 1000 + ms


@dataclass(frozen=True)
class SessionCalendar:
    """Daily trading session, given as session-local open and close.

    The default is the NYSE regular session, 09:30 to 16:00 (23400 s).
    """

    open: str = "09:30"
    close: str = "16:00"

    def __post_init__(self):
        if self.close_seconds <= self.open_seconds:
            raise ValueError(
                f"session close {self.close} must be after open {self.open}")

    @property
    def open_seconds(self) -> float:
        return _parse_clock_ms(self.open) / 1000

    @property
    def close_seconds(self) -> float:
        return _parse_clock_ms(self.close) / 1000

    @property
    def length(self) -> float:
        return self.close_seconds - self.open_seconds


@dataclass(frozen=True)
class TickEvent:
    time: float
    price: float
    seq: int

    def __post_init__(self):
        if not self.price > 0:
            raise ValueError(f"price must be positive, got {self.price}")
        if self.time < 0:
            raise ValueError(f"time must be >= 0, got {self.time}")


@dataclass(frozen=True)
class TickSeries:
    """All ticks of one instrument on one session day, in (time, seq) order."""

    instrument: str
    day: dt.date
    events: Tuple[TickEvent, ...]

    def __post_init__(self):
        keys = [(e.time, e.seq) for e in self.events]
        if keys != sorted(keys):
            raise ValueError("tick events must be sorted by (time, seq)")

    def __len__(self):
        return len(self.events)

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events], dtype=float)

    @property
    def prices(self) -> np.ndarray:
        return np.array([e.price for e in self.events], dtype=float)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Log-price changes of one instrument on one day.

    ``times[i]`` is the session time of the tick at which the price moved and
    ``values[i]`` the natural-log return of that move. Zero returns never
    appear.
    """

    instrument: str
    day: dt.date
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = _frozen(self.times)
        values = _frozen(self.values)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-d and equally long")
        if np.any(values == 0):
            raise ValueError("a return event must carry a non-zero value")
        if np.any(np.diff(times) < 0):
            raise ValueError("return times must be non-decreasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, ReturnSeries):
            return NotImplemented
        return (self.instrument == other.instrument and self.day == other.day
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))


@dataclass
class ParseResult:
    series: Dict[Tuple[str, dt.date], TickSeries] = field(default_factory=dict)
    dropped: int = 0
    skipped: int = 0


def _iter_lines(source) -> Iterable[str]:
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    if isinstance(source, io.BufferedIOBase) or hasattr(source, "readinto"):
        source = io.TextIOWrapper(source, encoding="utf-8", newline="")
    return source


def parse_ticks(source, calendar: Optional[SessionCalendar] = None,
                on_bad_line: str = "abort",
                name: str = "<input>") -> ParseResult:
    """Parse a tick-CSV stream into per-(instrument, day) tick series.

    Parameters
    ----------
    source : bytes or a file object (binary or text)
        Tick-CSV content. A header line is required.
    calendar : SessionCalendar, optional
        Session used to convert wall-clock times; default 09:30-16:00.
    on_bad_line : {"abort", "skip"}
        ``abort`` raises :class:`MalformedLineError` on the first bad record,
        ``skip`` counts it in ``ParseResult.skipped`` and continues.

    Returns
    -------
    ParseResult
        ``series`` maps ``(instrument, day)`` to a sorted :class:`TickSeries`;
        ``dropped`` counts well-formed records outside the session.
    """
    if on_bad_line not in ("abort", "skip"):
        raise ValueError(f"on_bad_line must be 'abort' or 'skip', got {on_bad_line!r}")
    calendar = calendar or SessionCalendar()
    open_ms = _parse_clock_ms(calendar.open)
    length_ms = _parse_clock_ms(calendar.close) - open_ms
    result = ParseResult()
    groups: Dict[Tuple[str, dt.date], List[TickEvent]] = {}

    reader = csv.reader(_iter_lines(source))
    seq = 0
    header_seen = False
    for lineno, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if not header_seen:
            if tuple(c.strip().lower() for c in row) != HEADER:
                raise MalformedLineError(lineno, f"expected header {','.join(HEADER)}", name)
            header_seen = True
            continue
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            day = dt.date.fromisoformat(row[0].strip())
            clock_ms = _parse_clock_ms(row[1])
            instrument = row[2].strip()
            if not instrument:
                raise ValueError("empty instrument")
            price = float(row[3])
            if not (math.isfinite(price) and price > 0):
                raise ValueError(f"non-positive price {row[3]!r}")
        except ValueError as exc:
            if on_bad_line == "abort":
                raise MalformedLineError(lineno, str(exc), name) from None
            log.warning("%s:%d: skipping bad line (%s)", name, lineno, exc)
            result.skipped += 1
            continue
        t_ms = clock_ms - open_ms
        if t_ms < 0 or t_ms > length_ms:
            result.dropped += 1
            continue
        groups.setdefault((instrument, day), []).append(TickEvent(t_ms / 1000, price, seq))
        seq += 1

    for key in sorted(groups, key=lambda k: (k[1], k[0])):
        events = sorted(groups[key], key=lambda e: (e.time, e.seq))
        result.series[key] = TickSeries(key[0], key[1], tuple(events))
    return result


def merge_results(results: Iterable[ParseResult]) -> ParseResult:
    """Combine parses of several files; series of the same key are concatenated."""
    merged = ParseResult()
    groups: Dict[Tuple[str, dt.date], List[TickEvent]] = {}
    offset = 0
    for res in results:
        merged.dropped += res.dropped
        merged.skipped += res.skipped
        n = 0
        for key, ts in res.series.items():
            for e in ts.events:
                groups.setdefault(key, []).append(TickEvent(e.time, e.price, e.seq + offset))
                n = max(n, e.seq + 1)
        offset += n
    for key in sorted(groups, key=lambda k: (k[1], k[0])):
        events = sorted(groups[key], key=lambda e: (e.time, e.seq))
        merged.series[key] = TickSeries(key[0], key[1], tuple(events))
    return merged


def to_returns(ticks: TickSeries) -> ReturnSeries:
    """Log returns between consecutive ticks whose prices differ.

    Each event is stamped with the time of the later tick.
    """
    if len(ticks) == 0:
        raise ValueError("cannot compute returns of an empty tick series")
    prices = ticks.prices
    logp = np.log(prices)
    changed = prices[1:] != prices[:-1]
    values = (logp[1:] - logp[:-1])[changed]
    times = ticks.times[1:][changed]
    return ReturnSeries(ticks.instrument, ticks.day, times, values)


def format_clock(ms: int) -> str:
    """``HH:MM:SS.mmm`` for milliseconds since midnight."""
    hh, rem = divmod(ms, 3_600_000)
    mm, rem = divmod(rem, 60_000)
    ss, ms = divmod(rem, 1000)
    return f"{hh:02d}:{mm:02d}:{ss:02d}.{ms:03d}"


def write_ticks(series: Iterable[TickSeries], out,
                calendar: Optional[SessionCalendar] = None) -> None:
    """Write tick series as tick-CSV (the format :func:`parse_ticks` reads).

    Records are ordered by day, then time, then instrument.
    """
    calendar = calendar or SessionCalendar()
    rows = []
    for ts in series:
        for e in ts.events:
            rows.append((ts.day, e.time, ts.instrument, e.seq, e.price))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    out.write(",".join(HEADER) + "\n")
    for day, t, inst, _, price in rows:
        clock = _parse_clock_ms(calendar.open) + int(round(t * 1000))
        out.write(f"{day.isoformat()},{format_clock(clock)},"
                  f"{inst},{price!r}\n")


def read_paths(paths: Iterable[Union[str, os.PathLike]],
               calendar: Optional[SessionCalendar] = None,
               on_bad_line: str = "abort") -> ParseResult:
    """Parse one or more tick-CSV files; directories contribute their ``*.csv``."""
    files: List[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob("*.csv")))
        else:
            files.append(p)
    results = []
    for f in files:
        with open(f, "rb") as fh:
            results.append(parse_ticks(fh, calendar, on_bad_line, name=str(f)))
    return merge_results(results)
