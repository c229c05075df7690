"""Estimator substrates built from return series.

Returns are summed onto regular time-bin grids for correlation and the lagged
binned transfer entropy, then symbolized. The event-aligned form skips the
grid: every target event is paired with the target's previous event and the
most recent strictly-earlier source event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ingest import ReturnSeries, SessionCalendar


def _readonly(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BinnedSeries:
    delta_t: float
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values, float))

    @property
    def n_bins(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)


def n_bins(session_length: float, delta_t: float) -> int:
    """Number of ``delta_t`` bins covering a session, ``ceil(length / delta_t)``."""
    if not delta_t > 0:
        raise ValueError(f"delta_t must be positive, got {delta_t}")
    # integer-valued ratios must not pick up a spurious extra bin from round-off
    ratio = session_length / delta_t
    nearest = round(ratio)
    if abs(ratio - nearest) < 1e-9 * max(1.0, ratio):
        return int(nearest)
    return math.ceil(ratio)


def bin_returns(series: ReturnSeries, delta_t: float,
                session: Optional[SessionCalendar] = None) -> BinnedSeries:
    """Sum returns into right-closed bins ``(b*dt, (b+1)*dt]``.

    An event at exactly time 0 is placed in bin 0. Empty bins hold 0, so
    returns that net out inside one bin vanish from the grid.
    """
    session = session or SessionCalendar()
    length = session.length
    if not delta_t > 0:
        raise ValueError(f"delta_t must be positive, got {delta_t}")
    if delta_t > length:
        raise ValueError(f"delta_t {delta_t} exceeds session length {length}")
    nb = n_bins(length, delta_t)
    idx = np.ceil(series.times / delta_t).astype(np.int64) - 1
    idx = np.clip(idx, 0, nb - 1)
    values = np.zeros(nb)
    np.add.at(values, idx, series.values)
    return BinnedSeries(float(delta_t), values)


# Alphabets ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Alphabet:
    """Value-to-symbol encoding.

    ``kind == "sign"`` has size 2 (down, up) for event returns and size 3
    (down, zero, up) for binned values. ``kind == "quantile"`` has ``size``
    buckets separated by ``size - 1`` sorted boundaries; a value equal to a
    boundary falls in the upper bucket.
    """

    kind: str
    size: int
    boundaries: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "sign":
            if self.size not in (2, 3):
                raise ValueError("sign alphabet has size 2 or 3")
        elif self.kind == "quantile":
            if self.size < 2:
                raise ValueError("quantile alphabet needs at least 2 symbols")
            b = _readonly(self.boundaries, float)
            if b.shape != (self.size - 1,) or np.any(np.diff(b) < 0) \
                    or not np.all(np.isfinite(b)):
                raise ValueError(f"need {self.size - 1} sorted finite boundaries")
            object.__setattr__(self, "boundaries", b)
        else:
            raise ValueError(f"unknown alphabet kind {self.kind!r}")

    @classmethod
    def sign(cls, with_zero: bool = False) -> "Alphabet":
        return cls("sign", 3 if with_zero else 2)

    @classmethod
    def quantile(cls, values, q: int) -> "Alphabet":
        """Fit ``q`` equal-mass buckets on ``values``."""
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            raise ValueError("cannot fit quantile boundaries on no data")
        bounds = np.quantile(values, np.arange(1, q) / q)
        return cls("quantile", int(q), bounds)

    def __eq__(self, other):
        if not isinstance(other, Alphabet):
            return NotImplemented
        if self.kind != other.kind or self.size != other.size:
            return False
        if self.kind == "quantile":
            return np.array_equal(self.boundaries, other.boundaries)
        return True

    def __repr__(self):
        if self.kind == "sign":
            return f"Alphabet.sign(with_zero={self.size == 3})"
        return f"Alphabet('quantile', {self.size}, {list(self.boundaries)})"


@dataclass(frozen=True)
class AlphabetSpec:
    """Unfitted alphabet choice, as configured (``sign`` or ``quantile:Q``)."""

    kind: str = "sign"
    q: int = 0

    @classmethod
    def parse(cls, text: str) -> "AlphabetSpec":
        text = text.strip()
        if text == "sign":
            return cls("sign")
        if text.startswith("quantile:"):
            q = int(text.split(":", 1)[1])
            if q < 2:
                raise ValueError("quantile alphabet needs Q >= 2")
            return cls("quantile", q)
        raise ValueError(f"alphabet must be 'sign' or 'quantile:Q', got {text!r}")

    def __str__(self):
        return "sign" if self.kind == "sign" else f"quantile:{self.q}"

    def fit(self, values, binned: bool = False) -> Alphabet:
        if self.kind == "sign":
            return Alphabet.sign(with_zero=binned)
        return Alphabet.quantile(values, self.q)


@dataclass(frozen=True, eq=False)
class SymbolSequence:
    alphabet: Alphabet
    symbols: np.ndarray

    def __post_init__(self):
        s = _readonly(self.symbols, np.int64)
        if s.size and (s.min() < 0 or s.max() >= self.alphabet.size):
            raise ValueError("symbol index outside alphabet")
        object.__setattr__(self, "symbols", s)

    def __len__(self):
        return len(self.symbols)


def symbolize(values, alphabet: Alphabet) -> SymbolSequence:
    values = np.asarray(values, dtype=float)
    if alphabet.kind == "sign":
        if alphabet.size == 2:
            if np.any(values == 0):
                raise ValueError("zero value cannot be encoded by a 2-symbol sign alphabet")
            symbols = (values > 0).astype(np.int64)
        else:
            symbols = (np.sign(values) + 1).astype(np.int64)
    else:
        symbols = np.searchsorted(alphabet.boundaries, values, side="right")
    return SymbolSequence(alphabet, symbols)


# Event alignment --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AlignedTuples:
    """Event-aligned records ``(x_now, x_prev, y_prev, t_now, t_prev, t_src)``.

    Stored column-wise. ``x_size`` and ``y_size`` are the alphabet sizes of the
    target and source symbols.
    """

    x_now: np.ndarray
    x_prev: np.ndarray
    y_prev: np.ndarray
    t_now: np.ndarray
    t_prev: np.ndarray
    t_src: np.ndarray
    x_size: int
    y_size: int

    def __post_init__(self):
        for name in ("x_now", "x_prev", "y_prev"):
            object.__setattr__(self, name, _readonly(getattr(self, name), np.int64))
        for name in ("t_now", "t_prev", "t_src"):
            object.__setattr__(self, name, _readonly(getattr(self, name), float))

    def __len__(self):
        return len(self.x_now)

    def records(self):
        return list(zip(self.x_now.tolist(), self.x_prev.tolist(), self.y_prev.tolist(),
                        self.t_now.tolist(), self.t_prev.tolist(), self.t_src.tolist()))

    def with_source(self, y_prev) -> "AlignedTuples":
        return AlignedTuples(self.x_now, self.x_prev, y_prev, self.t_now,
                             self.t_prev, self.t_src, self.x_size, self.y_size)


def align_symbols(target_times, target_symbols: SymbolSequence,
                  source_times, source_symbols: SymbolSequence) -> AlignedTuples:
    """Most-recent-past alignment on already-symbolized event streams.

    For every target event ``i >= 1`` the previous target event supplies
    ``x_prev`` and the latest source event with time strictly less than
    ``t_now`` supplies ``y_prev``. Target events with no earlier source event
    are dropped. Source events may be used for several records or for none.
    """
    tt = np.asarray(target_times, dtype=float)
    st = np.asarray(source_times, dtype=float)
    xs, ys = target_symbols.symbols, source_symbols.symbols
    if len(tt) != len(xs) or len(st) != len(ys):
        raise ValueError("times and symbols must have equal lengths")
    if len(tt) < 2:
        idx = np.zeros(0, dtype=np.int64)
        j = idx
    else:
        idx = np.arange(1, len(tt))
        j = np.searchsorted(st, tt[1:], side="left") - 1
        keep = j >= 0
        idx, j = idx[keep], j[keep]
    return AlignedTuples(
        x_now=xs[idx], x_prev=xs[idx - 1] if len(idx) else idx, y_prev=ys[j],
        t_now=tt[idx], t_prev=tt[idx - 1] if len(idx) else tt[:0], t_src=st[j],
        x_size=target_symbols.alphabet.size, y_size=source_symbols.alphabet.size)


def align_events(target: ReturnSeries, source: ReturnSeries,
                 alphabet: Alphabet,
                 source_alphabet: Optional[Alphabet] = None) -> AlignedTuples:
    """Align a target and a source return series for the event transfer entropy.

    ``alphabet`` encodes the target; the source uses ``source_alphabet`` when
    given (per-instrument quantile fits) and ``alphabet`` otherwise.
    """
    source_alphabet = source_alphabet or alphabet
    return align_symbols(target.times, symbolize(target.values, alphabet),
                         source.times, symbolize(source.values, source_alphabet))


# Lagged tuples ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LaggedTuples:
    """Records ``(x_t, x_{t-k..t-1}, y_{t-k..t-1})`` for the binned estimator."""

    x_now: np.ndarray
    x_hist: np.ndarray
    y_hist: np.ndarray
    x_size: int
    y_size: int

    def __post_init__(self):
        object.__setattr__(self, "x_now", _readonly(self.x_now, np.int64))
        for name in ("x_hist", "y_hist"):
            a = _readonly(getattr(self, name), np.int64)
            if a.ndim != 2 or a.shape[0] != len(self.x_now):
                raise ValueError(f"{name} must have shape (n_records, k)")
            object.__setattr__(self, name, a)

    @property
    def k(self) -> int:
        return self.x_hist.shape[1]

    def __len__(self):
        return len(self.x_now)

    def records(self):
        return [(int(a), tuple(b), tuple(c)) for a, b, c in
                zip(self.x_now, self.x_hist.tolist(), self.y_hist.tolist())]

    def with_source(self, y_hist) -> "LaggedTuples":
        return LaggedTuples(self.x_now, self.x_hist, y_hist, self.x_size, self.y_size)


def _history(symbols: np.ndarray, k: int) -> np.ndarray:
    n = len(symbols)
    return np.stack([symbols[j:n - k + j] for j in range(k)], axis=1)


def lagged_tuples(target: SymbolSequence, source: SymbolSequence, k: int = 1) -> LaggedTuples:
    n = len(target)
    if len(source) != n:
        raise ValueError(f"length mismatch: target {n}, source {len(source)}")
    if not (1 <= k < n):
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    x, y = target.symbols, source.symbols
    return LaggedTuples(x[k:], _history(x, k), _history(y, k),
                        target.alphabet.size, source.alphabet.size)
