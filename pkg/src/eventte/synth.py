"""Synthetic streams with known information flow, and brute-force TE oracles.

Generators:

* ``gen_markov`` samples a joint two-variable Markov chain on a small
  alphabet, for which :func:`oracle_te_markov` gives the exact lag-1 TE.
* ``gen_gaussian_ar`` couples a Gaussian target to the lagged driver with a
  tunable strength; after sign symbolization its TE grows with the coupling.
* ``gen_event_pair`` draws two asynchronous Poisson tick streams whose target
  signs are tied to the most recent earlier source sign.
* ``gen_regime_change`` produces a run of days whose minimum price increment
  halves at a change day while the sign process is unchanged.

Generators emit prices on a tick grid with millisecond timestamps, so their
output survives a round trip through the tick-CSV format unchanged.
"""

from __future__ import annotations

import datetime as dt
import math
import warnings
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .ingest import ReturnSeries, TickEvent, TickSeries, to_returns
from .series import Alphabet, SymbolSequence

SESSION_LENGTH = 23400.0
DEFAULT_DAY = dt.date(1997, 6, 16)


class InvalidSpecError(ValueError):
    pass


class EmptyResultError(ValueError):
    pass


# Markov chains ------------------------------------------------------------------

@dataclass(eq=False)
class MarkovSpec:
    """Joint kernel ``kernel[x, y, x_next, y_next]`` over ``states`` symbols each."""

    states: int
    kernel: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float)
        s = self.states
        if k.shape != (s, s, s, s):
            raise InvalidSpecError(f"kernel must have shape {(s, s, s, s)}, got {k.shape}")
        if np.any(k < 0) or np.any(k > 1):
            raise InvalidSpecError("kernel probabilities must lie in [0, 1]")
        rows = k.reshape(s * s, s * s).sum(axis=1)
        if np.any(np.abs(rows - 1) > 1e-12):
            raise InvalidSpecError("kernel rows must sum to 1")
        self.kernel = k

    @property
    def matrix(self) -> np.ndarray:
        s = self.states
        return self.kernel.reshape(s * s, s * s)

    def to_dict(self) -> dict:
        return {"states": self.states, "kernel": self.kernel.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "MarkovSpec":
        return cls(int(doc["states"]), np.asarray(doc["kernel"], dtype=float))


def independent_kernel(px: np.ndarray, py: np.ndarray) -> MarkovSpec:
    """Each component evolves by its own transition matrix, ignoring the other."""
    px, py = np.asarray(px, float), np.asarray(py, float)
    s = px.shape[0]
    k = np.einsum("xa,yb->xyab", px, py)
    return MarkovSpec(s, k)


def copy_kernel(eps: float = 0.0, states: int = 2) -> MarkovSpec:
    """x is i.i.d. uniform; y_next equals x with prob ``1 - eps``, else another symbol."""
    s = states
    k = np.zeros((s, s, s, s))
    for x in range(s):
        for y in range(s):
            for xn in range(s):
                for yn in range(s):
                    p_y = (1 - eps) if yn == x else eps / (s - 1)
                    k[x, y, xn, yn] = p_y / s
    return MarkovSpec(s, k)


def random_kernel(rng: np.random.Generator, states: int = 2, alpha: float = 1.0) -> MarkovSpec:
    """Kernel with Dirichlet(alpha) rows over the joint next state."""
    s = states
    m = rng.dirichlet(np.full(s * s, alpha), size=s * s)
    m /= m.sum(axis=1, keepdims=True)
    return MarkovSpec(s, m.reshape(s, s, s, s))


def stationary(spec: MarkovSpec, tol: float = 1e-12, max_steps: int = 10 ** 6) -> np.ndarray:
    """Stationary distribution over joint states ``x * states + y`` by power iteration.

    The iterate after ``2**j`` steps is read off the squared matrix
    ``P**(2**j)``, so the ``max_steps`` budget costs only ``log2(max_steps)``
    products. Convergence means one more step moves the iterate by less
    than ``tol``.
    """
    P = spec.matrix
    start = np.full(P.shape[0], 1.0 / P.shape[0])
    Q, steps = P, 1
    while steps <= max_steps:
        pi = start @ Q
        pi /= pi.sum()
        if np.max(np.abs(pi @ P - pi)) < tol:
            return pi
        Q = Q @ Q
        steps *= 2
    raise InvalidSpecError("power iteration did not converge; kernel is not ergodic")


def gen_markov(spec: MarkovSpec, n: int, seed=0) -> Tuple[SymbolSequence, SymbolSequence]:
    """Sample ``n`` steps of the joint chain, started from stationarity."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    pi = stationary(spec)
    cum = np.cumsum(spec.matrix, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(n)
    states = np.empty(n, dtype=np.int64)
    cur = int(np.searchsorted(np.cumsum(pi), u[0], side="right"))
    cur = min(cur, len(pi) - 1)
    states[0] = cur
    for t in range(1, n):
        cur = int(np.searchsorted(cum[cur], u[t], side="right"))
        states[t] = cur
    s = spec.states
    alpha = _symbol_alphabet(s)
    return SymbolSequence(alpha, states // s), SymbolSequence(alpha, states % s)


def _symbol_alphabet(states: int) -> Alphabet:
    if states == 2:
        return Alphabet.sign()
    if states == 3:
        return Alphabet.sign(with_zero=True)
    return Alphabet("quantile", states, np.arange(1, states) - 0.5)


def oracle_te_markov(spec: MarkovSpec, direction: str = "y->x") -> float:
    """Exact lag-1 TE of the stationary chain, by summation over all states.

    ``direction="y->x"`` is ``sum p(x', x, y) log(p(x'|x, y) / p(x'|x))`` with
    target x and source y; ``"x->y"`` swaps the roles.
    """
    if direction not in ("y->x", "x->y"):
        raise ValueError("direction must be 'y->x' or 'x->y'")
    s = spec.states
    pi = stationary(spec).reshape(s, s)
    k = spec.kernel
    if direction == "x->y":
        pi = pi.T
        k = np.transpose(k, (1, 0, 3, 2))
    # p(x_next | x, y) marginalizes out y_next
    p_next = k.sum(axis=3)
    joint = pi[:, :, None] * p_next                       # p(x, y, x')
    p_x = joint.sum(axis=(1, 2))
    p_xxn = joint.sum(axis=1)                             # p(x, x')
    terms = []
    for x in range(s):
        for y in range(s):
            for xn in range(s):
                pj = joint[x, y, xn]
                if pj <= 0:
                    continue
                cond_full = p_next[x, y, xn]
                cond_self = p_xxn[x, xn] / p_x[x]
                terms.append(pj * math.log(cond_full / cond_self))
    return max(math.fsum(terms), 0.0)


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -(p * math.log(p) + (1 - p) * math.log(1 - p))


def gen_gaussian_ar(coupling: float, n: int, seed=0) -> Tuple[np.ndarray, np.ndarray]:
    """Driver ``x`` of i.i.d. standard normals and ``y_t = c x_{t-1} + sqrt(1 - c^2) e_t``.

    Both outputs have unit variance; ``c`` is the lag-one cross-correlation.
    """
    if not (-1 <= coupling <= 1):
        raise InvalidSpecError("coupling must lie in [-1, 1]")
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    e = rng.standard_normal(n)
    y = np.empty(n)
    y[0] = e[0]
    y[1:] = coupling * x[:-1] + math.sqrt(1 - coupling ** 2) * e[1:]
    return x, y


# Event streams ------------------------------------------------------------------

COUPLINGS = ("copy", "anti", "noisy", "none")


@dataclass
class EventStreamSpec:
    """Two Poisson tick streams; the target's sign follows ``coupling``.

    ``copy`` repeats the most recent strictly-earlier source sign, ``anti``
    negates it, ``noisy`` copies it with probability ``1 - eps``, and ``none``
    draws fair signs. A target event with no earlier source event gets a fair
    sign.
    """

    rate_source: float = 2.0
    rate_target: float = 0.25
    coupling: str = "copy"
    eps: float = 0.1
    session_length: float = SESSION_LENGTH
    tick: float = 1.0 / 16
    start_price: float = 100.0
    seed: int = 0
    day: dt.date = DEFAULT_DAY
    source_name: str = "SRC"
    target_name: str = "TGT"

    def __post_init__(self):
        if not (self.rate_source > 0 and self.rate_target > 0):
            raise InvalidSpecError("arrival rates must be positive")
        if self.coupling not in COUPLINGS:
            raise InvalidSpecError(f"coupling must be one of {COUPLINGS}")
        if not self.session_length > 0:
            raise InvalidSpecError("session length must be positive")


def poisson_times(rng: np.random.Generator, rate: float, length: float) -> np.ndarray:
    """Sorted distinct millisecond arrival times in ``(0, length]``."""
    n = rng.poisson(rate * length)
    ms = np.sort(rng.uniform(0.0, length, size=n))
    ms = np.unique(np.clip(np.ceil(ms * 1000), 1, round(length * 1000)).astype(np.int64))
    return ms / 1000


def _walk(name: str, day, times: np.ndarray, moves: np.ndarray, start: float) -> TickSeries:
    prices = start + np.concatenate([[0.0], np.cumsum(moves)])
    if np.any(prices <= 0):
        raise EmptyResultError("price path went non-positive; raise start_price")
    all_times = np.concatenate([[0.0], times])
    events = tuple(TickEvent(float(t), float(p), i)
                   for i, (t, p) in enumerate(zip(all_times, prices)))
    return TickSeries(name, day, events)


def gen_event_ticks(spec: EventStreamSpec) -> Tuple[TickSeries, TickSeries]:
    """Source and target tick series; each opens with an anchor tick at time 0."""
    rng = np.random.default_rng(spec.seed)
    ts = poisson_times(rng, spec.rate_source, spec.session_length)
    tt = poisson_times(rng, spec.rate_target, spec.session_length)
    if len(ts) == 0 or len(tt) == 0:
        raise EmptyResultError("no events generated")
    s_sign = rng.choice(np.array([-1, 1]), size=len(ts))
    fair = rng.choice(np.array([-1, 1]), size=len(tt))
    flip = rng.random(len(tt)) < spec.eps
    j = np.searchsorted(ts, tt, side="left") - 1
    has = j >= 0
    prev = np.where(has, s_sign[np.maximum(j, 0)], 0)
    if spec.coupling == "copy":
        t_sign = np.where(has, prev, fair)
    elif spec.coupling == "anti":
        t_sign = np.where(has, -prev, fair)
    elif spec.coupling == "noisy":
        t_sign = np.where(has, np.where(flip, -prev, prev), fair)
    else:
        t_sign = fair
    src = _walk(spec.source_name, spec.day, ts, s_sign * spec.tick, spec.start_price)
    tgt = _walk(spec.target_name, spec.day, tt, t_sign * spec.tick, spec.start_price)
    return src, tgt


def gen_event_pair(spec: EventStreamSpec) -> Tuple[ReturnSeries, ReturnSeries]:
    """``(source, target)`` return series for an event-stream spec."""
    src, tgt = gen_event_ticks(spec)
    return to_returns(src), to_returns(tgt)


def gen_independent_universe(n_instruments: int, rate: float, seed=0,
                             day: dt.date = DEFAULT_DAY,
                             session_length: float = SESSION_LENGTH,
                             tick: float = 1.0 / 16) -> List[TickSeries]:
    """Mutually independent fair-sign Poisson tick series."""
    ss = np.random.SeedSequence(seed)
    out = []
    for k, child in enumerate(ss.spawn(n_instruments)):
        rng = np.random.default_rng(child)
        t = poisson_times(rng, rate, session_length)
        moves = rng.choice(np.array([-1.0, 1.0]), size=len(t)) * tick
        out.append(_walk(f"S{k + 1:02d}", day, t, moves, 100.0))
    return out


# Regime change ------------------------------------------------------------------

@dataclass
class RegimeSpec:
    """Days of fair-sign moves whose sizes are geometric multiples of a tick.

    A move of ``k`` ticks is the log return ``k * tick / start_price``, so
    equal tick counts give bit-identical returns regardless of price level.
    The tick is ``tick_before`` up to ``change_day`` (exclusive) and
    ``tick_after`` from it on: moves halve at the change while the sign
    process stays the same. Every day opens at ``start_price``.
    """

    n_days: int = 20
    change_day: int = 10
    rate: float = 0.1
    tick_before: float = 1.0 / 8
    tick_after: float = 1.0 / 16
    size_p: float = 0.5
    start_price: float = 100.0
    start_day: dt.date = dt.date(1997, 6, 2)
    instrument: str = "IDX"
    session_length: float = SESSION_LENGTH
    seed: int = 0

    def __post_init__(self):
        if self.n_days < 1:
            raise InvalidSpecError("n_days must be >= 1")
        if not (0 <= self.change_day < self.n_days):
            raise InvalidSpecError("change day must lie within the generated range")
        if not self.rate > 0:
            raise InvalidSpecError("rate must be positive")


def trading_days(start: dt.date, n: int) -> List[dt.date]:
    days, d = [], start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def gen_regime_change(spec: RegimeSpec) -> Dict[dt.date, ReturnSeries]:
    """Per-day return series of one instrument across the change."""
    if spec.change_day == 0:
        warnings.warn("regime change at day 0 leaves no 'before' period", stacklevel=2)
    ss = np.random.SeedSequence(spec.seed)
    out = {}
    for d, (day, child) in enumerate(zip(trading_days(spec.start_day, spec.n_days),
                                         ss.spawn(spec.n_days))):
        rng = np.random.default_rng(child)
        t = poisson_times(rng, spec.rate, spec.session_length)
        signs = rng.choice(np.array([-1.0, 1.0]), size=len(t))
        sizes = rng.geometric(spec.size_p, size=len(t))
        tick = spec.tick_before if d < spec.change_day else spec.tick_after
        out[day] = ReturnSeries(spec.instrument, day, t, signs * (sizes * (tick / spec.start_price)))
    return out


def gen_regime_ticks(spec: RegimeSpec) -> List[TickSeries]:
    """Tick series reproducing :func:`gen_regime_change` (returns to ~1e-12)."""
    out = []
    for day, rs in gen_regime_change(spec).items():
        logp = math.log(spec.start_price) + np.concatenate([[0.0], np.cumsum(rs.values)])
        times = np.concatenate([[0.0], rs.times])
        events = tuple(TickEvent(float(t), float(p), i)
                       for i, (t, p) in enumerate(zip(times, np.exp(logp))))
        out.append(TickSeries(spec.instrument, day, events))
    return out


# Markov chain -> ticks ----------------------------------------------------------

def symbols_to_moves(symbols: np.ndarray, states: int) -> np.ndarray:
    """Signed tick multiples for chain symbols.

    Binary chains map to down/up. Larger alphabets map symbol ``s`` to
    ``s - states // 2`` ticks, skipping 0 when ``states`` is even; on odd
    alphabets the middle symbol is a zero move and produces no return event.
    """
    half = states // 2
    moves = symbols - half
    if states % 2 == 0:
        moves = np.where(moves >= 0, moves + 1, moves)
    return moves.astype(float)


def markov_ticks(spec: MarkovSpec, n: int, seed=0, tick: float = 1.0 / 16,
                 start_day: dt.date = DEFAULT_DAY, spacing: float = 1.0,
                 session_length: float = SESSION_LENGTH) -> List[TickSeries]:
    """Both chain components as tick series ``X`` and ``Y`` sampled every ``spacing`` s.

    Steps that do not fit in one session continue on the next trading day.
    """
    x, y = gen_markov(spec, n, seed)
    per_day = int(session_length // spacing)
    out = []
    n_days = math.ceil(n / per_day)
    price = {"X": 100.0, "Y": 100.0}
    for d, day in enumerate(trading_days(start_day, n_days)):
        lo, hi = d * per_day, min(n, (d + 1) * per_day)
        times = np.round(np.arange(1, hi - lo + 1) * spacing * 1000) / 1000
        for name, seq in (("X", x), ("Y", y)):
            moves = symbols_to_moves(seq.symbols[lo:hi], spec.states) * tick
            ts = _walk(name, day, times, moves, price[name])
            price[name] = ts.events[-1].price
            out.append(ts)
    return out
