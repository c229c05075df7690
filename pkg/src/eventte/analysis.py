"""Per-day pairwise measurements across an instrument universe.

Matrices are indexed ``[source, target]`` for the directed measures and are
symmetric for correlation and mutual information. Missing entries are NaN
with a sample count of 0.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import infotheory
from .infotheory import DEFAULT_SHUFFLES, DEFAULT_SIGNIFICANCE, MeasureResult
from .ingest import ReturnSeries, SessionCalendar
from .series import (AlphabetSpec, BinnedSeries, align_events, bin_returns,
                     lagged_tuples, symbolize)

KINDS = ("pearson", "mi", "te_binned", "te_event")
DIRECTED = ("te_binned", "te_event")


def pearson(x, y) -> float:
    """Correlation with population normalization; NaN if either input is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-d sequences of equal length")
    if len(x) < 2:
        raise ValueError("pearson needs at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = math.fsum((dx * dx).tolist())
    syy = math.fsum((dy * dy).tolist())
    if sxx == 0 or syy == 0:
        return math.nan
    sxy = math.fsum((dx * dy).tolist())
    r = sxy / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def sliding_pearson(x: BinnedSeries, y: BinnedSeries, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Trailing-window correlation.

    Returns ``(positions, r)`` where ``positions`` are window end bins
    ``k - 1 .. n - 1``; undefined windows are NaN.
    """
    if x.delta_t != y.delta_t or len(x) != len(y):
        raise ValueError("binned series must share delta_t and bin count")
    n = len(x)
    if not (2 <= k <= n):
        raise ValueError(f"window must satisfy 2 <= k <= {n}, got {k}")
    pos = np.arange(k - 1, n)
    r = np.array([pearson(x.values[t - k + 1:t + 1], y.values[t - k + 1:t + 1]) for t in pos])
    return pos, r


def daily_entropy(values, alphabet) -> float:
    """Plug-in entropy of one day's symbolized values (NaN on an empty day).

    ``values`` may be a :class:`ReturnSeries`, a :class:`BinnedSeries` or an
    array. ``alphabet`` is a fitted :class:`Alphabet` or an
    :class:`AlphabetSpec`, which is then fitted on these same values.
    """
    binned = isinstance(values, BinnedSeries)
    if isinstance(values, (ReturnSeries, BinnedSeries)):
        values = values.values
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan
    if isinstance(alphabet, AlphabetSpec):
        alphabet = alphabet.fit(values, binned=binned)
    sym = symbolize(values, alphabet)
    return infotheory.entropy(np.bincount(sym.symbols, minlength=alphabet.size))


# Configuration and seeding -------------------------------------------------

@dataclass
class AnalysisConfig:
    session: SessionCalendar = field(default_factory=SessionCalendar)
    delta_t: float = 1800.0
    alphabet: AlphabetSpec = field(default_factory=AlphabetSpec)
    lag: int = 1
    te_mode: str = "event"
    shuffles: int = DEFAULT_SHUFFLES
    significance: float = DEFAULT_SIGNIFICANCE
    min_records: int = 30
    seed: int = 0
    threads: int = 1

    def kinds(self) -> Tuple[str, ...]:
        te = {"event": ("te_event",), "binned": ("te_binned",),
              "both": ("te_binned", "te_event")}[self.te_mode]
        return ("pearson", "mi") + te


def _crc(text: str) -> int:
    return zlib.crc32(text.encode("utf-8"))


def pair_seed(seed: int, day, kind: str, source: str, target: str) -> np.random.SeedSequence:
    """Seed sub-stream named by (day, kind, source, target).

    Naming by identifiers instead of positions means adding instruments to a
    universe does not disturb the draws of existing pairs.
    """
    key = (_crc(str(day)), _crc(kind), _crc(source), _crc(target))
    return np.random.SeedSequence(int(seed), spawn_key=key)


# Matrices ---------------------------------------------------------------------

@dataclass(eq=False)
class PairMatrix:
    day: Optional[dt.date]
    instruments: List[str]
    kind: str
    values: np.ndarray
    counts: np.ndarray
    shuffle_mean: Optional[np.ndarray] = None
    shuffle_std: Optional[np.ndarray] = None

    @property
    def directed(self) -> bool:
        return self.kind in DIRECTED

    def significant(self, multiplier: float = DEFAULT_SIGNIFICANCE) -> np.ndarray:
        """Boolean mask of entries above ``shuffle_mean + multiplier * shuffle_std``."""
        if self.shuffle_mean is None:
            return np.zeros(self.values.shape, dtype=bool)
        with np.errstate(invalid="ignore"):
            thresh = self.shuffle_mean + multiplier * self.shuffle_std
            return np.nan_to_num(self.values, nan=-np.inf) > np.nan_to_num(thresh, nan=np.inf)

    def candidates(self) -> List[Tuple[int, int, float]]:
        """Defined off-diagonal links in row-major index order."""
        n = len(self.instruments)
        out = []
        for i in range(n):
            for j in range(n):
                if i == j or (not self.directed and j < i):
                    continue
                v = self.values[i, j]
                if not math.isnan(v):
                    out.append((i, j, float(v)))
        return out


def _empty(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.full((n, n), np.nan), np.zeros((n, n), dtype=np.int64)


def pair_matrices(day_data: Mapping[str, ReturnSeries], config: Optional[AnalysisConfig] = None,
                  day=None) -> Dict[str, PairMatrix]:
    """All configured pair measures for one day.

    ``day_data`` maps instrument id to that day's return series; instruments
    are indexed in sorted id order. Correlation and mutual information use
    the ``delta_t`` grid; te_event uses event alignment; te_binned uses the
    ``delta_t`` grid with lag ``config.lag``. Pairs with fewer than
    ``config.min_records`` records are left missing.
    """
    config = config or AnalysisConfig()
    names = sorted(n for n, s in day_data.items() if len(s) > 0)
    if day is None and names:
        day = day_data[names[0]].day
    n = len(names)
    kinds = config.kinds()

    binned = {nm: bin_returns(day_data[nm], config.delta_t, config.session) for nm in names}
    bin_alpha = {nm: config.alphabet.fit(binned[nm].values, binned=True) for nm in names}
    bin_sym = {nm: symbolize(binned[nm].values, bin_alpha[nm]) for nm in names}
    ev_alpha = {nm: config.alphabet.fit(day_data[nm].values) for nm in names}

    out: Dict[str, PairMatrix] = {}
    for kind in ("pearson", "mi"):
        vals, cnts = _empty(n)
        for i in range(n):
            vals[i, i] = 1.0 if kind == "pearson" else math.nan
            for j in range(i + 1, n):
                a, b = names[i], names[j]
                if kind == "pearson":
                    v = pearson(binned[a].values, binned[b].values)
                else:
                    jc = infotheory.JointCounts.from_columns(
                        [bin_sym[a].symbols, bin_sym[b].symbols],
                        (bin_alpha[a].size, bin_alpha[b].size))
                    v = infotheory.mutual_information(jc).value
                vals[i, j] = vals[j, i] = v
                cnts[i, j] = cnts[j, i] = len(binned[a]) if not math.isnan(v) else 0
        if kind == "pearson":
            # self-correlation is 1 unless the series is flat on the grid
            for i in range(n):
                if np.all(binned[names[i]].values == binned[names[i]].values[0]):
                    vals[i, i] = math.nan
        else:
            for i in range(n):
                s = bin_sym[names[i]].symbols
                vals[i, i] = infotheory.entropy(np.bincount(s, minlength=bin_alpha[names[i]].size))
                cnts[i, i] = len(s)
        out[kind] = PairMatrix(day, list(names), kind, vals, cnts)

    def task(kind: str, i: int, j: int) -> Optional[MeasureResult]:
        src, tgt = names[i], names[j]
        if kind == "te_event":
            tuples = align_events(day_data[tgt], day_data[src], ev_alpha[tgt], ev_alpha[src])
        else:
            if config.lag >= len(bin_sym[tgt]):
                return None
            tuples = lagged_tuples(bin_sym[tgt], bin_sym[src], config.lag)
        if len(tuples) < max(1, config.min_records):
            return None
        seed = pair_seed(config.seed, day, kind, src, tgt)
        fn = (infotheory.transfer_entropy_event if kind == "te_event"
              else infotheory.transfer_entropy_binned)
        return fn(tuples, shuffles=config.shuffles, seed=seed)

    jobs = [(kind, i, j) for kind in kinds if kind in DIRECTED
            for i in range(n) for j in range(n) if i != j]
    if config.threads and config.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda a: task(*a), jobs))
    else:
        results = [task(*a) for a in jobs]

    for kind in kinds:
        if kind not in DIRECTED:
            continue
        vals, cnts = _empty(n)
        smean, sstd = np.full((n, n), np.nan), np.full((n, n), np.nan)
        for i in range(n):
            vals[i, i] = 0.0
        out[kind] = PairMatrix(day, list(names), kind, vals, cnts, smean, sstd)
    for (kind, i, j), res in zip(jobs, results):
        if res is None:
            continue
        m = out[kind]
        m.values[i, j] = res.value
        m.counts[i, j] = res.n_samples
        if res.shuffle_mean is not None:
            m.shuffle_mean[i, j] = res.shuffle_mean
            m.shuffle_std[i, j] = res.shuffle_std
    return {k: out[k] for k in kinds}


# Aggregates -------------------------------------------------------------------

@dataclass(frozen=True)
class DailyAggregate:
    day: Optional[dt.date]
    mean_te: float
    max_te: float
    max_source: Optional[str]
    max_target: Optional[str]
    shuffle_mean: float


def aggregates(matrix: PairMatrix) -> DailyAggregate:
    """Mean and max over defined ordered pairs of a TE matrix.

    The argmax is the first maximal entry in row-major order, i.e. lowest
    source index then lowest target index. ``shuffle_mean`` is the mean of the
    per-pair surrogate means over the same pairs (NaN if unavailable).
    """
    cands = matrix.candidates()
    if not cands:
        return DailyAggregate(matrix.day, math.nan, math.nan, None, None, math.nan)
    vals = [v for _, _, v in cands]
    mean = math.fsum(vals) / len(vals)
    best = max(range(len(cands)), key=lambda k: (cands[k][2], -k))
    bi, bj, bv = cands[best]
    smean = math.nan
    if matrix.shuffle_mean is not None:
        sm = [matrix.shuffle_mean[i, j] for i, j, _ in cands
              if not math.isnan(matrix.shuffle_mean[i, j])]
        if sm:
            smean = math.fsum(sm) / len(sm)
    return DailyAggregate(matrix.day, mean, bv, matrix.instruments[bi],
                          matrix.instruments[bj], smean)


# Networks ---------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdRule:
    """``absolute`` keeps weights strictly above ``value``; ``top_quantile``
    keeps the ``ceil(value * M)`` heaviest of ``M`` candidate links."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("absolute", "top_quantile"):
            raise ValueError(f"unknown threshold rule {self.kind!r}")
        if self.kind == "top_quantile" and not (0 < self.value <= 1):
            raise ValueError("top-quantile fraction must lie in (0, 1]")

    @classmethod
    def absolute(cls, theta: float) -> "ThresholdRule":
        return cls("absolute", float(theta))

    @classmethod
    def top_quantile(cls, q: float) -> "ThresholdRule":
        return cls("top_quantile", float(q))


@dataclass
class Node:
    instrument: str
    in_weight: float
    out_weight: float


@dataclass
class Network:
    directed: bool
    nodes: List[Node]
    edges: List[Tuple[str, str, float]]
    threshold: float
    rule: str
    kind: str = ""
    day: Optional[dt.date] = None

    def to_json(self) -> str:
        doc = {
            "day": None if self.day is None else str(self.day),
            "kind": self.kind,
            "directed": self.directed,
            "threshold": self.threshold,
            "threshold_rule": self.rule,
            "nodes": [{"instrument": n.instrument, "in_weight": n.in_weight,
                       "out_weight": n.out_weight} for n in self.nodes],
            "edges": [{"source": s, "target": t, "weight": w} for s, t, w in self.edges],
        }
        return json.dumps(doc, indent=2, allow_nan=False)


def _quantile_count(q: float, m: int) -> int:
    return math.ceil(Fraction(str(q)) * m)


def extract_network(matrix: PairMatrix, rule: ThresholdRule) -> Network:
    """Weighted graph from a pair matrix.

    For undirected kinds each pair is a single candidate and a node's in- and
    out-weight both equal its total incident weight.
    """
    cands = matrix.candidates()
    if rule.kind == "absolute":
        kept = [c for c in cands if c[2] > rule.value]
        threshold = rule.value
    else:
        count = _quantile_count(rule.value, len(cands))
        ranked = sorted(cands, key=lambda c: (-c[2], c[0], c[1]))
        kept = sorted(ranked[:count], key=lambda c: (c[0], c[1]))
        threshold = min((c[2] for c in kept), default=math.nan)
    names = matrix.instruments
    w_in = [0.0] * len(names)
    w_out = [0.0] * len(names)
    for i, j, w in kept:
        w_out[i] += w
        w_in[j] += w
        if not matrix.directed:
            w_out[j] += w
            w_in[i] += w
    nodes = [Node(nm, w_in[k], w_out[k]) for k, nm in enumerate(names)]
    edges = [(names[i], names[j], w) for i, j, w in kept]
    return Network(matrix.directed, nodes, edges, threshold, rule.kind, matrix.kind, matrix.day)


# CSV io -------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def matrix_to_csv(matrix: PairMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([matrix.kind] + matrix.instruments)
    for i, name in enumerate(matrix.instruments):
        w.writerow([name] + [_fmt(v) for v in matrix.values[i]])
    return buf.getvalue()


def matrix_from_csv(text: str, day=None) -> PairMatrix:
    """Inverse of :func:`matrix_to_csv` (sample counts are not stored)."""
    rows = list(csv.reader(io.StringIO(text)))
    kind, names = rows[0][0], rows[0][1:]
    n = len(names)
    vals = np.full((n, n), np.nan)
    for i, row in enumerate(rows[1:1 + n]):
        if row[0] != names[i]:
            raise ValueError(f"row {i + 1} label {row[0]!r} does not match column {names[i]!r}")
        for j, cell in enumerate(row[1:]):
            if cell != "":
                vals[i, j] = float(cell)
    cnts = np.where(np.isnan(vals), 0, 1).astype(np.int64)
    return PairMatrix(day, names, kind, vals, cnts)


AGGREGATE_COLUMNS = ("day", "mean_te", "max_te", "max_source", "max_target", "shuffle_mean")


def aggregates_to_csv(rows: Sequence[DailyAggregate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_COLUMNS)
    for a in rows:
        w.writerow(["" if a.day is None else str(a.day), _fmt(a.mean_te), _fmt(a.max_te),
                    a.max_source or "", a.max_target or "", _fmt(a.shuffle_mean)])
    return buf.getvalue()


def edges_to_csv(net: Network) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("source", "target", "weight"))
    for s, t, wt in net.edges:
        w.writerow((s, t, repr(float(wt))))
    return buf.getvalue()


def nodes_to_csv(net: Network) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("instrument", "in_weight", "out_weight"))
    for nd in net.nodes:
        w.writerow((nd.instrument, repr(nd.in_weight), repr(nd.out_weight)))
    return buf.getvalue()
