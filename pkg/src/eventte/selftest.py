"""Release gate: oracle and invariant checks, printed as a pass/fail table."""

from __future__ import annotations

import math
import time
from typing import Callable, List, Tuple

import numpy as np

from . import analysis, infotheory, series, synth
from .ingest import ReturnSeries, SessionCalendar

LN2 = math.log(2)
Check = Callable[[int], Tuple[bool, str]]


def _rs(times, values=None, name="A") -> ReturnSeries:
    values = np.ones(len(times)) if values is None else values
    return ReturnSeries(name, None, np.asarray(times, float), np.asarray(values, float))


def check_bins(seed: int):
    s = SessionCalendar()
    a = series.bin_returns(_rs([]), 1800, s).n_bins
    b = series.bin_returns(_rs([]), 60, s).n_bins
    return (a, b) == (13, 390), f"30 min -> {a} bins, 1 min -> {b} bins"


def check_entropy_identities(seed: int):
    rng = np.random.default_rng(seed)
    worst = 0.0
    ok = abs(infotheory.entropy(np.full(8, 5)) - math.log(8)) <= 1e-12
    for _ in range(200):
        c = rng.integers(0, 20, size=(3, 4))
        c[0, 0] += 1
        h_xy = infotheory.joint_entropy(c)
        h_y = infotheory.entropy(c.sum(axis=0))
        h_x_given_y = infotheory.conditional_entropy(c, target_axes=(0,))
        worst = max(worst, abs(h_xy - (h_y + h_x_given_y)))
        ok &= (infotheory.mutual_information(c).value
               == infotheory.mutual_information(c.T).value)
        px, py = rng.integers(1, 5, size=3), rng.integers(1, 5, size=4)
        ok &= infotheory.mutual_information(np.outer(px, py)).value == 0.0
    return ok and worst <= 1e-12, f"chain-rule error {worst:.1e}"


def check_te_nonnegative(seed: int):
    rng = np.random.default_rng(seed)
    lo = math.inf
    for _ in range(2000):
        c = rng.integers(0, 6, size=(2, 2, 2))
        c[0, 0, 0] += 1
        lo = min(lo, infotheory.transfer_entropy_counts(c))
    return lo >= 0, f"min TE over fuzzed tables {lo:.2e}"


def check_null_binned(seed: int):
    rng = np.random.default_rng(seed)
    alpha = series.Alphabet.sign()
    x = series.SymbolSequence(alpha, rng.integers(0, 2, 100000))
    y = series.SymbolSequence(alpha, rng.integers(0, 2, 100000))
    r = infotheory.transfer_entropy_binned(series.lagged_tuples(x, y, 1), shuffles=100, seed=seed)
    ok = r.value <= 0.005 and abs(r.value - r.shuffle_mean) <= 3 * r.shuffle_std
    return ok, f"TE {r.value:.2e} vs shuffle {r.shuffle_mean:.2e} +- {r.shuffle_std:.1e}"


def check_copy_process(seed: int):
    rng = np.random.default_rng(seed)
    alpha = series.Alphabet.sign()
    xs = rng.integers(0, 2, 10000)
    ys = np.concatenate([[rng.integers(0, 2)], xs[:-1]])
    x, y = series.SymbolSequence(alpha, xs), series.SymbolSequence(alpha, ys)
    fwd = infotheory.transfer_entropy_binned(series.lagged_tuples(y, x, 1)).value
    rev = infotheory.transfer_entropy_binned(series.lagged_tuples(x, y, 1)).value
    return abs(fwd - LN2) <= 0.01 and rev <= 0.01, f"X->Y {fwd:.4f}, Y->X {rev:.4f}"


def check_markov_oracle(seed: int):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(10):
        spec = synth.random_kernel(rng)
        x, y = synth.gen_markov(spec, 100000, seed=seed + i)
        est = infotheory.transfer_entropy_binned(series.lagged_tuples(x, y, 1)).value
        worst = max(worst, abs(est - synth.oracle_te_markov(spec)))
    spec = synth.copy_kernel(0.1)
    noisy = synth.oracle_te_markov(spec, "x->y")
    expect = LN2 - synth.binary_entropy(0.1)
    x, y = synth.gen_markov(spec, 100000, seed=seed)
    est = infotheory.transfer_entropy_binned(series.lagged_tuples(y, x, 1)).value
    ok = worst <= 0.01 and abs(noisy - expect) <= 1e-12 and abs(est - expect) <= 0.01
    return ok, f"max |est - oracle| {worst:.4f}; noisy copy {est:.4f} vs {expect:.4f}"


def check_alignment(seed: int):
    alpha = series.Alphabet.sign()
    t = _rs([2, 5, 9])
    a = series.align_events(t, _rs([1, 3, 4, 8]), alpha)
    b = series.align_events(t, _rs([1]), alpha)
    c = series.align_events(_rs([2, 5]), _rs([7]), alpha)
    ok = ([(r[3], r[4], r[5]) for r in a.records()] == [(5, 2, 4), (9, 5, 8)]
          and [(r[3], r[4], r[5]) for r in b.records()] == [(5, 2, 1), (9, 5, 1)]
          and len(c) == 0)
    return ok, "hand-traced fixtures"


def check_event_discrimination(seed: int):
    alpha = series.Alphabet.sign()
    src, tgt = synth.gen_event_pair(synth.EventStreamSpec(coupling="copy", seed=seed))
    r = infotheory.transfer_entropy_event(series.align_events(tgt, src, alpha), 100, seed)
    false_pos = 0
    for s in range(20):
        src, tgt = synth.gen_event_pair(synth.EventStreamSpec(coupling="none", seed=seed + s))
        rn = infotheory.transfer_entropy_event(series.align_events(tgt, src, alpha), 100, s)
        false_pos += rn.significant()
    ok = r.value >= 0.5 and r.significant() and false_pos <= 2
    return ok, f"copy TE {r.value:.3f}; {false_pos}/20 uncoupled flagged"


def check_networks(seed: int):
    n = 31
    rng = np.random.default_rng(seed)
    vals = rng.random((n, n))
    np.fill_diagonal(vals, 0.0)
    m = analysis.PairMatrix(None, [f"S{i}" for i in range(n)], "te_event", vals,
                            np.ones((n, n), dtype=np.int64))
    top = analysis.extract_network(m, analysis.ThresholdRule.top_quantile(0.1))
    two = analysis.PairMatrix(None, ["A", "B"], "te_event", np.array([[0, 0.06], [0.04, 0]]),
                              np.ones((2, 2), dtype=np.int64))
    te = analysis.extract_network(two, analysis.ThresholdRule.absolute(0.05))
    ok = len(top.edges) == 93 and len(te.edges) == 1
    return ok, f"top 10% of 930 -> {len(top.edges)} edges; theta 0.05 -> {len(te.edges)}"


def check_regime(seed: int):
    spec = synth.RegimeSpec(seed=seed)
    days = list(synth.gen_regime_change(spec).values())
    pooled = np.concatenate([d.values for d in days])
    q4 = series.Alphabet.quantile(pooled, 4)
    hq = [analysis.daily_entropy(d, q4) for d in days]
    hs = [analysis.daily_entropy(d, series.Alphabet.sign()) for d in days]
    c = spec.change_day
    dq = float(np.mean(hq[c:]) - np.mean(hq[:c]))
    ds = float(np.mean(hs[c:]) - np.mean(hs[:c]))
    return abs(dq) >= 0.1 and abs(ds) <= 0.02, f"quantile shift {dq:.3f}, sign shift {ds:.4f}"


CHECKS: List[Tuple[str, Check]] = [
    ("bin arithmetic", check_bins),
    ("entropy identities", check_entropy_identities),
    ("TE non-negativity", check_te_nonnegative),
    ("independent null (binned)", check_null_binned),
    ("copy-process oracle", check_copy_process),
    ("Markov brute-force oracle", check_markov_oracle),
    ("event alignment fixtures", check_alignment),
    ("event TE discrimination", check_event_discrimination),
    ("network thresholds", check_networks),
    ("regime-change entropy shift", check_regime),
]


def run_selftest(seed: int = 0, out=None) -> int:
    import sys
    out = out or sys.stdout
    failures = 0
    t_all = time.perf_counter()
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn(seed)
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<30s} {time.perf_counter() - t0:6.2f}s  {detail}",
              file=out)
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} passed in "
          f"{time.perf_counter() - t_all:.1f}s", file=out)
    return 0 if failures == 0 else 1
