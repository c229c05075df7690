import io
import math
import warnings

import numpy as np
import pytest

from eventte import infotheory as it
from eventte import synth
from eventte.analysis import AnalysisConfig, daily_entropy, pair_matrices
from eventte.ingest import parse_ticks, to_returns, write_ticks
from eventte.series import Alphabet, align_events, lagged_tuples, symbolize

LN2 = math.log(2)


def cycle_kernel():
    """Joint states 0 -> 1 -> 2 -> 0 with 3 -> 0: periodic, so power iteration oscillates."""
    nxt = {0: 1, 1: 2, 2: 0, 3: 0}
    k = np.zeros((4, 4))
    for a, b in nxt.items():
        k[a, b] = 1.0
    return synth.MarkovSpec(2, k.reshape(2, 2, 2, 2))


def test_kernel_rows_must_sum_to_one():
    k = synth.copy_kernel().kernel.copy()
    k[0, 0, 0, 0] += 1e-9
    with pytest.raises(synth.InvalidSpecError):
        synth.MarkovSpec(2, k)
    with pytest.raises(synth.InvalidSpecError):
        synth.MarkovSpec(2, np.ones((2, 2, 2)))


def test_spec_dict_round_trip():
    spec = synth.random_kernel(np.random.default_rng(0))
    back = synth.MarkovSpec.from_dict(spec.to_dict())
    assert np.array_equal(back.kernel, spec.kernel)


def test_stationary_is_fixed_point():
    spec = synth.random_kernel(np.random.default_rng(1))
    pi = synth.stationary(spec)
    assert np.allclose(pi @ spec.matrix, pi, atol=1e-11)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_non_convergent_kernel_is_invalid():
    spec = cycle_kernel()
    with pytest.raises(synth.InvalidSpecError):
        synth.stationary(spec, max_steps=1000)
    with pytest.raises(synth.InvalidSpecError):
        synth.oracle_te_markov(spec)


def test_independent_components_have_vanishing_mi():
    px = np.array([[0.7, 0.3], [0.4, 0.6]])
    py = np.array([[0.2, 0.8], [0.5, 0.5]])
    x, y = synth.gen_markov(synth.independent_kernel(px, py), 100000, seed=3)
    jc = it.JointCounts.from_columns([x.symbols, y.symbols], (2, 2))
    assert it.mutual_information(jc).value <= 0.01


def test_copy_kernel_is_deterministic_copy():
    x, y = synth.gen_markov(synth.copy_kernel(), 5000, seed=4)
    assert np.array_equal(y.symbols[1:], x.symbols[:-1])


def test_fixed_seed_reproduces_chain():
    spec = synth.random_kernel(np.random.default_rng(5))
    a = synth.gen_markov(spec, 1000, seed=9)
    b = synth.gen_markov(spec, 1000, seed=9)
    assert np.array_equal(a[0].symbols, b[0].symbols)
    assert np.array_equal(a[1].symbols, b[1].symbols)


def test_gen_markov_rejects_empty():
    with pytest.raises(ValueError):
        synth.gen_markov(synth.copy_kernel(), 0)


# oracle -------------------------------------------------------------------------

def brute_force_te(spec, direction):
    """p(x', x, y) log p(x'|x,y)/p(x'|x), built by explicit loops over the 4-d kernel."""
    s = spec.states
    pi = synth.stationary(spec).reshape(s, s)
    total = 0.0
    joint = {}
    for x in range(s):
        for y in range(s):
            for xn in range(s):
                for yn in range(s):
                    p = pi[x, y] * spec.kernel[x, y, xn, yn]
                    tgt, tgt_n, src = (x, xn, y) if direction == "y->x" else (y, yn, x)
                    joint[tgt_n, tgt, src] = joint.get((tgt_n, tgt, src), 0.0) + p
    p_ts = {}
    p_tnt = {}
    p_t = {}
    for (tn, t, sr), p in joint.items():
        p_ts[t, sr] = p_ts.get((t, sr), 0.0) + p
        p_tnt[tn, t] = p_tnt.get((tn, t), 0.0) + p
        p_t[t] = p_t.get(t, 0.0) + p
    for (tn, t, sr), p in joint.items():
        if p > 0:
            total += p * math.log((p / p_ts[t, sr]) / (p_tnt[tn, t] / p_t[t]))
    return total


def test_oracle_independent_is_zero():
    px = np.array([[0.9, 0.1], [0.3, 0.7]])
    spec = synth.independent_kernel(px, px[::-1])
    assert abs(synth.oracle_te_markov(spec)) <= 1e-12
    assert abs(synth.oracle_te_markov(spec, "x->y")) <= 1e-12


def test_oracle_copy_kernel():
    spec = synth.copy_kernel()
    assert synth.oracle_te_markov(spec, "x->y") == pytest.approx(LN2, abs=1e-12)
    assert abs(synth.oracle_te_markov(spec, "y->x")) <= 1e-12


def test_oracle_noisy_copy_closed_form():
    value = synth.oracle_te_markov(synth.copy_kernel(0.1), "x->y")
    closed = LN2 - synth.binary_entropy(0.1)
    assert closed == pytest.approx(0.368064, abs=1e-6)
    assert value == pytest.approx(closed, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("direction", ["y->x", "x->y"])
def test_oracle_matches_independent_brute_force(seed, direction):
    spec = synth.random_kernel(np.random.default_rng(seed), states=3 if seed % 2 else 2)
    assert synth.oracle_te_markov(spec, direction) == pytest.approx(
        brute_force_te(spec, direction), abs=1e-12)


def test_rejects_unknown_direction():
    with pytest.raises(ValueError):
        synth.oracle_te_markov(synth.copy_kernel(), "x<-y")


def test_plug_in_estimate_converges_to_oracle():
    spec = synth.random_kernel(np.random.default_rng(11))
    x, y = synth.gen_markov(spec, 100000, seed=12)
    est = it.transfer_entropy_binned(lagged_tuples(x, y, 1)).value
    assert est == pytest.approx(synth.oracle_te_markov(spec, "y->x"), abs=0.01)


# gaussian AR -----------------------------------------------------------------------

def test_gaussian_ar_te_increases_with_coupling():
    a = Alphabet.sign()
    values = []
    for c in (0.0, 0.3, 0.6, 0.9):
        x, y = synth.gen_gaussian_ar(c, 100000, seed=21)
        sx, sy = symbolize(x, a), symbolize(y, a)
        values.append(it.transfer_entropy_binned(lagged_tuples(sy, sx, 1)).value)
    assert all(lo < hi for lo, hi in zip(values, values[1:]))
    assert values[0] <= 0.005


def test_gaussian_ar_lag_correlation():
    x, y = synth.gen_gaussian_ar(0.6, 50000, seed=1)
    assert np.corrcoef(x[:-1], y[1:])[0, 1] == pytest.approx(0.6, abs=0.02)
    with pytest.raises(synth.InvalidSpecError):
        synth.gen_gaussian_ar(1.5, 10)


# event streams --------------------------------------------------------------------

def test_event_pair_copy_coupling():
    src, tgt = synth.gen_event_pair(synth.EventStreamSpec(rate_target=0.25, seed=1))
    assert len(tgt) >= 5000
    t = align_events(tgt, src, Alphabet.sign())
    assert it.transfer_entropy_event(t).value >= 0.5
    # a copied sign equals the most recent strictly-earlier source sign
    assert np.array_equal(t.x_now, t.y_prev)


def test_event_pair_anti_coupling_negates():
    src, tgt = synth.gen_event_pair(synth.EventStreamSpec(coupling="anti", seed=2))
    t = align_events(tgt, src, Alphabet.sign())
    assert np.array_equal(t.x_now, 1 - t.y_prev)


def test_uncoupled_event_pair_within_shuffle_band():
    inside = 0
    for seed in range(20):
        src, tgt = synth.gen_event_pair(synth.EventStreamSpec(coupling="none", seed=seed))
        r = it.transfer_entropy_event(align_events(tgt, src, Alphabet.sign()),
                                      shuffles=100, seed=seed)
        inside += abs(r.value - r.shuffle_mean) <= 3 * r.shuffle_std
    assert inside >= 18


def test_sparse_target_is_missing_pair():
    spec = synth.EventStreamSpec(rate_target=0.001, coupling="none", seed=3)
    src, tgt = synth.gen_event_pair(spec)
    assert 5 <= len(tgt) <= 45
    m = pair_matrices({"SRC": src, "TGT": tgt}, AnalysisConfig(shuffles=0))["te_event"]
    assert math.isnan(m.values[m.instruments.index("SRC"), m.instruments.index("TGT")])


@pytest.mark.parametrize("kwargs", [{"rate_source": 0}, {"rate_target": -1},
                                    {"coupling": "mirror"}])
def test_invalid_event_spec(kwargs):
    with pytest.raises(synth.InvalidSpecError):
        synth.EventStreamSpec(**kwargs)


def test_event_ticks_round_trip_through_csv():
    ticks = synth.gen_event_ticks(synth.EventStreamSpec(rate_source=0.5, seed=4))
    buf = io.StringIO()
    write_ticks(ticks, buf)
    parsed = parse_ticks(buf.getvalue().encode()).series
    for ts in ticks:
        back = parsed[ts.instrument, ts.day]
        assert to_returns(back) == to_returns(ts)


def test_markov_ticks_round_trip():
    spec = synth.copy_kernel()
    ticks = synth.markov_ticks(spec, 30000, seed=6)
    buf = io.StringIO()
    write_ticks(ticks, buf)
    parsed = parse_ticks(buf.getvalue().encode()).series
    assert len(parsed) == 4  # X and Y over two trading days
    x, _ = synth.gen_markov(spec, 30000, seed=6)
    day0 = ticks[0].day
    r = to_returns(parsed["X", day0])
    assert np.array_equal(r.values > 0, x.symbols[:23400] == 1)


# regime change ----------------------------------------------------------------------

def regime_entropies(spec, alphabet_for):
    days = synth.gen_regime_change(spec)
    pooled = np.concatenate([s.values for s in days.values()])
    alpha = alphabet_for(pooled)
    return [daily_entropy(s, alpha) for s in days.values()]


def test_regime_change_shifts_quantile_entropy_only():
    spec = synth.RegimeSpec(seed=0)
    q = regime_entropies(spec, lambda v: Alphabet.quantile(v, 4))
    s = regime_entropies(spec, lambda v: Alphabet.sign())
    c = spec.change_day
    assert abs(np.mean(q[:c]) - np.mean(q[c:])) >= 0.1
    assert abs(np.mean(s[:c]) - np.mean(s[c:])) <= 0.02


def test_regime_moves_halve():
    days = list(synth.gen_regime_change(synth.RegimeSpec(n_days=2, change_day=1, seed=3)).values())
    unit_before = np.min(np.abs(days[0].values))
    unit_after = np.min(np.abs(days[1].values))
    assert unit_after == pytest.approx(unit_before / 2, rel=1e-12)


def test_regime_change_at_day_zero_warns():
    with pytest.warns(UserWarning):
        synth.gen_regime_change(synth.RegimeSpec(n_days=3, change_day=0))


def test_regime_change_outside_range_rejected():
    with pytest.raises(synth.InvalidSpecError):
        synth.RegimeSpec(n_days=5, change_day=5)


def test_regime_ticks_reproduce_returns():
    spec = synth.RegimeSpec(n_days=3, change_day=1, seed=2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        returns = synth.gen_regime_change(spec)
    for ts in synth.gen_regime_ticks(spec):
        r = to_returns(ts)
        np.testing.assert_allclose(r.values, returns[ts.day].values, atol=1e-12)
        assert np.array_equal(r.times, returns[ts.day].times)
