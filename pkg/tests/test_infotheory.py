import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eventte import infotheory as it
from eventte.series import AlignedTuples, Alphabet, SymbolSequence, lagged_tuples

LN2 = math.log(2)


# independent oracles: plain Counter-based plug-in estimates -------------------

def h_counter(counter):
    n = sum(counter.values())
    return -sum(c / n * math.log(c / n) for c in counter.values() if c)


def te_oracle(records):
    """H(X|Xh) - H(X|Xh,Yh) from raw (x, xh, yh) records."""
    c_xxh = Counter((x, xh) for x, xh, _ in records)
    c_xh = Counter(xh for _, xh, _ in records)
    c_all = Counter(records)
    c_xhyh = Counter((xh, yh) for _, xh, yh in records)
    return (h_counter(c_xxh) - h_counter(c_xh)) - (h_counter(c_all) - h_counter(c_xhyh))


def table_to_records(c):
    return [idx for idx, n in np.ndenumerate(c) for _ in range(int(n))]


def aligned(records, x_size=2, y_size=2):
    a = np.array(records, dtype=np.int64).reshape(-1, 3)
    z = np.zeros(len(a))
    return AlignedTuples(a[:, 0], a[:, 1], a[:, 2], z + 1, z, z, x_size, y_size)


# entropy family -----------------------------------------------------------------

def test_entropy_uniform():
    assert it.entropy([2, 2]) == pytest.approx(LN2, abs=1e-12)


def test_entropy_degenerate():
    assert it.entropy([4, 0]) == 0.0


def test_entropy_three_one():
    expected = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
    assert expected == pytest.approx(0.562335, abs=1e-6)
    assert it.entropy([3, 1]) == pytest.approx(expected, abs=1e-15)


def test_entropy_empty():
    with pytest.raises(it.EmptyInputError):
        it.entropy([0, 0])


def test_joint_entropy_examples():
    assert it.joint_entropy(np.ones((2, 2))) == pytest.approx(math.log(4), abs=1e-12)
    assert it.joint_entropy([[2, 0], [0, 2]]) == pytest.approx(LN2, abs=1e-12)
    oracle = h_counter(Counter({"aa": 2, "ab": 1, "ba": 1}))
    assert oracle == pytest.approx(1.039721, abs=1e-6)
    assert it.joint_entropy([[2, 1], [1, 0]]) == pytest.approx(oracle, abs=1e-15)


def test_conditional_entropy_examples():
    assert it.conditional_entropy([[3, 0], [0, 5]]) == 0.0
    assert it.conditional_entropy(np.full((2, 2), 7)) == pytest.approx(LN2, abs=1e-12)
    # axis0 = X in {a, b}, axis1 = C in {p, q}: (a,p):2, (b,p):1, (b,q):1
    c = [[2, 0], [1, 1]]
    oracle = h_counter(Counter({"ap": 2, "bp": 1, "bq": 1})) - h_counter(Counter({"p": 3, "q": 1}))
    assert oracle == pytest.approx(0.477386, abs=1e-6)
    assert it.conditional_entropy(c) == pytest.approx(oracle, abs=1e-12)


def test_mutual_information_examples():
    assert it.mutual_information(np.full((2, 2), 3)).value == 0.0
    assert it.mutual_information([[2, 0], [0, 2]]).value == pytest.approx(LN2, abs=1e-12)
    c = [[2, 1], [1, 0]]
    oracle = (h_counter(Counter({"a": 3, "b": 1})) * 2
              - h_counter(Counter({"aa": 2, "ab": 1, "ba": 1})))
    r = it.mutual_information(c)
    assert r.value == pytest.approx(oracle, abs=1e-12)
    assert r.value == pytest.approx(0.084950, abs=1e-6)
    assert r.n_samples == 4


def test_marginal_keeps_total_and_axis_order():
    c = it.JointCounts(np.arange(24).reshape(2, 3, 4))
    m = c.marginal((2, 0))
    assert m.dims == (4, 2)
    assert m.total == c.total
    assert np.array_equal(m.counts, c.counts.sum(axis=1).T)


count_tables = arrays(np.int64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
                      elements=st.integers(0, 30)).filter(lambda a: a.sum() > 0)


@settings(max_examples=300, deadline=None)
@given(count_tables)
def test_chain_rule_and_mi_symmetry(c):
    h_xy = it.joint_entropy(c)
    h_y = it.entropy(c.sum(axis=0))
    assert abs(h_xy - (h_y + it.conditional_entropy(c))) <= 1e-12
    assert it.mutual_information(c).value == it.mutual_information(c.T).value
    assert it.mutual_information(c).value >= 0
    h_x = it.entropy(c.sum(axis=1))
    assert 0 <= h_x <= math.log(c.shape[0]) + 1e-12


@given(st.lists(st.integers(1, 9), min_size=1, max_size=4),
       st.lists(st.integers(1, 9), min_size=1, max_size=4))
def test_mi_zero_on_product_tables(px, py):
    assert it.mutual_information(np.outer(px, py)).value == 0.0


three_way = arrays(np.int64, st.tuples(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3)),
                   elements=st.integers(0, 12)).filter(lambda a: a.sum() > 0)


@settings(max_examples=300, deadline=None)
@given(three_way)
def test_conditioning_never_increases_entropy(c):
    h_x_c1 = it.conditional_entropy(c.sum(axis=2))
    h_x_c1c2 = it.conditional_entropy(c)
    assert h_x_c1c2 <= h_x_c1 + 1e-12


@settings(max_examples=300, deadline=None)
@given(three_way)
def test_te_matches_oracle_and_is_nonnegative(c):
    value = it.transfer_entropy_counts(c)
    assert value >= 0
    assert value == pytest.approx(te_oracle(table_to_records(c)), abs=1e-12)


# transfer entropy -----------------------------------------------------------------

def test_te_zero_for_constant_source():
    rng = np.random.default_rng(0)
    x = SymbolSequence(Alphabet.sign(), rng.integers(0, 2, 500))
    y = SymbolSequence(Alphabet.sign(), np.ones(500, dtype=int))
    assert it.transfer_entropy_binned(lagged_tuples(x, y, 1)).value == 0.0
    assert it.transfer_entropy_binned(lagged_tuples(x, y, 3)).value == 0.0


def test_te_zero_when_source_duplicates_target_history():
    rng = np.random.default_rng(1)
    recs = [(int(a), int(b), int(b)) for a, b in rng.integers(0, 2, (1000, 2))]
    assert it.transfer_entropy_event(aligned(recs)).value == 0.0


def test_copy_process_binned_te():
    rng = np.random.default_rng(2024)
    xs = rng.integers(0, 2, 10000)
    ys = np.concatenate([[0], xs[:-1]])
    sign = Alphabet.sign()
    fwd = it.transfer_entropy_binned(lagged_tuples(SymbolSequence(sign, ys),
                                                   SymbolSequence(sign, xs), 1))
    rev = it.transfer_entropy_binned(lagged_tuples(SymbolSequence(sign, xs),
                                                   SymbolSequence(sign, ys), 1))
    assert fwd.value == pytest.approx(LN2, abs=0.01)
    assert rev.value <= 0.01
    assert fwd.n_samples == 9999


def test_independent_binary_te_is_small():
    rng = np.random.default_rng(99)
    sign = Alphabet.sign()
    x = SymbolSequence(sign, rng.integers(0, 2, 100000))
    y = SymbolSequence(sign, rng.integers(0, 2, 100000))
    assert it.transfer_entropy_binned(lagged_tuples(x, y, 1)).value <= 0.005


def test_binned_te_matches_oracle_for_k2():
    rng = np.random.default_rng(5)
    a3 = Alphabet.sign(with_zero=True)
    x = SymbolSequence(a3, rng.integers(0, 3, 400))
    y = SymbolSequence(a3, rng.integers(0, 3, 400))
    t = lagged_tuples(x, y, 2)
    recs = [(int(a), tuple(b), tuple(c)) for a, b, c in zip(t.x_now, t.x_hist.tolist(),
                                                           t.y_hist.tolist())]
    assert it.transfer_entropy_binned(t).value == pytest.approx(te_oracle(recs), abs=1e-12)


def test_event_te_empty_raises():
    with pytest.raises(it.EmptyInputError):
        it.transfer_entropy_event(aligned([]))


def test_relabeling_symbols_leaves_te_unchanged():
    rng = np.random.default_rng(8)
    a3 = Alphabet.sign(with_zero=True)
    xs, ys = rng.integers(0, 3, 800), rng.integers(0, 3, 800)
    ys[1:] = np.where(rng.random(799) < 0.7, xs[:-1], ys[1:])
    perm_x, perm_y = np.array([2, 0, 1]), np.array([1, 2, 0])
    t1 = lagged_tuples(SymbolSequence(a3, xs), SymbolSequence(a3, ys), 1)
    t2 = lagged_tuples(SymbolSequence(a3, perm_x[xs]), SymbolSequence(a3, perm_y[ys]), 1)
    assert it.transfer_entropy_binned(t1).value == it.transfer_entropy_binned(t2).value


# shuffle test -------------------------------------------------------------------

def copy_tuples(n, seed):
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, 2, n)
    ys = np.concatenate([[0], xs[:-1]])
    sign = Alphabet.sign()
    return lagged_tuples(SymbolSequence(sign, ys), SymbolSequence(sign, xs), 1)


def test_shuffle_destroys_coupling():
    t = copy_tuples(10000, 3)
    value = it.transfer_entropy_binned(t).value
    mean, std = it.shuffle_test(t, 100, seed=11)
    assert mean < value
    assert value - mean >= 5 * std


def test_shuffle_keeps_target_columns_and_marginals():
    t = copy_tuples(500, 4)
    rng = np.random.default_rng(0)
    perm = rng.permutation(len(t))
    s = t.with_source(t.y_hist[perm])
    assert np.array_equal(s.x_now, t.x_now) and np.array_equal(s.x_hist, t.x_hist)
    assert sorted(s.y_hist[:, 0]) == sorted(t.y_hist[:, 0])


def test_shuffle_is_deterministic_given_seed():
    t = copy_tuples(2000, 5)
    assert it.shuffle_test(t, 20, seed=7) == it.shuffle_test(t, 20, seed=7)
    assert it.shuffle_test(t, 20, seed=7) != it.shuffle_test(t, 20, seed=8)
    r1 = it.transfer_entropy_binned(t, shuffles=20, seed=3)
    r2 = it.transfer_entropy_binned(t, shuffles=20, seed=3)
    assert r1 == r2


def test_shuffle_needs_two_draws():
    with pytest.raises(ValueError):
        it.shuffle_test(copy_tuples(50, 0), 1)


def test_independent_tuples_sit_inside_shuffle_band():
    hits = 0
    sign = Alphabet.sign()
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = SymbolSequence(sign, rng.integers(0, 2, 5000))
        y = SymbolSequence(sign, rng.integers(0, 2, 5000))
        r = it.transfer_entropy_binned(lagged_tuples(x, y, 1), shuffles=100, seed=seed)
        hits += abs(r.value - r.shuffle_mean) <= 3 * r.shuffle_std
    assert hits >= 19


def test_measure_result_significance_and_correction():
    r = it.MeasureResult(0.3, 100, 0.1, 0.05, 100)
    assert r.significant(2.0)
    assert not r.significant(5.0)
    assert r.corrected == pytest.approx(0.2)
    assert not it.MeasureResult(0.3, 100).significant()
