"""Plug-in information measures over discrete symbol tuples.

Everything is computed from a single :class:`JointCounts` table per
measurement, in nats. Sums over table cells go through :func:`math.fsum`, so a
result does not depend on the order in which cells are visited (transposing a
table gives a bit-identical mutual information).

Conditional mutual information is evaluated directly from count ratios,
``sum n_abc/N * log(n_abc * n_c / (n_ac * n_bc))``. Where conditioning on a
variable cannot add information (a constant, or a copy of the existing
condition) each ratio is exactly 1 and the result is exactly 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .series import AlignedTuples, LaggedTuples

DEFAULT_SHUFFLES = 100
DEFAULT_SIGNIFICANCE = 2.0


class EmptyInputError(ValueError):
    """A measure was requested on zero samples."""


@dataclass(frozen=True, eq=False)
class JointCounts:
    """Dense count table over symbol tuples."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_columns(cls, columns: Sequence[np.ndarray], dims: Sequence[int]) -> "JointCounts":
        dims = tuple(int(d) for d in dims)
        if len(columns) != len(dims):
            raise ValueError("one column per dimension")
        n = len(columns[0]) if columns else 0
        if n == 0:
            return cls(np.zeros(dims, dtype=np.int64))
        flat = np.ravel_multi_index(tuple(np.asarray(c, dtype=np.int64) for c in columns), dims)
        return cls(np.bincount(flat, minlength=int(np.prod(dims))).reshape(dims))

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.counts.shape

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def marginal(self, axes: Sequence[int]) -> "JointCounts":
        """Counts over the kept ``axes`` (in the given order)."""
        axes = tuple(axes)
        drop = tuple(a for a in range(self.counts.ndim) if a not in axes)
        m = self.counts.sum(axis=drop) if drop else self.counts
        kept = [a for a in range(self.counts.ndim) if a in axes]
        return JointCounts(np.transpose(m, [kept.index(a) for a in axes]))

    def transpose(self, order: Sequence[int]) -> "JointCounts":
        return JointCounts(np.transpose(self.counts, tuple(order)))


@dataclass(frozen=True)
class MeasureResult:
    value: float
    n_samples: int
    shuffle_mean: Optional[float] = None
    shuffle_std: Optional[float] = None
    shuffle_count: Optional[int] = None

    def significant(self, multiplier: float = DEFAULT_SIGNIFICANCE) -> bool:
        """``value > shuffle_mean + multiplier * shuffle_std``; False without a baseline."""
        if self.shuffle_mean is None or self.shuffle_std is None:
            return False
        return self.value > self.shuffle_mean + multiplier * self.shuffle_std

    @property
    def corrected(self) -> Optional[float]:
        """Point value minus the shuffle baseline (can be negative)."""
        if self.shuffle_mean is None:
            return None
        return self.value - self.shuffle_mean


def _as_counts(counts) -> JointCounts:
    if isinstance(counts, JointCounts):
        return counts
    return JointCounts(np.asarray(counts))


def entropy(counts) -> float:
    """Plug-in Shannon entropy (nats) of the distribution in a count table.

    All cells of the table form one joint variable; zero cells contribute 0.
    """
    c = _as_counts(counts).counts
    n = int(c.sum())
    if n == 0:
        raise EmptyInputError("entropy of an empty count table")
    nz = c[c > 0].astype(float)
    p = nz / n
    h = -math.fsum((p * np.log(p)).tolist())
    return max(h, 0.0)


def joint_entropy(counts) -> float:
    """Entropy of all axes of the table taken jointly."""
    return entropy(counts)


def conditional_entropy(counts, target_axes: Sequence[int] = (0,)) -> float:
    """``H(target | rest) = H(all) - H(rest)`` from one table.

    ``target_axes`` name the conditioned variable(s); all remaining axes are the
    condition.
    """
    jc = _as_counts(counts)
    rest = [a for a in range(jc.counts.ndim) if a not in tuple(target_axes)]
    h_all = entropy(jc)
    if not rest:
        return h_all
    return max(h_all - entropy(jc.marginal(rest)), 0.0)


def conditional_mutual_information(counts, a_axes: Sequence[int], b_axes: Sequence[int],
                                   c_axes: Sequence[int] = ()) -> float:
    """``I(A; B | C)`` (nats) from one count table, evaluated on count ratios."""
    jc = _as_counts(counts)
    a_axes, b_axes, c_axes = tuple(a_axes), tuple(b_axes), tuple(c_axes)
    n = jc.total
    if n == 0:
        raise EmptyInputError("information measure on an empty count table")
    order = a_axes + b_axes + c_axes
    if sorted(order) != list(range(jc.counts.ndim)):
        raise ValueError("axes must partition the table dimensions")
    t = np.transpose(jc.counts, order)
    na, nb = len(a_axes), len(b_axes)
    nc = t.ndim - na - nb
    sa = tuple(t.shape[:na])
    sb = tuple(t.shape[na:na + nb])
    sc = tuple(t.shape[na + nb:])
    t = t.reshape(int(np.prod(sa)), int(np.prod(sb)), int(np.prod(sc)) if nc else 1)
    n_ac = t.sum(axis=1, keepdims=True)
    n_bc = t.sum(axis=0, keepdims=True)
    n_c = t.sum(axis=(0, 1), keepdims=True)
    mask = t > 0
    abc = t[mask].astype(float)
    ratio = (abc * np.broadcast_to(n_c, t.shape)[mask]) / (
        np.broadcast_to(n_ac, t.shape)[mask].astype(float)
        * np.broadcast_to(n_bc, t.shape)[mask])
    value = math.fsum((abc * np.log(ratio)).tolist()) / n
    # the exact quantity is >= 0; clamp floating round-off only
    if -1e-12 < value < 0:
        value = 0.0
    return value


def mutual_information(counts) -> MeasureResult:
    """``I(X; Y)`` for a 2-axis table (axis 0 is X, axis 1 is Y)."""
    jc = _as_counts(counts)
    if jc.counts.ndim != 2:
        raise ValueError("mutual_information expects a 2-axis count table")
    value = conditional_mutual_information(jc, (0,), (1,))
    return MeasureResult(value, jc.total)


def transfer_entropy_counts(counts) -> float:
    """TE from a table over ``(x_now, x_hist, y_hist)``.

    ``H(x_now | x_hist) - H(x_now | x_hist, y_hist)``, i.e. the conditional
    mutual information ``I(x_now; y_hist | x_hist)`` of the same table.
    """
    jc = _as_counts(counts)
    if jc.counts.ndim != 3:
        raise ValueError("transfer entropy expects a (x_now, x_hist, y_hist) table")
    return conditional_mutual_information(jc, (0,), (2,), (1,))


def _encode_history(hist: np.ndarray, size: int) -> np.ndarray:
    code = np.zeros(hist.shape[0], dtype=np.int64)
    for j in range(hist.shape[1]):
        code = code * size + hist[:, j]
    return code


def lagged_counts(tuples: LaggedTuples, y_hist: Optional[np.ndarray] = None) -> JointCounts:
    k = tuples.k
    y_hist = tuples.y_hist if y_hist is None else y_hist
    dims = (tuples.x_size, tuples.x_size ** k, tuples.y_size ** k)
    return JointCounts.from_columns(
        [tuples.x_now, _encode_history(tuples.x_hist, tuples.x_size),
         _encode_history(np.asarray(y_hist), tuples.y_size)], dims)


def aligned_counts(tuples: AlignedTuples, y_prev: Optional[np.ndarray] = None) -> JointCounts:
    y_prev = tuples.y_prev if y_prev is None else y_prev
    dims = (tuples.x_size, tuples.x_size, tuples.y_size)
    return JointCounts.from_columns([tuples.x_now, tuples.x_prev, y_prev], dims)


def _counts_for(tuples, source=None) -> JointCounts:
    if isinstance(tuples, AlignedTuples):
        return aligned_counts(tuples, source)
    if isinstance(tuples, LaggedTuples):
        return lagged_counts(tuples, source)
    raise TypeError(f"unsupported tuple container {type(tuples).__name__}")


def _source_of(tuples) -> np.ndarray:
    return tuples.y_prev if isinstance(tuples, AlignedTuples) else tuples.y_hist


SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def shuffle_test(tuples, m: int = DEFAULT_SHUFFLES, seed: SeedLike = 0) -> Tuple[float, float]:
    """Mean and sample std of TE after permuting the source across records.

    The target columns and the record count are left untouched, so the
    surrogates keep the target's own structure and both marginals while
    destroying any source-to-target coupling.
    """
    if m < 2:
        raise ValueError(f"shuffle count must be >= 2, got {m}")
    if len(tuples) == 0:
        raise EmptyInputError("shuffle test on zero records")
    rng = _rng(seed)
    src = _source_of(tuples)
    values = np.empty(m)
    for i in range(m):
        perm = rng.permutation(len(src))
        values[i] = transfer_entropy_counts(_counts_for(tuples, src[perm]))
    return float(values.mean()), float(values.std(ddof=1))


def _transfer_entropy(tuples, shuffles: int, seed: SeedLike) -> MeasureResult:
    if len(tuples) == 0:
        raise EmptyInputError("transfer entropy on zero records")
    jc = _counts_for(tuples)
    value = transfer_entropy_counts(jc)
    if not shuffles:
        return MeasureResult(value, jc.total)
    mean, std = shuffle_test(tuples, shuffles, seed)
    return MeasureResult(value, jc.total, mean, std, shuffles)


def transfer_entropy_binned(tuples: LaggedTuples, shuffles: int = 0,
                            seed: SeedLike = 0) -> MeasureResult:
    """k-lagged TE from source history to target on a regular grid.

    Set ``shuffles`` to attach a surrogate baseline drawn with ``seed``.
    """
    return _transfer_entropy(tuples, shuffles, seed)


def transfer_entropy_event(tuples: AlignedTuples, shuffles: int = 0,
                           seed: SeedLike = 0) -> MeasureResult:
    """Event-aligned TE, ``H(x_now | x_prev) - H(x_now | x_prev, y_prev)``."""
    return _transfer_entropy(tuples, shuffles, seed)
