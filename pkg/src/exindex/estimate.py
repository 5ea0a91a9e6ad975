"""Blocks and runs estimators of the extremal index, at fixed and swept thresholds.

The blocks estimator splits the first m*r observations into m disjoint blocks of
length r and returns

    (# blocks whose maximum exceeds u) / (# exceedances of u inside the blocks).

The swept variant replaces u by the sample order statistic leaving ceil(k*t)
exceedances in the full sample, t in (0, 1], so one sample yields a whole curve
t -> theta_hat(t).  When none of those top values falls in the uncovered tail
segment (m*r, n], the denominator simplifies to ceil(k*t) exactly.

The runs estimator counts an exceedance as a cluster end when the next
``run_length`` observations all stay below the threshold:

    sum_{i<=n-run_length} 1{X_i > u, following run_length values <= u}
    / sum_{i<=n-run_length} 1{X_i > u}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoExceedances, TiesDetected

__all__ = [
    "EstimatorConfig",
    "CurvePoint",
    "SkippedPoint",
    "ThresholdCurve",
    "BlocksEvaluator",
    "count_at",
    "blocks_fixed",
    "blocks_empirical",
    "blocks_true_quantile",
    "runs_estimator",
    "sweep",
    "default_grid",
]


@dataclass(frozen=True)
class EstimatorConfig:
    """Block length ``r``, top-order-statistic budget ``k``, optional runs length."""

    r: int
    k: int
    run_length: int | None = None

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"r must be at least 1, got {self.r}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if self.run_length is not None and self.run_length < 1:
            raise ValueError(f"run_length must be at least 1, got {self.run_length}")

    def validate_for(self, n: int) -> None:
        if self.r > n:
            raise ValueError(f"r={self.r} exceeds series length n={n}")
        if self.k >= n:
            raise ValueError(f"k={self.k} must be smaller than n={n}")

    def v(self, n: int) -> float:
        return self.k / n


@dataclass(frozen=True)
class CurvePoint:
    t: float
    k_t: int
    theta_hat: float


@dataclass(frozen=True)
class SkippedPoint:
    t: float
    k_t: int
    reason: str


@dataclass(frozen=True, eq=False)
class ThresholdCurve:
    """Estimates on a threshold grid; failed grid points are recorded, not dropped."""

    entries: tuple
    skipped: tuple
    variant: str  # empirical_quantile | true_quantile | corrected
    config: EstimatorConfig
    n: int

    def ts(self) -> np.ndarray:
        return np.array([e.t for e in self.entries])

    def values(self) -> np.ndarray:
        return np.array([e.theta_hat for e in self.entries])


def count_at(k: int, t: float) -> int:
    """Exceedance budget ceil(k*t), robust to floating-point boundary droop.

    Products within 1e-12 (relative) of an integer are treated as exactly that
    integer before the ceiling is taken, so grid values like j/k never flip to
    the next count; everything else is nudged up by 1e-12 and ceiled.
    """
    if t <= 0.0:
        raise ValueError(f"t must be positive, got {t}")
    prod = k * t
    nearest = round(prod)
    if abs(prod - nearest) <= 1e-12 * max(1.0, abs(prod)):
        kt = int(nearest)
    else:
        kt = math.ceil(prod + 1e-12)
    return max(kt, 1)


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=float)


def blocks_fixed(x, r: int, u: float) -> float:
    """Blocks estimate at a fixed threshold ``u``."""
    xs = _values(x)
    n = len(xs)
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    m = n // r
    covered = xs[: m * r]
    exceed = int(np.count_nonzero(covered > u))
    if exceed == 0:
        raise NoExceedances(f"no observation in the {m} blocks exceeds u={u}")
    hit = int(np.count_nonzero(covered.reshape(m, r).max(axis=1) > u))
    return hit / exceed


def runs_estimator(x, run_length: int, u: float) -> float:
    """Runs estimate at a fixed threshold ``u``."""
    xs = _values(x)
    n = len(xs)
    if not 1 <= run_length < n:
        raise ValueError(f"need 1 <= run_length < n, got run_length={run_length}, n={n}")
    exc = xs > u
    stop = n - run_length
    denom = int(np.count_nonzero(exc[:stop]))
    if denom == 0:
        raise NoExceedances(f"no observation among the first {stop} exceeds u={u}")
    clear = np.ones(stop, dtype=bool)
    for j in range(1, run_length + 1):
        clear &= ~exc[j : j + stop]
    numer = int(np.count_nonzero(exc[:stop] & clear))
    return numer / denom


class BlocksEvaluator:
    """Reusable t -> theta_hat evaluator for one (sample, r, k).

    Precomputes sorted sample values, sorted block maxima, and the sorted
    uncovered tail once; each evaluation is then two binary searches, cached by
    the exceedance budget k_t (the estimate depends on t only through k_t).
    """

    def __init__(self, x, r: int, k: int):
        xs = _values(x)
        n = len(xs)
        cfg = EstimatorConfig(r=r, k=k)
        cfg.validate_for(n)
        self.n = n
        self.r = r
        self.k = k
        self.m = n // r
        self._sorted = np.sort(xs)
        self._block_max_sorted = np.sort(xs[: self.m * r].reshape(self.m, r).max(axis=1))
        self._tail_sorted = np.sort(xs[self.m * r :])
        self._cache: dict[int, float] = {}

    def threshold(self, k_t: int) -> float:
        """The order statistic below the top ``k_t`` sample values."""
        if not 1 <= k_t <= self.k:
            raise ValueError(f"need 1 <= k_t <= k={self.k}, got {k_t}")
        return float(self._sorted[self.n - k_t - 1])

    def at_count(self, k_t: int) -> float:
        if k_t in self._cache:
            return self._cache[k_t]
        u = self.threshold(k_t)
        if u == self._sorted[self.n - k_t]:
            raise TiesDetected(
                f"threshold order statistic ties the smallest of the top {k_t} values"
            )
        hit = self.m - int(np.searchsorted(self._block_max_sorted, u, side="right"))
        tail_exceed = len(self._tail_sorted) - int(
            np.searchsorted(self._tail_sorted, u, side="right")
        )
        if tail_exceed == 0:
            value = hit / k_t
        else:
            in_blocks = k_t - tail_exceed
            if in_blocks == 0:
                raise NoExceedances(
                    f"all top {k_t} values lie beyond the block coverage"
                )
            value = hit / in_blocks
        self._cache[k_t] = value
        return value

    def __call__(self, t: float) -> float:
        return self.at_count(count_at(self.k, t))


def blocks_empirical(x, cfg: EstimatorConfig, t: float) -> float:
    """Blocks estimate with the threshold set at the top-ceil(k*t) order statistic."""
    return BlocksEvaluator(x, cfg.r, cfg.k)(t)


def blocks_true_quantile(x, cfg: EstimatorConfig, t: float, marginal_quantile) -> float:
    """Blocks estimate with the threshold at the known marginal (1 - v*t)-quantile."""
    xs = _values(x)
    cfg.validate_for(len(xs))
    if t <= 0.0 or t > 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    u = float(marginal_quantile(1.0 - cfg.v(len(xs)) * t))
    return blocks_fixed(xs, cfg.r, u)


def default_grid(k: int) -> np.ndarray:
    """One grid point per distinct order-statistic threshold: t_j = j/k."""
    return np.arange(1, k + 1) / k


def sweep(x, cfg: EstimatorConfig, grid=None) -> ThresholdCurve:
    """Evaluate the empirical-threshold blocks estimator on a grid of t values.

    Grid points where the estimate is undefined (no exceedance inside the
    blocks, or a threshold tie) become ``skipped`` entries carrying the error
    code instead of silently disappearing.
    """
    xs = _values(x)
    ev = BlocksEvaluator(xs, cfg.r, cfg.k)
    if grid is None:
        grid = default_grid(cfg.k)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0.0) or np.any(grid > 1.0):
        raise ValueError("grid values must lie in (0, 1]")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    entries = []
    skipped = []
    for t in grid:
        k_t = count_at(cfg.k, t)
        try:
            entries.append(CurvePoint(t=float(t), k_t=k_t, theta_hat=ev.at_count(k_t)))
        except (NoExceedances, TiesDetected) as err:
            skipped.append(SkippedPoint(t=float(t), k_t=k_t, reason=err.code))
    return ThresholdCurve(
        entries=tuple(entries),
        skipped=tuple(skipped),
        variant="empirical_quantile",
        config=cfg,
        n=ev.n,
    )
