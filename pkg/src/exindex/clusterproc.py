"""Empirical cluster-process machinery: standardized excess blocks, the block
functionals f_t (block contains an exceedance) and g_t (exceedance count), the
normalized fluctuation process Z_n(h), and covariance kernels.

Given marginally-uniform scores U_i and an exceedance fraction v, define the
standardized excesses ((U_i - (1 - v)) clipped at 0) / v in [0, 1] and cut the
series into m disjoint blocks of length r.  For a block y and level t in (0, 1]

    f_t(y) = 1{max_i y_i > 1 - t}          g_t(y) = #{i : y_i > 1 - t}

and the fluctuation process of a functional family h is

    Z_n(h_t) = (n * v)^(-1/2) * sum_j (h_t(Y_j) - E h_t(Y_j)).

The limiting covariances are expressed through the tail sequence (W_k): the
weak limit of a standardized window of the series started at an exceedance.
With p_k(s, t) = P{W_1 > 1-s, W_k > 1-t},

    c_g(s, t)  = min(s, t) + sum_{k>=2} (p_k(s, t) + p_k(t, s))
    c_fg(s, t) = t                                          if s >= t
               = P{W_1 > 1-t, max_{j>=1} W_j > 1-s}
                 + sum_{k>=2} P{W_1 > 1-s, W_k > 1-t, max_{j>=2} W_j <= 1-s}
                                                            if s < t
    c(s, t)    = theta * (min(s, t) - c_fg(s, t) - c_fg(t, s))
                 + theta^2 * c_g(s, t)

For independent data the tail sequence is degenerate (W_k = 0 for k >= 2), so
c_g = c_fg = min(s, t), theta = 1 and c vanishes identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sim
from .estimate import BlocksEvaluator, EstimatorConfig

__all__ = [
    "StandardizedBlocks",
    "standardize",
    "f_max",
    "g_count",
    "ProcessPath",
    "process_path",
    "ClosedFormIID",
    "TailChainSeries",
    "MCGrid",
    "estimate_kernel_mc",
    "tail_chain_probabilities",
]


@dataclass(frozen=True, eq=False)
class StandardizedBlocks:
    """m x r array of standardized excesses, plus the context that produced it."""

    blocks: np.ndarray
    n: int
    v: float
    mode: str  # known_marginal | rank

    @property
    def m(self) -> int:
        return self.blocks.shape[0]

    @property
    def r(self) -> int:
        return self.blocks.shape[1]


def standardize(x, v: float, r: int, marginal_cdf=None) -> StandardizedBlocks:
    """Blocks of standardized excesses ((U_i - (1 - v))+ ) / v.

    With ``marginal_cdf`` given, U_i = F(X_i) (known-marginal mode); otherwise
    U_i = rank_i / n, which reproduces exactly the exceedance sets of the
    empirical-threshold estimator.
    """
    xs = np.asarray(getattr(x, "values", x), dtype=float)
    n = len(xs)
    if not 0.0 < v < 1.0:
        raise ValueError(f"v must lie in (0, 1), got {v}")
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    if marginal_cdf is not None:
        u = np.asarray(marginal_cdf(xs), dtype=float)
        mode = "known_marginal"
    else:
        ranks = np.empty(n, dtype=float)
        ranks[np.argsort(xs, kind="stable")] = np.arange(1, n + 1)
        u = ranks / n
        mode = "rank"
    excess = np.clip((u - (1.0 - v)) / v, 0.0, None)
    m = n // r
    return StandardizedBlocks(blocks=excess[: m * r].reshape(m, r), n=n, v=v, mode=mode)


def f_max(blocks: np.ndarray, t: float) -> np.ndarray:
    """Indicator per block: does any standardized excess exceed 1 - t?"""
    return (np.asarray(blocks).max(axis=1) > 1.0 - t).astype(float)


def g_count(blocks: np.ndarray, t: float) -> np.ndarray:
    """Count per block of standardized excesses strictly above 1 - t."""
    return np.count_nonzero(np.asarray(blocks) > 1.0 - t, axis=1).astype(float)


_FUNCTIONALS = {"max": f_max, "count": g_count}


@dataclass(frozen=True, eq=False)
class ProcessPath:
    grid: np.ndarray
    values: np.ndarray
    centering: str  # model_oracle | mc_mean


def process_path(sb: StandardizedBlocks, family: str, grid, centering) -> ProcessPath:
    """Fluctuation path Z_n(h_t) = (n v)^(-1/2) sum_j (h_t(Y_j) - E h_t) on a grid.

    ``centering`` supplies E h_t(Y_1) per grid point, either as a callable of t
    (exact model value) or a sequence aligned with the grid (cross-replicate
    mean).  Centering by the replicate's own mean is not offered: the path
    would degenerate to 0 by construction.
    """
    if family not in _FUNCTIONALS:
        raise ValueError(f"family must be 'max' or 'count', got {family!r}")
    if centering is None:
        raise ValueError("centering is required (exact value or cross-replicate mean)")
    h = _FUNCTIONALS[family]
    grid = np.asarray(grid, dtype=float)
    if callable(centering):
        expected = np.array([float(centering(t)) for t in grid])
        mode = "model_oracle"
    else:
        expected = np.asarray(centering, dtype=float)
        if expected.shape != grid.shape:
            raise ValueError("centering sequence must align with the grid")
        mode = "mc_mean"
    scale = 1.0 / np.sqrt(sb.n * sb.v)
    values = np.array(
        [scale * (h(sb.blocks, t).sum() - sb.m * e) for t, e in zip(grid, expected)]
    )
    return ProcessPath(grid=grid, values=values, centering=mode)


# ---------------------------------------------------------------------------
# Covariance kernels
# ---------------------------------------------------------------------------


class ClosedFormIID:
    """Exact kernel for independent data: c_g = c_fg = min(s, t), c = 0."""

    theta = 1.0

    def c_g(self, s: float, t: float) -> float:
        return min(s, t)

    def c_fg(self, s: float, t: float) -> float:
        return min(s, t)

    def c(self, s: float, t: float) -> float:
        return 0.0


class TailChainSeries:
    """Kernel assembled from standardized windows started at an exceedance.

    ``windows`` has one row per collected exceedance; row entries are the
    standardized excesses of the K observations starting there (the first
    entry is the starting excess itself).  Probabilities over the tail
    sequence are estimated by counting rows; series over k are truncated at K.
    """

    def __init__(self, windows: np.ndarray, theta: float, v: float):
        self.windows = np.asarray(windows, dtype=float)
        if self.windows.ndim != 2 or self.windows.shape[0] < 50:
            raise ValueError("need at least 50 collected windows")
        self.theta = theta
        self.v = v
        self.K = self.windows.shape[1]

    def p_joint(self, s: float, t: float, k: int) -> float:
        """Estimate of P{W_1 > 1-s, W_k > 1-t}."""
        w = self.windows
        return float(np.mean((w[:, 0] > 1.0 - s) & (w[:, k - 1] > 1.0 - t)))

    def c_g(self, s: float, t: float, K: int | None = None) -> float:
        K = self.K if K is None else min(K, self.K)
        w = self.windows
        first_s = w[:, 0] > 1.0 - s
        first_t = w[:, 0] > 1.0 - t
        later_t = w[:, 1:K] > 1.0 - t
        later_s = w[:, 1:K] > 1.0 - s
        series = np.mean(first_s[:, None] & later_t, axis=0).sum()
        series += np.mean(first_t[:, None] & later_s, axis=0).sum()
        return min(s, t) + float(series)

    def c_fg(self, s: float, t: float, K: int | None = None) -> float:
        if s >= t:
            return t
        K = self.K if K is None else min(K, self.K)
        w = self.windows[:, :K]
        first = w[:, 0]
        rest = w[:, 1:]
        whole_max = w.max(axis=1)
        rest_max = rest.max(axis=1) if rest.shape[1] else np.zeros(len(w))
        lead = np.mean((first > 1.0 - t) & (whole_max > 1.0 - s))
        hit_t = rest > 1.0 - t
        series = np.mean(
            (first > 1.0 - s)[:, None] & hit_t & (rest_max <= 1.0 - s)[:, None], axis=0
        ).sum()
        return float(lead + series)

    def c(self, s: float, t: float) -> float:
        th = self.theta
        return th * (min(s, t) - self.c_fg(s, t) - self.c_fg(t, s)) + th * th * self.c_g(s, t)

    def truncation_stability(self, drop: int = 10) -> float:
        """Relative change of c_g(1, 1) when the window tail is shortened."""
        full = self.c_g(1.0, 1.0)
        short = self.c_g(1.0, 1.0, K=self.K - drop)
        return abs(full - short) / abs(full)


class MCGrid:
    """Empirical covariance kernel on a grid, bilinearly interpolated off-grid.

    The grid is implicitly extended by t = 0 where every path (and hence every
    covariance) vanishes, so evaluation is defined on [0, max(grid)]^2.
    """

    def __init__(self, grid, c_mat, cg_mat, cfg_mat, theta: float):
        grid = np.asarray(grid, dtype=float)
        if np.any(np.diff(grid) <= 0) or grid[0] <= 0.0:
            raise ValueError("grid must be strictly increasing and positive")
        self.grid = grid
        self.theta = theta
        self._ext = np.concatenate([[0.0], grid])
        self._c = self._pad(c_mat)
        self._cg = self._pad(cg_mat)
        self._cfg = self._pad(cfg_mat)

    @staticmethod
    def _pad(mat) -> np.ndarray:
        # np.cov of a single variable is 0-d; promote to a 1x1 matrix
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        g = mat.shape[0]
        out = np.zeros((g + 1, g + 1))
        out[1:, 1:] = mat
        return out

    def _bilinear(self, mat: np.ndarray, s: float, t: float) -> float:
        g = self._ext
        if not (0.0 <= s <= g[-1] and 0.0 <= t <= g[-1]):
            raise ValueError(f"point ({s}, {t}) outside kernel grid range")
        i = min(int(np.searchsorted(g, s, side="right")), len(g) - 1)
        j = min(int(np.searchsorted(g, t, side="right")), len(g) - 1)
        i0, j0 = i - 1, j - 1
        ds = (s - g[i0]) / (g[i] - g[i0])
        dt = (t - g[j0]) / (g[j] - g[j0])
        return float(
            mat[i0, j0] * (1 - ds) * (1 - dt)
            + mat[i, j0] * ds * (1 - dt)
            + mat[i0, j] * (1 - ds) * dt
            + mat[i, j] * ds * dt
        )

    def c(self, s: float, t: float) -> float:
        return self._bilinear(self._c, s, t)

    def c_g(self, s: float, t: float) -> float:
        return self._bilinear(self._cg, s, t)

    def c_fg(self, s: float, t: float) -> float:
        return self._bilinear(self._cfg, s, t)


def estimate_kernel_mc(
    model, n: int, cfg: EstimatorConfig, grid, replicates: int, seed: int,
    marginal_cdf=None,
) -> MCGrid:
    """Monte Carlo covariance kernel of the combined process Z_f - theta * Z_g.

    Simulates ``replicates`` independent paths, builds the functional sums on
    the grid, centers them by cross-replicate means, and returns the empirical
    covariance matrices (combined, count-count, and indicator-count cross) as
    an interpolating kernel.  theta is the Monte Carlo mean of the blocks
    estimate at t = 1.
    """
    if replicates < 100:
        raise ValueError(f"need at least 100 replicates, got {replicates}")
    grid = np.asarray(grid, dtype=float)
    v = cfg.v(n)
    sf = np.zeros((replicates, grid.size))
    sg = np.zeros((replicates, grid.size))
    theta_hats = np.zeros(replicates)
    for rep in range(replicates):
        x = sim.generate(model, n, sim.substream(seed, rep))
        sb = standardize(x, v=v, r=cfg.r, marginal_cdf=marginal_cdf)
        for j, t in enumerate(grid):
            sf[rep, j] = f_max(sb.blocks, t).sum()
            sg[rep, j] = g_count(sb.blocks, t).sum()
        theta_hats[rep] = BlocksEvaluator(x, cfg.r, cfg.k)(1.0)
    scale = 1.0 / np.sqrt(n * v)
    zf = scale * (sf - sf.mean(axis=0))
    zg = scale * (sg - sg.mean(axis=0))
    theta = float(theta_hats.mean())
    w = zf - theta * zg
    c_mat = np.cov(w, rowvar=False)
    cg_mat = np.cov(zg, rowvar=False)
    cfg_mat = zf.T @ zg / (replicates - 1)  # rows already centered
    return MCGrid(grid, c_mat, cg_mat, cfg_mat, theta)


def tail_chain_probabilities(
    model, v: float, K: int = 50, replicates: int = 100, seed: int = 0,
    n: int = 10_000,
) -> TailChainSeries:
    """Kernel from standardized windows of length K started at each exceedance.

    Windows are collected over ``replicates`` simulated paths using the exact
    model marginal; windows running past a path's end are discarded.
    """
    if K < 2:
        raise ValueError(f"K must be at least 2, got {K}")
    marginal = sim.model_marginal(model)
    rows = []
    for rep in range(replicates):
        x = sim.generate(model, n, sim.substream(seed, rep))
        u = np.asarray(marginal.cdf(x.values), dtype=float)
        excess = np.clip((u - (1.0 - v)) / v, 0.0, None)
        starts = np.flatnonzero(excess[: n - K + 1] > 0.0)
        for i in starts:
            rows.append(excess[i : i + K])
    if len(rows) < 50:
        raise ValueError(f"only {len(rows)} windows collected; need at least 50")
    return TailChainSeries(np.array(rows), theta=sim.model_theta(model), v=v)
