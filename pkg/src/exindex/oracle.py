"""Closed-form and numerically exact finite-sample targets for the estimators.

For the random-repetition model with repeat probability psi (extremal index
theta = 1 - psi) and a continuous innovation law, the finite-sample mean curve
of the blocks estimator at exceedance fraction v and level t is

    theta_nt_wn(psi, r, v, t) = (1 - (1 - v t) (1 - theta v t)^(r-1)) / (r v t)
                              = theta - (theta^2 / 2) r v t + (1 - theta) / r
                                + O(v + r^2 v^2),

so the curve is linear in t to leading order (delta = 1) with slope
c_n = -theta^2 r v / 2 and level theta_n = theta + (1 - theta) / r.

For the moving-maxima model the non-exceedance probability of a block maximum
is an exact finite product over innovation positions, each scaled by the
largest coefficient through which that innovation can influence the block;
inverting the marginal numerically makes theta_nt exact up to quantile
tolerance.  Its leading bias is a multiple of t^(beta2/beta1) in the
small-threshold regime (r v^(b2/b1) large, r v^(1-b2/b1) small), and linear in
t in the general regime (r v^max(1/2, 1-b2/b1) large); both expansions are
reported with diagnostics because the regimes are asymptotic statements.

Independent data admit the exact curve (1 - (1 - v t)^r) / (r v t) and a
degenerate tail sequence, making the limit covariance of the normalized blocks
estimator vanish identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clusterproc import ClosedFormIID
from .sim import MovingMaxima, model_marginal

__all__ = [
    "BiasExpansion",
    "MMExpansionReport",
    "theta_nt_wn",
    "theta_nt_iid",
    "bias_expansion_wn",
    "block_exceed_prob_wn",
    "expected_g",
    "mm_block_nonexceed",
    "theta_nt_mm_exact",
    "block_exceed_prob_mm",
    "bias_expansion_mm",
    "iid_kernel",
]


@dataclass(frozen=True)
class BiasExpansion:
    """Curve model theta_n + c_n * t^delta (+ remainder) for a mean estimate curve."""

    theta: float
    theta_n: float
    c_n: float
    delta: float
    note: str = ""

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    def curve(self, t):
        return self.theta_n + self.c_n * np.asarray(t, dtype=float) ** self.delta


def _check_wn_args(psi: float, r: int, v: float, t: float) -> None:
    if not 0.0 <= psi < 1.0:
        raise ValueError(f"psi must lie in [0, 1), got {psi}")
    if r < 1:
        raise ValueError(f"r must be at least 1, got {r}")
    if not 0.0 < v * t < 1.0:
        raise ValueError(f"v*t must lie in (0, 1), got {v * t}")


def theta_nt_wn(psi: float, r: int, v: float, t: float) -> float:
    """Exact mean curve of the blocks estimator under random repetition."""
    _check_wn_args(psi, r, v, t)
    theta = 1.0 - psi
    vt = v * t
    return (1.0 - (1.0 - vt) * (1.0 - theta * vt) ** (r - 1)) / (r * vt)


def theta_nt_iid(r: int, v: float, t: float) -> float:
    """Exact mean curve of the blocks estimator for independent data."""
    return theta_nt_wn(0.0, r, v, t)


def block_exceed_prob_wn(psi: float, r: int, v: float, t: float) -> float:
    """P{maximum of an r-block exceeds the (1 - v t)-quantile} under random repetition."""
    _check_wn_args(psi, r, v, t)
    theta = 1.0 - psi
    vt = v * t
    return 1.0 - (1.0 - vt) * (1.0 - theta * vt) ** (r - 1)


def expected_g(r: int, v: float, t: float) -> float:
    """Exact mean exceedance count per r-block at level t: r * v * t.

    Holds for every stationary model with a continuous marginal, because each
    of the r positions exceeds the (1 - v t)-quantile with probability v t.
    """
    return r * v * t


def bias_expansion_wn(psi: float, r: int, v: float) -> BiasExpansion:
    """Leading curve model under random repetition: linear in t (delta = 1)."""
    _check_wn_args(psi, r, v, 1.0)
    theta = 1.0 - psi
    return BiasExpansion(
        theta=theta,
        theta_n=theta + (1.0 - theta) / r,
        c_n=-0.5 * theta * theta * r * v,
        delta=1.0,
        note=f"remainder O(v + r^2 v^2) = O({v + r * r * v * v:.3g}); "
        "slope dominates the remainder when r^2 v is large",
    )


# ---------------------------------------------------------------------------
# Moving maxima
# ---------------------------------------------------------------------------


def mm_block_nonexceed(spec: MovingMaxima, r: int, u: float) -> float:
    """Exact P{max of an r-block <= u} for the moving-maxima model.

    The block maximum is below u iff every innovation Z_m feeding the block
    satisfies psi_j * Z_m <= u for each coefficient j through which it enters,
    i.e. Z_m <= u / psi*_m with psi*_m the largest applicable coefficient.
    Innovations with no applicable coefficient (or only zero ones) contribute
    factor 1.
    """
    if r < 1:
        raise ValueError(f"r must be at least 1, got {r}")
    fz = spec.innovation.cdf
    q = spec.q
    prob = 1.0
    for m in range(1 - q, r + 1):
        lo = max(0, 1 - m)
        hi = min(q, r - m)
        if lo > hi:
            continue
        best = max(spec.coeffs[lo : hi + 1])
        if best > 0.0:
            prob *= float(fz(u / best))
    return prob


def theta_nt_mm_exact(spec: MovingMaxima, r: int, v: float, t: float) -> float:
    """Exact mean curve of the blocks estimator for the moving-maxima model.

    Inverts the stationary marginal at 1 - v t numerically, then evaluates the
    exact block-maximum probability product.
    """
    vt = v * t
    if not 0.0 < vt < 1.0:
        raise ValueError(f"v*t must lie in (0, 1), got {vt}")
    u = model_marginal(spec).quantile(1.0 - vt)
    return (1.0 - mm_block_nonexceed(spec, r, u)) / (r * vt)


def block_exceed_prob_mm(spec: MovingMaxima, r: int, v: float, t: float) -> float:
    """Exact P{max of an r-block exceeds the (1 - v t)-quantile} for moving maxima."""
    vt = v * t
    if not 0.0 < vt < 1.0:
        raise ValueError(f"v*t must lie in (0, 1), got {vt}")
    u = model_marginal(spec).quantile(1.0 - vt)
    return 1.0 - mm_block_nonexceed(spec, r, u)


@dataclass(frozen=True)
class MMExpansionReport:
    """Both leading-bias expansions for moving maxima, plus regime diagnostics.

    ``power`` has exponent delta = beta2/beta1 and applies when the window is
    long relative to the threshold (r v^(b2/b1) large, r v^(1-b2/b1) small);
    ``linear`` has delta = 1 and applies in the general regime.  ``selected``
    names the branch whose finite-sample inequalities look satisfied; both are
    always reported because the regimes are asymptotic and can be ambiguous.
    """

    theta: float
    power: BiasExpansion
    linear: BiasExpansion
    selected: str  # "power" | "linear"
    diagnostics: dict

    @property
    def expansion(self) -> BiasExpansion:
        return self.power if self.selected == "power" else self.linear

    # Delegation so the report can stand in for the selected expansion.
    @property
    def theta_n(self) -> float:
        return self.expansion.theta_n

    @property
    def c_n(self) -> float:
        return self.expansion.c_n

    @property
    def delta(self) -> float:
        return self.expansion.delta

    def curve(self, t):
        return self.expansion.curve(t)


def bias_expansion_mm(spec: MovingMaxima, r: int, v: float) -> MMExpansionReport:
    """Leading curve models for the moving-maxima blocks estimator."""
    if r < 1:
        raise ValueError(f"r must be at least 1, got {r}")
    if not 0.0 < v < 1.0:
        raise ValueError(f"v must lie in (0, 1), got {v}")
    s1 = sum(c ** spec.beta1 for c in spec.coeffs)
    s2 = sum(c ** (spec.beta1 + spec.beta2) for c in spec.coeffs)
    theta = 1.0 / s1
    ratio = spec.beta2 / spec.beta1
    d = (
        spec.c2
        / spec.c1 ** ratio
        * s1 ** -(1.0 + ratio)
        * (1.0 - s2 / s1)
    )
    power = BiasExpansion(
        theta=theta,
        theta_n=theta,
        c_n=d * v ** ratio,
        delta=ratio,
        note=f"d={d:.6g}; requires beta2 < beta1 (here ratio={ratio:.3g})",
    )
    linear = BiasExpansion(
        theta=theta,
        theta_n=theta,
        c_n=-0.5 * theta * theta * r * v,
        delta=1.0,
        note="general regime",
    )
    grow = r * v ** ratio
    shrink = r * v ** (1.0 - ratio)
    general = r * v ** max(0.5, 1.0 - ratio)
    power_ok = spec.beta2 < spec.beta1 and grow > 1.0 and shrink < 1.0
    return MMExpansionReport(
        theta=theta,
        power=power,
        linear=linear,
        selected="power" if power_ok else "linear",
        diagnostics={
            "d": d,
            "r*v^(b2/b1)": grow,
            "r*v^(1-b2/b1)": shrink,
            "r*v^max(1/2,1-b2/b1)": general,
            "beta2<beta1": spec.beta2 < spec.beta1,
        },
    )


def iid_kernel() -> ClosedFormIID:
    """Exact limit covariance kernel for independent data (c identically 0)."""
    return ClosedFormIID()
