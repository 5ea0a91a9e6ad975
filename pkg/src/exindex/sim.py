"""Seeded simulation of the stationary model families used throughout the package.

Marginal distributions (with exact cdf/survival/quantile) and four time-series
models:

* ``IID`` -- independent draws from a given marginal.
* ``AR1Cauchy`` -- X_t = phi * X_{t-1} + eps_t with standard Cauchy innovations,
  started from its exact stationary marginal (Cauchy with scale 1/(1-phi)).
* ``RandomRepetition`` -- X_0 = Z_0 and X_t = xi_t * Z_t + (1 - xi_t) * X_{t-1}
  where the Z_t are iid draws from the innovation marginal and the xi_t are iid
  Bernoulli with P{xi_t = 0} = psi.  Each value is repeated a geometric number
  of times, so the extremal index is 1 - psi.
* ``MovingMaxima`` -- X_t = max_{0<=j<=q} psi_j * Z_{t-j} with heavy-tailed
  innovations whose survival function is c1 * z^(-b1) * (1 + c2 * z^(-b2)).

All generators are deterministic functions of (model, n, seed, burn_in).
Replicate streams come from a counter-based generator keyed by
(seed, replicate), so parallel Monte Carlo runs are reproducible independent of
scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "StandardCauchy",
    "UnitPareto",
    "SecondOrderPareto",
    "Uniform01",
    "IID",
    "AR1Cauchy",
    "RandomRepetition",
    "MovingMaxima",
    "SeriesSample",
    "substream",
    "generate",
    "quantile_second_order_pareto",
    "model_marginal",
    "model_theta",
]


# ---------------------------------------------------------------------------
# Marginal distributions
# ---------------------------------------------------------------------------


class Uniform01:
    """Uniform distribution on (0, 1)."""

    name = "uniform01"

    def cdf(self, x):
        return np.clip(x, 0.0, 1.0)

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def quantile(self, p):
        return np.asarray(p, dtype=float) if np.ndim(p) else float(p)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random(size)


class StandardCauchy:
    """Standard Cauchy distribution (location 0, scale 1)."""

    name = "cauchy"

    def cdf(self, x):
        return 0.5 + np.arctan(x) / np.pi

    def survival(self, x):
        return 0.5 - np.arctan(x) / np.pi

    def quantile(self, p):
        return np.tan(np.pi * (np.asarray(p, dtype=float) - 0.5))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_cauchy(size)


@dataclass(frozen=True)
class UnitPareto:
    """Pareto distribution on [1, inf) with survival z^(-alpha)."""

    alpha: float = 1.0
    name = "pareto"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 1.0, 0.0, 1.0 - x ** (-self.alpha))

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 1.0, 1.0, x ** (-self.alpha))

    def quantile(self, p):
        return (1.0 - np.asarray(p, dtype=float)) ** (-1.0 / self.alpha)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # 1 - U lies in (0, 1], avoiding a zero-probability division blow-up
        return (1.0 - rng.random(size)) ** (-1.0 / self.alpha)


@dataclass(frozen=True)
class SecondOrderPareto:
    """Heavy-tailed distribution with survival c1 * z^(-b1) * (1 + c2 * z^(-b2)).

    The formula only pins down the tail; the body is the same expression
    truncated at the support start ``z_min`` where it first equals 1.  For
    c2 > 0 the survival is strictly decreasing on (0, inf), so ``z_min`` always
    exists.  For c2 < 0 the expression increases up to
    z* = ((b1 + b2) * (-c2) / b1)^(1/b2) and decreases beyond it; the
    parameters are valid only if the maximum value reaches 1, so that a root
    z_min >= z* exists on the decreasing branch.
    """

    beta1: float
    beta2: float
    c1: float
    c2: float
    z_min: float = field(init=False, repr=False)
    name = "second_order_pareto"

    def __post_init__(self):
        if not (self.beta1 > 0 and self.beta2 > 0):
            raise ValueError("beta1 and beta2 must be positive")
        if not self.c1 > 0:
            raise ValueError("c1 must be positive")
        if self.c2 == 0:
            raise ValueError("c2 must be nonzero")
        object.__setattr__(self, "z_min", self._solve_support_start())

    def _raw_survival(self, z):
        return self.c1 * z ** (-self.beta1) * (1.0 + self.c2 * z ** (-self.beta2))

    def _solve_support_start(self) -> float:
        if self.c2 < 0:
            z_star = ((self.beta1 + self.beta2) * (-self.c2) / self.beta1) ** (
                1.0 / self.beta2
            )
            if self._raw_survival(z_star) < 1.0:
                raise ValueError(
                    "survival formula never reaches 1 on its decreasing branch; "
                    "parameters do not define a distribution"
                )
            lo = z_star
        else:
            lo = 1.0
            while self._raw_survival(lo) <= 1.0:
                lo /= 2.0
        hi = max(lo, 1.0)
        while self._raw_survival(hi) >= 1.0:
            hi *= 2.0
        # bisection: survival is strictly decreasing on [lo, hi]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self._raw_survival(mid) >= 1.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.z_min, 1.0, self._raw_survival(np.maximum(x, self.z_min)))
        return np.clip(out, 0.0, 1.0)

    def cdf(self, x):
        return 1.0 - self.survival(x)

    def quantile(self, p):
        scalar = np.ndim(p) == 0
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise ValueError("p must lie strictly between 0 and 1")
        target = 1.0 - p
        lo = np.full_like(target, self.z_min)
        hi = np.full_like(target, max(2.0 * self.z_min, 2.0))
        # grow the upper bracket until the survival drops below the target
        pending = self._raw_survival(hi) >= target
        while np.any(pending):
            hi[pending] *= 2.0
            pending = self._raw_survival(hi) >= target
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            above = self._raw_survival(mid) >= target
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if scalar else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        u = np.where(u == 0.0, 0.5 ** 53, u)  # keep p strictly inside (0, 1)
        return self.quantile(u)


def quantile_second_order_pareto(p: float, params: tuple) -> float:
    """Quantile of the survival law c1 * z^(-b1) * (1 + c2 * z^(-b2)).

    ``params`` is (beta1, beta2, c1, c2).  Inversion is by bracketed bisection;
    the returned z satisfies survival(z) = 1 - p to high accuracy.
    """
    beta1, beta2, c1, c2 = params
    return SecondOrderPareto(beta1, beta2, c1, c2).quantile(p)


# ---------------------------------------------------------------------------
# Model specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IID:
    """Independent draws from ``innovation``."""

    innovation: object
    name = "iid"


@dataclass(frozen=True)
class AR1Cauchy:
    """AR(1) recursion with standard Cauchy innovations; extremal index 1 - phi."""

    phi: float
    name = "ar1"

    def __post_init__(self):
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"phi must lie in (0, 1), got {self.phi}")


@dataclass(frozen=True)
class RandomRepetition:
    """Each innovation is repeated a geometric number of times; extremal index 1 - psi."""

    psi: float
    innovation: object
    name = "random_repetition"

    def __post_init__(self):
        if not 0.0 <= self.psi < 1.0:
            raise ValueError(f"psi must lie in [0, 1), got {self.psi}")


@dataclass(frozen=True)
class MovingMaxima:
    """Moving maximum of scaled heavy-tailed innovations.

    ``coeffs`` are the nonnegative scale coefficients (psi_0, ..., psi_q),
    normalized so that max_j psi_j = 1.  Innovations follow the second-order
    Pareto law with parameters (beta1, beta2, c1, c2).  The extremal index is
    1 / sum_j psi_j^beta1.
    """

    coeffs: tuple
    beta1: float
    beta2: float
    c1: float
    c2: float
    name = "moving_maxima"

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if len(coeffs) == 0:
            raise ValueError("coeffs must be nonempty")
        if any(c < 0 for c in coeffs):
            raise ValueError("coeffs must be nonnegative")
        if abs(max(coeffs) - 1.0) > 1e-12:
            raise ValueError("coeffs must be normalized so max_j psi_j = 1")
        # validates the tail parameters
        object.__setattr__(
            self, "innovation", SecondOrderPareto(self.beta1, self.beta2, self.c1, self.c2)
        )

    @property
    def q(self) -> int:
        return len(self.coeffs) - 1


@dataclass(frozen=True, eq=False)
class SeriesSample:
    """One simulated stationary path plus its generation provenance."""

    values: np.ndarray
    model: object
    seed: object
    burn_in: int = 0

    @property
    def n(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def substream(seed: int, replicate: int) -> np.random.SeedSequence:
    """Independent, reproducible seed for one replicate of a seeded experiment."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(replicate,))


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def generate(model, n: int, seed, burn_in: int = 0) -> SeriesSample:
    """Simulate a stationary path of length ``n`` from ``model``.

    ``seed`` may be an integer or a numpy ``SeedSequence`` (e.g. from
    :func:`substream`).  Identical (model, n, seed, burn_in) inputs yield
    bit-identical output.  ``burn_in`` leading values are generated and
    discarded; it may be 0 for every model here because each one starts from
    an exactly stationary state.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if burn_in < 0:
        raise ValueError(f"burn_in must be nonnegative, got {burn_in}")
    rng = _rng(seed)
    total = n + burn_in

    if isinstance(model, IID):
        values = model.innovation.sample(rng, total)
    elif isinstance(model, AR1Cauchy):
        eps = rng.standard_cauchy(total)
        x0 = rng.standard_cauchy() / (1.0 - model.phi)
        values, _ = lfilter([1.0], [1.0, -model.phi], eps, zi=[model.phi * x0])
    elif isinstance(model, RandomRepetition):
        z = model.innovation.sample(rng, total + 1)  # Z_0 .. Z_total
        renew = rng.random(total) >= model.psi  # xi_t = 1 events, t = 1..total
        pos = np.where(renew, np.arange(1, total + 1), 0)
        last = np.maximum.accumulate(pos)  # index of the innovation in force
        values = z[last]
    elif isinstance(model, MovingMaxima):
        q = model.q
        z = model.innovation.sample(rng, total + q)  # Z_{1-q} .. Z_total
        values = np.full(total, -np.inf)
        for j, coeff in enumerate(model.coeffs):
            if coeff > 0:
                np.maximum(values, coeff * z[q - j : q - j + total], out=values)
    else:
        raise ValueError(f"unknown model spec: {model!r}")

    return SeriesSample(values=np.asarray(values[burn_in:], dtype=float), model=model,
                        seed=seed, burn_in=burn_in)


# ---------------------------------------------------------------------------
# Model-level marginals and extremal indexes (for oracles and true-quantile work)
# ---------------------------------------------------------------------------


class _MovingMaximaMarginal:
    """Stationary marginal of a moving-maximum series: prod_j F_Z(x / psi_j)."""

    name = "moving_maxima_marginal"

    def __init__(self, model: MovingMaxima):
        self.model = model
        self.innovation = model.innovation

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x, dtype=float)
        for coeff in self.model.coeffs:
            if coeff > 0:
                out = out * self.innovation.cdf(x / coeff)
        return out

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def quantile(self, p):
        scalar = np.ndim(p) == 0
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if np.any((p <= 0.0) | (p >= 1.0)):
            raise ValueError("p must lie strictly between 0 and 1")
        # support starts at z_min because max_j psi_j = 1
        lo = np.full_like(p, self.innovation.z_min)
        hi = np.full_like(p, 2.0 * self.innovation.z_min)
        pending = self.cdf(hi) <= p
        while np.any(pending):
            hi[pending] *= 2.0
            pending = self.cdf(hi) <= p
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) <= p
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class _CauchyScale:
    """Cauchy distribution with location 0 and the given scale."""

    scale: float
    name = "cauchy_scaled"

    def cdf(self, x):
        return 0.5 + np.arctan(np.asarray(x, dtype=float) / self.scale) / np.pi

    def survival(self, x):
        return 0.5 - np.arctan(np.asarray(x, dtype=float) / self.scale) / np.pi

    def quantile(self, p):
        return self.scale * np.tan(np.pi * (np.asarray(p, dtype=float) - 0.5))


def model_marginal(model):
    """Exact stationary marginal distribution of ``model``."""
    if isinstance(model, IID):
        return model.innovation
    if isinstance(model, RandomRepetition):
        return model.innovation
    if isinstance(model, AR1Cauchy):
        return _CauchyScale(scale=1.0 / (1.0 - model.phi))
    if isinstance(model, MovingMaxima):
        return _MovingMaximaMarginal(model)
    raise ValueError(f"unknown model spec: {model!r}")


def model_theta(model) -> float:
    """True extremal index of ``model``."""
    if isinstance(model, IID):
        return 1.0
    if isinstance(model, RandomRepetition):
        return 1.0 - model.psi
    if isinstance(model, AR1Cauchy):
        return 1.0 - model.phi
    if isinstance(model, MovingMaxima):
        return 1.0 / sum(c ** model.beta1 for c in model.coeffs)
    raise ValueError(f"unknown model spec: {model!r}")
