"""Orlicz-space numerics for the exponential-growth Young function.

The Young function here is Phi(y) = cosh(y) - 1.  A random variable u under a
density p is summarized by the scale functional F(rho) = E_p[Phi(u / rho)],
which is non-increasing in rho; the associated (Luxemburg-type) norm is the
gauge inf{rho > 0 : F(rho) <= 1}, located numerically by bracketing and
bisection.  Two closed-form families accompany the generic machinery:

* a gamma-tail density (a+x)^{-3/2} e^{-x} on x > 0 whose Phi-expectation of
  u(x) = x is finite exactly on scales alpha in [-1, 1] and finite at the
  endpoints, the standard example of a non-steep functional;
* quadratic polynomials under the standard normal, whose moment generating
  function is available by completing the square.

Infinite values are returned in-band as IEEE +inf.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erfcx

NORM_EXPANSION_BUDGET = 60
NORM_REL_TOL = 1e-10


def phi(y: float) -> float:
    """Young function cosh(y) - 1; even, nonnegative, phi(0) = 0."""
    return float(np.cosh(y)) - 1.0


@dataclass
class PhiExpectationFunctional:
    """Scale functional rho -> E_p[Phi(u / rho)], possibly +inf.

    ``finite_interval`` optionally records the known interval of scales
    t = 1/rho with finite value, as metadata only.
    """

    fn: Callable[[float], float]
    description: str = ""
    finite_interval: tuple[float, float] | None = field(default=None)

    def __call__(self, rho: float) -> float:
        if rho <= 0:
            raise ValueError("scale rho must be positive")
        return float(self.fn(rho))


def boolean_phi_functional(f) -> PhiExpectationFunctional:
    """Functional of a centered pseudo-Boolean u under the uniform density."""
    from .walsh import phi_expectation_uniform

    return PhiExpectationFunctional(
        fn=lambda rho: phi_expectation_uniform(f, 1.0 / rho),
        description=f"uniform cube, {len(f.terms)}-term pseudo-Boolean",
    )


def orlicz_norm(functional, bracket_hint: float = 1.0,
                expansion_budget: int = NORM_EXPANSION_BUDGET,
                rel_tol: float = NORM_REL_TOL) -> float:
    """Gauge norm inf{rho > 0 : E_p[Phi(u/rho)] <= 1}.

    Starting from ``bracket_hint`` the scale is doubled until the functional
    drops to 1 or below (raising if the expansion budget 2^60 is exhausted:
    the variable is not in the Phi-space), halved until it exceeds 1 (a zero
    variable never does and has norm 0), then bisected.
    """
    if bracket_hint <= 0:
        raise ValueError("bracket_hint must be positive")
    hi = float(bracket_hint)
    steps = 0
    while functional(hi) > 1.0:
        hi *= 2.0
        steps += 1
        if steps > expansion_budget:
            raise ValueError("no finite scale with E[Phi(u/rho)] <= 1: "
                             "variable is not in the Phi-space")
    lo = hi / 2.0
    while functional(lo) <= 1.0:
        hi = lo
        lo /= 2.0
        steps += 1
        if steps > expansion_budget:
            return 0.0
    # invariant: F(lo) > 1 >= F(hi)
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if functional(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Gamma-tail family: p(x) proportional to (a+x)^{-3/2} e^{-x} on x > 0


@dataclass(frozen=True)
class GammaTailFamily:
    """Shape-shift constant a > 0 of the tail density."""

    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("a must be positive")


def gamma_tail_C(theta: float, a: float) -> float:
    """The normalization integral C(theta, a) = int_0^inf (a+x)^{-3/2} e^{-theta x} dx.

    Substituting s = theta (a+x) gives sqrt(theta) e^{theta a} Gamma(-1/2, theta a)
    for theta > 0, which integration by parts reduces to the scaled
    complementary error function:

        C(theta, a) = 2/sqrt(a) - 2 sqrt(pi theta) erfcx(sqrt(theta a)).

    The integral equals 2/sqrt(a) at theta = 0 and diverges for theta < 0.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    theta = float(theta)
    if theta < 0.0:
        return np.inf
    if theta == 0.0:
        return float(2.0 / np.sqrt(a))
    return float(2.0 / np.sqrt(a) - 2.0 * np.sqrt(np.pi * theta) * erfcx(np.sqrt(theta * a)))


def gamma_tail_phi_expectation(alpha: float, a: float) -> float:
    """E_p[Phi(alpha u)] for u(x) = x under the gamma-tail density.

    Equals (C(1-alpha, a) + C(1+alpha, a)) / (2 C(1, a)) - 1: finite exactly
    for |alpha| <= 1 and finite at the endpoints, so the functional is not
    steep.
    """
    alpha = float(alpha)
    if abs(alpha) > 1.0:
        return np.inf
    c_minus = gamma_tail_C(1.0 - alpha, a)
    c_plus = gamma_tail_C(1.0 + alpha, a)
    return float((c_minus + c_plus) / (2.0 * gamma_tail_C(1.0, a)) - 1.0)


def gamma_tail_phi_functional(a: float) -> PhiExpectationFunctional:
    return PhiExpectationFunctional(
        fn=lambda rho: gamma_tail_phi_expectation(1.0 / rho, a),
        description=f"gamma-tail density, a={a}",
        finite_interval=(-1.0, 1.0),
    )


# ---------------------------------------------------------------------------
# Quadratic polynomials under the standard normal


@dataclass(frozen=True)
class NormalQuadratic:
    """u(x) = a + b x + (1/2) c x^2 under the standard normal density."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        for name in ("a", "b", "c"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"coefficient {name} must be finite")

    def __call__(self, x):
        return self.a + self.b * x + 0.5 * self.c * x * x


def normal_quadratic_mgf(t: float, q: NormalQuadratic) -> float:
    """E[e^{t u}] under the standard normal; +inf when t c >= 1.

    Completing the square in t u(x) - x^2/2 gives

        e^{t a} (1 - t c)^{-1/2} exp(t^2 b^2 / (2 (1 - t c))).
    """
    t = float(t)
    tc = t * q.c
    if tc >= 1.0:
        return np.inf
    return float(np.exp(t * q.a) / np.sqrt(1.0 - tc)
                 * np.exp(t * t * q.b * q.b / (2.0 * (1.0 - tc))))


def normal_quadratic_phi_expectation(q: NormalQuadratic) -> float:
    """E[Phi(u)] = (mgf(1) + mgf(-1))/2 - 1; finite iff |c| < 1."""
    if abs(q.c) >= 1.0:
        return np.inf
    return 0.5 * (normal_quadratic_mgf(1.0, q) + normal_quadratic_mgf(-1.0, q)) - 1.0


def normal_quadratic_phi_functional(q: NormalQuadratic) -> PhiExpectationFunctional:
    def scaled(rho: float) -> float:
        return normal_quadratic_phi_expectation(
            NormalQuadratic(q.a / rho, q.b / rho, q.c / rho))

    return PhiExpectationFunctional(
        fn=scaled,
        description=f"standard normal, u = {q.a} + {q.b} x + {q.c} x^2/2",
    )
