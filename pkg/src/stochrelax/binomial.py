"""The binomial exponential family in natural and expectation coordinates.

On the sample space {0, ..., n} with base measure mu(x) = C(n, x), densities
with respect to mu are written three equivalent ways:

    exponential:  p(x; theta) = exp(theta x - psi(theta)),  psi = n log(1+e^theta)
    standard:     p(x; eta)   = (eta/n)^x (1 - eta/n)^{n-x},  eta = n e^theta/(1+e^theta)
    Bregman:      p(x; eta)   = e^{-D(x||eta)} e^{psi*(x)}

where psi* is the convex conjugate of psi and D is its Bregman divergence.
The exponential form only covers eta in (0, n); the conjugate extends the
standard form to the closed interval, with psi*(0) = psi*(n) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BinomialModel:
    """Number of trials of the family."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")


def _check_x(model: BinomialModel, x: int) -> int:
    x = int(x)
    if not 0 <= x <= model.n:
        raise ValueError(f"x must be in 0..{model.n}")
    return x


def psi(model: BinomialModel, theta: float) -> float:
    """Log partition n log(1 + e^theta), in stable softplus form."""
    return model.n * float(np.logaddexp(0.0, theta))


def eta_from_theta(model: BinomialModel, theta: float) -> float:
    """Mean parameter n e^theta / (1 + e^theta), in (0, n)."""
    return float(model.n / (1.0 + np.exp(-float(theta))))


def theta_from_eta(model: BinomialModel, eta: float) -> float:
    """Inverse mean map log(eta / (n - eta)); eta must be interior."""
    eta = float(eta)
    if not 0.0 < eta < model.n:
        raise ValueError(f"eta must lie in the open interval (0, {model.n})")
    return float(np.log(eta / (model.n - eta)))


def psi_star(model: BinomialModel, eta: float) -> float:
    """Convex conjugate of psi on the extended reals.

    +inf outside [0, n], zero at the endpoints, and
    eta log(eta/(n-eta)) - n log(n/(n-eta)) inside.
    """
    eta = float(eta)
    n = model.n
    if eta < 0.0 or eta > n:
        return np.inf
    if eta == 0.0 or eta == n:
        return 0.0
    return float(eta * np.log(eta / (n - eta)) - n * np.log(n / (n - eta)))


def log_density_exp(model: BinomialModel, x: int, theta: float) -> float:
    """log of the exponential-form density theta x - psi(theta)."""
    x = _check_x(model, x)
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    return theta * x - psi(model, theta)


def density_exp(model: BinomialModel, x: int, theta: float) -> float:
    return float(np.exp(log_density_exp(model, x, theta)))


def log_density_std(model: BinomialModel, x: int, eta: float) -> float:
    """log of (eta/n)^x (1 - eta/n)^{n-x}; defined on the closed [0, n]."""
    x = _check_x(model, x)
    eta = float(eta)
    n = model.n
    if not 0.0 <= eta <= n:
        raise ValueError(f"eta must lie in [0, {n}]")
    if eta == 0.0:
        return 0.0 if x == 0 else -np.inf
    if eta == n:
        return 0.0 if x == n else -np.inf
    return float(x * np.log(eta / n) + (n - x) * np.log1p(-eta / n))


def density_std(model: BinomialModel, x: int, eta: float) -> float:
    return float(np.exp(log_density_std(model, x, eta)))


def bregman_divergence(model: BinomialModel, x: int, eta: float) -> float:
    """D(x || eta) = psi*(x) - psi*(eta) - psi*'(eta) (x - eta) >= 0.

    The conjugate's derivative is the inverse mean map log(eta/(n-eta));
    eta must be interior for it to exist.
    """
    x = _check_x(model, x)
    eta = float(eta)
    if not 0.0 < eta < model.n:
        raise ValueError(f"eta must lie in the open interval (0, {model.n})")
    slope = theta_from_eta(model, eta)
    return float(psi_star(model, float(x)) - psi_star(model, eta) - slope * (x - eta))


def log_density_bregman(model: BinomialModel, x: int, eta: float) -> float:
    """log of e^{-D(x||eta)} e^{psi*(x)}."""
    return -bregman_divergence(model, x, eta) + psi_star(model, float(_check_x(model, x)))


def density_bregman(model: BinomialModel, x: int, eta: float) -> float:
    return float(np.exp(log_density_bregman(model, x, eta)))


@dataclass
class BoundaryScan:
    """Numeric scan of log p(x; eta) toward the eta = 0 and eta = n endpoints."""

    x: int
    n: int
    offsets: np.ndarray          # eta = offset at the lower end, n - offset upper
    log_at_lower: np.ndarray
    log_at_upper: np.ndarray
    lower_limit_zero: bool       # log p -> 0 as eta -> 0
    lower_diverges: bool         # log p -> -inf as eta -> 0
    upper_limit_zero: bool
    upper_diverges: bool


def boundary_limit_check(model: BinomialModel, x: int,
                         divergence_threshold: float = -20.0) -> BoundaryScan:
    """Scan log p(x; eta) on eta = 10^-k and n - 10^-k, k = 1..12.

    For interior x the scan must decrease monotonically below the threshold at
    both ends; for x = 0 (resp. x = n) the matching endpoint converges to 0.
    """
    x = _check_x(model, x)
    offsets = 10.0 ** -np.arange(1, 13)
    lower = np.array([log_density_std(model, x, off) for off in offsets])
    upper = np.array([log_density_std(model, x, model.n - off) for off in offsets])

    def _diverges(vals: np.ndarray) -> bool:
        return bool(np.all(np.diff(vals) < 0) and vals[-1] < divergence_threshold)

    def _to_zero(vals: np.ndarray) -> bool:
        return bool(np.all(np.diff(np.abs(vals)) < 0) and abs(vals[-1]) < 1e-9)

    return BoundaryScan(
        x=x, n=model.n, offsets=offsets,
        log_at_lower=lower, log_at_upper=upper,
        lower_limit_zero=_to_zero(lower) if x == 0 else False,
        lower_diverges=_diverges(lower) if x != 0 else False,
        upper_limit_zero=_to_zero(upper) if x == model.n else False,
        upper_diverges=_diverges(upper) if x != model.n else False,
    )
