"""Exponential families on {-1,+1}^n with monomial sufficient statistics.

The model is q_theta(x) = exp(sum_j theta_j T_j(x) - psi(theta)) * 2^{-n} with
statistics T_j(x) = x^{alpha_j} for nonzero masks alpha_j, so every statistic
is centered under the uniform reference density.  For n up to ``EXACT_LIMIT``
an exact engine computes the log partition function, mean parameters, Fisher
information and the gradient of theta -> E_theta[f] by full enumeration; for
larger n a seeded single-site Gibbs sampler produces populations.  The module
also carries the finite-space isometric transport between centered
square-integrable variables at two densities.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .walsh import EXACT_LIMIT, MultiIndex, PseudoBooleanFunction, mask_from_vars, synthesize, vars_from_mask


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered distinct nonzero monomial masks defining the statistics."""

    n: int
    masks: tuple[MultiIndex, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        object.__setattr__(self, "masks", tuple(int(m) for m in self.masks))
        if len(set(self.masks)) != len(self.masks):
            raise ValueError("duplicate monomials in basis")
        for m in self.masks:
            if m == 0:
                raise ValueError("zero mask not allowed: statistics must be centered")
            if m >= (1 << self.n):
                raise ValueError(f"mask {m:#x} does not fit n={self.n}")

    @property
    def d(self) -> int:
        return len(self.masks)

    @classmethod
    def singletons(cls, n: int) -> "MonomialBasis":
        """The independence basis {x_1, ..., x_n}."""
        return cls(n, tuple(1 << i for i in range(n)))

    @classmethod
    def from_var_lists(cls, n: int, var_lists) -> "MonomialBasis":
        return cls(n, tuple(mask_from_vars(vs, n) for vs in var_lists))


def basis_to_text(basis: MonomialBasis) -> str:
    """One monomial per line as 1-based variable indices."""
    return "\n".join(" ".join(str(v) for v in vars_from_mask(m)) for m in basis.masks) + "\n"


def basis_from_text(text: str, n: int | None = None) -> MonomialBasis:
    var_lists = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        var_lists.append(tuple(int(tok) for tok in line.split()))
    if not var_lists:
        raise ValueError("no monomials found")
    dim = n if n is not None else max(max(vs) for vs in var_lists)
    return MonomialBasis.from_var_lists(dim, var_lists)


@dataclass
class FiniteDensity:
    """Strictly positive probabilities over the 2^n states, canonical order."""

    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        size = self.table.size
        if size < 2 or size & (size - 1):
            raise ValueError("table length must be a power of two >= 2")
        if np.any(self.table <= 0.0):
            raise ValueError("density must be strictly positive")
        if abs(self.table.sum() - 1.0) > 1e-12:
            raise ValueError("density must sum to 1 within 1e-12")

    @property
    def n(self) -> int:
        return self.table.size.bit_length() - 1


def _check_exact(n: int, exact_limit: int) -> None:
    if n > exact_limit:
        raise ValueError(f"dimension {n} exceeds exact-engine limit {exact_limit}; "
                         "use the Gibbs sampler instead")


def _theta_vector(basis: MonomialBasis, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (basis.d,):
        raise ValueError(f"theta must have shape ({basis.d},), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta entries must be finite")
    return theta


class ExactModel:
    """Enumeration engine caching the 2^n-by-d statistic matrix."""

    def __init__(self, basis: MonomialBasis, exact_limit: int = EXACT_LIMIT):
        _check_exact(basis.n, exact_limit)
        self.basis = basis
        states = np.arange(1 << basis.n)
        # spins[k, i] = +1 when bit i of k is 0, -1 when it is 1
        self.spins = 1 - 2 * ((states[:, None] >> np.arange(basis.n)[None, :]) & 1)
        cols = []
        for mask in basis.masks:
            col = np.ones(states.size, dtype=np.int8)
            for v in vars_from_mask(mask):
                col = col * self.spins[:, v - 1]
            cols.append(col)
        self.stat_matrix = np.stack(cols, axis=1).astype(float)

    def log_partition(self, theta) -> float:
        theta = _theta_vector(self.basis, theta)
        exponents = self.stat_matrix @ theta
        shift = exponents.max()
        return float(shift + np.log(np.exp(exponents - shift).mean()))

    def density(self, theta) -> FiniteDensity:
        theta = _theta_vector(self.basis, theta)
        exponents = self.stat_matrix @ theta
        psi = self.log_partition(theta)
        return FiniteDensity(np.exp(exponents - psi) / exponents.size)

    def mean_params(self, theta) -> np.ndarray:
        q = self.density(theta).table
        return self.stat_matrix.T @ q

    def fisher_information(self, theta) -> np.ndarray:
        q = self.density(theta).table
        eta = self.stat_matrix.T @ q
        second = self.stat_matrix.T @ (q[:, None] * self.stat_matrix)
        cov = second - np.outer(eta, eta)
        return (cov + cov.T) / 2.0

    def expectation(self, theta, f: PseudoBooleanFunction) -> float:
        q = self.density(theta).table
        return float(self._f_table(f) @ q)

    def sr_gradient(self, theta, f: PseudoBooleanFunction) -> np.ndarray:
        q = self.density(theta).table
        fx = self._f_table(f)
        eta = self.stat_matrix.T @ q
        mean_f = fx @ q
        return self.stat_matrix.T @ (q * fx) - mean_f * eta

    def _f_table(self, f: PseudoBooleanFunction) -> np.ndarray:
        if f.n != self.basis.n:
            raise ValueError(f"function dimension {f.n} != basis dimension {self.basis.n}")
        return synthesize(f)


@lru_cache(maxsize=64)
def _cached_model(basis: MonomialBasis) -> ExactModel:
    return ExactModel(basis)


def log_partition(basis: MonomialBasis, theta) -> float:
    """psi(theta) = log E_uniform[e^{theta . T}], by stable log-sum-exp."""
    return _cached_model(basis).log_partition(theta)


def density(basis: MonomialBasis, theta) -> FiniteDensity:
    """The model density as an explicit probability table."""
    return _cached_model(basis).density(theta)


def mean_params(basis: MonomialBasis, theta) -> np.ndarray:
    """eta = grad psi(theta) = E_theta[T]; each entry lies in (-1, 1)."""
    return _cached_model(basis).mean_params(theta)


def fisher_information(basis: MonomialBasis, theta) -> np.ndarray:
    """Hess psi(theta) = Cov_theta(T), symmetrized."""
    return _cached_model(basis).fisher_information(theta)


def expectation(basis: MonomialBasis, theta, f: PseudoBooleanFunction) -> float:
    """E_theta[f] by enumeration."""
    return _cached_model(basis).expectation(theta, f)


def sr_gradient_exact(basis: MonomialBasis, theta, f: PseudoBooleanFunction) -> np.ndarray:
    """Gradient of theta -> E_theta[f], i.e. (Cov_theta(f, T_j))_j."""
    return _cached_model(basis).sr_gradient(theta, f)


# ---------------------------------------------------------------------------
# Gibbs sampling


def _site_structure(basis: MonomialBasis):
    """CSR-style arrays: variables of each monomial, monomials touching each site."""
    mono_vars: list[int] = []
    mono_ptr = [0]
    for mask in basis.masks:
        mono_vars.extend(v - 1 for v in vars_from_mask(mask))
        mono_ptr.append(len(mono_vars))
    site_monos: list[int] = []
    site_ptr = [0]
    for i in range(basis.n):
        for j, mask in enumerate(basis.masks):
            if mask >> i & 1:
                site_monos.append(j)
        site_ptr.append(len(site_monos))
    return (np.array(mono_ptr, dtype=np.int64), np.array(mono_vars, dtype=np.int64),
            np.array(site_ptr, dtype=np.int64), np.array(site_monos, dtype=np.int64))


@njit(cache=True)
def _gibbs_sweep(state, theta, mono_ptr, mono_vars, site_ptr, site_monos,
                 order, use_order, sweep_idx, unif, k):
    n = state.size
    for pos in range(n):
        i = order[sweep_idx, pos] if use_order else pos
        h = 0.0
        for jj in range(site_ptr[i], site_ptr[i + 1]):
            j = site_monos[jj]
            prod = theta[j]
            for vv in range(mono_ptr[j], mono_ptr[j + 1]):
                v = mono_vars[vv]
                if v != i:
                    prod *= state[v]
            h += prod
        p_plus = 1.0 / (1.0 + np.exp(-2.0 * h))
        state[i] = 1 if unif[k] < p_plus else -1
        k += 1
    return k


@njit(cache=True)
def _gibbs_kernel(state, theta, mono_ptr, mono_vars, site_ptr, site_monos,
                  order, use_order, unif, out, burn_in, thinning):
    k = 0
    sweep_idx = 0
    for _ in range(burn_in):
        k = _gibbs_sweep(state, theta, mono_ptr, mono_vars, site_ptr, site_monos,
                         order, use_order, sweep_idx, unif, k)
        sweep_idx += 1
    for r in range(out.shape[0]):
        for _ in range(thinning):
            k = _gibbs_sweep(state, theta, mono_ptr, mono_vars, site_ptr, site_monos,
                             order, use_order, sweep_idx, unif, k)
            sweep_idx += 1
        out[r] = state


def gibbs_sampler(basis: MonomialBasis, theta, count: int, burn_in: int = 100,
                  thinning: int = 1, seed: int = 0, scan: str = "systematic") -> np.ndarray:
    """Draw ``count`` spin vectors from q_theta by single-site Gibbs sweeps.

    Site i is resampled with p(x_i=+1 | rest) = e^{h_i} / (e^{h_i} + e^{-h_i})
    where h_i sums theta_j x^{alpha_j \\ {i}} over the monomials containing i.
    A sweep visits sites 0..n-1 in order (``scan="systematic"``) or in a
    seeded random permutation per sweep (``scan="random"``).  ``burn_in``
    sweeps are discarded, then one vector is recorded every ``thinning``
    sweeps.  Output is bit-reproducible for a given seed: the generator draws
    the initial state, then the scan orders (random scan only), then one
    uniform per site update, in that order.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if burn_in < 0 or thinning < 0:
        raise ValueError("burn_in and thinning must be >= 0")
    if scan not in ("systematic", "random"):
        raise ValueError(f"unknown scan order {scan!r}")
    theta = _theta_vector(basis, theta)
    n = basis.n
    rng = np.random.default_rng(seed)
    state = (1 - 2 * rng.integers(0, 2, size=n)).astype(np.int8)
    total_sweeps = burn_in + count * thinning
    use_order = scan == "random"
    if use_order:
        order = np.tile(np.arange(n, dtype=np.int64), (max(total_sweeps, 1), 1))
        order = rng.permuted(order, axis=1)
    else:
        order = np.zeros((1, 1), dtype=np.int64)
    unif = rng.random(total_sweeps * n)
    out = np.empty((count, n), dtype=np.int8)
    mono_ptr, mono_vars, site_ptr, site_monos = _site_structure(basis)
    _gibbs_kernel(state, theta, mono_ptr, mono_vars, site_ptr, site_monos,
                  order, use_order, unif, out, burn_in, thinning)
    return out


# ---------------------------------------------------------------------------
# Isometric transport on the Hilbert bundle


def hilbert_transport(p, q, u) -> np.ndarray:
    """Carry a p-centered table u to a q-centered one, preserving L2 products.

    v = sqrt(p/q) u - (1 + E_q[sqrt(p/q)])^{-1} (1 + sqrt(p/q)) E_q[sqrt(p/q) u]

    satisfies E_q[v] = 0 and <Uu, Uw>_q = <u, w>_p for all centered u, w.
    """
    p_tab = p.table if isinstance(p, FiniteDensity) else FiniteDensity(p).table
    q_tab = q.table if isinstance(q, FiniteDensity) else FiniteDensity(q).table
    u = np.asarray(u, dtype=float)
    if p_tab.shape != q_tab.shape or u.shape != p_tab.shape:
        raise ValueError("p, q and u must share one shape")
    if abs(float(p_tab @ u)) > 1e-10:
        raise ValueError("u must be centered under p (|E_p[u]| <= 1e-10)")
    ratio = np.sqrt(p_tab / q_tab)
    mean_ratio = float(q_tab @ ratio)
    mean_ru = float(q_tab @ (ratio * u))
    return ratio * u - (1.0 + ratio) * mean_ru / (1.0 + mean_ratio)
