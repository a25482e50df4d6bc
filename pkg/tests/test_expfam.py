"""Tests of the exact exponential-family engine, Gibbs sampler and transport.

Derivative identities are checked against central finite differences of the
log partition function / expectation map computed in this module.
"""

import numpy as np
import pytest

from stochrelax.expfam import (
    ExactModel,
    FiniteDensity,
    MonomialBasis,
    basis_from_text,
    basis_to_text,
    density,
    expectation,
    fisher_information,
    gibbs_sampler,
    hilbert_transport,
    log_partition,
    mean_params,
    sr_gradient_exact,
)
from stochrelax.optim import statistics_matrix
from stochrelax.walsh import PseudoBooleanFunction

B1 = MonomialBasis(1, (1,))


def random_basis(rng, n, d_max=10):
    d = int(rng.integers(1, min(d_max, (1 << n) - 1) + 1))
    masks = rng.choice(np.arange(1, 1 << n), size=d, replace=False)
    return MonomialBasis(n, tuple(int(m) for m in masks))


def random_function(rng, n, max_terms=6):
    count = int(rng.integers(1, max_terms + 1))
    masks = rng.choice(1 << n, size=count, replace=False)
    return PseudoBooleanFunction(n, {int(m): float(rng.uniform(-2, 2)) for m in masks})


def fd_gradient(fn, theta, step=1e-4):
    grad = np.empty(theta.size)
    for j in range(theta.size):
        up = theta.copy()
        up[j] += step
        down = theta.copy()
        down[j] -= step
        grad[j] = (fn(up) - fn(down)) / (2 * step)
    return grad


def fd_hessian(fn, theta, step=1e-3):
    d = theta.size
    hess = np.empty((d, d))
    for j in range(d):
        for k in range(d):
            pp = theta.copy(); pp[j] += step; pp[k] += step
            pm = theta.copy(); pm[j] += step; pm[k] -= step
            mp = theta.copy(); mp[j] -= step; mp[k] += step
            mm = theta.copy(); mm[j] -= step; mm[k] -= step
            hess[j, k] = (fn(pp) - fn(pm) - fn(mp) + fn(mm)) / (4 * step * step)
    return hess


# ---------------------------------------------------------------------------
# Basis


def test_basis_validation():
    with pytest.raises(ValueError):
        MonomialBasis(3, (0,))
    with pytest.raises(ValueError):
        MonomialBasis(3, (1, 1))
    with pytest.raises(ValueError):
        MonomialBasis(2, (4,))


def test_basis_singletons():
    b = MonomialBasis.singletons(4)
    assert b.masks == (1, 2, 4, 8)
    assert b.d == 4


def test_basis_text_round_trip():
    b = MonomialBasis.from_var_lists(5, [(1,), (2, 4), (3, 4, 5)])
    assert basis_from_text(basis_to_text(b), 5) == b


# ---------------------------------------------------------------------------
# Exact engine


def test_log_partition_zero_theta():
    assert log_partition(B1, [0.0]) == pytest.approx(0.0, abs=1e-14)
    b = MonomialBasis.from_var_lists(2, [(1,), (2,), (1, 2)])
    assert log_partition(b, [0.0, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-14)


def test_log_partition_single_site():
    assert log_partition(B1, [1.0]) == pytest.approx(np.log(np.cosh(1.0)), abs=1e-14)


def test_log_partition_dimension_guard():
    big = MonomialBasis.singletons(21)
    with pytest.raises(ValueError, match="exact-engine limit"):
        log_partition(big, np.zeros(21))


def test_density_uniform_at_zero():
    b = MonomialBasis.singletons(3)
    q = density(b, np.zeros(3))
    assert np.allclose(q.table, 1 / 8, atol=1e-15)


def test_density_single_site():
    q = density(B1, [1.0])
    # state 0 is x = +1 in the canonical encoding
    assert q.table[0] == pytest.approx(np.e / (np.e + np.exp(-1)), rel=1e-14)


def test_density_normalization_random():
    rng = np.random.default_rng(0)
    for _ in range(5):
        b = random_basis(rng, 6)
        theta = rng.uniform(-1.5, 1.5, b.d)
        q = density(b, theta)
        assert abs(q.table.sum() - 1.0) <= 1e-12
        assert np.all(q.table > 0)


def test_mean_params_zero_theta():
    b = MonomialBasis.from_var_lists(3, [(1,), (2, 3), (1, 2, 3)])
    assert np.allclose(mean_params(b, np.zeros(3)), 0.0, atol=1e-15)


def test_mean_params_single_site():
    assert mean_params(B1, [1.0])[0] == pytest.approx(np.tanh(1.0), abs=1e-14)


def test_mean_params_in_open_cube():
    rng = np.random.default_rng(1)
    for _ in range(5):
        b = random_basis(rng, 5)
        eta = mean_params(b, rng.uniform(-2, 2, b.d))
        assert np.all(np.abs(eta) < 1.0)


def test_mean_params_matches_fd():
    rng = np.random.default_rng(2)
    for _ in range(5):
        b = random_basis(rng, 6, d_max=8)
        theta = rng.uniform(-1, 1, b.d)
        eta = mean_params(b, theta)
        fd = fd_gradient(lambda th: log_partition(b, th), theta)
        assert np.max(np.abs(eta - fd)) <= 1e-6


def test_fisher_single_site():
    for theta in (-1.2, 0.0, 0.8):
        expected = 1.0 - np.tanh(theta) ** 2
        assert fisher_information(B1, [theta])[0, 0] == pytest.approx(expected, rel=1e-13)


def test_fisher_identity_at_zero_singletons():
    b = MonomialBasis.singletons(5)
    assert np.allclose(fisher_information(b, np.zeros(5)), np.eye(5), atol=1e-14)


def test_fisher_matches_fd_hessian():
    rng = np.random.default_rng(3)
    for _ in range(4):
        b = random_basis(rng, 5, d_max=6)
        theta = rng.uniform(-1, 1, b.d)
        fisher = fisher_information(b, theta)
        fd = fd_hessian(lambda th: log_partition(b, th), theta)
        denom = max(1.0, np.max(np.abs(fisher)))
        assert np.max(np.abs(fisher - fd)) / denom <= 1e-5


def test_fisher_psd():
    rng = np.random.default_rng(4)
    for _ in range(8):
        b = random_basis(rng, 6)
        eigs = np.linalg.eigvalsh(fisher_information(b, rng.uniform(-2, 2, b.d)))
        assert eigs.min() >= -1e-10


def test_sr_gradient_single_site():
    f = PseudoBooleanFunction(1, {1: 1.0})
    for theta in (-0.7, 0.0, 1.3):
        expected = 1.0 - np.tanh(theta) ** 2
        assert sr_gradient_exact(B1, [theta], f)[0] == pytest.approx(expected, rel=1e-13)


def test_sr_gradient_constant_function():
    b = MonomialBasis.singletons(4)
    f = PseudoBooleanFunction(4, {0: 3.0})
    grad = sr_gradient_exact(b, np.full(4, 0.3), f)
    assert np.max(np.abs(grad)) <= 1e-14


def test_sr_gradient_matches_fd():
    rng = np.random.default_rng(5)
    for _ in range(5):
        b = random_basis(rng, 6, d_max=8)
        f = random_function(rng, 6)
        theta = rng.uniform(-1, 1, b.d)
        grad = sr_gradient_exact(b, theta, f)
        fd = fd_gradient(lambda th: expectation(b, th, f), theta)
        denom = max(1.0, np.max(np.abs(grad)))
        assert np.max(np.abs(grad - fd)) / denom <= 1e-6


def test_sr_gradient_dimension_mismatch():
    with pytest.raises(ValueError):
        sr_gradient_exact(B1, [0.0], PseudoBooleanFunction(2, {1: 1.0}))


def test_psi_midpoint_convexity():
    rng = np.random.default_rng(6)
    for _ in range(10):
        b = random_basis(rng, 5)
        t1 = rng.uniform(-2, 2, b.d)
        t2 = rng.uniform(-2, 2, b.d)
        mid = log_partition(b, (t1 + t2) / 2)
        assert mid <= (log_partition(b, t1) + log_partition(b, t2)) / 2 + 1e-12


def test_mean_map_monotone():
    rng = np.random.default_rng(7)
    for _ in range(10):
        b = random_basis(rng, 5)
        t1 = rng.uniform(-2, 2, b.d)
        t2 = t1 + rng.uniform(-1, 1, b.d)
        if np.allclose(t1, t2):
            continue
        gap = (t1 - t2) @ (mean_params(b, t1) - mean_params(b, t2))
        assert gap > 0.0


def test_exact_model_caches_statistics():
    model = ExactModel(MonomialBasis.from_var_lists(3, [(1,), (1, 2)]))
    assert model.stat_matrix.shape == (8, 2)
    # column of x_1 x_2 at state 0 (all +1) is +1, at state 1 (x_1 = -1) is -1
    assert model.stat_matrix[0, 1] == 1.0
    assert model.stat_matrix[1, 1] == -1.0


# ---------------------------------------------------------------------------
# Gibbs sampler


def test_gibbs_uniform_site_means():
    b = MonomialBasis.singletons(6)
    samples = gibbs_sampler(b, np.zeros(6), 20000, burn_in=20, seed=11)
    assert samples.shape == (20000, 6)
    assert set(np.unique(samples)) <= {-1, 1}
    assert np.max(np.abs(samples.mean(axis=0))) <= 5 / np.sqrt(20000)


def test_gibbs_single_site_mean():
    n_draws = 40000
    samples = gibbs_sampler(B1, [1.0], n_draws, burn_in=50, seed=12)
    se = np.sqrt((1 - np.tanh(1.0) ** 2) / n_draws)
    assert abs(samples.mean() - np.tanh(1.0)) <= 5 * se


def test_gibbs_matches_exact_moments_n8():
    rng = np.random.default_rng(13)
    basis = random_basis(rng, 8, d_max=8)
    theta = rng.uniform(-0.5, 0.5, basis.d)
    n_draws = 100000
    samples = gibbs_sampler(basis, theta, n_draws, burn_in=100, thinning=3, seed=14)
    stats = statistics_matrix(basis, samples)
    eta = mean_params(basis, theta)
    var = np.diag(fisher_information(basis, theta))
    gap = np.abs(stats.mean(axis=0) - eta)
    assert np.all(gap <= 5 * np.sqrt(var / n_draws))


def test_gibbs_deterministic_and_scan_orders():
    b = MonomialBasis.from_var_lists(4, [(1,), (2, 3), (3, 4)])
    theta = np.array([0.4, -0.3, 0.2])
    a = gibbs_sampler(b, theta, 500, seed=21)
    b_run = gibbs_sampler(b, theta, 500, seed=21)
    assert np.array_equal(a, b_run)
    r1 = gibbs_sampler(b, theta, 500, seed=21, scan="random")
    r2 = gibbs_sampler(b, theta, 500, seed=21, scan="random")
    assert np.array_equal(r1, r2)
    assert not np.array_equal(a, r1)


def test_gibbs_validation():
    with pytest.raises(ValueError):
        gibbs_sampler(B1, [0.0], 0)
    with pytest.raises(ValueError):
        gibbs_sampler(B1, [0.0], 5, burn_in=-1)
    with pytest.raises(ValueError):
        gibbs_sampler(B1, [0.0], 5, scan="checkerboard")


def test_gibbs_beyond_exact_limit():
    b = MonomialBasis.singletons(24)
    samples = gibbs_sampler(b, np.zeros(24), 50, burn_in=5, seed=3)
    assert samples.shape == (50, 24)


# ---------------------------------------------------------------------------
# Transport


def random_density(rng, size):
    table = rng.random(size) + 0.05
    return table / table.sum()


def test_transport_identity_when_p_equals_q():
    rng = np.random.default_rng(20)
    p = random_density(rng, 32)
    u = rng.standard_normal(32)
    u -= p @ u
    assert np.max(np.abs(hilbert_transport(p, p, u) - u)) <= 1e-12


def test_transport_centers_output():
    rng = np.random.default_rng(21)
    for _ in range(10):
        p = random_density(rng, 64)
        q = random_density(rng, 64)
        u = rng.standard_normal(64)
        u -= p @ u
        assert abs(q @ hilbert_transport(p, q, u)) <= 1e-12


def test_transport_isometry():
    rng = np.random.default_rng(22)
    for _ in range(10):
        p = random_density(rng, 64)
        q = random_density(rng, 64)
        u = rng.standard_normal(64)
        u -= p @ u
        w = rng.standard_normal(64)
        w -= p @ w
        uu = hilbert_transport(p, q, u)
        uw = hilbert_transport(p, q, w)
        assert abs((q * uu) @ uw - (p * u) @ w) <= 1e-10


def test_transport_rejects_uncentered():
    rng = np.random.default_rng(23)
    p = random_density(rng, 16)
    q = random_density(rng, 16)
    with pytest.raises(ValueError, match="centered"):
        hilbert_transport(p, q, np.ones(16))


def test_transport_rejects_shape_mismatch():
    rng = np.random.default_rng(24)
    p = random_density(rng, 16)
    q = random_density(rng, 8)
    with pytest.raises(ValueError):
        hilbert_transport(p, q, np.zeros(16))


def test_finite_density_validation():
    with pytest.raises(ValueError):
        FiniteDensity(np.array([0.5, 0.5, 0.0, 0.0]))
    with pytest.raises(ValueError):
        FiniteDensity(np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        FiniteDensity(np.array([0.2, 0.3, 0.5]))
