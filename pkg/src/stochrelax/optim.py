"""Optimization of E_theta[f] over the monomial exponential family.

Three loops are provided.  ``sngd_run`` follows the empirically estimated
natural gradient: per iteration it estimates the gradient of theta ->
E_theta[f] as sample covariances Cov(f, T_j), estimates the Fisher matrix as
the sample covariance of the statistics, preconditions one with the other,
steps, and resamples with the Gibbs sampler.  ``exact_descent_run`` is the
noiseless reference on the exact engine.  ``eda_run`` is the classic sample /
truncation-select / refit loop, with a closed-form estimator for the
independence model and exact-engine moment matching for interacting bases.

All loops are deterministic for a given seed; per-iteration sampler seeds are
derived with :func:`child_seed`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import expfam
from .expfam import EXACT_LIMIT, MonomialBasis, gibbs_sampler
from .walsh import PseudoBooleanFunction, vars_from_mask

GRADIENT_TOL = 1e-8
STALL_WINDOW = 20
STALL_TOL = 1e-9
CLIP_DELTA = 1e-3


def child_seed(master: int, index: int) -> int:
    """Deterministic per-replicate / per-iteration seed: SeedSequence([master, index])."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


@dataclass
class Population:
    """N spin vectors with cached fitness values."""

    samples: np.ndarray
    fitness: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        self.fitness = np.asarray(self.fitness, dtype=float)
        if self.samples.ndim != 2:
            raise ValueError("samples must be an (N, n) array")
        if self.fitness.shape != (self.samples.shape[0],):
            raise ValueError("fitness length must match sample count")

    @classmethod
    def from_function(cls, f: PseudoBooleanFunction, samples: np.ndarray) -> "Population":
        samples = np.asarray(samples)
        return cls(samples, f.evaluate_batch(samples))

    @classmethod
    def uniform_random(cls, f: PseudoBooleanFunction, count: int, seed: int) -> "Population":
        rng = np.random.default_rng(seed)
        samples = (1 - 2 * rng.integers(0, 2, size=(count, f.n))).astype(np.int8)
        return cls.from_function(f, samples)

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    def check_fitness(self, f: PseudoBooleanFunction, tol: float = 1e-12) -> bool:
        """Re-verify the cached fitness column."""
        return bool(np.max(np.abs(self.fitness - f.evaluate_batch(self.samples)), initial=0.0) <= tol)


def _direction_sign(direction: str) -> int:
    if direction == "maximize":
        return 1
    if direction == "minimize":
        return -1
    raise ValueError(f"direction must be 'maximize' or 'minimize', got {direction!r}")


def select_truncation(pop: Population, m: int, direction: str = "maximize") -> Population:
    """The m samples with best fitness; ties keep the lowest sample index."""
    sign = _direction_sign(direction)
    if not 1 <= m <= pop.size:
        raise ValueError(f"selected size {m} must be in 1..{pop.size}")
    order = np.argsort(-sign * pop.fitness, kind="stable")[:m]
    keep = np.sort(order)
    return Population(pop.samples[keep].copy(), pop.fitness[keep].copy())


def statistics_matrix(basis: MonomialBasis, samples: np.ndarray) -> np.ndarray:
    """(N, d) matrix of T_j(x_i) = x_i^{alpha_j}."""
    samples = np.asarray(samples, dtype=float)
    cols = []
    for mask in basis.masks:
        col = np.ones(samples.shape[0])
        for v in vars_from_mask(mask):
            col = col * samples[:, v - 1]
        cols.append(col)
    return np.stack(cols, axis=1)


def empirical_sr_gradient(pop: Population, basis: MonomialBasis, ddof: int = 1) -> np.ndarray:
    """Sample covariance of fitness with each statistic.

    ``ddof=1`` (default) is the unbiased estimator; ``ddof=0`` normalizes by N
    so that a census population reproduces the exact covariance.
    """
    if pop.size < 2:
        raise ValueError("need at least 2 samples for a covariance estimate")
    stats = statistics_matrix(basis, pop.samples)
    fc = pop.fitness - pop.fitness.mean()
    tc = stats - stats.mean(axis=0)
    return tc.T @ fc / (pop.size - ddof)


def empirical_fisher(pop: Population, basis: MonomialBasis, ddof: int = 1) -> np.ndarray:
    """Sample covariance matrix of the statistics, symmetrized."""
    if pop.size < 2:
        raise ValueError("need at least 2 samples for a covariance estimate")
    stats = statistics_matrix(basis, pop.samples)
    tc = stats - stats.mean(axis=0)
    cov = tc.T @ tc / (pop.size - ddof)
    return (cov + cov.T) / 2.0


def natural_gradient_solve(i_hat: np.ndarray, g_hat: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Solve (I + ridge Id) v = g by Cholesky, escalating ridge on failure.

    Up to three retries multiply the ridge by 10 each time (starting from a
    trace-scaled floor when the given ridge is zero); an
    ``np.linalg.LinAlgError`` propagates if all attempts fail.
    """
    i_hat = np.asarray(i_hat, dtype=float)
    g_hat = np.asarray(g_hat, dtype=float)
    d = g_hat.size
    if i_hat.shape != (d, d):
        raise ValueError(f"matrix shape {i_hat.shape} does not match gradient size {d}")
    if not np.allclose(i_hat, i_hat.T, atol=1e-10 * (1.0 + np.abs(i_hat).max())):
        raise ValueError("matrix must be symmetric")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    floor = ridge if ridge > 0 else 1e-12 * (1.0 + np.trace(i_hat) / d)
    attempts = [ridge] + [floor * 10.0 ** k for k in range(1, 4)]
    last_error: Exception | None = None
    for eps in attempts:
        try:
            factor = cho_factor(i_hat + eps * np.eye(d), lower=True)
            return cho_solve(factor, g_hat)
        except np.linalg.LinAlgError as exc:
            last_error = exc
    raise np.linalg.LinAlgError(
        f"system unrecoverably singular after ridge escalation to {attempts[-1]:g}") from last_error


@dataclass
class SNGDConfig:
    """Knobs of the stochastic natural-gradient loop."""

    N: int
    learning_rate: float
    M: int | None = None            # selected size; None means no selection
    max_iters: int = 100
    seed: int = 0
    direction: str = "maximize"
    ridge: float | None = None      # None: 1e-6 * trace(I)/d per iteration
    gradient_tol: float = GRADIENT_TOL
    stall_window: int = STALL_WINDOW
    stall_tol: float = STALL_TOL
    burn_in: int = 100
    thinning: int = 1
    scan: str = "systematic"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.M is not None and not 1 <= self.M <= self.N:
            raise ValueError("M must satisfy 1 <= M <= N")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.ridge is not None and self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        _direction_sign(self.direction)


@dataclass
class EDAConfig:
    """Knobs of the estimation-of-distribution loop."""

    N: int
    M: int
    max_iters: int = 100
    seed: int = 0
    estimator: str = "closed-form-independence"
    direction: str = "maximize"
    clip_delta: float = CLIP_DELTA
    burn_in: int = 100
    thinning: int = 1

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 1 <= self.M <= self.N:
            raise ValueError("M must satisfy 1 <= M <= N")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.estimator not in ("closed-form-independence", "moment-matching"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if not 0 < self.clip_delta < 1:
            raise ValueError("clip_delta must be in (0, 1)")
        _direction_sign(self.direction)


@dataclass
class TraceRecord:
    iteration: int
    theta: np.ndarray
    e_f_est: float
    e_f_exact: float | None
    best_f: float
    grad_norm: float | None


@dataclass
class RunTrace:
    """Per-iteration log of an optimization run.

    CSV schema: ``iter,E_f_est,E_f_exact,best_f,grad_norm,theta_0..theta_{d-1}``
    with empty cells for unavailable values; JSONL mirrors it one object per
    row (``null`` for unavailable).  Optional metadata is embedded as ``#``
    comment lines (CSV) or a leading ``{"meta": ...}`` line (JSONL).
    """

    records: list[TraceRecord] = field(default_factory=list)
    status: str = "running"
    meta: dict = field(default_factory=dict)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    @property
    def final(self) -> TraceRecord:
        if not self.records:
            raise ValueError("empty trace")
        return self.records[-1]

    def validate(self, direction: str = "maximize") -> None:
        """Check iteration monotonicity and best-so-far monotonicity."""
        sign = _direction_sign(direction)
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.iteration <= prev.iteration:
                raise ValueError("iterations must be strictly increasing")
            if sign * (cur.best_f - prev.best_f) < 0:
                raise ValueError("best-so-far must be monotone in the optimization direction")

    def csv_text(self) -> str:
        d = self.records[0].theta.size if self.records else 0
        lines = [f"# {key} = {value}" for key, value in self.meta.items()]
        lines.append("# status = " + self.status)
        header = ["iter", "E_f_est", "E_f_exact", "best_f", "grad_norm"]
        header += [f"theta_{j}" for j in range(d)]
        lines.append(",".join(header))
        for rec in self.records:
            row = [str(rec.iteration), repr(float(rec.e_f_est)),
                   "" if rec.e_f_exact is None else repr(float(rec.e_f_exact)),
                   repr(float(rec.best_f)),
                   "" if rec.grad_norm is None else repr(float(rec.grad_norm))]
            row += [repr(float(t)) for t in rec.theta]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def jsonl_text(self) -> str:
        lines = []
        if self.meta:
            lines.append(json.dumps({"meta": {**self.meta, "status": self.status}}, sort_keys=True))
        for rec in self.records:
            lines.append(json.dumps({
                "iter": rec.iteration,
                "E_f_est": rec.e_f_est,
                "E_f_exact": rec.e_f_exact,
                "best_f": rec.best_f,
                "grad_norm": rec.grad_norm,
                "theta": [float(t) for t in rec.theta],
            }))
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.csv_text())

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.jsonl_text())


def _exact_expectation_or_none(basis, theta, f):
    if basis.n <= EXACT_LIMIT:
        return expfam.expectation(basis, theta, f)
    return None


class _BestTracker:
    def __init__(self, sign: int):
        self.sign = sign
        self.best = -np.inf if sign > 0 else np.inf

    def update(self, value: float) -> float:
        if self.sign * (value - self.best) > 0:
            self.best = float(value)
        return self.best


class _StallDetector:
    """Stops when the running best estimate improves too little over a window."""

    def __init__(self, sign: int, window: int, tol: float):
        self.sign = sign
        self.window = window
        self.tol = tol
        self.history: list[float] = []

    def update(self, best_estimate: float) -> bool:
        self.history.append(best_estimate)
        if len(self.history) <= self.window:
            return False
        gain = self.sign * (self.history[-1] - self.history[-1 - self.window])
        return gain < self.tol


def sngd_step(pop: Population, basis: MonomialBasis, theta: np.ndarray,
              config: SNGDConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One natural-gradient update from a given population.

    Returns (new theta, estimated gradient, estimated Fisher matrix).
    """
    sel = pop if config.M is None or config.M == pop.size else \
        select_truncation(pop, config.M, config.direction)
    g_hat = empirical_sr_gradient(sel, basis)
    i_hat = empirical_fisher(sel, basis)
    ridge = config.ridge
    if ridge is None:
        ridge = 1e-6 * np.trace(i_hat) / basis.d
    step = natural_gradient_solve(i_hat, g_hat, ridge)
    sign = _direction_sign(config.direction)
    return theta + sign * config.learning_rate * step, g_hat, i_hat


def sngd_run(f: PseudoBooleanFunction, basis: MonomialBasis, config: SNGDConfig) -> RunTrace:
    """Stochastic natural-gradient loop: estimate, precondition, step, resample.

    Starts at theta = 0 (the uniform distribution) with a uniform random
    population.  Stops on the iteration budget, on ||g||_inf below
    ``gradient_tol``, or when the best estimated E[f] stalls.
    """
    if f.n != basis.n:
        raise ValueError(f"function dimension {f.n} != basis dimension {basis.n}")
    sign = _direction_sign(config.direction)
    theta = np.zeros(basis.d)
    pop = Population.uniform_random(f, config.N, child_seed(config.seed, 0))
    trace = RunTrace(meta={"algorithm": "sngd"})
    best = _BestTracker(sign)
    stall = _StallDetector(sign, config.stall_window, config.stall_tol)
    est_best = _BestTracker(sign)
    for t in range(config.max_iters + 1):
        sel = pop if config.M is None or config.M == pop.size else \
            select_truncation(pop, config.M, config.direction)
        g_hat = empirical_sr_gradient(sel, basis)
        grad_norm = float(np.max(np.abs(g_hat)))
        e_est = float(pop.fitness.mean())
        best_f = best.update(float(pop.fitness.max() if sign > 0 else pop.fitness.min()))
        trace.append(TraceRecord(t, theta.copy(), e_est,
                                 _exact_expectation_or_none(basis, theta, f),
                                 best_f, grad_norm))
        if t == config.max_iters:
            trace.status = "max_iters"
            break
        if grad_norm < config.gradient_tol:
            trace.status = "gradient_tolerance"
            break
        if stall.update(est_best.update(e_est)):
            trace.status = "stalled"
            break
        theta, _, _ = sngd_step(pop, basis, theta, config)
        samples = gibbs_sampler(basis, theta, config.N, config.burn_in,
                                config.thinning, child_seed(config.seed, t + 1),
                                config.scan)
        pop = Population.from_function(f, samples)
    return trace


def exact_descent_run(f: PseudoBooleanFunction, basis: MonomialBasis,
                      learning_rate: float, max_iters: int,
                      direction: str = "maximize", ridge: float = 0.0,
                      gradient_tol: float = GRADIENT_TOL) -> RunTrace:
    """Noiseless natural-gradient reference on the exact engine."""
    if f.n != basis.n:
        raise ValueError(f"function dimension {f.n} != basis dimension {basis.n}")
    if learning_rate < 0:
        raise ValueError("learning_rate must be >= 0")
    sign = _direction_sign(direction)
    theta = np.zeros(basis.d)
    trace = RunTrace(meta={"algorithm": "exact"})
    best = _BestTracker(sign)
    for t in range(max_iters + 1):
        g = expfam.sr_gradient_exact(basis, theta, f)
        grad_norm = float(np.max(np.abs(g)))
        e_exact = expfam.expectation(basis, theta, f)
        trace.append(TraceRecord(t, theta.copy(), e_exact, e_exact,
                                 best.update(e_exact), grad_norm))
        if t == max_iters:
            trace.status = "max_iters"
            break
        if grad_norm < gradient_tol:
            trace.status = "gradient_tolerance"
            break
        i_mat = expfam.fisher_information(basis, theta)
        theta = theta + sign * learning_rate * natural_gradient_solve(i_mat, g, ridge)
    return trace


def fit_independence_model(basis: MonomialBasis, stat_means: np.ndarray,
                           clip_delta: float = CLIP_DELTA) -> np.ndarray:
    """Closed-form fit for a singleton basis: theta_j = atanh(clipped mean)."""
    if any(mask & (mask - 1) for mask in basis.masks):
        raise ValueError("closed-form estimator requires a singleton-only basis")
    eta_hat = np.clip(np.asarray(stat_means, dtype=float),
                      -1.0 + clip_delta, 1.0 - clip_delta)
    return np.arctanh(eta_hat)


def fit_moment_matching(basis: MonomialBasis, stat_means: np.ndarray,
                        shrink_delta: float = CLIP_DELTA, tol: float = 1e-10,
                        max_newton: int = 200) -> np.ndarray:
    """Match E_theta[T] to sample means of T on the exact engine.

    The target is shrunk toward 0 by ``shrink_delta`` to stay inside the
    marginal polytope (the uniform point is interior), then theta is found by
    damped Newton ascent of theta . target - psi(theta).  When backtracking
    stalls at float precision the point is accepted if the residual is below
    a relaxed 1e-8 bound.
    """
    if basis.n > EXACT_LIMIT:
        raise ValueError("moment matching beyond the exact-engine limit is not supported")
    target = (1.0 - shrink_delta) * np.asarray(stat_means, dtype=float)
    theta = np.zeros(basis.d)
    value = theta @ target - expfam.log_partition(basis, theta)
    for _ in range(max_newton):
        resid = target - expfam.mean_params(basis, theta)
        gap = float(np.max(np.abs(resid)))
        if gap < tol:
            return theta
        i_mat = expfam.fisher_information(basis, theta)
        direction = natural_gradient_solve(i_mat, resid)
        step = 1.0
        while step > 1e-8:
            cand = theta + step * direction
            cand_value = cand @ target - expfam.log_partition(basis, cand)
            if cand_value >= value:
                theta, value = cand, cand_value
                break
            step /= 2.0
        else:
            # objective flat at float precision: accept a near-converged point
            if gap <= 1e-8:
                return theta
            break
    gap = float(np.max(np.abs(target - expfam.mean_params(basis, theta))))
    if gap <= 1e-8:
        return theta
    raise ArithmeticError("moment matching did not converge; "
                          f"residual {gap:.3e} with target near the polytope boundary")


def _independence_sampler(basis: MonomialBasis, theta: np.ndarray, count: int,
                          seed: int) -> np.ndarray:
    """Exact i.i.d. sampling from a singleton-basis model."""
    prob_plus = np.full(basis.n, 0.5)
    for j, mask in enumerate(basis.masks):
        site = mask.bit_length() - 1
        prob_plus[site] = 0.5 * (1.0 + np.tanh(theta[j]))
    rng = np.random.default_rng(seed)
    return np.where(rng.random((count, basis.n)) < prob_plus[None, :], 1, -1).astype(np.int8)


def eda_run(f: PseudoBooleanFunction, basis: MonomialBasis, config: EDAConfig) -> RunTrace:
    """Sample / truncation-select / refit loop (Estimation of Distribution).

    The ``closed-form-independence`` estimator requires a singleton basis and
    resamples sites independently; ``moment-matching`` fits any basis on the
    exact engine and resamples with the Gibbs sampler.  Stops on the iteration
    budget or when all selected fitness values coincide.
    """
    if f.n != basis.n:
        raise ValueError(f"function dimension {f.n} != basis dimension {basis.n}")
    independence = config.estimator == "closed-form-independence"
    if independence and any(mask & (mask - 1) for mask in basis.masks):
        raise ValueError("closed-form-independence estimator requires a singleton-only basis")
    sign = _direction_sign(config.direction)
    theta = np.zeros(basis.d)
    pop = Population.uniform_random(f, config.N, child_seed(config.seed, 0))
    trace = RunTrace(meta={"algorithm": "eda"})
    best = _BestTracker(sign)
    for t in range(config.max_iters + 1):
        sel = select_truncation(pop, config.M, config.direction)
        e_est = float(pop.fitness.mean())
        best_f = best.update(pop.fitness.max() if sign > 0 else pop.fitness.min())
        trace.append(TraceRecord(t, theta.copy(), e_est,
                                 _exact_expectation_or_none(basis, theta, f),
                                 best_f, None))
        if t == config.max_iters:
            trace.status = "max_iters"
            break
        if np.ptp(sel.fitness) == 0.0:
            trace.status = "converged"
            break
        stat_means = statistics_matrix(basis, sel.samples).mean(axis=0)
        if independence:
            theta = fit_independence_model(basis, stat_means, config.clip_delta)
            samples = _independence_sampler(basis, theta, config.N, child_seed(config.seed, t + 1))
        else:
            theta = fit_moment_matching(basis, stat_means, config.clip_delta)
            samples = gibbs_sampler(basis, theta, config.N, config.burn_in,
                                    config.thinning, child_seed(config.seed, t + 1))
        pop = Population.from_function(f, samples)
    return trace
