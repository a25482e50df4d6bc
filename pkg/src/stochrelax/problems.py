"""Benchmark problem registry for the optimization harness.

Every builder is deterministic in (name, parameters, seed).  Instances carry
the known optimum where one is available: in closed form for the linear
problems, by construction for trap-k, and by brute-force enumeration for
2-local and random instances up to n = 20.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .walsh import EXACT_LIMIT, PseudoBooleanFunction, synthesize, walsh_transform

PROBLEM_NAMES = ("onemax", "weighted-linear", "two-local-ising", "trap-k", "random-sparse")


@dataclass
class ProblemInstance:
    name: str
    params: dict = field(default_factory=dict)
    f: PseudoBooleanFunction = None
    known_optimum: float | None = None

    def verify_optimum(self, tol: float = 1e-9) -> bool:
        """Check by enumeration that the recorded optimum is attained (n <= 20)."""
        if self.known_optimum is None:
            return True
        if self.f.n > EXACT_LIMIT:
            raise ValueError(f"cannot enumerate n={self.f.n} > {EXACT_LIMIT}")
        table = synthesize(self.f)
        return bool(abs(table.max() - self.known_optimum) <= tol)


def _brute_force_optimum(f: PseudoBooleanFunction) -> float | None:
    if f.n > EXACT_LIMIT:
        return None
    return float(synthesize(f).max())


def _onemax(n: int) -> ProblemInstance:
    f = PseudoBooleanFunction(n, {1 << i: 1.0 for i in range(n)})
    return ProblemInstance("onemax", {"n": n}, f, float(n))


def _weighted_linear(n: int, seed: int) -> ProblemInstance:
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-2.0, 2.0, size=n)
    f = PseudoBooleanFunction(n, {1 << i: float(c) for i, c in enumerate(coeffs)})
    return ProblemInstance("weighted-linear", {"n": n, "seed": seed}, f,
                           float(np.abs(coeffs).sum()))


def _two_local_ising(n: int, seed: int) -> ProblemInstance:
    rng = np.random.default_rng(seed)
    terms: dict[int, float] = {}
    for i in range(n):
        terms[1 << i] = float(rng.uniform(-1.0, 1.0))
    for i in range(n):
        for j in range(i + 1, n):
            terms[(1 << i) | (1 << j)] = float(rng.uniform(-1.0, 1.0))
    f = PseudoBooleanFunction(n, terms)
    return ProblemInstance("two-local-ising", {"n": n, "seed": seed}, f,
                           _brute_force_optimum(f))


def _trap_block_table(k: int) -> np.ndarray:
    """Deceptive trap on one k-bit block: k at all +1, else k - 1 - (#plus)."""
    table = np.empty(1 << k)
    for state in range(1 << k):
        plus = k - bin(state).count("1")
        table[state] = float(k) if plus == k else float(k - 1 - plus)
    return table


def _trap_k(n: int, k: int) -> ProblemInstance:
    if k < 1 or n % k != 0:
        raise ValueError(f"trap-k requires k >= 1 dividing n, got n={n}, k={k}")
    block = walsh_transform(_trap_block_table(k))
    terms: dict[int, float] = {}
    for start in range(0, n, k):
        for mask, coeff in block.terms.items():
            shifted = mask << start
            terms[shifted] = terms.get(shifted, 0.0) + coeff
    f = PseudoBooleanFunction(n, terms)
    return ProblemInstance("trap-k", {"n": n, "k": k}, f, float(n))


def _random_sparse(n: int, terms: int, seed: int, max_degree: int | None = None) -> ProblemInstance:
    if terms < 1:
        raise ValueError("terms must be >= 1")
    max_degree = min(n, 4) if max_degree is None else max_degree
    if not 1 <= max_degree <= n:
        raise ValueError(f"max_degree must be in 1..{n}")
    rng = np.random.default_rng(seed)
    masks: set[int] = set()
    while len(masks) < terms:
        degree = int(rng.integers(1, max_degree + 1))
        sites = rng.choice(n, size=degree, replace=False)
        masks.add(int(sum(1 << int(s) for s in sites)))
    coeff_map: dict[int, float] = {}
    for mask in sorted(masks):
        c = 0.0
        while abs(c) < 1e-6:
            c = float(rng.uniform(-2.0, 2.0))
        coeff_map[mask] = c
    f = PseudoBooleanFunction(n, coeff_map)
    return ProblemInstance("random-sparse",
                           {"n": n, "terms": terms, "seed": seed, "max_degree": max_degree},
                           f, _brute_force_optimum(f))


def registry_build(name: str, n: int, seed: int = 0, **params) -> ProblemInstance:
    """Build a named problem instance deterministically from its parameters."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if name == "onemax":
        return _onemax(n)
    if name == "weighted-linear":
        return _weighted_linear(n, seed)
    if name == "two-local-ising":
        return _two_local_ising(n, seed)
    if name == "trap-k":
        if "k" not in params:
            raise ValueError("trap-k requires parameter k")
        return _trap_k(n, int(params["k"]))
    if name == "random-sparse":
        if "terms" not in params:
            raise ValueError("random-sparse requires parameter terms")
        return _random_sparse(n, int(params["terms"]), seed,
                              params.get("max_degree"))
    raise ValueError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_NAMES)}")
