"""Sparse multilinear (Walsh) representation of pseudo-Boolean functions.

A function f: {-1,+1}^n -> R is written uniquely as

    f(x) = sum_alpha c(alpha) * x^alpha,      x^alpha = prod_{i in alpha} x_i,

where alpha ranges over subsets of the n variables.  Subsets are encoded as
int bit masks (bit i set means variable i appears in the monomial).  On top of
the representation this module provides the fast transform between coefficient
and value-table form, and closed-form moments under the uniform density on the
cube: the moment generating function E[e^{t f}] and the expectation
E[cosh(t f)] - 1, both computed combinatorially from the GF(2) structure of
the coefficient support.

Canonical table ordering: a table of length 2^n is indexed by k, where bit i
of k encodes variable i as +1 when the bit is 0 and -1 when the bit is 1
(little-endian in the variable index).  All transforms, oracles and samplers
in this package share this convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Multi-indices alpha are plain ints used as n-bit masks; containers enforce
# that masks fit the ambient dimension.
MultiIndex = int

EXACT_LIMIT = 20
ENUMERATION_LIMIT = 24
DROP_TOL = 1e-14


def mask_from_vars(variables, n: int) -> MultiIndex:
    """Build a monomial mask from 1-based variable indices."""
    mask = 0
    for v in variables:
        if not 1 <= v <= n:
            raise ValueError(f"variable index {v} outside 1..{n}")
        bit = 1 << (v - 1)
        if mask & bit:
            raise ValueError(f"variable index {v} repeated in monomial")
        mask |= bit
    return mask


def vars_from_mask(mask: MultiIndex) -> tuple[int, ...]:
    """1-based variable indices of a monomial mask, ascending."""
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


@dataclass
class PseudoBooleanFunction:
    """Sparse coefficient map of a real function on the n-cube.

    ``terms`` maps monomial masks to nonzero real coefficients.  The zero mask
    is the constant term.
    """

    n: int
    terms: dict[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        clean: dict[int, float] = {}
        for mask, coeff in self.terms.items():
            if not 0 <= mask < (1 << self.n):
                raise ValueError(f"monomial mask {mask:#x} does not fit n={self.n}")
            c = float(coeff)
            if c != 0.0:
                clean[int(mask)] = c
        self.terms = clean

    @classmethod
    def from_var_terms(cls, n: int, var_terms: dict[tuple[int, ...], float]) -> "PseudoBooleanFunction":
        """Construct from {(1-based variable indices): coefficient} pairs."""
        return cls(n, {mask_from_vars(vs, n): c for vs, c in var_terms.items()})

    @property
    def support(self) -> tuple[MultiIndex, ...]:
        """Monomial masks with nonzero coefficient, ascending."""
        return tuple(sorted(self.terms))

    def evaluate(self, x) -> float:
        """Evaluate at a single spin vector x in {-1,+1}^n."""
        x = np.asarray(x)
        if x.shape != (self.n,):
            raise ValueError(f"expected spin vector of length {self.n}, got shape {x.shape}")
        total = 0.0
        for mask, coeff in self.terms.items():
            prod = 1.0
            i = 0
            m = mask
            while m:
                if m & 1:
                    prod *= x[i]
                m >>= 1
                i += 1
            total += coeff * prod
        return total

    def evaluate_batch(self, samples: np.ndarray) -> np.ndarray:
        """Evaluate on an (N, n) array of spin vectors, vectorized per term."""
        samples = np.asarray(samples)
        if samples.ndim != 2 or samples.shape[1] != self.n:
            raise ValueError(f"expected (N, {self.n}) sample array, got shape {samples.shape}")
        out = np.zeros(samples.shape[0])
        for mask, coeff in self.terms.items():
            term = np.full(samples.shape[0], coeff)
            for i in vars_from_mask(mask):
                term = term * samples[:, i - 1]
            out += term
        return out

    def __call__(self, x) -> float:
        return self.evaluate(x)


@dataclass
class SubsetFamily:
    """Subsets of an ordered monomial support satisfying a GF(2) constraint.

    Each member is a bit mask over positions 0..len(support)-1.
    """

    support: tuple[MultiIndex, ...]
    members: tuple[int, ...]

    def verify(self, even_cardinality: bool = False) -> bool:
        """Re-substitute every member into the defining constraint."""
        for member in self.members:
            acc = 0
            count = 0
            for pos, alpha in enumerate(self.support):
                if member >> pos & 1:
                    acc ^= alpha
                    count += 1
            if acc != 0:
                return False
            if even_cardinality and count % 2 != 0:
                return False
        return True


def evaluate(f: PseudoBooleanFunction, x) -> float:
    """Module-level alias of :meth:`PseudoBooleanFunction.evaluate`."""
    return f.evaluate(x)


def _fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform, O(n 2^n).

    Output index j carries sum_k (-1)^{popcount(j & k)} values[k]; applied
    twice it multiplies by 2^n.
    """
    a = np.array(values, dtype=float, copy=True)
    size = a.size
    h = 1
    while h < size:
        a = a.reshape(-1, 2, h)
        top = a[:, 0, :] + a[:, 1, :]
        bot = a[:, 0, :] - a[:, 1, :]
        a[:, 0, :] = top
        a[:, 1, :] = bot
        h *= 2
    return a.reshape(size)


def _table_dimension(length: int, exact_limit: int) -> int:
    n = length.bit_length() - 1
    if length < 2 or length != (1 << n):
        raise ValueError(f"table length {length} is not a power of two >= 2")
    if n > exact_limit:
        raise ValueError(f"dimension {n} exceeds exact limit {exact_limit}")
    return n


def walsh_transform(table, drop_tol: float = DROP_TOL,
                    exact_limit: int = EXACT_LIMIT) -> PseudoBooleanFunction:
    """Coefficients c(alpha) = 2^{-n} sum_x f(x) x^alpha of a value table.

    Coefficients with magnitude <= ``drop_tol`` are dropped to keep the
    support sparse.
    """
    table = np.asarray(table, dtype=float)
    n = _table_dimension(table.size, exact_limit)
    coeffs = _fwht(table) / table.size
    terms = {int(mask): float(c) for mask, c in enumerate(coeffs) if abs(c) > drop_tol}
    return PseudoBooleanFunction(n, terms)


def synthesize(f: PseudoBooleanFunction, exact_limit: int = EXACT_LIMIT) -> np.ndarray:
    """Value table of f over the 2^n states, canonical ordering."""
    if f.n > exact_limit:
        raise ValueError(f"dimension {f.n} exceeds exact limit {exact_limit}")
    coeffs = np.zeros(1 << f.n)
    for mask, c in f.terms.items():
        coeffs[mask] = c
    return _fwht(coeffs)


def _gf2_nullspace_basis(rows: list[int], n_cols: int) -> list[int]:
    """Basis of {b : M b = 0 over GF(2)}, rows given as n_cols-bit masks."""
    work = [r for r in rows if r]
    pivot_cols: list[int] = []
    row_idx = 0
    for col in range(n_cols):
        pivot = None
        for r in range(row_idx, len(work)):
            if work[r] >> col & 1:
                pivot = r
                break
        if pivot is None:
            continue
        work[row_idx], work[pivot] = work[pivot], work[row_idx]
        for r in range(len(work)):
            if r != row_idx and (work[r] >> col & 1):
                work[r] ^= work[row_idx]
        pivot_cols.append(col)
        row_idx += 1
        if row_idx == len(work):
            break
    free_cols = [c for c in range(n_cols) if c not in pivot_cols]
    basis = []
    for fc in free_cols:
        vec = 1 << fc
        for r, pc in enumerate(pivot_cols):
            if work[r] >> fc & 1:
                vec |= 1 << pc
        basis.append(vec)
    return basis


def gf2_constraint_sets(support, even_cardinality: bool = False,
                        limit: int = ENUMERATION_LIMIT) -> SubsetFamily:
    """All subsets B of the support whose masks XOR to zero.

    The support is an ordered list of monomial masks; a subset qualifies when
    the componentwise mod-2 sum of its masks vanishes, i.e. it lies in the
    nullspace of the bits-by-support GF(2) matrix.  With ``even_cardinality``
    an all-ones parity row is appended so only even-sized subsets remain.
    The empty set always qualifies.
    """
    support = tuple(int(a) for a in support)
    m = len(support)
    if m == 0:
        raise ValueError("support must be non-empty")
    if m > limit:
        raise ValueError(f"support size {m} exceeds enumeration limit {limit}")
    n_bits = max(a.bit_length() for a in support)
    rows = []
    for bit in range(n_bits):
        row = 0
        for pos, alpha in enumerate(support):
            if alpha >> bit & 1:
                row |= 1 << pos
        rows.append(row)
    if even_cardinality:
        rows.append((1 << m) - 1)
    basis = _gf2_nullspace_basis(rows, m)
    members = {0}
    for vec in basis:
        members |= {b ^ vec for b in members}
    return SubsetFamily(support=support, members=tuple(sorted(members)))


def _cosh_sinh_sum(coeffs: np.ndarray, members: tuple[int, ...], t: float) -> float:
    """sum over members B of prod_{j in B} sinh(t c_j) prod_{j not in B} cosh(t c_j)."""
    m = coeffs.size
    ch = np.cosh(t * coeffs)
    sh = np.sinh(t * coeffs)
    member_arr = np.asarray(members, dtype=np.int64)
    total = 0.0
    for start in range(0, member_arr.size, 1 << 16):  # bound peak memory at high nullity
        block = member_arr[start:start + (1 << 16)]
        in_b = (block[:, None] >> np.arange(m)[None, :] & 1).astype(bool)
        total += float(np.where(in_b, sh[None, :], ch[None, :]).prod(axis=1).sum())
    return total


def mgf_uniform(f: PseudoBooleanFunction, t: float,
                limit: int = ENUMERATION_LIMIT) -> float:
    """E[e^{t f}] under the uniform density, in closed form.

    Expanding e^{t c x^alpha} = cosh(t c) + sinh(t c) x^alpha per monomial and
    averaging kills every product whose monomials do not XOR-cancel, leaving

        e^{t c(0)} * sum_{B} prod_{a in B} sinh(t c(a)) prod_{a in B^c} cosh(t c(a))

    over the subsets B of the non-constant support with zero mod-2 column sum.
    """
    c0 = f.terms.get(0, 0.0)
    support = tuple(a for a in f.support if a != 0)
    if not support:
        return float(np.exp(t * c0))
    family = gf2_constraint_sets(support, even_cardinality=False, limit=limit)
    coeffs = np.array([f.terms[a] for a in support])
    return float(np.exp(t * c0)) * _cosh_sinh_sum(coeffs, family.members, t)


def phi_expectation_uniform(f: PseudoBooleanFunction, t: float,
                            limit: int = ENUMERATION_LIMIT) -> float:
    """E[cosh(t f)] - 1 under the uniform density, in closed form.

    Requires a zero constant term.  Averaging the expansions at t and -t
    cancels the odd-cardinality subsets, so only subsets with an even number
    of monomials contribute.
    """
    if f.terms.get(0, 0.0) != 0.0:
        raise ValueError("constant term must be zero (center f first)")
    support = f.support
    if not support:
        return 0.0
    family = gf2_constraint_sets(support, even_cardinality=True, limit=limit)
    coeffs = np.array([f.terms[a] for a in support])
    return _cosh_sinh_sum(coeffs, family.members, t) - 1.0


def to_text(f: PseudoBooleanFunction) -> str:
    """Serialize as lines "coefficient: i1 i2 ... ik" (1-based indices)."""
    lines = []
    for mask in f.support:
        idx = " ".join(str(v) for v in vars_from_mask(mask))
        lines.append(f"{f.terms[mask]!r}:{' ' + idx if idx else ''}")
    return "\n".join(lines) + "\n"


def from_text(text: str, n: int | None = None) -> PseudoBooleanFunction:
    """Parse the line format written by :func:`to_text`.

    When ``n`` is omitted the dimension is the largest variable index seen.
    Duplicate monomials are rejected.
    """
    parsed: list[tuple[tuple[int, ...], float]] = []
    max_var = 1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, sep, tail = line.partition(":")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'coefficient: indices'")
        try:
            coeff = float(head)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad coefficient {head!r}") from exc
        try:
            variables = tuple(int(tok) for tok in tail.split())
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad variable index in {tail!r}") from exc
        parsed.append((variables, coeff))
        max_var = max(max_var, *variables) if variables else max_var
    dim = n if n is not None else max_var
    terms: dict[int, float] = {}
    for variables, coeff in parsed:
        mask = mask_from_vars(variables, dim)
        if mask in terms:
            raise ValueError(f"duplicate monomial {variables or '(constant)'}")
        terms[mask] = coeff
    return PseudoBooleanFunction(dim, terms)
