"""Multivariate scalar and matrix polynomials with exact or float coefficients.

Coefficients are ``fractions.Fraction`` on the exact path and ``float`` on the
numeric path; both share the same code.  Values are immutable, so they can be
shared freely between threads.

Monomials are exponent tuples.  Bases are enumerated in graded lexicographic
order: total degree first, then lexicographically with X1 > X2 > ... > Xn, so
the degree-one block of a two-variable basis reads X1, X2.
"""

from __future__ import annotations

import math
import operator
from collections.abc import Callable, Iterable, Iterator, Mapping, Sequence
from fractions import Fraction
from functools import reduce
from itertools import combinations_with_replacement
from numbers import Integral, Rational, Real
from typing import TypeAlias

import numpy as np
import numpy.typing as npt

from .errors import DimensionMismatch, InputError, NonFiniteInput

Monomial: TypeAlias = tuple[int, ...]
Coeff: TypeAlias = Fraction | float
FloatArray: TypeAlias = npt.NDArray[np.float64]

# =============================================================================
# MONOMIALS
# =============================================================================


def monomial_degree(m: Monomial) -> int:
    return sum(m)


def grlex_key(m: Monomial) -> tuple[int, tuple[int, ...]]:
    """Sort key: ascending total degree, then X1-heavy monomials first."""
    return sum(m), tuple(-e for e in m)


def leading_key(m: Monomial) -> tuple[int, Monomial]:
    """Key whose maximum is the graded-lex leading monomial."""
    return sum(m), m


def monomials_of_degree(n: int, d: int) -> list[Monomial]:
    if n == 0:
        return [()] if d == 0 else []
    out: list[Monomial] = []
    for combo in combinations_with_replacement(range(n), d):
        exps = [0] * n
        for var in combo:
            exps[var] += 1
        out.append(tuple(exps))
    out.sort(key=grlex_key)
    return out


def monomials_up_to(n: int, d: int) -> list[Monomial]:
    """All monomials of total degree <= d in graded lexicographic order."""
    if d < 0:
        return []
    out: list[Monomial] = []
    for k in range(d + 1):
        out.extend(monomials_of_degree(n, k))
    return out


def add_monomials(a: Monomial, b: Monomial) -> Monomial:
    return tuple(map(operator.add, a, b))


def unit_monomial(n: int, i: int) -> Monomial:
    return tuple(1 if j == i else 0 for j in range(n))


# =============================================================================
# COEFFICIENTS
# =============================================================================


def as_coeff(value: object) -> Coeff:
    """Normalize a number to Fraction (ints, rationals) or float."""
    if isinstance(value, bool):
        raise InputError("booleans are not polynomial coefficients")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Integral):
        return Fraction(int(value))
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, float | np.floating | Real):
        f = float(value)  # type: ignore[arg-type]
        if not math.isfinite(f):
            raise NonFiniteInput("non-finite coefficient", value=repr(value))
        return f
    raise InputError(f"unsupported coefficient type {type(value).__name__}")


def to_fraction(value: Coeff) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(value)


# =============================================================================
# SCALAR POLYNOMIALS
# =============================================================================


class ScalarPoly:
    """Sparse polynomial: map from monomial to nonzero coefficient."""

    __slots__ = ("_hash", "n", "terms")

    n: int
    terms: Mapping[Monomial, Coeff]

    def __init__(self, n: int, terms: Mapping[Monomial, object] | None = None) -> None:
        if n < 0:
            raise InputError("variable count must be nonnegative")
        clean: dict[Monomial, Coeff] = {}
        for mono, raw in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != n or any(e < 0 for e in mono):
                raise DimensionMismatch(
                    f"monomial {mono} does not fit {n} variables", monomial=list(mono)
                )
            c = as_coeff(raw)
            if c != 0:
                clean[mono] = clean.get(mono, 0) + c
                if clean[mono] == 0:
                    del clean[mono]
        self.n = n
        self.terms = clean
        self._hash: int | None = None

    @classmethod
    def _raw(cls, n: int, terms: dict[Monomial, Coeff]) -> ScalarPoly:
        """Trusted constructor; ``terms`` must already be canonical."""
        obj = cls.__new__(cls)
        obj.n = n
        obj.terms = terms
        obj._hash = None
        return obj

    # --- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> ScalarPoly:
        return cls._raw(n, {})

    @classmethod
    def constant(cls, n: int, c: object) -> ScalarPoly:
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> ScalarPoly:
        if not 0 <= i < n:
            raise DimensionMismatch(f"variable index {i} outside 0..{n - 1}")
        return cls._raw(n, {unit_monomial(n, i): Fraction(1)})

    @classmethod
    def monomial(cls, n: int, mono: Monomial, c: object = 1) -> ScalarPoly:
        return cls(n, {mono: c})

    # --- properties ---------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(m) for m in self.terms), default=-1)

    @property
    def is_constant(self) -> bool:
        return all(sum(m) == 0 for m in self.terms)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.terms.values())

    @property
    def constant_term(self) -> Coeff:
        return self.terms.get((0,) * self.n, Fraction(0))

    def coefficient(self, mono: Monomial) -> Coeff:
        return self.terms.get(mono, Fraction(0))

    def leading_term(self) -> tuple[Monomial, Coeff]:
        if not self.terms:
            raise InputError("zero polynomial has no leading term")
        mono = max(self.terms, key=leading_key)
        return mono, self.terms[mono]

    def max_abs_coefficient(self) -> float:
        return max((abs(float(c)) for c in self.terms.values()), default=0.0)

    def sorted_terms(self) -> list[tuple[Monomial, Coeff]]:
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]))

    # --- arithmetic ---------------------------------------------------------

    def _check(self, other: ScalarPoly) -> None:
        if other.n != self.n:
            raise DimensionMismatch(
                f"variable count mismatch: {self.n} vs {other.n}", left=self.n, right=other.n
            )

    def _lift(self, other: object) -> ScalarPoly:
        if isinstance(other, ScalarPoly):
            self._check(other)
            return other
        return ScalarPoly.constant(self.n, other)

    def __add__(self, other: object) -> ScalarPoly:
        rhs = self._lift(other)
        out = dict(self.terms)
        for mono, c in rhs.terms.items():
            s = out.get(mono, 0) + c
            if s == 0:
                out.pop(mono, None)
            else:
                out[mono] = s
        return ScalarPoly._raw(self.n, out)

    __radd__ = __add__

    def __neg__(self) -> ScalarPoly:
        return ScalarPoly._raw(self.n, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: object) -> ScalarPoly:
        return self + (-self._lift(other))

    def __rsub__(self, other: object) -> ScalarPoly:
        return self._lift(other) - self

    def scale(self, c: object) -> ScalarPoly:
        k = as_coeff(c)
        if k == 0:
            return ScalarPoly.zero(self.n)
        return ScalarPoly._raw(self.n, {m: v * k for m, v in self.terms.items() if v * k != 0})

    def __mul__(self, other: object) -> ScalarPoly:
        if not isinstance(other, ScalarPoly):
            return self.scale(other)
        self._check(other)
        out: dict[Monomial, Coeff] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                mono = tuple(map(operator.add, ma, mb))
                out[mono] = out.get(mono, 0) + ca * cb
        return ScalarPoly._raw(self.n, {m: c for m, c in out.items() if c != 0})

    __rmul__ = __mul__

    def __pow__(self, k: int) -> ScalarPoly:
        if k < 0:
            raise InputError("negative powers are not polynomials")
        result = ScalarPoly.constant(self.n, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def exact_divide(self, divisor: ScalarPoly) -> ScalarPoly:
        """Quotient of an exact division; raises InputError if not divisible."""
        self._check(divisor)
        if divisor.is_zero:
            raise ZeroDivisionError("division by the zero polynomial")
        lead_m, lead_c = divisor.leading_term()
        remainder: dict[Monomial, Coeff] = dict(self.terms)
        quotient: dict[Monomial, Coeff] = {}
        while remainder:
            mono = max(remainder, key=leading_key)
            if any(a < b for a, b in zip(mono, lead_m, strict=True)):
                raise InputError("polynomial division is not exact")
            q_mono = tuple(a - b for a, b in zip(mono, lead_m, strict=True))
            q_c = remainder[mono] / lead_c
            quotient[q_mono] = quotient.get(q_mono, 0) + q_c
            for dm, dc in divisor.terms.items():
                key = tuple(map(operator.add, q_mono, dm))
                v = remainder.get(key, 0) - q_c * dc
                if v == 0:
                    remainder.pop(key, None)
                else:
                    remainder[key] = v
            # float cancellation can leave the leading monomial behind
            remainder.pop(mono, None)
        return ScalarPoly._raw(self.n, {m: c for m, c in quotient.items() if c != 0})

    # --- comparison ---------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ScalarPoly):
            return self.n == other.n and self.terms == other.terms
        if isinstance(other, int | float | Fraction):
            return self.terms == ({} if other == 0 else {(0,) * self.n: other})
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n, frozenset(self.terms.items())))
        return self._hash

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for mono, c in reversed(self.sorted_terms()):
            factors = [
                f"X{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(mono) if e
            ]
            parts.append("*".join([str(c)] + factors) if factors else str(c))
        return " + ".join(parts)

    # --- coefficient maps ---------------------------------------------------

    def map_coefficients(self, fn: Callable[[Coeff], object]) -> ScalarPoly:
        return ScalarPoly(self.n, {m: fn(c) for m, c in self.terms.items()})

    def to_fraction(self) -> ScalarPoly:
        if self.is_exact:
            return self
        return ScalarPoly._raw(self.n, {m: to_fraction(c) for m, c in self.terms.items()})

    def to_float(self) -> ScalarPoly:
        return ScalarPoly(self.n, {m: float(c) for m, c in self.terms.items()})

    def extend(self, n_new: int) -> ScalarPoly:
        """Embed into ``n_new >= n`` variables (new variables appended)."""
        if n_new < self.n:
            raise DimensionMismatch("cannot drop variables by extension")
        pad = (0,) * (n_new - self.n)
        return ScalarPoly._raw(n_new, {m + pad: c for m, c in self.terms.items()})

    # --- evaluation ---------------------------------------------------------

    def evaluate(self, x: Sequence[object]) -> Coeff:
        """Value at ``x``; exact when both coefficients and ``x`` are rational."""
        if len(x) != self.n:
            raise DimensionMismatch(f"point has {len(x)} coordinates, expected {self.n}")
        point = [as_coeff(v) for v in x]
        total: Coeff = Fraction(0)
        for mono, c in self.terms.items():
            term: Coeff = c
            for xi, e in zip(point, mono, strict=True):
                if e:
                    term = term * xi**e
            total = total + term
        return total

    def evaluate_many(self, points: npt.ArrayLike) -> FloatArray:
        """Float values at every row of a ``(P, n)`` array."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.n)
        if not self.terms:
            return np.zeros(pts.shape[0])
        exps = np.array(list(self.terms.keys()), dtype=float).reshape(-1, self.n)
        coeffs = np.array([float(c) for c in self.terms.values()])
        powers = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)
        return np.asarray(powers @ coeffs, dtype=float)


# =============================================================================
# MATRIX POLYNOMIALS
# =============================================================================


class MatrixPoly:
    """Dense grid of ``ScalarPoly`` entries sharing one variable count.

    Square matrices are the common case (``t``); rectangular ones appear as
    factors ``g`` of univariate factorizations.
    """

    __slots__ = ("_hash", "cols", "entries", "n", "rows")

    n: int
    rows: int
    cols: int
    entries: tuple[tuple[ScalarPoly, ...], ...]

    def __init__(self, entries: Sequence[Sequence[ScalarPoly]], n: int | None = None) -> None:
        grid = tuple(tuple(row) for row in entries)
        if not grid or not grid[0]:
            raise DimensionMismatch("matrix polynomials need at least one entry")
        width = len(grid[0])
        if any(len(row) != width for row in grid):
            raise DimensionMismatch("ragged entry grid")
        counts = {p.n for row in grid for p in row}
        if n is not None:
            counts.add(n)
        if len(counts) != 1:
            raise DimensionMismatch(f"entries disagree on variable count: {sorted(counts)}")
        self.n = counts.pop()
        self.rows = len(grid)
        self.cols = width
        self.entries = grid
        self._hash: int | None = None

    # --- constructors -------------------------------------------------------

    @classmethod
    def zeros(cls, n: int, rows: int, cols: int | None = None) -> MatrixPoly:
        z = ScalarPoly.zero(n)
        return cls([[z] * (rows if cols is None else cols) for _ in range(rows)], n)

    @classmethod
    def identity(cls, n: int, t: int) -> MatrixPoly:
        return cls.scalar_identity(ScalarPoly.constant(n, 1), t)

    @classmethod
    def scalar_identity(cls, p: ScalarPoly, t: int) -> MatrixPoly:
        z = ScalarPoly.zero(p.n)
        return cls([[p if i == j else z for j in range(t)] for i in range(t)], p.n)

    @classmethod
    def diagonal(cls, diag: Sequence[ScalarPoly]) -> MatrixPoly:
        if not diag:
            raise DimensionMismatch("empty diagonal")
        n = diag[0].n
        z = ScalarPoly.zero(n)
        t = len(diag)
        return cls([[diag[i] if i == j else z for j in range(t)] for i in range(t)], n)

    @classmethod
    def constant(cls, n: int, matrix: Sequence[Sequence[object]] | npt.ArrayLike) -> MatrixPoly:
        rows = [list(r) for r in np.asarray(matrix, dtype=object)]
        return cls([[ScalarPoly.constant(n, v) for v in row] for row in rows], n)

    @classmethod
    def unit(cls, n: int, t: int, i: int, j: int) -> MatrixPoly:
        """Matrix unit E_ij as a constant matrix polynomial."""
        one = ScalarPoly.constant(n, 1)
        z = ScalarPoly.zero(n)
        return cls([[one if (a, b) == (i, j) else z for b in range(t)] for a in range(t)], n)

    @classmethod
    def from_scalar(cls, p: ScalarPoly) -> MatrixPoly:
        return cls([[p]], p.n)

    # --- shape and structure ------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    @property
    def t(self) -> int:
        if not self.is_square:
            raise DimensionMismatch(f"matrix is {self.rows}x{self.cols}, not square")
        return self.rows

    def __getitem__(self, ij: tuple[int, int]) -> ScalarPoly:
        i, j = ij
        return self.entries[i][j]

    def iter_entries(self) -> Iterator[tuple[int, int, ScalarPoly]]:
        for i, row in enumerate(self.entries):
            for j, p in enumerate(row):
                yield i, j, p

    @property
    def degree(self) -> int:
        return max(p.degree for _, _, p in self.iter_entries())

    @property
    def is_zero(self) -> bool:
        return all(p.is_zero for _, _, p in self.iter_entries())

    @property
    def is_exact(self) -> bool:
        return all(p.is_exact for _, _, p in self.iter_entries())

    def is_symmetric(self) -> bool:
        if not self.is_square:
            return False
        return all(
            self.entries[i][j] == self.entries[j][i]
            for i in range(self.rows)
            for j in range(i + 1, self.cols)
        )

    def is_diagonal(self) -> bool:
        return self.is_square and all(
            p.is_zero for i, j, p in self.iter_entries() if i != j
        )

    def scalar_part(self) -> ScalarPoly | None:
        """``s`` when the matrix equals ``s * I``, else None."""
        if not self.is_diagonal():
            return None
        s = self.entries[0][0]
        if all(self.entries[i][i] == s for i in range(self.rows)):
            return s
        return None

    def diagonal_entries(self) -> list[ScalarPoly]:
        return [self.entries[i][i] for i in range(min(self.rows, self.cols))]

    def max_abs_coefficient(self) -> float:
        return max(p.max_abs_coefficient() for _, _, p in self.iter_entries())

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> MatrixPoly:
        return MatrixPoly([[self.entries[i][j] for j in cols] for i in rows], self.n)

    def minor(self, i: int, j: int) -> MatrixPoly:
        keep_r = [r for r in range(self.rows) if r != i]
        keep_c = [c for c in range(self.cols) if c != j]
        return self.submatrix(keep_r, keep_c)

    # --- arithmetic ---------------------------------------------------------

    def _same_shape(self, other: MatrixPoly) -> None:
        if other.shape != self.shape or other.n != self.n:
            raise DimensionMismatch(
                f"shape/variable mismatch: {self.shape}/{self.n} vs {other.shape}/{other.n}"
            )

    def __add__(self, other: MatrixPoly) -> MatrixPoly:
        self._same_shape(other)
        return MatrixPoly(
            [[a + b for a, b in zip(ra, rb, strict=True)] for ra, rb in zip(self.entries, other.entries, strict=True)],
            self.n,
        )

    def __sub__(self, other: MatrixPoly) -> MatrixPoly:
        self._same_shape(other)
        return MatrixPoly(
            [[a - b for a, b in zip(ra, rb, strict=True)] for ra, rb in zip(self.entries, other.entries, strict=True)],
            self.n,
        )

    def __neg__(self) -> MatrixPoly:
        return MatrixPoly([[-p for p in row] for row in self.entries], self.n)

    def scale(self, c: object) -> MatrixPoly:
        """Entrywise product with a number or a ScalarPoly."""
        if isinstance(c, ScalarPoly):
            if c.n != self.n:
                raise DimensionMismatch("scalar factor has a different variable count")
            return MatrixPoly([[c * p for p in row] for row in self.entries], self.n)
        return MatrixPoly([[p.scale(c) for p in row] for row in self.entries], self.n)

    def __matmul__(self, other: MatrixPoly) -> MatrixPoly:
        return mul(self, other)

    def adjoint(self) -> MatrixPoly:
        return adjoint(self)

    def trace(self) -> ScalarPoly:
        return reduce(operator.add, self.diagonal_entries(), ScalarPoly.zero(self.n))

    def power(self, k: int) -> MatrixPoly:
        result = MatrixPoly.identity(self.n, self.t)
        for _ in range(k):
            result = result @ self
        return result

    def determinant(self) -> ScalarPoly:
        """Fraction-free (Bareiss) determinant, computed exactly."""
        t = self.t
        a = [[p.to_fraction() for p in row] for row in self.entries]
        sign = 1
        prev = ScalarPoly.constant(self.n, 1)
        for i in range(t - 1):
            if a[i][i].is_zero:
                swap = next((r for r in range(i + 1, t) if not a[r][i].is_zero), None)
                if swap is None:
                    return ScalarPoly.zero(self.n)
                a[i], a[swap] = a[swap], a[i]
                sign = -sign
            for r in range(i + 1, t):
                for c in range(i + 1, t):
                    a[r][c] = (a[r][c] * a[i][i] - a[r][i] * a[i][c]).exact_divide(prev)
            prev = a[i][i]
        det = a[t - 1][t - 1]
        return det if sign > 0 else -det

    def adjugate(self) -> MatrixPoly:
        """Transpose of the cofactor matrix, so ``A @ adj(A) = det(A) I``."""
        t = self.t
        if t == 1:
            return MatrixPoly.identity(self.n, 1)
        cof = [
            [
                self.minor(i, j).determinant() * (1 if (i + j) % 2 == 0 else -1)
                for j in range(t)
            ]
            for i in range(t)
        ]
        return MatrixPoly([[cof[j][i] for j in range(t)] for i in range(t)], self.n)

    # --- comparison ---------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MatrixPoly):
            return NotImplemented
        return self.n == other.n and self.entries == other.entries

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n, self.entries))
        return self._hash

    def __repr__(self) -> str:
        body = "; ".join(", ".join(repr(p) for p in row) for row in self.entries)
        return f"MatrixPoly(n={self.n}, [{body}])"

    # --- coefficient maps ---------------------------------------------------

    def map_entries(self, fn: Callable[[ScalarPoly], ScalarPoly]) -> MatrixPoly:
        return MatrixPoly([[fn(p) for p in row] for row in self.entries], self.n)

    def to_fraction(self) -> MatrixPoly:
        return self if self.is_exact else self.map_entries(ScalarPoly.to_fraction)

    def to_float(self) -> MatrixPoly:
        return self.map_entries(ScalarPoly.to_float)

    def extend(self, n_new: int) -> MatrixPoly:
        return MatrixPoly([[p.extend(n_new) for p in row] for row in self.entries], n_new)

    def support(self) -> set[Monomial]:
        return {m for _, _, p in self.iter_entries() for m in p.terms}

    def coefficient_matrices(self) -> dict[Monomial, FloatArray]:
        """Float coefficient matrix of every monomial in the support."""
        out: dict[Monomial, FloatArray] = {}
        for i, j, p in self.iter_entries():
            for mono, c in p.terms.items():
                if mono not in out:
                    out[mono] = np.zeros(self.shape)
                out[mono][i, j] = float(c)
        return out

    # --- evaluation ---------------------------------------------------------

    def evaluate(self, x: Sequence[object]) -> FloatArray:
        """Float matrix at ``x``."""
        return np.array(
            [[float(p.evaluate(x)) for p in row] for row in self.entries], dtype=float
        )

    def evaluate_exact(self, x: Sequence[object]) -> list[list[Fraction]]:
        point = [to_fraction(as_coeff(v)) for v in x]
        return [[to_fraction(p.to_fraction().evaluate(point)) for p in row] for row in self.entries]

    def evaluate_many(self, points: npt.ArrayLike) -> FloatArray:
        """``(P, rows, cols)`` array of values at every row of ``points``."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.n)
        out = np.empty((pts.shape[0], self.rows, self.cols))
        for i, j, p in self.iter_entries():
            out[:, i, j] = p.evaluate_many(pts)
        return out


# =============================================================================
# RING OPERATIONS
# =============================================================================


def mul(a: MatrixPoly, b: MatrixPoly) -> MatrixPoly:
    """Exact product ``a @ b``."""
    if a.cols != b.rows or a.n != b.n:
        raise DimensionMismatch(
            f"cannot multiply {a.shape}/{a.n} by {b.shape}/{b.n}",
            left=list(a.shape),
            right=list(b.shape),
        )
    zero = ScalarPoly.zero(a.n)
    rows = []
    for i in range(a.rows):
        row = []
        for j in range(b.cols):
            acc = zero
            for k in range(a.cols):
                x, y = a.entries[i][k], b.entries[k][j]
                if not x.is_zero and not y.is_zero:
                    acc = acc + x * y
            row.append(acc)
        rows.append(row)
    return MatrixPoly(rows, a.n)


def adjoint(a: MatrixPoly) -> MatrixPoly:
    """Transpose (the involution of real matrix polynomials)."""
    return MatrixPoly([[a.entries[i][j] for i in range(a.rows)] for j in range(a.cols)], a.n)


def congruence(c: MatrixPoly, f: MatrixPoly) -> MatrixPoly:
    """``adjoint(c) @ f @ c``."""
    return mul(mul(adjoint(c), f), c)


def evaluate(a: MatrixPoly, x: Sequence[object]) -> FloatArray:
    return a.evaluate(x)


def substitute_matrix(p: ScalarPoly, f: MatrixPoly) -> MatrixPoly:
    """Replace the last variable of ``p`` by the square matrix ``f``.

    ``p`` lives in ``f.n + 1`` variables; the others stay scalar.  Powers of
    ``f`` commute, so the result is well defined.
    """
    if p.n != f.n + 1:
        raise DimensionMismatch(f"expected {f.n + 1} variables, got {p.n}")
    t = f.t
    powers: dict[int, MatrixPoly] = {0: MatrixPoly.identity(f.n, t)}
    result = MatrixPoly.zeros(f.n, t)
    for mono, c in p.sorted_terms():
        k = mono[-1]
        if k not in powers:
            top = max(powers)
            while top < k:
                powers[top + 1] = mul(powers[top], f)
                top += 1
        coeff = ScalarPoly._raw(f.n, {mono[:-1]: c})
        result = result + powers[k].scale(coeff)
    return result


def sum_matrices(items: Iterable[MatrixPoly], n: int, shape: tuple[int, int]) -> MatrixPoly:
    return reduce(operator.add, items, MatrixPoly.zeros(n, *shape))
