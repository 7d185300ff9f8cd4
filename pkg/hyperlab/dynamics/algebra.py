"""Integer-matrix and torus arithmetic.

Eigenvalues of integer matrices are located exactly: the characteristic
polynomial is computed over the integers, its real roots are isolated with
Sturm sequences over the rationals and refined by exact bisection. Only the
final root values and the eigenvectors are floating point.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import comb, isqrt, log, sqrt
from typing import Sequence

import numpy as np

from hyperlab.dynamics.errors import (
    DimensionTooLarge,
    MatrixFormatError,
    NoConvergence,
    NonRealSpectrum,
    NotHyperbolic,
    NotUnimodular,
    PreconditionError,
)

LOGGER = logging.getLogger(__name__)

MAX_EXACT_DIM = 6
HYPERBOLIC_GAP = 1e-9
EIGEN_RESIDUAL = 1e-10
_BISECTION_BITS = 56

Poly = list[Fraction]


# ---------------------------------------------------------------------------
# matrices


def as_integer_matrix(values: Sequence[Sequence[int]] | np.ndarray) -> np.ndarray:
    """Validate a square integer matrix and return it as an int64 array."""
    rows = [list(row) for row in values]
    if not rows or any(len(row) != len(rows) for row in rows):
        raise MatrixFormatError(f"matrix: expected a square matrix, got row lengths {[len(r) for r in rows]}")
    out = np.zeros((len(rows), len(rows)), dtype=np.int64)
    for i, row in enumerate(rows):
        for j, value in enumerate(row):
            if float(value) != int(round(float(value))):
                raise MatrixFormatError(f"matrix: entry [{i}][{j}]={value!r} is not an integer")
            out[i, j] = int(round(float(value)))
    if out.shape[0] < 2:
        raise MatrixFormatError("matrix: dimension must be at least 2")
    return out


def parse_matrix(text: str) -> np.ndarray:
    """Parse the row-major CLI syntax ``"2,1;1,1"``."""
    try:
        rows = [[int(item) for item in row.split(",")] for row in text.strip().split(";")]
    except ValueError as exc:
        raise MatrixFormatError(f"matrix: cannot parse {text!r}") from exc
    return as_integer_matrix(rows)


def _int_rows(matrix: np.ndarray) -> list[list[int]]:
    return [[int(v) for v in row] for row in np.asarray(matrix)]


def _matmul(a: list[list[int]], b: list[list[int]]) -> list[list[int]]:
    n = len(a)
    return [[sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def characteristic_polynomial(matrix: np.ndarray) -> list[int]:
    """Return det(xI - M) as integer coefficients, highest degree first (Faddeev-LeVerrier)."""
    a = _int_rows(matrix)
    n = len(a)
    m = [[0] * n for _ in range(n)]
    coeffs = [1]
    c = 1
    for k in range(1, n + 1):
        am = _matmul(a, m)
        m = [[am[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]
        trace = sum(sum(a[i][t] * m[t][i] for t in range(n)) for i in range(n))
        c, rem = divmod(-trace, k)
        if rem:
            raise ArithmeticError("non-integral Faddeev-LeVerrier coefficient")
        coeffs.append(c)
    return coeffs


def integer_determinant(matrix: np.ndarray) -> int:
    """Exact determinant of an integer matrix."""
    coeffs = characteristic_polynomial(matrix)
    n = len(coeffs) - 1
    return (-1) ** n * coeffs[-1]


def integer_power(matrix: np.ndarray, p: int) -> list[list[int]]:
    """Exact integer matrix power as nested Python ints."""
    a = _int_rows(matrix)
    n = len(a)
    out = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(p):
        out = _matmul(out, a)
    return out


def integer_inverse(matrix: np.ndarray) -> np.ndarray:
    """Inverse of a unimodular integer matrix, exactly."""
    a = [[Fraction(v) for v in row] for row in _int_rows(matrix)]
    n = len(a)
    aug = [row + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise NotUnimodular("matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        piv = aug[col][col]
        aug[col] = [v / piv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [v - factor * w for v, w in zip(aug[r], aug[col])]
    inv = [row[n:] for row in aug]
    if any(v.denominator != 1 for row in inv for v in row):
        raise NotUnimodular("inverse is not integral")
    return np.array([[int(v) for v in row] for row in inv], dtype=np.int64)


# ---------------------------------------------------------------------------
# exact polynomial arithmetic (coefficients highest degree first)


def _trim(p: Poly) -> Poly:
    i = 0
    while i < len(p) - 1 and p[i] == 0:
        i += 1
    return p[i:]


def _evaluate(p: Poly, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in p:
        acc = acc * x + c
    return acc


def _derivative(p: Poly) -> Poly:
    n = len(p) - 1
    if n == 0:
        return [Fraction(0)]
    return [c * (n - i) for i, c in enumerate(p[:-1])]


def _divmod(a: Poly, b: Poly) -> tuple[Poly, Poly]:
    a = list(_trim(a))
    b = _trim(b)
    if len(a) < len(b):
        return [Fraction(0)], a
    quotient = []
    while len(a) >= len(b):
        factor = a[0] / b[0]
        quotient.append(factor)
        for i in range(len(b)):
            a[i] -= factor * b[i]
        a.pop(0)
    return quotient, _trim(a) if a else [Fraction(0)]


def _is_zero(p: Poly) -> bool:
    return all(c == 0 for c in p)


def _gcd(a: Poly, b: Poly) -> Poly:
    a, b = _trim(a), _trim(b)
    while not _is_zero(b):
        _, r = _divmod(a, b)
        a, b = b, r
    return [c / a[0] for c in a]


def _sturm_sequence(p: Poly) -> list[Poly]:
    seq = [_trim(p), _trim(_derivative(p))]
    while len(seq[-1]) > 1:
        _, r = _divmod(seq[-2], seq[-1])
        if _is_zero(r):
            break
        seq.append([-c for c in r])
    return seq


def _sign_changes(seq: list[Poly], x: Fraction) -> int:
    signs = [v for v in (_evaluate(p, x) for p in seq) if v != 0]
    return sum(1 for u, v in zip(signs, signs[1:]) if (u > 0) != (v > 0))


def _count_roots(seq: list[Poly], lo: Fraction, hi: Fraction) -> int:
    """Number of distinct real roots in (lo, hi]."""
    return _sign_changes(seq, lo) - _sign_changes(seq, hi)


def _squarefree(p: Poly) -> tuple[Poly, Poly]:
    g = _gcd(p, _derivative(p))
    q, _ = _divmod(p, g)
    return q, g


def _multiplicity(p: Poly, lo: Fraction, hi: Fraction) -> int:
    if len(_trim(p)) <= 1:
        return 0
    q, g = _squarefree(p)
    if _count_roots(_sturm_sequence(q), lo, hi) == 0:
        return 0
    return 1 + _multiplicity(g, lo, hi)


@dataclass(frozen=True)
class IsolatedRoot:
    """A real root certified to lie in (lo, hi]."""

    value: float
    lo: Fraction
    hi: Fraction
    multiplicity: int


def real_roots(coeffs: Sequence[int]) -> tuple[list[IsolatedRoot], int]:
    """Isolate all distinct real roots of an integer polynomial.

    Returns the roots in increasing order and the number of distinct complex
    (non-real) roots.
    """
    p = [Fraction(c) for c in coeffs]
    q, _ = _squarefree(p)
    seq = _sturm_sequence(q)
    bound = 1 + max(abs(c / q[0]) for c in q[1:]) if len(q) > 1 else Fraction(1)
    stack = [(-bound, bound)]
    isolated: list[tuple[Fraction, Fraction]] = []
    while stack:
        lo, hi = stack.pop()
        n = _count_roots(seq, lo, hi)
        if n == 0:
            continue
        if n == 1:
            isolated.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        stack.extend([(lo, mid), (mid, hi)])
    roots = []
    for lo, hi in isolated:
        lo, hi = _refine(q, seq, lo, hi)
        roots.append(IsolatedRoot(float((lo + hi) / 2), lo, hi, _multiplicity(p, lo, hi)))
    roots.sort(key=lambda r: r.value)
    return roots, (len(q) - 1) - len(roots)


def _refine(q: Poly, seq: list[Poly], lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    if _evaluate(q, hi) == 0:
        return hi, hi
    width = Fraction(1, 2**_BISECTION_BITS) * max(Fraction(1), abs(hi))
    while hi - lo > width:
        mid = (lo + hi) / 2
        if _evaluate(q, mid) == 0:
            return mid, mid
        if _count_roots(seq, lo, mid) == 1:
            hi = mid
        else:
            lo = mid
    return lo, hi


# ---------------------------------------------------------------------------
# automorphisms


@dataclass(frozen=True, eq=False)
class SpectralEntry:
    """One real eigenvalue with its exponent and unit eigenvector."""

    eigenvalue: float
    exponent: float
    eigenvector: np.ndarray


@dataclass(frozen=True, eq=False)
class ToralAutomorphism:
    """Hyperbolic integer unimodular matrix with its real spectral data.

    ``spectrum`` is sorted by |eigenvalue| ascending, so stable entries come
    first; bundle index ``i`` always refers to this ordering.
    """

    matrix: np.ndarray
    spectrum: tuple[SpectralEntry, ...]
    stable_count: int
    unstable_count: int
    unimodular: bool
    hyperbolic: bool
    simple_real_distinct: bool
    eigen_residual: float

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([e.eigenvalue for e in self.spectrum])

    @property
    def exponents(self) -> np.ndarray:
        return np.array([e.exponent for e in self.spectrum])

    @property
    def eigenvectors(self) -> np.ndarray:
        """Eigenvectors as columns, in spectrum order."""
        return np.column_stack([e.eigenvector for e in self.spectrum])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix.astype(float), 2))

    def inverse(self) -> "ToralAutomorphism":
        return analyze_matrix(integer_inverse(self.matrix))

    def projection(self, indices: Sequence[int]) -> np.ndarray:
        """Spectral projection onto the span of the given bundles along the others."""
        v = self.eigenvectors
        w = np.linalg.inv(v)
        idx = list(indices)
        return v[:, idx] @ w[idx, :]

    @property
    def stable_projection(self) -> np.ndarray:
        return self.projection(range(self.stable_count))

    @property
    def unstable_projection(self) -> np.ndarray:
        return self.projection(range(self.stable_count, self.dim))

    def is_expanding(self, index: int) -> bool:
        return index >= self.stable_count

    def summary(self) -> dict[str, object]:
        return {
            "matrix": self.matrix.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "exponents": self.exponents.tolist(),
            "stable_count": self.stable_count,
            "unstable_count": self.unstable_count,
            "simple_real_distinct": self.simple_real_distinct,
            "eigen_residual": self.eigen_residual,
        }


def _unit_eigenvectors(matrix: np.ndarray, value: float, multiplicity: int) -> list[np.ndarray]:
    shifted = matrix.astype(float) - value * np.eye(matrix.shape[0])
    _, _, vh = np.linalg.svd(shifted)
    vectors = []
    for row in vh[-multiplicity:][::-1]:
        vec = row / np.linalg.norm(row)
        if vec[int(np.argmax(np.abs(vec)))] < 0:
            vec = -vec
        vectors.append(vec)
    return vectors


def analyze_matrix(matrix: Sequence[Sequence[int]] | np.ndarray, *, require_simple_real_distinct: bool = False) -> ToralAutomorphism:
    """Certify unimodularity and hyperbolicity and compute the spectral data."""
    m = as_integer_matrix(matrix)
    d = m.shape[0]
    if d > MAX_EXACT_DIM:
        raise DimensionTooLarge(f"dimension {d} exceeds {MAX_EXACT_DIM}")
    coeffs = characteristic_polynomial(m)
    det = (-1) ** d * coeffs[-1]
    if abs(det) != 1:
        raise NotUnimodular(f"|det| = {abs(det)}")
    poly = [Fraction(c) for c in coeffs]
    if _evaluate(poly, Fraction(1)) == 0 or _evaluate(poly, Fraction(-1)) == 0:
        raise NotHyperbolic("eigenvalue +1 or -1")
    approx = np.roots(np.array(coeffs, dtype=float))
    if np.any(np.abs(np.abs(approx) - 1.0) < HYPERBOLIC_GAP):
        raise NotHyperbolic("eigenvalue on the unit circle")
    roots, complex_count = real_roots(coeffs)
    if complex_count:
        raise NonRealSpectrum(f"{complex_count} non-real eigenvalues")
    for root in roots:
        if abs(abs(root.value) - 1.0) < HYPERBOLIC_GAP:
            raise NotHyperbolic(f"|eigenvalue| = {abs(root.value):.12g} within {HYPERBOLIC_GAP} of 1")

    simple = all(r.multiplicity == 1 for r in roots)
    mirrored = [Fraction((-1) ** (d - i)) * c for i, c in enumerate(poly)]
    shared = _gcd(poly, mirrored)
    simple_real_distinct = simple and len(shared) == 1
    if require_simple_real_distinct and not simple_real_distinct:
        raise PreconditionError("eigenvalues are not simple, real, with distinct absolute values")

    entries: list[SpectralEntry] = []
    for root in roots:
        for vec in _unit_eigenvectors(m, root.value, root.multiplicity):
            entries.append(SpectralEntry(root.value, log(abs(root.value)), vec))
    entries.sort(key=lambda e: (abs(e.eigenvalue), e.eigenvalue))
    residual = max(float(np.linalg.norm(m @ e.eigenvector - e.eigenvalue * e.eigenvector)) for e in entries)
    if residual > EIGEN_RESIDUAL:
        raise NoConvergence(f"eigenvector residual {residual:.3e} above {EIGEN_RESIDUAL}")
    stable = sum(1 for e in entries if abs(e.eigenvalue) < 1)
    LOGGER.debug("analyzed %s: eigenvalues %s", m.tolist(), [e.eigenvalue for e in entries])
    return ToralAutomorphism(
        matrix=m,
        spectrum=tuple(entries),
        stable_count=stable,
        unstable_count=d - stable,
        unimodular=True,
        hyperbolic=True,
        simple_real_distinct=simple_real_distinct,
        eigen_residual=residual,
    )


def eigen_frame(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real eigenvalues and unit eigenvectors (columns), sorted by |eigenvalue| ascending.

    Unlike :func:`analyze_matrix` this accepts non-hyperbolic linear parts
    such as ``L x id`` of a skew product.
    """
    values, vectors = np.linalg.eig(np.asarray(matrix, dtype=float))
    if np.any(np.abs(values.imag) > 1e-12):
        raise NonRealSpectrum("linear part has non-real eigenvalues")
    values = values.real
    vectors = vectors.real
    order = np.lexsort((values, np.abs(values)))
    values = values[order]
    vectors = vectors[:, order]
    for k in range(vectors.shape[1]):
        vec = vectors[:, k] / np.linalg.norm(vectors[:, k])
        if vec[int(np.argmax(np.abs(vec)))] < 0:
            vec = -vec
        vectors[:, k] = vec
    return values, vectors


# ---------------------------------------------------------------------------
# irreducibility


def _divisors(n: int) -> list[int]:
    n = abs(n)
    small = [k for k in range(1, isqrt(n) + 1) if n % k == 0]
    return sorted(set(small + [n // k for k in small]))


def _divides(p: list[int], b: list[int]) -> bool:
    rem = list(p)
    for i in range(len(p) - len(b) + 1):
        factor = rem[i]
        if factor:
            for j, c in enumerate(b):
                rem[i + j] -= factor * c
    return all(c == 0 for c in rem[len(p) - len(b) + 1 :])


def is_irreducible(matrix: Sequence[Sequence[int]] | np.ndarray) -> bool:
    """True iff the characteristic polynomial is irreducible over Q.

    By Gauss's lemma it suffices to search monic integer factors; their
    coefficients are bounded by Mignotte's bound and their constant terms
    divide the constant term of the polynomial.
    """
    m = as_integer_matrix(matrix)
    d = m.shape[0]
    if d > MAX_EXACT_DIM:
        raise DimensionTooLarge(f"dimension {d} exceeds {MAX_EXACT_DIM}")
    p = characteristic_polynomial(m)
    if p[-1] == 0:
        return False
    norm2 = sqrt(sum(c * c for c in p))
    for g in range(1, d // 2 + 1):
        ranges = [range(-int(comb(g, j) * norm2), int(comb(g, j) * norm2) + 1) for j in range(1, g)]
        constants = [s * k for k in _divisors(p[-1]) for s in (1, -1)]
        for middle in product(*ranges):
            for c0 in constants:
                if _divides(p, [1, *middle, c0]):
                    LOGGER.debug("factor of degree %d: %s", g, [1, *middle, c0])
                    return False
    return True


# ---------------------------------------------------------------------------
# periodic points of the linear model


def periodic_points(matrix: np.ndarray, period: int, *, max_points: int = 5000) -> np.ndarray:
    """All points of exact period ``period`` of the automorphism, as rationals mod 1.

    The fixed points of L^p are (L^p - I)^{-1} Z^d / Z^d, a finite group of
    order D = |det(L^p - I)| generated by the columns of the adjugate over D.
    """
    if period < 1:
        raise PreconditionError("period must be positive")
    d = np.asarray(matrix).shape[0]
    power = integer_power(matrix, period)
    a = np.array([[power[i][j] - int(i == j) for j in range(d)] for i in range(d)], dtype=object)
    det = integer_determinant(a)
    order = abs(det)
    if order == 0:
        raise NotHyperbolic("L^p - I is singular")
    if order > max_points:
        raise PreconditionError(f"{order} periodic points of period {period} exceed max_points={max_points}")
    inv = _fraction_inverse(a)
    generators = [tuple(int(inv[i][j] * det) * (1 if det > 0 else -1) % order for i in range(d)) for j in range(d)]
    seen = {tuple([0] * d)}
    queue = deque(seen)
    while queue:
        k = queue.popleft()
        for gen in generators:
            nxt = tuple((u + v) % order for u, v in zip(k, gen))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    proper = [q for q in range(1, period) if period % q == 0]
    lower = [integer_power(matrix, q) for q in proper]
    keep = []
    for k in sorted(seen):
        if any(_fixed_by(pw, k, order) for pw in lower):
            continue
        keep.append([c / order for c in k])
    return np.array(keep, dtype=float).reshape(-1, d)


def _fraction_inverse(a: np.ndarray) -> list[list[Fraction]]:
    n = a.shape[0]
    aug = [[Fraction(int(a[i][j])) for j in range(n)] + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        piv = aug[col][col]
        aug[col] = [v / piv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [v - factor * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def _fixed_by(power: list[list[int]], k: tuple[int, ...], order: int) -> bool:
    n = len(k)
    return all((sum(power[i][j] * k[j] for j in range(n)) - k[i]) % order == 0 for i in range(n))


# ---------------------------------------------------------------------------
# torus points


# points of T^d: float arrays of shape (..., d) with every coordinate in [0, 1)
TorusPoint = np.ndarray


def reduce_mod1(lift: Sequence[float] | np.ndarray) -> TorusPoint:
    """Componentwise reduction into [0, 1)."""
    x = np.asarray(lift, dtype=float)
    out = x - np.floor(x)
    return np.where(out >= 1.0, 0.0, out)


def nearest_lift(a: TorusPoint, b: TorusPoint) -> np.ndarray:
    """Representative of b - a with every component in [-0.5, 0.5)."""
    diff = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return diff - np.floor(diff + 0.5)


def torus_distance(a: TorusPoint, b: TorusPoint) -> np.ndarray:
    """Flat torus distance, vectorized over leading axes."""
    return np.linalg.norm(nearest_lift(a, b), axis=-1)
