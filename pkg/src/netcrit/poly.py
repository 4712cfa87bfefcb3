"""Sparse multivariate polynomials over complex coefficients.

A monomial is a tuple of non-negative integer exponents, one per variable.
A Polynomial maps monomials to complex coefficients; zero coefficients are
never stored.  Differentiation is exact and symbolic.  Evaluation caches
per-variable power tables, which keeps it exact for integer inputs that fit
in the double mantissa and fast for the tracker's inner loop.

Canonical term order is graded lexicographic (total degree first, then
exponents, both descending), so serialized archives are reproducible
byte-for-byte.  The archive text format stores one term per entry as

    re,im : e1 e2 ... en

with 17 significant digits, which round-trips float64 exactly.
"""

from __future__ import annotations

import threading
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse

from .errors import DimensionMismatch

Monomial = tuple  # tuple[int, ...], length == variable count


def format_complex(z: complex) -> str:
    """Serialize a complex number as ``re,im`` at full precision."""
    z = complex(z)
    return f"{z.real:.17g},{z.imag:.17g}"


def parse_complex(s: str) -> complex:
    re, im = s.split(",")
    return complex(float(re), float(im))


def _grlex_key(exps: Monomial):
    # Descending graded lexicographic: higher degree first, then lex.
    return (-sum(exps), tuple(-e for e in exps))


class Polynomial:
    """Immutable sparse polynomial in ``nvars`` complex variables."""

    __slots__ = ("terms", "nvars", "_key")

    def __init__(self, terms: dict, nvars: int):
        clean = {}
        for exps, coeff in terms.items():
            c = complex(coeff)
            if c != 0:
                e = tuple(int(x) for x in exps)
                if len(e) != nvars:
                    raise DimensionMismatch(f"monomial length {len(e)} != nvars {nvars}")
                if any(x < 0 for x in e):
                    raise ValueError("negative exponent")
                clean[e] = c
        self.terms = clean
        self.nvars = int(nvars)
        self._key = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls({}, nvars)

    @classmethod
    def constant(cls, c: complex, nvars: int) -> "Polynomial":
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def variable(cls, index: int, nvars: int) -> "Polynomial":
        if not 0 <= index < nvars:
            raise DimensionMismatch(f"variable index {index} out of range for nvars {nvars}")
        exps = [0] * nvars
        exps[index] = 1
        return cls({tuple(exps): 1.0 + 0.0j}, nvars)

    # -- ring operations ----------------------------------------------------

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        terms = dict(self.terms)
        for exps, c in other.terms.items():
            terms[exps] = terms.get(exps, 0.0) + c
        return Polynomial(terms, self.nvars)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({e: -c for e, c in self.terms.items()}, self.nvars)

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other) + (-self)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float, complex)):
            return Polynomial({e: c * other for e, c in self.terms.items()}, self.nvars)
        other = self._coerce(other)
        terms: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0.0) + c1 * c2
        return Polynomial(terms, self.nvars)

    __rmul__ = __mul__

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise DimensionMismatch(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, (int, float, complex)):
            return Polynomial.constant(other, self.nvars)
        return NotImplemented

    # -- queries ------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        """Max term degree; 0 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, var_indices: Sequence[int]) -> int:
        """Max combined exponent over the given variable group."""
        idx = list(var_indices)
        return max((sum(e[i] for i in idx) for e in self.terms), default=0)

    def canonical_terms(self):
        """Terms as ``(exps, coeff)`` pairs in graded-lex order."""
        return [(e, self.terms[e]) for e in sorted(self.terms, key=_grlex_key)]

    def _canon_key(self):
        if self._key is None:
            self._key = tuple((e, self.terms[e]) for e in sorted(self.terms, key=_grlex_key))
        return self._key

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.nvars == other.nvars
            and self.terms == other.terms
        )

    def __hash__(self) -> int:
        return hash((self.nvars, self._canon_key()))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for exps, c in self.canonical_terms()[:8]:
            mono = "*".join(
                f"w{i + 1}" + (f"^{e}" if e > 1 else "")
                for i, e in enumerate(exps)
                if e > 0
            )
            parts.append(f"({c:.4g}){'*' + mono if mono else ''}")
        tail = " + ..." if len(self.terms) > 8 else ""
        return " + ".join(parts) + tail

    # -- calculus -----------------------------------------------------------

    def differentiate(self, var_index: int) -> "Polynomial":
        """Exact partial derivative with respect to one variable."""
        if not 0 <= var_index < self.nvars:
            raise DimensionMismatch(f"variable index {var_index} out of range")
        terms: dict = {}
        for exps, c in self.terms.items():
            k = exps[var_index]
            if k == 0:
                continue
            e = list(exps)
            e[var_index] = k - 1
            terms[tuple(e)] = terms.get(tuple(e), 0.0) + c * k
        return Polynomial(terms, self.nvars)

    def evaluate(self, point) -> complex:
        """Value at a complex point (cached power tables per variable)."""
        w = np.asarray(point, dtype=np.complex128)
        if w.shape != (self.nvars,):
            raise DimensionMismatch(f"point length {w.shape} != nvars {self.nvars}")
        if not self.terms:
            return 0.0 + 0.0j
        maxdeg = max(max(e) for e in self.terms)
        pw = np.ones((maxdeg + 1, self.nvars), dtype=np.complex128)
        for k in range(1, maxdeg + 1):
            pw[k] = pw[k - 1] * w
        total = 0.0 + 0.0j
        for exps, c in self.terms.items():
            v = c
            for i, e in enumerate(exps):
                if e:
                    v *= pw[e, i]
            total += v
        return total

    # -- archive text format --------------------------------------------------

    def to_lines(self) -> list[str]:
        """Canonical textual form, one term per entry."""
        return [
            f"{format_complex(c)} : {' '.join(str(e) for e in exps)}"
            for exps, c in self.canonical_terms()
        ]

    @classmethod
    def from_lines(cls, lines: Iterable[str], nvars: int) -> "Polynomial":
        terms = {}
        for line in lines:
            coeff_part, _, exp_part = line.partition(":")
            exps = tuple(int(tok) for tok in exp_part.split())
            if len(exps) != nvars:
                raise DimensionMismatch(f"term has {len(exps)} exponents, expected {nvars}")
            terms[exps] = terms.get(exps, 0.0) + parse_complex(coeff_part.strip())
        return cls(terms, nvars)


# ---------------------------------------------------------------------------
# Operation-style wrappers (the object methods above do the work)
# ---------------------------------------------------------------------------


def evaluate(p: Polynomial, point) -> complex:
    return p.evaluate(point)


def differentiate(p: Polynomial, var_index: int) -> Polynomial:
    return p.differentiate(var_index)


def hessian_at(p: Polynomial, point) -> np.ndarray:
    """Symmetric matrix of second partials evaluated at ``point``.

    Mixed partials are computed once and mirrored, so the output equals its
    own transpose exactly.
    """
    w = np.asarray(point, dtype=np.complex128)
    if w.shape != (p.nvars,):
        raise DimensionMismatch(f"point length {w.shape} != nvars {p.nvars}")
    n = p.nvars
    firsts = [p.differentiate(i) for i in range(n)]
    h = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(i, n):
            v = firsts[i].differentiate(j).evaluate(w)
            h[i, j] = v
            h[j, i] = v
    return h


class PolySystem:
    """Ordered list of polynomials sharing one variable count."""

    def __init__(self, polys: Sequence[Polynomial]):
        polys = tuple(polys)
        if not polys:
            raise ValueError("a polynomial system must be nonempty")
        nvars = polys[0].nvars
        for q in polys:
            if q.nvars != nvars:
                raise DimensionMismatch("all polynomials must share one variable count")
        self.polys = polys
        self.nvars = nvars
        self._evaluator = None
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def degrees(self) -> list[int]:
        return [q.total_degree() for q in self.polys]

    def multidegrees(self, groups: Sequence[Sequence[int]]) -> list[list[int]]:
        """Per-equation degrees in each variable group."""
        return [[q.degree_in(g) for g in groups] for q in self.polys]

    def evaluator(self) -> "SystemEvaluator":
        """Fused batched evaluator; derivative tables built once per system."""
        ev = self._evaluator
        if ev is None:
            with self._lock:
                ev = self._evaluator
                if ev is None:
                    ev = SystemEvaluator(self.polys, self.nvars)
                    self._evaluator = ev
        return ev

    def evaluate_at(self, point) -> np.ndarray:
        pts = np.asarray(point, dtype=np.complex128).reshape(1, -1)
        if pts.shape[1] != self.nvars:
            raise DimensionMismatch(f"point length {pts.shape[1]} != nvars {self.nvars}")
        return self.evaluator().values(pts)[0]

    def residual(self, point) -> float:
        """Max-norm of the system value at ``point``."""
        return float(np.max(np.abs(self.evaluate_at(point))))

    def to_lines(self) -> list[list[str]]:
        return [q.to_lines() for q in self.polys]

    @classmethod
    def from_lines(cls, poly_lines: Sequence[Sequence[str]], nvars: int) -> "PolySystem":
        return cls([Polynomial.from_lines(lines, nvars) for lines in poly_lines])


def jacobian_at(sys: PolySystem, point) -> np.ndarray:
    """Jacobian matrix d f_i / d w_j evaluated at ``point``."""
    pts = np.asarray(point, dtype=np.complex128).reshape(1, -1)
    if pts.shape[1] != sys.nvars:
        raise DimensionMismatch(f"point length {pts.shape[1]} != nvars {sys.nvars}")
    _, jacs = sys.evaluator().values_and_jacobians(pts)
    return jacs[0]


class SystemEvaluator:
    """Batched evaluation of a system and its Jacobian on shared power tables.

    All monomials appearing in the equations and their first partials are
    collected into one exponent table ``E`` (T x n).  Evaluating a batch of B
    points costs one power-table build, T*n gathered multiplies, and two
    sparse matvecs, which is what makes tens of thousands of tracked paths
    affordable in pure Python.
    """

    def __init__(self, polys: Sequence[Polynomial], nvars: int):
        self.nvars = nvars
        self.neqs = len(polys)
        derivs = [[q.differentiate(j) for j in range(nvars)] for q in polys]

        col: dict = {}

        def col_of(exps):
            c = col.get(exps)
            if c is None:
                c = len(col)
                col[exps] = c
            return c

        val_rows, val_cols, val_data = [], [], []
        for i, q in enumerate(polys):
            for exps, c in q.terms.items():
                val_rows.append(i)
                val_cols.append(col_of(exps))
                val_data.append(c)
        jac_rows, jac_cols, jac_data = [], [], []
        for i, row in enumerate(derivs):
            for j, q in enumerate(row):
                r = i * nvars + j
                for exps, c in q.terms.items():
                    jac_rows.append(r)
                    jac_cols.append(col_of(exps))
                    jac_data.append(c)

        ncols = max(len(col), 1)
        self._exps = np.zeros((ncols, nvars), dtype=np.int64)
        for exps, c in col.items():
            self._exps[c] = exps
        self._cval = scipy.sparse.csr_matrix(
            (np.asarray(val_data, dtype=np.complex128), (val_rows, val_cols)),
            shape=(self.neqs, ncols),
        )
        self._cjac = scipy.sparse.csr_matrix(
            (np.asarray(jac_data, dtype=np.complex128), (jac_rows, jac_cols)),
            shape=(self.neqs * nvars, ncols),
        )
        self._maxdeg = int(self._exps.max(initial=0))

    def _monomials(self, points: np.ndarray) -> np.ndarray:
        """Monomial values, shape (T, B)."""
        b = points.shape[0]
        t = self._exps.shape[0]
        pw = np.ones((self._maxdeg + 1, b, self.nvars), dtype=np.complex128)
        for k in range(1, self._maxdeg + 1):
            np.multiply(pw[k - 1], points, out=pw[k])
        mono = np.ones((t, b), dtype=np.complex128)
        for v in range(self.nvars):
            e = self._exps[:, v]
            if e.any():
                mono *= pw[e, :, v]
        return mono

    def values(self, points: np.ndarray) -> np.ndarray:
        """System values for a batch of points; shape (B, m)."""
        points = np.ascontiguousarray(points, dtype=np.complex128)
        return (self._cval @ self._monomials(points)).T

    def values_and_jacobians(self, points: np.ndarray):
        """Values (B, m) and Jacobians (B, m, n) for a batch of points."""
        points = np.ascontiguousarray(points, dtype=np.complex128)
        mono = self._monomials(points)
        vals = (self._cval @ mono).T
        b = points.shape[0]
        jacs = (self._cjac @ mono).reshape(self.neqs, self.nvars, b)
        return vals, np.moveaxis(jacs, 2, 0)
