"""Univariate polynomials, polynomial matrices, and the Handelman basis.

Polynomials are dense ascending coefficient vectors in the clock variable
tau (``coeffs[i]`` multiplies ``tau**i``).  Everything here is immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npp

__all__ = [
    "Poly",
    "PolyMatrix",
    "HandelmanBasis",
    "handelman_basis",
    "poly_eval",
    "poly_derivative",
    "polymat_eval",
]


def _trim(coeffs: np.ndarray) -> np.ndarray:
    # remove exact trailing zeros only; keep at least the constant term
    out = np.trim_zeros(coeffs, "b")
    if out.size == 0:
        out = np.zeros(1)
    return out


class Poly:
    """Real univariate polynomial with ascending coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float).ravel()
        if c.size == 0:
            c = np.zeros(1)
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        self.coeffs = _trim(c)
        self.coeffs.setflags(write=False)

    @classmethod
    def constant(cls, value: float) -> "Poly":
        return cls([float(value)])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, tau):
        """Evaluate via the Horner recurrence; accepts scalars or arrays."""
        return npp.polyval(tau, self.coeffs)

    def derivative(self) -> "Poly":
        c = self.coeffs
        if len(c) == 1:
            return Poly([0.0])
        return Poly(c[1:] * np.arange(1, len(c)))

    def __add__(self, other):
        other = other if isinstance(other, Poly) else Poly.constant(other)
        return Poly(npp.polyadd(self.coeffs, other.coeffs))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        other = other if isinstance(other, Poly) else Poly.constant(other)
        return Poly(npp.polysub(self.coeffs, other.coeffs))

    def __neg__(self):
        return Poly(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Poly):
            return Poly(npp.polymul(self.coeffs, other.coeffs))
        return Poly(self.coeffs * float(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(
            np.all(self.coeffs == other.coeffs)
        )

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(length)
        out[: len(self.coeffs)] = self.coeffs
        return out

    def __repr__(self):
        return f"Poly({self.coeffs.tolist()})"


def poly_eval(p: Poly, tau: float) -> float:
    """Horner evaluation of ``p`` at ``tau``."""
    return float(p(tau))


def poly_derivative(p: Poly) -> Poly:
    return p.derivative()


class PolyMatrix:
    """Matrix with polynomial entries, stored as a coefficient stack.

    ``coeffs`` has shape ``(degree+1, rows, cols)`` in ascending degree, so
    evaluation at any tau is a Horner recurrence over real matrices and
    differentiation is a shift-and-scale of the stack.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 3:
            raise ValueError("coefficient stack must have shape (deg+1, rows, cols)")
        if c.shape[0] == 0:
            raise ValueError("empty coefficient stack")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial-matrix coefficients must be finite")
        # trim exactly-zero top-degree layers
        top = c.shape[0]
        while top > 1 and not c[top - 1].any():
            top -= 1
        self.coeffs = c[:top].copy()
        self.coeffs.setflags(write=False)

    @classmethod
    def constant(cls, mat) -> "PolyMatrix":
        m = np.atleast_2d(np.asarray(mat, dtype=float))
        return cls(m[None, :, :])

    @classmethod
    def from_entries(cls, grid) -> "PolyMatrix":
        """Build from a row-major grid of Poly (or scalars)."""
        rows = len(grid)
        cols = len(grid[0])
        entries = [
            [e if isinstance(e, Poly) else Poly.constant(e) for e in row]
            for row in grid
        ]
        if any(len(row) != cols for row in entries):
            raise ValueError("non-rectangular entry grid")
        deg = max(e.degree for row in entries for e in row)
        c = np.zeros((deg + 1, rows, cols))
        for i, row in enumerate(entries):
            for j, e in enumerate(row):
                c[: len(e.coeffs), i, j] = e.coeffs
        return cls(c)

    @classmethod
    def diagonal(cls, polys) -> "PolyMatrix":
        polys = [p if isinstance(p, Poly) else Poly.constant(p) for p in polys]
        n = len(polys)
        deg = max(p.degree for p in polys)
        c = np.zeros((deg + 1, n, n))
        for i, p in enumerate(polys):
            c[: len(p.coeffs), i, i] = p.coeffs
        return cls(c)

    @property
    def rows(self) -> int:
        return self.coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[2]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def entry(self, i: int, j: int) -> Poly:
        return Poly(self.coeffs[:, i, j])

    def __call__(self, tau: float) -> np.ndarray:
        out = self.coeffs[-1].copy()
        for k in range(self.coeffs.shape[0] - 2, -1, -1):
            out = out * tau + self.coeffs[k]
        return out

    def eval_grid(self, taus) -> np.ndarray:
        """Evaluate on a 1-d grid; returns shape (len(taus), rows, cols)."""
        taus = np.asarray(taus, dtype=float).ravel()
        out = np.broadcast_to(self.coeffs[-1], (taus.size,) + self.coeffs.shape[1:]).copy()
        for k in range(self.coeffs.shape[0] - 2, -1, -1):
            out = out * taus[:, None, None] + self.coeffs[k]
        return out

    def derivative(self) -> "PolyMatrix":
        c = self.coeffs
        if c.shape[0] == 1:
            return PolyMatrix(np.zeros((1,) + c.shape[1:]))
        scale = np.arange(1, c.shape[0])[:, None, None]
        return PolyMatrix(c[1:] * scale)

    def is_diagonal(self) -> bool:
        off = self.coeffs.copy()
        for i in range(min(self.rows, self.cols)):
            off[:, i, i] = 0.0
        return not off.any()

    def __eq__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.coeffs.shape == other.coeffs.shape and bool(
            np.all(self.coeffs == other.coeffs)
        )

    def __repr__(self):
        return f"PolyMatrix(shape=({self.rows},{self.cols}), degree={self.degree})"


def polymat_eval(m: PolyMatrix, tau: float) -> np.ndarray:
    """Entrywise Horner evaluation of a polynomial matrix."""
    return m(tau)


class HandelmanBasis:
    """All expanded products (tau-lo)^i (hi-tau)^j with i+j <= d.

    Every element is nonnegative on [lo, hi], so any nonnegative combination
    is too; matching monomial coefficients against such a combination turns
    an interval nonnegativity requirement into linear equalities plus sign
    constraints on the combination weights.
    """

    __slots__ = ("interval", "degree", "elements", "powers")

    def __init__(self, lo: float, hi: float, degree: int):
        if not hi > lo:
            raise ValueError(f"need hi > lo, got [{lo}, {hi}]")
        if degree < 0:
            raise ValueError("degree must be nonnegative")
        self.interval = (float(lo), float(hi))
        self.degree = int(degree)
        left = Poly([-lo, 1.0])    # tau - lo
        right = Poly([hi, -1.0])   # hi - tau
        lpow = [Poly.constant(1.0)]
        rpow = [Poly.constant(1.0)]
        for _ in range(degree):
            lpow.append(lpow[-1] * left)
            rpow.append(rpow[-1] * right)
        elements = []
        powers = []
        for total in range(degree + 1):
            for i in range(total, -1, -1):
                j = total - i
                elements.append(lpow[i] * rpow[j])
                powers.append((i, j))
        self.elements = tuple(elements)
        self.powers = tuple(powers)

    def __len__(self):
        return len(self.elements)

    def coeff_matrix(self, length: int) -> np.ndarray:
        """Stack element coefficients into shape (n_elements, length)."""
        if length < self.degree + 1:
            raise ValueError("length shorter than basis degree")
        return np.stack([e.padded(length) for e in self.elements])


def handelman_basis(lo: float, hi: float, d: int) -> HandelmanBasis:
    """Construct the degree-``d`` Handelman basis of the interval [lo, hi]."""
    return HandelmanBasis(lo, hi, d)
