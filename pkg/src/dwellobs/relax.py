"""Assembly of interval nonnegativity constraints into linear programs.

Decision polynomials enter constraints as :class:`AffinePoly`: a polynomial
in the clock variable whose coefficients are affine functions of the
primary LP variables.  A constraint ``p(tau) >= 0 on [lo, hi]`` is relaxed
either by matching ``p`` against a nonnegative combination of Handelman
basis elements (one equality row per monomial degree, fresh multiplier
variables >= 0), or by sampling the interval on a uniform grid; grid
certificates must be re-verified a posteriori by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lpcore import LinearProgram
from .polymat import handelman_basis

__all__ = [
    "AffinePoly",
    "LPBuilder",
    "Relaxation",
    "require_nonneg",
    "require_affine_nonneg",
]

BOX_BOUND = 1e6


@dataclass(frozen=True)
class Relaxation:
    """Backend descriptor: ``handelman`` (exact up to degree) or ``grid``."""

    kind: str = "handelman"
    grid_points: int = 101

    def __post_init__(self):
        if self.kind not in ("handelman", "grid"):
            raise ValueError(f"unknown relaxation backend {self.kind!r}")
        if self.kind == "grid" and self.grid_points < 2:
            raise ValueError("grid backend needs at least 2 points")

    def tag(self) -> str:
        return f"{self.kind}({self.grid_points})" if self.kind == "grid" else "handelman"


class LPBuilder:
    """Incremental construction of a :class:`LinearProgram`."""

    def __init__(self):
        self._lower = []
        self._upper = []
        self._rows = []          # (indices, coefs, rel, rhs)

    @property
    def n_vars(self) -> int:
        return len(self._lower)

    def add_var(self, lower: float, upper: float) -> int:
        self._lower.append(lower)
        self._upper.append(upper)
        return len(self._lower) - 1

    def add_vars(self, count: int, lower: float, upper: float) -> np.ndarray:
        start = len(self._lower)
        self._lower.extend([lower] * count)
        self._upper.extend([upper] * count)
        return np.arange(start, start + count)

    def add_row(self, indices, coefs, rel: str, rhs: float):
        self._rows.append((np.asarray(indices, dtype=int),
                           np.asarray(coefs, dtype=float), rel, float(rhs)))

    def build(self, objective=None) -> LinearProgram:
        n = self.n_vars
        prog = LinearProgram(
            np.zeros(n) if objective is None else np.asarray(objective, dtype=float),
            lower=np.array(self._lower, dtype=float),
            upper=np.array(self._upper, dtype=float),
        )
        for idx, coefs, rel, rhs in self._rows:
            row = np.zeros(n)
            np.add.at(row, idx, coefs)
            prog.add_row(row, rel, rhs)
        return prog


class AffinePoly:
    """Polynomial whose coefficients are affine in the primary variables.

    ``lin`` has shape ``(degree+1, n_primary)`` and ``const`` shape
    ``(degree+1,)``; coefficient k of the polynomial is
    ``lin[k] @ v + const[k]`` for the primary variable vector ``v``.
    """

    __slots__ = ("lin", "const")

    def __init__(self, lin, const):
        self.lin = np.asarray(lin, dtype=float)
        self.const = np.asarray(const, dtype=float)
        if self.lin.ndim != 2 or self.const.shape != (self.lin.shape[0],):
            raise ValueError("inconsistent AffinePoly shapes")

    @classmethod
    def zero(cls, n_primary: int, degree: int = 0) -> "AffinePoly":
        return cls(np.zeros((degree + 1, n_primary)), np.zeros(degree + 1))

    @classmethod
    def from_var_block(cls, indices, n_primary: int) -> "AffinePoly":
        """p(tau) = sum_k v[indices[k]] tau^k."""
        indices = np.asarray(indices, dtype=int)
        lin = np.zeros((indices.size, n_primary))
        lin[np.arange(indices.size), indices] = 1.0
        return cls(lin, np.zeros(indices.size))

    @classmethod
    def from_const(cls, coeffs, n_primary: int) -> "AffinePoly":
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        return cls(np.zeros((coeffs.size, n_primary)), coeffs)

    @property
    def degree(self) -> int:
        return self.lin.shape[0] - 1

    def pad_to(self, degree: int) -> "AffinePoly":
        if degree < self.degree:
            raise ValueError("cannot pad down")
        extra = degree - self.degree
        if extra == 0:
            return self
        lin = np.vstack([self.lin, np.zeros((extra, self.lin.shape[1]))])
        const = np.concatenate([self.const, np.zeros(extra)])
        return AffinePoly(lin, const)

    def _coerce(self, other):
        if isinstance(other, AffinePoly):
            d = max(self.degree, other.degree)
            return self.pad_to(d), other.pad_to(d)
        other = AffinePoly.from_const(other, self.lin.shape[1])
        return self._coerce(other)

    def __add__(self, other):
        a, b = self._coerce(other)
        return AffinePoly(a.lin + b.lin, a.const + b.const)

    def __sub__(self, other):
        a, b = self._coerce(other)
        return AffinePoly(a.lin - b.lin, a.const - b.const)

    def __neg__(self):
        return AffinePoly(-self.lin, -self.const)

    def scale(self, c: float) -> "AffinePoly":
        return AffinePoly(self.lin * c, self.const * c)

    def derivative(self) -> "AffinePoly":
        if self.degree == 0:
            return AffinePoly.zero(self.lin.shape[1])
        k = np.arange(1, self.degree + 1)
        return AffinePoly(self.lin[1:] * k[:, None], self.const[1:] * k)

    def mul_poly(self, coeffs) -> "AffinePoly":
        """Multiply by a fixed polynomial with ascending coefficients."""
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        deg_out = self.degree + coeffs.size - 1
        lin = np.zeros((deg_out + 1, self.lin.shape[1]))
        const = np.zeros(deg_out + 1)
        for j, g in enumerate(coeffs):
            if g != 0.0:
                lin[j:j + self.degree + 1] += g * self.lin
                const[j:j + self.degree + 1] += g * self.const
        return AffinePoly(lin, const)

    def affine_at(self, tau: float):
        """Evaluate at a point: returns (row over primaries, constant)."""
        powers = tau ** np.arange(self.degree + 1)
        return powers @ self.lin, float(powers @ self.const)


def require_nonneg(builder: LPBuilder, ap: AffinePoly, lo: float, hi: float,
                   relaxation: Relaxation, cushion: float = 0.0,
                   box: float = BOX_BOUND):
    """Add rows enforcing ``ap(tau) >= cushion`` for all tau in [lo, hi]."""
    if relaxation.kind == "handelman":
        deg = ap.degree
        basis = handelman_basis(lo, hi, deg)
        bmat = basis.coeff_matrix(deg + 1)            # (n_el, deg+1)
        mult = builder.add_vars(len(basis), 0.0, box)
        prim = np.arange(ap.lin.shape[1])
        for k in range(deg + 1):
            idx = np.concatenate([prim, mult])
            coefs = np.concatenate([ap.lin[k], -bmat[:, k]])
            rhs = -ap.const[k] + (cushion if k == 0 else 0.0)
            builder.add_row(idx, coefs, "==", rhs)
    else:
        prim = np.arange(ap.lin.shape[1])
        for tau in np.linspace(lo, hi, relaxation.grid_points):
            row, cst = ap.affine_at(float(tau))
            builder.add_row(prim, row, ">=", cushion - cst)


def require_affine_nonneg(builder: LPBuilder, row: np.ndarray, const: float,
                          cushion: float = 0.0):
    """Pointwise row: row @ v + const >= cushion."""
    builder.add_row(np.arange(row.size), row, ">=", cushion - const)
