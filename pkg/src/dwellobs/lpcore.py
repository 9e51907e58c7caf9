"""Self-contained dense linear-program solver.

Two-phase primal simplex on a dense tableau with native variable bounds.
Entering variables are chosen by largest reduced cost; after a streak of
degenerate pivots the selection switches to Bland's least-index
anti-cycling rule until progress resumes.  Optimal points are re-checked
against the original, unconverted constraints before being returned.

Solver instances are single-use; run concurrent solves on distinct
``LinearProgram`` objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

__all__ = [
    "LinearProgram",
    "LPOutcome",
    "LPNumericalError",
    "lp_solve",
    "lp_feasibility",
    "FEAS_TOL",
]

FEAS_TOL = 1e-9

LE, EQ, GE = "<=", "==", ">="
_REL_CODE = {LE: -1, EQ: 0, GE: 1, "=": 0, ">=": 1, "<=": -1}


class LPNumericalError(RuntimeError):
    """Raised when the solver cannot certify its own answer."""


@dataclass
class LinearProgram:
    """min c'v subject to rows (a, rel, b) and per-variable bounds.

    The program is stored in the caller's orientation; conversion to the
    solver's standard form happens internally.
    """

    objective: np.ndarray
    rows: list = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.objective.size
        if self.lower is None:
            self.lower = np.full(n, -np.inf)
        if self.upper is None:
            self.upper = np.full(n, np.inf)
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def add_row(self, coeffs, rel: str, rhs: float):
        coeffs = np.asarray(coeffs, dtype=float).ravel()
        if coeffs.size != self.n_vars:
            raise ValueError(
                f"row has {coeffs.size} coefficients, program has {self.n_vars} variables"
            )
        if rel not in _REL_CODE:
            raise ValueError(f"unknown relation {rel!r}")
        self.rows.append((coeffs, rel, float(rhs)))

    def validate(self):
        if np.isnan(self.objective).any() or np.isinf(self.objective).any():
            raise ValueError("objective contains NaN/Inf")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any():
            raise ValueError("bounds contain NaN")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        for i, (a, _, b) in enumerate(self.rows):
            if a.size != self.n_vars:
                raise ValueError(f"row {i} has wrong width")
            if not np.all(np.isfinite(a)) or not np.isfinite(b):
                raise ValueError(f"row {i} contains NaN/Inf")


@dataclass
class LPOutcome:
    status: str                      # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _violation(prog: LinearProgram, x: np.ndarray) -> float:
    worst = 0.0
    for a, rel, b in prog.rows:
        v = float(a @ x) - b
        code = _REL_CODE[rel]
        if code < 0:
            worst = max(worst, v)
        elif code > 0:
            worst = max(worst, -v)
        else:
            worst = max(worst, abs(v))
    lo_v = np.where(np.isfinite(prog.lower), prog.lower - x, -np.inf)
    hi_v = np.where(np.isfinite(prog.upper), x - prog.upper, -np.inf)
    if x.size:
        worst = max(worst, float(lo_v.max()), float(hi_v.max()))
    return worst


def lp_solve(prog: LinearProgram, feas_tol: float = FEAS_TOL,
             max_iter: int | None = None) -> LPOutcome:
    """Solve the program; never raises on degenerate input, only on NaN/Inf
    data or when an allegedly optimal point fails the feasibility re-check."""
    prog.validate()
    m = len(prog.rows)
    n = prog.n_vars
    a_mat = np.zeros((m, n))
    rel = np.zeros(m, np.int8)
    b = np.zeros(m)
    for i, (a, r, rhs) in enumerate(prog.rows):
        a_mat[i] = a
        rel[i] = _REL_CODE[r]
        b[i] = rhs
    if max_iter is None:
        max_iter = 10000 + 50 * (m + n)
    code, x, iters = _kernels.simplex_solve(
        a_mat, rel, b,
        np.ascontiguousarray(prog.lower), np.ascontiguousarray(prog.upper),
        np.ascontiguousarray(prog.objective), max_iter,
    )
    if code == 1:
        return LPOutcome("infeasible", iterations=iters)
    if code == 2:
        return LPOutcome("unbounded", iterations=iters)
    if code == 3:
        raise LPNumericalError(f"simplex hit the iteration cap ({max_iter})")
    worst = _violation(prog, x)
    if worst > feas_tol:
        raise LPNumericalError(
            f"optimal point violates constraints by {worst:.3e} (> {feas_tol:.0e})"
        )
    return LPOutcome("optimal", x=x, objective=float(prog.objective @ x),
                     iterations=iters)


def lp_feasibility(prog: LinearProgram, feas_tol: float = FEAS_TOL) -> LPOutcome:
    """Solve with a zero objective; used for pure feasibility certificates."""
    zeroed = LinearProgram(np.zeros(prog.n_vars), rows=prog.rows,
                           lower=prog.lower, upper=prog.upper)
    return lp_solve(zeroed, feas_tol=feas_tol)
