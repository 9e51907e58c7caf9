"""Dwell-time stability certification and the disturbance ultimate bound.

Two certificate routes are provided for each dwell-time constraint:

* spectral: search for a positive vector ``lam`` making
  ``lam' (J Phi(theta) - I) < 0`` on the dwell window (plus
  ``lam' A(tbar) < 0`` in the minimum case), with the state-transition
  matrix ``Phi`` integrated by classical RK4;
* clock: search for the coefficients of a polynomial vector ``zeta(tau)``
  satisfying the clock-dependent linear inequalities, relaxed over the
  interval by a Handelman basis or by gridding.

Strict inequalities are encoded with explicit margins (default 1e-6 on
certificate entries) and the jump condition's epsilon is a user parameter
(default 1e-3).  Sampled relaxations are always re-verified on a fine grid
before a certificate is returned.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import FineGridViolation, PositivityError
from .lpcore import LinearProgram, lp_feasibility
from .polymat import Poly, PolyMatrix
from .relax import AffinePoly, LPBuilder, Relaxation, require_nonneg
from .systems import ImpulsiveSystem, check_positivity

__all__ = [
    "TransitionMatrix",
    "SpectralCertificate",
    "ClockCertificate",
    "IssBound",
    "transition_matrix",
    "certify_range_spectral",
    "certify_min_spectral",
    "certify_range_clock",
    "certify_min_clock",
    "iss_bound",
    "clock_range_margin",
    "clock_min_margin",
]

log = logging.getLogger(__name__)

MARGIN = 1e-6
EPS = 1e-3
BOX = 1e6
THETA_SAMPLES = 101
TRANS_STEPS = 200
REVERIFY_POINTS = 10_000
SLACK_TOL = 1e-8


def _flow_stack(a) -> np.ndarray:
    if isinstance(a, PolyMatrix):
        return np.ascontiguousarray(a.coeffs)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return np.ascontiguousarray(a[None, :, :])


@dataclass
class TransitionMatrix:
    """Phi(T) for the flow, with the RK4 node history retained."""

    value: np.ndarray
    horizon: float
    steps: int
    times: np.ndarray
    samples: np.ndarray            # (steps+1, n, n)

    def at_index(self, k: int) -> np.ndarray:
        return self.samples[k]


def transition_matrix(a, horizon: float, steps: int = TRANS_STEPS) -> TransitionMatrix:
    """Integrate dPhi/ds = A(s) Phi, Phi(0) = I with fixed-step RK4."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    coeffs = _flow_stack(a)
    times = np.linspace(0.0, float(horizon), steps + 1)
    samples = _kernels.transition_scan(coeffs, times, np.ones(steps, np.int64))
    return TransitionMatrix(samples[-1], float(horizon), steps, times, samples)


def _transition_checkpoints(coeffs: np.ndarray, times: np.ndarray,
                            target_h: float) -> np.ndarray:
    """Phi at each checkpoint; every interval subdivided so h <= target_h."""
    gaps = np.diff(times)
    substeps = np.maximum(1, np.ceil(gaps / max(target_h, 1e-12)).astype(np.int64))
    return _kernels.transition_scan(coeffs, np.ascontiguousarray(times), substeps)


@dataclass
class SpectralCertificate:
    """Positive vector certificate for statement-(a) style conditions."""

    lam: np.ndarray
    margin: float                  # max over tested points; negative when valid
    theta_grid: np.ndarray

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam.tolist(),
            "margin": self.margin,
            "theta_points": int(self.theta_grid.size),
        }


@dataclass
class ClockCertificate:
    """Polynomial vector certificate for statement-(b) style conditions."""

    zeta: PolyMatrix               # n x 1
    eps: float
    backend: str                   # e.g. "handelman" or "grid(101)"
    margin: float                  # min re-verified slack over all inequalities

    def zeta_polys(self) -> list:
        return [self.zeta.entry(i, 0) for i in range(self.zeta.rows)]

    def to_dict(self) -> dict:
        return {
            "zeta": [p.coeffs.tolist() for p in self.zeta_polys()],
            "eps": self.eps,
            "backend": self.backend,
            "margin": self.margin,
        }


@dataclass
class IssBound:
    """Ultimate bound mu/(1-eps) on V(x) = lam' x under bounded inputs."""

    epsilon_contract: float
    mu: float
    ultimate: float

    def to_dict(self) -> dict:
        return {
            "epsilon_contract": self.epsilon_contract,
            "mu": self.mu,
            "ultimate": self.ultimate,
        }


def _require_positive(sys: ImpulsiveSystem, upper: float):
    report = check_positivity(sys, np.linspace(0.0, upper, 201))
    if not report.positive:
        raise PositivityError(
            "system is not state positive "
            f"(metzler={report.metzler_margin:.3g}, ec={report.ec_margin:.3g}, "
            f"jump={report.jump_margin:.3g}, ed={report.ed_margin:.3g})"
        )


def _spectral_rows(prog: LinearProgram, phi_list, jumps, margin):
    n = jumps[0].shape[0]
    eye = np.eye(n)
    for phi in phi_list:
        for jmp in jumps:
            mat = jmp @ phi - eye
            for col in range(n):
                prog.add_row(mat[:, col], "<=", -margin)


def _spectral_eval(lam, phi_list, jumps):
    n = jumps[0].shape[0]
    eye = np.eye(n)
    worst = -np.inf
    for phi in phi_list:
        for jmp in jumps:
            worst = max(worst, float((lam @ (jmp @ phi - eye)).max()))
    return worst


def certify_range_spectral(sys: ImpulsiveSystem, t_min: float, t_max: float,
                           theta_samples: int = THETA_SAMPLES,
                           margin: float = MARGIN, box: float = BOX,
                           steps: int = TRANS_STEPS):
    """Range dwell-time certificate via the transition-matrix route.

    Returns a :class:`SpectralCertificate` or ``None`` when the LP is
    infeasible.  A coarse-grid certificate that fails the 10x finer
    re-verification raises :class:`FineGridViolation` (raise theta_samples).
    """
    if not 0 < t_min <= t_max:
        raise ValueError("need 0 < t_min <= t_max")
    _require_positive(sys, t_max)
    coeffs = _flow_stack(sys.a)
    thetas = np.linspace(t_min, t_max, theta_samples)
    times = np.unique(np.concatenate([[0.0], thetas]))
    phis = _transition_checkpoints(coeffs, times, t_max / steps)
    phi_by_theta = [phis[np.searchsorted(times, th)] for th in thetas]

    n = sys.n
    prog = LinearProgram(np.zeros(n), lower=np.full(n, margin), upper=np.full(n, box))
    _spectral_rows(prog, phi_by_theta, sys.jumps, margin)
    out = lp_feasibility(prog)
    if not out.optimal:
        return None
    lam = out.x / out.x.max()

    fine = np.linspace(t_min, t_max, (theta_samples - 1) * 10 + 1)
    times_f = np.unique(np.concatenate([[0.0], fine]))
    phis_f = _transition_checkpoints(coeffs, times_f, t_max / steps)
    phi_fine = [phis_f[np.searchsorted(times_f, th)] for th in fine]
    worst = _spectral_eval(lam, phi_fine, sys.jumps)
    if worst >= 0.0:
        raise FineGridViolation(
            f"range spectral certificate fails on the fine grid (margin {worst:.3e}); "
            "increase theta_samples"
        )
    return SpectralCertificate(lam, worst, fine)


def certify_min_spectral(sys: ImpulsiveSystem, tbar: float,
                         margin: float = MARGIN, box: float = BOX,
                         steps: int = TRANS_STEPS):
    """Minimum dwell-time certificate: lam'A(tbar) < 0 and
    lam'(J Phi(tbar) - I) < 0 for every jump map."""
    if not tbar > 0:
        raise ValueError("need tbar > 0")
    _require_positive(sys, tbar)
    a_end = sys.a_at(tbar)
    phi = transition_matrix(sys.a, tbar, steps).value
    n = sys.n
    prog = LinearProgram(np.zeros(n), lower=np.full(n, margin), upper=np.full(n, box))
    for col in range(n):
        prog.add_row(a_end[:, col], "<=", -margin)
    _spectral_rows(prog, [phi], sys.jumps, margin)
    out = lp_feasibility(prog)
    if not out.optimal:
        return None
    lam = out.x / out.x.max()
    worst = max(float((lam @ a_end).max()), _spectral_eval(lam, [phi], sys.jumps))
    return SpectralCertificate(lam, worst, np.array([tbar]))


# ---------------------------------------------------------------------------
# clock-dependent (polynomial) certificates


def _zeta_blocks(n: int, degree: int):
    width = degree + 1
    n_prim = n * width
    idx = [np.arange(i * width, (i + 1) * width) for i in range(n)]
    polys = [AffinePoly.from_var_block(idx[i], n_prim) for i in range(n)]
    return n_prim, idx, polys


def _extract_zeta(x: np.ndarray, n: int, degree: int) -> PolyMatrix:
    width = degree + 1
    cols = [Poly(x[i * width:(i + 1) * width]) for i in range(n)]
    c = np.zeros((width, n, 1))
    for i, p in enumerate(cols):
        c[: len(p.coeffs), i, 0] = p.coeffs
    return PolyMatrix(c)


def clock_range_margin(sys: ImpulsiveSystem, zeta: PolyMatrix, eps: float,
                       t_min: float, t_max: float,
                       points: int = REVERIFY_POINTS) -> float:
    """Min slack of the range clock inequalities on a dense grid (the
    certified inequalities hold iff the returned value is >= 0)."""
    n = sys.n
    polys = [zeta.entry(i, 0) for i in range(n)]
    taus = np.linspace(0.0, t_max, points)
    zeta_v = np.stack([p(taus) for p in polys], axis=1)            # (K, n)
    zdot_v = np.stack([p.derivative()(taus) for p in polys], axis=1)
    if isinstance(sys.a, PolyMatrix):
        a_v = sys.a.eval_grid(taus)                                # (K, n, n)
        flow = zdot_v + np.einsum("kn,kni->ki", zeta_v, a_v)
    else:
        flow = zdot_v + zeta_v @ sys.a
    slack = -float(flow.max())
    thetas = np.linspace(t_min, t_max, points)
    zeta_th = np.stack([p(thetas) for p in polys], axis=1)
    z0 = np.array([p(0.0) for p in polys])
    for jmp in sys.jumps:
        jump_val = (z0 @ jmp)[None, :] - zeta_th + eps
        slack = min(slack, -float(jump_val.max()))
    slack = min(slack, float(z0.min()))
    return slack


def clock_min_margin(sys: ImpulsiveSystem, zeta: PolyMatrix, eps: float,
                     tbar: float, points: int = REVERIFY_POINTS) -> float:
    """Min slack of the minimum-dwell clock inequalities on a dense grid."""
    n = sys.n
    polys = [zeta.entry(i, 0) for i in range(n)]
    taus = np.linspace(0.0, tbar, points)
    zeta_v = np.stack([p(taus) for p in polys], axis=1)
    zdot_v = np.stack([p.derivative()(taus) for p in polys], axis=1)
    if isinstance(sys.a, PolyMatrix):
        a_v = sys.a.eval_grid(taus)
        flow = -zdot_v + np.einsum("kn,kni->ki", zeta_v, a_v)
    else:
        flow = -zdot_v + zeta_v @ sys.a
    slack = -float(flow.max())
    z_end = np.array([p(tbar) for p in polys])
    z0 = np.array([p(0.0) for p in polys])
    slack = min(slack, -float((z_end @ sys.a_at(tbar)).max()))
    for jmp in sys.jumps:
        slack = min(slack, -float((z_end @ jmp - z0 + eps).max()))
    slack = min(slack, float(z_end.min()))
    return slack


def certify_range_clock(sys: ImpulsiveSystem, t_min: float, t_max: float,
                        degree: int = 4, backend: str = "handelman",
                        grid_points: int = 101, eps: float = EPS,
                        margin: float = MARGIN, box: float = BOX):
    """Range dwell-time certificate via a polynomial zeta(tau).

    The decision variables are zeta's coefficients; interval inequalities
    are relaxed with the chosen backend.  Returns a
    :class:`ClockCertificate` or ``None``; a grid-backed certificate that
    fails dense re-verification raises :class:`FineGridViolation`.
    """
    if degree < 1 and backend == "handelman":
        raise ValueError("handelman backend needs degree >= 1")
    if not 0 < t_min <= t_max:
        raise ValueError("need 0 < t_min <= t_max")
    _require_positive(sys, t_max)
    relax = Relaxation(backend, grid_points)
    n = sys.n
    a_stack = _flow_stack(sys.a)
    n_prim, idx, zp = _zeta_blocks(n, degree)
    builder = LPBuilder()
    builder.add_vars(n_prim, -box, box)

    for i in range(n):
        # flow: -(zdot_i + sum_k zeta_k A[k, i]) >= 0 on [0, t_max]
        expr = zp[i].derivative()
        for k in range(n):
            expr = expr + zp[k].mul_poly(a_stack[:, k, i])
        require_nonneg(builder, -expr, 0.0, t_max, relax,
                       cushion=(margin if relax.kind == "grid" else 0.0), box=box)
    for jmp in sys.jumps:
        for i in range(n):
            # jump: zeta_i(theta) - sum_k zeta_k(0) J[k, i] - eps >= 0
            expr = zp[i]
            lin0 = np.zeros((1, n_prim))
            for k in range(n):
                lin0[0, idx[k][0]] = jmp[k, i]
            expr = expr - AffinePoly(lin0, np.zeros(1)) - AffinePoly.from_const([eps], n_prim)
            require_nonneg(builder, expr, t_min, t_max, relax,
                           cushion=(margin if relax.kind == "grid" else 0.0), box=box)
    for i in range(n):
        builder.add_row(np.array([idx[i][0]]), np.array([1.0]), ">=", margin)

    out = lp_feasibility(builder.build())
    if not out.optimal:
        return None
    zeta = _extract_zeta(out.x[:n_prim], n, degree)
    slack = clock_range_margin(sys, zeta, eps, t_min, t_max)
    if slack < -SLACK_TOL:
        raise FineGridViolation(
            f"range clock certificate fails dense re-verification (slack {slack:.3e}); "
            "increase grid_points"
        )
    return ClockCertificate(zeta, eps, relax.tag(), slack)


def certify_min_clock(sys: ImpulsiveSystem, tbar: float, degree: int = 4,
                      backend: str = "handelman", grid_points: int = 101,
                      eps: float = EPS, margin: float = MARGIN,
                      box: float = BOX):
    """Minimum dwell-time certificate via a polynomial zeta(tau); note the
    sign flip on the zeta derivative relative to the range case."""
    if not tbar > 0:
        raise ValueError("need tbar > 0")
    _require_positive(sys, tbar)
    relax = Relaxation(backend, grid_points)
    n = sys.n
    a_stack = _flow_stack(sys.a)
    a_end = sys.a_at(tbar)
    n_prim, idx, zp = _zeta_blocks(n, degree)
    builder = LPBuilder()
    builder.add_vars(n_prim, -box, box)

    for i in range(n):
        # flow: zdot_i - sum_k zeta_k A[k, i] >= 0 on [0, tbar]
        expr = zp[i].derivative()
        for k in range(n):
            expr = expr - zp[k].mul_poly(a_stack[:, k, i])
        require_nonneg(builder, expr, 0.0, tbar, relax,
                       cushion=(margin if relax.kind == "grid" else 0.0), box=box)
    end_rows = [zp[k].affine_at(tbar)[0] for k in range(n)]
    for i in range(n):
        # anchor flow: -(sum_k zeta_k(tbar) A(tbar)[k, i]) >= margin
        row = -sum(a_end[k, i] * end_rows[k] for k in range(n))
        builder.add_row(np.arange(n_prim), row, ">=", margin)
    for jmp in sys.jumps:
        for i in range(n):
            # jump: zeta_i(0) - sum_k zeta_k(tbar) J[k, i] - eps >= 0
            row = -sum(jmp[k, i] * end_rows[k] for k in range(n))
            row[idx[i][0]] += 1.0
            builder.add_row(np.arange(n_prim), row, ">=", eps)
    for i in range(n):
        builder.add_row(np.arange(n_prim), end_rows[i], ">=", margin)

    out = lp_feasibility(builder.build())
    if not out.optimal:
        return None
    zeta = _extract_zeta(out.x[:n_prim], n, degree)
    slack = clock_min_margin(sys, zeta, eps, tbar)
    if slack < -SLACK_TOL:
        raise FineGridViolation(
            f"minimum clock certificate fails dense re-verification (slack {slack:.3e}); "
            "increase grid_points"
        )
    return ClockCertificate(zeta, eps, relax.tag(), slack)


# ---------------------------------------------------------------------------
# input-to-state ultimate bound


def iss_bound(sys: ImpulsiveSystem, cert: SpectralCertificate,
              wc_sup: float, wd_sup: float, t_min: float, t_max: float,
              steps: int = 400) -> IssBound:
    """Ultimate bound on V(x) = lam' x under range dwell-time.

    The contraction factor comes from the certificate inequality; the input
    gain integrates Psi(theta, s) E_c(s) by trapezoidal quadrature on the
    RK4 node grid, with Psi(theta, s) = Phi(theta) Phi(s)^-1 evaluated by
    linear solves rather than inversion.
    """
    if not 0 < t_min <= t_max:
        raise ValueError("need 0 < t_min <= t_max")
    lam = np.asarray(cert.lam, dtype=float)
    coeffs = _flow_stack(sys.a)
    n = sys.n
    n1 = max(int(round(steps * t_min / t_max)), 1)
    n2 = max(steps - n1, 1)
    times = np.unique(np.concatenate([
        np.linspace(0.0, t_min, n1 + 1),
        np.linspace(t_min, t_max, n2 + 1),
    ]))
    phis = _transition_checkpoints(coeffs, times, t_max / steps)
    theta_mask = times >= t_min - 1e-12

    # contraction: eps = 1 + max_i [lam' (J Phi - I)]_i / lam_i
    eye = np.eye(n)
    worst_ratio = -np.inf
    for k in np.flatnonzero(theta_mask):
        for jmp in sys.jumps:
            ratios = (lam @ (jmp @ phis[k] - eye)) / lam
            worst_ratio = max(worst_ratio, float(ratios.max()))
    eps_c = 1.0 + worst_ratio
    if not 0.0 < eps_c < 1.0:
        raise ValueError(f"contraction factor {eps_c:.4g} outside (0, 1)")

    pc = sys.pc
    if pc and wc_sup != 0.0:
        g_vals = np.stack([
            np.linalg.solve(phis[k], sys.ec_at(times[k])) for k in range(times.size)
        ])
        cum = np.zeros_like(g_vals)
        dt = np.diff(times)
        for k in range(1, times.size):
            cum[k] = cum[k - 1] + 0.5 * dt[k - 1] * (g_vals[k - 1] + g_vals[k])
        big_m = np.full((n, pc), -np.inf)
        for k in np.flatnonzero(theta_mask):
            big_m = np.maximum(big_m, phis[k] @ cum[k])
    else:
        big_m = np.zeros((n, pc))

    mu = 0.0
    if sys.pd and wd_sup != 0.0:
        mu += float(lam @ (sys.e_d @ np.ones(sys.pd))) * wd_sup
    if pc and wc_sup != 0.0:
        mu += max(float(lam @ (jmp @ big_m @ np.ones(pc))) for jmp in sys.jumps) * wc_sup
    ultimate = mu / (1.0 - eps_c)
    return IssBound(eps_c, mu, ultimate)
