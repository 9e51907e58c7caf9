"""Interval-observer synthesis under range and minimum dwell-time.

One LP searches jointly over a diagonal polynomial scaling X(tau), an
injection numerator U_c(tau), a constant discrete numerator U_d and a
positivity shift alpha.  Feasible solutions yield the observer gains
``L_c(tau) = X(tau)^-1 U_c(tau)`` and ``L_d = X(anchor)^-1 U_d`` with
anchor 0 (range case) or tbar (minimum case, where L_c saturates at tbar).

Because the gains are ratios, solutions form a cone; the scaling ray is
broken by normalising ``sum_i chi_i(anchor) = n``.  X(tau) is kept
invertible on the whole interval by enforcing ``chi_i(tau) >= delta_x``
everywhere, not just at the anchor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .analysis import MARGIN, EPS, BOX
from .errors import FineGridViolation, GainRecoveryFailure
from .lpcore import LinearProgram, lp_feasibility
from .polymat import Poly, PolyMatrix
from .relax import AffinePoly, LPBuilder, Relaxation, require_nonneg
from .systems import DwellSpec, ImpulsiveSystem

__all__ = [
    "ObserverGains",
    "DesignReport",
    "synth_range",
    "synth_min",
    "recover_gain_at",
    "verify_design",
    "jump_positivity_margins",
    "design_slack",
]

log = logging.getLogger(__name__)

DELTA_X = 1e-4
ALPHA_MAX = 1e4
DEGREE_MAX = 10
FINE_GRID = 2001
SLACK_TOL = 1e-8
POS_CUSHION = 1e-9


@dataclass
class ObserverGains:
    """Synthesis decision variables plus the derived observer gains."""

    x: PolyMatrix                  # diagonal n x n
    u_c: PolyMatrix                # n x qc
    u_d: np.ndarray                # n x qd
    case: str                      # "range" | "minimum"
    interval: tuple                # (0.0, t_end): certificate interval
    eps: float = EPS
    alpha: float = 0.0
    delta_x: float = DELTA_X

    def __post_init__(self):
        if self.case not in ("range", "minimum"):
            raise ValueError(f"unknown gain case {self.case!r}")
        if not self.x.is_diagonal():
            raise ValueError("X(tau) must be diagonal")
        self.u_d = np.asarray(self.u_d, dtype=float).reshape(self.x.rows, -1)
        self.interval = (float(self.interval[0]), float(self.interval[1]))

    @property
    def n(self) -> int:
        return self.x.rows

    @property
    def qc(self) -> int:
        return self.u_c.cols

    @property
    def qd(self) -> int:
        return self.u_d.shape[1]

    @property
    def anchor(self) -> float:
        return 0.0 if self.case == "range" else self.interval[1]

    @property
    def tau_sat(self) -> float:
        return np.inf if self.case == "range" else self.interval[1]

    @property
    def l_d(self) -> np.ndarray:
        x_anchor = np.diag(self.x(self.anchor))
        return self.u_d / x_anchor[:, None]

    def x_diag_coeffs(self) -> np.ndarray:
        c = self.x.coeffs
        return np.ascontiguousarray(
            np.stack([c[:, i, i] for i in range(self.n)])
        )

    def uc_coeffs(self) -> np.ndarray:
        c = self.u_c.coeffs
        return np.ascontiguousarray(np.moveaxis(c, 0, 2))

    def l_c_at(self, tau: float) -> np.ndarray:
        return recover_gain_at(self, tau)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "interval": list(self.interval),
            "eps": self.eps,
            "alpha": self.alpha,
            "delta_x": self.delta_x,
            "x_diag": [self.x.entry(i, i).coeffs.tolist() for i in range(self.n)],
            "u_c": [
                [self.u_c.entry(i, k).coeffs.tolist() for k in range(self.qc)]
                for i in range(self.n)
            ],
            "u_d": self.u_d.tolist(),
            "l_d": self.l_d.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObserverGains":
        x = PolyMatrix.diagonal([Poly(c) for c in data["x_diag"]])
        n = x.rows
        uc_entries = data["u_c"]
        qc = len(uc_entries[0]) if uc_entries else 0
        if qc:
            u_c = PolyMatrix.from_entries(
                [[Poly(c) for c in row] for row in uc_entries]
            )
        else:
            u_c = PolyMatrix(np.zeros((1, n, 0)))
        return cls(
            x=x, u_c=u_c, u_d=np.asarray(data["u_d"], dtype=float).reshape(n, -1),
            case=data["case"], interval=tuple(data["interval"]),
            eps=float(data["eps"]), alpha=float(data["alpha"]),
            delta_x=float(data.get("delta_x", DELTA_X)),
        )


def recover_gain_at(gains: ObserverGains, tau: float) -> np.ndarray:
    """Row i of the result is U_c[i, :](tau) / chi_i(tau); in the minimum
    case tau is clamped to the certificate interval (saturated gain)."""
    t = float(tau)
    if gains.case == "minimum":
        t = min(max(t, gains.interval[0]), gains.interval[1])
    x_vals = np.diag(gains.x(t))
    if np.any(x_vals < gains.delta_x / 2):
        raise GainRecoveryFailure(
            f"X({t:.4g}) has a diagonal entry below delta_x/2 = {gains.delta_x / 2:.2e}"
        )
    if gains.qc == 0:
        return np.zeros((gains.n, 0))
    return gains.u_c(t) / x_vals[:, None]


def jump_positivity_margins(sys: ImpulsiveSystem, l_d: np.ndarray):
    """Min entries of J - L_d C_d (over every jump map) and E_d - L_d F_d."""
    l_d = np.asarray(l_d, dtype=float).reshape(sys.n, -1)
    jm = min(float((jmp - l_d @ sys.c_d).min()) for jmp in sys.jumps)
    if sys.pd:
        em = float((sys.e_d - l_d @ sys.f_d).min())
    else:
        em = np.inf
    return jm, em


@dataclass
class DesignReport:
    """Outcome of a synthesis run or an a-posteriori design verification."""

    feasible: bool
    gains: ObserverGains | None
    metzler_margin: float = np.nan
    ec_margin: float = np.nan
    jump_margin: float = np.nan
    ed_margin: float = np.nan
    stability_margin: float = np.nan
    positivity_ok: bool = False
    stability_ok: bool = False
    backend: str = ""
    degree: int = -1
    slack: dict | None = None
    box_active: bool = False
    messages: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "feasible": self.feasible,
            "metzler_margin": _json_num(self.metzler_margin),
            "ec_margin": _json_num(self.ec_margin),
            "jump_margin": _json_num(self.jump_margin),
            "ed_margin": _json_num(self.ed_margin),
            "stability_margin": _json_num(self.stability_margin),
            "positivity_ok": self.positivity_ok,
            "stability_ok": self.stability_ok,
            "backend": self.backend,
            "degree": self.degree,
            "box_active": self.box_active,
            "messages": list(self.messages),
        }
        if self.gains is not None:
            out["gains"] = self.gains.to_dict()
        if self.slack is not None:
            out["slack"] = {k: _json_num(v) for k, v in self.slack.items()}
        return out


def _json_num(v):
    v = float(v)
    if np.isnan(v):
        return None
    if np.isinf(v):
        return 1e308 if v > 0 else -1e308
    return v


# ---------------------------------------------------------------------------
# LP assembly


class _Vars:
    """Primary variable layout for one synthesis LP."""

    def __init__(self, n, qc, qd, degree):
        width = degree + 1
        self.n, self.qc, self.qd, self.degree = n, qc, qd, degree
        pos = 0
        self.chi = [np.arange(pos + i * width, pos + (i + 1) * width) for i in range(n)]
        pos += n * width
        self.uc = [
            [np.arange(pos + (i * qc + k) * width, pos + (i * qc + k + 1) * width)
             for k in range(qc)]
            for i in range(n)
        ]
        pos += n * qc * width
        self.ud = [[pos + i * qd + k for k in range(qd)] for i in range(n)]
        pos += n * qd
        self.alpha = pos
        pos += 1
        self.total = pos

    def polys(self):
        chi_p = [AffinePoly.from_var_block(ix, self.total) for ix in self.chi]
        uc_p = [
            [AffinePoly.from_var_block(self.uc[i][k], self.total) for k in range(self.qc)]
            for i in range(self.n)
        ]
        return chi_p, uc_p

    def alpha_poly(self):
        lin = np.zeros((1, self.total))
        lin[0, self.alpha] = 1.0
        return AffinePoly(lin, np.zeros(1))


def _synth_lp(sys, case, t_lo, t_hi, degree, eps, relax, margin, box,
              delta_x, alpha_max):
    """Build the Theorem-style synthesis LP.  ``t_lo``/``t_hi`` are the
    theta window for the range case; for the minimum case the interval is
    [0, t_hi] with t_hi = tbar."""
    n, qc, qd = sys.n, sys.qc, sys.qd
    a = sys.a
    if isinstance(a, PolyMatrix) or isinstance(sys.e_c, PolyMatrix):
        raise ValueError("synthesis takes constant system matrices")
    e_c, c_c, f_c = sys.e_c, sys.c_c, sys.f_c
    e_d, c_d, f_d = sys.e_d, sys.c_d, sys.f_d
    pc, pd = sys.pc, sys.pd
    v = _Vars(n, qc, qd, degree)
    chi_p, uc_p = v.polys()
    alpha_p = v.alpha_poly()
    builder = LPBuilder()
    builder.add_vars(n * (degree + 1) + n * qc * (degree + 1), -box, box)
    builder.add_vars(n * qd, -box, box)
    builder.add_var(0.0, alpha_max)
    assert builder.n_vars == v.total
    cushion = margin if relax.kind == "grid" else POS_CUSHION
    zero_cushion = margin if relax.kind == "grid" else 0.0
    anchor = 0.0 if case == "range" else t_hi
    end = t_hi
    all_idx = np.arange(v.total)

    def anchor_row(i):
        # chi_i(anchor) as a row over the primaries
        return chi_p[i].affine_at(anchor)[0]

    def uc_anchor_row(i, k):
        return uc_p[i][k].affine_at(anchor)[0]

    # positivity of the error flow: X A - U_c C_c + alpha I >= 0 on [0, end]
    for i in range(n):
        for j in range(n):
            expr = chi_p[i].scale(a[i, j])
            for k in range(qc):
                expr = expr - uc_p[i][k].scale(c_c[k, j])
            if i == j:
                expr = expr + alpha_p
            require_nonneg(builder, expr, 0.0, end, relax, cushion, box)
    # positivity of the error jump: X(anchor) J - U_d C_d >= 0
    for jmp in sys.jumps:
        for i in range(n):
            for j in range(n):
                row = jmp[i, j] * anchor_row(i)
                for k in range(qd):
                    row[v.ud[i][k]] -= c_d[k, j]
                builder.add_row(all_idx, row, ">=", POS_CUSHION)
    # positivity of the continuous input map: X E_c - U_c F_c >= 0 on [0, end]
    for i in range(n):
        for l in range(pc):
            expr = chi_p[i].scale(e_c[i, l])
            for k in range(qc):
                expr = expr - uc_p[i][k].scale(f_c[k, l])
            require_nonneg(builder, expr, 0.0, end, relax, cushion, box)
    # positivity of the discrete input map: X(anchor) E_d - U_d F_d >= 0
    for i in range(n):
        for l in range(pd):
            row = e_d[i, l] * anchor_row(i)
            for k in range(qd):
                row[v.ud[i][k]] -= f_d[k, l]
            builder.add_row(all_idx, row, ">=", POS_CUSHION)

    if case == "range":
        # 1'[Xdot + X A - U_c C_c] <= 0 on [0, t_hi]
        for j in range(n):
            expr = chi_p[j].derivative()
            for i in range(n):
                expr = expr + chi_p[i].scale(a[i, j])
                for k in range(qc):
                    expr = expr - uc_p[i][k].scale(c_c[k, j])
            require_nonneg(builder, -expr, 0.0, end, relax, zero_cushion, box)
        # 1'[X(0) J - U_d C_d - X(theta) + eps I] <= 0 on [t_lo, t_hi]
        for jmp in sys.jumps:
            for j in range(n):
                lin = np.zeros((1, v.total))
                for i in range(n):
                    lin[0] -= jmp[i, j] * anchor_row(i)
                    for k in range(qd):
                        lin[0, v.ud[i][k]] += c_d[k, j]
                expr = chi_p[j] + AffinePoly(lin, np.array([-eps]))
                require_nonneg(builder, expr, t_lo, t_hi, relax, zero_cushion, box)
    else:
        # 1'[X(tbar) A - U_c(tbar) C_c + eps I] <= 0
        for j in range(n):
            row = np.zeros(v.total)
            for i in range(n):
                row += a[i, j] * anchor_row(i)
                for k in range(qc):
                    row -= c_c[k, j] * uc_anchor_row(i, k)
            builder.add_row(all_idx, -row, ">=", eps)
        # 1'[-Xdot + X A - U_c C_c] <= 0 on [0, tbar]
        for j in range(n):
            expr = -chi_p[j].derivative()
            for i in range(n):
                expr = expr + chi_p[i].scale(a[i, j])
                for k in range(qc):
                    expr = expr - uc_p[i][k].scale(c_c[k, j])
            require_nonneg(builder, -expr, 0.0, end, relax, zero_cushion, box)
        # 1'[X(tbar) J - U_d C_d - X(0) + eps I] <= 0
        for jmp in sys.jumps:
            for j in range(n):
                row = np.zeros(v.total)
                for i in range(n):
                    row -= jmp[i, j] * anchor_row(i)
                    for k in range(qd):
                        row[v.ud[i][k]] += c_d[k, j]
                row += chi_p[j].affine_at(0.0)[0]
                builder.add_row(all_idx, row, ">=", eps)

    # X(tau) >= delta_x I on the whole interval plus the anchor point
    for i in range(n):
        expr = chi_p[i] - AffinePoly.from_const([delta_x], v.total)
        require_nonneg(builder, expr, 0.0, end, relax, zero_cushion, box)
        builder.add_row(all_idx, anchor_row(i), ">=", delta_x)
    # normalisation breaks the scaling ray: sum_i chi_i(anchor) = n
    norm_row = np.zeros(v.total)
    for i in range(n):
        norm_row += anchor_row(i)
    builder.add_row(all_idx, norm_row, "==", float(n))
    return builder, v


def _extract_gains(sys, x_sol, v: _Vars, case, end, eps, delta_x) -> ObserverGains:
    n, qc, qd = v.n, v.qc, v.qd
    chi = [Poly(x_sol[ix]) for ix in v.chi]
    x_mat = PolyMatrix.diagonal(chi)
    if qc:
        u_c = PolyMatrix.from_entries(
            [[Poly(x_sol[v.uc[i][k]]) for k in range(qc)] for i in range(n)]
        )
    else:
        u_c = PolyMatrix(np.zeros((1, n, 0)))
    u_d = np.array([[x_sol[v.ud[i][k]] for k in range(qd)] for i in range(n)],
                   dtype=float).reshape(n, qd)
    return ObserverGains(
        x=x_mat, u_c=u_c, u_d=u_d, case=case, interval=(0.0, end),
        eps=eps, alpha=float(x_sol[v.alpha]), delta_x=delta_x,
    )


# ---------------------------------------------------------------------------
# a-posteriori verification


def _closed_loop_spectral(sys, gains, dwell: DwellSpec, margin=MARGIN,
                          coarse=101, steps=200):
    """Spectral stability re-check of the error dynamics with the designed
    gains; returns (ok, margin)."""
    n = sys.n
    a_stack = sys.a_coeffs()
    x_c = gains.x_diag_coeffs()
    uc_c = gains.uc_coeffs()
    l_d = gains.l_d
    jumps_cl = [jmp - l_d @ sys.c_d for jmp in sys.jumps]
    eye = np.eye(n)
    if dwell.kind == "range":
        thetas = np.linspace(dwell.tmin, dwell.tmax, coarse)
        times = np.unique(np.concatenate([[0.0], thetas]))
        gaps = np.diff(times)
        sub = np.maximum(1, np.ceil(gaps / (dwell.tmax / steps)).astype(np.int64))
        phis = _kernels.transition_scan_gain(
            a_stack, sys.c_c, x_c, uc_c, gains.tau_sat,
            np.ascontiguousarray(times), sub)
        phi_list = [phis[np.searchsorted(times, th)] for th in thetas]
        prog = LinearProgram(np.zeros(n), lower=np.full(n, margin),
                             upper=np.full(n, BOX))
        for phi in phi_list:
            for jmp in jumps_cl:
                mat = jmp @ phi - eye
                for col in range(n):
                    prog.add_row(mat[:, col], "<=", -margin)
        out = lp_feasibility(prog)
        if not out.optimal:
            return False, np.nan
        lam = out.x / out.x.max()
        fine = np.linspace(dwell.tmin, dwell.tmax, (coarse - 1) * 10 + 1)
        times_f = np.unique(np.concatenate([[0.0], fine]))
        gaps_f = np.diff(times_f)
        sub_f = np.maximum(1, np.ceil(gaps_f / (dwell.tmax / steps)).astype(np.int64))
        phis_f = _kernels.transition_scan_gain(
            a_stack, sys.c_c, x_c, uc_c, gains.tau_sat,
            np.ascontiguousarray(times_f), sub_f)
        worst = -np.inf
        for k in range(times_f.size):
            if times_f[k] < dwell.tmin - 1e-12:
                continue
            for jmp in jumps_cl:
                worst = max(worst, float((lam @ (jmp @ phis_f[k] - eye)).max()))
        return worst < 0.0, worst
    # minimum case
    tbar = dwell.tbar
    times = np.array([0.0, tbar])
    sub = np.array([max(steps, 1)], np.int64)
    phi = _kernels.transition_scan_gain(
        a_stack, sys.c_c, x_c, uc_c, gains.tau_sat, times, sub)[-1]
    a_cl = sys.a_at(tbar)
    if sys.qc:
        a_cl = a_cl - recover_gain_at(gains, tbar) @ sys.c_c
    prog = LinearProgram(np.zeros(n), lower=np.full(n, margin),
                         upper=np.full(n, BOX))
    for col in range(n):
        prog.add_row(a_cl[:, col], "<=", -margin)
    for jmp in jumps_cl:
        mat = jmp @ phi - eye
        for col in range(n):
            prog.add_row(mat[:, col], "<=", -margin)
    out = lp_feasibility(prog)
    if not out.optimal:
        return False, np.nan
    lam = out.x / out.x.max()
    worst = float((lam @ a_cl).max())
    for jmp in jumps_cl:
        worst = max(worst, float((lam @ (jmp @ phi - eye)).max()))
    return worst < 0.0, worst


def verify_design(sys: ImpulsiveSystem, gains: ObserverGains,
                  dwell: DwellSpec, fine_grid: int = FINE_GRID) -> DesignReport:
    """Check the designed gains on a dense clock grid: error-flow Metzler
    margin, input-map nonnegativity, jump nonnegativity, and a spectral
    stability re-check of the closed-loop error dynamics.  Returns a
    failing report rather than raising; every violated margin is itemized.
    """
    n = sys.n
    end = gains.interval[1]
    taus = np.linspace(0.0, end, fine_grid)
    chi_vals = np.stack([gains.x.entry(i, i)(taus) for i in range(n)], axis=1)
    if np.any(chi_vals < gains.delta_x / 2):
        raise GainRecoveryFailure(
            "X(tau) dips below delta_x/2 on the verification grid"
        )
    if sys.qc:
        uc_vals = gains.u_c.eval_grid(taus)              # (K, n, qc)
        l_vals = uc_vals / chi_vals[:, :, None]
        a_cl = sys.a[None, :, :] - l_vals @ sys.c_c
    else:
        l_vals = np.zeros((taus.size, n, 0))
        a_cl = np.broadcast_to(sys.a, (taus.size, n, n)).copy()
    off = a_cl.copy()
    idx = np.arange(n)
    off[:, idx, idx] = np.inf
    metzler = float(off.min()) if n > 1 else np.inf
    if sys.pc:
        ec_cl = sys.e_c[None, :, :] - l_vals @ sys.f_c
        ec_margin = float(ec_cl.min())
    else:
        ec_margin = np.inf
    jump_margin, ed_margin = jump_positivity_margins(sys, gains.l_d)
    positivity_ok = min(metzler, ec_margin, jump_margin, ed_margin) >= -SLACK_TOL
    stability_ok, stab_margin = _closed_loop_spectral(sys, gains, dwell)
    messages = []
    if not positivity_ok:
        messages.append(
            f"error dynamics not positive: metzler {metzler:.3e}, ec {ec_margin:.3e}, "
            f"jump {jump_margin:.3e}, ed {ed_margin:.3e}"
        )
    if not stability_ok:
        messages.append(f"closed-loop spectral check failed (margin {stab_margin})")
    return DesignReport(
        feasible=positivity_ok and stability_ok,
        gains=gains,
        metzler_margin=metzler,
        ec_margin=ec_margin,
        jump_margin=jump_margin,
        ed_margin=ed_margin,
        stability_margin=stab_margin,
        positivity_ok=positivity_ok,
        stability_ok=stability_ok,
        messages=messages,
    )


def design_slack(sys: ImpulsiveSystem, gains: ObserverGains,
                 t_lo: float = 0.0, eps: float | None = None,
                 alpha: float | None = None,
                 points: int = 10_000) -> dict:
    """Re-verify the synthesis inequalities on a dense grid.

    Every entry is a min slack (nonnegative iff the inequality holds); the
    key "overall" is the min across families.  ``eps``/``alpha`` default to
    the values stored with the gains (pass scaled values to check scaled
    solutions)."""
    n = sys.n
    eps = gains.eps if eps is None else eps
    alpha = gains.alpha if alpha is None else alpha
    end = gains.interval[1]
    anchor = gains.anchor
    taus = np.linspace(0.0, end, points)
    chi = [gains.x.entry(i, i) for i in range(n)]
    chi_vals = np.stack([p(taus) for p in chi], axis=1)          # (K, n)
    chid_vals = np.stack([p.derivative()(taus) for p in chi], axis=1)
    x_anchor = np.array([p(anchor) for p in chi])
    if sys.qc:
        uc_vals = gains.u_c.eval_grid(taus)                      # (K, n, qc)
        ucc = np.einsum("kiq,qj->kij", uc_vals, sys.c_c)
        uc_anchor = gains.u_c(anchor)
    else:
        ucc = np.zeros((points, n, n))
        uc_anchor = np.zeros((n, 0))
    xa = chi_vals[:, :, None] * sys.a[None, :, :]                # X(tau) A
    flow_pos = xa - ucc + alpha * np.eye(n)[None, :, :]
    out = {"pos_flow": float(flow_pos.min())}
    if sys.pc:
        xe = chi_vals[:, :, None] * sys.e_c[None, :, :]
        ucf = np.einsum("kiq,ql->kil", uc_vals, sys.f_c) if sys.qc else 0.0
        out["pos_ec"] = float((xe - ucf).min())
    else:
        out["pos_ec"] = np.inf
    udc = gains.u_d @ sys.c_d                                    # (n, n)
    out["pos_jump"] = min(
        float((x_anchor[:, None] * jmp - udc).min()) for jmp in sys.jumps
    )
    if sys.pd:
        out["pos_ed"] = float(
            (x_anchor[:, None] * sys.e_d - gains.u_d @ sys.f_d).min()
        )
    else:
        out["pos_ed"] = np.inf

    col_flow = chid_vals + (xa - ucc).sum(axis=1)                # 1'[Xdot + XA - UcCc]
    if gains.case == "range":
        out["stab_flow"] = -float(col_flow.max())
        jump_const = (x_anchor[:, None] * np.stack(sys.jumps)).sum(axis=1) - udc.sum(axis=0)
        # stab_jump: chi_j(theta) - [1'(X(0)J - Ud Cd)]_j - eps >= 0 on theta window
        th_mask = taus >= t_lo - 1e-12
        slack = np.inf
        for jrow in jump_const:                                   # (n,) per jump map
            vals = chi_vals[th_mask] - jrow[None, :] - eps
            slack = min(slack, float(vals.min()))
        out["stab_jump"] = slack
    else:
        out["stab_flow"] = -float((-chid_vals + (xa - ucc).sum(axis=1)).max())
        a_term = (x_anchor[:, None] * sys.a).sum(axis=0)
        if sys.qc:
            a_term = a_term - (uc_anchor @ sys.c_c).sum(axis=0)
        out["stab_anchor"] = -float((a_term + eps).max())
        chi0 = np.array([p(0.0) for p in chi])
        slack = np.inf
        for jmp in sys.jumps:
            vals = chi0 - (x_anchor[:, None] * jmp).sum(axis=0) + udc.sum(axis=0) - eps
            slack = min(slack, float(vals.min()))
        out["stab_jump"] = slack
    out["x_pos"] = float(chi_vals.min()) - gains.delta_x
    out["overall"] = min(v for v in out.values())
    return out


# ---------------------------------------------------------------------------
# entry points


def _synth(sys, case, t_lo, t_hi, degree, eps, backend, grid_points, margin,
           box, delta_x, alpha_max, degree_max, escalate):
    if sys.qc == 0 and sys.qd == 0:
        raise ValueError("synthesis needs at least one measured output (qc or qd >= 1)")
    dwell = (DwellSpec.range(t_lo, t_hi) if case == "range"
             else DwellSpec.minimum(t_hi))
    degrees = list(range(degree, degree_max + 1, 2)) if escalate else [degree]
    last_report = None
    for deg in degrees:
        pts = grid_points
        for attempt in range(3):
            relax = Relaxation(backend, pts)
            builder, v = _synth_lp(sys, case, t_lo, t_hi, deg, eps, relax,
                                   margin, box, delta_x, alpha_max)
            out = lp_feasibility(builder.build())
            if not out.optimal:
                log.info("synthesis %s infeasible at degree %d (%s)",
                         case, deg, relax.tag())
                last_report = DesignReport(
                    feasible=False, gains=None, backend=relax.tag(), degree=deg,
                    messages=[f"LP infeasible at degree {deg}"],
                )
                break
            gains = _extract_gains(sys, out.x, v, case, t_hi, eps, delta_x)
            slack = design_slack(sys, gains, t_lo=t_lo)
            if slack["overall"] < -SLACK_TOL:
                if backend == "grid" and attempt < 2:
                    pts = (pts - 1) * 2 + 1
                    log.info("grid synthesis re-verification failed "
                             "(slack %.3e); retrying with %d points",
                             slack["overall"], pts)
                    continue
                raise FineGridViolation(
                    f"synthesized design fails dense re-verification "
                    f"(slack {slack['overall']:.3e})"
                )
            report = verify_design(sys, gains, dwell)
            report.backend = relax.tag()
            report.degree = deg
            report.slack = slack
            report.box_active = bool(np.any(np.abs(out.x) >= 0.999 * box))
            if report.feasible:
                return report
            last_report = report
            break
    if last_report is None:
        last_report = DesignReport(feasible=False, gains=None,
                                   backend=backend, degree=degrees[-1])
    return last_report


def synth_range(sys: ImpulsiveSystem, t_min: float, t_max: float,
                degree: int = 4, eps: float = EPS, backend: str = "handelman",
                grid_points: int = 101, margin: float = MARGIN,
                box: float = BOX, delta_x: float = DELTA_X,
                alpha_max: float = ALPHA_MAX, degree_max: int = DEGREE_MAX,
                escalate: bool = True) -> DesignReport:
    """Design interval-observer gains for a range dwell-time [t_min, t_max].

    Tries the requested polynomial degree first and escalates by 2 up to
    ``degree_max`` while the LP is infeasible.  Feasible designs are always
    re-verified by :func:`verify_design` before being returned."""
    if not 0 < t_min <= t_max:
        raise ValueError("need 0 < t_min <= t_max")
    return _synth(sys, "range", t_min, t_max, degree, eps, backend,
                  grid_points, margin, box, delta_x, alpha_max, degree_max,
                  escalate)


def synth_min(sys: ImpulsiveSystem, tbar: float, degree: int = 4,
              eps: float = EPS, backend: str = "handelman",
              grid_points: int = 101, margin: float = MARGIN,
              box: float = BOX, delta_x: float = DELTA_X,
              alpha_max: float = ALPHA_MAX, degree_max: int = DEGREE_MAX,
              escalate: bool = True) -> DesignReport:
    """Design interval-observer gains for a minimum dwell-time tbar; the
    continuous gain saturates at tbar per the minimum-dwell structure."""
    if not tbar > 0:
        raise ValueError("need tbar > 0")
    return _synth(sys, "minimum", 0.0, tbar, degree, eps, backend,
                  grid_points, margin, box, delta_x, alpha_max, degree_max,
                  escalate)
