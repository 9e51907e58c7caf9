"""Numerically hot kernels: RK4 integration loops and the simplex pivot loop.

Every kernel is written once, in numpy style, and compiled with numba's
``@njit`` when available.  Setting the environment variable
``DWELLOBS_DISABLE_JIT=1`` before import selects the pure-numpy fallback
path (the same source, uncompiled).  ``benchmarks/bench_kernels.py``
compares the two paths.

All kernels take plain float64 arrays; callers do the object/array
marshalling.  Polynomial matrices are coefficient stacks of shape
``(degree+1, rows, cols)`` in ascending degree.
"""

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    HAS_NUMBA = False


def _jit_disabled():
    return os.environ.get("DWELLOBS_DISABLE_JIT", "").strip() not in ("", "0")


USE_NUMBA = HAS_NUMBA and not _jit_disabled()


# ---------------------------------------------------------------------------
# polynomial-matrix evaluation


def _mat_horner(coeffs, tau):
    # coeffs: (d+1, n, m) ascending -> value at tau, shape (n, m)
    out = coeffs[-1].copy()
    for k in range(coeffs.shape[0] - 2, -1, -1):
        out = out * tau + coeffs[k]
    return out


def _gain_eval(x_coeffs, uc_coeffs, tau):
    # row i of the gain is U_c[i, :](tau) / chi_i(tau); X is diagonal
    n = uc_coeffs.shape[0]
    q = uc_coeffs.shape[1]
    gain = np.empty((n, q))
    for i in range(n):
        xi = x_coeffs[i, -1]
        for k in range(x_coeffs.shape[1] - 2, -1, -1):
            xi = xi * tau + x_coeffs[i, k]
        for j in range(q):
            u = uc_coeffs[i, j, -1]
            for k in range(uc_coeffs.shape[2] - 2, -1, -1):
                u = u * tau + uc_coeffs[i, j, k]
            gain[i, j] = u / xi
    return gain


# ---------------------------------------------------------------------------
# state-transition scans (matrix ODE dPhi/ds = A(s) Phi, Phi(0) = I)


def _transition_scan(coeffs_a, times, substeps):
    # integrate through the checkpoint grid `times` (ascending, times[0]=0),
    # interval k subdivided into substeps[k] uniform RK4 steps
    n = coeffs_a.shape[1]
    n_pts = times.shape[0]
    out = np.empty((n_pts, n, n))
    phi = np.eye(n)
    out[0] = phi
    for seg in range(n_pts - 1):
        m = substeps[seg]
        h = (times[seg + 1] - times[seg]) / m
        t0 = times[seg]
        for i in range(m):
            t = t0 + i * h
            k1 = mat_horner(coeffs_a, t) @ phi
            k2 = mat_horner(coeffs_a, t + 0.5 * h) @ (phi + 0.5 * h * k1)
            k3 = mat_horner(coeffs_a, t + 0.5 * h) @ (phi + 0.5 * h * k2)
            k4 = mat_horner(coeffs_a, t + h) @ (phi + h * k3)
            phi = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[seg + 1] = phi
    return out


def _transition_scan_gain(coeffs_a, c_c, x_coeffs, uc_coeffs, tau_sat, times, substeps):
    # same scan for the injected flow A(tau) - L(min(tau, tau_sat)) C_c
    n = coeffs_a.shape[1]
    q = c_c.shape[0]
    n_pts = times.shape[0]
    out = np.empty((n_pts, n, n))
    phi = np.eye(n)
    out[0] = phi

    def acl(tau):
        a = mat_horner(coeffs_a, tau)
        if q > 0:
            tc = tau if tau < tau_sat else tau_sat
            a = a - gain_eval(x_coeffs, uc_coeffs, tc) @ c_c
        return a

    for seg in range(n_pts - 1):
        m = substeps[seg]
        h = (times[seg + 1] - times[seg]) / m
        t0 = times[seg]
        for i in range(m):
            t = t0 + i * h
            k1 = acl(t) @ phi
            k2 = acl(t + 0.5 * h) @ (phi + 0.5 * h * k1)
            k3 = acl(t + 0.5 * h) @ (phi + 0.5 * h * k2)
            k4 = acl(t + h) @ (phi + h * k3)
            phi = phi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[seg + 1] = phi
    return out


# ---------------------------------------------------------------------------
# hybrid flow segments (one inter-impulse interval, clock tau starts at 0)


def _flow_plant(coeffs_a, coeffs_e, w_half, x0, h, nsteps):
    # dx/dtau = A(tau) x + E_c(tau) w(t); w sampled on the half-step grid
    # returns node states (nsteps+1, n) and RK stage states (nsteps, 4, n)
    n = x0.shape[0]
    p = coeffs_e.shape[2]
    nodes = np.empty((nsteps + 1, n))
    stages = np.empty((nsteps, 4, n))
    x = x0.copy()
    nodes[0] = x

    def deriv(tau, xs, wi):
        dx = mat_horner(coeffs_a, tau) @ xs
        if p > 0:
            dx = dx + mat_horner(coeffs_e, tau) @ w_half[wi]
        return dx

    for i in range(nsteps):
        tau = i * h
        half = tau + 0.5 * h
        d1 = deriv(tau, x, 2 * i)
        x2 = x + 0.5 * h * d1
        d2 = deriv(half, x2, 2 * i + 1)
        x3 = x + 0.5 * h * d2
        d3 = deriv(half, x3, 2 * i + 1)
        x4 = x + h * d3
        d4 = deriv(tau + h, x4, 2 * i + 2)
        stages[i, 0] = x
        stages[i, 1] = x2
        stages[i, 2] = x3
        stages[i, 3] = x4
        x = x + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        nodes[i + 1] = x
    return nodes, stages


def _flow_observer(coeffs_a, coeffs_e, c_c, f_c, x_coeffs, uc_coeffs, tau_sat,
                   y_stage, w_half, x0, h, nsteps):
    # one observer copy: dx/dtau = A x + E_c w + L(tau)(y - C_c x - F_c w)
    # with y taken from the paired plant run's RK stages; passing y == 0
    # integrates the error dynamics with w as the disturbance gap
    n = x0.shape[0]
    p = coeffs_e.shape[2]
    q = c_c.shape[0]
    nodes = np.empty((nsteps + 1, n))
    x = x0.copy()
    nodes[0] = x

    def deriv(tau, xs, wi, ys):
        dx = mat_horner(coeffs_a, tau) @ xs
        if p > 0:
            dx = dx + mat_horner(coeffs_e, tau) @ w_half[wi]
        if q > 0:
            inno = ys - c_c @ xs
            if p > 0:
                inno = inno - f_c @ w_half[wi]
            tc = tau if tau < tau_sat else tau_sat
            dx = dx + gain_eval(x_coeffs, uc_coeffs, tc) @ inno
        return dx

    for i in range(nsteps):
        tau = i * h
        half = tau + 0.5 * h
        d1 = deriv(tau, x, 2 * i, y_stage[i, 0])
        x2 = x + 0.5 * h * d1
        d2 = deriv(half, x2, 2 * i + 1, y_stage[i, 1])
        x3 = x + 0.5 * h * d2
        d3 = deriv(half, x3, 2 * i + 1, y_stage[i, 2])
        x4 = x + h * d3
        d4 = deriv(tau + h, x4, 2 * i + 2, y_stage[i, 3])
        x = x + (h / 6.0) * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        nodes[i + 1] = x
    return nodes


# ---------------------------------------------------------------------------
# two-phase primal simplex with bounded variables
#
# status codes: 0 optimal, 1 infeasible, 2 unbounded, 3 iteration/numerical


def _rebuild_costs(tab, basis, c_full):
    # z = c - c_B B^-1 A, recomputed from scratch to wash out pivot noise
    z = c_full.copy()
    cb = c_full[basis]
    for i in range(tab.shape[0]):
        if cb[i] != 0.0:
            z -= cb[i] * tab[i, :]
    return z


def _simplex_iterate(tab, c_full, x_b, basis, in_basis, val, lo, hi, n_pin,
                     it, max_iter):
    m_rows, n_cols = tab.shape
    tol_cost = 1e-9
    tol_piv = 1e-9
    inf = np.inf
    deg_streak = 0
    bland = False
    z = _rebuild_costs(tab, basis, c_full)
    since_rebuild = 0
    while True:
        if it >= max_iter:
            return 3, it
        it += 1
        if since_rebuild >= 64:
            z = _rebuild_costs(tab, basis, c_full)
            since_rebuild = 0
        free_span = (hi - lo) > 1e-15
        elig_inc = (~in_basis) & free_span & (val < hi - 1e-15) & (z < -tol_cost)
        elig_dec = (~in_basis) & free_span & (val > lo + 1e-15) & (z > tol_cost)
        enter = -1
        direction = 1.0
        if bland:
            for j in range(n_cols):
                if elig_inc[j]:
                    enter = j
                    direction = 1.0
                    break
                if elig_dec[j]:
                    enter = j
                    direction = -1.0
                    break
        else:
            score = np.where(elig_inc, -z, np.where(elig_dec, z, 0.0))
            jbest = int(np.argmax(score))
            if score[jbest] > tol_cost:
                enter = jbest
                direction = 1.0 if elig_inc[jbest] else -1.0
        if enter < 0:
            if since_rebuild == 0:
                return 0, it
            # maintained costs may have drifted; re-check with exact ones
            z = _rebuild_costs(tab, basis, c_full)
            since_rebuild = 0
            continue

        y = tab[:, enter].copy()
        d = direction
        t_own = (hi[enter] - val[enter]) if d > 0 else (val[enter] - lo[enter])

        co = -d * y
        up = co > tol_piv
        dn = co < -tol_piv
        active = up | dn
        lim = np.where(up, hi[basis], np.where(dn, lo[basis], inf))
        safe = np.where(active, co, 1.0)
        ti = (lim - x_b) / safe
        ti = np.where(active, np.maximum(ti, 0.0), inf)
        t_row = inf
        for i in range(m_rows):
            if ti[i] < t_row:
                t_row = ti[i]
        if t_own < t_row:
            # bound flip: the entering variable crosses to its other bound
            if t_own == inf:
                return 2, it
            val[enter] = hi[enter] if d > 0 else lo[enter]
            x_b -= d * t_own * y
            deg_streak = 0
            bland = False
            since_rebuild += 1
            continue
        if t_row == inf:
            return 2, it
        # among blocking rows: prefer the largest pivot magnitude for
        # stability; under Bland's rule, the smallest basis index
        row_pick = -1
        best_mag = 0.0
        best_b = n_cols + 1
        for i in range(m_rows):
            if ti[i] <= t_row + 1e-12:
                if bland:
                    if basis[i] < best_b:
                        best_b = basis[i]
                        row_pick = i
                else:
                    mag = abs(co[i])
                    if mag > best_mag:
                        best_mag = mag
                        row_pick = i
        step = d * t_row
        x_b -= step * y
        leave = basis[row_pick]
        val[leave] = hi[leave] if co[row_pick] > 0.0 else lo[leave]
        if leave >= n_pin:
            # artificial variables never re-enter once they leave the basis
            lo[leave] = 0.0
            hi[leave] = 0.0
            val[leave] = 0.0
        enter_val = val[enter] + step
        piv = tab[row_pick, enter]
        tab[row_pick, :] = tab[row_pick, :] / piv
        colv = tab[:, enter].copy()
        colv[row_pick] = 0.0
        tab -= colv.reshape(-1, 1) * tab[row_pick:row_pick + 1, :]
        zf = z[enter]
        if zf != 0.0:
            z -= zf * tab[row_pick, :]
        in_basis[leave] = False
        in_basis[enter] = True
        basis[row_pick] = enter
        x_b[row_pick] = enter_val
        since_rebuild += 1
        if t_row < 1e-11:
            deg_streak += 1
            if deg_streak > 40:
                bland = True
        else:
            deg_streak = 0
            bland = False


def _simplex_solve(a_mat, rel, b, lb, ub, cost, max_iter):
    m_rows, n_vars = a_mat.shape
    inf = np.inf
    val0 = np.zeros(n_vars)
    for j in range(n_vars):
        v = 0.0
        if v < lb[j]:
            v = lb[j]
        if v > ub[j]:
            v = ub[j]
        val0[j] = v
    resid = b - a_mat @ val0

    slack_lb = np.empty(m_rows)
    slack_ub = np.empty(m_rows)
    need_art = np.zeros(m_rows, np.bool_)
    for i in range(m_rows):
        if rel[i] < 0:
            slack_lb[i] = 0.0
            slack_ub[i] = inf
        elif rel[i] > 0:
            slack_lb[i] = -inf
            slack_ub[i] = 0.0
        else:
            slack_lb[i] = 0.0
            slack_ub[i] = 0.0
        if rel[i] == 0:
            need_art[i] = True
        else:
            need_art[i] = resid[i] < slack_lb[i] or resid[i] > slack_ub[i]
    n_art = 0
    for i in range(m_rows):
        if need_art[i]:
            n_art += 1
    n_tot = n_vars + m_rows
    n_cols = n_tot + n_art

    tab = np.zeros((m_rows, n_cols))
    tab[:, :n_vars] = a_mat
    lo = np.empty(n_cols)
    hi = np.empty(n_cols)
    lo[:n_vars] = lb
    hi[:n_vars] = ub
    for i in range(m_rows):
        tab[i, n_vars + i] = 1.0
        lo[n_vars + i] = slack_lb[i]
        hi[n_vars + i] = slack_ub[i]
    for j in range(n_tot, n_cols):
        lo[j] = 0.0
        hi[j] = inf
    val = np.zeros(n_cols)
    val[:n_vars] = val0
    basis = np.empty(m_rows, np.int64)
    in_basis = np.zeros(n_cols, np.bool_)
    x_b = np.empty(m_rows)
    k = 0
    for i in range(m_rows):
        if need_art[i]:
            sv = resid[i]
            if sv < slack_lb[i]:
                sv = slack_lb[i]
            if sv > slack_ub[i]:
                sv = slack_ub[i]
            val[n_vars + i] = sv
            r2 = resid[i] - sv
            col = n_tot + k
            if r2 < 0.0:
                tab[i, col] = -1.0
                tab[i, :] = -tab[i, :]
                x_b[i] = -r2
            else:
                tab[i, col] = 1.0
                x_b[i] = r2
            basis[i] = col
            in_basis[col] = True
            k += 1
        else:
            basis[i] = n_vars + i
            in_basis[n_vars + i] = True
            x_b[i] = resid[i]

    it = 0
    if n_art > 0:
        z1 = np.zeros(n_cols)
        for j in range(n_tot, n_cols):
            z1[j] = 1.0
        for i in range(m_rows):
            if basis[i] >= n_tot:
                z1 -= tab[i, :]
        code, it = simplex_iterate(tab, z1, x_b, basis, in_basis, val, lo, hi,
                                    n_tot, it, max_iter)
        if code == 3:
            return 3, val0, it
        art_sum = 0.0
        b_scale = 1.0
        for i in range(m_rows):
            if abs(b[i]) > b_scale:
                b_scale = abs(b[i])
            if basis[i] >= n_tot:
                art_sum += x_b[i]
        if art_sum > 1e-9 * b_scale:
            return 1, val0, it
        # drive residual artificials out of the basis where possible
        for r in range(m_rows):
            if basis[r] >= n_tot:
                for j in range(n_tot):
                    if not in_basis[j] and abs(tab[r, j]) > 1e-7 and hi[j] - lo[j] > 1e-15:
                        piv = tab[r, j]
                        tab[r, :] = tab[r, :] / piv
                        colv = tab[:, j].copy()
                        colv[r] = 0.0
                        tab -= colv.reshape(-1, 1) * tab[r:r + 1, :]
                        old = basis[r]
                        in_basis[old] = False
                        lo[old] = 0.0
                        hi[old] = 0.0
                        val[old] = 0.0
                        in_basis[j] = True
                        basis[r] = j
                        x_b[r] = val[j]
                        break
        for j in range(n_tot, n_cols):
            if not in_basis[j]:
                lo[j] = 0.0
                hi[j] = 0.0
                val[j] = 0.0

    z2 = np.zeros(n_cols)
    z2[:n_vars] = cost
    for i in range(m_rows):
        if basis[i] < n_vars:
            cb = cost[basis[i]]
            if cb != 0.0:
                z2 -= cb * tab[i, :]
    code, it = simplex_iterate(tab, z2, x_b, basis, in_basis, val, lo, hi,
                                n_tot, it, max_iter)
    if code != 0:
        return code, val0, it
    x = val[:n_vars].copy()
    for i in range(m_rows):
        if basis[i] < n_vars:
            x[basis[i]] = x_b[i]
    return 0, x, it


# ---------------------------------------------------------------------------
# path selection

if USE_NUMBA:
    _jit = njit(cache=True)
    mat_horner = _jit(_mat_horner)
    gain_eval = _jit(_gain_eval)
    transition_scan = _jit(_transition_scan)
    transition_scan_gain = _jit(_transition_scan_gain)
    flow_plant = _jit(_flow_plant)
    flow_observer = _jit(_flow_observer)
    simplex_iterate = _jit(_simplex_iterate)
    simplex_solve = _jit(_simplex_solve)
else:
    mat_horner = _mat_horner
    gain_eval = _gain_eval
    transition_scan = _transition_scan
    transition_scan_gain = _transition_scan_gain
    flow_plant = _flow_plant
    flow_observer = _flow_observer
    simplex_iterate = _simplex_iterate
    simplex_solve = _simplex_solve
