"""Plant data model, dwell-time specs, positivity checks, and liftings.

The on-disk exchange format is JSON: integer keys ``n, pc, pd, qc, qd``,
row-major matrices ``A, Ec, Ed, Cc, Fc, Cd, Fd`` (omitted when a dimension
is zero), ``J`` as an array of jump matrices (length >= 1), and an optional
``dwell`` object (``{"kind": "range", "tmin": .., "tmax": ..}`` or
``{"kind": "minimum", "tbar": ..}``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SystemFormatError
from .polymat import PolyMatrix

__all__ = [
    "ImpulsiveSystem",
    "DwellSpec",
    "DisturbanceBounds",
    "PositivityReport",
    "check_positivity",
    "lift_sampled_data",
    "lift_switched",
    "load_system",
    "save_system",
    "save_report",
]


@dataclass(frozen=True)
class DwellSpec:
    """Range [tmin, tmax] or minimum tbar constraint on inter-impulse gaps."""

    kind: str            # "range" | "minimum"
    tmin: float = 0.0
    tmax: float = 0.0
    tbar: float = 0.0

    @classmethod
    def range(cls, tmin: float, tmax: float) -> "DwellSpec":
        if not (0.0 < tmin <= tmax < np.inf):
            raise ValueError(f"need 0 < tmin <= tmax < inf, got [{tmin}, {tmax}]")
        return cls("range", tmin=float(tmin), tmax=float(tmax))

    @classmethod
    def minimum(cls, tbar: float) -> "DwellSpec":
        if not tbar > 0.0:
            raise ValueError(f"need tbar > 0, got {tbar}")
        return cls("minimum", tbar=float(tbar))

    @property
    def horizon_end(self) -> float:
        """Upper end of the clock interval the certificates live on."""
        return self.tmax if self.kind == "range" else self.tbar

    def to_dict(self) -> dict:
        if self.kind == "range":
            return {"kind": "range", "tmin": self.tmin, "tmax": self.tmax}
        return {"kind": "minimum", "tbar": self.tbar}

    @classmethod
    def from_dict(cls, d: dict) -> "DwellSpec":
        kind = d.get("kind")
        if kind == "range":
            return cls.range(d["tmin"], d["tmax"])
        if kind == "minimum":
            return cls.minimum(d["tbar"])
        raise SystemFormatError(f"unknown dwell kind {kind!r}")


@dataclass
class DisturbanceBounds:
    """Known pointwise envelopes for the continuous and discrete inputs.

    ``w_c_lo``/``w_c_hi`` map a time t to a length-``pc`` vector;
    ``w_d_lo``/``w_d_hi`` map an impulse index k to a length-``pd`` vector.
    """

    w_c_lo: object = None
    w_c_hi: object = None
    w_d_lo: object = None
    w_d_hi: object = None

    @classmethod
    def constant(cls, wc_lo, wc_hi, wd_lo=None, wd_hi=None) -> "DisturbanceBounds":
        wc_lo = np.atleast_1d(np.asarray(wc_lo, dtype=float))
        wc_hi = np.atleast_1d(np.asarray(wc_hi, dtype=float))
        if np.any(wc_lo > wc_hi):
            raise ValueError("w_c lower bound exceeds upper bound")
        out = cls(w_c_lo=lambda t: wc_lo, w_c_hi=lambda t: wc_hi)
        if wd_lo is not None:
            wd_lo = np.atleast_1d(np.asarray(wd_lo, dtype=float))
            wd_hi = np.atleast_1d(np.asarray(wd_hi, dtype=float))
            if np.any(wd_lo > wd_hi):
                raise ValueError("w_d lower bound exceeds upper bound")
            out.w_d_lo = lambda k: wd_lo
            out.w_d_hi = lambda k: wd_hi
        return out


def _as_matrix(value, shape, name):
    m = np.asarray(value, dtype=float)
    if m.size == 0:
        m = np.zeros(shape)
    m = np.atleast_2d(m)
    if m.shape != shape:
        raise SystemFormatError(f"field {name!r} has shape {m.shape}, expected {shape}")
    return m


@dataclass
class ImpulsiveSystem:
    """Linear impulsive plant with continuous and discrete outputs.

    ``a`` may be a constant matrix or a :class:`PolyMatrix` in the clock
    variable (time since the last impulse).  ``jumps`` holds one matrix for
    plain impulsive systems and N(N-1) matrices for lifted switched systems;
    conditions that mention the jump map are enforced for every entry.
    """

    a: object                      # (n, n) ndarray or PolyMatrix
    e_c: object = None             # (n, pc) ndarray or PolyMatrix
    jumps: list = field(default_factory=list)
    e_d: np.ndarray | None = None  # (n, pd)
    c_c: np.ndarray | None = None  # (qc, n)
    f_c: np.ndarray | None = None  # (qc, pc)
    c_d: np.ndarray | None = None  # (qd, n)
    f_d: np.ndarray | None = None  # (qd, pd)
    dwell: DwellSpec | None = None
    jump_labels: list | None = None

    def __post_init__(self):
        if not isinstance(self.a, PolyMatrix):
            self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
            n = self.a.shape[0]
            if self.a.shape != (n, n):
                raise SystemFormatError("A must be square")
        else:
            if self.a.rows != self.a.cols:
                raise SystemFormatError("A must be square")
        n = self.n

        def shape_to(value, rows, cols, name):
            if value is None:
                return np.zeros((rows, 0 if cols is None else cols))
            arr = np.asarray(value, dtype=float)
            try:
                return arr.reshape(rows, -1 if cols is None else cols)
            except ValueError:
                raise SystemFormatError(
                    f"field {name!r} of size {arr.size} cannot fill "
                    f"({rows} x {cols if cols is not None else '?'})"
                ) from None

        if not isinstance(self.e_c, PolyMatrix):
            self.e_c = shape_to(self.e_c, n, None, "Ec")
        elif self.e_c.rows != n:
            raise SystemFormatError("Ec row count mismatch")
        pc = self.pc
        if not self.jumps:
            raise SystemFormatError("at least one jump matrix is required")
        self.jumps = [_as_matrix(j, (n, n), "J") for j in self.jumps]
        self.e_d = shape_to(self.e_d, n, None, "Ed")
        pd = self.e_d.shape[1]
        if self.c_c is None:
            self.c_c = np.zeros((0, n))
        else:
            self.c_c = np.asarray(self.c_c, dtype=float).reshape(-1, n)
        qc = self.c_c.shape[0]
        self.f_c = shape_to(self.f_c, qc, pc, "Fc")
        if self.c_d is None:
            self.c_d = np.zeros((0, n))
        else:
            self.c_d = np.asarray(self.c_d, dtype=float).reshape(-1, n)
        qd = self.c_d.shape[0]
        self.f_d = shape_to(self.f_d, qd, pd, "Fd")

    # -- dimensions -------------------------------------------------------
    @property
    def n(self) -> int:
        return self.a.rows if isinstance(self.a, PolyMatrix) else self.a.shape[0]

    @property
    def pc(self) -> int:
        return self.e_c.cols if isinstance(self.e_c, PolyMatrix) else self.e_c.shape[1]

    @property
    def pd(self) -> int:
        return self.e_d.shape[1]

    @property
    def qc(self) -> int:
        return self.c_c.shape[0]

    @property
    def qd(self) -> int:
        return self.c_d.shape[0]

    # -- polynomial views used by the integration kernels -----------------
    def a_coeffs(self) -> np.ndarray:
        if isinstance(self.a, PolyMatrix):
            return self.a.coeffs
        return self.a[None, :, :]

    def ec_coeffs(self) -> np.ndarray:
        if isinstance(self.e_c, PolyMatrix):
            return self.e_c.coeffs
        return self.e_c[None, :, :]

    def a_at(self, tau: float) -> np.ndarray:
        return self.a(tau) if isinstance(self.a, PolyMatrix) else self.a

    def ec_at(self, tau: float) -> np.ndarray:
        return self.e_c(tau) if isinstance(self.e_c, PolyMatrix) else self.e_c

    def constant_flow(self) -> bool:
        return not isinstance(self.a, PolyMatrix) and not isinstance(self.e_c, PolyMatrix)

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        if not self.constant_flow():
            raise SystemFormatError("only constant-coefficient systems serialize to JSON")
        out = {
            "n": self.n, "pc": self.pc, "pd": self.pd,
            "qc": self.qc, "qd": self.qd,
            "A": self.a.tolist(),
            "J": [j.tolist() for j in self.jumps],
        }
        for key, mat in (("Ec", self.e_c), ("Ed", self.e_d), ("Cc", self.c_c),
                         ("Fc", self.f_c), ("Cd", self.c_d), ("Fd", self.f_d)):
            if mat.size:
                out[key] = mat.tolist()
        if self.dwell is not None:
            out["dwell"] = self.dwell.to_dict()
        if self.jump_labels is not None:
            out["Jlabels"] = [list(lbl) for lbl in self.jump_labels]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ImpulsiveSystem":
        for key in ("n", "A", "J"):
            if key not in data:
                raise SystemFormatError(f"missing required field {key!r}")
        n = int(data["n"])
        pc = int(data.get("pc", 0))
        pd = int(data.get("pd", 0))
        qc = int(data.get("qc", 0))
        qd = int(data.get("qd", 0))

        def grab(key, shape):
            if key not in data:
                return np.zeros(shape)
            raw = data[key]
            if not isinstance(raw, list) or any(
                not isinstance(row, list) for row in raw
            ):
                raise SystemFormatError(f"field {key!r} must be a nested array")
            widths = {len(row) for row in raw}
            if len(widths) > 1:
                raise SystemFormatError(f"field {key!r} has non-rectangular rows")
            return _as_matrix(raw, shape, key)

        jumps_raw = data["J"]
        if not isinstance(jumps_raw, list) or not jumps_raw:
            raise SystemFormatError("field 'J' must be a non-empty array of matrices")
        jumps = [_as_matrix(j, (n, n), "J") for j in jumps_raw]
        dwell = DwellSpec.from_dict(data["dwell"]) if "dwell" in data else None
        labels = [tuple(lbl) for lbl in data["Jlabels"]] if "Jlabels" in data else None
        return cls(
            a=grab("A", (n, n)),
            e_c=grab("Ec", (n, pc)),
            jumps=jumps,
            e_d=grab("Ed", (n, pd)),
            c_c=grab("Cc", (qc, n)),
            f_c=grab("Fc", (qc, pc)),
            c_d=grab("Cd", (qd, n)),
            f_d=grab("Fd", (qd, pd)),
            dwell=dwell,
            jump_labels=labels,
        )

    def __eq__(self, other):
        if not isinstance(other, ImpulsiveSystem):
            return NotImplemented
        if isinstance(self.a, PolyMatrix) != isinstance(other.a, PolyMatrix):
            return False
        same_a = (self.a == other.a) if isinstance(self.a, PolyMatrix) else np.array_equal(self.a, other.a)
        return bool(
            same_a
            and len(self.jumps) == len(other.jumps)
            and all(np.array_equal(a, b) for a, b in zip(self.jumps, other.jumps))
            and np.array_equal(np.asarray(self.ec_coeffs()), np.asarray(other.ec_coeffs()))
            and np.array_equal(self.e_d, other.e_d)
            and np.array_equal(self.c_c, other.c_c)
            and np.array_equal(self.f_c, other.f_c)
            and np.array_equal(self.c_d, other.c_d)
            and np.array_equal(self.f_d, other.f_d)
            and self.dwell == other.dwell
        )


@dataclass
class PositivityReport:
    """Entry margins deciding state positivity of the plant."""

    metzler_margin: float
    ec_margin: float
    jump_margin: float
    ed_margin: float
    positive: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "metzler_margin": self.metzler_margin,
            "ec_margin": self.ec_margin,
            "jump_margin": self.jump_margin,
            "ed_margin": self.ed_margin,
            "positive": self.positive,
            "tol": self.tol,
        }


def check_positivity(sys: ImpulsiveSystem, tau_grid, tol: float = 1e-12) -> PositivityReport:
    """State positivity margins: min off-diagonal of A(tau) over the grid,
    min entries of Ec(tau), of every jump map, and of Ed."""
    taus = np.asarray(tau_grid, dtype=float).ravel()
    if taus.size == 0:
        raise ValueError("tau_grid must be nonempty")
    n = sys.n
    if isinstance(sys.a, PolyMatrix):
        a_vals = sys.a.eval_grid(taus)
    else:
        a_vals = sys.a[None, :, :]
    off = a_vals.copy()
    idx = np.arange(n)
    off[:, idx, idx] = np.inf
    metzler = float(off.min()) if n > 1 else np.inf
    if sys.pc:
        ec_vals = sys.e_c.eval_grid(taus) if isinstance(sys.e_c, PolyMatrix) else sys.e_c
        ec_margin = float(np.min(ec_vals))
    else:
        ec_margin = np.inf
    jump_margin = float(min(j.min() for j in sys.jumps))
    ed_margin = float(sys.e_d.min()) if sys.e_d.size else np.inf
    positive = (
        metzler >= -tol and ec_margin >= -tol
        and jump_margin >= -tol and ed_margin >= -tol
    )
    return PositivityReport(metzler, ec_margin, jump_margin, ed_margin, positive, tol)


def lift_sampled_data(a, b, e, c_y, f_y, k1, k2) -> ImpulsiveSystem:
    """Lift a sampled-data loop with held static output feedback.

    The control state u is appended to x; the flow holds u constant and the
    jump applies the feedback law, so impulse times are the sampling times.
    The measured output stacks the plant output and the held input.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    e = np.atleast_2d(np.asarray(e, dtype=float))
    c_y = np.atleast_2d(np.asarray(c_y, dtype=float))
    f_y = np.atleast_2d(np.asarray(f_y, dtype=float))
    k1 = np.atleast_2d(np.asarray(k1, dtype=float))
    k2 = np.atleast_2d(np.asarray(k2, dtype=float))
    n = a.shape[0]
    m = b.shape[1]
    p = e.shape[1]
    q = c_y.shape[0]
    if a.shape != (n, n) or b.shape != (n, m) or e.shape != (n, p):
        raise ValueError("A/B/E dimensions are inconsistent")
    if c_y.shape != (q, n) or f_y.shape != (q, p):
        raise ValueError("Cy/Fy dimensions are inconsistent")
    if k1.shape != (m, q) or k2.shape != (m, m):
        raise ValueError("K1/K2 dimensions are inconsistent")
    nz = n + m
    flow = np.zeros((nz, nz))
    flow[:n, :n] = a
    flow[:n, n:] = b
    e_flow = np.vstack([e, np.zeros((m, p))])
    jump = np.zeros((nz, nz))
    jump[:n, :n] = np.eye(n)
    jump[n:, :n] = k1 @ c_y
    jump[n:, n:] = k2
    e_jump = np.vstack([np.zeros((n, p)), k1 @ f_y])
    c_out = np.zeros((q + m, nz))
    c_out[:q, :n] = c_y
    c_out[q:, n:] = np.eye(m)
    f_out = np.vstack([f_y, np.zeros((m, p))])
    return ImpulsiveSystem(
        a=flow, e_c=e_flow, jumps=[jump], e_d=e_jump,
        c_c=c_out, f_c=f_out, c_d=c_out.copy(), f_d=f_out.copy(),
    )


def lift_switched(modes, n: int | None = None) -> ImpulsiveSystem:
    """Lift a switched system to a block impulsive system with one jump map
    per ordered mode pair (i, j), i != j, copying block j into block i."""
    if len(modes) < 2:
        raise ValueError("need at least two modes to switch")
    mats = []
    for idx, mode in enumerate(modes):
        am, em, cm, fm = (np.atleast_2d(np.asarray(x, dtype=float)) for x in mode)
        mats.append((am, em, cm, fm))
    n_mode = mats[0][0].shape[0]
    if n is not None and n != n_mode:
        raise ValueError(f"mode state dimension {n_mode} != declared {n}")
    p = mats[0][1].shape[1]
    q = mats[0][2].shape[0]
    for am, em, cm, fm in mats:
        if am.shape != (n_mode, n_mode) or em.shape != (n_mode, p):
            raise ValueError("mode flow dimensions mismatch")
        if cm.shape != (q, n_mode) or fm.shape != (q, p):
            raise ValueError("mode output dimensions mismatch")
    n_modes = len(mats)
    big_n = n_modes * n_mode
    flow = np.zeros((big_n, big_n))
    e_flow = np.zeros((big_n, p))
    c_out = np.zeros((n_modes * q, big_n))
    f_out = np.zeros((n_modes * q, p))
    for i, (am, em, cm, fm) in enumerate(mats):
        sl = slice(i * n_mode, (i + 1) * n_mode)
        flow[sl, sl] = am
        e_flow[sl] = em
        c_out[i * q:(i + 1) * q, sl] = cm
        f_out[i * q:(i + 1) * q] = fm
    eye = np.eye(n_modes)
    jumps = []
    labels = []
    for i in range(n_modes):
        for j in range(n_modes):
            if i == j:
                continue
            jumps.append(np.kron(np.outer(eye[i], eye[j]), np.eye(n_mode)))
            labels.append((i, j))
    return ImpulsiveSystem(
        a=flow, e_c=e_flow, jumps=jumps, e_d=np.zeros((big_n, 0)),
        c_c=c_out, f_c=f_out, jump_labels=labels,
    )


def load_system(path) -> ImpulsiveSystem:
    """Read the JSON exchange format; malformed files raise
    :class:`SystemFormatError` naming the offending field."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise SystemFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(data, dict):
        raise SystemFormatError(f"{path}: top level must be an object")
    try:
        return ImpulsiveSystem.from_dict(data)
    except SystemFormatError as exc:
        raise SystemFormatError(f"{path}: {exc}") from None


def save_system(path, sys: ImpulsiveSystem):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sys.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_report(path, report):
    """Serialize any report object exposing ``to_dict`` (or a plain dict)."""
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
