"""Radial Dirichlet problems for conformal curvature equations and the
``k -> infinity`` continuation producing complete metrics.

Unknown: the log conformal factor ``u`` against the background metric ``g``,
sampled at the nodes of a graded radial grid. Because every supported
background is ``e^{2w}`` times the flat metric, the equation only involves
``v = u + w`` on flat space, and its residual is written in the normalized
form

    F(u) = f(e^{-2v} lambda(v)) - psi / (n - 2),

where ``lambda(v)`` are the flat-frame eigenvalues of ``G/(n-2)`` (Einstein
mode) or ``S^tau`` (Schouten mode) of ``e^{2v}|dx|^2``. This is the original
equation divided by ``e^{2v}``: same solutions, but residuals of order one
all the way to the blow-up boundary.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq, root

from .errors import AdmissibilityError, DomainError, NonConvergenceError
from .geom import Background, Mode, radial_coefficients, radial_pair, target_constant
from .symfun import OperatorFamily, kappa_of_cone, transformed_ellipticity_bound, vartheta_best

__all__ = [
    "ProblemSpec",
    "Grid1D",
    "SolveRecord",
    "Linearization",
    "ContinuationResult",
    "FitReport",
    "validate_problem",
    "rounding_floor",
    "residual",
    "linearize",
    "initial_guess",
    "exact_profile",
    "exact_dirichlet_solution",
    "discretization_error",
    "supersolution",
    "newton_solve",
    "continuation",
    "asymptotic_target",
    "asymptotic_extract",
    "band_width",
    "uniqueness_band",
]

TOL_RESIDUAL = 1e-10
TOL_CONE = 1e-10
MAX_ITER = 50
MIN_STEP = 2.0**-30
INTERIOR_FRACTION = 0.1
# grading exponent that resolves the boundary layer of large-k solves
RESOLVING_BETA = 4.0


# ------------------------------------------------------------------ specs


@dataclass(frozen=True)
class ProblemSpec:
    """One radial Dirichlet problem.

    ``psi`` is a positive constant or a vectorized callable of the coordinate
    radius. ``boundary_value`` is the datum on the outer sphere and, for
    two-sided domains, on the inner one unless ``inner_value`` is given.
    """

    bg: Background
    fam: OperatorFamily
    mode: Mode = Mode()
    psi: float | Callable = 1.0
    boundary_value: float = 0.0
    inner_value: float | None = None

    def __post_init__(self):
        validate_problem(self)

    @property
    def n(self) -> int:
        return self.bg.n

    @property
    def tau(self) -> float:
        return self.mode.tau_for(self.n)

    @property
    def rho(self) -> float:
        """Transform parameter of the principal part: ``(n-2)/(tau-1)``, 1 in Einstein mode."""
        return (self.n - 2) / (self.tau - 1.0)

    def psi_at(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if callable(self.psi):
            out = np.asarray(self.psi(r), dtype=float) * np.ones_like(r)
        else:
            out = np.full(r.shape, float(self.psi))
        if np.any(~(out > 0)):
            raise DomainError("psi must be strictly positive")
        return out

    def with_boundary(self, value: float, inner_value: float | None = None) -> "ProblemSpec":
        return ProblemSpec(self.bg, self.fam, self.mode, self.psi, value, inner_value)

    def same_problem(self, other: "ProblemSpec") -> bool:
        return (self.bg, self.fam, self.mode) == (other.bg, other.fam, other.mode)


def validate_problem(spec: ProblemSpec) -> dict:
    """Check the structural conditions and return the ellipticity data.

    Schouten mode needs ``tau > 1 + (n-2)(1 - kappa*theta)`` and
    ``n tau + 2 - 2n > 0``. Both modes need the principal-part transform
    parameter ``rho = (n-2)/(tau-1)`` to stay below ``1/(1 - kappa*theta)``,
    which in Einstein mode (``rho = 1``) excludes the positive cone.
    Error messages carry the condition labels used by the CLI contract.
    """
    n = spec.bg.n
    fam = spec.fam
    if fam.n != n:
        raise DomainError(f"family dimension {fam.n} differs from background dimension {n}")
    cone = fam.cone
    kappa = kappa_of_cone(cone)
    theta = vartheta_best(cone)
    tau = spec.mode.tau_for(n)
    if spec.mode.kind == "schouten":
        problems = []
        lower = 1.0 + (n - 2) * (1.0 - kappa * theta)
        if not tau > lower:
            problems.append(f"tau = {tau:g} violates (1.15): need tau > 1 + (n-2)(1 - kappa*theta) = {lower:.6g}")
        if not n * tau + 2 - 2 * n > 0:
            problems.append(f"tau = {tau:g} violates (6.2): n*tau + 2 - 2n = {n * tau + 2 - 2 * n:g} <= 0")
        if problems:
            raise DomainError("; ".join(problems))
    rho = (n - 2) / (tau - 1.0)
    try:
        bound = transformed_ellipticity_bound(rho, kappa, theta, n)
    except DomainError as exc:
        if kappa == 0:
            raise DomainError(
                f"{cone.label} is the positive cone Gamma_n (kappa = 0): the equation is not of fully "
                f"uniform ellipticity at rho = {rho:g}; (3.4) requires Gamma != Gamma_n. {exc}"
            ) from None
        raise
    return {"kappa": kappa, "vartheta": theta, "rho": rho, "ellipticity_bound": bound}


# ------------------------------------------------------------------ grid


def _default_beta(m_ref: int = 512, ratio: float = 1e-3) -> float:
    # last interior node of the reference grid sits at d = ratio * L
    return brentq(lambda b: math.expm1(b / m_ref) / math.expm1(b) - ratio, 1e-6, 50.0)


def _default_beta_two_sided(m_ref: int = 512, ratio: float = 1e-3) -> float:
    def first(beta):
        x = 2.0 / m_ref - 1.0
        return 0.5 * (1.0 + math.tanh(beta * x) / math.tanh(beta)) - ratio

    return brentq(first, 1e-6, 20.0)


@dataclass(frozen=True)
class Grid1D:
    """Radial nodes ``r_0 < ... < r_m`` refined toward the blow-up boundary.

    Balls use ``r(xi) = outer - L (e^{beta(1-xi)} - 1)/(e^beta - 1)`` on the
    uniform ``xi_j = j/m``, so that neighbouring spacings differ by the fixed
    factor ``e^{-beta/m}`` and grids nest under doubling of ``m``. Two-sided
    domains use a symmetric tanh map.
    """

    nodes: np.ndarray
    bg: Background
    beta: float

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", r)
        if r.size < 33:
            raise DomainError(f"grid needs m >= 32 intervals, got {r.size - 1}")
        if np.any(np.diff(r) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        if r[0] < self.bg.inner - 1e-15 or r[-1] > self.bg.outer + 1e-15:
            raise DomainError("grid nodes leave the domain")
        h = np.diff(r)
        q = h[1:] / h[:-1]
        if np.min(np.minimum(q, 1.0 / q)) < 0.9:
            raise DomainError("neighbouring grid spacings differ by more than the ratio bound 0.9")

    @classmethod
    def graded(cls, bg: Background, m: int = 512, beta: float | None = None) -> "Grid1D":
        xi = np.arange(m + 1) / m
        L = bg.outer - bg.inner
        if bg.two_sided:
            beta = _default_beta_two_sided() if beta is None else beta
            s = 0.5 * (1.0 + np.tanh(beta * (2 * xi - 1)) / math.tanh(beta))
            r = bg.inner + L * s
        else:
            beta = _default_beta() if beta is None else beta
            r = bg.outer - L * np.expm1(beta * (1.0 - xi)) / math.expm1(beta)
            r[0] = 0.0
        r[-1] = bg.outer
        return cls(r, bg, float(beta))

    @property
    def m(self) -> int:
        return self.nodes.size - 1

    @property
    def d(self) -> np.ndarray:
        return self.bg.distance(self.nodes)

    @property
    def has_center(self) -> bool:
        return not self.bg.two_sided

    @property
    def boundary_index(self) -> np.ndarray:
        return np.array([0, self.m]) if self.bg.two_sided else np.array([self.m])

    @property
    def unknowns(self) -> np.ndarray:
        """Indices of nodes carrying an equation (the center included)."""
        start = 1 if self.bg.two_sided else 0
        return np.arange(start, self.m)

    def stencils(self):
        """Second-order three-point weights ``(D1, D2)`` at interior nodes
        ``1..m-1``, each an ``(m-1, 3)`` array for ``(i-1, i, i+1)``."""
        r = self.nodes
        hm = r[1:-1] - r[:-2]
        hp = r[2:] - r[1:-1]
        d1 = np.stack([-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))], axis=1)
        d2 = np.stack([2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))], axis=1)
        return d1, d2

    def refined(self) -> "Grid1D":
        return Grid1D.graded(self.bg, 2 * self.m, self.beta)


# ---------------------------------------------------------------- records


@dataclass
class SolveRecord:
    u: np.ndarray
    r: np.ndarray
    d: np.ndarray
    k: float | None
    newton_iters: int
    residual_norm: float
    admissible: bool
    min_cone_slack: float
    residuals: np.ndarray | None = None
    cone_slack: np.ndarray | None = None
    asymptotic_estimate: float | None = None
    ellipticity_min_ratio: float | None = None
    restarted: bool = False

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "newton_iters": self.newton_iters,
            "residual_norm": self.residual_norm,
            "admissible": self.admissible,
            "min_cone_slack": self.min_cone_slack,
            "asymptotic_estimate": self.asymptotic_estimate,
            "ellipticity_min_ratio": self.ellipticity_min_ratio,
            "restarted": self.restarted,
            "grid_size": int(self.u.size - 1),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "d", "u", "residual", "cone_slack"])
        res = np.zeros_like(self.u) if self.residuals is None else self.residuals
        slack = np.full_like(self.u, np.nan) if self.cone_slack is None else self.cone_slack
        for row in zip(self.r, self.d, self.u, res, slack):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


# --------------------------------------------------------------- discrete


@dataclass
class _NodeState:
    idx: np.ndarray
    lam: np.ndarray  # normalized eigenvalues (N, n): radial first
    slack: np.ndarray
    dvp: np.ndarray  # d v'/d u at (i-1, i, i+1)
    dvpp: np.ndarray
    dlam_r: tuple  # (d lam_r / d v', d lam_r / d v'')
    dlam_t: tuple
    scale: np.ndarray


def _node_state(spec: ProblemSpec, grid: Grid1D, u: np.ndarray) -> _NodeState:
    n = spec.n
    A, B = radial_coefficients(n, spec.mode)
    r = grid.nodes
    w, wp, wpp = spec.bg.w(r)
    d1, d2 = grid.stencils()
    idx = grid.unknowns
    interior = idx[idx > 0]
    j = interior - 1  # row in the stencil arrays

    vp = np.empty(idx.size)
    vpp = np.empty(idx.size)
    q = np.empty(idx.size)
    dvp = np.zeros((idx.size, 3))
    dvpp = np.zeros((idx.size, 3))
    off = idx.size - interior.size  # 1 when the center is an unknown
    trip = np.stack([u[interior - 1], u[interior], u[interior + 1]], axis=1)
    vp[off:] = np.sum(d1[j] * trip, axis=1) + wp[interior]
    vpp[off:] = np.sum(d2[j] * trip, axis=1) + wpp[interior]
    q[off:] = vp[off:] / r[interior]
    dvp[off:] = d1[j]
    dvpp[off:] = d2[j]
    if off:
        # symmetric extension at the center: v' = 0, v'/r -> v''
        r1 = r[1]
        vp[0] = 0.0
        vpp[0] = 2.0 * (u[1] - u[0]) / r1**2 + wpp[0]
        q[0] = vpp[0]
        dvpp[0] = [0.0, -2.0 / r1**2, 2.0 / r1**2]

    lam_r, lam_t = radial_pair(vp, vpp, q, n, spec.mode)
    scale = np.exp(-2.0 * (u[idx] + w[idx]))
    lam = np.empty((idx.size, n))
    lam[:, 0] = scale * lam_r
    lam[:, 1:] = (scale * lam_t)[:, None]

    rr = np.where(idx > 0, r[idx], 1.0)
    dr_dvp = np.where(idx > 0, A * (n - 1) / rr, 0.0) + 2.0 * (B + 1.0) * vp
    dt_dvp = np.where(idx > 0, (A * (n - 1) - 1.0) / rr, 0.0) + 2.0 * B * vp
    dr_dvpp = np.where(idx > 0, A - 1.0, A * n - 1.0)
    dt_dvpp = np.where(idx > 0, A, A * n - 1.0)
    slack = spec.fam.cone.slack(lam)
    return _NodeState(idx, lam, slack, dvp, dvpp, (dr_dvp, dr_dvpp), (dt_dvp, dt_dvpp), scale)


def _boundary_data(spec: ProblemSpec, grid: Grid1D) -> np.ndarray:
    if grid.bg.two_sided:
        inner = spec.boundary_value if spec.inner_value is None else spec.inner_value
        return np.array([inner, spec.boundary_value], dtype=float)
    return np.array([spec.boundary_value], dtype=float)


def _check_u(grid: Grid1D, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != grid.nodes.shape:
        raise DomainError(f"u has shape {u.shape}, grid has {grid.nodes.size} nodes")
    if not np.all(np.isfinite(u)):
        raise DomainError("u must be finite at every node")
    return u


def _residual_from_state(spec: ProblemSpec, grid: Grid1D, u: np.ndarray, st: _NodeState) -> np.ndarray:
    F = np.zeros_like(u)
    F[st.idx] = spec.fam.evaluate(st.lam) - spec.psi_at(grid.nodes[st.idx]) / (spec.n - 2)
    bi = grid.boundary_index
    F[bi] = u[bi] - _boundary_data(spec, grid)
    return F


def residual(spec: ProblemSpec, grid: Grid1D, u) -> np.ndarray:
    """Normalized residual at every node; Dirichlet rows hold ``u - datum``."""
    u = _check_u(grid, u)
    st = _node_state(spec, grid, u)
    bad = np.flatnonzero(~(st.slack > 0))
    if bad.size:
        j = int(bad[0])
        raise AdmissibilityError(
            f"node {int(st.idx[j])} (r = {grid.nodes[st.idx[j]]:.6g}) leaves {spec.fam.cone.label}: slack {st.slack[j]:.3e}",
            int(st.idx[j]),
            float(st.slack[j]),
        )
    return _residual_from_state(spec, grid, u, st)


@dataclass
class Linearization:
    """Tridiagonal Jacobian in ``scipy.linalg.solve_banded`` layout plus diagnostics."""

    ab: np.ndarray
    min_ratio: float
    bound: float
    trace_defect: float
    euler_defect: float
    min_gradient: float

    def dense(self) -> np.ndarray:
        N = self.ab.shape[1]
        J = np.diag(self.ab[1])
        J += np.diag(self.ab[0, 1:], 1)
        J += np.diag(self.ab[2, :-1], -1)
        return J


def _linearize_state(spec: ProblemSpec, grid: Grid1D, u: np.ndarray, st: _NodeState, bound: float) -> Linearization:
    n = spec.n
    N = u.size
    f, grad = spec.fam.value_and_gradient(st.lam)
    f_r = grad[:, 0]
    f_t = grad[:, 1:].sum(axis=1)
    coef_vp = st.scale * (f_r * st.dlam_r[0] + f_t * st.dlam_t[0])
    coef_vpp = st.scale * (f_r * st.dlam_r[1] + f_t * st.dlam_t[1])
    rows = coef_vp[:, None] * st.dvp + coef_vpp[:, None] * st.dvpp
    rows[:, 1] -= 2.0 * f  # from the e^{-2v} factor, using Euler's identity

    ab = np.zeros((3, N))
    i = st.idx
    ab[1, i] = rows[:, 1]
    ab[0, i + 1] = rows[:, 2]
    has_left = i > 0
    ab[2, i[has_left] - 1] = rows[has_left, 0]
    bi = grid.boundary_index
    ab[1, bi] = 1.0
    # boundary rows are identity rows; clear their off-diagonal entries
    for b in bi:
        if b + 1 < N:
            ab[0, b + 1] = 0.0
        if b - 1 >= 0:
            ab[2, b - 1] = 0.0

    total = grad.sum(axis=1)
    rho = spec.rho
    ratio = (total[:, None] - rho * grad) / ((n - rho) * total[:, None])
    trace_defect = float(np.max(np.abs(total - np.trace(np.einsum("ki,ij->kij", grad, np.eye(n)), axis1=1, axis2=2))))
    euler = np.abs(np.sum(grad * st.lam, axis=1) - f) / np.maximum(1.0, np.abs(f))
    return Linearization(ab, float(np.min(ratio)), bound, trace_defect, float(np.max(euler)), float(np.min(grad)))


def linearize(spec: ProblemSpec, grid: Grid1D, u) -> Linearization:
    """Jacobian of :func:`residual` with node diagnostics.

    Raises :class:`AdmissibilityError` when ``u`` is not admissible.
    """
    u = _check_u(grid, u)
    residual(spec, grid, u)
    st = _node_state(spec, grid, u)
    info = validate_problem(spec)
    return _linearize_state(spec, grid, u, st, info["ellipticity_bound"])


# ---------------------------------------------------------- initializers


def exact_profile(spec: ProblemSpec, r, R: float, psi_value: float | None = None) -> np.ndarray:
    """``u`` of the scaled Poincare metric of the ball of radius ``R``,
    written against the background: ``1/2 log c + log(2R/(R^2 - r^2)) - w``.

    It solves the equation exactly for constant ``psi``.
    """
    psi_value = float(spec.psi_at(np.array([spec.bg.outer]))[0]) if psi_value is None else psi_value
    c = target_constant(spec.n, spec.mode, psi_value)
    r = np.asarray(r, dtype=float)
    w = spec.bg.w(r)[0]
    return 0.5 * math.log(c) + np.log(2.0 * R / (R * R - r * r)) - w


def _match_radius(s: float, target: float, b: float) -> float:
    """Radius ``R > b`` with ``s + log(2R/(R^2 - b^2)) = target``."""
    y = math.exp(target - s)
    return (1.0 + math.sqrt(1.0 + (y * b) ** 2)) / y


def initial_guess(spec: ProblemSpec, grid: Grid1D) -> np.ndarray:
    """Admissible starting point built from exact constant-``psi`` profiles.

    On a ball it is the Poincare-type profile whose radius is chosen so that
    it attains the Dirichlet datum. On two-sided domains a centred profile is
    matched to both data when the outer datum exceeds the inner one, and a
    profile blowing up inside the hole when the inner one is larger.
    """
    n = spec.n
    r = grid.nodes
    psi_b = float(spec.psi_at(np.array([spec.bg.outer]))[0])
    c = target_constant(n, spec.mode, psi_b)
    s = 0.5 * math.log(c)
    w = spec.bg.w(r)[0]
    wa, wb = spec.bg.w(np.array([spec.bg.inner, spec.bg.outer]))[0]
    data = _boundary_data(spec, grid)
    b = spec.bg.outer
    if not grid.bg.two_sided:
        R = _match_radius(s, data[-1] + wb, b)
        v = s + np.log(2.0 * R / (R * R - r * r))
        return v - w
    a = spec.bg.inner
    ta, tb = data[0] + wa, data[1] + wb
    if tb > ta:
        # s' + log(2R/(R^2 - x^2)) through both points
        q = math.exp(tb - ta)
        R2 = (b * b * q - a * a) / (q - 1.0)
        if R2 > b * b:
            R = math.sqrt(R2)
            s2 = tb - math.log(2.0 * R / (R2 - b * b))
            v = s2 + np.log(2.0 * R / (R2 - r * r))
            return v - w
    elif ta > tb:
        # exterior profile log(2 rho/(r^2 - rho^2)) blowing up at rho < a
        q = math.exp(ta - tb)
        P2 = (q * a * a - b * b) / (q - 1.0)
        if 0 < P2 < a * a:
            P = math.sqrt(P2)
            s2 = ta - math.log(2.0 * P / (a * a - P2))
            v = s2 + np.log(2.0 * P / (r * r - P2))
            return v - w
    v = _blended_profile(spec, s, a, b, ta, tb, r)
    if v is not None:
        u0 = v - w
        if np.all(_node_state(spec, grid, u0).slack >= TOL_CONE):
            return u0
    raise DomainError(
        "no closed-form admissible initializer matches these two-sided boundary data; pass u0 explicitly"
    )


def exact_dirichlet_solution(spec: ProblemSpec, grid: Grid1D) -> np.ndarray | None:
    """Closed-form solution of the Dirichlet problem on a ball with constant ``psi``; else None."""
    if grid.bg.two_sided or callable(spec.psi):
        return None
    return initial_guess(spec, grid)


def discretization_error(spec: ProblemSpec, record: SolveRecord, grid: Grid1D) -> float | None:
    """Sup-norm distance of a discrete solution to the closed-form one, when it exists."""
    exact = exact_dirichlet_solution(spec, grid)
    if exact is None:
        return None
    return float(np.max(np.abs(record.u - exact)))


def _blended_profile(spec: ProblemSpec, s: float, a: float, b: float, ta: float, tb: float, r: np.ndarray):
    """``(1/gamma) log(e^{gamma v_1} + e^{gamma v_2})`` of a profile blowing up
    outside the annulus and one blowing up inside the hole.

    With ``gamma = (nB + 1)/(nA - 1)`` the trace of the conformal tensor is a
    positive multiple of ``Lap e^{gamma v}``, and a sum of two subharmonic
    functions is subharmonic, so the blend keeps a positive trace (membership
    in Gamma_1). Membership in smaller cones is checked by the caller.
    """
    n = spec.n
    A, B = radial_coefficients(n, spec.mode)
    gamma = (n * B + 1.0) / (n * A - 1.0)

    def profile(x, p):
        # p = (value of the outer-blowup profile at b, value of the inner-blowup profile at a)
        R = _match_radius(s, p[0], b)
        y = math.exp(p[1] - s)
        P = (math.sqrt(1.0 + (y * a) ** 2) - 1.0) / y
        v1 = s + np.log(2.0 * R / (R * R - x * x))
        v2 = s + np.log(2.0 * P / (x * x - P * P))
        return np.logaddexp(gamma * v1, gamma * v2) / gamma

    def eqs(p):
        va, vb = profile(np.array([a, b]), p)
        return [va - ta, vb - tb]

    for shift in (0.0, -0.5, -1.0, -2.0, 0.5):
        sol = root(eqs, [tb + shift, ta + shift], method="hybr")
        if sol.success and max(abs(x) for x in eqs(sol.x)) <= 1e-10:
            return profile(r, sol.x)
    return None


# ----------------------------------------------------------------- newton


def _record(spec, grid, u, F, st, iters, lin, restarted) -> SolveRecord:
    slack = np.full(u.size, np.nan)
    slack[st.idx] = st.slack
    return SolveRecord(
        u=u.copy(),
        r=grid.nodes.copy(),
        d=grid.d,
        k=None,
        newton_iters=iters,
        residual_norm=float(np.max(np.abs(F))),
        admissible=bool(np.all(st.slack > 0)),
        min_cone_slack=float(np.min(st.slack)),
        residuals=F.copy(),
        cone_slack=slack,
        ellipticity_min_ratio=lin.min_ratio if lin is not None else None,
        restarted=restarted,
    )


def rounding_floor(ab: np.ndarray, u: np.ndarray) -> float:
    """Size of the residual noise from evaluating the stencils in floating point:
    a small multiple of ``eps * max_i sum_j |J_ij u_j|``."""
    au = np.abs(u)
    row = np.abs(ab[1]) * au
    row[:-1] += np.abs(ab[0, 1:]) * au[1:]
    row[1:] += np.abs(ab[2, :-1]) * au[:-1]
    return 16.0 * np.finfo(float).eps * float(np.max(row))


def _newton(spec, grid, u, tol, max_iter, tol_cone, bound, log):
    st = _node_state(spec, grid, u)
    F = _residual_from_state(spec, grid, u, st)
    norm = float(np.max(np.abs(F)))
    lin = None
    for it in range(max_iter + 1):
        lin = _linearize_state(spec, grid, u, st, bound)
        tol_eff = max(tol, rounding_floor(lin.ab, u))
        if lin.min_ratio < bound - 1e-8 or lin.min_gradient < 0:
            raise RuntimeError(
                f"ellipticity diagnostic {lin.min_ratio:.6g} below the analytic bound {bound:.6g}"
            )
        log.append({"iter": it, "residual": norm, "min_slack": float(np.min(st.slack)), "ellipticity": lin.min_ratio})
        if norm <= tol_eff:
            return u, F, st, it, lin, None
        if it == max_iter:
            break
        step = solve_banded((1, 1), lin.ab, -F)
        alpha = 1.0
        while alpha >= MIN_STEP:
            trial = u + alpha * step
            st_t = _node_state(spec, grid, trial)
            if np.all(st_t.slack >= tol_cone):
                F_t = _residual_from_state(spec, grid, trial, st_t)
                norm_t = float(np.max(np.abs(F_t)))
                if norm_t < norm or norm_t <= tol_eff:
                    break
            alpha *= 0.5
        else:
            return u, F, st, it, lin, "line search stalled"
        u, st, F, norm = trial, st_t, F_t, norm_t
    return u, F, st, max_iter, lin, f"no convergence in {max_iter} iterations"


def newton_solve(spec: ProblemSpec, grid: Grid1D, u0=None, tol: float = TOL_RESIDUAL, max_iter: int = MAX_ITER, tol_cone: float = TOL_CONE) -> SolveRecord:
    """Damped Newton iteration keeping every iterate admissible.

    A step is halved until the sup-norm residual decreases and all nodes keep
    cone slack ``>= tol_cone``. On a stall the iteration restarts once from
    the average of the current iterate and the initializer.
    """
    if grid.bg != spec.bg:
        raise DomainError("grid and problem use different backgrounds")
    init = initial_guess(spec, grid) if u0 is None else _check_u(grid, u0).copy()
    init[grid.boundary_index] = _boundary_data(spec, grid)
    st0 = _node_state(spec, grid, init)
    if not np.all(st0.slack >= tol_cone):
        j = int(np.argmin(st0.slack))
        raise DomainError(f"initial guess is not admissible at node {int(st0.idx[j])} (slack {st0.slack[j]:.3e})")
    bound = validate_problem(spec)["ellipticity_bound"]
    log: list = []
    u, F, st, iters, lin, failure = _newton(spec, grid, init, tol, max_iter, tol_cone, bound, log)
    restarted = False
    if failure is not None:
        restarted = True
        fallback = initial_guess(spec, grid) if u0 is None else init
        blend = 0.5 * (u + fallback)
        st_b = _node_state(spec, grid, blend)
        if np.all(st_b.slack >= tol_cone):
            u, F, st, more, lin, failure = _newton(spec, grid, blend, tol, max_iter, tol_cone, bound, log)
            iters += more
    if failure is not None:
        raise NonConvergenceError(
            f"Newton iteration failed: {failure}; residual {float(np.max(np.abs(F))):.3e}",
            {"iterations": iters, "residual_norm": float(np.max(np.abs(F))), "min_cone_slack": float(np.min(st.slack)), "log": log},
        )
    return _record(spec, grid, u, F, st, iters, lin, restarted)


# ----------------------------------------------------------- continuation


@dataclass
class ContinuationResult:
    records: list
    k_list: list
    u_inf: np.ndarray | None
    changes: list
    monotone: bool
    max_monotonicity_violation: float
    below_supersolution: bool | None
    max_supersolution_violation: float
    supersolution: np.ndarray | None
    failure_index: int | None = None
    failure_message: str | None = None

    @property
    def contraction(self) -> list:
        c = self.changes
        return [c[i + 1] / c[i] for i in range(len(c) - 1) if c[i] > 0]

    def limit_record(self) -> SolveRecord | None:
        """The extrapolated ``u_infinity`` at interior nodes as a record."""
        if self.u_inf is None:
            return None
        last = self.records[-1]
        return SolveRecord(self.u_inf, last.r, last.d, math.inf, 0, math.nan, True, math.nan)

    def to_json(self) -> dict:
        return {
            "k_list": [float(k) for k in self.k_list],
            "records": [r.to_json() for r in self.records],
            "interior_changes": self.changes,
            "monotone": self.monotone,
            "max_monotonicity_violation": self.max_monotonicity_violation,
            "below_supersolution": self.below_supersolution,
            "max_supersolution_violation": self.max_supersolution_violation,
            "failure_index": self.failure_index,
            "failure_message": self.failure_message,
        }


def supersolution(spec: ProblemSpec, grid: Grid1D) -> np.ndarray | None:
    """Complete constant-``inf psi`` solution on the ball; ``+inf`` on the boundary.

    Two-sided domains have no closed-form complete supersolution; None.
    """
    if grid.bg.two_sided:
        return None
    psi_inf = float(np.min(spec.psi_at(grid.nodes)))
    out = np.full(grid.nodes.size, math.inf)
    inner = grid.nodes < grid.bg.outer
    out[inner] = exact_profile(spec, grid.nodes[inner], grid.bg.outer, psi_inf)
    return out


def _extrapolate(records: list) -> np.ndarray:
    """Quadratic polynomial in ``1/k`` through the last three records, at ``1/k = 0``."""
    use = records[-3:] if len(records) >= 3 else records[-2:]
    t = np.array([1.0 / r.k for r in use])
    U = np.stack([r.u for r in use])
    weights = np.empty(len(t))
    for i in range(len(t)):
        others = np.delete(t, i)
        weights[i] = np.prod(-others / (t[i] - others))
    out = weights @ U
    out[np.isclose(records[-1].d, 0.0)] = math.inf
    return out


def continuation(template: ProblemSpec, grid: Grid1D, k_list, u0=None, tol: float = TOL_RESIDUAL) -> ContinuationResult:
    """Solve with boundary data ``log k`` for ascending ``k`` using warm starts.

    Checks ``u_k <= u_{k'} + 1e-8`` for consecutive solves and the bound by
    the constant-curvature supersolution, extrapolates ``u_infinity`` in
    ``1/k`` and reports the interior sup-norm change between solves.
    A failing solve ends the run; completed records are kept.
    """
    k_list = [float(k) for k in k_list]
    if not k_list or k_list[0] < 1 or any(b <= a for a, b in zip(k_list, k_list[1:])):
        raise DomainError("k_list must be strictly ascending with k_0 >= 1")
    sup = supersolution(template, grid)
    # the convergence indicator lives on a fixed compact subset of the domain
    interior = np.flatnonzero(grid.d >= INTERIOR_FRACTION * (grid.bg.outer - grid.bg.inner))
    unknowns = grid.unknowns
    records: list = []
    changes: list = []
    mono_violation = 0.0
    sup_violation = 0.0
    prev_init = None
    failure_index = failure_message = None
    for i, k in enumerate(k_list):
        spec = template.with_boundary(math.log(k))
        init = initial_guess(spec, grid)
        if u0 is not None and i == 0:
            start = np.asarray(u0, dtype=float).copy()
        elif records:
            start = records[-1].u + (init - prev_init)
            start[grid.boundary_index] = math.log(k)
            if not np.all(_node_state(spec, grid, start).slack >= TOL_CONE):
                start = init
        else:
            start = init
        try:
            rec = newton_solve(spec, grid, start, tol=tol)
        except (NonConvergenceError, DomainError) as exc:
            failure_index, failure_message = i, str(exc)
            break
        rec.k = k
        if records:
            diff = records[-1].u - rec.u
            mono_violation = max(mono_violation, float(np.max(diff)))
            changes.append(float(np.max(np.abs(diff[interior]))))
        if sup is not None:
            sup_violation = max(sup_violation, float(np.max(rec.u[unknowns] - sup[unknowns])))
        records.append(rec)
        prev_init = init

    u_inf = _extrapolate(records) if len(records) >= 2 else None
    return ContinuationResult(
        records=records,
        k_list=k_list,
        u_inf=u_inf,
        changes=changes,
        monotone=mono_violation <= 1e-8,
        max_monotonicity_violation=mono_violation,
        below_supersolution=None if sup is None else sup_violation <= 1e-8,
        max_supersolution_violation=sup_violation,
        supersolution=sup,
        failure_index=failure_index,
        failure_message=failure_message,
    )


# ------------------------------------------------------------- asymptotics


def asymptotic_target(n: int, mode: Mode, psi_boundary: float = 1.0) -> float:
    """Limit of ``u + log d``: ``1/2 log((n-1)(n-2)/(2 psi))`` or ``1/2 log((n tau + 2 - 2n)/(2 psi))``."""
    return 0.5 * math.log(target_constant(n, mode, psi_boundary))


@dataclass
class FitReport:
    intercept: float
    slope: float
    rms_residual: float
    nodes_used: int
    d_range: tuple

    def to_json(self) -> dict:
        return {
            "intercept": self.intercept,
            "slope": self.slope,
            "rms_residual": self.rms_residual,
            "nodes_used": self.nodes_used,
            "d_min": self.d_range[0],
            "d_max": self.d_range[1],
        }


def asymptotic_extract(record: SolveRecord, bg: Background | None = None, fraction: float = 0.2) -> tuple[float, FitReport]:
    """Least-squares fit ``u + log d = a + b d`` on the interior nodes nearest
    the blow-up boundary; returns ``a``."""
    d = record.d if bg is None else bg.distance(record.r)
    ok = (d > 0) & np.isfinite(record.u)
    idx = np.flatnonzero(ok)
    count = int(math.floor(fraction * idx.size))
    if count < 8:
        raise DomainError(f"only {count} near-boundary nodes available; the fit needs at least 8")
    near = idx[np.argsort(d[idx], kind="stable")[:count]]
    x = d[near]
    y = record.u[near] + np.log(x)
    M = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    fit = M @ coef
    rep = FitReport(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean((fit - y) ** 2))), int(count), (float(x.min()), float(x.max())))
    record.asymptotic_estimate = rep.intercept
    return rep.intercept, rep


# --------------------------------------------------------------- uniqueness


def band_width(psi_boundary_values) -> float:
    """Half the oscillation of ``log psi`` over the boundary."""
    lp = np.log(np.asarray(psi_boundary_values, dtype=float))
    return 0.5 * float(lp.max() - lp.min())


def uniqueness_band(lower, other, psi_boundary_values, tol: float = 1e-7, spec_lower: ProblemSpec | None = None, spec_other: ProblemSpec | None = None, mask=None) -> bool:
    """``lower <= other <= lower + width`` nodewise (finite nodes only), where
    ``width`` is half the boundary oscillation of ``log psi``.

    ``mask`` restricts the comparison to selected nodes, e.g. a compact
    interior where extrapolated limits are reliable.
    """
    if spec_lower is not None and spec_other is not None and not spec_lower.same_problem(spec_other):
        raise DomainError("uniqueness comparison needs the same background, family and mode")
    a = lower.u if isinstance(lower, SolveRecord) else np.asarray(lower, dtype=float)
    b = other.u if isinstance(other, SolveRecord) else np.asarray(other, dtype=float)
    if a.shape != b.shape:
        raise DomainError("solutions live on different grids")
    ok = np.isfinite(a) & np.isfinite(b)
    if mask is not None:
        ok &= np.asarray(mask, dtype=bool)
    width = band_width(psi_boundary_values)
    diff = b[ok] - a[ok]
    return bool(np.all(diff >= -tol) and np.all(diff <= width + tol))
