"""Background geometries, the Einstein and modified Schouten tensors and their
conformal transformation laws.

Tensors are stored as symmetric matrices in an orthonormal frame of the
background metric ``g``; for radial quantities the first frame vector is the
radial direction. With that convention eigenvalues with respect to ``g`` are
ordinary matrix eigenvalues, and eigenvalues with respect to
``e^{2u} g`` carry an explicit factor ``e^{-2u}``.

All four supported backgrounds are conformally flat in the coordinates used
here: ``g = e^{2w(r)} |dx|^2`` with ``w = 0`` (Euclidean),
``w = log(2 / (sqrt(c) (1 - r^2)))`` (Poincare ball of curvature ``-c``) or
``w = log(2 / (sqrt(c) (1 + r^2)))`` (stereographic sphere of curvature
``+c``). The solver exploits this by working with ``v = u + w`` on flat space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "Background",
    "Mode",
    "CurvatureTensor",
    "ConformalFactorSample",
    "background_curvature",
    "einstein_tensor",
    "schouten_tau",
    "conformal_einstein",
    "conformal_schouten_tau",
    "eigenvalues_wrt",
    "radial_sample",
    "sample_from_function",
    "radial_coefficients",
    "radial_reduction",
    "radial_pair",
    "target_constant",
    "hyperbolic_profile",
    "U_of_profile",
    "U_tau_of_profile",
    "sectional_check_3d",
]

KINDS = ("euclidean_ball", "euclidean_annulus", "hyperbolic_ball", "round_sphere_band")


@dataclass(frozen=True)
class Background:
    """A radially symmetric domain ``inner <= |x| <= outer`` with a
    constant-curvature metric.

    ``curvature_scale`` is the magnitude ``c`` of the sectional curvature for
    the curved kinds (ignored for Euclidean ones). A zero ``inner`` means a
    ball whose only boundary is ``|x| = outer``; otherwise both spheres bound
    the domain and the solution blows up on each.
    """

    kind: str
    n: int
    inner: float = 0.0
    outer: float = 1.0
    curvature_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown background kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 3:
            raise DomainError(f"dimension n={self.n} < 3: conformal formulas carry 1/(n-2)")
        if not 0 <= self.inner < self.outer:
            raise DomainError(f"need 0 <= inner < outer, got inner={self.inner}, outer={self.outer}")
        if self.kind == "euclidean_ball" and self.inner != 0:
            raise DomainError("euclidean_ball has inner radius 0; use euclidean_annulus")
        if self.kind == "euclidean_annulus" and self.inner == 0:
            raise DomainError("euclidean_annulus needs inner > 0")
        if self.kind == "hyperbolic_ball" and (self.inner != 0 or self.outer >= 1):
            raise DomainError("hyperbolic_ball lives in the unit Poincare ball: inner = 0, outer < 1")
        if self.curvature_scale <= 0:
            raise DomainError("curvature_scale must be positive")

    @property
    def sectional_curvature(self) -> float:
        if self.kind == "hyperbolic_ball":
            return -self.curvature_scale
        if self.kind == "round_sphere_band":
            return self.curvature_scale
        return 0.0

    @property
    def two_sided(self) -> bool:
        return self.inner > 0

    def contains(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        lo = r > self.inner if self.two_sided else r >= 0
        return lo & (r < self.outer)

    def w(self, r):
        """Log conformal factor of ``g`` against the flat metric, with two derivatives."""
        r = np.asarray(r, dtype=float)
        c = self.curvature_scale
        if self.kind == "hyperbolic_ball":
            s = 1.0 - r * r
            return np.log(2.0 / (math.sqrt(c) * s)), 2 * r / s, 2 * (1 + r * r) / s**2
        if self.kind == "round_sphere_band":
            s = 1.0 + r * r
            return np.log(2.0 / (math.sqrt(c) * s)), -2 * r / s, -2 * (1 - r * r) / s**2
        z = np.zeros_like(r)
        return z, z, z

    def radial_distance(self, a, b):
        """``g``-length of the radial segment between coordinate radii ``a <= b``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        c = self.curvature_scale
        if self.kind == "hyperbolic_ball":
            return (np.log1p(b) - np.log1p(-b) - np.log1p(a) + np.log1p(-a)) / math.sqrt(c)
        if self.kind == "round_sphere_band":
            return 2.0 * (np.arctan(b) - np.arctan(a)) / math.sqrt(c)
        return b - a

    def distance(self, r):
        """``g``-distance to the boundary where the solution blows up."""
        r = np.asarray(r, dtype=float)
        d = self.radial_distance(r, self.outer)
        if self.two_sided:
            d = np.minimum(d, self.radial_distance(self.inner, r))
        return d


@dataclass(frozen=True)
class Mode:
    """Which conformal curvature tensor the equation prescribes.

    ``einstein`` uses ``G/(n-2)``; ``schouten`` uses ``S^tau``. The two agree
    at ``tau = n - 1``.
    """

    kind: str = "einstein"
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in ("einstein", "schouten"):
            raise DomainError(f"unknown mode {self.kind!r}")
        if self.kind == "schouten" and self.tau is None:
            raise DomainError("mode schouten needs tau")
        if self.kind == "einstein" and self.tau is not None:
            raise DomainError("mode einstein takes no tau")

    @classmethod
    def einstein(cls) -> "Mode":
        return cls("einstein")

    @classmethod
    def schouten(cls, tau: float) -> "Mode":
        return cls("schouten", float(tau))

    def tau_for(self, n: int) -> float:
        return float(n - 1) if self.kind == "einstein" else float(self.tau)

    @property
    def label(self) -> str:
        return "einstein" if self.kind == "einstein" else f"schouten(tau={self.tau:g})"


@dataclass(frozen=True)
class CurvatureTensor:
    components: np.ndarray
    point: tuple = ()
    meta: str = ""
    tau: float | None = None

    def __post_init__(self):
        m = np.asarray(self.components, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("curvature tensor must be a square matrix")
        object.__setattr__(self, "components", m)

    @property
    def n(self) -> int:
        return self.components.shape[0]

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.components - self.components.T)))


@dataclass(frozen=True)
class ConformalFactorSample:
    """Value, gradient and Hessian of ``u`` at one point, in a ``g``-orthonormal frame."""

    u: float
    grad: np.ndarray
    hess: np.ndarray
    laplacian: float | None = field(default=None)

    def __post_init__(self):
        grad = np.asarray(self.grad, dtype=float)
        hess = np.asarray(self.hess, dtype=float)
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "hess", hess)
        tr = float(np.trace(hess))
        if self.laplacian is None:
            object.__setattr__(self, "laplacian", tr)
        elif abs(self.laplacian - tr) > 1e-12 * max(1.0, abs(tr)):
            raise DomainError(f"laplacian {self.laplacian} differs from trace of hessian {tr}")

    @property
    def n(self) -> int:
        return self.grad.shape[0]


def _eye(g, n: int) -> np.ndarray:
    return np.eye(n) if g is None else np.asarray(g, dtype=float)


def background_curvature(bg: Background, point=None) -> tuple[CurvatureTensor, float]:
    """Ricci tensor and scalar curvature at ``point`` (a radius or coordinate vector)."""
    if point is not None:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        r = float(p[0]) if p.size == 1 else float(np.linalg.norm(p))
        if p.size not in (1, bg.n) or not bool(bg.contains(r)):
            raise DomainError(f"point {p.tolist()} outside the {bg.kind} domain")
    K = bg.sectional_curvature
    n = bg.n
    ric = CurvatureTensor(K * (n - 1) * np.eye(n), meta="Ric")
    return ric, K * n * (n - 1)


def einstein_tensor(Ric: CurvatureTensor, R: float, g=None) -> CurvatureTensor:
    g = _eye(g, Ric.n)
    return CurvatureTensor(Ric.components - 0.5 * R * g, Ric.point, "G")


def schouten_tau(Ric: CurvatureTensor, R: float, g=None, tau: float = 1.0) -> CurvatureTensor:
    n = Ric.n
    if n < 3:
        raise DomainError("n >= 3 required")
    g = _eye(g, n)
    comp = (Ric.components - tau * R / (2.0 * (n - 1)) * g) / (n - 2)
    return CurvatureTensor(comp, Ric.point, "S_tau", tau)


def conformal_schouten_tau(Sg: CurvatureTensor, cf: ConformalFactorSample, g=None, tau: float | None = None) -> CurvatureTensor:
    """``S^tau`` of ``e^{2u} g`` written in the ``g``-frame:
    ``S^tau_g + (tau-1)/(n-2) Lap u g - Hess u + (tau-2)/2 |du|^2 g + du (x) du``.
    """
    n = Sg.n
    if n < 3:
        raise DomainError("n >= 3 required")
    tau = Sg.tau if tau is None else tau
    if tau is None:
        raise DomainError("tau is required")
    g = _eye(g, n)
    du = cf.grad
    comp = (
        Sg.components
        + (tau - 1.0) / (n - 2) * cf.laplacian * g
        - cf.hess
        + 0.5 * (tau - 2.0) * float(du @ du) * g
        + np.outer(du, du)
    )
    return CurvatureTensor(comp, Sg.point, "S_tau[u]", tau)


def conformal_einstein(Ggp: CurvatureTensor, cf: ConformalFactorSample, g=None) -> CurvatureTensor:
    """``G/(n-2)`` of ``e^{2u} g`` in the ``g``-frame:
    ``G_g/(n-2) + Lap u g - Hess u + (n-3)/2 |du|^2 g + du (x) du``.

    Signs follow the convention under which the scaled Poincare factor on the
    flat ball has ``lambda(G) = 1`` with respect to the new metric.
    """
    n = Ggp.n
    if n < 3:
        raise DomainError("n >= 3 required")
    base = CurvatureTensor(Ggp.components / (n - 2), Ggp.point, "G/(n-2)", float(n - 1))
    out = conformal_schouten_tau(base, cf, g, float(n - 1))
    return CurvatureTensor(out.components, Ggp.point, "G[u]/(n-2)")


def eigenvalues_wrt(T: CurvatureTensor, u: float = 0.0) -> np.ndarray:
    """Ascending eigenvalues of ``T`` with respect to ``e^{2u} g``."""
    if T.asymmetry() > 1e-10:
        raise DomainError(f"tensor {T.meta!r} is not symmetric (defect {T.asymmetry():.2e})")
    sym = 0.5 * (T.components + T.components.T)
    return np.linalg.eigvalsh(sym) * math.exp(-2.0 * u)


def radial_sample(u: float, up: float, upp: float, r: float, n: int) -> ConformalFactorSample:
    """Sample of a radial ``u`` on flat space, frame ``(r_hat, tangential...)``."""
    if r <= 0:
        raise DomainError("radius must be positive")
    grad = np.zeros(n)
    grad[0] = up
    hess = np.diag([upp] + [up / r] * (n - 1))
    return ConformalFactorSample(u, grad, hess)


def sample_from_function(func, x, h: float | None = None) -> ConformalFactorSample:
    """Central finite-difference sample of ``func`` at ``x`` in Cartesian coordinates."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if h is None:
        h = np.finfo(float).eps ** (1.0 / 3.0) * max(1.0, float(np.max(np.abs(x))))
    eye = np.eye(n)
    f0 = func(x)
    grad = np.array([(func(x + h * eye[i]) - func(x - h * eye[i])) / (2 * h) for i in range(n)])
    hess = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            if i == j:
                v = (func(x + h * eye[i]) - 2 * f0 + func(x - h * eye[i])) / h**2
            else:
                v = (
                    func(x + h * eye[i] + h * eye[j])
                    - func(x + h * eye[i] - h * eye[j])
                    - func(x - h * eye[i] + h * eye[j])
                    + func(x - h * eye[i] - h * eye[j])
                ) / (4 * h * h)
            hess[i, j] = hess[j, i] = v
    return ConformalFactorSample(float(f0), grad, hess)


def radial_coefficients(n: int, mode: Mode) -> tuple[float, float]:
    """``(A, B) = ((tau-1)/(n-2), (tau-2)/2)``: the Laplacian and gradient weights."""
    tau = mode.tau_for(n)
    return (tau - 1.0) / (n - 2), 0.5 * (tau - 2.0)


def radial_pair(up, upp, up_over_r, n: int, mode: Mode):
    """Radial and tangential eigenvalues for arrays of ``u'``, ``u''`` and ``u'/r``.

    radial     = (A-1) u'' + A (n-1) u'/r + (B+1) u'^2
    tangential = A u''     + (A (n-1) - 1) u'/r + B u'^2   (multiplicity n-1)
    """
    A, B = radial_coefficients(n, mode)
    up = np.asarray(up, dtype=float)
    lam_r = (A - 1.0) * upp + A * (n - 1) * up_over_r + (B + 1.0) * up * up
    lam_t = A * upp + (A * (n - 1) - 1.0) * up_over_r + B * up * up
    return lam_r, lam_t


def radial_reduction(up: float, upp: float, r: float, n: int, mode: Mode = Mode()) -> np.ndarray:
    """Ascending eigenvalues (w.r.t. flat ``g``) of the prescribed conformal
    tensor of a radial ``u`` on Euclidean space."""
    if r <= 0:
        raise DomainError("radial_reduction needs r > 0")
    lam_r, lam_t = radial_pair(up, upp, up / r, n, mode)
    return np.sort(np.array([lam_r] + [lam_t] * (n - 1), dtype=float), kind="stable")


def target_constant(n: int, mode: Mode, psi: float = 1.0) -> float:
    """``c`` such that ``c`` times the Poincare metric solves the equation with
    constant right side ``psi``: ``(n-1)(n-2)/(2 psi)`` or ``(n tau + 2 - 2n)/(2 psi)``."""
    tau = mode.tau_for(n)
    num = n * tau + 2.0 - 2.0 * n
    if num <= 0:
        raise DomainError(f"n*tau + 2 - 2n = {num:g} <= 0 violates (6.2)")
    return num / (2.0 * psi)


def hyperbolic_profile(r, R: float, c: float):
    """``u = log(sqrt(c) 2R/(R^2 - r^2))`` with its first two radial derivatives."""
    r = np.asarray(r, dtype=float)
    s = R * R - r * r
    u = 0.5 * math.log(c) + np.log(2.0 * R / s)
    up = 2.0 * r / s
    upp = 2.0 / s + 4.0 * r * r / s**2
    return u, up, upp


def U_tau_of_profile(hp: float, hpp: float, grad_d_sq: float, shape_op: CurvatureTensor, n: int, tau: float, conormal=None) -> CurvatureTensor:
    """Conformal part of ``S^tau`` for ``u = h(d)``.

    With ``A = (tau-1)/(n-2)`` this is
    ``(A h'' + (tau-2)/2 h'^2)|grad d|^2 g + h'(A Lap d g - Hess d) + (h'^2 - h'') dd (x) dd``.
    ``shape_op`` carries ``Hess d``; ``conormal`` is the unit vector along
    ``grad d`` (default the first frame vector).
    """
    A = (tau - 1.0) / (n - 2)
    hess_d = shape_op.components
    nu = np.zeros(n) if conormal is None else np.asarray(conormal, dtype=float)
    if conormal is None:
        nu[0] = 1.0
    g = np.eye(n)
    dd = grad_d_sq * np.outer(nu, nu)
    comp = (A * hpp + 0.5 * (tau - 2.0) * hp * hp) * grad_d_sq * g + hp * (A * np.trace(hess_d) * g - hess_d) + (hp * hp - hpp) * dd
    return CurvatureTensor(comp, meta="U_tau[h]", tau=tau)


def U_of_profile(hp: float, hpp: float, grad_d_sq: float, shape_op: CurvatureTensor, n: int, conormal=None) -> CurvatureTensor:
    """``U[h] = (h'' + (n-3)/2 h'^2)|grad d|^2 g + (h'^2 - h'') dd (x) dd + h'(Lap d g - Hess d)``."""
    out = U_tau_of_profile(hp, hpp, grad_d_sq, shape_op, n, float(n - 1), conormal)
    return CurvatureTensor(out.components, meta="U[h]")


def sectional_check_3d(bg: Background, cf: ConformalFactorSample | None = None, tol: float = 1e-10) -> dict:
    """Compare ``G(nu, nu)`` with ``-K`` for the three coordinate planes (``u = 0``)."""
    if bg.n != 3:
        raise DomainError("sectional check is specific to n = 3")
    if cf is not None and (abs(cf.u) > 0 or np.any(cf.grad) or np.any(cf.hess)):
        raise DomainError("sectional check needs u = 0 on a constant-curvature background")
    ric, R = background_curvature(bg)
    G = einstein_tensor(ric, R).components
    K = bg.sectional_curvature
    planes = []
    for i in range(3):
        nu = np.eye(3)[i]
        lhs = float(nu @ G @ nu)
        planes.append({"normal": i, "G_nn": lhs, "minus_K": -K, "passed": abs(lhs + K) <= tol})
    return {"background": bg.kind, "planes": planes, "passed": all(p["passed"] for p in planes)}
