"""Radial barrier profiles in the boundary distance ``d`` and numerical checks
of the differential inequalities that make them sub- or supersolutions.

Checks run on a model collar: a constant ``|grad d|^2``, a constant Hessian of
``d`` and a constant background tensor. The flat half-space is the model
with ``|grad d| = 1`` and vanishing Hessian and background.

Slacks are reported relative to the natural scale of each inequality
(``h'^2`` or the right-hand side), since the profiles blow up like
``1/d^2`` at the boundary and absolute tolerances would be meaningless there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .geom import CurvatureTensor, U_of_profile, U_tau_of_profile
from .symfun import OperatorFamily

__all__ = [
    "BarrierProfile",
    "CollarGeometry",
    "BarrierReport",
    "collar_grid",
    "eval_profile",
    "subsolution_offset",
    "verify_lower_barrier",
    "lower_barrier_threshold",
    "subsolution_conditions",
    "subsolution_delta_threshold",
    "verify_subsolution",
    "upper_barrier_check",
    "upper_barrier_threshold",
]

KINDS = ("lower_hk", "upper_hbar", "subsolution_keps", "subsolution_keps_tau")
TOL = 1e-10


@dataclass(frozen=True)
class BarrierProfile:
    """Parameters of one barrier profile.

    ``k`` may be ``math.inf`` for the subsolution kinds, giving the limit
    profile ``log(1/d) + C + 1/(d + delta) - 1/delta``.
    """

    kind: str
    n: int
    delta: float
    k: float = 1.0
    eps: float = 0.1
    tau: float | None = None
    psi_sup: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 3:
            raise DomainError("n >= 3 required")
        if not self.delta > 0:
            raise DomainError(f"delta = {self.delta} must be positive")
        if self.kind == "lower_hk" and not self.k > 0:
            raise DomainError("h_k needs k > 0")
        if self.kind.startswith("subsolution"):
            if not 0 < self.eps < 1:
                raise DomainError(f"eps = {self.eps} must lie in (0, 1)")
            if not self.psi_sup > 0:
                raise DomainError("psi_sup must be positive")
            if self.k * self.delta < 1.0 - 1e-12:
                raise DomainError(f"k = {self.k:g} < 1/delta = {1 / self.delta:g}: the condition k >= 1/delta fails")
        if self.kind == "subsolution_keps_tau":
            if self.tau is None:
                raise DomainError("subsolution_keps_tau needs tau")
            if self.structure_constant <= 0:
                raise DomainError(
                    f"n*tau + 2 - 2n = {self.structure_constant:g} <= 0 violates (6.2)"
                )
            if self.tau < 2:
                raise DomainError(f"tau = {self.tau:g} < 2: the subsolution chain needs tau >= 2")

    @property
    def effective_tau(self) -> float:
        return float(self.n - 1) if self.tau is None else float(self.tau)

    @property
    def structure_constant(self) -> float:
        """``(n-1)(n-2)`` for the Einstein profile, ``n tau + 2 - 2n`` for the tau one."""
        if self.kind == "subsolution_keps_tau":
            return self.n * self.tau + 2.0 - 2.0 * self.n
        return float((self.n - 1) * (self.n - 2))

    @property
    def offset_constant(self) -> float:
        """``1/2 log((1 - eps)^2 c / (2 (psi_sup + eps)))``, the limit of ``h + log d``."""
        return 0.5 * math.log((1.0 - self.eps) ** 2 * self.structure_constant / (2.0 * (self.psi_sup + self.eps)))

    def domain_ok(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.kind.startswith("subsolution"):
            return (d >= 0) & (d < self.delta)
        return (d >= 0) & (d <= self.delta)

    def params(self) -> dict:
        out = {"n": self.n, "delta": self.delta}
        if self.kind != "upper_hbar":
            out["k"] = self.k if math.isfinite(self.k) else "inf"
        if self.kind.startswith("subsolution"):
            out["eps"] = self.eps
            out["psi_sup"] = self.psi_sup
        if self.tau is not None:
            out["tau"] = self.tau
        return out


def eval_profile(p: BarrierProfile, d):
    """``(h, h', h'')`` at ``d`` (scalar or array)."""
    d = np.asarray(d, dtype=float)
    if not np.all(p.domain_ok(d)):
        raise DomainError(f"d outside the {p.kind} domain for delta = {p.delta}")
    if p.kind == "lower_hk":
        s = p.k * d + p.delta**2
        return np.log(p.k * p.delta**2 / s), -p.k / s, (p.k / s) ** 2
    if p.kind == "upper_hbar":
        s = p.delta**2 + d
        m = p.n - 2
        return np.log1p(d / p.delta**2) / m, 1.0 / (m * s), -1.0 / (m * s * s)
    e = d + p.delta
    if math.isinf(p.k):
        with np.errstate(divide="ignore"):
            base, a = -np.log(d), 1.0 / d
    else:
        base, a = np.log(p.k / (p.k * d + 1.0)), p.k / (p.k * d + 1.0)
    h = base + p.offset_constant + 1.0 / e - 1.0 / p.delta
    return h, -a - 1.0 / e**2, a * a + 2.0 / e**3


def subsolution_offset(p: BarrierProfile, d):
    """``h(d) + log d``; tends to :attr:`BarrierProfile.offset_constant` as ``d -> 0``."""
    h, _, _ = eval_profile(p, d)
    return h + np.log(d)


def collar_grid(delta: float, count: int = 200, ratio: float = 0.95, include_delta: bool = True) -> np.ndarray:
    """Geometric grid ``delta * ratio**j`` clustered toward ``d = 0``, ascending."""
    j = np.arange(count) if include_delta else np.arange(1, count + 1)
    return np.sort(delta * ratio**j)


@dataclass(frozen=True)
class CollarGeometry:
    """Model boundary collar: ``|grad d|^2``, ``Hess d`` in a frame whose first
    vector is the unit conormal, and the background conformal tensor
    (``G/(n-2)`` or ``S^tau`` of the background metric)."""

    n: int
    grad_d_sq: float = 1.0
    hess_d: np.ndarray | None = None
    background: np.ndarray | None = None

    def __post_init__(self):
        z = np.zeros((self.n, self.n))
        object.__setattr__(self, "hess_d", z if self.hess_d is None else np.asarray(self.hess_d, dtype=float))
        object.__setattr__(self, "background", z if self.background is None else np.asarray(self.background, dtype=float))

    @classmethod
    def flat(cls, n: int) -> "CollarGeometry":
        """The half-space ``{x_1 > 0}`` with ``d = x_1``."""
        return cls(n)

    @classmethod
    def with_shape_norm(cls, n: int, norm: float) -> "CollarGeometry":
        """Collar of a concave boundary (outside of a sphere), the adverse sign
        for lower barriers: ``Hess d = a (g - nu nu)`` with ``a = norm/(n-1)``,
        so ``Lap d g - Hess d`` has top eigenvalue ``norm`` and ``Lap d = norm``."""
        a = norm / (n - 1)
        hess = a * np.eye(n)
        hess[0, 0] = 0.0
        return cls(n, 1.0, hess)

    @property
    def laplacian_d(self) -> float:
        return float(np.trace(self.hess_d))

    def shape_tensor(self, tau: float | None = None) -> np.ndarray:
        """``A Lap d g - Hess d`` with ``A = (tau-1)/(n-2)`` (``A = 1`` by default)."""
        A = 1.0 if tau is None else (tau - 1.0) / (self.n - 2)
        return A * self.laplacian_d * np.eye(self.n) - self.hess_d

    def shape_max(self, tau: float | None = None) -> float:
        return float(np.linalg.eigvalsh(self.shape_tensor(tau))[-1])


@dataclass
class BarrierReport:
    profile: str
    params: dict
    grid_size: int
    passed: bool
    min_slack: float
    worst_d: float
    delta_threshold: float | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "profile": self.profile,
            "params": self.params,
            "grid_size": self.grid_size,
            "pass": self.passed,
            "min_slack": self.min_slack,
            "worst_d": self.worst_d,
            "delta_threshold": self.delta_threshold,
        }


def _bisect_threshold(passes, hi: float = 1.0, lo: float = 1e-8, iters: int = 60) -> float:
    """Largest delta in [lo, hi] with ``passes(delta)``, assuming a single switch."""
    if passes(hi):
        return hi
    if not passes(lo):
        return 0.0
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------- lower h_k


def _lower_slacks(p: BarrierProfile, geo: CollarGeometry, grid: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of ``U[h_k] - (n-1) h_k'^2 / 8 g``, divided by ``h_k'^2``."""
    n = p.n
    _, hp, hpp = eval_profile(p, grid)
    shape = CurvatureTensor(geo.hess_d)
    out = np.empty(grid.size)
    for j in range(grid.size):
        U = U_of_profile(hp[j], hpp[j], geo.grad_d_sq, shape, n).components
        lhs = U - (n - 1) * hp[j] ** 2 / 8.0 * np.eye(n)
        out[j] = np.linalg.eigvalsh(lhs)[0] / hp[j] ** 2
    return out


def lower_barrier_threshold(k: float, n: int, geo: CollarGeometry, count: int = 200) -> float:
    def passes(delta: float) -> bool:
        q = BarrierProfile("lower_hk", n, delta, k)
        return bool(np.min(_lower_slacks(q, geo, collar_grid(delta, count))) >= -TOL)

    return _bisect_threshold(passes)


def verify_lower_barrier(p: BarrierProfile, geo: CollarGeometry, grid=None, find_threshold: bool = True) -> BarrierReport:
    """Check ``U[h_k] >= (n-1) k^2 / (8 (k d + delta^2)^2) g`` on the collar."""
    if p.kind != "lower_hk":
        raise DomainError("verify_lower_barrier needs a lower_hk profile")
    if geo.n != p.n:
        raise DomainError("geometry and profile dimensions differ")
    if geo.grad_d_sq < 0.5:
        raise DomainError(f"|grad d|^2 = {geo.grad_d_sq} < 1/2: outside the collar where the estimate applies")
    grid = collar_grid(p.delta) if grid is None else np.asarray(grid, dtype=float)
    slack = _lower_slacks(p, geo, grid)
    j = int(np.argmin(slack))
    thr = lower_barrier_threshold(p.k, p.n, geo, grid.size) if find_threshold else None
    return BarrierReport("lower_hk", p.params(), int(grid.size), bool(slack[j] >= -TOL), float(slack[j]), float(grid[j]), thr)


# ---------------------------------------------------------- subsolution


def _psi_sup_on(psi_profile, grid: np.ndarray) -> float:
    if psi_profile is None:
        return -math.inf
    if callable(psi_profile):
        return float(np.max(np.asarray([psi_profile(x) for x in grid], dtype=float)))
    return float(psi_profile)


def subsolution_conditions(p: BarrierProfile, geo: CollarGeometry, psi_profile=None, count: int = 200) -> dict:
    """Relative slacks of the four collar conditions at ``k = 1/delta``.

    (1) ``|grad d|^2 >= 1 - eps``;
    (2) ``2A/(d+delta)^3 |grad d|^2 g - 1/(d+delta)^2 M >= 0``;
    (3) ``eps c_tau a^2 |grad d|^2 g - a M >= 0`` with ``a = k/(kd+1)``;
    (4) ``sup psi over the collar <= psi_sup + eps``;
    where ``M = A Lap d g - Hess d``, ``A = (tau-1)/(n-2)`` and ``c_tau`` is the
    coefficient of ``a^2`` in the curvature bound.
    """
    n, delta, eps = p.n, p.delta, p.eps
    tau = p.effective_tau
    A = (tau - 1.0) / (n - 2)
    c_tau = p.structure_constant / (2.0 * (n - 2))
    grid = collar_grid(delta, count, include_delta=False)
    m = geo.shape_max(tau)
    e = grid + delta
    a = 1.0 / e  # k/(kd+1) at k = 1/delta
    cond2 = (2.0 * A * geo.grad_d_sq / e - m) * e  # scaled by (d+delta)^3 / (d+delta)
    cond3 = eps * c_tau * geo.grad_d_sq * a - m
    cond3 = cond3 / a
    psi_max = _psi_sup_on(psi_profile, grid)
    return {
        "1": geo.grad_d_sq - (1.0 - eps),
        "2": float(np.min(cond2)),
        "3": float(np.min(cond3)),
        "4": (p.psi_sup + eps - psi_max) if psi_profile is not None else math.inf,
    }


def subsolution_delta_threshold(p: BarrierProfile, geo: CollarGeometry, psi_profile=None, hi: float = 0.5) -> float:
    """Largest ``delta <= hi`` satisfying all four collar conditions, by bisection."""

    def passes(delta: float) -> bool:
        q = BarrierProfile(p.kind, p.n, delta, max(p.k, 1.0 / delta), p.eps, p.tau, p.psi_sup)
        return all(v >= 0 for v in subsolution_conditions(q, geo, psi_profile).values())

    return _bisect_threshold(passes, hi=hi)


def verify_subsolution(p: BarrierProfile, fam: OperatorFamily, psi_profile, geo: CollarGeometry, grid=None) -> BarrierReport:
    """Verify the subsolution inequality chain on the collar.

    At each grid point the conformal tensor of ``h`` is assembled, checked to
    lie in the cone, and ``f(lambda) >= psi/(n-2) e^{2h}`` is tested together
    with the intermediate derivative inequalities. ``psi_profile`` is a
    constant or a callable of ``d``.
    """
    if not p.kind.startswith("subsolution"):
        raise DomainError("verify_subsolution needs a subsolution profile")
    if fam.n != p.n or geo.n != p.n:
        raise DomainError("family, geometry and profile dimensions differ")
    delta_eps = subsolution_delta_threshold(p, geo, psi_profile)
    if not p.delta < delta_eps or delta_eps == 0:
        raise DomainError(f"delta = {p.delta:g} is not below the collar threshold delta_eps = {delta_eps:.6g}")
    n = p.n
    grid = collar_grid(p.delta, include_delta=False) if grid is None else np.asarray(grid, dtype=float)
    if not np.all(p.domain_ok(grid)):
        raise DomainError("grid leaves the collar [0, delta)")
    tau = p.effective_tau
    A = (tau - 1.0) / (n - 2)
    B = 0.5 * (tau - 2.0)
    h, hp, hpp = eval_profile(p, grid)
    e = grid + p.delta
    a = np.full(grid.shape, 1.0) / grid if math.isinf(p.k) else p.k / (p.k * grid + 1.0)
    psi = np.array([psi_profile(x) for x in grid]) if callable(psi_profile) else np.full(grid.shape, float(psi_profile))

    # intermediate inequalities, relative to a^2
    c_tau = p.structure_constant / (2.0 * (n - 2))
    if p.kind == "subsolution_keps":
        lhs = hpp + 0.5 * (n - 3) * hp**2
        rhs = 0.5 * (n - 1) * a**2 + 2.0 / e**3
    else:
        lhs = A * hpp + B * hp**2
        rhs = c_tau * a**2
    second = (lhs - rhs) / a**2
    conormal = (hp**2 - hpp) / a**2

    shape = CurvatureTensor(geo.hess_d)
    cone = fam.cone
    eq = np.empty(grid.size)
    in_cone = np.empty(grid.size, dtype=bool)
    for j in range(grid.size):
        U = U_tau_of_profile(hp[j], hpp[j], geo.grad_d_sq, shape, n, tau).components
        lam = np.linalg.eigvalsh(geo.background + U)
        in_cone[j] = bool(cone.contains(lam))
        target = psi[j] / (n - 2) * math.exp(2.0 * h[j])
        eq[j] = fam.evaluate(lam) / target - 1.0 if in_cone[j] else -math.inf

    slack = np.minimum(np.minimum(second, conormal), eq)
    j = int(np.argmin(slack))
    details = {
        "equation_min": float(np.min(eq)),
        "second_derivative_min": float(np.min(second)),
        "conormal_min": float(np.min(conormal)),
        "all_in_cone": bool(np.all(in_cone)),
        "conditions": subsolution_conditions(p, geo, psi_profile),
    }
    return BarrierReport(p.kind, p.params(), int(grid.size), bool(slack[j] >= -TOL), float(slack[j]), float(grid[j]), delta_eps, details)


# ---------------------------------------------------------------- upper


def _upper_slacks(p: BarrierProfile, geo: CollarGeometry, grid: np.ndarray) -> np.ndarray:
    """``-tr(g[h_bar]) / ((n-1) h_bar'^2)``; nonnegative where the barrier works."""
    n = p.n
    _, hp, hpp = eval_profile(p, grid)
    tr_u = (n - 1) * (hp * geo.laplacian_d + (hpp + 0.5 * (n - 2) * hp**2) * geo.grad_d_sq)
    tr = tr_u + np.trace(geo.background)
    return -tr / ((n - 1) * hp**2)


def upper_barrier_threshold(n: int, geo: CollarGeometry, count: int = 200) -> float:
    def passes(delta: float) -> bool:
        q = BarrierProfile("upper_hbar", n, delta)
        return bool(np.min(_upper_slacks(q, geo, collar_grid(delta, count))) >= -TOL)

    return _bisect_threshold(passes)


def upper_barrier_check(p: BarrierProfile, geo: CollarGeometry, grid=None, find_threshold: bool = True) -> BarrierReport:
    """Check ``tr_g(g[h_bar]) <= 0`` on the collar (``phi = 0``)."""
    if p.kind != "upper_hbar":
        raise DomainError("upper_barrier_check needs an upper_hbar profile")
    if geo.n != p.n:
        raise DomainError("geometry and profile dimensions differ")
    grid = collar_grid(p.delta) if grid is None else np.asarray(grid, dtype=float)
    slack = _upper_slacks(p, geo, grid)
    j = int(np.argmin(slack))
    thr = upper_barrier_threshold(p.n, geo, grid.size) if find_threshold else None
    return BarrierReport("upper_hbar", p.params(), int(grid.size), bool(slack[j] >= -TOL), float(slack[j]), float(grid[j]), thr)
