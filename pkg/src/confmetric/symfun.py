"""Elementary symmetric functions, Garding cones and the normalized operators
built on them, together with the partial uniform ellipticity machinery.

Vectors are plain ``numpy`` arrays; every batched routine works along the
last axis, so an ``(N, n)`` array is a batch of ``N`` eigenvalue vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConeError, DomainError

__all__ = [
    "ConeSpec",
    "TransformedCone",
    "OperatorFamily",
    "EllipticityReport",
    "ascending",
    "elementary_symmetric",
    "elementary_sigma",
    "deleted_symmetric",
    "cone_membership",
    "cone_slack",
    "f_value",
    "f_gradient",
    "kappa_of_cone",
    "vartheta_analytic",
    "best_alpha",
    "vartheta_best",
    "sample_cone",
    "vartheta_empirical",
    "sharpness_sequence",
    "verify_lemma21",
    "q_matrix",
    "rho_forward",
    "rho_transform",
    "transformed_gradient",
    "transformed_ellipticity_bound",
    "structural_selftest",
]


def ascending(lam) -> np.ndarray:
    """Return ``lam`` sorted ascending along the last axis (the ordering
    convention ``lam_1 <= ... <= lam_n``)."""
    return np.sort(np.asarray(lam, dtype=float), axis=-1)


def elementary_symmetric(lam) -> np.ndarray:
    """All elementary symmetric polynomials ``e_0, ..., e_n`` of ``lam``.

    Computed by multiplying out ``prod_i (1 + lam_i x)`` one factor at a
    time, which is exact for small integer inputs and avoids the
    cancellation of Newton's identities.
    """
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    e = np.zeros(lam.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for i in range(n):
        x = lam[..., i, None]
        e[..., 1 : i + 2] = e[..., 1 : i + 2] + x * e[..., 0 : i + 1]
    return e


def elementary_sigma(lam, j: int) -> float:
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    if not 0 <= j <= n:
        raise DomainError(f"sigma index j={j} outside 0..{n}")
    return elementary_symmetric(lam)[..., j]


def deleted_symmetric(lam) -> np.ndarray:
    """``out[..., i, j] = sigma_j(lam | i)``, the elementary symmetric
    polynomials of ``lam`` with entry ``i`` removed (``j = 0..n-1``)."""
    lam = np.asarray(lam, dtype=float)
    n = lam.shape[-1]
    out = np.empty(lam.shape[:-1] + (n, n))
    for i in range(n):
        out[..., i, :] = elementary_symmetric(np.delete(lam, i, axis=-1))
    return out


# ---------------------------------------------------------------- cones


@dataclass(frozen=True)
class ConeSpec:
    """The Garding cone ``Gamma_k = {sigma_j > 0, 1 <= j <= k}`` in R^n."""

    n: int
    k: int
    tol: float = 0.0

    def __post_init__(self):
        if self.n < 1 or not 1 <= self.k <= self.n:
            raise DomainError(f"cone index k={self.k} must satisfy 1 <= k <= n={self.n}")
        if self.tol < 0:
            raise DomainError("cone tolerance must be nonnegative")

    @property
    def label(self) -> str:
        return f"Gamma_{self.k}(n={self.n})"

    def slack(self, lam) -> np.ndarray:
        """min_{j<=k} sigma_j(lam) / C(n, j); positive exactly inside the cone."""
        e = elementary_symmetric(lam)
        binoms = np.array([math.comb(self.n, j) for j in range(1, self.k + 1)], dtype=float)
        return np.min(e[..., 1 : self.k + 1] / binoms, axis=-1)

    def contains(self, lam) -> np.ndarray:
        e = elementary_symmetric(lam)
        return np.all(e[..., 1 : self.k + 1] > self.tol, axis=-1)

    def first_violation(self, lam) -> int | None:
        e = elementary_symmetric(lam)
        for j in range(1, self.k + 1):
            if not e[j] > self.tol:
                return j
        return None


@dataclass(frozen=True)
class TransformedCone:
    """Image of ``base`` under ``mu -> lambda`` with ``mu_i = sum(lambda) - rho * lambda_i``.

    A vector ``lam`` belongs to this cone iff its forward image lies in ``base``.
    """

    base: ConeSpec
    rho: float = 1.0

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def label(self) -> str:
        return f"T_rho={self.rho:g}[{self.base.label}]"

    def contains(self, lam) -> np.ndarray:
        return self.base.contains(rho_forward(lam, self.rho))


def _check_dim(lam: np.ndarray, n: int) -> None:
    if lam.shape[-1] != n:
        raise DomainError(f"vector has dimension {lam.shape[-1]}, cone expects n={n}")


def cone_membership(lam, cone) -> bool:
    lam = np.asarray(lam, dtype=float)
    _check_dim(lam, cone.n)
    return bool(cone.contains(lam))


def cone_slack(lam, cone: ConeSpec) -> float:
    lam = np.asarray(lam, dtype=float)
    _check_dim(lam, cone.n)
    return float(cone.slack(lam))


# ------------------------------------------------------------ operators


@dataclass(frozen=True)
class OperatorFamily:
    """Normalized sigma_k-type operators.

    ``sigma_k_root``:   f = (sigma_k / C(n,k))^(1/k)
    ``sigma_quotient``: f = (sigma_k/sigma_l * C(n,l)/C(n,k))^(1/(k-l)), l < k

    Both are concave, homogeneous of degree one and normalized so that
    ``f(1,...,1) = 1``; their natural cone is ``Gamma_k``.
    """

    kind: str
    n: int
    k: int
    l: int = 0

    def __post_init__(self):
        if self.kind not in ("sigma_k_root", "sigma_quotient"):
            raise DomainError(f"unknown operator family {self.kind!r}")
        if not 1 <= self.k <= self.n:
            raise DomainError(f"family index k={self.k} must satisfy 1 <= k <= n={self.n}")
        if self.kind == "sigma_k_root" and self.l != 0:
            raise DomainError("sigma_k_root takes no lower index l")
        if self.kind == "sigma_quotient" and not 0 <= self.l < self.k:
            raise DomainError(f"quotient needs 0 <= l < k, got l={self.l}, k={self.k}")

    @classmethod
    def sigma_root(cls, n: int, k: int) -> "OperatorFamily":
        return cls("sigma_k_root", n, k)

    @classmethod
    def quotient(cls, n: int, k: int, l: int) -> "OperatorFamily":
        return cls("sigma_quotient", n, k, l)

    @property
    def cone(self) -> ConeSpec:
        return ConeSpec(self.n, self.k)

    @property
    def label(self) -> str:
        if self.kind == "sigma_k_root":
            return f"(sigma_{self.k}/C({self.n},{self.k}))^(1/{self.k})"
        return f"(sigma_{self.k}/sigma_{self.l})^(1/{self.k - self.l})"

    @property
    def _scale(self) -> float:
        return math.comb(self.n, self.l) / math.comb(self.n, self.k)

    def evaluate(self, lam) -> np.ndarray:
        """Batched value without cone checks (NaN or garbage outside the cone)."""
        e = elementary_symmetric(lam)
        ratio = e[..., self.k] / e[..., self.l] * self._scale
        with np.errstate(invalid="ignore"):
            return ratio ** (1.0 / (self.k - self.l))

    def value_and_gradient(self, lam) -> tuple[np.ndarray, np.ndarray]:
        """Batched ``(f, grad f)``; caller guarantees cone membership."""
        lam = np.asarray(lam, dtype=float)
        e = elementary_symmetric(lam)
        dele = deleted_symmetric(lam)
        sk = e[..., self.k]
        f = (sk / e[..., self.l] * self._scale) ** (1.0 / (self.k - self.l))
        # d log f / d lam_i = (sigma_{k-1}(lam|i)/sigma_k - sigma_{l-1}(lam|i)/sigma_l) / (k - l)
        dlog = dele[..., self.k - 1] / sk[..., None]
        if self.l > 0:
            dlog = dlog - dele[..., self.l - 1] / e[..., self.l, None]
        grad = f[..., None] * dlog / (self.k - self.l)
        return f, grad


def _require_in_cone(lam: np.ndarray, fam: OperatorFamily) -> None:
    _check_dim(lam, fam.n)
    j = fam.cone.first_violation(lam)
    if j is not None:
        s = float(elementary_symmetric(lam)[j])
        raise ConeError(
            f"lambda={lam.tolist()} outside {fam.cone.label}: sigma_{j} = {s:.3e} <= 0", index=j, slack=s
        )


def f_value(fam: OperatorFamily, lam) -> float:
    lam = np.asarray(lam, dtype=float)
    _require_in_cone(lam, fam)
    return float(fam.evaluate(lam))


def f_gradient(fam: OperatorFamily, lam) -> np.ndarray:
    """Partial derivatives ``(f_1, ..., f_n)`` in the index order of ``lam``."""
    lam = np.asarray(lam, dtype=float)
    _require_in_cone(lam, fam)
    return fam.value_and_gradient(lam)[1]


# ------------------------------------------------------ kappa and theta


def kappa_of_cone(cone, eps_halvings: int = 52) -> int:
    """Largest ``l`` such that ``(-eps,...,-eps, 1,...,1)`` with ``l`` negative
    entries lies in the cone for some ``eps`` in (0, 1].

    This is the maximal number of negative entries a cone vector can carry;
    it equals ``n - k`` for ``Gamma_k``.
    """
    n = cone.n
    eps = 0.5 ** np.arange(eps_halvings + 1)
    for l in range(n - 1, 0, -1):
        trial = np.ones((eps.size, n))
        trial[:, :l] = -eps[:, None]
        if np.any(cone.contains(trial)):
            return l
    return 0


def vartheta_analytic(cone, alpha) -> float:
    """Certified lower bound for ``min_{i <= kappa+1} f_i / sum_j f_j``.

    ``alpha`` must place ``(-alpha_1..-alpha_kappa, alpha_{kappa+1}..alpha_n)``
    inside the cone with ``alpha_1 >= ... >= alpha_kappa``. The bound combines
    ``f_{kappa+1} >= alpha_1 / D * f_1`` with ``f_1 >= sum(f)/n``, where
    ``D = sum_{i>kappa} alpha_i - sum_{2<=i<=kappa} alpha_i``.
    """
    n = cone.n
    kappa = kappa_of_cone(cone)
    if kappa == 0:
        return 1.0 / n
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (n,):
        raise DomainError(f"alpha must have {n} entries")
    if np.any(alpha <= 0):
        raise DomainError("alpha entries must be strictly positive")
    neg = alpha[:kappa]
    if np.any(np.diff(neg) > 0):
        raise DomainError("alpha_1 >= ... >= alpha_kappa is required")
    probe = np.concatenate([-neg, alpha[kappa:]])
    if not bool(cone.contains(probe)):
        raise DomainError(f"alpha vector {probe.tolist()} is not in {getattr(cone, 'label', 'the cone')}")
    denom = alpha[kappa:].sum() - neg[1:].sum()
    if denom <= 0:
        raise DomainError(f"denominator sum_(i>kappa) alpha_i - sum_(2..kappa) alpha_i = {denom:.3e} is not positive")
    return float(alpha[0] / denom / n)


def _alpha_candidates(n: int, kappa: int, exponents: range) -> np.ndarray:
    vals = [2.0**e for e in exponents]
    negs = [sorted(c, reverse=True) for c in itertools.combinations_with_replacement(vals, kappa)]
    poss = list(itertools.combinations_with_replacement(vals, n - kappa))
    neg_arr = np.array(negs, dtype=float).reshape(len(negs), kappa)
    pos_arr = np.array(poss, dtype=float).reshape(len(poss), n - kappa)
    a = np.repeat(neg_arr, len(poss), axis=0)
    b = np.tile(pos_arr, (len(negs), 1))
    return np.concatenate([a, b], axis=1)


def best_alpha(cone, exponents: range = range(-8, 1)) -> tuple[np.ndarray | None, float]:
    """Grid search for the alpha maximizing the certified bound.

    Entries run over ``2**e`` for ``e`` in ``exponents``; only the
    ordering-compatible, cone-admissible vectors are considered.
    Returns ``(alpha, theta)``; ``alpha`` is None when ``kappa == 0``.
    """
    n = cone.n
    kappa = kappa_of_cone(cone)
    if kappa == 0:
        return None, 1.0 / n
    cand = _alpha_candidates(n, kappa, exponents)
    probe = cand.copy()
    probe[:, :kappa] *= -1.0
    ok = cone.contains(probe)
    denom = cand[:, kappa:].sum(axis=1) - cand[:, 1:kappa].sum(axis=1)
    ok &= denom > 0
    if not np.any(ok):
        raise DomainError("no admissible alpha on the search grid")
    ratio = np.where(ok, cand[:, 0] / np.where(denom > 0, denom, 1.0), -np.inf)
    best = int(np.argmax(ratio))
    return cand[best], float(ratio[best] / n)


@lru_cache(maxsize=None)
def _vartheta_best_cached(n: int, k: int) -> float:
    return best_alpha(ConeSpec(n, k))[1]


def vartheta_best(cone) -> float:
    """Best certified bound over the default alpha grid (cached for Garding cones)."""
    if isinstance(cone, ConeSpec):
        return _vartheta_best_cached(cone.n, cone.k)
    return best_alpha(cone)[1]


# ------------------------------------------------------------- sampling


def _boundary_points(cone, directions: np.ndarray, t_max: float = 1e6, iters: int = 80):
    """Exit points of rays ``1 + t z`` from the cone, by vectorized bisection.

    Rays that never leave within ``t_max`` are dropped.
    """
    n = directions.shape[1]
    one = np.ones(n)
    exits = ~cone.contains(one + t_max * directions)
    z = directions[exits]
    lo = np.zeros(len(z))
    hi = np.full(len(z), t_max)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = cone.contains(one + mid[:, None] * z)
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return one + lo[:, None] * z


def sample_cone(cone, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` points strictly inside ``cone``, sorted ascending.

    The sample mixes three populations in equal parts:

    * points of the hyperplane ``sum(lam) = 1`` near ``1/n``, kept by rejection;
    * rays ``(1 - eps) lam_b + eps * 1`` running into boundary points ``lam_b``,
      with ``eps`` log-uniform in [1e-9, 1];
    * strongly anisotropic vectors (``lam_n / lam_1`` up to 1e6), some with
      negative entries pulled back into the cone.
    """
    if count <= 0:
        raise DomainError("sample budget must be positive")
    n = cone.n
    kappa = kappa_of_cone(cone)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
    parts = [count // 3, count // 3, count - 2 * (count // 3)]
    out = []

    rng = streams[0]
    got: list[np.ndarray] = []
    need = parts[0]
    while need > 0:
        z = rng.standard_normal((2 * need + 16, n))
        z -= z.mean(axis=1, keepdims=True)
        z *= rng.uniform(0.0, 3.0 / n, size=(len(z), 1)) / np.linalg.norm(z, axis=1, keepdims=True)
        pts = 1.0 / n + z
        pts = pts[cone.contains(pts)][:need]
        got.append(pts)
        need -= len(pts)
    out.append(np.concatenate(got))

    rng = streams[1]
    got = []
    need = parts[1]
    while need > 0:
        z = rng.standard_normal((2 * need + 16, n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        lam_b = _boundary_points(cone, z)
        eps = 10.0 ** rng.uniform(-9.0, 0.0, size=(len(lam_b), 1))
        pts = (1.0 - eps) * lam_b + eps
        pts = pts[cone.contains(pts)][:need]
        got.append(pts)
        need -= len(pts)
    out.append(np.concatenate(got))

    rng = streams[2]
    got = []
    need = parts[2]
    while need > 0:
        m = 2 * need + 16
        pts = np.sort(np.exp(rng.uniform(0.0, math.log(1e6), size=(m, n))), axis=1)
        if kappa > 0:
            nneg = rng.integers(0, kappa + 1, size=m)
            mask = np.arange(n)[None, :] < nneg[:, None]
            pts = np.where(mask, -pts, pts)
            for _ in range(60):
                bad = ~cone.contains(pts)
                if not np.any(bad):
                    break
                pts[bad] = np.where(mask[bad], 0.5 * pts[bad], pts[bad])
        pts = pts[cone.contains(pts)][:need]
        got.append(pts)
        need -= len(pts)
    out.append(np.concatenate(got))

    return ascending(np.concatenate(out))


# ------------------------------------------------------------ reports


@dataclass
class EllipticityReport:
    kappa: int
    vartheta_analytic: float
    vartheta_empirical: float
    sharpness_witness: np.ndarray | None
    sharpness_min_ratio: float | None
    sample_count: int
    seed: int
    alpha: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "kappa": self.kappa,
            "vartheta_analytic": self.vartheta_analytic,
            "vartheta_empirical": self.vartheta_empirical,
            "sharpness_min_ratio": self.sharpness_min_ratio,
            "sample_count": self.sample_count,
            "seed": self.seed,
        }


def sharpness_sequence(n: int, kappa: int, eps_values=None) -> np.ndarray:
    """Vectors ``(eps,...,eps, 1,...,1)`` with ``kappa + 1`` small entries.

    Along this sequence the share ``f_{kappa+2} / sum f`` collapses for
    sigma_k-type operators, showing that no more than ``kappa + 1`` directions
    are uniformly elliptic.
    """
    if kappa + 2 > n:
        raise DomainError(f"kappa + 2 = {kappa + 2} exceeds n = {n}; nothing to sharpen")
    if eps_values is None:
        eps_values = 10.0 ** -np.arange(1, 13)
    eps_values = np.asarray(eps_values, dtype=float)
    lam = np.ones((eps_values.size, n))
    lam[:, : kappa + 1] = eps_values[:, None]
    return lam


def vartheta_empirical(fam: OperatorFamily, cone: ConeSpec, sample_budget: int, seed: int) -> EllipticityReport:
    """Sampled infimum of the partial-ellipticity share plus a sharpness search."""
    if sample_budget <= 0:
        raise DomainError("sample_budget must be positive")
    if (fam.n, fam.k) != (cone.n, cone.k):
        raise DomainError(f"family cone {fam.cone.label} does not match {cone.label}")
    kappa = kappa_of_cone(cone)
    alpha, theta = best_alpha(cone)
    pts = sample_cone(cone, sample_budget, seed)
    _, grad = fam.value_and_gradient(pts)
    share = grad / grad.sum(axis=-1, keepdims=True)
    emp = float(np.min(share[:, : kappa + 1]))

    witness, min_ratio = None, None
    if kappa + 2 <= fam.n:
        seq = sharpness_sequence(fam.n, kappa)
        _, g = fam.value_and_gradient(seq)
        ratios = g[:, kappa + 1] / g.sum(axis=-1)
        j = int(np.argmin(ratios))
        witness, min_ratio = seq[j], float(ratios[j])
    return EllipticityReport(
        kappa=kappa,
        vartheta_analytic=theta,
        vartheta_empirical=emp,
        sharpness_witness=witness,
        sharpness_min_ratio=min_ratio,
        sample_count=int(len(pts)),
        seed=seed,
        alpha=alpha,
    )


def verify_lemma21(fam: OperatorFamily, lam, mu) -> tuple[bool, bool, bool]:
    """Truth of ``sum f_i(lam) mu_i > 0``, ``f(lam + mu) > f(lam)`` and
    ``sum f_i(lam) lam_i > 0`` for cone vectors ``lam`` and ``mu``."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    _require_in_cone(lam, fam)
    _require_in_cone(mu, fam)
    f, grad = fam.value_and_gradient(lam)
    return (
        bool(grad @ mu > 0),
        bool(fam.evaluate(lam + mu) > f),
        bool(grad @ lam > 0),
    )


# ---------------------------------------------------------- rho transform


def _check_rho(rho: float, n: int) -> None:
    if rho == 0 or rho == n:
        raise DomainError(
            f"rho={rho:g} makes Q singular (det Q = (-1)^(n-1) rho^(n-1) (n - rho) = 0); "
            "(3.4) requires rho != 0 and rho < n"
        )


def q_matrix(n: int, rho: float) -> np.ndarray:
    """``Q = (1 - rho * delta_ij)``; row vectors map as ``mu = lam @ Q``.

    ``det Q = (-1)^(n-1) rho^(n-1) (n - rho)``, so Q is singular for rho in {0, n}.
    """
    return np.ones((n, n)) - rho * np.eye(n)


def rho_forward(lam, rho: float) -> np.ndarray:
    """``mu_i = sum_j lam_j - rho * lam_i``."""
    lam = np.asarray(lam, dtype=float)
    return lam.sum(axis=-1, keepdims=True) - rho * lam


def rho_transform(mu, rho: float) -> np.ndarray:
    """Inverse of :func:`rho_forward`: ``lam_i = (sum(mu)/(n - rho) - mu_i) / rho``."""
    mu = np.asarray(mu, dtype=float)
    n = mu.shape[-1]
    _check_rho(rho, n)
    return (mu.sum(axis=-1, keepdims=True) / (n - rho) - mu) / rho


def transformed_gradient(grad_mu: np.ndarray, rho: float) -> np.ndarray:
    """Gradient of ``lam -> f(rho_forward(lam))`` from the gradient of f at mu."""
    grad_mu = np.asarray(grad_mu, dtype=float)
    return grad_mu.sum(axis=-1, keepdims=True) - rho * grad_mu


def transformed_ellipticity_bound(rho: float, kappa: int, vartheta: float, n: int) -> float:
    """Lower bound on every share ``d f~/d lam_i / sum_j d f~/d lam_j``.

    ``1/(n - rho)`` for ``rho < 0`` and ``(1 - rho (1 - kappa*theta))/(n - rho)``
    for ``0 < rho < 1/(1 - kappa*theta)``.
    """
    if not 0 <= kappa <= n - 1:
        raise DomainError(f"kappa={kappa} outside 0..{n - 1}")
    if not 0 < vartheta <= 1.0 / n + 1e-15:
        raise DomainError(f"vartheta={vartheta} outside (0, 1/n]")
    if rho == n:
        _check_rho(rho, n)
    slack = 1.0 - kappa * vartheta
    limit = math.inf if slack <= 0 else 1.0 / slack
    if rho == 0 or not rho < limit:
        raise DomainError(
            f"rho={rho:g} violates (3.4): need rho != 0 and rho < 1/(1 - kappa*theta) = {limit:.6g}"
            + (" (kappa = 0: Gamma = Gamma_n admits no fully uniform rewriting at rho >= 1)" if kappa == 0 else "")
        )
    if rho < 0:
        return 1.0 / (n - rho)
    return (1.0 - rho * slack) / (n - rho)


# ------------------------------------------------------------ self-test


def structural_selftest(fam: OperatorFamily, sample_budget: int = 2000, seed: int = 0) -> dict:
    """Check concavity, homogeneity, the trace inequality and the lower bound on
    ``sum f_i`` over sampled cone points. Failures are reported, not raised."""
    cone = fam.cone
    pts = sample_cone(cone, sample_budget, seed)
    rng = np.random.default_rng(seed + 1)
    other = pts[rng.permutation(len(pts))]
    f = fam.evaluate(pts)
    g = fam.evaluate(other)
    checks: dict[str, dict] = {}

    def record(name: str, slack: np.ndarray) -> None:
        worst = float(np.min(slack)) if slack.size else 0.0
        checks[name] = {"passed": bool(worst >= 0), "worst_slack": worst}

    # the sample mixes scales up to 1e6, so tolerances are relative
    scale = np.maximum(1.0, np.maximum(np.abs(f), np.abs(g)))
    mid = fam.evaluate(0.5 * (pts + other))
    record("concavity", (mid - 0.5 * (f + g)) + 1e-12 * scale)

    hom = []
    # powers of two scale exactly, isolating homogeneity from cancellation error
    for t in (0.5, 2.0, 8.0):
        hom.append(1e-13 * t * np.abs(f) - np.abs(fam.evaluate(t * pts) - t * f))
    record("homogeneity", np.concatenate(hom))

    record("trace", pts.sum(axis=-1) - fam.n * f + 1e-12 * np.maximum(1.0, np.abs(pts).sum(axis=-1)))

    _, grad = fam.value_and_gradient(pts)
    total = grad.sum(axis=-1)
    lower = []
    for R in (1.0, 10.0):
        lower.append(total - (R - f) / R)
    record("gradient_sum", np.concatenate(lower))

    ones_check = []
    for t in (0.5, 1.0, 2.0, 10.0):
        ones_check.append(1e-13 * t - abs(float(fam.evaluate(np.full(fam.n, t))) - t))
    record("normalization", np.array(ones_check))

    return {
        "family": fam.label,
        "sample_count": int(len(pts)),
        "passed": all(c["passed"] for c in checks.values()),
        "checks": checks,
    }
