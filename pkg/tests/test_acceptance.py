"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the status lines are
repeated in the terminal summary.
"""

import functools
import math
import time

import numpy as np

import confmetric.solver as solver
from confmetric.cli import main as cli_main
from confmetric.errors import DomainError, NonConvergenceError
from confmetric.barriers import (
    BarrierProfile,
    CollarGeometry,
    subsolution_delta_threshold,
    subsolution_offset,
    verify_lower_barrier,
    verify_subsolution,
)
from confmetric.geom import Background, Mode
from confmetric.solver import (
    RESOLVING_BETA,
    Grid1D,
    ProblemSpec,
    asymptotic_extract,
    asymptotic_target,
    continuation,
    exact_dirichlet_solution,
    exact_profile,
    initial_guess,
    newton_solve,
    uniqueness_band,
)
from confmetric.symfun import (
    ConeSpec,
    OperatorFamily,
    kappa_of_cone,
    q_matrix,
    rho_forward,
    rho_transform,
    sample_cone,
    transformed_ellipticity_bound,
    vartheta_best,
    vartheta_empirical,
)

K_1024 = tuple(2.0**j for j in range(1, 11))
K_4096 = tuple(2.0**j for j in range(1, 13))


def all_families(n):
    out = [OperatorFamily.sigma_root(n, k) for k in range(1, n + 1)]
    out += [OperatorFamily.quotient(n, k, l) for k in range(2, n + 1) for l in range(1, k)]
    return out


@functools.lru_cache(maxsize=None)
def run_continuation(kind, n, k, mode_kind, tau, m, beta, k_list):
    """Cached continuation so later criteria audit the same solves."""
    bg = Background(kind, n)
    mode = Mode.einstein() if mode_kind == "einstein" else Mode.schouten(tau)
    spec = ProblemSpec(bg, OperatorFamily.sigma_root(n, k), mode, 1.0, 0.0)
    grid = Grid1D.graded(bg, m, beta)
    return spec, grid, continuation(spec, grid, k_list)


def criterion5_cases():
    return [(n, k) for n in (3, 4) for k in (1, 2)]


def criterion6_cases():
    cases = []
    for n in (3, 4, 5):
        for k in range(1, n + 1):
            fam = OperatorFamily.sigma_root(n, k)
            modes = [("einstein", None)] + [("schouten", float(t)) for t in sorted({2, n - 1, n})]
            for mode_kind, tau in modes:
                mode = Mode.einstein() if mode_kind == "einstein" else Mode.schouten(tau)
                try:
                    ProblemSpec(Background("euclidean_ball", n), fam, mode)
                except DomainError:
                    continue
                cases.append((n, k, mode_kind, tau))
    return cases


# ---------------------------------------------------------------- 1


def test_criterion_01_kappa(criterion):
    with criterion(1, "kappa of Gamma_k equals n - k", budget=1.0) as c:
        count = 0
        for n in (3, 4, 5, 6):
            for k in range(1, n + 1):
                got = kappa_of_cone(ConeSpec(n, k))
                c.check(got == n - k, f"kappa(Gamma_{k}, n={n}) = {got}")
                count += 1
        c.note(f"{count} cones exact")


# ---------------------------------------------------------------- 2


def test_criterion_02_partial_uniform_ellipticity(criterion):
    with criterion(2, "partial uniform ellipticity and sharpness", budget=30.0) as c:
        worst = math.inf
        for n in (3, 4, 5):
            for k in range(1, n + 1):
                fam = OperatorFamily.sigma_root(n, k)
                rep = vartheta_empirical(fam, fam.cone, 100_000, 2024)
                c.check(rep.sample_count >= 100_000, f"only {rep.sample_count} samples")
                gap = rep.vartheta_empirical - rep.vartheta_analytic
                worst = min(worst, gap)
                c.check(gap >= -1e-12, f"{fam.label}: empirical {rep.vartheta_empirical:.3e} < analytic {rep.vartheta_analytic:.3e}")
                if k >= 2:
                    c.check(rep.sharpness_min_ratio < 1e-6, f"{fam.label}: sharpness ratio {rep.sharpness_min_ratio:.2e}")
        c.note(f"min(empirical - analytic) = {worst:.3e}")


# ---------------------------------------------------------------- 3


def _interior_points(cone, count, rng):
    pts = []
    while len(pts) < count:
        lam = rng.normal(size=cone.n) + 2.0 * rng.random()
        lam /= np.max(np.abs(lam))
        if cone.slack(lam) >= 1e-2:
            pts.append(lam)
    return np.array(pts)


def test_criterion_03_gradient_consistency(criterion):
    with criterion(3, "analytic gradient vs central differences") as c:
        rng = np.random.default_rng(3)
        worst = 0.0
        for n in (3, 4, 5):
            for fam in all_families(n):
                pts = _interior_points(fam.cone, 100, rng)
                _, grad = fam.value_and_gradient(pts)
                h = 1e-6
                fd = np.empty_like(grad)
                for i in range(n):
                    e = np.zeros(n)
                    e[i] = h
                    fd[:, i] = (fam.evaluate(pts + e) - fam.evaluate(pts - e)) / (2 * h)
                rel = np.max(np.abs(grad - fd), axis=1) / np.max(np.abs(grad), axis=1)
                worst = max(worst, float(rel.max()))
                c.check(rel.max() <= 1e-6, f"{fam.label}: relative error {rel.max():.2e}")
                c.check(bool(np.all(grad >= 0)), f"{fam.label}: negative f_i")
                c.check(bool(np.all(grad.sum(axis=1) > 0)), f"{fam.label}: sum f_i not positive")
        c.note(f"max relative error {worst:.2e}")


# ---------------------------------------------------------------- 4


def test_criterion_04_rho_transform(criterion):
    with criterion(4, "Q determinant, round trip and transformed ellipticity") as c:
        rng = np.random.default_rng(4)
        rhos = (-1.0, 0.5, 1.0, 1.5)
        for n in range(2, 6):
            for rho in rhos:
                det = np.linalg.det(q_matrix(n, rho))
                expected = (-1) ** (n - 1) * rho ** (n - 1) * (n - rho)
                c.check(abs(det - expected) <= 1e-12, f"det Q n={n} rho={rho}: {det} vs {expected}")
                lam = rng.normal(size=(1000, n))
                back = rho_transform(rho_forward(lam, rho), rho)
                c.check(np.max(np.abs(back - lam)) <= 1e-12, f"round trip n={n} rho={rho}")
        checked = rejected = 0
        worst = math.inf
        for n in (3, 4, 5):
            for k in range(1, n + 1):
                fam = OperatorFamily.sigma_root(n, k)
                cone = fam.cone
                kappa, theta = kappa_of_cone(cone), vartheta_best(cone)
                pts = sample_cone(cone, 10_000, 40 + n + k)
                _, grad = fam.value_and_gradient(pts)
                total = grad.sum(axis=1, keepdims=True)
                for rho in rhos:
                    try:
                        bound = transformed_ellipticity_bound(rho, kappa, theta, n)
                    except DomainError:
                        rejected += 1
                        limit = math.inf if kappa * theta >= 1 else 1 / (1 - kappa * theta)
                        c.check(not rho < limit, f"{fam.label}: rho={rho} wrongly rejected")
                        continue
                    ratio = float(np.min((total - rho * grad) / ((n - rho) * total)))
                    worst = min(worst, ratio - bound)
                    checked += 1
                    c.check(ratio >= bound - 1e-10, f"{fam.label} rho={rho}: ratio {ratio:.4e} < bound {bound:.4e}")
        c.note(f"{checked} (family, rho) bounds hold, min margin {worst:.2e}; {rejected} outside (3.4) rejected")


# ---------------------------------------------------------------- 5


def test_criterion_05_exact_solution_recovery(criterion):
    with criterion(5, "exact-solution recovery and grid order", budget=120.0) as c:
        notes = []
        for n, k in criterion5_cases():
            spec, grid, res = run_continuation("euclidean_ball", n, k, "einstein", None, 512, RESOLVING_BETA, K_1024)
            c.check(res.failure_index is None, f"n={n} k={k}: {res.failure_message}")
            inner = grid.nodes <= 0.8
            u_star = 0.5 * math.log((n - 1) * (n - 2) / 2) + np.log(2 / (1 - grid.nodes[inner] ** 2))
            err = float(np.max(np.abs(res.u_inf[inner] - u_star)))
            c.check(err <= 5e-3, f"n={n} k={k}: sup error {err:.2e}")
            # order of the discretization against the closed-form solution at k = 1024
            errs = []
            for m in (128, 256, 512):
                _, g, r = run_continuation("euclidean_ball", n, k, "einstein", None, m, RESOLVING_BETA, K_1024)
                exact = exact_dirichlet_solution(spec.with_boundary(math.log(1024)), g)
                errs.append(float(np.max(np.abs(r.records[-1].u - exact)[g.nodes <= 0.8])))
            orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
            c.check(bool(np.all(orders >= 1.9)), f"n={n} k={k}: orders {orders}")
            notes.append(f"n={n},k={k}: err {err:.1e}, order {orders.min():.2f}")
        c.note(", ".join(notes))


# ---------------------------------------------------------------- 6


def test_criterion_06_boundary_asymptotics(criterion):
    with criterion(6, "boundary asymptotic constant") as c:
        worst = 0.0
        cases = criterion6_cases()
        for n, k, mode_kind, tau in cases:
            start = time.perf_counter()
            spec, grid, res = run_continuation("euclidean_ball", n, k, mode_kind, tau, 2048, None, K_4096)
            label = f"n={n} k={k} {spec.mode.label}"
            c.check(res.failure_index is None, f"{label}: {res.failure_message}")
            est, _ = asymptotic_extract(res.limit_record())
            target = asymptotic_target(n, spec.mode)
            dev = est - target
            worst = max(worst, abs(dev))
            c.check(abs(dev) <= 2e-2, f"{label}: estimate {est:.4f} vs target {target:.4f}")
            c.check(time.perf_counter() - start < 120.0, f"{label}: runtime over 2 min")
        c.note(f"{len(cases)} cases, max |deviation| {worst:.4f}")


# ---------------------------------------------------------------- 7


def test_criterion_07_monotone_continuation(criterion):
    with criterion(7, "monotone continuation and supersolution bound") as c:
        runs = [("euclidean_ball", n, k, "einstein", None, m, RESOLVING_BETA, K_1024) for n, k in criterion5_cases() for m in (128, 256, 512)]
        runs += [("euclidean_ball", n, k, mode_kind, tau, 2048, None, K_4096) for n, k, mode_kind, tau in criterion6_cases()]
        worst_mono = worst_sup = -math.inf
        for key in runs:
            spec, grid, res = run_continuation(*key)
            label = f"n={key[1]} k={key[2]} {spec.mode.label} m={key[5]}"
            c.check(res.monotone, f"{label}: monotonicity violated by {res.max_monotonicity_violation:.2e}")
            c.check(res.below_supersolution is True, f"{label}: supersolution exceeded by {res.max_supersolution_violation:.2e}")
            worst_mono = max(worst_mono, res.max_monotonicity_violation)
            worst_sup = max(worst_sup, res.max_supersolution_violation)
        c.note(f"{len(runs)} runs; max u_k - u_k+1 = {worst_mono:.1e}, max u_k - supersolution = {worst_sup:.1e}")


# ---------------------------------------------------------------- 8


def test_criterion_08_barriers(criterion):
    with criterion(8, "barrier and subsolution inequalities") as c:
        count = 0
        for n in (3, 4, 5):
            flat = CollarGeometry.flat(n)
            for k in (1.0, 10.0, 100.0, 1e4):
                for delta in (1e-3, 1e-2, 0.1, 0.5):
                    rep = verify_lower_barrier(BarrierProfile("lower_hk", n, delta, k), flat, find_threshold=False)
                    c.check(rep.passed, f"lower h_k n={n} k={k:g} delta={delta:g}: slack {rep.min_slack:.2e}")
                    count += 1
            for geo in (flat, CollarGeometry.with_shape_norm(n, 1.0)):
                probe = BarrierProfile("subsolution_keps", n, 0.5, 2.0, eps=0.1)
                delta = 0.5 * subsolution_delta_threshold(probe, geo, 1.0)
                for factor in (1.0, 10.0, math.inf):
                    p = BarrierProfile("subsolution_keps", n, delta, factor / delta, eps=0.1)
                    for kk in range(1, n):
                        rep = verify_subsolution(p, OperatorFamily.sigma_root(n, kk), 1.0, geo)
                        c.check(rep.passed, f"subsolution n={n} sigma_{kk} delta={delta:.3g} k={p.k:g}: {rep.details}")
                        count += 1
            for tau in sorted({2.0, float(n - 1), float(n)}):
                p = BarrierProfile("subsolution_keps_tau", n, 0.01, 100.0, eps=0.1, tau=tau)
                rep = verify_subsolution(p, OperatorFamily.sigma_root(n, 1), 1.0, flat)
                c.check(rep.passed, f"tau subsolution n={n} tau={tau:g}: {rep.details}")
                count += 1
            # offset of the limit profile: C - d/(delta (d + delta)), linear in d
            p = BarrierProfile("subsolution_keps", n, 0.01, math.inf, eps=0.1)
            target = 0.5 * math.log(0.9**2 * (n - 1) * (n - 2) / (2 * 1.1))
            d = np.array([1e-3, 1e-4, 1e-5])
            err = subsolution_offset(p, d) - target
            rates = np.abs(err[:-1] / err[1:])
            c.check(bool(np.all(np.abs(rates - 10.0) < 1.0)), f"offset n={n}: error ratios {rates}")
            slope = err / d
            extrapolated = float(err[-1] - d[-1] * slope[-1])
            c.check(abs(extrapolated) < 1e-6, f"offset n={n}: extrapolated error {extrapolated:.2e}")
        c.note(f"{count} barrier verifications; offset error O(d)")


# ---------------------------------------------------------------- 9


def test_criterion_09_uniqueness(criterion):
    with criterion(9, "uniqueness and the psi band") as c:
        worst = 0.0
        for n, k in ((3, 2), (4, 1)):
            bg = Background("euclidean_ball", n)
            spec = ProblemSpec(bg, OperatorFamily.sigma_root(n, k), Mode.einstein(), 1.0)
            grid = Grid1D.graded(bg, 512)
            first = spec.with_boundary(math.log(2.0))
            base = initial_guess(first, grid)
            bump = np.cos(0.5 * math.pi * grid.nodes) ** 2
            a = continuation(spec, grid, K_1024, u0=base + 0.05 * bump)
            b = continuation(spec, grid, K_1024, u0=base - 0.05 * bump)
            c.check(a.failure_index is None and b.failure_index is None, f"n={n}: continuation failed")
            ok = np.isfinite(a.u_inf)
            diff = float(np.max(np.abs(a.u_inf[ok] - b.u_inf[ok])))
            worst = max(worst, diff)
            c.check(diff <= 1e-7, f"n={n} k={k}: u_inf differ by {diff:.2e}")
            c.check(uniqueness_band(a.u_inf, b.u_inf, [1.0], spec_lower=spec, spec_other=spec), f"n={n}: zero-width band fails")
            # a single Dirichlet problem from two distant admissible starts
            top = spec.with_boundary(math.log(1024.0))
            guess = initial_guess(top, grid)
            r1 = newton_solve(top, grid, guess + 0.1 * bump)
            r2 = newton_solve(top, grid, guess - 0.1 * bump)
            d2 = float(np.max(np.abs(r1.u - r2.u)))
            worst = max(worst, d2)
            c.check(d2 <= 1e-7, f"n={n}: Newton solutions differ by {d2:.2e}")

        # nonconstant psi with boundary values 1 and 2: width 1/2 log 2
        bg = Background("euclidean_annulus", 3, 0.5, 1.0)

        def psi(r):
            return 1.0 + 2.0 * (r - 0.5)

        spec = ProblemSpec(bg, OperatorFamily.sigma_root(3, 1), Mode.einstein(), psi)
        grid = Grid1D.graded(bg, 512)
        lower = continuation(spec, grid, K_1024)
        start = initial_guess(spec.with_boundary(math.log(3.0)), grid)
        bump = np.sin(math.pi * (grid.nodes - 0.5) / 0.5) ** 2
        other = continuation(spec, grid, [3.0 * 2.0**j for j in range(10)], u0=start + 0.05 * bump)
        c.check(lower.failure_index is None and other.failure_index is None, "annulus continuation failed")
        c.check(lower.monotone and other.monotone, "annulus continuation not monotone")
        compact = grid.d >= 0.1 * (bg.outer - bg.inner)
        width = 0.5 * math.log(2.0)
        band = uniqueness_band(lower.u_inf, other.u_inf, [psi(0.5), psi(1.0)], tol=1e-3, mask=compact)
        gap = other.u_inf[compact] - lower.u_inf[compact]
        c.check(band, f"band [0, {width:.4f}] violated: difference in [{gap.min():.2e}, {gap.max():.2e}]")
        c.note(f"psi = 1: max difference {worst:.1e}; psi band width {width:.4f}, observed [{gap.min():.1e}, {gap.max():.1e}]")


# ---------------------------------------------------------------- 10


def test_criterion_10_validation_gates(criterion, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CONFMETRIC_OUTPUT_DIR", str(tmp_path))
    with criterion(10, "validation gates and exit codes") as c:
        ball = Background("euclidean_ball", 3)
        try:
            ProblemSpec(ball, OperatorFamily.sigma_root(3, 1), Mode.schouten(1.0))
            c.check(False, "tau = 1 accepted")
        except DomainError as exc:
            c.check("(1.15)" in str(exc), f"tau = 1 message lacks (1.15): {exc}")
        try:
            rho_transform(np.ones(3), 3.0)
            c.check(False, "rho = n accepted")
        except DomainError as exc:
            c.check("singular" in str(exc) and "(3.4)" in str(exc), f"rho = n message: {exc}")
        try:
            ProblemSpec(ball, OperatorFamily.sigma_root(3, 3), Mode.einstein())
            c.check(False, "Gamma_n fully uniform request accepted")
        except DomainError as exc:
            c.check("Gamma_n" in str(exc) and "(3.4)" in str(exc), f"Gamma_n message: {exc}")

        def code(argv):
            try:
                return cli_main(argv + ["--quiet"])
            except SystemExit as exc:
                return exc.code

        expectations = [
            (["solve", "--mode", "schouten", "--tau", "1.0", "--n", "3", "--k", "1"], 2, "(1.15)"),
            (["cone", "--n", "3", "--k", "2", "--rho", "3", "--samples", "1000"], 2, "singular"),
            (["cone", "--n", "3", "--k", "3", "--rho", "1", "--samples", "1000"], 2, "Gamma_n"),
            (["solve", "--n", "3", "--k", "3", "--k-list", "2:4:x2"], 2, "Gamma_n"),
            (["barrier", "--kind", "subsolution", "--tau", str(4 / 3), "--n", "3"], 2, "(6.2)"),
            (["cone", "--n", "3"], 2, "--k"),
            (["cone", "--n", "4", "--k", "2", "--samples", "2000"], 0, ""),
            (["barrier", "--kind", "lower_hk", "--n", "3", "--delta", "0.01", "--k", "1"], 0, ""),
        ]
        for argv, expected, needle in expectations:
            got = code(argv)
            err = capsys.readouterr().err
            c.check(got == expected, f"{' '.join(argv)}: exit {got}, expected {expected}")
            c.check(needle in err, f"{' '.join(argv)}: message lacks {needle!r}")

        real = solver.newton_solve

        def failing(spec, grid, u0=None, tol=1e-10):
            if spec.boundary_value > 2.5:
                raise NonConvergenceError("forced failure", {})
            return real(spec, grid, u0, tol=tol)

        monkeypatch.setattr(solver, "newton_solve", failing)
        got = code(["solve", "--n", "3", "--k", "2", "--grid", "64", "--k-list", "2:64:x2"])
        c.check(got == 3, f"nonconvergence exit {got}, expected 3")
        c.check(any(tmp_path.glob("*_summary.json")), "partial summary not retained")
        c.note(f"{len(expectations) + 4} gates")
