"""Suite runner and convergence studies over registry examples."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg2 as L
from .chart import ChartDomain, ConfigurationError, DegenerateMetricError, SingularMapError, gauss_curvature_jets
from .cone import (
    area_annulus_exact,
    area_annulus_quadrature,
    certify_curvature,
    developing_map,
    equivariance_residual,
    isometry_residual,
)
from .euclid import (
    CurvatureCertificateError,
    GateError,
    SingularImmersionError,
    ConditioningError,
    codazzi_from_potential,
    equivariance_checks,
    immersion_identity_checks,
    projection_metric,
    puncture_limit_check,
    roundtrip_potential,
)
from .hopf import NonConformalChartError, graph_minimality_decomposition, hopf_residuals, hq_modulus_check
from .mlmap import (
    DegenerateMapError,
    InverseMapError,
    build_GB,
    identity_residuals,
    inverse_symmetry_check,
    lagrangian_residuals,
    max_principle_probe,
)
from .registry import Example, make_example
from .report import ProbeReport, ResidualReport, ResidualStats
from .revolution import profile_height, profile_height_halving
from .tolerances import default_profile, tolerance

# refusals that become named failures instead of crashes
REFUSALS = (
    DegenerateMetricError, SingularMapError, ConfigurationError, DegenerateMapError, InverseMapError,
    NonConformalChartError, CurvatureCertificateError, SingularImmersionError, GateError, ConditioningError,
    ArithmeticError, np.linalg.LinAlgError,
)

FAMILIES = ("lagrangian", "identities", "inverse", "hopf", "cone", "euclid", "recovery", "revolution", "probes")

FAMILY_OF = {
    "codazzi_b": "lagrangian",
    "det_b_minus_1": "lagrangian",
    "laplacian_identity": "identities",
    "codazzi_B": "identities",
    "gauss_identity": "identities",
    "trace_identity": "identities",
    "cauchy_riemann": "hopf",
    "chi0_gradient": "hopf",
    "chi0_harmonic": "hopf",
    "conformal_chain": "hopf",
    "conformal_curvature": "hopf",
}

RECOVERY_DOMAIN = dict(t_min=-3.0, t_max=-0.5, shape=(24, 24), theta_max=2.0)


@dataclass
class _Run:
    ex: Example
    domain: ChartDomain
    backend: str
    h: object
    profile: str
    seed: int
    report: ResidualReport
    families: tuple = FAMILIES
    cache: dict = field(default_factory=dict)

    def add_all(self, residuals: dict):
        for name, stats in residuals.items():
            self.report.add(name, stats, tolerance(name, self.profile, self.domain.spacing))

    def guarded(self, family: str, fn):
        if family not in self.families:
            return
        try:
            fn()
        except REFUSALS as exc:
            self.report.fail(family, f"{type(exc).__name__}: {exc}")

    @property
    def pair(self):
        if "pair" not in self.cache:
            self.cache["pair"] = self.ex.make_pair(self.domain)
        return self.cache["pair"]


def _scalar(value: float) -> ResidualStats:
    return ResidualStats.from_values(np.array([value]))


def _pair_families(run: _Run):
    ex, d = run.ex, run.domain
    run.guarded("lagrangian", lambda: run.add_all(lagrangian_residuals(run.pair, run.backend, run.h, d)))
    run.guarded("identities", lambda: run.add_all(identity_residuals(build_GB(run.pair), run.backend, run.h, d)))
    run.guarded("inverse", lambda: run.add_all(inverse_symmetry_check(run.pair, d)))

    def hopf():
        if ex.hopf is None:
            run.add_all(graph_minimality_decomposition(run.pair, build_GB(run.pair), None, d))
            return
        res, qd = hopf_residuals(run.pair, d, strict=ex.hopf == "strict", backend=run.backend, h=run.h)
        run.add_all(res)
        run.report.probes["hopf"] = {"mode": ex.hopf, "anisotropy": qd.anisotropy}
        run.cache["qd"] = qd

    run.guarded("hopf", hopf)


def _cone_family(run: _Run):
    a = run.ex.cone_alpha
    d = run.domain

    def cone():
        run.add_all({
            "dev_isometry": isometry_residual(a, d),
            "dev_equivariance": equivariance_residual(developing_map(a), a, d),
            "curvature_certificate": _scalar(certify_curvature(a, n=100, seed=run.seed)),
        })
        r0 = 0.1
        exact = area_annulus_exact(a, r0)
        run.add_all({"area_annulus": _scalar(abs(exact - area_annulus_quadrature(a, r0)) / exact)})

    run.guarded("cone", cone)


def _euclid_families(run: _Run):
    u, d = run.ex.potential, run.domain

    def euclid():
        run.add_all(immersion_identity_checks(u, d))
        if u.deck_invariant(d):
            run.add_all(equivariance_checks(u, d))
        else:
            run.report.probes["equivariance"] = "skipped: potential is not invariant under theta -> theta + 2 pi"
        X, Y = d.grid()
        A = codazzi_from_potential(u)
        lo, _, _ = L.sym_eig(A.values(X, Y), u.metric.values(X, Y))
        run.add_all({"b_positivity": ResidualStats.from_values(np.maximum(-lo, 0.0))})
        pm = projection_metric(u, d)
        run.add_all({"projection_sandwich": _scalar(max(-pm["sandwich_margin"], 0.0))})
        run.report.probes["projection"] = {"C": pm["C"], "finite": bool(np.isfinite(pm["C"])),
                                           "sandwich_margin": pm["sandwich_margin"], "min_dev3": pm["min_dev3"]}

    def recovery():
        rd = ChartDomain.logpolar(RECOVERY_DOMAIN["t_min"], RECOVERY_DOMAIN["t_max"], RECOVERY_DOMAIN["shape"],
                                  theta_max=RECOVERY_DOMAIN["theta_max"])
        rt = roundtrip_potential(u, rd)
        run.add_all({"roundtrip_A": _scalar(rt["roundtrip_A"])})
        run.report.probes["recovery"] = {"method": "spectral", "grid": list(rd.shape),
                                         "equation_misfit": rt["equation_misfit"], "off_kernel": rt["off_kernel"],
                                         "kernel_dim": rt["kernel_dim"]}

    run.guarded("euclid", euclid)
    run.guarded("recovery", recovery)
    if "probes" in run.families:
        lim = puncture_limit_check(u)
        run.report.probes["puncture_limit"] = ProbeReport("puncture_limit", lim, passed=lim["monotone"],
                                                          inconclusive=lim["inconclusive"]).to_dict()


def _revolution_family(run: _Run):
    rev, d = run.ex.revolution, run.domain

    def revolution():
        X, Y = d.grid()
        g1 = rev.g1_conformal()
        bv = run.pair.b.values(X, Y)
        S = rev.shape_operator_conformal(X)
        run.add_all({
            "shape_operator_b": ResidualStats.from_values(L.norm_11(L.sub(bv, S), g1.values(X, Y))),
            "first_form_curvature": ResidualStats.from_values(gauss_curvature_jets(g1.jets(X, Y, 2)).value - 1),
        })
        qd = run.cache.get("qd")
        if qd is not None:
            hq = qd.complex_values(X, Y)
            run.add_all({"hq_constant": ResidualStats.from_values(np.abs(hq - rev.hq_constant()))})
            run.add_all(hq_modulus_check(qd, d))
        s = np.linspace(-rev.s_max, rev.s_max, 9)
        quad = profile_height(rev.c, s)
        halving = np.array([profile_height_halving(rev.c, v) for v in s])
        run.add_all({"profile_quadrature": ResidualStats.from_values(quad - halving)})
        Bn = L.norm_11(build_GB(run.pair).B.values(X, Y), g1.values(X, Y))
        run.report.probes["max_B_norm"] = float(np.max(Bn))

    run.guarded("revolution", revolution)
    if rev.has_cone_tips and "probes" in run.families:
        def probes():
            cone_pair = rev.pair((64, 128))
            rep = max_principle_probe(build_GB(cone_pair), cone_pair.domain)
            run.report.probes["max_principle"] = rep.to_dict()
            run.report.probes["cone_angles"] = rev.cone_angles()

        run.guarded("probes", probes)


def run_suite(example: Example | str, grid=None, backend: str | None = None, h=None, tol_profile: str | None = None,
              seed: int = 0, timing: bool = False, families=FAMILIES) -> ResidualReport:
    """Run every applicable residual family of ``example``.

    Deterministic given (example, grid, backend, h, seed).  ``wall_ms`` is
    recorded only when ``timing`` is set, so reports stay byte-identical.
    """
    ex = make_example(example) if isinstance(example, str) else example
    backend = backend or ex.backend
    if backend not in ("analytic", "fd"):
        raise ConfigurationError(f"unknown backend {backend!r}")
    profile = tol_profile or default_profile(backend)
    domain = ex.domain if grid is None else ex.domain.with_shape(tuple(grid))
    if backend == "fd" and h is None:
        h = domain.spacing
    report = ResidualReport(example=ex.label, params=dict(ex.params), grid=list(domain.shape), backend=backend,
                            tol_profile=profile)
    report.probes["domain"] = domain.to_dict()
    if ex.declared_failures:
        report.probes["declared_failures"] = list(ex.declared_failures)
    t0 = time.perf_counter()
    run = _Run(ex, domain, backend, h, profile, seed, report, tuple(families))
    if ex.make_pair is not None:
        _pair_families(run)
    if ex.cone_alpha is not None and ex.potential is None:
        _cone_family(run)
    if ex.potential is not None:
        _euclid_families(run)
    if ex.revolution is not None:
        _revolution_family(run)
    if timing:
        report.wall_ms = (time.perf_counter() - t0) * 1e3
    return report


def expected_outcome(ex: Example, report: ResidualReport) -> bool:
    """Positive examples must pass; negative controls must fail on every declared name."""
    if not ex.declared_failures:
        return report.passed
    return set(ex.declared_failures) <= set(report.failed_names)


# convergence ------------------------------------------------------------------------

def fit_order(hs, values) -> float:
    """Least-squares slope of log(values) against log(hs)."""
    hs, values = np.asarray(hs, float), np.asarray(values, float)
    return float(np.polyfit(np.log(hs), np.log(values), 1)[0])


def converge_study(example: Example | str, names, ladder, backend: str = "fd", h=None) -> dict:
    """Order estimates for residual ``names`` over the grid ``ladder``.

    The mesh size is the larger of the two spacings.  A residual whose max does
    not decrease monotonically under refinement is flagged.
    """
    ex = make_example(example) if isinstance(example, str) else example
    names = [names] if isinstance(names, str) else list(names)
    if len(ladder) < 3:
        raise ValueError("a convergence study needs at least 3 grids")
    fams = {FAMILY_OF.get(n, None) for n in names}
    families = FAMILIES if None in fams else tuple(fams)
    hs, rows = [], []
    for shape in ladder:
        rep = run_suite(ex, grid=shape, backend=backend, h=h, families=families)
        hs.append(max(ex.domain.with_shape(tuple(shape)).spacing))
        rows.append({n: (rep.residuals[n].max if n in rep.residuals else float("nan")) for n in names})
    out = {"example": ex.label, "backend": backend, "grids": [list(s) for s in ladder], "h": hs, "residuals": {}}
    for n in names:
        vals = [r[n] for r in rows]
        finite = all(np.isfinite(v) and v > 0 for v in vals)
        decreasing = finite and all(b < a for a, b in zip(vals, vals[1:]))
        out["residuals"][n] = {
            "max": vals,
            "order": fit_order(hs, vals) if finite else float("nan"),
            "warning": None if decreasing else "residual does not decrease under refinement",
        }
    return out
