"""Acceptance suite: one test per primary criterion, each printing a pass/fail line."""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from conelag.cone import certify_curvature, cover_domain, developing_map, equivariance_residual, isometry_residual
from conelag.euclid import Potential, immersion_identity_checks, projection_metric, roundtrip_potential
from conelag.hopf import hopf_residuals
from conelag.mlmap import build_GB, identity_residuals, inverse_symmetry_check, lagrangian_residuals, max_principle_probe
from conelag.registry import DEFAULT_POTENTIAL, DEFAULT_SUITE, make_example
from conelag.revolution import RevolutionK1
from conelag.suite import RECOVERY_DOMAIN, fit_order, run_suite
from conelag.chart import ChartDomain

LADDER = [(32, 32), (64, 64), (128, 128), (256, 256)]
POSITIVE = [s for s in DEFAULT_SUITE if not make_example(s).negative_control]


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def revolution_ladder():
    """Finite-difference residuals of revolution(c=0.6) on the square grid ladder, with timings."""
    ex = make_example("revolution")
    rows = []
    for shape in LADDER:
        d = ex.domain.with_shape(shape)
        t0 = time.perf_counter()
        pair = ex.pair(shape)
        lag = lagrangian_residuals(pair, "fd", None, d)
        seconds = time.perf_counter() - t0
        ident = identity_residuals(build_GB(pair), "fd", None, d)
        rows.append({"h": max(d.spacing), "codazzi_b": lag["codazzi_b"].max,
                     "laplacian_identity": ident["laplacian_identity"].max, "seconds": seconds})
    return rows


def test_curvature_one_certificate(verdict):
    """Spherical cone metrics have curvature 1 at random points."""
    alphas = (0.3, 0.5, 0.7, 1.3, 1.5, 2.4)
    t0 = time.perf_counter()
    worst = max(certify_curvature(a, n=100, seed=0) for a in alphas)
    dt = time.perf_counter() - t0
    verdict(1, worst < 1e-8 and dt < 1.0, f"max |K - 1| = {worst:.2e} over alpha in {alphas}; {dt:.2f} s")


def test_developing_map_isometry_and_equivariance(verdict):
    """dev pulls the round metric back to the cone metric and intertwines the deck action."""
    t0 = time.perf_counter()
    iso, eqv = 0.0, 0.0
    for a in (0.5, 0.7, 1.3):
        d = cover_domain(a, (64, 128))
        iso = max(iso, isometry_residual(a, d).max)
        eqv = max(eqv, equivariance_residual(developing_map(a), a, d).max)
    dt = time.perf_counter() - t0
    verdict(2, iso < 1e-9 and eqv < 1e-9 and dt < 2.0,
            f"isometry {iso:.2e}, equivariance {eqv:.2e}; {dt:.2f} s")


def test_minimal_lagrangian_certificate(verdict, revolution_ladder):
    """revolution(c=0.6): det b = 1 and the Codazzi residual of b converges at order 2."""
    ex = make_example("revolution")
    det = lagrangian_residuals(ex.pair(), domain=ex.domain)["det_b_minus_1"].max
    hs = [r["h"] for r in revolution_ladder]
    vals = [r["codazzi_b"] for r in revolution_ladder]
    order = fit_order(hs, vals)
    slowest = max(r["seconds"] for r in revolution_ladder)
    ok = det < 1e-8 and abs(order - 2.0) <= 0.3 and slowest < 10.0
    verdict(3, ok, f"|det b - 1| = {det:.2e}; codazzi_b order {order:.3f} (maxima {', '.join(f'{v:.2e}' for v in vals)});"
                   f" {slowest:.2f} s at 256x256")


def test_GB_algebra_on_positive_examples(verdict):
    """Algebraic (G, B) identities and the inverse symmetry on every positive example with a pair."""
    names = ("trace_B", "roundtrip_b", "gauss_identity", "trace_identity", "inverse_G", "inverse_B")
    worst, where = 0.0, ""
    for entry in POSITIVE:
        ex = make_example(entry)
        if ex.make_pair is None:
            continue
        pair = ex.pair()
        res = identity_residuals(build_GB(pair), domain=ex.domain)
        res.update(inverse_symmetry_check(pair, ex.domain))
        for n in names:
            if res[n].max > worst:
                worst, where = res[n].max, f"{n} on {ex.label}"
    verdict(4, worst < 1e-9, f"largest algebraic residual {worst:.2e} ({where})")


def test_laplacian_identity(verdict, revolution_ladder):
    """|Delta^G chi - K_G| converges at order 2 with max < 1e-4 at 256x256."""
    hs = [r["h"] for r in revolution_ladder]
    vals = [r["laplacian_identity"] for r in revolution_ladder]
    order = fit_order(hs, vals)
    ok = abs(order - 2.0) <= 0.3 and vals[-1] < 1e-4
    verdict(5, ok, f"order {order:.3f}; max at 256x256 = {vals[-1]:.2e}")


def test_maximum_principle(verdict):
    """chi < 0 on the cone-end annulus and its interior max stays below the boundary max."""
    rev = RevolutionK1(0.6)
    pair = rev.pair((128, 256))
    rep = max_principle_probe(build_GB(pair), pair.domain, epsilons=(1e-2, 1e-3), tol=1e-6)
    gaps = {k: v["gap"] for k, v in rep.data["by_epsilon"].items()}
    ok = rep.passed and rep.data["chi_negative"] and all(g <= 1e-6 for g in gaps.values())
    verdict(6, ok, f"max chi = {rep.data['chi_max']:.3e}; interior - boundary gaps {gaps}")


def test_euclidean_realization(verdict):
    """Immersion identities, potential recovery and the projection sandwich for three potentials."""
    alpha = 0.6
    d = cover_domain(alpha, (48, 96), decks=3, t_min=-8.0, t_max=-0.5)
    rd = ChartDomain.logpolar(RECOVERY_DOMAIN["t_min"], RECOVERY_DOMAIN["t_max"], RECOVERY_DOMAIN["shape"],
                              theta_max=RECOVERY_DOMAIN["theta_max"])
    four = ("sigma_normal", "sigma_first_form", "sigma_shape", "varsigma_first_form")
    worst, rt_worst, sandwich = 0.0, 0.0, True
    for expr in ("2", "1+0.3*dev1", DEFAULT_POTENTIAL):
        u = Potential(expr, alpha)
        res = immersion_identity_checks(u, d)
        worst = max([worst] + [res[n].max for n in four])
        rt_worst = max(rt_worst, roundtrip_potential(u, rd)["roundtrip_A"])
        pm = projection_metric(u, d)
        sandwich &= bool(np.isfinite(pm["C"]) and pm["sandwich_ok"])
    ok = worst < 1e-8 and rt_worst < 1e-6 and sandwich
    verdict(7, ok, f"identities {worst:.2e}; recovery round trip {rt_worst:.2e}; sandwich with finite C: {sandwich}")


def test_hopf_layer(verdict):
    """Holomorphy on positive examples, its failure on the perturbed control, and the flat-model identities."""
    cr_pos, flat_model, algebra = 0.0, 0.0, 0.0
    for entry in POSITIVE:
        ex = make_example(entry)
        if ex.hopf is None:
            continue
        res, _ = hopf_residuals(ex.pair(), ex.domain, strict=True, backend="analytic")
        cr_pos = max(cr_pos, res["cauchy_riemann"].max)
        for n in ("hopf_reconstruction", "chi0_gradient", "chi0_harmonic", "conformal_chain", "conformal_curvature"):
            if not res[n].empty:
                flat_model = max(flat_model, res[n].max)
        for n in ("decomposition_g1", "decomposition_g2", "conformal_factor_identity", "cayley_hamilton"):
            algebra = max(algebra, res[n].max)
    neg = make_example("perturbed")
    res, _ = hopf_residuals(neg.pair(), neg.domain, strict=False, backend="analytic")
    cr_neg = res["cauchy_riemann"].max
    ok = cr_pos < 1e-6 and cr_neg > 1e-2 and flat_model < 1e-6 and algebra < 1e-9
    verdict(8, ok, f"Cauchy-Riemann positive {cr_pos:.2e}, perturbed {cr_neg:.2e}; chi0 and conformal identities "
                   f"{flat_model:.2e}; decompositions {algebra:.2e}")


def test_cone_angle_equality(verdict):
    """First and third fundamental forms both have cone angle 2 pi c at the axis."""
    errs = {}
    for c in (0.4, 0.6, 0.8):
        ang = RevolutionK1(c).cone_angles()
        target = ang["target"]
        errs[c] = (abs(ang["first_form"][-1] - target), abs(ang["third_form"][-1] - target))
    ok = all(e1 < 1e-4 and e3 < 1e-4 for e1, e3 in errs.values())
    detail = "; ".join(f"c={c}: |I - 2 pi c| = {e1:.1e}, |III - 2 pi c| = {e3:.1e}" for c, (e1, e3) in errs.items())
    verdict(9, ok, detail)


def test_engineering(verdict, tmp_path):
    """Full default suite under a minute, byte-deterministic, negative controls exit 1 with declared names."""
    outs, times, codes = [], [], []
    for k in range(2):
        path = tmp_path / f"suite{k}.json"
        t0 = time.perf_counter()
        proc = subprocess.run([sys.executable, "-m", "conelag", "verify", "--out", str(path)],
                              capture_output=True, text=True)
        times.append(time.perf_counter() - t0)
        codes.append(proc.returncode)
        outs.append(path.read_bytes())
    doc = json.loads(outs[0])
    neg = [r for r in doc["reports"] if r["example"].startswith("perturbed")]
    declared = all(set(r["probes"]["declared_failures"]) <= set(r["failed"]) for r in neg)
    positives_pass = all(r["pass"] for r in doc["reports"] if not r["example"].startswith("perturbed"))
    ok = times[0] < 60 and outs[0] == outs[1] and codes == [1, 1] and declared and positives_pass and neg
    verdict(10, ok, f"{len(doc['reports'])} examples in {times[0]:.1f} s; identical bytes: {outs[0] == outs[1]}; "
                    f"exit codes {codes}; declared failures flagged: {declared}")
