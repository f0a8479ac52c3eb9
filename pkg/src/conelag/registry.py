"""Example factory: named, parametrized test cases for the residual suite."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jets as J
from .chart import ChartDomain, ChartMap, MetricField
from .cone import cover_domain, spherical_cone_metric
from .euclid import Potential
from .mlmap import GBpair, LagrangianPair, build_GB
from .revolution import RevolutionK1

DEFAULT_POTENTIAL = "1+0.1*dev3**2+0.05*dev1*dev2"


class UnknownExampleError(KeyError):
    pass


class ExampleParamError(ValueError):
    pass


@dataclass
class Example:
    """A built example and everything the suite needs to check it.

    ``make_pair(domain)`` returns the Lagrangian pair on a domain of the
    example's chart; ``hopf`` is "strict" when the chart is conformal for G,
    "report" when the chart (2,0)-part is only reported, or None.
    """

    name: str
    params: dict
    domain: ChartDomain
    backend: str = "analytic"
    make_pair: Callable[[ChartDomain], LagrangianPair] | None = None
    hopf: str | None = None
    potential: Potential | None = None
    revolution: RevolutionK1 | None = None
    cone_alpha: float | None = None
    declared_failures: tuple[str, ...] = ()
    extras: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))

    @property
    def negative_control(self) -> bool:
        return bool(self.declared_failures)

    def pair(self, shape=None) -> LagrangianPair | None:
        if self.make_pair is None:
            return None
        d = self.domain if shape is None else self.domain.with_shape(shape)
        return self.make_pair(d)

    def GB(self, shape=None) -> GBpair | None:
        p = self.pair(shape)
        return None if p is None else build_GB(p)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


# builders -----------------------------------------------------------------------

def _identity(params):
    g = spherical_cone_metric(1.0, "z")
    dom = ChartDomain.rectangle(-1.0, 1.0, -1.0, 1.0, (64, 64))
    return Example("identity", params, dom,
                   make_pair=lambda d: LagrangianPair(g, g, ChartMap.identity(), d, name="identity"),
                   hopf="strict")


def _mobius(angle):
    a = 0.5 * float(angle)
    ca, sa = np.cos(a), np.sin(a)

    def fn(x, y):
        w = x + 1j * y
        r = (ca * w + sa) / (-sa * w + ca)
        if J.is_jet(r):
            return r.real, r.imag
        r = np.asarray(r)
        return r.real, r.imag

    return fn


def _sphere_rotation(params):
    angle = float(params.get("angle", 0.7))
    g = spherical_cone_metric(1.0, "z")
    phi = ChartMap(_mobius(angle), name=f"rotation({angle})",
                   inverse=ChartMap(_mobius(-angle), name=f"rotation({-angle})"))
    dom = ChartDomain.rectangle(-0.5, 0.5, -0.5, 0.5, (64, 64))
    return Example("sphere_rotation", {"angle": angle}, dom,
                   make_pair=lambda d: LagrangianPair(g, g, phi, d, name="sphere_rotation"), hopf="strict")


def _flat_stretch(params):
    k = float(params.get("k", 2.0))
    if not k > 0:
        raise ExampleParamError(f"flat_stretch needs k > 0, got {k}")
    r = np.sqrt(k)
    # g1 = diag(1/k, k) makes G conformal, so the chart also serves the Hopf layer
    g1 = MetricField(lambda x, y: ((1 / k + 0 * x, 0 * x), (0 * x, k + 0 * x)), name="g1")
    g2 = MetricField(lambda x, y: ((1 + 0 * x, 0 * x), (0 * x, 1 + 0 * x)), name="flat")
    phi = ChartMap(lambda x, y: (r * x, y / r), name="stretch",
                   inverse=ChartMap(lambda x, y: (x / r, r * y), name="stretch^-1"))
    dom = ChartDomain.rectangle(-1.0, 1.0, -1.0, 1.0, (32, 32))
    return Example("flat_stretch", {"k": k}, dom,
                   make_pair=lambda d: LagrangianPair(g1, g2, phi, d, name="flat_stretch"), hopf="strict")


def _cone_isometry(params):
    alpha = float(params.get("alpha", 0.7))
    psi = float(params.get("psi", 0.4))
    if not alpha > 0:
        raise ExampleParamError(f"cone_isometry needs alpha > 0, got {alpha}")
    g = spherical_cone_metric(alpha, "logpolar")
    # z -> e^{i psi} z is theta -> theta + psi in log-polar coordinates
    phi = ChartMap(lambda t, th: (t + 0 * th, th + psi), name=f"rotate({psi})",
                   inverse=ChartMap(lambda t, th: (t + 0 * th, th - psi), name=f"rotate({-psi})"))
    # coefficient floor 1e-2: below it the curvature of the lifted metric loses
    # digits to cancellation (absolute error ~ eps / coefficient^2)
    dom = cover_domain(alpha, (64, 128), decks=1, coeff_floor=1e-2)
    return Example("cone_isometry", {"alpha": alpha, "psi": psi}, dom,
                   make_pair=lambda d: LagrangianPair(g, g, phi, d, name="cone_isometry"),
                   hopf="strict", cone_alpha=alpha)


def _potential(params):
    expr = str(params.get("u", DEFAULT_POTENTIAL))
    alpha = float(params.get("alpha", 0.6))
    try:
        u = Potential(expr, alpha)
    except ValueError as exc:
        raise ExampleParamError(str(exc)) from None
    dom = cover_domain(alpha, (48, 96), decks=3, t_min=-8.0, t_max=-0.5)
    return Example("potential", {"u": expr, "alpha": alpha}, dom, potential=u, cone_alpha=alpha)


def _revolution(params):
    c = float(params.get("c", 0.6))
    if not c > 0:
        raise ExampleParamError(f"revolution needs c > 0, got {c}")
    rev = RevolutionK1(c)
    shape = (128, 256) if c != 1.0 else (64, 128)
    dom = rev.conformal_domain(shape)
    return Example("revolution", {"c": c}, dom,
                   make_pair=lambda d: LagrangianPair(rev.g1_conformal(), rev.g3_conformal(), ChartMap.identity(),
                                                      d, name=f"revolution(c={c})"),
                   hopf="strict", revolution=rev)


def _perturbation(delta):
    return ChartMap(lambda x, y: (x + delta * J.sin(y), y + delta * J.sin(x)), name=f"perturb({delta})")


def _perturbed(params):
    params = dict(params)
    base_name = str(params.pop("base", "revolution"))
    delta = float(params.pop("delta", 0.05))
    if base_name == "perturbed" or base_name not in BUILDERS:
        raise ExampleParamError(f"cannot perturb {base_name!r}")
    base = BUILDERS[base_name](params)
    if base.make_pair is None:
        raise ExampleParamError(f"{base_name!r} has no Lagrangian pair to perturb")
    P = _perturbation(delta)

    def make_pair(d):
        p = base.make_pair(d)
        phi = p.phi

        def composed(x, y):
            q = P(x, y)
            return q if phi.is_identity else phi(*q)

        return LagrangianPair(p.g1, p.g2, ChartMap(composed, loss=phi.loss, name=f"{phi.name}*perturb"), d,
                              name=f"perturbed({p.name}, {delta})")

    out_params = {"base": base_name, "delta": delta}
    out_params.update(base.params)
    declared = ("codazzi_b", "cauchy_riemann") if base.hopf else ("codazzi_b",)
    return Example("perturbed", out_params, base.domain, make_pair=make_pair,
                   hopf="report" if base.hopf else None, declared_failures=declared)


BUILDERS: dict[str, Callable[[dict], Example]] = {
    "identity": _identity,
    "sphere_rotation": _sphere_rotation,
    "flat_stretch": _flat_stretch,
    "cone_isometry": _cone_isometry,
    "potential": _potential,
    "revolution": _revolution,
    "perturbed": _perturbed,
}

PARAM_KEYS = {
    "identity": (),
    "sphere_rotation": ("angle",),
    "flat_stretch": ("k",),
    "cone_isometry": ("alpha", "psi"),
    "potential": ("u", "alpha"),
    "revolution": ("c",),
    "perturbed": ("base", "delta", "c", "k", "angle", "alpha", "psi"),
}

# the full default suite run by ``verify`` without --example
DEFAULT_SUITE = (
    "identity",
    "sphere_rotation",
    "flat_stretch",
    "cone_isometry",
    "cone_isometry:alpha=1.3",
    "potential",
    "potential:u=1",
    "potential:u=1+0.3*dev1",
    "revolution",
    "revolution:c=1",
    "revolution:c=1.3",
    "perturbed",
)


def parse_example(entry: str) -> tuple[str, dict]:
    """'name:k=v,k2=v2' -> (name, {k: v}).  Values may contain commas (expressions)."""
    name, _, rest = entry.partition(":")
    name = name.strip()
    params = {}
    if rest.strip():
        for item in re.split(r",(?=\s*[A-Za-z_]\w*\s*=)", rest):
            key, eq, val = item.partition("=")
            if not eq:
                raise ExampleParamError(f"bad parameter {item!r} in {entry!r}; expected key=value")
            params[key.strip()] = val.strip()
    return name, params


def _coerce(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if k in ("u", "base"):
            out[k] = str(v)
            continue
        try:
            out[k] = float(v)
        except (TypeError, ValueError):
            raise ExampleParamError(f"parameter {k}={v!r} is not a number") from None
    return out


def make_example(name: str, params: dict | None = None) -> Example:
    """Build a registered example; ``name`` may carry inline parameters."""
    base, inline = parse_example(name)
    if base not in BUILDERS:
        raise UnknownExampleError(f"unknown example {base!r}; registered: {sorted(BUILDERS)}")
    merged = dict(inline)
    merged.update(params or {})
    unknown = set(merged) - set(PARAM_KEYS[base])
    if unknown:
        raise ExampleParamError(f"{base} does not take parameters {sorted(unknown)}; allowed: {list(PARAM_KEYS[base])}")
    return BUILDERS[base](_coerce(merged))


def registry_names() -> list[str]:
    return sorted(BUILDERS)
