"""Numerical checks for minimal Lagrangian maps between spherical cone metrics.

Modules:

* ``jets``, ``linalg2``, ``chart``: Taylor jets, 2x2 tensor algebra, and chart
  calculus (Christoffel symbols, curvature, Laplace-Beltrami, Codazzi).
* ``cone``: spherical cone metrics, developing maps, equivariance.
* ``mlmap``: the tensor b of a Lagrangian pair, the (G, B) pair, chi, and the
  maximum-principle probe.
* ``euclid``: potentials, the immersions sigma and varsigma, potential recovery.
* ``hopf``: the quadratic differential of (G, B) and its identities.
* ``revolution``, ``registry``, ``suite``, ``cli``: examples and the runner.
"""

from .chart import ChartDomain, ChartMap, MetricField, ScalarField, Tensor11Field
from .mlmap import GBpair, LagrangianPair, build_GB
from .registry import make_example
from .report import ResidualReport, ResidualStats
from .suite import converge_study, run_suite

__all__ = [
    "ChartDomain", "ChartMap", "MetricField", "ScalarField", "Tensor11Field",
    "GBpair", "LagrangianPair", "build_GB", "make_example",
    "ResidualReport", "ResidualStats", "converge_study", "run_suite",
]
__version__ = "0.1.0"
