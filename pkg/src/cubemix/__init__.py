"""Mixtures of subcubes and product distributions over the Boolean cube.

The package implements a moment-method learning stack: exact and empirical
multilinear moment oracles, dense L-infinity regression kernels, the
quasipolynomial subcube learner, the gridding-based product-mixture learner,
recursive sampling trees with Scheffe selection, moment-matching hard
instances for statistical-query lower bounds, and stochastic decision tree
reductions.  Brute-force oracles (probability tables, total variation
distance) back every learner at desk scale.
"""

from .config import LearnConfig, ToleranceError
from .errors import (
    BruteForceCapError,
    CubemixError,
    InsufficientSamplesError,
    InvalidModelError,
    ZeroProbabilityError,
)
from .models import (
    ProductMixture,
    SubcubeMixture,
    collapse_rank,
    condition_on,
    exact_moment,
    pdf_exact,
    sample,
)
from .oracles import EmpiricalOracle, ExactOracle, MomentOracle, empirical_moment
from .bruteforce import prob_table, tvd_bruteforce

__all__ = [
    "BruteForceCapError",
    "CubemixError",
    "EmpiricalOracle",
    "ExactOracle",
    "InsufficientSamplesError",
    "InvalidModelError",
    "LearnConfig",
    "MomentOracle",
    "ProductMixture",
    "SubcubeMixture",
    "ToleranceError",
    "ZeroProbabilityError",
    "collapse_rank",
    "condition_on",
    "empirical_moment",
    "exact_moment",
    "pdf_exact",
    "prob_table",
    "sample",
    "tvd_bruteforce",
]

__version__ = "0.1.0"
