"""Exact simulation and verification toolkit for stationary determinantal
point processes on Z and Z^d given by a spectral symbol f: T^d -> [0, 1].
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .symbol import (  # noqa: F401
    Constant,
    FourierTable,
    PiecewiseConstant,
    SpectralSymbol,
    TrigPolynomial,
    bernoulli_symbol,
    covariance,
    field_spectral_density,
    fourier_coeff,
    indicator,
    mean_density,
    riesz_constant_sq,
    sine_symbol,
    symbol_from_dict,
    trig_symbol,
)
from .kernel import (  # noqa: F401
    Box,
    Explicit,
    KernelWindow,
    build_kernel,
    correlation,
    cylinder_probability,
    exact_distribution,
    gap_probability,
    interval,
)
from .sampler import (  # noqa: F401
    Configuration,
    SampleBatch,
    derive_seed,
    empirical_covariance,
    empirical_density,
    sample,
    sample_batch,
)
from .inequalities import (  # noqa: F401
    IntPolynomial,
    WeightVector,
    absolute_pnorm_bound,
    empirical_pnorm,
    khintchine_constant,
    l2_norm_analytic,
    salem_littlewood_suite,
    subgaussian_margin,
    weighted_sum,
    weyl_max,
    weyl_sum,
)
from .structure import (  # noqa: F401
    RotationSystem,
    ergodic_average_pair,
    gap_presence_curve,
    max_gap,
    residue_histogram,
    sumset_coverage,
)
from .report import Check, ExperimentReport  # noqa: F401
