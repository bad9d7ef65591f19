"""Stochastic gradient Langevin dynamics with checkable local regularity.

The package bundles the sampler, its worked gradient models, a numerical
verifier for the declared model conditions, the explicit constants of the
stability and convergence bounds, empirical transport distances, and a small
experiment harness with a CLI.
"""

__version__ = "0.1.0"

from .chain import (
    ChainConfig,
    ChainDivergenceError,
    ChainOutput,
    run_chain,
    run_ensemble,
    sgld_step,
    terminal_states,
)
from .constants import (
    BudgetResult,
    ConstantsReport,
    budget,
    compute_constants_report,
    compute_lambda_max,
)
from .models import (
    AssumptionConstants,
    GaussianLocationModel,
    GradientModel,
    LinearRegressorModel,
    LogisticDataset,
    LogisticPosteriorModel,
    MiniBatch,
    MixturePriorModel,
    VariationalMixtureModel,
    make_model,
)
from .verify import (
    ModelMoments,
    VerificationReport,
    estimate_moments,
    unbiasedness_test,
    verify_assumptions,
)
from .wasserstein import (
    DistanceEstimate,
    EmpiricalMeasure,
    sliced_wasserstein,
    w12_functional,
    wasserstein_1d,
    wasserstein_exact,
)

__all__ = [name for name in dir() if not name.startswith("_")]
