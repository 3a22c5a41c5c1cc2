"""Ornstein-Uhlenbeck diffusions with Markov switching.

Classification of the stationary law's tail regime from spectral
criteria, exact pathwise simulation, and Monte Carlo verification of the
closed-form quantities.
"""

__version__ = "0.1.0"

from .builtin import BUILTIN_MODELS, get_builtin
from .errors import (
    BracketFailureError,
    EigenFailureError,
    EmptySampleError,
    InsufficientTailError,
    InvalidHorizonError,
    InvalidOutputTimesError,
    MatrixRangeError,
    ModelFileError,
    ModelValidationError,
    MomentOrderError,
    NotErgodicError,
    NotExponentialRegimeError,
    NotGaussianRegimeError,
    NotTwoStateDegenerateError,
    OutOfDomainError,
    PoleError,
    SingularSolveError,
    SizeMismatchError,
    SwitchouError,
)
from .estimate import (
    DecayExperiment,
    DecayFit,
    EstimateSummary,
    MergeExperiment,
    composite_coupling_rate,
    empirical_wasserstein,
    estimate_gaussian_moment,
    estimate_laplace,
    estimate_moment,
    merge_coupling_experiment,
    stationary_horizon,
    survival_decay_rate,
    tail_index,
    wasserstein_decay_experiment,
)
from .model import (
    ChainQuantities,
    ModelSpec,
    build_model,
    chain_quantities,
    ergodicity_margin,
    load_model,
    model_from_dict,
    model_to_dict,
)
from .sim import (
    HittingSubchain,
    MergeCoupling,
    PathSample,
    couple_merge,
    couple_synchronous,
    generator_for,
    sample_Ix,
    sample_merge,
    sample_synchronous,
    sample_terminal,
    sample_values,
    simulate_Ix,
    simulate_hitting_subchain,
    simulate_path,
)
from .spectral import (
    EtaCurve,
    ExponentialStructure,
    Regime,
    RegimeReport,
    alpha_bar,
    classify,
    critical_laplace,
    eta,
    eta_curve,
    eta_derivative_at_zero,
    exponential_structure,
    feynman_kac_matrix,
    gaussian_bounds,
    kappa,
    laplace_of_Ix,
    m_matrix,
    p_v_matrix,
    spectral_radius,
    two_state_laplace,
)
