"""Slow-fast jump-diffusion simulation and averaging toolkit.

Simulates scale-separated SDE systems driven by Wiener processes and
compound-Poisson jump measures with monotone, polynomially growing
coefficients; estimates frozen-equation invariant measures; builds
averaged equations; evaluates the Poisson-equation corrector; and
verifies strong order 1/2 and weak order 1 convergence empirically.
"""

from .errors import (
    BlowUpError,
    ConfigurationError,
    DecayFitError,
    MslevyError,
    NoiseDominatedError,
    TableValidationError,
)
from .ergodic import (
    AveragedTable,
    ExactAveraged,
    InvariantConfig,
    InvariantSample,
    averaged_diffusion,
    averaged_drift,
    build_averaged_table,
    convergence_to_average,
    ergodicity_decay,
    estimate_invariant_measure,
    load_averaged_table,
    poisson_cell,
    psd_sqrt,
    save_averaged_table,
)
from .estimate import (
    DeltaPolicy,
    ErrorReport,
    TestFunction,
    fast_moment_sweep,
    fit_order,
    make_test_function,
    mc_mean_ci,
    strong_error,
    weak_error,
)
from .integrate import (
    PathSample,
    StepperConfig,
    simulate_averaged_weak,
    simulate_frozen,
    simulate_pair_coupled,
    simulate_slow_fast,
)
from .model import (
    AssumptionParams,
    ModelSpec,
    check_fast_dissipativity,
    check_growth,
    check_monotonicity,
    check_strong_monotonicity_fast,
    example_2_7,
    example_2_8,
    get_model,
    model_from_config,
    scalar_model,
)
from .rng import (
    JumpMeasureSpec,
    PointMass,
    RngStream,
    TruncatedGaussian,
    Uniform,
    compensator_rate,
    default_jump_measure,
    jump_expectation,
    sample_jump_size,
    sample_jump_times,
)

__version__ = "0.1.0"
