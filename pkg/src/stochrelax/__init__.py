"""Stochastic relaxation of pseudo-Boolean functions over exponential families.

The package optimizes E_theta[f] for sparse multilinear f on {-1,+1}^n by
natural-gradient descent (exact or sampled) and by estimation-of-distribution
loops, and carries the closed-form companions used to verify it: Boolean
moment generating functions, the binomial family in dual coordinates, and
Orlicz-space scale functionals.

Quick start::

    import stochrelax as sr

    f = sr.registry_build("onemax", n=10).f
    basis = sr.MonomialBasis.singletons(10)
    trace = sr.exact_descent_run(f, basis, learning_rate=0.5, max_iters=200)
    print(trace.final.e_f_exact)   # ~10

The ``stochrelax`` console script exposes the benchmark harness and the
verification demo subcommands.
"""

from .binomial import (
    BinomialModel,
    boundary_limit_check,
    bregman_divergence,
    density_bregman,
    density_exp,
    density_std,
    eta_from_theta,
    log_density_bregman,
    log_density_exp,
    log_density_std,
    psi,
    psi_star,
    theta_from_eta,
)
from .expfam import (
    ExactModel,
    FiniteDensity,
    MonomialBasis,
    basis_from_text,
    basis_to_text,
    density,
    expectation,
    fisher_information,
    gibbs_sampler,
    hilbert_transport,
    log_partition,
    mean_params,
    sr_gradient_exact,
)
from .optim import (
    EDAConfig,
    Population,
    RunTrace,
    SNGDConfig,
    TraceRecord,
    child_seed,
    eda_run,
    empirical_fisher,
    empirical_sr_gradient,
    exact_descent_run,
    fit_independence_model,
    fit_moment_matching,
    natural_gradient_solve,
    select_truncation,
    sngd_run,
    sngd_step,
    statistics_matrix,
)
from .orlicz import (
    GammaTailFamily,
    NormalQuadratic,
    PhiExpectationFunctional,
    boolean_phi_functional,
    gamma_tail_C,
    gamma_tail_phi_expectation,
    gamma_tail_phi_functional,
    normal_quadratic_mgf,
    normal_quadratic_phi_expectation,
    normal_quadratic_phi_functional,
    orlicz_norm,
    phi,
)
from .problems import ProblemInstance, registry_build
from .walsh import (
    MultiIndex,
    PseudoBooleanFunction,
    SubsetFamily,
    evaluate,
    from_text,
    gf2_constraint_sets,
    mask_from_vars,
    mgf_uniform,
    phi_expectation_uniform,
    synthesize,
    to_text,
    vars_from_mask,
    walsh_transform,
)

__version__ = "0.1.0"
