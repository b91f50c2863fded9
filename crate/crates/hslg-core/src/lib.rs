//! Monte Carlo laboratory for the half-space log-gamma polymer, its
//! soft-constrained two-walk representation, and the limiting two-layer
//! Markov chain.
//!
//! The crate is organized bottom-up:
//!
//! - [`rng`]: seeded, splittable random streams and deterministic parallel
//!   replica folds (results never depend on thread scheduling);
//! - [`numeric`]: log-sum-exp, quantized bit-exact summation, and tabulated
//!   inverse CDFs;
//! - [`special`]: log-gamma, digamma, trigamma, and related CDFs;
//! - [`quad`]: adaptive quadrature used by tests and density tabulation;
//! - [`distributions`]: model parameters and the increment/start laws
//!   (f_θ, g_α, inverse-gamma edge weights);
//! - [`polymer`]: exact log-partition recursion for the half-space polymer
//!   and the stationary-increment evolution;
//! - [`softwalks`]: free two-walk sampling with soft non-crossing weights,
//!   the prefix/suffix weight factorization, and diffusive-limit checks;
//! - [`vfunction`]: the boundary correction function V via common-random-
//!   number ratio estimation, with tabulation and interpolation;
//! - [`limitchain`]: the limiting two-layer chain — importance sampling
//!   from prefix weights and the sequential transition-density sampler;
//! - [`gibbs`]: colored-edge Gibbs domains, exact heat-bath sweeps,
//!   monotone coupling, and the interacting-random-walk samplers;
//! - [`stats`]: weighted empirical distributions, KS machinery, effective
//!   sample size, bootstrap intervals, and split-R̂;
//! - [`harness`]: stored experiment configurations, reproducible run
//!   directories, and the acceptance criteria behind `verify-all`.

pub mod distributions;
pub mod gibbs;
pub mod harness;
pub mod limitchain;
pub mod numeric;
pub mod polymer;
pub mod quad;
pub mod rng;
pub mod softwalks;
pub mod special;
pub mod stats;
pub mod vfunction;

pub use distributions::{ParamError, PolymerParams};
pub use gibbs::{
    build_irw, build_mirw, build_phi, build_phi_with_floor, build_rect, build_upsilon,
    conditional_logdensity, heat_bath_sweep, irw_sample, run_coupled_mcmc, run_mcmc,
    wprw_importance_sample, DomainError, EdgeColor, GibbsDomain, GibbsError, GibbsState, IrwRun,
    Vertex,
};
pub use harness::{
    criteria::{CriterionVerdict, Profile},
    ecdf_points, load_required_table, ExperimentConfig, HarnessError, PlotSpec, RunResult,
    RunWriter,
};
pub use limitchain::{
    eval_p0v, eval_pv, sample_lg_prefix, sample_sequential_pv, ChainError, ChainPrefix,
    Provenance, WeightedPrefixes,
};
pub use polymer::{
    evolve_stationary, increments_from_disorder, layer_from_disorder, log_partition_table,
    path_sum, simulate_increments, InitialData, LogZLayer,
};
pub use rng::{stream_for, Gen, RngStream};
pub use softwalks::{
    diffusive_check, estimate_ew, log_w, log_w_hat, log_w_split, nonintersect_prob, sample_free,
    sigma_sq, soft_free_collect, soft_free_sample, DiffusiveReport, EwEstimate, InitCondition,
    InitError, TwoWalkPath, WeightedValues,
};
pub use stats::{
    bootstrap_ci, ess, ks_statistic, ks_two_sample, ks_vs_cdf, split_rhat, wasserstein1,
    EmpiricalDistribution, KsOutcome,
};
pub use vfunction::{
    build_v_table, default_grid, estimate_v, estimate_v_from, v_interpolate, VError, VEstimate,
    VTable,
};
