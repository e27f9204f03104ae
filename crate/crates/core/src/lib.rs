//! Diffusion LMS estimation over networks with random transmission
//! failures: a Monte Carlo simulation engine and the matching closed-form
//! steady-state analysis, stability checks and MAC-collision error model.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! topology -> failures -> combiners -> { theory | montecarlo } -> curves
//!              ^                            ^
//!              mac (collision model)        stability (bounds, radii)
//! ```
//!
//! with every stochastic component seeded explicitly, so simulation and
//! theory can be cross-checked reproducibly on any configuration.

pub mod combiners;
pub mod curve;
mod error;
pub mod failures;
pub mod mac;
pub mod montecarlo;
pub mod rng;
pub mod stability;
pub mod theory;
pub mod topology;

pub use combiners::{effective_degrees, weights, CombiningRule, WeightRow};
pub use curve::{db, steady_state_estimate, CurveSource, LearningCurve, SteadyStateEstimate};
pub use error::{Error, Result};
pub use failures::{sample_success_sets, ErrorModel, SuccessSets};
pub use mac::{
    bianchi_fixed_point, mac_error_model, mac_node_results, simulate_backoff, BackoffSim,
    MacNodeResult, MacParams, MacSimResult,
};
pub use montecarlo::{run_diffusion, sample_regressors, CorrelatedSampler, RunOptions};
pub use stability::{mean_bounds, meansquare_bounds, BoundCheck, StabilityReport};
pub use topology::Topology;
pub use theory::{
    build_moment_system, mean_matrix, mean_trajectory, scalar_coefficients, spectral_radius,
    steady_state_msd, transient_theory_curve, weight_moments, MomentMode, MomentSystem, MsdReport,
    NodeProfile, PairOrdering, ScalarCoefficients, SpatialCorrelation, TrueParameter,
    WeightMoments,
};
