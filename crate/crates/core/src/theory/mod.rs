//! Closed-form mean and mean-square analysis of diffusion LMS under random
//! transmission failures: scalar coefficients, failure-averaged weight
//! moments, the coupled pair-moment system, its steady state, and the
//! transient recursions.

mod coefficients;
mod moments;
mod pairs;
mod system;

pub use coefficients::{
    scalar_coefficients, validate_profiles, NodeProfile, ScalarCoefficients, SpatialCorrelation,
    TrueParameter,
};
pub use moments::{weight_moments, MomentMode, WeightMoments, EXACT_ENUMERATION_BITS};
pub use pairs::PairOrdering;
pub use system::{
    build_moment_system, mean_matrix, mean_trajectory, spectral_radius, steady_state_msd,
    transient_theory_curve, MeanRecursion, MomentSystem, MsdReport,
};
