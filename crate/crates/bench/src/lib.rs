//! Shared fixtures for the pipeline benchmarks.

use diffnet_core::{
    CombiningRule, ErrorModel, NodeProfile, SpatialCorrelation, Topology, TrueParameter,
};

/// Connected 7-node geometric graph at the usual scale.
pub fn topology7() -> Topology {
    Topology::random_geometric(7, 100.0, 50.0, 22).expect("valid parameters")
}

/// Noise variances spanning [1e-6, 1e-2] on a log scale.
pub fn profiles7() -> Vec<NodeProfile> {
    (0..7)
        .map(|k| {
            NodeProfile::new(0.01, 1.0, 10f64.powf(-6.0 + 4.0 * k as f64 / 6.0))
                .expect("valid profile")
        })
        .collect()
}

pub fn standard_pieces() -> (
    Topology,
    Vec<NodeProfile>,
    SpatialCorrelation,
    TrueParameter,
    CombiningRule,
    ErrorModel,
) {
    let topo = topology7();
    let profiles = profiles7();
    let corr = SpatialCorrelation::power_law(0.5).expect("valid rho");
    let w_o = TrueParameter::normalized_ones(8).expect("valid M");
    let rule = CombiningRule::RelativeVariance;
    let model = ErrorModel::uniform(&topo, 0.3).expect("valid p");
    (topo, profiles, corr, w_o, rule, model)
}
