//! Combining rules: row-stochastic mixing weights over a realized success
//! set.
//!
//! Every rule produces nonnegative weights that sum to one over the success
//! set `S_k` for every realized failure pattern. Degree-based rules use the
//! closed degree `n_k = |N_k|`; the Metropolis and maximum-degree rules are
//! evaluated over the full neighborhood first and then renormalized over
//! `S_k`, which preserves the row-sum constraint that the mean-square
//! analysis requires.

use crate::error::{Error, Result};
use crate::topology::Topology;

/// The supported weight assignment policies.
#[derive(Debug, Clone, PartialEq)]
pub enum CombiningRule {
    /// `1/|S_k|` for every member.
    Uniform,
    /// Off-diagonal `1/N`, diagonal absorbing the remainder.
    MaximumDegree,
    /// Off-diagonal `1/max(n_k, n_l)`, diagonal absorbing the remainder.
    Metropolis,
    /// Weight proportional to the closed degree `n_l`.
    RelativeDegree,
    /// Weight proportional to the inverse noise variance `1/sigma_v2_l`.
    RelativeVariance,
    /// Weight proportional to the effective degree `n_l (1 - q_l)`, where
    /// `q_l` is the average loss probability experienced by node `l`.
    EnhancedRelativeDegree { q: Vec<f64> },
}

impl CombiningRule {
    /// Enhanced relative degree rule with a validated loss profile.
    ///
    /// Requires `0 <= q_l < 1` for every node: a loss probability of one
    /// would zero that node's effective degree unconditionally.
    pub fn enhanced_relative_degree(q: Vec<f64>) -> Result<Self> {
        for (k, &v) in q.iter().enumerate() {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "enhanced relative degree: q[{k}] = {v} outside [0,1)"
                )));
            }
        }
        Ok(CombiningRule::EnhancedRelativeDegree { q })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CombiningRule::Uniform => "uniform",
            CombiningRule::MaximumDegree => "maximum_degree",
            CombiningRule::Metropolis => "metropolis",
            CombiningRule::RelativeDegree => "relative_degree",
            CombiningRule::RelativeVariance => "relative_variance",
            CombiningRule::EnhancedRelativeDegree { .. } => "enhanced_relative_degree",
        }
    }
}

/// Effective degrees `n'_k = n_k (1 - q_k)`.
pub fn effective_degrees(topo: &Topology, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != topo.node_count() {
        return Err(Error::LengthMismatch {
            what: "loss probabilities q",
            expected: topo.node_count(),
            got: q.len(),
        });
    }
    for (k, &v) in q.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "loss probability q[{k}] = {v} outside [0,1]"
            )));
        }
    }
    Ok((0..topo.node_count())
        .map(|k| topo.closed_degree(k) as f64 * (1.0 - q[k]))
        .collect())
}

/// One row of combining weights: nonnegative, summing to one over `members`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub node: usize,
    pub members: Vec<usize>,
    pub weights: Vec<f64>,
}

impl WeightRow {
    /// Weight assigned to node `l` (zero outside the success set).
    pub fn weight_for(&self, l: usize) -> f64 {
        match self.members.iter().position(|&m| m == l) {
            Some(i) => self.weights[i],
            None => 0.0,
        }
    }

    /// Dense length-`n` row with zeros outside the success set.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut row = vec![0.0; n];
        for (&m, &w) in self.members.iter().zip(&self.weights) {
            row[m] = w;
        }
        row
    }
}

/// Compute the combining weights of node `k` over the success set `success`.
///
/// `success` must contain `k` and be a subset of the closed neighborhood
/// `N_k`. `noise_vars` is consulted only by the relative variance rule.
pub fn weights(
    rule: &CombiningRule,
    topo: &Topology,
    noise_vars: &[f64],
    k: usize,
    success: &[usize],
) -> Result<WeightRow> {
    let mut w = Vec::with_capacity(success.len());
    weights_into(rule, topo, noise_vars, k, success, &mut w)?;
    Ok(WeightRow {
        node: k,
        members: success.to_vec(),
        weights: w,
    })
}

/// Allocation-reusing core of [`weights`]; fills `out` parallel to `success`.
pub(crate) fn weights_into(
    rule: &CombiningRule,
    topo: &Topology,
    noise_vars: &[f64],
    k: usize,
    success: &[usize],
    out: &mut Vec<f64>,
) -> Result<()> {
    let n = topo.node_count();
    if k >= n {
        return Err(Error::NodeIndex { index: k, n });
    }
    if !success.contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "success set of node {k} does not contain the node itself"
        )));
    }
    for &l in success {
        if l != k && !topo.is_link(k, l) {
            return Err(Error::InvalidParameter(format!(
                "success set member {l} is not a neighbor of node {k}"
            )));
        }
    }

    out.clear();
    match rule {
        CombiningRule::Uniform => {
            out.extend(success.iter().map(|_| 1.0));
        }
        CombiningRule::RelativeDegree => {
            out.extend(success.iter().map(|&l| topo.closed_degree(l) as f64));
        }
        CombiningRule::RelativeVariance => {
            if noise_vars.len() != n {
                return Err(Error::LengthMismatch {
                    what: "noise variances",
                    expected: n,
                    got: noise_vars.len(),
                });
            }
            for &l in success {
                if noise_vars[l] <= 0.0 {
                    return Err(Error::ZeroNoiseVariance { node: l });
                }
                out.push(1.0 / noise_vars[l]);
            }
        }
        CombiningRule::EnhancedRelativeDegree { q } => {
            if q.len() != n {
                return Err(Error::LengthMismatch {
                    what: "loss probabilities q",
                    expected: n,
                    got: q.len(),
                });
            }
            for &l in success {
                out.push(topo.closed_degree(l) as f64 * (1.0 - q[l]));
            }
            if out.iter().sum::<f64>() <= 0.0 {
                return Err(Error::ZeroEffectiveDegrees);
            }
        }
        CombiningRule::MaximumDegree => {
            let open_deg = topo.closed_degree(k) as f64 - 1.0;
            let diag = 1.0 - open_deg / n as f64;
            for &l in success {
                out.push(if l == k { diag } else { 1.0 / n as f64 });
            }
        }
        CombiningRule::Metropolis => {
            let nk = topo.closed_degree(k) as f64;
            let mut diag = 1.0;
            for &l in topo.open_neighbors(k) {
                diag -= 1.0 / nk.max(topo.closed_degree(l) as f64);
            }
            for &l in success {
                out.push(if l == k {
                    diag
                } else {
                    1.0 / nk.max(topo.closed_degree(l) as f64)
                });
            }
        }
    }

    let total: f64 = out.iter().sum();
    debug_assert!(total > 0.0);
    for w in out.iter_mut() {
        *w /= total;
    }
    Ok(())
}
