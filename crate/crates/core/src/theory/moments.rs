//! First and second moments of the combining weights over the transmission
//! failure ensemble.
//!
//! The weights of node `k` depend only on which of its own in-links failed,
//! so the global event space (all `2^E` failure patterns) never needs to be
//! materialized: node-level moments come from enumerating the `2^(n_k - 1)`
//! failure patterns of the links into `k`, and cross-node products factor
//! because in-link failures of distinct nodes are independent. A Monte Carlo
//! mode estimates the same moments from sampled success sets and reports
//! per-entry standard errors.

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::combiners::{weights_into, CombiningRule};
use crate::error::{Error, Result};
use crate::failures::{sample_success_sets, ErrorModel};
use crate::theory::pairs::PairOrdering;
use crate::topology::Topology;

/// Largest admissible in-link enumeration, as a bit count: a pair row
/// enumerates `2^(n_k - 1 + n_l - 1)` outcomes, which must stay within
/// `2^20`.
pub const EXACT_ENUMERATION_BITS: u32 = 20;

/// How to compute the weight moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMode {
    /// Exact enumeration of in-link failure patterns.
    Exact,
    /// Estimation from `samples` sampled success-set realizations.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Expected combining weights and their pairwise second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMoments {
    ordering: PairOrdering,
    /// Expected weights `abar[k, l] = E[a_{k,l}]`; rows sum to one.
    pub abar: DMatrix<f64>,
    /// For each unordered node pair `(k, l)`, `k <= l`, the matrix of
    /// `E[a_{k,m} a_{l,n}]` indexed `(m, n)`.
    second: Vec<DMatrix<f64>>,
    pub mode: MomentMode,
    /// Standard errors (Monte Carlo mode only).
    pub abar_se: Option<DMatrix<f64>>,
    pub second_se: Option<Vec<DMatrix<f64>>>,
}

impl WeightMoments {
    pub fn node_count(&self) -> usize {
        self.ordering.node_count()
    }

    /// `E[a_{k,m} a_{l,n}]` for any node order.
    pub fn second_moment(&self, k: usize, l: usize, m: usize, n: usize) -> f64 {
        if k <= l {
            self.second[self.ordering.index(k, l)][(m, n)]
        } else {
            self.second[self.ordering.index(l, k)][(n, m)]
        }
    }

    /// The full second-moment matrix of the pair `(k, l)`, `k <= l`.
    pub fn pair_matrix(&self, k: usize, l: usize) -> &DMatrix<f64> {
        assert!(k <= l, "pair_matrix expects k <= l");
        &self.second[self.ordering.index(k, l)]
    }
}

/// Check that exact enumeration stays within the admissible size for every
/// one-node and pair row.
fn check_enumeration_cap(topo: &Topology) -> Result<()> {
    let n = topo.node_count();
    let degs: Vec<u32> = (0..n).map(|k| (topo.closed_degree(k) - 1) as u32).collect();
    for (k, &d) in degs.iter().enumerate() {
        if d > EXACT_ENUMERATION_BITS {
            return Err(Error::EnumerationTooLarge {
                bits: d,
                row: format!("({},{})", k + 1, k + 1),
            });
        }
    }
    if n >= 2 {
        // the worst pair row combines the two largest in-neighborhoods
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by_key(|&k| std::cmp::Reverse(degs[k]));
        let (a, b) = (order[0], order[1]);
        if degs[a] + degs[b] > EXACT_ENUMERATION_BITS {
            return Err(Error::EnumerationTooLarge {
                bits: degs[a] + degs[b],
                row: format!("({},{})", a.min(b) + 1, a.max(b) + 1),
            });
        }
    }
    Ok(())
}

/// Compute `E[a_{k,l}]` and `E[a_{k,m} a_{l,n}]` over the failure ensemble.
///
/// Exact mode enumerates only the failures of the in-links of the nodes
/// involved in each row, weighting each outcome by its product-Bernoulli
/// probability; it errors when an enumeration would exceed `2^20` outcomes.
/// Monte Carlo mode estimates the same quantities from jointly sampled
/// success sets.
pub fn weight_moments(
    rule: &CombiningRule,
    topo: &Topology,
    model: &ErrorModel,
    noise_vars: &[f64],
    mode: MomentMode,
) -> Result<WeightMoments> {
    if model.node_count() != topo.node_count() {
        return Err(Error::LengthMismatch {
            what: "error model",
            expected: topo.node_count(),
            got: model.node_count(),
        });
    }
    match mode {
        MomentMode::Exact => exact_moments(rule, topo, model, noise_vars),
        MomentMode::MonteCarlo { samples, seed } => {
            mc_moments(rule, topo, model, noise_vars, samples, seed)
        }
    }
}

fn exact_moments(
    rule: &CombiningRule,
    topo: &Topology,
    model: &ErrorModel,
    noise_vars: &[f64],
) -> Result<WeightMoments> {
    check_enumeration_cap(topo)?;
    let n = topo.node_count();
    let ordering = PairOrdering::new(n);

    // node rows are independent; enumerate them in parallel and merge in
    // node order so the result never depends on the worker count
    let per_node: Result<Vec<(Vec<f64>, DMatrix<f64>)>> = (0..n)
        .into_par_iter()
        .map(|k| exact_node_moments(rule, topo, model, noise_vars, k))
        .collect();
    let per_node = per_node?;

    let mut abar = DMatrix::zeros(n, n);
    let mut diag: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    for (k, (mean_row, m2)) in per_node.into_iter().enumerate() {
        for (m, v) in mean_row.into_iter().enumerate() {
            abar[(k, m)] = v;
        }
        diag.push(m2);
    }

    // Pair matrices: in-link failures of distinct nodes are independent, so
    // cross-node second moments are products of the marginal means.
    let mut second = Vec::with_capacity(ordering.len());
    for (k, l) in ordering.pairs() {
        if k == l {
            second.push(std::mem::take(&mut diag[k]));
        } else {
            second.push(DMatrix::from_fn(n, n, |m, nn| abar[(k, m)] * abar[(l, nn)]));
        }
    }

    Ok(WeightMoments {
        ordering,
        abar,
        second,
        mode: MomentMode::Exact,
        abar_se: None,
        second_se: None,
    })
}

/// Mean weight row and within-node second moments of one node, by
/// enumeration of its in-link failure patterns.
fn exact_node_moments(
    rule: &CombiningRule,
    topo: &Topology,
    model: &ErrorModel,
    noise_vars: &[f64],
    k: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = topo.node_count();
    let mut mean_row = vec![0.0; n];
    let mut m2 = DMatrix::zeros(n, n);
    let nb = topo.open_neighbors(k);
    let probs: Vec<f64> = nb.iter().map(|&l| model.prob(k, l)).collect();
    let mut success = Vec::new();
    let mut row = Vec::new();
    for mask in 0u64..(1u64 << nb.len()) {
        let mut prob = 1.0;
        for (i, &p) in probs.iter().enumerate() {
            prob *= if mask & (1 << i) != 0 { p } else { 1.0 - p };
        }
        if prob == 0.0 {
            continue;
        }
        success.clear();
        for (i, &l) in nb.iter().enumerate() {
            if mask & (1 << i) == 0 {
                success.push(l);
            }
        }
        match success.binary_search(&k) {
            Ok(_) => {}
            Err(pos) => success.insert(pos, k),
        }
        weights_into(rule, topo, noise_vars, k, &success, &mut row)?;
        for (i, &m) in success.iter().enumerate() {
            mean_row[m] += prob * row[i];
            for (j, &nn) in success.iter().enumerate() {
                m2[(m, nn)] += prob * row[i] * row[j];
            }
        }
    }
    Ok((mean_row, m2))
}

fn mc_moments(
    rule: &CombiningRule,
    topo: &Topology,
    model: &ErrorModel,
    noise_vars: &[f64],
    samples: usize,
    seed: u64,
) -> Result<WeightMoments> {
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "monte_carlo moment mode needs samples >= 1".into(),
        ));
    }
    let n = topo.node_count();
    let ordering = PairOrdering::new(n);
    let q = ordering.len();

    let mut abar_sum = DMatrix::zeros(n, n);
    let mut abar_sq = DMatrix::zeros(n, n);
    let mut sec_sum: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); q];
    let mut sec_sq: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); q];

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); n];
    for _ in 0..samples {
        let sets = sample_success_sets(model, topo, &mut rng);
        for k in 0..n {
            weights_into(rule, topo, noise_vars, k, sets.set(k), &mut rows[k])?;
            for (i, &m) in sets.set(k).iter().enumerate() {
                let a = rows[k][i];
                abar_sum[(k, m)] += a;
                abar_sq[(k, m)] += a * a;
            }
        }
        for (idx, (k, l)) in ordering.pairs().enumerate() {
            let (sk, sl) = (sets.set(k), sets.set(l));
            for (i, &m) in sk.iter().enumerate() {
                for (j, &nn) in sl.iter().enumerate() {
                    let x = rows[k][i] * rows[l][j];
                    sec_sum[idx][(m, nn)] += x;
                    sec_sq[idx][(m, nn)] += x * x;
                }
            }
        }
    }

    let s = samples as f64;
    let finalize = |sum: &DMatrix<f64>, sq: &DMatrix<f64>| {
        let mean = sum / s;
        let se = DMatrix::from_fn(n, n, |i, j| {
            let var = (sq[(i, j)] / s - mean[(i, j)] * mean[(i, j)]).max(0.0);
            (var / s).sqrt()
        });
        (mean, se)
    };

    let (abar, abar_se) = finalize(&abar_sum, &abar_sq);
    let mut second = Vec::with_capacity(q);
    let mut second_se = Vec::with_capacity(q);
    for idx in 0..q {
        let (m, se) = finalize(&sec_sum[idx], &sec_sq[idx]);
        second.push(m);
        second_se.push(se);
    }

    Ok(WeightMoments {
        ordering,
        abar,
        second,
        mode: MomentMode::MonteCarlo { samples, seed },
        abar_se: Some(abar_se),
        second_se: Some(second_se),
    })
}
