//! Monte Carlo simulation of the diffusion LMS recursion with sampled
//! success sets, spatially correlated Gaussian regressors and measurement
//! noise.
//!
//! Combine-then-adapt update per node and iteration:
//!
//! ```text
//! phi_k = sum_{l in S_k} a_{k,l} w_l
//! d_k   = v_k + wo^T u_k
//! e_k   = d_k - phi_k^T u_k
//! w_k  <- phi_k + mu_k e_k u_k
//! ```
//!
//! Randomness is split into one failure stream per run and one regressor
//! and one noise stream per `(run, node)`, so runs parallelize freely and a
//! node's private draws do not depend on the rest of the network. Run
//! results are reduced in run order regardless of the worker count, making
//! the averaged curve bit-identical for a fixed master seed.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::combiners::{weights_into, CombiningRule};
use crate::curve::{CurveSource, LearningCurve};
use crate::error::{Error, Result};
use crate::failures::{sample_success_sets_into, ErrorModel, SuccessSets};
use crate::rng::{derive_rng, STREAM_FAILURES, STREAM_NOISE, STREAM_REGRESSORS};
use crate::theory::{validate_profiles, NodeProfile, SpatialCorrelation, TrueParameter};
use crate::topology::Topology;

/// Sampler for the per-dimension joint regressor distribution.
///
/// The `N x N` covariance (entries `rho_kl sigma_u_k sigma_u_l`) is factored
/// once into its symmetric square root; each dimension of the per-node
/// regressors is an independent draw of the resulting `N`-vector.
#[derive(Debug, Clone)]
pub struct CorrelatedSampler {
    n: usize,
    factor: Factor,
}

#[derive(Debug, Clone)]
enum Factor {
    /// Uncorrelated case: per-node standard deviations.
    Diagonal(Vec<f64>),
    /// Symmetric square root of the covariance.
    Dense(DMatrix<f64>),
}

impl CorrelatedSampler {
    pub fn new(profiles: &[NodeProfile], corr: &SpatialCorrelation) -> Result<Self> {
        validate_profiles(profiles)?;
        let n = profiles.len();
        let cov = corr.covariance(profiles);
        let uncorrelated =
            (0..n).all(|i| (0..n).all(|j| i == j || cov[(i, j)] == 0.0));
        if uncorrelated {
            let sd = (0..n).map(|k| cov[(k, k)].sqrt()).collect();
            return Ok(Self {
                n,
                factor: Factor::Diagonal(sd),
            });
        }
        let eig = [(1e-13, 50_000), (1e-11, 100_000)]
            .iter()
            .find_map(|&(eps, max_iter)| {
                nalgebra::linalg::SymmetricEigen::try_new(cov.clone(), eps, max_iter)
            })
            .ok_or_else(|| {
                Error::InvalidParameter("covariance eigendecomposition did not converge".into())
            })?;
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        if min < -1e-10 * max.max(1.0) {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
            * eig.eigenvectors.transpose();
        Ok(Self {
            n,
            factor: Factor::Dense(factor),
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Draw one iteration of per-node length-`m` regressors from a single
    /// stream.
    pub fn sample_with<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<DVector<f64>> {
        let mut out = vec![0.0; self.n * m];
        let mut z = vec![0.0; self.n];
        for j in 0..m {
            for zk in z.iter_mut() {
                *zk = rng.sample(StandardNormal);
            }
            self.mix(j, m, &z, &mut out);
        }
        (0..self.n)
            .map(|k| DVector::from_column_slice(&out[k * m..(k + 1) * m]))
            .collect()
    }

    /// Draw one iteration with node `k`'s standard normals taken from
    /// `rngs[k]`, writing node-major into `out` (`n * m` values).
    fn sample_into_multi(&self, m: usize, rngs: &mut [ChaCha12Rng], z: &mut [f64], out: &mut [f64]) {
        for j in 0..m {
            for (k, rng) in rngs.iter_mut().enumerate() {
                z[k] = rng.sample(StandardNormal);
            }
            self.mix(j, m, z, out);
        }
    }

    fn mix(&self, j: usize, m: usize, z: &[f64], out: &mut [f64]) {
        match &self.factor {
            Factor::Diagonal(sd) => {
                for k in 0..self.n {
                    out[k * m + j] = sd[k] * z[k];
                }
            }
            Factor::Dense(f) => {
                for k in 0..self.n {
                    let mut acc = 0.0;
                    for (l, &zl) in z.iter().enumerate() {
                        acc += f[(k, l)] * zl;
                    }
                    out[k * m + j] = acc;
                }
            }
        }
    }
}

/// One iteration of per-node regressors with the given correlation profile.
pub fn sample_regressors<R: Rng + ?Sized>(
    profiles: &[NodeProfile],
    corr: &SpatialCorrelation,
    m: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    Ok(CorrelatedSampler::new(profiles, corr)?.sample_with(m, rng))
}

/// Run controls for the Monte Carlo engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// LMS updates per run; the curve carries `iters + 1` samples.
    pub iters: usize,
    /// Independent runs to average.
    pub runs: usize,
    /// Master seed; per-run streams are derived from it.
    pub seed: u64,
}

/// Simulate the diffusion LMS recursion and return the run-averaged
/// learning curve `MSD_k(i) = |w_{k,i} - wo|^2`.
///
/// Weights start at zero. Unstable configurations are accepted; divergence
/// shows in the curve.
pub fn run_diffusion(
    topo: &Topology,
    profiles: &[NodeProfile],
    corr: &SpatialCorrelation,
    w_o: &TrueParameter,
    rule: &CombiningRule,
    model: &ErrorModel,
    opts: RunOptions,
) -> Result<LearningCurve> {
    let n = topo.node_count();
    if profiles.len() != n {
        return Err(Error::LengthMismatch {
            what: "node profiles",
            expected: n,
            got: profiles.len(),
        });
    }
    if model.node_count() != n {
        return Err(Error::LengthMismatch {
            what: "error model",
            expected: n,
            got: model.node_count(),
        });
    }
    if opts.iters < 1 || opts.runs < 1 {
        return Err(Error::InvalidParameter(
            "iters and runs must both be >= 1".into(),
        ));
    }
    let sampler = CorrelatedSampler::new(profiles, corr)?;
    let noise_vars: Vec<f64> = profiles.iter().map(|p| p.sigma_v2).collect();
    let ctx = EngineCtx {
        topo,
        profiles,
        sampler: &sampler,
        w_o: w_o.as_slice(),
        rule,
        model,
        noise_sd: profiles.iter().map(|p| p.sigma_v2.sqrt()).collect(),
        noise_vars,
        m: w_o.len(),
    };

    let mut sums = vec![vec![0.0; opts.iters + 1]; n];
    // parallel runs, batched to bound memory; reduction stays in run order
    // so the result does not depend on the worker count
    let batch = 16;
    let mut start = 0;
    while start < opts.runs {
        let end = (start + batch).min(opts.runs);
        let results: Result<Vec<_>> = (start..end)
            .into_par_iter()
            .map(|run| run_single(&ctx, opts.seed, run as u64, opts.iters, None))
            .collect();
        for curves in results? {
            for (k, curve) in curves.iter().enumerate() {
                for (i, v) in curve.iter().enumerate() {
                    sums[k][i] += v;
                }
            }
        }
        start = end;
    }
    let scale = 1.0 / opts.runs as f64;
    for curve in &mut sums {
        for v in curve.iter_mut() {
            *v *= scale;
        }
    }
    Ok(LearningCurve::new(
        sums,
        CurveSource::Simulation {
            runs: opts.runs,
            seed: opts.seed,
        },
    ))
}

struct EngineCtx<'a> {
    topo: &'a Topology,
    profiles: &'a [NodeProfile],
    sampler: &'a CorrelatedSampler,
    w_o: &'a [f64],
    rule: &'a CombiningRule,
    model: &'a ErrorModel,
    noise_sd: Vec<f64>,
    noise_vars: Vec<f64>,
    m: usize,
}

/// `weight_trace`, when given, receives a copy of the stacked weight state
/// (`n * m` values) at every recorded sample; used by tests to inspect the
/// run-averaged weight trajectory.
fn run_single(
    ctx: &EngineCtx,
    master: u64,
    run: u64,
    iters: usize,
    mut weight_trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<Vec<Vec<f64>>> {
    let n = ctx.topo.node_count();
    let m = ctx.m;
    let mut fail_rng = derive_rng(master, run, STREAM_FAILURES, 0);
    let mut reg_rngs: Vec<ChaCha12Rng> = (0..n)
        .map(|k| derive_rng(master, run, STREAM_REGRESSORS, k as u64))
        .collect();
    let mut noise_rngs: Vec<ChaCha12Rng> = (0..n)
        .map(|k| derive_rng(master, run, STREAM_NOISE, k as u64))
        .collect();

    let mut w = vec![0.0; n * m];
    let mut phi = vec![0.0; n * m];
    let mut u = vec![0.0; n * m];
    let mut z = vec![0.0; n];
    let mut row: Vec<f64> = Vec::new();
    let mut sets = SuccessSets::empty(n);
    let mut curves = vec![Vec::with_capacity(iters + 1); n];

    for it in 0..=iters {
        for k in 0..n {
            let wk = &w[k * m..(k + 1) * m];
            let dev: f64 = wk
                .iter()
                .zip(ctx.w_o)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            curves[k].push(dev);
        }
        if let Some(trace) = weight_trace.as_deref_mut() {
            trace.push(w.clone());
        }
        if it == iters {
            break;
        }

        sample_success_sets_into(ctx.model, ctx.topo, &mut fail_rng, &mut sets);
        for k in 0..n {
            weights_into(ctx.rule, ctx.topo, &ctx.noise_vars, k, sets.set(k), &mut row)?;
            let base = k * m;
            phi[base..base + m].fill(0.0);
            for (i, &l) in sets.set(k).iter().enumerate() {
                let a = row[i];
                let src = l * m;
                for j in 0..m {
                    phi[base + j] += a * w[src + j];
                }
            }
        }
        ctx.sampler.sample_into_multi(m, &mut reg_rngs, &mut z, &mut u);
        for k in 0..n {
            let base = k * m;
            let uk = &u[base..base + m];
            let phik = &phi[base..base + m];
            let v: f64 = ctx.noise_sd[k] * noise_rngs[k].sample::<f64, _>(StandardNormal);
            let d = v + dot(ctx.w_o, uk);
            let e = d - dot(phik, uk);
            let step = ctx.profiles[k].mu * e;
            for j in 0..m {
                w[base + j] = phik[j] + step * uk[j];
            }
        }
    }
    Ok(curves)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
