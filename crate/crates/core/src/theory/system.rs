//! The coupled second-moment system and its steady state.
//!
//! The cross moments `x_(kl) = E[w_k^T w_l]` of the network weight vectors
//! obey a linear recursion `x(i+1) = C' x(i) + f(i)` over the `Q = N(N+1)/2`
//! unordered node pairs. Row `(k,l)` of `C'` couples to column `(m,n)`
//! through the failure-averaged weight products:
//!
//! ```text
//! c_{kl,mm} = eta_kl E[a_{k,m} a_{l,m}]
//! c_{kl,mn} = eta_kl E[a_{k,m} a_{l,n} + a_{k,n} a_{l,m}]    (m < n)
//! ```
//!
//! and the drive combines the mean trajectory with the noise injection:
//!
//! ```text
//! f_(kl)(i) = sum_m c_{kl,om} wo^T E[w_m,i] + nu_kl |wo|^2  (+ c_v_k if k = l)
//! c_{kl,om} = abar_{k,m} (eps_l - nu_kl) + abar_{l,m} (eps_k - nu_kl)
//! ```
//!
//! Row `i` of `C'` sums to `eta'_i` exactly, so the steady state of the
//! deviation solves `(I - C') y = c_v` with `MSD_k = y_(kk)`: the target
//! contribution cancels because `(I - C') 1 = [1 - eta'_i]`, which is
//! verified as an invariant test rather than recomputed at runtime. The
//! linear solve is the Cramer determinant ratio evaluated stably in one
//! `O(Q^3)` factorization.

use nalgebra::{DMatrix, DVector};

use crate::curve::{CurveSource, LearningCurve};
use crate::error::{Error, Result};
use crate::theory::coefficients::{ScalarCoefficients, TrueParameter};
use crate::theory::moments::WeightMoments;
use crate::theory::pairs::PairOrdering;

/// Condition-number threshold above which `(I - C')` is reported unstable.
const SINGULARITY_CONDITION: f64 = 1e12;

/// The assembled `Q x Q` moment recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    ordering: PairOrdering,
    /// Coupling matrix `C'`.
    pub cprime: DMatrix<f64>,
    /// Mean-trajectory drive coefficients `c_{kl,om}`, one row per pair.
    pub c_om: DMatrix<f64>,
    /// Noise drive: `c_v_k` on the one-node rows, zero elsewhere.
    pub cv: DVector<f64>,
    /// Row factor `eta'_i` (`eta_k` for one-node rows, `eta_kl` for pairs).
    pub eta_prime: DVector<f64>,
    /// Row drive factor `nu'_i`.
    pub nu_prime: DVector<f64>,
}

impl MomentSystem {
    pub fn ordering(&self) -> PairOrdering {
        self.ordering
    }

    pub fn node_count(&self) -> usize {
        self.ordering.node_count()
    }

    pub fn dim(&self) -> usize {
        self.ordering.len()
    }

    /// Dense text dump of `C'` (one row per line), for debugging.
    pub fn dump_cprime<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{}", self.cprime[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Assemble the moment system from scalar coefficients and weight moments.
pub fn build_moment_system(
    coeffs: &ScalarCoefficients,
    moments: &WeightMoments,
) -> Result<MomentSystem> {
    let n = coeffs.node_count();
    if moments.node_count() != n {
        return Err(Error::LengthMismatch {
            what: "weight moments",
            expected: n,
            got: moments.node_count(),
        });
    }
    let ordering = PairOrdering::new(n);
    let q = ordering.len();

    let mut cprime = DMatrix::zeros(q, q);
    let mut c_om = DMatrix::zeros(q, n);
    let mut cv = DVector::zeros(q);
    let mut eta_prime = DVector::zeros(q);
    let mut nu_prime = DVector::zeros(q);

    for (i, (k, l)) in ordering.pairs().enumerate() {
        let eta = coeffs.eta_pair(k, l);
        let nu = coeffs.nu_pair(k, l);
        eta_prime[i] = eta;
        nu_prime[i] = nu;
        if k == l {
            cv[i] = coeffs.cv[k];
        }
        for (j, (m, nn)) in ordering.pairs().enumerate() {
            let w = if m == nn {
                moments.second_moment(k, l, m, m)
            } else {
                moments.second_moment(k, l, m, nn) + moments.second_moment(k, l, nn, m)
            };
            cprime[(i, j)] = eta * w;
        }
        for m in 0..n {
            c_om[(i, m)] = moments.abar[(k, m)] * (coeffs.eps[l] - nu)
                + moments.abar[(l, m)] * (coeffs.eps[k] - nu);
        }
    }

    Ok(MomentSystem {
        ordering,
        cprime,
        c_om,
        cv,
        eta_prime,
        nu_prime,
    })
}

/// Steady-state deviation report.
#[derive(Debug, Clone, PartialEq)]
pub struct MsdReport {
    /// Per-node steady-state MSD (linear).
    pub local: Vec<f64>,
    /// Node average of the locals.
    pub global: f64,
    /// Spectral radius of `C'`.
    pub spectral_radius: f64,
    /// Steady-state squared weight norm `|wo|^2 + MSD_k` per node.
    pub w_ss_norm: Vec<f64>,
}

impl MsdReport {
    pub fn local_db(&self) -> Vec<f64> {
        self.local.iter().map(|&x| crate::curve::db(x)).collect()
    }

    pub fn global_db(&self) -> f64 {
        crate::curve::db(self.global)
    }

    /// CSV export: `node,msd_linear,msd_db` plus a `global` row.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,msd_linear,msd_db")?;
        for (k, &v) in self.local.iter().enumerate() {
            writeln!(w, "{},{},{}", k + 1, v, crate::curve::db(v))?;
        }
        writeln!(w, "global,{},{}", self.global, self.global_db())
    }
}

/// Spectral radius of a square matrix (largest eigenvalue magnitude).
///
/// The QR iteration is run with an explicit tolerance and iteration cap
/// (the uncapped machine-precision variant can stall on some coupling
/// matrices), falling back to looser tolerances before giving up. The
/// loosest accepted tolerance is far below any threshold the radius is
/// compared against.
pub fn spectral_radius(mat: &DMatrix<f64>) -> Result<f64> {
    if mat.nrows() != mat.ncols() {
        return Err(Error::InvalidParameter(format!(
            "spectral radius needs a square matrix, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    for (eps, max_iter) in [(1e-13, 50_000), (1e-11, 100_000), (1e-9, 200_000)] {
        if let Some(schur) = nalgebra::linalg::Schur::try_new(mat.clone(), eps, max_iter) {
            return Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max));
        }
    }
    Err(Error::InvalidParameter(
        "eigenvalue iteration did not converge".into(),
    ))
}

/// Solve the steady state `(I - C') y = c_v` and report per-node MSD.
///
/// Fails with the observed spectral radius when `rho(C') >= 1` or when
/// `(I - C')` is numerically singular (condition estimate above `1e12`).
pub fn steady_state_msd(system: &MomentSystem, w_o: &TrueParameter) -> Result<MsdReport> {
    let n = system.node_count();
    let radius = spectral_radius(&system.cprime)?;
    if !radius.is_finite() || radius >= 1.0 {
        return Err(Error::MeanSquareUnstable {
            spectral_radius: radius,
        });
    }
    let a = DMatrix::identity(system.dim(), system.dim()) - &system.cprime;
    let svd = [(1e-13, 50_000), (1e-11, 100_000), (1e-9, 200_000)]
        .iter()
        .find_map(|&(eps, max_iter)| {
            nalgebra::linalg::SVD::try_new(a.clone(), false, false, eps, max_iter)
        })
        .ok_or_else(|| Error::InvalidParameter("singular value iteration did not converge".into()))?;
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin > SINGULARITY_CONDITION {
        return Err(Error::MeanSquareUnstable {
            spectral_radius: radius,
        });
    }
    let y = a
        .lu()
        .solve(&system.cv)
        .ok_or(Error::MeanSquareUnstable {
            spectral_radius: radius,
        })?;
    let local: Vec<f64> = (0..n).map(|k| y[k]).collect();
    let global = local.iter().sum::<f64>() / n as f64;
    let wo2 = w_o.norm_squared();
    let w_ss_norm = local.iter().map(|&m| wo2 + m).collect();
    Ok(MsdReport {
        local,
        global,
        spectral_radius: radius,
        w_ss_norm,
    })
}

/// One step of the unconditional mean recursion
/// `E[w_k,i+1] = rho_k sum_l abar_{k,l} E[w_l,i] + eps_k wo`.
pub struct MeanRecursion<'a> {
    abar: &'a DMatrix<f64>,
    coeffs: &'a ScalarCoefficients,
    w_o: &'a TrueParameter,
}

impl<'a> MeanRecursion<'a> {
    pub fn new(
        abar: &'a DMatrix<f64>,
        coeffs: &'a ScalarCoefficients,
        w_o: &'a TrueParameter,
    ) -> Self {
        Self { abar, coeffs, w_o }
    }

    pub fn step(&self, state: &[DVector<f64>], next: &mut [DVector<f64>]) {
        let n = state.len();
        for k in 0..n {
            let mut acc = DVector::zeros(self.w_o.len());
            for l in 0..n {
                let a = self.abar[(k, l)];
                if a != 0.0 {
                    acc.axpy(a, &state[l], 1.0);
                }
            }
            acc *= self.coeffs.rho[k];
            acc.axpy(self.coeffs.eps[k], self.w_o.vector(), 1.0);
            next[k] = acc;
        }
    }
}

/// Expected-weight matrix of the mean recursion: `E' = [rho_k abar_{k,l}]`.
pub fn mean_matrix(abar: &DMatrix<f64>, coeffs: &ScalarCoefficients) -> DMatrix<f64> {
    let n = coeffs.node_count();
    DMatrix::from_fn(n, n, |k, l| coeffs.rho[k] * abar[(k, l)])
}

/// Validity margin of the steady-state reduction for heterogeneous step
/// sizes: the smallest absolute determinant of `(I - E')` with any one
/// column replaced by the drive vector `[mu_k sigma_u2_k]`.
///
/// The reduction behind the steady-state formulas needs this determinant to
/// stay away from zero whenever the `mu_k sigma_u2_k` are not all equal
/// (column sums of `(I - E')` equal the drive vector, so each replaced
/// determinant coincides with `det(I - E')` up to round-off). Callers should
/// warn when the margin is below tolerance.
pub fn mean_reduction_margin(abar: &DMatrix<f64>, coeffs: &ScalarCoefficients) -> f64 {
    let n = coeffs.node_count();
    let a = DMatrix::identity(n, n) - mean_matrix(abar, coeffs);
    let f = DVector::from_iterator(n, coeffs.eps.iter().cloned());
    let mut margin = a.determinant().abs();
    for col in 0..n {
        let mut b = a.clone();
        b.set_column(col, &f);
        margin = margin.min(b.determinant().abs());
    }
    margin
}

/// Iterate the unconditional mean recursion from `init`, returning
/// `iters + 1` states (index 0 is the initial condition).
pub fn mean_trajectory(
    abar: &DMatrix<f64>,
    coeffs: &ScalarCoefficients,
    w_o: &TrueParameter,
    iters: usize,
    init: &[DVector<f64>],
) -> Result<Vec<Vec<DVector<f64>>>> {
    let n = coeffs.node_count();
    if init.len() != n {
        return Err(Error::LengthMismatch {
            what: "initial mean vectors",
            expected: n,
            got: init.len(),
        });
    }
    for v in init {
        if v.len() != w_o.len() {
            return Err(Error::LengthMismatch {
                what: "initial mean vector length",
                expected: w_o.len(),
                got: v.len(),
            });
        }
    }
    let rec = MeanRecursion::new(abar, coeffs, w_o);
    let mut out = Vec::with_capacity(iters + 1);
    out.push(init.to_vec());
    let mut next = vec![DVector::zeros(w_o.len()); n];
    for _ in 0..iters {
        rec.step(out.last().unwrap(), &mut next);
        out.push(next.clone());
    }
    Ok(out)
}

/// Jointly iterate the mean and second-moment recursions and emit the
/// theoretical learning curve `MSD_k(i) = x_(kk) - 2 wo^T E[w_k,i] + |wo|^2`.
///
/// `init` supplies initial weight vectors (defaults to zero). Divergent
/// configurations are allowed; the divergence shows in the curve.
pub fn transient_theory_curve(
    system: &MomentSystem,
    coeffs: &ScalarCoefficients,
    abar: &DMatrix<f64>,
    w_o: &TrueParameter,
    iters: usize,
    init: Option<&[DVector<f64>]>,
) -> Result<LearningCurve> {
    let n = system.node_count();
    let q = system.dim();
    let wo2 = w_o.norm_squared();

    let zero_init;
    let init: &[DVector<f64>] = match init {
        Some(v) => {
            if v.len() != n {
                return Err(Error::LengthMismatch {
                    what: "initial weight vectors",
                    expected: n,
                    got: v.len(),
                });
            }
            v
        }
        None => {
            zero_init = vec![DVector::zeros(w_o.len()); n];
            &zero_init
        }
    };

    // second-moment state in pair order
    let mut x = DVector::zeros(q);
    for (i, (k, l)) in system.ordering.pairs().enumerate() {
        x[i] = init[k].dot(&init[l]);
    }
    let mut mean: Vec<DVector<f64>> = init.to_vec();
    let mut mean_next = vec![DVector::zeros(w_o.len()); n];
    let rec = MeanRecursion::new(abar, coeffs, w_o);

    let mut local = vec![Vec::with_capacity(iters + 1); n];
    let mut proj = vec![0.0; n];
    for it in 0..=iters {
        for k in 0..n {
            proj[k] = w_o.vector().dot(&mean[k]);
            // clamp tiny negative round-off so the curve stays a valid MSD
            local[k].push((x[k] - 2.0 * proj[k] + wo2).max(0.0));
        }
        if it == iters {
            break;
        }
        let mut f = DVector::zeros(q);
        for i in 0..q {
            let mut drive = system.nu_prime[i] * wo2 + system.cv[i];
            for m in 0..n {
                drive += system.c_om[(i, m)] * proj[m];
            }
            f[i] = drive;
        }
        x = &system.cprime * x + f;
        rec.step(&mean, &mut mean_next);
        std::mem::swap(&mut mean, &mut mean_next);
    }

    Ok(LearningCurve::new(local, CurveSource::Theory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combiners::CombiningRule;
    use crate::failures::ErrorModel;
    use crate::theory::coefficients::{scalar_coefficients, NodeProfile, SpatialCorrelation};
    use crate::theory::moments::{weight_moments, MomentMode};
    use crate::topology::Topology;
    use approx::assert_abs_diff_eq;

    fn prof(mu: f64, su2: f64, sv2: f64) -> NodeProfile {
        NodeProfile::new(mu, su2, sv2).unwrap()
    }

    fn one_node_system() -> (MomentSystem, ScalarCoefficients, DMatrix<f64>, TrueParameter) {
        let topo = Topology::random_geometric(1, 1.0, 1.0, 0).unwrap();
        let model = ErrorModel::uniform(&topo, 0.0).unwrap();
        let coeffs =
            scalar_coefficients(&[prof(0.1, 1.0, 0.01)], &SpatialCorrelation::none(), 2).unwrap();
        let moments = weight_moments(
            &CombiningRule::Uniform,
            &topo,
            &model,
            &[0.01],
            MomentMode::Exact,
        )
        .unwrap();
        let abar = moments.abar.clone();
        let system = build_moment_system(&coeffs, &moments).unwrap();
        let w_o = TrueParameter::normalized_ones(2).unwrap();
        (system, coeffs, abar, w_o)
    }

    #[test]
    fn single_node_system_is_scalar_eta() {
        let (system, ..) = one_node_system();
        assert_eq!(system.dim(), 1);
        assert_abs_diff_eq!(system.cprime[(0, 0)], 0.84, epsilon = 1e-15);
        assert_abs_diff_eq!(system.cv[0], 2.0 * 0.01 * 0.01, epsilon = 1e-18);
    }

    #[test]
    fn single_node_closed_form_msd() {
        // MSD = M mu sigma_v2 / (2 - mu (M+2) sigma_u2) = 0.002 / 1.6
        let (system, _, _, w_o) = one_node_system();
        let report = steady_state_msd(&system, &w_o).unwrap();
        assert_abs_diff_eq!(report.local[0], 1.25e-3, epsilon = 1.25e-3 * 1e-12);
        assert_abs_diff_eq!(report.spectral_radius, 0.84, epsilon = 1e-12);
        assert_abs_diff_eq!(report.w_ss_norm[0], 1.0 + 1.25e-3, epsilon = 1e-12);
    }

    #[test]
    fn isolated_two_node_system_is_diagonal() {
        let topo = Topology::from_adjacency(&[vec![0, 0], vec![0, 0]]).unwrap();
        let model = ErrorModel::uniform(&topo, 0.0).unwrap();
        let profiles = [prof(0.1, 1.0, 0.01), prof(0.2, 0.5, 0.02)];
        let coeffs = scalar_coefficients(&profiles, &SpatialCorrelation::none(), 2).unwrap();
        let moments = weight_moments(
            &CombiningRule::Uniform,
            &topo,
            &model,
            &[0.01, 0.02],
            MomentMode::Exact,
        )
        .unwrap();
        let system = build_moment_system(&coeffs, &moments).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { coeffs_eta(&coeffs, i) } else { 0.0 };
                assert_abs_diff_eq!(system.cprime[(i, j)], expected, epsilon = 1e-15);
            }
        }
    }

    fn coeffs_eta(c: &ScalarCoefficients, row: usize) -> f64 {
        match row {
            0 => c.eta_node(0),
            1 => c.eta_node(1),
            _ => c.eta_pair(0, 1),
        }
    }

    #[test]
    fn rows_sum_to_eta_prime() {
        let topo = Topology::random_geometric(5, 100.0, 55.0, 21).unwrap();
        let model = ErrorModel::uniform(&topo, 0.3).unwrap();
        let profiles: Vec<NodeProfile> = (0..5)
            .map(|k| prof(0.02 + 0.005 * k as f64, 0.5 + 0.1 * k as f64, 1e-3))
            .collect();
        let corr = SpatialCorrelation::power_law(0.5).unwrap();
        let coeffs = scalar_coefficients(&profiles, &corr, 4).unwrap();
        let vars: Vec<f64> = profiles.iter().map(|p| p.sigma_v2).collect();
        let moments = weight_moments(
            &CombiningRule::RelativeVariance,
            &topo,
            &model,
            &vars,
            MomentMode::Exact,
        )
        .unwrap();
        let system = build_moment_system(&coeffs, &moments).unwrap();
        for i in 0..system.dim() {
            let sum: f64 = (0..system.dim()).map(|j| system.cprime[(i, j)]).sum();
            assert_abs_diff_eq!(sum, system.eta_prime[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn dead_links_decouple_to_standalone_msd() {
        let topo = Topology::from_adjacency(&[
            vec![0, 1, 1],
            vec![1, 0, 1],
            vec![1, 1, 0],
        ])
        .unwrap();
        let model = ErrorModel::uniform(&topo, 1.0).unwrap();
        let profiles = [
            prof(0.05, 1.0, 0.01),
            prof(0.08, 0.8, 0.005),
            prof(0.02, 1.2, 0.02),
        ];
        let corr = SpatialCorrelation::power_law(0.9).unwrap();
        let m = 3;
        let coeffs = scalar_coefficients(&profiles, &corr, m).unwrap();
        let vars: Vec<f64> = profiles.iter().map(|p| p.sigma_v2).collect();
        let moments = weight_moments(
            &CombiningRule::RelativeVariance,
            &topo,
            &model,
            &vars,
            MomentMode::Exact,
        )
        .unwrap();
        let system = build_moment_system(&coeffs, &moments).unwrap();
        let w_o = TrueParameter::normalized_ones(m).unwrap();
        let report = steady_state_msd(&system, &w_o).unwrap();
        for (k, p) in profiles.iter().enumerate() {
            let standalone =
                m as f64 * p.mu * p.sigma_v2 / (2.0 - p.mu * (m as f64 + 2.0) * p.sigma_u2);
            assert_abs_diff_eq!(report.local[k], standalone, epsilon = standalone * 1e-10);
        }
    }

    #[test]
    fn unstable_step_size_is_reported() {
        let topo = Topology::from_adjacency(&[vec![0, 1], vec![1, 0]]).unwrap();
        let model = ErrorModel::uniform(&topo, 0.3).unwrap();
        // mu far above 2/((M+2) sigma_u2): eta > 1
        let profiles = [prof(1.4, 1.0, 0.01), prof(1.4, 1.0, 0.01)];
        let coeffs = scalar_coefficients(&profiles, &SpatialCorrelation::none(), 2).unwrap();
        let moments = weight_moments(
            &CombiningRule::Uniform,
            &topo,
            &model,
            &[0.01, 0.01],
            MomentMode::Exact,
        )
        .unwrap();
        let system = build_moment_system(&coeffs, &moments).unwrap();
        let w_o = TrueParameter::normalized_ones(2).unwrap();
        match steady_state_msd(&system, &w_o) {
            Err(Error::MeanSquareUnstable { spectral_radius }) => {
                assert!(spectral_radius >= 1.0)
            }
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn mean_trajectory_fixed_point_and_geometric_ramp() {
        let (_, coeffs, abar, w_o) = one_node_system();
        // starting at wo stays at wo
        let traj =
            mean_trajectory(&abar, &coeffs, &w_o, 10, &[w_o.vector().clone()]).unwrap();
        for state in &traj {
            assert_abs_diff_eq!((state[0].clone() - w_o.vector()).norm(), 0.0, epsilon = 1e-14);
        }
        // zero start follows 1 - 0.9^i
        let traj =
            mean_trajectory(&abar, &coeffs, &w_o, 50, &[DVector::zeros(2)]).unwrap();
        for (i, state) in traj.iter().enumerate() {
            let expected = (1.0 - 0.9f64.powi(i as i32)) * w_o.vector().clone();
            assert_abs_diff_eq!((state[0].clone() - expected).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn transient_starts_at_wo_norm_and_converges_to_steady_state() {
        let (system, coeffs, abar, w_o) = one_node_system();
        let curve =
            transient_theory_curve(&system, &coeffs, &abar, &w_o, 400, None).unwrap();
        assert_abs_diff_eq!(curve.local(0)[0], 1.0, epsilon = 1e-15);
        let steady = steady_state_msd(&system, &w_o).unwrap();
        let last = *curve.local(0).last().unwrap();
        assert_abs_diff_eq!(last, steady.local[0], epsilon = steady.local[0] * 1e-8);
    }

    #[test]
    fn report_is_invariant_under_node_relabeling() {
        let topo = Topology::random_geometric(4, 100.0, 70.0, 3).unwrap();
        let profiles = [
            prof(0.03, 1.0, 1e-3),
            prof(0.05, 0.7, 5e-3),
            prof(0.02, 1.3, 2e-4),
            prof(0.04, 0.9, 8e-3),
        ];
        // relabel by reversal; note the power-law correlation depends on the
        // index distance, so use an explicit matrix that is permuted too
        let n = 4;
        let base = SpatialCorrelation::power_law(0.6).unwrap();
        let cm = DMatrix::from_fn(n, n, |i, j| base.index(i, j));
        let perm: Vec<usize> = (0..n).rev().collect();

        let run = |topo: &Topology, profiles: &[NodeProfile], cm: &DMatrix<f64>| {
            let corr = SpatialCorrelation::from_matrix(cm.clone()).unwrap();
            let coeffs = scalar_coefficients(profiles, &corr, 3).unwrap();
            let model = ErrorModel::uniform(topo, 0.25).unwrap();
            let vars: Vec<f64> = profiles.iter().map(|p| p.sigma_v2).collect();
            let moments = weight_moments(
                &CombiningRule::RelativeVariance,
                topo,
                &model,
                &vars,
                MomentMode::Exact,
            )
            .unwrap();
            let system = build_moment_system(&coeffs, &moments).unwrap();
            steady_state_msd(&system, &TrueParameter::normalized_ones(3).unwrap()).unwrap()
        };

        let original = run(&topo, &profiles, &cm);

        // permuted topology
        let mut adj = vec![vec![0u8; n]; n];
        for &(a, b) in topo.links() {
            adj[perm[a]][perm[b]] = 1;
            adj[perm[b]][perm[a]] = 1;
        }
        let topo_p = Topology::from_adjacency(&adj).unwrap();
        let mut profiles_p = profiles;
        let mut cm_p = cm.clone();
        for i in 0..n {
            profiles_p[perm[i]] = profiles[i];
            for j in 0..n {
                cm_p[(perm[i], perm[j])] = cm[(i, j)];
            }
        }
        let permuted = run(&topo_p, &profiles_p, &cm_p);
        for k in 0..n {
            assert_abs_diff_eq!(
                original.local[k],
                permuted.local[perm[k]],
                epsilon = original.local[k] * 1e-9
            );
        }
        assert_abs_diff_eq!(
            original.global,
            permuted.global,
            epsilon = original.global * 1e-9
        );
    }

    #[test]
    fn appendix_column_sum_identity_for_mean_system() {
        // the column-sum vector of (I - E') equals [mu_k sigma_u2_k], so
        // replacing any column by it leaves the determinant unchanged
        for n in 2..=5 {
            let topo = Topology::random_geometric(n, 100.0, 70.0, n as u64).unwrap();
            let model = ErrorModel::uniform(&topo, 0.4).unwrap();
            let profiles: Vec<NodeProfile> = (0..n)
                .map(|k| prof(0.01 + 0.01 * k as f64, 0.5 + 0.05 * k as f64, 1e-3))
                .collect();
            let coeffs =
                scalar_coefficients(&profiles, &SpatialCorrelation::none(), 4).unwrap();
            let moments = weight_moments(
                &CombiningRule::RelativeDegree,
                &topo,
                &model,
                &[],
                MomentMode::Exact,
            )
            .unwrap();
            let eprime = mean_matrix(&moments.abar, &coeffs);
            let a = DMatrix::identity(n, n) - &eprime;
            // row sums of (I - E') are 1 - rho_k = mu_k sigma_u2_k
            for k in 0..n {
                let row_sum: f64 = (0..n).map(|l| a[(k, l)]).sum();
                assert_abs_diff_eq!(row_sum, coeffs.eps[k], epsilon = 1e-12);
            }
            let det = a.determinant();
            let f: DVector<f64> = DVector::from_iterator(n, coeffs.eps.iter().cloned());
            for col in 0..n {
                let mut b = a.clone();
                b.set_column(col, &f);
                assert_abs_diff_eq!(b.determinant(), det, epsilon = det.abs() * 1e-8 + 1e-14);
            }
        }
    }
}
