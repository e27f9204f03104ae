//! Sufficient stability conditions and exact spectral checks.
//!
//! Two sufficient step-size conditions apply per node, neither depending on
//! the link error probabilities:
//!
//! ```text
//! mean:        0 < mu_k < 2 / sigma_u2_k
//! mean-square: 0 < mu_k < 2 / ((M+2) sigma_u2_k)
//! ```
//!
//! A configuration can violate a sufficient bound and still be spectrally
//! stable, so the report carries both the interval checks and the spectral
//! radii of the expected mean matrix `E'` and the moment coupling matrix
//! `C'` when those are available.

use std::fmt;
use std::io::{self, Write};

use crate::theory::{NodeProfile, ScalarCoefficients};

pub use crate::theory::spectral_radius;

/// One per-node step-size interval check: passes iff `lo < mu < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lo: f64,
    pub hi: f64,
    pub ok: bool,
}

/// Mean-stability intervals `(0, 2/sigma_u2_k)`.
pub fn mean_bounds(profiles: &[NodeProfile]) -> Vec<BoundCheck> {
    profiles
        .iter()
        .map(|p| {
            let hi = 2.0 / p.sigma_u2;
            BoundCheck {
                lo: 0.0,
                hi,
                ok: p.mu > 0.0 && p.mu < hi,
            }
        })
        .collect()
}

/// Mean-square stability intervals `(0, 2/((M+2) sigma_u2_k))`.
pub fn meansquare_bounds(profiles: &[NodeProfile], m: usize) -> Vec<BoundCheck> {
    profiles
        .iter()
        .map(|p| {
            let hi = 2.0 / ((m as f64 + 2.0) * p.sigma_u2);
            BoundCheck {
                lo: 0.0,
                hi,
                ok: p.mu > 0.0 && p.mu < hi,
            }
        })
        .collect()
}

/// Full stability assessment of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub mean: Vec<BoundCheck>,
    pub mean_square: Vec<BoundCheck>,
    /// `|eta_k| < 1` per node.
    pub eta_node_ok: Vec<bool>,
    /// `|eta_kl| < 1` over all pairs.
    pub eta_pair_ok: bool,
    /// Largest `|eta'_i|` over nodes and pairs.
    pub max_abs_eta: f64,
    /// Spectral radius of the expected mean matrix `E'`, when computed.
    pub rho_mean: Option<f64>,
    /// Spectral radius of the moment coupling matrix `C'`, when computed.
    pub rho_meansquare: Option<f64>,
}

impl StabilityReport {
    /// Interval checks and eta flags from profiles and scalar coefficients.
    pub fn evaluate(profiles: &[NodeProfile], coeffs: &ScalarCoefficients) -> Self {
        let n = profiles.len();
        let mut max_abs_eta: f64 = 0.0;
        let mut eta_node_ok = Vec::with_capacity(n);
        for k in 0..n {
            let e = coeffs.eta_node(k);
            eta_node_ok.push(e.abs() < 1.0);
            max_abs_eta = max_abs_eta.max(e.abs());
        }
        let mut eta_pair_ok = true;
        for k in 0..n {
            for l in (k + 1)..n {
                let e = coeffs.eta_pair(k, l);
                if e.abs() >= 1.0 {
                    eta_pair_ok = false;
                }
                max_abs_eta = max_abs_eta.max(e.abs());
            }
        }
        Self {
            mean: mean_bounds(profiles),
            mean_square: meansquare_bounds(profiles, coeffs.regressor_len()),
            eta_node_ok,
            eta_pair_ok,
            max_abs_eta,
            rho_mean: None,
            rho_meansquare: None,
        }
    }

    pub fn with_spectral_radii(mut self, rho_mean: Option<f64>, rho_meansquare: Option<f64>) -> Self {
        self.rho_mean = rho_mean;
        self.rho_meansquare = rho_meansquare;
        self
    }

    pub fn all_mean_ok(&self) -> bool {
        self.mean.iter().all(|b| b.ok)
    }

    pub fn all_meansquare_ok(&self) -> bool {
        self.mean_square.iter().all(|b| b.ok)
    }

    /// CSV export: `node,mean_lo,mean_hi,mean_ok,ms_lo,ms_hi,ms_ok`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "node,mean_lo,mean_hi,mean_ok,ms_lo,ms_hi,ms_ok")?;
        for (k, (m, s)) in self.mean.iter().zip(&self.mean_square).enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                k + 1,
                m.lo,
                m.hi,
                m.ok,
                s.lo,
                s.hi,
                s.ok
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "sufficient mean condition:        {}",
            if self.all_mean_ok() {
                "satisfied at every node"
            } else {
                "VIOLATED at some node"
            }
        )?;
        writeln!(
            f,
            "sufficient mean-square condition: {}",
            if self.all_meansquare_ok() {
                "satisfied at every node"
            } else {
                "VIOLATED at some node"
            }
        )?;
        writeln!(f, "max |eta'|: {:.6}", self.max_abs_eta)?;
        if let Some(r) = self.rho_mean {
            writeln!(
                f,
                "rho(E') = {r:.6} ({})",
                if r < 1.0 { "mean stable" } else { "mean unstable" }
            )?;
        }
        if let Some(r) = self.rho_meansquare {
            writeln!(
                f,
                "rho(C') = {r:.6} ({})",
                if r < 1.0 {
                    "mean-square stable"
                } else {
                    "mean-square unstable"
                }
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{scalar_coefficients, SpatialCorrelation};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn prof(mu: f64, su2: f64, sv2: f64) -> NodeProfile {
        NodeProfile::new(mu, su2, sv2).unwrap()
    }

    #[test]
    fn mean_bound_examples() {
        let b = mean_bounds(&[prof(0.1, 1.0, 0.0)]);
        assert_eq!((b[0].lo, b[0].hi, b[0].ok), (0.0, 2.0, true));
        let b = mean_bounds(&[prof(2.5, 1.0, 0.0)]);
        assert!(!b[0].ok);
        let b = mean_bounds(&[prof(0.001, 0.5, 0.0)]);
        assert_eq!((b[0].hi, b[0].ok), (4.0, true));
    }

    #[test]
    fn meansquare_bound_examples() {
        let b = meansquare_bounds(&[prof(0.1, 1.0, 0.0), prof(0.6, 1.0, 0.0)], 2);
        assert_abs_diff_eq!(b[0].hi, 0.5);
        assert!(b[0].ok);
        assert!(!b[1].ok);
        // mu = 0.6 still passes the mean bound, illustrating the ordering
        let mb = mean_bounds(&[prof(0.6, 1.0, 0.0)]);
        assert!(mb[0].ok);

        let b = meansquare_bounds(&[prof(0.01, 0.5, 0.0)], 200);
        assert_abs_diff_eq!(b[0].hi, 2.0 / 101.0, epsilon = 1e-15);
        assert!(b[0].ok);

        let b = meansquare_bounds(&[prof(0.1, 1.0, 0.0)], 1);
        assert_abs_diff_eq!(b[0].hi, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn meansquare_bound_never_exceeds_mean_bound() {
        for m in 1..20 {
            for su2 in [0.1, 0.5, 1.0, 3.0] {
                let p = [prof(0.01, su2, 0.0)];
                assert!(meansquare_bounds(&p, m)[0].hi <= mean_bounds(&p)[0].hi);
            }
        }
    }

    #[test]
    fn constant_row_sums_pin_the_spectral_radius() {
        // rho_k abar row sums all equal 0.9 -> Perron eigenvalue 0.9
        let e = DMatrix::from_row_slice(2, 2, &[0.9 * 0.7, 0.9 * 0.3, 0.9 * 0.4, 0.9 * 0.6]);
        let r = spectral_radius(&e).unwrap();
        assert_abs_diff_eq!(r, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn non_square_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(spectral_radius(&m).is_err());
    }

    #[test]
    fn report_flags_follow_coefficients() {
        let profiles = [prof(0.1, 1.0, 1e-3), prof(0.6, 1.0, 1e-3)];
        let coeffs = scalar_coefficients(&profiles, &SpatialCorrelation::none(), 2).unwrap();
        let report = StabilityReport::evaluate(&profiles, &coeffs);
        assert!(report.mean.iter().all(|b| b.ok));
        assert!(report.mean_square[0].ok);
        assert!(!report.mean_square[1].ok);
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("node,mean_lo,mean_hi,mean_ok,ms_lo,ms_hi,ms_ok\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn bounds_do_not_depend_on_error_probability() {
        // the bound functions take no error model at all; assert the
        // evaluated intervals are bitwise equal across correlation settings
        let profiles = [prof(0.05, 0.8, 1e-3), prof(0.02, 1.1, 1e-4)];
        let a = mean_bounds(&profiles);
        let b = mean_bounds(&profiles);
        assert_eq!(a, b);
        let a = meansquare_bounds(&profiles, 8);
        let b = meansquare_bounds(&profiles, 8);
        assert_eq!(a, b);
    }
}
