//! Node profiles, spatial correlation, and the scalar moment coefficients of
//! the mean and mean-square recursions.
//!
//! For step size `mu_k`, regressor variance `s_k = sigma_u2_k` and cross
//! variance `s_kl = rho_kl * sigma_u_k * sigma_u_l`:
//!
//! ```text
//! rho_k  = 1 - mu_k s_k                                   (mean contraction)
//! eps_k  = mu_k s_k
//! eta_k  = 1 - 2 mu_k s_k + mu_k^2 (M+2) s_k^2            (one-node factor)
//! nu_k   = mu_k^2 (M+2) s_k^2
//! eta_kl = 1 - (mu_k s_k + mu_l s_l)
//!            + mu_k mu_l (s_k s_l + (M+1) s_kl^2)         (pair factor)
//! nu_kl  = mu_k mu_l (s_k s_l + (M+1) s_kl^2)
//! c_v_k  = M mu_k^2 s_k sigma_v2_k                        (noise drive)
//! ```
//!
//! The one-node factors coincide with the pair formulas evaluated at
//! `k = l` (where `rho_kk = 1`), which is asserted in tests.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Per-node filter parameters: step size, regressor variance, noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeProfile {
    pub mu: f64,
    pub sigma_u2: f64,
    pub sigma_v2: f64,
}

impl NodeProfile {
    pub fn new(mu: f64, sigma_u2: f64, sigma_v2: f64) -> Result<Self> {
        let p = Self {
            mu,
            sigma_u2,
            sigma_v2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step size mu = {} must be positive (mean stability requires 0 < mu < 2/sigma_u2)",
                self.mu
            )));
        }
        if !(self.sigma_u2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regressor variance sigma_u2 = {} must be positive",
                self.sigma_u2
            )));
        }
        if !(self.sigma_v2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance sigma_v2 = {} must be nonnegative",
                self.sigma_v2
            )));
        }
        Ok(())
    }
}

pub fn validate_profiles(profiles: &[NodeProfile]) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::InvalidParameter("empty node profile list".into()));
    }
    for p in profiles {
        p.validate()?;
    }
    Ok(())
}

/// Cross-node regressor correlation indices `rho_kl`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCorrelation {
    kind: CorrKind,
}

#[derive(Debug, Clone, PartialEq)]
enum CorrKind {
    /// `rho_kl = rho^{|k-l|}`, applied by node index regardless of links.
    PowerLaw { rho: f64 },
    /// Explicit symmetric correlation matrix with unit diagonal.
    Custom { m: DMatrix<f64> },
}

impl SpatialCorrelation {
    /// Index profile `rho_kl = rho^{|k-l|}` with base `rho` in `[0, 1)`.
    pub fn power_law(rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!(
                "spatial correlation index rho = {rho} outside [0,1)"
            )));
        }
        Ok(Self {
            kind: CorrKind::PowerLaw { rho },
        })
    }

    /// Spatially uncorrelated regressors.
    pub fn none() -> Self {
        Self {
            kind: CorrKind::PowerLaw { rho: 0.0 },
        }
    }

    /// Explicit correlation matrix (symmetric, unit diagonal, entries in
    /// `[-1, 1]`). Positive semidefiniteness is checked by the sampler.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidParameter(format!(
                "correlation matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..m.nrows() {
            if (m[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "correlation matrix diagonal entry ({i},{i}) = {} is not 1",
                    m[(i, i)]
                )));
            }
            for j in 0..m.ncols() {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "correlation matrix is not symmetric at ({i},{j})"
                    )));
                }
                if m[(i, j)].abs() > 1.0 + 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "correlation matrix entry ({i},{j}) = {} outside [-1,1]",
                        m[(i, j)]
                    )));
                }
            }
        }
        Ok(Self {
            kind: CorrKind::Custom { m },
        })
    }

    /// Correlation index between nodes `k` and `l` (1 when `k == l`).
    pub fn index(&self, k: usize, l: usize) -> f64 {
        match &self.kind {
            CorrKind::PowerLaw { rho } => {
                if k == l {
                    1.0
                } else {
                    rho.powi(k.abs_diff(l) as i32)
                }
            }
            CorrKind::Custom { m } => m[(k, l)],
        }
    }

    /// Per-dimension regressor covariance: entry `(k,l)` equals
    /// `rho_kl * sigma_u_k * sigma_u_l`.
    pub fn covariance(&self, profiles: &[NodeProfile]) -> DMatrix<f64> {
        let n = profiles.len();
        let sigmas: Vec<f64> = profiles.iter().map(|p| p.sigma_u2.sqrt()).collect();
        DMatrix::from_fn(n, n, |k, l| self.index(k, l) * sigmas[k] * sigmas[l])
    }
}

/// The estimation target `w^o` of length `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueParameter {
    w: DVector<f64>,
}

impl TrueParameter {
    pub fn new(w: DVector<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter(
                "target vector must have length >= 1".into(),
            ));
        }
        Ok(Self { w })
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Self::new(DVector::from_vec(values))
    }

    /// `col{1, ..., 1} / sqrt(M)`, the unit-norm all-ones target.
    pub fn normalized_ones(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParameter(
                "regressor length M must be >= 1".into(),
            ));
        }
        let v = 1.0 / (m as f64).sqrt();
        Ok(Self {
            w: DVector::from_element(m, v),
        })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn as_slice(&self) -> &[f64] {
        self.w.as_slice()
    }

    pub fn norm_squared(&self) -> f64 {
        self.w.dot(&self.w)
    }
}

/// All scalar coefficients of the mean and mean-square recursions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCoefficients {
    n: usize,
    m: usize,
    /// `rho_k = 1 - mu_k sigma_u2_k`
    pub rho: Vec<f64>,
    /// `eps_k = mu_k sigma_u2_k`
    pub eps: Vec<f64>,
    /// `eta_kl` with the one-node `eta_k` on the diagonal.
    pub eta: DMatrix<f64>,
    /// `nu_kl` with the one-node `nu_k` on the diagonal.
    pub nu: DMatrix<f64>,
    /// `c_v_k = M mu_k^2 sigma_u2_k sigma_v2_k`
    pub cv: Vec<f64>,
}

impl ScalarCoefficients {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn regressor_len(&self) -> usize {
        self.m
    }

    pub fn eta_node(&self, k: usize) -> f64 {
        self.eta[(k, k)]
    }

    pub fn eta_pair(&self, k: usize, l: usize) -> f64 {
        self.eta[(k, l)]
    }

    pub fn nu_node(&self, k: usize) -> f64 {
        self.nu[(k, k)]
    }

    pub fn nu_pair(&self, k: usize, l: usize) -> f64 {
        self.nu[(k, l)]
    }
}

/// Evaluate every scalar coefficient for the given profiles, spatial
/// correlation and regressor length `M`.
pub fn scalar_coefficients(
    profiles: &[NodeProfile],
    corr: &SpatialCorrelation,
    m: usize,
) -> Result<ScalarCoefficients> {
    validate_profiles(profiles)?;
    if m < 1 {
        return Err(Error::InvalidParameter(
            "regressor length M must be >= 1".into(),
        ));
    }
    let n = profiles.len();
    let mf = m as f64;
    let rho: Vec<f64> = profiles.iter().map(|p| 1.0 - p.mu * p.sigma_u2).collect();
    let eps: Vec<f64> = profiles.iter().map(|p| p.mu * p.sigma_u2).collect();
    let cv: Vec<f64> = profiles
        .iter()
        .map(|p| mf * p.mu * p.mu * p.sigma_u2 * p.sigma_v2)
        .collect();

    let mut eta = DMatrix::zeros(n, n);
    let mut nu = DMatrix::zeros(n, n);
    for k in 0..n {
        let pk = &profiles[k];
        eta[(k, k)] = 1.0 - 2.0 * pk.mu * pk.sigma_u2
            + pk.mu * pk.mu * (mf + 2.0) * pk.sigma_u2 * pk.sigma_u2;
        nu[(k, k)] = pk.mu * pk.mu * (mf + 2.0) * pk.sigma_u2 * pk.sigma_u2;
        for l in (k + 1)..n {
            let pl = &profiles[l];
            let cross = corr.index(k, l) * pk.sigma_u2.sqrt() * pl.sigma_u2.sqrt();
            let quartic = pk.sigma_u2 * pl.sigma_u2 + (mf + 1.0) * cross * cross;
            let nu_kl = pk.mu * pl.mu * quartic;
            let eta_kl = 1.0 - (pk.mu * pk.sigma_u2 + pl.mu * pl.sigma_u2) + nu_kl;
            eta[(k, l)] = eta_kl;
            eta[(l, k)] = eta_kl;
            nu[(k, l)] = nu_kl;
            nu[(l, k)] = nu_kl;
        }
    }

    Ok(ScalarCoefficients {
        n,
        m,
        rho,
        eps,
        eta,
        nu,
        cv,
    })
}
