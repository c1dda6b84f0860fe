//! Multivariate normal kernels.
//!
//! Everything is evaluated in log space. Powers of the density are taken as
//! `exp(beta * log_density)`, which keeps `phi^beta` representable even when
//! `phi` itself is of order `1e-24` (ten-dimensional data, far from the mean).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::ObservationSet;
use crate::error::{Error, Result};

const SYMMETRY_RTOL: f64 = 1e-12;

/// A symmetric positive-definite covariance matrix with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    entries: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
    log_det: f64,
}

impl CovMatrix {
    /// Validates symmetry (relative tolerance `1e-12`) and positive
    /// definiteness. The stored matrix is the exact symmetrization of the input.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let scale = entries.amax().max(f64::MIN_POSITIVE);
        let asym = (&entries - entries.transpose()).amax();
        if asym > SYMMETRY_RTOL * scale {
            return Err(Error::NotSymmetric(asym / scale));
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        let chol = sym.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let chol_lower = chol.l();
        let log_det = 2.0 * chol_lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            entries: sym,
            chol_lower,
            log_det,
        })
    }

    /// Symmetrizes `(m + m^T) / 2` before validating.
    pub fn from_symmetrized(m: DMatrix<f64>) -> Result<Self> {
        let sym = (&m + m.transpose()) * 0.5;
        Self::new(sym)
    }

    pub fn identity(p: usize) -> Self {
        Self::scaled_identity(p, 1.0)
    }

    pub fn scaled_identity(p: usize, scale: f64) -> Self {
        Self::new(DMatrix::identity(p, p) * scale).expect("positive scale")
    }

    /// Rebuilds `V diag(values) V^T`.
    pub fn from_spectrum(vectors: &DMatrix<f64>, values: &[f64]) -> Result<Self> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(values));
        Self::from_symmetrized(vectors * d * vectors.transpose())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn det(&self) -> f64 {
        self.log_det.exp()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut inv = DMatrix::identity(p, p);
        self.chol_lower.solve_lower_triangular_mut(&mut inv);
        self.chol_lower.tr_solve_lower_triangular_mut(&mut inv);
        inv
    }

    /// Eigenvalues in ascending order together with matching eigenvectors.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        sorted_eigen(&self.entries)
    }

    /// `(x - mu)^T Sigma^{-1} (x - mu)` for a precomputed difference.
    fn quad_form(&self, diff: &mut [f64]) -> f64 {
        // forward substitution L z = d, in place
        let p = diff.len();
        let l = &self.chol_lower;
        let mut acc = 0.0;
        for i in 0..p {
            let mut s = diff[i];
            for j in 0..i {
                s -= l[(i, j)] * diff[j];
            }
            let z = s / l[(i, i)];
            diff[i] = z;
            acc += z * z;
        }
        acc
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

impl Serialize for CovMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self
            .entries
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CovMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(serde::de::Error::custom("covariance must be square"));
        }
        let m = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
        CovMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// One normal component `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    #[serde(with = "dvector_serde")]
    pub mean: DVector<f64>,
    pub cov: CovMatrix,
}

impl GaussianComponent {
    pub fn new(mean: DVector<f64>, cov: CovMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn standard(p: usize) -> Self {
        Self {
            mean: DVector::zeros(p),
            cov: CovMatrix::identity(p),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.mahalanobis_sq_unchecked(x))
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.log_density_unchecked(x))
    }

    pub(crate) fn mahalanobis_sq_unchecked(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let mut buf = [0.0; 16];
        if x.len() <= buf.len() {
            let diff = &mut buf[..x.len()];
            for ((d, xi), mi) in diff.iter_mut().zip(x).zip(self.mean.iter()) {
                *d = xi - mi;
            }
            self.cov.quad_form(diff)
        } else {
            let mut diff: Vec<f64> = x.iter().zip(self.mean.iter()).map(|(a, b)| a - b).collect();
            self.cov.quad_form(&mut diff)
        }
    }

    /// Log normalizing constant `-(p/2) log 2 pi - (1/2) log |Sigma|`.
    pub fn log_norm_const(&self) -> f64 {
        -0.5 * self.dim() as f64 * (2.0 * PI).ln() - 0.5 * self.cov.log_det()
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        self.log_norm_const() - 0.5 * self.mahalanobis_sq_unchecked(x)
    }
}

/// `(x - mu)^T Sigma^{-1} (x - mu)`.
pub fn mahalanobis_sq(x: &[f64], comp: &GaussianComponent) -> Result<f64> {
    comp.mahalanobis_sq(x)
}

/// `log phi_p(x; mu, Sigma)`.
pub fn log_density(x: &[f64], comp: &GaussianComponent) -> Result<f64> {
    comp.log_density(x)
}

/// Closed form of `\int phi_p^{1+beta}`:
/// `(2 pi)^{-p beta / 2} |Sigma|^{-beta / 2} (1 + beta)^{-p / 2}`.
pub fn dpd_integral(cov: &CovMatrix, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    Ok(log_dpd_integral(cov, beta).exp())
}

pub(crate) fn log_dpd_integral(cov: &CovMatrix, beta: f64) -> f64 {
    let p = cov.dim() as f64;
    -0.5 * p * beta * (2.0 * PI).ln() - 0.5 * beta * cov.log_det() - 0.5 * p * (1.0 + beta).ln()
}

/// The single-component beta-likelihood
/// `(1/(n beta)) sum phi^beta(X_i) - (1/(1+beta)) \int phi^{1+beta}`.
///
/// At `beta == 0` the mean log-likelihood is returned instead.
pub fn component_beta_objective(
    data: &ObservationSet,
    comp: &GaussianComponent,
    beta: f64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.dim() != comp.dim() {
        return Err(Error::DimensionMismatch {
            expected: comp.dim(),
            found: data.dim(),
        });
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    let n = data.len() as f64;
    if beta == 0.0 {
        let sum: f64 = data.rows().map(|x| comp.log_density_unchecked(x)).sum();
        return Ok(sum / n);
    }
    let sum: f64 = data
        .rows()
        .map(|x| (beta * comp.log_density_unchecked(x)).exp())
        .sum();
    Ok(sum / (n * beta) - dpd_integral(&comp.cov, beta)? / (1.0 + beta))
}

pub(crate) mod dvector_serde {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}
