//! Eigenvalue-ratio and non-singularity constraints on a set of covariances.
//!
//! With `M` and `m` the largest and smallest eigenvalues over all component
//! covariances, a system is feasible when `M / m <= c` and `m >= c1`.
//! Infeasible systems are projected by clipping every eigenvalue into a common
//! window `[t, c t]`, `t >= c1`, keeping eigenvectors fixed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{sorted_eigen, CovMatrix};

/// Relative slack used when checking the bounds, to absorb the rounding
/// introduced by rebuilding a matrix from its spectrum.
const CHECK_RTOL: f64 = 1e-10;

/// Stand-in for non-positive eigenvalues of a singular scatter inside the log cost.
const TINY_EIGENVALUE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintConfig {
    /// Upper bound on `M / m`.
    pub c: f64,
    /// Lower bound on `m`.
    pub c1: f64,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self { c: 20.0, c1: 0.1 }
    }
}

impl ConstraintConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 1.0) || !self.c.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "c must be >= 1, got {}",
                self.c
            )));
        }
        if !(self.c1 > 0.0) || !self.c1.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "c1 must be > 0, got {}",
                self.c1
            )));
        }
        Ok(())
    }

    fn ratio_ok(&self, max: f64, min: f64) -> bool {
        max <= self.c * min * (1.0 + CHECK_RTOL)
    }

    fn floor_ok(&self, min: f64) -> bool {
        min >= self.c1 * (1.0 - CHECK_RTOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub feasible: bool,
    /// Largest eigenvalue over all components.
    pub max_eig: f64,
    /// Smallest eigenvalue over all components.
    pub min_eig: f64,
}

fn extreme_eigenvalues(spectra: &[Vec<f64>]) -> (f64, f64) {
    spectra
        .iter()
        .flatten()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &v| {
            (hi.max(v), lo.min(v))
        })
}

pub fn check_constraints(covs: &[CovMatrix], cfg: &ConstraintConfig) -> Result<ConstraintCheck> {
    let matrices: Vec<&DMatrix<f64>> = covs.iter().map(|c| c.matrix()).collect();
    let spectra = spectra_of(&matrices)?;
    let (max_eig, min_eig) =
        extreme_eigenvalues(&spectra.iter().map(|s| s.0.clone()).collect::<Vec<_>>());
    Ok(ConstraintCheck {
        feasible: cfg.ratio_ok(max_eig, min_eig) && cfg.floor_ok(min_eig),
        max_eig,
        min_eig,
    })
}

fn spectra_of(matrices: &[&DMatrix<f64>]) -> Result<Vec<(Vec<f64>, DMatrix<f64>)>> {
    let first = matrices.first().ok_or(Error::EmptyData)?;
    let p = first.nrows();
    let mut out = Vec::with_capacity(matrices.len());
    for m in matrices {
        if m.nrows() != p || m.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: m.nrows(),
            });
        }
        let (values, vectors) = sorted_eigen(m);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen);
        }
        out.push((values, vectors));
    }
    Ok(out)
}

/// Sum of squared log-deviations caused by clipping into `[exp(u), exp(u) c]`.
fn clip_cost(log_eigs: &[f64], u: f64, log_c: f64) -> f64 {
    log_eigs
        .iter()
        .map(|&l| {
            let d = l.clamp(u, u + log_c) - l;
            d * d
        })
        .sum()
}

/// Chooses the window floor `t >= c1` minimizing the squared log-deviation.
///
/// In `u = ln t` the cost is convex and piecewise quadratic with breakpoints
/// at `ln lambda` and `ln lambda - ln c`, so its minimizer is either a
/// breakpoint, the floor `ln c1`, or the stationary point of a segment.
pub fn clip_threshold(eigenvalues: &[f64], cfg: &ConstraintConfig) -> f64 {
    let log_c = cfg.c.ln();
    let log_c1 = cfg.c1.ln();
    let log_eigs: Vec<f64> = eigenvalues
        .iter()
        .map(|&v| v.max(TINY_EIGENVALUE).ln())
        .collect();

    let mut candidates = vec![log_c1];
    for &l in &log_eigs {
        candidates.push(l);
        candidates.push(l - log_c);
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut stationary = Vec::new();
    for w in candidates.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let (mut sum, mut count) = (0.0, 0usize);
        for &l in &log_eigs {
            if l < mid {
                sum += l;
                count += 1;
            } else if l > mid + log_c {
                sum += l - log_c;
                count += 1;
            }
        }
        if count > 0 {
            let u = sum / count as f64;
            if u >= w[0] && u <= w[1] {
                stationary.push(u);
            }
        }
    }
    candidates.extend(stationary);

    let mut best = (f64::INFINITY, log_c1);
    for &u in candidates.iter().filter(|&&u| u >= log_c1) {
        let cost = clip_cost(&log_eigs, u, log_c);
        if cost < best.0 || (cost == best.0 && u < best.1) {
            best = (cost, u);
        }
    }
    best.1.exp().max(cfg.c1)
}

/// Projects onto the feasible set. Feasible input is returned unchanged.
pub fn enforce_constraints(covs: &[CovMatrix], cfg: &ConstraintConfig) -> Result<Vec<CovMatrix>> {
    cfg.validate()?;
    if check_constraints(covs, cfg)?.feasible {
        return Ok(covs.to_vec());
    }
    let matrices: Vec<&DMatrix<f64>> = covs.iter().map(|c| c.matrix()).collect();
    project(&matrices, cfg)
}

/// Projects symmetric matrices that may be singular or indefinite.
pub(crate) fn enforce_raw(
    matrices: &[&DMatrix<f64>],
    cfg: &ConstraintConfig,
) -> Result<Vec<CovMatrix>> {
    cfg.validate()?;
    let valid: Option<Vec<CovMatrix>> = matrices
        .iter()
        .map(|m| CovMatrix::new((*m).clone()).ok())
        .collect();
    match valid {
        Some(covs) => enforce_constraints(&covs, cfg),
        None => project(matrices, cfg),
    }
}

fn project(matrices: &[&DMatrix<f64>], cfg: &ConstraintConfig) -> Result<Vec<CovMatrix>> {
    let spectra = spectra_of(matrices)?;
    let all: Vec<f64> = spectra.iter().flat_map(|s| s.0.iter().copied()).collect();
    let t = clip_threshold(&all, cfg);
    let hi = cfg.c * t;
    spectra
        .iter()
        .map(|(values, vectors)| {
            let clipped: Vec<f64> = values.iter().map(|&v| v.clamp(t, hi)).collect();
            CovMatrix::from_spectrum(vectors, &clipped)
        })
        .collect()
}
