//! Minimum density power divergence fit of a single normal component.
//!
//! The estimating equations are solved by iteratively reweighted least
//! squares: each observation gets weight `exp(-beta/2 * d^2)` and the mean and
//! scatter are re-estimated from the weighted data, with the scatter
//! denominator corrected by `n beta / (1 + beta)^(p/2 + 1)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::gaussian::{log_dpd_integral, sorted_eigen, CovMatrix, GaussianComponent};

const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrlsConfig {
    /// Stopping tolerance on both the mean step (Euclidean) and the
    /// covariance step (Frobenius).
    pub epsilon: f64,
    pub max_iter: usize,
    /// Relative guard: the scatter denominator must exceed
    /// `min_denominator * n`.
    pub min_denominator: f64,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iter: 500,
            min_denominator: 1e-8,
        }
    }
}

impl IrlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.min_denominator > 0.0) {
            return Err(Error::InvalidConfig(
                "min_denominator must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentFit {
    pub estimate: GaussianComponent,
    pub iterations: usize,
    pub converged: bool,
    pub final_weights: Vec<f64>,
    /// Set when `n < p + 1`; the fit is returned but poorly determined.
    pub underdetermined: bool,
}

/// Starting value together with the coordinates whose MAD collapsed to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustStart {
    pub component: GaussianComponent,
    pub degenerate_coordinates: Vec<usize>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Componentwise medians and the multivariate MAD scatter.
pub fn robust_init(data: &ObservationSet, cfg: &IrlsConfig) -> Result<RobustStart> {
    let (n, p) = (data.len(), data.dim());
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let mut column = vec![0.0; n];
    let center: Vec<f64> = (0..p)
        .map(|j| {
            for (c, row) in column.iter_mut().zip(data.rows()) {
                *c = row[j];
            }
            median(&mut column)
        })
        .collect();

    let mut scatter = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            for (c, row) in column.iter_mut().zip(data.rows()) {
                *c = (row[a] - center[a]) * (row[b] - center[b]);
            }
            let v = MAD_SCALE * MAD_SCALE * median(&mut column);
            scatter[(a, b)] = v;
            scatter[(b, a)] = v;
        }
    }
    let degenerate_coordinates: Vec<usize> = (0..p).filter(|&j| scatter[(j, j)] <= 0.0).collect();

    let floor = cfg.min_denominator * scatter.trace().max(1.0);
    let (values, vectors) = sorted_eigen(&scatter);
    let floored: Vec<f64> = values.iter().map(|&v| v.max(floor)).collect();
    let cov = CovMatrix::from_spectrum(&vectors, &floored)?;
    Ok(RobustStart {
        component: GaussianComponent::new(DVector::from_vec(center), cov)?,
        degenerate_coordinates,
    })
}

/// `w_i = exp(-(beta/2) (X_i - mu)^T Sigma^{-1} (X_i - mu))`.
pub fn irls_weights(
    data: &ObservationSet,
    comp: &GaussianComponent,
    beta: f64,
) -> Result<Vec<f64>> {
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
    Ok(data
        .rows()
        .map(|x| (-0.5 * beta * comp.mahalanobis_sq_unchecked(x)).exp())
        .collect())
}

/// Correction subtracted from the weight total in the scatter update.
pub fn denominator_correction(n: usize, p: usize, beta: f64) -> f64 {
    n as f64 * beta / (1.0 + beta).powf(0.5 * p as f64 + 1.0)
}

/// The raw update: new mean and symmetrized (possibly singular) scatter.
pub(crate) fn irls_update(
    data: &ObservationSet,
    weights: &[f64],
    beta: f64,
    cfg: &IrlsConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, p) = (data.len(), data.dim());
    let total: f64 = weights.iter().sum();
    let denominator = total - denominator_correction(n, p, beta);
    let guard = cfg.min_denominator * n as f64;
    if !(denominator > guard) {
        return Err(Error::NonPositiveDenominator { denominator, guard });
    }
    let mut mean = DVector::zeros(p);
    for (row, &w) in data.rows().zip(weights) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += w * x;
        }
    }
    mean /= total;
    let mut scatter = DMatrix::zeros(p, p);
    let mut d = DVector::zeros(p);
    for (row, &w) in data.rows().zip(weights) {
        for ((di, x), m) in d.iter_mut().zip(row).zip(mean.iter()) {
            *di = x - m;
        }
        scatter.ger(w, &d, &d, 1.0);
    }
    scatter /= denominator;
    let scatter = (&scatter + scatter.transpose()) * 0.5;
    Ok((mean, scatter))
}

/// One reweighting step from `comp`.
pub fn irls_step(
    data: &ObservationSet,
    comp: &GaussianComponent,
    beta: f64,
    cfg: &IrlsConfig,
) -> Result<GaussianComponent> {
    let weights = irls_weights(data, comp, beta)?;
    let (mean, scatter) = irls_update(data, &weights, beta, cfg)?;
    GaussianComponent::new(mean, CovMatrix::new(scatter)?)
}

/// How an iteration ended when it could not produce a valid next iterate.
#[derive(Debug)]
pub(crate) struct IrlsFailure {
    pub error: Error,
    /// The singular update when the failure was a non-positive-definite scatter.
    pub raw: Option<(DVector<f64>, DMatrix<f64>)>,
}

#[derive(Debug)]
pub(crate) struct IrlsRun {
    pub last_valid: GaussianComponent,
    pub iterations: usize,
    pub converged: bool,
    pub failure: Option<IrlsFailure>,
}

pub(crate) fn iterate(
    data: &ObservationSet,
    beta: f64,
    cfg: &IrlsConfig,
    start: GaussianComponent,
) -> IrlsRun {
    let mut current = start;
    for it in 1..=cfg.max_iter {
        let weights = match irls_weights(data, &current, beta) {
            Ok(w) => w,
            Err(error) => {
                return IrlsRun {
                    last_valid: current,
                    iterations: it - 1,
                    converged: false,
                    failure: Some(IrlsFailure { error, raw: None }),
                }
            }
        };
        let (mean, scatter) = match irls_update(data, &weights, beta, cfg) {
            Ok(u) => u,
            Err(error) => {
                return IrlsRun {
                    last_valid: current,
                    iterations: it - 1,
                    converged: false,
                    failure: Some(IrlsFailure { error, raw: None }),
                }
            }
        };
        let cov = match CovMatrix::new(scatter.clone()) {
            Ok(c) => c,
            Err(error) => {
                return IrlsRun {
                    last_valid: current,
                    iterations: it - 1,
                    converged: false,
                    failure: Some(IrlsFailure {
                        error,
                        raw: Some((mean, scatter)),
                    }),
                }
            }
        };
        let mean_step = (&mean - &current.mean).norm();
        let cov_step = (cov.matrix() - current.cov.matrix()).norm();
        current = GaussianComponent { mean, cov };
        if mean_step <= cfg.epsilon && cov_step <= cfg.epsilon {
            return IrlsRun {
                last_valid: current,
                iterations: it,
                converged: true,
                failure: None,
            };
        }
    }
    IrlsRun {
        last_valid: current,
        iterations: cfg.max_iter,
        converged: false,
        failure: None,
    }
}

/// Fits one component from the robust starting value.
pub fn fit_component(data: &ObservationSet, beta: f64, cfg: &IrlsConfig) -> Result<ComponentFit> {
    cfg.validate()?;
    let start = robust_init(data, cfg)?.component;
    fit_component_from(data, beta, cfg, start)
}

/// Fits one component starting from `start` (used for warm starts).
pub fn fit_component_from(
    data: &ObservationSet,
    beta: f64,
    cfg: &IrlsConfig,
    start: GaussianComponent,
) -> Result<ComponentFit> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: data.len(),
        });
    }
    if start.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: start.dim(),
        });
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    let run = iterate(data, beta, cfg, start);
    if let Some(f) = run.failure {
        return Err(f.error);
    }
    let final_weights = irls_weights(data, &run.last_valid, beta)?;
    Ok(ComponentFit {
        underdetermined: data.len() < data.dim() + 1,
        estimate: run.last_valid,
        iterations: run.iterations,
        converged: run.converged,
        final_weights,
    })
}

/// Left minus right side of the density-weighted estimating equations:
/// `(1/n) sum phi^beta (X_i - mu)` and
/// `(1/n) sum phi^beta (Sigma - (X_i - mu)(X_i - mu)^T) - c0 Sigma`.
pub fn estimating_equation_residual(
    data: &ObservationSet,
    comp: &GaussianComponent,
    beta: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    weighted_residual(
        data,
        comp,
        |x| (beta * comp.log_density_unchecked(x)).exp(),
        c0(comp, beta),
    )
}

/// `c0 = beta (2 pi)^{-p beta/2} |Sigma|^{-beta/2} (1 + beta)^{-(p+2)/2}`.
pub fn c0(comp: &GaussianComponent, beta: f64) -> f64 {
    // the DPD integral carries (1+beta)^{-p/2}; one more factor of (1+beta)^{-1}
    beta * (log_dpd_integral(&comp.cov, beta)).exp() / (1.0 + beta)
}

/// The same equations with the exponential weights `exp(-beta/2 d^2)` and
/// right-hand constant `beta / (1 + beta)^{p/2 + 1}`.
pub fn exponential_weight_residual(
    data: &ObservationSet,
    comp: &GaussianComponent,
    beta: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let rhs = beta / (1.0 + beta).powf(0.5 * comp.dim() as f64 + 1.0);
    weighted_residual(
        data,
        comp,
        |x| (-0.5 * beta * comp.mahalanobis_sq_unchecked(x)).exp(),
        rhs,
    )
}

fn weighted_residual<W: Fn(&[f64]) -> f64>(
    data: &ObservationSet,
    comp: &GaussianComponent,
    weight: W,
    rhs: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.dim() != comp.dim() {
        return Err(Error::DimensionMismatch {
            expected: comp.dim(),
            found: data.dim(),
        });
    }
    let p = comp.dim();
    let sigma = comp.cov.matrix();
    let mut r_mean = DVector::zeros(p);
    let mut r_cov = DMatrix::zeros(p, p);
    let mut d = DVector::zeros(p);
    for x in data.rows() {
        let w = weight(x);
        for ((di, xi), mi) in d.iter_mut().zip(x).zip(comp.mean.iter()) {
            *di = xi - mi;
        }
        r_mean.axpy(w, &d, 1.0);
        r_cov += sigma * w;
        r_cov.ger(-w, &d, &d, 1.0);
    }
    let n = data.len() as f64;
    r_mean /= n;
    r_cov /= n;
    r_cov -= sigma * rhs;
    Ok((r_mean, r_cov))
}
