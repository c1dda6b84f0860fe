//! Robust hard clustering by maximizing the pseudo beta-likelihood.
//!
//! Each restart alternates between the weight update `pi_j = n_j / n`, a
//! minimum-DPD fit of every cluster, projection onto the eigenvalue
//! constraints and reassignment by the discriminant `D_j = pi_j phi_j`, until
//! the partition stops changing. Points whose discriminant at their own
//! cluster is at most `T` are flagged as outliers of that cluster's type.

use nalgebra::{DMatrix, DVector};
use rand::{seq::index::sample, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{enforce_raw, ConstraintConfig};
use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::gaussian::{log_dpd_integral, CovMatrix, GaussianComponent};
use crate::mdpde::{iterate, robust_init, IrlsConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub components: Vec<GaussianComponent>,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.dim())
    }

    pub fn covariances(&self) -> Vec<CovMatrix> {
        self.components.iter().map(|c| c.cov.clone()).collect()
    }

    /// `log D_j(x) = log pi_j + log phi(x; mu_j, Sigma_j)`.
    pub fn log_discriminant(&self, x: &[f64], j: usize) -> f64 {
        self.weights[j].ln() + self.components[j].log_density_unchecked(x)
    }
}

/// How observations are allocated to clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentRule {
    /// Largest discriminant `pi_j phi_j(x)`.
    #[default]
    Likelihood,
    /// Nearest fitted mean in Euclidean distance.
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgoConfig {
    pub beta: f64,
    pub constraint: ConstraintConfig,
    /// Outlier threshold `T` on the discriminant.
    pub threshold: f64,
    pub max_outer_iter: usize,
    pub n_restarts: usize,
    pub rng_seed: u64,
    pub irls: IrlsConfig,
    pub assignment: AssignmentRule,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            constraint: ConstraintConfig::default(),
            threshold: 1e-3,
            max_outer_iter: 100,
            n_restarts: 10,
            rng_seed: 0,
            irls: IrlsConfig::default(),
            assignment: AssignmentRule::Likelihood,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must be >= 0, got {}",
                self.threshold
            )));
        }
        if self.n_restarts == 0 {
            return Err(Error::InvalidConfig("n_restarts must be at least 1".into()));
        }
        if self.max_outer_iter == 0 {
            return Err(Error::InvalidConfig(
                "max_outer_iter must be at least 1".into(),
            ));
        }
        self.constraint.validate()?;
        self.irls.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub params: MixtureParams,
    /// Zero-based cluster index per observation.
    pub assignments: Vec<usize>,
    pub outlier_flags: Vec<bool>,
    /// Cluster index of each flagged observation; `None` for regular points.
    pub outlier_types: Vec<Option<usize>>,
    /// Pseudo beta-likelihood at `(params, assignments)`.
    pub objective: f64,
    pub iterations: usize,
    /// False when the outer loop hit its cap before the partition settled.
    pub stable: bool,
    pub restart_index: usize,
    /// `log D_{z_i}(X_i)` at the fitted parameters.
    pub log_discriminants: Vec<f64>,
    /// Objective after every outer iteration of the winning restart.
    pub trace: Vec<f64>,
}

/// Empirical pseudo beta-likelihood of a hard partition.
///
/// For `beta > 0` this is
/// `(1/n) sum_i [log pi_{z_i} + phi^beta(X_i)/beta - int phi^{1+beta} / (1+beta)]`;
/// at `beta = 0` the classification log-likelihood
/// `(1/n) sum_i [log pi_{z_i} + log phi(X_i)]`.
pub fn pseudo_beta_likelihood(
    data: &ObservationSet,
    params: &MixtureParams,
    assignments: &[usize],
    beta: f64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if assignments.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: assignments.len(),
        });
    }
    if params.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            found: data.dim(),
        });
    }
    if let Some(&bad) = assignments.iter().find(|&&z| z >= params.k()) {
        return Err(Error::InvalidConfig(format!(
            "assignment {bad} out of range for k = {}",
            params.k()
        )));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "beta must be >= 0, got {beta}"
        )));
    }
    let penalties: Vec<f64> = params
        .components
        .iter()
        .map(|c| log_dpd_integral(&c.cov, beta).exp() / (1.0 + beta))
        .collect();
    let total: f64 = data
        .rows()
        .zip(assignments)
        .map(|(x, &z)| {
            let comp = &params.components[z];
            let log_phi = comp.log_density_unchecked(x);
            let fit = if beta == 0.0 {
                log_phi
            } else {
                (beta * log_phi).exp() / beta - penalties[z]
            };
            params.weights[z].ln() + fit
        })
        .sum();
    Ok(total / data.len() as f64)
}

/// Draws `k` distinct observations as means, with identity covariances and
/// equal weights, then assigns by the likelihood rule.
pub fn initialize(
    data: &ObservationSet,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(MixtureParams, Vec<usize>)> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::TooFewObservations {
            needed: k,
            got: data.len(),
        });
    }
    let centers = sample(rng, data.len(), k);
    let components = centers
        .iter()
        .map(|i| GaussianComponent {
            mean: data.row_vector(i),
            cov: CovMatrix::identity(data.dim()),
        })
        .collect();
    let params = MixtureParams {
        weights: vec![1.0 / k as f64; k],
        components,
    };
    let (assignments, _) = assign(data, &params);
    Ok((params, assignments))
}

/// Likelihood assignment: `argmax_j D_j(X_i)`, ties to the smallest index.
/// Returns the assignments and `log max_j D_j(X_i)`.
pub fn assign(data: &ObservationSet, params: &MixtureParams) -> (Vec<usize>, Vec<f64>) {
    assign_with(data, params, AssignmentRule::Likelihood)
}

pub fn assign_with(
    data: &ObservationSet,
    params: &MixtureParams,
    rule: AssignmentRule,
) -> (Vec<usize>, Vec<f64>) {
    let rows: Vec<&[f64]> = data.rows().collect();
    rows.par_iter()
        .map(|x| {
            let z = match rule {
                AssignmentRule::Likelihood => {
                    argmax((0..params.k()).map(|j| params.log_discriminant(x, j)))
                }
                AssignmentRule::Euclidean => argmax((0..params.k()).map(|j| {
                    let d2: f64 = x
                        .iter()
                        .zip(params.components[j].mean.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    -d2
                })),
            };
            (z, params.log_discriminant(x, z))
        })
        .unzip()
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, v) in values.enumerate() {
        if v > best.1 {
            best = (j, v);
        }
    }
    best.0
}

/// `pi_j = n_j / n`.
pub fn update_weights(assignments: &[usize], n: usize, k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &z in assignments {
        counts[z] += 1;
    }
    counts.into_iter().map(|c| c as f64 / n as f64).collect()
}

/// Flags `i` when `D_{z_i}(X_i) <= T`; the outlier type is `z_i`.
pub fn detect_outliers(
    assignments: &[usize],
    log_discriminants: &[f64],
    threshold: f64,
) -> (Vec<bool>, Vec<Option<usize>>) {
    let log_t = threshold.ln();
    assignments
        .iter()
        .zip(log_discriminants)
        .map(|(&z, &ld)| {
            let flagged = ld <= log_t;
            (flagged, flagged.then_some(z))
        })
        .unzip()
}

/// Result of one restart before outlier detection.
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub params: MixtureParams,
    pub assignments: Vec<usize>,
    pub log_discriminants: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub stable: bool,
    pub trace: Vec<f64>,
}

fn fit_clusters(
    data: &ObservationSet,
    assignments: &[usize],
    previous: &MixtureParams,
    warm: bool,
    cfg: &AlgoConfig,
) -> Result<MixtureParams> {
    let k = previous.k();
    let p = data.dim();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &z) in assignments.iter().enumerate() {
        members[z].push(i);
    }
    let fits: Vec<(DVector<f64>, DMatrix<f64>)> = members
        .par_iter()
        .enumerate()
        .map(|(j, idx)| {
            let subset = data.subset(idx);
            if idx.len() < 2 {
                let mean = if idx.is_empty() {
                    previous.components[j].mean.clone()
                } else {
                    subset.row_vector(0)
                };
                return (mean, DMatrix::zeros(p, p));
            }
            let start = if warm {
                previous.components[j].clone()
            } else {
                match robust_init(&subset, &cfg.irls) {
                    Ok(s) => s.component,
                    Err(_) => previous.components[j].clone(),
                }
            };
            let run = iterate(&subset, cfg.beta, &cfg.irls, start);
            match run.failure.and_then(|f| f.raw) {
                Some(raw) => raw,
                None => (run.last_valid.mean, run.last_valid.cov.matrix().clone()),
            }
        })
        .collect();
    let raw: Vec<&DMatrix<f64>> = fits.iter().map(|f| &f.1).collect();
    let covs = enforce_raw(&raw, &cfg.constraint)?;
    let components = fits
        .into_iter()
        .zip(covs)
        .map(|((mean, _), cov)| GaussianComponent { mean, cov })
        .collect();
    Ok(MixtureParams {
        weights: update_weights(assignments, data.len(), k),
        components,
    })
}

/// Runs the outer loop of one restart from a given starting partition.
///
/// Returns `None` when the restart degenerates (a cluster empties twice).
pub fn run_restart(
    data: &ObservationSet,
    init: MixtureParams,
    init_assignments: Vec<usize>,
    cfg: &AlgoConfig,
) -> Result<Option<RestartOutcome>> {
    let k = init.k();
    let n = data.len();
    let mut params = init;
    let mut z = init_assignments;
    let mut reseeded = vec![false; k];
    let mut trace = Vec::new();
    let mut stable = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_outer_iter {
        iterations = iter;
        if !reseed_empty(data, &params, &mut z, &mut reseeded) {
            return Ok(None);
        }
        params = fit_clusters(data, &z, &params, iter > 1, cfg)?;
        let (next, _) = assign_with(data, &params, cfg.assignment);
        trace.push(pseudo_beta_likelihood(data, &params, &z, cfg.beta)?);
        if next == z {
            stable = true;
            break;
        }
        z = next;
    }
    if !stable {
        if !reseed_empty(data, &params, &mut z, &mut reseeded) {
            return Ok(None);
        }
        params = fit_clusters(data, &z, &params, true, cfg)?;
        z = assign_with(data, &params, cfg.assignment).0;
    }
    // a cluster can still end up empty after the final reassignment; its
    // weight is then zero and it simply owns no points
    params.weights = update_weights(&z, n, k);
    let log_discriminants = data
        .rows()
        .zip(&z)
        .map(|(x, &j)| params.log_discriminant(x, j))
        .collect();
    let objective = pseudo_beta_likelihood(data, &params, &z, cfg.beta)?;
    if !stable {
        trace.push(objective);
    }
    Ok(Some(RestartOutcome {
        params,
        assignments: z,
        log_discriminants,
        objective,
        iterations,
        stable,
        trace,
    }))
}

/// Gives each empty cluster the observation with the lowest current
/// discriminant. Returns false if a cluster empties for the second time.
fn reseed_empty(
    data: &ObservationSet,
    params: &MixtureParams,
    z: &mut [usize],
    reseeded: &mut [bool],
) -> bool {
    let k = params.k();
    loop {
        let mut counts = vec![0usize; k];
        for &j in z.iter() {
            counts[j] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return true;
        };
        if reseeded[empty] {
            return false;
        }
        reseeded[empty] = true;
        let donor = (0..z.len())
            .filter(|&i| counts[z[i]] > 1)
            .map(|i| (i, params.log_discriminant(data.row(i), z[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match donor {
            Some((i, _)) => z[i] = empty,
            None => return false,
        }
    }
}

/// Per-restart generator: the seed picks the key, the restart index the stream.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Fits a `k`-cluster model with `cfg.n_restarts` random starts and returns
/// the restart with the highest pseudo beta-likelihood.
pub fn fit(data: &ObservationSet, k: usize, cfg: &AlgoConfig) -> Result<ClusteringResult> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if data.len() < k {
        return Err(Error::TooFewObservations {
            needed: k,
            got: data.len(),
        });
    }
    let outcomes: Vec<Result<Option<RestartOutcome>>> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.rng_seed, r);
            let (params, z) = initialize(data, k, &mut rng)?;
            run_restart(data, params, z, cfg)
        })
        .collect();

    let mut best: Option<(usize, RestartOutcome)> = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        let Some(outcome) = outcome? else {
            log::debug!("restart {r} degenerated");
            continue;
        };
        log::debug!(
            "restart {r}: objective {} after {} iterations",
            outcome.objective,
            outcome.iterations
        );
        let better = match &best {
            None => true,
            Some((_, b)) => outcome.objective > b.objective,
        };
        if better {
            best = Some((r, outcome));
        }
    }
    let (restart_index, o) = best.ok_or(Error::AllRestartsDegenerate)?;
    let (outlier_flags, outlier_types) =
        detect_outliers(&o.assignments, &o.log_discriminants, cfg.threshold);
    Ok(ClusteringResult {
        params: o.params,
        assignments: o.assignments,
        outlier_flags,
        outlier_types,
        objective: o.objective,
        iterations: o.iterations,
        stable: o.stable,
        restart_index,
        log_discriminants: o.log_discriminants,
        trace: o.trace,
    })
}
