//! Replicated clustering experiments on synthetic normal mixtures.
//!
//! Regular observations come from `N(mu_j, scale I_p)`; an optional fraction
//! is replaced by contamination drawn uniformly outside the cluster
//! ellipsoids, uniformly from an annulus, or from a far-away cluster.

use std::io::{BufRead, Write};

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::clustering::{fit, AlgoConfig, ClusteringResult};
use crate::data::ObservationSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contamination {
    #[default]
    None,
    /// Uniform on `[-10, 10]^p` outside every cluster's 97.5% ellipsoid.
    UniformChisq,
    /// Uniform on `{15 <= |x| <= 20}`.
    Annulus,
    /// `N((20, ..., 20), I)`.
    OutlyingCluster,
}

/// How a regular point that the method flags as an outlier is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlaggedRegular {
    /// Counts as misclassified.
    #[default]
    Error,
    /// Left out of the rate.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub means: Vec<Vec<f64>>,
    /// Every cluster has covariance `common_cov_scale * I_p`.
    pub common_cov_scale: f64,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub contamination: Contamination,
    #[serde(default)]
    pub contamination_level: f64,
    pub replications: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub flagged_regular: FlaggedRegular,
}

impl ScenarioSpec {
    /// Three clusters at `0`, `5 * 1` and `-5 * 1` with `n = 1000`; weights
    /// `(0.33, 0.33, 0.34)` when pure and `0.3` each plus 10% contamination
    /// otherwise.
    pub fn standard(
        p: usize,
        scale: f64,
        contamination: Contamination,
        replications: usize,
        rng_seed: u64,
    ) -> Self {
        let (weights, level) = match contamination {
            Contamination::None => (vec![0.33, 0.33, 0.34], 0.0),
            _ => (vec![0.3, 0.3, 0.3], 0.1),
        };
        Self {
            n: 1000,
            p,
            k: 3,
            means: vec![vec![0.0; p], vec![5.0; p], vec![-5.0; p]],
            common_cov_scale: scale,
            weights,
            contamination,
            contamination_level: level,
            replications,
            rng_seed,
            flagged_regular: FlaggedRegular::Error,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.p == 0 || self.k == 0 || self.n == 0 {
            return bad("n, p and k must be positive".into());
        }
        if self.means.len() != self.k || self.means.iter().any(|m| m.len() != self.p) {
            return bad(format!(
                "means must be {} vectors of length {}",
                self.k, self.p
            ));
        }
        if self.weights.len() != self.k || self.weights.iter().any(|&w| !(w >= 0.0)) {
            return bad(format!("weights must be {} nonnegative values", self.k));
        }
        if !(self.common_cov_scale > 0.0) {
            return bad("common_cov_scale must be positive".into());
        }
        if !(0.0..1.0).contains(&self.contamination_level) {
            return bad("contamination_level must lie in [0, 1)".into());
        }
        let level = match self.contamination {
            Contamination::None => 0.0,
            _ => self.contamination_level,
        };
        if self.contamination != Contamination::None && level == 0.0 {
            return bad("contaminated scenarios need a positive contamination_level".into());
        }
        let total: f64 = self.weights.iter().sum();
        if (total - (1.0 - level)).abs() > 1e-9 {
            return bad(format!("weights sum to {total}, expected {}", 1.0 - level));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        Ok(())
    }

    pub fn outlier_count(&self) -> usize {
        match self.contamination {
            Contamination::None => 0,
            _ => (self.contamination_level * self.n as f64).round() as usize,
        }
    }
}

/// The outlier threshold used for each dimension in the standard designs.
pub fn default_threshold(p: usize) -> Option<f64> {
    match p {
        2 => Some(1e-3),
        4 => Some(1e-5),
        6 => Some(1e-8),
        8 => Some(1e-18),
        10 => Some(1e-24),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub data: ObservationSet,
    /// Zero-based generating cluster; `None` for contamination.
    pub true_labels: Vec<Option<usize>>,
    pub true_outlier_flags: Vec<bool>,
}

/// Draws the regular part: `n` minus the outlier count, labels by
/// multinomial sampling on the weights.
pub fn gen_pure(spec: &ScenarioSpec, rng: &mut impl Rng) -> Result<LabeledSample> {
    spec.validate()?;
    let n = spec.n - spec.outlier_count();
    let picker =
        WeightedIndex::new(&spec.weights).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let sd = spec.common_cov_scale.sqrt();
    let mut values = Vec::with_capacity(n * spec.p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let j = picker.sample(rng);
        for &m in &spec.means[j] {
            let e: f64 = StandardNormal.sample(rng);
            values.push(m + sd * e);
        }
        labels.push(Some(j));
    }
    Ok(LabeledSample {
        data: ObservationSet::new(values, n, spec.p)?,
        true_outlier_flags: vec![false; n],
        true_labels: labels,
    })
}

fn append_outliers(sample: &mut LabeledSample, points: Vec<Vec<f64>>) -> Result<()> {
    for x in points {
        sample.data.push_row(&x)?;
        sample.true_labels.push(None);
        sample.true_outlier_flags.push(true);
    }
    Ok(())
}

/// Squared Mahalanobis distance to the nearest centre under `scale * I`.
pub fn min_center_distance_sq(x: &[f64], spec: &ScenarioSpec) -> f64 {
    spec.means
        .iter()
        .map(|m| {
            x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / spec.common_cov_scale
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn chisq_cutoff(p: usize) -> f64 {
    ChiSquared::new(p as f64).expect("p > 0").inverse_cdf(0.975)
}

const MIN_ACCEPTANCE: f64 = 1e-4;

pub fn contaminate_uniform_chisq(
    sample: &LabeledSample,
    spec: &ScenarioSpec,
    rng: &mut impl Rng,
) -> Result<LabeledSample> {
    let m = spec.outlier_count();
    let cutoff = chisq_cutoff(spec.p);
    let mut out = Vec::with_capacity(m);
    let mut attempts: u64 = 0;
    while out.len() < m {
        attempts += 1;
        let x: Vec<f64> = (0..spec.p)
            .map(|_| rng.random_range(-10.0..=10.0))
            .collect();
        if min_center_distance_sq(&x, spec) > cutoff {
            out.push(x);
        } else if attempts >= 100_000 && (out.len() as f64) < MIN_ACCEPTANCE * attempts as f64 {
            return Err(Error::AcceptanceTooLow(out.len() as f64 / attempts as f64));
        }
    }
    let mut s = sample.clone();
    append_outliers(&mut s, out)?;
    Ok(s)
}

fn random_direction(p: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Radius with density proportional to `r^{p-1}` on `[15, 20]`.
pub fn annulus_radius(p: usize, u: f64) -> f64 {
    let pf = p as f64;
    let (lo, hi) = (15f64.powf(pf), 20f64.powf(pf));
    (lo + u * (hi - lo)).powf(1.0 / pf)
}

pub fn contaminate_annulus(
    sample: &LabeledSample,
    spec: &ScenarioSpec,
    rng: &mut impl Rng,
) -> Result<LabeledSample> {
    let out = (0..spec.outlier_count())
        .map(|_| {
            let r = annulus_radius(spec.p, rng.random::<f64>());
            random_direction(spec.p, rng)
                .into_iter()
                .map(|d| r * d)
                .collect()
        })
        .collect();
    let mut s = sample.clone();
    append_outliers(&mut s, out)?;
    Ok(s)
}

pub fn contaminate_outlying_cluster(
    sample: &LabeledSample,
    spec: &ScenarioSpec,
    rng: &mut impl Rng,
) -> Result<LabeledSample> {
    let out = (0..spec.outlier_count())
        .map(|_| {
            (0..spec.p)
                .map(|_| 20.0 + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                .collect()
        })
        .collect();
    let mut s = sample.clone();
    append_outliers(&mut s, out)?;
    Ok(s)
}

/// Full sample for one replication.
pub fn generate(spec: &ScenarioSpec, rng: &mut impl Rng) -> Result<LabeledSample> {
    let pure = gen_pure(spec, rng)?;
    match spec.contamination {
        Contamination::None => Ok(pure),
        Contamination::UniformChisq => contaminate_uniform_chisq(&pure, spec, rng),
        Contamination::Annulus => contaminate_annulus(&pure, spec, rng),
        Contamination::OutlyingCluster => contaminate_outlying_cluster(&pure, spec, rng),
    }
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                prefix.push(j);
                rec(prefix, used, out);
                prefix.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

const MAX_PERMUTATION_K: usize = 8;

/// Misclassification rate over true-regular points, minimized over label
/// permutations. `perm[true] = predicted`.
pub fn regular_misclassification(
    assignments: &[usize],
    outlier_flags: &[bool],
    truth: &LabeledSample,
    k: usize,
    convention: FlaggedRegular,
) -> Result<f64> {
    if assignments.len() != truth.true_labels.len() || outlier_flags.len() != assignments.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.true_labels.len(),
            found: assignments.len(),
        });
    }
    if k > MAX_PERMUTATION_K {
        return Err(Error::InvalidConfig(format!(
            "label matching supports k <= {MAX_PERMUTATION_K}"
        )));
    }
    let counted: Vec<(usize, usize, bool)> = truth
        .true_labels
        .iter()
        .zip(assignments)
        .zip(outlier_flags)
        .filter_map(|((t, &z), &f)| t.map(|t| (t, z, f)))
        .filter(|&(_, _, f)| !(f && convention == FlaggedRegular::Excluded))
        .collect();
    if counted.is_empty() {
        return Ok(0.0);
    }
    // confusion[t][z] among unflagged points
    let kz = k.max(assignments.iter().map(|&z| z + 1).max().unwrap_or(0));
    let mut confusion = vec![vec![0usize; kz]; k];
    for &(t, z, f) in &counted {
        if !f && t < k {
            confusion[t][z] += 1;
        }
    }
    let best_correct = permutations(k)
        .iter()
        .map(|perm| {
            (0..k)
                .map(|t| {
                    if perm[t] < kz {
                        confusion[t][perm[t]]
                    } else {
                        0
                    }
                })
                .sum::<usize>()
        })
        .max()
        .unwrap_or(0);
    Ok(1.0 - best_correct as f64 / counted.len() as f64)
}

/// Fraction of true outliers the method did not flag; `None` without outliers.
pub fn undetected_outlier_proportion(outlier_flags: &[bool], truth: &LabeledSample) -> Option<f64> {
    let total = truth.true_outlier_flags.iter().filter(|&&o| o).count();
    if total == 0 {
        return None;
    }
    let missed = truth
        .true_outlier_flags
        .iter()
        .zip(outlier_flags)
        .filter(|&(&o, &f)| o && !f)
        .count();
    Some(missed as f64 / total as f64)
}

/// Errors `mu_hat - mu` after matching fitted means to the true ones by the
/// permutation with the smallest total squared distance.
pub fn matched_mean_errors(fitted: &[DVector<f64>], truth: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = truth.len();
    let err = |t: usize, f: usize| -> Vec<f64> {
        fitted[f]
            .iter()
            .zip(&truth[t])
            .map(|(a, b)| a - b)
            .collect()
    };
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let best = permutations(k)
        .into_iter()
        .min_by(|p1, p2| {
            let c1: f64 = (0..k).map(|t| sq(&err(t, p1[t]))).sum();
            let c2: f64 = (0..k).map(|t| sq(&err(t, p2[t]))).sum();
            c1.total_cmp(&c2)
        })
        .expect("k >= 1");
    (0..k).map(|t| err(t, best[t])).collect()
}

/// Per cluster: `|mean error|` and mean squared error norm; then averaged
/// over clusters. Input is indexed `[replication][cluster][coordinate]`.
pub fn bias_mse(errors: &[Vec<Vec<f64>>]) -> (f64, f64) {
    let Some(first) = errors.first() else {
        return (f64::NAN, f64::NAN);
    };
    let (k, p) = (first.len(), first.first().map_or(0, |e| e.len()));
    let r = errors.len() as f64;
    let (mut bias, mut mse) = (0.0, 0.0);
    for j in 0..k {
        let mut mean = vec![0.0; p];
        let mut sq = 0.0;
        for rep in errors {
            for (m, e) in mean.iter_mut().zip(&rep[j]) {
                *m += e;
            }
            sq += rep[j].iter().map(|e| e * e).sum::<f64>();
        }
        bias += mean.iter().map(|m| (m / r).powi(2)).sum::<f64>().sqrt();
        mse += sq / r;
    }
    (bias / k as f64, mse / k as f64)
}

/// A scenario plus the method settings to compare on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: ScenarioSpec,
    pub methods: Vec<AlgoConfig>,
}

/// Metrics of one method on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub replication: usize,
    pub method: usize,
    pub beta: f64,
    pub threshold: f64,
    pub misclassification: f64,
    pub undetected: Option<f64>,
    pub detected_outliers: usize,
    pub objective: f64,
    pub iterations: usize,
    /// `[cluster][coordinate]` matched mean errors.
    pub mean_errors: Vec<Vec<f64>>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: usize,
    pub beta: f64,
    pub threshold: f64,
    pub replications: usize,
    pub failures: usize,
    pub misclassification: f64,
    pub undetected: Option<f64>,
    pub detected_outliers: f64,
    pub bias: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub spec: ExperimentSpec,
    pub rows: Vec<ReplicationRow>,
    pub summaries: Vec<MethodSummary>,
}

/// Independent seed for stream `index` under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

fn score(
    rep: usize,
    method: usize,
    cfg: &AlgoConfig,
    result: std::result::Result<ClusteringResult, String>,
    sample: &LabeledSample,
    spec: &ScenarioSpec,
) -> ReplicationRow {
    let mut row = ReplicationRow {
        replication: rep,
        method,
        beta: cfg.beta,
        threshold: cfg.threshold,
        misclassification: f64::NAN,
        undetected: None,
        detected_outliers: 0,
        objective: f64::NAN,
        iterations: 0,
        mean_errors: Vec::new(),
        failure: None,
    };
    let metrics = result.and_then(|res| {
        let mis = regular_misclassification(
            &res.assignments,
            &res.outlier_flags,
            sample,
            spec.k,
            spec.flagged_regular,
        )
        .map_err(|e| e.to_string())?;
        Ok((res, mis))
    });
    match metrics {
        Ok((res, mis)) => {
            row.misclassification = mis;
            row.undetected = undetected_outlier_proportion(&res.outlier_flags, sample);
            row.detected_outliers = res.outlier_flags.iter().filter(|&&f| f).count();
            row.objective = res.objective;
            row.iterations = res.iterations;
            let fitted: Vec<DVector<f64>> = res
                .params
                .components
                .iter()
                .map(|c| c.mean.clone())
                .collect();
            row.mean_errors = matched_mean_errors(&fitted, &spec.means);
        }
        Err(e) => row.failure = Some(e),
    }
    row
}

/// Runs every method on every replication. Replications run in parallel,
/// each with its own generator stream; failures are recorded per row.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SimulationReport> {
    let scenario = &spec.scenario;
    scenario.validate()?;
    if spec.methods.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one method is required".into(),
        ));
    }
    for m in &spec.methods {
        m.validate()?;
    }
    let rows: Vec<Vec<ReplicationRow>> = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
            rng.set_stream(rep as u64);
            let sample = match generate(scenario, &mut rng) {
                Ok(s) => s,
                Err(e) => {
                    let empty = empty_sample(scenario.p);
                    return spec
                        .methods
                        .iter()
                        .enumerate()
                        .map(|(mi, cfg)| score(rep, mi, cfg, Err(e.to_string()), &empty, scenario))
                        .collect();
                }
            };
            spec.methods
                .iter()
                .enumerate()
                .map(|(mi, cfg)| {
                    let cfg_rep = AlgoConfig {
                        rng_seed: derive_seed(cfg.rng_seed ^ scenario.rng_seed, rep as u64),
                        ..cfg.clone()
                    };
                    let res = fit(&sample.data, scenario.k, &cfg_rep).map_err(|e| e.to_string());
                    score(rep, mi, cfg, res, &sample, scenario)
                })
                .collect()
        })
        .collect();
    let rows: Vec<ReplicationRow> = rows.into_iter().flatten().collect();
    let summaries = summarize(&rows, spec.methods.len());
    Ok(SimulationReport {
        spec: spec.clone(),
        rows,
        summaries,
    })
}

fn empty_sample(p: usize) -> LabeledSample {
    LabeledSample {
        data: ObservationSet::new(Vec::new(), 0, p).expect("p > 0"),
        true_labels: Vec::new(),
        true_outlier_flags: Vec::new(),
    }
}

/// Means over successful replications, in replication order.
pub fn summarize(rows: &[ReplicationRow], methods: usize) -> Vec<MethodSummary> {
    (0..methods)
        .map(|mi| {
            let mut mine: Vec<&ReplicationRow> = rows.iter().filter(|r| r.method == mi).collect();
            mine.sort_by_key(|r| r.replication);
            let ok: Vec<&ReplicationRow> = mine
                .iter()
                .copied()
                .filter(|r| r.failure.is_none())
                .collect();
            let n = ok.len() as f64;
            let mean =
                |f: &dyn Fn(&ReplicationRow) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
            let undetected: Vec<f64> = ok.iter().filter_map(|r| r.undetected).collect();
            let errors: Vec<Vec<Vec<f64>>> = ok.iter().map(|r| r.mean_errors.clone()).collect();
            let (bias, mse) = bias_mse(&errors);
            let first = mine.first();
            MethodSummary {
                method: mi,
                beta: first.map_or(f64::NAN, |r| r.beta),
                threshold: first.map_or(f64::NAN, |r| r.threshold),
                replications: mine.len(),
                failures: mine.len() - ok.len(),
                misclassification: mean(&|r| r.misclassification),
                undetected: (!undetected.is_empty())
                    .then(|| undetected.iter().sum::<f64>() / undetected.len() as f64),
                detected_outliers: mean(&|r| r.detected_outliers as f64),
                bias,
                mse,
            }
        })
        .collect()
}

/// Writes one CSV line per (replication, method), both numbered from 1.
/// Floats use the shortest round-tripping representation so summaries can be
/// regenerated exactly.
pub fn write_replications_csv<W: Write>(
    mut w: W,
    rows: &[ReplicationRow],
    k: usize,
    p: usize,
) -> std::io::Result<()> {
    write!(w, "replication,method,beta,threshold,misclassification,undetected,detected_outliers,objective,iterations,failure")?;
    for j in 0..k {
        for d in 0..p {
            write!(w, ",err_c{}_{}", j + 1, d + 1)?;
        }
    }
    writeln!(w)?;
    for r in rows {
        let undetected = r.undetected.map_or(String::new(), |u| u.to_string());
        let failure = r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
        write!(
            w,
            "{},{},{},{:e},{},{},{},{},{},{}",
            r.replication + 1,
            r.method + 1,
            r.beta,
            r.threshold,
            r.misclassification,
            undetected,
            r.detected_outliers,
            r.objective,
            r.iterations,
            failure
        )?;
        for j in 0..k {
            for d in 0..p {
                let v = r
                    .mean_errors
                    .get(j)
                    .and_then(|e| e.get(d))
                    .copied()
                    .unwrap_or(f64::NAN);
                write!(w, ",{v}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parses rows written by [`write_replications_csv`].
pub fn read_replications_csv<R: BufRead>(r: R, k: usize, p: usize) -> Result<Vec<ReplicationRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in r.lines().enumerate().skip(1) {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::InvalidConfig(format!("line {}: bad {what}", lineno + 1));
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 10 + k * p {
            return Err(bad("column count"));
        }
        let f = |i: usize| {
            cells[i]
                .parse::<f64>()
                .map_err(|_| bad(&format!("column {}", i + 1)))
        };
        let u = |i: usize| {
            cells[i]
                .parse::<usize>()
                .map_err(|_| bad(&format!("column {}", i + 1)))
        };
        let index = |i: usize| {
            u(i)?
                .checked_sub(1)
                .ok_or_else(|| bad(&format!("column {}", i + 1)))
        };
        let failure = (!cells[9].is_empty()).then(|| cells[9].to_string());
        let mean_errors = if failure.is_some() {
            Vec::new()
        } else {
            (0..k)
                .map(|j| {
                    (0..p)
                        .map(|d| f(10 + j * p + d))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?
        };
        rows.push(ReplicationRow {
            replication: index(0)?,
            method: index(1)?,
            beta: f(2)?,
            threshold: f(3)?,
            misclassification: f(4)?,
            undetected: if cells[5].is_empty() {
                None
            } else {
                Some(f(5)?)
            },
            detected_outliers: u(6)?,
            objective: f(7)?,
            iterations: u(8)?,
            mean_errors,
            failure,
        });
    }
    Ok(rows)
}

/// Plain-text table: one line per method with misclassification, the
/// undetected proportion (or mean detected count for pure data) in
/// parentheses, then bias and MSE.
pub fn format_table(report: &SimulationReport) -> String {
    let s = &report.spec.scenario;
    let mut out = format!(
        "p = {}, Sigma = {} I, contamination = {:?}, n = {}, replications = {}\n",
        s.p, s.common_cov_scale, s.contamination, s.n, s.replications
    );
    out.push_str(&format!(
        "{:>6} {:>10} {:>18} {:>22} {:>10} {:>10}\n",
        "beta", "T", "misclassification", "(undetected|detected)", "bias", "mse"
    ));
    for m in &report.summaries {
        let paren = match m.undetected {
            Some(u) => format!("({u:.3})"),
            None => format!("({:.2})", m.detected_outliers),
        };
        out.push_str(&format!(
            "{:>6} {:>10.0e} {:>18.4} {:>22} {:>10.4} {:>10.4}",
            m.beta, m.threshold, m.misclassification, paren, m.bias, m.mse
        ));
        if m.failures > 0 {
            out.push_str(&format!("  [{} failed]", m.failures));
        }
        out.push('\n');
    }
    out
}
