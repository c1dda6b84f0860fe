//! Influence functions of the two-cluster univariate functional.
//!
//! For a distribution `Q` on the line the functional
//! `theta = (pi1, pi2, a, b, mu1, mu2, s1, s2)` solves eight equations: the
//! weights are the masses of the cluster regions, the boundaries `a < b` are
//! where the two discriminants cross, and each component solves the
//! density-weighted estimating equations on its own region (`(a, b)` for the
//! first, the two tails for the second). Differentiating those equations along
//! `Q = (1 - eps) P + eps delta_y` gives a linear system `A IF(y) = B(y)`.
//!
//! Only the interval geometry is supported: the first component is the
//! narrower one, so its discriminant dominates on a bounded interval.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::constraints::ConstraintConfig;
use crate::error::{Error, Result};
use crate::quadrature::Integrator;

/// Tails of the model are cut this many standard deviations from its mean.
const TAIL_SDS: f64 = 12.0;

/// Condition numbers above this are treated as singular.
const MAX_CONDITION: f64 = 1e12;

/// A two-component univariate normal mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrueDistribution {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
}

impl Default for TrueDistribution {
    fn default() -> Self {
        Self {
            weights: [0.5, 0.5],
            means: [0.0, 5.0],
            variances: [1.0, 4.0],
        }
    }
}

impl TrueDistribution {
    pub fn new(weights: [f64; 2], means: [f64; 2], variances: [f64; 2]) -> Result<Self> {
        let d = Self {
            weights,
            means,
            variances,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|&w| !(w > 0.0))
            || (self.weights[0] + self.weights[1] - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidConfig(format!(
                "mixture weights must be positive and sum to 1, got {:?}",
                self.weights
            )));
        }
        if self.variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "variances must be positive, got {:?}",
                self.variances
            )));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("means must be finite".into()));
        }
        Ok(())
    }

    fn normal(&self, j: usize) -> Normal {
        Normal::new(self.means[j], self.variances[j].sqrt()).expect("validated")
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (0..2)
            .map(|j| self.weights[j] * self.normal(j).pdf(x))
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (0..2)
            .map(|j| self.weights[j] * self.normal(j).cdf(x))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.weights[0] * self.means[0] + self.weights[1] * self.means[1]
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        (0..2)
            .map(|j| self.weights[j] * (self.variances[j] + (self.means[j] - m).powi(2)))
            .sum::<f64>()
            .sqrt()
    }

    /// Integration range `mean -/+ 12 sd`.
    pub fn support(&self) -> (f64, f64) {
        let (m, s) = (self.mean(), self.sd());
        (m - TAIL_SDS * s, m + TAIL_SDS * s)
    }

    /// Points around each component's bulk; splitting there keeps a wide
    /// interval from stepping over a narrow peak.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(30);
        for j in 0..2 {
            let sd = self.variances[j].sqrt();
            for k in [
                -12.0, -9.0, -6.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 9.0, 12.0,
            ] {
                pts.push(self.means[j] + k * sd);
            }
        }
        pts
    }

    /// Points where the model's own discriminants cross.
    pub fn model_boundaries(&self) -> Option<(f64, f64)> {
        discriminant_roots(self.weights, self.means, self.variances)
    }
}

/// Real roots of `log D1(x) - log D2(x)`, ascending.
fn discriminant_roots(pi: [f64; 2], mu: [f64; 2], s: [f64; 2]) -> Option<(f64, f64)> {
    let qa = -0.5 / s[0] + 0.5 / s[1];
    let qb = mu[0] / s[0] - mu[1] / s[1];
    let qc = (pi[0] / pi[1]).ln() - 0.5 * (s[0] / s[1]).ln() - mu[0] * mu[0] / (2.0 * s[0])
        + mu[1] * mu[1] / (2.0 * s[1]);
    if qa == 0.0 {
        return None;
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return None;
    }
    let r = disc.sqrt();
    let x1 = (-qb - r) / (2.0 * qa);
    let x2 = (-qb + r) / (2.0 * qa);
    Some((x1.min(x2), x1.max(x2)))
}

/// `P` optionally contaminated with a point mass: `(1 - eps) P + eps delta_y`.
#[derive(Debug, Clone, Copy)]
struct Measure<'a> {
    dist: &'a TrueDistribution,
    point: Option<(f64, f64)>,
}

impl Measure<'_> {
    fn integrate<F: Fn(f64) -> f64>(&self, g: F, lo: f64, hi: f64, q: &Integrator) -> Result<f64> {
        let smooth = q.integrate_with_breaks(
            |x| g(x) * self.dist.pdf(x),
            lo,
            hi,
            &self.dist.breakpoints(),
        )?;
        Ok(match self.point {
            None => smooth,
            Some((eps, y)) => {
                (1.0 - eps) * smooth + if lo < y && y < hi { eps * g(y) } else { 0.0 }
            }
        })
    }

    fn mass(&self, lo: f64, hi: f64) -> f64 {
        let smooth = self.dist.cdf(hi) - self.dist.cdf(lo);
        match self.point {
            None => smooth,
            Some((eps, y)) => (1.0 - eps) * smooth + if lo < y && y < hi { eps } else { 0.0 },
        }
    }
}

/// `f^beta` for `f = N(mu, s)`.
fn f_beta(x: f64, mu: f64, s: f64, beta: f64) -> f64 {
    let u = x - mu;
    (-0.5 * beta * ((2.0 * PI * s).ln() + u * u / s)).exp()
}

/// `(2 pi)^{-beta/2} s^{-beta/2} (1 + beta)^{-3/2}`; `beta` times this is the
/// right-hand constant of the variance equation.
fn kappa(s: f64, beta: f64) -> f64 {
    (-0.5 * beta * (2.0 * PI * s).ln()).exp() * (1.0 + beta).powf(-1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InfluenceConfig {
    pub constraint: ConstraintConfig,
    pub quad_tol: f64,
    pub newton_tol: f64,
    pub max_newton_iter: usize,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        Self {
            constraint: ConstraintConfig { c: 5.0, c1: 0.1 },
            quad_tol: 1e-10,
            newton_tol: 1e-11,
            max_newton_iter: 100,
        }
    }
}

/// Functional values at a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSolution {
    pub pi: [f64; 2],
    pub mu: [f64; 2],
    pub var: [f64; 2],
    pub a: f64,
    pub b: f64,
    /// Largest absolute residual over the eight defining equations.
    pub max_residual: f64,
    pub newton_iterations: usize,
}

impl FunctionalSolution {
    /// `(pi1, pi2, a, b, mu1, mu2, s1, s2)`.
    pub fn theta(&self) -> [f64; 8] {
        [
            self.pi[0],
            self.pi[1],
            self.a,
            self.b,
            self.mu[0],
            self.mu[1],
            self.var[0],
            self.var[1],
        ]
    }

    fn from_theta(t: &[f64; 8]) -> Self {
        Self {
            pi: [t[0], t[1]],
            a: t[2],
            b: t[3],
            mu: [t[4], t[5]],
            var: [t[6], t[7]],
            max_residual: f64::NAN,
            newton_iterations: 0,
        }
    }
}

/// The eight defining equations at `theta = (pi1, pi2, a, b, mu1, mu2, s1, s2)`.
///
/// The boundary equations are written as `2 (log D1 - log D2)`.
fn defining_equations(t: &[f64; 8], m: &Measure, beta: f64, q: &Integrator) -> Result<[f64; 8]> {
    let [pi1, pi2, a, b, mu1, mu2, s1, s2] = *t;
    let (lo, hi) = m.dist.support();
    let mass_in = m.mass(a, b);
    let mass_out = m.mass(lo, a) + m.mass(b, hi);
    let boundary = |x: f64| {
        2.0 * (pi1 / pi2).ln() - (s1 / s2).ln() - (x - mu1).powi(2) / s1 + (x - mu2).powi(2) / s2
    };
    let out = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
        Ok(m.integrate(g, lo, a, q)? + m.integrate(g, b, hi, q)?)
    };
    let h5 = m.integrate(|x| f_beta(x, mu1, s1, beta) * (x - mu1), a, b, q)?;
    let h6 = out(&|x| f_beta(x, mu2, s2, beta) * (x - mu2))?;
    let h7 = m.integrate(
        |x| f_beta(x, mu1, s1, beta) * ((x - mu1).powi(2) / s1 - 1.0),
        a,
        b,
        q,
    )? + beta * kappa(s1, beta) * mass_in;
    let h8 = out(&|x| f_beta(x, mu2, s2, beta) * ((x - mu2).powi(2) / s2 - 1.0))?
        + beta * kappa(s2, beta) * mass_out;
    Ok([
        pi1 - mass_in,
        pi1 + pi2 - 1.0,
        boundary(a),
        boundary(b),
        h5,
        h6,
        h7,
        h8,
    ])
}

/// Residuals of the defining equations at `sol` under `dist`.
pub fn functional_residuals(
    sol: &FunctionalSolution,
    dist: &TrueDistribution,
    beta: f64,
    quad_tol: f64,
) -> Result<[f64; 8]> {
    defining_equations(
        &sol.theta(),
        &Measure { dist, point: None },
        beta,
        &Integrator::with_tol(quad_tol),
    )
}

fn theta_from_reduced(v: &[f64; 6], m: &Measure) -> Option<[f64; 8]> {
    let [mu1, mu2, s1, s2, a, b] = *v;
    if !(s1 > 0.0 && s2 > 0.0 && a < b) {
        return None;
    }
    let pi1 = m.mass(a, b);
    if !(pi1 > 0.0 && pi1 < 1.0) {
        return None;
    }
    Some([pi1, 1.0 - pi1, a, b, mu1, mu2, s1, s2])
}

fn reduced_residual(
    v: &[f64; 6],
    m: &Measure,
    beta: f64,
    q: &Integrator,
) -> Result<Option<[f64; 6]>> {
    let Some(t) = theta_from_reduced(v, m) else {
        return Ok(None);
    };
    let h = defining_equations(&t, m, beta, q)?;
    Ok(Some([h[2], h[3], h[4], h[5], h[6], h[7]]))
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn solve_with(
    m: &Measure,
    beta: f64,
    cfg: &InfluenceConfig,
    start: [f64; 6],
) -> Result<FunctionalSolution> {
    let q = Integrator::with_tol(cfg.quad_tol);
    let mut v = start;
    let mut r = reduced_residual(&v, m, beta, &q)?.ok_or_else(|| {
        Error::UnsupportedGeometry("starting point does not give an interval cluster".into())
    })?;
    let mut norm = inf_norm(&r);
    let mut iterations = 0;
    while norm > cfg.newton_tol {
        if iterations >= cfg.max_newton_iter {
            return Err(Error::NewtonDivergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        let mut jac = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..6 {
            let h = 1e-6 * v[i].abs().max(1.0);
            let (mut up, mut down) = (v, v);
            up[i] += h;
            down[i] -= h;
            let (Some(ru), Some(rd)) = (
                reduced_residual(&up, m, beta, &q)?,
                reduced_residual(&down, m, beta, &q)?,
            ) else {
                return Err(Error::NewtonDivergence {
                    iterations,
                    residual: norm,
                });
            };
            for k in 0..6 {
                jac[(k, i)] = (ru[k] - rd[k]) / (2.0 * h);
            }
        }
        let step = jac
            .lu()
            .solve(&SVector::<f64, 6>::from_column_slice(&r))
            .ok_or(Error::SingularSystem(f64::INFINITY))?;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1e-8 {
            let mut trial = v;
            for i in 0..6 {
                trial[i] -= lambda * step[i];
            }
            if let Some(rt) = reduced_residual(&trial, m, beta, &q)? {
                let nt = inf_norm(&rt);
                if nt < (1.0 - 1e-4 * lambda) * norm {
                    v = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // no descent left: accept only if already at quadrature noise level
            if norm <= 1e3 * cfg.newton_tol {
                break;
            }
            return Err(Error::NewtonDivergence {
                iterations,
                residual: norm,
            });
        }
        log::trace!("newton {iterations}: residual {norm:e}");
    }
    let t = theta_from_reduced(&v, m).expect("accepted iterates are valid");
    let full = defining_equations(&t, m, beta, &q)?;
    let mut sol = FunctionalSolution::from_theta(&t);
    sol.max_residual = inf_norm(&full);
    sol.newton_iterations = iterations;
    Ok(sol)
}

fn check_solution(sol: &FunctionalSolution, cfg: &InfluenceConfig) -> Result<()> {
    if !(sol.var[0] < sol.var[1]) {
        return Err(Error::UnsupportedGeometry(format!(
            "first cluster variance {} is not below the second {}; the first cluster is not an interval",
            sol.var[0], sol.var[1]
        )));
    }
    match discriminant_roots(sol.pi, sol.mu, sol.var) {
        Some((lo, hi))
            if (lo - sol.a).abs() <= 1e-6 * (1.0 + lo.abs())
                && (hi - sol.b).abs() <= 1e-6 * (1.0 + hi.abs()) => {}
        _ => {
            return Err(Error::UnsupportedGeometry(
                "boundaries are not the crossing points of the discriminants".into(),
            ))
        }
    }
    let max = sol.var[0].max(sol.var[1]);
    let min = sol.var[0].min(sol.var[1]);
    if !(max / min < cfg.constraint.c && min > cfg.constraint.c1) {
        return Err(Error::ConstraintBoundary {
            ratio: max / min,
            min_eig: min,
        });
    }
    Ok(())
}

fn model_start(dist: &TrueDistribution) -> Result<[f64; 6]> {
    let (a, b) = dist.model_boundaries().ok_or_else(|| {
        Error::UnsupportedGeometry(
            "model discriminants do not cross twice (equal variances)".into(),
        )
    })?;
    Ok([
        dist.means[0],
        dist.means[1],
        dist.variances[0],
        dist.variances[1],
        a,
        b,
    ])
}

fn start_of(sol: &FunctionalSolution) -> [f64; 6] {
    [sol.mu[0], sol.mu[1], sol.var[0], sol.var[1], sol.a, sol.b]
}

/// Solves the defining equations at `dist` by damped Newton from the model
/// parameters.
pub fn solve_functional(
    dist: &TrueDistribution,
    beta: f64,
    cfg: &InfluenceConfig,
) -> Result<FunctionalSolution> {
    dist.validate()?;
    check_beta(beta)?;
    cfg.constraint.validate()?;
    if !(dist.variances[0] < dist.variances[1]) {
        return Err(Error::UnsupportedGeometry(
            "the first component must have the smaller variance".into(),
        ));
    }
    let sol = solve_with(
        &Measure { dist, point: None },
        beta,
        cfg,
        model_start(dist)?,
    )?;
    check_solution(&sol, cfg)?;
    Ok(sol)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "beta must lie in (0, 1] for influence functions, got {beta}; at beta = 0 they are unbounded"
        )));
    }
    Ok(())
}

/// `IF` of `(pi1, pi2, a, b, mu1, mu2, s1, s2)` at one contamination point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceVector {
    pub pi1: f64,
    pub pi2: f64,
    pub a: f64,
    pub b: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub s1: f64,
    pub s2: f64,
}

impl InfluenceVector {
    pub const NAMES: [&'static str; 8] = ["pi1", "pi2", "a", "b", "mu1", "mu2", "s1", "s2"];

    pub fn from_array(v: [f64; 8]) -> Self {
        Self {
            pi1: v[0],
            pi2: v[1],
            a: v[2],
            b: v[3],
            mu1: v[4],
            mu2: v[5],
            s1: v[6],
            s2: v[7],
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.pi1, self.pi2, self.a, self.b, self.mu1, self.mu2, self.s1, self.s2,
        ]
    }
}

/// Integrals of the model needed by the linear system. They depend on the
/// solution and `beta` but not on the contamination point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IfConstants {
    /// `p(a)`, `p(b)`.
    pub density_at_boundary: [f64; 2],
    /// `P((a, b))` and its complement.
    pub mass: [f64; 2],
    /// `kappa(s1)`, `kappa(s2)`.
    pub kappa: [f64; 2],
    /// `int f^beta u dP` over each region.
    pub mean_score: [f64; 2],
    /// `int f^beta (u^2/s - 1) dP` over each region.
    pub var_score: [f64; 2],
    /// `int d/dmu [f^beta u] dP`.
    pub mean_score_dmu: [f64; 2],
    /// `int d/ds [f^beta u] dP`.
    pub mean_score_ds: [f64; 2],
    /// `int d/dmu [f^beta (u^2/s - 1)] dP`.
    pub var_score_dmu: [f64; 2],
    /// `int d/ds [f^beta (u^2/s - 1)] dP`.
    pub var_score_ds: [f64; 2],
}

fn d_mean_dmu(u: f64, s: f64, fb: f64, beta: f64) -> f64 {
    fb * (beta * u * u / s - 1.0)
}

fn d_mean_ds(u: f64, s: f64, fb: f64, beta: f64) -> f64 {
    0.5 * beta * fb * (u * u * u / (s * s) - u / s)
}

fn d_var_dmu(u: f64, s: f64, fb: f64, beta: f64) -> f64 {
    fb * (beta * (u / s) * (u * u / s - 1.0) - 2.0 * u / s)
}

fn d_var_ds(u: f64, s: f64, fb: f64, beta: f64) -> f64 {
    fb * (0.5 * beta * (u * u / (s * s) - 1.0 / s) * (u * u / s - 1.0) - u * u / (s * s))
}

impl IfConstants {
    pub fn compute(
        sol: &FunctionalSolution,
        dist: &TrueDistribution,
        beta: f64,
        quad_tol: f64,
    ) -> Result<Self> {
        let q = Integrator::with_tol(quad_tol);
        let m = Measure { dist, point: None };
        let (lo, hi) = dist.support();
        let region = |j: usize, g: &dyn Fn(f64) -> f64| -> Result<f64> {
            if j == 0 {
                m.integrate(g, sol.a, sol.b, &q)
            } else {
                Ok(m.integrate(g, lo, sol.a, &q)? + m.integrate(g, sol.b, hi, &q)?)
            }
        };
        let mut c = IfConstants {
            density_at_boundary: [dist.pdf(sol.a), dist.pdf(sol.b)],
            mass: [m.mass(sol.a, sol.b), m.mass(lo, sol.a) + m.mass(sol.b, hi)],
            kappa: [kappa(sol.var[0], beta), kappa(sol.var[1], beta)],
            mean_score: [0.0; 2],
            var_score: [0.0; 2],
            mean_score_dmu: [0.0; 2],
            mean_score_ds: [0.0; 2],
            var_score_dmu: [0.0; 2],
            var_score_ds: [0.0; 2],
        };
        for j in 0..2 {
            let (mu, s) = (sol.mu[j], sol.var[j]);
            let with = |h: fn(f64, f64, f64, f64) -> f64| {
                move |x: f64| {
                    let u = x - mu;
                    h(u, s, f_beta(x, mu, s, beta), beta)
                }
            };
            c.mean_score[j] = region(j, &with(|u, _, fb, _| fb * u))?;
            c.var_score[j] = region(j, &with(|u, s, fb, _| fb * (u * u / s - 1.0)))?;
            c.mean_score_dmu[j] = region(j, &with(d_mean_dmu))?;
            c.mean_score_ds[j] = region(j, &with(d_mean_ds))?;
            c.var_score_dmu[j] = region(j, &with(d_var_dmu))?;
            c.var_score_ds[j] = region(j, &with(d_var_ds))?;
        }
        Ok(c)
    }

    /// All quadrature-derived values in a fixed order.
    pub fn integrals(&self) -> [f64; 12] {
        [
            self.mean_score[0],
            self.mean_score[1],
            self.var_score[0],
            self.var_score[1],
            self.mean_score_dmu[0],
            self.mean_score_dmu[1],
            self.mean_score_ds[0],
            self.mean_score_ds[1],
            self.var_score_dmu[0],
            self.var_score_dmu[1],
            self.var_score_ds[0],
            self.var_score_ds[1],
        ]
    }
}

/// The linear system for one `(solution, beta)`; reusable across `y`.
#[derive(Debug, Clone)]
pub struct IfSystem {
    pub solution: FunctionalSolution,
    pub dist: TrueDistribution,
    pub beta: f64,
    pub constants: IfConstants,
    pub matrix: DMatrix<f64>,
    pub condition: f64,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl IfSystem {
    pub fn new(
        sol: &FunctionalSolution,
        dist: &TrueDistribution,
        beta: f64,
        quad_tol: f64,
    ) -> Result<Self> {
        check_beta(beta)?;
        let constants = IfConstants::compute(sol, dist, beta, quad_tol)?;
        let matrix = assemble_matrix(sol, &constants, beta);
        let sv = matrix.clone().singular_values();
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let condition = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        if !(condition < MAX_CONDITION) {
            return Err(Error::SingularSystem(condition));
        }
        Ok(Self {
            solution: *sol,
            dist: *dist,
            beta,
            constants,
            lu: matrix.clone().lu(),
            matrix,
            condition,
        })
    }

    /// Right-hand side `B(y)`.
    pub fn rhs(&self, y: f64) -> DVector<f64> {
        let sol = &self.solution;
        let c = &self.constants;
        let beta = self.beta;
        let inside = if sol.a < y && y < sol.b { 1.0 } else { 0.0 };
        let indicator = [inside, 1.0 - inside];
        let mut b = DVector::zeros(8);
        b[0] = inside - c.mass[0];
        for j in 0..2 {
            let (mu, s) = (sol.mu[j], sol.var[j]);
            let u = y - mu;
            let fb = f_beta(y, mu, s, beta);
            b[4 + j] = c.mean_score[j] - fb * u * indicator[j];
            b[6 + j] = c.var_score[j] - fb * (u * u / s - 1.0) * indicator[j]
                + beta * c.kappa[j] * (c.mass[j] - indicator[j]);
        }
        b
    }

    pub fn influence_at(&self, y: f64) -> Result<InfluenceVector> {
        let x = self
            .lu
            .solve(&self.rhs(y))
            .ok_or(Error::SingularSystem(self.condition))?;
        let mut v = [0.0; 8];
        v.copy_from_slice(x.as_slice());
        Ok(InfluenceVector::from_array(v))
    }

    /// Influence vectors over a grid, evaluated in parallel.
    pub fn curve(&self, ys: &[f64]) -> Result<Vec<(f64, InfluenceVector)>> {
        ys.par_iter()
            .map(|&y| Ok((y, self.influence_at(y)?)))
            .collect()
    }
}

/// Jacobian of the defining equations in
/// `(pi1, pi2, a, b, mu1, mu2, s1, s2)`.
fn assemble_matrix(sol: &FunctionalSolution, c: &IfConstants, beta: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(8, 8);
    let [pa, pb] = c.density_at_boundary;
    let (a, b) = (sol.a, sol.b);
    let [mu1, mu2] = sol.mu;
    let [s1, s2] = sol.var;
    let [pi1, pi2] = sol.pi;

    m[(0, 0)] = 1.0;
    m[(0, 2)] = pa;
    m[(0, 3)] = -pb;

    m[(1, 0)] = 1.0;
    m[(1, 1)] = 1.0;

    for (row, x, col) in [(2, a, 2), (3, b, 3)] {
        m[(row, 0)] = 2.0 / pi1;
        m[(row, 1)] = -2.0 / pi2;
        m[(row, col)] = -2.0 * (x - mu1) / s1 + 2.0 * (x - mu2) / s2;
        m[(row, 4)] = 2.0 * (x - mu1) / s1;
        m[(row, 5)] = -2.0 * (x - mu2) / s2;
        m[(row, 6)] = -1.0 / s1 + (x - mu1).powi(2) / (s1 * s1);
        m[(row, 7)] = 1.0 / s2 - (x - mu2).powi(2) / (s2 * s2);
    }

    // boundary terms: the first region gains b and loses a, the second the reverse
    let mean_score = |x: f64, j: usize| f_beta(x, sol.mu[j], sol.var[j], beta) * (x - sol.mu[j]);
    let var_score = |x: f64, j: usize| {
        let u = x - sol.mu[j];
        f_beta(x, sol.mu[j], sol.var[j], beta) * (u * u / sol.var[j] - 1.0)
    };
    for j in 0..2 {
        let sign = if j == 0 { 1.0 } else { -1.0 };
        let (mrow, vrow) = (4 + j, 6 + j);
        m[(mrow, 2)] = -sign * mean_score(a, j) * pa;
        m[(mrow, 3)] = sign * mean_score(b, j) * pb;
        m[(mrow, 4 + j)] = c.mean_score_dmu[j];
        m[(mrow, 6 + j)] = c.mean_score_ds[j];

        let bk = beta * c.kappa[j];
        m[(vrow, 2)] = -sign * (var_score(a, j) + bk) * pa;
        m[(vrow, 3)] = sign * (var_score(b, j) + bk) * pb;
        m[(vrow, 4 + j)] = c.var_score_dmu[j];
        m[(vrow, 6 + j)] = c.var_score_ds[j] - 0.5 * beta * bk / sol.var[j] * c.mass[j];
    }
    m
}

/// `(A, B(y))` for a single contamination point.
pub fn assemble_if_system(
    sol: &FunctionalSolution,
    dist: &TrueDistribution,
    beta: f64,
    y: f64,
    quad_tol: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let sys = IfSystem::new(sol, dist, beta, quad_tol)?;
    let rhs = sys.rhs(y);
    Ok((sys.matrix, rhs))
}

pub fn influence_at(
    sol: &FunctionalSolution,
    dist: &TrueDistribution,
    beta: f64,
    y: f64,
) -> Result<InfluenceVector> {
    IfSystem::new(sol, dist, beta, InfluenceConfig::default().quad_tol)?.influence_at(y)
}

/// Finite-difference influence: re-solves the functional at
/// `(1 - eps) P + eps delta_y` for each `eps` and extrapolates the difference
/// quotients to `eps = 0`.
pub fn numeric_if_oracle(
    dist: &TrueDistribution,
    beta: f64,
    cfg: &InfluenceConfig,
    y: f64,
    eps_list: &[f64],
) -> Result<InfluenceVector> {
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidConfig(
            "eps_list must hold values in (0, 1)".into(),
        ));
    }
    let base = solve_functional(dist, beta, cfg)?;
    let t0 = base.theta();
    let quotients: Vec<[f64; 8]> = eps_list
        .iter()
        .map(|&eps| {
            let m = Measure {
                dist,
                point: Some((eps, y)),
            };
            let sol = solve_with(&m, beta, cfg, start_of(&base))?;
            let t = sol.theta();
            let mut d = [0.0; 8];
            for i in 0..8 {
                d[i] = (t[i] - t0[i]) / eps;
            }
            Ok(d)
        })
        .collect::<Result<_>>()?;
    let mut out = [0.0; 8];
    for i in 0..8 {
        let values: Vec<f64> = quotients.iter().map(|d| d[i]).collect();
        out[i] = neville_at_zero(eps_list, &values);
    }
    Ok(InfluenceVector::from_array(out))
}

/// Value at zero of the interpolating polynomial through `(xs, ys)`.
fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

/// Evenly spaced grid including both ends.
pub fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

pub fn if_curve(
    sol: &FunctionalSolution,
    dist: &TrueDistribution,
    beta: f64,
    ys: &[f64],
) -> Result<Vec<(f64, InfluenceVector)>> {
    IfSystem::new(sol, dist, beta, InfluenceConfig::default().quad_tol)?.curve(ys)
}

/// Writes `y,IF_pi1,...,IF_s2` rows.
pub fn write_if_csv<W: Write>(mut w: W, rows: &[(f64, InfluenceVector)]) -> std::io::Result<()> {
    writeln!(w, "y,IF_pi1,IF_pi2,IF_a,IF_b,IF_mu1,IF_mu2,IF_s1,IF_s2")?;
    for (y, v) in rows {
        write!(w, "{y}")?;
        for x in v.to_array() {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Range `max - min` of each influence component over a curve.
pub fn curve_ranges(rows: &[(f64, InfluenceVector)]) -> [f64; 8] {
    let mut lo = [f64::INFINITY; 8];
    let mut hi = [f64::NEG_INFINITY; 8];
    for (_, v) in rows {
        for (i, x) in v.to_array().into_iter().enumerate() {
            lo[i] = lo[i].min(x);
            hi[i] = hi[i].max(x);
        }
    }
    let mut r = [0.0; 8];
    for i in 0..8 {
        r[i] = hi[i] - lo[i];
    }
    r
}
