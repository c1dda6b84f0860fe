//! Adaptive Gauss-Kronrod (7/15) integration on finite intervals.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Absolute-tolerance adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

impl Integrator {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[lo, hi]`. Reversed bounds flip the sign.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<f64> {
        if lo == hi {
            return Ok(0.0);
        }
        if hi < lo {
            return self.integrate(f, hi, lo).map(|v| -v);
        }
        let (value, error) = kronrod(&f, lo, hi);
        let mut segments = vec![Segment {
            lo,
            hi,
            value,
            error,
        }];
        let mut total_err = error;
        while total_err > self.abs_tol {
            if segments.len() >= self.max_intervals {
                let estimate: f64 = segments.iter().map(|s| s.value).sum();
                return Err(Error::Quadrature {
                    tol: self.abs_tol,
                    estimate,
                });
            }
            let worst = segments
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
                .map(|(i, _)| i)
                .expect("nonempty");
            let seg = segments.swap_remove(worst);
            let mid = 0.5 * (seg.lo + seg.hi);
            if mid <= seg.lo || mid >= seg.hi {
                // interval below floating-point resolution
                segments.push(seg);
                break;
            }
            let (v1, e1) = kronrod(&f, seg.lo, mid);
            let (v2, e2) = kronrod(&f, mid, seg.hi);
            segments.push(Segment {
                lo: seg.lo,
                hi: mid,
                value: v1,
                error: e1,
            });
            segments.push(Segment {
                lo: mid,
                hi: seg.hi,
                value: v2,
                error: e2,
            });
            total_err = segments.iter().map(|s| s.error).sum();
        }
        Ok(segments.iter().map(|s| s.value).sum())
    }
}

impl Integrator {
    /// Integrates over `[lo, hi]` split at every breakpoint strictly inside it.
    /// The tolerance applies to each piece.
    pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
        &self,
        f: F,
        lo: f64,
        hi: f64,
        breaks: &[f64],
    ) -> Result<f64> {
        if hi < lo {
            return self.integrate_with_breaks(f, hi, lo, breaks).map(|v| -v);
        }
        let mut pts: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&x| x > lo && x < hi)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut total = 0.0;
        let mut left = lo;
        for x in pts.into_iter().chain(std::iter::once(hi)) {
            total += self.integrate(&f, left, x)?;
            left = x;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let q = Integrator::default();
        let v = q
            .integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0)
            .unwrap();
        assert_relative_eq!(v, 64.0 / 6.0 - 1.0 / 6.0 - 9.0 + 3.0, epsilon = 1e-13);
    }

    #[test]
    fn gaussian_mass_and_square() {
        let q = Integrator::default();
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        assert_relative_eq!(q.integrate(phi, -40.0, 40.0).unwrap(), 1.0, epsilon = 1e-11);
        let sq = q.integrate(|x| phi(x).powi(2), -40.0, 40.0).unwrap();
        assert_relative_eq!(sq, 1.0 / (2.0 * PI.sqrt()), epsilon = 1e-11);
    }

    #[test]
    fn breakpoints_catch_narrow_peak() {
        let q = Integrator::default();
        let peak = |x: f64| (-0.5 * x * x / 1e-4).exp() / (2.0 * PI * 1e-4).sqrt();
        let breaks: Vec<f64> = (-12..=12).map(|k| 0.01 * k as f64).collect();
        let v = q
            .integrate_with_breaks(peak, -500.0, 40.0, &breaks)
            .unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn reversed_bounds_negate() {
        let q = Integrator::default();
        let a = q.integrate(f64::sin, 0.0, 2.0).unwrap();
        let b = q.integrate(f64::sin, 2.0, 0.0).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn kink_needs_subdivision() {
        let q = Integrator::with_tol(1e-12);
        let v = q.integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0).unwrap();
        assert_relative_eq!(v, 4.0 / 3.0, epsilon = 1e-10);
    }
}
