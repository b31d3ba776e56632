//! Transfer matrices of the almost Mathieu operator and Lyapunov exponents.
//!
//! The one-step matrix at phase `θ` is `A(θ) = [[E - 2λ cos 2πθ, -1], [1, 0]]`
//! and `A_n(θ) = A(θ + (n-1)α) ⋯ A(θ)`. Long products are kept as a bounded
//! matrix times `exp(log_scale)` so that growth like `λ^n` never overflows.

use std::f64::consts::{SQRT_2, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::diophantine::ContinuedFraction;
use crate::error::{invalid, Result};
use crate::quad::CompensatedSum;
use crate::sl2::{Mat2, Mat2R};

/// Rotation frequency of the base dynamics `θ ↦ θ + α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Frequency {
    /// `p/q` in lowest terms.
    Rational { p: u64, q: u64 },
    /// A general real frequency.
    Real(f64),
    /// `p/q + delta`, kept split so that phases stay exact for tiny `delta`.
    Perturbed { p: u64, q: u64, delta: f64 },
}

impl Frequency {
    /// `p/q` reduced to lowest terms.
    pub fn rational(p: u64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(invalid("frequency denominator must be positive"));
        }
        let g = gcd(p, q);
        Ok(Frequency::Rational { p: p / g, q: q / g })
    }

    pub fn perturbed(p: u64, q: u64, delta: f64) -> Result<Self> {
        if q == 0 || !delta.is_finite() {
            return Err(invalid("perturbed frequency needs q > 0 and finite delta"));
        }
        let g = gcd(p, q);
        Ok(Frequency::Perturbed { p: p / g, q: q / g, delta })
    }

    /// The value of the `n`-th convergent plus the exact tail offset, so that
    /// the frequency equals the number the continued fraction represents.
    pub fn from_convergent(cf: &ContinuedFraction, n: usize) -> Result<Self> {
        let (p, q) = cf.convergent(n)?;
        Frequency::perturbed(p, q, cf.offset_from_convergent(n)?)
    }

    pub fn value(&self) -> f64 {
        match *self {
            Frequency::Rational { p, q } => p as f64 / q as f64,
            Frequency::Real(a) => a,
            Frequency::Perturbed { p, q, delta } => p as f64 / q as f64 + delta,
        }
    }

    /// `θ + iα` reduced to `[0, 1)`.
    pub fn phase(&self, theta: f64, i: u64) -> f64 {
        match *self {
            Frequency::Rational { p, q } => (theta + rational_shift(p, q, i)).rem_euclid(1.0),
            Frequency::Real(a) => (i as f64).mul_add(a, theta).rem_euclid(1.0),
            Frequency::Perturbed { p, q, delta } => {
                let drift = (i as f64 * delta).rem_euclid(1.0);
                (theta + rational_shift(p, q, i) + drift).rem_euclid(1.0)
            }
        }
    }
}

fn rational_shift(p: u64, q: u64, i: u64) -> f64 {
    ((i as u128 * p as u128) % q as u128) as f64 / q as f64
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Coupling, frequency and energy of an almost Mathieu cocycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleParams {
    pub lambda: f64,
    pub alpha: Frequency,
    pub energy: f64,
}

impl CocycleParams {
    pub fn new(lambda: f64, alpha: Frequency, energy: f64) -> Result<Self> {
        if !lambda.is_finite() || !energy.is_finite() {
            return Err(invalid("coupling and energy must be finite"));
        }
        Ok(CocycleParams { lambda, alpha, energy })
    }

    pub fn rational(lambda: f64, p: u64, q: u64, energy: f64) -> Result<Self> {
        Self::new(lambda, Frequency::rational(p, q)?, energy)
    }

    fn diagonal(&self, theta: f64) -> f64 {
        self.energy - 2.0 * self.lambda * (TAU * theta).cos()
    }
}

/// `A(θ) = [[E - 2λ cos 2πθ, -1], [1, 0]]`.
pub fn step_matrix(params: &CocycleParams, theta: f64) -> Mat2R {
    Mat2R::from_mat_unchecked(Mat2::new(params.diagonal(theta), -1.0, 1.0, 0.0))
}

/// A product `exp(log_scale) · mat` with `‖mat‖_HS ∈ [√2, 4]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledProduct {
    pub mat: Mat2,
    pub log_scale: f64,
}

const NORM_HI: f64 = 4.0;

impl ScaledProduct {
    pub fn identity() -> Self {
        ScaledProduct { mat: Mat2::IDENTITY, log_scale: 0.0 }
    }

    /// Rescales `mat` back to HS norm √2 when it leaves `[√2, 4]`.
    fn rebalance(mat: Mat2, log_scale: &mut CompensatedSum) -> Mat2 {
        let n = mat.hs_norm();
        if n > NORM_HI || n < SQRT_2 {
            let s = n / SQRT_2;
            log_scale.add(s.ln());
            mat.scale(1.0 / s)
        } else {
            mat
        }
    }

    /// `ln ‖P‖_HS` of the represented product `P`.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.mat.hs_norm().ln()
    }

    pub fn trace(&self) -> f64 {
        let t = self.mat.trace();
        if t == 0.0 {
            0.0
        } else {
            self.log_scale.exp() * t
        }
    }

    /// Determinant of the represented product; one up to rounding.
    pub fn det(&self) -> f64 {
        self.mat.det() * (2.0 * self.log_scale).exp()
    }

    /// The unscaled product, renormalized to unit determinant.
    pub fn to_mat2r(&self) -> Result<Mat2R> {
        Mat2R::renormalize(self.mat.scale(self.log_scale.exp()))
    }

    /// `self · earlier`.
    pub fn compose(&self, earlier: &ScaledProduct) -> ScaledProduct {
        let mut ls = CompensatedSum::new();
        ls.add(self.log_scale);
        ls.add(earlier.log_scale);
        let mat = Self::rebalance(self.mat * earlier.mat, &mut ls);
        ScaledProduct { mat, log_scale: ls.value() }
    }
}

/// `A_n(θ) = A(θ + (n-1)α) ⋯ A(θ)`.
pub fn product(params: &CocycleParams, theta: f64, n: u64) -> ScaledProduct {
    let mut m = Mat2::IDENTITY;
    let mut ls = CompensatedSum::new();
    for i in 0..n {
        let t = params.diagonal(params.alpha.phase(theta, i));
        // [[t, -1], [1, 0]] · m
        m = Mat2::new(t * m.a - m.c, t * m.b - m.d, m.a, m.b);
        m = ScaledProduct::rebalance(m, &mut ls);
    }
    ScaledProduct { mat: m, log_scale: ls.value() }
}

fn check_counts(n: u64, m_samples: usize) -> Result<()> {
    if n == 0 || m_samples == 0 {
        return Err(invalid("lyapunov estimators need n >= 1 and m_samples >= 1"));
    }
    Ok(())
}

fn sampled_log_norms(params: &CocycleParams, n: u64, m_samples: usize) -> Vec<f64> {
    (0..m_samples)
        .into_par_iter()
        .map(|j| product(params, j as f64 / m_samples as f64, n).log_norm())
        .collect()
}

/// `(1/n) · mean_θ ln ‖A_n(θ)‖_HS` over `m_samples` equispaced phases.
pub fn lyapunov_avg(params: &CocycleParams, n: u64, m_samples: usize) -> Result<f64> {
    check_counts(n, m_samples)?;
    let logs = sampled_log_norms(params, n, m_samples);
    let total: CompensatedSum = logs.into_iter().collect();
    Ok(total.value() / m_samples as f64 / n as f64)
}

/// `(1/n) · max_θ ln ‖A_n(θ)‖_HS` over `m_samples` equispaced phases.
pub fn lyapunov_sup(params: &CocycleParams, n: u64, m_samples: usize) -> Result<f64> {
    check_counts(n, m_samples)?;
    let logs = sampled_log_norms(params, n, m_samples);
    Ok(logs.into_iter().fold(f64::NEG_INFINITY, f64::max) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, alpha: Frequency, e: f64) -> CocycleParams {
        CocycleParams::new(lambda, alpha, e).unwrap()
    }

    fn golden() -> Frequency {
        Frequency::Real((5f64.sqrt() - 1.0) / 2.0)
    }

    #[test]
    fn step_matrix_examples() {
        let r = Mat2::new(0.0, -1.0, 1.0, 0.0);
        let a = step_matrix(&params(0.0, golden(), 0.0), 0.0);
        assert_eq!(*a.as_mat(), r);
        let a = step_matrix(&params(0.5, golden(), 1.0), 0.0);
        assert_eq!(*a.as_mat(), r);
        let a = step_matrix(&params(1.0, golden(), 0.0), 0.25);
        assert!(a.as_mat().max_abs_diff(&r) < 1e-15);
        assert_eq!(a.det(), 1.0);
    }

    #[test]
    fn rational_frequency_is_reduced() {
        assert_eq!(Frequency::rational(2, 4).unwrap(), Frequency::Rational { p: 1, q: 2 });
        assert!(Frequency::rational(1, 0).is_err());
        let f = Frequency::rational(3, 7).unwrap();
        assert!((f.phase(0.1, 5) - (0.1f64 + 15.0 / 7.0).rem_euclid(1.0)).abs() < 1e-15);
    }

    #[test]
    fn empty_product_is_identity() {
        let p = product(&params(0.7, golden(), 0.3), 0.2, 0);
        assert_eq!(p.mat, Mat2::IDENTITY);
        assert_eq!(p.log_scale, 0.0);
    }

    #[test]
    fn two_step_trace_by_hand() {
        let pr = params(0.5, Frequency::rational(1, 2).unwrap(), 1.0);
        let p = product(&pr, 0.0, 2);
        // (E - 2λc)(E + 2λc) - 2 with c = cos 0 = 1
        let hand = (1.0 - 1.0) * (1.0 + 1.0) - 2.0;
        assert!((p.trace() - hand).abs() < 1e-14);
        assert!((p.trace() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn free_product_is_matrix_power() {
        let pr = params(0.0, golden(), 3.0);
        let p = product(&pr, 0.123, 10).to_mat2r().unwrap();
        let step = Mat2::new(3.0, -1.0, 1.0, 0.0);
        let mut pow = Mat2::IDENTITY;
        for _ in 0..10 {
            pow = step * pow;
        }
        let rel = p.as_mat().max_abs_diff(&pow) / pow.hs_norm();
        assert!(rel < 1e-13, "{rel}");
    }

    #[test]
    fn free_lyapunov_outside_band() {
        let pr = params(0.0, golden(), 3.0);
        let exact = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((exact - 0.962_423_650_119_206_9).abs() < 1e-15);
        for n in [100u64, 1000, 10_000] {
            let l = lyapunov_avg(&pr, n, 4).unwrap();
            assert!((l - exact).abs() < 2.0 / n as f64, "n={n}: {l}");
            let s = lyapunov_sup(&pr, n, 4).unwrap();
            assert!((s - exact).abs() < 2.0 / n as f64);
        }
    }

    #[test]
    fn rotation_cocycle_has_zero_exponent() {
        let pr = params(0.0, golden(), 0.0);
        let l = lyapunov_avg(&pr, 1_000_000, 2).unwrap();
        assert!(l.abs() < 1e-6, "{l}");
    }

    #[test]
    fn single_step_sup() {
        let pr = params(0.0, golden(), 0.0);
        let s = lyapunov_sup(&pr, 1, 3).unwrap();
        // ‖[[0,-1],[1,0]]‖_HS = √2
        assert!((s - 2f64.sqrt().ln()).abs() < 1e-15);
    }

    #[test]
    fn subcritical_exponent_vanishes_on_spectrum() {
        // E = 0 lies in the spectrum for every frequency by the E ↦ -E symmetry.
        let pr = params(0.5, Frequency::rational(6765, 10946).unwrap(), 0.0);
        let l = lyapunov_avg(&pr, 10_000, 16).unwrap();
        let s = lyapunov_sup(&pr, 10_000, 16).unwrap();
        assert!(l <= 0.05 && s <= 0.05, "{l} {s}");
        assert!(l <= s + 1e-12);
    }

    #[test]
    fn estimators_reject_zero_counts() {
        let pr = params(0.5, golden(), 0.0);
        assert!(lyapunov_avg(&pr, 0, 4).is_err());
        assert!(lyapunov_sup(&pr, 4, 0).is_err());
    }

    #[test]
    fn supercritical_growth_does_not_overflow() {
        let pr = params(3.0, golden(), 0.4);
        let p = product(&pr, 0.3, 200_000);
        assert!(p.mat.hs_norm() <= NORM_HI && p.mat.hs_norm() >= SQRT_2 - 1e-12);
        assert!(p.log_scale.is_finite() && p.log_scale > 1e5);
        // Herman's bound: L ≥ ln λ
        assert!(p.log_norm() / 200_000.0 > 3f64.ln() - 0.01);
    }
}
