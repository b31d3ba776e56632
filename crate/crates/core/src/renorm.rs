//! Long orbits conjugated into the gauge of the periodic fixed point: the
//! closeness of `B⁻¹ Ã_{bq} B` to a quarter rotation and the averaging
//! inequality it implies through the midpoint estimate.
//!
//! The invariant section `m̃` of the true cocycle is replaced by the fixed
//! point of a finer periodic approximant; every result computed from it is a
//! proxy.

use serde::Serialize;

use crate::cocycle::{product, step_matrix, CocycleParams, Frequency};
use crate::diophantine::PqWindow;
use crate::error::{invalid, AmoError, Result};
use crate::periodic::BandSpectrum;
use crate::sl2::{elliptic_data, hyperbolic_dist, phi, transport_to, HPoint, Mat2, Mat2R};

/// Largest `bq` for one orbit product.
pub const STEP_BUDGET: u64 = 10_000_000;

/// Inputs of one orbit experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitExperiment {
    pub lambda: f64,
    pub p: u64,
    pub q: u64,
    /// Frequency of the long orbit; close to `p/q`.
    pub alpha: Frequency,
    pub energy: f64,
    pub b: u64,
    pub theta: f64,
    /// Odd numerator paired with `b`, when known.
    pub witness_a: Option<u64>,
    /// Window that `b` must lie in, when known.
    pub window: Option<PqWindow>,
}

impl OrbitExperiment {
    pub fn new(lambda: f64, p: u64, q: u64, alpha: Frequency, energy: f64, b: u64, theta: f64) -> Self {
        OrbitExperiment { lambda, p, q, alpha, energy, b, theta, witness_a: None, window: None }
    }

    pub fn with_witness(mut self, a: u64) -> Self {
        self.witness_a = Some(a);
        self
    }

    pub fn with_window(mut self, w: PqWindow) -> Self {
        self.window = Some(w);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.b == 0 || self.q == 0 {
            return Err(invalid("orbit experiment needs b >= 1 and q >= 1"));
        }
        if let Some(w) = self.window {
            if self.b < w.b_lo || self.b > w.b_hi {
                return Err(invalid(format!("b = {} outside window [{}, {}]", self.b, w.b_lo, w.b_hi)));
            }
        }
        if let Some(a) = self.witness_a {
            if a % 2 == 0 {
                return Err(invalid("witness numerator must be odd"));
            }
        }
        let steps = self.b.saturating_mul(self.q);
        if steps > STEP_BUDGET {
            return Err(AmoError::StepBudgetExceeded { steps, budget: STEP_BUDGET });
        }
        Ok(())
    }

    fn periodic_params(&self) -> CocycleParams {
        CocycleParams { lambda: self.lambda, alpha: Frequency::Rational { p: self.p % self.q, q: self.q }, energy: self.energy }
    }

    /// `A_q(θ)` at the rational frequency.
    pub fn block(&self, theta: f64) -> Result<Mat2R> {
        product(&self.periodic_params(), theta, self.q).to_mat2r()
    }

    /// `m(θ)`, the fixed point of `A_q(θ)`.
    pub fn fixed_point(&self, theta: f64) -> Result<HPoint> {
        Ok(elliptic_data(&self.block(theta)?)?.fixed_point)
    }

    /// `B(θ)` with `B(θ)·i = m(θ)`.
    pub fn gauge(&self, theta: f64) -> Result<Mat2R> {
        Ok(transport_to(self.fixed_point(theta)?))
    }

    /// `Ã_{bq}(θ)` along the true frequency.
    pub fn long_product(&self) -> Result<Mat2R> {
        self.validate()?;
        let pr = CocycleParams { lambda: self.lambda, alpha: self.alpha, energy: self.energy };
        product(&pr, self.theta, self.b * self.q).to_mat2r()
    }
}

/// `R_{±1/4}` as matrices (they act identically on the half-plane).
pub fn quarter_rotation(sign: i8) -> Mat2 {
    if sign >= 0 {
        Mat2::new(0.0, -1.0, 1.0, 0.0)
    } else {
        Mat2::new(0.0, 1.0, -1.0, 0.0)
    }
}

/// `‖B⁻¹ A_q(θ) B − R_{ερ(θ)}‖_HS` at the rational frequency.
pub fn rotation_sanity(spec: &BandSpectrum, energy: f64, theta: f64) -> Result<f64> {
    let ex = OrbitExperiment::new(spec.lambda, spec.p, spec.q, Frequency::Rational { p: spec.p, q: spec.q }, energy, 1, theta);
    let a = ex.block(theta)?;
    let ed = elliptic_data(&a)?;
    let b = transport_to(ed.fixed_point);
    let conj = b.inverse() * a * b;
    let r = Mat2R::rotation(ed.epsilon as f64 * ed.rho);
    Ok(conj.as_mat().sub(r.as_mat()).hs_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitDeviation {
    /// HS distance of `B⁻¹ Ã_{bq} B` to the nearer quarter rotation.
    pub dev: f64,
    /// `+1` for `R_{1/4}`, `−1` for `R_{−1/4}`.
    pub which: i8,
    /// Orientation `ε` of `A_q(θ) = B R_{ερ} B⁻¹`.
    pub epsilon: i8,
    /// `R_{ε/4}` for `a ≡ 1`, `R_{−ε/4}` for `a ≡ 3 (mod 4)`.
    pub predicted: Option<i8>,
    /// Whether `which` agrees with `predicted`; disagreements are reported.
    pub agrees: Option<bool>,
}

pub fn orbit_deviation(ex: &OrbitExperiment) -> Result<OrbitDeviation> {
    let long = ex.long_product()?;
    let ed = elliptic_data(&ex.block(ex.theta)?)?;
    let b = transport_to(ed.fixed_point);
    let conj = b.inverse() * long * b;
    let d_plus = conj.as_mat().sub(&quarter_rotation(1)).hs_norm();
    let d_minus = conj.as_mat().sub(&quarter_rotation(-1)).hs_norm();
    let (dev, which) = if d_plus <= d_minus { (d_plus, 1) } else { (d_minus, -1) };
    let predicted = ex.witness_a.map(|a| if a % 4 == 1 { ed.epsilon } else { -ed.epsilon });
    Ok(OrbitDeviation { dev, which, epsilon: ed.epsilon, predicted, agrees: predicted.map(|p| p == which) })
}

/// Terms of the averaging estimate at one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AveraCheck {
    /// `(φ(m̃(θ)) + φ(m̃(θ + bqα))) / 2`.
    pub lhs: f64,
    /// `φ(m(θ))`.
    pub rhs: f64,
    pub ratio: f64,
    /// `φ(m̃(θ)) > 2 φ(m(θ))`, where the estimate is immediate.
    pub short_circuit: bool,
    /// `|ln φ(m̃(θ + bqα)) − ln φ(B R_{1/4} B⁻¹ · m̃(θ))|`.
    pub transport_gap: f64,
    /// `(φ(m̃(θ)) + φ(B R_{1/4} B⁻¹ · m̃(θ))) / 2 − φ(m(θ))`, never negative.
    pub midpoint_excess: f64,
    /// Always true: `m̃` is a periodic stand-in.
    pub proxy: bool,
}

/// The averaging estimate with an arbitrary section standing in for `m̃`.
pub fn avera_with_section<F>(ex: &OrbitExperiment, section: F) -> Result<AveraCheck>
where
    F: Fn(f64) -> Result<HPoint>,
{
    ex.validate()?;
    let m = ex.fixed_point(ex.theta)?;
    let b = transport_to(m);
    let z1 = section(ex.theta)?;
    let z_far = section(ex.alpha.phase(ex.theta, ex.b * ex.q))?;
    let z2 = (b * Mat2R::from_mat_unchecked(quarter_rotation(1)) * b.inverse()).act(z1);
    let (p1, p_far, p2, pm) = (phi(z1), phi(z_far), phi(z2), phi(m));
    let lhs = 0.5 * (p1 + p_far);
    Ok(AveraCheck {
        lhs,
        rhs: pm,
        ratio: lhs / pm,
        short_circuit: p1 > 2.0 * pm,
        transport_gap: (p_far.ln() - p2.ln()).abs(),
        midpoint_excess: 0.5 * (p1 + p2) - pm,
        proxy: true,
    })
}

/// The averaging estimate with `m̃` replaced by the fixed point of the
/// periodic cocycle at the finer frequency `p_fine/q_fine`.
pub fn avera_check(ex: &OrbitExperiment, p_fine: u64, q_fine: u64) -> Result<AveraCheck> {
    if q_fine < ex.q {
        return Err(invalid("the fine scale must not be coarser than q"));
    }
    let fine = OrbitExperiment { p: p_fine, q: q_fine, ..*ex };
    avera_with_section(ex, |t| fine.fixed_point(t))
}

/// Defect of `z`, `B R_{1/4} B⁻¹·z`, `B·i` being a geodesic triple with the
/// last point as midpoint.
pub fn midpoint_collinearity(b: &Mat2R, z: HPoint) -> f64 {
    let z2 = (*b * Mat2R::from_mat_unchecked(quarter_rotation(1)) * b.inverse()).act(z);
    let z3 = b.act(HPoint::I);
    let (d13, d23, d12) = (hyperbolic_dist(z, z3), hyperbolic_dist(z2, z3), hyperbolic_dist(z, z2));
    (d13 - d23).abs() + (d12 - d13 - d23).abs()
}

/// Energy in the `σ` component of band `k` (0-based) with `Tr A_q(θ; E) = 2 cos(πa/(2b))`, so that
/// `4bρ(θ) = a` holds exactly at that phase.
pub fn rigged_energy(spec: &BandSpectrum, k: usize, theta: f64, a: u64, b: u64) -> Result<f64> {
    if a % 2 == 0 || a >= 2 * b {
        return Err(invalid("rigging needs odd a < 2b"));
    }
    let band = spec.bands.get(k).ok_or_else(|| invalid("band index out of range"))?;
    let target = 2.0 * (std::f64::consts::PI * a as f64 / (2.0 * b as f64)).cos();
    let tr = |e: f64| crate::periodic::trace_q(spec.lambda, spec.p, spec.q, e, theta) - target;
    let (mut lo, mut hi) = band.inner.ok_or_else(|| invalid("sigma is empty for lambda > 1"))?;
    let (flo, fhi) = (tr(lo), tr(hi));
    if flo.signum() == fhi.signum() {
        return Err(AmoError::OutsideSpectrum { energy: 0.5 * (lo + hi) });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tr(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `sup_θ ln φ(m(θ)) / q` over the given energies, on `n_theta` phases.
pub fn log_phi_growth(spec: &BandSpectrum, energies: &[f64], n_theta: usize) -> Result<f64> {
    let mut sup = 0.0f64;
    for &e in energies {
        for j in 0..n_theta {
            let m = spec.fixed_point_field(e, j as f64 / n_theta as f64)?;
            sup = sup.max(phi(m).ln() / spec.q as f64);
        }
    }
    Ok(sup)
}

/// One step `A(θ)` of the experiment's cocycle, for tests and diagnostics.
pub fn experiment_step(ex: &OrbitExperiment, theta: f64) -> Mat2R {
    step_matrix(&ex.periodic_params(), theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sl2::moebius_act;
    use proptest::prelude::*;

    fn rigged(q_p: (u64, u64), a: u64, b: u64, theta: f64) -> (BandSpectrum, OrbitExperiment) {
        let (p, q) = q_p;
        let s = BandSpectrum::new(0.5, p, q).unwrap();
        let e = rigged_energy(&s, 1, theta, a, b).unwrap();
        let ex = OrbitExperiment::new(0.5, p, q, Frequency::Rational { p, q }, e, b, theta).with_witness(a);
        (s, ex)
    }

    #[test]
    fn exact_quarter_rotation_at_rational_frequency() {
        for a in [3u64, 5, 7, 9, 11] {
            let (_, ex) = rigged((2, 5), a, 11, 0.17);
            let d = orbit_deviation(&ex).unwrap();
            assert!(d.dev < 1e-8, "a={a}: {d:?}");
            assert_eq!(d.agrees, Some(true), "a={a}: {d:?}");
        }
    }

    #[test]
    fn deviation_shrinks_with_the_perturbation() {
        let (_, ex) = rigged((2, 5), 3, 13, 0.31);
        let devs: Vec<f64> = [1e-8, 1e-10, 1e-12]
            .iter()
            .map(|&d| orbit_deviation(&OrbitExperiment { alpha: Frequency::perturbed(2, 5, d).unwrap(), ..ex }).unwrap().dev)
            .collect();
        assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
    }

    #[test]
    fn preconditions() {
        let (_, ex) = rigged((2, 5), 3, 13, 0.31);
        let w = PqWindow::explicit(5, 2, 10).unwrap();
        assert!(orbit_deviation(&ex.with_window(w)).is_err());
        let huge = OrbitExperiment { b: 3_000_000, ..ex };
        assert!(matches!(orbit_deviation(&huge), Err(AmoError::StepBudgetExceeded { .. })));
        let off = OrbitExperiment { energy: 10.0, ..ex };
        assert!(matches!(orbit_deviation(&off), Err(AmoError::NotElliptic { .. })));
    }

    #[test]
    fn degenerate_avera_is_exact() {
        let (_, ex) = rigged((2, 5), 3, 11, 0.05);
        let r = avera_check(&ex, 2, 5).unwrap();
        assert!(r.ratio >= 1.0 - 1e-9, "{r:?}");
        assert!(r.midpoint_excess >= -1e-10);
        assert!(r.proxy);
    }

    #[test]
    fn midpoint_inequality_for_any_section_near_rotation() {
        // With an exact quarter rotation, (φ(z) + φ(Ã z)) / 2 ≥ φ(m) for every z.
        let (_, ex) = rigged((2, 5), 5, 11, 0.4);
        let long = ex.long_product().unwrap();
        for z in [HPoint::new(0.3, 0.2).unwrap(), HPoint::new(-4.0, 2.0).unwrap(), HPoint::I] {
            let lhs = 0.5 * (phi(z) + phi(moebius_act(&long, z)));
            assert!(lhs >= phi(ex.fixed_point(ex.theta).unwrap()) * (1.0 - 1e-9));
        }
    }

    #[test]
    fn short_circuit_flag() {
        let (_, ex) = rigged((2, 5), 3, 11, 0.05);
        let far = HPoint::new(50.0, 0.01).unwrap();
        let r = avera_with_section(&ex, |_| Ok(far)).unwrap();
        assert!(r.short_circuit && r.ratio > 1.0);
    }

    #[test]
    fn rotation_sanity_inside_sigma() {
        let s = BandSpectrum::new(0.5, 3, 8).unwrap();
        for b in &s.bands {
            let (l, h) = b.inner.unwrap();
            for th in [0.0, 0.21, 0.77] {
                assert!(rotation_sanity(&s, 0.5 * (l + h), th).unwrap() < 1e-7);
            }
        }
    }

    #[test]
    fn collinearity_examples() {
        assert!(midpoint_collinearity(&Mat2R::identity(), HPoint::new(0.0, 2.0).unwrap()) < 1e-10);
        assert_eq!(midpoint_collinearity(&Mat2R::identity(), HPoint::I), 0.0);
    }

    #[test]
    fn free_growth_is_zero() {
        let s = BandSpectrum::new(0.0, 0, 1).unwrap();
        assert_eq!(log_phi_growth(&s, &[0.0], 8).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn collinearity_defect_is_tiny(a in -3.0f64..3.0, c in -3.0f64..3.0, d in 0.2f64..3.0, x in -5.0f64..5.0, y in 0.05f64..5.0) {
            // [[a, b], [c, d]] with b fixed by the determinant
            let b = (a * d - 1.0) / c.max(0.1);
            let m = Mat2R::renormalize(Mat2::new(a, b, c.max(0.1), d));
            prop_assume!(m.is_ok());
            let defect = midpoint_collinearity(&m.unwrap(), HPoint::new(x, y).unwrap());
            prop_assert!(defect < 1e-8, "{}", defect);
        }
    }
}
