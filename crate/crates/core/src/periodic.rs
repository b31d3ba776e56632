//! Rational frequency `p/q`: the Chambers discriminant, band spectra `Σ`
//! and `σ`, the rotation-number formula for the IDS and its density.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::{gcd, product, CocycleParams, Frequency};
use crate::error::{invalid, AmoError, Result};
use crate::interval::IntervalSet;
use crate::quad::{integrate_sqrt_endpoints, periodic_mean, CompensatedSum};
use crate::sl2::{elliptic_data, fixed_point_phi_from_trace, transport_to, HPoint, Mat2R};
use crate::symeig::{eigenvalues, SymMatrix};

/// Default largest supported denominator.
pub const Q_MAX: u64 = 2000;

/// Below this `λ^q` the `2λ^q` term of the discriminant is dropped.
const FLUSH: f64 = 1e-300;

fn check_fraction(lambda: f64, p: u64, q: u64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("coupling must be finite and non-negative, got {lambda}")));
    }
    if q == 0 {
        return Err(invalid("denominator must be positive"));
    }
    if q > Q_MAX {
        return Err(AmoError::DegenerateQ { q, max: Q_MAX });
    }
    if gcd(p, q) != 1 {
        return Err(AmoError::NonReduced { p, q });
    }
    Ok(())
}

fn params(lambda: f64, p: u64, q: u64, energy: f64) -> CocycleParams {
    CocycleParams { lambda, alpha: Frequency::Rational { p: p % q, q }, energy }
}

/// `Tr A_q(θ)` from the transfer-matrix product.
pub fn trace_q(lambda: f64, p: u64, q: u64, energy: f64, theta: f64) -> f64 {
    product(&params(lambda, p, q, energy), theta, q).trace()
}

/// The `θ`-independent part `a_0(E)` of `Tr A_q(θ) = a_0 − 2λ^q cos 2πqθ`,
/// read off at `θ = 1/(4q)` where the cosine vanishes.
pub fn chambers_a0(lambda: f64, p: u64, q: u64, energy: f64) -> Result<f64> {
    check_fraction(lambda, p, q)?;
    Ok(trace_q(lambda, p, q, energy, 0.25 / q as f64))
}

/// `2λ^q`, flushed to zero when negligible.
pub fn chambers_amplitude(lambda: f64, q: u64) -> f64 {
    let lq = lambda.powi(q.min(i32::MAX as u64) as i32);
    if lq < FLUSH {
        0.0
    } else {
        2.0 * lq
    }
}

/// `ρ ∈ [0, 1/2]` with `t = 2 cos 2πρ`, clipped outside `[−2, 2]`.
pub fn rho_from_trace(t: f64) -> f64 {
    (0.5 * t).clamp(-1.0, 1.0).acos() / TAU
}

/// Rotation number of `A_q(θ)` from its trace.
pub fn rho_of_theta(lambda: f64, p: u64, q: u64, energy: f64, theta: f64) -> f64 {
    rho_from_trace(trace_q(lambda, p, q, energy, theta))
}

/// `(1/π) ∫_0^π ρ(a_0 − w cos t) dt`, the `θ`-average of `ρ(θ)`.
pub fn rho_average(a0: f64, w: f64) -> f64 {
    if w == 0.0 {
        return rho_from_trace(a0);
    }
    let acos_c = |v: f64| v.clamp(-1.0, 1.0).acos();
    // Tr increases with t; Tr < −2 on [0, t1), Tr > 2 on (t2, π]
    let t1 = acos_c((a0 + 2.0) / w);
    let t2 = acos_c((a0 - 2.0) / w);
    let mid = integrate_sqrt_endpoints(|t| rho_from_trace(a0 - w * t.cos()), t1, t2, 1e-13).value;
    (0.5 * t1 + mid) / PI
}

/// One band of `Σ_{λ,p/q}` and the component of `σ_{λ,p/q}` inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    /// 1-based band index.
    pub k: usize,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    /// `None` when `σ` is empty (`λ > 1`).
    pub inner: Option<(f64, f64)>,
    /// `(−1)^{q+k−1}`.
    pub parity: i8,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.sigma_hi - self.sigma_lo
    }

    pub fn inner_width(&self) -> f64 {
        self.inner.map_or(0.0, |(l, h)| h - l)
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.sigma_lo && e <= self.sigma_hi
    }
}

/// The `q` bands of `Σ_{λ,p/q}` with the matched components of `σ_{λ,p/q}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSpectrum {
    pub lambda: f64,
    pub p: u64,
    pub q: u64,
    pub bands: Vec<Band>,
}

/// Energies where `Tr A_q(θ) = ±2`: eigenvalues of the `q × q` operator on
/// one period with potential phase `theta` and boundary sign `sign`.
fn floquet_eigenvalues(lambda: f64, p: u64, q: u64, theta: f64, sign: f64) -> Vec<f64> {
    let n = q as usize;
    let freq = Frequency::Rational { p: p % q, q };
    let mut h = SymMatrix::zeros(n);
    for j in 0..n {
        h.add(j, j, 2.0 * lambda * (TAU * freq.phase(theta, j as u64)).cos());
        let next = (j + 1) % n;
        let weight = if j + 1 == n { sign } else { 1.0 };
        h.add(j, next, weight);
        h.add(next, j, weight);
    }
    eigenvalues(&h)
}

/// Largest relative move of a polished edge. The symmetric eigensolver is
/// already accurate to ~1e-14; larger moves only chase rounding noise of the
/// discriminant near tangent roots (touching bands at λ = 1).
const POLISH_WINDOW: f64 = 1e-10;

/// Refines `guess`, a root of `f`, by bisection on a bracket grown inside
/// `[lo_limit, hi_limit]` and within [`POLISH_WINDOW`]. Without a sign
/// change the guess is kept.
fn polish_root<F: Fn(f64) -> f64>(f: F, guess: f64, lo_limit: f64, hi_limit: f64) -> f64 {
    let f0 = f(guess);
    if f0 == 0.0 {
        return guess;
    }
    let max_h = POLISH_WINDOW * (1.0 + guess.abs());
    let mut h = 64.0 * f64::EPSILON * (1.0 + guess.abs());
    while h <= max_h {
        let (l, r) = ((guess - h).max(lo_limit), (guess + h).min(hi_limit));
        let (fl, fr) = (f(l), f(r));
        let bracket = if fl.signum() != f0.signum() {
            Some((l, guess, fl))
        } else if fr.signum() != f0.signum() {
            Some((guess, r, f0))
        } else {
            None
        };
        if let Some((mut a, mut b, mut fa)) = bracket {
            loop {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let fm = f(m);
                if fm == 0.0 {
                    return m;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            return if f(a).abs() <= f(b).abs() { a } else { b };
        }
        if l <= lo_limit && r >= hi_limit {
            return guess;
        }
        h *= 4.0;
    }
    guess
}

/// Sorted roots of `a_0(E) = target(tag)` polished against the discriminant.
fn polished_edges(lambda: f64, p: u64, q: u64, mut roots: Vec<(f64, f64)>) -> Vec<f64> {
    roots.sort_by(|x, y| x.0.total_cmp(&y.0));
    let a0 = |e: f64| trace_q(lambda, p, q, e, 0.25 / q as f64);
    let n = roots.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let (r, target) = roots[i];
            let lo = if i > 0 { 0.5 * (roots[i - 1].0 + r) } else { r - 1.0 };
            let hi = if i + 1 < n { 0.5 * (roots[i + 1].0 + r) } else { r + 1.0 };
            polish_root(|e| a0(e) - target, r, lo, hi)
        })
        .collect()
}

impl BandSpectrum {
    /// Computes `Σ` (and `σ` when `λ ≤ 1`) for a reduced fraction `p/q`.
    pub fn new(lambda: f64, p: u64, q: u64) -> Result<Self> {
        check_fraction(lambda, p, q)?;
        let w = chambers_amplitude(lambda, q);
        let half = 0.5 / q as f64;
        let tagged = |theta: f64, sign: f64, target: f64| {
            floquet_eigenvalues(lambda, p, q, theta, sign).into_iter().map(move |e| (e, target))
        };
        // θ = 0: Tr = a_0 − w; θ = 1/(2q): Tr = a_0 + w
        let outer: Vec<(f64, f64)> = tagged(0.0, 1.0, 2.0 + w).chain(tagged(half, -1.0, -2.0 - w)).collect();
        let sigma = polished_edges(lambda, p, q, outer);
        let inner = if lambda <= 1.0 {
            let roots: Vec<(f64, f64)> = tagged(0.0, -1.0, w - 2.0).chain(tagged(half, 1.0, 2.0 - w)).collect();
            Some(polished_edges(lambda, p, q, roots))
        } else {
            None
        };
        let bands = (0..q as usize)
            .map(|i| {
                let (lo, hi) = (sigma[2 * i], sigma[2 * i + 1]);
                let inner = inner.as_ref().map(|e| {
                    let l = e[2 * i].clamp(lo, hi);
                    let h = e[2 * i + 1].clamp(l, hi);
                    (l, h)
                });
                let k = i + 1;
                let parity = if (q as usize + k - 1) % 2 == 0 { 1 } else { -1 };
                Band { k, sigma_lo: lo, sigma_hi: hi, inner, parity }
            })
            .collect();
        Ok(BandSpectrum { lambda, p, q, bands })
    }

    /// `2λ^q` (zero when flushed).
    pub fn amplitude(&self) -> f64 {
        chambers_amplitude(self.lambda, self.q)
    }

    pub fn a0(&self, energy: f64) -> f64 {
        trace_q(self.lambda, self.p, self.q, energy, 0.25 / self.q as f64)
    }

    pub fn params(&self, energy: f64) -> CocycleParams {
        params(self.lambda, self.p, self.q, energy)
    }

    /// `Σ_{λ,p/q}` as an interval set.
    pub fn sigma_set(&self) -> IntervalSet {
        IntervalSet::new(self.bands.iter().map(|b| (b.sigma_lo, b.sigma_hi))).unwrap_or_default()
    }

    /// `σ_{λ,p/q}`; empty for `λ > 1`.
    pub fn inner_set(&self) -> IntervalSet {
        IntervalSet::new(self.bands.iter().filter_map(|b| b.inner)).unwrap_or_default()
    }

    pub fn sigma_measure(&self) -> f64 {
        crate::quad::sum(&self.bands.iter().map(Band::width).collect::<Vec<_>>())
    }

    pub fn inner_measure(&self) -> f64 {
        crate::quad::sum(&self.bands.iter().map(Band::inner_width).collect::<Vec<_>>())
    }

    /// `|Σ ∖ σ|`.
    pub fn gap_measure(&self) -> f64 {
        self.sigma_measure() - self.inner_measure()
    }

    /// Index into `bands` of the band containing `e`; touching edges go to
    /// the left band.
    pub fn band_index(&self, e: f64) -> Option<usize> {
        let i = self.bands.partition_point(|b| b.sigma_hi < e);
        (i < self.bands.len() && self.bands[i].sigma_lo <= e).then_some(i)
    }

    /// θ-average of `ρ(θ)` through the Chambers form.
    pub fn rho_bar(&self, energy: f64) -> f64 {
        rho_average(self.a0(energy), self.amplitude())
    }

    /// IDS inside band `i` (0-based), clamped to the band's `1/q` range.
    pub fn ids_in_band(&self, i: usize, energy: f64) -> f64 {
        let band = &self.bands[i];
        let e = energy.clamp(band.sigma_lo, band.sigma_hi);
        let s = band.parity as f64;
        let k = band.k as f64;
        let qn = k - 1.0 + s * 2.0 * self.rho_bar(e) + 0.5 * (1.0 - s);
        (qn / self.q as f64).clamp((k - 1.0) / self.q as f64, k / self.q as f64)
    }

    /// Integrated density of states: the rotation-number formula inside
    /// bands and the constant `k/q` in the `k`-th gap.
    pub fn ids(&self, energy: f64) -> f64 {
        if let Some(i) = self.band_index(energy) {
            return self.ids_in_band(i, energy);
        }
        let below = self.bands.partition_point(|b| b.sigma_hi < energy);
        below as f64 / self.q as f64
    }

    /// `|N(S)|`: the IDS mass of `s`, computed band by band.
    pub fn n_measure(&self, s: &IntervalSet) -> f64 {
        let mut total = CompensatedSum::new();
        for (i, b) in self.bands.iter().enumerate() {
            for &(l, h) in s.clip(b.sigma_lo, b.sigma_hi).intervals() {
                total.add(self.ids_in_band(i, h) - self.ids_in_band(i, l));
            }
        }
        total.value()
    }

    /// Fixed point `m(θ)` of `A_q(θ)` in the upper half-plane.
    pub fn fixed_point_field(&self, energy: f64, theta: f64) -> Result<HPoint> {
        Ok(elliptic_data(&product(&self.params(energy), theta, self.q).to_mat2r()?)?.fixed_point)
    }

    /// `ψ(θ)` in `A(θ) = B(θ + p/q) R_ψ B(θ)⁻¹`, with `B = transport_to(m)`.
    pub fn gauge_rotation_psi(&self, energy: f64, theta: f64) -> Result<f64> {
        let pr = self.params(energy);
        let b0 = transport_to(self.fixed_point_field(energy, theta)?);
        let b1 = transport_to(self.fixed_point_field(energy, pr.alpha.phase(theta, 1))?);
        let step = crate::cocycle::step_matrix(&pr, theta);
        Ok((b1.inverse() * step * b0).rotation_angle())
    }

    /// `dN/dE = (1/2π) ∫_{|Tr A_q(θ)| < 2} φ(m(θ)) dθ`.
    pub fn ids_density(&self, energy: f64) -> Result<f64> {
        let a0 = self.a0(energy);
        let w = self.amplitude();
        let pr = self.params(energy);
        let q = self.q as f64;
        let integrand = |theta: f64| -> f64 {
            let prod = product(&pr, theta, self.q);
            let t = a0 - w * (TAU * q * theta).cos();
            let norm_sq = (2.0 * prod.log_norm()).exp();
            fixed_point_phi_from_trace(norm_sq, t).unwrap_or(0.0)
        };
        // window in s = 2πqθ (mod 2π) where |a_0 − w cos s| < 2
        let (c_lo, c_hi) = if w > 0.0 { ((a0 - 2.0) / w, (a0 + 2.0) / w) } else { (f64::NEG_INFINITY, f64::INFINITY) };
        if w == 0.0 && a0.abs() >= 2.0 {
            return Err(AmoError::OutsideSpectrum { energy });
        }
        if c_lo <= -1.0 && c_hi >= 1.0 {
            let min = 8 * self.q as usize;
            let m = periodic_mean(integrand, min.max(64), 1e-13, 1 << 20);
            return Ok(m.value / TAU);
        }
        let s_hi = c_hi.clamp(-1.0, 1.0).acos();
        let s_lo = c_lo.clamp(-1.0, 1.0).acos();
        if s_hi >= s_lo {
            return Err(AmoError::OutsideSpectrum { energy });
        }
        let windows: Vec<(f64, f64)> = if c_hi >= 1.0 {
            vec![(-s_lo, s_lo)]
        } else if c_lo <= -1.0 {
            vec![(s_hi, TAU - s_hi)]
        } else {
            vec![(s_hi, s_lo), (TAU - s_lo, TAU - s_hi)]
        };
        let mut total = CompensatedSum::new();
        for j in 0..self.q {
            for &(a, b) in &windows {
                let to_theta = |s: f64| (s / TAU + j as f64) / q;
                let r = integrate_sqrt_endpoints(&integrand, to_theta(a), to_theta(b), 1e-11);
                total.add(r.value);
            }
        }
        Ok(total.value() / TAU)
    }
}

/// Reconstructs `a_0` from `Tr A_q(θ) + 2λ^q cos 2πqθ` at phase `theta`.
pub fn chambers_residual(lambda: f64, p: u64, q: u64, energy: f64, theta: f64) -> Result<f64> {
    let a0 = chambers_a0(lambda, p, q, energy)?;
    let t = trace_q(lambda, p, q, energy, theta);
    Ok(t + chambers_amplitude(lambda, q) * (TAU * q as f64 * theta).cos() - a0)
}

/// `Σ_i ψ(θ + i p/q)` reduced to `(−1/2, 1/2]`, to be compared with `±ρ(θ)`.
pub fn psi_sum(spec: &BandSpectrum, energy: f64, theta: f64) -> Result<f64> {
    let freq = spec.params(energy).alpha;
    let mut total = CompensatedSum::new();
    for i in 0..spec.q {
        total.add(spec.gauge_rotation_psi(energy, freq.phase(theta, i))?);
    }
    let r = total.value().rem_euclid(1.0);
    Ok(if r > 0.5 { r - 1.0 } else { r })
}

/// `B(θ)⁻¹ A_q(θ) B(θ)` for the transport gauge at `m(θ)`.
pub fn conjugated_block(spec: &BandSpectrum, energy: f64, theta: f64) -> Result<Mat2R> {
    let b = transport_to(spec.fixed_point_field(energy, theta)?);
    let a = product(&spec.params(energy), theta, spec.q).to_mat2r()?;
    Ok(b.inverse() * a * b)
}
