//! The Thouless formula `L(E) = ∫ ln|E' − E| dN(E')` and its comparison with
//! direct transfer-matrix estimates.

use rayon::prelude::*;
use serde::Serialize;

use crate::cocycle::lyapunov_avg;
use crate::error::{invalid, Result};
use crate::periodic::BandSpectrum;
use crate::quad::CompensatedSum;

/// Samples `(E_i, N_i)` of the IDS, band by band, with `N` nondecreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdsProfile {
    pub bands: Vec<Vec<(f64, f64)>>,
}

/// Chebyshev–Lobatto points on `[a, b]`, clustered at both ends.
fn cheb_nodes(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |j| a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / n as f64).cos()))
}

impl IdsProfile {
    /// Resolves each band with `n_per_piece` cells on each of the pieces
    /// `[Σ_lo, σ_lo]`, `σ`, `[σ_hi, Σ_hi]` (edges of `σ` are kinks of `N`).
    pub fn new(spec: &BandSpectrum, n_per_piece: usize) -> Result<Self> {
        if n_per_piece < 64 {
            return Err(invalid("IDS profile needs at least 64 samples per band"));
        }
        let bands = spec
            .bands
            .par_iter()
            .enumerate()
            .map(|(i, b)| {
                let mut cuts = vec![b.sigma_lo];
                if let Some((l, h)) = b.inner {
                    cuts.extend([l, h]);
                }
                cuts.push(b.sigma_hi);
                let mut es: Vec<f64> = Vec::new();
                for w in cuts.windows(2) {
                    if w[1] > w[0] {
                        es.extend(cheb_nodes(w[0], w[1], n_per_piece));
                    }
                }
                if es.is_empty() {
                    es.push(b.sigma_lo);
                }
                es.sort_by(f64::total_cmp);
                es.dedup();
                let mut pts: Vec<(f64, f64)> = es.into_iter().map(|e| (e, spec.ids_in_band(i, e))).collect();
                let mut run = f64::NEG_INFINITY;
                for p in &mut pts {
                    run = run.max(p.1);
                    p.1 = run;
                }
                pts
            })
            .collect();
        Ok(IdsProfile { bands })
    }

    /// `N(E)` by linear interpolation; constant across gaps.
    pub fn n_at(&self, e: f64) -> f64 {
        let mut last = 0.0f64;
        for pts in &self.bands {
            let (first, end) = (pts[0], pts[pts.len() - 1]);
            if e < first.0 {
                return last.max(0.0);
            }
            if e <= end.0 {
                let i = pts.partition_point(|p| p.0 < e).max(1);
                let (a, b) = (pts[i - 1], pts[i]);
                return if b.0 > a.0 { a.1 + (b.1 - a.1) * (e - a.0) / (b.0 - a.0) } else { b.1 };
            }
            last = end.1;
        }
        1.0
    }
}

/// `t ln|t| − t`, an antiderivative of `ln|t|`.
fn log_antiderivative(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.abs().ln() - t
    }
}

/// `∫ ln|E' − E| dN(E')` for the piecewise-linear `N` of the profile; cells
/// containing `E` are integrated in closed form.
pub fn thouless_l(profile: &IdsProfile, e: f64) -> f64 {
    let mut total = CompensatedSum::new();
    for pts in &profile.bands {
        for w in pts.windows(2) {
            let ((x0, n0), (x1, n1)) = (w[0], w[1]);
            if x1 <= x0 || n1 == n0 {
                continue;
            }
            let slope = (n1 - n0) / (x1 - x0);
            total.add(slope * (log_antiderivative(x1 - e) - log_antiderivative(x0 - e)));
        }
    }
    total.value()
}

/// One comparison row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThoulessRow {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "L_thouless")]
    pub l_thouless: f64,
    #[serde(rename = "L_cocycle")]
    pub l_cocycle: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThoulessReport {
    pub lambda: f64,
    pub p: u64,
    pub q: u64,
    pub n_cocycle: u64,
    pub rows: Vec<ThoulessRow>,
    pub max_diff: f64,
    /// `0.02 + 4/√n`.
    pub tolerance: f64,
    pub pass: bool,
}

/// Settings of [`thouless_consistency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThoulessSettings {
    pub n_cocycle: u64,
    pub m_samples: usize,
    pub n_per_piece: usize,
}

impl Default for ThoulessSettings {
    fn default() -> Self {
        ThoulessSettings { n_cocycle: 10_000, m_samples: 64, n_per_piece: 256 }
    }
}

impl ThoulessSettings {
    /// Defaults with 32 phases per period of `Tr A_q(θ)`, at least 64.
    pub fn for_period(q: u64) -> Self {
        ThoulessSettings { m_samples: (32 * q as usize).max(64), ..Self::default() }
    }
}

/// Evenly spaced energies over the hull of `Σ` widened by 1 on each side.
pub fn sample_energies(spec: &BandSpectrum, n: usize) -> Vec<f64> {
    let (lo, hi) = spec.sigma_set().hull().unwrap_or((0.0, 0.0));
    let (a, b) = (lo - 1.0, hi + 1.0);
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect(),
    }
}

/// Compares the Thouless integral with `lyapunov_avg` at the given energies.
pub fn thouless_compare(spec: &BandSpectrum, energies: &[f64], settings: ThoulessSettings) -> Result<ThoulessReport> {
    let profile = IdsProfile::new(spec, settings.n_per_piece)?;
    let rows: Vec<ThoulessRow> = energies
        .par_iter()
        .map(|&e| {
            let lt = thouless_l(&profile, e);
            let lc = lyapunov_avg(&spec.params(e), settings.n_cocycle, settings.m_samples)?;
            Ok(ThoulessRow { energy: e, l_thouless: lt, l_cocycle: lc, abs_diff: (lt - lc).abs() })
        })
        .collect::<Result<_>>()?;
    let max_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let tolerance = 0.02 + 4.0 / (settings.n_cocycle as f64).sqrt();
    Ok(ThoulessReport {
        lambda: spec.lambda,
        p: spec.p,
        q: spec.q,
        n_cocycle: settings.n_cocycle,
        rows,
        max_diff,
        tolerance,
        pass: max_diff <= tolerance,
    })
}

/// [`thouless_compare`] on `n_energies` points in and around `Σ_{λ,p/q}`.
pub fn thouless_consistency(lambda: f64, p: u64, q: u64, n_energies: usize) -> Result<ThoulessReport> {
    let spec = BandSpectrum::new(lambda, p, q)?;
    let energies = sample_energies(&spec, n_energies);
    thouless_compare(&spec, &energies, ThoulessSettings::for_period(q))
}
