//! Continued fractions, Liouville-type frequencies, and the rotation-number
//! sets `P_q` and their energy pullbacks `X`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, AmoError, Result};
use crate::interval::IntervalSet;
use crate::periodic::BandSpectrum;

/// Partial quotients `a_1, a_2, …` of `x = [0; a_1, a_2, …]` and the
/// convergents `p_n/q_n`, `n ≥ 1`. Index `i` of the accessors refers to
/// `n = i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuedFraction {
    quotients: Vec<u64>,
    convergents: Vec<(u64, u64)>,
    /// True when the expansion is complete, i.e. the last convergent is the value.
    terminated: bool,
}

fn ulp(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1) - x
}

/// `x` as `m / 2^k` with `m`, `2^k` exact in `u128`.
fn dyadic(x: f64) -> Result<(u128, u128)> {
    if !(x.is_finite() && x > 0.0) {
        return Err(invalid(format!("expected a positive finite number, got {x}")));
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let tz = m.trailing_zeros() as i64;
    let (m, e) = (m >> tz, e + tz);
    if e >= 0 {
        if e > 60 {
            return Err(invalid("number too large for exact expansion"));
        }
        return Ok(((m as u128) << e, 1));
    }
    if -e > 126 {
        return Err(invalid(format!("{x} is too small for exact expansion")));
    }
    Ok((m as u128, 1u128 << (-e)))
}

impl ContinuedFraction {
    /// Expansion of `x ∈ (0, 1)`. The float is expanded exactly; a quotient
    /// is trusted only while `q_n² · ulp(x) ≤ 1`. The expansion stops early
    /// when `x` is indistinguishable from a convergent with small denominator.
    pub fn expand(x: f64, n_terms: usize) -> Result<Self> {
        if !(x > 0.0 && x < 1.0) {
            return Err(invalid(format!("continued fraction input must lie in (0,1), got {x}")));
        }
        let u = ulp(x);
        let (mut num, mut den) = dyadic(x)?;
        let mut cf = ContinuedFraction { quotients: Vec::new(), convergents: Vec::new(), terminated: false };
        let (mut p0, mut q0, mut p1, mut q1) = (1u64, 0u64, 0u64, 1u64);
        while cf.quotients.len() < n_terms {
            if num == 0 {
                cf.terminated = true;
                break;
            }
            let a128 = den / num;
            (num, den) = (den % num, num);
            let untrusted = || AmoError::PrecisionExhausted { available: cf.quotients.len(), requested: n_terms };
            let a = u64::try_from(a128).map_err(|_| untrusted())?;
            let (p, q) = match (a.checked_mul(q1).and_then(|v| v.checked_add(q0)), a.checked_mul(p1).and_then(|v| v.checked_add(p0))) {
                (Some(q), Some(p)) => (p, q),
                _ => return Err(untrusted()),
            };
            if (q as f64) * (q as f64) * u > 1.0 {
                return Err(untrusted());
            }
            cf.quotients.push(a);
            cf.convergents.push((p, q));
            (p0, q0, p1, q1) = (p1, q1, p, q);
            if num == 0 {
                cf.terminated = true;
                break;
            }
            // |x - p/q| = 1 / (q (q x' + q_prev)) with x' the complete quotient
            if (q as f64).powi(2) * u <= 1.0 / 64.0 {
                let xc = den as f64 / num as f64;
                let err = 1.0 / (q as f64 * (q as f64 * xc + q0 as f64));
                if err <= 0.5 * u {
                    cf.terminated = true;
                    cf.canonicalize_tail();
                    break;
                }
            }
        }
        Ok(cf)
    }

    /// Rewrites a trailing `…, a, 1` as `…, a + 1` (same value).
    fn canonicalize_tail(&mut self) {
        let n = self.quotients.len();
        if n >= 2 && self.quotients[n - 1] == 1 {
            self.quotients.pop();
            self.quotients[n - 2] += 1;
            let last = self.convergents.pop().expect("non-empty");
            self.convergents[n - 2] = last;
        }
    }

    /// Exact expansion of `p/q` with `0 < p < q`.
    pub fn from_ratio(p: u64, q: u64) -> Result<Self> {
        if p == 0 || p >= q {
            return Err(invalid(format!("need 0 < p < q, got {p}/{q}")));
        }
        let (mut num, mut den) = (p, q);
        let mut quotients = Vec::new();
        while num != 0 {
            quotients.push(den / num);
            (num, den) = (den % num, num);
        }
        let mut cf = Self::from_quotients(&quotients)?;
        cf.terminated = true;
        Ok(cf)
    }

    /// Builds convergents from partial quotients with checked arithmetic.
    pub fn from_quotients(quotients: &[u64]) -> Result<Self> {
        let mut convergents = Vec::with_capacity(quotients.len());
        let (mut p0, mut q0, mut p1, mut q1) = (1u64, 0u64, 0u64, 1u64);
        for (i, &a) in quotients.iter().enumerate() {
            if a == 0 {
                return Err(invalid("partial quotients must be positive"));
            }
            let step = |x1: u64, x0: u64| a.checked_mul(x1).and_then(|v| v.checked_add(x0));
            let (Some(p), Some(q)) = (step(p1, p0), step(q1, q0)) else {
                return Err(AmoError::BigOverflow { term: i + 1 });
            };
            convergents.push((p, q));
            (p0, q0, p1, q1) = (p1, q1, p, q);
        }
        Ok(ContinuedFraction { quotients: quotients.to_vec(), convergents, terminated: false })
    }

    pub fn quotients(&self) -> &[u64] {
        &self.quotients
    }

    pub fn convergents(&self) -> &[(u64, u64)] {
        &self.convergents
    }

    pub fn len(&self) -> usize {
        self.quotients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotients.is_empty()
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn convergent(&self, i: usize) -> Result<(u64, u64)> {
        self.convergents
            .get(i)
            .copied()
            .ok_or(AmoError::InsufficientTerms { needed: i + 1, have: self.convergents.len() })
    }

    /// The value represented by the stored terms (the last convergent).
    pub fn value(&self) -> Result<f64> {
        let (p, q) = self.convergent(self.len().saturating_sub(1))?;
        Ok(p as f64 / q as f64)
    }

    /// `value − p_i/q_i` as the alternating series `Σ_k (−1)^k / (q_k q_{k+1})`
    /// over the stored tail, accurate even when the difference is tiny.
    pub fn offset_from_convergent(&self, i: usize) -> Result<f64> {
        self.convergent(i)?;
        let mut tail = crate::quad::CompensatedSum::new();
        for k in i..self.len() - 1 {
            let (_, qk) = self.convergents[k];
            let (_, qk1) = self.convergents[k + 1];
            // convergent index k corresponds to n = k + 1
            let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
            tail.add(sign / (qk as f64 * qk1 as f64));
        }
        Ok(tail.value())
    }

    /// Finite-sample proxy for `β = limsup ln q_{n+1} / q_n`: the maximum
    /// of the ratio over the later half of the available pairs.
    pub fn beta_estimate(&self) -> Result<f64> {
        let qs: Vec<f64> = self.convergents.iter().map(|c| c.1 as f64).collect();
        if qs.len() < 3 {
            return Err(AmoError::InsufficientTerms { needed: 3, have: qs.len() });
        }
        let ratios: Vec<f64> = qs.windows(2).map(|w| w[1].ln() / w[0]).collect();
        Ok(ratios[ratios.len() / 2..].iter().copied().fold(0.0, f64::max))
    }
}

/// `cf_expand` under its conventional name.
pub fn cf_expand(x: f64, n_terms: usize) -> Result<ContinuedFraction> {
    ContinuedFraction::expand(x, n_terms)
}

/// Frequency with `a_1 = 1` and `a_{n+1} = max(1, ⌈e^{β q_n} / q_n⌉)`.
pub fn build_liouville(beta_target: f64, n_terms: usize) -> Result<ContinuedFraction> {
    if !(beta_target > 0.0 && beta_target <= 50.0) {
        return Err(invalid(format!("beta target must lie in (0, 50], got {beta_target}")));
    }
    let mut quotients = vec![1u64];
    // q_0 = 1, q_1 = a_1 = 1
    let mut q_prev = 1u64;
    let mut q = 1u64;
    while quotients.len() < n_terms {
        let term = quotients.len() + 1;
        let a = ((beta_target * q as f64).exp() / q as f64).ceil().max(1.0);
        // beyond 2^53 the quotient is no longer an exact integer
        if !(a < 9.007_199_254_740_992e15) {
            return Err(AmoError::BigOverflow { term });
        }
        let a = a as u64;
        let next = a.checked_mul(q).and_then(|v| v.checked_add(q_prev)).ok_or(AmoError::BigOverflow { term })?;
        quotients.push(a);
        (q_prev, q) = (q, next);
    }
    quotients.truncate(n_terms);
    ContinuedFraction::from_quotients(&quotients)
}

/// Search window for the denominators in `P_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PqWindow {
    pub q: u64,
    pub c: f64,
    pub b_lo: u64,
    pub b_hi: u64,
    pub slack: f64,
}

/// Largest `b_hi` for which membership is decided in double precision.
pub const B_CAP: u64 = 1_000_000;
/// Largest number of `(a, b)` pairs enumerated for the exact union.
pub const INTERVAL_CAP: u64 = 5_000_000;

impl PqWindow {
    /// Integers `b` with `e^{cq/4} < b < e^{cq/2}`, numerator slack 10.
    pub fn new(q: u64, c: f64) -> Result<Self> {
        if q == 0 || !(c > 0.0 && c.is_finite()) {
            return Err(invalid("P_q window needs q >= 1 and c > 0"));
        }
        let sat = |v: f64| if v >= 1.8e19 { u64::MAX } else { v as u64 };
        let lo = (c * q as f64 / 4.0).exp();
        let hi = (c * q as f64 / 2.0).exp();
        let b_lo = sat(lo.floor()).saturating_add(1);
        let b_hi = sat(hi.ceil()).saturating_sub(1);
        Ok(PqWindow { q, c, b_lo, b_hi, slack: 10.0 })
    }

    /// A window with explicit bounds, for desk-scale experiments.
    pub fn explicit(q: u64, b_lo: u64, b_hi: u64) -> Result<Self> {
        if q == 0 || b_lo == 0 {
            return Err(invalid("explicit window needs q >= 1 and b_lo >= 1"));
        }
        Ok(PqWindow { q, c: f64::NAN, b_lo, b_hi, slack: 10.0 })
    }

    pub fn is_empty(&self) -> bool {
        self.b_lo > self.b_hi
    }

    /// The admissible rotation numbers `[1/q, 1/2 − 1/q]`.
    pub fn rho_range(&self) -> (f64, f64) {
        let inv = 1.0 / self.q as f64;
        (inv, 0.5 - inv)
    }

    fn check_feasible(&self) -> Result<()> {
        if self.b_hi > B_CAP {
            return Err(AmoError::WindowTooLarge { b_lo: self.b_lo, b_hi: self.b_hi });
        }
        Ok(())
    }
}

/// A pair with `a` odd and `|4bρ − a| < slack / b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PqWitness {
    pub a: u64,
    pub b: u64,
}

/// Odd integer nearest to `y ≥ 0`, never below 1.
fn nearest_odd(y: f64) -> u64 {
    let a = 2.0 * ((y - 1.0) / 2.0).round() + 1.0;
    a.max(1.0) as u64
}

fn witness_at(x: f64, b: u64, slack: f64) -> Option<PqWitness> {
    let bx = b as f64 * x;
    let a = nearest_odd(bx);
    let err = (b as f64).mul_add(x, -(a as f64)).abs();
    (err < slack / b as f64).then_some(PqWitness { a, b })
}

/// Membership by scanning every `b` in the window; returns the smallest witness.
pub fn pq_member_exhaustive(rho: f64, w: &PqWindow) -> Result<Option<PqWitness>> {
    let (lo, hi) = w.rho_range();
    if w.is_empty() || !(rho >= lo && rho <= hi) {
        return Ok(None);
    }
    w.check_feasible()?;
    let x = 4.0 * rho;
    Ok((w.b_lo..=w.b_hi).find_map(|b| witness_at(x, b, w.slack)))
}

/// Convergents `(p_n, q_n)` of `x > 0`, preceded by `(1, 0)`, up to the
/// first denominator exceeding `q_limit` or exact termination.
fn convergents_of(x: f64, q_limit: u64) -> Result<Vec<(i128, i128)>> {
    let (mut n, mut d) = dyadic(x)?;
    let mut out = vec![(1i128, 0i128)];
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    loop {
        let a = (n / d) as i128;
        let r = n % d;
        let next = a.checked_mul(p1).zip(a.checked_mul(q1)).map(|(ap, aq)| (ap + p0, aq + q0));
        // an overflowing denominator is far beyond any window
        let Some((p, q)) = next else { break };
        out.push((p, q));
        (p0, q0, p1, q1) = (p1, q1, p, q);
        if r == 0 || q > q_limit as i128 {
            break;
        }
        (n, d) = (d, r);
    }
    Ok(out)
}

/// Membership of `rho` in `P_q` via the continued fraction of `4ρ`.
///
/// Any hit `b` with `q_n ≤ b < q_{n+1}` can be written `b = r q_n + s q_{n−1}`
/// with `|s| ≤ slack`, and then `|r δ_n + s δ_{n−1}| < slack / b_lo`, where
/// `δ_n = q_n·4ρ − p_n`. Enumerating those lattice points is therefore
/// complete; the smallest witness is returned.
pub fn pq_member(rho: f64, w: &PqWindow) -> Result<Option<PqWitness>> {
    let (lo, hi) = w.rho_range();
    if w.is_empty() || !(rho >= lo && rho <= hi) {
        return Ok(None);
    }
    w.check_feasible()?;
    let x = 4.0 * rho;
    let conv = convergents_of(x, w.b_hi)?;
    let tol = w.slack / w.b_lo as f64;
    let s_max = w.slack.ceil() as i128 + 1;
    let mut best: Option<PqWitness> = None;
    for idx in 1..conv.len() {
        let (pn, qn) = conv[idx];
        let (pm, qm) = conv[idx - 1];
        let b_min = (w.b_lo as i128).max(qn);
        let b_max = conv.get(idx + 1).map_or(w.b_hi as i128, |c| (w.b_hi as i128).min(c.1 - 1));
        if b_min > b_max {
            continue;
        }
        let dn = (qn as f64).mul_add(x, -(pn as f64));
        let dm = (qm as f64).mul_add(x, -(pm as f64));
        for s in -s_max..=s_max {
            let mut r_lo = (b_min - s * qm).div_euclid(qn);
            let mut r_hi = (b_max - s * qm).div_euclid(qn);
            if (b_min - s * qm).rem_euclid(qn) != 0 {
                r_lo += 1;
            }
            if dn != 0.0 {
                let e1 = (-tol - s as f64 * dm) / dn;
                let e2 = (tol - s as f64 * dm) / dn;
                let (el, eh) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
                if eh < r_lo as f64 - 1.0 || el > r_hi as f64 + 1.0 {
                    continue;
                }
                r_lo = r_lo.max(el.floor() as i128 - 1);
                r_hi = r_hi.min(eh.ceil() as i128 + 1);
            } else if (s as f64 * dm).abs() > tol * 1.01 {
                continue;
            }
            for r in r_lo..=r_hi {
                let b = r * qn + s * qm;
                if b < b_min || b > b_max {
                    continue;
                }
                if best.is_some_and(|wt| wt.b as i128 <= b) {
                    continue;
                }
                if let Some(wt) = witness_at(x, b as u64, w.slack) {
                    best = Some(wt);
                }
            }
        }
    }
    Ok(best)
}

/// `P_q` as an exact union of intervals `|ρ − a/(4b)| < slack/(4b²)` over
/// odd `a` and window `b`, clipped to `[1/q, 1/2 − 1/q]`.
pub fn pq_intervals(w: &PqWindow) -> Result<IntervalSet> {
    let (lo, hi) = w.rho_range();
    if w.is_empty() || lo >= hi {
        return Ok(IntervalSet::empty());
    }
    let count = (w.b_lo..=w.b_hi.min(B_CAP + 1)).map(|b| b / 4 + 1).sum::<u64>();
    if w.b_hi > B_CAP || count > INTERVAL_CAP {
        return Err(AmoError::WindowTooLarge { b_lo: w.b_lo, b_hi: w.b_hi });
    }
    let mut v = Vec::with_capacity(count as usize);
    for b in w.b_lo..=w.b_hi {
        let bf = b as f64;
        let rad = w.slack / (4.0 * bf * bf);
        let a_min = nearest_odd((4.0 * bf * (lo - rad)).max(1.0)).saturating_sub(2).max(1);
        let mut a = a_min;
        loop {
            let center = a as f64 / (4.0 * bf);
            if center - rad > hi {
                break;
            }
            let (l, h) = ((center - rad).max(lo), (center + rad).min(hi));
            if l < h {
                v.push((l, h));
            }
            a += 2;
        }
    }
    IntervalSet::new(v)
}

/// Measure of `P_q` by two routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PqMeasure {
    /// Midpoint sampling of `[0, 1/2]` with the membership test.
    pub sampled: f64,
    /// Measure of the exact interval union, when enumerable.
    pub exact: Option<f64>,
}

pub fn pq_measure(w: &PqWindow, n_samples: usize) -> Result<PqMeasure> {
    if w.is_empty() {
        return Ok(PqMeasure { sampled: 0.0, exact: Some(0.0) });
    }
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let hits: Vec<bool> = (0..n_samples)
        .into_par_iter()
        .map(|j| pq_member(0.5 * (j as f64 + 0.5) / n_samples as f64, w).map(|m| m.is_some()))
        .collect::<Result<_>>()?;
    let sampled = 0.5 * hits.iter().filter(|&&h| h).count() as f64 / n_samples as f64;
    let exact = match pq_intervals(w) {
        Ok(set) => Some(set.measure()),
        Err(AmoError::WindowTooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(PqMeasure { sampled, exact })
}

/// Energies `E ∈ σ` whose averaged rotation number lies in `P_q`.
pub fn build_x(spec: &BandSpectrum, c: f64) -> Result<IntervalSet> {
    let w = PqWindow::new(spec.q, c)?;
    build_x_window(spec, &w)
}

/// [`build_x`] for an explicit window.
pub fn build_x_window(spec: &BandSpectrum, w: &PqWindow) -> Result<IntervalSet> {
    if !(spec.lambda > 0.0 && spec.lambda < 1.0) {
        return Err(invalid("X is built for 0 < lambda < 1"));
    }
    let pq = pq_intervals(w)?;
    if pq.is_empty() {
        return Ok(IntervalSet::empty());
    }
    let pieces: Vec<Vec<(f64, f64)>> = spec
        .bands
        .par_iter()
        .filter_map(|band| band.inner)
        .map(|(lo, hi)| pull_back(spec, lo, hi, &pq))
        .collect();
    IntervalSet::new(pieces.into_iter().flatten())
}

const MONOTONE_PROBES: usize = 64;

/// Preimage of `target` under `E ↦ ρ̄(E)` on `[lo, hi]`, split into
/// monotone pieces first.
fn pull_back(spec: &BandSpectrum, lo: f64, hi: f64, target: &IntervalSet) -> Vec<(f64, f64)> {
    let es: Vec<f64> = (0..=MONOTONE_PROBES).map(|j| lo + (hi - lo) * j as f64 / MONOTONE_PROBES as f64).collect();
    let rs: Vec<f64> = es.iter().map(|&e| spec.rho_bar(e)).collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start < MONOTONE_PROBES {
        let dir = (rs[start + 1] - rs[start]).signum();
        let mut end = start + 1;
        while end < MONOTONE_PROBES && (rs[end + 1] - rs[end]).signum() == dir {
            end += 1;
        }
        out.extend(pull_back_monotone(spec, (es[start], rs[start]), (es[end], rs[end]), target));
        start = end;
    }
    out
}

fn pull_back_monotone(spec: &BandSpectrum, a: (f64, f64), b: (f64, f64), target: &IntervalSet) -> Vec<(f64, f64)> {
    let (r_min, r_max) = (a.1.min(b.1), a.1.max(b.1));
    let increasing = b.1 >= a.1;
    // E at which ρ̄ crosses level r
    let solve = |r: f64| -> f64 {
        if r <= r_min {
            return if increasing { a.0 } else { b.0 };
        }
        if r >= r_max {
            return if increasing { b.0 } else { a.0 };
        }
        let (mut l, mut h) = (a.0, b.0);
        for _ in 0..200 {
            let m = 0.5 * (l + h);
            if m <= l || m >= h {
                break;
            }
            if (spec.rho_bar(m) < r) == increasing {
                l = m;
            } else {
                h = m;
            }
        }
        0.5 * (l + h)
    };
    target
        .clip(r_min, r_max)
        .intervals()
        .iter()
        .map(|&(l, h)| {
            let (e1, e2) = (solve(l), solve(h));
            (e1.min(e2), e1.max(e2))
        })
        .filter(|(l, h)| h > l)
        .collect()
}
