//! CSV, JSON and SVG output.

use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cocycle::gcd;
use crate::diophantine::PqWindow;
use crate::error::{invalid, Result};
use crate::interval::IntervalSet;
use crate::periodic::BandSpectrum;

/// Largest denominator accepted by [`butterfly`].
pub const BUTTERFLY_Q_MAX: u64 = 100;

/// One band: `Σ` edges outside, `σ` edges inside (empty when `σ = ∅`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub lambda: f64,
    pub p: u64,
    pub q: u64,
    pub k: usize,
    pub sigma_lo: f64,
    pub inner_lo: Option<f64>,
    pub inner_hi: Option<f64>,
    pub sigma_hi: f64,
}

pub fn band_rows(spec: &BandSpectrum) -> Vec<BandRow> {
    spec.bands
        .iter()
        .map(|b| BandRow {
            lambda: spec.lambda,
            p: spec.p,
            q: spec.q,
            k: b.k,
            sigma_lo: b.sigma_lo,
            inner_lo: b.inner.map(|i| i.0),
            inner_hi: b.inner.map(|i| i.1),
            sigma_hi: b.sigma_hi,
        })
        .collect()
}

/// `Σ` and `σ` rebuilt from band rows.
pub fn sets_from_rows(rows: &[BandRow]) -> Result<(IntervalSet, IntervalSet)> {
    let outer = IntervalSet::new(rows.iter().map(|r| (r.sigma_lo, r.sigma_hi)))?;
    let inner = IntervalSet::new(rows.iter().filter_map(|r| Some((r.inner_lo?, r.inner_hi?))))?;
    Ok((outer, inner))
}

fn csv_err(e: csv::Error) -> crate::AmoError {
    invalid(format!("csv: {e}"))
}

pub fn write_csv<T: Serialize, W: Write>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(csv_err)?;
    }
    wr.flush().map_err(|e| invalid(format!("csv: {e}")))
}

pub fn read_csv<T: DeserializeOwned, R: Read>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| invalid(format!("json: {e}")))?;
    w.write_all(b"\n").map_err(|e| invalid(format!("json: {e}")))
}

/// Spectra for every reduced `p/q` with `0 ≤ p < q ≤ q_max`, ordered by
/// `q` then `p`.
pub fn butterfly(lambda: f64, q_max: u64) -> Result<Vec<BandSpectrum>> {
    if q_max == 0 || q_max > BUTTERFLY_Q_MAX {
        return Err(invalid(format!("butterfly needs 1 <= q_max <= {BUTTERFLY_Q_MAX}")));
    }
    let fracs: Vec<(u64, u64)> =
        (1..=q_max).flat_map(|q| (0..q).filter(move |&p| gcd(p, q) == 1).map(move |p| (p, q))).collect();
    fracs.par_iter().map(|&(p, q)| BandSpectrum::new(lambda, p, q)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButterflyRow {
    pub p: u64,
    pub q: u64,
    pub k: usize,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

pub fn butterfly_rows(spectra: &[BandSpectrum]) -> Vec<ButterflyRow> {
    spectra
        .iter()
        .flat_map(|s| s.bands.iter().map(move |b| ButterflyRow { p: s.p, q: s.q, k: b.k, sigma_lo: b.sigma_lo, sigma_hi: b.sigma_hi }))
        .collect()
}

/// Energy across, frequency down, one segment per band on a 1000 × 1000 box.
pub fn butterfly_svg(lambda: f64, spectra: &[BandSpectrum]) -> String {
    let half = 2.0 + 2.0 * lambda;
    let x = |e: f64| 1000.0 * (e + half) / (2.0 * half);
    let mut out = String::new();
    out.push_str("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1000 1000\" width=\"1000\" height=\"1000\">\n");
    out.push_str("<rect width=\"1000\" height=\"1000\" fill=\"white\"/>\n<g stroke=\"black\" stroke-width=\"1.5\">\n");
    for s in spectra {
        let y = 1000.0 * (1.0 - s.p as f64 / s.q as f64);
        for b in &s.bands {
            let _ = writeln!(out, "<line x1=\"{:.3}\" y1=\"{y:.3}\" x2=\"{:.3}\" y2=\"{y:.3}\"/>", x(b.sigma_lo), x(b.sigma_hi).max(x(b.sigma_lo) + 0.5));
        }
    }
    out.push_str("</g>\n</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PqExport {
    pub q: u64,
    /// `null` for explicit windows.
    pub c: Option<f64>,
    pub intervals: IntervalSet,
}

impl PqExport {
    pub fn new(w: &PqWindow, intervals: IntervalSet) -> Self {
        PqExport { q: w.q, c: w.c.is_finite().then_some(w.c), intervals }
    }
}

/// Band schema with an `in_X` flag: each component of `σ` cut into the
/// pieces inside and outside `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XRow {
    pub lambda: f64,
    pub p: u64,
    pub q: u64,
    pub k: usize,
    pub sigma_lo: f64,
    pub inner_lo: Option<f64>,
    pub inner_hi: Option<f64>,
    pub sigma_hi: f64,
    #[serde(rename = "in_X")]
    pub in_x: bool,
}

pub fn x_rows(spec: &BandSpectrum, x: &IntervalSet) -> Result<Vec<XRow>> {
    let mut out = Vec::new();
    for b in &spec.bands {
        let row = |lo: Option<f64>, hi: Option<f64>, in_x: bool| XRow {
            lambda: spec.lambda,
            p: spec.p,
            q: spec.q,
            k: b.k,
            sigma_lo: b.sigma_lo,
            inner_lo: lo,
            inner_hi: hi,
            sigma_hi: b.sigma_hi,
            in_x,
        };
        let Some((lo, hi)) = b.inner else {
            out.push(row(None, None, false));
            continue;
        };
        let comp = IntervalSet::single(lo, hi)?;
        let inside = comp.intersection(x);
        let mut pieces: Vec<(f64, f64, bool)> = inside.intervals().iter().map(|&(l, h)| (l, h, true)).collect();
        pieces.extend(comp.difference(&inside).intervals().iter().map(|&(l, h)| (l, h, false)));
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.extend(pieces.into_iter().map(|(l, h, f)| row(Some(l), Some(h), f)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::build_x;

    #[test]
    fn band_csv_round_trip() {
        for (l, p, q) in [(0.5, 1, 5), (0.37, 3, 7), (1.5, 1, 3)] {
            let s = BandSpectrum::new(l, p, q).unwrap();
            let rows = band_rows(&s);
            let mut buf = Vec::new();
            write_csv(&mut buf, &rows).unwrap();
            let back: Vec<BandRow> = read_csv(&buf[..]).unwrap();
            assert_eq!(back, rows);
            let (outer, inner) = sets_from_rows(&back).unwrap();
            assert_eq!(outer, s.sigma_set());
            assert_eq!(inner, s.inner_set());
        }
    }

    #[test]
    fn band_csv_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &band_rows(&BandSpectrum::new(0.5, 0, 1).unwrap())).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "lambda,p,q,k,sigma_lo,inner_lo,inner_hi,sigma_hi\n0.5,0,1,1,-3.0,-1.0,1.0,3.0\n");
        let mut buf = Vec::new();
        write_csv(&mut buf, &band_rows(&BandSpectrum::new(1.5, 1, 3).unwrap())).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().skip(1).all(|l| l.contains(",,")), "{text}");
    }

    #[test]
    fn butterfly_counts_and_symmetry() {
        let one = butterfly(1.0, 1).unwrap();
        assert_eq!(butterfly_rows(&one).len(), 1);
        let five = butterfly(1.0, 5).unwrap();
        assert_eq!(five.len(), 1 + 1 + 2 + 2 + 4);
        assert_eq!(butterfly_rows(&five).len(), 1 + 2 + 3 * 2 + 4 * 2 + 5 * 4);
        for s in &five {
            let mirror = BandSpectrum::new(1.0, (s.q - s.p) % s.q, s.q).unwrap();
            for (a, b) in s.bands.iter().zip(mirror.bands.iter().rev()) {
                assert!((a.sigma_lo + b.sigma_hi).abs() < 1e-9 && (a.sigma_hi + b.sigma_lo).abs() < 1e-9);
            }
        }
        assert!(butterfly(1.0, BUTTERFLY_Q_MAX + 1).is_err());
    }

    #[test]
    fn svg_is_deterministic() {
        let s = butterfly(0.5, 4).unwrap();
        let a = butterfly_svg(0.5, &s);
        assert_eq!(a, butterfly_svg(0.5, &butterfly(0.5, 4).unwrap()));
        assert_eq!(a.matches("<line").count(), butterfly_rows(&s).len());
        assert!(a.contains("viewBox=\"0 0 1000 1000\""));
    }

    #[test]
    fn x_rows_partition_sigma() {
        let s = BandSpectrum::new(0.5, 1, 5).unwrap();
        let x = build_x(&s, 1.0).unwrap();
        let rows = x_rows(&s, &x).unwrap();
        let inside: f64 = rows.iter().filter(|r| r.in_x).map(|r| r.inner_hi.unwrap() - r.inner_lo.unwrap()).sum();
        let total: f64 = rows.iter().map(|r| r.inner_hi.unwrap() - r.inner_lo.unwrap()).sum();
        assert!((inside - x.measure()).abs() < 1e-12);
        assert!((total - s.inner_measure()).abs() < 1e-12);
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("lambda,p,q,k,sigma_lo,inner_lo,inner_hi,sigma_hi,in_X\n"));
    }

    #[test]
    fn pq_json_shape() {
        let w = PqWindow::new(8, 0.7).unwrap();
        let e = PqExport::new(&w, crate::diophantine::pq_intervals(&w).unwrap());
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["q"], 8);
        assert!(v["intervals"].is_array());
        assert!(v["intervals"][0].as_array().unwrap().len() == 2);
    }
}
