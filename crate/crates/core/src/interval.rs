//! Finite unions of closed real intervals.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sorted, pairwise disjoint closed intervals. Overlapping or touching
/// inputs are merged on construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct IntervalSet {
    parts: Vec<(f64, f64)>,
}

impl TryFrom<Vec<[f64; 2]>> for IntervalSet {
    type Error = crate::error::AmoError;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        IntervalSet::new(v.into_iter().map(|[a, b]| (a, b)))
    }
}

impl From<IntervalSet> for Vec<[f64; 2]> {
    fn from(s: IntervalSet) -> Self {
        s.parts.into_iter().map(|(a, b)| [a, b]).collect()
    }
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Normalizes arbitrary intervals; rejects `lo > hi` and non-finite ends.
    pub fn new<I: IntoIterator<Item = (f64, f64)>>(intervals: I) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in intervals {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(invalid(format!("bad interval [{lo}, {hi}]")));
            }
            v.push((lo, hi));
        }
        Ok(Self::normalize(v))
    }

    pub fn single(lo: f64, hi: f64) -> Result<Self> {
        Self::new([(lo, hi)])
    }

    fn normalize(mut v: Vec<(f64, f64)>) -> Self {
        v.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (lo, hi) in v {
            match out.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        IntervalSet { parts: out }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        crate::quad::sum(&self.parts.iter().map(|(a, b)| b - a).collect::<Vec<_>>())
    }

    /// Smallest closed interval containing the set.
    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.parts.first()?.0, self.parts.last()?.1))
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        Self::normalize(self.parts.iter().chain(&other.parts).copied().collect())
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.parts.len() && j < other.parts.len() {
            let (a, b) = self.parts[i];
            let (c, d) = other.parts[j];
            let lo = a.max(c);
            let hi = b.min(d);
            if lo <= hi {
                out.push((lo, hi));
            }
            if b < d {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::normalize(out)
    }

    /// Closure of `self ∖ other`; degenerate leftovers are dropped.
    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let mut j = 0;
        for &(a, b) in &self.parts {
            let mut cur = a;
            while j < other.parts.len() && other.parts[j].1 < a {
                j += 1;
            }
            let mut k = j;
            while k < other.parts.len() && other.parts[k].0 <= b {
                let (c, d) = other.parts[k];
                if c > cur {
                    out.push((cur, c));
                }
                cur = cur.max(d);
                k += 1;
            }
            if cur < b {
                out.push((cur, b));
            }
        }
        Self::normalize(out.into_iter().filter(|(a, b)| b > a).collect())
    }

    pub fn clip(&self, lo: f64, hi: f64) -> IntervalSet {
        if lo > hi {
            return IntervalSet::empty();
        }
        self.intersection(&IntervalSet { parts: vec![(lo, hi)] })
    }

    /// Index of the interval containing `x`, if any.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let i = self.parts.partition_point(|p| p.1 < x);
        (i < self.parts.len() && self.parts[i].0 <= x).then_some(i)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.locate(x).is_some()
    }

    /// Distance from `x` to the set; infinite for the empty set.
    pub fn distance(&self, x: f64) -> f64 {
        let i = self.parts.partition_point(|p| p.1 < x);
        let mut best = f64::INFINITY;
        if i < self.parts.len() {
            best = (self.parts[i].0 - x).max(0.0);
        }
        if i > 0 {
            best = best.min(x - self.parts[i - 1].1);
        }
        best
    }

    fn directed_hausdorff(&self, other: &IntervalSet) -> f64 {
        // d(·, other) is piecewise linear; its maximum over an interval sits at
        // an endpoint or at the midpoint of a gap of `other`.
        let mut best: f64 = 0.0;
        for &(a, b) in &self.parts {
            best = best.max(other.distance(a)).max(other.distance(b));
        }
        for w in other.parts.windows(2) {
            let mid = 0.5 * (w[0].1 + w[1].0);
            if self.contains(mid) {
                best = best.max(other.distance(mid));
            }
        }
        best
    }

    /// Hausdorff distance; zero for two empty sets, infinite if exactly one is empty.
    pub fn hausdorff(&self, other: &IntervalSet) -> f64 {
        match (self.is_empty(), other.is_empty()) {
            (true, true) => 0.0,
            (true, false) | (false, true) => f64::INFINITY,
            _ => self.directed_hausdorff(other).max(other.directed_hausdorff(self)),
        }
    }
}
