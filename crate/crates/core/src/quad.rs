//! Summation and quadrature kernels.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Ordered compensated sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value()
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Number of integrand evaluations in the finest rule.
    pub samples: usize,
    pub converged: bool,
}

/// Mean of a 1-periodic function over one period by the trapezoid rule,
/// doubling from `min_samples` until successive estimates differ by less than
/// `tol` (absolute) or `cap` samples are reached.
pub fn periodic_mean<F: Fn(f64) -> f64>(f: F, min_samples: usize, tol: f64, cap: usize) -> Quadrature {
    let mut m = min_samples.max(2);
    let mut acc: CompensatedSum = (0..m).map(|j| f(j as f64 / m as f64)).collect();
    let mut est = acc.value() / m as f64;
    while 2 * m <= cap {
        for j in 0..m {
            acc.add(f((2 * j + 1) as f64 / (2 * m) as f64));
        }
        m *= 2;
        let next = acc.value() / m as f64;
        let delta = (next - est).abs();
        est = next;
        if delta < tol {
            return Quadrature { value: est, samples: m, converged: true };
        }
    }
    Quadrature { value: est, samples: m, converged: false }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // p1 = P_n(x), p2 = P_{n-1}(x)
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * x * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (x * p1 - p2) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

const GL_LEVELS: [usize; 6] = [16, 32, 64, 128, 256, 512];

fn gl_rule(level: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    &RULES.get_or_init(|| GL_LEVELS.iter().map(|&n| gauss_legendre(n)).collect())[level]
}

/// `∫_a^b f(t) dt` for integrands with square-root type behaviour at the
/// endpoints (`(t-a)^{±1/2}`), via `t = a + (b-a)(1 - cos πv)/2` and
/// Gauss–Legendre in `v`. Rules are doubled until two successive estimates
/// agree to `tol` relative to the larger magnitude.
pub fn integrate_sqrt_endpoints<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    if b <= a {
        return Quadrature { value: 0.0, samples: 0, converged: true };
    }
    let width = b - a;
    let mapped = |v: f64| {
        let t = a + width * 0.5 * (1.0 - (PI * v).cos());
        f(t) * width * 0.5 * PI * (PI * v).sin()
    };
    let rule = |level: usize| {
        let (nodes, weights) = gl_rule(level);
        nodes
            .iter()
            .zip(weights)
            .map(|(&x, &w)| 0.5 * w * mapped(0.5 * (x + 1.0)))
            .collect::<CompensatedSum>()
            .value()
    };
    let mut prev = rule(0);
    for level in 1..GL_LEVELS.len() {
        let next = rule(level);
        if (next - prev).abs() <= tol * next.abs().max(prev.abs()).max(1e-300) {
            return Quadrature { value: next, samples: GL_LEVELS[level], converged: true };
        }
        prev = next;
    }
    Quadrature { value: prev, samples: GL_LEVELS[GL_LEVELS.len() - 1], converged: false }
}
