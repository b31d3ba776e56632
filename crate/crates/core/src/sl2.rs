//! SL(2,R) acting on the upper half-plane.
//!
//! Matrices act by Möbius transformations `z ↦ (az+b)/(cz+d)`. The functional
//! `φ(z) = (1+|z|²)/(2 Im z)` measures how far `z` sits from `i`: for any
//! unimodular `A`, `φ(A·i)` is half the squared Hilbert-Schmidt norm of `A`.
//! Angles of rotations are measured in turns, so `R_θ` rotates by `2πθ`.

use std::f64::consts::TAU;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{AmoError, Result};

const DET_TOL: f64 = 1e-9;
const DRIFT_TOL: f64 = 1e-12;
/// Traces with `|tr| ≥ 2 - PARABOLIC_GUARD` are not treated as elliptic.
pub const PARABOLIC_GUARD: f64 = 1e-12;

/// A general real 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn hs_norm_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn sub(&self, other: &Mat2) -> Mat2 {
        Mat2::new(self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d)
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let m = self.sub(other);
        m.a.abs().max(m.b.abs()).max(m.c.abs()).max(m.d.abs())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

/// A real 2×2 matrix of unit determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mat2R(Mat2);

impl Mat2R {
    /// Builds `[[a, b], [c, d]]`, rejecting `|ad - bc - 1| > 1e-9`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::from_mat(Mat2::new(a, b, c, d))
    }

    pub fn from_mat(m: Mat2) -> Result<Self> {
        let det = m.det();
        if !det.is_finite() || (det - 1.0).abs() > DET_TOL {
            return Err(AmoError::NotUnimodular { det });
        }
        Ok(Mat2R(m))
    }

    /// Divides by `sqrt(det)`; fails for matrices with non-positive determinant.
    pub fn renormalize(m: Mat2) -> Result<Self> {
        let det = m.det();
        if !(det > 0.0) || !det.is_finite() {
            return Err(AmoError::NotUnimodular { det });
        }
        Ok(Mat2R(m.scale(1.0 / det.sqrt())))
    }

    /// Wraps a matrix whose determinant is one by construction.
    pub(crate) fn from_mat_unchecked(m: Mat2) -> Self {
        Mat2R(m)
    }

    pub fn identity() -> Self {
        Mat2R(Mat2::IDENTITY)
    }

    /// `R_θ`, the rotation by `θ` turns.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = (TAU * theta).sin_cos();
        Mat2R(Mat2::new(c, -s, s, c))
    }

    /// `diag(s, 1/s)`.
    pub fn diagonal(s: f64) -> Result<Self> {
        if s == 0.0 || !s.is_finite() {
            return Err(AmoError::InvalidParameter(format!("diagonal entry {s}")));
        }
        Ok(Mat2R(Mat2::new(s, 0.0, 0.0, 1.0 / s)))
    }

    pub fn a(&self) -> f64 {
        self.0.a
    }
    pub fn b(&self) -> f64 {
        self.0.b
    }
    pub fn c(&self) -> f64 {
        self.0.c
    }
    pub fn d(&self) -> f64 {
        self.0.d
    }

    pub fn as_mat(&self) -> &Mat2 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn det(&self) -> f64 {
        self.0.det()
    }

    pub fn hs_norm_sq(&self) -> f64 {
        self.0.hs_norm_sq()
    }

    pub fn hs_norm(&self) -> f64 {
        self.0.hs_norm()
    }

    /// Exact inverse `[[d, -b], [-c, a]]`.
    pub fn inverse(&self) -> Self {
        let m = &self.0;
        Mat2R(Mat2::new(m.d, -m.b, -m.c, m.a))
    }

    pub fn act(&self, z: HPoint) -> HPoint {
        moebius_act(self, z)
    }

    /// Rotation angle in turns, `atan2(c, a) / 2π` reduced to `[0, 1)`.
    ///
    /// Meaningful for matrices that are (numerically) rotations.
    pub fn rotation_angle(&self) -> f64 {
        (self.0.c.atan2(self.0.a) / TAU).rem_euclid(1.0)
    }
}

impl Mul for Mat2R {
    type Output = Mat2R;

    fn mul(self, rhs: Mat2R) -> Mat2R {
        let m = self.0 * rhs.0;
        let det = m.det();
        if (det - 1.0).abs() > DRIFT_TOL && det > 0.0 {
            Mat2R(m.scale(1.0 / det.sqrt()))
        } else {
            Mat2R(m)
        }
    }
}

/// A point `x + iy` of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HPoint {
    x: f64,
    y: f64,
}

impl HPoint {
    pub const I: HPoint = HPoint { x: 0.0, y: 1.0 };

    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !y.is_finite() || !x.is_finite() {
            return Err(AmoError::NotInUpperHalfPlane { im: y });
        }
        Ok(HPoint { x, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn phi(&self) -> f64 {
        phi(*self)
    }
}

/// `(az+b)/(cz+d)`.
pub fn moebius_act(m: &Mat2R, z: HPoint) -> HPoint {
    let Mat2 { a, b, c, d } = m.0;
    let (x, y) = (z.x, z.y);
    let re_den = c * x + d;
    let im_den = c * y;
    let den = re_den * re_den + im_den * im_den;
    let re_num = a * x + b;
    let im_num = a * y;
    let xr = (re_num * re_den + im_num * im_den) / den;
    // Im((az+b)/(cz+d)) = det · y / |cz+d|²
    let yr = m.0.det() * y / den;
    HPoint { x: xr, y: yr.max(f64::MIN_POSITIVE) }
}

/// `φ(z) = (1 + |z|²) / (2 Im z)`.
pub fn phi(z: HPoint) -> f64 {
    (1.0 + z.x * z.x + z.y * z.y) / (2.0 * z.y)
}

pub fn hs_norm_sq(m: &Mat2R) -> f64 {
    m.hs_norm_sq()
}

/// Hyperbolic distance normalized so that `dist(ai, i) = |ln a|`.
pub fn hyperbolic_dist(z: HPoint, w: HPoint) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    let chord = (dx * dx + dy * dy).sqrt();
    2.0 * (chord / (2.0 * (z.y * w.y).sqrt())).asinh()
}

/// The upper-triangular `B` with `B·i = z`: `[[√y, x/√y], [0, 1/√y]]`.
pub fn transport_to(z: HPoint) -> Mat2R {
    let s = z.y.sqrt();
    Mat2R(Mat2::new(s, z.x / s, 0.0, 1.0 / s))
}

/// Rotation number, fixed point and orientation of an elliptic matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticData {
    /// In `(0, 1/2)`, with `trace = 2 cos 2πρ`.
    pub rho: f64,
    pub fixed_point: HPoint,
    /// `transport_to(fixed_point)⁻¹ · A · transport_to(fixed_point) = R_{epsilon·rho}`.
    pub epsilon: i8,
}

pub fn elliptic_data(m: &Mat2R) -> Result<EllipticData> {
    let t = m.trace();
    if !t.is_finite() || t.abs() >= 2.0 - PARABOLIC_GUARD {
        return Err(AmoError::NotElliptic { trace: t });
    }
    let Mat2 { a, c, d, .. } = m.0;
    // |tr| < 2 forces c ≠ 0; the root of cz² + (d-a)z - b with Im > 0.
    let x = (a - d) / (2.0 * c);
    let y = (4.0 - t * t).sqrt() / (2.0 * c.abs());
    let fixed_point = HPoint::new(x, y)?;
    // (B⁻¹AB)_{21} = c·y for the upper-triangular gauge.
    let epsilon = if c > 0.0 { 1 } else { -1 };
    Ok(EllipticData { rho: (t / 2.0).acos() / TAU, fixed_point, epsilon })
}

/// `φ` of the fixed point of an elliptic matrix from its norm and rotation
/// number: `(‖A‖²_HS - 2 cos 4πρ)^{1/2} / (2 sin 2πρ)`.
pub fn fixed_point_phi(hs_norm_sq: f64, rho: f64) -> f64 {
    (hs_norm_sq - 2.0 * (2.0 * TAU * rho).cos()).max(0.0).sqrt() / (2.0 * (TAU * rho).sin())
}

/// Upper bound `√2 ‖A‖_HS / (2 sin 2πρ)` on `φ` of the fixed point.
pub fn fixed_point_phi_bound(hs_norm_sq: f64, rho: f64) -> f64 {
    std::f64::consts::SQRT_2 * hs_norm_sq.sqrt() / (2.0 * (TAU * rho).sin())
}

/// `φ` of the fixed point of a unimodular matrix with trace `t`:
/// `sqrt((‖A‖² + 2 - t²) / (4 - t²))`. Returns `None` unless `|t| < 2`.
pub fn fixed_point_phi_from_trace(hs_norm_sq: f64, t: f64) -> Option<f64> {
    let den = 4.0 - t * t;
    if den > 0.0 {
        Some(((hs_norm_sq + 2.0 - t * t) / den).max(1.0).sqrt())
    } else {
        None
    }
}

/// Images of `ki`, `i/k` and `i` under `A` together with the factor `k + 1/k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MidpointTriple {
    pub z1: HPoint,
    pub z2: HPoint,
    pub z3: HPoint,
    /// `φ(z1) + φ(z2) = factor · φ(z3)`.
    pub factor: f64,
}

impl MidpointTriple {
    /// `φ(z1) + φ(z2) - factor · φ(z3)`; zero up to rounding.
    pub fn residual(&self) -> f64 {
        phi(self.z1) + phi(self.z2) - self.factor * phi(self.z3)
    }

    /// `φ(z1) + φ(z2) - 2 φ(z3)`; never negative.
    pub fn midpoint_gap(&self) -> f64 {
        phi(self.z1) + phi(self.z2) - 2.0 * phi(self.z3)
    }
}

pub fn midpoint_triple(m: &Mat2R, k: f64) -> Result<MidpointTriple> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(AmoError::InvalidParameter(format!("midpoint scale k = {k} must be positive")));
    }
    Ok(MidpointTriple {
        z1: m.act(HPoint { x: 0.0, y: k }),
        z2: m.act(HPoint { x: 0.0, y: 1.0 / k }),
        z3: m.act(HPoint::I),
        factor: k + 1.0 / k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rejects_non_unimodular() {
        assert!(matches!(Mat2R::new(2.0, 0.0, 0.0, 1.0), Err(AmoError::NotUnimodular { .. })));
        let m = Mat2R::renormalize(Mat2::new(2.0, 0.0, 0.0, 2.0)).unwrap();
        assert!(close(m.det(), 1.0, 1e-15));
        assert!(Mat2R::renormalize(Mat2::new(0.0, 1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(HPoint::new(0.0, 0.0).is_err());
        assert!(HPoint::new(1.0, -1.0).is_err());
    }

    #[test]
    fn moebius_examples() {
        let z = HPoint::new(1.0, 2.0).unwrap();
        assert_eq!(Mat2R::identity().act(z), z);
        let r = Mat2R::new(0.0, -1.0, 1.0, 0.0).unwrap();
        let w = r.act(HPoint::I);
        assert!(close(w.x(), 0.0, 1e-15) && close(w.y(), 1.0, 1e-15));
        let stretch = Mat2R::new(2.0, 0.0, 0.0, 0.5).unwrap();
        let w = stretch.act(HPoint::I);
        assert!(close(w.x(), 0.0, 1e-15) && close(w.y(), 4.0, 1e-15));
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(HPoint::I), 1.0);
        assert!(close(phi(HPoint::new(0.0, 2.0).unwrap()), 1.25, 1e-15));
        assert!(close(phi(HPoint::new(1.0, 1.0).unwrap()), 1.5, 1e-15));
    }

    #[test]
    fn hs_norm_examples() {
        assert_eq!(hs_norm_sq(&Mat2R::identity()), 2.0);
        for t in [0.0, 0.1, 0.37, 0.5, 0.9] {
            assert!(close(hs_norm_sq(&Mat2R::rotation(t)), 2.0, 1e-14));
        }
        assert!(close(hs_norm_sq(&Mat2R::new(2.0, 0.0, 0.0, 0.5).unwrap()), 4.25, 1e-15));
    }

    #[test]
    fn elliptic_examples() {
        let e = elliptic_data(&Mat2R::rotation(1.0 / 6.0)).unwrap();
        assert!(close(e.rho, 1.0 / 6.0, 1e-12));
        assert!(close(e.fixed_point.x(), 0.0, 1e-12) && close(e.fixed_point.y(), 1.0, 1e-12));
        assert!(close(phi(e.fixed_point), 1.0, 1e-12));

        let m = Mat2R::new(1.0, -1.0, 1.0, 0.0).unwrap();
        let e = elliptic_data(&m).unwrap();
        assert!(close(e.rho, 1.0 / 6.0, 1e-12));
        assert!(close(e.fixed_point.x(), 0.5, 1e-12));
        assert!(close(e.fixed_point.y(), 3f64.sqrt() / 2.0, 1e-12));
        assert!(close(phi(e.fixed_point), 2.0 / 3f64.sqrt(), 1e-12));
        // ‖A‖² = 3 through the trace/norm formula
        assert!(close(fixed_point_phi(3.0, e.rho), 2.0 / 3f64.sqrt(), 1e-12));

        let e = elliptic_data(&Mat2R::new(0.0, -1.0, 1.0, 0.0).unwrap()).unwrap();
        assert!(close(e.rho, 0.25, 1e-15));
        assert!(close(e.fixed_point.y(), 1.0, 1e-15));
    }

    #[test]
    fn elliptic_rejects_parabolic_and_hyperbolic() {
        assert!(matches!(elliptic_data(&Mat2R::identity()), Err(AmoError::NotElliptic { .. })));
        let h = Mat2R::new(2.0, 0.0, 0.0, 0.5).unwrap();
        assert!(elliptic_data(&h).is_err());
        let near = Mat2R::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(elliptic_data(&near).is_err());
    }

    #[test]
    fn epsilon_matches_conjugated_rotation() {
        for m in [
            Mat2R::new(1.0, -1.0, 1.0, 0.0).unwrap(),
            Mat2R::new(0.0, 1.0, -1.0, 0.5).unwrap(),
            Mat2R::renormalize(Mat2::new(0.3, -2.0, 0.7, 1.1)).unwrap(),
        ] {
            let e = elliptic_data(&m).unwrap();
            let b = transport_to(e.fixed_point);
            let conj = b.inverse() * m * b;
            let r = Mat2R::rotation(e.epsilon as f64 * e.rho);
            assert!(conj.as_mat().max_abs_diff(r.as_mat()) < 1e-12, "{conj:?} vs {r:?}");
        }
    }

    #[test]
    fn transport_examples() {
        assert_eq!(transport_to(HPoint::I), Mat2R::identity());
        let b = transport_to(HPoint::new(0.0, 4.0).unwrap());
        assert!(b.as_mat().max_abs_diff(&Mat2::new(2.0, 0.0, 0.0, 0.5)) < 1e-15);
        let b = transport_to(HPoint::new(1.0, 1.0).unwrap());
        assert!(b.as_mat().max_abs_diff(&Mat2::new(1.0, 1.0, 0.0, 1.0)) < 1e-15);
        let z = HPoint::new(-0.3, 2.5).unwrap();
        let b = transport_to(z);
        assert_eq!(b.act(HPoint::I), z);
        assert!(close(b.hs_norm_sq(), 2.0 * phi(z), 1e-14));
    }

    #[test]
    fn distance_examples() {
        let e = HPoint::new(0.0, std::f64::consts::E).unwrap();
        assert!(close(hyperbolic_dist(HPoint::I, e), 1.0, 1e-14));
        let z = HPoint::new(0.4, 0.7).unwrap();
        assert_eq!(hyperbolic_dist(z, z), 0.0);
        let w = HPoint::new(1.0, 1.0).unwrap();
        // arcosh(1 + |z-w|²/(2 Im z Im w)) = arcosh(1.5)
        let oracle = (1.5f64).acosh();
        let d = hyperbolic_dist(HPoint::I, w);
        assert!(close(d, oracle, 1e-14));
        assert!(close(oracle, 0.962_423_650_119_206_9, 1e-15));
        assert!(1.5f64.ln() <= d);
    }

    #[test]
    fn midpoint_examples() {
        let t = midpoint_triple(&Mat2R::identity(), 1.0).unwrap();
        assert_eq!(t.z1, HPoint::I);
        assert_eq!(t.z2, HPoint::I);
        assert_eq!(phi(t.z1) + phi(t.z2), 2.0 * phi(t.z3));

        let t = midpoint_triple(&Mat2R::identity(), 2.0).unwrap();
        assert!(close(phi(t.z1) + phi(t.z2), 2.5, 1e-15));
        assert!(close(t.factor * phi(t.z3), 2.5, 1e-15));

        let a = Mat2R::renormalize(Mat2::new(1.3, -0.4, 2.2, 0.1)).unwrap();
        let t = midpoint_triple(&a, 3.0).unwrap();
        let lhs = phi(t.z1) + phi(t.z2);
        assert!(close(lhs / (3.0 + 1.0 / 3.0), phi(t.z3), 1e-9));

        assert!(midpoint_triple(&a, 0.0).is_err());
    }
}
