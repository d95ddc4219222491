//! Möbius transformations, generalized circles and the upper half-space
//! model of hyperbolic 3-space.
//!
//! Maps are stored as unit-determinant 2x2 complex matrices. Because
//! `PSL(2, C)` identifies `M` with `-M`, a sign is fixed at normalization
//! time (nonnegative real part of the trace) and all equality tests are
//! up to sign.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::TOL;

pub type Complex = Complex64;

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);

/// A point of the extended complex plane (the sphere at infinity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtPoint {
    Finite(Complex),
    Infinity,
}

impl ExtPoint {
    pub fn finite(re: f64, im: f64) -> Self {
        ExtPoint::Finite(Complex::new(re, im))
    }

    pub fn as_finite(&self) -> Option<Complex> {
        match self {
            ExtPoint::Finite(z) => Some(*z),
            ExtPoint::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtPoint::Infinity)
    }

    /// Chordal distance on the Riemann sphere of diameter 1.
    pub fn chordal_distance(&self, other: &ExtPoint) -> f64 {
        match (self, other) {
            (ExtPoint::Infinity, ExtPoint::Infinity) => 0.0,
            (ExtPoint::Finite(z), ExtPoint::Infinity) | (ExtPoint::Infinity, ExtPoint::Finite(z)) => {
                1.0 / (1.0 + z.norm_sqr()).sqrt()
            }
            (ExtPoint::Finite(z), ExtPoint::Finite(w)) => {
                (z - w).norm() / ((1.0 + z.norm_sqr()).sqrt() * (1.0 + w.norm_sqr()).sqrt())
            }
        }
    }

    pub fn approx_eq(&self, other: &ExtPoint, tol: f64) -> bool {
        self.chordal_distance(other) <= tol
    }
}

impl From<Complex> for ExtPoint {
    fn from(z: Complex) -> Self {
        ExtPoint::Finite(z)
    }
}

impl fmt::Display for ExtPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtPoint::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
            ExtPoint::Infinity => write!(f, "inf"),
        }
    }
}

/// A point `(z, t)` of the upper half-space, `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UhsPoint {
    pub z: Complex,
    pub t: f64,
}

impl UhsPoint {
    pub fn new(z: Complex, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::OutOfRange(t, "height must be finite and > 0"));
        }
        Ok(UhsPoint { z, t })
    }

    /// The basepoint `(0, 1)`.
    pub fn basepoint() -> Self {
        UhsPoint { z: ZERO, t: 1.0 }
    }

    /// Image in the Poincaré ball under the Cayley transform sending `(0, 1)`
    /// to the origin.
    pub fn to_ball(&self) -> [f64; 3] {
        let n2 = self.z.norm_sqr() + self.t * self.t;
        let den = n2 + 2.0 * self.t + 1.0;
        [2.0 * self.z.re / den, 2.0 * self.z.im / den, (n2 - 1.0) / den]
    }
}

/// Boundary point on the unit sphere (inverse stereographic projection
/// matching [`UhsPoint::to_ball`]).
pub fn boundary_to_ball(p: &ExtPoint) -> [f64; 3] {
    match p {
        ExtPoint::Infinity => [0.0, 0.0, 1.0],
        ExtPoint::Finite(z) => {
            let n2 = z.norm_sqr();
            let den = n2 + 1.0;
            [2.0 * z.re / den, 2.0 * z.im / den, (n2 - 1.0) / den]
        }
    }
}

/// Hyperbolic distance in the upper half-space.
pub fn hyp_distance(x: &UhsPoint, y: &UhsPoint) -> f64 {
    let num = (x.z - y.z).norm_sqr() + (x.t - y.t).powi(2);
    let arg = 1.0 + num / (2.0 * x.t * y.t);
    // acosh(1 + u) = log1p(u + sqrt(u (u + 2))) keeps precision near 0.
    let u = arg - 1.0;
    (u + (u * (u + 2.0)).sqrt()).ln_1p()
}

/// Trace classification of an element of `PSL(2, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    Identity,
    Parabolic,
    Elliptic,
    Loxodromic,
}

/// Normalized element of `PSL(2, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusMap {
    a: Complex,
    b: Complex,
    c: Complex,
    d: Complex,
}

impl MoebiusMap {
    /// Normalize `[[a, b], [c, d]]` to determinant one.
    pub fn new(a: Complex, b: Complex, c: Complex, d: Complex) -> Result<Self> {
        let det = a * d - b * c;
        let scale = a.norm().max(b.norm()).max(c.norm()).max(d.norm());
        if !(det.norm() > 1e-300) || !(det.norm() > 1e-28 * scale * scale) || !det.norm().is_finite() {
            return Err(Error::Singular(det.norm()));
        }
        let s = det.sqrt();
        Ok(Self::sign_fixed(a / s, b / s, c / s, d / s))
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    fn sign_fixed(a: Complex, b: Complex, c: Complex, d: Complex) -> Self {
        let tr = a + d;
        let key = if tr.norm() > 1e-14 {
            tr
        } else {
            *[a, b, c, d].iter().find(|z| z.norm() > 1e-14).unwrap_or(&ONE)
        };
        if key.re < 0.0 || (key.re == 0.0 && key.im < 0.0) {
            MoebiusMap { a: -a, b: -b, c: -c, d: -d }
        } else {
            MoebiusMap { a, b, c, d }
        }
    }

    pub fn identity() -> Self {
        MoebiusMap { a: ONE, b: ZERO, c: ZERO, d: ONE }
    }

    /// `z -> z + w`.
    pub fn translation(w: Complex) -> Self {
        MoebiusMap { a: ONE, b: w, c: ZERO, d: ONE }
    }

    /// `diag(k, 1/k)`, i.e. `z -> k^2 z`.
    pub fn diagonal(k: Complex) -> Result<Self> {
        Self::new(k, ZERO, ZERO, k.inv())
    }

    /// Rotation by `angle` about the vertical geodesic over 0.
    pub fn rotation(angle: f64) -> Self {
        let h = Complex::from_polar(1.0, angle / 2.0);
        Self::sign_fixed(h, ZERO, ZERO, h.inv())
    }

    /// `z -> 1/z` normalized as `[[0, i], [i, 0]]`.
    pub fn inversion() -> Self {
        let i = Complex::new(0.0, 1.0);
        Self::sign_fixed(ZERO, i, i, ZERO)
    }

    pub fn entries(&self) -> [Complex; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn a(&self) -> Complex {
        self.a
    }
    pub fn b(&self) -> Complex {
        self.b
    }
    pub fn c(&self) -> Complex {
        self.c
    }
    pub fn d(&self) -> Complex {
        self.d
    }

    pub fn det(&self) -> Complex {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Complex {
        self.a + self.d
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MoebiusMap) -> MoebiusMap {
        let a = self.a * other.a + self.b * other.c;
        let b = self.a * other.b + self.b * other.d;
        let c = self.c * other.a + self.d * other.c;
        let d = self.c * other.b + self.d * other.d;
        // Renormalize to stop determinant drift over long products. For large
        // entries the computed determinant is dominated by cancellation error
        // and the exact value 1 is the better estimate.
        let scale = a.norm_sqr().max(b.norm_sqr()).max(c.norm_sqr()).max(d.norm_sqr());
        if scale > 1e6 {
            return Self::sign_fixed(a, b, c, d);
        }
        let s = (a * d - b * c).sqrt();
        Self::sign_fixed(a / s, b / s, c / s, d / s)
    }

    pub fn inverse(&self) -> MoebiusMap {
        Self::sign_fixed(self.d, -self.b, -self.c, self.a)
    }

    /// `g ∘ self ∘ g⁻¹`.
    pub fn conjugate_by(&self, g: &MoebiusMap) -> MoebiusMap {
        g.compose(self).compose(&g.inverse())
    }

    /// `self^n` for any integer `n`, by repeated squaring.
    pub fn pow(&self, n: i64) -> MoebiusMap {
        let mut base = if n < 0 { self.inverse() } else { *self };
        let mut e = n.unsigned_abs();
        let mut acc = MoebiusMap::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base);
            }
            base = base.compose(&base);
            e >>= 1;
        }
        acc
    }

    /// Equality in `PSL(2, C)`: entrywise up to a global sign.
    pub fn approx_eq(&self, other: &MoebiusMap, tol: f64) -> bool {
        let close = |s: f64| {
            (self.a - other.a * s).norm() <= tol
                && (self.b - other.b * s).norm() <= tol
                && (self.c - other.c * s).norm() <= tol
                && (self.d - other.d * s).norm() <= tol
        };
        close(1.0) || close(-1.0)
    }

    pub fn apply(&self, p: &ExtPoint) -> ExtPoint {
        match p {
            ExtPoint::Infinity => {
                if self.c == ZERO {
                    ExtPoint::Infinity
                } else {
                    ExtPoint::Finite(self.a / self.c)
                }
            }
            ExtPoint::Finite(z) => {
                let den = self.c * z + self.d;
                if den == ZERO {
                    ExtPoint::Infinity
                } else {
                    ExtPoint::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }

    /// Convenience for finite inputs with finite images.
    pub fn apply_c(&self, z: Complex) -> ExtPoint {
        self.apply(&ExtPoint::Finite(z))
    }

    /// Poincaré extension to the upper half-space.
    pub fn apply_h3(&self, x: &UhsPoint) -> UhsPoint {
        let cz_d = self.c * x.z + self.d;
        let t2 = x.t * x.t;
        let den = cz_d.norm_sqr() + self.c.norm_sqr() * t2;
        let num = (self.a * x.z + self.b) * cz_d.conj() + self.a * self.c.conj() * t2;
        UhsPoint { z: num / den, t: x.t / den }
    }

    /// Euclidean norm of the derivative at a finite boundary point.
    pub fn derivative_norm(&self, z: Complex) -> Result<f64> {
        let den = self.c * z + self.d;
        let scale = self.c.norm() * z.norm() + self.d.norm();
        if den.norm() <= TOL.normalization * scale.max(1e-300) {
            return Err(Error::PoleAt(ExtPoint::Finite(z).to_string()));
        }
        Ok(1.0 / den.norm_sqr())
    }

    /// Euclidean scaling factor of the Poincaré extension at an interior
    /// point of the half-space model.
    pub fn derivative_norm_h3(&self, x: &UhsPoint) -> f64 {
        1.0 / ((self.c * x.z + self.d).norm_sqr() + self.c.norm_sqr() * x.t * x.t)
    }

    pub fn classify(&self) -> MapKind {
        let tol = TOL.classify;
        if self.b.norm() <= tol && self.c.norm() <= tol && (self.a - self.d).norm() <= tol {
            return MapKind::Identity;
        }
        let tr2 = self.trace() * self.trace();
        if (tr2 - 4.0).norm() <= tol * 4.0 {
            MapKind::Parabolic
        } else if tr2.im.abs() <= tol && tr2.re >= 0.0 && tr2.re < 4.0 {
            MapKind::Elliptic
        } else {
            MapKind::Loxodromic
        }
    }

    /// Eigenvalue of largest modulus (the multiplier at the repelling point
    /// is its square).
    fn dominant_eigenvalue(&self) -> Complex {
        let tr = self.trace();
        let disc = (tr * tr - 4.0).sqrt();
        let l1 = (tr + disc) / 2.0;
        let l2 = (tr - disc) / 2.0;
        if l1.norm() >= l2.norm() {
            l1
        } else {
            l2
        }
    }

    /// Distance moved along the axis (0 for parabolics and the identity).
    pub fn translation_length(&self) -> Result<f64> {
        match self.classify() {
            MapKind::Identity | MapKind::Parabolic => Ok(0.0),
            MapKind::Elliptic => Err(Error::EllipticInput),
            MapKind::Loxodromic => Ok(2.0 * self.dominant_eigenvalue().norm().ln()),
        }
    }

    /// Rotation about the axis, reduced to `[0, 2π)`.
    pub fn rotation_angle(&self) -> Result<f64> {
        match self.classify() {
            MapKind::Identity | MapKind::Parabolic => Ok(0.0),
            MapKind::Elliptic => {
                let tr = self.trace().re.clamp(-2.0, 2.0);
                Ok((2.0 * (tr / 2.0).acos()).rem_euclid(std::f64::consts::TAU))
            }
            MapKind::Loxodromic => {
                Ok((2.0 * self.dominant_eigenvalue().arg()).rem_euclid(std::f64::consts::TAU))
            }
        }
    }

    /// Loxodromic map with attracting fixed point `p`, repelling fixed point
    /// `q`, the given translation length and rotation about the axis.
    pub fn loxodromic_with_axis(p: ExtPoint, q: ExtPoint, length: f64, rotation: f64) -> Result<Self> {
        if p.approx_eq(&q, TOL.geometric) {
            return Err(Error::CoincidentFixedPoints);
        }
        if !(length > 0.0) {
            return Err(Error::OutOfRange(length, "translation length must be > 0"));
        }
        // z -> e^{-λ} z attracts to 0 and repels from ∞.
        let lambda = Complex::new(length, rotation);
        let canon = Self::sign_fixed((-lambda / 2.0).exp(), ZERO, ZERO, (lambda / 2.0).exp());
        let frame = Self::frame(p, q)?;
        Ok(canon.conjugate_by(&frame))
    }

    /// Some map sending 0 to `p` and ∞ to `q`.
    pub fn frame(p: ExtPoint, q: ExtPoint) -> Result<Self> {
        match (p, q) {
            (ExtPoint::Finite(p), ExtPoint::Infinity) => Ok(Self::translation(p)),
            (ExtPoint::Infinity, ExtPoint::Finite(q)) => Self::new(q, ONE, ONE, ZERO),
            (ExtPoint::Finite(p), ExtPoint::Finite(q)) => Self::new(q, p, ONE, ONE),
            (ExtPoint::Infinity, ExtPoint::Infinity) => Err(Error::CoincidentFixedPoints),
        }
    }

    /// The map sending `z1, z2, z3` to `w1, w2, w3`.
    pub fn three_point(z: [ExtPoint; 3], w: [ExtPoint; 3]) -> Result<Self> {
        let to_std = Self::cross_ratio_map(z)?;
        let from_std = Self::cross_ratio_map(w)?;
        Ok(from_std.inverse().compose(&to_std))
    }

    /// Map sending `z1 -> 0`, `z2 -> 1`, `z3 -> ∞`.
    fn cross_ratio_map(z: [ExtPoint; 3]) -> Result<Self> {
        use ExtPoint::*;
        match z {
            [Finite(z1), Finite(z2), Finite(z3)] => {
                // (z - z1)(z2 - z3) / ((z - z3)(z2 - z1))
                Self::new(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))
            }
            [Infinity, Finite(z2), Finite(z3)] => Self::new(ZERO, z2 - z3, ONE, -z3),
            [Finite(z1), Infinity, Finite(z3)] => Self::new(ONE, -z1, ONE, -z3),
            [Finite(z1), Finite(z2), Infinity] => Self::new(ONE, -z1, ZERO, z2 - z1),
            _ => Err(Error::CoincidentFixedPoints),
        }
    }

    /// Fixed points; for loxodromics the attracting one comes first.
    pub fn fixed_points(&self) -> Result<Vec<ExtPoint>> {
        let kind = self.classify();
        if kind == MapKind::Identity {
            return Err(Error::IdentityInput);
        }
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let mut pts = if c.norm() <= TOL.normalization * (a.norm() + d.norm()) {
            if kind == MapKind::Parabolic {
                vec![ExtPoint::Infinity]
            } else {
                vec![ExtPoint::Infinity, ExtPoint::Finite(b / (d - a))]
            }
        } else if kind == MapKind::Parabolic {
            vec![ExtPoint::Finite((a - d) / (2.0 * c))]
        } else {
            let disc = ((d - a) * (d - a) + 4.0 * b * c).sqrt();
            vec![
                ExtPoint::Finite((a - d + disc) / (2.0 * c)),
                ExtPoint::Finite((a - d - disc) / (2.0 * c)),
            ]
        };
        if kind == MapKind::Loxodromic && pts.len() == 2 && !self.is_attracting(&pts[0]) {
            pts.swap(0, 1);
        }
        Ok(pts)
    }

    fn is_attracting(&self, p: &ExtPoint) -> bool {
        match p {
            // Near ∞ the map looks like z -> (a/d) z + ...
            ExtPoint::Infinity => self.a.norm() > self.d.norm(),
            ExtPoint::Finite(z) => (self.c * z + self.d).norm_sqr() > 1.0,
        }
    }

    /// Attracting fixed point of a loxodromic map.
    pub fn attracting_fixed_point(&self) -> Result<ExtPoint> {
        if self.classify() != MapKind::Loxodromic {
            return Err(Error::NonLoxodromic);
        }
        Ok(self.fixed_points()?[0])
    }

    /// Isometric circle `|cz + d| = 1`, when `c != 0`.
    pub fn isometric_circle(&self) -> Option<(Complex, f64)> {
        if self.c.norm() <= TOL.normalization {
            None
        } else {
            Some((-self.d / self.c, 1.0 / self.c.norm()))
        }
    }

    pub fn map_disk(&self, disk: &RoundDisk) -> RoundDisk {
        disk.transformed(self)
    }
}

impl fmt::Display for MoebiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Decoded boundary of a [`RoundDisk`] together with the side it selects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiskShape {
    /// `|z - center| < radius`.
    Disk { center: Complex, radius: f64 },
    /// `|z - center| > radius` (contains ∞).
    Exterior { center: Complex, radius: f64 },
    /// `Re(z * conj(normal)) > offset` with `|normal| = 1`.
    HalfPlane { normal: Complex, offset: f64 },
}

impl DiskShape {
    fn complement(self) -> DiskShape {
        match self {
            DiskShape::Disk { center, radius } => DiskShape::Exterior { center, radius },
            DiskShape::Exterior { center, radius } => DiskShape::Disk { center, radius },
            DiskShape::HalfPlane { normal, offset } => DiskShape::HalfPlane { normal: -normal, offset: -offset },
        }
    }
}

fn dot(z: Complex, w: Complex) -> f64 {
    z.re * w.re + z.im * w.im
}

/// Signed gap by which the closure of `inner` sits inside the interior of
/// `outer`; positive means strict containment.
fn containment_margin(outer: DiskShape, inner: DiskShape) -> f64 {
    use DiskShape::*;
    match (outer, inner) {
        (Disk { center: c2, radius: r2 }, Disk { center: c1, radius: r1 }) => r2 - ((c1 - c2).norm() + r1),
        (Exterior { center: c2, radius: r2 }, Disk { center: c1, radius: r1 }) => (c1 - c2).norm() - r1 - r2,
        (HalfPlane { normal, offset }, Disk { center, radius }) => dot(center, normal) - offset - radius,
        (Disk { .. }, _) => f64::NEG_INFINITY,
        (HalfPlane { .. }, HalfPlane { .. }) => f64::NEG_INFINITY,
        // Both regions contain ∞: compare complements the other way round.
        (outer, inner) => containment_margin(inner.complement(), outer.complement()),
    }
}

/// An oriented generalized circle: the closed-or-open region
/// `{z : A|z|² + B z̄ + B̄ z + C < 0}` of the Riemann sphere, stored with the
/// Hermitian form normalized to `|B|² - AC = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundDisk {
    a: f64,
    b: Complex,
    c: f64,
}

impl RoundDisk {
    fn from_form(a: f64, b: Complex, c: f64) -> Result<Self> {
        let disc = b.norm_sqr() - a * c;
        if !(disc > 0.0) || !disc.is_finite() {
            return Err(Error::OutOfRange(disc, "degenerate circle"));
        }
        let s = disc.sqrt();
        Ok(RoundDisk { a: a / s, b: b / s, c: c / s })
    }

    /// Region `A|z|² + B z̄ + B̄ z + C < 0` for a form with positive discriminant.
    pub fn from_hermitian(a: f64, b: Complex, c: f64) -> Result<Self> {
        Self::from_form(a, b, c)
    }

    /// Inversive product of the boundary circles; `|I| > 1` exactly when
    /// they are disjoint, and then the hemispheres over them lie at
    /// hyperbolic distance `arccosh |I|`.
    pub fn inversive_product(&self, other: &RoundDisk) -> f64 {
        (self.b * other.b.conj()).re - 0.5 * (self.a * other.c + other.a * self.c)
    }

    /// True when the stored form has unit discriminant.
    /// Unit discriminant up to the rounding left by cancelling `|B|²` against `AC`.
    pub fn is_normalized(&self) -> bool {
        (self.b.norm_sqr() - self.a * self.c - 1.0).abs() < 1e-9 * self.b.norm_sqr().max(1.0)
    }

    /// Open disk `|z - center| < radius`.
    pub fn disk(center: Complex, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::OutOfRange(radius, "radius must be > 0"));
        }
        Self::from_form(1.0, -center, center.norm_sqr() - radius * radius)
    }

    /// Exterior `|z - center| > radius` (contains ∞).
    pub fn exterior(center: Complex, radius: f64) -> Result<Self> {
        Ok(Self::disk(center, radius)?.complement())
    }

    /// Half-plane `Re(z conj(normal)) > offset`.
    pub fn half_plane(normal: Complex, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0) {
            return Err(Error::OutOfRange(n, "normal must be nonzero"));
        }
        let u = normal / n;
        Self::from_form(0.0, -u / 2.0, offset)
    }

    /// The other side of the same circle.
    pub fn complement(&self) -> Self {
        RoundDisk { a: -self.a, b: -self.b, c: -self.c }
    }

    /// Value of the defining form; negative inside.
    pub fn form(&self, z: Complex) -> f64 {
        self.a * z.norm_sqr() + 2.0 * dot(z, self.b) + self.c
    }

    pub fn contains(&self, p: &ExtPoint) -> bool {
        match p {
            ExtPoint::Finite(z) => self.form(*z) < 0.0,
            ExtPoint::Infinity => self.a < 0.0,
        }
    }

    pub fn shape(&self) -> DiskShape {
        if self.a.abs() < TOL.line_threshold {
            let bn = self.b.norm();
            DiskShape::HalfPlane { normal: -self.b / bn, offset: self.c / (2.0 * bn) }
        } else {
            let center = -self.b / self.a;
            let radius = 1.0 / self.a.abs();
            if self.a > 0.0 {
                DiskShape::Disk { center, radius }
            } else {
                DiskShape::Exterior { center, radius }
            }
        }
    }

    /// Center and radius when the boundary is a circle.
    pub fn circle(&self) -> Option<(Complex, f64)> {
        match self.shape() {
            DiskShape::Disk { center, radius } | DiskShape::Exterior { center, radius } => Some((center, radius)),
            DiskShape::HalfPlane { .. } => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.shape(), DiskShape::Disk { .. })
    }

    /// Euclidean radius (infinite for lines).
    pub fn radius(&self) -> f64 {
        self.circle().map_or(f64::INFINITY, |(_, r)| r)
    }

    /// Image under a Möbius map; the selected side is transported.
    pub fn transformed(&self, f: &MoebiusMap) -> RoundDisk {
        // H' = N* H N with N = f⁻¹.
        let n = f.inverse();
        let h = [[Complex::from(self.a), self.b], [self.b.conj(), Complex::from(self.c)]];
        let m = [[n.a, n.b], [n.c, n.d]];
        let mut hn = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                hn[i][j] = h[i][0] * m[0][j] + h[i][1] * m[1][j];
            }
        }
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = m[0][i].conj() * hn[0][j] + m[1][i].conj() * hn[1][j];
            }
        }
        let a = out[0][0].re;
        let c = out[1][1].re;
        let b = (out[0][1] + out[1][0].conj()) / 2.0;
        // For small images |B|² - AC cancels to noise, while congruence by
        // a unimodular map preserves the unit discriminant exactly.
        if b.norm_sqr() > 1e6 {
            return RoundDisk { a, b, c };
        }
        let s = (b.norm_sqr() - a * c).sqrt();
        RoundDisk { a: a / s, b: b / s, c: c / s }
    }

    /// Three distinct points on the boundary circle.
    pub fn boundary_points(&self) -> [ExtPoint; 3] {
        match self.shape() {
            DiskShape::Disk { center, radius } | DiskShape::Exterior { center, radius } => {
                let p = |k: f64| ExtPoint::Finite(center + Complex::from_polar(radius, k * std::f64::consts::TAU / 3.0));
                [p(0.0), p(1.0), p(2.0)]
            }
            DiskShape::HalfPlane { normal, offset } => {
                let base = normal * offset;
                let dir = normal * Complex::new(0.0, 1.0);
                [ExtPoint::Finite(base - dir), ExtPoint::Finite(base), ExtPoint::Finite(base + dir)]
            }
        }
    }

    /// Boundary sample of `n` points (finite ones only for lines).
    pub fn boundary_sample(&self, n: usize, line_span: f64) -> Vec<Complex> {
        match self.shape() {
            DiskShape::Disk { center, radius } | DiskShape::Exterior { center, radius } => (0..n)
                .map(|k| center + Complex::from_polar(radius, k as f64 * std::f64::consts::TAU / n as f64))
                .collect(),
            DiskShape::HalfPlane { normal, offset } => {
                let base = normal * offset;
                let dir = normal * Complex::new(0.0, 1.0);
                (0..n)
                    .map(|k| base + dir * (line_span * (2.0 * k as f64 / (n.max(2) - 1) as f64 - 1.0)))
                    .collect()
            }
        }
    }

    /// Signed gap by which this region's closure lies inside `outer`'s
    /// interior.
    pub fn margin_inside(&self, outer: &RoundDisk) -> f64 {
        containment_margin(outer.shape(), self.shape())
    }

    /// Closure of `self` strictly inside the interior of `outer`.
    pub fn closure_inside(&self, outer: &RoundDisk) -> bool {
        self.margin_inside(outer) > 0.0
    }

    /// Closures of the two regions are disjoint.
    pub fn closures_disjoint(&self, other: &RoundDisk) -> bool {
        self.margin_inside(&other.complement()) > 0.0
    }

    /// Same oriented circle, within `tol` on the normalized form.
    pub fn approx_eq(&self, other: &RoundDisk, tol: f64) -> bool {
        match (self.shape(), other.shape()) {
            (DiskShape::Disk { center: c1, radius: r1 }, DiskShape::Disk { center: c2, radius: r2 })
            | (DiskShape::Exterior { center: c1, radius: r1 }, DiskShape::Exterior { center: c2, radius: r2 }) => {
                let scale = 1.0 + c1.norm().max(r1);
                (c1 - c2).norm() <= tol * scale && (r1 - r2).abs() <= tol * scale
            }
            _ => (self.a - other.a).abs() <= tol && (self.b - other.b).norm() <= tol && (self.c - other.c).abs() <= tol,
        }
    }
}

/// Closed hyperbolic half-space whose closure meets the sphere at infinity
/// in the closure of `disk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub disk: RoundDisk,
}

impl HalfSpace {
    pub fn new(disk: RoundDisk) -> Self {
        HalfSpace { disk }
    }

    pub fn contains(&self, x: &UhsPoint) -> bool {
        self.disk.form(x.z) + self.disk.a * x.t * x.t <= 0.0
    }

    /// Some point strictly inside the half-space.
    pub fn interior_point(&self) -> UhsPoint {
        match self.disk.shape() {
            DiskShape::Disk { center, radius } => UhsPoint { z: center, t: radius / 2.0 },
            DiskShape::Exterior { center, radius } => UhsPoint { z: center, t: 2.0 * radius },
            DiskShape::HalfPlane { normal, offset } => UhsPoint { z: normal * (offset + 1.0), t: 1.0 },
        }
    }

    /// The half-space as a convex region of the closed unit ball.
    pub fn to_ball(&self) -> Result<BallCap> {
        let pts = self.disk.boundary_points().map(|p| boundary_to_ball(&p));
        let mut u = cross(sub(pts[1], pts[0]), sub(pts[2], pts[0]));
        let un = norm(u);
        u = scale(u, 1.0 / un);
        let mut h = dot3(u, pts[0]);
        if h < 0.0 {
            u = scale(u, -1.0);
            h = -h;
        }
        let inside = self.interior_point().to_ball();
        if h < 1e-13 {
            if dot3(u, inside) < 0.0 {
                u = scale(u, -1.0);
            }
            return Ok(BallCap::HalfBall { normal: u });
        }
        let center = scale(u, 1.0 / h);
        let radius = (1.0 / (h * h) - 1.0).sqrt();
        if norm(sub(inside, center)) < radius {
            Ok(BallCap::Lens { center, radius })
        } else {
            Err(Error::NonConvexRegion)
        }
    }
}

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}
fn dot3(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn norm(a: V3) -> f64 {
    dot3(a, a).sqrt()
}
fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Closed unit ball intersected with a ball orthogonal to the unit sphere
/// (or with a half-space through the origin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallCap {
    Lens { center: V3, radius: f64 },
    HalfBall { normal: V3 },
}

impl BallCap {
    fn in_unit(p: V3) -> bool {
        norm(p) <= 1.0 + 1e-15
    }

    fn in_cap(&self, p: V3) -> bool {
        match self {
            BallCap::Lens { center, radius } => norm(sub(p, *center)) <= radius * (1.0 + 1e-15),
            BallCap::HalfBall { normal } => dot3(p, *normal) >= -1e-15,
        }
    }

    /// Nearest point of the region.
    pub fn project(&self, p: V3) -> V3 {
        let n = norm(p);
        let q = if n > 1.0 { scale(p, 1.0 / n) } else { p };
        if self.in_cap(q) {
            return q;
        }
        let q = match self {
            BallCap::Lens { center, radius } => {
                let v = sub(p, *center);
                let nv = norm(v);
                if nv > *radius {
                    add(*center, scale(v, radius / nv))
                } else {
                    p
                }
            }
            BallCap::HalfBall { normal } => {
                let s = dot3(p, *normal);
                if s < 0.0 {
                    sub(p, scale(*normal, s))
                } else {
                    p
                }
            }
        };
        if Self::in_unit(q) {
            return q;
        }
        // Nearest point of the edge circle where the two spheres meet.
        let (axis, offset) = match self {
            BallCap::Lens { center, .. } => {
                let cn = norm(*center);
                (scale(*center, 1.0 / cn), 1.0 / cn)
            }
            BallCap::HalfBall { normal } => (*normal, 0.0),
        };
        let rim = (1.0 - offset * offset).max(0.0).sqrt();
        let mut v = sub(p, scale(axis, dot3(p, axis)));
        if norm(v) < 1e-300 {
            let e = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            v = cross(axis, e);
        }
        add(scale(axis, offset), scale(v, rim / norm(v)))
    }
}

/// One piece of a set in `closure(H³)` for Euclidean distance queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetPiece {
    HalfSpace(HalfSpace),
    Interior(UhsPoint),
    Boundary(ExtPoint),
}

impl SetPiece {
    fn as_region(&self) -> Result<Region> {
        Ok(match self {
            SetPiece::HalfSpace(h) => Region::Cap(h.to_ball()?),
            SetPiece::Interior(x) => Region::Point(x.to_ball()),
            SetPiece::Boundary(p) => Region::Point(boundary_to_ball(p)),
        })
    }
}

enum Region {
    Cap(BallCap),
    Point(V3),
}

impl Region {
    fn project(&self, p: V3) -> V3 {
        match self {
            Region::Cap(c) => c.project(p),
            Region::Point(q) => *q,
        }
    }

    fn anchor(&self) -> V3 {
        match self {
            Region::Cap(BallCap::Lens { center, .. }) => {
                let cn = norm(*center);
                scale(*center, 1.0 / cn)
            }
            Region::Cap(BallCap::HalfBall { normal }) => *normal,
            Region::Point(q) => *q,
        }
    }
}

const AP_MAX_ITERS: usize = 200_000;

fn piece_distance(x: &SetPiece, y: &SetPiece) -> Result<f64> {
    if let (SetPiece::HalfSpace(h1), SetPiece::HalfSpace(h2)) = (x, y) {
        if !h1.disk.closures_disjoint(&h2.disk) {
            return Ok(0.0);
        }
    }
    let rx = x.as_region()?;
    let ry = y.as_region()?;
    // Alternating projections converge to a closest pair of disjoint
    // compact convex sets.
    let mut p = rx.project(ry.anchor());
    let mut q = ry.project(p);
    let mut best = norm(sub(p, q));
    for _ in 0..AP_MAX_ITERS {
        p = rx.project(q);
        q = ry.project(p);
        let d = norm(sub(p, q));
        if best - d <= 1e-16 * (1.0 + best) {
            best = best.min(d);
            break;
        }
        best = d;
    }
    Ok(best)
}

/// Infimum of Euclidean distances between two finite unions of half-spaces
/// and points, measured in the closed ball model.
pub fn euclidean_set_distance(a: &[SetPiece], b: &[SetPiece]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            best = best.min(piece_distance(x, y)?);
            if best == 0.0 {
                return Ok(0.0);
            }
        }
    }
    Ok(best)
}
