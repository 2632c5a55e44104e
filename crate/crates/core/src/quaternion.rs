//! Quaternion arithmetic, imaginary units and slice coordinates.
//!
//! Every quaternion `q` that is not real lies on exactly one slice
//! `C(I) = span{1, I}` with `I = Im(q)/|Im(q)|`, so `q = x + I y` with
//! `y = |Im(q)| > 0`. The slice-regular machinery in this crate works one
//! slice at a time, identifying `C(I)` with the complex plane through
//! [`ImaginaryUnit::embed`] and [`ImaginaryUnit::project`].

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Element `w + x i + y j + z k` of the real quaternion algebra.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    #[inline]
    pub const fn real(w: f64) -> Self {
        Self::new(w, 0.0, 0.0, 0.0)
    }

    #[inline]
    pub fn re(self) -> f64 {
        self.w
    }

    /// Purely imaginary part `x i + y j + z k`.
    #[inline]
    pub fn im(self) -> Quaternion {
        Quaternion::new(0.0, self.x, self.y, self.z)
    }

    #[inline]
    pub fn conj(self) -> Quaternion {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Euclidean inner product in R^4.
    #[inline]
    pub fn dot(self, other: Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn scale(self, s: f64) -> Quaternion {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Multiplicative inverse `conj(q)/|q|^2`.
    pub fn inv(self) -> Result<Quaternion> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::domain("inverse of zero quaternion"));
        }
        Ok(self.conj().scale(1.0 / n2))
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

impl From<[f64; 4]> for Quaternion {
    fn from(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl From<f64> for Quaternion {
    fn from(w: f64) -> Self {
        Quaternion::real(w)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}i + {}j + {}k", self.w, self.x, self.y, self.z)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Quaternion {
    #[inline]
    fn add_assign(&mut self, o: Quaternion) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Hamilton product.
impl Mul for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    #[inline]
    fn mul(self, s: f64) -> Quaternion {
        self.scale(s)
    }
}

impl Neg for ImaginaryUnit {
    type Output = ImaginaryUnit;
    fn neg(self) -> ImaginaryUnit {
        ImaginaryUnit { ix: -self.ix, iy: -self.iy, iz: -self.iz }
    }
}

impl std::iter::Sum for Quaternion {
    fn sum<I: Iterator<Item = Quaternion>>(iter: I) -> Quaternion {
        iter.fold(Quaternion::ZERO, |acc, q| acc + q)
    }
}

/// Hamilton product as a free function.
#[inline]
pub fn q_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

/// Quaternion inverse; fails on zero.
#[inline]
pub fn q_inv(a: Quaternion) -> Result<Quaternion> {
    a.inv()
}

/// A unit purely imaginary quaternion, i.e. a point of the 2-sphere `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct ImaginaryUnit {
    ix: f64,
    iy: f64,
    iz: f64,
}

impl ImaginaryUnit {
    pub const I: ImaginaryUnit = ImaginaryUnit { ix: 1.0, iy: 0.0, iz: 0.0 };
    pub const J: ImaginaryUnit = ImaginaryUnit { ix: 0.0, iy: 1.0, iz: 0.0 };
    pub const K: ImaginaryUnit = ImaginaryUnit { ix: 0.0, iy: 0.0, iz: 1.0 };

    /// Normalizes `(ix, iy, iz)` onto the sphere.
    pub fn new(ix: f64, iy: f64, iz: f64) -> Result<Self> {
        let n = (ix * ix + iy * iy + iz * iz).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::domain("imaginary unit from zero or non-finite vector"));
        }
        Ok(Self { ix: ix / n, iy: iy / n, iz: iz / n })
    }

    pub fn components(self) -> [f64; 3] {
        [self.ix, self.iy, self.iz]
    }

    #[inline]
    pub fn as_quaternion(self) -> Quaternion {
        Quaternion::new(0.0, self.ix, self.iy, self.iz)
    }

    #[inline]
    pub fn dot(self, o: ImaginaryUnit) -> f64 {
        self.ix * o.ix + self.iy * o.iy + self.iz * o.iz
    }

    /// `x + I y` for `z = x + iy`.
    #[inline]
    pub fn embed(self, z: Complex64) -> Quaternion {
        Quaternion::new(z.re, self.ix * z.im, self.iy * z.im, self.iz * z.im)
    }

    /// Orthogonal projection of `q` onto `C(I)`, read as a complex number.
    #[inline]
    pub fn project(self, q: Quaternion) -> Complex64 {
        Complex64::new(q.w, self.ix * q.x + self.iy * q.y + self.iz * q.z)
    }

    /// Size of the component of `q` orthogonal to `C(I)`.
    pub fn off_slice(self, q: Quaternion) -> f64 {
        let back = self.embed(self.project(q));
        (q - back).norm()
    }
}

impl From<ImaginaryUnit> for [f64; 3] {
    fn from(u: ImaginaryUnit) -> Self {
        u.components()
    }
}

impl TryFrom<[f64; 3]> for ImaginaryUnit {
    type Error = Error;
    fn try_from(a: [f64; 3]) -> Result<Self> {
        ImaginaryUnit::new(a[0], a[1], a[2])
    }
}

/// `q = x + unit * y` with `y >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceCoordinates {
    pub x: f64,
    pub y: f64,
    pub unit: ImaginaryUnit,
}

impl SliceCoordinates {
    pub fn to_quaternion(self) -> Quaternion {
        self.unit.embed(Complex64::new(self.x, self.y))
    }
}

/// Splits `q` into real part, imaginary modulus and imaginary direction.
/// Real inputs get the basis unit `i`.
pub fn slice_decompose(q: Quaternion) -> SliceCoordinates {
    let y = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
    let unit = if y > 0.0 {
        ImaginaryUnit { ix: q.x / y, iy: q.y / y, iz: q.z / y }
    } else {
        ImaginaryUnit::I
    };
    SliceCoordinates { x: q.w, y, unit }
}

/// Deterministic unit orthogonal to `i`: the coordinate axis least aligned
/// with `i`, with its `i` component removed.
pub fn orthogonal_unit(i: ImaginaryUnit) -> ImaginaryUnit {
    let c = i.components();
    let mut axis = 0;
    for k in 1..3 {
        if c[k].abs() < c[axis].abs() {
            axis = k;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let d = c[axis];
    let v = [e[0] - d * c[0], e[1] - d * c[1], e[2] - d * c[2]];
    // |v|^2 = 1 - d^2 >= 2/3 since |d| <= 1/sqrt(3)
    ImaginaryUnit::new(v[0], v[1], v[2]).expect("projection of least-aligned axis is nonzero")
}

/// `m` quasi-uniform imaginary units: the basis units `i, j, k` followed by
/// a Fibonacci lattice rotated by a rotation drawn from `seed`.
pub fn sample_sphere(m: usize, seed: u64) -> Result<Vec<ImaginaryUnit>> {
    if m == 0 {
        return Err(Error::domain("sample_sphere needs at least one point"));
    }
    let mut out: Vec<ImaginaryUnit> = [ImaginaryUnit::I, ImaginaryUnit::J, ImaginaryUnit::K]
        .into_iter()
        .take(m)
        .collect();
    let extra = m.saturating_sub(3);
    if extra == 0 {
        return Ok(out);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = loop {
        let q = Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 1e-3 && n <= 1.0 {
            break q.scale(1.0 / n);
        }
    };

    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for k in 0..extra {
        let zc = 1.0 - (2.0 * k as f64 + 1.0) / extra as f64;
        let r = (1.0 - zc * zc).max(0.0).sqrt();
        let phi = golden * k as f64;
        let v = Quaternion::new(0.0, r * phi.cos(), r * phi.sin(), zc);
        let w = rot * v * rot.conj();
        out.push(ImaginaryUnit::new(w.x, w.y, w.z)?);
    }
    Ok(out)
}
