//! Truncated power series `f(q) = sum q^n a_n` with right quaternion
//! coefficients, the star-product algebra, the splitting `f = f1 + f2 j`
//! on a slice and the extension of slice data back to the whole ball.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quaternion::{orthogonal_unit, slice_decompose, ImaginaryUnit, Quaternion};

/// Degree cap used when no explicit one is given.
pub const DEFAULT_DEGREE: usize = 64;

/// Largest tolerated bound on the neglected tail of a truncated series.
pub const TAIL_TOLERANCE: f64 = 1e-9;

/// A quaternion-valued slice-regular function on the unit ball.
///
/// Implementors only need to be correct on the ball; `value` and
/// `derivative` return a domain error for `|q| >= 1`. The derivative is the
/// slice derivative `df/dx0`, which is again slice regular.
pub trait SliceFunction: Sync {
    fn value(&self, q: Quaternion) -> Result<Quaternion>;

    fn derivative(&self, q: Quaternion) -> Result<Quaternion>;

    /// The slice on which values are cheapest and most accurate. Values on
    /// every other slice follow from this one by the representation formula.
    fn reference_unit(&self) -> ImaginaryUnit {
        ImaginaryUnit::I
    }

    /// Points `x + iy` (slice coordinates, closed under conjugation) near
    /// which the derivative concentrates on a scale too small for a plain
    /// tensor rule. Quadrature refocuses there.
    fn hotspots(&self) -> Vec<Complex64> {
        Vec::new()
    }
}

/// Points with `|c| > HOTSPOT_RADIUS` are worth refocusing a rule on.
pub const HOTSPOT_RADIUS: f64 = 0.5;

/// `points` together with their conjugates, near-duplicates removed.
pub fn conjugate_closure(points: &[Complex64]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::new();
    for p in points.iter().flat_map(|p| [*p, p.conj()]) {
        if out.iter().all(|o| (o - p).norm() > 1e-12) {
            out.push(p);
        }
    }
    out
}

impl<T: SliceFunction + ?Sized> SliceFunction for &T {
    fn value(&self, q: Quaternion) -> Result<Quaternion> {
        (**self).value(q)
    }
    fn derivative(&self, q: Quaternion) -> Result<Quaternion> {
        (**self).derivative(q)
    }
    fn reference_unit(&self) -> ImaginaryUnit {
        (**self).reference_unit()
    }
    fn hotspots(&self) -> Vec<Complex64> {
        (**self).hotspots()
    }
}

fn check_ball(q: Quaternion) -> Result<f64> {
    let r = q.norm();
    if r.is_nan() || r >= 1.0 {
        return Err(Error::domain(format!("outside open unit ball: |q| = {r}")));
    }
    Ok(r)
}

/// `sum q^n a_n` truncated at `degree_cap`.
///
/// A series built from an infinite model (reciprocals, Moebius maps) is
/// marked `truncated`; evaluating it where the geometric tail bound
/// `max|a_n| r^(N+1) / (1 - r)` exceeds [`TAIL_TOLERANCE`] fails unless the
/// caller opted in with [`PowerSeries::allow_tail`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    coeffs: Vec<Quaternion>,
    degree_cap: usize,
    truncated: bool,
    allow_tail: bool,
}

impl PowerSeries {
    /// Exact polynomial with the given coefficients `a_0, a_1, ...`.
    pub fn new(coeffs: Vec<Quaternion>) -> Self {
        let degree_cap = DEFAULT_DEGREE.max(coeffs.len().saturating_sub(1));
        let mut s = Self { coeffs, degree_cap, truncated: false, allow_tail: false };
        s.trim();
        s
    }

    pub fn constant(c: Quaternion) -> Self {
        Self::new(vec![c])
    }

    pub fn identity() -> Self {
        Self::new(vec![Quaternion::ZERO, Quaternion::ONE])
    }

    /// `q^n c`.
    pub fn monomial(n: usize, c: Quaternion) -> Self {
        let mut coeffs = vec![Quaternion::ZERO; n + 1];
        coeffs[n] = c;
        Self::new(coeffs)
    }

    /// Marks the series as the truncation of an infinite expansion.
    pub fn into_truncated(mut self) -> Self {
        self.truncated = true;
        self
    }

    /// Permits evaluation even where the tail bound is above tolerance.
    pub fn allow_tail(mut self, allow: bool) -> Self {
        self.allow_tail = allow;
        self
    }

    pub fn with_degree_cap(mut self, cap: usize) -> Self {
        self.degree_cap = cap;
        if self.coeffs.len() > cap + 1 {
            self.coeffs.truncate(cap + 1);
            self.truncated = true;
        }
        self
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == Quaternion::ZERO {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(Quaternion::ZERO);
        }
    }

    pub fn coeffs(&self) -> &[Quaternion] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> Quaternion {
        self.coeffs.get(n).copied().unwrap_or(Quaternion::ZERO)
    }

    /// Index of the last stored coefficient.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|c| *c == Quaternion::ZERO)
    }

    /// Upper bound on the neglected tail at radius `r`; zero for exact
    /// polynomials.
    pub fn tail_bound(&self, r: f64) -> f64 {
        if !self.truncated {
            return 0.0;
        }
        if r >= 1.0 {
            return f64::INFINITY;
        }
        let max = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let n = self.degree_cap as i32;
        max * r.powi(n + 1) / (1.0 - r)
    }

    fn check_tail(&self, r: f64, derivative: bool) -> Result<()> {
        if !self.truncated || self.allow_tail {
            return Ok(());
        }
        let mut bound = self.tail_bound(r);
        if derivative {
            bound *= (self.degree_cap as f64 + 1.0) / (1.0 - r);
        }
        if bound > TAIL_TOLERANCE {
            return Err(Error::diagnostic(format!(
                "truncation tail bound {bound:.3e} at |q| = {r} exceeds {TAIL_TOLERANCE:e}; \
                 raise the degree or allow the tail explicitly"
            )));
        }
        Ok(())
    }

    fn horner(&self, q: Quaternion) -> Quaternion {
        let mut acc = Quaternion::ZERO;
        for a in self.coeffs.iter().rev() {
            acc = q * acc + *a;
        }
        acc
    }

    fn horner_derivative(&self, q: Quaternion) -> Quaternion {
        let mut acc = Quaternion::ZERO;
        for (n, a) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = q * acc + a.scale(n as f64);
        }
        acc
    }

    /// Evaluates on a slice `C(unit)` with plain complex arithmetic.
    /// Requires every coefficient to lie in `C(unit)`; used by self-maps.
    pub(crate) fn eval_complex(&self, unit: ImaginaryUnit, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in self.coeffs.iter().rev() {
            acc = z * acc + unit.project(*a);
        }
        acc
    }

    pub(crate) fn eval_complex_derivative(&self, unit: ImaginaryUnit, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (n, a) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = z * acc + unit.project(*a) * n as f64;
        }
        acc
    }
}

impl std::ops::Add for &PowerSeries {
    type Output = PowerSeries;
    fn add(self, o: &PowerSeries) -> PowerSeries {
        let n = self.coeffs.len().max(o.coeffs.len());
        let coeffs = (0..n).map(|k| self.coeff(k) + o.coeff(k)).collect();
        let mut s = PowerSeries::new(coeffs);
        s.degree_cap = self.degree_cap.max(o.degree_cap);
        s.truncated = self.truncated || o.truncated;
        s.allow_tail = self.allow_tail && o.allow_tail;
        s
    }
}

impl std::ops::Sub for &PowerSeries {
    type Output = PowerSeries;
    fn sub(self, o: &PowerSeries) -> PowerSeries {
        self + &o.right_scale(Quaternion::real(-1.0))
    }
}

impl PowerSeries {
    /// `f(q) c`: every coefficient multiplied on the right.
    pub fn right_scale(&self, c: Quaternion) -> PowerSeries {
        let mut s = self.clone();
        for a in &mut s.coeffs {
            *a = *a * c;
        }
        s.trim();
        s
    }
}

impl SliceFunction for PowerSeries {
    fn value(&self, q: Quaternion) -> Result<Quaternion> {
        eval(self, q)
    }

    fn derivative(&self, q: Quaternion) -> Result<Quaternion> {
        let r = check_ball(q)?;
        self.check_tail(r, true)?;
        Ok(self.horner_derivative(q))
    }
}

/// On-disk function description: `{"coeffs": [[w,x,y,z], ...], "label": ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub coeffs: Vec<Quaternion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl FunctionSpec {
    pub fn to_series(&self) -> Result<PowerSeries> {
        if self.coeffs.is_empty() {
            return Err(Error::Parse("function spec has no coefficients".into()));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parse("function spec has non-finite coefficients".into()));
        }
        Ok(PowerSeries::new(self.coeffs.clone()))
    }

    pub fn from_series(f: &PowerSeries, label: Option<String>) -> Self {
        Self { coeffs: f.coeffs.clone(), label }
    }
}

/// Horner evaluation of `sum q^n a_n`.
pub fn eval(f: &PowerSeries, q: Quaternion) -> Result<Quaternion> {
    let r = check_ball(q)?;
    f.check_tail(r, false)?;
    Ok(f.horner(q))
}

/// Termwise slice derivative: coefficients `(n+1) a_(n+1)`.
pub fn slice_derivative(f: &PowerSeries) -> PowerSeries {
    let coeffs: Vec<Quaternion> =
        f.coeffs.iter().enumerate().skip(1).map(|(n, a)| a.scale(n as f64)).collect();
    let mut s = PowerSeries::new(coeffs);
    s.degree_cap = f.degree_cap.saturating_sub(1);
    s.truncated = f.truncated;
    s.allow_tail = f.allow_tail;
    s
}

/// Star product: `c_n = sum_k a_k b_(n-k)`, left factor's coefficient first.
pub fn star_mul(f: &PowerSeries, g: &PowerSeries) -> PowerSeries {
    let cap = f.degree_cap.max(g.degree_cap);
    let full = f.degree() + g.degree();
    let top = full.min(cap);
    let mut coeffs = vec![Quaternion::ZERO; top + 1];
    for (i, a) in f.coeffs.iter().enumerate() {
        if i > top {
            break;
        }
        for (k, b) in g.coeffs.iter().enumerate() {
            if i + k > top {
                break;
            }
            coeffs[i + k] += *a * *b;
        }
    }
    let mut s = PowerSeries::new(coeffs);
    s.degree_cap = cap;
    s.truncated = f.truncated || g.truncated || full > cap;
    s.allow_tail = f.allow_tail || g.allow_tail;
    s
}

/// Regular conjugate: coefficients conjugated.
pub fn regular_conjugate(f: &PowerSeries) -> PowerSeries {
    let mut s = f.clone();
    for a in &mut s.coeffs {
        *a = a.conj();
    }
    s
}

/// Symmetrization `f * f^c`, whose coefficients are real. Returned as reals.
pub fn symmetrization(f: &PowerSeries, degree: usize) -> Vec<f64> {
    (0..=degree)
        .map(|n| {
            (0..=n)
                .filter(|&k| k <= f.degree() && n - k <= f.degree())
                .map(|k| (f.coeffs[k] * f.coeffs[n - k].conj()).w)
                .sum()
        })
        .collect()
}

/// Star reciprocal through the real symmetrization:
/// `f^(-*) = (f * f^c)^(-1) f^c`, with the real series inverted by the
/// classical recursion.
pub fn star_reciprocal(f: &PowerSeries, out_degree: usize) -> Result<PowerSeries> {
    let a0 = f.coeff(0);
    if a0.norm_sqr() == 0.0 {
        return Err(Error::domain("star reciprocal undefined at 0: a_0 = 0"));
    }
    let s = symmetrization(f, out_degree);
    let mut t = vec![0.0; out_degree + 1];
    t[0] = 1.0 / s[0];
    for n in 1..=out_degree {
        let acc: f64 = (1..=n).map(|k| s[k] * t[n - k]).sum();
        t[n] = -acc / s[0];
    }
    let inv_sym = PowerSeries::new(t.into_iter().map(Quaternion::real).collect())
        .with_degree_cap(out_degree);
    let conj = regular_conjugate(f);
    let mut g = star_mul(&inv_sym, &conj).with_degree_cap(out_degree);
    g.degree_cap = out_degree;
    g.truncated = !f.is_constant() || f.truncated;
    g.allow_tail = f.allow_tail;
    Ok(g)
}

/// Zeroes the coefficients `0..=n`.
pub fn tail_projection(f: &PowerSeries, n: usize) -> PowerSeries {
    let mut s = f.clone();
    for a in s.coeffs.iter_mut().take(n + 1) {
        *a = Quaternion::ZERO;
    }
    s.trim();
    s
}

/// Keeps only the coefficients `0..=n`; the complement of [`tail_projection`].
pub fn head_projection(f: &PowerSeries, n: usize) -> PowerSeries {
    let coeffs = f.coeffs.iter().take(n + 1).copied().collect();
    let mut s = PowerSeries::new(coeffs);
    s.degree_cap = f.degree_cap;
    s
}

/// Power series of the slice-regular Moebius map
/// `sigma_a = (1 - q conj(a))^(-*) * (a - q)`, which restricts on `C(I_a)`
/// to `z -> (a - z)/(1 - conj(a) z)`.
pub fn mobius(a: Quaternion, out_degree: usize) -> Result<PowerSeries> {
    if !(a.norm() < 1.0) {
        return Err(Error::domain(format!("Moebius parameter outside unit ball: |a| = {}", a.norm())));
    }
    let kernel = PowerSeries::new(vec![Quaternion::ONE, -a.conj()]);
    let recip = star_reciprocal(&kernel, out_degree)?;
    let numer = PowerSeries::new(vec![a, -Quaternion::ONE]);
    let mut s = star_mul(&recip, &numer).with_degree_cap(out_degree);
    s.truncated = a != Quaternion::ZERO;
    Ok(s)
}

/// Smallest degree for which the Moebius series of `a` has coefficients
/// below `tol` (they decay like `|a|^n`).
pub fn mobius_degree_for(a: Quaternion, tol: f64) -> usize {
    let r = a.norm();
    if r == 0.0 {
        return 1;
    }
    ((tol.ln() / r.ln()).ceil() as usize).max(1) + 1
}

/// Splits a single quaternion as `a1 + a2 j` with `a1, a2` in `C(i)`,
/// `j = orthogonal_unit(i)`.
pub fn split_value(a: Quaternion, i: ImaginaryUnit) -> (Complex64, Complex64) {
    let j = orthogonal_unit(i);
    let iq = i.as_quaternion();
    let jq = j.as_quaternion();
    let ij = iq * jq;
    (Complex64::new(a.w, a.dot(iq)), Complex64::new(a.dot(jq), a.dot(ij)))
}

/// Inverse of [`split_value`].
pub fn join_value(a1: Complex64, a2: Complex64, i: ImaginaryUnit) -> Quaternion {
    let j = orthogonal_unit(i).as_quaternion();
    i.embed(a1) + i.embed(a2) * j
}

/// Series with coefficients in one slice `C(unit)`, stored as complex numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeries {
    pub coeffs: Vec<Complex64>,
    pub unit: ImaginaryUnit,
}

impl ComplexSeries {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, a| z * acc + a)
    }

    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, (n, a)| z * acc + a * n as f64)
    }
}

/// The two holomorphic components of a slice restriction, `f = f1 + f2 j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub f1: ComplexSeries,
    pub f2: ComplexSeries,
    pub j: ImaginaryUnit,
}

impl SplitPair {
    pub fn recombine(&self) -> PowerSeries {
        let coeffs = self
            .f1
            .coeffs
            .iter()
            .zip(&self.f2.coeffs)
            .map(|(a1, a2)| join_value(*a1, *a2, self.f1.unit))
            .collect();
        PowerSeries::new(coeffs)
    }
}

/// Splitting on the slice `C(i)`.
pub fn split(f: &PowerSeries, i: ImaginaryUnit) -> SplitPair {
    let (c1, c2): (Vec<_>, Vec<_>) = f.coeffs.iter().map(|a| split_value(*a, i)).unzip();
    SplitPair {
        f1: ComplexSeries { coeffs: c1, unit: i },
        f2: ComplexSeries { coeffs: c2, unit: i },
        j: orthogonal_unit(i),
    }
}

/// Representation-formula extension of slice data:
/// `(1/2)[(1 - I_q i) v(x + iy) + (1 + I_q i) v(x - iy)]` for `q = x + I_q y`.
pub fn extend<V>(values_on_slice: V, i: ImaginaryUnit, q: Quaternion) -> Result<Quaternion>
where
    V: Fn(Complex64) -> Result<Quaternion>,
{
    check_ball(q)?;
    let sc = slice_decompose(q);
    let prod = sc.unit.as_quaternion() * i.as_quaternion();
    let minus = Quaternion::ONE - prod;
    let plus = Quaternion::ONE + prod;
    let mut acc = Quaternion::ZERO;
    // on the slice itself one of the two weights vanishes
    if minus.norm_sqr() > 1e-30 {
        acc += minus * values_on_slice(Complex64::new(sc.x, sc.y))?;
    }
    if plus.norm_sqr() > 1e-30 {
        acc += plus * values_on_slice(Complex64::new(sc.x, -sc.y))?;
    }
    Ok(acc.scale(0.5))
}

/// Closed-form slice-regular Moebius map `sigma_a`.
///
/// Values on `C(I_a)` are `(a - z)/(1 - conj(a) z)`; everywhere else they
/// come from [`extend`]. Unlike the truncated series this stays exact as
/// `|a| -> 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    a: Complex64,
    unit: ImaginaryUnit,
}

impl Mobius {
    pub fn new(a: Quaternion) -> Result<Self> {
        if !(a.norm() < 1.0) {
            return Err(Error::domain(format!("Moebius parameter outside unit ball: |a| = {}", a.norm())));
        }
        let sc = slice_decompose(a);
        Ok(Self { a: Complex64::new(sc.x, sc.y), unit: sc.unit })
    }

    /// `a` given as a point of the slice `C(unit)`.
    pub fn on_slice(a: Complex64, unit: ImaginaryUnit) -> Result<Self> {
        Self::new(unit.embed(a))
    }

    pub fn parameter(&self) -> Quaternion {
        self.unit.embed(self.a)
    }

    pub fn slice_unit(&self) -> ImaginaryUnit {
        self.unit
    }

    /// Slice value `(a - z)/(1 - conj(a) z)` in complex coordinates.
    pub fn complex_value(&self, z: Complex64) -> Complex64 {
        (self.a - z) / (1.0 - self.a.conj() * z)
    }

    /// Slice derivative `(|a|^2 - 1)/(1 - conj(a) z)^2`.
    pub fn complex_derivative(&self, z: Complex64) -> Complex64 {
        let d = 1.0 - self.a.conj() * z;
        (self.a.norm_sqr() - 1.0) / (d * d)
    }
}

impl SliceFunction for Mobius {
    fn value(&self, q: Quaternion) -> Result<Quaternion> {
        extend(|z| Ok(self.unit.embed(self.complex_value(z))), self.unit, q)
    }

    fn derivative(&self, q: Quaternion) -> Result<Quaternion> {
        extend(|z| Ok(self.unit.embed(self.complex_derivative(z))), self.unit, q)
    }

    fn reference_unit(&self) -> ImaginaryUnit {
        self.unit
    }

    fn hotspots(&self) -> Vec<Complex64> {
        if self.a.norm() > HOTSPOT_RADIUS {
            conjugate_closure(&[self.a])
        } else {
            Vec::new()
        }
    }
}

/// `f - head`, where `head` is an exact polynomial; with `head` the Taylor
/// polynomial of degree `n` this is the tail operator `R_n f`.
pub struct Remainder<F> {
    pub base: F,
    pub head: PowerSeries,
}

impl<F: SliceFunction> Remainder<F> {
    /// `R_n f` given the first `n + 1` Taylor coefficients of `f`.
    pub fn new(base: F, head: PowerSeries) -> Self {
        Self { base, head }
    }
}

impl<F: SliceFunction> SliceFunction for Remainder<F> {
    fn value(&self, q: Quaternion) -> Result<Quaternion> {
        Ok(self.base.value(q)? - self.head.value(q)?)
    }
    fn derivative(&self, q: Quaternion) -> Result<Quaternion> {
        Ok(self.base.derivative(q)? - self.head.derivative(q)?)
    }
    fn reference_unit(&self) -> ImaginaryUnit {
        self.base.reference_unit()
    }
    fn hotspots(&self) -> Vec<Complex64> {
        self.base.hotspots()
    }
}

/// `R_n sigma_a` in closed form.
pub fn mobius_remainder(a: Quaternion, n: usize) -> Result<Remainder<Mobius>> {
    let head = head_projection(&mobius(a, n.max(1))?, n);
    let head = PowerSeries::new(head.coeffs.clone());
    Ok(Remainder::new(Mobius::new(a)?, head))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(w: f64, x: f64, y: f64, z: f64) -> Quaternion {
        Quaternion::new(w, x, y, z)
    }

    fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    /// Convolution oracle written independently of `star_mul`.
    fn convolve(a: &[Quaternion], b: &[Quaternion], n: usize) -> Vec<Quaternion> {
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut c = Quaternion::ZERO;
            for m in 0..=k {
                let x = a.get(m).copied().unwrap_or_default();
                let y = b.get(k - m).copied().unwrap_or_default();
                c += x * y;
            }
            out.push(c);
        }
        out
    }

    #[test]
    fn eval_examples() {
        let id = PowerSeries::identity();
        let z = q(0.3, 0.4, 0.0, 0.0);
        assert_eq!(eval(&id, z).unwrap(), z);
        let c = PowerSeries::constant(Quaternion::J);
        assert_eq!(eval(&c, q(0.1, -0.2, 0.3, 0.1)).unwrap(), Quaternion::J);
        let f = PowerSeries::new(vec![Quaternion::ZERO, Quaternion::I, Quaternion::K]);
        let v = eval(&f, q(0.0, 0.0, 0.5, 0.0)).unwrap();
        assert!(close(v, q(0.0, 0.0, 0.0, -0.75), 1e-16));
        let err = eval(&id, q(0.6, 0.8, 0.0, 0.0)).unwrap_err();
        assert!(err.to_string().contains("outside open unit ball"));
    }

    #[test]
    fn eval_at_zero_is_a0() {
        let f = PowerSeries::new(vec![q(0.1, 0.2, -0.3, 0.4), Quaternion::J]);
        assert_eq!(eval(&f, Quaternion::ZERO).unwrap(), q(0.1, 0.2, -0.3, 0.4));
    }

    #[test]
    fn derivative_examples() {
        let d = slice_derivative(&PowerSeries::identity());
        assert_eq!(d.coeffs(), &[Quaternion::ONE]);
        let f = PowerSeries::monomial(2, Quaternion::K);
        let d = slice_derivative(&f);
        assert_eq!(d.coeffs(), &[Quaternion::ZERO, Quaternion::K.scale(2.0)]);
    }

    #[test]
    fn derivative_matches_finite_difference_for_mobius() {
        let sigma = mobius(Quaternion::real(0.5), 80).unwrap();
        let d = slice_derivative(&sigma);
        let z = q(0.2, 0.1, 0.0, 0.0);
        let h = 1e-5;
        let fd = (eval(&sigma, z + Quaternion::real(h)).unwrap()
            - eval(&sigma, z - Quaternion::real(h)).unwrap())
        .scale(0.5 / h);
        assert!(close(eval(&d, z).unwrap(), fd, 1e-8));
    }

    #[test]
    fn star_examples() {
        let g = PowerSeries::new(vec![q(0.5, 1.0, 0.0, -1.0), Quaternion::J, Quaternion::K]);
        assert_eq!(star_mul(&PowerSeries::constant(Quaternion::ONE), &g).coeffs(), g.coeffs());
        let f = PowerSeries::new(vec![Quaternion::ZERO, Quaternion::I]);
        let g = PowerSeries::new(vec![Quaternion::ZERO, Quaternion::J]);
        let p = star_mul(&f, &g);
        assert_eq!(p.coeffs(), &[Quaternion::ZERO, Quaternion::ZERO, Quaternion::K]);
        assert_eq!(p.coeffs(), &convolve(f.coeffs(), g.coeffs(), 2)[..]);
    }

    #[test]
    fn conjugate_examples() {
        let f = PowerSeries::constant(Quaternion::K);
        assert_eq!(regular_conjugate(&f).coeffs(), &[-Quaternion::K]);
        let r = PowerSeries::new(vec![Quaternion::real(1.0), Quaternion::real(-2.0)]);
        assert_eq!(regular_conjugate(&r), r);
        let f = PowerSeries::new(vec![Quaternion::ONE, Quaternion::I, Quaternion::J]);
        let fc = regular_conjugate(&f);
        assert_eq!(fc.coeffs(), &[Quaternion::ONE, -Quaternion::I, -Quaternion::J]);
        let sym = convolve(f.coeffs(), fc.coeffs(), 4);
        for c in &sym {
            assert_eq!((c.x, c.y, c.z), (0.0, 0.0, 0.0));
        }
        assert_eq!(star_mul(&f, &fc).coeffs(), &sym[..]);
    }

    #[test]
    fn reciprocal_examples() {
        let f = PowerSeries::constant(q(0.0, 2.0, 0.0, 0.0));
        let g = star_reciprocal(&f, 4).unwrap();
        assert!(close(g.coeff(0), q(0.0, -0.5, 0.0, 0.0), 1e-16));
        assert_eq!(g.degree(), 0);

        let a = q(0.4, 0.0, 0.2, 0.0);
        let f = PowerSeries::new(vec![Quaternion::ONE, -a]);
        let g = star_reciprocal(&f, 10).unwrap();
        let mut pow = Quaternion::ONE;
        for n in 0..=10 {
            assert!(close(g.coeff(n), pow, 1e-14), "n={n}");
            pow = pow * a;
        }
        let res = convolve(f.coeffs(), g.coeffs(), 10);
        assert!(close(res[0], Quaternion::ONE, 1e-14));
        for c in &res[1..] {
            assert!(c.norm() < 1e-14);
        }

        let err = star_reciprocal(&PowerSeries::identity(), 4).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn split_examples() {
        let p = split(&PowerSeries::constant(Quaternion::J), ImaginaryUnit::I);
        assert_eq!(p.f1.coeffs, vec![Complex64::new(0.0, 0.0)]);
        assert_eq!(p.f2.coeffs, vec![Complex64::new(1.0, 0.0)]);

        let p = split(&PowerSeries::constant(q(1.0, 1.0, 0.0, 0.0)), ImaginaryUnit::I);
        assert_eq!(p.f1.coeffs, vec![Complex64::new(1.0, 1.0)]);
        assert_eq!(p.f2.coeffs, vec![Complex64::new(0.0, 0.0)]);

        let f = PowerSeries::constant(q(1.0, 1.0, 1.0, 1.0));
        let p = split(&f, ImaginaryUnit::I);
        assert_eq!(p.f1.coeffs, vec![Complex64::new(1.0, 1.0)]);
        assert_eq!(p.f2.coeffs, vec![Complex64::new(1.0, 1.0)]);
        assert_eq!(p.recombine(), f);
    }

    #[test]
    fn extend_examples() {
        let id = |z: Complex64| Ok(ImaginaryUnit::I.embed(z));
        let target = q(0.2, 0.0, 0.3, 0.0);
        assert!(close(extend(id, ImaginaryUnit::I, target).unwrap(), target, 1e-15));

        let c = |z: Complex64| Ok(Quaternion::real(z.re) + Quaternion::K.scale(z.im));
        let v = extend(c, ImaginaryUnit::J, Quaternion::real(0.4)).unwrap();
        assert!(close(v, Quaternion::real(0.4), 1e-15));

        let f = PowerSeries::monomial(2, Quaternion::K);
        let v = extend(|z| eval(&f, ImaginaryUnit::I.embed(z)), ImaginaryUnit::I, target).unwrap();
        assert!(close(v, eval(&f, target).unwrap(), 1e-15));

        assert!(extend(id, ImaginaryUnit::I, q(1.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn mobius_examples() {
        let a = q(0.3, 0.1, -0.2, 0.25);
        let s = mobius(a, 200).unwrap();
        assert!(close(eval(&s, a).unwrap(), Quaternion::ZERO, 1e-12));
        assert!(close(eval(&s, Quaternion::ZERO).unwrap(), a, 1e-15));

        let s0 = mobius(Quaternion::ZERO, 8).unwrap();
        assert_eq!(s0.coeffs(), &[Quaternion::ZERO, -Quaternion::ONE]);

        let s = mobius(Quaternion::real(0.5), 80).unwrap();
        let v = eval(&s, Quaternion::real(0.25)).unwrap();
        assert!(close(v, Quaternion::real(2.0 / 7.0), 1e-15));

        assert!(mobius(Quaternion::ONE, 8).is_err());
    }

    #[test]
    fn mobius_closed_form_matches_series() {
        let a = q(0.2, -0.3, 0.1, 0.35);
        let s = mobius(a, 120).unwrap();
        let m = Mobius::new(a).unwrap();
        for p in [q(0.1, 0.2, -0.3, 0.1), q(-0.4, 0.0, 0.3, 0.2), Quaternion::real(0.6)] {
            assert!(close(m.value(p).unwrap(), eval(&s, p).unwrap(), 1e-12));
            assert!(close(m.derivative(p).unwrap(), s.derivative(p).unwrap(), 1e-11));
        }
    }

    #[test]
    fn tail_projection_examples() {
        let f = PowerSeries::new(vec![Quaternion::I, Quaternion::J, Quaternion::K]);
        assert!(tail_projection(&f, 5).is_constant());
        assert_eq!(tail_projection(&f, 5).coeff(0), Quaternion::ZERO);
        let g = PowerSeries::new(vec![Quaternion::I, Quaternion::J]);
        assert_eq!(tail_projection(&g, 0).coeffs(), &[Quaternion::ZERO, Quaternion::J]);
        let back = &tail_projection(&f, 1) + &head_projection(&f, 1);
        assert_eq!(back, f);
    }

    #[test]
    fn truncated_series_refuses_large_tail() {
        let s = mobius(Quaternion::real(0.5), DEFAULT_DEGREE).unwrap();
        assert!(eval(&s, Quaternion::real(0.2)).is_ok());
        let err = eval(&s, Quaternion::real(0.95)).unwrap_err();
        assert!(matches!(err, Error::Diagnostic(_)));
        assert!(eval(&s.allow_tail(true), Quaternion::real(0.95)).is_ok());
    }

    #[test]
    fn remainder_matches_tail_projection() {
        let a = q(0.4, 0.2, 0.0, 0.1);
        let r = mobius_remainder(a, 5).unwrap();
        let s = mobius(a, 200).unwrap();
        let t = tail_projection(&s, 5);
        let p = q(0.3, -0.1, 0.2, 0.0);
        assert!(close(r.value(p).unwrap(), eval(&t, p).unwrap(), 1e-12));
    }
}
