//! Composition operators `C_Φ f = f ∘ Φ` for slice-preserving self-maps:
//! boundedness, compactness evidence, Carleson constants and the
//! essential-norm sandwich.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{besov_norm, bloch_from_field, DerivativeField, NormReport};
use crate::quadrature::{build_rule, integrate_invariant, pairwise_sum, DiskRule, DEFAULT_R_MAX};
use crate::quaternion::{ImaginaryUnit, Quaternion};
use crate::series::{
    conjugate_closure, extend, mobius_remainder, split_value, Mobius, PowerSeries, SliceFunction, HOTSPOT_RADIUS,
};

/// Off-slice tolerance when verifying `Φ(B_i) ⊂ B_i`.
const SLICE_TOLERANCE: f64 = 1e-10;

/// Below this sup norm a self-map is compactly contained in the ball.
const SUP_NORM_SHORTCUT: f64 = 1.0 - 1e-3;

/// Default tail index of the remainder diagnostic.
pub const DEFAULT_N_CUT: usize = 16;

/// A power series verified to map the slice `C(i)` into the unit disk of
/// that slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfMap {
    phi: PowerSeries,
    unit: ImaginaryUnit,
    sup_norm: f64,
}

impl SelfMap {
    /// Checks slice preservation and `|Φ| < 1` at every node of `grid`.
    pub fn new(phi: PowerSeries, unit: ImaginaryUnit, grid: &DiskRule) -> Result<Self> {
        let mut sup: f64 = phi.value(Quaternion::ZERO)?.norm();
        for node in grid.nodes() {
            let v = phi.value(unit.embed(node.z))?;
            let off = unit.off_slice(v);
            if off > SLICE_TOLERANCE {
                return Err(Error::domain(format!(
                    "self-map leaves the slice: off-slice component {off:.3e} at z = {}",
                    node.z
                )));
            }
            let n = v.norm();
            if !(n < 1.0) {
                return Err(Error::domain(format!("self-map leaves the unit ball: |Φ(z)| = {n} at z = {}", node.z)));
            }
            sup = sup.max(n);
        }
        Ok(Self { phi, unit, sup_norm: sup })
    }

    /// [`SelfMap::new`] on a 64 x 64 grid reaching `1 - 1e-4`.
    pub fn verified(phi: PowerSeries, unit: ImaginaryUnit) -> Result<Self> {
        Self::new(phi, unit, &build_rule(64, 64, DEFAULT_R_MAX)?)
    }

    pub fn series(&self) -> &PowerSeries {
        &self.phi
    }

    pub fn verified_slice(&self) -> ImaginaryUnit {
        self.unit
    }

    /// `max |Φ|` over the verification grid, an estimate of `‖Φ‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `Φ(z)` in slice coordinates; fails when it leaves the disk.
    pub fn apply(&self, z: Complex64) -> Result<Complex64> {
        let w = self.phi.eval_complex(self.unit, z);
        if !(w.norm() < 1.0) {
            return Err(Error::domain(format!("self-map violation at z = {z}: |Φ(z)| = {}", w.norm())));
        }
        Ok(w)
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        self.phi.eval_complex_derivative(self.unit, z)
    }

    /// Solutions of `Φ(z) = h` in the disk, by Newton's method from a polar
    /// grid of seeds.
    pub fn preimages(&self, h: Complex64) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::new();
        let radii = [0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99, 0.999];
        for r in radii {
            for m in 0..16 {
                let mut z = Complex64::from_polar(r, 2.0 * PI * (m as f64 + 0.5) / 16.0);
                let mut converged = false;
                for _ in 0..80 {
                    let res = self.phi.eval_complex(self.unit, z) - h;
                    if res.norm() < 1e-13 {
                        converged = true;
                        break;
                    }
                    let d = self.derivative(z);
                    if d.norm() < 1e-300 {
                        break;
                    }
                    z -= res / d;
                    if !z.is_finite() || z.norm() > 2.0 {
                        break;
                    }
                }
                if converged && z.norm() < 1.0 && out.iter().all(|o| (o - z).norm() > 1e-9) {
                    out.push(z);
                }
            }
        }
        out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        out
    }

    fn focus_points(&self, targets: &[Complex64]) -> Vec<Complex64> {
        let mut pts = Vec::new();
        for h in targets {
            pts.extend(self.preimages(*h).into_iter().filter(|z| z.norm() > HOTSPOT_RADIUS));
        }
        conjugate_closure(&pts)
    }
}

/// `C_Φ f` as a slice function. On the verified slice it is `f(Φ(z))`;
/// elsewhere the representation formula extends it.
pub struct Composition<'a, F: ?Sized> {
    pub f: &'a F,
    pub phi: &'a SelfMap,
}

impl<'a, F: SliceFunction + ?Sized> Composition<'a, F> {
    pub fn new(f: &'a F, phi: &'a SelfMap) -> Self {
        Self { f, phi }
    }

    fn on_slice(&self, z: Complex64) -> Result<Quaternion> {
        let w = self.phi.apply(z)?;
        self.f.value(self.phi.unit.embed(w))
    }

    fn derivative_on_slice(&self, z: Complex64) -> Result<Quaternion> {
        let w = self.phi.apply(z)?;
        let d = self.f.derivative(self.phi.unit.embed(w))?;
        // f' = d1 + d2 j; the chain rule acts on each component by Φ'(z)
        let c = self.phi.derivative(z);
        let (d1, d2) = split_value(d, self.phi.unit);
        Ok(crate::series::join_value(d1 * c, d2 * c, self.phi.unit))
    }
}

impl<F: SliceFunction + ?Sized> SliceFunction for Composition<'_, F> {
    fn value(&self, q: Quaternion) -> Result<Quaternion> {
        extend(|z| self.on_slice(z), self.phi.unit, q)
    }

    fn derivative(&self, q: Quaternion) -> Result<Quaternion> {
        extend(|z| self.derivative_on_slice(z), self.phi.unit, q)
    }

    fn reference_unit(&self) -> ImaginaryUnit {
        self.phi.unit
    }

    fn hotspots(&self) -> Vec<Complex64> {
        self.phi.focus_points(&conjugate_closure(&self.f.hotspots()))
    }
}

/// `f(Φ(z))` for `z` in the verified slice.
pub fn compose<F: SliceFunction + ?Sized>(f: &F, phi: &SelfMap, z: Complex64) -> Result<Quaternion> {
    Composition::new(f, phi).on_slice(z)
}

/// Slice derivative of `f ∘ Φ` at `z` in the verified slice.
pub fn compose_derivative<F: SliceFunction + ?Sized>(f: &F, phi: &SelfMap, z: Complex64) -> Result<Quaternion> {
    Composition::new(f, phi).derivative_on_slice(z)
}

/// Besov norm of `C_Φ f` with the sup over `units`.
pub fn besov_norm_of_composition<F: SliceFunction + ?Sized>(
    f: &F,
    phi: &SelfMap,
    p: f64,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<NormReport> {
    besov_norm(&Composition::new(f, phi), p, units, rule)
}

/// Deterministic grid `a = ρ e^{iθ}` on the verified slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AGrid {
    pub rhos: Vec<f64>,
    pub angles: usize,
}

impl Default for AGrid {
    fn default() -> Self {
        Self { rhos: vec![0.9, 0.99, 0.999], angles: 16 }
    }
}

impl AGrid {
    fn validate(&self) -> Result<()> {
        if self.rhos.is_empty() || self.angles == 0 {
            return Err(Error::domain("a-grid must be non-empty"));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
            return Err(Error::domain(format!("a-grid radius {r} outside [0, 1)")));
        }
        if self.rhos.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("a-grid radii must increase"));
        }
        Ok(())
    }

    /// Grid points ring by ring, innermost first.
    pub fn points(&self) -> Vec<Complex64> {
        self.rhos
            .iter()
            .flat_map(|r| (0..self.angles).map(move |m| Complex64::from_polar(*r, 2.0 * PI * m as f64 / self.angles as f64)))
            .collect()
    }

    pub fn outer_ring(&self) -> Vec<Complex64> {
        let r = *self.rhos.last().expect("validated");
        (0..self.angles).map(|m| Complex64::from_polar(r, 2.0 * PI * m as f64 / self.angles as f64)).collect()
    }

    fn ring_max(&self, values: &[f64]) -> Vec<f64> {
        values.chunks(self.angles).map(|c| c.iter().copied().fold(0.0, f64::max)).collect()
    }
}

/// Evidence labels: computation supports or refutes, it does not certify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CompactEvidence,
    NotCompactEvidence,
    Inconclusive,
}

/// Result of [`boundedness_functional`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessReport {
    /// `max_a ‖C_Φ σ_a‖_{B_p}` over the grid.
    pub value: f64,
    pub argmax: [f64; 2],
    pub per_a: Vec<f64>,
    pub ring_max: Vec<f64>,
    /// The max over the outermost ring moved by less than 5% from the
    /// previous ring.
    pub bounded_evidence: bool,
}

/// `max over a of ‖C_Φ σ_a‖_{B_p}`.
pub fn boundedness_functional(
    phi: &SelfMap,
    p: f64,
    a_grid: &AGrid,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<BoundednessReport> {
    a_grid.validate()?;
    let points = a_grid.points();
    let mut per_a = Vec::with_capacity(points.len());
    for a in &points {
        let sigma = Mobius::on_slice(*a, phi.unit)?;
        per_a.push(besov_norm_of_composition(&sigma, phi, p, units, rule)?.value);
    }
    Ok(summarize_boundedness(a_grid, &points, per_a))
}

fn summarize_boundedness(a_grid: &AGrid, points: &[Complex64], per_a: Vec<f64>) -> BoundednessReport {
    let (k, value) = per_a.iter().enumerate().fold((0, 0.0), |acc, (k, v)| if *v > acc.1 { (k, *v) } else { acc });
    let ring_max = a_grid.ring_max(&per_a);
    let bounded_evidence = match ring_max.as_slice() {
        [.., prev, last] => (last - prev).abs() <= 0.05 * prev.abs().max(*last),
        _ => value.is_finite(),
    };
    BoundednessReport { value, argmax: [points[k].re, points[k].im], per_a, ring_max, bounded_evidence }
}

/// Result of [`compactness_diagnostic`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompactnessReport {
    pub verdict: Verdict,
    /// Estimate of `‖Φ‖_∞` and the verdict of the sup-norm criterion alone.
    pub sup_norm: f64,
    pub sup_norm_verdict: Verdict,
    /// Bloch seminorm of `C_Φ σ_a`, max over each ring of the tail.
    pub bloch_trace: Vec<[f64; 2]>,
    pub bloch_verdict: Verdict,
}

/// Verdict from a tail sequence `s_0, s_1, ...`.
pub fn tail_verdict(trace: &[f64]) -> Verdict {
    let Some(&first) = trace.first() else {
        return Verdict::Inconclusive;
    };
    let last = *trace.last().expect("non-empty");
    if first <= 0.0 || last <= 0.05 * first {
        Verdict::CompactEvidence
    } else if trace.iter().all(|v| *v >= 0.5 * first) {
        Verdict::NotCompactEvidence
    } else {
        Verdict::Inconclusive
    }
}

/// Compactness evidence from the decay of `‖C_Φ σ_a‖_𝓑` as `|a| -> 1`,
/// with the sup-norm shortcut `‖Φ‖_∞ < 1`.
///
/// The Bloch quantity is the seminorm `sup (1 - |z|^2)|(σ_a ∘ Φ)'|`: the
/// constant term `|σ_a(Φ(0))|` tends to 1 for any `Φ` and says nothing
/// about compactness.
pub fn compactness_diagnostic(
    phi: &SelfMap,
    a_tail: &AGrid,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<CompactnessReport> {
    a_tail.validate()?;
    let points = a_tail.points();
    let values = bloch_per_a(phi, &points, units, rule)?;
    Ok(summarize_compactness(phi, a_tail, &values))
}

fn bloch_per_a(phi: &SelfMap, points: &[Complex64], units: &[ImaginaryUnit], rule: &DiskRule) -> Result<Vec<f64>> {
    let grid = rule.without_extrapolation();
    points
        .iter()
        .map(|a| {
            let sigma = Mobius::on_slice(*a, phi.unit)?;
            let comp = Composition::new(&sigma, phi);
            let field = DerivativeField::new(&comp, &grid)?;
            Ok(bloch_from_field(&comp, &field, units)?.seminorm)
        })
        .collect()
}

fn summarize_compactness(phi: &SelfMap, a_tail: &AGrid, values: &[f64]) -> CompactnessReport {
    let rings = a_tail.ring_max(values);
    let bloch_trace: Vec<[f64; 2]> = a_tail.rhos.iter().zip(&rings).map(|(r, v)| [*r, *v]).collect();
    let bloch_verdict = tail_verdict(&rings);
    let sup_norm_verdict =
        if phi.sup_norm < SUP_NORM_SHORTCUT { Verdict::CompactEvidence } else { Verdict::Inconclusive };
    let verdict = if sup_norm_verdict == Verdict::CompactEvidence { sup_norm_verdict } else { bloch_verdict };
    CompactnessReport { verdict, sup_norm: phi.sup_norm, sup_norm_verdict, bloch_trace, bloch_verdict }
}

/// `μ = μ1 + μ2 j` with atoms on the slice `C(unit)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Complex64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub unit: ImaginaryUnit,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Complex64>, w1: Vec<f64>, w2: Vec<f64>, unit: ImaginaryUnit) -> Result<Self> {
        if points.len() != w1.len() || points.len() != w2.len() {
            return Err(Error::domain("measure points and weights differ in length"));
        }
        if w1.iter().chain(&w2).any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::domain("measure weights must be finite and nonnegative"));
        }
        if points.iter().any(|z| !(z.norm() < 1.0)) {
            return Err(Error::domain("measure atoms must lie in the open disk"));
        }
        Ok(Self { points, w1, w2, unit })
    }

    pub fn zero(unit: ImaginaryUnit) -> Self {
        Self { points: Vec::new(), w1: Vec::new(), w2: Vec::new(), unit }
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.w1) + pairwise_sum(&self.w2)
    }

    /// `μ` with every weight multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            points: self.points.clone(),
            w1: self.w1.iter().map(|w| w * c).collect(),
            w2: self.w2.iter().map(|w| w * c).collect(),
            unit: self.unit,
        }
    }

    fn weighted_sum(&self, weights: impl Fn(usize) -> f64, values: &[f64]) -> f64 {
        let terms: Vec<f64> = values.iter().enumerate().map(|(k, v)| weights(k) * v).collect();
        pairwise_sum(&terms)
    }

    /// `∫ |f'|^p d(μ1 + μ2)`.
    pub fn integrate_derivative<F: SliceFunction + ?Sized>(&self, f: &F, p: f64) -> Result<f64> {
        let values = self.derivative_powers(f, p)?;
        Ok(self.weighted_sum(|k| self.w1[k] + self.w2[k], &values))
    }

    fn derivative_powers<F: SliceFunction + ?Sized>(&self, f: &F, p: f64) -> Result<Vec<f64>> {
        self.points
            .par_iter()
            .map(|z| Ok(f.derivative(self.unit.embed(*z))?.norm().powf(p)))
            .collect()
    }
}

/// Atoms `Φ(z)` with weights `w (1 - |z|^2)^(p-2) |Φ'(z)|^p` over the
/// nodes of `rule`, so that `∫ |f'|^p dμ_p` is the slice seminorm of
/// `C_Φ f` on the same nodes.
pub fn pullback_measure(phi: &SelfMap, p: f64, rule: &DiskRule, i: ImaginaryUnit) -> Result<DiscreteMeasure> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("exponent p must exceed 1, got {p}")));
    }
    if i.dot(phi.unit).abs() < 1.0 - 1e-12 {
        return Err(Error::domain("pullback measure requested off the verified slice of the self-map"));
    }
    let mut points = Vec::new();
    let mut w1 = Vec::new();
    for n in rule.nodes() {
        let d = phi.derivative(n.z).norm();
        if d == 0.0 {
            continue;
        }
        points.push(phi.apply(n.z)?);
        w1.push(n.weight * (1.0 - n.z.norm_sqr()).powf(p - 2.0) * d.powf(p));
    }
    let w2 = vec![0.0; w1.len()];
    Ok(DiscreteMeasure { points, w1, w2, unit: i })
}

/// Result of [`carleson_constant`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlesonReport {
    /// `max_f ∫|f'|^p d(μ1 + μ2) / ‖f‖^p`.
    pub m: f64,
    /// The same functional against `μ1` alone and `μ2` alone.
    pub m1: f64,
    pub m2: f64,
    /// `max_f ∫|f_l'|^p dμ_l / ‖f_l‖^p` for the complex components
    /// `f = f1 + f2 j` on the measure's slice.
    pub complex_m1: f64,
    pub complex_m2: f64,
    pub argmax: Option<usize>,
}

/// Complex Besov norm `|g(0)| + (∫ ((1-|z|^2)|g'|)^p dλ)^(1/p)` of one
/// splitting component of `f` on `C(i)`.
pub fn component_besov_norm<F: SliceFunction + ?Sized>(
    f: &F,
    component: usize,
    p: f64,
    i: ImaginaryUnit,
    rule: &DiskRule,
) -> Result<f64> {
    let pick = |q: Quaternion| {
        let (a, b) = split_value(q, i);
        if component == 1 {
            a
        } else {
            b
        }
    };
    let rule = rule.focused(&conjugate_closure(&f.hotspots()));
    let values: Vec<f64> = {
        let mut out = Vec::new();
        for level in rule.levels() {
            let d: Vec<f64> = level
                .nodes()
                .par_iter()
                .map(|n| Ok(pick(f.derivative(i.embed(n.z))?).norm()))
                .collect::<Result<_>>()?;
            let terms: Vec<f64> = level
                .nodes()
                .iter()
                .zip(&d)
                .map(|(n, d)| n.weight * (1.0 - n.z.norm_sqr()).powf(p - 2.0) * d.powf(p))
                .collect();
            out.push(pairwise_sum(&terms));
        }
        out
    };
    let semi = rule.combine_levels(&values);
    Ok(pick(f.value(Quaternion::ZERO)?).norm() + semi.max(0.0).powf(1.0 / p))
}

/// Empirical Carleson constant of `μ` over a test family.
pub fn carleson_constant<F: SliceFunction>(
    mu: &DiscreteMeasure,
    p: f64,
    family: &[F],
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<CarlesonReport> {
    let mut report = CarlesonReport { m: 0.0, m1: 0.0, m2: 0.0, complex_m1: 0.0, complex_m2: 0.0, argmax: None };
    let mut any = false;
    for (idx, f) in family.iter().enumerate() {
        let norm = besov_norm(f, p, units, rule)?;
        if norm.sup_seminorm <= 0.0 || !(norm.value > 0.0) {
            continue;
        }
        any = true;
        let np = norm.value.powf(p);
        let values = mu.derivative_powers(f, p)?;
        let m = mu.weighted_sum(|k| mu.w1[k] + mu.w2[k], &values) / np;
        if m > report.m {
            report.m = m;
            report.argmax = Some(idx);
        }
        report.m1 = report.m1.max(mu.weighted_sum(|k| mu.w1[k], &values) / np);
        report.m2 = report.m2.max(mu.weighted_sum(|k| mu.w2[k], &values) / np);

        for (component, weights) in [(1, &mu.w1), (2, &mu.w2)] {
            let cn = component_besov_norm(f, component, p, mu.unit, rule)?;
            if !(cn > 0.0) {
                continue;
            }
            let comp_vals: Vec<f64> = mu
                .points
                .par_iter()
                .map(|z| {
                    let (a, b) = split_value(f.derivative(mu.unit.embed(*z))?, mu.unit);
                    Ok(if component == 1 { a } else { b }.norm().powf(p))
                })
                .collect::<Result<_>>()?;
            let v = mu.weighted_sum(|k| weights[k], &comp_vals) / cn.powf(p);
            if component == 1 {
                report.complex_m1 = report.complex_m1.max(v);
            } else {
                report.complex_m2 = report.complex_m2.max(v);
            }
        }
    }
    if !any {
        return Err(Error::domain("Carleson test family has no nonconstant member"));
    }
    Ok(report)
}

/// Options of [`essential_norm_bounds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialNormOptions {
    pub p: f64,
    pub alpha: f64,
    pub a_grid: AGrid,
    pub n_cut: usize,
    /// Calibrate the upper-bound constant against `Φ = id`; otherwise it is 1.
    pub calibrate: bool,
    /// A constant from an earlier calibration; takes precedence.
    #[serde(default)]
    pub c_cal: Option<f64>,
}

impl Default for EssentialNormOptions {
    fn default() -> Self {
        Self { p: 2.0, alpha: 0.0, a_grid: AGrid::default(), n_cut: DEFAULT_N_CUT, calibrate: true, c_cal: None }
    }
}

/// Result of [`essential_norm_bounds`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssentialNormReport {
    pub lower: f64,
    pub upper: f64,
    pub c_cal: f64,
    /// `K(a)` for every grid point, ring by ring.
    pub kernel: Vec<f64>,
    /// Max of `K` over each ring.
    pub ring_max: Vec<[f64; 2]>,
    pub decreasing: bool,
    /// `‖C_Φ R_n σ_a‖_{B_p}` over the outermost ring.
    pub tail_norms: Vec<f64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > -1.0) {
        return Err(Error::domain(format!("alpha must exceed -1, got {alpha}")));
    }
    Ok(())
}

/// `K(a) = ∫ (1-|a|^2)^(2+α) / |1 - conj(a) q|^(2(2+α)) dμ_p(q)`, with the
/// measure built on a rule focused at the Φ-preimages of `a`.
pub fn kernel_mass(phi: &SelfMap, p: f64, alpha: f64, a: Complex64, rule: &DiskRule) -> Result<f64> {
    check_alpha(alpha)?;
    let e = 2.0 + alpha;
    let focused = rule.focused(&phi.focus_points(&conjugate_closure(&[a])));
    let mut values = Vec::new();
    for level in focused.levels() {
        let mu = pullback_measure(phi, p, level, phi.unit)?;
        let terms: Vec<f64> = mu
            .points
            .iter()
            .zip(&mu.w1)
            .map(|(q, w)| w * (1.0 - a.norm_sqr()).powf(e) / (1.0 - a.conj() * q).norm().powf(2.0 * e))
            .collect();
        values.push(pairwise_sum(&terms));
    }
    Ok(focused.combine_levels(&values))
}

/// Upper-bound constant: the smallest `C >= 1` with
/// `2^p C K_id >= max_a ‖R_n σ_a‖ / ‖σ_a‖` on the outer ring for `Φ = id`,
/// a direct estimate of `‖I - (finite rank)‖` on the test family.
pub fn calibration_constant(
    unit: ImaginaryUnit,
    opts: &EssentialNormOptions,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<f64> {
    let id = SelfMap::verified(PowerSeries::identity(), unit)?;
    let ring = opts.a_grid.outer_ring();
    let mut lower_id = 0.0f64;
    let mut est = 0.0f64;
    for a in &ring {
        lower_id = lower_id.max(kernel_mass(&id, opts.p, opts.alpha, *a, rule)?);
        let aq = unit.embed(*a);
        let tail = besov_norm(&mobius_remainder(aq, opts.n_cut)?, opts.p, units, rule)?.value;
        let full = besov_norm(&Mobius::new(aq)?, opts.p, units, rule)?.value;
        est = est.max(tail / full);
    }
    let scale = 2f64.powf(opts.p) * lower_id;
    Ok(if scale > 0.0 { (est / scale).max(1.0) } else { 1.0 })
}

/// Essential-norm sandwich `lower <= ‖C_Φ‖_e <= upper`.
pub fn essential_norm_bounds(
    phi: &SelfMap,
    opts: &EssentialNormOptions,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<EssentialNormReport> {
    check_alpha(opts.alpha)?;
    opts.a_grid.validate()?;
    let points = opts.a_grid.points();
    let kernel: Vec<f64> = points
        .iter()
        .map(|a| kernel_mass(phi, opts.p, opts.alpha, *a, rule))
        .collect::<Result<_>>()?;
    let c_cal = match opts.c_cal {
        Some(c) => c,
        None if opts.calibrate => calibration_constant(phi.unit, opts, units, rule)?,
        None => 1.0,
    };
    let mut tail_norms = Vec::new();
    for a in opts.a_grid.outer_ring() {
        let r = mobius_remainder(phi.unit.embed(a), opts.n_cut)?;
        tail_norms.push(besov_norm(&Composition::new(&r, phi), opts.p, units, rule)?.value);
    }
    Ok(summarize_essential(&opts.a_grid, opts.p, kernel, c_cal, tail_norms))
}

fn summarize_essential(a_grid: &AGrid, p: f64, kernel: Vec<f64>, c_cal: f64, tail_norms: Vec<f64>) -> EssentialNormReport {
    let rings = a_grid.ring_max(&kernel);
    // normalizes a -0.0 from extrapolating an all-zero kernel
    let lower = *rings.last().expect("validated") + 0.0;
    let decreasing = rings.windows(2).all(|w| w[1] <= w[0]);
    EssentialNormReport {
        lower,
        upper: 2f64.powf(p) * c_cal * lower,
        c_cal,
        ring_max: a_grid.rhos.iter().zip(&rings).map(|(r, v)| [*r, *v]).collect(),
        kernel,
        decreasing,
        tail_norms,
    }
}

/// One row of the per-a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ATrace {
    pub abs_a: f64,
    pub angle: f64,
    pub besov_of_composition: f64,
    pub bloch_of_composition: f64,
    pub kernel: f64,
}

/// Everything known about `C_Φ` on one a-grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorReport {
    pub p: f64,
    pub alpha: f64,
    pub bounded_functional: f64,
    pub boundedness: BoundednessReport,
    pub compact_verdict: Verdict,
    pub compactness: CompactnessReport,
    pub essnorm_lower: f64,
    pub essnorm_upper: f64,
    pub essential: EssentialNormReport,
    /// Carleson constant of the pullback measure over the σ_a family.
    pub carleson_m: f64,
    pub traces: Vec<ATrace>,
}

impl OperatorReport {
    /// `|a|,angle,besov_of_composition,bloch_of_composition,K(a)` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("|a|,angle,besov_of_composition,bloch_of_composition,K(a)\n");
        for t in &self.traces {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.abs_a, t.angle, t.besov_of_composition, t.bloch_of_composition, t.kernel
            ));
        }
        out
    }
}

/// Full analysis of `C_Φ`: boundedness, compactness, essential norm and
/// the Carleson constant of `μ_p`, sharing one a-grid.
pub fn analyze_operator(
    phi: &SelfMap,
    opts: &EssentialNormOptions,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<OperatorReport> {
    let grid = &opts.a_grid;
    grid.validate()?;
    let points = grid.points();
    let sigmas: Vec<Mobius> = points.iter().map(|a| Mobius::on_slice(*a, phi.unit)).collect::<Result<_>>()?;
    let besov: Vec<f64> = sigmas
        .iter()
        .map(|s| Ok(besov_norm_of_composition(s, phi, opts.p, units, rule)?.value))
        .collect::<Result<_>>()?;
    let bloch = bloch_per_a(phi, &points, units, rule)?;
    let essential = essential_norm_bounds(phi, opts, units, rule)?;
    let mu = pullback_measure(phi, opts.p, &rule.without_extrapolation(), phi.unit)?;
    let carleson = if mu.points.is_empty() {
        0.0
    } else {
        carleson_constant(&mu, opts.p, &sigmas, units, rule)?.m
    };
    let traces = points
        .iter()
        .enumerate()
        .map(|(k, a)| ATrace {
            abs_a: a.norm(),
            angle: a.arg(),
            besov_of_composition: besov[k],
            bloch_of_composition: bloch[k],
            kernel: essential.kernel[k],
        })
        .collect();
    let boundedness = summarize_boundedness(grid, &points, besov);
    let compactness = summarize_compactness(phi, grid, &bloch);
    Ok(OperatorReport {
        p: opts.p,
        alpha: opts.alpha,
        bounded_functional: boundedness.value,
        boundedness,
        compact_verdict: compactness.verdict,
        compactness,
        essnorm_lower: essential.lower,
        essnorm_upper: essential.upper,
        essential,
        carleson_m: carleson,
        traces,
    })
}

/// `∫ |(1 - |z|^2) (C_Φ f)'|^p dλ` on the verified slice only.
pub fn composition_seminorm_on_slice<F: SliceFunction + ?Sized>(
    f: &F,
    phi: &SelfMap,
    p: f64,
    rule: &DiskRule,
) -> Result<f64> {
    let comp = Composition::new(f, phi);
    let rule = rule.focused(&comp.hotspots());
    let mut values = Vec::new();
    for level in rule.levels() {
        let d: Vec<f64> = level
            .nodes()
            .par_iter()
            .map(|n| Ok(comp.derivative_on_slice(n.z)?.norm()))
            .collect::<Result<_>>()?;
        let terms: Vec<f64> = level
            .nodes()
            .iter()
            .zip(&d)
            .map(|(n, d)| n.weight * (1.0 - n.z.norm_sqr()).powf(p - 2.0) * d.powf(p))
            .collect();
        values.push(pairwise_sum(&terms));
    }
    Ok(rule.combine_levels(&values))
}

/// Integral check used by tests: `∫ g dλ` on the verified slice.
pub fn invariant_integral<G: Fn(Complex64) -> f64 + Sync>(g: G, phi: &SelfMap, rule: &DiskRule) -> Result<f64> {
    integrate_invariant(g, rule, phi.unit)
}
