//! Besov, Bloch and BMO norms, the oscillation `Λ_r`, invariant `L^p`
//! norms, and the empirical Lipschitz and coefficient constants.
//!
//! Sup over the sphere of units. For a slice-regular `f` with reference
//! unit `i0`, the representation formula gives on every slice `C(I)`
//!
//! ```text
//! |f'(x + I y)|^2 = A(z) + B(z) . I
//! ```
//!
//! with `A`, `B` built from `f'(x ± i0 y)`. The integrand is therefore
//! linear in `I` before the power `p/2`, so one pass over the rule serves
//! every unit, the Bloch sup over units is exact (`A + |B|`), and the Besov
//! sup is refined by projected gradient ascent on the sphere.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{
    bergman_disk_nodes, bergman_metric, build_rule, disk_automorphism, integrate_invariant, pairwise_sum,
    BergmanDisk, DiskRule, RuleSpec,
};
use crate::quaternion::{sample_sphere, ImaginaryUnit, Quaternion};
use crate::series::{PowerSeries, SliceFunction};

/// Default number of sampled units for sups over the sphere.
pub const DEFAULT_SPHERE: usize = 32;

/// BMO centers default to rule nodes inside this radius.
pub const BMO_CENTER_RADIUS: f64 = 0.95;

/// Relative change tolerated between `m` and `2m` sphere samples.
const SPHERE_TOLERANCE: f64 = 0.01;

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("exponent p must exceed 1, got {p}")));
    }
    Ok(())
}

fn vec3(q: Quaternion) -> [f64; 3] {
    [q.x, q.y, q.z]
}

fn dot3(a: [f64; 3], u: ImaginaryUnit) -> f64 {
    let c = u.components();
    a[0] * c[0] + a[1] * c[1] + a[2] * c[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// `(A, B)` with `|g(x + I y)|^2 = A + B . I` from `u = g(x + i0 y)`,
/// `v = g(x - i0 y)`.
pub(crate) fn quadratic_form(u: Quaternion, v: Quaternion, i0: ImaginaryUnit) -> (f64, [f64; 3]) {
    let s = u + v;
    let d = u - v;
    let e = i0.as_quaternion() * d;
    let m = e * s.conj();
    let v3 = vec3(m);
    ((s.norm_sqr() + d.norm_sqr()) / 4.0, [v3[0] / 2.0, v3[1] / 2.0, v3[2] / 2.0])
}

/// `A + B . I` clamped at zero against rounding.
#[inline]
fn modulus_sqr(a: f64, b: [f64; 3], unit: ImaginaryUnit) -> f64 {
    (a + dot3(b, unit)).max(0.0)
}

/// `(A, B)` for the derivative of `f` at slice point `z`.
pub(crate) fn derivative_form<F: SliceFunction + ?Sized>(f: &F, z: Complex64) -> Result<(f64, [f64; 3])> {
    let i0 = f.reference_unit();
    let u = f.derivative(i0.embed(z))?;
    let v = f.derivative(i0.embed(z.conj()))?;
    if !(u.is_finite() && v.is_finite()) {
        return Err(Error::diagnostic(format!("integrand is non-finite at node z = {} + {}i", z.re, z.im)));
    }
    Ok(quadratic_form(u, v, i0))
}

struct FieldLevel {
    z: Vec<Complex64>,
    weight: Vec<f64>,
    a: Vec<f64>,
    b: Vec<[f64; 3]>,
    /// `sum w A` and `sum w B`: for `p = 2` the integral is affine in `I`.
    sum_a: f64,
    sum_b: [f64; 3],
}

impl FieldLevel {
    fn new(z: Vec<Complex64>, weight: Vec<f64>, a: Vec<f64>, b: Vec<[f64; 3]>) -> Self {
        let wa: Vec<f64> = weight.iter().zip(&a).map(|(w, a)| w * a).collect();
        let mut sum_b = [0.0; 3];
        for (c, s) in sum_b.iter_mut().enumerate() {
            let wb: Vec<f64> = weight.iter().zip(&b).map(|(w, b)| w * b[c]).collect();
            *s = pairwise_sum(&wb);
        }
        Self { sum_a: pairwise_sum(&wa), sum_b, z, weight, a, b }
    }
}

/// `|f'|^2` on every node of a rule and its extrapolation companions, in
/// the `A + B . I` form.
pub struct DerivativeField {
    rule: DiskRule,
    levels: Vec<FieldLevel>,
}

impl DerivativeField {
    /// Samples `f'` on `rule`, refocused on the hotspots of `f`.
    pub fn new<F: SliceFunction + ?Sized>(f: &F, rule: &DiskRule) -> Result<Self> {
        let rule = rule.focused(&f.hotspots());
        let mut levels = Vec::new();
        for level in rule.levels() {
            let forms: Vec<(f64, [f64; 3])> =
                level.nodes().par_iter().map(|n| derivative_form(f, n.z)).collect::<Result<_>>()?;
            let (a, b) = forms.into_iter().unzip();
            levels.push(FieldLevel::new(
                level.nodes().iter().map(|n| n.z).collect(),
                level.nodes().iter().map(|n| n.weight).collect(),
                a,
                b,
            ));
        }
        Ok(Self { rule, levels })
    }

    /// The (possibly focused) rule actually used.
    pub fn rule(&self) -> &DiskRule {
        &self.rule
    }

    fn level_integral(&self, level: usize, unit: ImaginaryUnit, p: f64) -> f64 {
        let l = &self.levels[level];
        if p == 2.0 {
            return (l.sum_a + dot3(l.sum_b, unit)).max(0.0);
        }
        let terms: Vec<f64> = (0..l.z.len())
            .map(|k| {
                let s = 1.0 - l.z[k].norm_sqr();
                l.weight[k] * s.powf(p - 2.0) * modulus_sqr(l.a[k], l.b[k], unit).powf(p / 2.0)
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// `∫ ((1 - |z|^2) |f'(z)|)^p dλ` on the slice `C(unit)`.
    pub fn seminorm(&self, unit: ImaginaryUnit, p: f64) -> f64 {
        let values: Vec<f64> = (0..self.levels.len()).map(|l| self.level_integral(l, unit, p)).collect();
        self.rule.combine_levels(&values)
    }

    /// Gradient in `I` of the finest-level integral.
    fn gradient(&self, unit: ImaginaryUnit, p: f64) -> [f64; 3] {
        let l = &self.levels[0];
        let mut g = [0.0; 3];
        for k in 0..l.z.len() {
            let m = modulus_sqr(l.a[k], l.b[k], unit);
            if m <= 0.0 {
                continue;
            }
            let s = 1.0 - l.z[k].norm_sqr();
            let c = l.weight[k] * s.powf(p - 2.0) * (p / 2.0) * m.powf(p / 2.0 - 1.0);
            for (gi, bi) in g.iter_mut().zip(l.b[k]) {
                *gi += c * bi;
            }
        }
        g
    }

    /// Local maximizer of the seminorm over the sphere, started from `start`.
    pub fn ascend(&self, start: ImaginaryUnit, p: f64) -> ImaginaryUnit {
        if p == 2.0 {
            let b = self.levels[0].sum_b;
            return ImaginaryUnit::new(b[0], b[1], b[2]).unwrap_or(start);
        }
        let mut unit = start;
        let mut value = self.level_integral(0, unit, p);
        let mut step = 0.5;
        for _ in 0..60 {
            let g = self.gradient(unit, p);
            let c = unit.components();
            let radial = g[0] * c[0] + g[1] * c[1] + g[2] * c[2];
            let t = [g[0] - radial * c[0], g[1] - radial * c[1], g[2] - radial * c[2]];
            let tn = norm3(t);
            if tn <= 1e-14 * (1.0 + value.abs()) {
                break;
            }
            let mut moved = false;
            while step > 1e-10 {
                let cand = ImaginaryUnit::new(c[0] + step * t[0] / tn, c[1] + step * t[1] / tn, c[2] + step * t[2] / tn);
                if let Ok(cand) = cand {
                    let v = self.level_integral(0, cand, p);
                    if v > value {
                        unit = cand;
                        value = v;
                        moved = true;
                        step *= 1.5;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        unit
    }

    /// Exact sup over all units of `(1 - |z|^2) |f'(z)|` on the finest level,
    /// with the maximizing node.
    fn bloch_sup(&self) -> (f64, Complex64) {
        let l = &self.levels[0];
        let mut best = (0.0, Complex64::new(0.0, 0.0));
        for k in 0..l.z.len() {
            let v = (1.0 - l.z[k].norm_sqr()) * (l.a[k] + norm3(l.b[k])).max(0.0).sqrt();
            if v > best.0 {
                best = (v, l.z[k]);
            }
        }
        best
    }

    fn top_bloch_nodes(&self, count: usize) -> Vec<Complex64> {
        let l = &self.levels[0];
        let mut idx: Vec<(f64, usize)> = (0..l.z.len())
            .map(|k| ((1.0 - l.z[k].norm_sqr()) * (l.a[k] + norm3(l.b[k])).max(0.0).sqrt(), k))
            .collect();
        idx.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        idx.into_iter().take(count).map(|(_, k)| l.z[k]).collect()
    }
}

/// One row of the per-slice table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceEntry {
    pub unit: ImaginaryUnit,
    pub seminorm: f64,
}

/// Result of a norm computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub value: f64,
    pub p: Option<f64>,
    /// `|f(0)|`.
    pub constant_term: f64,
    /// Max of the per-slice table.
    pub sup_seminorm: f64,
    pub sup_unit: ImaginaryUnit,
    pub per_slice: Vec<SliceEntry>,
    pub rule: RuleSpec,
    pub foci: usize,
    pub diagnostics: Vec<String>,
}

impl NormReport {
    /// `unit_x,unit_y,unit_z,seminorm` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("unit_x,unit_y,unit_z,seminorm\n");
        for e in &self.per_slice {
            let c = e.unit.components();
            out.push_str(&format!("{},{},{},{}\n", c[0], c[1], c[2], e.seminorm));
        }
        out
    }
}

/// `∫_{B_i} ((1 - |z|^2) |f'(z)|)^p dλ`.
pub fn besov_seminorm_slice<F: SliceFunction + ?Sized>(
    f: &F,
    p: f64,
    i: ImaginaryUnit,
    rule: &DiskRule,
) -> Result<f64> {
    check_p(p)?;
    Ok(DerivativeField::new(f, rule)?.seminorm(i, p))
}

/// `|f(0)| + (max over units of the slice seminorm)^(1/p)`.
///
/// The table lists every requested unit; when gradient ascent on the
/// sphere finds a larger value than the best sample, that unit is appended.
pub fn besov_norm<F: SliceFunction + ?Sized>(
    f: &F,
    p: f64,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<NormReport> {
    check_p(p)?;
    let field = DerivativeField::new(f, rule)?;
    besov_norm_from_field(f, &field, p, units, true)
}

/// [`besov_norm`] restricted to exactly the given units.
pub fn besov_norm_on_units<F: SliceFunction + ?Sized>(
    f: &F,
    p: f64,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<NormReport> {
    check_p(p)?;
    let field = DerivativeField::new(f, rule)?;
    besov_norm_from_field(f, &field, p, units, false)
}

pub(crate) fn besov_norm_from_field<F: SliceFunction + ?Sized>(
    f: &F,
    field: &DerivativeField,
    p: f64,
    units: &[ImaginaryUnit],
    refine: bool,
) -> Result<NormReport> {
    if units.is_empty() {
        return Err(Error::domain("besov_norm needs at least one unit"));
    }
    let mut per_slice: Vec<SliceEntry> =
        units.par_iter().map(|u| SliceEntry { unit: *u, seminorm: field.seminorm(*u, p) }).collect();
    if refine {
        let best = per_slice.iter().max_by(|a, b| a.seminorm.total_cmp(&b.seminorm)).expect("non-empty");
        let unit = field.ascend(best.unit, p);
        let seminorm = field.seminorm(unit, p);
        if seminorm > best.seminorm {
            per_slice.push(SliceEntry { unit, seminorm });
        }
    }
    let best = *per_slice.iter().max_by(|a, b| a.seminorm.total_cmp(&b.seminorm)).expect("non-empty");
    let constant_term = f.value(Quaternion::ZERO)?.norm();
    let mut diagnostics = Vec::new();
    if !field.rule().extrapolates() {
        diagnostics.push(format!("no boundary extrapolation (r_max = {})", field.rule().r_max()));
    }
    Ok(NormReport {
        value: constant_term + best.seminorm.max(0.0).powf(1.0 / p),
        p: Some(p),
        constant_term,
        sup_seminorm: best.seminorm,
        sup_unit: best.unit,
        per_slice,
        rule: field.rule().spec(),
        foci: field.rule().foci().len(),
        diagnostics,
    })
}

/// [`besov_norm`] over `sample_sphere(m, seed)`, checked against `2m`
/// samples; the `2m` result is returned and a diagnostic is attached when
/// the two sups differ by more than 1%.
pub fn besov_norm_sphere<F: SliceFunction + ?Sized>(
    f: &F,
    p: f64,
    m: usize,
    seed: u64,
    rule: &DiskRule,
) -> Result<NormReport> {
    check_p(p)?;
    let field = DerivativeField::new(f, rule)?;
    let coarse = besov_norm_from_field(f, &field, p, &sample_sphere(m, seed)?, true)?;
    let mut fine = besov_norm_from_field(f, &field, p, &sample_sphere(2 * m, seed)?, true)?;
    let (a, b) = (coarse.sup_seminorm, fine.sup_seminorm);
    if (a - b).abs() > SPHERE_TOLERANCE * a.abs().max(b.abs()) {
        fine.diagnostics.push(format!(
            "sphere sampling not converged: sup seminorm {a} with {m} units, {b} with {} units",
            2 * m
        ));
    }
    Ok(fine)
}

/// Result of [`bloch_norm`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochReport {
    pub value: f64,
    pub constant_term: f64,
    /// `sup (1 - |z|^2) |f'(z)|` over all slices.
    pub seminorm: f64,
    pub argmax: [f64; 2],
    /// Seminorm restricted to each requested unit, at the grid nodes.
    pub per_slice: Vec<SliceEntry>,
}

/// `|f(0)| + sup (1 - |z|^2) |f'(z)|`.
///
/// The sup over units is exact at every point; the sup over the disk is a
/// max over grid nodes followed by golden-section refinement around the
/// best few nodes.
pub fn bloch_norm<F: SliceFunction + ?Sized>(f: &F, units: &[ImaginaryUnit], grid: &DiskRule) -> Result<BlochReport> {
    let field = DerivativeField::new(f, &grid.without_extrapolation())?;
    bloch_from_field(f, &field, units)
}

pub(crate) fn bloch_from_field<F: SliceFunction + ?Sized>(
    f: &F,
    field: &DerivativeField,
    units: &[ImaginaryUnit],
) -> Result<BlochReport> {
    let r_max = field.rule().r_max();
    let (mut sup, mut arg) = field.bloch_sup();
    let objective = |z: Complex64| -> Result<f64> {
        if z.norm() > r_max {
            return Ok(f64::NEG_INFINITY);
        }
        let (a, b) = derivative_form(f, z)?;
        Ok((1.0 - z.norm_sqr()) * (a + norm3(b)).max(0.0).sqrt())
    };
    for start in field.top_bloch_nodes(4) {
        let (v, z) = refine_sup(&objective, start, r_max)?;
        if v > sup {
            sup = v;
            arg = z;
        }
    }
    let l = &field.levels[0];
    let per_slice = units
        .iter()
        .map(|u| {
            let s = (0..l.z.len())
                .map(|k| (1.0 - l.z[k].norm_sqr()) * modulus_sqr(l.a[k], l.b[k], *u).sqrt())
                .fold(0.0, f64::max);
            SliceEntry { unit: *u, seminorm: s }
        })
        .collect();
    let constant_term = f.value(Quaternion::ZERO)?.norm();
    Ok(BlochReport { value: constant_term + sup, constant_term, seminorm: sup, argmax: [arg.re, arg.im], per_slice })
}

fn golden_max<G: Fn(f64) -> Result<f64>>(g: G, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut g1 = g(x1)?;
    let mut g2 = g(x2)?;
    for _ in 0..80 {
        if hi - lo < 1e-12 {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + phi * (hi - lo);
            g2 = g(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - phi * (hi - lo);
            g1 = g(x1)?;
        }
    }
    Ok(if g1 >= g2 { (g1, x1) } else { (g2, x2) })
}

/// Alternating radial and angular golden-section search around `start`.
fn refine_sup<G: Fn(Complex64) -> Result<f64>>(g: &G, start: Complex64, r_max: f64) -> Result<(f64, Complex64)> {
    let mut z = start;
    let mut best = g(z)?;
    let mut h = 0.05 * (1.0 - z.norm_sqr()).max(1e-6);
    for _ in 0..4 {
        let (r, th) = (z.norm(), z.arg());
        let (v, r2) = golden_max(|s| g(Complex64::from_polar(s, th)), (r - h).max(0.0), (r + h).min(r_max))?;
        if v > best {
            best = v;
            z = Complex64::from_polar(r2, th);
        }
        let r = z.norm();
        if r > 1e-12 {
            let dth = (h / r).min(std::f64::consts::PI);
            let (v, t2) = golden_max(|t| g(Complex64::from_polar(r, t)), th - dth, th + dth)?;
            if v > best {
                best = v;
                z = Complex64::from_polar(r, t2);
            }
        }
        h *= 0.5;
    }
    Ok((best, z))
}

/// Quadrature for Bergman disks `Δ(z, r)`: a disk rule of Euclidean radius
/// `tanh r` moved to `z` by the automorphism `σ_z`, which maps `|w| < tanh r`
/// onto `Δ(z, r)` exactly.
#[derive(Debug, Clone)]
pub struct BergmanDiskRule {
    radius: f64,
    base: DiskRule,
}

impl BergmanDiskRule {
    pub fn new(radius: f64, radial: usize, angular: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("Bergman radius must be positive, got {radius}")));
        }
        let base = build_rule(radial, angular, radius.tanh().min(1.0 - 1e-15))?;
        Ok(Self { radius, base })
    }

    pub fn with_default_size(radius: f64) -> Result<Self> {
        Self::new(radius, 24, 32)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Points and `dA` weights covering `Δ(z, r)`.
    pub fn nodes(&self, z: Complex64) -> Vec<(Complex64, f64)> {
        let s = 1.0 - z.norm_sqr();
        self.base
            .nodes()
            .iter()
            .map(|n| {
                let d = (1.0 - z.conj() * n.z).norm_sqr();
                let jac = s / d;
                (disk_automorphism(z, n.z), n.weight * jac * jac)
            })
            .collect()
    }
}

/// `((1/2π) ∫_{Δ(z,r)} |f - f*|^p dA)^(1/p)` with `f*` the Δ-average of `f`,
/// for `f` restricted to the slice `C(i)`.
pub fn local_oscillation<F: SliceFunction + ?Sized>(
    f: &F,
    p: f64,
    i: ImaginaryUnit,
    z: Complex64,
    disk: &BergmanDiskRule,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("exponent p must be at least 1, got {p}")));
    }
    let nodes = disk.nodes(z);
    let values: Vec<Quaternion> = nodes.iter().map(|(w, _)| f.value(i.embed(*w))).collect::<Result<_>>()?;
    let area: f64 = pairwise_sum(&nodes.iter().map(|n| n.1).collect::<Vec<_>>());
    let mut mean = Quaternion::ZERO;
    for c in 0..4 {
        let comp: Vec<f64> = values.iter().zip(&nodes).map(|(v, n)| v.to_array()[c] * n.1).collect();
        let m = pairwise_sum(&comp) / area;
        match c {
            0 => mean.w = m,
            1 => mean.x = m,
            2 => mean.y = m,
            _ => mean.z = m,
        }
    }
    let osc: Vec<f64> = values.iter().zip(&nodes).map(|(v, n)| n.1 * (*v - mean).norm().powf(p)).collect();
    Ok((pairwise_sum(&osc) / (2.0 * std::f64::consts::PI)).powf(1.0 / p))
}

/// Result of [`bmo_norm`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmoReport {
    pub value: f64,
    pub argmax: [f64; 2],
    pub centers: usize,
}

/// Default BMO centers: the rule nodes with `|z| <= 0.95`.
pub fn default_bmo_centers(rule: &DiskRule) -> Vec<Complex64> {
    rule.nodes().iter().map(|n| n.z).filter(|z| z.norm() <= BMO_CENTER_RADIUS).collect()
}

/// `sup` over `centers` of [`local_oscillation`] on the slice `C(i)`.
///
/// Every Δ must contain at least one node of `rule`; otherwise the disk is
/// reported unresolved.
pub fn bmo_norm<F: SliceFunction + ?Sized>(
    f: &F,
    p: f64,
    r: f64,
    i: ImaginaryUnit,
    rule: &DiskRule,
    centers: &[Complex64],
) -> Result<BmoReport> {
    check_p(p)?;
    if centers.is_empty() {
        return Err(Error::domain("bmo_norm needs at least one center"));
    }
    let disk = BergmanDiskRule::with_default_size(r)?;
    let values: Vec<f64> = centers
        .par_iter()
        .map(|z| {
            bergman_disk_nodes(&BergmanDisk { center: *z, radius: r, unit: i }, rule)?;
            local_oscillation(f, p, i, *z, &disk)
        })
        .collect::<Result<_>>()?;
    let (k, v) = values.iter().enumerate().fold((0, 0.0), |acc, (k, v)| if *v > acc.1 { (k, *v) } else { acc });
    Ok(BmoReport { value: v, argmax: [centers[k].re, centers[k].im], centers: centers.len() })
}

/// BMO norm on the whole ball: max of [`bmo_norm`] over `units`.
pub fn bmo_norm_ball<F: SliceFunction + ?Sized>(
    f: &F,
    p: f64,
    r: f64,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
    centers: &[Complex64],
) -> Result<f64> {
    let mut best = 0.0f64;
    for u in units {
        best = best.max(bmo_norm(f, p, r, *u, rule, centers)?.value);
    }
    Ok(best)
}

/// Probe net of `Δ(z, r)`: `probe / 8` rings up to the rim, `probe` angles
/// each, pushed forward by `σ_z`. Doubling `probe` refines the net, so
/// [`oscillation_lambda`] is nondecreasing along doublings.
pub fn probe_net(r: f64, z: Complex64, probe: usize) -> Vec<Complex64> {
    let rings = (probe / 8).max(1);
    let rim = r.tanh();
    let mut out = Vec::with_capacity(rings * probe);
    for k in 1..=rings {
        let rho = rim * k as f64 / rings as f64;
        for m in 0..probe {
            let w = Complex64::from_polar(rho, 2.0 * std::f64::consts::PI * m as f64 / probe as f64);
            out.push(disk_automorphism(z, w));
        }
    }
    out
}

/// `Λ_r(f)(z) = sup { |f(z) - f(w)| : w ∈ Δ(z, r) }` over a probe net.
pub fn oscillation_lambda<F: SliceFunction + ?Sized>(
    f: &F,
    r: f64,
    i: ImaginaryUnit,
    z: Complex64,
    probe: usize,
) -> Result<f64> {
    if probe < 8 {
        return Err(Error::domain(format!("probe must be at least 8, got {probe}")));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("Bergman radius must be positive, got {r}")));
    }
    let fz = f.value(i.embed(z))?;
    let mut best = 0.0f64;
    for w in probe_net(r, z, probe) {
        best = best.max((f.value(i.embed(w))? - fz).norm());
    }
    Ok(best)
}

/// `(∫_{B_i} |g|^p dλ)^(1/p)`.
pub fn lp_invariant_norm<G>(g: G, p: f64, i: ImaginaryUnit, rule: &DiskRule) -> Result<f64>
where
    G: Fn(Complex64) -> f64 + Sync,
{
    if !(p >= 1.0) {
        return Err(Error::domain(format!("exponent p must be at least 1, got {p}")));
    }
    let v = integrate_invariant(|z| g(z).abs().powf(p), rule, i)?;
    Ok(v.max(0.0).powf(1.0 / p))
}

/// Result of [`lipschitz_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    /// `max |f(q) - f(w)| / (‖f‖ β(q,w)^(1/t))` after refinement.
    pub max_ratio: f64,
    /// The same max over the supplied pairs only.
    pub sampled_ratio: f64,
    pub worst_pair: Option<[[f64; 2]; 2]>,
    pub pairs_used: usize,
    pub skipped: usize,
    pub notes: Vec<String>,
}

/// Random pairs on a slice: `q` at hyperbolic radius uniform in
/// `[0, atanh 0.99]`, `w = σ_q(ζ)` with `|ζ| = tanh s`, `s` uniform in `(0, 3]`.
pub fn lipschitz_pairs(count: usize, seed: u64) -> Vec<(Complex64, Complex64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 2.0 * std::f64::consts::PI;
    let rho_max = 0.99f64.atanh();
    (0..count)
        .map(|_| {
            let q = Complex64::from_polar((rng.gen::<f64>() * rho_max).tanh(), rng.gen::<f64>() * tau);
            let zeta = Complex64::from_polar((rng.gen_range(1e-3..=3.0f64)).tanh(), rng.gen::<f64>() * tau);
            (q, disk_automorphism(q, zeta))
        })
        .collect()
}

/// Empirical Lipschitz constant of `f` on the slice `C(i)` with respect to
/// `β^(1/t)`, `t = p/(p-1)`, normalized by `norm` (the Besov norm of `f`).
///
/// The max over `pairs` is followed by a compass search from the eight
/// best pairs, so the result is stable when the pair set is refined.
pub fn lipschitz_check<F: SliceFunction + ?Sized>(
    f: &F,
    p: f64,
    i: ImaginaryUnit,
    pairs: &[(Complex64, Complex64)],
    norm: f64,
) -> Result<LipschitzReport> {
    check_p(p)?;
    let inv_t = (p - 1.0) / p;
    let ratio = |q: Complex64, w: Complex64| -> Result<Option<f64>> {
        let beta = bergman_metric(q, w)?;
        if beta <= 0.0 {
            return Ok(None);
        }
        let diff = (f.value(i.embed(q))? - f.value(i.embed(w))?).norm();
        if norm <= 0.0 {
            return Ok(Some(if diff > 0.0 { f64::INFINITY } else { 0.0 }));
        }
        Ok(Some(diff / (norm * beta.powf(inv_t))))
    };
    let mut notes = Vec::new();
    let raw: Vec<Option<f64>> = pairs.par_iter().map(|(q, w)| ratio(*q, *w)).collect::<Result<_>>()?;
    let skipped = raw.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        notes.push(format!("{skipped} coincident pairs skipped"));
    }
    let mut ranked: Vec<(f64, usize)> = raw.iter().enumerate().filter_map(|(k, r)| r.map(|v| (v, k))).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let sampled = ranked.first().map(|r| r.0).unwrap_or(0.0);
    let mut best = sampled;
    let mut worst = ranked.first().map(|r| pairs[r.1]);
    if sampled > 0.0 && sampled.is_finite() {
        let refined: Vec<(f64, (Complex64, Complex64))> = ranked
            .par_iter()
            .take(8)
            .map(|(v, k)| compass_pair(&ratio, pairs[*k], *v))
            .collect::<Result<_>>()?;
        for (v, pair) in refined {
            if v > best {
                best = v;
                worst = Some(pair);
            }
        }
    }
    Ok(LipschitzReport {
        max_ratio: best,
        sampled_ratio: sampled,
        worst_pair: worst.map(|(q, w)| [[q.re, q.im], [w.re, w.im]]),
        pairs_used: pairs.len() - skipped,
        skipped,
        notes,
    })
}

const PAIR_RADIUS: f64 = 0.999;

fn compass_pair<R>(ratio: &R, start: (Complex64, Complex64), value: f64) -> Result<(f64, (Complex64, Complex64))>
where
    R: Fn(Complex64, Complex64) -> Result<Option<f64>>,
{
    let (mut q, mut w) = start;
    let mut best = value;
    let mut h = 0.25 * (1.0 - q.norm()).min(1.0 - w.norm()).min((q - w).norm()).max(1e-9);
    let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
    let mut iters = 0;
    while h > 1e-10 && iters < 400 {
        iters += 1;
        let mut improved = false;
        for which in 0..2 {
            for (dx, dy) in dirs {
                let step = Complex64::new(dx * h, dy * h);
                let (nq, nw) = if which == 0 { (q + step, w) } else { (q, w + step) };
                if nq.norm() >= PAIR_RADIUS || nw.norm() >= PAIR_RADIUS {
                    continue;
                }
                if let Some(v) = ratio(nq, nw)? {
                    if v > best {
                        best = v;
                        q = nq;
                        w = nw;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok((best, (q, w)))
}

/// Result of [`coeff_bound_report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoeffBoundReport {
    /// `sup_{n >= 1} n^(1/p) |a_n| / ‖f‖`.
    pub sup_n: f64,
    pub argmax_n: Option<usize>,
    pub norm: f64,
}

/// Empirical coefficient constant against a given Besov norm.
pub fn coeff_bound_with_norm(f: &PowerSeries, p: f64, norm: f64) -> Result<CoeffBoundReport> {
    check_p(p)?;
    let mut sup = 0.0;
    let mut arg = None;
    for (n, a) in f.coeffs().iter().enumerate().skip(1) {
        let v = (n as f64).powf(1.0 / p) * a.norm();
        if v > sup {
            sup = v;
            arg = Some(n);
        }
    }
    if sup == 0.0 {
        return Ok(CoeffBoundReport { sup_n: 0.0, argmax_n: None, norm });
    }
    if !(norm > 0.0) {
        return Err(Error::domain("coefficient bound needs a nonzero Besov norm"));
    }
    Ok(CoeffBoundReport { sup_n: sup / norm, argmax_n: arg, norm })
}

/// `sup_{n >= 1} n^(1/p) |a_n| / ‖f‖_{B_p}` with the norm computed here.
pub fn coeff_bound_report(
    f: &PowerSeries,
    p: f64,
    units: &[ImaginaryUnit],
    rule: &DiskRule,
) -> Result<CoeffBoundReport> {
    check_p(p)?;
    if f.is_constant() {
        return Ok(CoeffBoundReport { sup_n: 0.0, argmax_n: None, norm: f.coeff(0).norm() });
    }
    let norm = besov_norm(f, p, units, rule)?.value;
    if !(norm > 0.0) {
        return Err(Error::domain("coefficient bound needs a nonzero Besov norm"));
    }
    coeff_bound_with_norm(f, p, norm)
}
