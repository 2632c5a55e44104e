//! Quadrature on a slice disk `B_i` for the normalized area measure `dA`
//! and the invariant measure `dλ = dA / (1 - |z|^2)^2`, plus the Bergman
//! metric and Bergman disks.
//!
//! All points are slice coordinates `z = x + iy`; the slice itself only
//! matters to the integrand, so rules are shared across slices.
//!
//! The base rule is a tensor product: Gauss-Legendre in a radial variable
//! `t` graded towards the boundary by `1 - r = (1 - r_max)^t`, and the
//! trapezoid rule in angle. Integrands carrying `(1 - |z|^2)^(p-2)` become
//! smooth exponentials in `t`, which keeps the Gauss-Legendre convergence
//! spectral even when `p < 2`.
//!
//! Functions such as `sigma_a` with `|a| -> 1` concentrate on a hyperbolic
//! scale far below the grid spacing. [`DiskRule::focused`] handles them by a
//! partition of unity over Moebius-recentered copies of the base rule, which
//! is exact in exact arithmetic because `dλ` is Moebius invariant.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quaternion::ImaginaryUnit;

/// Default boundary truncation `1 - 1e-4`.
pub const DEFAULT_R_MAX: f64 = 1.0 - 1e-4;

/// Pseudo-hyperbolic distances are clamped here before the logarithm.
const RHO_CLAMP: f64 = 1.0 - 1e-15;

/// Exponent of the partition-of-unity weights of focused rules.
const FOCUS_EXPONENT: i32 = 2;

/// Rule parameters as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub radial: usize,
    pub angular: usize,
    pub r_max: f64,
    #[serde(default)]
    pub extrapolate: bool,
}

impl Default for RuleSpec {
    fn default() -> Self {
        Self { radial: 128, angular: 128, r_max: DEFAULT_R_MAX, extrapolate: true }
    }
}

/// A quadrature node; `weight` is for the normalized area measure `dA`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleNode {
    pub z: Complex64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct TensorLayout {
    radii: Vec<f64>,
    angular: usize,
}

impl TensorLayout {
    fn angle(&self, m: usize) -> f64 {
        2.0 * PI * (m as f64 + 0.5) / self.angular as f64
    }
}

/// Quadrature rule on the slice disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskRule {
    spec: RuleSpec,
    foci: Vec<Complex64>,
    nodes: Vec<RuleNode>,
    layout: Option<TensorLayout>,
    /// Same rule at `r_max` pulled back to `1 - 4 eps` and `1 - 16 eps`,
    /// present when extrapolation is on.
    companions: Vec<DiskRule>,
}

/// Tensor rule with the given radial and angular node counts.
pub fn build_rule(radial: usize, angular: usize, r_max: f64) -> Result<DiskRule> {
    DiskRule::from_spec(RuleSpec { radial, angular, r_max, extrapolate: false })
}

impl DiskRule {
    pub fn from_spec(spec: RuleSpec) -> Result<Self> {
        let mut rule = Self::tensor(spec)?;
        if spec.extrapolate {
            let eps = 1.0 - spec.r_max;
            if 16.0 * eps < 1.0 {
                for factor in [4.0, 16.0] {
                    let s = RuleSpec { r_max: 1.0 - factor * eps, extrapolate: false, ..spec };
                    rule.companions.push(Self::tensor(s)?);
                }
            }
        }
        Ok(rule)
    }

    fn tensor(spec: RuleSpec) -> Result<Self> {
        if spec.radial == 0 || spec.angular == 0 {
            return Err(Error::domain("rule needs at least one radial and one angular node"));
        }
        if !(spec.r_max > 0.0 && spec.r_max < 1.0) {
            return Err(Error::domain(format!("r_max must lie in (0, 1), got {}", spec.r_max)));
        }
        let lambda = -(1.0 - spec.r_max).ln();
        let gl = GaussLegendre::new(NonZeroUsize::new(spec.radial).expect("radial > 0"));
        let mut radial: Vec<(f64, f64)> = gl
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| {
                let t = 0.5 * (x + 1.0);
                let r = -(-lambda * t).exp_m1();
                // dA = r dr dθ / π, dr = λ (1 - r) dt, dt = w/2
                let wr = 0.5 * w * lambda * (1.0 - r) * r * 2.0 / spec.angular as f64;
                (r, wr)
            })
            .collect();
        radial.sort_by(|a, b| a.0.total_cmp(&b.0));
        let layout = TensorLayout { radii: radial.iter().map(|r| r.0).collect(), angular: spec.angular };
        let mut nodes = Vec::with_capacity(spec.radial * spec.angular);
        for &(r, wr) in &radial {
            for m in 0..spec.angular {
                nodes.push(RuleNode { z: Complex64::from_polar(r, layout.angle(m)), weight: wr });
            }
        }
        Ok(Self { spec, foci: Vec::new(), nodes, layout: Some(layout), companions: Vec::new() })
    }

    pub fn spec(&self) -> RuleSpec {
        self.spec
    }

    pub fn r_max(&self) -> f64 {
        self.spec.r_max
    }

    pub fn nodes(&self) -> &[RuleNode] {
        &self.nodes
    }

    pub fn foci(&self) -> &[Complex64] {
        &self.foci
    }

    pub fn extrapolates(&self) -> bool {
        !self.companions.is_empty()
    }

    /// Same rule without the extrapolation companions.
    pub fn without_extrapolation(&self) -> DiskRule {
        DiskRule { companions: Vec::new(), spec: RuleSpec { extrapolate: false, ..self.spec }, ..self.clone() }
    }

    /// The rule followed by its extrapolation companions (finest first).
    pub fn levels(&self) -> Vec<&DiskRule> {
        std::iter::once(self).chain(self.companions.iter()).collect()
    }

    /// Combines one value per level into the boundary-extrapolated value.
    ///
    /// The truncation error of `∫_{|z|<1-ε}` behaves like `C ε^γ` with `γ`
    /// depending on the integrand, so the exponent is estimated from the
    /// three levels (Aitken's delta-squared) before extrapolating.
    pub fn combine_levels(&self, values: &[f64]) -> f64 {
        match values {
            [fine, mid, coarse] => aitken(*fine, *mid, *coarse),
            [v, ..] => *v,
            [] => 0.0,
        }
    }

    /// Partition-of-unity refinement around `foci`.
    ///
    /// The disk is covered by the base frame and one Moebius-recentered copy
    /// per focus; the copy centered at `c` resolves features of hyperbolic
    /// size near `c`. Weights `((1-|c|^2)/|1-conj(c) z|^2)^2`, normalized to
    /// sum to one, split every integrand between frames.
    pub fn focused(&self, foci: &[Complex64]) -> DiskRule {
        let foci: Vec<Complex64> = foci.iter().copied().filter(|c| c.norm() < 1.0).collect();
        if foci.is_empty() {
            return self.clone();
        }
        let base = self.base_tensor();
        let mut nodes = Vec::with_capacity(base.nodes.len() * (foci.len() + 1));
        let centers: Vec<Complex64> = std::iter::once(Complex64::new(0.0, 0.0)).chain(foci.iter().copied()).collect();
        for (k, c) in centers.iter().enumerate() {
            for n in &base.nodes {
                let (z, jac) = if k == 0 {
                    (n.z, 1.0)
                } else {
                    let d = 1.0 - c.conj() * n.z;
                    let dz = (1.0 - c.norm_sqr()) / d.norm_sqr();
                    (disk_automorphism(*c, n.z), dz * dz)
                };
                let share = partition_share(&centers, k, z);
                if share > 0.0 {
                    nodes.push(RuleNode { z, weight: n.weight * jac * share });
                }
            }
        }
        let companions = self.companions.iter().map(|c| c.focused(&foci)).collect();
        DiskRule { spec: self.spec, foci, nodes, layout: None, companions }
    }

    fn base_tensor(&self) -> DiskRule {
        if self.foci.is_empty() {
            self.without_extrapolation()
        } else {
            Self::tensor(RuleSpec { extrapolate: false, ..self.spec }).expect("spec already validated")
        }
    }

    /// Indices of nodes that may lie in the Euclidean disk `|w - center| <= radius`.
    fn candidates(&self, center: Complex64, radius: f64) -> Vec<usize> {
        let Some(layout) = &self.layout else {
            return (0..self.nodes.len()).collect();
        };
        let c = center.norm();
        let lo = c - radius;
        let hi = c + radius;
        let m = layout.angular;
        let mut out = Vec::new();
        let first = layout.radii.partition_point(|r| *r < lo);
        for ri in first..layout.radii.len() {
            let r = layout.radii[ri];
            if r > hi {
                break;
            }
            if c <= radius || r == 0.0 {
                out.extend(ri * m..(ri + 1) * m);
                continue;
            }
            // half-width of the angular window at radius r
            let cosv = ((r * r + c * c - radius * radius) / (2.0 * r * c)).clamp(-1.0, 1.0);
            let half = cosv.acos() + 2.0 * PI / m as f64;
            if half >= PI {
                out.extend(ri * m..(ri + 1) * m);
                continue;
            }
            let arg = center.arg();
            let step = 2.0 * PI / m as f64;
            let start = ((arg - half) / step - 0.5).floor() as i64;
            let end = ((arg + half) / step - 0.5).ceil() as i64;
            for k in start..=end {
                let mm = k.rem_euclid(m as i64) as usize;
                out.push(ri * m + mm);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn aitken(fine: f64, mid: f64, coarse: f64) -> f64 {
    let d1 = fine - mid;
    let d2 = mid - coarse;
    let scale = fine.abs().max(1e-300);
    if d1.abs() <= 1e-14 * scale || d2 == 0.0 {
        return fine;
    }
    let ratio = d1 / d2;
    if !(ratio > 0.0 && ratio < 0.95) {
        return fine;
    }
    fine + d1 * ratio / (1.0 - ratio)
}

fn partition_share(centers: &[Complex64], k: usize, z: Complex64) -> f64 {
    let g = |c: &Complex64| {
        let d = (1.0 - c.conj() * z).norm_sqr();
        ((1.0 - c.norm_sqr()) / d).powi(FOCUS_EXPONENT)
    };
    let total: f64 = centers.iter().map(g).sum();
    g(&centers[k]) / total
}

/// The involutive disk automorphism `w -> (c - w)/(1 - conj(c) w)`.
#[inline]
pub fn disk_automorphism(c: Complex64, w: Complex64) -> Complex64 {
    (c - w) / (1.0 - c.conj() * w)
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, not on how they were computed.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `∫ g dλ` over the slice disk: `sum w g(z) / (1 - |z|^2)^2`, extrapolated
/// in the truncation radius when the rule asks for it.
pub fn integrate_invariant<G>(g: G, rule: &DiskRule, _unit: ImaginaryUnit) -> Result<f64>
where
    G: Fn(Complex64) -> f64 + Sync,
{
    let mut per_level = Vec::new();
    for level in rule.levels() {
        let terms: Vec<f64> = level
            .nodes
            .par_iter()
            .map(|n| {
                let v = g(n.z);
                if !v.is_finite() {
                    return Err(Error::diagnostic(format!(
                        "integrand is {v} at node z = {} + {}i",
                        n.z.re, n.z.im
                    )));
                }
                let s = 1.0 - n.z.norm_sqr();
                Ok(n.weight * v / (s * s))
            })
            .collect::<Result<_>>()?;
        per_level.push(pairwise_sum(&terms));
    }
    Ok(rule.combine_levels(&per_level))
}

/// `∫ g dA` with the same node set (no extrapolation).
pub fn integrate_area<G>(g: G, rule: &DiskRule) -> f64
where
    G: Fn(Complex64) -> f64 + Sync,
{
    let terms: Vec<f64> = rule.nodes.par_iter().map(|n| n.weight * g(n.z)).collect();
    pairwise_sum(&terms)
}

/// Pseudo-hyperbolic distance `|z - w| / |1 - conj(z) w|`.
#[inline]
pub fn pseudo_hyperbolic(z: Complex64, w: Complex64) -> f64 {
    (z - w).norm() / (1.0 - z.conj() * w).norm()
}

/// Bergman metric `(1/2) log((1 + ρ)/(1 - ρ))`.
pub fn bergman_metric(z: Complex64, w: Complex64) -> Result<f64> {
    let rho = pseudo_hyperbolic(z, w);
    if !(rho <= 1.0 + 1e-12) {
        return Err(Error::diagnostic(format!(
            "pseudo-hyperbolic distance {rho} exceeds 1 for z = {z}, w = {w}"
        )));
    }
    Ok(rho.min(RHO_CLAMP).atanh())
}

/// `Δ_i(z, r) = { w : β_i(z, w) < r }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BergmanDisk {
    pub center: Complex64,
    pub radius: f64,
    pub unit: ImaginaryUnit,
}

impl BergmanDisk {
    pub fn contains(&self, w: Complex64) -> bool {
        matches!(bergman_metric(self.center, w), Ok(b) if b < self.radius)
    }

    /// Euclidean center and radius of the disk.
    pub fn euclidean(&self) -> (Complex64, f64) {
        let s = self.radius.tanh();
        let z = self.center;
        let den = 1.0 - s * s * z.norm_sqr();
        (z * ((1.0 - s * s) / den), s * (1.0 - z.norm_sqr()) / den)
    }
}

/// Rule nodes inside a Bergman disk with their area weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskCapture {
    pub nodes: Vec<RuleNode>,
    pub area: f64,
}

/// The rule nodes inside `Δ(z, r)`; fails when none are.
pub fn bergman_disk_nodes(disk: &BergmanDisk, rule: &DiskRule) -> Result<DiskCapture> {
    if !(disk.radius > 0.0) {
        return Err(Error::domain("Bergman disk radius must be positive"));
    }
    let (ec, er) = disk.euclidean();
    let nodes: Vec<RuleNode> = rule
        .candidates(ec, er * (1.0 + 1e-9) + 1e-15)
        .into_iter()
        .map(|k| rule.nodes[k])
        .filter(|n| disk.contains(n.z))
        .collect();
    if nodes.is_empty() {
        return Err(Error::diagnostic(format!(
            "disk unresolved; refine rule (center {}, radius {})",
            disk.center, disk.radius
        )));
    }
    let area = nodes.iter().map(|n| n.weight).sum();
    Ok(DiskCapture { nodes, area })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_rule() -> DiskRule {
        DiskRule::from_spec(RuleSpec { extrapolate: false, ..RuleSpec::default() }).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_rule(8, 8, 1.0).is_err());
        assert!(build_rule(8, 8, 0.0).is_err());
        assert!(build_rule(0, 8, 0.5).is_err());
    }

    #[test]
    fn weights_sum_to_truncated_area() {
        let rule = default_rule();
        let total: f64 = rule.nodes().iter().map(|n| n.weight).sum();
        assert!((total - rule.r_max().powi(2)).abs() < 1e-10);
        assert!(rule.nodes().iter().all(|n| n.z.norm() <= rule.r_max()));
    }

    #[test]
    fn area_examples() {
        let rule = build_rule(128, 128, 0.999).unwrap();
        assert!((integrate_area(|_| 1.0, &rule) - 0.998001).abs() < 1e-10);
        let re = integrate_area(|z| z.re, &rule);
        let im = integrate_area(|z| z.im, &rule);
        assert!(re.abs() < 1e-14 && im.abs() < 1e-14);
        // 2 ∫ r^3 dr over [0, r_max]
        let exact = 0.999f64.powi(4) / 2.0;
        assert!((integrate_area(|z| z.norm_sqr(), &rule) - exact).abs() < 1e-12);
    }

    #[test]
    fn invariant_examples() {
        let rule = default_rule();
        let w = |z: Complex64| (1.0 - z.norm_sqr()).powi(2);
        let v = integrate_invariant(w, &rule, ImaginaryUnit::I).unwrap();
        assert!((v - rule.r_max().powi(2)).abs() < 1e-10);

        // closed form 2∫(1-r^2)^(p-2) r dr = 1/(p-1)
        let extrap = DiskRule::from_spec(RuleSpec::default()).unwrap();
        for (p, exact) in [(2.0, 1.0), (3.0, 0.5), (1.5, 2.0)] {
            let v = integrate_invariant(|z| (1.0 - z.norm_sqr()).powf(p), &extrap, ImaginaryUnit::I).unwrap();
            // residual of the extrapolation is O(eps^(3/2)) for p < 2
            assert!((v - exact).abs() < 5e-5 * exact, "p={p}: {v}");
        }
    }

    #[test]
    fn non_finite_integrand_names_node() {
        let rule = build_rule(4, 4, 0.5).unwrap();
        let err = integrate_invariant(|_| f64::NAN, &rule, ImaginaryUnit::I).unwrap_err();
        assert!(err.to_string().contains("node z ="));
    }

    #[test]
    fn radial_refinement_converges_fast() {
        let r_max = 0.99;
        // closed form of ∫ (1-|z|^2)^3 |z|^2 dλ over |z| < r_max
        let u = r_max * r_max;
        let exact = u * u / 2.0 - u * u * u / 3.0;
        let g = |z: Complex64| (1.0 - z.norm_sqr()).powi(3) * z.norm_sqr();
        let err = |n: usize| {
            let rule = build_rule(n, 2 * n, r_max).unwrap();
            (integrate_invariant(g, &rule, ImaginaryUnit::I).unwrap() - exact).abs()
        };
        let (e1, e2) = (err(3), err(6));
        assert!(e1 > 1e-13);
        assert!(e2 * 4.0 <= e1, "{e1} -> {e2}");
    }

    #[test]
    fn bergman_metric_examples() {
        let z = Complex64::new(0.3, -0.2);
        assert_eq!(bergman_metric(z, z).unwrap(), 0.0);
        let v = bergman_metric(Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)).unwrap();
        assert!((v - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((v - 0.549306).abs() < 1e-6);
    }

    #[test]
    fn bergman_metric_symmetric_and_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pt = || loop {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if z.norm() < 0.999 {
                return z;
            }
        };
        for _ in 0..10_000 {
            let (a, b, c) = (pt(), pt(), pt());
            let ab = bergman_metric(a, b).unwrap();
            assert!((ab - bergman_metric(b, a).unwrap()).abs() < 1e-12);
            let ac = bergman_metric(a, c).unwrap();
            let cb = bergman_metric(c, b).unwrap();
            assert!(ab <= ac + cb + 1e-12);
        }
    }

    #[test]
    fn mobius_invariance_of_invariant_measure() {
        let rule = default_rule();
        let bump = |z: Complex64| {
            let t = z.norm_sqr() / 0.81;
            if t < 1.0 {
                (1.0 - t).powi(4)
            } else {
                0.0
            }
        };
        let a = Complex64::new(0.5, 0.0);
        let direct = integrate_invariant(bump, &rule, ImaginaryUnit::I).unwrap();
        let moved = integrate_invariant(|z| bump(disk_automorphism(a, z)), &rule, ImaginaryUnit::I).unwrap();
        assert!((direct - moved).abs() < 5e-3 * direct, "{direct} vs {moved}");
    }

    #[test]
    fn focused_rule_resolves_boundary_kernel() {
        // ∫ (1-|a|^2)^2 / |1 - conj(a) z|^4 dA = 1 (reproducing kernel)
        let a = Complex64::from_polar(0.999, 0.7);
        let kernel = |z: Complex64| (1.0 - a.norm_sqr()).powi(2) / (1.0 - a.conj() * z).norm_sqr().powi(2);
        let base = DiskRule::from_spec(RuleSpec::default()).unwrap();
        let rule = base.focused(&[a, a.conj()]);
        let mut levels = Vec::new();
        for l in rule.levels() {
            levels.push(integrate_area(kernel, l));
        }
        let v = rule.combine_levels(&levels);
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        let total: f64 = rule.nodes().iter().map(|n| n.weight).sum();
        assert!((total - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bergman_disk_examples() {
        let rule = build_rule(64, 64, 0.99).unwrap();
        let big = BergmanDisk { center: Complex64::new(0.0, 0.0), radius: 5.0, unit: ImaginaryUnit::I };
        let cap = bergman_disk_nodes(&big, &rule).unwrap();
        assert_eq!(cap.nodes.len(), rule.nodes().len());

        let r = 0.8;
        let d = BergmanDisk { center: Complex64::new(0.0, 0.0), radius: r, unit: ImaginaryUnit::I };
        let cap = bergman_disk_nodes(&d, &build_rule(256, 128, 0.99).unwrap()).unwrap();
        assert!((cap.area - r.tanh().powi(2)).abs() < 0.02, "{}", cap.area);

        let d = BergmanDisk { center: Complex64::new(0.9, 0.0), radius: 0.3, unit: ImaginaryUnit::I };
        let cap = bergman_disk_nodes(&d, &rule).unwrap();
        assert!(cap.nodes.iter().all(|n| bergman_metric(d.center, n.z).unwrap() < 0.3));

        let tiny = BergmanDisk { center: Complex64::new(0.01, 0.0), radius: 1e-9, unit: ImaginaryUnit::I };
        let err = bergman_disk_nodes(&tiny, &rule).unwrap_err();
        assert!(err.to_string().contains("disk unresolved"));
    }

    #[test]
    fn windowed_lookup_matches_full_scan() {
        let rule = build_rule(40, 48, 0.99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let c = Complex64::from_polar(rng.gen_range(0.0..0.97), rng.gen_range(-PI..PI));
            let d = BergmanDisk { center: c, radius: rng.gen_range(0.05..2.0), unit: ImaginaryUnit::I };
            let full: Vec<usize> = (0..rule.nodes().len()).filter(|&k| d.contains(rule.nodes()[k].z)).collect();
            let (ec, er) = d.euclidean();
            let fast: Vec<usize> = rule
                .candidates(ec, er * (1.0 + 1e-9) + 1e-15)
                .into_iter()
                .filter(|&k| d.contains(rule.nodes()[k].z))
                .collect();
            assert_eq!(full, fast);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-12);
    }
}
