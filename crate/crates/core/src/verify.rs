//! The `verify` suite: every cross-module invariant as a named check with a
//! numeric margin (positive means the check holds with room to spare).

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::norms::{
    besov_norm, besov_norm_from_field, bmo_norm, bmo_norm_ball, coeff_bound_with_norm, default_bmo_centers,
    lipschitz_check, lipschitz_pairs, DerivativeField,
};
use crate::operators::{
    calibration_constant, compactness_diagnostic, composition_seminorm_on_slice, essential_norm_bounds,
    carleson_constant, pullback_measure, boundedness_functional, AGrid, DiscreteMeasure, EssentialNormOptions,
    SelfMap, Verdict,
};
use crate::quadrature::{bergman_metric, build_rule, DiskRule, RuleSpec};
use crate::quaternion::{sample_sphere, ImaginaryUnit, Quaternion};
use crate::series::{
    eval, extend, mobius, mobius_degree_for, slice_derivative, split, star_mul, star_reciprocal, Mobius, PowerSeries,
    SliceFunction,
};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub detail: String,
}

impl Check {
    fn from_margin(name: &str, margin: f64, detail: String) -> Self {
        Self { name: name.to_string(), passed: margin >= 0.0, margin, detail }
    }

    fn from_flag(name: &str, passed: bool, margin: f64, detail: String) -> Self {
        Self { name: name.to_string(), passed, margin, detail }
    }

    /// `"<name>: PASS margin 3.1e-7"`.
    pub fn line(&self) -> String {
        format!("{}: {} margin {:.1e}", self.name, if self.passed { "PASS" } else { "FAIL" }, self.margin)
    }
}

/// Results of a full run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> String {
        self.checks.iter().map(|c| c.line() + "\n").collect()
    }
}

fn random_quaternion(rng: &mut ChaCha8Rng, scale: f64) -> Quaternion {
    Quaternion::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

fn random_series(rng: &mut ChaCha8Rng, degree: usize, scale: f64) -> PowerSeries {
    PowerSeries::new((0..=degree).map(|_| random_quaternion(rng, scale)).collect())
}

fn random_unit(rng: &mut ChaCha8Rng) -> ImaginaryUnit {
    loop {
        if let Ok(u) = ImaginaryUnit::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) {
            return u;
        }
    }
}

fn random_ball_point(rng: &mut ChaCha8Rng, radius: f64) -> Quaternion {
    loop {
        let q = random_quaternion(rng, radius);
        if q.norm() < radius {
            return q;
        }
    }
}

fn random_disk_point(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    Complex64::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
}

fn default_rule() -> Result<DiskRule> {
    DiskRule::from_spec(RuleSpec::default())
}

/// Besov norm of `q` against `(1/(p-1))^(1/p)`, 0.5% tolerance.
pub fn besov_anchor(seed: u64) -> Result<Check> {
    let rule = default_rule()?;
    let units = sample_sphere(32, seed)?;
    let mut worst: f64 = 0.0;
    for p in [1.5, 2.0, 3.0] {
        let v = besov_norm(&PowerSeries::identity(), p, &units, &rule)?.value;
        let exact = (1.0 / (p - 1.0)).powf(1.0 / p);
        worst = worst.max((v - exact).abs() / exact);
    }
    Ok(Check::from_margin("Besov norm of q against closed form", 0.005 - worst, format!("max relative error {worst:.2e}")))
}

/// Sup-over-units norm versus every single-slice norm: `N_i^p <= N^p <= 2^p N_i^p`.
pub fn norm_equivalence(seed: u64, count: usize) -> Result<Check> {
    let rule = default_rule()?;
    let units = sample_sphere(32, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2a);
    let mut margin = f64::INFINITY;
    for _ in 0..count {
        let f = random_series(&mut rng, 8, 1.0);
        let field = DerivativeField::new(&f, &rule)?;
        for p in [1.5, 2.0, 3.0] {
            let rep = besov_norm_from_field(&f, &field, p, &units, true)?;
            let full = rep.value.powf(p);
            for e in rep.per_slice.iter().take(units.len()) {
                let single = (rep.constant_term + e.seminorm.max(0.0).powf(1.0 / p)).powf(p);
                let lo = (full - single) / full;
                let hi = (2f64.powf(p) * single - full) / full;
                margin = margin.min(lo).min(hi);
            }
        }
    }
    Ok(Check::from_margin(
        "Besov norm equivalence across slices",
        margin + 1e-6,
        format!("{count} series, smallest relative slack {margin:.2e}"),
    ))
}

/// `f * f^{-*} = 1` through degree 8.
pub fn star_reciprocal_residual(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x31);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut coeffs: Vec<Quaternion> = (0..=8).map(|_| random_quaternion(&mut rng, 0.25)).collect();
        let a0 = random_quaternion(&mut rng, 1.0);
        let target = rng.gen_range(0.5..2.0);
        coeffs[0] = if a0.norm() > 1e-3 { a0.scale(target / a0.norm()) } else { Quaternion::real(target) };
        let f = PowerSeries::new(coeffs);
        let prod = star_mul(&f, &star_reciprocal(&f, 8)?);
        for n in 0..=8 {
            let expected = if n == 0 { Quaternion::ONE } else { Quaternion::ZERO };
            worst = worst.max((prod.coeff(n) - expected).norm());
        }
    }
    Ok(Check::from_margin("Star reciprocal residual", 1e-10 - worst, format!("max residual {worst:.2e}")))
}

/// `(f * g)(q) = f(q) g(f(q)^{-1} q f(q))` wherever `f(q) != 0`.
pub fn star_pointwise(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x32);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = random_series(&mut rng, 8, 1.0);
        let g = random_series(&mut rng, 8, 1.0);
        let q = random_ball_point(&mut rng, 0.9);
        let fq = eval(&f, q)?;
        if fq.norm() < 1e-6 {
            continue;
        }
        let lhs = eval(&star_mul(&f, &g), q)?;
        let rhs = fq * eval(&g, fq.inv()? * q * fq)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(Check::from_margin("Star product as a pointwise product", 1e-10 - worst, format!("max deviation {worst:.2e}")))
}

/// Extension of slice values reproduces evaluation.
pub fn representation_round_trip(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x41);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = random_series(&mut rng, 8, 1.0);
        let i = random_unit(&mut rng);
        let q = random_ball_point(&mut rng, 0.95);
        let ext = extend(|z| eval(&f, i.embed(z)), i, q)?;
        worst = worst.max((ext - eval(&f, q)?).norm());
    }
    Ok(Check::from_margin("Representation formula round trip", 1e-11 - worst, format!("max deviation {worst:.2e}")))
}

/// `σ_a(a) = 0`, `σ_a(0) = a`, and `σ_a ∘ σ_a = id` on the slice of `a`.
pub fn mobius_properties(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51);
    let (mut fixed, mut invol): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let a = random_ball_point(&mut rng, 0.95);
        let m = Mobius::new(a)?;
        fixed = fixed.max(m.value(a)?.norm()).max((m.value(Quaternion::ZERO)? - a).norm());
        let s = mobius(a, mobius_degree_for(a, 1e-16))?.allow_tail(true);
        fixed = fixed.max((s.coeff(0) - a).norm());
        for _ in 0..4 {
            let z = random_disk_point(&mut rng, 0.999);
            invol = invol.max((m.complex_value(m.complex_value(z)) - z).norm());
        }
    }
    let margin = (1e-10 - fixed).min(1e-9 - invol);
    Ok(Check::from_margin(
        "Moebius map zero, base point and involution",
        margin,
        format!("max |σ_a(a)|, |σ_a(0)-a| {fixed:.2e}; involution {invol:.2e}"),
    ))
}

fn identity_map() -> Result<SelfMap> {
    SelfMap::verified(PowerSeries::identity(), ImaginaryUnit::I)
}

fn half_map() -> Result<SelfMap> {
    SelfMap::verified(PowerSeries::monomial(1, Quaternion::real(0.5)), ImaginaryUnit::I)
}

fn constant_map() -> Result<SelfMap> {
    SelfMap::verified(PowerSeries::constant(Quaternion::real(0.3)), ImaginaryUnit::I)
}

fn square_map() -> Result<SelfMap> {
    SelfMap::verified(PowerSeries::monomial(2, Quaternion::ONE), ImaginaryUnit::I)
}

/// Boundedness functional of the identity, `p = 2`, is `max(|a| + 1)`.
pub fn boundedness_identity(seed: u64) -> Result<Check> {
    let rule = default_rule()?;
    let units = sample_sphere(8, seed)?;
    let rep = boundedness_functional(&identity_map()?, 2.0, &AGrid::default(), &units, &rule)?;
    let rel = (rep.value - 2.0).abs() / 2.0;
    Ok(Check::from_margin(
        "Boundedness functional of the identity",
        0.02 - rel,
        format!("value {:.6}, expected 1.999", rep.value),
    ))
}

/// Verdicts for `q/2`, the identity and a constant, under two seeds.
pub fn compactness_verdicts(seed: u64) -> Result<Check> {
    let rule = default_rule()?;
    let grid = AGrid::default();
    let mut ok = true;
    let mut detail = Vec::new();
    let mut margin = f64::INFINITY;
    for s in [seed, seed.wrapping_add(1)] {
        let units = sample_sphere(8, s)?;
        let half = compactness_diagnostic(&half_map()?, &grid, &units, &rule)?;
        let id = compactness_diagnostic(&identity_map()?, &grid, &units, &rule)?;
        let cst = compactness_diagnostic(&constant_map()?, &grid, &units, &rule)?;
        ok &= half.sup_norm_verdict == Verdict::CompactEvidence
            && half.bloch_verdict == Verdict::CompactEvidence
            && id.verdict == Verdict::NotCompactEvidence
            && cst.verdict == Verdict::CompactEvidence
            && cst.bloch_verdict == Verdict::CompactEvidence;
        let h = &half.bloch_trace;
        margin = margin.min(0.05 - h.last().unwrap()[1] / h[0][1]);
        let t = &id.bloch_trace;
        margin = margin.min(t.iter().map(|v| v[1] / t[0][1] - 0.5).fold(f64::INFINITY, f64::min));
        detail.push(format!("seed {s}: q/2 {:?}, id {:?}, const {:?}", half.verdict, id.verdict, cst.verdict));
    }
    Ok(Check::from_flag("Compactness verdicts", ok && margin >= 0.0, margin, detail.join("; ")))
}

/// Sandwich shape: ordering, decay for `q/2`, persistence for the identity.
pub fn essential_norm_shape(seed: u64) -> Result<Check> {
    let rule = default_rule()?;
    let units = sample_sphere(4, seed)?;
    let base = EssentialNormOptions::default();
    let c_cal = calibration_constant(ImaginaryUnit::I, &base, &units, &rule)?;
    let opts = EssentialNormOptions { c_cal: Some(c_cal), ..base };
    let mut margin = f64::INFINITY;
    let mut ok = true;
    for (name, phi) in [("half", half_map()?), ("identity", identity_map()?), ("square", square_map()?), ("constant", constant_map()?)] {
        let rep = essential_norm_bounds(&phi, &opts, &units, &rule)?;
        margin = margin.min(rep.upper - rep.lower);
        match name {
            "half" => {
                ok &= rep.decreasing;
                margin = margin.min(0.05 - rep.upper).min(0.05 - rep.lower);
            }
            "identity" => {
                margin = margin.min(rep.ring_max.iter().map(|v| v[1] - 0.1).fold(f64::INFINITY, f64::min));
            }
            _ => {}
        }
    }
    Ok(Check::from_flag("Essential norm sandwich", ok && margin >= 0.0, margin, format!("calibration constant {c_cal:.3}")))
}

/// `w2 = 0` gives `M2 = 0` exactly and `M = M1`.
pub fn carleson_split(seed: u64) -> Result<Check> {
    let rule = build_rule(48, 48, 0.999)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x91);
    let n = 40;
    let points: Vec<Complex64> = (0..n).map(|_| random_disk_point(&mut rng, 0.95)).collect();
    let w1: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mu = DiscreteMeasure::new(points, w1, vec![0.0; n], ImaginaryUnit::I)?;
    let family: Vec<PowerSeries> = (0..5).map(|_| random_series(&mut rng, 6, 1.0)).collect();
    let rep = carleson_constant(&mu, 2.0, &family, &[ImaginaryUnit::I], &rule)?;
    let dev = (rep.m - rep.m1).abs();
    let ok = rep.m2 == 0.0 && rep.complex_m2 == 0.0 && dev <= 1e-12;
    Ok(Check::from_flag("Carleson component split", ok, 1e-12 - dev, format!("M {:.6}, M1 {:.6}, M2 {}", rep.m, rep.m1, rep.m2)))
}

/// Lipschitz constant of `σ_0.9` under doubling of the pair count.
pub fn lipschitz_stability(seed: u64) -> Result<Check> {
    let rule = default_rule()?;
    let f = Mobius::new(Quaternion::real(0.9))?;
    let norm = besov_norm(&f, 2.0, &[ImaginaryUnit::I], &rule)?.value;
    let a = lipschitz_check(&f, 2.0, ImaginaryUnit::I, &lipschitz_pairs(1000, seed), norm)?.max_ratio;
    let b = lipschitz_check(&f, 2.0, ImaginaryUnit::I, &lipschitz_pairs(2000, seed), norm)?.max_ratio;
    let rel = (a - b).abs() / a.max(b);
    Ok(Check::from_margin("Lipschitz constant stability", 0.05 - rel, format!("{a:.6} vs {b:.6}")))
}

/// Coefficient constant over `σ_a`, `a = 0.1 .. 0.9`, under doubling of
/// the family size.
pub fn coefficient_stability(seed: u64) -> Result<Check> {
    let rule = default_rule()?;
    let units = sample_sphere(4, seed)?;
    let family_sup = |m: usize| -> Result<f64> {
        let mut sup: f64 = 0.0;
        for k in 0..m {
            let a = Quaternion::real(0.1 + 0.8 * k as f64 / (m - 1) as f64);
            let series = mobius(a, mobius_degree_for(a, 1e-17))?.allow_tail(true);
            let norm = besov_norm(&Mobius::new(a)?, 2.0, &units, &rule)?.value;
            sup = sup.max(coeff_bound_with_norm(&series, 2.0, norm)?.sup_n);
        }
        Ok(sup)
    };
    let (a, b) = (family_sup(9)?, family_sup(17)?);
    let rel = (a - b).abs() / a.max(b);
    Ok(Check::from_margin("Coefficient bound stability", 0.05 - rel, format!("{a:.6} vs {b:.6}")))
}

/// Bergman metric symmetry and triangle inequality on random triples.
pub fn bergman_triangle(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa1);
    let mut margin = f64::INFINITY;
    for _ in 0..10_000 {
        let (a, b, c) = (random_disk_point(&mut rng, 0.999), random_disk_point(&mut rng, 0.999), random_disk_point(&mut rng, 0.999));
        let ab = bergman_metric(a, b)?;
        let slack = bergman_metric(a, c)? + bergman_metric(c, b)? - ab;
        let sym = 1e-12 - (ab - bergman_metric(b, a)?).abs();
        margin = margin.min(slack + 1e-12).min(sym);
    }
    Ok(Check::from_margin("Bergman metric triangle inequality", margin, "10000 random triples".into()))
}

/// `|f_l'| <= |f'|` and `|f'|^p <= 2^max(0,p-1) (|f1'|^p + |f2'|^p)`.
pub fn splitting_bounds(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1);
    let nodes = build_rule(24, 24, 0.999)?;
    let mut margin = f64::INFINITY;
    for _ in 0..5 {
        let f = random_series(&mut rng, 8, 1.0);
        let df = slice_derivative(&f);
        let unit = random_unit(&mut rng);
        let pair = split(&df, unit);
        for n in nodes.nodes() {
            let d = f.derivative(unit.embed(n.z))?.norm();
            let (d1, d2) = (pair.f1.eval(n.z).norm(), pair.f2.eval(n.z).norm());
            for p in [1.5f64, 2.0, 3.0] {
                let scale = d.powf(p).max(1e-300);
                margin = margin.min((d.powf(p) - d1.powf(p).max(d2.powf(p))) / scale + 1e-12);
                let k = 2f64.powf((p - 1.0).max(0.0));
                margin = margin.min((k * (d1.powf(p) + d2.powf(p)) - d.powf(p)) / scale + 1e-12);
            }
        }
    }
    Ok(Check::from_margin("Splitting bounds for the slice derivative", margin, "5 series, 576 nodes".into()))
}

/// `‖f‖_BMO(B_i)^p <= ‖f‖_BMO(ball)^p <= 2^p ‖f‖_BMO(B_i)^p`.
pub fn bmo_slices(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1);
    let rule = build_rule(24, 24, 0.99)?;
    let centers: Vec<Complex64> = default_bmo_centers(&rule).into_iter().step_by(9).collect();
    let units = sample_sphere(8, seed)?;
    let mut margin = f64::INFINITY;
    for _ in 0..3 {
        let f = random_series(&mut rng, 5, 1.0);
        let ball = bmo_norm_ball(&f, 2.0, 1.0, &units, &rule, &centers)?.powi(2);
        for u in &units {
            let s = bmo_norm(&f, 2.0, 1.0, *u, &rule, &centers)?.value.powi(2);
            margin = margin.min((ball - s) / ball + 1e-12).min((4.0 * s - ball) / ball);
        }
    }
    Ok(Check::from_margin("BMO norm slice independence", margin, format!("{} centers, {} units", centers.len(), units.len())))
}

/// `∫ |f'|^p dμ_p` against the composition seminorm, 1% relative.
pub fn pullback_consistency(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd1);
    let rule = default_rule()?;
    let fine = rule.without_extrapolation();
    let phi = square_map()?;
    let mu = pullback_measure(&phi, 2.0, &fine, ImaginaryUnit::I)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = random_series(&mut rng, 6, 1.0);
        let a = mu.integrate_derivative(&f, 2.0)?;
        let b = composition_seminorm_on_slice(&f, &phi, 2.0, &rule)?;
        worst = worst.max((a - b).abs() / b);
    }
    Ok(Check::from_margin("Pullback measure against composition seminorm", 0.01 - worst, format!("max relative gap {worst:.2e}")))
}

/// Runs every check with the given seed.
pub fn run_suite(seed: u64) -> Result<SuiteReport> {
    type CheckFn = fn(u64) -> Result<Check>;
    let checks: [CheckFn; 16] = [
        besov_anchor,
        |s| norm_equivalence(s, 50),
        star_reciprocal_residual,
        star_pointwise,
        representation_round_trip,
        mobius_properties,
        boundedness_identity,
        compactness_verdicts,
        essential_norm_shape,
        carleson_split,
        lipschitz_stability,
        coefficient_stability,
        bergman_triangle,
        splitting_bounds,
        bmo_slices,
        pullback_consistency,
    ];
    let mut out = Vec::new();
    for c in checks {
        out.push(c(seed)?);
    }
    Ok(SuiteReport { seed, checks: out })
}

/// [`run_suite`] with wall-clock seconds, for callers that care.
pub fn run_suite_timed(seed: u64) -> Result<(SuiteReport, f64)> {
    let start = Instant::now();
    let rep = run_suite(seed)?;
    Ok((rep, start.elapsed().as_secs_f64()))
}
