//! Acceptance gate. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero on failure.

use std::f64::consts::PI;
use std::time::Instant;

use hyperslice::norms::{besov_norm, coeff_bound_with_norm, lipschitz_check, lipschitz_pairs};
use hyperslice::operators::{
    boundedness_functional, calibration_constant, carleson_constant, compactness_diagnostic, essential_norm_bounds,
    AGrid, DiscreteMeasure, EssentialNormOptions, SelfMap, Verdict,
};
use hyperslice::quadrature::{build_rule, DiskRule, RuleSpec};
use hyperslice::quaternion::sample_sphere;
use hyperslice::series::{extend, mobius, mobius_degree_for, star_mul, star_reciprocal};
use hyperslice::{ImaginaryUnit, Mobius, PowerSeries, Quaternion, SliceFunction};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---- independent oracles ---------------------------------------------------

/// Hamilton product written out component by component.
fn hamilton(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn add(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn dist(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn inverse(a: [f64; 4]) -> [f64; 4] {
    let n = a.iter().map(|x| x * x).sum::<f64>();
    [a[0] / n, -a[1] / n, -a[2] / n, -a[3] / n]
}

/// `sum q^n a_n` by summing explicit powers.
fn power_sum(coeffs: &[[f64; 4]], q: [f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    let mut qn = [1.0, 0.0, 0.0, 0.0];
    for a in coeffs {
        out = add(out, hamilton(qn, *a));
        qn = hamilton(qn, q);
    }
    out
}

/// Cauchy product with coefficients multiplied in order.
fn cauchy_product(a: &[[f64; 4]], b: &[[f64; 4]]) -> Vec<[f64; 4]> {
    let mut out = vec![[0.0; 4]; a.len() + b.len() - 1];
    for (n, x) in a.iter().enumerate() {
        for (m, y) in b.iter().enumerate() {
            out[n + m] = add(out[n + m], hamilton(*x, *y));
        }
    }
    out
}

/// For `p = 2` every slice seminorm is the Dirichlet integral `sum n |a_n|^2`.
fn dirichlet_sum(coeffs: &[[f64; 4]]) -> f64 {
    coeffs.iter().enumerate().map(|(n, a)| n as f64 * a.iter().map(|x| x * x).sum::<f64>()).sum()
}

fn arr(q: Quaternion) -> [f64; 4] {
    q.to_array()
}

// ---- random inputs ---------------------------------------------------------

fn rand_q(rng: &mut ChaCha8Rng, s: f64) -> [f64; 4] {
    [rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s)]
}

fn rand_coeffs(rng: &mut ChaCha8Rng, degree: usize) -> Vec<[f64; 4]> {
    (0..=degree).map(|_| rand_q(rng, 1.0)).collect()
}

fn series(coeffs: &[[f64; 4]]) -> PowerSeries {
    PowerSeries::new(coeffs.iter().map(|c| Quaternion::from(*c)).collect())
}

fn rand_ball(rng: &mut ChaCha8Rng, r: f64) -> [f64; 4] {
    loop {
        let q = rand_q(rng, r);
        if q.iter().map(|x| x * x).sum::<f64>().sqrt() < r {
            return q;
        }
    }
}

fn rand_unit(rng: &mut ChaCha8Rng) -> ImaginaryUnit {
    loop {
        if let Ok(u) = ImaginaryUnit::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) {
            return u;
        }
    }
}

// ---- criteria --------------------------------------------------------------

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn default_rule() -> DiskRule {
    DiskRule::from_spec(RuleSpec::default()).unwrap()
}

fn closed_form_norm() -> Outcome {
    let start = Instant::now();
    let rule = default_rule();
    let units = sample_sphere(32, 1).unwrap();
    let mut worst: f64 = 0.0;
    for p in [1.5, 2.0, 3.0] {
        let v = besov_norm(&PowerSeries::identity(), p, &units, &rule).unwrap().value;
        let exact = (1.0 / (p - 1.0)).powf(1.0 / p);
        worst = worst.max((v - exact).abs() / exact);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 0.005 && secs < 5.0, format!("max relative error {worst:.2e} in {secs:.2}s"))
}

fn norm_equivalence() -> Outcome {
    let start = Instant::now();
    let rule = default_rule();
    let units = sample_sphere(32, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut slack = f64::INFINITY;
    let mut dirichlet_gap: f64 = 0.0;
    for _ in 0..50 {
        let c = rand_coeffs(&mut rng, 8);
        let f = series(&c);
        for p in [1.5, 2.0, 3.0] {
            let rep = besov_norm(&f, p, &units, &rule).unwrap();
            let full = rep.value.powf(p);
            for e in rep.per_slice.iter().take(units.len()) {
                let single = (rep.constant_term + e.seminorm.powf(1.0 / p)).powf(p);
                slack = slack.min((full - single) / full).min((2f64.powf(p) * single - full) / full);
                if p == 2.0 {
                    let exact = dirichlet_sum(&c);
                    dirichlet_gap = dirichlet_gap.max((e.seminorm - exact).abs() / exact);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        slack >= -1e-6 && dirichlet_gap < 1e-4 && secs < 60.0,
        format!("min slack {slack:.2e}, p=2 slice seminorm vs Dirichlet sum {dirichlet_gap:.2e}, {secs:.1}s"),
    )
}

fn star_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut residual: f64 = 0.0;
    for _ in 0..100 {
        let mut c: Vec<[f64; 4]> = (0..=8).map(|_| rand_q(&mut rng, 0.25)).collect();
        let dir = rand_q(&mut rng, 1.0);
        let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let target = rng.gen_range(0.5..2.0);
        c[0] = dir.map(|x| x * target / n);
        let recip = star_reciprocal(&series(&c), 8).unwrap();
        let r: Vec<[f64; 4]> = (0..=8).map(|k| arr(recip.coeff(k))).collect();
        let prod = cauchy_product(&c, &r);
        for (k, x) in prod.iter().take(9).enumerate() {
            let one = if k == 0 { [1.0, 0.0, 0.0, 0.0] } else { [0.0; 4] };
            residual = residual.max(dist(*x, one));
        }
    }
    let mut pointwise: f64 = 0.0;
    for _ in 0..100 {
        let (a, b) = (rand_coeffs(&mut rng, 8), rand_coeffs(&mut rng, 8));
        let q = rand_ball(&mut rng, 0.9);
        let fq = power_sum(&a, q);
        let star = star_mul(&series(&a), &series(&b));
        let lhs = power_sum(&star.coeffs().iter().map(|c| arr(*c)).collect::<Vec<_>>(), q);
        let rhs = hamilton(fq, power_sum(&b, hamilton(hamilton(inverse(fq), q), fq)));
        pointwise = pointwise.max(dist(lhs, rhs));
    }
    outcome(
        residual < 1e-10 && pointwise < 1e-10,
        format!("reciprocal residual {residual:.2e}, pointwise identity {pointwise:.2e}"),
    )
}

fn representation_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c = rand_coeffs(&mut rng, 8);
        let i = rand_unit(&mut rng);
        let q = rand_ball(&mut rng, 0.95);
        let ext = extend(|z| Ok(Quaternion::from(power_sum(&c, arr(i.embed(z))))), i, Quaternion::from(q)).unwrap();
        worst = worst.max(dist(arr(ext), power_sum(&c, q)));
    }
    outcome(worst < 1e-11, format!("max deviation {worst:.2e}"))
}

fn moebius_maps() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (mut base, mut invol): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let a = rand_ball(&mut rng, 0.95);
        let aq = Quaternion::from(a);
        let m = Mobius::new(aq).unwrap();
        base = base.max(m.value(aq).unwrap().norm()).max(dist(arr(m.value(Quaternion::ZERO).unwrap()), a));
        let s = mobius(aq, mobius_degree_for(aq, 1e-16)).unwrap();
        let c: Vec<[f64; 4]> = s.coeffs().iter().map(|c| arr(*c)).collect();
        base = base.max(dist(power_sum(&c, a), [0.0; 4])).max(dist(c[0], a));
        let u = m.slice_unit();
        for _ in 0..4 {
            let z = Complex64::from_polar(0.999 * rng.gen::<f64>().sqrt(), rng.gen_range(-PI..PI));
            let once = m.value(u.embed(z)).unwrap();
            let twice = m.value(once).unwrap();
            invol = invol.max(dist(arr(twice), arr(u.embed(z))));
        }
    }
    outcome(base < 1e-10 && invol < 1e-9, format!("zero and base point {base:.2e}, involution {invol:.2e}"))
}

fn identity_map() -> SelfMap {
    SelfMap::verified(PowerSeries::identity(), ImaginaryUnit::I).unwrap()
}

fn half_map() -> SelfMap {
    SelfMap::verified(PowerSeries::monomial(1, Quaternion::real(0.5)), ImaginaryUnit::I).unwrap()
}

fn constant_map() -> SelfMap {
    SelfMap::verified(PowerSeries::constant(Quaternion::real(0.3)), ImaginaryUnit::I).unwrap()
}

fn boundedness() -> Outcome {
    let rule = default_rule();
    let units = sample_sphere(8, 3).unwrap();
    let grid = AGrid::default();
    let rep = boundedness_functional(&identity_map(), 2.0, &grid, &units, &rule).unwrap();
    // ‖σ_a‖ = |a| + 1 at p = 2: σ_a is a bijection of the disk, so its
    // Dirichlet integral is the normalized area 1.
    let oracle = grid.rhos.iter().fold(0.0f64, |m, r| m.max(r + 1.0));
    let rel = (rep.value - 2.0).abs() / 2.0;
    let oracle_gap = (rep.value - oracle).abs() / oracle;
    outcome(rel < 0.02 && oracle_gap < 1e-3, format!("value {:.6}, closed form {oracle:.6}", rep.value))
}

fn compactness() -> Outcome {
    let rule = default_rule();
    let grid = AGrid::default();
    let mut seen = Vec::new();
    let mut ok = true;
    for seed in [1, 2, 3] {
        let units = sample_sphere(8, seed).unwrap();
        let half = compactness_diagnostic(&half_map(), &grid, &units, &rule).unwrap();
        let id = compactness_diagnostic(&identity_map(), &grid, &units, &rule).unwrap();
        let cst = compactness_diagnostic(&constant_map(), &grid, &units, &rule).unwrap();
        ok &= half.sup_norm_verdict == Verdict::CompactEvidence
            && half.bloch_verdict == Verdict::CompactEvidence
            && id.verdict == Verdict::NotCompactEvidence
            && cst.verdict == Verdict::CompactEvidence;
        seen.push((half.verdict, half.sup_norm_verdict, half.bloch_verdict, id.verdict, cst.verdict));
    }
    let deterministic = seen.windows(2).all(|w| w[0] == w[1]);
    outcome(ok && deterministic, format!("verdicts per seed {seen:?}"))
}

fn essential_norm() -> Outcome {
    let rule = default_rule();
    let units = sample_sphere(4, 5).unwrap();
    let base = EssentialNormOptions::default();
    let c_cal = calibration_constant(ImaginaryUnit::I, &base, &units, &rule).unwrap();
    let opts = EssentialNormOptions { c_cal: Some(c_cal), ..base };
    let square = SelfMap::verified(PowerSeries::monomial(2, Quaternion::ONE), ImaginaryUnit::I).unwrap();
    let mut ordered = true;
    let mut detail = Vec::new();
    let mut shape = true;
    for (name, phi) in [("q/2", half_map()), ("id", identity_map()), ("q^2", square), ("const", constant_map())] {
        let rep = essential_norm_bounds(&phi, &opts, &units, &rule).unwrap();
        ordered &= rep.lower <= rep.upper;
        match name {
            "q/2" => shape &= rep.lower < 0.05 && rep.upper < 0.05 && rep.decreasing,
            "id" => shape &= rep.ring_max.iter().all(|r| r[1] >= 0.1),
            _ => {}
        }
        detail.push(format!("{name} [{:.3e}, {:.3e}]", rep.lower, rep.upper));
    }
    outcome(ordered && shape, detail.join(", "))
}

fn carleson_split() -> Outcome {
    let rule = build_rule(48, 48, 0.999).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let n = 40;
    let points: Vec<Complex64> =
        (0..n).map(|_| Complex64::from_polar(0.95 * rng.gen::<f64>().sqrt(), rng.gen_range(-PI..PI))).collect();
    let w1: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mu = DiscreteMeasure::new(points, w1, vec![0.0; n], ImaginaryUnit::I).unwrap();
    let family: Vec<PowerSeries> = (0..5).map(|_| series(&rand_coeffs(&mut rng, 6))).collect();
    let rep = carleson_constant(&mu, 2.0, &family, &[ImaginaryUnit::I, ImaginaryUnit::J], &rule).unwrap();
    let gap = (rep.m - rep.m1).abs();
    outcome(rep.m2 == 0.0 && gap <= 1e-12, format!("M {:.6}, M1 {:.6}, M2 {}", rep.m, rep.m1, rep.m2))
}

fn stability() -> Outcome {
    let rule = default_rule();
    let f = Mobius::new(Quaternion::real(0.9)).unwrap();
    let norm = besov_norm(&f, 2.0, &[ImaginaryUnit::I], &rule).unwrap().value;
    let lip = |count| lipschitz_check(&f, 2.0, ImaginaryUnit::I, &lipschitz_pairs(count, 9), norm).unwrap().max_ratio;
    let (l1, l2) = (lip(1000), lip(2000));
    let units = sample_sphere(4, 9).unwrap();
    let coeff = |m: usize| {
        (0..m)
            .map(|k| {
                let a = Quaternion::real(0.1 + 0.8 * k as f64 / (m - 1) as f64);
                let s = mobius(a, mobius_degree_for(a, 1e-17)).unwrap().allow_tail(true);
                let norm = besov_norm(&Mobius::new(a).unwrap(), 2.0, &units, &rule).unwrap().value;
                coeff_bound_with_norm(&s, 2.0, norm).unwrap().sup_n
            })
            .fold(0.0f64, f64::max)
    };
    let (c1, c2) = (coeff(9), coeff(17));
    let rl = (l1 - l2).abs() / l1.max(l2);
    let rc = (c1 - c2).abs() / c1.max(c2);
    outcome(rl < 0.05 && rc < 0.05, format!("Lipschitz {l1:.6} vs {l2:.6}, coefficient {c1:.6} vs {c2:.6}"))
}

fn full_suite() -> Outcome {
    let (rep, secs) = hyperslice::verify::run_suite_timed(7).unwrap();
    let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    outcome(rep.passed() && secs < 300.0, format!("{} checks in {secs:.1}s, failing {failed:?}", rep.checks.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("Besov norm of q matches its closed form", closed_form_norm),
        ("sphere norm is equivalent to every slice norm", norm_equivalence),
        ("star reciprocal and star product as pointwise product", star_algebra),
        ("representation formula round trip", representation_formula),
        ("Moebius maps vanish at a, send 0 to a and are involutions", moebius_maps),
        ("boundedness functional of the identity is 2", boundedness),
        ("compactness verdicts", compactness),
        ("essential norm sandwich", essential_norm),
        ("Carleson constant with empty second component", carleson_split),
        ("Lipschitz and coefficient constants are stable", stability),
        ("verify suite passes within five minutes", full_suite),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        if !o.passed {
            failures += 1;
        }
        println!(
            "{} {name}: {} ({:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
