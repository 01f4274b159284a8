//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Set DIDOLOCUS_BLESS=1 to rewrite the golden files under tests/golden/.

use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use didolocus::asymptotics::{
    build_fseries, cl_expansion, isoself_predict, wedge_identity_residuals, BranchKind, FormulaSet, IDENTITY_REL_TOL,
};
use didolocus::cli_io::{fmt_f, section_csv, trajectory_csv};
use didolocus::expmap_conjugate::{
    conjugate_section, first_conjugate, phi_grid, ConjugateOptions, PlanarCurve,
};
use didolocus::geodesic_flow::{heisenberg_position, integrate, LaunchSpec};
use didolocus::locus_classifier::{classify_asymptotic, classify_section, ClassifierOptions, Crossing};
use didolocus::metric_model::{Beta4, DEFAULT_QUADRATURE_ORDER};
use didolocus::stratification::{bad_set_values, circle_roots, horner, ptilde, t_poly, StratTolerances};
use didolocus::{classify, Invariants, MetricModel, Stratum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Criterion 1
const HEIS_TRAJ_TOL: f64 = 1e-8;
const HEIS_CONJ_TOL: f64 = 1e-7;
const HEIS_RUNTIME_S: f64 = 1.0;
// Criterion 2
const RICHARDSON_REL_TOL: f64 = 0.02;
const RICHARDSON_RUNTIME_S: f64 = 30.0;
// Criterion 3
const F4_SPREAD_TOL: f64 = 0.05;
const F4_VALUE_TOL: f64 = 0.05;
const F4_RATIO_TOL: f64 = 0.10;
// Criterion 4
const F5_RATIO_BOUND: f64 = 2.0;
// Criterion 5
const IDENTITY_SETS: usize = 100;
const IDENTITY_GRID: usize = 720;
const IDENTITY_RUNTIME_S: f64 = 5.0;
// Criterion 6
const STRAT_SAMPLES: usize = 1000;
const STRAT_CONSTRUCTED: usize = 200;
const BRUTE_POINTS: usize = 100_000;
/// Grid minima below the worst case |p'|·(half grid spacing)/‖p‖₁ ≤ 4π/N
/// are polished before comparing against COMMON_ROOT_TOL.
const BRUTE_TOL: f64 = 4.0 * PI / BRUTE_POINTS as f64;
const COMMON_ROOT_TOL: f64 = 1e-8;
const RESULTANT_REL_TOL: f64 = 1e-8;
const B5_REL_TOL: f64 = 1e-10;
const STRAT_RUNTIME_S: f64 = 10.0;
// Criterion 7
const SYMBOL_METRICS: usize = 5;
const SYMBOL_LEVEL: f64 = 1e-8;
const SYMBOL_N_PHI: usize = 720;
/// Minimum angular distance (mod π) between cusp angles and roots of P.
const BRANCH_SEPARATION: f64 = 0.15;
const NUMERIC_H: f64 = 0.03;
const NUMERIC_N_PHI: usize = 360;
// Criterion 8
const OFFC_METRICS: usize = 5;
// Criterion 9
const CUSP_SLOPE: f64 = 3.0;
const CUSP_SLOPE_TOL: f64 = 0.2;
const LAMBDA_REL_TOL: f64 = 0.10;
const LAMBDA_H: f64 = 0.01;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn model(inv: &Invariants) -> MetricModel {
    MetricModel::new(inv.reconstruct(), DEFAULT_QUADRATURE_ORDER).expect("quartic jet")
}

fn random_beta4(rng: &mut ChaCha8Rng) -> Beta4 {
    Beta4 {
        l44: round3(rng.gen_range(-1.0..1.0)),
        a44: round3(rng.gen_range(-1.0..1.0)),
        b44: round3(rng.gen_range(-1.0..1.0)),
        c44: round3(rng.gen_range(-1.0..1.0)),
        d44: round3(rng.gen_range(-1.0..1.0)),
    }
}

fn random_invariants(rng: &mut ChaCha8Rng, r2: Complex64) -> Invariants {
    let r1 = Complex64::from_polar(rng.gen_range(0.2..1.0), rng.gen_range(-PI..PI));
    Invariants::from_parts(
        round3(rng.gen_range(-1.0..1.0)),
        Complex64::new(round3(r1.re), round3(r1.im)),
        r2,
        round3(rng.gen_range(0.3..1.5)),
        round3(rng.gen_range(-PI..PI)),
        round3(rng.gen_range(-1.0..1.0)),
        round3(rng.gen_range(-1.0..1.0)),
        round3(rng.gen_range(-1.0..1.0)),
        random_beta4(rng),
    )
}

fn dist_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// GenericOnC germ whose cusp angles and roots of P are pairwise at least
/// BRANCH_SEPARATION apart, so that sections at moderate h are already in
/// the asymptotic regime.
fn separated_generic(rng: &mut ChaCha8Rng) -> Invariants {
    loop {
        let inv = random_invariants(rng, Complex64::new(0.0, 0.0));
        if classify(&inv, &StratTolerances::default()).stratum != Stratum::GenericOnC {
            continue;
        }
        let Ok(pred) = isoself_predict(&inv, 1, FormulaSet::Reconciled) else { continue };
        let a: Vec<f64> = pred.branches.iter().map(|b| b.phi0).collect();
        let ok = (0..a.len()).all(|i| (0..i).all(|j| dist_pi(a[i], a[j]) >= BRANCH_SEPARATION));
        if ok {
            return inv;
        }
    }
}

fn acceptance_metrics() -> Vec<Invariants> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..SYMBOL_METRICS).map(|_| separated_generic(&mut rng)).collect()
}

// ---------------------------------------------------------------- 1

fn heisenberg_trajectory() -> String {
    let m = MetricModel::heisenberg();
    let t = integrate(&m, &LaunchSpec::new(0.7, 0.3, 2.0 * PI * 0.3), false).expect("heisenberg");
    trajectory_csv(&t)
}

fn c1() -> Outcome {
    let t0 = Instant::now();
    let m = MetricModel::heisenberg();
    let opts = ConjugateOptions::default();
    let mut traj_err: f64 = 0.0;
    let mut conj_err: f64 = 0.0;
    for rho in [0.3, 1.0] {
        for phi in [0.0, 0.7, 2.5] {
            let tr = integrate(&m, &LaunchSpec::new(phi, rho, 2.0 * PI * rho), false).expect("integrate");
            for st in &tr.samples {
                let want = heisenberg_position(phi, rho, st.s);
                for (a, b) in st.position().iter().zip(want) {
                    traj_err = traj_err.max((a - b).abs());
                }
            }
            let cp = first_conjugate(&m, phi, rho, &opts).expect("conjugate");
            conj_err = conj_err.max((cp.t_c - 2.0 * PI).abs());
            for (a, b) in cp.point.iter().zip([0.0, 0.0, PI * rho * rho]) {
                conj_err = conj_err.max((a - b).abs());
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    outcome(
        traj_err <= HEIS_TRAJ_TOL && conj_err <= HEIS_CONJ_TOL && dt < HEIS_RUNTIME_S,
        format!("max trajectory error {traj_err:.2e}, conjugate error {conj_err:.2e}, {dt:.2}s"),
    )
}

// ---------------------------------------------------------------- 2

fn c2() -> Outcome {
    let t0 = Instant::now();
    let opts = ConjugateOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for b0 in [0.02, 0.05] {
        let m = MetricModel::from_terms(&[(0, 0, b0)]).expect("constant beta");
        let g: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&rho| (first_conjugate(&m, 0.0, rho, &opts).expect("conjugate").t_c - 2.0 * PI) / (rho * rho))
            .collect();
        // g(ρ) = g₀ + g₁ρ + g₂ρ² + …, ρ halving.
        let r1 = [2.0 * g[1] - g[0], 2.0 * g[2] - g[1]];
        let extrap = (4.0 * r1[1] - r1[0]) / 3.0;
        let want = -6.0 * PI * b0;
        let e = rel(extrap, want);
        pass &= e <= RICHARDSON_REL_TOL;
        parts.push(format!("b0={b0}: {extrap:.6} vs {want:.6} (rel {e:.1e})"));
    }
    let dt = t0.elapsed().as_secs_f64();
    pass &= dt < RICHARDSON_RUNTIME_S;
    outcome(pass, format!("{}, {dt:.2}s", parts.join("; ")))
}

// ---------------------------------------------------------------- 3

fn f4_section(h: f64, n_phi: usize) -> PlanarCurve {
    let m = MetricModel::from_terms(&[(1, 0, 0.3)]).expect("linear beta");
    conjugate_section(&m, PI * h * h, n_phi, &ConjugateOptions::default()).expect("section")
}

fn c3() -> Outcome {
    let want = [0.0, 3.0 * PI * 0.3];
    let scaled = |h: f64| -> Vec<[f64; 2]> {
        f4_section(h, 36).samples.iter().map(|s| [s.x / h.powi(4), s.y / h.powi(4)]).collect()
    };
    let a = scaled(0.05);
    let n = a.len() as f64;
    let mean = [a.iter().map(|p| p[0]).sum::<f64>() / n, a.iter().map(|p| p[1]).sum::<f64>() / n];
    let mnorm = mean[0].hypot(mean[1]);
    let spread = a.iter().map(|p| (p[0] - mean[0]).hypot(p[1] - mean[1])).fold(0.0, f64::max) / mnorm;
    let value = (mean[0] - want[0]).hypot(mean[1] - want[1]) / want[1];
    let b = scaled(0.1);
    // |CL(0.1)| / |CL(0.05)| against 2⁴.
    let ratio = b.iter().zip(&a).map(|(p, q)| 16.0 * p[0].hypot(p[1]) / q[0].hypot(q[1])).sum::<f64>() / n;
    let ratio_err = rel(ratio, 16.0);
    outcome(
        spread <= F4_SPREAD_TOL && value <= F4_VALUE_TOL && ratio_err <= F4_RATIO_TOL,
        format!(
            "CL/h^4 mean ({:.5}, {:.5}) vs (0, {:.5}): spread {spread:.2e}, value err {value:.2e}, h-ratio {ratio:.3} (err {ratio_err:.1e})",
            mean[0], mean[1], want[1]
        ),
    )
}

// ---------------------------------------------------------------- 4

fn c4() -> Outcome {
    let m = MetricModel::from_terms(&[(2, 0, 0.2), (0, 2, -0.2)]).expect("quadratic beta");
    let opts = ConjugateOptions::default();
    let copts = ClassifierOptions::default();
    let mut cusps = Vec::new();
    let mut scaled = Vec::new();
    let mut scaled_printed = Vec::new();
    for h in [0.1, 0.05] {
        let c = PI * h * h;
        let curve = conjugate_section(&m, c, 360, &opts).expect("section");
        cusps.push(classify_section(&curve, None, &copts).map(|r| r.cusps.params.len()).unwrap_or(0));
        let rec = build_fseries(m.invariants(), 1, FormulaSet::Reconciled).expect("series");
        let pri = build_fseries(m.invariants(), 1, FormulaSet::Printed).expect("series");
        let mut r_rec: f64 = 0.0;
        let mut r_pri: f64 = 0.0;
        for s in &curve.samples {
            let a = cl_expansion(&rec, s.phi, h);
            let b = cl_expansion(&pri, s.phi, h);
            r_rec = r_rec.max((s.x - a[0]).hypot(s.y - a[1]));
            r_pri = r_pri.max((s.x - b[0]).hypot(s.y - b[1]));
        }
        scaled.push(r_rec / h.powi(6));
        scaled_printed.push(r_pri / h.powi(6));
    }
    // O(h⁶): residual/h⁶ must not grow as h halves.
    let ratio = scaled[1] / scaled[0];
    let bounded = ratio <= F5_RATIO_BOUND;
    outcome(
        cusps.iter().all(|&k| k == 4) && bounded,
        format!(
            "cusps {cusps:?}; residual/h^6 = {:.3e} (h=0.1), {:.3e} (h=0.05) with the f5 sign-corrected x-component; \
             printed f5 gives {:.3e}, {:.3e} (discrepancy recorded)",
            scaled[0], scaled[1], scaled_printed[0], scaled_printed[1]
        ),
    )
}

// ---------------------------------------------------------------- 5

fn c5() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = phi_grid(IDENTITY_GRID);
    // identity → (sets holding, worst relative residual, factor names seen on failure)
    let mut table: Vec<(String, usize, f64, Vec<String>)> = Vec::new();
    for _ in 0..IDENTITY_SETS {
        let inv = random_invariants(&mut rng, Complex64::new(0.0, 0.0));
        let rows = wedge_identity_residuals(&inv, &grid, FormulaSet::Printed).expect("identities");
        if table.is_empty() {
            table = rows.iter().map(|r| (r.identity.clone(), 0, 0.0, Vec::new())).collect();
        }
        for (t, r) in table.iter_mut().zip(&rows) {
            if r.holds(IDENTITY_REL_TOL) {
                t.1 += 1;
                t.2 = f64::max(t.2, r.relative_residual);
            } else {
                t.3.push(r.factor_name.clone().unwrap_or_else(|| "none".into()));
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    let mut pass = dt < IDENTITY_RUNTIME_S;
    let mut held = Vec::new();
    let mut discrepancies = Vec::new();
    for (name, ok, worst, factors) in &table {
        if *ok == IDENTITY_SETS {
            held.push(format!("{name} [max rel {worst:.1e}]"));
        } else {
            // A systematic violation fails on every set with one named factor.
            let systematic = *ok == 0 && factors.iter().all(|f| f != "none" && *f == factors[0]);
            pass &= systematic;
            discrepancies.push(format!("{name}: {}/{} sets off by factor {}", factors.len(), IDENTITY_SETS, factors[0]));
        }
    }
    outcome(
        pass,
        format!(
            "{} identities hold on {IDENTITY_SETS} sets x {IDENTITY_GRID} points; stated-identity discrepancies: {}; {dt:.2}s\n      holds: {}",
            held.len(),
            discrepancies.join("; "),
            held.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 6

fn poly_norm(p: &[Complex64]) -> f64 {
    p.iter().map(|c| c.norm()).sum()
}

/// Powers z⁰..z⁴ of the brute-force circle points.
fn circle_powers() -> Vec<[Complex64; 5]> {
    (0..BRUTE_POINTS)
        .map(|k| {
            let z = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / BRUTE_POINTS as f64);
            let z2 = z * z;
            [Complex64::new(1.0, 0.0), z, z2, z2 * z, z2 * z2]
        })
        .collect()
}

fn dot(p: &[Complex64], pw: &[Complex64; 5]) -> Complex64 {
    p.iter().zip(pw).map(|(a, b)| a * b).sum()
}

/// min over the circle of max(|p(z)|/‖p‖₁, |t(z)|/‖t‖₁): a grid scan, then
/// golden-section polishing around every grid minimum below BRUTE_TOL.
fn brute_common(p: &[Complex64], t: &[Complex64], circle: &[[Complex64; 5]]) -> f64 {
    let (np, nt) = (poly_norm(p), poly_norm(t));
    let sq: Vec<f64> =
        circle.iter().map(|pw| (dot(p, pw).norm_sqr() / (np * np)).max(dot(t, pw).norm_sqr() / (nt * nt))).collect();
    let n = sq.len();
    let step = 2.0 * PI / n as f64;
    let g = |th: f64| {
        let z = Complex64::from_polar(1.0, th);
        (horner(p, z).norm() / np).max(horner(t, z).norm() / nt)
    };
    let mut best = f64::INFINITY;
    for k in 0..n {
        let v = sq[k];
        best = best.min(v.sqrt());
        if v > BRUTE_TOL * BRUTE_TOL || v > sq[(k + n - 1) % n] || v > sq[(k + 1) % n] {
            continue;
        }
        let (mut a, mut b) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let (x1, x2) = (b - r * (b - a), a + r * (b - a));
            if g(x1) < g(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        best = best.min(g(0.5 * (a + b)));
    }
    best
}

fn resultant_rel(inv: &Invariants) -> f64 {
    let p = ptilde(inv);
    let t = t_poly(inv);
    bad_set_values(inv)[6].magnitude / (poly_norm(&p).powi(3) * poly_norm(&t).powi(4))
}

fn b5_rel(inv: &Invariants) -> f64 {
    bad_set_values(inv)[5].magnitude / (inv.mu.norm() + inv.nu.norm()).powi(6)
}

fn with_mu_nu(mu: Complex64, nu: Complex64, r3: Complex64) -> Invariants {
    Invariants { mu, nu, r3, ..Default::default() }
}

/// μ, ν of a P̃ with a double root at `a` and simple roots at `b` and a
/// third circle point forced by the vanishing z² coefficient.
fn double_root_instance(a: Complex64, b: Complex64, scale: f64) -> (Complex64, Complex64) {
    let c = -a * (a + 2.0 * b) / (2.0 * a + b);
    // Monic (z − a)²(z − b)(z − c) = z⁴ − e₁z³ + e₂z² − e₃z + e₄ with e₂ = 0.
    let e1 = 2.0 * a + b + c;
    let e4 = a * a * b * c;
    let mu = Complex64::from_polar(scale, -e4.arg() / 2.0);
    (mu, -mu * e1)
}

fn c6() -> Outcome {
    let t0 = Instant::now();
    let tol = StratTolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures: Vec<String> = Vec::new();
    let mut fail = |msg: String| {
        if failures.len() < 5 {
            failures.push(msg);
        }
    };
    let circle = circle_powers();
    let unit = |rng: &mut ChaCha8Rng| Complex64::from_polar(1.0, rng.gen_range(-PI..PI));
    let mut doubles = 0;
    let mut b6_hits = 0;
    let mut check = |inv: &Invariants, expect_double: bool, expect_common: bool, fail: &mut dyn FnMut(String)| {
        let rep = circle_roots(&ptilde(inv), &tol).expect("mu != 0");
        let circ: Vec<_> = rep.circle_roots().collect();
        let total: usize = circ.iter().map(|r| r.multiplicity).sum();
        let n_double = circ.iter().filter(|r| r.multiplicity == 2).count();
        if total < 2 {
            fail(format!("fewer than 2 circle roots: mu={} nu={}", inv.mu, inv.nu));
        }
        if n_double >= 2 {
            fail(format!("two distinct double circle roots: mu={} nu={}", inv.mu, inv.nu));
        }
        let has_double = circ.iter().any(|r| r.multiplicity >= 2);
        if has_double {
            doubles += 1;
            if total != 4 {
                fail(format!("double root with {total} circle roots: mu={} nu={}", inv.mu, inv.nu));
            }
        }
        let b5_zero = b5_rel(inv) <= B5_REL_TOL;
        if has_double != b5_zero || has_double != expect_double {
            fail(format!("B5 {:.2e} vs double root {has_double} (expected {expect_double})", b5_rel(inv)));
        }
        let res_zero = resultant_rel(inv) <= RESULTANT_REL_TOL;
        let brute = brute_common(&ptilde(inv), &t_poly(inv), &circle) <= COMMON_ROOT_TOL;
        if res_zero {
            b6_hits += 1;
        }
        if res_zero != brute || res_zero != expect_common {
            fail(format!("B6 resultant {:.2e} vs brute force {brute} (expected {expect_common})", resultant_rel(inv)));
        }
    };
    for _ in 0..STRAT_SAMPLES {
        let mu = Complex64::from_polar(rng.gen_range(0.05..2.0), rng.gen_range(-PI..PI));
        let nu = Complex64::from_polar(rng.gen_range(0.0..3.0), rng.gen_range(-PI..PI));
        let r3 = Complex64::from_polar(rng.gen_range(0.1..2.0), rng.gen_range(-PI..PI));
        check(&with_mu_nu(mu, nu, r3), false, false, &mut fail);
    }
    for _ in 0..STRAT_CONSTRUCTED {
        let (a, b) = (unit(&mut rng), unit(&mut rng));
        let (mu, nu) = double_root_instance(a, b, rng.gen_range(0.2..2.0));
        let r3 = Complex64::from_polar(rng.gen_range(0.1..2.0), rng.gen_range(-PI..PI));
        check(&with_mu_nu(mu, nu, r3), true, false, &mut fail);
        // T(ζ) = r₃ζ³ + r̄₃ = 0 at a circle root ζ of P̃.
        let mu = Complex64::from_polar(rng.gen_range(0.05..2.0), rng.gen_range(-PI..PI));
        let nu = Complex64::from_polar(rng.gen_range(0.0..3.0), rng.gen_range(-PI..PI));
        let zeta = circle_roots(&ptilde(&with_mu_nu(mu, nu, Complex64::new(1.0, 0.0))), &tol)
            .expect("mu != 0")
            .circle_roots()
            .next()
            .expect("at least two circle roots")
            .value;
        let beta = (PI - 3.0 * zeta.arg()) / 2.0;
        let r3 = Complex64::from_polar(rng.gen_range(0.1..2.0), beta);
        check(&with_mu_nu(mu, nu, r3), false, true, &mut fail);
    }
    let dt = t0.elapsed().as_secs_f64();
    let n = STRAT_SAMPLES + 2 * STRAT_CONSTRUCTED;
    outcome(
        failures.is_empty() && dt < STRAT_RUNTIME_S,
        format!(
            "{n} instances ({STRAT_SAMPLES} random, {doubles} with a double root, {b6_hits} on B6), {dt:.2}s{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------- 7

struct SymbolRow {
    index: usize,
    asym: [String; 3],
    numeric: [String; 3],
}

fn asymptotic_golden_section(inv: &Invariants) -> String {
    let fs = build_fseries(inv, 1, FormulaSet::Reconciled).expect("on C");
    let curve = didolocus::asymptotics::asymptotic_section(&fs, SYMBOL_LEVEL, SYMBOL_N_PHI, true).expect("section");
    section_csv(&curve)
}

fn symbols_csv(rows: &[SymbolRow], metrics: &[Invariants]) -> String {
    let mut s = String::from("metric,beta_terms,asym_plus,asym_minus,asym_plus_2x,num_plus,num_minus,num_plus_2x\n");
    for r in rows {
        let terms: Vec<String> =
            metrics[r.index].reconstruct().terms().map(|(i, j, c)| format!("{i}{j}:{}", fmt_f(c))).collect();
        s.push_str(&format!("{},{},{},{}\n", r.index, terms.join(" "), r.asym.join(","), r.numeric.join(",")));
    }
    s
}

fn c7(metrics: &[Invariants]) -> (Outcome, Vec<SymbolRow>) {
    let t0 = Instant::now();
    let opts = ClassifierOptions::default();
    let copts = ConjugateOptions::default();
    let admissible = ["S1", "S2", "S3"];
    let mut pass = true;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (k, inv) in metrics.iter().enumerate() {
        let mut asym = Vec::new();
        for (c, n) in [(SYMBOL_LEVEL, SYMBOL_N_PHI), (-SYMBOL_LEVEL, SYMBOL_N_PHI), (SYMBOL_LEVEL, 2 * SYMBOL_N_PHI)] {
            let fs = build_fseries(inv, if c > 0.0 { 1 } else { -1 }, FormulaSet::Reconciled).expect("on C");
            asym.push(classify_asymptotic(&fs, c, n, &opts));
        }
        let m = model(inv);
        let cn = PI * NUMERIC_H * NUMERIC_H;
        let mut numeric = Vec::new();
        for (c, n) in [(cn, NUMERIC_N_PHI), (-cn, NUMERIC_N_PHI), (cn, 2 * NUMERIC_N_PHI)] {
            numeric.push(conjugate_section(&m, c, n, &copts).and_then(|curve| classify_section(&curve, None, &opts)));
        }
        let label = |r: &didolocus::Result<didolocus::SectionClassification>| match r {
            Ok(r) => format!("{}:{}", r.symbol.display(), r.matches),
            Err(e) => format!("error:{e}"),
        };
        let sym = |r: &didolocus::Result<didolocus::SectionClassification>| r.as_ref().ok().map(|r| r.symbol.entries.clone());
        let all: Vec<_> = asym.iter().chain(&numeric).collect();
        let six = all.iter().all(|r| r.as_ref().map(|r| r.cusps.params.len() == 6).unwrap_or(false));
        let ok_names = all.iter().all(|r| r.as_ref().map(|r| admissible.contains(&r.matches.as_str())).unwrap_or(false));
        let first = sym(&asym[0]);
        let same = first.is_some() && all.iter().all(|r| sym(r) == first);
        pass &= six && ok_names && same;
        notes.push(format!("m{k} {}", label(&asym[0])));
        rows.push(SymbolRow {
            index: k,
            asym: [label(&asym[0]), label(&asym[1]), label(&asym[2])],
            numeric: [label(&numeric[0]), label(&numeric[1]), label(&numeric[2])],
        });
        if !(six && ok_names && same) {
            notes.push(format!(
                "  mismatch: asym {:?} numeric {:?}",
                rows[k].asym, rows[k].numeric
            ));
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    (
        outcome(
            pass,
            format!(
                "{} metrics, asymptotic at c=±{SYMBOL_LEVEL:e} (n={SYMBOL_N_PHI}, {}), numeric at h={NUMERIC_H} (n={NUMERIC_N_PHI}, {}): {}; {dt:.1}s",
                metrics.len(),
                2 * SYMBOL_N_PHI,
                2 * NUMERIC_N_PHI,
                notes.join(", ")
            ),
        ),
        rows,
    )
}

// ---------------------------------------------------------------- 8

fn c8() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let opts = ClassifierOptions::default();
    let copts = ConjugateOptions::default();
    let mut pass = true;
    let mut notes = Vec::new();
    for k in 0..OFFC_METRICS {
        let r2 = Complex64::from_polar(round3(rng.gen_range(0.3..1.0)), round3(rng.gen_range(-PI..PI)));
        let inv = random_invariants(&mut rng, Complex64::new(round3(r2.re), round3(r2.im)));
        let m = model(&inv);
        let cn = PI * NUMERIC_H * NUMERIC_H;
        let mut counts = Vec::new();
        for c in [cn, -cn] {
            let fs = build_fseries(&inv, if c > 0.0 { 1 } else { -1 }, FormulaSet::Reconciled).expect("series");
            let a = classify_asymptotic(&fs, c, SYMBOL_N_PHI, &opts);
            let n = conjugate_section(&m, c, NUMERIC_N_PHI, &copts).and_then(|curve| classify_section(&curve, None, &opts));
            for r in [a, n] {
                match r {
                    Ok(r) => counts.push((r.cusps.params.len(), r.transversal_count())),
                    Err(_) => counts.push((usize::MAX, usize::MAX)),
                }
            }
        }
        let ok = counts.iter().all(|&(c, x)| c == 4 && x == 0);
        pass &= ok;
        notes.push(format!("m{k} |r2|={:.3} (cusps, crossings) {:?}", inv.r2.norm(), counts));
    }
    let dt = t0.elapsed().as_secs_f64();
    outcome(pass, format!("asymptotic and numeric at ±c, h={NUMERIC_H}: {}; {dt:.1}s", notes.join("; ")))
}

// ---------------------------------------------------------------- 9

/// Midpoint (mod π) and δ of a crossing written as (φ, φ + π + δ).
fn crossing_pair(c: &Crossing) -> (f64, f64) {
    let d = (c.phi_b - c.phi_a - PI).rem_euclid(2.0 * PI);
    let d = if d > PI { d - 2.0 * PI } else { d };
    ((c.phi_a + d / 2.0).rem_euclid(PI), d)
}

fn nearest(crossings: &[Crossing], phi0: f64) -> Option<(f64, f64)> {
    crossings.iter().map(crossing_pair).min_by(|a, b| dist_pi(a.0, phi0).total_cmp(&dist_pi(b.0, phi0)))
}

fn c9(inv: &Invariants) -> Outcome {
    let opts = ClassifierOptions::default();
    let pred = isoself_predict(inv, 1, FormulaSet::Reconciled).expect("on C");
    let fs = build_fseries(inv, 1, FormulaSet::Reconciled).expect("on C");
    let cusp = pred.branches.iter().find(|b| b.kind == BranchKind::Cusp).expect("three cusps");
    let kappa = cusp.kappa.expect("cusp law").abs();
    // Levels chosen so the predicted δ = (h/κ)^(1/3) spans [0.009, 0.11].
    let mut pts = Vec::new();
    for k in 0..6 {
    let delta = 0.009 * (0.11f64 / 0.009).powf(k as f64 / 5.0);
        let h = kappa * delta.powi(3);
        let r = classify_asymptotic(&fs, PI * h * h, 4 * SYMBOL_N_PHI, &opts).expect("classify");
        if let Some((mid, d)) = nearest(&r.crossings, cusp.phi0) {
            if dist_pi(mid, cusp.phi0) < 0.1 {
                pts.push((d.abs(), h));
            }
        }
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0.ln() / n, a.1 + p.1.ln() / n));
    let sxy: f64 = pts.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let span = pts.iter().map(|p| p.0).fold(0.0, f64::max) / pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let cusp_ok = pts.len() == 6 && span >= 10.0 && (slope - CUSP_SLOPE).abs() <= CUSP_SLOPE_TOL;

    let root = pred.branches.iter().find(|b| b.kind == BranchKind::SimpleRoot).expect("simple root of P");
    let lambda = root.lambda.expect("linear law");
    let c = PI * LAMBDA_H * LAMBDA_H;
    let curve = conjugate_section(&model(inv), c, 2 * NUMERIC_N_PHI, &ConjugateOptions::default()).expect("section");
    let r = classify_section(&curve, None, &opts).expect("classify");
    let measured = nearest(&r.crossings, root.phi0).map(|(_, d)| d / (2.0 * LAMBDA_H)).unwrap_or(f64::NAN);
    let lam_err = rel(measured, lambda);
    outcome(
        cusp_ok && lam_err <= LAMBDA_REL_TOL,
        format!(
            "cusp at {:.4}: log h vs log|δ| slope {slope:.4} over δ span x{span:.1} ({} levels, asymptotic sections); \
             root at {:.4}: numeric λ {measured:.5} vs wedge formula {lambda:.5} (rel {lam_err:.1e}, h={LAMBDA_H})",
            cusp.phi0,
            pts.len(),
            root.phi0
        ),
    )
}

// ---------------------------------------------------------------- 10

fn c10(metrics: &[Invariants], rows: &[SymbolRow]) -> Outcome {
    let bless = std::env::var_os("DIDOLOCUS_BLESS").is_some();
    let dir = golden_dir();
    let artifacts = |rows: &[SymbolRow]| -> Vec<(&'static str, String)> {
        vec![
            ("heisenberg_trajectory.csv", heisenberg_trajectory()),
            ("f4_section.csv", section_csv(&f4_section(0.05, 36))),
            ("asymptotic_section.csv", asymptotic_golden_section(&metrics[0])),
            ("symbols.csv", symbols_csv(rows, metrics)),
        ]
    };
    let first = artifacts(rows);
    let second = artifacts(rows);
    let mut notes = Vec::new();
    let repeat = first.iter().zip(&second).all(|(a, b)| a.1 == b.1);
    if !repeat {
        notes.push("repeated run differs".to_string());
    }
    let mut golden = true;
    for (name, body) in &first {
        let path = dir.join(name);
        if bless {
            fs::create_dir_all(&dir).expect("golden dir");
            fs::write(&path, body).expect("write golden");
            notes.push(format!("blessed {name}"));
            continue;
        }
        match fs::read_to_string(&path) {
            Ok(g) if &g == body => {}
            Ok(_) => {
                golden = false;
                notes.push(format!("{name} differs from golden"));
            }
            Err(e) => {
                golden = false;
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    outcome(
        repeat && golden,
        format!("{} artifacts byte-identical across runs and against tests/golden/ {}", first.len(), notes.join(", ")),
    )
}

// ----------------------------------------------------------------

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let res = panic::catch_unwind(AssertUnwindSafe(f));
    let dt = t0.elapsed().as_secs_f64();
    let (pass, detail) = match res {
        Ok(o) => (o.pass, o.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    println!("{} [{id:>2}] {name} ({dt:.1}s): {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    // libtest passes flags such as --nocapture or a filter; none apply here.
    let mut ok = true;
    ok &= run(1, "Heisenberg exactness", c1);
    ok &= run(2, "conjugate-time coefficient", c2);
    ok &= run(3, "f4 reproduction", c3);
    ok &= run(4, "f5 reproduction", c4);
    ok &= run(5, "formula-audit identities", c5);
    ok &= run(6, "stratification properties", c6);
    let metrics = acceptance_metrics();
    let mut rows = Vec::new();
    ok &= run(7, "symbol admissibility", || {
        let (o, r) = c7(&metrics);
        rows = r;
        o
    });
    ok &= run(8, "off-C regime", c8);
    ok &= run(9, "isoself branch laws", || c9(&metrics[0]));
    ok &= run(10, "determinism and golden files", || c10(&metrics, &rows));
    if !ok {
        std::process::exit(1);
    }
}
