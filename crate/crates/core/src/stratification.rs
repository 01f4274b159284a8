//! Genericity strata from the roots of P̃(z) = μz⁴ + νz³ + ν̄z + μ̄ and
//! T(z) = r₃z³ + r̄₃ on the unit circle.
//!
//! A root z = e^{2iφ} on the circle corresponds to a zero φ ∈ [0, π) of
//! P(φ) (resp. of sin(3φ + θ₃)).

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_model::Invariants;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratTolerances {
    /// Threshold for treating r₂, r₃ or μ as zero.
    pub strat_tol: f64,
    pub circle_tol: f64,
    pub cluster_tol: f64,
    /// Distance below which a P̃ root and a T root are the same point.
    pub common_tol: f64,
}

impl Default for StratTolerances {
    fn default() -> Self {
        StratTolerances { strat_tol: 1e-9, circle_tol: 1e-8, cluster_tol: 1e-7, common_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
    pub on_unit_circle: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RootReport {
    pub roots: Vec<Root>,
    pub common_roots_with_t: Vec<Complex64>,
}

impl RootReport {
    pub fn circle_roots(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| r.on_unit_circle)
    }

    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }
}

/// Coefficients in ascending order.
pub fn ptilde(inv: &Invariants) -> [Complex64; 5] {
    let z = Complex64::new(0.0, 0.0);
    [inv.mu.conj(), inv.nu.conj(), z, inv.nu, inv.mu]
}

pub fn t_poly(inv: &Invariants) -> [Complex64; 4] {
    let z = Complex64::new(0.0, 0.0);
    [inv.r3.conj(), z, z, inv.r3]
}

pub fn horner(p: &[Complex64], z: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn derivative(p: &[Complex64]) -> Vec<Complex64> {
    p.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect()
}

fn norm1(p: &[Complex64]) -> f64 {
    p.iter().map(|c| c.norm()).sum()
}

fn trim(p: &[Complex64]) -> &[Complex64] {
    let scale = p.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let mut n = p.len();
    while n > 0 && p[n - 1].norm() <= 1e-15 * scale {
        n -= 1;
    }
    &p[..n]
}

/// Roots of a complex polynomial (ascending coefficients, degree ≤ 4 in
/// practice) by companion-matrix eigenvalues, clustered into multiplicities.
pub fn circle_roots(p: &[Complex64], tol: &StratTolerances) -> Result<RootReport> {
    let p = trim(p);
    if p.is_empty() {
        return Err(Error::IdenticallyZero);
    }
    let deg = p.len() - 1;
    if deg == 0 {
        return Ok(RootReport::default());
    }
    let mut eig = None;
    // The unshifted companion of symmetric polynomials such as z⁴ + 1 can
    // stall the shifted QR iteration; retry on p(w + s) with fixed shifts.
    for shift in [Complex64::new(0.0, 0.0), Complex64::new(0.1234, 0.0567), Complex64::new(-0.0791, 0.2113)] {
        let q = taylor_shift(p, shift);
        if let Some(ev) = Schur::try_new(companion(&q), f64::EPSILON, 1_000).and_then(|s| s.eigenvalues()) {
            eig = Some(ev.iter().map(|w| w + shift).collect::<Vec<_>>());
            break;
        }
    }
    let eig = eig.ok_or_else(|| Error::Invalid("eigenvalue iteration failed".into()))?;
    let mut raw: Vec<Complex64> = eig.to_vec();
    raw.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    // Single-linkage clusters at cluster_tol, then merges confirmed by
    // vanishing derivatives (eigenvalues of a k-fold root scatter like eps^(1/k)).
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for z in raw {
        match clusters.iter_mut().find(|c| c.iter().any(|w| (w - z).norm() <= tol.cluster_tol * z.norm().max(1.0))) {
            Some(c) => c.push(z),
            None => clusters.push(vec![z]),
        }
    }
    let centroid = |c: &[Complex64]| c.iter().sum::<Complex64>() / c.len() as f64;
    loop {
        let mut merged = false;
        'outer: for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let (ci, cj) = (centroid(&clusters[i]), centroid(&clusters[j]));
                if (ci - cj).norm() > 1e-3 * ci.norm().max(1.0) {
                    continue;
                }
                let mut all: Vec<Complex64> = clusters[i].clone();
                all.extend(&clusters[j]);
                if is_multiple_root(p, centroid(&all), all.len()) {
                    clusters[i] = all;
                    clusters.remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
    let mut roots: Vec<Root> = clusters
        .iter()
        .map(|c| {
            let mut z = centroid(c);
            if c.len() == 1 {
                let dp = derivative(p);
                for _ in 0..3 {
                    let d = horner(&dp, z);
                    if d.norm() == 0.0 {
                        break;
                    }
                    let step = horner(p, z) / d;
                    if !step.re.is_finite() || !step.im.is_finite() {
                        break;
                    }
                    z -= step;
                }
            }
            Root { value: z, multiplicity: c.len(), on_unit_circle: (z.norm() - 1.0).abs() <= tol.circle_tol }
        })
        .collect();
    roots.sort_by(|a, b| arg_key(a.value).total_cmp(&arg_key(b.value)).then(a.value.norm().total_cmp(&b.value.norm())));
    Ok(RootReport { roots, common_roots_with_t: Vec::new() })
}

fn companion(p: &[Complex64]) -> DMatrix<Complex64> {
    let deg = p.len() - 1;
    let lead = p[deg];
    let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
    for j in 0..deg {
        comp[(0, j)] = -p[deg - 1 - j] / lead;
    }
    for i in 1..deg {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    comp
}

/// Coefficients of p(w + s).
fn taylor_shift(p: &[Complex64], s: Complex64) -> Vec<Complex64> {
    let mut q = p.to_vec();
    let n = q.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let t = q[j + 1] * s;
            q[j] += t;
        }
    }
    q
}

fn arg_key(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a < 0.0 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

fn is_multiple_root(p: &[Complex64], z: Complex64, k: usize) -> bool {
    let mut d = p.to_vec();
    let zn = z.norm().max(1.0);
    for _ in 0..k {
        let scale = norm1(&d) * zn.powi(d.len() as i32);
        if scale == 0.0 {
            return true;
        }
        if horner(&d, z).norm() > 1e-6 * scale {
            return false;
        }
        d = derivative(&d);
    }
    true
}

/// Determinant of the Sylvester matrix of p and q (ascending coefficients).
pub fn sylvester_resultant(p: &[Complex64], q: &[Complex64]) -> Complex64 {
    let m = p.len() - 1;
    let n = q.len() - 1;
    let size = m + n;
    let mut s = DMatrix::<Complex64>::zeros(size, size);
    for r in 0..n {
        for (k, &c) in p.iter().rev().enumerate() {
            s[(r, r + k)] = c;
        }
    }
    for r in 0..m {
        for (k, &c) in q.iter().rev().enumerate() {
            s[(n + r, r + k)] = c;
        }
    }
    s.determinant()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadSetValue {
    pub value: Complex64,
    pub magnitude: f64,
}

/// Literal values of the defining expressions of B₀..B₆.
pub fn bad_set_values(inv: &Invariants) -> [BadSetValue; 7] {
    let (mu, nu, r3) = (inv.mu, inv.nu, inv.r3);
    let c = |v: Complex64| BadSetValue { value: v, magnitude: v.norm() };
    let b5 = 27.0 * (mu * nu.conj() * nu.conj()).re.powi(2) - (4.0 * mu.norm_sqr() - nu.norm_sqr()).powi(3);
    [
        c(r3),
        c(mu),
        c(4.0 * mu * mu * nu.conj() + nu * nu * nu),
        c(27.0 * nu * nu * nu * r3 * r3.conj() * r3.conj() + (nu.conj() * r3 - 4.0 * mu * r3.conj()).powi(3)),
        c(nu.conj() * r3 - mu * r3.conj()),
        c(Complex64::new(b5, 0.0)),
        c(sylvester_resultant(&ptilde(inv), &t_poly(inv))),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stratum {
    OffC,
    GenericOnC,
    IsolatedTypeA,
    IsolatedTypeB,
    /// Indices k of the bad sets B_k the germ lies in.
    NonGeneric(Vec<u8>),
}

impl Stratum {
    pub fn name(&self) -> String {
        match self {
            Stratum::OffC => "OffC".into(),
            Stratum::GenericOnC => "GenericOnC".into(),
            Stratum::IsolatedTypeA => "IsolatedTypeA".into(),
            Stratum::IsolatedTypeB => "IsolatedTypeB".into(),
            Stratum::NonGeneric(b) => {
                let tags: Vec<String> = b.iter().map(|k| format!("B{k}")).collect();
                format!("NonGeneric({})", tags.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub stratum: Stratum,
    pub ptilde_roots: RootReport,
    pub t_roots: RootReport,
    pub bad_sets: [BadSetValue; 7],
}

pub fn classify(inv: &Invariants, tol: &StratTolerances) -> StratumReport {
    let bad_sets = bad_set_values(inv);
    let mut report =
        StratumReport { stratum: Stratum::OffC, ptilde_roots: RootReport::default(), t_roots: RootReport::default(), bad_sets };
    let r3_zero = inv.r3.norm() <= tol.strat_tol;
    let mu_zero = inv.mu.norm() <= tol.strat_tol;
    if let Ok(t) = circle_roots(&t_poly(inv), tol) {
        report.t_roots = t;
    }
    if let Ok(p) = circle_roots(&ptilde(inv), tol) {
        report.ptilde_roots = p;
    }
    let common: Vec<Complex64> = report
        .ptilde_roots
        .circle_roots()
        .filter(|r| report.t_roots.roots.iter().any(|t| (t.value - r.value).norm() <= tol.common_tol))
        .map(|r| r.value)
        .collect();
    report.ptilde_roots.common_roots_with_t = common.clone();

    if inv.r2.norm() > tol.strat_tol {
        report.stratum = Stratum::OffC;
        return report;
    }
    if r3_zero || mu_zero {
        let mut flags = Vec::new();
        if r3_zero {
            flags.push(0);
        }
        if mu_zero {
            flags.push(1);
        }
        report.stratum = Stratum::NonGeneric(flags);
        return report;
    }
    let circle: Vec<&Root> = report.ptilde_roots.circle_roots().collect();
    let is_common = |r: &Root| common.iter().any(|c| (c - r.value).norm() <= tol.common_tol);
    let n_common = circle.iter().filter(|r| is_common(r)).count();
    let doubles: Vec<&&Root> = circle.iter().filter(|r| r.multiplicity == 2).collect();
    let higher = circle.iter().any(|r| r.multiplicity >= 3);
    let all_simple = circle.iter().all(|r| r.multiplicity == 1);
    let others_simple = report.ptilde_roots.roots.iter().all(|r| r.multiplicity == 1);

    report.stratum = if all_simple && n_common == 0 {
        Stratum::GenericOnC
    } else if !higher
        && doubles.len() == 1
        && !is_common(doubles[0])
        && n_common == 0
        && report.ptilde_roots.roots.iter().all(|r| r.multiplicity == 2 || (r.on_unit_circle && r.multiplicity == 1))
    {
        Stratum::IsolatedTypeA
    } else if n_common == 1 && others_simple {
        Stratum::IsolatedTypeB
    } else {
        let mut flags = Vec::new();
        if higher {
            flags.push(2);
        }
        if circle.iter().any(|r| r.multiplicity >= 2 && is_common(r)) {
            flags.push(3);
        }
        if n_common >= 2 {
            flags.push(4);
        }
        if !doubles.is_empty() {
            flags.push(5);
        }
        if n_common >= 1 {
            flags.push(6);
        }
        Stratum::NonGeneric(flags)
    };
    report
}
