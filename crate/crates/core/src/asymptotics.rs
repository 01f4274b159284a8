//! Closed-form expansion CL(φ, h) = Σ fᵢ(φ)hⁱ of the first conjugate locus,
//! the trigonometric polynomials P, T and Ψ, identity residuals and the
//! self-intersection branch predictions near C.
//!
//! Angles passed to [`FSeries::eval`] are in the series' own labelling. For
//! ε = −1 that label is the launch angle plus π; [`cl_expansion`] takes launch
//! angles and shifts internally.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expmap_conjugate::{first_conjugate, ConjugateOptions, CurveSample, PlanarCurve};
use crate::metric_model::{Invariants, MetricModel};
use crate::stratification::{circle_roots, ptilde, t_poly, StratTolerances};

/// |r₂| below this counts as on C.
pub const ON_C_TOL: f64 = 1e-9;

/// amp · cos(k φ + phase)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amp: f64,
    pub k: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub terms: Vec<Harmonic>,
}

impl TrigPoly {
    fn cos(mut self, amp: f64, k: f64, phase: f64) -> Self {
        if amp != 0.0 {
            self.terms.push(Harmonic { amp, k, phase });
        }
        self
    }

    fn sin(self, amp: f64, k: f64, phase: f64) -> Self {
        self.cos(amp, k, phase - PI / 2.0)
    }

    fn konst(self, c: f64) -> Self {
        self.cos(c, 0.0, 0.0)
    }

    pub fn eval(&self, phi: f64) -> f64 {
        self.terms.iter().map(|h| h.amp * (h.k * phi + h.phase).cos()).sum()
    }

    /// n-th derivative in φ.
    pub fn derivative(&self, n: u32) -> TrigPoly {
        let terms = self
            .terms
            .iter()
            .filter(|h| h.k != 0.0 || n == 0)
            .map(|h| Harmonic { amp: h.amp * h.k.powi(n as i32), k: h.k, phase: h.phase + n as f64 * PI / 2.0 })
            .collect();
        TrigPoly { terms }
    }

    pub fn scaled(&self, s: f64) -> TrigPoly {
        TrigPoly { terms: self.terms.iter().map(|h| Harmonic { amp: h.amp * s, ..*h }).collect() }
    }

    pub fn plus(&self, other: &TrigPoly) -> TrigPoly {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().copied());
        TrigPoly { terms }
    }
}

/// Plane-vector valued trigonometric polynomial.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigVec {
    pub x: TrigPoly,
    pub y: TrigPoly,
}

impl TrigVec {
    pub fn eval(&self, phi: f64) -> [f64; 2] {
        [self.x.eval(phi), self.y.eval(phi)]
    }

    pub fn derivative(&self, n: u32) -> TrigVec {
        TrigVec { x: self.x.derivative(n), y: self.y.derivative(n) }
    }

    pub fn scaled(&self, s: f64) -> TrigVec {
        TrigVec { x: self.x.scaled(s), y: self.y.scaled(s) }
    }

    pub fn plus(&self, o: &TrigVec) -> TrigVec {
        TrigVec { x: self.x.plus(&o.x), y: self.y.plus(&o.y) }
    }

    pub fn is_zero(&self) -> bool {
        self.x.terms.is_empty() && self.y.terms.is_empty()
    }
}

pub fn wedge(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Which closed forms to use for f₅ and f₇.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulaSet {
    /// Formulas exactly as printed.
    Printed,
    /// f₅ with its x-component negated and f₇ without its π² terms; this
    /// is what the exponential map produces numerically.
    Reconciled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FSeries {
    pub epsilon: i8,
    pub formula: FormulaSet,
    pub f4: TrigVec,
    pub f5: TrigVec,
    pub f6: TrigVec,
    f7: Option<TrigVec>,
    /// Highest index usable: 7 on C, 5 off C.
    pub order: u32,
}

impl FSeries {
    pub fn f7(&self) -> Result<&TrigVec> {
        self.f7.as_ref().ok_or(Error::F7OffC)
    }

    pub fn on_c(&self) -> bool {
        self.f7.is_some()
    }

    pub fn term(&self, i: u32) -> Result<&TrigVec> {
        match i {
            4 => Ok(&self.f4),
            5 => Ok(&self.f5),
            6 => Ok(&self.f6),
            7 => self.f7(),
            _ => Err(Error::Invalid(format!("f{i} not implemented"))),
        }
    }

    /// Σ_{i ≤ order} fᵢ(φ)hⁱ in series labelling.
    pub fn eval(&self, phi: f64, h: f64) -> [f64; 2] {
        let mut out = [0.0; 2];
        for i in 4..=self.order {
            let f = self.term(i).expect("order bounded by availability").eval(phi);
            let p = h.powi(i as i32);
            out[0] += f[0] * p;
            out[1] += f[1] * p;
        }
        out
    }
}

fn f4(inv: &Invariants) -> TrigVec {
    let (r, t) = (inv.r1.norm(), inv.theta1());
    TrigVec { x: TrigPoly::default().konst(-3.0 * PI * r * t.sin()), y: TrigPoly::default().konst(3.0 * PI * r * t.cos()) }
}

fn f5(inv: &Invariants) -> TrigVec {
    let (r, t) = (5.0 * PI * inv.r2.norm(), inv.theta2());
    TrigVec {
        x: TrigPoly::default().cos(3.0 * r, 1.0, -t).cos(r, 3.0, -t),
        y: TrigPoly::default().sin(3.0 * r, 1.0, -t).sin(-r, 3.0, -t),
    }
}

fn f6(inv: &Invariants) -> TrigVec {
    let h = PI / 2.0;
    let (r3, t3) = (inv.r3.norm(), inv.theta3());
    let (r1, t1) = (inv.r1.norm(), inv.theta1());
    let (v1, v2, b0) = (inv.v1(), inv.v2(), inv.b0);
    TrigVec {
        x: TrigPoly::default()
            .konst(h * (-25.0 * v2 + 31.0 * b0 * r1 * t1.sin()))
            .cos(h * 90.0 * r3, 2.0, t3)
            .cos(h * 45.0 * r3, 4.0, t3),
        y: TrigPoly::default()
            .konst(h * (-25.0 * v1 - 31.0 * b0 * r1 * t1.cos()))
            .sin(-h * 90.0 * r3, 2.0, t3)
            .sin(h * 45.0 * r3, 4.0, t3),
    }
}

/// Printed f₇ without its π² terms.
fn f7_core(inv: &Invariants) -> TrigVec {
    let q = inv.beta4;
    let (a, b, c, d) = (q.a44, q.b44, q.c44, q.d44);
    let rr = inv.r1.norm_sqr();
    let t = 2.0 * inv.theta1();
    let s = 3.0 * PI;
    TrigVec {
        x: TrigPoly::default()
            .cos(s * -21.0 * c, 1.0, 0.0)
            .cos(s * (35.0 * a - 7.0 * c), 3.0, 0.0)
            .cos(s * 21.0 * a, 5.0, 0.0)
            .cos(s * 3.0 * rr, 1.0, -t)
            .cos(s * rr, 3.0, -t)
            .sin(s * 21.0 * d, 1.0, 0.0)
            .sin(s * (-35.0 * b + 7.0 * d), 3.0, 0.0)
            .sin(s * -21.0 * b, 5.0, 0.0),
        y: TrigPoly::default()
            .cos(s * 21.0 * d, 1.0, 0.0)
            .cos(s * (-35.0 * b - 7.0 * d), 3.0, 0.0)
            .cos(s * 21.0 * b, 5.0, 0.0)
            .sin(s * 21.0 * c, 1.0, 0.0)
            .sin(s * (-35.0 * a - 7.0 * c), 3.0, 0.0)
            .sin(s * 21.0 * a, 5.0, 0.0)
            .sin(s * -3.0 * rr, 1.0, -t)
            .sin(s * rr, 3.0, -t),
    }
}

/// The π² part of the printed f₇.
fn f7_pi_terms(inv: &Invariants) -> TrigVec {
    let k = 3.0 * PI * 12.0 * PI * inv.r1.norm_sqr();
    let t = 2.0 * inv.theta1();
    TrigVec {
        x: TrigPoly::default().sin(-k, 1.0, -t).sin(-k, 3.0, -t),
        y: TrigPoly::default().cos(-k, 1.0, -t).cos(k, 3.0, -t),
    }
}

/// The printed d₇ = −144π² sin 2(φ − θ₁)(cos φ, sin φ).
pub fn d7_printed(inv: &Invariants) -> TrigVec {
    // sin(2φ − 2θ₁)cos φ = ½[sin(3φ − 2θ₁) + sin(φ − 2θ₁)], similarly for sin φ.
    let k = -144.0 * PI * PI / 2.0;
    let t = 2.0 * inv.theta1();
    TrigVec {
        x: TrigPoly::default().sin(k, 3.0, -t).sin(k, 1.0, -t),
        y: TrigPoly::default().cos(-k, 3.0, -t).cos(k, 1.0, -t),
    }
}

pub fn build_fseries(inv: &Invariants, epsilon: i8, formula: FormulaSet) -> Result<FSeries> {
    if epsilon != 1 && epsilon != -1 {
        return Err(Error::Invalid("epsilon must be +1 or -1".into()));
    }
    let e = epsilon as f64;
    let mut f5v = f5(inv);
    if formula == FormulaSet::Reconciled {
        f5v.x = f5v.x.scaled(-1.0);
    }
    let on_c = inv.r2.norm() <= ON_C_TOL;
    let f7 = on_c.then(|| {
        let core = f7_core(inv);
        let pi_terms = f7_pi_terms(inv);
        match (formula, epsilon) {
            (FormulaSet::Reconciled, _) => core.scaled(e),
            (FormulaSet::Printed, 1) => core.plus(&pi_terms),
            // f₇⁻ = d₇ − f₇ with d₇ = 2·(π² part)
            (FormulaSet::Printed, _) => core.scaled(-1.0).plus(&pi_terms),
        }
    });
    Ok(FSeries {
        epsilon,
        formula,
        f4: f4(inv).scaled(e),
        f5: f5v.scaled(e),
        f6: f6(inv).scaled(e),
        f7,
        order: if on_c { 7 } else { 5 },
    })
}

/// Series label of a launch angle.
pub fn series_angle(epsilon: i8, phi_launch: f64) -> f64 {
    if epsilon < 0 {
        phi_launch + PI
    } else {
        phi_launch
    }
}

/// (Σ fᵢ(φ)hⁱ, επh²) at launch angle φ.
pub fn cl_expansion(fs: &FSeries, phi: f64, h: f64) -> [f64; 3] {
    let [x, y] = fs.eval(series_angle(fs.epsilon, phi), h);
    [x, y, fs.epsilon as f64 * PI * h * h]
}

/// Leading index of the shape part: 6 on C, 5 off C.
pub fn shape_order(fs: &FSeries) -> u32 {
    if fs.on_c() {
        6
    } else {
        5
    }
}

/// (CL(φ, h) − f₄h⁴)/h^k with k = [`shape_order`]: the same plane curve up
/// to translation and scale, with O(1) coordinates.
pub fn normalized_point(fs: &FSeries, phi: f64, h: f64) -> [f64; 2] {
    let psi = series_angle(fs.epsilon, phi);
    let k = shape_order(fs);
    let mut out = [0.0; 2];
    for i in k..=fs.order {
        let f = fs.term(i).expect("order bounded by availability").eval(psi);
        let p = h.powi((i - k) as i32);
        out[0] += f[0] * p;
        out[1] += f[1] * p;
    }
    out
}

/// Section at level c of the truncated expansion sampled on the uniform
/// launch-angle grid.
pub fn asymptotic_section(fs: &FSeries, c: f64, n_phi: usize, normalized: bool) -> Result<PlanarCurve> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::Invalid("section level must be finite and nonzero".into()));
    }
    if (c > 0.0) != (fs.epsilon > 0) {
        return Err(Error::Invalid("section level sign must match epsilon".into()));
    }
    let h = (c.abs() / PI).sqrt();
    let samples = crate::expmap_conjugate::phi_grid(n_phi)
        .into_iter()
        .map(|phi| {
            let [x, y] = if normalized {
                normalized_point(fs, phi, h)
            } else {
                let p = cl_expansion(fs, phi, h);
                [p[0], p[1]]
            };
            CurveSample { phi, x, y }
        })
        .collect();
    Ok(PlanarCurve { level: c, samples, closed: true })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPolys {
    /// P(φ) = A cos 2φ + B sin 2φ + C cos 4φ + D sin 4φ.
    pub p: TrigPoly,
    pub ptilde: [Complex64; 5],
    /// T_c(φ) = |r₃| sin(3φ + θ₃).
    pub tc: TrigPoly,
    pub t: [Complex64; 4],
}

impl TrigPolys {
    pub fn new(inv: &Invariants) -> Self {
        let p = TrigPoly::default().cos(inv.a, 2.0, 0.0).sin(inv.b, 2.0, 0.0).cos(inv.c, 4.0, 0.0).sin(inv.d, 4.0, 0.0);
        let tc = TrigPoly::default().sin(inv.r3.norm(), 3.0, inv.theta3());
        TrigPolys { p, ptilde: ptilde(inv), tc, t: t_poly(inv) }
    }

    /// Ψ(φ) = 1080π² T_c(φ) P(φ).
    pub fn psi(&self, phi: f64) -> f64 {
        1080.0 * PI * PI * self.tc.eval(phi) * self.p.eval(phi)
    }
}

/// Residual of one identity over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub identity: String,
    pub max_residual: f64,
    pub relative_residual: f64,
    pub grid_size: usize,
    /// Constant c with lhs = c·rhs when the identity fails but holds up to
    /// a factor, and a name for it when it matches a simple invariant.
    pub factor: Option<f64>,
    pub factor_name: Option<String>,
}

impl IdentityResidual {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.relative_residual <= rel_tol
    }

    pub fn verdict(&self, rel_tol: f64) -> String {
        if self.holds(rel_tol) {
            "ok".into()
        } else {
            match (&self.factor_name, self.factor) {
                (Some(n), _) => format!("DISCREPANCY (factor {n})"),
                (None, Some(f)) => format!("DISCREPANCY (factor {f:.6e})"),
                _ => "DISCREPANCY".into(),
            }
        }
    }
}

/// Relative agreement required for an identity to hold.
pub const IDENTITY_REL_TOL: f64 = 1e-8;

fn compare(
    name: &str,
    lhs: &[f64],
    rhs: &[f64],
    scale: f64,
    grid_size: usize,
    candidates: &[(String, f64)],
) -> IdentityResidual {
    let max_res = lhs.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mag = lhs.iter().chain(rhs).map(|v| v.abs()).fold(scale, f64::max);
    let rel = if mag == 0.0 { 0.0 } else { max_res / mag };
    let mut out = IdentityResidual {
        identity: name.into(),
        max_residual: max_res,
        relative_residual: rel,
        grid_size,
        factor: None,
        factor_name: None,
    };
    if rel > IDENTITY_REL_TOL {
        let rr: f64 = rhs.iter().map(|v| v * v).sum();
        if rr > 0.0 {
            let k = lhs.iter().zip(rhs).map(|(a, b)| a * b).sum::<f64>() / rr;
            let fit = lhs.iter().zip(rhs).map(|(a, b)| (a - k * b).abs()).fold(0.0, f64::max);
            if fit <= IDENTITY_REL_TOL * mag.max(k.abs() * rhs.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                out.factor = Some(k);
                out.factor_name = candidates
                    .iter()
                    .find(|(_, v)| (k - v).abs() <= 1e-6 * k.abs().max(v.abs()))
                    .map(|(n, _)| n.clone());
            }
        }
    }
    out
}

fn factor_candidates(inv: &Invariants) -> Vec<(String, f64)> {
    let r1 = inv.r1.norm();
    let r3 = inv.r3.norm();
    let mut c = Vec::new();
    for (n, v) in [("|r1|", r1), ("|r3|", r3)] {
        if v > 0.0 {
            c.push((n.to_string(), v));
            c.push((format!("{n}^2"), v * v));
            c.push((format!("1/{n}"), 1.0 / v));
            c.push((format!("1/{n}^2"), 1.0 / (v * v)));
        }
    }
    c.push(("-1".into(), -1.0));
    c
}

/// Residuals of the wedge, parity and d₇ identities for the given formula
/// set over `phi_grid` (series labelling). Requires r₂ = 0.
pub fn wedge_identity_residuals(inv: &Invariants, phi_grid: &[f64], formula: FormulaSet) -> Result<Vec<IdentityResidual>> {
    if inv.r2.norm() > ON_C_TOL {
        return Err(Error::F7OffC);
    }
    let n = phi_grid.len();
    let fp = build_fseries(inv, 1, formula)?;
    let fm = build_fseries(inv, -1, formula)?;
    let tp = TrigPolys::new(inv);
    let (r1, r3, t1, t3) = (inv.r1.norm(), inv.r3.norm(), inv.theta1(), inv.theta3());
    let f6 = &fp.f6;
    let (d1, d2, d3) = (f6.derivative(1), f6.derivative(2), f6.derivative(3));
    let f7 = fp.f7()?;
    let f7d = f7.derivative(1);
    let cands = factor_candidates(inv);
    let pi2 = PI * PI;
    let map = |g: &dyn Fn(f64) -> f64| phi_grid.iter().map(|&p| g(p)).collect::<Vec<f64>>();
    let mut out = Vec::new();

    let lhs = map(&|p| wedge(d1.eval(p), f7d.eval(p)));
    let rhs = map(&|p| 12960.0 * PI * pi2 * r3 * (3.0 * p + t3).sin() * r1 * r1 * (2.0 * (p - t1)).sin());
    out.push(compare("f6' ^ f7' = 12960 pi^3 Tc |r1|^2 sin 2(phi - theta1)", &lhs, &rhs, 0.0, n, &cands));

    let lhs = map(&|p| wedge(d1.eval(p), f7.eval(p)));
    let rhs = map(&|p| tp.psi(p));
    out.push(compare("f6' ^ f7 = Psi", &lhs, &rhs, 0.0, n, &cands));

    let lhs = map(&|p| wedge(d1.eval(p), d2.eval(p)));
    let rhs = map(&|p| 32400.0 * pi2 * r3 * r3 * (3.0 * p + t3).sin().powi(2));
    out.push(compare("f6' ^ f6'' = 32400 pi^2 |r3|^2 sin^2(3 phi + theta3)", &lhs, &rhs, 0.0, n, &cands));

    // At the cusp angle φ₀ = −θ₃/3 (rotated to 0 when θ₃ = 0).
    let p0 = -t3 / 3.0;
    let lhs = [wedge(d3.eval(p0), d2.eval(p0))];
    let rhs = [-583200.0 * r3 * pi2];
    out.push(compare("f6''' ^ f6'' at cusp = -583200 |r3| pi^2", &lhs, &rhs, 0.0, 1, &cands));

    let d7 = d7_printed(inv);
    let f7m = fm.f7()?;
    let mut lhs = Vec::with_capacity(2 * n);
    let mut rhs = Vec::with_capacity(2 * n);
    for &p in phi_grid {
        let (a, b, d) = (f7.eval(p), f7m.eval(p), d7.eval(p));
        lhs.extend([a[0] + b[0], a[1] + b[1]]);
        rhs.extend(d);
    }
    let f7_scale = phi_grid.iter().map(|&p| f7.eval(p)[0].abs().max(f7.eval(p)[1].abs())).fold(0.0, f64::max);
    out.push(compare("f7(+) + f7(-) = d7", &lhs, &rhs, f7_scale, n, &cands));

    let lhs = map(&|p| wedge(d1.eval(p), d7.eval(p)));
    let zero = vec![0.0; n];
    let scale = phi_grid.iter().map(|&p| norm(d1.eval(p)) * norm(d7.eval(p))).fold(0.0, f64::max);
    out.push(compare("f6' ^ d7 = 0", &lhs, &zero, scale, n, &cands));

    let f6m = &fm.f6;
    let lhs = map(&|p| wedge(f6m.derivative(1).eval(p), f7m.eval(p)).abs());
    let rhs = map(&|p| wedge(d1.eval(p), f7.eval(p)).abs());
    out.push(compare("|P(+)| = |P(-)|", &lhs, &rhs, 0.0, n, &cands));

    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for &p in phi_grid {
        let (a, b) = (f6.eval(p + PI), f6.eval(p));
        lhs.extend(a);
        rhs.extend(b);
        let (a, b) = (f7.eval(p + PI), f7.eval(p));
        lhs.extend(a);
        rhs.extend([-b[0], -b[1]]);
    }
    out.push(compare("f6(phi+pi) = f6, f7(phi+pi) = -f7", &lhs, &rhs, 0.0, n, &cands));

    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for &p in phi_grid {
        for (a, b) in [(&fm.f4, &fp.f4), (&fm.f5, &fp.f5), (&fm.f6, &fp.f6)] {
            lhs.extend(a.eval(p));
            let v = b.eval(p);
            rhs.extend([-v[0], -v[1]]);
        }
    }
    out.push(compare("f_i(-) = -f_i(+), i = 4, 5, 6", &lhs, &rhs, 0.0, n, &cands));
    Ok(out)
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Observed order of contact between the exponential map and the partial
/// sums of the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub identity: String,
    pub epsilon: i8,
    pub residual_h: f64,
    pub residual_h2: f64,
    pub h: f64,
    pub grid_size: usize,
    pub observed_order: f64,
    pub expected_order: f64,
}

impl OrderRow {
    pub fn verdict(&self) -> &'static str {
        if self.residual_h2 <= 1e-14 * self.h.powi(4) || self.observed_order >= self.expected_order - 0.5 {
            "ok"
        } else {
            "DISCREPANCY"
        }
    }
}

/// For each series index k up to the series order, compares the numerical
/// first conjugate point with Σ_{i ≤ k} fᵢhⁱ at ρ = ±h₀ and ±h₀/2 and reports
/// the observed order of the residual (expected k + 1).
pub fn numeric_order_audit(
    m: &MetricModel,
    formula: FormulaSet,
    phis: &[f64],
    h0: f64,
    opts: &ConjugateOptions,
) -> Result<Vec<OrderRow>> {
    let inv = *m.invariants();
    let mut rows = Vec::new();
    for eps in [1i8, -1] {
        let fs = build_fseries(&inv, eps, formula)?;
        let mut residuals: Vec<[f64; 2]> = vec![[0.0; 2]; (fs.order - 3) as usize];
        let mut hs = [0.0f64; 2];
        for (j, scale) in [1.0, 0.5].into_iter().enumerate() {
            for &phi in phis {
                let cp = first_conjugate(m, phi, eps as f64 * h0 * scale, opts)?;
                let h = (cp.point[2].abs() / PI).sqrt();
                hs[j] = hs[j].max(h);
                let psi = series_angle(eps, phi);
                let mut acc = [0.0; 2];
                for k in 4..=fs.order {
                    let f = fs.term(k)?.eval(psi);
                    acc[0] += f[0] * h.powi(k as i32);
                    acc[1] += f[1] * h.powi(k as i32);
                    let r = (cp.point[0] - acc[0]).hypot(cp.point[1] - acc[1]);
                    let slot = &mut residuals[(k - 4) as usize][j];
                    *slot = slot.max(r);
                }
            }
        }
        for k in 4..=fs.order {
            let [a, b] = residuals[(k - 4) as usize];
            rows.push(OrderRow {
                identity: format!("exp vs f4..f{k}"),
                epsilon: eps,
                residual_h: a,
                residual_h2: b,
                h: hs[0],
                grid_size: phis.len(),
                observed_order: (a / b).log2() / (hs[0] / hs[1]).log2(),
                expected_order: (k + 1) as f64,
            });
        }
    }
    Ok(rows)
}

/// Plain-text table "identity, max_residual, grid_size, verdict".
pub fn audit_report(identities: &[IdentityResidual], orders: &[OrderRow]) -> String {
    let mut s = String::from("identity, max_residual, grid_size, verdict\n");
    for r in identities {
        let _ = writeln!(
            s,
            "{}, {:.3e} (rel {:.3e}), {}, {}",
            r.identity,
            r.max_residual,
            r.relative_residual,
            r.grid_size,
            r.verdict(IDENTITY_REL_TOL)
        );
    }
    for r in orders {
        let _ = writeln!(
            s,
            "{} eps={:+}, {:.3e} at h={:.3e} (order {:.2}, expected {:.0}), {}, {}",
            r.identity,
            r.epsilon,
            r.residual_h,
            r.h,
            r.observed_order,
            r.expected_order,
            r.grid_size,
            r.verdict()
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    /// Cubic law h = κδ³ at a cusp angle.
    Cusp,
    /// Linear law δ = 2λh at a simple root of P.
    SimpleRoot,
    /// Root of P at a cusp angle: no self-intersection from it.
    Collision,
    /// f₇ ∥ f₆' at the root (λ = 0).
    F7Parallel,
    DoubleRoot,
}

/// Self-intersection pairs (φ, φ + π + δ) adherent to angle φ₀ (series
/// labelling, in [0, π)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub phi0: f64,
    pub kind: BranchKind,
    /// Cusp: h = kappa δ³ with φ = φ₀ − δ/2.
    pub kappa: Option<f64>,
    /// Root: φ = φ₀ − λh, δ = 2λh.
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoselfPrediction {
    pub epsilon: i8,
    pub branches: Vec<Branch>,
    /// Set when P ≡ 0 or another non-generic configuration is met.
    pub note: Option<String>,
}

impl IsoselfPrediction {
    /// Number of transversal crossings of a small section.
    pub fn crossing_count(&self) -> usize {
        self.branches.iter().filter(|b| matches!(b.kind, BranchKind::Cusp | BranchKind::SimpleRoot)).count()
    }
}

fn wrap_pi(a: f64) -> f64 {
    let r = a.rem_euclid(PI);
    if PI - r < 1e-12 {
        0.0
    } else {
        r
    }
}

fn angle_dist_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Leading-order self-intersection branches near C.
pub fn isoself_predict(inv: &Invariants, epsilon: i8, formula: FormulaSet) -> Result<IsoselfPrediction> {
    if inv.r2.norm() > ON_C_TOL {
        return Err(Error::NoIsoselfOffC);
    }
    if inv.r3.norm() <= ON_C_TOL {
        return Err(Error::StratumB0);
    }
    let fs = build_fseries(inv, epsilon, formula)?;
    let f7 = fs.f7()?;
    let (d1, d2, d3) = (fs.f6.derivative(1), fs.f6.derivative(2), fs.f6.derivative(3));
    let tol = StratTolerances::default();
    let cusps: Vec<f64> = (0..3).map(|k| wrap_pi((k as f64 * PI - inv.theta3()) / 3.0)).collect();
    let mut pred = IsoselfPrediction { epsilon, branches: Vec::new(), note: None };

    let roots = match circle_roots(&ptilde(inv), &tol) {
        Ok(r) => r,
        Err(Error::IdenticallyZero) => {
            pred.note = Some("P identically zero (mu = nu = 0): non-generic, stratum B1".into());
            for &c in &cusps {
                pred.branches.push(cusp_branch(c, &d2, &d3, f7));
            }
            return Ok(pred);
        }
        Err(e) => return Err(e),
    };
    if inv.mu.norm() <= tol.strat_tol {
        pred.note = Some("mu = 0: non-generic, stratum B1".into());
    }
    let proots: Vec<(f64, usize)> = roots
        .circle_roots()
        .map(|r| (wrap_pi(r.value.arg() / 2.0), r.multiplicity))
        .collect();
    let collision_tol = 1e-6;
    for &c in &cusps {
        if proots.iter().any(|&(p, _)| angle_dist_pi(p, c) <= collision_tol) {
            pred.branches.push(Branch { phi0: c, kind: BranchKind::Collision, kappa: None, lambda: None });
        } else {
            pred.branches.push(cusp_branch(c, &d2, &d3, f7));
        }
    }
    for &(p, mult) in &proots {
        if cusps.iter().any(|&c| angle_dist_pi(p, c) <= collision_tol) {
            continue;
        }
        if mult >= 2 {
            pred.branches.push(Branch { phi0: p, kind: BranchKind::DoubleRoot, kappa: None, lambda: None });
            continue;
        }
        let num = wedge(f7.eval(p), d2.eval(p));
        let den = wedge(d1.eval(p), d2.eval(p));
        let lambda = num / den;
        let scale = norm(f7.eval(p)) * norm(d2.eval(p));
        let kind = if num.abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
            BranchKind::F7Parallel
        } else {
            BranchKind::SimpleRoot
        };
        pred.branches.push(Branch { phi0: p, kind, kappa: None, lambda: Some(lambda) });
    }
    pred.branches.sort_by(|a, b| a.phi0.total_cmp(&b.phi0));
    Ok(pred)
}

fn cusp_branch(c: f64, d2: &TrigVec, d3: &TrigVec, f7: &TrigVec) -> Branch {
    let num = wedge(d3.eval(c), d2.eval(c));
    let den = wedge(f7.eval(c), d2.eval(c));
    let kappa = -num / (48.0 * den);
    Branch { phi0: c, kind: BranchKind::Cusp, kappa: Some(kappa), lambda: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_model::Beta4;

    fn on_c(r1: f64, t1: f64, r3: f64, t3: f64) -> Invariants {
        Invariants::from_parts(
            0.1,
            Complex64::from_polar(r1, t1),
            Complex64::new(0.0, 0.0),
            r3,
            t3,
            0.0,
            0.2,
            -0.3,
            Beta4 { l44: 0.1, a44: 0.3, b44: -0.5, c44: 0.8, d44: 0.2 },
        )
    }

    #[test]
    fn trig_derivatives() {
        let p = TrigPoly::default().cos(2.0, 3.0, 0.4).sin(-1.0, 1.0, 0.0).konst(5.0);
        let e = 1e-5;
        for phi in [0.1, 1.7, 4.0] {
            let fd = (p.eval(phi + e) - p.eval(phi - e)) / (2.0 * e);
            assert!((p.derivative(1).eval(phi) - fd).abs() < 1e-8);
            let fd2 = (p.derivative(1).eval(phi + e) - p.derivative(1).eval(phi - e)) / (2.0 * e);
            assert!((p.derivative(2).eval(phi) - fd2).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_invariants_give_zero_series() {
        let fs = build_fseries(&Invariants::default(), 1, FormulaSet::Printed).unwrap();
        for i in 4..=7 {
            assert_eq!(fs.term(i).unwrap().eval(0.7), [0.0, 0.0]);
        }
    }

    #[test]
    fn f4_for_unit_r1() {
        let inv = Invariants::from_parts(
            0.0,
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
            Beta4::default(),
        );
        let fs = build_fseries(&inv, 1, FormulaSet::Printed).unwrap();
        for phi in [0.0, 1.0, 3.0] {
            let v = fs.f4.eval(phi);
            assert!(v[0].abs() < 1e-15 && (v[1] - 3.0 * PI).abs() < 1e-14);
        }
    }

    #[test]
    fn f6_direct_substitution() {
        // |r₃| = 1, θ₃ = π/2: f₆(0) = (π/2)(90cos(π/2) + 45cos(π/2), −90 sin(π/2) + 45 sin(π/2)).
        let inv = Invariants::from_parts(
            0.0,
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            1.0,
            PI / 2.0,
            0.0,
            0.0,
            0.0,
            Beta4::default(),
        );
        let fs = build_fseries(&inv, 1, FormulaSet::Printed).unwrap();
        let v = fs.f6.eval(0.0);
        assert!(v[0].abs() < 1e-12);
        assert!((v[1] + 45.0 * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn f7_off_c_is_an_error() {
        let mut inv = on_c(0.5, 0.7, 1.0, 0.4);
        inv.r2 = Complex64::new(0.1, 0.0);
        let fs = build_fseries(&inv, 1, FormulaSet::Printed).unwrap();
        assert_eq!(fs.f7(), Err(Error::F7OffC));
        assert_eq!(fs.order, 5);
    }

    #[test]
    fn f7_matches_direct_formula() {
        let inv = on_c(0.5, 0.7, 1.3, 0.4);
        let fs = build_fseries(&inv, 1, FormulaSet::Printed).unwrap();
        let (a, b, c, d) = (0.3, -0.5, 0.8, 0.2);
        let rr: f64 = 0.25;
        let t1: f64 = 0.7;
        for ph in [0.1f64, 1.3, 2.9] {
            let (cs, sn) = (|x: f64| x.cos(), |x: f64| x.sin());
            let x = 3.0
                * PI
                * (-21.0 * c * cs(ph) + 35.0 * a * cs(3.0 * ph) - 7.0 * c * cs(3.0 * ph)
                    + 21.0 * a * cs(5.0 * ph)
                    + 3.0 * rr * cs(ph - 2.0 * t1)
                    + rr * cs(3.0 * ph - 2.0 * t1)
                    + 21.0 * d * sn(ph)
                    - 35.0 * b * sn(3.0 * ph)
                    + 7.0 * d * sn(3.0 * ph)
                    - 21.0 * b * sn(5.0 * ph)
                    - 12.0 * PI * rr * sn(ph - 2.0 * t1)
                    - 12.0 * PI * rr * sn(3.0 * ph - 2.0 * t1));
            let y = 3.0
                * PI
                * (21.0 * d * cs(ph) - 35.0 * b * cs(3.0 * ph) - 7.0 * d * cs(3.0 * ph)
                    + 21.0 * b * cs(5.0 * ph)
                    - 12.0 * PI * rr * cs(ph - 2.0 * t1)
                    + 12.0 * PI * rr * cs(3.0 * ph - 2.0 * t1)
                    + 21.0 * c * sn(ph)
                    - 35.0 * a * sn(3.0 * ph)
                    - 7.0 * c * sn(3.0 * ph)
                    + 21.0 * a * sn(5.0 * ph)
                    - 3.0 * rr * sn(ph - 2.0 * t1)
                    + rr * sn(3.0 * ph - 2.0 * t1));
            let v = fs.f7().unwrap().eval(ph);
            assert!((v[0] - x).abs() < 1e-10 && (v[1] - y).abs() < 1e-10);
        }
    }

    #[test]
    fn p_matches_exponential_form() {
        let inv = on_c(0.5, 0.7, 1.3, 0.4);
        let tp = TrigPolys::new(&inv);
        for phi in [0.0, 0.3, 2.2] {
            let z = Complex64::from_polar(1.0, 2.0 * phi);
            let e = inv.nu * z + inv.nu.conj() / z + inv.mu * z * z + inv.mu.conj() / (z * z);
            assert!((e.re - tp.p.eval(phi)).abs() < 1e-12 && e.im.abs() < 1e-12);
            // T(e^{2iφ}) vanishes exactly where T_c does.
            let t = inv.r3 * z.powi(3) + inv.r3.conj();
            assert!((t.norm() - 2.0 * tp.tc.eval(phi).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn identities_for_printed_formulas() {
        let inv = on_c(0.5, 0.7, 1.3, 0.4);
        let grid: Vec<f64> = (0..720).map(|k| 2.0 * PI * k as f64 / 720.0).collect();
        let res = wedge_identity_residuals(&inv, &grid, FormulaSet::Printed).unwrap();
        let get = |prefix: &str| res.iter().find(|r| r.identity.starts_with(prefix)).unwrap();
        assert!(get("f6' ^ f7'").holds(1e-8));
        assert!(get("f6' ^ f7 =").holds(1e-8));
        assert!(get("f6' ^ f6''").holds(1e-8));
        assert!(get("f6' ^ d7").holds(1e-8));
        assert!(get("|P(+)|").holds(1e-8));
        assert!(get("f6(phi+pi)").holds(1e-8));
        assert!(get("f_i(-)").holds(1e-8));
        let cusp = get("f6''' ^ f6''");
        assert_eq!(cusp.factor_name.as_deref(), Some("|r3|"));
        let d7 = get("f7(+) + f7(-)");
        assert_eq!(d7.factor_name.as_deref(), Some("|r1|^2"));
    }

    #[test]
    fn cl_expansion_basics() {
        let inv = on_c(0.5, 0.7, 1.3, 0.4);
        let fs = build_fseries(&inv, -1, FormulaSet::Reconciled).unwrap();
        assert_eq!(cl_expansion(&fs, 0.3, 0.0), [0.0, 0.0, 0.0]);
        let a = cl_expansion(&fs, 0.3, 0.1);
        let b = cl_expansion(&fs, 0.3 + 2.0 * PI, 0.1);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-15);
        }
        assert!((a[2] + PI * 0.01).abs() < 1e-16);
    }

    #[test]
    fn isoself_example_roots() {
        // |r₁| = 1, θ₁ = π/4, β₄ = 0: P(φ) = sin(2φ − π/2).
        let inv = Invariants::from_parts(
            0.0,
            Complex64::from_polar(1.0, PI / 4.0),
            Complex64::new(0.0, 0.0),
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            Beta4::default(),
        );
        let pred = isoself_predict(&inv, 1, FormulaSet::Reconciled).unwrap();
        let roots: Vec<f64> = pred.branches.iter().filter(|b| b.kind == BranchKind::SimpleRoot).map(|b| b.phi0).collect();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - PI / 4.0).abs() < 1e-9 && (roots[1] - 3.0 * PI / 4.0).abs() < 1e-9);
        let cusps: Vec<f64> = pred.branches.iter().filter(|b| b.kind == BranchKind::Cusp).map(|b| b.phi0).collect();
        assert_eq!(cusps.len(), 3);
        assert!((cusps[1] - PI / 3.0).abs() < 1e-12);
        assert_eq!(pred.crossing_count(), 5);
    }

    #[test]
    fn isoself_trivial_and_errors() {
        let inv = Invariants::from_parts(
            0.0,
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            Beta4::default(),
        );
        let pred = isoself_predict(&inv, 1, FormulaSet::Reconciled).unwrap();
        assert!(pred.note.unwrap().contains("B1"));
        let mut off = inv;
        off.r2 = Complex64::new(0.5, 0.0);
        assert_eq!(isoself_predict(&off, 1, FormulaSet::Reconciled), Err(Error::NoIsoselfOffC));
        assert_eq!(isoself_predict(&Invariants::default(), 1, FormulaSet::Reconciled), Err(Error::StratumB0));
    }

    #[test]
    fn collision_reported() {
        // θ₃ = 0 puts a cusp at 0; θ₁ = 0 with β₄ = 0 gives P = sin 2φ, root at 0.
        let inv = Invariants::from_parts(
            0.0,
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            Beta4::default(),
        );
        let pred = isoself_predict(&inv, 1, FormulaSet::Reconciled).unwrap();
        assert!(pred.branches.iter().any(|b| b.kind == BranchKind::Collision && b.phi0.abs() < 1e-9));
    }
}
