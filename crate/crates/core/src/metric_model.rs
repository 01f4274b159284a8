//! Metric germs in isoperimetric normal form.
//!
//! The metric is determined by the Taylor polynomial of β(x, y) up to total
//! degree 6. The orthonormal frame is
//!
//! ```text
//! F = (1 + y²β) ∂x − xyβ ∂y + (y/2)γ ∂w
//! G = −xyβ ∂x + (1 + x²β) ∂y − (x/2)γ ∂w
//! γ = (1 + ρ²β) ∫₀¹ 2t dt / (1 + t²ρ²β(tx, ty)),   ρ² = x² + y²
//! ```
//!
//! Invariant conventions (z = x + iy):
//!
//! | tensor | form |
//! |--------|------|
//! | β₁,₁ | Re(r̄₁ z) = \|r₁\|(x cos θ₁ + y sin θ₁) |
//! | β₂,₂ | Re(r̄₂ z²) |
//! | β₂,₀ | τ₀ (x² + y²) |
//! | β₃,₃ | Re(r₃ z³), r₃ = \|r₃\|(sin θ₃ − i cos θ₃) |
//! | β₃,₁ | Re(v̄ z)(x² + y²), v = −v₁ + i v₂ |
//! | β₄ | L₄₄ρ⁴ + a₄₄ Re z⁴ − b₄₄ Im z⁴ + c₄₄ ρ² Re z² − d₄₄ ρ² Im z² |
//!
//! The r₁, r₂ and b₄₄ signs are the ones under which the closed-form
//! conjugate-locus coefficients agree with the integrated exponential map.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::quadrature::GaussLegendre;

pub const MAX_DEGREE: u32 = 6;
pub const DEFAULT_QUADRATURE_ORDER: usize = 32;

/// Sparse bivariate polynomial: (i, j) ↦ coefficient of xⁱyʲ.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Poly2 {
    pub terms: BTreeMap<(u32, u32), f64>,
}

impl Poly2 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (u32, u32, f64)>) -> Self {
        let mut p = Poly2::new();
        for (i, j, c) in terms {
            p.add_term(i, j, c);
        }
        p
    }

    pub fn add_term(&mut self, i: u32, j: u32, c: f64) {
        *self.terms.entry((i, j)).or_insert(0.0) += c;
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|(&(i, j), &c)| c * x.powi(i as i32) * y.powi(j as i32)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Total degree shared by every nonzero term; `None` for the zero polynomial.
    pub fn homogeneous_degree(&self) -> Result<Option<u32>> {
        let mut deg = None;
        for (&(i, j), &c) in &self.terms {
            if c == 0.0 {
                continue;
            }
            match deg {
                None => deg = Some(i + j),
                Some(d) if d != i + j => return Err(Error::MixedDegrees),
                _ => {}
            }
        }
        Ok(deg)
    }

    pub fn add(&self, other: &Poly2) -> Poly2 {
        let mut p = self.clone();
        for (&(i, j), &c) in &other.terms {
            p.add_term(i, j, c);
        }
        p
    }

    pub fn scaled(&self, k: f64) -> Poly2 {
        Poly2 { terms: self.terms.iter().map(|(&ij, &c)| (ij, c * k)).collect() }
    }

    /// p(x cos α − y sin α, x sin α + y cos α), i.e. p ∘ R_α.
    pub fn rotated(&self, alpha: f64) -> Poly2 {
        let (s, c) = alpha.sin_cos();
        let mut out = Poly2::new();
        for (&(i, j), &coef) in &self.terms {
            // (c x − s y)^i (s x + c y)^j expanded by powers of y.
            let mut acc = vec![coef];
            for _ in 0..i {
                acc = mul_linear(&acc, c, -s);
            }
            for _ in 0..j {
                acc = mul_linear(&acc, s, c);
            }
            let k = i + j;
            for (m, &a) in acc.iter().enumerate() {
                out.add_term(k - m as u32, m as u32, a);
            }
        }
        out
    }
}

/// Multiply a homogeneous polynomial (indexed by power of y) by (a x + b y).
fn mul_linear(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (m, &c) in p.iter().enumerate() {
        out[m] += a * c;
        out[m + 1] += b * c;
    }
    out
}

fn mul_linear_c(p: &[Complex64], a: Complex64, b: Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); p.len() + 1];
    for (m, &c) in p.iter().enumerate() {
        out[m] += a * c;
        out[m + 1] += b * c;
    }
    out
}

/// Split a homogeneous polynomial into its rotation-isotypic components.
///
/// Component `j` has angular dependence spanned by cos jφ, sin jφ. Zero
/// components are omitted.
pub fn isotypic_decompose(p: &Poly2) -> Result<BTreeMap<u32, Poly2>> {
    let Some(k) = p.homogeneous_degree()? else {
        return Ok(BTreeMap::new());
    };
    if k > MAX_DEGREE {
        return Err(Error::DegreeTooHigh(k));
    }
    let zero = Complex64::new(0.0, 0.0);
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, -0.5);
    // d[a] = coefficient of z^a z̄^(k-a); x = (z + z̄)/2, y = (z − z̄)/(2i).
    let mut d = vec![zero; k as usize + 1];
    for (&(i, j), &c) in &p.terms {
        if c == 0.0 {
            continue;
        }
        // indexed by the power of z; the last argument of mul_linear_c multiplies z
        let mut acc = vec![Complex64::new(c, 0.0)];
        for _ in 0..i {
            acc = mul_linear_c(&acc, half, half);
        }
        for _ in 0..j {
            acc = mul_linear_c(&acc, -half_i, half_i);
        }
        for (a, v) in acc.into_iter().enumerate() {
            d[a] += v;
        }
    }
    let scale = p.max_abs();
    let mut out = BTreeMap::new();
    for j in (k % 2..=k).step_by(2) {
        let mut comp = Poly2::new();
        for (a, &da) in d.iter().enumerate() {
            let ch = (2 * a as i64 - k as i64).unsigned_abs() as u32;
            if ch != j || da == zero {
                continue;
            }
            // z^a z̄^(k-a) in x, y, indexed by power of y.
            let mut acc = vec![da];
            for _ in 0..a {
                acc = mul_linear_c(&acc, Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
            }
            for _ in 0..(k as usize - a) {
                acc = mul_linear_c(&acc, Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0));
            }
            for (m, v) in acc.into_iter().enumerate() {
                comp.add_term(k - m as u32, m as u32, v.re);
            }
        }
        let tiny = 1e-15 * scale;
        comp.terms.retain(|_, c| c.abs() > tiny);
        if !comp.terms.is_empty() {
            out.insert(j, comp);
        }
    }
    Ok(out)
}

/// Taylor coefficients of β at the origin, total degree ≤ 6.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BetaJet {
    coeffs: BTreeMap<(u32, u32), f64>,
}

impl BetaJet {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (u32, u32, f64)>) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (i, j, c) in terms {
            if i + j > MAX_DEGREE {
                return Err(Error::DegreeTooHigh(i + j));
            }
            if !c.is_finite() {
                return Err(Error::Invalid(format!("non-finite coefficient for x^{i} y^{j}")));
            }
            *coeffs.entry((i, j)).or_insert(0.0) += c;
        }
        coeffs.retain(|_, c| *c != 0.0);
        Ok(BetaJet { coeffs })
    }

    pub fn coeff(&self, i: u32, j: u32) -> f64 {
        self.coeffs.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &BTreeMap<(u32, u32), f64> {
        &self.coeffs
    }

    pub fn b0(&self) -> f64 {
        self.coeff(0, 0)
    }

    pub fn homogeneous(&self, k: u32) -> Poly2 {
        Poly2 {
            terms: self.coeffs.iter().filter(|(&(i, j), _)| i + j == k).map(|(&ij, &c)| (ij, c)).collect(),
        }
    }

    pub fn as_poly(&self) -> Poly2 {
        Poly2 { terms: self.coeffs.clone() }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.as_poly().eval(x, y)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.coeffs.iter().map(|(&(i, j), &c)| (i, j, c))
    }
}

/// Quartic invariants of β₄.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Beta4 {
    pub l44: f64,
    pub a44: f64,
    pub b44: f64,
    pub c44: f64,
    pub d44: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub b0: f64,
    pub r1: Complex64,
    pub r2: Complex64,
    /// Stored as |r₃|(sin θ₃ − i cos θ₃).
    pub r3: Complex64,
    pub tau0: f64,
    /// Stored as −v₁ + i v₂.
    pub v: Complex64,
    pub beta4: Beta4,
    pub mu: Complex64,
    pub nu: Complex64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

fn principal_angle(y: f64, x: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        return 0.0;
    }
    let t = y.atan2(x);
    if t <= -PI {
        PI
    } else {
        t
    }
}

impl Invariants {
    pub fn theta1(&self) -> f64 {
        principal_angle(self.r1.im, self.r1.re)
    }

    pub fn theta2(&self) -> f64 {
        principal_angle(self.r2.im, self.r2.re)
    }

    pub fn theta3(&self) -> f64 {
        principal_angle(self.r3.re, -self.r3.im)
    }

    pub fn v1(&self) -> f64 {
        -self.v.re
    }

    pub fn v2(&self) -> f64 {
        self.v.im
    }

    /// Build from the named invariants; μ, ν and A..D are derived.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        b0: f64,
        r1: Complex64,
        r2: Complex64,
        r3_mod: f64,
        theta3: f64,
        tau0: f64,
        v1: f64,
        v2: f64,
        beta4: Beta4,
    ) -> Self {
        let r3 = Complex64::new(r3_mod * theta3.sin(), -r3_mod * theta3.cos());
        let mut inv = Invariants {
            b0,
            r1,
            r2,
            r3,
            tau0,
            v: Complex64::new(-v1, v2),
            beta4,
            ..Default::default()
        };
        inv.fill_derived();
        inv
    }

    /// P(φ) = A cos 2φ + B sin 2φ + C cos 4φ + D sin 4φ with
    /// P = −7d₄₄cos2φ + 7b₄₄cos4φ − 7c₄₄sin2φ + 7a₄₄sin4φ + |r₁|² sin 2(φ − θ₁).
    fn fill_derived(&mut self) {
        let r1sq = self.r1.norm_sqr();
        let t1 = self.theta1();
        let q = self.beta4;
        self.a = -7.0 * q.d44 - r1sq * (2.0 * t1).sin();
        self.b = -7.0 * q.c44 + r1sq * (2.0 * t1).cos();
        self.c = 7.0 * q.b44;
        self.d = 7.0 * q.a44;
        self.mu = Complex64::new(self.c, -self.d) / 2.0;
        self.nu = Complex64::new(self.a, -self.b) / 2.0;
    }

    /// Degree 0..4 part of β assembled from the invariants.
    pub fn reconstruct(&self) -> BetaJet {
        let q = self.beta4;
        let (r1, r2, r3, v) = (self.r1, self.r2, self.r3, self.v);
        let terms = vec![
            (0, 0, self.b0),
            (1, 0, r1.re),
            (0, 1, r1.im),
            // Re(r̄₂ z²) + τ₀ρ²
            (2, 0, r2.re + self.tau0),
            (1, 1, 2.0 * r2.im),
            (0, 2, -r2.re + self.tau0),
            // Re(r₃ z³)
            (3, 0, r3.re),
            (2, 1, -3.0 * r3.im),
            (1, 2, -3.0 * r3.re),
            (0, 3, r3.im),
            // (−v₁x + v₂y)(x² + y²), v = −v₁ + i v₂
            (3, 0, v.re),
            (1, 2, v.re),
            (2, 1, v.im),
            (0, 3, v.im),
            // β₄
            (4, 0, q.l44 + q.a44 + q.c44),
            (2, 2, 2.0 * q.l44 - 6.0 * q.a44),
            (0, 4, q.l44 + q.a44 - q.c44),
            (3, 1, -4.0 * q.b44 - 2.0 * q.d44),
            (1, 3, 4.0 * q.b44 - 2.0 * q.d44),
        ];
        BetaJet::from_terms(terms).expect("degrees bounded by 4")
    }
}

/// Decompose β into the invariants listed in [`Invariants`].
pub fn extract_invariants(beta: &BetaJet) -> Invariants {
    let comp = |k: u32| isotypic_decompose(&beta.homogeneous(k)).expect("jet parts are homogeneous");
    let c1 = comp(1);
    let c2 = comp(2);
    let c3 = comp(3);
    let c4 = comp(4);
    let get = |m: &BTreeMap<u32, Poly2>, j: u32, a: u32, b: u32| m.get(&j).map_or(0.0, |p| p.coeff(a, b));

    let r1 = Complex64::new(get(&c1, 1, 1, 0), get(&c1, 1, 0, 1));
    let tau0 = get(&c2, 0, 2, 0);
    let r2 = Complex64::new(get(&c2, 2, 2, 0), get(&c2, 2, 1, 1) / 2.0);
    let r3 = Complex64::new(get(&c3, 3, 3, 0), -get(&c3, 3, 2, 1) / 3.0);
    let v = Complex64::new(get(&c3, 1, 3, 0), get(&c3, 1, 0, 3));
    let beta4 = Beta4 {
        l44: get(&c4, 0, 4, 0),
        a44: get(&c4, 4, 4, 0),
        b44: -get(&c4, 4, 3, 1) / 4.0,
        c44: get(&c4, 2, 4, 0),
        d44: -get(&c4, 2, 3, 1) / 2.0,
    };
    let mut inv = Invariants { b0: beta.b0(), r1, r2, r3, tau0, v, beta4, ..Default::default() };
    inv.fill_derived();
    inv
}

/// JSON metric specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub beta: BetaTerms,
    #[serde(default = "default_quadrature_order")]
    pub quadrature_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BetaTerms {
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub i: u32,
    pub j: u32,
    pub c: f64,
}

fn default_quadrature_order() -> usize {
    DEFAULT_QUADRATURE_ORDER
}

impl MetricSpec {
    pub fn from_terms(terms: &[(u32, u32, f64)]) -> Self {
        MetricSpec {
            beta: BetaTerms { terms: terms.iter().map(|&(i, j, c)| Term { i, j, c }).collect() },
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
        }
    }

    pub fn build(&self) -> Result<MetricModel> {
        let beta = BetaJet::from_terms(self.beta.terms.iter().map(|t| (t.i, t.j, t.c)))?;
        MetricModel::new(beta, self.quadrature_order)
    }
}

#[derive(Debug, Clone)]
pub struct MetricModel {
    beta: BetaJet,
    inv: Invariants,
    quadrature_order: usize,
    quad: GaussLegendre,
    /// Nonzero terms grouped by total degree.
    by_degree: Vec<Vec<(i32, i32, f64)>>,
}

impl MetricModel {
    pub fn new(beta: BetaJet, quadrature_order: usize) -> Result<Self> {
        if quadrature_order == 0 {
            return Err(Error::Invalid("quadrature_order must be positive".into()));
        }
        let inv = extract_invariants(&beta);
        let mut by_degree = vec![Vec::new(); MAX_DEGREE as usize + 1];
        for (i, j, c) in beta.terms() {
            by_degree[(i + j) as usize].push((i as i32, j as i32, c));
        }
        while by_degree.last().is_some_and(|v| v.is_empty()) {
            by_degree.pop();
        }
        Ok(MetricModel { beta, inv, quadrature_order, quad: GaussLegendre::unit(quadrature_order), by_degree })
    }

    pub fn from_terms(terms: &[(u32, u32, f64)]) -> Result<Self> {
        MetricModel::new(BetaJet::from_terms(terms.iter().copied())?, DEFAULT_QUADRATURE_ORDER)
    }

    pub fn heisenberg() -> Self {
        MetricModel::new(BetaJet::zero(), DEFAULT_QUADRATURE_ORDER).expect("valid")
    }

    pub fn beta(&self) -> &BetaJet {
        &self.beta
    }

    pub fn invariants(&self) -> &Invariants {
        &self.inv
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn with_quadrature_order(&self, order: usize) -> Result<Self> {
        MetricModel::new(self.beta.clone(), order)
    }

    pub fn spec(&self) -> MetricSpec {
        MetricSpec {
            beta: BetaTerms { terms: self.beta.terms().map(|(i, j, c)| Term { i, j, c }).collect() },
            quadrature_order: self.quadrature_order,
        }
    }

    /// Homogeneous parts β_k(x, y) as jets; entries past `by_degree.len()` are zero.
    fn beta_parts(&self, x: f64, y: f64) -> [Jet2; MAX_DEGREE as usize + 1] {
        let pw = |b: f64, n: i32| if n < 0 { 0.0 } else { b.powi(n) };
        let mut out = [Jet2::ZERO; MAX_DEGREE as usize + 1];
        for (k, terms) in self.by_degree.iter().enumerate() {
            let mut acc = Jet2::ZERO;
            for &(i, j, c) in terms {
                let fi = i as f64;
                let fj = j as f64;
                let m = Jet2 {
                    v: pw(x, i) * pw(y, j),
                    dx: fi * pw(x, i - 1) * pw(y, j),
                    dy: fj * pw(x, i) * pw(y, j - 1),
                    dxx: fi * (fi - 1.0) * pw(x, i - 2) * pw(y, j),
                    dxy: fi * fj * pw(x, i - 1) * pw(y, j - 1),
                    dyy: fj * (fj - 1.0) * pw(x, i) * pw(y, j - 2),
                };
                acc = acc.axpy(c, m);
            }
            out[k] = acc;
        }
        out
    }

    pub fn beta_jet(&self, x: f64, y: f64) -> Jet2 {
        self.beta_parts(x, y).into_iter().fold(Jet2::ZERO, |a, b| a + b)
    }

    /// γ with first and second derivatives in (x, y).
    pub fn gamma_jet(&self, x: f64, y: f64) -> Result<Jet2> {
        let parts = self.beta_parts(x, y);
        let rho2 = Jet2 { v: x * x + y * y, dx: 2.0 * x, dy: 2.0 * y, dxx: 2.0, dxy: 0.0, dyy: 2.0 };
        let nq = self.by_degree.len();
        let mut q = [Jet2::ZERO; MAX_DEGREE as usize + 1];
        for k in 0..nq {
            q[k] = rho2 * parts[k];
        }
        let q = &q[..nq];
        let mut integral = Jet2::ZERO;
        for (&t, &w) in self.quad.nodes.iter().zip(&self.quad.weights) {
            let mut den = Jet2::constant(1.0);
            let mut tp = t * t;
            for &qk in q {
                den = den.axpy(tp, qk);
                tp *= t;
            }
            if !(den.v > 0.0) {
                return Err(Error::OutsideDomain);
            }
            integral = integral.axpy(2.0 * t * w, den.recip());
        }
        let pre = q.iter().fold(Jet2::constant(1.0), |a, &b| a + b);
        Ok(pre * integral)
    }

    /// γ(x, y) and its gradient.
    pub fn eval_gamma(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        let g = self.gamma_jet(x, y)?;
        Ok((g.v, g.dx, g.dy))
    }

    /// Frame components as jets: F = (A₁, A₂, A₃), G = (B₁, B₂, B₃).
    pub fn frame_jets(&self, x: f64, y: f64) -> Result<([Jet2; 3], [Jet2; 3])> {
        let b = self.beta_jet(x, y);
        let g = self.gamma_jet(x, y)?;
        let jx = Jet2::var_x(x);
        let jy = Jet2::var_y(y);
        let xyb = jx * jy * b;
        let f = [jy * jy * b + 1.0, -xyb, jy * g * 0.5];
        let gg = [-xyb, jx * jx * b + 1.0, jx * g * (-0.5)];
        Ok((f, gg))
    }

    pub fn frame_fields(&self, x: f64, y: f64) -> Result<([f64; 3], [f64; 3])> {
        let (f, g) = self.frame_jets(x, y)?;
        Ok(([f[0].v, f[1].v, f[2].v], [g[0].v, g[1].v, g[2].v]))
    }
}
