//! Hamiltonian geodesic flow in arclength s, with forward sensitivities.
//!
//! State X = (x, y, w, p̃, q̃, r), H = ½((ψ·F)² + (ψ·G)²) with ψ = (p̃, q̃, r).
//! The frame does not depend on w, so r is a first integral and the rescaled
//! time is t = r(0)·s.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric_model::MetricModel;
use crate::ode::{Stepper, Tolerance};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEP: f64 = PI / 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub pt: f64,
    pub qt: f64,
    pub rr: f64,
    pub s: f64,
}

impl GeodesicState {
    pub fn from_array(s: f64, a: &[f64]) -> Self {
        GeodesicState { x: a[0], y: a[1], w: a[2], pt: a[3], qt: a[4], rr: a[5], s }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.w, self.pt, self.qt, self.rr]
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.w]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaunchSpec {
    pub phi: f64,
    pub rho: f64,
    pub s_max: f64,
    pub tol: f64,
}

impl LaunchSpec {
    pub fn new(phi: f64, rho: f64, s_max: f64) -> Self {
        LaunchSpec { phi, rho, s_max, tol: DEFAULT_TOL }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho == 0.0 || !self.rho.is_finite() {
            return Err(Error::Invalid("rho must be finite and nonzero".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Invalid("tol must be positive".into()));
        }
        if !self.s_max.is_finite() || !self.phi.is_finite() {
            return Err(Error::Invalid("phi and s_max must be finite".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> [f64; 6] {
        let (s, c) = self.phi.sin_cos();
        [0.0, 0.0, 0.0, c, s, 1.0 / self.rho]
    }

    /// ∂X₀/∂φ and ∂X₀/∂ρ.
    pub fn initial_sensitivities(&self) -> ([f64; 6], [f64; 6]) {
        let (s, c) = self.phi.sin_cos();
        ([0.0, 0.0, 0.0, -s, c, 0.0], [0.0, 0.0, 0.0, 0.0, 0.0, -1.0 / (self.rho * self.rho)])
    }

    /// Natural magnitudes of the state components at this launch, used to
    /// turn `tol` into per-component absolute tolerances.
    pub fn nominal(&self) -> [f64; 6] {
        let r = self.rho.abs();
        [r, r, r * r, 1.0, 1.0, 1.0 / r]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<GeodesicState>,
    /// Columns ∂(x, y, w)/∂(φ, ρ, s) at each sample, row-major.
    pub sensitivities: Option<Vec<[[f64; 3]; 3]>>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&GeodesicState> {
        self.samples.last()
    }
}

/// H with its gradient and Hessian in X.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianJet {
    pub h: f64,
    pub grad: [f64; 6],
    pub hess: [[f64; 6]; 6],
}

pub fn hamiltonian_jet(m: &MetricModel, x: &[f64; 6]) -> Result<HamiltonianJet> {
    let (fj, gj) = m.frame_jets(x[0], x[1])?;
    let psi = [x[3], x[4], x[5]];
    let mut a = crate::jet::Jet2::ZERO;
    let mut b = crate::jet::Jet2::ZERO;
    for l in 0..3 {
        a = a.axpy(psi[l], fj[l]);
        b = b.axpy(psi[l], gj[l]);
    }
    let mut grad = [0.0; 6];
    grad[0] = a.v * a.dx + b.v * b.dx;
    grad[1] = a.v * a.dy + b.v * b.dy;
    for l in 0..3 {
        grad[3 + l] = a.v * fj[l].v + b.v * gj[l].v;
    }
    let mut hess = [[0.0; 6]; 6];
    hess[0][0] = a.dx * a.dx + a.v * a.dxx + b.dx * b.dx + b.v * b.dxx;
    hess[0][1] = a.dx * a.dy + a.v * a.dxy + b.dx * b.dy + b.v * b.dxy;
    hess[1][1] = a.dy * a.dy + a.v * a.dyy + b.dy * b.dy + b.v * b.dyy;
    hess[1][0] = hess[0][1];
    for l in 0..3 {
        let hx = fj[l].v * a.dx + a.v * fj[l].dx + gj[l].v * b.dx + b.v * gj[l].dx;
        let hy = fj[l].v * a.dy + a.v * fj[l].dy + gj[l].v * b.dy + b.v * gj[l].dy;
        hess[0][3 + l] = hx;
        hess[3 + l][0] = hx;
        hess[1][3 + l] = hy;
        hess[3 + l][1] = hy;
        for k in 0..3 {
            hess[3 + l][3 + k] = fj[l].v * fj[k].v + gj[l].v * gj[k].v;
        }
    }
    Ok(HamiltonianJet { h: 0.5 * (a.v * a.v + b.v * b.v), grad, hess })
}

pub fn hamiltonian(m: &MetricModel, st: &GeodesicState) -> Result<f64> {
    let x = st.to_array();
    let (f, g) = m.frame_fields(x[0], x[1])?;
    let a = x[3] * f[0] + x[4] * f[1] + x[5] * f[2];
    let b = x[3] * g[0] + x[4] * g[1] + x[5] * g[2];
    Ok(0.5 * (a * a + b * b))
}

/// Ẋ = (∂H/∂ψ, −∂H/∂(x, y, w)).
pub fn vector_field(m: &MetricModel, x: &[f64; 6]) -> Result<[f64; 6]> {
    let j = hamiltonian_jet(m, x)?;
    Ok(symplectic(&j.grad))
}

fn symplectic(g: &[f64; 6]) -> [f64; 6] {
    [g[3], g[4], g[5], -g[0], -g[1], -g[2]]
}

/// Vector field and its Jacobian.
pub fn vector_field_jacobian(m: &MetricModel, x: &[f64; 6]) -> Result<([f64; 6], [[f64; 6]; 6])> {
    let j = hamiltonian_jet(m, x)?;
    let h = &j.hess;
    let jac = [h[3], h[4], h[5], h[0].map(|v| -v), h[1].map(|v| -v), h[2].map(|v| -v)];
    Ok((symplectic(&j.grad), jac))
}

/// State plus the φ- and ρ-sensitivity columns.
pub type Extended = [f64; 18];

pub fn extended_rhs(m: &MetricModel, y: &Extended) -> Result<Extended> {
    let x: [f64; 6] = y[..6].try_into().expect("len 6");
    let (f, jac) = vector_field_jacobian(m, &x)?;
    let mut out = [0.0; 18];
    out[..6].copy_from_slice(&f);
    for col in 0..2 {
        let off = 6 + 6 * col;
        for i in 0..6 {
            let mut acc = 0.0;
            for k in 0..6 {
                acc += jac[i][k] * y[off + k];
            }
            out[off + i] = acc;
        }
    }
    Ok(out)
}

pub fn extended_initial(launch: &LaunchSpec) -> Extended {
    let mut y = [0.0; 18];
    y[..6].copy_from_slice(&launch.initial_state());
    let (dphi, drho) = launch.initial_sensitivities();
    y[6..12].copy_from_slice(&dphi);
    y[12..18].copy_from_slice(&drho);
    y
}

pub fn extended_tolerance(launch: &LaunchSpec) -> Tolerance<18> {
    let nom = launch.nominal();
    let mut atol = [0.0; 18];
    for i in 0..6 {
        atol[i] = launch.tol * nom[i];
        atol[6 + i] = launch.tol * nom[i];
        atol[12 + i] = launch.tol * nom[i] / launch.rho.abs();
    }
    Tolerance { rtol: launch.tol, atol }
}

pub fn state_tolerance(launch: &LaunchSpec) -> Tolerance<6> {
    let nom = launch.nominal();
    Tolerance { rtol: launch.tol, atol: nom.map(|v| v * launch.tol) }
}

/// The 3×3 matrix with columns ∂pos/∂φ, ∂pos/∂ρ, ∂pos/∂s.
pub fn position_jacobian(y: &Extended, dy: &Extended) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for r in 0..3 {
        m[r] = [y[6 + r], y[12 + r], dy[r]];
    }
    m
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn map_domain<T>(r: Result<T>, s: f64) -> Result<T> {
    r.map_err(|e| if e == Error::OutsideDomain { Error::DomainExit(s) } else { e })
}

/// Integrate a plain state from `s0` to `s1` (either direction), returning
/// every accepted node.
pub fn integrate_state(
    m: &MetricModel,
    x0: [f64; 6],
    s0: f64,
    s1: f64,
    tol: Tolerance<6>,
    max_step: f64,
) -> Result<Vec<(f64, [f64; 6])>> {
    let mut out = vec![(s0, x0)];
    if s1 == s0 {
        return Ok(out);
    }
    let f = |x: &[f64; 6]| vector_field(m, x);
    let mut st = map_domain(Stepper::new(f, s0, x0, (s1 - s0).signum(), tol, max_step), s0)?;
    while st.current.s != s1 {
        let s = st.current.s;
        map_domain(st.step_toward(s1), s)?;
        out.push((st.current.s, st.current.y));
    }
    Ok(out)
}

pub fn integrate(m: &MetricModel, launch: &LaunchSpec, with_sensitivities: bool) -> Result<Trajectory> {
    integrate_with_step(m, launch, with_sensitivities, DEFAULT_MAX_STEP)
}

pub fn integrate_with_step(
    m: &MetricModel,
    launch: &LaunchSpec,
    with_sensitivities: bool,
    max_step: f64,
) -> Result<Trajectory> {
    launch.validate()?;
    if !with_sensitivities {
        let nodes = integrate_state(m, launch.initial_state(), 0.0, launch.s_max, state_tolerance(launch), max_step)?;
        return Ok(Trajectory {
            samples: nodes.iter().map(|(s, x)| GeodesicState::from_array(*s, x)).collect(),
            sensitivities: None,
        });
    }
    let y0 = extended_initial(launch);
    let f = |y: &Extended| extended_rhs(m, y);
    let dir = if launch.s_max >= 0.0 { 1.0 } else { -1.0 };
    let mut st = map_domain(Stepper::new(f, 0.0, y0, dir, extended_tolerance(launch), max_step), 0.0)?;
    let mut samples = vec![GeodesicState::from_array(0.0, &y0[..6])];
    let mut sens = vec![position_jacobian(&y0, &st.current.dy)];
    while st.current.s != launch.s_max {
        let s = st.current.s;
        map_domain(st.step_toward(launch.s_max), s)?;
        samples.push(GeodesicState::from_array(st.current.s, &st.current.y[..6]));
        sens.push(position_jacobian(&st.current.y, &st.current.dy));
    }
    Ok(Trajectory { samples, sensitivities: Some(sens) })
}

/// Heisenberg closed form at arclength s: (x, y, w).
pub fn heisenberg_position(phi: f64, rho: f64, s: f64) -> [f64; 3] {
    let t = s / rho;
    let amp = 2.0 * (t / 2.0).sin();
    let ang = phi - t / 2.0;
    [rho * amp * ang.cos(), rho * amp * ang.sin(), rho * rho * (t - t.sin()) / 2.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_examples() {
        let m = MetricModel::heisenberg();
        let st = |a: [f64; 6]| GeodesicState::from_array(0.0, &a);
        assert_eq!(hamiltonian(&m, &st([0.0, 0.0, 0.0, 1.0, 0.0, 7.0])).unwrap(), 0.5);
        assert!((hamiltonian(&m, &st([1.0, 0.0, 0.0, 0.0, 1.0, 1.0])).unwrap() - 0.125).abs() < 1e-15);
        let m = MetricModel::from_terms(&[(0, 0, 0.1), (1, 0, 0.3), (1, 2, 0.7)]).unwrap();
        let (s, c) = 0.8f64.sin_cos();
        assert!((hamiltonian(&m, &st([0.0, 0.0, 0.0, c, s, 3.0])).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = MetricModel::from_terms(&[(0, 0, 0.1), (1, 0, 0.3), (2, 1, -0.4), (4, 0, 0.2), (1, 3, 0.5)]).unwrap();
        let x = [0.21, -0.13, 0.05, 0.6, 0.8, 2.5];
        let (_, jac) = vector_field_jacobian(&m, &x).unwrap();
        let e = 1e-6;
        for k in 0..6 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += e;
            xm[k] -= e;
            let fp = vector_field(&m, &xp).unwrap();
            let fm = vector_field(&m, &xm).unwrap();
            for i in 0..6 {
                let fd = (fp[i] - fm[i]) / (2.0 * e);
                assert!((fd - jac[i][k]).abs() < 1e-7 * (1.0 + fd.abs()), "d{i}/d{k}: {fd} vs {}", jac[i][k]);
            }
        }
    }

    #[test]
    fn heisenberg_matches_closed_form() {
        let m = MetricModel::heisenberg();
        for &rho in &[0.3, 1.0, -0.5] {
            let phi = 0.7;
            let launch = LaunchSpec::new(phi, rho, 2.0 * PI * rho.abs());
            let tr = integrate(&m, &launch, false).unwrap();
            for st in &tr.samples {
                let want = heisenberg_position(phi, rho, st.s);
                for (a, b) in st.position().iter().zip(want) {
                    assert!((a - b).abs() < 1e-9, "rho={rho} s={}", st.s);
                }
            }
        }
    }

    #[test]
    fn zero_length_trajectory() {
        let m = MetricModel::from_terms(&[(1, 0, 0.2)]).unwrap();
        let launch = LaunchSpec::new(0.4, 0.2, 0.0);
        let tr = integrate(&m, &launch, true).unwrap();
        assert_eq!(tr.samples.len(), 1);
        let j = tr.sensitivities.unwrap()[0];
        assert_eq!([j[0][0], j[1][0], j[2][0], j[0][1], j[1][1], j[2][1]], [0.0; 6]);
    }
}
