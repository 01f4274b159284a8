//! Exponential map, first conjugate points, conjugate-locus sections and
//! wave fronts.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic_flow::{
    det3, extended_initial, extended_rhs, extended_tolerance, integrate, position_jacobian, Extended, LaunchSpec,
    DEFAULT_MAX_STEP,
};
use crate::metric_model::MetricModel;
use crate::ode::Stepper;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugateOptions {
    /// Integration tolerance (relative, with per-component absolute scales).
    pub tol: f64,
    /// Sign changes are looked for in t = s/|ρ| ∈ [t_guard, t_max].
    pub t_guard: f64,
    pub t_max: f64,
    pub max_step: f64,
    /// Relative tolerance on w when solving for a section level.
    pub level_tol: f64,
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        ConjugateOptions { tol: 1e-12, t_guard: PI / 2.0, t_max: 3.0 * PI, max_step: DEFAULT_MAX_STEP, level_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePoint {
    pub phi: f64,
    pub rho: f64,
    pub s_c: f64,
    /// Rescaled time t = s/ρ.
    pub t_c: f64,
    pub point: [f64; 3],
    pub h: f64,
    pub epsilon: i8,
    /// Bracket around s_c and the determinant at its ends.
    pub bracket: [f64; 2],
    pub det_bracket: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub phi: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarCurve {
    pub level: f64,
    pub samples: Vec<CurveSample>,
    pub closed: bool,
}

impl PlanarCurve {
    pub fn epsilon(&self) -> i8 {
        if self.level < 0.0 {
            -1
        } else {
            1
        }
    }

    /// h = sqrt(|c|/π).
    pub fn h(&self) -> f64 {
        (self.level.abs() / PI).sqrt()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.samples.iter().map(|s| [s.x, s.y]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub phi: f64,
    pub rho: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

pub fn exp_map(m: &MetricModel, phi: f64, rho: f64, s: f64) -> Result<[f64; 3]> {
    let tr = integrate(m, &LaunchSpec::new(phi, rho, s), false)?;
    Ok(tr.last().expect("at least the initial sample").position())
}

pub fn first_conjugate(m: &MetricModel, phi: f64, rho: f64, opts: &ConjugateOptions) -> Result<ConjugatePoint> {
    let scale = rho.abs();
    let launch = LaunchSpec { phi, rho, s_max: opts.t_max * scale, tol: opts.tol };
    launch.validate()?;
    let s_guard = opts.t_guard * scale;
    let f = |y: &Extended| extended_rhs(m, y);
    let domain = |e: Error, s: f64| if e == Error::OutsideDomain { Error::DomainExit(s) } else { e };
    let mut st = Stepper::new(f, 0.0, extended_initial(&launch), 1.0, extended_tolerance(&launch), opts.max_step)
        .map_err(|e| domain(e, 0.0))?;
    let det_at = |y: &Extended, dy: &Extended| det3(&position_jacobian(y, dy));
    let mut last: Option<(f64, f64)> = None;
    while st.current.s < launch.s_max {
        let s = st.current.s;
        st.step_toward(launch.s_max).map_err(|e| domain(e, s))?;
        let node = st.current;
        if node.s < s_guard {
            continue;
        }
        let d = det_at(&node.y, &node.dy);
        if let Some((s_prev, d_prev)) = last {
            if d == 0.0 || d.signum() != d_prev.signum() {
                let g = |s: f64| -> Result<f64> {
                    let y = st.restep(s)?;
                    let dy = st.rhs(&y)?;
                    Ok(det_at(&y, &dy))
                };
                // Every node past the guard is recorded, so the bracket is
                // exactly the last step.
                let (a, b, da, db) = (s_prev, node.s, d_prev, d);
                let (a, b, da, db) = refine_sign_change(g, a, b, da, db).map_err(|e| domain(e, node.s))?;
                let s_c = 0.5 * (a + b);
                let y = st.restep(s_c).map_err(|e| domain(e, s_c))?;
                let point = [y[0], y[1], y[2]];
                let epsilon = if point[2] < 0.0 { -1 } else { 1 };
                return Ok(ConjugatePoint {
                    phi,
                    rho,
                    s_c,
                    t_c: s_c / rho,
                    point,
                    h: (point[2].abs() / PI).sqrt(),
                    epsilon,
                    bracket: [a, b],
                    det_bracket: [da, db],
                });
            }
        }
        last = Some((node.s, d));
    }
    Err(Error::NoConjugatePoint)
}

/// Illinois false position with bisection safeguard, down to a bracket of a
/// few ulps.
fn refine_sign_change(
    g: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    mut ga: f64,
    mut gb: f64,
) -> Result<(f64, f64, f64, f64)> {
    if gb == 0.0 {
        return Ok((b, b, gb, gb));
    }
    let mut side = 0i8;
    for it in 0..400 {
        let width = b - a;
        if width.abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
        let mut c = (a * gb - b * ga) / (gb - ga);
        if it % 3 == 2 || !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        if c == a || c == b {
            c = 0.5 * (a + b);
            if c == a || c == b {
                break;
            }
        }
        let gc = g(c)?;
        if gc == 0.0 {
            return Ok((c, c, gc, gc));
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    Ok((a, b, g(a)?, g(b)?))
}

/// Solve for ρ so that the first conjugate point lies on {w = c}.
pub fn solve_level(m: &MetricModel, phi: f64, c: f64, opts: &ConjugateOptions) -> Result<ConjugatePoint> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::Invalid("section level must be finite and nonzero".into()));
    }
    let eps = c.signum();
    // u = ε sqrt(|w|) is close to sqrt(π) ρ, so secant in u is nearly linear.
    let u_of = |w: f64| eps * w.abs().sqrt();
    let u_c = u_of(c);
    let mut rho_a = eps * (c.abs() / PI).sqrt();
    let mut cp_a = first_conjugate(m, phi, rho_a, opts)?;
    if (cp_a.point[2] - c).abs() <= opts.level_tol * c.abs() {
        return Ok(cp_a);
    }
    if cp_a.point[2].signum() != eps {
        return Err(Error::LevelOutOfReach);
    }
    let mut rho_b = rho_a * (c / cp_a.point[2]).sqrt();
    for _ in 0..40 {
        let cp_b = first_conjugate(m, phi, rho_b, opts)?;
        let w = cp_b.point[2];
        if (w - c).abs() <= opts.level_tol * c.abs() {
            return Ok(cp_b);
        }
        let (ua, ub) = (u_of(cp_a.point[2]), u_of(w));
        if ub == ua {
            break;
        }
        let next = rho_b - (ub - u_c) * (rho_b - rho_a) / (ub - ua);
        if !next.is_finite() || next.signum() != eps {
            break;
        }
        rho_a = rho_b;
        cp_a = cp_b;
        rho_b = next;
    }
    Err(Error::LevelOutOfReach)
}

pub fn phi_grid(n_phi: usize) -> Vec<f64> {
    (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect()
}

/// Numerical section of the first conjugate locus by the plane {w = c}.
pub fn conjugate_section(m: &MetricModel, c: f64, n_phi: usize, opts: &ConjugateOptions) -> Result<PlanarCurve> {
    let pts = conjugate_section_points(m, c, n_phi, opts)?;
    Ok(PlanarCurve {
        level: c,
        samples: pts.iter().map(|p| CurveSample { phi: p.phi, x: p.point[0], y: p.point[1] }).collect(),
        closed: true,
    })
}

pub fn conjugate_section_points(
    m: &MetricModel,
    c: f64,
    n_phi: usize,
    opts: &ConjugateOptions,
) -> Result<Vec<ConjugatePoint>> {
    if n_phi == 0 {
        return Err(Error::Invalid("n_phi must be positive".into()));
    }
    phi_grid(n_phi).into_par_iter().map(|phi| solve_level(m, phi, c, opts)).collect()
}

/// exp_map over a (φ, ρ) grid: φ uniform on [0, 2π), ρ uniform on
/// [rho_min, rho_max] (just rho_min when n_r = 1). Row order: φ outer.
pub fn wave_front(
    m: &MetricModel,
    s: f64,
    n_phi: usize,
    n_r: usize,
    rho_range: (f64, f64),
) -> Result<Vec<FrontPoint>> {
    if !(s > 0.0) {
        return Err(Error::Invalid("front radius must be positive".into()));
    }
    if n_phi == 0 || n_r == 0 {
        return Err(Error::Invalid("grid sizes must be positive".into()));
    }
    let rhos: Vec<f64> = if n_r == 1 {
        vec![rho_range.0]
    } else {
        (0..n_r).map(|k| rho_range.0 + (rho_range.1 - rho_range.0) * k as f64 / (n_r - 1) as f64).collect()
    };
    let grid: Vec<(f64, f64)> = phi_grid(n_phi).into_iter().flat_map(|p| rhos.iter().map(move |&r| (p, r))).collect();
    grid.into_par_iter()
        .map(|(phi, rho)| {
            let [x, y, w] = exp_map(m, phi, rho, s)?;
            Ok(FrontPoint { phi, rho, x, y, w })
        })
        .collect()
}
