//! Adaptive Dormand–Prince 8(5,3) stepper for autonomous systems.
//!
//! The stepper exposes single accepted steps and exact re-stepping from the
//! last accepted state, which is what event location needs.

use crate::dop853_tableau as tab;
use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance<const N: usize> {
    pub rtol: f64,
    pub atol: [f64; N],
}

impl<const N: usize> Tolerance<N> {
    pub fn uniform(tol: f64) -> Self {
        Tolerance { rtol: tol, atol: [tol; N] }
    }
}

/// One accepted state of the integration.
#[derive(Debug, Clone, Copy)]
pub struct Node<const N: usize> {
    pub s: f64,
    pub y: [f64; N],
    pub dy: [f64; N],
}

pub struct Stepper<F, const N: usize>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
{
    f: F,
    tol: Tolerance<N>,
    h_max: f64,
    dir: f64,
    h_abs: f64,
    pub current: Node<N>,
    pub previous: Option<Node<N>>,
    pub n_eval: usize,
}

impl<F, const N: usize> Stepper<F, N>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
{
    /// `dir` is +1 or −1 for forward or backward integration.
    pub fn new(f: F, s0: f64, y0: [f64; N], dir: f64, tol: Tolerance<N>, h_max: f64) -> Result<Self> {
        let dy = f(&y0)?;
        let mut st = Stepper {
            f,
            tol,
            h_max,
            dir: dir.signum(),
            h_abs: 0.0,
            current: Node { s: s0, y: y0, dy },
            previous: None,
            n_eval: 1,
        };
        st.h_abs = st.initial_step()?.min(h_max);
        Ok(st)
    }

    fn scale(&self, y: &[f64; N], y_new: &[f64; N]) -> [f64; N] {
        let mut sc = [0.0; N];
        for i in 0..N {
            sc[i] = self.tol.atol[i] + self.tol.rtol * y[i].abs().max(y_new[i].abs());
        }
        sc
    }

    fn rms(v: &[f64; N], sc: &[f64; N]) -> f64 {
        (v.iter().zip(sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / N as f64).sqrt()
    }

    fn initial_step(&mut self) -> Result<f64> {
        let Node { y, dy, .. } = self.current;
        let sc = self.scale(&y, &y);
        let d0 = Self::rms(&y, &sc);
        let d1 = Self::rms(&dy, &sc);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let mut y1 = y;
        for i in 0..N {
            y1[i] += h0 * self.dir * dy[i];
        }
        let f1 = (self.f)(&y1)?;
        self.n_eval += 1;
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = f1[i] - dy[i];
        }
        let d2 = Self::rms(&diff, &sc) / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        Ok((100.0 * h0).min(h1))
    }

    /// One DOP853 step of signed size `h` from `node`: new state, its
    /// derivative and the stage matrix (for error estimation).
    fn rk_step(&self, node: &Node<N>, h: f64) -> Result<([f64; N], [f64; N], [[f64; N]; 13])> {
        let mut k = [[0.0; N]; 13];
        k[0] = node.dy;
        for s in 1..12 {
            let mut ys = node.y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = tab::A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[s] = (self.f)(&ys)?;
        }
        let mut y_new = node.y;
        for (j, kj) in k.iter().enumerate().take(12) {
            let b = tab::B[j];
            if b != 0.0 {
                for i in 0..N {
                    y_new[i] += h * b * kj[i];
                }
            }
        }
        let f_new = (self.f)(&y_new)?;
        k[12] = f_new;
        Ok((y_new, f_new, k))
    }

    fn error_norm(&self, k: &[[f64; N]; 13], h: f64, sc: &[f64; N]) -> f64 {
        let mut e5 = 0.0;
        let mut e3 = 0.0;
        for i in 0..N {
            let mut a5 = 0.0;
            let mut a3 = 0.0;
            for (j, kj) in k.iter().enumerate() {
                a5 += kj[i] * tab::E5[j];
                a3 += kj[i] * tab::E3[j];
            }
            e5 += (a5 / sc[i]).powi(2);
            e3 += (a3 / sc[i]).powi(2);
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        h.abs() * e5 / ((e5 + 0.01 * e3) * N as f64).sqrt()
    }

    /// Take one accepted step without passing `s_end`.
    pub fn step_toward(&mut self, s_end: f64) -> Result<()> {
        let mut rejected = false;
        loop {
            let s = self.current.s;
            let h_min = 10.0 * f64::EPSILON * s.abs().max(1e-300);
            if self.h_abs < h_min || self.h_abs < 1e-300 {
                return Err(Error::StepUnderflow);
            }
            let mut h = self.h_abs.min(self.h_max) * self.dir;
            if (s + h - s_end) * self.dir > 0.0 {
                h = s_end - s;
            }
            let (y_new, f_new, k) = self.rk_step(&self.current, h)?;
            self.n_eval += 12;
            let sc = self.scale(&self.current.y, &y_new);
            let err = self.error_norm(&k, h, &sc);
            if err < 1.0 {
                let mut factor = if err == 0.0 { MAX_FACTOR } else { MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT)) };
                if rejected {
                    factor = factor.min(1.0);
                }
                self.h_abs = h.abs() * factor;
                self.previous = Some(self.current);
                let s_new = if s + h == s_end || (s + h - s_end) * self.dir >= 0.0 { s_end } else { s + h };
                self.current = Node { s: s_new, y: y_new, dy: f_new };
                return Ok(());
            }
            self.h_abs = h.abs() * MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
            rejected = true;
        }
    }

    /// State at `s` between the previous and current node, by one exact
    /// step from the previous node.
    pub fn restep(&self, s: f64) -> Result<[f64; N]> {
        let base = self.previous.as_ref().unwrap_or(&self.current);
        if s == base.s {
            return Ok(base.y);
        }
        Ok(self.rk_step(base, s - base.s)?.0)
    }

    pub fn rhs(&self, y: &[f64; N]) -> Result<[f64; N]> {
        (self.f)(y)
    }
}

/// Classical fixed-step RK4, kept as an independent reference integrator.
pub fn rk4_fixed<const N: usize>(
    f: impl Fn(&[f64; N]) -> Result<[f64; N]>,
    y0: [f64; N],
    s_end: f64,
    n_steps: usize,
) -> Result<[f64; N]> {
    let h = s_end / n_steps as f64;
    let mut y = y0;
    let add = |y: &[f64; N], k: &[f64; N], c: f64| {
        let mut o = *y;
        for i in 0..N {
            o[i] += c * k[i];
        }
        o
    };
    for _ in 0..n_steps {
        let k1 = f(&y)?;
        let k2 = f(&add(&y, &k1, h / 2.0))?;
        let k3 = f(&add(&y, &k2, h / 2.0))?;
        let k4 = f(&add(&y, &k3, h))?;
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(y)
}
