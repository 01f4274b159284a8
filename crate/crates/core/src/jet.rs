//! Second-order jets in two variables: value, gradient and Hessian carried
//! through arithmetic so that frame derivatives come out exact.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 { v: 0.0, dx: 0.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 };

    pub fn constant(v: f64) -> Self {
        Jet2 { v, ..Self::ZERO }
    }

    pub fn var_x(x: f64) -> Self {
        Jet2 { v: x, dx: 1.0, ..Self::ZERO }
    }

    pub fn var_y(y: f64) -> Self {
        Jet2 { v: y, dy: 1.0, ..Self::ZERO }
    }

    pub fn scale(self, k: f64) -> Self {
        Jet2 {
            v: self.v * k,
            dx: self.dx * k,
            dy: self.dy * k,
            dxx: self.dxx * k,
            dxy: self.dxy * k,
            dyy: self.dyy * k,
        }
    }

    /// self + k * other
    pub fn axpy(self, k: f64, o: Jet2) -> Self {
        Jet2 {
            v: self.v + k * o.v,
            dx: self.dx + k * o.dx,
            dy: self.dy + k * o.dy,
            dxx: self.dxx + k * o.dxx,
            dxy: self.dxy + k * o.dxy,
            dyy: self.dyy + k * o.dyy,
        }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        let r2 = r * r;
        let r3 = 2.0 * r2 * r;
        Jet2 {
            v: r,
            dx: -r2 * self.dx,
            dy: -r2 * self.dy,
            dxx: r3 * self.dx * self.dx - r2 * self.dxx,
            dxy: r3 * self.dx * self.dy - r2 * self.dxy,
            dyy: r3 * self.dy * self.dy - r2 * self.dyy,
        }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        self.axpy(1.0, o)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self.axpy(-1.0, o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(mut self, k: f64) -> Jet2 {
        self.v += k;
        self
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, k: f64) -> Jet2 {
        self.scale(k)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_reciprocal_match_hand_derivatives() {
        let (x, y) = (0.7, -0.4);
        // f = x^2 y / (1 + x y)
        let jx = Jet2::var_x(x);
        let jy = Jet2::var_y(y);
        let f = jx * jx * jy * (jx * jy + 1.0).recip();
        let g = |x: f64, y: f64| x * x * y / (1.0 + x * y);
        let e = 1e-4;
        let fx = (g(x + e, y) - g(x - e, y)) / (2.0 * e);
        let fy = (g(x, y + e) - g(x, y - e)) / (2.0 * e);
        let fxx = (g(x + e, y) - 2.0 * g(x, y) + g(x - e, y)) / (e * e);
        let fxy = (g(x + e, y + e) - g(x + e, y - e) - g(x - e, y + e) + g(x - e, y - e)) / (4.0 * e * e);
        let fyy = (g(x, y + e) - 2.0 * g(x, y) + g(x, y - e)) / (e * e);
        assert!((f.v - g(x, y)).abs() < 1e-15);
        assert!((f.dx - fx).abs() < 1e-7);
        assert!((f.dy - fy).abs() < 1e-7);
        assert!((f.dxx - fxx).abs() < 1e-5);
        assert!((f.dxy - fxy).abs() < 1e-5);
        assert!((f.dyy - fyy).abs() < 1e-5);
    }
}
