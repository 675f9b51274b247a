//! Small forward-mode machinery for body kinematics.
//!
//! [`Dual`] carries a value and its gradient with respect to the optimization
//! parameters. [`Jet`] stacks a first-order time expansion on top (value and
//! time derivative, each a `Dual`), so running the forward kinematics once
//! over jets yields node positions, node velocities and the parameter
//! Jacobians of both.

use std::ops::{Add, Mul, Neg, Sub};

/// Value plus gradient with respect to `n` parameters. An empty gradient is
/// treated as zero everywhere.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: Vec<f64>,
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Self { v, d: Vec::new() }
    }

    /// The `slot`-th of `n` independent variables.
    pub fn var(v: f64, n: usize, slot: usize) -> Self {
        let mut d = vec![0.0; n];
        d[slot] = 1.0;
        Self { v, d }
    }

    pub fn grad(&self, n: usize) -> Vec<f64> {
        let mut g = self.d.clone();
        g.resize(n, 0.0);
        g
    }

    pub fn sin(&self) -> Self {
        self.map(self.v.sin(), self.v.cos())
    }

    pub fn cos(&self) -> Self {
        self.map(self.v.cos(), -self.v.sin())
    }

    pub fn sqrt(&self) -> Self {
        let r = self.v.sqrt();
        self.map(r, 0.5 / r)
    }

    pub fn recip(&self) -> Self {
        self.map(1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(c * self.v, c)
    }

    /// Chain rule helper: value `v`, inner derivative `dv`.
    fn map(&self, v: f64, dv: f64) -> Self {
        Self {
            v,
            d: self.d.iter().map(|g| dv * g).collect(),
        }
    }
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| f(a.get(i).copied().unwrap_or(0.0), b.get(i).copied().unwrap_or(0.0)))
        .collect()
}

impl Add for &Dual {
    type Output = Dual;
    fn add(self, rhs: &Dual) -> Dual {
        Dual {
            v: self.v + rhs.v,
            d: zip_with(&self.d, &rhs.d, |a, b| a + b),
        }
    }
}

impl Sub for &Dual {
    type Output = Dual;
    fn sub(self, rhs: &Dual) -> Dual {
        Dual {
            v: self.v - rhs.v,
            d: zip_with(&self.d, &rhs.d, |a, b| a - b),
        }
    }
}

impl Mul for &Dual {
    type Output = Dual;
    fn mul(self, rhs: &Dual) -> Dual {
        Dual {
            v: self.v * rhs.v,
            d: zip_with(&self.d, &rhs.d, |a, b| a * rhs.v + self.v * b),
        }
    }
}

impl Neg for &Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: self.d.iter().map(|g| -g).collect(),
        }
    }
}

/// First-order time jet over duals: `x` is the value, `v = dx/dt`. Both carry
/// parameter gradients, so `v.d` is the mixed derivative d(velocity)/d(theta).
#[derive(Debug, Clone, Default)]
pub struct Jet {
    pub x: Dual,
    pub v: Dual,
}

impl Jet {
    pub fn constant(x: f64) -> Self {
        Self {
            x: Dual::constant(x),
            v: Dual::constant(0.0),
        }
    }

    /// Time-independent quantity with a parameter gradient.
    pub fn steady(x: Dual) -> Self {
        Self {
            x,
            v: Dual::constant(0.0),
        }
    }

    pub fn sin(&self) -> Self {
        Self {
            x: self.x.sin(),
            v: &self.x.cos() * &self.v,
        }
    }

    pub fn cos(&self) -> Self {
        Self {
            x: self.x.cos(),
            v: &(-&self.x.sin()) * &self.v,
        }
    }

    pub fn sqrt(&self) -> Self {
        let r = self.x.sqrt();
        let dr = &self.v * &r.recip().scale(0.5);
        Self { x: r, v: dr }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            x: self.x.scale(c),
            v: self.v.scale(c),
        }
    }

    /// Reciprocal: `y = 1/x`, `dy/dt = -x' y^2`.
    pub fn recip(&self) -> Self {
        let y = self.x.recip();
        let y2 = &y * &y;
        Jet {
            v: &(-&self.v) * &y2,
            x: y,
        }
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet {
            x: &self.x + &rhs.x,
            v: &self.v + &rhs.v,
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet {
            x: &self.x - &rhs.x,
            v: &self.v - &rhs.v,
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet {
            x: &self.x * &rhs.x,
            v: &(&self.v * &rhs.x) + &(&self.x * &rhs.v),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            x: -&self.x,
            v: -&self.v,
        }
    }
}

/// A planar point/vector of jets.
#[derive(Debug, Clone, Default)]
pub struct Jet2 {
    pub x: Jet,
    pub y: Jet,
}

impl Jet2 {
    pub fn new(x: Jet, y: Jet) -> Self {
        Self { x, y }
    }

    pub fn constant(x: f64, y: f64) -> Self {
        Self {
            x: Jet::constant(x),
            y: Jet::constant(y),
        }
    }

    pub fn add(&self, o: &Jet2) -> Jet2 {
        Jet2 {
            x: &self.x + &o.x,
            y: &self.y + &o.y,
        }
    }

    pub fn sub(&self, o: &Jet2) -> Jet2 {
        Jet2 {
            x: &self.x - &o.x,
            y: &self.y - &o.y,
        }
    }

    pub fn scale_jet(&self, s: &Jet) -> Jet2 {
        Jet2 {
            x: &self.x * s,
            y: &self.y * s,
        }
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        Jet2 {
            x: self.x.scale(c),
            y: self.y.scale(c),
        }
    }

    /// Left-hand normal (rotate by +90 degrees).
    pub fn perp(&self) -> Jet2 {
        Jet2 {
            x: -&self.y,
            y: self.x.clone(),
        }
    }

    pub fn norm(&self) -> Jet {
        (&(&self.x * &self.x) + &(&self.y * &self.y)).sqrt()
    }

    /// Point at fraction `lambda` along the segment self -> other.
    pub fn lerp(&self, o: &Jet2, lambda: f64) -> Jet2 {
        self.scale(1.0 - lambda).add(&o.scale(lambda))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_product_rule() {
        let a = Dual::var(2.0, 2, 0);
        let b = Dual::var(3.0, 2, 1);
        let p = &a * &b;
        assert_eq!(p.v, 6.0);
        assert_eq!(p.d, vec![3.0, 2.0]);
    }

    #[test]
    fn dual_trig_chain_rule() {
        let a = Dual::var(0.7, 1, 0);
        let s = a.sin();
        assert!((s.v - 0.7f64.sin()).abs() < 1e-15);
        assert!((s.d[0] - 0.7f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn jet_tracks_time_derivative_through_products() {
        // x(t) = t^2 at t=3 represented as jet (9, 6); y = x*x -> (81, 108)
        let x = Jet {
            x: Dual::constant(9.0),
            v: Dual::constant(6.0),
        };
        let y = &x * &x;
        assert_eq!(y.x.v, 81.0);
        assert_eq!(y.v.v, 108.0);
    }

    #[test]
    fn jet_sin_against_finite_differences_in_time_and_parameter() {
        // angle(t; w) = sin(w t), jet at t with dual over w
        let eval = |w: f64, t: f64| -> (f64, f64) {
            // (value, rate)
            ((w * t).sin(), w * (w * t).cos())
        };
        let (w, t) = (1.3, 0.9);
        let wd = Dual::var(w, 1, 0);
        let phase = Jet {
            x: Dual {
                v: w * t,
                d: vec![t],
            },
            v: wd.clone(),
        };
        let s = phase.sin();
        let eps = 1e-6;
        let (vp, rp) = eval(w + eps, t);
        let (vm, rm) = eval(w - eps, t);
        assert!((s.x.v - eval(w, t).0).abs() < 1e-15);
        assert!((s.v.v - eval(w, t).1).abs() < 1e-12);
        assert!((s.x.d[0] - (vp - vm) / (2.0 * eps)).abs() < 1e-8);
        assert!((s.v.d[0] - (rp - rm) / (2.0 * eps)).abs() < 1e-8);
    }
}
