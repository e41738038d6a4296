//! Chebyshev interpolation on a fixed interval.

use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct Cheb {
    pub lo: f64,
    pub hi: f64,
    pub coef: Vec<f64>,
}

/// Chebyshev points of the first kind, mapped to `[lo, hi]`, ascending.
pub fn nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let th = PI * (2 * (n - 1 - j) + 1) as f64 / (2 * n) as f64;
            0.5 * (lo + hi) + 0.5 * (hi - lo) * th.cos()
        })
        .collect()
}

impl Cheb {
    /// Fit from values at `nodes(lo, hi, values.len())`.
    pub fn fit(lo: f64, hi: f64, values: &[f64]) -> Self {
        let n = values.len();
        let mut coef = vec![0.0; n];
        for (k, c) in coef.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, v) in values.iter().enumerate() {
                let th = PI * (2 * (n - 1 - j) + 1) as f64 / (2 * n) as f64;
                s += v * (k as f64 * th).cos();
            }
            *c = 2.0 * s / n as f64;
        }
        coef[0] *= 0.5;
        Cheb { lo, hi, coef }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (2.0 * x - self.lo - self.hi) / (self.hi - self.lo);
        clenshaw(&self.coef, u)
    }

    /// Size of the trailing coefficients, a cheap accuracy proxy.
    pub fn tail_size(&self) -> f64 {
        let n = self.coef.len();
        self.coef[n.saturating_sub(3)..].iter().map(|c| c.abs()).sum()
    }
}

/// Two Clenshaw sums sharing the argument.
pub fn clenshaw2(a: &[f64], b: &[f64], u: f64) -> (f64, f64) {
    let (mut a1, mut a2, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0);
    let u2 = 2.0 * u;
    for k in (1..a.len()).rev() {
        let a0 = u2 * a1 - a2 + a[k];
        let b0 = u2 * b1 - b2 + b[k];
        a2 = a1;
        a1 = a0;
        b2 = b1;
        b1 = b0;
    }
    (u * a1 - a2 + a[0], u * b1 - b2 + b[0])
}

pub fn clenshaw(coef: &[f64], u: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coef.iter().skip(1).rev() {
        let b0 = 2.0 * u * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    u * b1 - b2 + coef[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exp() {
        let xs = nodes(0.5, 1.0, 20);
        let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let c = Cheb::fit(0.5, 1.0, &ys);
        for i in 0..=50 {
            let x = 0.5 + 0.01 * i as f64;
            assert!((c.eval(x) - x.exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn nodes_ascending() {
        let xs = nodes(0.0, 1.0, 9);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert!(xs[0] > 0.0 && xs[8] < 1.0);
    }
}
