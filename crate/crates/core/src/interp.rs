//! Monotone piecewise-cubic Hermite interpolation.
//!
//! Each node carries a left and a right slope so that kinks (jumps in the
//! first derivative) are represented exactly. Slopes are limited per interval
//! with the Fritsch-Carlson conditions, so the interpolant is monotone on
//! every interval where the data is.

/// Fritsch-Carlson limiting of the endpoint slopes of one interval.
#[inline]
pub fn limit_slopes(y0: f64, y1: f64, d0: f64, d1: f64, h: f64) -> (f64, f64) {
    let secant = (y1 - y0) / h;
    if secant == 0.0 {
        return (0.0, 0.0);
    }
    let mut a = d0 / secant;
    let mut b = d1 / secant;
    if a < 0.0 {
        a = 0.0;
    }
    if b < 0.0 {
        b = 0.0;
    }
    let r2 = a * a + b * b;
    if r2 > 9.0 {
        let tau = 3.0 / r2.sqrt();
        a *= tau;
        b *= tau;
    }
    (a * secant, b * secant)
}

/// Cubic Hermite interpolant on `[x0, x1]` evaluated at `x`.
#[inline]
pub fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h * (h10 * d0 + h11 * d1) + h01 * y1
}

/// Derivative of [`hermite`] with respect to `x`.
#[inline]
pub fn hermite_derivative(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let g00 = 6.0 * t2 - 6.0 * t;
    let g10 = 3.0 * t2 - 4.0 * t + 1.0;
    let g01 = -6.0 * t2 + 6.0 * t;
    let g11 = 3.0 * t2 - 2.0 * t;
    (g00 * y0 + g01 * y1) / h + g10 * d0 + g11 * d1
}

/// Three-point slope estimates for data without known derivatives.
///
/// Interior slopes use the weighted harmonic mean of adjacent secants (zero at
/// local extrema); end slopes use the one-sided three-point formula.
pub fn estimate_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Index `k` with `xs[k] <= x < xs[k+1]`, clamped to a valid interval.
#[inline]
pub fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    debug_assert!(n >= 2);
    let k = xs.partition_point(|&v| v <= x);
    k.saturating_sub(1).min(n - 2)
}

/// A sampled function with one-sided nodal slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Limited slope at the left end of interval `k`.
    d_start: Vec<f64>,
    /// Limited slope at the right end of interval `k`.
    d_end: Vec<f64>,
    /// Raw one-sided nodal slopes.
    dl: Vec<f64>,
    dr: Vec<f64>,
}

impl MonotoneCubic {
    /// Builds the interpolant from node values and left/right slopes.
    ///
    /// Panics if the lengths differ, fewer than two nodes are given, or the
    /// abscissae are not strictly increasing.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, dl: Vec<f64>, dr: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2, "interpolant needs at least two nodes");
        assert!(
            ys.len() == n && dl.len() == n && dr.len() == n,
            "length mismatch"
        );
        assert!(
            xs.windows(2).all(|w| w[1] > w[0]),
            "abscissae must be strictly increasing"
        );
        let mut d_start = Vec::with_capacity(n - 1);
        let mut d_end = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let (a, b) = limit_slopes(ys[k], ys[k + 1], dr[k], dl[k + 1], xs[k + 1] - xs[k]);
            d_start.push(a);
            d_end.push(b);
        }
        MonotoneCubic {
            xs,
            ys,
            d_start,
            d_end,
            dl,
            dr,
        }
    }

    /// Interpolant with slopes estimated from the data.
    pub fn from_values(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let d = estimate_slopes(&xs, &ys);
        Self::new(xs, ys, d.clone(), d)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn left_slopes(&self) -> &[f64] {
        &self.dl
    }

    pub fn right_slopes(&self) -> &[f64] {
        &self.dr
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Value at `x`, constant beyond the end nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = locate(&self.xs, x);
        if x == self.xs[k] {
            return self.ys[k];
        }
        hermite(
            self.xs[k],
            self.xs[k + 1],
            self.ys[k],
            self.ys[k + 1],
            self.d_start[k],
            self.d_end[k],
            x,
        )
    }

    /// Derivative of the interpolant at `x` (right derivative at nodes, zero outside).
    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x >= self.xs[n - 1] {
            return 0.0;
        }
        let k = locate(&self.xs, x);
        hermite_derivative(
            self.xs[k],
            self.xs[k + 1],
            self.ys[k],
            self.ys[k + 1],
            self.d_start[k],
            self.d_end[k],
            x,
        )
    }

    /// Interpolation intervals overlapping `[a, b]`, as `(lo, hi)` pairs clipped to `[a, b]`.
    pub fn cells_in(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if b <= a {
            return out;
        }
        let mut lo = a;
        if lo < self.xs[0] {
            let hi = b.min(self.xs[0]);
            out.push((lo, hi));
            lo = hi;
        }
        let mut k = locate(&self.xs, lo);
        while lo < b && lo < self.x_max() {
            let hi = b.min(self.xs[k + 1]);
            if hi > lo {
                out.push((lo, hi));
            }
            lo = hi;
            k += 1;
            if k + 1 >= self.xs.len() {
                break;
            }
        }
        if lo < b {
            out.push((lo, b));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_exactly() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.37).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 0.8).sin()).collect();
        let f = MonotoneCubic::from_values(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(f.eval(*x), *y);
        }
    }

    #[test]
    fn exact_slopes_give_fourth_order() {
        let err = |n: usize| {
            let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
            let f = MonotoneCubic::new(xs.clone(), ys.clone(), ys.clone(), ys);
            (0..997)
                .map(|i| {
                    let x = i as f64 / 997.0;
                    (f.eval(x) - x.exp()).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(20) / err(40)).log2();
        assert!(order > 3.8, "order {order}");
    }

    #[test]
    fn estimated_slopes_give_third_order() {
        let err = |n: usize| {
            let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).tanh()).collect();
            let f = MonotoneCubic::from_values(xs, ys);
            (0..997)
                .map(|i| {
                    let x = 0.1 + 0.8 * i as f64 / 997.0;
                    (f.eval(x) - (2.0 * x).tanh()).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(40) / err(80)).log2();
        assert!(order > 2.7, "order {order}");
    }

    #[test]
    fn monotone_data_gives_monotone_interpolant() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.0, 0.1, 5.0, 5.0];
        let f = MonotoneCubic::from_values(xs, ys);
        let mut prev = f.eval(0.0);
        for i in 1..=400 {
            let v = f.eval(i as f64 / 100.0);
            assert!(v >= prev - 1e-14);
            prev = v;
        }
    }

    #[test]
    fn constant_extension_outside() {
        let f = MonotoneCubic::from_values(vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]);
        assert_eq!(f.eval(-3.0), 0.2);
        assert_eq!(f.eval(9.0), 0.5);
        assert_eq!(f.derivative(9.0), 0.0);
    }

    #[test]
    fn cells_cover_interval() {
        let f = MonotoneCubic::from_values(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0]);
        let cells = f.cells_in(-0.5, 2.5);
        assert_eq!(cells, vec![(-0.5, 0.0), (0.0, 1.0), (1.0, 2.0), (2.0, 2.5)]);
        let cells = f.cells_in(2.5, 4.0);
        assert_eq!(cells, vec![(2.5, 3.0), (3.0, 4.0)]);
    }
}
