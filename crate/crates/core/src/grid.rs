use crate::error::{Axis, Error, Result};
use crate::stencil::{central, offsets_weights};

/// How derivative stencils are closed at the truncation boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Ghost nodes continue the field along its recorded asymptotic slope.
    Asymptotic,
    /// Biased one-sided stencils of the same order.
    OneSided,
}

/// Truncated rectangle in logarithmic coordinates `s = log|z|^2`, `t = log|w|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGrid {
    pub s_range: f64,
    pub t_range: f64,
    pub ns: usize,
    pub nt: usize,
    pub stencil_order: usize,
    pub closure: Closure,
}

impl LogGrid {
    pub fn new(s_range: f64, t_range: f64, ns: usize, nt: usize, stencil_order: usize) -> Result<Self> {
        if !(s_range > 0.0 && t_range > 0.0) || !s_range.is_finite() || !t_range.is_finite() {
            return Err(Error::Grid(format!("bounds must be positive, got s={s_range}, t={t_range}")));
        }
        if ns < 16 || nt < 16 {
            return Err(Error::Grid(format!("need at least 16 nodes per axis, got {ns}x{nt}")));
        }
        if stencil_order < 4 || stencil_order % 2 == 1 || stencil_order > 10 {
            return Err(Error::Grid(format!("stencil order must be even in 4..=10, got {stencil_order}")));
        }
        Ok(LogGrid { s_range, t_range, ns, nt, stencil_order, closure: Closure::OneSided })
    }

    /// The default working grid: 256x256, eighth-order stencils.
    pub fn standard() -> Self {
        LogGrid::new(10.0, 24.0, 256, 256, 8).unwrap()
    }

    pub fn with_closure(mut self, closure: Closure) -> Self {
        self.closure = closure;
        self
    }

    /// Same bounds, different resolution.
    pub fn with_nodes(&self, ns: usize, nt: usize) -> Result<Self> {
        let mut g = LogGrid::new(self.s_range, self.t_range, ns, nt, self.stencil_order)?;
        g.closure = self.closure;
        Ok(g)
    }

    pub fn hs(&self) -> f64 {
        2.0 * self.s_range / (self.ns - 1) as f64
    }
    pub fn ht(&self) -> f64 {
        2.0 * self.t_range / (self.nt - 1) as f64
    }
    pub fn s(&self, i: usize) -> f64 {
        -self.s_range + i as f64 * self.hs()
    }
    pub fn t(&self, j: usize) -> f64 {
        -self.t_range + j as f64 * self.ht()
    }
    pub fn len(&self) -> usize {
        self.ns * self.nt
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nt + j
    }
    pub fn s_nodes(&self) -> Vec<f64> {
        (0..self.ns).map(|i| self.s(i)).collect()
    }
    pub fn t_nodes(&self) -> Vec<f64> {
        (0..self.nt).map(|j| self.t(j)).collect()
    }

    pub(crate) fn line_op(&self, axis: Axis, deriv: usize, closure: Closure) -> Result<LineOp> {
        let (n, h) = match axis {
            Axis::S => (self.ns, self.hs()),
            Axis::T => (self.nt, self.ht()),
        };
        LineOp::new(n, h, self.stencil_order, deriv, closure, axis)
    }
}

/// A derivative operator along one axis with its boundary closure baked in.
pub(crate) struct LineOp {
    n: usize,
    h: f64,
    deriv: usize,
    closure: Closure,
    offs: Vec<i64>,
    w: Vec<f64>,
    half: usize,
    /// One-sided weights for the first/last `half` nodes (OneSided closure).
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
}

impl LineOp {
    fn new(n: usize, h: f64, order: usize, deriv: usize, closure: Closure, axis: Axis) -> Result<Self> {
        let (offs, w) = central(order, deriv);
        let half = offs.len() / 2;
        let width = order + deriv;
        if n < width + 1 || n < offs.len() + 1 {
            return Err(Error::BoundaryClosure {
                axis,
                reason: format!("{n} nodes cannot hold a width-{width} stencil"),
            });
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        if closure == Closure::OneSided {
            for i in 0..half {
                let o: Vec<i64> = (0..width as i64).map(|k| k - i as i64).collect();
                left.push(offsets_weights(&o, 0.0, deriv));
                let o: Vec<i64> = (0..width as i64).map(|k| -(k - i as i64)).collect();
                right.push(offsets_weights(&o, 0.0, deriv));
            }
        }
        Ok(LineOp { n, h, deriv, closure, offs, w, half, left, right })
    }

    /// Apply to one line. `slopes` are the asymptotic slopes at (-inf, +inf).
    pub(crate) fn apply(&self, v: &[f64], slopes: (f64, f64), out: &mut [f64]) {
        let n = self.n;
        let scale = self.h.powi(self.deriv as i32);
        // Differences against the centre value: weights of a derivative sum to
        // zero, and this makes constants exact and keeps roundoff relative to
        // the local variation rather than the local magnitude.
        let centre = |i: usize| if self.deriv > 0 { v[i] } else { 0.0 };
        for i in self.half..n - self.half {
            let c = centre(i);
            let mut acc = 0.0;
            for (o, w) in self.offs.iter().zip(&self.w) {
                acc += w * (v[(i as i64 + o) as usize] - c);
            }
            out[i] = acc / scale;
        }
        match self.closure {
            Closure::Asymptotic => {
                let at = |k: i64| -> f64 {
                    if k < 0 {
                        v[0] + slopes.0 * k as f64 * self.h
                    } else if k >= n as i64 {
                        v[n - 1] + slopes.1 * (k - n as i64 + 1) as f64 * self.h
                    } else {
                        v[k as usize]
                    }
                };
                let edge: Vec<usize> = (0..self.half).chain(n - self.half..n).collect();
                for i in edge {
                    let c = centre(i);
                    let mut acc = 0.0;
                    for (o, w) in self.offs.iter().zip(&self.w) {
                        acc += w * (at(i as i64 + o) - c);
                    }
                    out[i] = acc / scale;
                }
            }
            Closure::OneSided => {
                for (i, w) in self.left.iter().enumerate() {
                    let c = centre(i);
                    let acc: f64 = w.iter().enumerate().map(|(k, wk)| wk * (v[k] - c)).sum();
                    out[i] = acc / scale;
                }
                for (i, w) in self.right.iter().enumerate() {
                    let c = centre(n - 1 - i);
                    let acc: f64 = w.iter().enumerate().map(|(k, wk)| wk * (v[n - 1 - k] - c)).sum();
                    out[n - 1 - i] = acc / scale;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(LogGrid::new(0.0, 1.0, 32, 32, 4).is_err());
        assert!(LogGrid::new(1.0, 1.0, 8, 32, 4).is_err());
        assert!(LogGrid::new(1.0, 1.0, 32, 32, 3).is_err());
        assert!(LogGrid::new(1.0, 1.0, 32, 32, 2).is_err());
    }

    #[test]
    fn spacing_and_nodes() {
        let g = LogGrid::new(2.0, 4.0, 17, 33, 4).unwrap();
        assert!((g.hs() - 0.25).abs() < 1e-15);
        assert!((g.t(32) - 4.0).abs() < 1e-12);
        assert_eq!(g.idx(1, 2), 35);
    }

    #[test]
    fn both_closures_differentiate_polynomials() {
        for closure in [Closure::Asymptotic, Closure::OneSided] {
            let g = LogGrid::new(1.0, 1.0, 16, 21, 6).unwrap().with_closure(closure);
            let op = g.line_op(Axis::T, 2, closure).unwrap();
            let ts = g.t_nodes();
            // linear functions are exact under either closure
            let v: Vec<f64> = ts.iter().map(|t| 3.0 * t - 1.0).collect();
            let mut out = vec![0.0; ts.len()];
            op.apply(&v, (3.0, 3.0), &mut out);
            assert!(out.iter().all(|x| x.abs() < 1e-9), "{closure:?}");
        }
    }
}
