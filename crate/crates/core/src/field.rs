use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Axis, Error, Result};
use crate::grid::{Closure, LogGrid};
use crate::stencil::offsets_weights;

/// Asymptotic linear slopes of a field at the four infinities of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Slopes {
    pub s_minus: f64,
    pub s_plus: f64,
    pub t_minus: f64,
    pub t_plus: f64,
}

impl Slopes {
    pub const ZERO: Slopes = Slopes { s_minus: 0.0, s_plus: 0.0, t_minus: 0.0, t_plus: 0.0 };

    pub fn new(s_minus: f64, s_plus: f64, t_minus: f64, t_plus: f64) -> Self {
        Slopes { s_minus, s_plus, t_minus, t_plus }
    }

    fn along(&self, axis: Axis) -> (f64, f64) {
        match axis {
            Axis::S => (self.s_minus, self.s_plus),
            Axis::T => (self.t_minus, self.t_plus),
        }
    }

    fn combine(&self, other: &Slopes, f: impl Fn(f64, f64) -> f64) -> Slopes {
        Slopes {
            s_minus: f(self.s_minus, other.s_minus),
            s_plus: f(self.s_plus, other.s_plus),
            t_minus: f(self.t_minus, other.t_minus),
            t_plus: f(self.t_plus, other.t_plus),
        }
    }
}

/// A torus-invariant function sampled on a [`LogGrid`], row-major in `(s, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: LogGrid,
    values: Vec<f64>,
    pub slopes: Slopes,
}

impl ScalarField {
    pub fn from_values(grid: LogGrid, values: Vec<f64>, slopes: Slopes) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField { grid, values, slopes })
    }

    pub fn zeros(grid: LogGrid) -> Self {
        ScalarField { grid, values: vec![0.0; grid.len()], slopes: Slopes::ZERO }
    }

    pub fn constant(grid: LogGrid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.len()], slopes: Slopes::ZERO }
    }

    /// Sample `f(s, t)` at every node.
    pub fn from_fn(grid: LogGrid, slopes: Slopes, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let ts = grid.t_nodes();
        let mut values = vec![0.0; grid.len()];
        values.par_chunks_mut(grid.nt).enumerate().for_each(|(i, row)| {
            let s = grid.s(i);
            for (v, &t) in row.iter_mut().zip(&ts) {
                *v = f(s, t);
            }
        });
        ScalarField { grid, values, slopes }
    }

    /// A function of the base coordinate only.
    pub fn from_base(grid: LogGrid, slopes_s: (f64, f64), f: impl Fn(f64) -> f64 + Sync) -> Self {
        ScalarField::from_fn(grid, Slopes::new(slopes_s.0, slopes_s.1, 0.0, 0.0), |s, _| f(s))
    }

    pub fn grid(&self) -> &LogGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.grid.nt..(i + 1) * self.grid.nt]
    }

    fn check(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Pointwise map; the result carries no asymptotic slope.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> ScalarField {
        let values = self.values.par_iter().map(|&v| f(v)).collect();
        ScalarField { grid: self.grid, values, slopes: Slopes::ZERO }
    }

    /// Pointwise combination; slopes combine with `slope`.
    pub fn zip_with(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64) -> f64 + Sync,
        slope: impl Fn(f64, f64) -> f64,
    ) -> Result<ScalarField> {
        self.check(other)?;
        let values = self.values.par_iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(ScalarField { grid: self.grid, values, slopes: self.slopes.combine(&other.slopes, slope) })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a + b, |a, b| a + b)
    }
    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a - b, |a, b| a - b)
    }
    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a * b, |_, _| 0.0)
    }
    pub fn scale(&self, c: f64) -> ScalarField {
        let mut out = self.map(|v| c * v);
        out.slopes = self.slopes.combine(&Slopes::ZERO, |a, _| c * a);
        out
    }
    pub fn add_const(&self, c: f64) -> ScalarField {
        let mut out = self.map(|v| v + c);
        out.slopes = self.slopes;
        out
    }
    /// `a*self + b*other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Result<ScalarField> {
        self.zip_with(other, |x, y| a * x + b * y, |x, y| a * x + b * y)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Integral against `ds dt`: trapezoid rule on the window plus the
    /// truncated base tails. Densities of smooth forms decay like `e^{-|s|}`
    /// towards the poles of the base (see [`crate::sum::trapezoid_exp_tails`]).
    /// Fibers are integrated by the plain trapezoid rule, matching
    /// [`ScalarField::fiber_integrals`] (fiber tails are far below roundoff).
    pub fn integrate(&self) -> f64 {
        crate::sum::trapezoid_exp_tails(&self.fiber_integrals(), self.grid.hs())
    }

    /// Trapezoid integral along each fiber (one value per base node).
    pub fn fiber_integrals(&self) -> Vec<f64> {
        (0..self.grid.ns).map(|i| crate::sum::trapezoid(self.row(i), self.grid.ht())).collect()
    }

    /// Derivative of order `deriv` along `axis`. The result has zero slopes.
    pub fn derivative(&self, axis: Axis, deriv: usize) -> Result<ScalarField> {
        self.derivative_closed(axis, deriv, self.grid.closure)
    }

    /// Derivative with an explicit boundary closure. Fields without meaningful
    /// slope metadata (logarithms of densities, quotients) use
    /// [`Closure::OneSided`].
    pub fn derivative_closed(&self, axis: Axis, deriv: usize, closure: Closure) -> Result<ScalarField> {
        let g = self.grid;
        let op = g.line_op(axis, deriv, closure)?;
        let slopes = self.slopes.along(axis);
        let mut out = vec![0.0; g.len()];
        match axis {
            Axis::T => {
                out.par_chunks_mut(g.nt).enumerate().for_each(|(i, row)| {
                    op.apply(self.row(i), slopes, row);
                });
            }
            Axis::S => {
                let cols: Vec<Vec<f64>> = (0..g.nt)
                    .into_par_iter()
                    .map(|j| {
                        let col: Vec<f64> = (0..g.ns).map(|i| self.values[g.idx(i, j)]).collect();
                        let mut d = vec![0.0; g.ns];
                        op.apply(&col, slopes, &mut d);
                        d
                    })
                    .collect();
                for (j, col) in cols.iter().enumerate() {
                    for (i, v) in col.iter().enumerate() {
                        out[g.idx(i, j)] = *v;
                    }
                }
            }
        }
        // Derivatives tend to constants at infinity, so their slopes vanish.
        let mut res = ScalarField { grid: g, values: out, slopes: Slopes::ZERO };
        if deriv == 0 {
            res.slopes = self.slopes;
        }
        Ok(res)
    }

    pub fn d_s(&self) -> Result<ScalarField> {
        self.derivative(Axis::S, 1)
    }
    pub fn d_t(&self) -> Result<ScalarField> {
        self.derivative(Axis::T, 1)
    }
    pub fn d_ss(&self) -> Result<ScalarField> {
        self.derivative(Axis::S, 2)
    }
    pub fn d_tt(&self) -> Result<ScalarField> {
        self.derivative(Axis::T, 2)
    }
    pub fn d_st(&self) -> Result<ScalarField> {
        self.d_s()?.d_t()
    }

    /// `(f_ss, f_st, f_tt)` with one-sided closure on both axes.
    pub fn hessian_free(&self) -> Result<[ScalarField; 3]> {
        let c = Closure::OneSided;
        let fs = self.derivative_closed(Axis::S, 1, c)?;
        Ok([
            self.derivative_closed(Axis::S, 2, c)?,
            fs.derivative_closed(Axis::T, 1, c)?,
            self.derivative_closed(Axis::T, 2, c)?,
        ])
    }

    /// Largest deviation, over the boundary lines of `axis`, between the
    /// one-sided boundary derivative and the recorded asymptotic slope. Small
    /// values certify that the remainder has decayed, which is what the
    /// asymptotic closure relies on.
    pub fn closure_defect(&self, axis: Axis) -> Result<f64> {
        let g = self.grid;
        let width = g.stencil_order + 1;
        let (n, h, lines) = match axis {
            Axis::S => (g.ns, g.hs(), g.nt),
            Axis::T => (g.nt, g.ht(), g.ns),
        };
        if n < width {
            return Err(Error::BoundaryClosure { axis, reason: "too few nodes".into() });
        }
        let fwd: Vec<i64> = (0..width as i64).collect();
        let bwd: Vec<i64> = (0..width as i64).map(|k| -k).collect();
        let wf = offsets_weights(&fwd, 0.0, 1);
        let wb = offsets_weights(&bwd, 0.0, 1);
        let (sm, sp) = self.slopes.along(axis);
        let mut worst = 0.0f64;
        for l in 0..lines {
            let at = |k: usize| match axis {
                Axis::S => self.values[g.idx(k, l)],
                Axis::T => self.values[g.idx(l, k)],
            };
            let d0: f64 = wf.iter().enumerate().map(|(k, w)| w * at(k)).sum::<f64>() / h;
            let d1: f64 = wb.iter().enumerate().map(|(k, w)| w * at(n - 1 - k)).sum::<f64>() / h;
            worst = worst.max((d0 - sm).abs()).max((d1 - sp).abs());
        }
        Ok(worst)
    }

    /// Value of row `i` at fiber coordinate `t`, interpolated like
    /// [`ScalarField::shift_t`].
    pub fn sample_row(&self, i: usize, t: f64) -> f64 {
        let g = self.grid;
        interp_line(self.row(i), -g.t_range, g.ht(), t, g.stencil_order + 2, (self.slopes.t_minus, self.slopes.t_plus))
    }

    /// Evaluate each row at `t + shift(s)` by Lagrange interpolation of order
    /// `stencil_order + 2`. Outside the window rows relax exponentially onto
    /// the recorded slopes (see `interp_line`).
    pub fn shift_t(&self, shift: &[f64]) -> Result<ScalarField> {
        let g = self.grid;
        if shift.len() != g.ns {
            return Err(Error::GridMismatch);
        }
        let width = g.stencil_order + 2;
        let ht = g.ht();
        let ts = g.t_nodes();
        let mut out = vec![0.0; g.len()];
        out.par_chunks_mut(g.nt).enumerate().for_each(|(i, row)| {
            let vals = self.row(i);
            for (j, o) in row.iter_mut().enumerate() {
                let x = ts[j] + shift[i];
                *o = interp_line(vals, -g.t_range, ht, x, width, (self.slopes.t_minus, self.slopes.t_plus));
            }
        });
        Ok(ScalarField { grid: g, values: out, slopes: self.slopes })
    }

    /// Serialize to the plain-text matrix format (see README).
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = String::new();
        let closure = match g.closure {
            Closure::Asymptotic => "asymptotic",
            Closure::OneSided => "one-sided",
        };
        let _ = writeln!(out, "# osc-field v1");
        let _ = writeln!(
            out,
            "grid s_range={} t_range={} ns={} nt={} order={} closure={}",
            g.s_range, g.t_range, g.ns, g.nt, g.stencil_order, closure
        );
        let sl = &self.slopes;
        let _ = writeln!(
            out,
            "slopes s_minus={} s_plus={} t_minus={} t_plus={}",
            sl.s_minus, sl.s_plus, sl.t_minus, sl.t_plus
        );
        for i in 0..g.ns {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<ScalarField> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Format("empty input".into()))?;
        if head.trim() != "# osc-field v1" {
            return Err(Error::Format(format!("unknown header {head:?}")));
        }
        let kv = |line: Option<&str>, tag: &str| -> Result<Vec<(String, String)>> {
            let line = line.ok_or_else(|| Error::Format(format!("missing {tag} line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(tag) {
                return Err(Error::Format(format!("expected {tag} line")));
            }
            parts
                .map(|p| {
                    p.split_once('=')
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .ok_or_else(|| Error::Format(format!("bad entry {p:?}")))
                })
                .collect()
        };
        let find = |kv: &[(String, String)], key: &str| -> Result<String> {
            kv.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Format(format!("missing key {key}")))
        };
        let num = |s: String| s.parse::<f64>().map_err(|e| Error::Format(e.to_string()));
        let int = |s: String| s.parse::<usize>().map_err(|e| Error::Format(e.to_string()));
        let gk = kv(lines.next(), "grid")?;
        let mut grid = LogGrid::new(
            num(find(&gk, "s_range")?)?,
            num(find(&gk, "t_range")?)?,
            int(find(&gk, "ns")?)?,
            int(find(&gk, "nt")?)?,
            int(find(&gk, "order")?)?,
        )?;
        grid.closure = match find(&gk, "closure")?.as_str() {
            "asymptotic" => Closure::Asymptotic,
            "one-sided" => Closure::OneSided,
            other => return Err(Error::Format(format!("unknown closure {other}"))),
        };
        let sk = kv(lines.next(), "slopes")?;
        let slopes = Slopes::new(
            num(find(&sk, "s_minus")?)?,
            num(find(&sk, "s_plus")?)?,
            num(find(&sk, "t_minus")?)?,
            num(find(&sk, "t_plus")?)?,
        );
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|e| Error::Format(e.to_string()))?);
            }
        }
        if values.len() != grid.len() {
            return Err(Error::Format(format!("expected {} values, found {}", grid.len(), values.len())));
        }
        Ok(ScalarField { grid, values, slopes })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<ScalarField> {
        ScalarField::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Lagrange interpolation on a uniform line starting at `x0` with spacing `h`.
fn edge_derivative(vals: &[f64], h: f64, width: usize, right: bool) -> f64 {
    let n = vals.len();
    let width = width.min(n);
    let offs: Vec<i64> = (0..width as i64).collect();
    let w = offsets_weights(&offs, if right { (width - 1) as f64 } else { 0.0 }, 1);
    let base = if right { n - width } else { 0 };
    w.iter().enumerate().map(|(m, w)| w * vals[base + m]).sum::<f64>() / h
}

pub(crate) fn interp_line(vals: &[f64], x0: f64, h: f64, x: f64, width: usize, slopes: (f64, f64)) -> f64 {
    let n = vals.len();
    let xl = x0 + (n - 1) as f64 * h;
    // outside the window: approach the asymptotic slope like e^{-|t|},
    // matching the edge derivative so the continuation is C¹
    if x <= x0 {
        let d = x0 - x;
        let dv = edge_derivative(vals, h, width, false);
        return vals[0] - slopes.0 * d - (dv - slopes.0) * (-(-d).exp_m1());
    }
    if x >= xl {
        let d = x - xl;
        let dv = edge_derivative(vals, h, width, true);
        return vals[n - 1] + slopes.1 * d + (dv - slopes.1) * (-(-d).exp_m1());
    }
    let p = (x - x0) / h;
    let k = p.floor() as i64;
    let start = (k - (width as i64 / 2 - 1)).clamp(0, (n - width) as i64) as usize;
    let frac = p - k as f64;
    if frac == 0.0 {
        return vals[k as usize];
    }
    let offs: Vec<i64> = (0..width as i64).map(|m| start as i64 + m).collect();
    let w = offsets_weights(&offs, p, 0);
    w.iter().zip(&offs).map(|(w, &o)| w * vals[o as usize]).sum()
}
