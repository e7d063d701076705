use crate::error::{Error, Result};
use crate::field::{ScalarField, Slopes};
use crate::grid::LogGrid;

/// Torus-invariant real (1,1)-form, stored as the symmetric coefficient
/// matrix `[[ss, st], [st, tt]]` in log coordinates. Chern normalization is
/// built in: the form of a potential `f` is exactly its `(s, t)` Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Form11 {
    pub ss: ScalarField,
    pub st: ScalarField,
    pub tt: ScalarField,
}

impl Form11 {
    pub fn new(ss: ScalarField, st: ScalarField, tt: ScalarField) -> Result<Self> {
        if ss.grid() != st.grid() || st.grid() != tt.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Form11 { ss, st, tt })
    }

    pub fn zero(grid: LogGrid) -> Self {
        let z = ScalarField::zeros(grid);
        Form11 { ss: z.clone(), st: z.clone(), tt: z }
    }

    pub fn from_fn(grid: LogGrid, f: impl Fn(f64, f64) -> [f64; 3] + Sync) -> Self {
        let ss = ScalarField::from_fn(grid, Slopes::ZERO, |s, t| f(s, t)[0]);
        let st = ScalarField::from_fn(grid, Slopes::ZERO, |s, t| f(s, t)[1]);
        let tt = ScalarField::from_fn(grid, Slopes::ZERO, |s, t| f(s, t)[2]);
        Form11 { ss, st, tt }
    }

    pub fn grid(&self) -> &LogGrid {
        self.ss.grid()
    }

    pub fn add(&self, o: &Form11) -> Result<Form11> {
        Form11::new(self.ss.add(&o.ss)?, self.st.add(&o.st)?, self.tt.add(&o.tt)?)
    }

    pub fn sub(&self, o: &Form11) -> Result<Form11> {
        Form11::new(self.ss.sub(&o.ss)?, self.st.sub(&o.st)?, self.tt.sub(&o.tt)?)
    }

    pub fn scale(&self, c: f64) -> Form11 {
        Form11 { ss: self.ss.scale(c), st: self.st.scale(c), tt: self.tt.scale(c) }
    }

    /// `self + c * o`
    pub fn add_scaled(&self, o: &Form11, c: f64) -> Result<Form11> {
        Form11::new(self.ss.axpby(1.0, &o.ss, c)?, self.st.axpby(1.0, &o.st, c)?, self.tt.axpby(1.0, &o.tt, c)?)
    }

    /// Density of `self ∧ o` against `ds dt`.
    pub fn wedge(&self, o: &Form11) -> ScalarField {
        let n = self.grid().len();
        let (a, b) = (self, o);
        let vals: Vec<f64> = (0..n)
            .map(|k| {
                a.ss.values()[k] * b.tt.values()[k] + a.tt.values()[k] * b.ss.values()[k]
                    - 2.0 * a.st.values()[k] * b.st.values()[k]
            })
            .collect();
        ScalarField::from_values(*self.grid(), vals, Slopes::ZERO).unwrap()
    }

    /// Determinant of the coefficient matrix (half the density of `ω ∧ ω`).
    pub fn det(&self) -> ScalarField {
        let n = self.grid().len();
        let vals: Vec<f64> = (0..n)
            .map(|k| self.ss.values()[k] * self.tt.values()[k] - self.st.values()[k].powi(2))
            .collect();
        ScalarField::from_values(*self.grid(), vals, Slopes::ZERO).unwrap()
    }

    /// `tr(M^{-1} α)` where `M` is `self`; on a surface this is `Λ_ω α`.
    pub fn trace_against(&self, alpha: &Form11) -> ScalarField {
        let d = self.det();
        let w = self.wedge(alpha);
        w.zip_with(&d, |w, d| w / d, |_, _| 0.0).unwrap()
    }

    /// Smallest eigenvalue of the coefficient matrix at every node.
    pub fn min_eigenvalue(&self) -> ScalarField {
        let n = self.grid().len();
        let vals: Vec<f64> = (0..n)
            .map(|k| {
                let (a, c, g) = (self.ss.values()[k], self.st.values()[k], self.tt.values()[k]);
                let m = 0.5 * (a + g);
                let r = (0.25 * (a - g).powi(2) + c * c).sqrt();
                m - r
            })
            .collect();
        ScalarField::from_values(*self.grid(), vals, Slopes::ZERO).unwrap()
    }

    /// Global positivity: smallest eigenvalue `> 0` everywhere.
    pub fn check_positive(&self) -> Result<()> {
        check_field_positive(&self.min_eigenvalue())
    }

    /// Fiberwise positivity: the vertical coefficient is positive on every
    /// fiber, up to roundoff (`POSITIVITY_FLOOR` times the fiber peak) in the
    /// unresolved tails.
    pub fn check_fiber_positive(&self) -> Result<()> {
        check_positive_within(&self.tt, POSITIVITY_FLOOR)
    }
}

/// Roundoff allowance of positivity checks, relative to each fiber's peak.
/// Second differences of O(1)–O(10) potentials lose `~1e-13` absolute, so far
/// tails whose true density is below that cannot be resolved in sign.
pub const POSITIVITY_FLOOR: f64 = 1e-10;

/// Strict positivity at every node.
pub(crate) fn check_field_positive(f: &ScalarField) -> Result<()> {
    check_positive_within(f, 0.0)
}

/// Positivity with non-positive values down to `-floor` times the row peak
/// tolerated (zero `floor` is strict).
pub(crate) fn check_positive_within(f: &ScalarField, floor: f64) -> Result<()> {
    let g = f.grid();
    let mut worst = (f64::INFINITY, 0, 0);
    for i in 0..g.ns {
        let row = f.row(i);
        let peak = row.iter().cloned().fold(0.0f64, f64::max);
        for (j, &v) in row.iter().enumerate() {
            let bad = v.is_nan() || peak <= 0.0 || if floor == 0.0 { v <= 0.0 } else { v < -floor * peak };
            if bad && !(v >= worst.0) {
                worst = (v, i, j);
            }
        }
    }
    if worst.0 == f64::INFINITY {
        Ok(())
    } else {
        Err(Error::Positivity { value: worst.0, s: g.s(worst.1), t: g.t(worst.2) })
    }
}
