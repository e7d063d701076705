use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::field::{ScalarField, Slopes};
use crate::form::Form11;
use crate::grid::LogGrid;

/// `log(1 + e^x)`, overflow-free.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `σ(x)(1 - σ(x))`, the Fubini–Study density in a log coordinate.
pub fn fs_density(x: f64) -> f64 {
    sigmoid(x) * sigmoid(-x)
}

/// Gaussian bump `amp * exp(-((s - center)/width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub amp: f64,
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn new(amp: f64, center: f64, width: f64) -> Self {
        Bump { amp, center, width }
    }

    /// Value and first two derivatives.
    pub fn eval(&self, s: f64) -> [f64; 3] {
        let x = (s - self.center) / self.width;
        let e = self.amp * (-x * x).exp();
        let w = self.width;
        [e, -2.0 * x / w * e, (4.0 * x * x - 2.0) / (w * w) * e]
    }
}

pub(crate) fn bumps(bs: &[Bump], s: f64) -> [f64; 3] {
    bs.iter().fold([0.0; 3], |acc, b| {
        let v = b.eval(s);
        [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]
    })
}

/// Calabi-ansatz reference metrics on `P(O ⊕ O(a))`: fiberwise Fubini–Study
/// with fiber centre `λ(s) = a log(1+e^s) + τ(s)` and a base term `q(s)`.
/// The reference potential is `log(1 + e^{t - λ(s)}) + q(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalabiAnsatz {
    pub a: i64,
    pub tau: Vec<Bump>,
    pub q: Vec<Bump>,
}

impl CalabiAnsatz {
    pub fn product(a: i64) -> Self {
        CalabiAnsatz { a, tau: vec![], q: vec![] }
    }

    /// Fiber centre `λ` and its first two derivatives.
    pub fn lambda(&self, s: f64) -> [f64; 3] {
        let a = self.a as f64;
        let t = bumps(&self.tau, s);
        [a * softplus(s) + t[0], a * sigmoid(s) + t[1], a * fs_density(s) + t[2]]
    }

    pub fn potential(&self, s: f64, t: f64) -> f64 {
        softplus(t - self.lambda(s)[0]) + bumps(&self.q, s)[0]
    }

    /// Coefficients `[A, C, G]` of the reference form at `(s, t)`.
    pub fn form(&self, s: f64, t: f64) -> [f64; 3] {
        let [l0, l1, l2] = self.lambda(s);
        let u = t - l0;
        let (sg, g) = (sigmoid(u), fs_density(u));
        let q2 = bumps(&self.q, s)[2];
        [l1 * l1 * g - l2 * sg + q2, -l1 * g, g]
    }
}

/// The model fibration `X = P(O ⊕ O(a)) → P^1` with its reference data.
#[derive(Debug, Clone, PartialEq)]
pub struct FibrationModel {
    pub a: i64,
    pub fiber_class_volume: BigRational,
    pub base_class_volume: BigRational,
    pub m: usize,
    pub n: usize,
    pub ansatz: CalabiAnsatz,
    pub grid: LogGrid,
}

impl FibrationModel {
    pub fn new(a: i64, base_class_volume: BigRational, grid: LogGrid) -> Result<Self> {
        FibrationModel::with_ansatz(CalabiAnsatz::product(a), base_class_volume, grid)
    }

    pub fn with_ansatz(ansatz: CalabiAnsatz, base_class_volume: BigRational, grid: LogGrid) -> Result<Self> {
        if !base_class_volume.is_positive() {
            return Err(Error::Degenerate(format!("base volume {base_class_volume} must be positive")));
        }
        if ansatz.a < 0 {
            return Err(Error::Degenerate("use a >= 0; P(O ⊕ O(-a)) is the same surface".into()));
        }
        let m = FibrationModel {
            a: ansatz.a,
            fiber_class_volume: BigRational::one(),
            base_class_volume,
            m: 1,
            n: 1,
            ansatz,
            grid,
        };
        m.omega_x().check_fiber_positive()?;
        Ok(m)
    }

    pub fn with_grid(&self, grid: LogGrid) -> Self {
        FibrationModel { grid, ..self.clone() }
    }

    pub fn beta(&self) -> f64 {
        self.base_class_volume.to_f64().unwrap()
    }

    pub fn reference_potential(&self) -> ScalarField {
        let ans = &self.ansatz;
        ScalarField::from_fn(self.grid, Slopes::new(0.0, 0.0, 0.0, 1.0), |s, t| ans.potential(s, t))
    }

    /// Reference relatively Kähler form `ω_X`, evaluated in closed form.
    pub fn omega_x(&self) -> Form11 {
        let ans = &self.ansatz;
        Form11::from_fn(self.grid, |s, t| ans.form(s, t))
    }

    /// Fubini–Study form of area `β` on the base, pulled back.
    pub fn omega_b(&self) -> Form11 {
        let beta = self.beta();
        let mut f = Form11::zero(self.grid);
        f.ss = ScalarField::from_base(self.grid, (0.0, 0.0), |s| beta * fs_density(s));
        f
    }

    /// `Ric(ω_B) = 2 ω_B / β`, pulled back.
    pub fn ric_b(&self) -> Form11 {
        let mut f = Form11::zero(self.grid);
        f.ss = ScalarField::from_base(self.grid, (0.0, 0.0), |s| 2.0 * fs_density(s));
        f
    }

    /// `ω_k = ω_X + k ω_B`.
    pub fn kahler_form(&self, k: f64) -> Result<Form11> {
        let w = self.omega_x().add_scaled(&self.omega_b(), k)?;
        w.check_positive()?;
        Ok(w)
    }

    /// Smallest `k` for which `ω_X + k ω_B` is positive on the grid.
    pub fn positivity_threshold(&self) -> f64 {
        let ans = &self.ansatz;
        let beta = self.beta();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.grid.ns {
            let s = self.grid.s(i);
            let [_, _, l2] = ans.lambda(s);
            let q2 = bumps(&ans.q, s)[2];
            let b = beta * fs_density(s);
            // h = q'' - λ'' σ(u) ranges over [q'' - max(λ'',0), q'' - min(λ'',0)]
            let hmin = q2 - l2.max(0.0);
            worst = worst.max(-hmin / b);
        }
        worst.max(0.0)
    }

    /// Relative potential moving every fiber centre by `δ(s)` and adding the
    /// base function `f(s)`: `L(u - δ) - L(u) + f`. Lies in `K_E` exactly.
    pub fn fiber_shift_potential(
        &self,
        delta: impl Fn(f64) -> f64 + Sync,
        base: impl Fn(f64) -> f64 + Sync,
    ) -> ScalarField {
        let ans = &self.ansatz;
        ScalarField::from_fn(self.grid, Slopes::ZERO, |s, t| {
            let u = t - ans.lambda(s)[0];
            let d = delta(s);
            // for u > 0 both terms are ~u; cancel the linear parts analytically
            let shift = if u > 0.0 { -d + softplus(d - u) - softplus(-u) } else { softplus(u - d) - softplus(u) };
            shift + base(s)
        })
    }
}

impl FibrationModel {
    /// Gaussian bump `amp · exp(-((s-s0)/ws)² - ((u-u0)/wu)²)` in the base
    /// coordinate and the fiber coordinate `u = t - λ(s)` of the reference
    /// metric. Vanishes at every truncation boundary, so it is a well-resolved
    /// generic (non-`K_E`) relative potential.
    pub fn bump_potential(&self, amp: f64, centre: (f64, f64), width: (f64, f64)) -> ScalarField {
        let ans = &self.ansatz;
        let (s0, u0) = centre;
        let (ws, wu) = width;
        ScalarField::from_fn(self.grid, Slopes::ZERO, |s, t| {
            let u = t - ans.lambda(s)[0];
            amp * (-((s - s0) / ws).powi(2) - ((u - u0) / wu).powi(2)).exp()
        })
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        0.0
    } else {
        r.to_f64().unwrap_or(f64::NAN)
    }
}
