//! Slope of `𝒩` along the ray of a degeneration against the exact `W1`,
//! and the per-component (Deligne pairing) slopes against `C1, C2, C3`.
//!
//! Torus-aligned specs are evaluated on the `(s, t)` grid along the flow ray.
//! The Euler spec `O(−1) ⊂ O ⊕ O` is not torus-aligned: its ray is invariant
//! under the diagonal `SU(2)` of `P^1 × P^1` instead, and every integrand
//! depends only on the chordal distance `x` from the point `[1 : z]` of the
//! fiber over `z`. Pushed forward to `x` the volume is uniform on `[0, 1]`,
//! so the functionals reduce to 1-D integrals.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{fib_functionals, FibFunctionals, FibrationContext};
use crate::geodesics::{ray_from_degeneration, ray_speed, HORIZON_MARGIN};
use crate::grid::LogGrid;
use crate::model::{rational_to_f64, sigmoid, softplus, FibrationModel};
use crate::stability::{class_constants, fmt_q, q, shipped_spec, w0_w1, DegenerationSpec, Flag, Q};
use crate::sum::trapezoid;

/// Rays are sampled at `t = 0, 1, …, RAY_HORIZON`.
pub const RAY_HORIZON: f64 = 8.0;

/// Half-width of the diagonal quadrature window beyond `±T`.
pub const DIAGONAL_MARGIN: f64 = 20.0;

/// Tolerance of [`slope_limit_check`] and [`deligne_slope_check`].
pub const SLOPE_TOL: f64 = 0.05;

/// Spec used to fix the slope normalization.
pub const CALIBRATION_SPEC: &str = "product-f1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayMethod {
    /// Fiber translation on the `(s, t)` grid.
    TorusFlow,
    /// 1-D reduction by the diagonal `SU(2)` symmetry.
    Diagonal,
}

impl RayMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            RayMethod::TorusFlow => "torus-flow",
            RayMethod::Diagonal => "diagonal",
        }
    }
}

/// How the ray of `spec` is evaluated, if at all.
pub fn ray_method(spec: &DegenerationSpec) -> Result<RayMethod> {
    spec.validate()?;
    match &spec.flag {
        Flag::Summand(_) => {
            if spec.h_twist_base != 0 {
                return Err(Error::NotAligned(format!(
                    "{}: base twist of H on a torus ray is not supported",
                    spec.name
                )));
            }
            Ok(RayMethod::TorusFlow)
        }
        Flag::SubLine { degree: -1, sections } if spec.bundle == [0, 0] && is_euler(sections) => {
            if spec.weights.0 <= spec.weights.1 {
                return Err(Error::NotAligned(format!(
                    "{}: diagonal ray needs the sub-line weight above the quotient weight",
                    spec.name
                )));
            }
            Ok(RayMethod::Diagonal)
        }
        Flag::SubLine { .. } => Err(Error::NotAligned(format!(
            "{}: the ray is neither torus-aligned nor the diagonal Euler ray",
            spec.name
        ))),
    }
}

/// `O(−1) → O ⊕ O` by `(1, z)` up to the `GL_2` action fixing the
/// diagonal symmetry: sections `a` and `b z` with `a, b ≠ 0`.
fn is_euler(sections: &[Vec<i64>]) -> bool {
    let trim = |v: &Vec<i64>| {
        let mut v = v.clone();
        while v.last() == Some(&0) {
            v.pop();
        }
        v
    };
    let (s0, s1) = (trim(&sections[0]), trim(&sections[1]));
    s0.len() == 1 && s0[0] != 0 && s1.len() == 2 && s1[0] == 0 && s1[1] != 0 && s0[0].abs() == s1[1].abs()
}

/// `log σ(z)`, stable for both signs.
fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

/// Fibration functionals of the diagonal Euler ray at time `time`, with
/// `L = π*O(β)` and `H = O(1) ⊗ π*O(e)`, by the trapezoid rule in
/// `y = logit x` on `nodes` points.
///
/// The ray potential is `F = log(1 + (e^T − 1) x) − T = L(y + T) − L(y) − T`
/// with `L` the softplus. Against the unit volume `ω_1∧ω_2` of `P^1 × P^1`
/// the densities are `ω_i ∧ i∂∂̄F = D` and `(i∂∂̄F)² = 2(D² − E²)` with
/// `D = F_yy / σ'(y)` and `E = D + F_y / (1 − σ(y))`; the vertical ratio is
/// `1 + D`.
pub fn diagonal_functionals(time: f64, beta: f64, e: f64, nodes: usize) -> FibFunctionals {
    let half = time.abs() + DIAGONAL_MARGIN;
    let h = 2.0 * half / (nodes - 1) as f64;
    let mut parts = vec![[0.0f64; 4]; nodes];
    parts.par_iter_mut().enumerate().for_each(|(k, out)| {
        let y = -half + k as f64 * h;
        let yt = y + time;
        let f = softplus(yt) - softplus(y) - time;
        let g = (log_sigmoid(y) + log_sigmoid(-y)).exp();
        // 1 + D = σ'(y + T) / σ'(y)
        let log_ratio = log_sigmoid(yt) + log_sigmoid(-yt) - log_sigmoid(y) - log_sigmoid(-y);
        let d = log_ratio.exp_m1();
        let fy = sigmoid(yt) - sigmoid(y);
        let ee = d + fy * (1.0 + y.exp());
        let mixed = 2.0 * (d - ee) * (d + ee);
        // ω_X = ω_2 + e ω_1, ρ = 2 ω_2, Ric_B = 2 ω_1
        let wphi2 = 2.0 * e + 2.0 * (1.0 + e) * d + mixed;
        let i = beta * f * (2.0 + d);
        let j = f * (6.0 * e + 3.0 * (1.0 + e) * d + mixed);
        let r = -f * (4.0 + 4.0 * e + 4.0 * d);
        let hh = log_ratio * wphi2;
        *out = [hh * g, r * g, i * g, j * g];
    });
    let col = |c: usize| trapezoid(&parts.iter().map(|p| p[c]).collect::<Vec<_>>(), h);
    FibFunctionals { h: col(0), r: col(1), i: col(2), j: col(3) }
}

/// The functionals along a sampled ray.
#[derive(Debug, Clone)]
pub struct RaySeries {
    pub method: RayMethod,
    pub times: Vec<f64>,
    pub parts: Vec<FibFunctionals>,
    pub a0: f64,
    pub a1: f64,
    /// Nodes per axis of the evaluation.
    pub nodes: usize,
}

impl RaySeries {
    pub fn n_values(&self) -> Vec<f64> {
        self.parts.iter().map(|p| self.combine(p)).collect()
    }

    fn combine(&self, p: &FibFunctionals) -> f64 {
        p.h + p.r + self.a1 * p.i + self.a0 / 3.0 * p.j
    }

    /// `(A0/3) J̃`, `A1 Ĩ` and `H̃ + R̃` per sample.
    pub fn components(&self) -> [Vec<f64>; 3] {
        [
            self.parts.iter().map(|p| self.a0 / 3.0 * p.j).collect(),
            self.parts.iter().map(|p| self.a1 * p.i).collect(),
            self.parts.iter().map(|p| p.h + p.r).collect(),
        ]
    }
}

/// `grid` widened in `t` (same spacing) so the flow of speed `speed` over
/// `[0, horizon]` stays inside the window for the model with parameter `a`.
pub fn ray_grid(grid: &LogGrid, a: i64, speed: f64, horizon: f64) -> Result<LogGrid> {
    let need = a.abs() as f64 * grid.s_range + speed.abs() * horizon + HORIZON_MARGIN + 1.0;
    if need <= grid.t_range {
        return Ok(*grid);
    }
    let nt = (2.0 * need / grid.ht()).ceil() as usize + 1;
    let mut g = LogGrid::new(grid.s_range, need, grid.ns, nt, grid.stencil_order)?;
    g.closure = grid.closure;
    Ok(g)
}

fn check_model(spec: &DegenerationSpec, model: &FibrationModel) -> Result<()> {
    let a = spec.bundle[1] - spec.bundle[0];
    if model.a != a.abs() {
        return Err(Error::NotAligned(format!(
            "{}: spec bundle O({}) ⊕ O({}) does not match the model's a = {}",
            spec.name, spec.bundle[0], spec.bundle[1], model.a
        )));
    }
    if model.base_class_volume != q(spec.base_degree) {
        return Err(Error::NotAligned(format!(
            "{}: spec base degree {} does not match the model's base volume {}",
            spec.name, spec.base_degree, model.base_class_volume
        )));
    }
    Ok(())
}

/// Evaluates the functionals along the ray of `spec` at `t = 0, …, horizon`.
/// The compactification's time twist `O(c)` shifts the ray by `c t`.
pub fn ray_series(spec: &DegenerationSpec, model: &FibrationModel, horizon: f64) -> Result<RaySeries> {
    let method = ray_method(spec)?;
    check_model(spec, model)?;
    let steps = horizon.round() as usize;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64).collect();
    let shift = spec.h_twist_time as f64;
    let consts = class_constants(&spec.bundle, spec.h_twist_base, &q(spec.base_degree))?;
    let (a0, a1) = (rational_to_f64(&consts.a0), rational_to_f64(&consts.a1));
    match method {
        RayMethod::TorusFlow => {
            let c = ray_speed(spec, model)?;
            let m = model.with_grid(ray_grid(&model.grid, model.a, c, horizon)?);
            let ctx = FibrationContext::new(&m)?;
            let ray = ray_from_degeneration(spec, &m, horizon, 1)?;
            let parts = ray
                .path
                .potentials
                .par_iter()
                .zip(&ray.path.times)
                .map(|(p, t)| {
                    let p = if shift != 0.0 { p.add_const(shift * t) } else { p.clone() };
                    fib_functionals(&p, &ctx)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RaySeries { method, times, parts, a0, a1, nodes: m.grid.nt })
        }
        RayMethod::Diagonal => {
            let nodes = model.grid.nt;
            let (beta, e) = (model.beta(), spec.h_twist_base as f64);
            let r = (spec.exponent * (spec.weights.0 - spec.weights.1)) as f64;
            let parts = times
                .par_iter()
                .map(|&t| {
                    let mut p = diagonal_functionals(r * t, beta, e, nodes);
                    // a constant c t adds c t ∫ω_B∧(ω_X+ω_φ), c t ∫(ω_X²+ω_X∧ω_φ+ω_φ²), …
                    p.i += shift * t * 2.0 * beta;
                    p.j += shift * t * 6.0 * e;
                    p.r -= shift * t * (4.0 + 4.0 * e);
                    p
                })
                .collect();
            Ok(RaySeries { method, times, parts, a0, a1, nodes })
        }
    }
}

/// Limit of the end differences `d_k = v_k − v_{k−1}`: Aitken's Δ² on the
/// last three, falling back to the last difference when the tail has
/// already converged (or is not geometric).
pub fn extrapolate_slope(values: &[f64]) -> f64 {
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let n = d.len();
    if n < 3 {
        return d.last().copied().unwrap_or(0.0);
    }
    let (d0, d1, d2) = (d[n - 3], d[n - 2], d[n - 1]);
    let (a, b) = (d1 - d0, d2 - d1);
    let denom = b - a;
    let scale = d2.abs().max(1.0);
    if b.abs() <= 1e-13 * scale || denom.abs() <= 1e-13 * scale {
        return d2;
    }
    let ratio = b / a;
    if !(0.0..1.0).contains(&ratio) {
        return d2;
    }
    d2 - b * b / denom
}

/// Numerical slope against `W1` for one spec.
#[derive(Debug, Clone)]
pub struct SlopeReport {
    pub spec: String,
    pub method: RayMethod,
    pub nodes: usize,
    pub times: Vec<f64>,
    pub n_values: Vec<f64>,
    /// Last end difference.
    pub raw_slope: f64,
    /// Extrapolated end differences.
    pub slope: f64,
    /// Normalization factor (exact `W1` over numerical slope on the
    /// calibration spec).
    pub calibration: f64,
    pub w1: Q,
    /// `|κ slope − W1| / |W1|`, or the absolute deviation when `W1 = 0`.
    pub deviation: f64,
    pub tol: f64,
}

impl SlopeReport {
    pub fn calibrated_slope(&self) -> f64 {
        self.calibration * self.slope
    }

    pub fn passed(&self) -> bool {
        self.deviation <= self.tol
    }

    pub fn header(&self) -> String {
        format!(
            "spec {} method {} nodes {} calibration {:e} (exact W1 / slope on {CALIBRATION_SPEC}) W1 {}",
            self.spec,
            self.method.tag(),
            self.nodes,
            self.calibration,
            fmt_q(&self.w1)
        )
    }
}

fn deviation(value: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        value.abs()
    } else {
        (value - exact).abs() / exact.abs()
    }
}

/// Factor `κ = W1 / slope` on the calibration spec (`O ⊕ O(1)`, summand
/// `O(1)` scaled), evaluated on `grid`. Exact agreement would be `κ = 1`.
pub fn calibration_factor(grid: &LogGrid) -> Result<f64> {
    let spec = shipped_spec(CALIBRATION_SPEC).expect("calibration spec is shipped");
    let model = FibrationModel::new(1, num_rational::BigRational::from_integer(1.into()), *grid)?;
    let series = ray_series(&spec, &model, RAY_HORIZON)?;
    let slope = extrapolate_slope(&series.n_values());
    let w1 = rational_to_f64(&w0_w1(&spec)?.w1);
    Ok(w1 / slope)
}

/// `lim 𝒩(φ_t)/t` along the ray of `spec` against the exact `W1`.
pub fn slope_limit_check(spec: &DegenerationSpec, model: &FibrationModel) -> Result<SlopeReport> {
    let kappa = calibration_factor(&model.grid)?;
    slope_limit_with(spec, model, kappa, SLOPE_TOL)
}

/// [`slope_limit_check`] with a given calibration factor and tolerance.
pub fn slope_limit_with(spec: &DegenerationSpec, model: &FibrationModel, kappa: f64, tol: f64) -> Result<SlopeReport> {
    let series = ray_series(spec, model, RAY_HORIZON)?;
    let n_values = series.n_values();
    let d = n_values.windows(2).map(|w| w[1] - w[0]).last().unwrap_or(0.0);
    let slope = extrapolate_slope(&n_values);
    let w1 = w0_w1(spec)?.w1;
    let dev = deviation(kappa * slope, rational_to_f64(&w1));
    Ok(SlopeReport {
        spec: spec.name.clone(),
        method: series.method,
        nodes: series.nodes,
        times: series.times,
        n_values,
        raw_slope: d,
        slope,
        calibration: kappa,
        w1,
        deviation: dev,
        tol,
    })
}

/// [`slope_limit_check`] at several node counts (both axes), with the
/// calibration fixed once on the model's grid.
pub fn slope_refinement(spec: &DegenerationSpec, model: &FibrationModel, nodes: &[usize]) -> Result<Vec<SlopeReport>> {
    let kappa = calibration_factor(&model.grid)?;
    nodes
        .iter()
        .map(|&n| {
            let g = model.grid;
            let mut grid = LogGrid::new(g.s_range, g.t_range, n, n, g.stencil_order)?;
            grid.closure = g.closure;
            slope_limit_with(spec, &model.with_grid(grid), kappa, SLOPE_TOL)
        })
        .collect()
}

/// Deviations are non-increasing along a refinement. Changes below the
/// calibration's own resolution `|κ − 1|` are ties: once the discretization
/// error drops under it the deviation plateaus there.
pub fn improves_under_refinement(reports: &[SlopeReport]) -> bool {
    reports.windows(2).all(|w| {
        let floor = (w[1].calibration - 1.0).abs().max(1e-12);
        w[1].deviation <= w[0].deviation + floor
    })
}

/// One Deligne pairing difference: numerical slope against its exact
/// intersection number.
#[derive(Debug, Clone)]
pub struct ComponentSlope {
    pub name: &'static str,
    pub values: Vec<f64>,
    pub slope: f64,
    pub exact: Q,
    pub deviation: f64,
}

#[derive(Debug, Clone)]
pub struct DeligneReport {
    pub spec: String,
    pub method: RayMethod,
    pub components: Vec<ComponentSlope>,
    pub total_slope: f64,
    pub w1: Q,
    pub tol: f64,
}

impl DeligneReport {
    pub fn passed(&self) -> bool {
        self.components.iter().all(|c| c.deviation <= self.tol)
    }

    /// Sum of component slopes minus the slope of `𝒩` itself.
    pub fn additivity_defect(&self) -> f64 {
        self.components.iter().map(|c| c.slope).sum::<f64>() - self.total_slope
    }
}

/// Slopes of `(A0/3) J̃`, `A1 Ĩ` and `H̃ + R̃` along the ray against
/// `C1 = (A0/3) ℋ̄³`, `C2 = A1 L̄ℋ̄²` and `C3 = ℋ̄² K`.
pub fn deligne_slope_check(spec: &DegenerationSpec, model: &FibrationModel) -> Result<DeligneReport> {
    let series = ray_series(spec, model, RAY_HORIZON)?;
    let w = w0_w1(spec)?;
    let names = ["(A0/3) J", "A1 I", "H + R"];
    let exact = [w.c1.clone(), w.c2.clone(), w.c3.clone()];
    let components = series
        .components()
        .into_iter()
        .zip(names)
        .zip(exact)
        .map(|((values, name), exact)| {
            let slope = extrapolate_slope(&values);
            let dev = deviation(slope, rational_to_f64(&exact));
            ComponentSlope { name, values, slope, exact, deviation: dev }
        })
        .collect();
    Ok(DeligneReport {
        spec: spec.name.clone(),
        method: series.method,
        components,
        total_slope: extrapolate_slope(&series.n_values()),
        w1: w.w1,
        tol: SLOPE_TOL,
    })
}

/// Exact `W1` of `spec` as `f64` (for reports).
pub fn w1_f64(spec: &DegenerationSpec) -> Result<f64> {
    Ok(rational_to_f64(&w0_w1(spec)?.w1))
}
