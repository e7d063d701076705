//! Energy functionals on the model fibration and their derivative formulas:
//! Mabuchi `ℳ` (Chen–Tian form), Monge–Ampère energy, the fibration
//! functionals `H̃, R̃, Ĩ, J̃`, the log-norm `𝒩`, and the `k`-expansion checks.
//!
//! Potentials are relative to an analytic reference form, so every integrand
//! carries a volume weight and roundoff at the truncation boundary stays small.

use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::form::Form11;
use crate::geometry::{
    ddbar, horizontal_part, project_e, relative_csck_spread, rho_curvature, ricci, theta_unchecked, KE_TOLERANCE,
};
use crate::model::{rational_to_f64, FibrationModel};
use crate::stability::{class_constants, fmt_q, q, ClassConstants, Q};
use crate::stencil::offsets_weights;
use crate::sum::{cumulative, romberg};

/// How a path was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    StraightLine,
    FlowGeodesic,
    Ray,
    Custom,
}

impl PathKind {
    pub fn tag(&self) -> &'static str {
        match self {
            PathKind::StraightLine => "straight-line",
            PathKind::FlowGeodesic => "flow-geodesic",
            PathKind::Ray => "ray",
            PathKind::Custom => "custom",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        [PathKind::StraightLine, PathKind::FlowGeodesic, PathKind::Ray, PathKind::Custom]
            .into_iter()
            .find(|k| k.tag() == tag)
            .ok_or_else(|| Error::Format(format!("unknown path kind '{tag}'")))
    }
}

/// Uniformly time-sampled path of relative potentials.
#[derive(Debug, Clone)]
pub struct PotentialPath {
    pub times: Vec<f64>,
    pub potentials: Vec<ScalarField>,
    pub kind: PathKind,
}

const TIME_STENCIL: usize = 7;

impl PotentialPath {
    pub fn new(times: Vec<f64>, potentials: Vec<ScalarField>, kind: PathKind) -> Result<Self> {
        if times.len() != potentials.len() {
            return Err(Error::BadTimes);
        }
        if times.len() < 2 {
            return Err(Error::TooFewSamples { need: 2, got: times.len() });
        }
        let dt = times[1] - times[0];
        if dt <= 0.0 || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-12 * dt.max(1.0)) {
            return Err(Error::BadTimes);
        }
        let g = potentials[0].grid();
        if potentials.iter().any(|p| p.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(PotentialPath { times, potentials, kind })
    }

    /// `n + 1` uniform samples of `t ↦ f(t)` on `[t0, t1]`.
    pub fn from_fn(
        t0: f64,
        t1: f64,
        n: usize,
        kind: PathKind,
        f: impl Fn(f64) -> Result<ScalarField> + Sync,
    ) -> Result<Self> {
        let times: Vec<f64> = (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect();
        let potentials = times.par_iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        PotentialPath::new(times, potentials, kind)
    }

    /// `t ↦ t φ` on `[0, 1]`.
    pub fn straight_line(phi: &ScalarField, n: usize) -> Result<Self> {
        PotentialPath::from_fn(0.0, 1.0, n, PathKind::StraightLine, |t| Ok(phi.scale(t)))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Finite-difference weights in time at sample `i` (order 6 where the
    /// path is long enough; windows shift inward at the ends).
    fn time_weights(&self, i: usize, deriv: usize) -> Vec<(usize, f64)> {
        let n = self.len();
        let width = (TIME_STENCIL + deriv - 1).min(n);
        let start = i.saturating_sub(width / 2).min(n - width);
        let offsets: Vec<i64> = (start..start + width).map(|k| k as i64 - i as i64).collect();
        let h = self.dt().powi(deriv as i32);
        offsets_weights(&offsets, 0.0, deriv)
            .into_iter()
            .enumerate()
            .map(|(k, w)| (start + k, w / h))
            .collect()
    }

    /// `Σ w_k (φ_k − φ_i)`: exact zero on constant paths.
    fn combine(&self, i: usize, weights: &[(usize, f64)]) -> Result<ScalarField> {
        let mut acc = ScalarField::zeros(*self.potentials[0].grid());
        for &(k, w) in weights {
            if k != i {
                acc = acc.axpby(1.0, &self.potentials[k].sub(&self.potentials[i])?, w)?;
            }
        }
        acc.slopes = crate::field::Slopes::ZERO;
        Ok(acc)
    }

    /// `φ̇` at sample `i`.
    pub fn velocity(&self, i: usize) -> Result<ScalarField> {
        if self.len() < 3 {
            return Err(Error::TooFewSamples { need: 3, got: self.len() });
        }
        self.combine(i, &self.time_weights(i, 1))
    }

    /// `φ̈` at sample `i`.
    pub fn acceleration(&self, i: usize) -> Result<ScalarField> {
        if self.len() < 3 {
            return Err(Error::TooFewSamples { need: 3, got: self.len() });
        }
        self.combine(i, &self.time_weights(i, 2))
    }

    /// Check that `ω + i∂∂̄φ_t` is fiberwise positive at every sample.
    pub fn check_fiber_positive(&self, omega: &Form11) -> Result<()> {
        for p in &self.potentials {
            omega.add(&ddbar(p)?)?.check_fiber_positive()?;
        }
        Ok(())
    }
}

/// Derivative samples along a path and their running integral.
#[derive(Debug, Clone)]
pub struct DerivativeSeries {
    pub times: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Running integral from the first sample (Simpson at even indices).
    pub integral: Vec<f64>,
    /// Romberg-extrapolated integral over the whole path.
    pub total: f64,
}

impl DerivativeSeries {
    fn from_samples(times: Vec<f64>, derivative: Vec<f64>) -> Self {
        let h = times[1] - times[0];
        let integral = cumulative(&derivative, h);
        let total = romberg(&derivative, h);
        DerivativeSeries { times, derivative, integral, total }
    }
}

/// A Kähler form with its Ricci form and average scalar curvature.
#[derive(Debug, Clone)]
pub struct KahlerContext {
    pub omega: Form11,
    pub ric: Form11,
    pub s_hat: f64,
}

impl KahlerContext {
    /// `Ŝ` computed by quadrature of `2 Ric ∧ ω / ω²`.
    pub fn new(omega: Form11) -> Result<Self> {
        let ric = ricci(&omega)?;
        let s_hat = 2.0 * ric.wedge(&omega).integrate() / omega.wedge(&omega).integrate();
        Ok(KahlerContext { omega, ric, s_hat })
    }

    /// `ω_k = ω_X + k ω_B` on the model with the exact `Ŝ_k`.
    pub fn for_model(model: &FibrationModel, k: f64) -> Result<Self> {
        let omega = model.kahler_form(k)?;
        let ric = ricci(&omega)?;
        let consts = model_class_constants(model)?;
        let kq = Q::from_float(k).ok_or_else(|| Error::Degenerate(format!("k = {k} is not finite")))?;
        let s_hat = rational_to_f64(&consts.s_hat(&kq));
        Ok(KahlerContext { omega, ric, s_hat })
    }
}

/// Chen–Tian decomposition `ℳ = H + R + Ŝ I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MabuchiParts {
    pub h: f64,
    pub r: f64,
    pub i: f64,
    pub s_hat: f64,
    pub total: f64,
}

/// Monge–Ampère energy `I(φ) = (1/3) ∫ φ (ω² + ω∧ω_φ + ω_φ²)`.
pub fn monge_ampere_energy(phi: &ScalarField, omega: &Form11) -> Result<f64> {
    let w_phi = omega.add(&ddbar(phi)?)?;
    w_phi.check_positive()?;
    ma_energy_with(phi, omega, &w_phi)
}

fn ma_energy_with(phi: &ScalarField, omega: &Form11, w_phi: &Form11) -> Result<f64> {
    let dens = omega.wedge(omega).add(&omega.wedge(w_phi))?.add(&w_phi.wedge(w_phi))?;
    Ok(phi.mul(&dens)?.integrate() / 3.0)
}

/// `log(a/b)`, zero where `a` is a roundoff-level non-positive tail value
/// (its weight is then negligible as well).
fn log_ratio(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (a / b).ln()
    } else {
        0.0
    }
}

/// `ℳ(φ)` by the Chen–Tian formula.
pub fn mabuchi_chen_tian(phi: &ScalarField, ctx: &KahlerContext) -> Result<MabuchiParts> {
    let omega = &ctx.omega;
    let w_phi = omega.add(&ddbar(phi)?)?;
    w_phi.check_positive()?;
    let d0 = omega.det();
    let d1 = w_phi.det();
    let h = d1
        .zip_with(&d0, |a, b| log_ratio(a, b) * 2.0 * a, |_, _| 0.0)?
        .integrate();
    let r = -phi.mul(&ctx.ric.wedge(&omega.add(&w_phi)?))?.integrate();
    let i = ma_energy_with(phi, omega, &w_phi)?;
    Ok(MabuchiParts { h, r, i, s_hat: ctx.s_hat, total: h + r + ctx.s_hat * i })
}

/// `dℳ/dt = Ŝ ∫ φ̇ ω_t² − 2 ∫ φ̇ Ric(ω_t) ∧ ω_t`, integrated along the path
/// with `ℳ(first sample) = 0`.
pub fn mabuchi_derivative(path: &PotentialPath, ctx: &KahlerContext) -> Result<DerivativeSeries> {
    let d: Vec<f64> = (0..path.len())
        .into_par_iter()
        .map(|i| {
            let w = ctx.omega.add(&ddbar(&path.potentials[i])?)?;
            let ric = ricci(&w)?;
            let v = path.velocity(i)?;
            let vol = w.wedge(&w);
            let sdens = ric.wedge(&w).scale(2.0);
            let dens = vol.axpby(ctx.s_hat, &sdens, -1.0)?;
            Ok(v.mul(&dens)?.integrate())
        })
        .collect::<Result<_>>()?;
    Ok(DerivativeSeries::from_samples(path.times.clone(), d))
}

/// Reference data of the fibration used by `H̃, R̃, Ĩ, J̃` and `𝒩`.
#[derive(Debug, Clone)]
pub struct FibrationContext {
    pub omega_x: Form11,
    pub omega_b: Form11,
    pub ric_b: Form11,
    /// `ρ` of the reference `ω_X`.
    pub rho: Form11,
    pub a0: f64,
    pub a1: f64,
    pub beta: f64,
}

impl FibrationContext {
    pub fn new(model: &FibrationModel) -> Result<Self> {
        let omega_x = model.omega_x();
        let rho = rho_curvature(&omega_x)?;
        let c = model_class_constants(model)?;
        Ok(FibrationContext {
            omega_x,
            omega_b: model.omega_b(),
            ric_b: model.ric_b(),
            rho,
            a0: rational_to_f64(&c.a0),
            a1: rational_to_f64(&c.a1),
            beta: model.beta(),
        })
    }

    /// `ω_X + i∂∂̄φ`.
    pub fn relative_form(&self, phi: &ScalarField) -> Result<Form11> {
        self.omega_x.add(&ddbar(phi)?)
    }
}

/// The fibration functionals at one potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FibFunctionals {
    pub h: f64,
    pub r: f64,
    pub i: f64,
    pub j: f64,
}

/// `H̃ = ∫ log(g_φ/g) ω_φ²`, `R̃ = −∫ φ (ρ + Ric_B) ∧ (ω_X + ω_φ)`,
/// `Ĩ = ∫ φ ω_B ∧ (ω_X + ω_φ)`, `J̃ = ∫ φ (ω_X² + ω_X∧ω_φ + ω_φ²)`.
pub fn fib_functionals(phi: &ScalarField, ctx: &FibrationContext) -> Result<FibFunctionals> {
    let w = ctx.relative_form(phi)?;
    w.check_fiber_positive()?;
    fib_functionals_with(phi, ctx, &w)
}

fn fib_functionals_with(phi: &ScalarField, ctx: &FibrationContext, w: &Form11) -> Result<FibFunctionals> {
    let x = &ctx.omega_x;
    let ww = w.wedge(w);
    let ratio = w.tt.zip_with(&x.tt, log_ratio, |_, _| 0.0)?;
    let h = ratio.mul(&ww)?.integrate();
    let sum = x.add(w)?;
    let c1 = ctx.rho.add(&ctx.ric_b)?;
    let r = -phi.mul(&c1.wedge(&sum))?.integrate();
    let i = phi.mul(&ctx.omega_b.wedge(&sum))?.integrate();
    let jd = x.wedge(x).add(&x.wedge(w))?.add(&ww)?;
    let j = phi.mul(&jd)?.integrate();
    Ok(FibFunctionals { h, r, i, j })
}

/// `𝒩` with its components and the measured `K_E` defect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNorm {
    pub value: f64,
    pub parts: FibFunctionals,
    /// Largest fiber scalar-curvature spread of `ω_φ`.
    pub ke_spread: f64,
}

/// `𝒩 = H̃ + R̃ + A1 Ĩ + (A0/3) J̃`. Membership in `K_E` is checked and a
/// warning is logged when it fails; the value is returned regardless.
pub fn log_norm_n(phi: &ScalarField, ctx: &FibrationContext) -> Result<LogNorm> {
    let w = ctx.relative_form(phi)?;
    w.check_fiber_positive()?;
    let (spread, s) = relative_csck_spread(&w)?;
    if spread > KE_TOLERANCE {
        warn!("potential is not in K_E: fiber scalar curvature spread {spread:.3e} at s = {s:.3}");
    }
    let p = fib_functionals_with(phi, ctx, &w)?;
    Ok(LogNorm { value: combine_n(&p, ctx), parts: p, ke_spread: spread })
}

fn combine_n(p: &FibFunctionals, ctx: &FibrationContext) -> f64 {
    p.h + p.r + ctx.a1 * p.i + ctx.a0 / 3.0 * p.j
}

/// `d𝒩/dt = −2 ∫ φ̇ p_t(θ_t) ω_t ∧ ω_B` along the path, integrated with
/// `𝒩(first sample) = 0`.
pub fn log_norm_derivative(path: &PotentialPath, ctx: &FibrationContext) -> Result<DerivativeSeries> {
    let d: Vec<f64> = (0..path.len())
        .into_par_iter()
        .map(|i| {
            let w = ctx.relative_form(&path.potentials[i])?;
            let (spread, s) = relative_csck_spread(&w)?;
            if spread > KE_TOLERANCE {
                warn!("path leaves K_E at t = {}: spread {spread:.3e} at s = {s:.3}", path.times[i]);
            }
            let th = theta_unchecked(&w, &ctx.omega_b)?;
            let pth = project_e(&th, &w, &ctx.omega_b)?;
            let v = path.velocity(i)?;
            Ok(-2.0 * v.mul(&pth)?.mul(&w.wedge(&ctx.omega_b))?.integrate())
        })
        .collect::<Result<_>>()?;
    Ok(DerivativeSeries::from_samples(path.times.clone(), d))
}

/// `𝒩(φ_t)` at every sample, by the closed formula.
pub fn log_norm_along(path: &PotentialPath, ctx: &FibrationContext) -> Result<Vec<f64>> {
    path.potentials
        .par_iter()
        .map(|p| Ok(log_norm_n(p, ctx)?.value))
        .collect()
}

/// `ℱ = 2∫ log(g_φ/g) ω_B∧ω_φ − 2∫ φ ρ∧ω_B + A0 Ĩ`, the leading coefficient
/// of `ℳ_k`; constant (zero) on `K_E`.
pub fn leading_functional(phi: &ScalarField, ctx: &FibrationContext) -> Result<f64> {
    let w = ctx.relative_form(phi)?;
    w.check_fiber_positive()?;
    let ratio = w.tt.zip_with(&ctx.omega_x.tt, log_ratio, |_, _| 0.0)?;
    let t1 = 2.0 * ratio.mul(&ctx.omega_b.wedge(&w))?.integrate();
    let t2 = -2.0 * phi.mul(&ctx.rho.wedge(&ctx.omega_b))?.integrate();
    let i = phi.mul(&ctx.omega_b.wedge(&ctx.omega_x.add(&w)?))?.integrate();
    Ok(t1 + t2 + ctx.a0 * i)
}

/// Exact `A0`, `A1`, `Ŝ_k` and `μ_k` of a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologicalConstants {
    pub a0: Q,
    pub a1: Q,
    pub mu_table: Vec<(i64, Q)>,
    exact: ClassConstants,
}

impl TopologicalConstants {
    pub fn mu(&self, k: &Q) -> Q {
        self.exact.mu(k)
    }

    pub fn s_hat(&self, k: &Q) -> Q {
        self.exact.s_hat(k)
    }

    /// `μ_k − (A0/2 + A1/(2k))` for each tabulated `k`.
    pub fn fit_residuals(&self) -> Vec<(i64, Q)> {
        self.mu_table
            .iter()
            .map(|(k, mu)| (*k, mu - (&self.a0 / q(2) + &self.a1 / q(2 * k))))
            .collect()
    }
}

fn model_class_constants(model: &FibrationModel) -> Result<ClassConstants> {
    // the reference class is H = O(1) (no base twist) with L = π*O(β)
    class_constants(&[0, model.a], 0, &model.base_class_volume)
}

/// Exact constants from the intersection ring of `X`.
pub fn topological_constants(model: &FibrationModel) -> Result<TopologicalConstants> {
    let exact = model_class_constants(model)?;
    let mu_table = (0..8).map(|e| 1i64 << e).map(|k| (k, exact.mu(&q(k)))).collect();
    Ok(TopologicalConstants { a0: exact.a0.clone(), a1: exact.a1.clone(), mu_table, exact })
}

/// `A0 = c1·ω_B / ω_X·ω_B` and `A1 = (c1·ω_X − ω_X²) / ω_X·ω_B` by
/// quadrature of curvature representatives.
pub fn numeric_constants(ctx: &FibrationContext) -> Result<(f64, f64)> {
    let c1 = ctx.rho.add(&ctx.ric_b)?;
    let xb = ctx.omega_x.wedge(&ctx.omega_b).integrate();
    let c1b = c1.wedge(&ctx.omega_b).integrate();
    let c1x = c1.wedge(&ctx.omega_x).integrate();
    let xx = ctx.omega_x.wedge(&ctx.omega_x).integrate();
    Ok((c1b / xb, (c1x - xx) / xb))
}

/// Least-squares fit of `y ≈ Σ c_j f_j(k)`.
fn least_squares(ks: &[f64], ys: &[f64], basis: &[fn(f64) -> f64]) -> Vec<f64> {
    let m = basis.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for (k, y) in ks.iter().zip(ys) {
        let row: Vec<f64> = basis.iter().map(|f| f(*k)).collect();
        for i in 0..m {
            for j in 0..m {
                a[i][j] += row[i] * row[j];
            }
            a[i][m] += row[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=m {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    (0..m).map(|i| a[i][m] / a[i][i]).collect()
}

/// Slope of `log|y|` against `log k`.
pub fn log_log_slope(ks: &[f64], ys: &[f64]) -> f64 {
    let lk: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().max(f64::MIN_POSITIVE).ln()).collect();
    let c = least_squares(&lk, &ly, &[|_| 1.0, |x| x]);
    c[1]
}

/// Fit of `ℳ_k` in `k` against the closed-form coefficients.
#[derive(Debug, Clone)]
pub struct ExpansionReport {
    pub ks: Vec<f64>,
    pub m_k: Vec<f64>,
    /// Fitted coefficients of `k`, `1`, `1/k` (a `1/k²` term is fitted and dropped).
    pub fitted_f: f64,
    pub fitted_n: f64,
    pub fitted_tail: f64,
    pub closed_f: f64,
    pub closed_n: f64,
    /// `ℳ_k − kℱ − 𝒩` with closed-form coefficients.
    pub residuals: Vec<f64>,
    pub residual_slope: f64,
}

impl ExpansionReport {
    pub fn relative_n_error(&self) -> f64 {
        (self.fitted_n - self.closed_n).abs() / self.closed_n.abs().max(f64::MIN_POSITIVE)
    }
}

fn ks_checked(ks: &[f64]) -> Result<()> {
    if ks.len() < 4 {
        return Err(Error::TooFewSamples { need: 4, got: ks.len() });
    }
    Ok(())
}

/// Evaluate `ℳ_k(φ)` for `ω_k = ω_X + kω_B` and fit `kℱ + 𝒩 + c/k`.
pub fn mabuchi_expansion_check(phi: &ScalarField, model: &FibrationModel, ks: &[f64]) -> Result<ExpansionReport> {
    ks_checked(ks)?;
    let fctx = FibrationContext::new(model)?;
    let m_k: Vec<f64> = ks
        .par_iter()
        .map(|&k| Ok(mabuchi_chen_tian(phi, &KahlerContext::for_model(model, k)?)?.total))
        .collect::<Result<_>>()?;
    // the 1/k² column keeps the next order from aliasing into the fitted 𝒩
    let c = least_squares(ks, &m_k, &[|k| k, |_| 1.0, |k| 1.0 / k, |k| 1.0 / (k * k)]);
    let closed_f = leading_functional(phi, &fctx)?;
    let closed_n = log_norm_n(phi, &fctx)?.value;
    let residuals: Vec<f64> = ks.iter().zip(&m_k).map(|(k, m)| m - k * closed_f - closed_n).collect();
    let residual_slope = log_log_slope(ks, &residuals);
    Ok(ExpansionReport {
        ks: ks.to_vec(),
        m_k,
        fitted_f: c[0],
        fitted_n: c[1],
        fitted_tail: c[2],
        closed_f,
        closed_n,
        residuals,
        residual_slope,
    })
}

/// One component of `ℳ_k` against its two closed-form coefficients.
#[derive(Debug, Clone)]
pub struct ComponentFit {
    pub name: &'static str,
    pub values: Vec<f64>,
    pub leading: f64,
    pub subleading: f64,
    /// `value − k·leading − subleading`.
    pub residuals: Vec<f64>,
    pub residual_slope: f64,
}

#[derive(Debug, Clone)]
pub struct ComponentsReport {
    pub ks: Vec<f64>,
    pub i: ComponentFit,
    pub r: ComponentFit,
    pub h: ComponentFit,
    /// `2∫ φ i∂∂̄(h/b) ∧ ω_B` from `R_k` and `2∫ ((h_φ − h)/b) ω_B ∧ ω_φ`
    /// from `H_k`; they cancel.
    pub cross_r: f64,
    pub cross_h: f64,
}

/// Direct `I_k, R_k, H_k` at each `k` against the closed-form expansions.
pub fn expansion_components_check(
    phi: &ScalarField,
    model: &FibrationModel,
    ks: &[f64],
) -> Result<ComponentsReport> {
    ks_checked(ks)?;
    let ctx = FibrationContext::new(model)?;
    let parts: Vec<MabuchiParts> = ks
        .par_iter()
        .map(|&k| mabuchi_chen_tian(phi, &KahlerContext::for_model(model, k)?))
        .collect::<Result<_>>()?;
    let w = ctx.relative_form(phi)?;
    let fib = fib_functionals_with(phi, &ctx, &w)?;
    let b = &ctx.omega_b.ss;
    let hb = horizontal_part(&ctx.omega_x, &ctx.omega_x).zip_with(b, |h, b| h / b, |_, _| 0.0)?;
    let hb_phi = horizontal_part(&w, &w).zip_with(b, |h, b| h / b, |_, _| 0.0)?;
    let wb = ctx.omega_b.wedge(&w);
    let cross_r = 2.0 * phi.mul(&crate::geometry::ddbar_free(&hb)?.wedge(&ctx.omega_b))?.integrate();
    let cross_h = 2.0 * hb_phi.sub(&hb)?.mul(&wb)?.integrate();
    let ratio = w.tt.zip_with(&ctx.omega_x.tt, log_ratio, |_, _| 0.0)?;
    let lead_h = 2.0 * ratio.mul(&wb)?.integrate();
    let lead_r = -2.0 * phi.mul(&ctx.rho.wedge(&ctx.omega_b))?.integrate();

    let fit = |name, values: Vec<f64>, leading: f64, subleading: f64| {
        let residuals: Vec<f64> = ks.iter().zip(&values).map(|(k, v)| v - k * leading - subleading).collect();
        let residual_slope = log_log_slope(ks, &residuals);
        ComponentFit { name, values, leading, subleading, residuals, residual_slope }
    };
    Ok(ComponentsReport {
        ks: ks.to_vec(),
        i: fit("I_k", parts.iter().map(|p| p.i).collect(), fib.i, fib.j / 3.0),
        r: fit("R_k", parts.iter().map(|p| p.r).collect(), lead_r, fib.r + cross_r),
        h: fit("H_k", parts.iter().map(|p| p.h).collect(), lead_h, fib.h + cross_h),
        cross_r,
        cross_h,
    })
}

/// Where a functional value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Closed,
    Path,
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::Closed => "closed",
            Provenance::Path => "path",
        }
    }
}

/// One evaluation point of the functionals; absent values are left blank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FunctionalRow {
    pub time: f64,
    pub k: Option<f64>,
    pub provenance: Option<Provenance>,
    pub h: Option<f64>,
    pub r: Option<f64>,
    pub i: Option<f64>,
    pub h_tilde: Option<f64>,
    pub r_tilde: Option<f64>,
    pub i_tilde: Option<f64>,
    pub j_tilde: Option<f64>,
    pub n: Option<f64>,
    pub m_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FunctionalReport {
    /// Free-form header lines (written as `#` comments).
    pub notes: Vec<String>,
    pub rows: Vec<FunctionalRow>,
}

pub const FUNCTIONAL_CSV_HEADER: &str = "time,k,provenance,H,R,I,H_tilde,R_tilde,I_tilde,J_tilde,N,M_k";

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl FunctionalReport {
    /// CSV with full-precision floats (shortest round-trip form).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for n in &self.notes {
            let _ = writeln!(out, "# {n}");
        }
        out.push_str(FUNCTIONAL_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:e},{},{},{},{},{},{},{},{},{},{},{}",
                r.time,
                cell(r.k),
                r.provenance.map(|p| p.tag()).unwrap_or(""),
                cell(r.h),
                cell(r.r),
                cell(r.i),
                cell(r.h_tilde),
                cell(r.r_tilde),
                cell(r.i_tilde),
                cell(r.j_tilde),
                cell(r.n),
                cell(r.m_k),
            );
        }
        out
    }

    /// Closed-form fibration functionals along a path.
    pub fn along_path(path: &PotentialPath, ctx: &FibrationContext) -> Result<Self> {
        let rows = path
            .potentials
            .par_iter()
            .zip(&path.times)
            .map(|(p, &t)| {
                let ln = log_norm_n(p, ctx)?;
                Ok(FunctionalRow {
                    time: t,
                    provenance: Some(Provenance::Closed),
                    h_tilde: Some(ln.parts.h),
                    r_tilde: Some(ln.parts.r),
                    i_tilde: Some(ln.parts.i),
                    j_tilde: Some(ln.parts.j),
                    n: Some(ln.value),
                    ..Default::default()
                })
            })
            .collect::<Result<_>>()?;
        Ok(FunctionalReport {
            notes: vec![format!("path kind: {}", path.kind.tag()), format!("A0 = {}, A1 = {}", ctx.a0, ctx.a1)],
            rows,
        })
    }
}

/// Render exact constants for reports.
pub fn describe_constants(c: &TopologicalConstants) -> String {
    format!("A0 = {}, A1 = {}", fmt_q(&c.a0), fmt_q(&c.a1))
}
