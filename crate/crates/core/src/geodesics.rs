//! Geodesics in the space of relatively cscK potentials: flow geodesics of
//! holomorphy-potential sections, the two-point problem, the geodesic
//! residual, second variation and convexity of `𝒩`, sectional curvature and
//! rays of product-type degenerations.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Axis, Error, Result};
use crate::field::{ScalarField, Slopes};
use crate::form::{Form11, POSITIVITY_FLOOR};
use crate::functionals::{log_norm_n, FibrationContext, PathKind, PotentialPath};
use crate::geometry::{
    ddbar, fiber_means, lichnerowicz_residual, momentum_harmonic, project_e, theta_unchecked,
};
use crate::grid::Closure;
use crate::model::{fs_density, FibrationModel};
use crate::stability::{DegenerationSpec, Flag};
use crate::sum::{pairwise_sum, trapezoid, trapezoid_exp_tails};

/// Fiber mass that has to stay inside the window is `1 - e^{-HORIZON_MARGIN}`.
pub const HORIZON_MARGIN: f64 = 12.0;

/// Bisection tolerance on the flow time in [`geodesic_between`].
pub const MATCH_TAU_TOL: f64 = 1e-10;

/// Largest moment-map mismatch accepted by [`geodesic_between`].
pub const MATCH_TOL: f64 = 1e-6;

/// Default number of time steps on `[0, 1]` (65 samples).
pub const DEFAULT_STEPS: usize = 64;

/// A torus-invariant section `u = c(s) (x − x̄)` of the bundle of fiberwise
/// holomorphy potentials, where `x` is the fiber moment map.
#[derive(Debug, Clone)]
pub struct HolomorphySection {
    pub coefficient: Vec<f64>,
    /// Zero-mean momentum harmonic of the fiber metric.
    pub basis: ScalarField,
}

impl HolomorphySection {
    pub fn new(coefficient: Vec<f64>, omega_x: &Form11) -> Result<Self> {
        if coefficient.len() != omega_x.grid().ns {
            return Err(Error::GridMismatch);
        }
        Ok(HolomorphySection { coefficient, basis: momentum_harmonic(omega_x)? })
    }

    pub fn from_fn(omega_x: &Form11, c: impl Fn(f64) -> f64) -> Result<Self> {
        let g = omega_x.grid();
        HolomorphySection::new(g.s_nodes().into_iter().map(c).collect(), omega_x)
    }

    /// The assembled function `c(s) (x − x̄)`.
    pub fn field(&self) -> ScalarField {
        let g = *self.basis.grid();
        let mut v = self.basis.values().to_vec();
        for i in 0..g.ns {
            for x in &mut v[i * g.nt..(i + 1) * g.nt] {
                *x *= self.coefficient[i];
            }
        }
        ScalarField::from_values(g, v, Slopes::ZERO).unwrap()
    }

    /// Largest fiber mean and the fiberwise Lichnerowicz residual of the
    /// assembled field; both vanish for a genuine section.
    pub fn certify(&self, omega_x: &Form11, omega_b: &Form11) -> Result<(f64, f64)> {
        let u = self.field();
        let mean = fiber_means(&u, omega_x).into_iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((mean, lichnerowicz_residual(&u, omega_x, omega_b)?))
    }
}

/// A geodesic `φ_t = φ_0 + ψ_t + t f` with its decomposition data.
#[derive(Debug, Clone)]
pub struct Geodesic {
    pub path: PotentialPath,
    pub start: ScalarField,
    /// Fiber flow speed `c(s)`: `ψ_t` moves each fiber by `−c t` in `t`.
    pub coefficient: Vec<f64>,
    /// Base part `f` (a function of `s` only).
    pub base: ScalarField,
}

impl Geodesic {
    /// The flow part `ψ_t = φ_t − φ_0 − t f` at sample `i`.
    pub fn psi(&self, i: usize) -> Result<ScalarField> {
        let t = self.path.times[i];
        self.path.potentials[i].sub(&self.start)?.axpby(1.0, &self.base, -t)
    }

    pub fn end(&self) -> &ScalarField {
        self.path.potentials.last().unwrap()
    }

    /// Directory of per-time snapshots plus `manifest.txt`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut m = String::new();
        let _ = writeln!(m, "# geodesic manifest");
        let _ = writeln!(m, "kind {}", self.path.kind.tag());
        let _ = writeln!(m, "times {}", join(&self.path.times));
        let _ = writeln!(m, "coefficient {}", join(&self.coefficient));
        let base: Vec<f64> = (0..self.base.grid().ns).map(|i| self.base.at(i, 0)).collect();
        let _ = writeln!(m, "base {}", join(&base));
        self.start.write(&dir.join("start.field"))?;
        for (i, p) in self.path.potentials.iter().enumerate() {
            let name = format!("phi_{i:04}.field");
            p.write(&dir.join(&name))?;
            let _ = writeln!(m, "field {name}");
        }
        std::fs::write(dir.join("manifest.txt"), m)?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Geodesic> {
        let text = std::fs::read_to_string(dir.join("manifest.txt"))?;
        let (mut kind, mut times, mut coef, mut base, mut fields) = (PathKind::Custom, vec![], vec![], vec![], vec![]);
        for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "kind" => kind = PathKind::from_tag(rest.trim())?,
                "times" => times = parse_list(rest)?,
                "coefficient" => coef = parse_list(rest)?,
                "base" => base = parse_list(rest)?,
                "field" => fields.push(ScalarField::read(&dir.join(rest.trim()))?),
                other => return Err(Error::Format(format!("unknown manifest key '{other}'"))),
            }
        }
        let start = ScalarField::read(&dir.join("start.field"))?;
        let g = *start.grid();
        if base.len() != g.ns || coef.len() != g.ns {
            return Err(Error::Format("manifest base data does not match the grid".into()));
        }
        let base = ScalarField::from_fn(g, Slopes::ZERO, |s, _| base[row_of(&g, s)]);
        Ok(Geodesic { path: PotentialPath::new(times, fields, kind)?, start, coefficient: coef, base })
    }
}

fn row_of(g: &crate::grid::LogGrid, s: f64) -> usize {
    ((s + g.s_range) / g.hs()).round() as usize
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|w| w.parse::<f64>().map_err(|e| Error::Format(format!("bad number '{w}': {e}"))))
        .collect()
}

/// Fiber centre (mean of `t` against the fiber density) on every fiber.
fn fiber_centres(omega: &Form11) -> Vec<f64> {
    let g = *omega.grid();
    let t = ScalarField::from_fn(g, Slopes::ZERO, |_, t| t);
    fiber_means(&t, omega)
}

/// `Φ(s, t + shift) − Φ(s, t) − shift/2` for the full fiber potential
/// `Φ = Φ_X + φ`: the fiberwise flow by `shift` written as a relative
/// potential (the moment map has mean `1/2`). The reference part is shifted
/// in closed form, only `φ` is interpolated.
fn flow_part(model: &FibrationModel, phi: &ScalarField, shift: &[f64]) -> Result<ScalarField> {
    let g = model.grid;
    let reference = model.fiber_shift_potential(|s| -shift[row_of(&g, s)], |s| -0.5 * shift[row_of(&g, s)]);
    let moved = phi.shift_t(shift)?.sub(phi)?;
    let mut out = reference.add(&moved)?;
    out.slopes = Slopes::ZERO;
    Ok(out)
}

fn check_horizon(centres: &[f64], shift: &[f64], model: &FibrationModel) -> Result<()> {
    let g = model.grid;
    for i in 0..g.ns {
        let moved = centres[i] - shift[i];
        if moved.abs() + HORIZON_MARGIN > g.t_range {
            return Err(Error::Horizon { s: g.s(i), shift: shift[i] });
        }
    }
    Ok(())
}

fn assemble(
    model: &FibrationModel,
    start: &ScalarField,
    coefficient: Vec<f64>,
    base: ScalarField,
    times: Vec<f64>,
    kind: PathKind,
) -> Result<Geodesic> {
    let omega0 = model.omega_x().add(&ddbar(start)?)?;
    omega0.check_fiber_positive()?;
    let centres = fiber_centres(&omega0);
    let last = *times.last().unwrap();
    let extreme: Vec<f64> = coefficient.iter().map(|c| c * last).collect();
    check_horizon(&centres, &extreme, model)?;
    let potentials = times
        .par_iter()
        .map(|&t| {
            let shift: Vec<f64> = coefficient.iter().map(|c| c * t).collect();
            flow_part(model, start, &shift)?.add(start)?.axpby(1.0, &base, t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Geodesic { path: PotentialPath::new(times, potentials, kind)?, start: start.clone(), coefficient, base })
}

fn unit_times(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| horizon * i as f64 / steps as f64).collect()
}

/// Flow geodesic of `u` from the reference metric on `[0, horizon]`:
/// each fiber is translated in `t`, and the pullback is evaluated by
/// shift-and-interpolate per base node.
pub fn flow_geodesic(model: &FibrationModel, u: &HolomorphySection, horizon: f64, steps: usize) -> Result<Geodesic> {
    flow_geodesic_from(model, &ScalarField::zeros(model.grid), u, horizon, steps)
}

/// [`flow_geodesic`] starting at the relatively cscK potential `start`.
pub fn flow_geodesic_from(
    model: &FibrationModel,
    start: &ScalarField,
    u: &HolomorphySection,
    horizon: f64,
    steps: usize,
) -> Result<Geodesic> {
    if u.coefficient.len() != model.grid.ns {
        return Err(Error::GridMismatch);
    }
    let base = ScalarField::zeros(model.grid);
    assemble(model, start, u.coefficient.clone(), base, unit_times(horizon, steps), PathKind::FlowGeodesic)
}

/// Geodesic residual `φ̈ − |∂_𝒱 φ̇|²` at the interior samples.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
    /// Sup norm per interior time.
    pub sup: Vec<f64>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.sup.iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

/// `φ̈_t − (∂_t φ̇_t)² / g_{V,t}` at interior samples, where `g_{V,t}` is the
/// fiber coefficient of `ω_X + i∂∂̄φ_t`.
pub fn geodesic_residual(path: &PotentialPath, omega_x: &Form11) -> Result<ResidualReport> {
    if path.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: path.len() });
    }
    let idx: Vec<usize> = (1..path.len() - 1).collect();
    let fields = idx
        .par_iter()
        .map(|&i| {
            let gv = omega_x.tt.add(&path.potentials[i].d_tt()?)?;
            let v = path.velocity(i)?;
            let vt = v.derivative_closed(Axis::T, 1, Closure::OneSided)?;
            let grad = resolved_quotient(&vt, &gv).mul(&vt)?;
            path.acceleration(i)?.sub(&grad)
        })
        .collect::<Result<Vec<_>>>()?;
    let sup = fields.iter().map(ScalarField::max_abs).collect();
    Ok(ResidualReport { times: idx.iter().map(|&i| path.times[i]).collect(), fields, sup })
}

/// Moment map `x ∈ [0, 1]` of every fiber (cumulative normalized area).
fn moment_map(omega: &Form11) -> Result<ScalarField> {
    let e = momentum_harmonic(omega)?;
    // momentum_harmonic is x − x̄ with x̄ the density-weighted mean
    let means = {
        let g = *omega.grid();
        let mut xbar = vec![0.0; g.ns];
        for (i, xb) in xbar.iter_mut().enumerate() {
            // x = 0 at the left end of the fiber
            *xb = -e.at(i, 0);
        }
        xbar
    };
    let g = *omega.grid();
    Ok(ScalarField::from_fn(g, Slopes::ZERO, |s, t| {
        let i = row_of(&g, s);
        let j = ((t + g.t_range) / g.ht()).round() as usize;
        e.at(i, j) + means[i]
    }))
}

/// Per-fiber flow time carrying the fiber metric of `φ0` to that of `φ1`.
fn match_fibers(x0: &ScalarField, x1: &ScalarField, g1: &ScalarField) -> Result<Vec<f64>> {
    let g = *x0.grid();
    let ts = g.t_nodes();
    (0..g.ns)
        .into_par_iter()
        .map(|i| {
            let w: Vec<f64> = g1.row(i).to_vec();
            let target = x1.row(i);
            let mismatch = |c: f64| -> f64 {
                let d: Vec<f64> = ts
                    .iter()
                    .zip(target)
                    .zip(&w)
                    .map(|((t, x), w)| (x0.sample_row(i, t + c) - x) * w)
                    .collect();
                pairwise_sum(&d)
            };
            // x0 is increasing, so the mismatch is increasing in c
            let (mut lo, mut hi) = (-2.0 * g.t_range, 2.0 * g.t_range);
            if mismatch(lo) > 0.0 || mismatch(hi) < 0.0 {
                return Err(Error::Matching { s: g.s(i), mismatch: f64::INFINITY });
            }
            while hi - lo > MATCH_TAU_TOL {
                let mid = 0.5 * (lo + hi);
                if mismatch(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let c = 0.5 * (lo + hi);
            let worst = ts
                .iter()
                .zip(target)
                .zip(&w)
                .filter(|(_, w)| **w > 1e-3 * w_peak(g1.row(i)))
                .map(|((t, x), _)| (x0.sample_row(i, t + c) - x).abs())
                .fold(0.0f64, f64::max);
            if worst > MATCH_TOL {
                return Err(Error::Matching { s: g.s(i), mismatch: worst });
            }
            Ok(c)
        })
        .collect()
}

fn w_peak(row: &[f64]) -> f64 {
    row.iter().cloned().fold(0.0f64, f64::max)
}

/// The geodesic joining two relatively cscK potentials, `steps + 1` samples
/// on `[0, 1]`. Each fiber is matched by bisection on the flow time; the
/// base part is the fiberwise-constant remainder.
pub fn geodesic_between(model: &FibrationModel, phi0: &ScalarField, phi1: &ScalarField, steps: usize) -> Result<Geodesic> {
    let wx = model.omega_x();
    let w0 = wx.add(&ddbar(phi0)?)?;
    let w1 = wx.add(&ddbar(phi1)?)?;
    w0.check_fiber_positive()?;
    w1.check_fiber_positive()?;
    let x0 = moment_map(&w0)?;
    let x1 = moment_map(&w1)?;
    let tau = match_fibers(&x0, &x1, &w1.tt)?;
    // x0(t + τ) = x1(t): the fibers of φ1 are those of φ0 moved by −τ,
    // which the flow with speed c = τ produces at time 1
    let psi1 = flow_part(model, phi0, &tau)?;
    let rem = phi1.sub(phi0)?.sub(&psi1)?;
    let g = model.grid;
    let mut base_vals = vec![0.0; g.ns];
    for (i, b) in base_vals.iter_mut().enumerate() {
        let w = w1.tt.row(i);
        let fw: Vec<f64> = rem.row(i).iter().zip(w).map(|(f, w)| f * w).collect();
        *b = trapezoid(&fw, g.ht()) / trapezoid(w, g.ht());
        let peak = w_peak(w);
        let dev = rem
            .row(i)
            .iter()
            .zip(w)
            .filter(|(_, w)| **w > 1e-3 * peak)
            .map(|(f, _)| (f - *b).abs())
            .fold(0.0f64, f64::max);
        if dev > MATCH_TOL.sqrt() {
            return Err(Error::Matching { s: g.s(i), mismatch: dev });
        }
    }
    let base = ScalarField::from_fn(g, Slopes::ZERO, |s, _| base_vals[row_of(&g, s)]);
    assemble(model, phi0, tau, base, unit_times(1.0, steps), PathKind::FlowGeodesic)
}

/// Second variation of `𝒩` at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondVariation {
    pub time: f64,
    /// `‖ℛ_t φ̇_t‖²`.
    pub r_norm2: f64,
    /// `∫ (φ̈ − |∂_𝒱φ̇|²) p_t(θ_t) ω_t ∧ ω_B`; negligible along geodesics.
    pub residual_term: f64,
    /// `2‖ℛφ̇‖² − 2 · residual_term`.
    pub total: f64,
}

/// `‖ℛφ̇‖² = ∫ (2 Y_t² + 2 (Y_s + c Y_t)² g/b) g b`, with `Y = ∂_t φ̇ / g`
/// and `c = −C/g` the horizontal lift of `ω_t`.
pub fn r_norm2(phi: &ScalarField, velocity: &ScalarField, ctx: &FibrationContext) -> Result<f64> {
    let w = ctx.relative_form(phi)?;
    w.check_fiber_positive()?;
    let c = Closure::OneSided;
    let y = resolved_quotient(&velocity.derivative_closed(Axis::T, 1, c)?, &w.tt);
    let ys = y.derivative_closed(Axis::S, 1, c)?;
    let yt = y.derivative_closed(Axis::T, 1, c)?;
    let b = &ctx.omega_b.ss;
    let g = *y.grid();
    let n = g.len();
    let (gv, ch, bv) = (w.tt.values(), w.st.values(), b.values());
    let dens: Vec<f64> = (0..n)
        .map(|k| {
            let lift = -ch[k] / gv[k];
            let hor = ys.values()[k] + lift * yt.values()[k];
            2.0 * yt.values()[k].powi(2) * gv[k] * bv[k] + 2.0 * hor * hor * gv[k] * gv[k]
        })
        .collect();
    Ok(ScalarField::from_values(g, dens, Slopes::ZERO)?.integrate())
}

/// `a / g` where the fiber density `g` is resolved, zero in the tails where
/// `g` is at roundoff level.
fn resolved_quotient(a: &ScalarField, g: &ScalarField) -> ScalarField {
    resolved_map(a, g, |a, g| a / g)
}

/// `f` where the fiber density is resolved, zero elsewhere.
fn resolved_part(f: &ScalarField, g: &ScalarField) -> ScalarField {
    resolved_map(f, g, |f, _| f)
}

fn resolved_map(a: &ScalarField, g: &ScalarField, op: impl Fn(f64, f64) -> f64) -> ScalarField {
    let grid = *g.grid();
    let mut out = vec![0.0; grid.len()];
    for i in 0..grid.ns {
        let row = g.row(i);
        let floor = POSITIVITY_FLOOR * row.iter().cloned().fold(0.0f64, f64::max);
        for (j, &gv) in row.iter().enumerate() {
            if gv > floor {
                out[i * grid.nt + j] = op(a.at(i, j), gv);
            }
        }
    }
    ScalarField::from_values(grid, out, Slopes::ZERO).unwrap()
}

/// Second variation of `𝒩` along a sampled geodesic, at every sample.
pub fn second_variation_n(geo: &Geodesic, ctx: &FibrationContext) -> Result<Vec<SecondVariation>> {
    let path = &geo.path;
    (0..path.len())
        .into_par_iter()
        .map(|i| {
            let phi = &path.potentials[i];
            let v = path.velocity(i)?;
            let rn = r_norm2(phi, &v, ctx)?;
            let w = ctx.relative_form(phi)?;
            let th = resolved_part(&theta_unchecked(&w, &ctx.omega_b)?, &w.tt);
            let pth = project_e(&th, &w, &ctx.omega_b)?;
            let vt = v.derivative_closed(Axis::T, 1, Closure::OneSided)?;
            let grad = resolved_quotient(&vt, &w.tt).mul(&vt)?;
            let res = path.acceleration(i)?.sub(&grad)?;
            let rt = res.mul(&pth)?.mul(&w.wedge(&ctx.omega_b))?.integrate();
            Ok(SecondVariation { time: path.times[i], r_norm2: rn, residual_term: rt, total: 2.0 * rn - 2.0 * rt })
        })
        .collect()
}

/// Default tolerance of [`convexity_check`] on raw second differences.
pub const CONVEXITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub times: Vec<f64>,
    pub n_values: Vec<f64>,
    /// `𝒩(t_{i+1}) − 2𝒩(t_i) + 𝒩(t_{i−1})` at interior samples.
    pub second_differences: Vec<f64>,
    pub r_norm2: Vec<f64>,
    pub tol: f64,
}

impl ConvexityReport {
    pub fn min_second_difference(&self) -> f64 {
        self.second_differences.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn max_abs_second_difference(&self) -> f64 {
        self.second_differences.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
    pub fn max_r_norm2(&self) -> f64 {
        self.r_norm2.iter().cloned().fold(0.0f64, f64::max)
    }
    pub fn convex(&self) -> bool {
        self.min_second_difference() >= -self.tol
    }
    /// `𝒩` is affine along the geodesic within tolerance.
    pub fn affine(&self) -> bool {
        self.max_abs_second_difference() <= self.tol
    }
}

/// `𝒩(φ_t)` by the closed formula, its second differences, and `‖ℛφ̇‖²`.
pub fn convexity_check(geo: &Geodesic, ctx: &FibrationContext, tol: f64) -> Result<ConvexityReport> {
    let path = &geo.path;
    let (n_values, r_norm2): (Vec<f64>, Vec<f64>) = (0..path.len())
        .into_par_iter()
        .map(|i| {
            let phi = &path.potentials[i];
            let n = log_norm_n(phi, ctx)?.value;
            let r = if path.len() >= 3 { r_norm2(phi, &path.velocity(i)?, ctx)? } else { 0.0 };
            Ok((n, r))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let second_differences = n_values.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    Ok(ConvexityReport { times: path.times.clone(), n_values, second_differences, r_norm2, tol })
}

/// Sectional curvature of `K_E` and the fiberwise Poisson bracket.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub k: f64,
    pub bracket: ScalarField,
}

/// `K(ψ, η) = −¼ ‖{ψ, η}_𝒱‖² / (‖ψ‖²‖η‖² − ⟨ψ, η⟩²)` for torus-invariant
/// tangent vectors at `φ`. Invariant functions depend on each fiber only
/// through the moment map, so their fiberwise Poisson bracket (which
/// differentiates along the rotation) vanishes: `K = 0` on this slice. The
/// non-trivial curvature lives on the `su(2)` slice, see [`Su2Slice`].
pub fn sectional_curvature(psi: &ScalarField, eta: &ScalarField, omega: &Form11) -> Result<Curvature> {
    if psi.grid() != eta.grid() || psi.grid() != omega.grid() {
        return Err(Error::GridMismatch);
    }
    omega.check_fiber_positive()?;
    // {ψ, η} = (ψ_t η_θ − ψ_θ η_t) / g_V and ∂_θ vanishes on invariant data
    let bracket = ScalarField::zeros(*psi.grid());
    Ok(Curvature { k: 0.0, bracket })
}

/// A tangent vector to `K_E` at a fiberwise round metric whose vertical part
/// lies in the span of the three first harmonics `e_i = x_i/2` of each fiber
/// (coordinates of the unit sphere, fiber area 1).
#[derive(Debug, Clone, PartialEq)]
pub struct FiberTangent {
    /// Fiber-constant part `g(s)`.
    pub base: Vec<f64>,
    /// Coefficients of `e_1, e_2, e_3` per base node.
    pub harmonic: Vec<[f64; 3]>,
}

/// Base integration data for the `su(2)` slice: `{e_i, e_j} = 2π ε_ijk e_k`
/// and `∫ e_i e_j = δ_ij / 12` on each fiber.
#[derive(Debug, Clone)]
pub struct Su2Slice {
    pub s_nodes: Vec<f64>,
    pub b: Vec<f64>,
    pub hs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Su2Curvature {
    pub k: f64,
    /// Harmonic coefficients of `{ψ, η}` per base node.
    pub bracket: Vec<[f64; 3]>,
    pub gram: f64,
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Planes whose Gram determinant is below this (relative) size are degenerate.
const DEGENERATE_GRAM: f64 = 1e-14;

impl Su2Slice {
    pub fn new(model: &FibrationModel) -> Self {
        let g = model.grid;
        let beta = model.beta();
        let s_nodes = g.s_nodes();
        let b = s_nodes.iter().map(|s| beta * fs_density(*s)).collect();
        Su2Slice { s_nodes, b, hs: g.hs() }
    }

    fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        let v: Vec<f64> = (0..self.b.len()).map(|i| f(i) * self.b[i]).collect();
        trapezoid_exp_tails(&v, self.hs)
    }

    pub fn inner(&self, p: &FiberTangent, q: &FiberTangent) -> f64 {
        self.integrate(|i| p.base[i] * q.base[i] + dot(&p.harmonic[i], &q.harmonic[i]) / 12.0)
    }

    pub fn sectional_curvature(&self, psi: &FiberTangent, eta: &FiberTangent) -> Result<Su2Curvature> {
        let n = self.b.len();
        if [psi.base.len(), psi.harmonic.len(), eta.base.len(), eta.harmonic.len()].iter().any(|&l| l != n) {
            return Err(Error::GridMismatch);
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let bracket: Vec<[f64; 3]> = (0..n)
            .map(|i| cross(&psi.harmonic[i], &eta.harmonic[i]).map(|x| two_pi * x))
            .collect();
        let bn = self.integrate(|i| dot(&bracket[i], &bracket[i]) / 12.0);
        let (pp, ee, pe) = (self.inner(psi, psi), self.inner(eta, eta), self.inner(psi, eta));
        let gram = pp * ee - pe * pe;
        let k = if gram <= DEGENERATE_GRAM * pp * ee || bn == 0.0 { 0.0 } else { -0.25 * bn / gram };
        Ok(Su2Curvature { k, bracket, gram })
    }
}

/// Fiber flow speed of a product-type spec on the model: the `C*` scales
/// the summands of `O ⊕ O(a)` with weights `λ_0, λ_1`, which moves the fiber
/// coordinate `t = log|v_1/v_0|²` at speed `r(λ_1 − λ_0)`; the ray's fibers
/// move by `−c T` with `c = r(λ_0 − λ_1)`.
pub fn ray_speed(spec: &DegenerationSpec, model: &FibrationModel) -> Result<f64> {
    spec.validate()?;
    let i = match spec.flag {
        Flag::Summand(i) => i,
        Flag::SubLine { .. } if spec.is_product() => {
            return Err(Error::NotAligned(format!(
                "{}: product-type but the flag is not a summand of the torus splitting",
                spec.name
            )))
        }
        Flag::SubLine { .. } => {
            return Err(Error::NotAligned(format!("{}: the flag is not a torus-invariant summand", spec.name)))
        }
    };
    let (d0, d1) = (spec.bundle[0], spec.bundle[1]);
    if d0 != 0 || d1 != model.a {
        return Err(Error::NotAligned(format!(
            "{}: bundle O({d0}) ⊕ O({d1}) is not the model's O ⊕ O({})",
            spec.name, model.a
        )));
    }
    let (lw, lq) = spec.weights;
    let (l0, l1) = if i == 0 { (lw, lq) } else { (lq, lw) };
    Ok((spec.exponent * (l0 - l1)) as f64)
}

/// The geodesic ray of a product-type, torus-aligned spec, sampled at
/// `t = 0, 1/per_unit, …, horizon` and starting at `φ_0 = 0`. With
/// canonical weights `λ_0, λ_1` the ray is `log(Σ e^{−rλ_i t}|v_i|²)` minus
/// its value at `t = 0`: the fiber flow plus the constant base part
/// `f = −r(λ_0 + λ_1)/2`, which makes the metric on the compactification
/// continuous across the central fiber.
pub fn ray_from_degeneration(
    spec: &DegenerationSpec,
    model: &FibrationModel,
    horizon: f64,
    per_unit: usize,
) -> Result<Geodesic> {
    let c = ray_speed(spec, model)?;
    let (lw, lq) = spec.canonical_weights();
    let f = -((spec.exponent * (lw + lq)) as f64) / 2.0;
    let coefficient = vec![c; model.grid.ns];
    let steps = (horizon * per_unit as f64).round() as usize;
    let zero = ScalarField::zeros(model.grid);
    let base = zero.add_const(f);
    assemble(model, &zero, coefficient, base, unit_times(horizon, steps), PathKind::Ray)
}
