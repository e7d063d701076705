//! Fibration operators on torus-invariant data: curvature, vertical
//! Laplacian, horizontal contraction, the symplectic curvature of the
//! Ehresmann connection, `ρ`, `θ` and the projection onto `C^∞(E)`.

use crate::error::{Axis, Error, Result};
use crate::field::{ScalarField, Slopes};
use crate::form::{check_field_positive, Form11, POSITIVITY_FLOOR};
use crate::grid::Closure;
use crate::sum::{pairwise_sum, trapezoid};

/// Fraction of the per-fiber peak density below which pointwise curvature
/// values are considered unresolved (the density underflows the stencil's
/// roundoff there; integrals are unaffected because they carry the weight).
pub const RESOLVED_FRACTION: f64 = 0.05;

/// Default tolerance on the fiber scalar curvature spread for `K_E` membership.
pub const KE_TOLERANCE: f64 = 1e-5;

/// Chern-normalized `i∂∂̄f`: the `(s, t)` Hessian of `f`.
pub fn ddbar(f: &ScalarField) -> Result<Form11> {
    let ss = f.d_ss()?;
    let st = f.d_st()?;
    let tt = f.d_tt()?;
    Form11::new(ss, st, tt)
}

/// Hessian of a field that has no recorded asymptotics.
pub(crate) fn ddbar_free(f: &ScalarField) -> Result<Form11> {
    let [ss, st, tt] = f.hessian_free()?;
    Form11::new(ss, st, tt)
}

fn log_field(f: &ScalarField) -> ScalarField {
    f.map(f64::ln)
}

/// `log g_V`, with non-positive values (roundoff in the fiber tails, which
/// the positivity floor admits) replaced by the floor so the log stays finite.
fn log_fiber_density(g_v: &ScalarField) -> ScalarField {
    let grid = *g_v.grid();
    let mut out = vec![0.0; grid.len()];
    for i in 0..grid.ns {
        let row = g_v.row(i);
        let floor = POSITIVITY_FLOOR * row.iter().cloned().fold(0.0f64, f64::max);
        for (j, &v) in row.iter().enumerate() {
            out[grid.idx(i, j)] = if v > 0.0 { v.ln() } else { floor.ln() };
        }
    }
    ScalarField::from_values(grid, out, Slopes::ZERO).unwrap()
}

/// `Ric(ω) = -i∂∂̄ log det ω`. Requires a genuine Kähler form.
pub fn ricci(omega: &Form11) -> Result<Form11> {
    omega.check_positive()?;
    Ok(ddbar_free(&log_field(&omega.det()))?.scale(-1.0))
}

/// `S(ω) = Λ_ω Ric(ω)`.
pub fn scalar_curvature(omega: &Form11) -> Result<ScalarField> {
    let ric = ricci(omega)?;
    Ok(omega.trace_against(&ric))
}

/// Density of `S(ω) ω^2` written as `2 Ric(ω) ∧ ω`; avoids dividing by the volume.
pub fn scalar_curvature_density(omega: &Form11) -> Result<ScalarField> {
    let ric = ricci(omega)?;
    Ok(ric.wedge(omega).scale(2.0))
}

/// Fiberwise Kähler Laplacian `Δ_V f = f_tt / g_V`.
pub fn vertical_laplacian(f: &ScalarField, omega_x: &Form11) -> Result<ScalarField> {
    omega_x.check_fiber_positive()?;
    let ftt = f.derivative_closed(Axis::T, 2, Closure::OneSided)?;
    ftt.zip_with(&omega_x.tt, |a, g| a / g, |_, _| 0.0)
}

/// Horizontal-lift coefficient `c = -C/G`: the horizontal lift of `∂_s` is `∂_s + c ∂_t`.
pub fn horizontal_lift(omega_x: &Form11) -> ScalarField {
    omega_x.st.zip_with(&omega_x.tt, |c, g| -c / g, |_, _| 0.0).unwrap()
}

/// `α(lift, lift) = α_ss + 2c α_st + c² α_tt` in the `ω_X`-horizontal frame.
pub fn horizontal_part(alpha: &Form11, omega_x: &Form11) -> ScalarField {
    let c = horizontal_lift(omega_x);
    let n = c.grid().len();
    let vals: Vec<f64> = (0..n)
        .map(|k| {
            let ck = c.values()[k];
            alpha.ss.values()[k] + 2.0 * ck * alpha.st.values()[k] + ck * ck * alpha.tt.values()[k]
        })
        .collect();
    ScalarField::from_values(*c.grid(), vals, Slopes::ZERO).unwrap()
}

/// `Λ_{ω_B} α_H`: the horizontal coefficient divided by the base density.
pub fn lambda_base(alpha: &Form11, omega_x: &Form11, omega_b: &Form11) -> Result<ScalarField> {
    check_field_positive(&omega_b.ss)?;
    horizontal_part(alpha, omega_x).zip_with(&omega_b.ss, |h, b| h / b, |_, _| 0.0)
}

/// Vertical metric, horizontal lifts and the symplectic curvature of the
/// Ehresmann connection, contracted into the base direction.
#[derive(Debug, Clone)]
pub struct VerticalData {
    pub g_v: ScalarField,
    pub horiz_lift: ScalarField,
    /// `Λ_{ω_B} μ^*F_H`.
    pub mu_f: ScalarField,
}

/// Mean of `f` on each fiber against `g_V dt`.
pub fn fiber_means(f: &ScalarField, omega_x: &Form11) -> Vec<f64> {
    let g = f.grid();
    (0..g.ns)
        .map(|i| {
            let w: Vec<f64> = f.row(i).iter().zip(omega_x.tt.row(i)).map(|(a, b)| a * b).collect();
            trapezoid(&w, g.ht()) / trapezoid(omega_x.tt.row(i), g.ht())
        })
        .collect()
}

/// Subtract the fiber mean on every fiber.
pub fn fiber_zero_mean(f: &ScalarField, omega_x: &Form11) -> ScalarField {
    let means = fiber_means(f, omega_x);
    let g = *f.grid();
    let mut out = f.clone();
    out.slopes = Slopes::ZERO;
    for i in 0..g.ns {
        for j in 0..g.nt {
            out.values_mut()[g.idx(i, j)] -= means[i];
        }
    }
    out
}

/// Minimal-coupling form of the curvature: `Λ_{ω_B} μ^*F_H` is minus the
/// fiberwise zero-mean part of `ω_X` on horizontal lifts, divided by `ω_B`.
pub fn symplectic_curvature(omega_x: &Form11, omega_b: &Form11) -> Result<VerticalData> {
    omega_x.check_fiber_positive()?;
    check_field_positive(&omega_b.ss)?;
    let h = horizontal_part(omega_x, omega_x);
    let h0 = fiber_zero_mean(&h, omega_x);
    let mu_f = h0.zip_with(&omega_b.ss, |h, b| -h / b, |_, _| 0.0)?;
    Ok(VerticalData { g_v: omega_x.tt.clone(), horiz_lift: horizontal_lift(omega_x), mu_f })
}

/// Curvature of the metric induced on `-K_{X/B}`: `ρ = -i∂∂̄ log g_V`.
pub fn rho_curvature(omega_x: &Form11) -> Result<Form11> {
    omega_x.check_fiber_positive()?;
    Ok(ddbar_free(&log_fiber_density(&omega_x.tt))?.scale(-1.0))
}

/// Scalar curvature of each fiber metric, `-(log g_V)_tt / g_V`.
pub fn fiber_scalar_curvature(omega_x: &Form11) -> Result<ScalarField> {
    omega_x.check_fiber_positive()?;
    let lg = log_fiber_density(&omega_x.tt);
    let d = lg.derivative_closed(Axis::T, 2, Closure::OneSided)?;
    d.zip_with(&omega_x.tt, |r, g| -r / g, |_, _| 0.0)
}

/// Nodes where the fiber density is at least `frac` of its fiber maximum.
pub fn resolved_mask(omega_x: &Form11, frac: f64) -> Vec<bool> {
    let g = omega_x.grid();
    let mut mask = vec![false; g.len()];
    for i in 0..g.ns {
        let row = omega_x.tt.row(i);
        let peak = row.iter().cloned().fold(0.0f64, f64::max);
        for (j, &v) in row.iter().enumerate() {
            mask[g.idx(i, j)] = v >= frac * peak;
        }
    }
    mask
}

/// Largest weighted standard deviation, over fibers, of the fiber scalar
/// curvature on the resolved part of each fiber. Returns `(spread, s)`.
pub fn relative_csck_spread(omega_x: &Form11) -> Result<(f64, f64)> {
    let sv = fiber_scalar_curvature(omega_x)?;
    let g = *omega_x.grid();
    let mask = resolved_mask(omega_x, RESOLVED_FRACTION);
    let mut worst = (0.0f64, g.s(0));
    for i in 0..g.ns {
        let (mut w, mut m1, mut m2) = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..g.nt {
            let k = g.idx(i, j);
            if mask[k] {
                let gv = omega_x.tt.values()[k];
                w.push(gv);
                m1.push(gv * sv.values()[k]);
                m2.push(gv * sv.values()[k].powi(2));
            }
        }
        let (w, m1, m2) = (pairwise_sum(&w), pairwise_sum(&m1), pairwise_sum(&m2));
        let mean = m1 / w;
        let var = (m2 / w - mean * mean).max(0.0);
        if var.sqrt() > worst.0 {
            worst = (var.sqrt(), g.s(i));
        }
    }
    Ok(worst)
}

/// `θ = Δ_V Λ_{ω_B} μ^*F_H + Λ_{ω_B} ρ_H`, after checking that `ω_X` is
/// relatively cscK within [`KE_TOLERANCE`].
pub fn theta(omega_x: &Form11, omega_b: &Form11) -> Result<ScalarField> {
    let (spread, s) = relative_csck_spread(omega_x)?;
    if spread > KE_TOLERANCE {
        return Err(Error::NotRelativelyCsck { spread, s });
    }
    theta_unchecked(omega_x, omega_b)
}

/// [`theta`] without the relative cscK precondition.
pub fn theta_unchecked(omega_x: &Form11, omega_b: &Form11) -> Result<ScalarField> {
    let vd = symplectic_curvature(omega_x, omega_b)?;
    let rho = rho_curvature(omega_x)?;
    let rho_h = lambda_base(&rho, omega_x, omega_b)?;
    let lap = vertical_laplacian(&vd.mu_f, omega_x)?;
    lap.add(&rho_h)
}

/// Zero-mean momentum harmonic of each fiber metric: `x - x̄`, where `x` is the
/// cumulative fiber area (the moment map of the rotation, valued in `[0, 1]`).
pub fn momentum_harmonic(omega_x: &Form11) -> Result<ScalarField> {
    omega_x.check_fiber_positive()?;
    let gv = &omega_x.tt;
    let grid = *gv.grid();
    let h = grid.ht();
    let d1 = gv.derivative_closed(Axis::T, 1, Closure::OneSided)?;
    let d3 = d1.derivative_closed(Axis::T, 2, Closure::OneSided)?;
    let mut x = vec![0.0; grid.len()];
    for i in 0..grid.ns {
        let row = gv.row(i);
        let mut acc = 0.0;
        let base = grid.idx(i, 0);
        for j in 0..grid.nt {
            if j > 0 {
                acc += 0.5 * h * (row[j - 1] + row[j]);
            }
            // Euler–Maclaurin end corrections keep the running integral high order.
            let k = grid.idx(i, j);
            x[k] = acc - h * h / 12.0 * (d1.values()[k] - d1.values()[base])
                + h.powi(4) / 720.0 * (d3.values()[k] - d3.values()[base]);
        }
        let total = x[grid.idx(i, grid.nt - 1)];
        for j in 0..grid.nt {
            x[grid.idx(i, j)] /= total;
        }
    }
    let x = ScalarField::from_values(grid, x, Slopes::ZERO)?;
    Ok(fiber_zero_mean(&x, omega_x))
}

/// `L^2` projection onto `C^∞(E)`, computed fiber by fiber against the
/// momentum harmonic of `ω_X`. The base density cancels within each fiber.
pub fn project_e(f: &ScalarField, omega_x: &Form11, omega_b: &Form11) -> Result<ScalarField> {
    check_field_positive(&omega_b.ss)?;
    let e = momentum_harmonic(omega_x)?;
    project_onto(f, &e, omega_x)
}

pub(crate) fn project_onto(f: &ScalarField, e: &ScalarField, omega_x: &Form11) -> Result<ScalarField> {
    let g = *f.grid();
    let mut out = vec![0.0; g.len()];
    for i in 0..g.ns {
        let gv = omega_x.tt.row(i);
        let er = e.row(i);
        let fe: Vec<f64> = f.row(i).iter().zip(er).zip(gv).map(|((f, e), g)| f * e * g).collect();
        let ee: Vec<f64> = er.iter().zip(gv).map(|(e, g)| e * e * g).collect();
        let coef = trapezoid(&fe, g.ht()) / trapezoid(&ee, g.ht());
        for j in 0..g.nt {
            out[g.idx(i, j)] = coef * er[j];
        }
    }
    ScalarField::from_values(g, out, Slopes::ZERO)
}

/// `⟨f, g⟩ = ∫ f g ω_X ∧ ω_B`.
pub fn inner_product(f: &ScalarField, g: &ScalarField, omega_x: &Form11, omega_b: &Form11) -> Result<f64> {
    let vol = omega_x.wedge(omega_b);
    Ok(f.mul(g)?.mul(&vol)?.integrate())
}

/// Vertical gradient coefficient `Y = u_t / g_V` (so `∇^{1,0}_V u = Y w∂_w`).
pub(crate) fn vertical_gradient(u: &ScalarField, omega_x: &Form11) -> Result<ScalarField> {
    let ut = u.derivative_closed(Axis::T, 1, Closure::OneSided)?;
    ut.zip_with(&omega_x.tt, |a, g| a / g, |_, _| 0.0)
}

/// `‖ℛu‖²` restricted to fiber directions: `∫ 2 (∂_t Y)² ω_X ∧ ω_B`.
/// Vanishes exactly when `∇^{1,0}_V u` is holomorphic on every fiber.
pub fn lichnerowicz_residual(u: &ScalarField, omega_x: &Form11, omega_b: &Form11) -> Result<f64> {
    omega_x.check_fiber_positive()?;
    let y = vertical_gradient(u, omega_x)?;
    let yt = y.derivative_closed(Axis::T, 1, Closure::OneSided)?;
    let dens = yt.map(|v| 2.0 * v * v).mul(&omega_x.wedge(omega_b))?;
    Ok(dens.integrate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LogGrid;
    use crate::model::{fs_density, softplus};

    #[test]
    fn ddbar_kills_constants_and_linear_functions() {
        let g = LogGrid::new(5.0, 5.0, 32, 32, 6).unwrap();
        let c = ScalarField::constant(g, 7.0);
        assert!(ddbar(&c).unwrap().ss.max_abs() < 1e-12);
        let t = ScalarField::from_fn(g, Slopes::new(0.0, 0.0, 1.0, 1.0), |_, t| t);
        let w = ddbar(&t).unwrap();
        assert!(w.ss.max_abs() < 1e-12 && w.st.max_abs() < 1e-12 && w.tt.max_abs() < 1e-12);
    }

    #[test]
    fn fs_potential_has_quarter_density_at_origin() {
        let g = LogGrid::new(4.0, 12.0, 17, 193, 6).unwrap();
        let f = ScalarField::from_fn(g, Slopes::new(0.0, 0.0, 0.0, 1.0), |_, t| softplus(t));
        let w = ddbar(&f).unwrap();
        assert!((w.tt.at(8, 96) - 0.25).abs() < 1e-8, "{}", w.tt.at(8, 96) - 0.25);
        assert!((w.tt.at(3, 40) - fs_density(g.t(40))).abs() < 1e-8);
    }
}
