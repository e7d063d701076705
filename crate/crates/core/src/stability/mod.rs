//! Exact stability invariants of product-type fibration degenerations:
//! DF by weights and by intersections, W0/W1, minimum norm.

pub mod poly;
pub mod ring;
pub mod spec;
pub mod toric;
pub mod weights;

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use poly::Poly;
pub use ring::{fmt_q, q, qr, Base, BaseClass, Class, IntersectionRing, Q};
pub use spec::{shipped_spec, shipped_specs, DegenerationSpec, Flag};
pub use weights::{df_from_weights, HilbertCoefficients, WeightData};

/// Slope constants of `(X, kL + H)` for `X = P(V) → P^1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassConstants {
    /// `μ_k = n₁k + n₀` over `d₁k + d₀`.
    pub mu_num: (Q, Q),
    pub mu_den: (Q, Q),
    pub a0: Q,
    pub a1: Q,
}

impl ClassConstants {
    /// Exact slope `μ(X, kL + H) = −K·(kL+H) / (kL+H)²`.
    pub fn mu(&self, k: &Q) -> Q {
        (&self.mu_num.0 * k + &self.mu_num.1) / (&self.mu_den.0 * k + &self.mu_den.1)
    }

    /// Average scalar curvature `Ŝ_k = n·μ_k` (n = 2).
    pub fn s_hat(&self, k: &Q) -> Q {
        q(2) * self.mu(k)
    }
}

/// The intersection ring of `X = P(⊕ O(d_i))` over `P^1`.
pub fn x_ring(bundle: &[i64]) -> Result<IntersectionRing> {
    IntersectionRing::new(Base::P1, bundle.iter().map(|&d| (d, 0)).collect())
}

/// `A0`, `A1` and `μ_k` for `L = π*O(β)`, `H = O(1) ⊗ π*O(e)`.
pub fn class_constants(bundle: &[i64], e: i64, beta: &Q) -> Result<ClassConstants> {
    let ring = x_ring(bundle)?;
    let l = ring.scale(&ring.ell(), beta);
    let h = ring.add(&ring.h(), &ring.scale(&ring.ell(), &q(e)));
    let k_x = ring.add(&ring.relative_canonical(), &ring.scale(&ring.ell(), &q(-2)));
    let neg_k = ring.scale(&k_x, &q(-1));
    // (kL + H)² = k² L² + 2k LH + H², −K(kL+H) = k(−KL) + (−KH)
    let ll = ring.intersect(&[&l, &l]);
    if !ll.is_zero() {
        return Err(Error::Degenerate("L² ≠ 0 for a base class".into()));
    }
    let d1 = q(2) * ring.intersect(&[&l, &h]);
    let d0 = ring.intersect(&[&h, &h]);
    let n1 = ring.intersect(&[&neg_k, &l]);
    let n0 = ring.intersect(&[&neg_k, &h]);
    if d1.is_zero() {
        return Err(Error::Degenerate("L·H = 0".into()));
    }
    // μ_k = n1/d1 + (n0 d1 − n1 d0)/d1² · k⁻¹ + O(k⁻²) = A0/2 + A1/(2k)
    let a0 = q(2) * &n1 / &d1;
    let a1 = q(2) * (&n0 * &d1 - &n1 * &d0) / (&d1 * &d1);
    Ok(ClassConstants { mu_num: (n1, n0), mu_den: (d1, d0), a0, a1 })
}

/// `DF = n/(n+1) μ ℒ̄^{n+1} + ℒ̄^n · K`, with `n = dim − 1`.
pub fn df_intersection(ring: &IntersectionRing, lbar: &Class, k: &Class, mu: &Q) -> Q {
    let n = ring.dim() - 1;
    let top = ring.degree(&ring.pow(lbar, n + 1));
    let ln = ring.pow(lbar, n);
    let lk = ring.intersect(&[&ln, k]);
    qr(n as i64, n as i64 + 1) * mu * top + lk
}

/// The compactified degeneration `P(Ē)` over `B × P^1` with its classes.
#[derive(Debug, Clone)]
pub struct Compactification {
    pub ring: IntersectionRing,
    /// `L̄ = β ℓ`.
    pub lbar: Class,
    /// `ℋ̄ = h + e ℓ + c τ`.
    pub hbar: Class,
    /// `K_{𝒳̄/B×P^1}`.
    pub k_rel: Class,
    /// `K_{𝒳̄/P^1}`.
    pub k_over_time: Class,
}

/// Rees compactification: `Ē = O(d_W, r λ_W) ⊕ O(d_Q, r λ_Q)` with
/// canonical weights.
pub fn compactify(spec: &DegenerationSpec) -> Result<Compactification> {
    spec.validate()?;
    let (dw, dq) = spec.sub_quot_degrees();
    let (lw, lq) = spec.canonical_weights();
    let r = spec.exponent;
    let ring = IntersectionRing::new(Base::P1xP1, vec![(dw, r * lw), (dq, r * lq)])?;
    let lbar = ring.scale(&ring.ell(), &q(spec.base_degree));
    let hbar = ring.add(
        &ring.h(),
        &ring.divisor(q(spec.h_twist_base), q(spec.h_twist_time), Q::zero()),
    );
    let k_rel = ring.relative_canonical();
    let k_over_time = ring.add(&k_rel, &ring.scale(&ring.ell(), &q(-2)));
    Ok(Compactification { ring, lbar, hbar, k_rel, k_over_time })
}

/// DF of `(𝒳, jL + ℋ)` by the intersection formula.
pub fn df_intersection_at(spec: &DegenerationSpec, j: i64) -> Result<Q> {
    let c = compactify(spec)?;
    let consts = class_constants(&spec.bundle, spec.h_twist_base, &q(spec.base_degree))?;
    let lj = c.ring.add(&c.ring.scale(&c.lbar, &q(j)), &c.hbar);
    Ok(df_intersection(&c.ring, &lj, &c.k_over_time, &consts.mu(&q(j))))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct W0W1 {
    pub w0: Q,
    pub w1: Q,
    /// `(A0/3) ℋ̄³`
    pub c1: Q,
    /// `A1 L̄ ℋ̄²`
    pub c2: Q,
    /// `ℋ̄² K_{𝒳̄/P^1}`
    pub c3: Q,
}

/// `W0 = A0 L̄ℋ̄² + 2 L̄ℋ̄K` and `W1 = C1 + C2 + C3` (for `m = n = 1`).
pub fn w0_w1(spec: &DegenerationSpec) -> Result<W0W1> {
    let c = compactify(spec)?;
    let consts = class_constants(&spec.bundle, spec.h_twist_base, &q(spec.base_degree))?;
    let r = &c.ring;
    let lhh = r.intersect(&[&c.lbar, &c.hbar, &c.hbar]);
    let lhk = r.intersect(&[&c.lbar, &c.hbar, &c.k_over_time]);
    let hhh = r.intersect(&[&c.hbar, &c.hbar, &c.hbar]);
    let hhk = r.intersect(&[&c.hbar, &c.hbar, &c.k_over_time]);
    let w0 = &consts.a0 * &lhh + q(2) * lhk;
    let c1 = &consts.a0 / q(3) * hhh;
    let c2 = &consts.a1 * &lhh;
    let c3 = hhk;
    let w1 = &c1 + &c2 + &c3;
    Ok(W0W1 { w0, w1, c1, c2, c3 })
}

/// Sign relating `O_T`-degrees of the Rees pieces to `C*`-weights.
pub const WEIGHT_SIGN: i64 = 1;

/// Weight of the `(p, q)` piece of `Sym^k(W ⊕ Q)^*`.
fn piece_weight(spec: &DegenerationSpec, k: i64, p: i64, qq: i64) -> i64 {
    let (lw, lq) = spec.canonical_weights();
    WEIGHT_SIGN * (k * spec.h_twist_time - spec.exponent * (p * lw + qq * lq))
}

/// Equivariant dimensions and weights of `H⁰(𝒳₀, (jL + ℋ)^k)` on the
/// central fiber `P(W ⊕ Q)`, for `k ∈ ks`.
pub fn weight_data(spec: &DegenerationSpec, j: i64, ks: &[i64]) -> Result<WeightData> {
    spec.validate()?;
    let jmin = spec.min_j();
    if j < jmin {
        return Err(Error::EnlargeJ { j, min: jmin });
    }
    let (dw, dq) = spec.sub_quot_degrees();
    let m = j * spec.base_degree + spec.h_twist_base;
    let samples = ks
        .iter()
        .map(|&k| {
            let mut dim = BigInt::zero();
            let mut w = BigInt::zero();
            for p in 0..=k {
                let qq = k - p;
                let deg = k * m - p * dw - qq * dq;
                debug_assert!(deg >= 0);
                let h0 = BigInt::from(deg + 1);
                w += &h0 * BigInt::from(piece_weight(spec, k, p, qq));
                dim += h0;
            }
            (k, dim, Q::from_integer(w))
        })
        .collect();
    Ok(WeightData { n: 2, samples })
}

/// Weight data of the induced product configuration on a general fiber.
pub fn fiber_weight_data(spec: &DegenerationSpec, ks: &[i64]) -> WeightData {
    let samples = ks
        .iter()
        .map(|&k| {
            let w: i64 = (0..=k).map(|p| piece_weight(spec, k, p, k - p)).sum();
            (k, BigInt::from(k + 1), q(w))
        })
        .collect();
    WeightData { n: 1, samples }
}

const K_WINDOW: [i64; 7] = [1, 2, 3, 4, 5, 6, 7];

/// `W0 = binom(2,1) L·DF(fiber)` with the fiber DF in intersection
/// normalization (`2 ℋ_b · DF_w`).
pub fn w0_from_fiber_df(spec: &DegenerationSpec) -> Result<Q> {
    spec.validate()?;
    let df_w = df_from_weights(&fiber_weight_data(spec, &K_WINDOW))?;
    let df_fiber = q(2) * df_w;
    Ok(q(2) * q(spec.base_degree) * df_fiber)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JExpansion {
    pub js: Vec<i64>,
    /// `(j, DF_w(j), 2ℒ_j²·DF_w(j))`.
    pub per_j: Vec<(i64, Q, Q)>,
    pub w0: Q,
    pub w1: Q,
    /// Quotient coefficients of `j²` and above; all zero for a valid fit.
    pub higher: Vec<Q>,
}

/// Expansion `DF(𝒳, jL+ℋ) = j W0 + W1 + O(1/j)` from equivariant weight
/// counts: `DF(j) = P(j)/a₀(j)` is fitted as a ratio of exact polynomials
/// and expanded at `j = ∞` by polynomial division.
pub fn df_j_expansion(spec: &DegenerationSpec, js: &[i64]) -> Result<JExpansion> {
    const MIN_JS: usize = 5;
    if js.len() < MIN_JS {
        return Err(Error::TooFewSamples { need: MIN_JS, got: js.len() });
    }
    let fits: Vec<(i64, HilbertCoefficients)> = js
        .par_iter()
        .map(|&j| Ok((j, weight_data(spec, j, &K_WINDOW)?.fit()?)))
        .collect::<Result<_>>()?;
    let xs: Vec<Q> = js.iter().map(|&j| q(j)).collect();
    // DF_int = 2 ℒ² DF_w = 2 (2 a0) (a1 b0 − a0 b1)/a0²
    let num: Vec<Q> = fits
        .iter()
        .map(|(_, c)| q(4) * (&c.a1 * &c.b0 - &c.a0 * &c.b1))
        .collect();
    let den: Vec<Q> = fits.iter().map(|(_, c)| c.a0.clone()).collect();
    let p = Poly::interpolate(&xs, &num);
    let a = Poly::interpolate(&xs, &den);
    let dp = p.degree().unwrap_or(0);
    let da = a.degree().ok_or_else(|| Error::WeightData("a0(j) vanishes".into()))?;
    // one redundant sample at least, so the fit is checked
    if dp + 2 > js.len() || da + 2 > js.len() {
        return Err(Error::WeightData(format!(
            "j-window of {} values cannot certify degrees ({dp}, {da})",
            js.len()
        )));
    }
    let (quot, _) = p.div_rem(&a);
    let per_j = fits
        .iter()
        .zip(num.iter().zip(&den))
        .map(|((j, c), (n, d))| {
            let dfw = (&c.a1 * &c.b0 - &c.a0 * &c.b1) / (&c.a0 * &c.a0);
            (*j, dfw, n / d)
        })
        .collect();
    let higher = (2..quot.0.len()).map(|i| quot.coeff(i)).collect();
    Ok(JExpansion { js: js.to_vec(), per_j, w0: quot.coeff(1), w1: quot.coeff(0), higher })
}

/// Default `j`-window: six consecutive values starting at the nef bound.
pub fn default_js(spec: &DegenerationSpec) -> Vec<i64> {
    let j0 = spec.min_j();
    (j0..j0 + 6).collect()
}

/// Minimum norm `L·ℋ̄²/2 − L·ℋ̄(ℋ̄ − H)`, evaluated on the toric fiber
/// compactification: `β (ℋ̄_b·H_b − ℋ̄_b²/2)` with mixed areas.
pub fn minimum_norm(spec: &DegenerationSpec) -> Result<Q> {
    spec.validate()?;
    let (lw, lq) = spec.canonical_weights();
    let r = spec.exponent;
    // a nef representative; the value does not depend on the time twist
    let c = spec.h_twist_time.max(0);
    let p_h = toric::Polygon::hull(&[
        (q(0), q(0)),
        (q(1), q(0)),
        (q(1), q(r * lq + c)),
        (q(0), q(r * lw + c)),
    ]);
    let seg = toric::Polygon::hull(&[(q(0), q(0)), (q(1), q(0))]);
    let hh = q(2) * p_h.area();
    let h_dot_seg = p_h.minkowski(&seg).area() - p_h.area() - seg.area();
    Ok(q(spec.base_degree) * (h_dot_seg - hh / q(2)))
}

/// All exact invariants of one spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecReport {
    pub name: String,
    pub product: bool,
    pub intersection: W0W1,
    pub expansion: JExpansion,
    pub w0_fiber: Q,
    pub minimum_norm: Q,
}

impl SpecReport {
    /// Exact agreement of all dual paths.
    pub fn consistent(&self) -> bool {
        self.intersection.w0 == self.expansion.w0
            && self.intersection.w1 == self.expansion.w1
            && self.intersection.w0 == self.w0_fiber
            && self.expansion.higher.iter().all(Zero::is_zero)
    }
}

pub fn spec_report(spec: &DegenerationSpec) -> Result<SpecReport> {
    Ok(SpecReport {
        name: spec.name.clone(),
        product: spec.is_product(),
        intersection: w0_w1(spec)?,
        expansion: df_j_expansion(spec, &default_js(spec))?,
        w0_fiber: w0_from_fiber_df(spec)?,
        minimum_norm: minimum_norm(spec)?,
    })
}

/// `binom(n+1, p+1) = Σ_{q=p}^{n} binom(q, p)`, checked exhaustively.
pub fn binomial_identity_holds(n_max: u64) -> bool {
    use num_integer::binomial;
    (0..=n_max).all(|n| {
        (0..=n).all(|p| {
            let lhs = binomial(BigInt::from(n + 1), BigInt::from(p + 1));
            let rhs: BigInt = (p..=n).map(|qq| binomial(BigInt::from(qq), BigInt::from(p))).sum();
            lhs == rhs
        })
    })
}

