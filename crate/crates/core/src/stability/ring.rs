//! Chow rings of projective bundles `P(E)` (lines convention) over `P^1` or
//! `P^1 × P^1`, with exact rational coefficients.
//!
//! The base ring is `Q[ℓ, τ]/(ℓ², τ²)`; `h = c_1(O_{P(E)}(1))` satisfies the
//! Grothendieck relation `h^r + c_1(E) h^{r-1} + … + c_r(E) = 0`, and the
//! point class is `ℓ τ h^{r-1}` (or `ℓ h^{r-1}` over `P^1`).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Render as `p/q` (or `p` when integral).
pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Element `c0 + cℓ ℓ + cτ τ + cℓτ ℓτ` of the base ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseClass(pub [Q; 4]);

impl BaseClass {
    pub fn zero() -> Self {
        BaseClass([Q::zero(), Q::zero(), Q::zero(), Q::zero()])
    }
    pub fn one() -> Self {
        BaseClass([Q::one(), Q::zero(), Q::zero(), Q::zero()])
    }
    pub fn linear(c0: Q, l: Q, t: Q) -> Self {
        BaseClass([c0, l, t, Q::zero()])
    }
    pub fn mul(&self, o: &BaseClass) -> BaseClass {
        let [a0, a1, a2, a3] = &self.0;
        let [b0, b1, b2, b3] = &o.0;
        BaseClass([
            a0 * b0,
            a0 * b1 + a1 * b0,
            a0 * b2 + a2 * b0,
            a0 * b3 + a3 * b0 + a1 * b2 + a2 * b1,
        ])
    }
    pub fn add(&self, o: &BaseClass) -> BaseClass {
        BaseClass(std::array::from_fn(|i| &self.0[i] + &o.0[i]))
    }
    pub fn scale(&self, c: &Q) -> BaseClass {
        BaseClass(std::array::from_fn(|i| &self.0[i] * c))
    }
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    /// `P^1` with point class `ℓ`.
    P1,
    /// `P^1 × P^1` with point classes `ℓ` (first factor) and `τ` (second).
    P1xP1,
}

/// Chow ring of `P(⊕ O(d_i, e_i))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionRing {
    pub base: Base,
    pub summands: Vec<(i64, i64)>,
    /// `c_0 = 1, c_1, …, c_r` of the bundle.
    chern: Vec<BaseClass>,
}

/// A class: polynomial in `h` of degree `< r` with base-ring coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Class(pub Vec<BaseClass>);

impl IntersectionRing {
    pub fn new(base: Base, summands: Vec<(i64, i64)>) -> Result<Self> {
        if summands.is_empty() {
            return Err(Error::InvalidSpec("bundle of rank 0".into()));
        }
        if base == Base::P1 && summands.iter().any(|&(_, e)| e != 0) {
            return Err(Error::InvalidSpec("second-factor degrees need base P1xP1".into()));
        }
        // c(E) = Π (1 + d ℓ + e τ)
        let mut chern = vec![BaseClass::one()];
        for &(d, e) in &summands {
            let f = BaseClass::linear(Q::zero(), q(d), q(e));
            let mut next = vec![BaseClass::zero(); chern.len() + 1];
            for (i, c) in chern.iter().enumerate() {
                next[i] = next[i].add(c);
                next[i + 1] = next[i + 1].add(&c.mul(&f));
            }
            chern = next;
        }
        Ok(IntersectionRing { base, summands, chern })
    }

    pub fn rank(&self) -> usize {
        self.summands.len()
    }

    /// Chern class `c_i(E)` as a base class.
    pub fn chern(&self, i: usize) -> BaseClass {
        self.chern.get(i).cloned().unwrap_or_else(BaseClass::zero)
    }

    pub fn dim(&self) -> usize {
        self.rank() - 1 + if self.base == Base::P1 { 1 } else { 2 }
    }

    pub fn zero(&self) -> Class {
        Class(vec![BaseClass::zero(); self.rank()])
    }

    pub fn from_base(&self, b: BaseClass) -> Class {
        let mut c = self.zero();
        c.0[0] = b;
        c
    }

    pub fn one(&self) -> Class {
        self.from_base(BaseClass::one())
    }

    /// `c_0 + cℓ ℓ + cτ τ + ch h`.
    pub fn divisor(&self, l: Q, t: Q, h: Q) -> Class {
        let mut c = self.from_base(BaseClass::linear(Q::zero(), l, t));
        self.add_h_power(&mut c, 1, BaseClass::linear(h, Q::zero(), Q::zero()));
        c
    }

    pub fn h(&self) -> Class {
        self.divisor(Q::zero(), Q::zero(), Q::one())
    }
    pub fn ell(&self) -> Class {
        self.divisor(Q::one(), Q::zero(), Q::zero())
    }
    pub fn tau(&self) -> Class {
        self.divisor(Q::zero(), Q::one(), Q::zero())
    }

    /// Pullback of `c_1(E)`.
    pub fn c1(&self) -> Class {
        self.from_base(self.chern(1))
    }

    /// Add `coef · h^k` to `c`, reducing with the Grothendieck relation.
    fn add_h_power(&self, c: &mut Class, k: usize, coef: BaseClass) {
        let r = self.rank();
        if coef.is_zero() {
            return;
        }
        if k < r {
            c.0[k] = c.0[k].add(&coef);
            return;
        }
        // h^k = h^{k-r} h^r = -Σ_{i≥1} c_i h^{k-i}
        for i in 1..=r {
            let term = coef.mul(&self.chern[i]).scale(&q(-1));
            self.add_h_power(c, k - i, term);
        }
    }

    pub fn add(&self, a: &Class, b: &Class) -> Class {
        Class(a.0.iter().zip(&b.0).map(|(x, y)| x.add(y)).collect())
    }

    pub fn scale(&self, a: &Class, s: &Q) -> Class {
        Class(a.0.iter().map(|x| x.scale(s)).collect())
    }

    pub fn mul(&self, a: &Class, b: &Class) -> Class {
        let mut out = self.zero();
        for (i, x) in a.0.iter().enumerate() {
            for (j, y) in b.0.iter().enumerate() {
                self.add_h_power(&mut out, i + j, x.mul(y));
            }
        }
        out
    }

    pub fn pow(&self, a: &Class, k: usize) -> Class {
        (0..k).fold(self.one(), |acc, _| self.mul(&acc, a))
    }

    pub fn product(&self, classes: &[&Class]) -> Class {
        classes.iter().fold(self.one(), |acc, c| self.mul(&acc, c))
    }

    /// Degree of the top-dimensional part.
    pub fn degree(&self, a: &Class) -> Q {
        let top = &a.0[self.rank() - 1];
        match self.base {
            Base::P1 => top.0[1].clone(),
            Base::P1xP1 => top.0[3].clone(),
        }
    }

    /// Degree of a product of classes.
    pub fn intersect(&self, classes: &[&Class]) -> Q {
        self.degree(&self.product(classes))
    }

    /// Relative canonical class `K_{P(E)/base} = -r h - c_1(E)`.
    pub fn relative_canonical(&self) -> Class {
        let r = q(self.rank() as i64);
        self.add(&self.scale(&self.h(), &(-r)), &self.scale(&self.c1(), &q(-1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hirzebruch_numbers() {
        // P(O ⊕ O(a)): h^2 = -a, ℓh = 1, K^2 = 8
        for a in 0..5 {
            let r = IntersectionRing::new(Base::P1, vec![(0, 0), (a, 0)]).unwrap();
            let (h, l) = (r.h(), r.ell());
            assert_eq!(r.intersect(&[&h, &h]), q(-a));
            assert_eq!(r.intersect(&[&l, &h]), q(1));
            assert_eq!(r.intersect(&[&l, &l]), q(0));
            let k = r.add(&r.relative_canonical(), &r.scale(&l, &q(-2)));
            assert_eq!(r.intersect(&[&k, &k]), q(8));
        }
    }

    #[test]
    fn top_power_matches_segre_class() {
        // rank 2 over P1xP1: ∫ h^3 = c1^2 - c2
        let r = IntersectionRing::new(Base::P1xP1, vec![(-1, 1), (1, 0)]).unwrap();
        let h = r.h();
        let c1 = r.chern(1);
        let c2 = r.chern(2);
        let expect = &c1.mul(&c1).0[3] - &c2.0[3];
        assert_eq!(r.intersect(&[&h, &h, &h]), expect);
        assert_eq!(r.intersect(&[&h, &h, &h]), q(-1));
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_q(&qr(4, 3)), "4/3");
        assert_eq!(fmt_q(&qr(-6, 3)), "-2");
    }
}
