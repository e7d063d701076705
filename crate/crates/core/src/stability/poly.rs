//! Dense univariate polynomials over `Q` (ascending coefficients).

use num_traits::{One, Zero};

use super::ring::{q, Q};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly(pub Vec<Q>);

impl Poly {
    pub fn new(mut c: Vec<Q>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Poly(c)
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Poly::new(c.iter().map(|&x| q(x)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn coeff(&self, i: usize) -> Q {
        self.0.get(i).cloned().unwrap_or_else(Q::zero)
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.0.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
    }

    /// Interpolating polynomial through `(x_i, y_i)` (Newton form, then expanded).
    pub fn interpolate(xs: &[Q], ys: &[Q]) -> Poly {
        assert_eq!(xs.len(), ys.len());
        let n = xs.len();
        let mut dd: Vec<Q> = ys.to_vec();
        for level in 1..n {
            for i in (level..n).rev() {
                dd[i] = (&dd[i] - &dd[i - 1]) / (&xs[i] - &xs[i - level]);
            }
        }
        // Horner on the Newton basis
        let mut acc = Poly::new(vec![]);
        for i in (0..n).rev() {
            // acc = acc * (x - x_i) + dd[i]
            let mut next = vec![Q::zero(); acc.0.len() + 1];
            for (k, c) in acc.0.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * &xs[i];
            }
            next[0] += &dd[i];
            acc = Poly::new(next);
        }
        acc
    }

    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        let dd = d.degree().expect("division by zero polynomial");
        let lead = d.0[dd].clone();
        let mut rem = self.0.clone();
        let nq = rem.len().saturating_sub(dd);
        let mut quot = vec![Q::zero(); nq];
        for i in (0..nq).rev() {
            let c = &rem[i + dd] / &lead;
            for (k, dk) in d.0.iter().enumerate() {
                rem[i + k] -= &c * dk;
            }
            quot[i] = c;
        }
        rem.truncate(dd);
        (Poly::new(quot), Poly::new(rem))
    }

    /// Monic greatest common divisor.
    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        let (mut x, mut y) = (a.clone(), b.clone());
        while !y.is_zero() {
            let (_, r) = x.div_rem(&y);
            x = y;
            y = r;
        }
        match x.degree() {
            None => x,
            Some(d) => {
                let lead = x.0[d].clone();
                Poly::new(x.0.iter().map(|c| c / &lead).collect())
            }
        }
    }

    pub fn is_constant_nonzero(&self) -> bool {
        self.degree() == Some(0)
    }

    pub fn one() -> Poly {
        Poly(vec![Q::one()])
    }
}
