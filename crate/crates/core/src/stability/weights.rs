//! Equivariant weight data and the Donaldson–Futaki invariant from the
//! Hilbert and weight polynomials.

use num_bigint::BigInt;
use num_traits::Zero;

use super::poly::Poly;
use super::ring::{q, Q};
use crate::error::{Error, Result};

/// Dimensions and total weights of `H⁰(X₀, L₀^k)` for a window of `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightData {
    /// Dimension of the central fiber.
    pub n: usize,
    /// `(k, dim, total weight)`.
    pub samples: Vec<(i64, BigInt, Q)>,
}

/// Leading coefficients of `a_k = a0 k^n + a1 k^{n-1} + …` and
/// `w_k = b0 k^{n+1} + b1 k^n + …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertCoefficients {
    pub a0: Q,
    pub a1: Q,
    pub b0: Q,
    pub b1: Q,
}

impl WeightData {
    /// Exact polynomial fit; every sample is used, so consistency of the
    /// degrees is checked rather than assumed.
    pub fn fit(&self) -> Result<HilbertCoefficients> {
        let n = self.n;
        if self.samples.len() < n + 3 {
            return Err(Error::WeightData(format!(
                "need at least {} samples for dimension {n}, got {}",
                n + 3,
                self.samples.len()
            )));
        }
        let ks: Vec<Q> = self.samples.iter().map(|s| q(s.0)).collect();
        let dims: Vec<Q> = self.samples.iter().map(|s| Q::from_integer(s.1.clone())).collect();
        let ws: Vec<Q> = self.samples.iter().map(|s| s.2.clone()).collect();
        let a = Poly::interpolate(&ks, &dims);
        let w = Poly::interpolate(&ks, &ws);
        if a.degree().is_some_and(|d| d > n) {
            return Err(Error::WeightData(format!("dimensions are not a polynomial of degree {n}")));
        }
        if w.degree().is_some_and(|d| d > n + 1) {
            return Err(Error::WeightData(format!("weights are not a polynomial of degree {}", n + 1)));
        }
        let a0 = a.coeff(n);
        if a0.is_zero() {
            return Err(Error::WeightData("leading Hilbert coefficient vanishes".into()));
        }
        Ok(HilbertCoefficients {
            a0,
            a1: if n >= 1 { a.coeff(n - 1) } else { Q::zero() },
            b0: w.coeff(n + 1),
            b1: w.coeff(n),
        })
    }
}

/// `DF = (a1 b0 − a0 b1) / a0²`.
pub fn df_from_weights(w: &WeightData) -> Result<Q> {
    let c = w.fit()?;
    Ok((&c.a1 * &c.b0 - &c.a0 * &c.b1) / (&c.a0 * &c.a0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize, f: impl Fn(i64) -> (i64, Q)) -> WeightData {
        WeightData {
            n,
            samples: (1..=8).map(|k| {
                let (d, w) = f(k);
                (k, BigInt::from(d), w)
            }).collect(),
        }
    }

    #[test]
    fn projective_line_standard_action() {
        // a_k = k+1, w_k = k(k+1)/2
        let w = data(1, |k| (k + 1, super::super::ring::qr(k * (k + 1), 2)));
        assert_eq!(df_from_weights(&w).unwrap(), q(0));
    }

    #[test]
    fn trivial_action() {
        let w = data(1, |k| (k + 1, q(0)));
        assert_eq!(df_from_weights(&w).unwrap(), q(0));
    }

    #[test]
    fn shift_by_multiple_of_k_a_k_is_invisible() {
        let base = data(1, |k| (k + 1, q(k * k * 3 + k)));
        let shifted = data(1, |k| (k + 1, q(k * k * 3 + k + 5 * k * (k + 1))));
        assert_eq!(df_from_weights(&base).unwrap(), df_from_weights(&shifted).unwrap());
    }

    #[test]
    fn non_polynomial_data_is_rejected() {
        let w = data(1, |k| (k + 1, q(1 << k)));
        assert!(matches!(df_from_weights(&w), Err(Error::WeightData(_))));
    }
}
