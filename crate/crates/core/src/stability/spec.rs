//! Product-type fibration degenerations of `P(V) → P^1` built from a
//! sub-line-bundle `W ⊂ V` and `C*`-weights on `W` and `Q = V/W`.

use super::poly::Poly;
use crate::error::{Error, Result};

/// The destabilizing sub-line-bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Flag {
    /// `W` is the summand `O(d_i)` of `V`.
    Summand(usize),
    /// `W = O(degree) → V` given by one section of `O(d_i - degree)` per
    /// summand, as coefficients of `1, z, z², …` in the affine coordinate.
    SubLine { degree: i64, sections: Vec<Vec<i64>> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegenerationSpec {
    pub name: String,
    /// Degrees `d_i` of `V = ⊕ O(d_i)`; rank 2.
    pub bundle: Vec<i64>,
    pub flag: Flag,
    /// Weights `(λ_W, λ_Q)` on the sub and the quotient.
    pub weights: (i64, i64),
    /// Exponent `r` of the one-parameter subgroup (`t ↦ t^r`).
    pub exponent: i64,
    /// `H = O_{P(V)}(1) ⊗ π*O(e)`.
    pub h_twist_base: i64,
    /// Extra pullback of `O(c)` from the time factor on the compactification.
    pub h_twist_time: i64,
    /// `L = π*O(β)`.
    pub base_degree: i64,
}

impl DegenerationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bundle.len() != 2 {
            return Err(Error::InvalidSpec(format!(
                "only rank-2 bundles are supported (got rank {})",
                self.bundle.len()
            )));
        }
        if self.exponent < 1 {
            return Err(Error::InvalidSpec("exponent r must be >= 1".into()));
        }
        if self.base_degree < 1 {
            return Err(Error::InvalidSpec("base degree must be >= 1".into()));
        }
        match &self.flag {
            Flag::Summand(i) => {
                if *i >= self.bundle.len() {
                    return Err(Error::InvalidSpec(format!("summand index {i} out of range")));
                }
            }
            Flag::SubLine { degree, sections } => {
                if sections.len() != self.bundle.len() {
                    return Err(Error::InvalidSpec("one section per summand required".into()));
                }
                let mut polys = Vec::new();
                let mut at_infinity = Vec::new();
                for (d, sec) in self.bundle.iter().zip(sections) {
                    let deg = d - degree;
                    if sec.len() as i64 > deg + 1 {
                        return Err(Error::InvalidSpec(format!(
                            "section into O({d}) has degree > {deg}"
                        )));
                    }
                    let p = Poly::from_ints(sec);
                    // vanishing at ∞ means the z^deg coefficient is zero
                    at_infinity.push(deg < 0 || p.coeff(deg as usize) == num_traits::Zero::zero());
                    polys.push(p);
                }
                if polys.iter().all(Poly::is_zero) {
                    return Err(Error::InvalidSpec("zero map W → V".into()));
                }
                if at_infinity.iter().all(|&v| v) {
                    return Err(Error::InvalidSpec(
                        "quotient not locally free: sections vanish together at z = ∞".into(),
                    ));
                }
                let g = polys.iter().fold(Poly::new(vec![]), |acc, p| Poly::gcd(&acc, p));
                if !g.is_constant_nonzero() {
                    return Err(Error::InvalidSpec(
                        "quotient not locally free: sections have a common zero".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Degrees `(d_W, d_Q)`.
    pub fn sub_quot_degrees(&self) -> (i64, i64) {
        let total: i64 = self.bundle.iter().sum();
        let dw = match &self.flag {
            Flag::Summand(i) => self.bundle[*i],
            Flag::SubLine { degree, .. } => *degree,
        };
        (dw, total - dw)
    }

    /// Weights shifted so the smaller one is 0.
    pub fn canonical_weights(&self) -> (i64, i64) {
        let m = self.weights.0.min(self.weights.1);
        (self.weights.0 - m, self.weights.1 - m)
    }

    pub fn canonicalize(&self) -> DegenerationSpec {
        DegenerationSpec { weights: self.canonical_weights(), ..self.clone() }
    }

    /// Whether all weights agree, so the `C*`-action on `P(V)` is trivial.
    pub fn is_trivial(&self) -> bool {
        self.weights.0 == self.weights.1
    }

    /// Whether the degeneration is induced by a one-parameter subgroup of
    /// `Aut(π)`: the flag is a summand, or the central bundle `W ⊕ Q` is
    /// isomorphic to `V`.
    pub fn is_product(&self) -> bool {
        match self.flag {
            Flag::Summand(_) => true,
            Flag::SubLine { .. } => {
                let (dw, dq) = self.sub_quot_degrees();
                let mut a = vec![dw, dq];
                let mut b = self.bundle.clone();
                a.sort_unstable();
                b.sort_unstable();
                a == b
            }
        }
    }

    /// Same spec with the one-parameter subgroup inverted.
    pub fn inverted(&self) -> DegenerationSpec {
        DegenerationSpec {
            name: format!("{}-inverse", self.name),
            weights: (self.weights.1, self.weights.0),
            ..self.clone()
        }
    }

    /// Same spec with exponent `r`.
    pub fn with_exponent(&self, r: i64) -> DegenerationSpec {
        DegenerationSpec { exponent: r, ..self.clone() }
    }

    /// Smallest `j` with `jβ + e ≥ max(d_W, d_Q)`, so all section degrees
    /// on the central fiber are nonnegative.
    pub fn min_j(&self) -> i64 {
        let (dw, dq) = self.sub_quot_degrees();
        let need = dw.max(dq).max(self.bundle.iter().copied().max().unwrap_or(0)) - self.h_twist_base;
        let b = self.base_degree;
        // ceil(need / b), at least 1
        let j = if need <= 0 { 0 } else { (need + b - 1) / b };
        j.max(1)
    }
}

/// Degenerations shipped with the library.
pub fn shipped_specs() -> Vec<DegenerationSpec> {
    let base = |name: &str, bundle: Vec<i64>, flag: Flag, weights: (i64, i64)| DegenerationSpec {
        name: name.into(),
        bundle,
        flag,
        weights,
        exponent: 1,
        h_twist_base: 0,
        h_twist_time: 0,
        base_degree: 1,
    };
    vec![
        base("trivial", vec![0, 0], Flag::Summand(0), (0, 0)),
        base("euler", vec![0, 0], Flag::SubLine { degree: -1, sections: vec![vec![1], vec![0, 1]] }, (1, 0)),
        base("product-oo", vec![0, 0], Flag::Summand(1), (1, 0)),
        base("product-f1", vec![0, 1], Flag::Summand(1), (1, 0)),
        base("product-f1-inverse", vec![0, 1], Flag::Summand(1), (0, 1)),
        base("product-f2", vec![0, 2], Flag::Summand(1), (1, 0)),
        base("product-f2-inverse", vec![0, 2], Flag::Summand(1), (0, 1)),
        base("euler-f1", vec![0, 1], Flag::SubLine { degree: -1, sections: vec![vec![1], vec![0, 1, 1]] }, (1, 0)),
        DegenerationSpec {
            exponent: 2,
            h_twist_base: 1,
            base_degree: 2,
            ..base("euler-scaled", vec![0, 0], Flag::SubLine { degree: -1, sections: vec![vec![1], vec![0, 1]] }, (1, 0))
        },
        DegenerationSpec {
            h_twist_time: 3,
            ..base("euler-time-twist", vec![0, 0], Flag::SubLine { degree: -1, sections: vec![vec![1], vec![0, 1]] }, (1, 0))
        },
    ]
}

/// Look up a shipped spec by name.
pub fn shipped_spec(name: &str) -> Option<DegenerationSpec> {
    shipped_specs().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_specs_validate() {
        for s in shipped_specs() {
            s.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
        }
    }

    #[test]
    fn euler_is_not_product() {
        let s = shipped_spec("euler").unwrap();
        assert_eq!(s.sub_quot_degrees(), (-1, 1));
        assert!(!s.is_product());
        assert!(shipped_spec("product-f1").unwrap().is_product());
    }

    #[test]
    fn common_zero_rejected() {
        let mut s = shipped_spec("euler").unwrap();
        // (z, z) vanishes at 0
        s.flag = Flag::SubLine { degree: -1, sections: vec![vec![0, 1], vec![0, 1]] };
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
        // (1, 1) both constant: vanish at ∞ as sections of O(1)
        s.flag = Flag::SubLine { degree: -1, sections: vec![vec![1], vec![1]] };
        assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
    }
}
