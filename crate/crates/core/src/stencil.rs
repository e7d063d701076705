//! Finite-difference weights (Fornberg's recursion) for arbitrary offsets.

/// Weights `w[d][k]` approximating the `d`-th derivative at `x0` from samples
/// at `xs[k]`, for `d = 0..=max_deriv`.
pub fn fornberg(x0: f64, xs: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Integer-offset stencil for derivative `deriv` on unit spacing.
pub fn offsets_weights(offsets: &[i64], at: f64, deriv: usize) -> Vec<f64> {
    let xs: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
    fornberg(at, &xs, deriv).swap_remove(deriv)
}

/// Symmetric stencil of the given even accuracy order.
pub fn central(order: usize, deriv: usize) -> (Vec<i64>, Vec<f64>) {
    let half = (order + deriv - 1) / 2;
    let offs: Vec<i64> = (-(half as i64)..=half as i64).collect();
    let w = offsets_weights(&offs, 0.0, deriv);
    (offs, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_second_derivative() {
        let (_, w) = central(2, 2);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let (o, w) = central(4, 2);
        assert_eq!(o.len(), 5);
        let expect = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn sixth_order_first_derivative() {
        let (_, w) = central(6, 1);
        let expect = [-1.0 / 60.0, 3.0 / 20.0, -0.75, 0.0, 0.75, -3.0 / 20.0, 1.0 / 60.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn one_sided_is_exact_on_polynomials() {
        let offs: Vec<i64> = (0..8).collect();
        let w = offsets_weights(&offs, 0.0, 2);
        // d²/dx² x^5 at 0 is 0; x^2 gives 2
        let p2: f64 = offs.iter().zip(&w).map(|(&o, w)| w * (o as f64).powi(2)).sum();
        let p5: f64 = offs.iter().zip(&w).map(|(&o, w)| w * (o as f64).powi(5)).sum();
        assert!((p2 - 2.0).abs() < 1e-10);
        assert!(p5.abs() < 1e-8);
    }
}
