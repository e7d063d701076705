//! Deterministic reductions. Every integral in the crate goes through here so
//! results do not depend on thread scheduling.

const BLOCK: usize = 32;

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Composite trapezoid on a uniform grid.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut w: Vec<f64> = values.to_vec();
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    h * pairwise_sum(&w)
}

/// Trapezoid over a window whose integrand continues past both ends like
/// `e^{-|x|}`. For such tails the Euler–Maclaurin series sums to
/// `(h/2) coth(h/2)` times each edge value, covering the tail integral and
/// the window's endpoint error together.
pub fn trapezoid_exp_tails(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let half = 0.5 * h;
    trapezoid(values, h) + half / half.tanh() * (values[0] + values[n - 1])
}

/// Romberg extrapolation of the trapezoid rule. Uses as many halvings as the
/// sample count `2^k + 1` allows; falls back to plain trapezoid otherwise.
pub fn romberg(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 3 || !(n - 1).is_power_of_two() {
        return trapezoid(values, h);
    }
    let levels = (n - 1).trailing_zeros() as usize;
    // Coarsest level first.
    let mut table: Vec<f64> = Vec::with_capacity(levels + 1);
    for l in 0..=levels {
        let stride = 1 << (levels - l);
        let sub: Vec<f64> = values.iter().step_by(stride).copied().collect();
        table.push(trapezoid(&sub, h * stride as f64));
    }
    for k in 1..=levels {
        let f = 4f64.powi(k as i32);
        for l in (k..=levels).rev() {
            table[l] = (f * table[l] - table[l - 1]) / (f - 1.0);
        }
    }
    table[levels]
}

/// Cumulative trapezoid with a Richardson correction at even indices
/// (Simpson values there); odd indices keep the trapezoid value.
pub fn cumulative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 1..n {
        out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
    }
    let mut simpson = 0.0;
    let mut i = 2;
    while i < n {
        simpson += h / 3.0 * (values[i - 2] + 4.0 * values[i - 1] + values[i]);
        out[i] = simpson;
        i += 2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
    }

    #[test]
    fn romberg_integrates_polynomials() {
        let n = 17;
        let h = 1.0 / 16.0;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(5)).collect();
        assert!((romberg(&v, h) - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn cumulative_even_nodes_are_simpson() {
        let h = 0.1;
        let v: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(3)).collect();
        let c = cumulative(&v, h);
        assert!((c[10] - 0.25).abs() < 1e-14);
    }
}
