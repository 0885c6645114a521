use crate::error::{Error, Result};

/// Largest feature count [`shapley_exact`] will enumerate.
pub const MAX_ENUMERATED_FEATURES: usize = 20;

/// Exact Shapley values of `f` at `x` by enumerating all `2^n` coalitions.
///
/// Features outside a coalition take their `baseline` value. The result
/// satisfies `sum(phi) == f(x) - f(baseline)` up to rounding.
pub fn shapley_exact<F>(f: F, x: &[f64], baseline: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    if baseline.len() != n {
        return Err(Error::ShapeMismatch(format!("x has {n} features, baseline has {}", baseline.len())));
    }
    if n > MAX_ENUMERATED_FEATURES {
        return Err(Error::TooManyFeatures { count: n, cap: MAX_ENUMERATED_FEATURES });
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut input = baseline.to_vec();
    let values: Vec<f64> = (0..1usize << n)
        .map(|mask| {
            for (i, slot) in input.iter_mut().enumerate() {
                *slot = if mask >> i & 1 == 1 { x[i] } else { baseline[i] };
            }
            f(&input)
        })
        .collect();

    // |S|! (n - |S| - 1)! / n!  ==  1 / (n * C(n-1, |S|))
    let mut weights = Vec::with_capacity(n);
    let mut binom = 1.0_f64;
    for s in 0..n {
        weights.push(1.0 / (n as f64 * binom));
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }

    let phi = (0..n)
        .map(|i| {
            let bit = 1usize << i;
            (0..1usize << n)
                .filter(|mask| mask & bit == 0)
                .map(|mask| weights[mask.count_ones() as usize] * (values[mask | bit] - values[mask]))
                .sum()
        })
        .collect();
    Ok(phi)
}
