//! Reference values computed independently of the library: brute-force
//! double sums over a ring, direct weighted loops and the normal tail.

#![allow(dead_code)]

use std::path::PathBuf;

/// Minimal-image distance on a ring of `n` cells.
pub fn ring_distance(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}

/// `h L^{-1} e^{−|y|/L}` at every cell of a ring.
pub fn exp_kernel_weights(n: usize, h: f64, l: f64) -> Vec<f64> {
    (0..n).map(|i| h / l * (-(i.min(n - i) as f64) * h / l).exp()).collect()
}

/// `Var[Σ w(i) A(i)]` for a ring field with covariance `cov(cells apart)`,
/// by the plain double sum.
pub fn double_sum_variance<C: Fn(usize) -> f64>(weights: &[f64], cov: C) -> f64 {
    let n = weights.len();
    let table: Vec<f64> = (0..=n / 2).map(&cov).collect();
    let mut total = 0.0;
    for (i, wi) in weights.iter().enumerate() {
        if *wi == 0.0 {
            continue;
        }
        let row: f64 = weights
            .iter()
            .enumerate()
            .map(|(j, wj)| wj * table[ring_distance(i, j, n)])
            .sum();
        total += wi * row;
    }
    total
}

/// Variance of the exponential-kernel average of the unit algebraic
/// field `Cov = (1 + |x|)^{-γ}` (minimal image) on a ring of `n` unit cells.
pub fn algebraic_exp_kernel_variance(n: usize, gamma: f64, l: f64) -> f64 {
    double_sum_variance(&exp_kernel_weights(n, 1.0, l), |r| (1.0 + r as f64).powf(-gamma))
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `(2p − 1)!!`.
pub fn double_factorial_odd(p: u32) -> f64 {
    (1..=p).map(|k| (2 * k - 1) as f64).product()
}

/// `Σ_y w(y)(F(y) − m)` on a 1-d ring by a direct loop, box or exponential.
pub fn direct_average(values: &[f64], mean: f64, h: f64, l: f64, exp_kernel: bool) -> f64 {
    let n = values.len();
    let mut weights = vec![0.0; n];
    if exp_kernel {
        for (i, w) in weights.iter_mut().enumerate() {
            let y = i.min(n - i) as f64 * h;
            *w = h / l * (-y / l).exp();
        }
    } else {
        let mut count = 0usize;
        for (i, w) in weights.iter_mut().enumerate() {
            let signed = if i >= n / 2 { i as f64 - n as f64 } else { i as f64 };
            if -l / 2.0 <= signed * h && signed * h < l / 2.0 {
                *w = 1.0;
                count += 1;
            }
        }
        for w in &mut weights {
            *w /= count as f64;
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        total += weights[i] * (values[i] - mean);
    }
    total
}

pub fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/reference_values.json")
}
