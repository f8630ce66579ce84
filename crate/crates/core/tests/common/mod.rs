//! Reference computations written independently of the library's code
//! paths: plain adaptive Simpson quadrature, direct image sums, brute-force
//! double sums and exhaustive enumeration.

#![allow(dead_code)]

use std::path::PathBuf;

/// Adaptive Simpson on `[a, b]`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
        if depth == 0 || delta.abs() <= (15.0 * eps).max(floor) {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, 40)
}

/// `∫_a^∞ f` through `s = a + t/(1−t)`, integrated piecewise in `t`.
pub fn simpson_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, eps: f64) -> f64 {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = a + t / (1.0 - t);
        let v = f(s) / ((1.0 - t) * (1.0 - t));
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let cuts = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999, 0.9999, 1.0];
    cuts.windows(2).map(|w| simpson(&g, w[0], w[1], eps)).sum()
}

pub fn algebraic(beta: f64) -> impl Fn(f64) -> f64 {
    move |l: f64| (l + 1.0).powf(-1.0 - beta)
}

pub fn stretched(beta: f64, c: f64) -> impl Fn(f64) -> f64 {
    move |l: f64| (-l.powf(beta) / c).exp()
}

pub fn compact(r: f64) -> impl Fn(f64) -> f64 {
    move |l: f64| if l <= r { 1.0 } else { 0.0 }
}

/// `∫_r^∞ π` by quadrature of the weight itself.
pub fn tail<W: Fn(f64) -> f64>(w: &W, r: f64, support: Option<f64>) -> f64 {
    match support {
        Some(end) if end <= r => 0.0,
        Some(end) => simpson(w, r, end, 1e-13),
        None => simpson_to_infinity(w, r, 1e-13),
    }
}

/// Hand-integrated tail of the algebraic weight: `(r+1)^{−β}/β`.
pub fn algebraic_tail(beta: f64) -> impl Fn(f64) -> f64 {
    move |r: f64| (r + 1.0).powf(-beta) / beta
}

/// Hand-integrated tail of the compact weight: `max(R − r, 0)`.
pub fn compact_tail(r_max: f64) -> impl Fn(f64) -> f64 {
    move |r: f64| (r_max - r).max(0.0)
}

/// `π*(ℓ)` from the integral `(d/ℓ^d)∫_0^ℓ ρ^{d−1} T(ρ) dρ` for a given tail `T`.
pub fn pi_star<T: Fn(f64) -> f64>(tail: &T, support: Option<f64>, d: i32, ell: f64) -> f64 {
    let t = |rho: f64| rho.powi(d - 1) * tail(rho);
    let inner = match support {
        Some(end) if end < ell => simpson(&t, 0.0, end, 1e-13),
        _ => simpson(&t, 0.0, ell, 1e-13),
    };
    ell.powi(d) / (d as f64 * inner)
}

/// Wrapped exponential covariance by direct image summation.
pub fn wrapped_exponential(sigma2: f64, rho: f64, x: f64, side: f64) -> f64 {
    (-2000..=2000)
        .map(|k| sigma2 * (-(x + k as f64 * side).abs() / rho).exp())
        .sum()
}

/// Minimal-image distance on a 1-d torus of `n` cells.
pub fn ring_distance(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j);
    d.min(n - d)
}

/// `Var[Σ w(i) A(i)]` for a 1-d torus field with covariance `cov(cells)`,
/// by the plain double sum.
pub fn double_sum_variance<C: Fn(usize) -> f64>(weights: &[(usize, f64)], n: usize, cov: C) -> f64 {
    let mut total = 0.0;
    for &(i, wi) in weights {
        let mut row = 0.0;
        for &(j, wj) in weights {
            row += wj * cov(ring_distance(i, j, n));
        }
        total += wi * row;
    }
    total
}

/// Exponential-kernel weights `h L^{-1} e^{−|y|/L}` on a 1-d torus.
pub fn exp_kernel_weights(n: usize, h: f64, l: f64) -> Vec<(usize, f64)> {
    (0..n)
        .map(|i| {
            let y = i.min(n - i) as f64 * h;
            (i, h / l * (-y / l).exp())
        })
        .collect()
}

/// Box weights: cells `y` with `y·h ∈ [−L/2, L/2)` on a 1-d torus.
pub fn box_weights(n: usize, h: f64, l: f64) -> Vec<(usize, f64)> {
    let cells: Vec<usize> = (0..n)
        .filter(|&i| {
            let y = if i >= n / 2 { i as f64 - n as f64 } else { i as f64 } * h;
            -l / 2.0 <= y && y < l / 2.0
        })
        .collect();
    let w = 1.0 / cells.len() as f64;
    cells.into_iter().map(|i| (i, w)).collect()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/reference_values.json")
}

pub struct Golden {
    pub entries: Vec<serde_json::Value>,
}

impl Golden {
    pub fn load() -> Self {
        let text = std::fs::read_to_string(golden_path()).expect("golden file present");
        let v: serde_json::Value = serde_json::from_str(&text).expect("golden file is JSON");
        Golden {
            entries: v["entries"].as_array().expect("entries").clone(),
        }
    }

    pub fn get(&self, id: &str) -> f64 {
        self.entry(id)["value"].as_f64().expect("numeric value")
    }

    pub fn entry(&self, id: &str) -> &serde_json::Value {
        self.entries
            .iter()
            .find(|e| e["id"] == id)
            .unwrap_or_else(|| panic!("golden entry {id} missing"))
    }
}

pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * b.abs() + abs
}
