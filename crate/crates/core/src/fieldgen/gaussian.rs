//! Stationary Gaussian fields by circulant embedding on the torus.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::grid::{offset_norm, GridSpec};
use super::FieldSample;
use crate::error::{Error, Result};
use crate::rng;

/// Covariance `C(x) = Cov[A(0), A(x)]` of a stationary Gaussian field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovarianceModel {
    DeltaLag { sigma2: f64 },
    Exponential { sigma2: f64, rho: f64 },
    AlgebraicDecay { sigma2: f64, gamma: f64 },
}

/// Image sums are truncated once the omitted mass falls below this fraction of `σ²`.
const WRAP_TOLERANCE: f64 = 1e-12;
/// Negative spectral coefficients above `-SPECTRAL_TOLERANCE·σ²` are clipped to 0.
pub const SPECTRAL_TOLERANCE: f64 = 1e-10;

impl CovarianceModel {
    pub fn sigma2(&self) -> f64 {
        match *self {
            CovarianceModel::DeltaLag { sigma2 }
            | CovarianceModel::Exponential { sigma2, .. }
            | CovarianceModel::AlgebraicDecay { sigma2, .. } => sigma2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        pos("sigma2", self.sigma2())?;
        match *self {
            CovarianceModel::DeltaLag { .. } => Ok(()),
            CovarianceModel::Exponential { rho, .. } => pos("rho", rho),
            CovarianceModel::AlgebraicDecay { gamma, .. } => pos("gamma", gamma),
        }
    }

    /// `C` at Euclidean distance `r`.
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            CovarianceModel::DeltaLag { sigma2 } => {
                if r == 0.0 {
                    sigma2
                } else {
                    0.0
                }
            }
            CovarianceModel::Exponential { sigma2, rho } => sigma2 * (-r / rho).exp(),
            CovarianceModel::AlgebraicDecay { sigma2, gamma } => sigma2 * (1.0 + r).powf(-gamma),
        }
    }

    /// Short tag used in reports.
    pub fn tag(&self) -> String {
        match *self {
            CovarianceModel::DeltaLag { sigma2 } => format!("delta(s2={sigma2})"),
            CovarianceModel::Exponential { sigma2, rho } => format!("exp(s2={sigma2},rho={rho})"),
            CovarianceModel::AlgebraicDecay { sigma2, gamma } => {
                format!("alg(s2={sigma2},gamma={gamma})")
            }
        }
    }

    /// Covariance of the torus field between the origin and every cell.
    ///
    /// Exponentially decaying kinds are periodized by summing images
    /// `C(x + kNh)`; the algebraic kind is not summable for `γ ≤ d` and uses
    /// the minimal-image distance instead.
    pub fn torus_covariance(&self, grid: &GridSpec) -> Vec<f64> {
        let len = grid.len();
        match *self {
            CovarianceModel::DeltaLag { sigma2 } => {
                let mut c = vec![0.0; len];
                c[0] = sigma2;
                c
            }
            CovarianceModel::AlgebraicDecay { .. } => {
                (0..len).map(|i| self.eval(grid.torus_norm(i))).collect()
            }
            CovarianceModel::Exponential { rho, .. } => {
                let k = self.image_reach(grid, rho);
                (0..len).map(|i| self.wrapped_at(grid, i, k)).collect()
            }
        }
    }

    fn image_reach(&self, grid: &GridSpec, rho: f64) -> isize {
        let side = grid.side();
        let d = grid.d as i32;
        let decay = (-side / rho).exp();
        // Omitted images sit at distance ≥ (K + 1/2)·side; bound their count
        // per shell by a polynomial in K and sum the geometric shells.
        let mut k = 0isize;
        loop {
            let shell = (2.0 * (k as f64) + 3.0).powi(d - 1) * 2.0 * grid.d as f64;
            let omitted = shell * (-(k as f64 + 0.5) * side / rho).exp() / (1.0 - decay).max(1e-300);
            if omitted < WRAP_TOLERANCE || k >= 4096 {
                return k;
            }
            k += 1;
        }
    }

    fn wrapped_at(&self, grid: &GridSpec, index: usize, reach: isize) -> f64 {
        let base = grid.signed_offsets(index);
        let n = grid.n as isize;
        let mut total = 0.0;
        let mut image = [0isize; 3];
        let span = 2 * reach + 1;
        let count = span.pow(grid.d as u32);
        for m in 0..count {
            let mut rest = m;
            for axis in 0..grid.d {
                let k = rest % span - reach;
                rest /= span;
                image[axis] = base[axis] + k * n;
            }
            total += self.eval(offset_norm(&image[..grid.d], grid.h));
        }
        total
    }
}

/// In-place d-dimensional forward FFT on a row-major `n^d` array.
pub(crate) fn fft_nd(data: &mut [Complex<f64>], grid: &GridSpec, fft: &Arc<dyn Fft<f64>>) {
    let n = grid.n;
    let len = data.len();
    let mut line = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.d {
        let stride = n.pow((grid.d - 1 - axis) as u32);
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        let block = stride * n;
        for start in (0..len).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// Precomputed spectral factor for repeated Gaussian synthesis.
#[derive(Clone)]
pub struct GaussianSynth {
    grid: GridSpec,
    cov: CovarianceModel,
    /// `sqrt(λ_k / M)` with clipped eigenvalues `λ_k`.
    amplitude: Vec<f64>,
    spectrum: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GaussianSynth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianSynth")
            .field("grid", &self.grid)
            .field("cov", &self.cov)
            .finish_non_exhaustive()
    }
}

impl GaussianSynth {
    pub fn new(grid: &GridSpec, cov: &CovarianceModel) -> Result<Self> {
        grid.validate()?;
        cov.validate()?;
        Self::from_torus_covariance(grid, cov, cov.torus_covariance(grid))
    }

    pub(crate) fn from_torus_covariance(grid: &GridSpec, cov: &CovarianceModel, torus: Vec<f64>) -> Result<Self> {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(grid.n);
        let mut buf: Vec<Complex<f64>> = torus.into_iter().map(|c| Complex::new(c, 0.0)).collect();
        fft_nd(&mut buf, grid, &fft);
        let tolerance = SPECTRAL_TOLERANCE * cov.sigma2();
        let m = grid.len() as f64;
        let mut spectrum = Vec::with_capacity(buf.len());
        for (mode, z) in buf.iter().enumerate() {
            let lambda = z.re;
            if lambda < -tolerance {
                return Err(Error::NegativeSpectrum {
                    mode,
                    value: lambda,
                    tolerance,
                });
            }
            spectrum.push(lambda.max(0.0));
        }
        let amplitude = spectrum.iter().map(|l| (l / m).sqrt()).collect();
        Ok(GaussianSynth {
            grid: *grid,
            cov: *cov,
            amplitude,
            spectrum,
            fft,
        })
    }

    /// Clipped eigenvalues of the torus covariance (the expected periodogram).
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sample(&self, seed: u64) -> FieldSample {
        let mut rng = rng::stream(seed);
        let mut buf: Vec<Complex<f64>> = self
            .amplitude
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(a * re, a * im)
            })
            .collect();
        fft_nd(&mut buf, &self.grid, &self.fft);
        FieldSample {
            grid: self.grid,
            values: buf.into_iter().map(|z| z.re).collect(),
            model_tag: format!("gaussian[{}]", self.cov.tag()),
            seed,
        }
    }
}

/// Centered stationary Gaussian field whose torus covariance is
/// [`CovarianceModel::torus_covariance`].
pub fn sample_gaussian(grid: &GridSpec, cov: &CovarianceModel, seed: u64) -> Result<FieldSample> {
    Ok(GaussianSynth::new(grid, cov)?.sample(seed))
}
