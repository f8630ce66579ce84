//! Local functionals `F(x) = f(A(·+x))` and the spatial averages `X_L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Estimate;
use crate::fieldgen::{ball_offsets, FieldSample, FieldSpec, GridSpec};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::weights::DimensionContext;

pub const FLAG_KERNEL_TRUNCATION: &str = "kernel-truncation";

/// A local map of the field, evaluated at the origin of a shifted field.
///
/// Ball-based kinds use the closed ball `|y| ≤ radius`; a radius below the
/// grid spacing reduces them to the origin cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalFunctional {
    CellValue,
    BallAverage { radius: f64 },
    /// `𝟙[ball average > level]`.
    Threshold { radius: f64, level: f64 },
}

impl LocalFunctional {
    pub fn radius(&self) -> f64 {
        match *self {
            LocalFunctional::CellValue => 0.0,
            LocalFunctional::BallAverage { radius } | LocalFunctional::Threshold { radius, .. } => radius,
        }
    }

    /// Deterministic bound `C₀ ≥ sup|f|`, when the kind has one.
    pub fn bound(&self) -> Option<f64> {
        match self {
            LocalFunctional::Threshold { .. } => Some(1.0),
            _ => None,
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let r = self.radius();
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid("radius", format!("must be nonnegative, got {r}")));
        }
        if r > grid.half_side() {
            return Err(Error::invalid(
                "radius",
                format!("{r} exceeds the torus half-side {}", grid.half_side()),
            ));
        }
        if let LocalFunctional::Threshold { level, .. } = self {
            if !level.is_finite() {
                return Err(Error::invalid("level", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn tag(&self) -> String {
        match *self {
            LocalFunctional::CellValue => "cell_value".into(),
            LocalFunctional::BallAverage { radius } => format!("ball_average(r={radius})"),
            LocalFunctional::Threshold { radius, level } => format!("threshold(r={radius},level={level})"),
        }
    }

    /// `E[F(0)]` when the model makes it available in closed form.
    pub fn analytic_mean(&self, spec: &FieldSpec) -> Option<f64> {
        match *self {
            LocalFunctional::CellValue | LocalFunctional::BallAverage { .. } => spec.analytic_mean(),
            LocalFunctional::Threshold { radius, level } if radius < spec.grid.h => spec.exceedance(level),
            LocalFunctional::Threshold { .. } => None,
        }
    }

    fn offsets(&self, grid: &GridSpec) -> Vec<[isize; 3]> {
        ball_offsets(grid.d, grid.h, self.radius(), false)
    }
}

/// Precomputed evaluation of `f` at arbitrary cells of one grid.
#[derive(Debug, Clone)]
struct Stencil {
    f: LocalFunctional,
    offsets: Vec<[isize; 3]>,
}

impl Stencil {
    fn new(f: &LocalFunctional, grid: &GridSpec) -> Result<Self> {
        f.validate(grid)?;
        Ok(Stencil {
            f: *f,
            offsets: f.offsets(grid),
        })
    }

    fn eval(&self, a: &FieldSample, index: usize) -> f64 {
        let ball_mean = || {
            let mut s = 0.0;
            for o in &self.offsets {
                s += a.values[a.grid.offset_index(index, &o[..a.grid.d])];
            }
            s / self.offsets.len() as f64
        };
        match self.f {
            LocalFunctional::CellValue => a.values[index],
            LocalFunctional::BallAverage { .. } => ball_mean(),
            LocalFunctional::Threshold { level, .. } => {
                if ball_mean() > level {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `F(x)` at one cell.
pub fn eval_at(f: &LocalFunctional, a: &FieldSample, index: usize) -> Result<f64> {
    Ok(Stencil::new(f, &a.grid)?.eval(a, index))
}

pub fn transform_field(f: &LocalFunctional, a: &FieldSample) -> Result<FieldSample> {
    let stencil = Stencil::new(f, &a.grid)?;
    let values = (0..a.grid.len()).map(|i| stencil.eval(a, i)).collect();
    Ok(FieldSample {
        grid: a.grid,
        values,
        model_tag: format!("{}∘{}", f.tag(), a.model_tag),
        seed: a.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageKind {
    ExpKernel,
    Box,
}

impl AverageKind {
    pub fn tag(&self) -> &'static str {
        match self {
            AverageKind::ExpKernel => "exp_kernel",
            AverageKind::Box => "box",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageValue {
    pub value: f64,
    /// Set when `L` exceeds the torus half-side.
    pub kernel_truncated: bool,
}

/// The linear map `F ↦ Σ_y w(y)·F(y)` behind `X_L`, with its weights
/// already normalized.
///
/// ExpKernel: `w(y) = h^d L^{-d} e^{-|y|/L}` over every cell, `|y|` the
/// minimal-image distance. Box: `w = 1/#cells` on the cells whose signed
/// coordinates satisfy `y·h ∈ [-L/2, L/2)` on every axis.
#[derive(Debug, Clone)]
pub struct AverageOperator {
    grid: GridSpec,
    weights: Vec<(usize, f64)>,
    total_weight: f64,
    kernel_truncated: bool,
}

impl AverageOperator {
    pub fn new(grid: &GridSpec, l: f64, kind: AverageKind) -> Result<Self> {
        grid.validate()?;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::invalid("L", format!("must be positive, got {l}")));
        }
        let weights: Vec<(usize, f64)> = match kind {
            AverageKind::ExpKernel => {
                let scale = grid.cell_volume() / l.powi(grid.d as i32);
                (0..grid.len())
                    .map(|i| (i, scale * (-grid.torus_norm(i) / l).exp()))
                    .collect()
            }
            AverageKind::Box => {
                let half = l / 2.0;
                let cells: Vec<usize> = (0..grid.len())
                    .filter(|&i| {
                        let o = grid.signed_offsets(i);
                        (0..grid.d).all(|axis| {
                            let y = o[axis] as f64 * grid.h;
                            -half <= y && y < half
                        })
                    })
                    .collect();
                if cells.is_empty() {
                    return Err(Error::invalid("L", format!("box of side {l} contains no cell")));
                }
                let w = 1.0 / cells.len() as f64;
                cells.into_iter().map(|i| (i, w)).collect()
            }
        };
        let total_weight = compensated_sum(weights.iter().map(|&(_, w)| w));
        Ok(AverageOperator {
            grid: *grid,
            weights,
            total_weight,
            kernel_truncated: l > grid.half_side(),
        })
    }

    pub fn kernel_truncated(&self) -> bool {
        self.kernel_truncated
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn support_len(&self) -> usize {
        self.weights.len()
    }

    /// `Σ w(y)·(F(y) − mean)` for a transformed field.
    pub fn apply(&self, f_values: &[f64], mean: f64) -> f64 {
        compensated_sum(self.weights.iter().map(|&(i, w)| w * (f_values[i] - mean)))
    }

    /// `Σ w(y)·F(y)` with `F = f(A(·+y))` evaluated only on the support.
    pub fn weighted_functional(&self, f: &LocalFunctional, a: &FieldSample) -> Result<f64> {
        if a.grid != self.grid {
            return Err(Error::invalid("grid", "field grid differs from the operator grid"));
        }
        let stencil = Stencil::new(f, &a.grid)?;
        let mut s = CompensatedSum::new();
        for &(i, w) in &self.weights {
            s.add(w * stencil.eval(a, i));
        }
        Ok(s.value())
    }

    /// `X_L = Σ w(y)·(F(y) − mean)` computed from the raw field.
    pub fn average_of(&self, f: &LocalFunctional, a: &FieldSample, mean: f64) -> Result<f64> {
        if a.grid != self.grid {
            return Err(Error::invalid("grid", "field grid differs from the operator grid"));
        }
        let stencil = Stencil::new(f, &a.grid)?;
        let mut s = CompensatedSum::new();
        for &(i, w) in &self.weights {
            s.add(w * (stencil.eval(a, i) - mean));
        }
        Ok(s.value())
    }
}

pub fn spatial_average(f_field: &FieldSample, mean_f: f64, l: f64, kind: AverageKind) -> Result<AverageValue> {
    let op = AverageOperator::new(&f_field.grid, l, kind)?;
    Ok(AverageValue {
        value: op.apply(&f_field.values, mean_f),
        kernel_truncated: op.kernel_truncated,
    })
}

/// Monte Carlo proxy for `supess |f(A) − E[f(A) | A|_{B_ℓ}]`: the largest
/// `|f(A) − f(A')|` over replicates, where `A'` shares `A` on the open ball
/// `B_ℓ` and is redrawn outside.
pub fn locality_defect(
    f: &LocalFunctional,
    spec: &FieldSpec,
    ell: f64,
    replicates: usize,
    seed: u64,
) -> Result<Estimate> {
    if replicates < 2 {
        return Err(Error::invalid("replicates", format!("need at least 2, got {replicates}")));
    }
    if !(ell.is_finite() && ell >= 0.0) {
        return Err(Error::invalid("ell", format!("must be nonnegative, got {ell}")));
    }
    let gen = spec.generator()?;
    let stencil = Stencil::new(f, &spec.grid)?;
    let defects: Vec<f64> = crate::estimators::replicate_map(replicates, seed, |s| {
        let (a, b) = gen.resample_exterior(s, ell)?;
        Ok((stencil.eval(&a, 0) - stencil.eval(&b, 0)).abs())
    })?;
    let max = defects.iter().copied().fold(0.0, f64::max);
    let mut est = Estimate::new(max, 0.0, replicates, seed);
    est.flags.insert("max-statistic".into());
    Ok(est)
}

/// Closed envelope `L^{-d}·min(L, ℓ+1)^d·exp(−|x|/(C(L+ℓ+1)))` of the
/// derivative of `X_L` on `B_{ℓ+1}(x)`.
pub fn derivative_profile(ell: f64, x_norm: f64, l: f64, ctx: &DimensionContext, c_loc: f64) -> f64 {
    let d = ctx.d as i32;
    l.powi(-d) * l.min(ell + 1.0).powi(d) * (-x_norm / (c_loc * (l + ell + 1.0))).exp()
}

/// `∫_{ℝ^d} derivative_profile dx`, using `∫ e^{−|x|/a} dx = d!·|B₁|·a^d`.
pub fn derivative_profile_mass(ell: f64, l: f64, ctx: &DimensionContext, c_loc: f64) -> f64 {
    let d = ctx.d as i32;
    let factorial: f64 = (1..=ctx.d).map(|k| k as f64).product();
    let a = c_loc * (l + ell + 1.0);
    l.powi(-d) * l.min(ell + 1.0).powi(d) * factorial * ctx.ball_volume_unit * a.powi(d)
}
