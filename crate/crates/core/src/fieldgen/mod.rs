//! Realizations of stationary random fields on periodic grids.

mod block;
mod boolean;
mod gaussian;
mod grid;
pub mod io;

use serde::{Deserialize, Serialize};

pub use block::{sample_block_iid, BlockLaw};
pub use boolean::{coverage_probability, sample_boolean, Ball, BooleanPoints, RadiusLaw};
pub use gaussian::{sample_gaussian, CovarianceModel, GaussianSynth, SPECTRAL_TOLERANCE};
pub use grid::{ball_offsets, offset_norm, GridSpec, MAX_CELLS};

use crate::error::{Error, Result};
use crate::numeric::normal_tail;
use crate::oracle::TinyFieldSpec;
use crate::rng;

/// One realization of a field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub model_tag: String,
    pub seed: u64,
}

impl FieldSample {
    pub fn constant(grid: &GridSpec, value: f64) -> Self {
        FieldSample {
            grid: *grid,
            values: vec![value; grid.len()],
            model_tag: format!("constant({value})"),
            seed: 0,
        }
    }

    /// Translate by a cell offset: `out(x) = self(x + offset)`.
    pub fn shifted(&self, offset: &[isize]) -> Self {
        let values = (0..self.grid.len())
            .map(|i| self.values[self.grid.offset_index(i, offset)])
            .collect();
        FieldSample {
            values,
            ..self.clone()
        }
    }

    pub fn mean(&self) -> f64 {
        crate::numeric::compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }
}

/// The model class of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldModel {
    Gaussian {
        covariance: CovarianceModel,
    },
    Boolean {
        intensity: f64,
        radius_law: RadiusLaw,
    },
    BlockIid {
        block: usize,
        law: BlockLaw,
    },
    /// A tiny enumerable field laid out on the first cells of a 1-d grid;
    /// the remaining cells are zero. Not stationary.
    #[serde(skip)]
    Embedded { spec: TinyFieldSpec },
}

/// Model plus grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub grid: GridSpec,
    pub model: FieldModel,
}

impl FieldSpec {
    pub fn new(grid: GridSpec, model: FieldModel) -> Result<Self> {
        let s = FieldSpec { grid, model };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        match &self.model {
            FieldModel::Gaussian { covariance } => covariance.validate(),
            FieldModel::Boolean { intensity, radius_law } => {
                if !(intensity.is_finite() && *intensity >= 0.0) {
                    return Err(Error::invalid("intensity", format!("must be nonnegative, got {intensity}")));
                }
                radius_law.validate(self.grid.d)
            }
            FieldModel::BlockIid { block, law } => {
                block::check_block(&self.grid, *block)?;
                law.validate()
            }
            FieldModel::Embedded { spec } => {
                if self.grid.d != 1 || self.grid.n < spec.n() {
                    return Err(Error::invalid(
                        "grid",
                        format!("embedding needs a 1-d grid with at least {} cells", spec.n()),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn tag(&self) -> String {
        match &self.model {
            FieldModel::Gaussian { covariance } => format!("gaussian[{}]", covariance.tag()),
            FieldModel::Boolean { intensity, radius_law } => {
                format!("boolean[lambda={intensity},{}]", radius_law.tag())
            }
            FieldModel::BlockIid { block, law } => format!("block[b={block},{}]", law.tag()),
            FieldModel::Embedded { spec } => format!("embedded[n={}]", spec.n()),
        }
    }

    /// `E[A(0)]` when known in closed form.
    pub fn analytic_mean(&self) -> Option<f64> {
        match &self.model {
            FieldModel::Gaussian { .. } => Some(0.0),
            FieldModel::Boolean { intensity, radius_law } => {
                Some(coverage_probability(self.grid.d, *intensity, radius_law))
            }
            FieldModel::BlockIid { law, .. } => Some(law.mean()),
            FieldModel::Embedded { .. } => None,
        }
    }

    /// `Var[A(0)]` when known in closed form.
    pub fn analytic_variance(&self) -> Option<f64> {
        match &self.model {
            FieldModel::Gaussian { covariance } => Some(covariance.sigma2()),
            FieldModel::Boolean { .. } => self.analytic_mean().map(|p| p * (1.0 - p)),
            FieldModel::BlockIid { law, .. } => Some(law.variance()),
            FieldModel::Embedded { .. } => None,
        }
    }

    /// `P[A(0) > level]` when known in closed form.
    pub fn exceedance(&self, level: f64) -> Option<f64> {
        match &self.model {
            FieldModel::Gaussian { covariance } => Some(normal_tail(level / covariance.sigma2().sqrt())),
            FieldModel::Boolean { .. } => {
                let p = self.analytic_mean()?;
                Some(if level < 0.0 {
                    1.0
                } else if level < 1.0 {
                    p
                } else {
                    0.0
                })
            }
            FieldModel::BlockIid { law, .. } => Some(law.exceedance(level)),
            FieldModel::Embedded { .. } => None,
        }
    }

    pub fn generator(&self) -> Result<FieldGenerator> {
        FieldGenerator::new(self.clone())
    }
}

/// A validated [`FieldSpec`] with any per-model precomputation done.
#[derive(Debug, Clone)]
pub struct FieldGenerator {
    spec: FieldSpec,
    gaussian: Option<GaussianSynth>,
    tag: String,
}

impl FieldGenerator {
    pub fn new(spec: FieldSpec) -> Result<Self> {
        spec.validate()?;
        let gaussian = match &spec.model {
            FieldModel::Gaussian { covariance } => Some(GaussianSynth::new(&spec.grid, covariance)?),
            _ => None,
        };
        let tag = spec.tag();
        Ok(FieldGenerator { spec, gaussian, tag })
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        &self.spec.grid
    }

    /// Pure function of `(spec, seed)`.
    pub fn sample(&self, seed: u64) -> FieldSample {
        let grid = &self.spec.grid;
        let values = match &self.spec.model {
            FieldModel::Gaussian { .. } => {
                return self.gaussian.as_ref().expect("prepared at construction").sample(seed)
            }
            FieldModel::Boolean { intensity, radius_law } => {
                let mut rng = rng::stream(seed);
                BooleanPoints::draw(grid, *intensity, radius_law, &mut rng)
                    .expect("validated at construction")
                    .rasterize()
            }
            FieldModel::BlockIid { block, law } => {
                let mut rng = rng::stream(seed);
                block::paint(grid, *block, &block::draw_blocks(grid, *block, law, &mut rng))
            }
            FieldModel::Embedded { spec } => {
                let mut rng = rng::stream(seed);
                let mut v = spec.sample_values(&mut rng);
                v.resize(grid.len(), 0.0);
                v
            }
        };
        FieldSample {
            grid: *grid,
            values,
            model_tag: self.tag.clone(),
            seed,
        }
    }

    /// Draws `A` and a copy `A'` that shares `A`'s construction on the open
    /// ball `|y| < ell` around the origin and is independently redrawn
    /// elsewhere.
    ///
    /// Block fields keep every block meeting the ball (an exact conditional
    /// resampling). Boolean fields keep the grains centered in the ball and
    /// redraw the rest of the Poisson process. Gaussian fields have no
    /// conditional resampler and are rejected.
    pub fn resample_exterior(&self, seed: u64, ell: f64) -> Result<(FieldSample, FieldSample)> {
        let grid = &self.spec.grid;
        let inside: Vec<usize> = grid::ball_offsets(grid.d, grid.h, ell, true)
            .iter()
            .map(|o| grid.offset_index(0, &o[..grid.d]))
            .collect();
        let fresh_seed = rng::substream_seed(seed, 0x5e5a);
        let resampled = match &self.spec.model {
            FieldModel::Gaussian { .. } => {
                return Err(Error::Unsupported(
                    "conditional exterior resampling of Gaussian fields".into(),
                ))
            }
            FieldModel::BlockIid { block, law } => {
                let mut rng = rng::stream(seed);
                let original = block::draw_blocks(grid, *block, law, &mut rng);
                let mut fresh = block::draw_blocks(grid, *block, law, &mut rng::stream(fresh_seed));
                for &cell in &inside {
                    let b = block::block_of(grid, *block, cell);
                    fresh[b] = original[b];
                }
                block::paint(grid, *block, &fresh)
            }
            FieldModel::Boolean { intensity, radius_law } => {
                let mut rng = rng::stream(seed);
                let original = BooleanPoints::draw(grid, *intensity, radius_law, &mut rng)?;
                let fresh = BooleanPoints::draw(grid, *intensity, radius_law, &mut rng::stream(fresh_seed))?;
                let near = |b: &Ball| {
                    let mut d2 = 0.0;
                    for axis in 0..grid.d {
                        let mut dx = b.center[axis].rem_euclid(grid.side());
                        if dx > grid.half_side() {
                            dx -= grid.side();
                        }
                        d2 += dx * dx;
                    }
                    d2.sqrt() < ell
                };
                let mut balls: Vec<Ball> = original.balls.iter().filter(|b| near(b)).copied().collect();
                balls.extend(fresh.balls.iter().filter(|b| !near(b)).copied());
                BooleanPoints { grid: *grid, balls }.rasterize()
            }
            FieldModel::Embedded { spec } => {
                let original = spec.sample_values(&mut rng::stream(seed));
                let fresh = spec.sample_values(&mut rng::stream(fresh_seed));
                let kept_roots: Vec<usize> = inside
                    .iter()
                    .filter(|&&c| c < spec.n())
                    .map(|&c| spec.root(c))
                    .collect();
                let mut v: Vec<f64> = (0..spec.n())
                    .map(|c| {
                        if kept_roots.contains(&spec.root(c)) {
                            original[c]
                        } else {
                            fresh[c]
                        }
                    })
                    .collect();
                v.resize(grid.len(), 0.0);
                v
            }
        };
        let a = self.sample(seed);
        let b = FieldSample {
            grid: *grid,
            values: resampled,
            model_tag: self.tag.clone(),
            seed: fresh_seed,
        };
        Ok((a, b))
    }
}
