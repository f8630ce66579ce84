//! Finite-range fields constant on aligned cubes of `block^d` cells.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::FieldSample;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockLaw {
    Bernoulli { p: f64 },
    #[serde(rename = "uniform_pm1")]
    UniformPm1,
}

impl BlockLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BlockLaw::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BlockLaw::Bernoulli { p } => p,
            BlockLaw::UniformPm1 => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            BlockLaw::Bernoulli { p } => p * (1.0 - p),
            BlockLaw::UniformPm1 => 1.0,
        }
    }

    /// `P[value > level]`.
    pub fn exceedance(&self, level: f64) -> f64 {
        let (lo, hi, p_hi) = match *self {
            BlockLaw::Bernoulli { p } => (0.0, 1.0, p),
            BlockLaw::UniformPm1 => (-1.0, 1.0, 0.5),
        };
        if level < lo {
            1.0
        } else if level < hi {
            p_hi
        } else {
            0.0
        }
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            BlockLaw::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            BlockLaw::UniformPm1 => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            BlockLaw::Bernoulli { p } => format!("bernoulli(p={p})"),
            BlockLaw::UniformPm1 => "pm1".to_string(),
        }
    }
}

pub(crate) fn check_block(grid: &GridSpec, block: usize) -> Result<()> {
    if block == 0 || !grid.n.is_multiple_of(block) {
        return Err(Error::invalid(
            "block",
            format!("must divide n = {}, got {block}", grid.n),
        ));
    }
    Ok(())
}

/// Flat block id of a cell.
pub(crate) fn block_of(grid: &GridSpec, block: usize, index: usize) -> usize {
    let c = grid.coords(index);
    let per_side = grid.n / block;
    (0..grid.d).fold(0, |acc, axis| acc * per_side + c[axis] / block)
}

pub(crate) fn block_count(grid: &GridSpec, block: usize) -> usize {
    (grid.n / block).pow(grid.d as u32)
}

/// One i.i.d. draw per block, in row-major block order.
pub(crate) fn draw_blocks<R: Rng>(grid: &GridSpec, block: usize, law: &BlockLaw, rng: &mut R) -> Vec<f64> {
    (0..block_count(grid, block)).map(|_| law.draw(rng)).collect()
}

pub(crate) fn paint(grid: &GridSpec, block: usize, draws: &[f64]) -> Vec<f64> {
    (0..grid.len()).map(|i| draws[block_of(grid, block, i)]).collect()
}

pub fn sample_block_iid(grid: &GridSpec, block: usize, law: &BlockLaw, seed: u64) -> Result<FieldSample> {
    grid.validate()?;
    check_block(grid, block)?;
    law.validate()?;
    let mut rng = rng::stream(seed);
    let draws = draw_blocks(grid, block, law, &mut rng);
    Ok(FieldSample {
        grid: *grid,
        values: paint(grid, block, &draws),
        model_tag: format!("block[b={block},{}]", law.tag()),
        seed,
    })
}
