//! Boolean model: indicator of a union of balls centered at Poisson points.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::FieldSample;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadiusLaw {
    Fixed { r: f64 },
    /// `r = r0 · U^(-1/a)`, so `P[r > s] = (r0/s)^a` for `s ≥ r0`.
    ParetoTail { r0: f64, a: f64 },
}

impl RadiusLaw {
    pub fn validate(&self, d: usize) -> Result<()> {
        match *self {
            RadiusLaw::Fixed { r } => {
                if !(r.is_finite() && r >= 0.0) {
                    return Err(Error::invalid("r", format!("must be nonnegative, got {r}")));
                }
            }
            RadiusLaw::ParetoTail { r0, a } => {
                if !(r0.is_finite() && r0 > 0.0) {
                    return Err(Error::invalid("r0", format!("must be positive, got {r0}")));
                }
                if !(a.is_finite() && a > d as f64) {
                    return Err(Error::invalid(
                        "a",
                        format!("tail exponent must exceed d = {d} for finite mean coverage, got {a}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `E[r^d]`.
    pub fn mean_power(&self, d: usize) -> f64 {
        match *self {
            RadiusLaw::Fixed { r } => r.powi(d as i32),
            RadiusLaw::ParetoTail { r0, a } => r0.powi(d as i32) * a / (a - d as f64),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            RadiusLaw::Fixed { r } => r,
            RadiusLaw::ParetoTail { r0, a } => {
                let u = 1.0 - rng.random::<f64>();
                r0 * u.powf(-1.0 / a)
            }
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            RadiusLaw::Fixed { r } => format!("fixed(r={r})"),
            RadiusLaw::ParetoTail { r0, a } => format!("pareto(r0={r0},a={a})"),
        }
    }
}

/// Coverage probability `1 - exp(-λ·|B_1|·E[r^d])` of a fixed point.
pub fn coverage_probability(d: usize, intensity: f64, law: &RadiusLaw) -> f64 {
    1.0 - (-intensity * crate::weights::unit_ball_volume(d) * law.mean_power(d)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

/// A realized germ–grain configuration on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanPoints {
    pub grid: GridSpec,
    pub balls: Vec<Ball>,
}

impl BooleanPoints {
    /// Draws the Poisson count, then all centers, then all radii.
    pub fn draw<R: Rng>(grid: &GridSpec, intensity: f64, law: &RadiusLaw, rng: &mut R) -> Result<Self> {
        grid.validate()?;
        law.validate(grid.d)?;
        if !(intensity.is_finite() && intensity >= 0.0) {
            return Err(Error::invalid("intensity", format!("must be nonnegative, got {intensity}")));
        }
        let side = grid.side();
        let mean = intensity * side.powi(grid.d as i32);
        let count = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::invalid("intensity", e.to_string()))?
                .sample(rng) as usize
        } else {
            0
        };
        let mut balls: Vec<Ball> = (0..count)
            .map(|_| {
                let mut center = [0.0; 3];
                for c in center.iter_mut().take(grid.d) {
                    *c = rng.random::<f64>() * side;
                }
                Ball { center, radius: 0.0 }
            })
            .collect();
        for b in balls.iter_mut() {
            b.radius = law.draw(rng);
        }
        Ok(BooleanPoints { grid: *grid, balls })
    }

    /// Independent thinning: each ball is kept with probability `keep`.
    ///
    /// Thinning an intensity-`λ` process with `keep = λ'/λ` yields an
    /// intensity-`λ'` process coupled to the original.
    pub fn thin<R: Rng>(&self, keep: f64, rng: &mut R) -> Self {
        let balls = self
            .balls
            .iter()
            .filter(|_| rng.random::<f64>() < keep)
            .copied()
            .collect();
        BooleanPoints { grid: self.grid, balls }
    }

    /// Indicator of the union of the (periodically wrapped) balls at grid points.
    pub fn rasterize(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut values = vec![0.0; g.len()];
        let n = g.n as isize;
        for ball in &self.balls {
            let r = ball.radius;
            let mut lo = [0isize; 3];
            let mut hi = [0isize; 3];
            for axis in 0..g.d {
                let c = ball.center[axis] / g.h;
                let reach = r / g.h;
                let (mut a, mut b) = ((c - reach).ceil() as isize, (c + reach).floor() as isize);
                if b - a + 1 >= n {
                    // Ball wider than the torus: one minimal-image window.
                    a = c.round() as isize - n / 2;
                    b = a + n - 1;
                }
                lo[axis] = a;
                hi[axis] = b;
            }
            let r2 = r * r;
            let spans: Vec<usize> = (0..g.d).map(|axis| (hi[axis] - lo[axis] + 1).max(0) as usize).collect();
            let count: usize = spans.iter().product();
            for m in 0..count {
                let mut rest = m;
                let mut dist2 = 0.0;
                let mut flat = 0usize;
                let mut idx = [0isize; 3];
                for axis in (0..g.d).rev() {
                    idx[axis] = lo[axis] + (rest % spans[axis]) as isize;
                    rest /= spans[axis];
                }
                for axis in 0..g.d {
                    let dx = idx[axis] as f64 * g.h - ball.center[axis];
                    dist2 += dx * dx;
                    flat = flat * g.n + idx[axis].rem_euclid(n) as usize;
                }
                if dist2 <= r2 {
                    values[flat] = 1.0;
                }
            }
        }
        values
    }
}

pub fn sample_boolean(grid: &GridSpec, intensity: f64, law: &RadiusLaw, seed: u64) -> Result<FieldSample> {
    let mut rng = rng::stream(seed);
    let points = BooleanPoints::draw(grid, intensity, law, &mut rng)?;
    Ok(FieldSample {
        grid: *grid,
        values: points.rasterize(),
        model_tag: format!("boolean[lambda={intensity},{}]", law.tag()),
        seed,
    })
}
