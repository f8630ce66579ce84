//! Monte Carlo estimators over independent field replicates.
//!
//! Replicate `r` draws its field from `replicate_seed(seed, r)`. Replicates
//! run in parallel, but their results are collected in index order and
//! reduced serially with compensated summation, so every estimate is a pure
//! function of its inputs and seed.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldgen::{ball_offsets, FieldSample, FieldSpec, GridSpec};
use crate::functionals::{transform_field, AverageKind, AverageOperator, LocalFunctional, FLAG_KERNEL_TRUNCATION};
use crate::numeric::{compensated_sum, mean_and_variance};
use crate::rng::replicate_seed;

pub const FLAG_POOLED_MEAN: &str = "pooled-mean";
pub const MAX_MOMENT_ORDER: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
    pub flags: BTreeSet<String>,
}

impl Estimate {
    pub fn new(value: f64, std_error: f64, n: usize, seed: u64) -> Self {
        Estimate {
            value,
            std_error,
            n,
            seed,
            flags: BTreeSet::new(),
        }
    }

    /// Mean of per-replicate values with standard error `s/√n`.
    pub fn from_replicates(xs: &[f64], seed: u64) -> Self {
        let (mean, var) = mean_and_variance(xs);
        Estimate::new(mean, (var / xs.len() as f64).sqrt(), xs.len(), seed)
    }

    pub fn with_flags<I: IntoIterator<Item = String>>(mut self, flags: I) -> Self {
        self.flags.extend(flags);
        self
    }

    pub fn flags_joined(&self) -> String {
        self.flags.iter().cloned().collect::<Vec<_>>().join(";")
    }

    /// `|value − target| ≤ k·std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Runs `f` on every replicate seed in parallel, results in replicate order.
pub(crate) fn replicate_map<T, F>(replicates: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..replicates)
        .into_par_iter()
        .map(|r| f(replicate_seed(seed, r as u64)))
        .collect()
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < 2 {
        return Err(Error::invalid("replicates", format!("need at least 2, got {replicates}")));
    }
    Ok(())
}

/// Converts a physical lag to a cell offset, canonicalizing its sign so that
/// `z` and `−z` visit the same pairs in the same order.
fn lag_offset(grid: &GridSpec, lag: &[f64]) -> Result<[isize; 3]> {
    if lag.len() != grid.d {
        return Err(Error::invalid("lag", format!("expected {} components, got {}", grid.d, lag.len())));
    }
    let mut o = [0isize; 3];
    for (axis, &z) in lag.iter().enumerate() {
        if !(z.is_finite() && z.abs() <= grid.half_side()) {
            return Err(Error::invalid(
                "lag",
                format!("component {z} exceeds the torus half-side {}", grid.half_side()),
            ));
        }
        o[axis] = (z / grid.h).round() as isize;
    }
    if o[..grid.d].iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) {
        for v in o.iter_mut() {
            *v = -*v;
        }
    }
    Ok(o)
}

/// `Cov[A(0); A(lag)]`: per replicate the torus average of
/// `(A(x) − m)(A(x+lag) − m)`, with `m` the model mean when known and the
/// replicate's own field mean otherwise.
pub fn empirical_covariance(spec: &FieldSpec, lag: &[f64], replicates: usize, seed: u64) -> Result<Estimate> {
    check_replicates(replicates)?;
    let gen = spec.generator()?;
    let grid = spec.grid;
    let offset = lag_offset(&grid, lag)?;
    let analytic = spec.analytic_mean();
    let per: Vec<f64> = replicate_map(replicates, seed, |s| {
        let a = gen.sample(s);
        let m = analytic.unwrap_or_else(|| a.mean());
        let cross = compensated_sum(
            (0..grid.len()).map(|x| (a.values[x] - m) * (a.values[grid.offset_index(x, &offset[..grid.d])] - m)),
        );
        Ok(cross / grid.len() as f64)
    })?;
    let est = Estimate::from_replicates(&per, seed);
    Ok(if analytic.is_none() {
        est.with_flags([FLAG_POOLED_MEAN.to_string()])
    } else {
        est
    })
}

/// Replicates of `X_L` for one `(model, f, kind, L)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageSamples {
    pub values: Vec<f64>,
    pub seed: u64,
    pub flags: BTreeSet<String>,
}

/// Draws `X_L` per replicate.
///
/// With no closed-form `E[F]`, the pooled estimate `Σ_r raw_r / (n·W)` over
/// all replicates is used (`raw_r = Σ w·F`, `W = Σ w`) and the
/// "pooled-mean" flag is set.
pub fn sample_averages(
    spec: &FieldSpec,
    f: &LocalFunctional,
    kind: AverageKind,
    l: f64,
    replicates: usize,
    seed: u64,
) -> Result<AverageSamples> {
    check_replicates(replicates)?;
    f.validate(&spec.grid)?;
    let gen = spec.generator()?;
    let op = AverageOperator::new(&spec.grid, l, kind)?;
    let mut flags = BTreeSet::new();
    if op.kernel_truncated() {
        flags.insert(FLAG_KERNEL_TRUNCATION.to_string());
    }
    let values = match f.analytic_mean(spec) {
        Some(m) => replicate_map(replicates, seed, |s| op.average_of(f, &gen.sample(s), m))?,
        None => {
            flags.insert(FLAG_POOLED_MEAN.to_string());
            let raw = replicate_map(replicates, seed, |s| op.weighted_functional(f, &gen.sample(s)))?;
            let w = op.total_weight();
            let m = compensated_sum(raw.iter().copied()) / (raw.len() as f64 * w);
            raw.iter().map(|r| r - m * w).collect()
        }
    };
    Ok(AverageSamples { values, seed, flags })
}

impl AverageSamples {
    fn estimate(&self, value: f64, std_error: f64) -> Estimate {
        Estimate::new(value, std_error, self.values.len(), self.seed).with_flags(self.flags.iter().cloned())
    }

    /// Sample variance; the standard error is that of the mean of the
    /// squared deviations.
    pub fn variance(&self) -> Estimate {
        let (mean, var) = mean_and_variance(&self.values);
        let dev: Vec<f64> = self.values.iter().map(|x| (x - mean) * (x - mean)).collect();
        let (_, dev_var) = mean_and_variance(&dev);
        self.estimate(var, (dev_var / dev.len() as f64).sqrt())
    }

    /// Fraction of replicates with `X_L ≥ δ`, binomial standard error.
    pub fn tail(&self, delta: f64) -> Estimate {
        let n = self.values.len() as f64;
        let hits = self.values.iter().filter(|&&x| x >= delta).count() as f64;
        let p = hits / n;
        self.estimate(p, (p * (1.0 - p) / n).sqrt())
    }

    /// `E[X_L^{2p}]`.
    pub fn moment(&self, p: u32) -> Result<Estimate> {
        if p == 0 || p > MAX_MOMENT_ORDER {
            return Err(Error::invalid("p", format!("must lie in 1..={MAX_MOMENT_ORDER}, got {p}")));
        }
        let powers: Vec<f64> = self.values.iter().map(|x| x.powi(2 * p as i32)).collect();
        let e = Estimate::from_replicates(&powers, self.seed);
        Ok(self.estimate(e.value, e.std_error))
    }
}

pub fn variance_of_average(
    spec: &FieldSpec,
    f: &LocalFunctional,
    kind: AverageKind,
    l: f64,
    replicates: usize,
    seed: u64,
) -> Result<Estimate> {
    Ok(sample_averages(spec, f, kind, l, replicates, seed)?.variance())
}

#[allow(clippy::too_many_arguments)]
pub fn tail_probability(
    spec: &FieldSpec,
    f: &LocalFunctional,
    kind: AverageKind,
    l: f64,
    delta: f64,
    replicates: usize,
    seed: u64,
) -> Result<Estimate> {
    if !delta.is_finite() {
        return Err(Error::invalid("delta", "must be finite"));
    }
    Ok(sample_averages(spec, f, kind, l, replicates, seed)?.tail(delta))
}

#[allow(clippy::too_many_arguments)]
pub fn moment_of_average(
    spec: &FieldSpec,
    f: &LocalFunctional,
    kind: AverageKind,
    l: f64,
    p: u32,
    replicates: usize,
    seed: u64,
) -> Result<Estimate> {
    if p == 0 || p > MAX_MOMENT_ORDER {
        return Err(Error::invalid("p", format!("must lie in 1..={MAX_MOMENT_ORDER}, got {p}")));
    }
    sample_averages(spec, f, kind, l, replicates, seed)?.moment(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// `G = {box average of A over the region ≥ level}`.
    ThresholdOnBoxAverage { levels: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFamily {
    #[serde(flatten)]
    pub kind: EventKind,
    pub region_size: f64,
}

impl EventFamily {
    pub fn thresholds(levels: Vec<f64>, region_size: f64) -> Self {
        EventFamily {
            kind: EventKind::ThresholdOnBoxAverage { levels },
            region_size,
        }
    }

    pub fn levels(&self) -> &[f64] {
        match &self.kind {
            EventKind::ThresholdOnBoxAverage { levels } => levels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.levels();
        if levels.is_empty() {
            return Err(Error::invalid("levels", "must be nonempty"));
        }
        if levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid("levels", "must be finite"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("levels", "must be strictly increasing"));
        }
        if !(self.region_size.is_finite() && self.region_size > 0.0) {
            return Err(Error::invalid("region_size", format!("must be positive, got {}", self.region_size)));
        }
        Ok(())
    }
}

/// Two axis-aligned cubes of `m = round(region_size/h)` cells per side.
///
/// `S₁` has its lower corner at cell `anchor` on axis 0 (0 on the other
/// axes); `S₂` is `S₁` translated along axis 0 so that the closest cells of
/// the two regions are `g = ⌈R/h⌉` cells apart. Going around the torus the
/// other way they must also be at least `g` cells apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingQuery {
    #[serde(rename = "R")]
    pub r: f64,
    /// Diameter cap; `None` means unbounded.
    #[serde(rename = "D", default)]
    pub d_cap: Option<f64>,
    pub family: EventFamily,
    #[serde(default)]
    pub anchor: usize,
}

/// Cell indices of the two regions of a [`MixingQuery`].
#[derive(Debug, Clone, PartialEq)]
pub struct Regions {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub side_cells: usize,
    pub gap_cells: usize,
}

impl MixingQuery {
    pub fn regions(&self, grid: &GridSpec) -> Result<Regions> {
        self.family.validate()?;
        if !(self.r.is_finite() && self.r >= grid.h * (1.0 - 1e-12)) {
            return Err(Error::invalid("R", format!("must be at least the grid spacing {}, got {}", grid.h, self.r)));
        }
        let m = (self.family.region_size / grid.h).round().max(1.0) as usize;
        let g = (self.r / grid.h - 1e-9).ceil().max(1.0) as usize;
        let diameter = (m - 1) as f64 * grid.h * (grid.d as f64).sqrt();
        if let Some(cap) = self.d_cap {
            if diameter > cap {
                return Err(Error::Placement(format!("region diameter {diameter} exceeds D = {cap}")));
            }
        }
        if grid.n < 2 * m + 2 * g - 2 || m > grid.n {
            return Err(Error::Placement(format!(
                "two regions of {m} cells at gap {g} do not fit on a torus of {} cells",
                grid.n
            )));
        }
        let cube = |start: usize| -> Vec<usize> {
            let count = m.pow(grid.d as u32);
            (0..count)
                .map(|k| {
                    let mut rest = k;
                    let mut c = [0usize; 3];
                    for axis in (0..grid.d).rev() {
                        c[axis] = rest % m;
                        rest /= m;
                    }
                    c[0] = (c[0] + start) % grid.n;
                    grid.index(&c[..grid.d])
                })
                .collect()
        };
        let start1 = self.anchor % grid.n;
        Ok(Regions {
            s1: cube(start1),
            s2: cube(start1 + m - 1 + g),
            side_cells: m,
            gap_cells: g,
        })
    }
}

/// Lower-bound estimate of `α̃(R, D)` over the threshold event family.
///
/// The value is `max |p̂₁₂ − p̂₁p̂₂|` over level pairs; its standard error is
/// that of the maximizing pair only, from the influence function
/// `𝟙{G₁G₂} − p₂𝟙{G₁} − p₁𝟙{G₂}`.
pub fn mixing_coefficient(spec: &FieldSpec, query: &MixingQuery, replicates: usize, seed: u64) -> Result<Estimate> {
    check_replicates(replicates)?;
    let regions = query.regions(&spec.grid)?;
    let gen = spec.generator()?;
    let box_mean = |a: &FieldSample, cells: &[usize]| compensated_sum(cells.iter().map(|&i| a.values[i])) / cells.len() as f64;
    let pairs: Vec<(f64, f64)> = replicate_map(replicates, seed, |s| {
        let a = gen.sample(s);
        Ok((box_mean(&a, &regions.s1), box_mean(&a, &regions.s2)))
    })?;
    let levels = query.family.levels();
    let n = replicates as f64;
    let mut best: Option<(f64, f64)> = None;
    for &l1 in levels {
        for &l2 in levels {
            let g1: Vec<bool> = pairs.iter().map(|p| p.0 >= l1).collect();
            let g2: Vec<bool> = pairs.iter().map(|p| p.1 >= l2).collect();
            let p1 = g1.iter().filter(|&&b| b).count() as f64 / n;
            let p2 = g2.iter().filter(|&&b| b).count() as f64 / n;
            let p12 = g1.iter().zip(&g2).filter(|(a, b)| **a && **b).count() as f64 / n;
            let value = (p12 - p1 * p2).abs();
            if best.is_none_or(|(v, _)| value > v) {
                let ind = |b: bool| if b { 1.0 } else { 0.0 };
                let psi: Vec<f64> = g1
                    .iter()
                    .zip(&g2)
                    .map(|(&a, &b)| ind(a && b) - p2 * ind(a) - p1 * ind(b))
                    .collect();
                let (_, var) = mean_and_variance(&psi);
                best = Some((value, (var / n).sqrt()));
            }
        }
    }
    let (value, se) = best.expect("levels nonempty");
    Ok(Estimate::new(value, se, replicates, seed))
}

/// `⨍_{B_R} F`: the average of the transformed field over the closed
/// discrete ball of radius `R` around the origin.
pub fn ergodic_average(sample: &FieldSample, f: &LocalFunctional, radius: f64) -> Result<f64> {
    let grid = &sample.grid;
    if !(radius.is_finite() && radius >= 0.0 && radius <= grid.half_side()) {
        return Err(Error::invalid(
            "R",
            format!("must lie in [0, {}], got {radius}", grid.half_side()),
        ));
    }
    let offsets = ball_offsets(grid.d, grid.h, radius, false);
    let f_values = transform_field(f, sample)?.values;
    let sum = compensated_sum(offsets.iter().map(|o| f_values[grid.offset_index(0, &o[..grid.d])]));
    Ok(sum / offsets.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::{BlockLaw, CovarianceModel, FieldModel};

    fn block_spec(d: usize, n: usize, block: usize, p: f64) -> FieldSpec {
        FieldSpec::new(
            GridSpec::new(d, n, 1.0).unwrap(),
            FieldModel::BlockIid {
                block,
                law: BlockLaw::Bernoulli { p },
            },
        )
        .unwrap()
    }

    fn delta_spec() -> FieldSpec {
        FieldSpec::new(
            GridSpec::new(1, 64, 1.0).unwrap(),
            FieldModel::Gaussian {
                covariance: CovarianceModel::DeltaLag { sigma2: 1.0 },
            },
        )
        .unwrap()
    }

    #[test]
    fn covariance_is_symmetric_bit_exactly() {
        let spec = FieldSpec::new(
            GridSpec::new(2, 16, 1.0).unwrap(),
            FieldModel::Gaussian {
                covariance: CovarianceModel::Exponential { sigma2: 1.0, rho: 2.0 },
            },
        )
        .unwrap();
        let a = empirical_covariance(&spec, &[2.0, -1.0], 20, 3).unwrap();
        let b = empirical_covariance(&spec, &[-2.0, 1.0], 20, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lag_zero_is_field_variance() {
        let spec = block_spec(1, 32, 2, 0.5);
        let gen = spec.generator().unwrap();
        let est = empirical_covariance(&spec, &[0.0], 2, 11).unwrap();
        let per: Vec<f64> = (0..2)
            .map(|r| {
                let a = gen.sample(replicate_seed(11, r));
                a.values.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>() / 32.0
            })
            .collect();
        assert!((est.value - (per[0] + per[1]) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn delta_lag_covariance_vanishes() {
        let est = empirical_covariance(&delta_spec(), &[1.0], 200, 5).unwrap();
        assert!(est.within(0.0, 3.0), "{est:?}");
    }

    #[test]
    fn lag_beyond_half_side_rejected() {
        assert!(empirical_covariance(&delta_spec(), &[33.0], 10, 0).is_err());
        assert!(variance_of_average(&delta_spec(), &LocalFunctional::CellValue, AverageKind::Box, 4.0, 1, 0).is_err());
    }

    #[test]
    fn iid_box_variance() {
        let spec = block_spec(1, 64, 1, 0.5);
        for k in [2.0, 4.0, 8.0] {
            let est = variance_of_average(&spec, &LocalFunctional::CellValue, AverageKind::Box, k, 400, 1).unwrap();
            assert!(est.within(0.25 / k, 3.0), "L={k}: {est:?}");
            assert!(est.flags.is_empty());
        }
    }

    #[test]
    fn estimates_are_deterministic() {
        let spec = delta_spec();
        let f = LocalFunctional::BallAverage { radius: 1.0 };
        let a = variance_of_average(&spec, &f, AverageKind::ExpKernel, 3.0, 50, 9).unwrap();
        let b = variance_of_average(&spec, &f, AverageKind::ExpKernel, 3.0, 50, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_matches_serial() {
        let spec = delta_spec();
        let f = LocalFunctional::CellValue;
        let par = sample_averages(&spec, &f, AverageKind::Box, 8.0, 64, 4).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let ser = pool.install(|| sample_averages(&spec, &f, AverageKind::Box, 8.0, 64, 4).unwrap());
        assert_eq!(par, ser);
        assert_eq!(par.variance(), ser.variance());
    }

    #[test]
    fn tails_are_monotone_and_bounded() {
        let spec = block_spec(1, 64, 1, 0.3);
        let thr = LocalFunctional::Threshold { radius: 1.0, level: 0.5 };
        let s = sample_averages(&spec, &thr, AverageKind::Box, 8.0, 500, 2).unwrap();
        assert!(s.flags.contains(FLAG_POOLED_MEAN));
        let mut prev = 1.0;
        for k in 0..40 {
            let t = s.tail(-1.0 + 0.1 * k as f64).value;
            assert!((0.0..=1.0).contains(&t) && t <= prev);
            prev = t;
        }
        assert_eq!(s.tail(2.5).value, 0.0);
    }

    #[test]
    fn gaussian_symmetric_tail() {
        let est = tail_probability(&delta_spec(), &LocalFunctional::CellValue, AverageKind::Box, 4.0, 0.0, 1000, 3).unwrap();
        assert!(est.within(0.5, 3.0), "{est:?}");
    }

    #[test]
    fn constant_field_moments_vanish() {
        let spec = block_spec(1, 16, 16, 1.0);
        for p in 1..=3 {
            let m = moment_of_average(&spec, &LocalFunctional::CellValue, AverageKind::Box, 4.0, p, 10, 0).unwrap();
            assert_eq!(m.value, 0.0);
        }
        assert!(moment_of_average(&spec, &LocalFunctional::CellValue, AverageKind::Box, 4.0, 0, 10, 0).is_err());
    }

    #[test]
    fn jensen_between_moments() {
        let s = sample_averages(&delta_spec(), &LocalFunctional::CellValue, AverageKind::Box, 4.0, 2000, 8).unwrap();
        let m1 = s.moment(1).unwrap();
        let m2 = s.moment(2).unwrap();
        assert!(m1.value.powi(2) <= m2.value + 3.0 * m2.std_error);
    }

    fn thresholds(levels: Vec<f64>, size: f64, r: f64) -> MixingQuery {
        MixingQuery {
            r,
            d_cap: None,
            family: EventFamily::thresholds(levels, size),
            anchor: 0,
        }
    }

    #[test]
    fn region_placement() {
        let grid = GridSpec::new(1, 16, 1.0).unwrap();
        let q = thresholds(vec![0.5], 3.0, 2.0);
        let r = q.regions(&grid).unwrap();
        assert_eq!(r.s1, vec![0, 1, 2]);
        assert_eq!(r.s2, vec![4, 5, 6]);
        assert!(thresholds(vec![0.5], 8.0, 2.0).regions(&grid).is_err());
        assert!(thresholds(vec![0.5], 3.0, 0.5).regions(&grid).is_err());
        let capped = MixingQuery {
            d_cap: Some(1.0),
            ..q
        };
        assert!(matches!(capped.regions(&grid), Err(Error::Placement(_))));
    }

    #[test]
    fn constant_field_mixing_quarter() {
        let spec = block_spec(1, 32, 32, 0.5);
        let est = mixing_coefficient(&spec, &thresholds(vec![0.5], 2.0, 4.0), 2000, 1).unwrap();
        assert!(est.within(0.25, 3.0), "{est:?}");
    }

    #[test]
    fn separated_blocks_do_not_mix() {
        let spec = block_spec(1, 64, 4, 0.5);
        let est = mixing_coefficient(&spec, &thresholds(vec![0.5], 4.0, 9.0), 2000, 2).unwrap();
        assert!(est.value <= 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn ergodic_average_of_constant() {
        let grid = GridSpec::new(2, 16, 1.0).unwrap();
        let c = FieldSample::constant(&grid, 0.7);
        for r in [0.0, 1.0, 3.5, 8.0] {
            assert!((ergodic_average(&c, &LocalFunctional::CellValue, r).unwrap() - 0.7).abs() < 1e-15);
        }
        assert!(ergodic_average(&c, &LocalFunctional::CellValue, 8.5).is_err());
    }
}
