//! Multiscale weights `π(ℓ)` and the scalar quantities derived from them.
//!
//! Three parametric families are supported:
//!
//! | family          | `π(ℓ)`                     |
//! |-----------------|----------------------------|
//! | `Algebraic(β)`  | `n · (ℓ+1)^(-1-β)`         |
//! | `StretchedExp`  | `n · exp(-ℓ^β / c)`        |
//! | `Compact(R)`    | `n · 1[ℓ ≤ R]`             |
//!
//! where `n` is the explicit normalization prefactor. The effective scale
//! `π*(ℓ)` is the inverse ball average of the tail integral
//! `T(r) = ∫_r^∞ π`, reduced to a one-dimensional radial integral.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Algebraic {
        beta: f64,
    },
    StretchedExp {
        beta: f64,
        c: f64,
    },
    Compact {
        #[serde(rename = "R")]
        radius: f64,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFamily {
    #[serde(flatten)]
    pub kind: WeightKind,
    #[serde(default = "unit")]
    pub normalization: f64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and positive, got {v}")))
    }
}

fn nonneg(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and nonnegative, got {v}")))
    }
}

impl WeightFamily {
    pub fn algebraic(beta: f64) -> Self {
        WeightFamily {
            kind: WeightKind::Algebraic { beta },
            normalization: 1.0,
        }
    }

    pub fn stretched_exp(beta: f64, c: f64) -> Self {
        WeightFamily {
            kind: WeightKind::StretchedExp { beta, c },
            normalization: 1.0,
        }
    }

    pub fn compact(radius: f64) -> Self {
        WeightFamily {
            kind: WeightKind::Compact { radius },
            normalization: 1.0,
        }
    }

    pub fn with_normalization(mut self, normalization: f64) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("normalization", self.normalization)?;
        match self.kind {
            WeightKind::Algebraic { beta } => positive("beta", beta),
            WeightKind::StretchedExp { beta, c } => {
                positive("beta", beta)?;
                positive("c", c)
            }
            WeightKind::Compact { radius } => positive("R", radius),
        }
    }

    /// `π(ℓ)`.
    pub fn eval(&self, ell: f64) -> Result<f64> {
        nonneg("ell", ell)?;
        Ok(self.eval_unchecked(ell))
    }

    fn eval_unchecked(&self, ell: f64) -> f64 {
        let n = self.normalization;
        match self.kind {
            WeightKind::Algebraic { beta } => n * (ell + 1.0).powf(-1.0 - beta),
            WeightKind::StretchedExp { beta, c } => n * (-ell.powf(beta) / c).exp(),
            WeightKind::Compact { radius } => {
                if ell <= radius {
                    n
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_r^∞ π(ℓ) dℓ` in closed form.
    ///
    /// The stretched exponential goes through the regularized upper incomplete
    /// gamma function: `c^(1/β)/β · Γ(1/β) · Q(1/β, r^β/c)`.
    pub fn tail_integral(&self, r: f64) -> Result<f64> {
        nonneg("r", r)?;
        self.validate()?;
        Ok(self.tail_unchecked(r))
    }

    fn tail_unchecked(&self, r: f64) -> f64 {
        let n = self.normalization;
        match self.kind {
            WeightKind::Algebraic { beta } => n * (r + 1.0).powf(-beta) / beta,
            WeightKind::StretchedExp { beta, c } => {
                let a = 1.0 / beta;
                let x = r.powf(beta) / c;
                let q = if x == 0.0 { 1.0 } else { gamma_ur(a, x) };
                n * c.powf(a) / beta * gamma(a) * q
            }
            WeightKind::Compact { radius } => n * (radius - r).max(0.0),
        }
    }

    /// `∫_r^∞ π(ℓ) dℓ` by adaptive quadrature of [`WeightFamily::eval`].
    ///
    /// Independent of the closed forms; used to cross-check them.
    pub fn tail_integral_quadrature(&self, r: f64) -> Result<f64> {
        nonneg("r", r)?;
        self.validate()?;
        let tol = Tolerance {
            abs_floor: 1e-14,
            rel_target: 1e-11,
            max_intervals: 4000,
        };
        match self.kind {
            WeightKind::Compact { radius } => {
                if r >= radius {
                    Ok(0.0)
                } else {
                    quad::integrate(|s| self.eval_unchecked(s), r, radius, tol)
                }
            }
            _ => quad::integrate_to_infinity(|s| self.eval_unchecked(s), r, tol),
        }
    }

    /// `∫_0^∞ π`.
    pub fn total_mass(&self) -> Result<f64> {
        self.tail_integral(0.0)
    }
}

/// Ambient dimension together with the unit-ball volume `|B_1|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionContext {
    pub d: usize,
    pub ball_volume_unit: f64,
}

impl DimensionContext {
    pub fn new(d: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::invalid("d", format!("must be 1, 2 or 3, got {d}")));
        }
        Ok(DimensionContext {
            d,
            ball_volume_unit: unit_ball_volume(d),
        })
    }

    /// Surface measure of the unit sphere, `d · |B_1|`.
    pub fn sphere_area_unit(&self) -> f64 {
        self.d as f64 * self.ball_volume_unit
    }
}

/// `π^(d/2) / Γ(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0),
    }
}

/// `π*(ℓ) = ( ⨍_{B_ℓ} ∫_{|x|}^∞ π )^(-1)`.
///
/// The ball average of the radial integrand is `(d/ℓ^d) ∫_0^ℓ ρ^(d-1) T(ρ) dρ`.
/// At `ℓ = 0` the average degenerates to `T(0)`.
pub fn pi_star(w: &WeightFamily, ctx: &DimensionContext, ell: f64) -> Result<f64> {
    nonneg("ell", ell)?;
    w.validate()?;
    Ok(1.0 / ball_average_of_tail(w, ctx, ell)?)
}

fn ball_average_of_tail(w: &WeightFamily, ctx: &DimensionContext, ell: f64) -> Result<f64> {
    if ell == 0.0 {
        return Ok(w.tail_unchecked(0.0));
    }
    let d = ctx.d as i32;
    let integrand = |rho: f64| rho.powi(d - 1) * w.tail_unchecked(rho);
    let tol = Tolerance {
        abs_floor: 0.0,
        rel_target: 1e-10,
        max_intervals: 4000,
    };
    let integral = match w.kind {
        WeightKind::Compact { radius } if radius < ell => quad::integrate(integrand, 0.0, radius, tol)?,
        _ => quad::integrate(integrand, 0.0, ell, tol)?,
    };
    Ok(ctx.d as f64 * integral / ell.powi(d))
}

/// Asymptotic equivalent of `π*` for `π(ℓ) ≃ (ℓ+1)^(-1-β)`.
pub fn pi_star_asymptotic(beta: f64, ctx: &DimensionContext, ell: f64) -> f64 {
    let d = ctx.d as f64;
    if beta < d {
        (ell + 1.0).powf(beta)
    } else if beta == d {
        (ell + 1.0).powf(d) / (2.0 + ell).ln()
    } else {
        (ell + 1.0).powf(d)
    }
}
