//! Predicted bound curves and their confrontation with estimates.
//!
//! Each [`RegimeKind`] is an explicit function of its arguments with one
//! constant `C` in a monotone slot; [`fit_constant`] finds the smallest `C`
//! for which the curve dominates a set of estimates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::{pi_star, DimensionContext, WeightFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    /// `C·π*(L)^{-1}`.
    VarMSG,
    /// `exp(−(δ/C)·π*(L)^{1/2})`.
    TailMSGfct,
    /// `exp(−(δ²/C)·π*(L))`.
    TailMLSIfct,
    /// `C·e^{−δ/C}·(1 + δ^{−2β/d}|log δ|)·L^{−β}`.
    TailOscAlg,
    /// `exp(−(δ∧δ²)/C · L^{β∧(d/2)})`.
    TailOscExpSG,
    /// `exp(−(δ∧δ²)/C · L^{β∧d})`.
    TailOscExpLSI,
    /// `C·exp(−(1/C)·δ²(|log δ|+1)^{−k}·L^k)` with `k = dβ/(d+β)`.
    TailMixing,
    /// `C·∫_{((|x|−2)/2)∨0}^∞ π`.
    CovDecay,
    /// `C·(1 + D/R)^d·∫_{(R−1)∨0}^∞ π`.
    MixingDecay,
    /// `(u/L)·log(1 + L·u/C)`.
    PsiL,
    /// `min(1, u^{2p₀})·exp(u^{2/(2+α)})`.
    PsiP0Alpha,
    /// `(C·p²)^p·base^p`.
    MomentSG,
    /// `(C·p)^p·base^p`.
    MomentLSI,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 13] = [
        RegimeKind::VarMSG,
        RegimeKind::TailMSGfct,
        RegimeKind::TailMLSIfct,
        RegimeKind::TailOscAlg,
        RegimeKind::TailOscExpSG,
        RegimeKind::TailOscExpLSI,
        RegimeKind::TailMixing,
        RegimeKind::CovDecay,
        RegimeKind::MixingDecay,
        RegimeKind::PsiL,
        RegimeKind::PsiP0Alpha,
        RegimeKind::MomentSG,
        RegimeKind::MomentLSI,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RegimeKind::VarMSG => "VarMSG",
            RegimeKind::TailMSGfct => "TailMSGfct",
            RegimeKind::TailMLSIfct => "TailMLSIfct",
            RegimeKind::TailOscAlg => "TailOscAlg",
            RegimeKind::TailOscExpSG => "TailOscExpSG",
            RegimeKind::TailOscExpLSI => "TailOscExpLSI",
            RegimeKind::TailMixing => "TailMixing",
            RegimeKind::CovDecay => "CovDecay",
            RegimeKind::MixingDecay => "MixingDecay",
            RegimeKind::PsiL => "PsiL",
            RegimeKind::PsiP0Alpha => "PsiP0Alpha",
            RegimeKind::MomentSG => "MomentSG",
            RegimeKind::MomentLSI => "MomentLSI",
        }
    }

    /// Named constants the regime reads from [`BoundRegime::params`].
    pub fn required_params(&self) -> &'static [&'static str] {
        match self {
            RegimeKind::PsiL => &["L_param", "C"],
            RegimeKind::PsiP0Alpha => &["p0", "alpha"],
            RegimeKind::TailOscAlg | RegimeKind::TailOscExpSG | RegimeKind::TailOscExpLSI | RegimeKind::TailMixing => {
                &["beta", "C"]
            }
            _ => &["C"],
        }
    }

    /// Whether the regime has a `C` slot in which the curve increases.
    pub fn fittable(&self) -> bool {
        !matches!(self, RegimeKind::PsiL | RegimeKind::PsiP0Alpha)
    }

    pub fn needs_weight(&self) -> bool {
        matches!(
            self,
            RegimeKind::VarMSG
                | RegimeKind::TailMSGfct
                | RegimeKind::TailMLSIfct
                | RegimeKind::CovDecay
                | RegimeKind::MixingDecay
        )
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegimeKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("regime", format!("unknown regime `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRegime {
    pub kind: RegimeKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl BoundRegime {
    pub fn new(kind: RegimeKind) -> Self {
        BoundRegime {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingParameter(name.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for &name in self.kind.required_params() {
            let v = self.param(name)?;
            let ok = match name {
                "p0" | "alpha" => v.is_finite() && v >= 0.0,
                _ => v.is_finite() && v > 0.0,
            };
            if !ok {
                return Err(Error::InvalidParameter {
                    name: "params",
                    reason: format!("`{name}` = {v} out of range"),
                });
            }
        }
        Ok(())
    }
}

/// Arguments a curve is evaluated at; each regime reads its own subset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveArgs {
    pub delta: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub x_norm: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    /// Diameter cap; absent means unbounded.
    #[serde(rename = "D")]
    pub d_cap: Option<f64>,
    pub u: Option<f64>,
    pub p: Option<u32>,
    pub base: Option<f64>,
}

fn arg(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::MissingParameter(name.to_string()))
}

/// A regime bound to its weight and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub regime: BoundRegime,
    pub weight: Option<WeightFamily>,
    pub ctx: DimensionContext,
}

impl BoundCurve {
    pub fn new(regime: BoundRegime, weight: Option<WeightFamily>, ctx: DimensionContext) -> Self {
        BoundCurve { regime, weight, ctx }
    }

    fn weight(&self) -> Result<&WeightFamily> {
        self.weight.as_ref().ok_or_else(|| Error::MissingParameter("weight".into()))
    }

    pub fn eval(&self, args: &CurveArgs) -> Result<f64> {
        self.regime.validate()?;
        let c = match self.regime.kind {
            RegimeKind::PsiP0Alpha => f64::NAN,
            _ => self.regime.param("C")?,
        };
        self.eval_with_c(args, c)
    }

    /// Evaluates with `C` replaced by `c`; other parameters must be present.
    pub fn eval_with_c(&self, args: &CurveArgs, c: f64) -> Result<f64> {
        let d = self.ctx.d as f64;
        let p = &self.regime;
        match p.kind {
            RegimeKind::VarMSG => {
                let l = arg(args.l, "L")?;
                Ok(c * predicted_variance(self.weight()?, &self.ctx, l)?)
            }
            RegimeKind::TailMSGfct => {
                let (delta, l) = (arg(args.delta, "delta")?, arg(args.l, "L")?);
                Ok((-(delta / c) * pi_star(self.weight()?, &self.ctx, l)?.sqrt()).exp())
            }
            RegimeKind::TailMLSIfct => {
                let (delta, l) = (arg(args.delta, "delta")?, arg(args.l, "L")?);
                Ok((-(delta * delta / c) * pi_star(self.weight()?, &self.ctx, l)?).exp())
            }
            RegimeKind::TailOscAlg => {
                let (delta, l, beta) = (arg(args.delta, "delta")?, arg(args.l, "L")?, p.param("beta")?);
                let shape = 1.0 + delta.powf(-2.0 * beta / d) * delta.ln().abs();
                Ok(c * (-delta / c).exp() * shape * l.powf(-beta))
            }
            RegimeKind::TailOscExpSG | RegimeKind::TailOscExpLSI => {
                let (delta, l, beta) = (arg(args.delta, "delta")?, arg(args.l, "L")?, p.param("beta")?);
                let cap = if p.kind == RegimeKind::TailOscExpSG { d / 2.0 } else { d };
                Ok((-(delta.min(delta * delta) / c) * l.powf(beta.min(cap))).exp())
            }
            RegimeKind::TailMixing => {
                let (delta, l, beta) = (arg(args.delta, "delta")?, arg(args.l, "L")?, p.param("beta")?);
                let k = d * beta / (d + beta);
                let rate = delta * delta * (delta.ln().abs() + 1.0).powf(-k) * l.powf(k);
                Ok(c * (-rate / c).exp())
            }
            RegimeKind::CovDecay => predicted_covariance_decay(self.weight()?, arg(args.x_norm, "x_norm")?, c),
            RegimeKind::MixingDecay => predicted_mixing(
                self.weight()?,
                &self.ctx,
                arg(args.r, "R")?,
                args.d_cap.unwrap_or(f64::INFINITY),
                c,
            ),
            RegimeKind::PsiL => {
                let u = arg(args.u, "u")?;
                Ok(psi_l(u, p.param("L_param")?, c))
            }
            RegimeKind::PsiP0Alpha => {
                let u = arg(args.u, "u")?;
                Ok(psi_p0_alpha(u, p.param("p0")?, p.param("alpha")?))
            }
            RegimeKind::MomentSG | RegimeKind::MomentLSI => {
                let pp = args.p.ok_or_else(|| Error::MissingParameter("p".into()))?;
                moment_growth_shape(p.kind, pp, c, arg(args.base, "base")?)
            }
        }
    }
}

/// `π*(L)^{-1}`.
pub fn predicted_variance(w: &WeightFamily, ctx: &DimensionContext, l: f64) -> Result<f64> {
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::invalid("L", format!("must be nonnegative, got {l}")));
    }
    Ok(1.0 / pi_star(w, ctx, l)?)
}

/// Right-hand side of a tail regime at `(δ, L)`, with the regime's own `C`.
pub fn predicted_tail(
    regime: &BoundRegime,
    delta: f64,
    l: f64,
    w: &WeightFamily,
    ctx: &DimensionContext,
) -> Result<f64> {
    use RegimeKind::*;
    if !matches!(
        regime.kind,
        TailMSGfct | TailMLSIfct | TailOscAlg | TailOscExpSG | TailOscExpLSI | TailMixing
    ) {
        return Err(Error::invalid("regime", format!("{} is not a tail regime", regime.kind)));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::invalid("L", format!("must be positive, got {l}")));
    }
    let curve = BoundCurve::new(regime.clone(), Some(*w), *ctx);
    curve.eval(&CurveArgs {
        delta: Some(delta),
        l: Some(l),
        ..CurveArgs::default()
    })
}

/// `C·∫_{((|x|−2)/2)∨0}^∞ π`.
pub fn predicted_covariance_decay(w: &WeightFamily, x_norm: f64, c: f64) -> Result<f64> {
    if !(x_norm.is_finite() && x_norm >= 0.0) {
        return Err(Error::invalid("x_norm", format!("must be nonnegative, got {x_norm}")));
    }
    Ok(c * w.tail_integral(((x_norm - 2.0) / 2.0).max(0.0))?)
}

/// `C·(1 + D/R)^d·∫_{(R−1)∨0}^∞ π`.
pub fn predicted_mixing(w: &WeightFamily, ctx: &DimensionContext, r: f64, d_cap: f64, c: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid("R", format!("must be positive, got {r}")));
    }
    if d_cap.is_nan() || d_cap <= 0.0 {
        return Err(Error::invalid("D", format!("must be positive, got {d_cap}")));
    }
    Ok(c * (1.0 + d_cap / r).powi(ctx.d as i32) * w.tail_integral((r - 1.0).max(0.0))?)
}

fn psi_l(u: f64, l_param: f64, c: f64) -> f64 {
    (u / l_param) * (l_param * u / c).ln_1p()
}

fn psi_p0_alpha(u: f64, p0: f64, alpha: f64) -> f64 {
    1f64.min(u.powf(2.0 * p0)) * u.powf(2.0 / (2.0 + alpha)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiKind {
    PsiL,
    PsiP0Alpha,
}

/// `ψ_L` reads `L_param` and `C`; `ψ_{p₀,α}` reads `p0` and `alpha`.
pub fn psi_functions(kind: PsiKind, u: f64, params: &BTreeMap<String, f64>) -> Result<f64> {
    if !(u.is_finite() && u >= 0.0) {
        return Err(Error::invalid("u", format!("must be nonnegative, got {u}")));
    }
    let regime = BoundRegime {
        kind: match kind {
            PsiKind::PsiL => RegimeKind::PsiL,
            PsiKind::PsiP0Alpha => RegimeKind::PsiP0Alpha,
        },
        params: params.clone(),
    };
    regime.validate()?;
    Ok(match kind {
        PsiKind::PsiL => psi_l(u, regime.param("L_param")?, regime.param("C")?),
        PsiKind::PsiP0Alpha => psi_p0_alpha(u, regime.param("p0")?, regime.param("alpha")?),
    })
}

/// `(C·p²)^p·base^p` or `(C·p)^p·base^p`.
pub fn moment_growth_shape(kind: RegimeKind, p: u32, c: f64, base: f64) -> Result<f64> {
    if p == 0 {
        return Err(Error::invalid("p", "must be at least 1"));
    }
    let pf = p as f64;
    let factor = match kind {
        RegimeKind::MomentSG => c * pf * pf,
        RegimeKind::MomentLSI => c * pf,
        other => return Err(Error::invalid("regime", format!("{other} is not a moment regime"))),
    };
    Ok((factor * base).powi(p as i32))
}

/// One empirical value confronted with a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub id: String,
    pub args: CurveArgs,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub c_fit: f64,
    pub dominated: bool,
    /// `min ln(curve) − ln(value + 3·std_error)` over the points.
    pub margin: f64,
    /// Point attaining the margin.
    pub worst_point: Option<String>,
}

pub const FIT_C_MIN: f64 = 1e-12;
pub const FIT_C_MAX: f64 = 1e12;
const SLACK_SE: f64 = 3.0;

/// Smallest `C` for which the curve dominates every `value + 3·std_error`.
///
/// Points whose slack target is not positive are dominated by any
/// nonnegative curve and do not constrain `C`. If some point cannot be
/// dominated for any `C ≤ FIT_C_MAX` (a shape violation), the fit uses the
/// remaining points and reports `dominated = false` with the offending point.
pub fn fit_constant(curve: &BoundCurve, points: &[FitPoint]) -> Result<FitResult> {
    let kind = curve.regime.kind;
    if !kind.fittable() {
        return Err(Error::Unsupported(format!("{kind} has no monotone C slot to fit")));
    }
    if points.is_empty() {
        return Err(Error::invalid("points", "need at least one point"));
    }
    for &name in kind.required_params() {
        if name != "C" {
            curve.regime.param(name)?;
        }
    }
    let targets: Vec<f64> = points.iter().map(|p| p.value + SLACK_SE * p.std_error).collect();
    let g = |pt: &FitPoint, c: f64| curve.eval_with_c(&pt.args, c);

    let mut c_fit = FIT_C_MIN;
    for (pt, &target) in points.iter().zip(&targets) {
        if target > 0.0 && g(pt, FIT_C_MAX)? >= target {
            c_fit = c_fit.max(smallest_c(|c| g(pt, c), target)?);
        }
    }

    let mut margin = f64::INFINITY;
    let mut worst = None;
    for (pt, &target) in points.iter().zip(&targets) {
        if target <= 0.0 {
            continue;
        }
        let m = g(pt, c_fit)?.ln() - target.ln();
        if m < margin {
            margin = m;
            worst = Some(pt.id.clone());
        }
    }
    if worst.is_none() {
        // Nothing to dominate: every target is nonpositive.
        margin = 0.0;
    }
    Ok(FitResult {
        c_fit,
        dominated: margin >= 0.0,
        margin,
        worst_point: worst,
    })
}

/// Log-bisection for the smallest `c` with `g(c) ≥ target`, given
/// `g(FIT_C_MAX) ≥ target` and `g` nondecreasing.
fn smallest_c<G: Fn(f64) -> Result<f64>>(g: G, target: f64) -> Result<f64> {
    if g(FIT_C_MIN)? >= target {
        return Ok(FIT_C_MIN);
    }
    let (mut lo, mut hi) = (FIT_C_MIN.ln(), FIT_C_MAX.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid.exp())? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let mut c = hi.exp();
    // Rounding in `exp` can land a hair below the constraint.
    while g(c)? < target {
        c = c.next_up();
    }
    Ok(c)
}
