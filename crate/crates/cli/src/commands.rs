//! The non-experiment subcommands: curve evaluation, weight tables and
//! oracle tables. Each returns the text to print.

use std::collections::BTreeMap;
use std::fmt::Write;

use msfi_core::bounds::{BoundCurve, BoundRegime, CurveArgs, RegimeKind};
use msfi_core::oracle::{self, rat, CellLaw, Dependency, TinyFieldSpec, TinyFunctional};
use msfi_core::weights::{pi_star, DimensionContext, WeightFamily, WeightKind};

use crate::error::CliError;

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Splits `key=value` words.
fn key_values(words: &[String]) -> Result<Vec<(String, String)>, CliError> {
    words
        .iter()
        .map(|w| {
            w.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| invalid(w, "expected key=value"))
        })
        .collect()
}

fn number(key: &str, text: &str) -> Result<f64, CliError> {
    text.parse().map_err(|_| invalid(key, format!("`{text}` is not a number")))
}

fn weight_from(family: &str, params: &BTreeMap<String, f64>) -> Result<WeightFamily, CliError> {
    let get = |k: &str| params.get(k).copied().ok_or_else(|| invalid(k, "missing"));
    let w = match family {
        "algebraic" => WeightFamily::algebraic(get("beta")?),
        "stretched_exp" => WeightFamily::stretched_exp(get("beta")?, get("c")?),
        "compact" => WeightFamily::compact(get("R")?),
        other => return Err(invalid("family", format!("unknown weight family `{other}`"))),
    }
    .with_normalization(params.get("normalization").copied().unwrap_or(1.0));
    w.validate()?;
    Ok(w)
}

/// `bounds eval <regime> key=value...`.
///
/// Curve arguments are `delta`, `L`, `x_norm`, `R`, `D`, `u`, `p`, `base`;
/// `d` sets the dimension (default 1); `weight.kind` plus `weight.<param>`
/// set the weight; every other key is a regime parameter.
pub fn bounds_eval(regime: &str, words: &[String]) -> Result<String, CliError> {
    let kind: RegimeKind = regime.parse().map_err(|_| invalid("regime", format!("unknown regime `{regime}`")))?;
    let mut args = CurveArgs::default();
    let mut d = 1usize;
    let mut weight_kind = None;
    let mut weight_params = BTreeMap::new();
    let mut bound = BoundRegime::new(kind);
    for (k, v) in key_values(words)? {
        match k.as_str() {
            "delta" => args.delta = Some(number(&k, &v)?),
            "L" => args.l = Some(number(&k, &v)?),
            "x_norm" => args.x_norm = Some(number(&k, &v)?),
            "R" => args.r = Some(number(&k, &v)?),
            "D" => args.d_cap = Some(number(&k, &v)?),
            "u" => args.u = Some(number(&k, &v)?),
            "p" => args.p = Some(v.parse().map_err(|_| invalid("p", "must be a positive integer"))?),
            "base" => args.base = Some(number(&k, &v)?),
            "d" => d = v.parse().map_err(|_| invalid("d", "must be 1, 2 or 3"))?,
            "weight.kind" => weight_kind = Some(v),
            _ => match k.strip_prefix("weight.") {
                Some(name) => {
                    weight_params.insert(name.to_string(), number(&k, &v)?);
                }
                None => bound = bound.with(&k, number(&k, &v)?),
            },
        }
    }
    let weight = weight_kind.map(|f| weight_from(&f, &weight_params)).transpose()?;
    let curve = BoundCurve::new(bound, weight, DimensionContext::new(d)?);
    Ok(format!("{}\n", curve.eval(&args)?))
}

/// `weights table <family> key=value...`: `π(ℓ)`, its tail integral and
/// `π*(ℓ)` at the scales listed in `ell` (comma-separated; default powers
/// of two up to 1024), in dimension `d` (default 1).
pub fn weights_table(family: &str, words: &[String]) -> Result<String, CliError> {
    let mut params = BTreeMap::new();
    let mut ells: Vec<f64> = (0..=10).map(|k| f64::from(1u32 << k)).collect();
    let mut d = 1usize;
    for (k, v) in key_values(words)? {
        match k.as_str() {
            "ell" => ells = v.split(',').map(|s| number("ell", s.trim())).collect::<Result<_, _>>()?,
            "d" => d = v.parse().map_err(|_| invalid("d", "must be 1, 2 or 3"))?,
            _ => {
                params.insert(k.clone(), number(&k, &v)?);
            }
        }
    }
    let w = weight_from(family, &params)?;
    let ctx = DimensionContext::new(d)?;
    let mut out = String::from("ell,pi,tail_integral,pi_star\n");
    for ell in ells {
        writeln!(out, "{ell},{},{},{}", w.eval(ell)?, w.tail_integral(ell)?, pi_star(&w, &ctx, ell)?).unwrap();
    }
    if let WeightKind::Algebraic { beta } = w.kind {
        if beta < d as f64 {
            writeln!(out, "# beta < d: pi_star grows like ell^beta").unwrap();
        }
    }
    Ok(out)
}

/// Exact oracle tables for the built-in tiny instances.
pub fn oracle_tables() -> Result<String, CliError> {
    let half = CellLaw::bernoulli(rat(1, 2))?;
    let mut out = String::new();

    let three = TinyFieldSpec::iid(vec![half.clone(); 3])?;
    for (name, x) in [("Sum", TinyFunctional::Sum), ("CellProduct", TinyFunctional::CellProduct)] {
        let m = oracle::exact_moments(&three, &x);
        writeln!(
            out,
            "moments {name} over 3 Bernoulli(1/2): mean={} variance={} fourth_central={}",
            m.mean, m.variance, m.fourth_central
        )
        .unwrap();
    }

    let two = TinyFieldSpec::iid(vec![half.clone(); 2])?;
    let osc = oracle::exact_oscillation(&two, &TinyFunctional::Sum, &[0])?;
    writeln!(out, "oscillation of A0+A1 over S={{0}}: E[osc^2]={}", osc.expected_square).unwrap();
    for (exterior, v) in &osc.table {
        let ext: Vec<String> = exterior.iter().map(|q| q.to_string()).collect();
        writeln!(out, "  exterior [{}] -> osc {v}", ext.join(",")).unwrap();
    }

    let eight = TinyFieldSpec::iid(vec![half.clone(); 8])?;
    let es = oracle::efron_stein_check(&eight, &TinyFunctional::ThresholdCount { level: rat(1, 2) })?;
    writeln!(
        out,
        "efron-stein ThresholdCount over 8 cells: variance={} rhs={} holds={}",
        es.variance, es.rhs, es.holds
    )
    .unwrap();

    let chain = TinyFieldSpec::new(vec![half; 3], Dependency::DuplicateOf(BTreeMap::from([(1, 0)])))?;
    let alpha = oracle::exact_alpha(&chain, &[0], &[1])?;
    let independent = oracle::exact_alpha(&chain, &[0], &[2])?;
    writeln!(
        out,
        "alpha with A1 = A0, A2 independent: alpha(0;1)={alpha} alpha(0;2)={independent}"
    )
    .unwrap();
    Ok(out)
}
