//! Exact enumeration on tiny discrete fields.
//!
//! Every quantity is computed over the full configuration space in rational
//! arithmetic, so dyadic cell laws give exact answers that Monte Carlo
//! estimators can be checked against.

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub const MAX_CELLS: usize = 12;
pub const MAX_ATOMS_PER_CELL: usize = 4;
pub const MAX_CONFIGURATIONS: usize = 1 << 20;
pub const MAX_SIGMA_ATOMS: usize = 16;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses `"a/b"` or an integer `"a"`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    text.trim()
        .parse::<Rational>()
        .map_err(|_| Error::Format(format!("`{text}` is not a rational number a/b")))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Finite-support law of one cell: `(value, probability)` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLaw {
    atoms: Vec<(Rational, Rational)>,
}

impl CellLaw {
    pub fn bernoulli(p: Rational) -> Result<Self> {
        Self::finite(vec![(Rational::zero(), Rational::one() - &p), (Rational::one(), p)])
    }

    pub fn finite(atoms: Vec<(Rational, Rational)>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() > MAX_ATOMS_PER_CELL {
            return Err(Error::invalid(
                "cell_laws",
                format!("support size must lie in 1..={MAX_ATOMS_PER_CELL}, got {}", atoms.len()),
            ));
        }
        if atoms.iter().any(|(_, p)| p.is_negative()) {
            return Err(Error::invalid("cell_laws", "negative probability"));
        }
        let total: Rational = atoms.iter().map(|(_, p)| p.clone()).sum();
        if !total.is_one() {
            return Err(Error::invalid("cell_laws", format!("probabilities sum to {total}, not 1")));
        }
        Ok(CellLaw { atoms })
    }

    pub fn atoms(&self) -> &[(Rational, Rational)] {
        &self.atoms
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (v, p) in &self.atoms {
            acc += to_f64(p);
            if u < acc {
                return to_f64(v);
            }
        }
        // Rounding left a sliver above the last cumulative sum.
        let (v, _) = self
            .atoms
            .iter()
            .rev()
            .find(|(_, p)| !p.is_zero())
            .expect("probabilities sum to one");
        to_f64(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dependency {
    Iid,
    /// `cell → source`: the cell is an exact copy of its source.
    DuplicateOf(BTreeMap<usize, usize>),
}

/// A field on at most [`MAX_CELLS`] cells with an enumerable law.
///
/// Free cells are independent with their own laws; duplicated cells copy
/// their (transitive) source and their own law entry is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyFieldSpec {
    laws: Vec<CellLaw>,
    dependency: Dependency,
    roots: Vec<usize>,
}

impl TinyFieldSpec {
    pub fn new(laws: Vec<CellLaw>, dependency: Dependency) -> Result<Self> {
        let n = laws.len();
        if n == 0 || n > MAX_CELLS {
            return Err(Error::invalid("n", format!("must lie in 1..={MAX_CELLS}, got {n}")));
        }
        let mut roots: Vec<usize> = (0..n).collect();
        if let Dependency::DuplicateOf(map) = &dependency {
            for (&cell, &source) in map {
                if cell >= n || source >= n {
                    return Err(Error::invalid("dependency", format!("cell {cell} → {source} out of range")));
                }
            }
            for (cell, root) in roots.iter_mut().enumerate() {
                let mut cur = cell;
                for _ in 0..=n {
                    match map.get(&cur) {
                        Some(&next) => cur = next,
                        None => break,
                    }
                }
                if map.contains_key(&cur) {
                    return Err(Error::invalid("dependency", format!("duplicate chain from cell {cell} is cyclic")));
                }
                *root = cur;
            }
        }
        let spec = TinyFieldSpec { laws, dependency, roots };
        let count = spec
            .free_cells()
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(spec.laws[c].atoms.len()))
            .filter(|&c| c <= MAX_CONFIGURATIONS);
        if count.is_none() {
            return Err(Error::CapExceeded(format!(
                "more than {MAX_CONFIGURATIONS} configurations"
            )));
        }
        Ok(spec)
    }

    pub fn iid(laws: Vec<CellLaw>) -> Result<Self> {
        Self::new(laws, Dependency::Iid)
    }

    pub fn n(&self) -> usize {
        self.laws.len()
    }

    pub fn dependency(&self) -> &Dependency {
        &self.dependency
    }

    pub fn is_product(&self) -> bool {
        self.roots.iter().enumerate().all(|(c, &r)| c == r)
    }

    /// The free cell a cell copies (itself when free).
    pub fn root(&self, cell: usize) -> usize {
        self.roots[cell]
    }

    pub fn free_cells(&self) -> Vec<usize> {
        (0..self.n()).filter(|&c| self.roots[c] == c).collect()
    }

    /// All configurations with positive probability, in mixed-radix order
    /// over the free cells (last free cell fastest).
    pub fn configurations(&self) -> Vec<(Vec<Rational>, Rational)> {
        let free = self.free_cells();
        let sizes: Vec<usize> = free.iter().map(|&c| self.laws[c].atoms.len()).collect();
        let total: usize = sizes.iter().product();
        let mut out = Vec::new();
        let mut digits = vec![0usize; free.len()];
        for _ in 0..total {
            let mut prob = Rational::one();
            let mut free_values = vec![Rational::zero(); self.n()];
            for (k, &c) in free.iter().enumerate() {
                let (v, p) = &self.laws[c].atoms[digits[k]];
                prob *= p;
                free_values[c] = v.clone();
            }
            if !prob.is_zero() {
                let values = (0..self.n()).map(|c| free_values[self.roots[c]].clone()).collect();
                out.push((values, prob));
            }
            for k in (0..free.len()).rev() {
                digits[k] += 1;
                if digits[k] < sizes[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
        out
    }

    /// One realization: free cells drawn in index order, copies filled in.
    pub fn sample_values<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut free = vec![0.0; self.n()];
        for c in self.free_cells() {
            free[c] = self.laws[c].draw(rng);
        }
        (0..self.n()).map(|c| free[self.roots[c]]).collect()
    }
}

/// Builtin functionals of a tiny configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum TinyFunctional {
    Sum,
    CellProduct,
    /// Number of cells strictly above `level`.
    ThresholdCount { level: Rational },
    Max,
    /// The configuration padded with zeros to a periodic row of `len` cells;
    /// the row average of `a(x)·a(x+lag)` minus the squared row average.
    LagCovariance { lag: usize, len: usize },
    Constant(Rational),
}

impl TinyFunctional {
    pub fn eval(&self, a: &[Rational]) -> Rational {
        match self {
            TinyFunctional::Sum => a.iter().sum(),
            TinyFunctional::CellProduct => a.iter().product(),
            TinyFunctional::ThresholdCount { level } => {
                Rational::from_integer(BigInt::from(a.iter().filter(|v| *v > level).count()))
            }
            TinyFunctional::Max => a.iter().max().cloned().unwrap_or_else(Rational::zero),
            TinyFunctional::LagCovariance { lag, len } => {
                let len = (*len).max(a.len());
                let at = |i: usize| a.get(i % len).cloned().unwrap_or_else(Rational::zero);
                let n = Rational::from_integer(BigInt::from(len));
                let cross: Rational = (0..len).map(|x| at(x) * at(x + lag)).sum();
                let mean: Rational = a.iter().sum::<Rational>() / &n;
                cross / n - &mean * &mean
            }
            TinyFunctional::Constant(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Rational,
    pub variance: Rational,
    pub fourth_central: Rational,
}

pub fn exact_moments(spec: &TinyFieldSpec, x: &TinyFunctional) -> Moments {
    let configs = spec.configurations();
    let values: Vec<(Rational, &Rational)> = configs.iter().map(|(a, p)| (x.eval(a), p)).collect();
    let mean: Rational = values.iter().map(|(v, p)| v * *p).sum();
    let central = |k: i32| -> Rational {
        values
            .iter()
            .map(|(v, p)| num::pow::pow(v - &mean, k as usize) * *p)
            .sum()
    };
    Moments {
        variance: central(2),
        fourth_central: central(4),
        mean,
    }
}

/// Oscillation of `X` over resamplings inside `S`, per exterior configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Oscillation {
    /// Exterior values (cells outside `S`, ascending) → osc, ascending by key.
    pub table: Vec<(Vec<Rational>, Rational)>,
    pub expected_square: Rational,
}

pub fn exact_oscillation(spec: &TinyFieldSpec, x: &TinyFunctional, s: &[usize]) -> Result<Oscillation> {
    check_subset(spec, s, "S")?;
    let exterior: Vec<usize> = (0..spec.n()).filter(|c| !s.contains(c)).collect();
    // exterior key → (P, max, min)
    let mut groups: BTreeMap<Vec<Rational>, (Rational, Rational, Rational)> = BTreeMap::new();
    for (a, p) in spec.configurations() {
        let key: Vec<Rational> = exterior.iter().map(|&c| a[c].clone()).collect();
        let v = x.eval(&a);
        groups
            .entry(key)
            .and_modify(|(q, hi, lo)| {
                *q += &p;
                if v > *hi {
                    *hi = v.clone();
                }
                if v < *lo {
                    *lo = v.clone();
                }
            })
            .or_insert_with(|| (p.clone(), v.clone(), v.clone()));
    }
    let mut expected_square = Rational::zero();
    let table = groups
        .into_iter()
        .map(|(key, (p, hi, lo))| {
            let osc = hi - lo;
            expected_square += &osc * &osc * p;
            (key, osc)
        })
        .collect();
    Ok(Oscillation { table, expected_square })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfronStein {
    pub variance: Rational,
    pub rhs: Rational,
    pub holds: bool,
}

/// `Var[X] ≤ ½ Σ_cells E[osc_cell²]` for product laws.
pub fn efron_stein_check(spec: &TinyFieldSpec, x: &TinyFunctional) -> Result<EfronStein> {
    if !spec.is_product() {
        return Err(Error::Unsupported("Efron–Stein check needs a product law".into()));
    }
    let variance = exact_moments(spec, x).variance;
    let mut sum = Rational::zero();
    for c in 0..spec.n() {
        sum += exact_oscillation(spec, x, &[c])?.expected_square;
    }
    let rhs = sum / rat(2, 1);
    Ok(EfronStein {
        holds: variance <= rhs,
        variance,
        rhs,
    })
}

fn check_subset(spec: &TinyFieldSpec, s: &[usize], name: &'static str) -> Result<()> {
    if s.is_empty() {
        return Err(Error::invalid(name, "must be nonempty"));
    }
    if let Some(&c) = s.iter().find(|&&c| c >= spec.n()) {
        return Err(Error::invalid(name, format!("cell {c} out of range")));
    }
    Ok(())
}

/// Joint law of the restrictions to `S` and `T`: atom lists and joint masses.
struct JointTable {
    p_s: Vec<Rational>,
    p_t: Vec<Rational>,
    joint: Vec<Vec<Rational>>,
    s_keys: Vec<Vec<Rational>>,
    t_keys: Vec<Vec<Rational>>,
}

fn joint_table(spec: &TinyFieldSpec, s: &[usize], t: &[usize]) -> Result<JointTable> {
    check_subset(spec, s, "S")?;
    check_subset(spec, t, "T")?;
    if s.iter().any(|c| t.contains(c)) {
        return Err(Error::invalid("T", "must be disjoint from S"));
    }
    let mut map: BTreeMap<(Vec<Rational>, Vec<Rational>), Rational> = BTreeMap::new();
    for (a, p) in spec.configurations() {
        let ks = s.iter().map(|&c| a[c].clone()).collect();
        let kt = t.iter().map(|&c| a[c].clone()).collect();
        *map.entry((ks, kt)).or_insert_with(Rational::zero) += p;
    }
    let mut s_keys: Vec<Vec<Rational>> = map.keys().map(|(a, _)| a.clone()).collect();
    let mut t_keys: Vec<Vec<Rational>> = map.keys().map(|(_, b)| b.clone()).collect();
    s_keys.sort();
    s_keys.dedup();
    t_keys.sort();
    t_keys.dedup();
    for (keys, name) in [(&s_keys, "S"), (&t_keys, "T")] {
        if keys.len() > MAX_SIGMA_ATOMS {
            return Err(Error::CapExceeded(format!(
                "{} atoms in σ(A|{name}), at most {MAX_SIGMA_ATOMS} allowed",
                keys.len()
            )));
        }
    }
    let mut joint = vec![vec![Rational::zero(); t_keys.len()]; s_keys.len()];
    for ((ks, kt), p) in map {
        let i = s_keys.binary_search(&ks).expect("collected");
        let j = t_keys.binary_search(&kt).expect("collected");
        joint[i][j] = p;
    }
    let p_s = joint.iter().map(|row| row.iter().sum()).collect();
    let p_t = (0..t_keys.len()).map(|j| joint.iter().map(|row| row[j].clone()).sum()).collect();
    Ok(JointTable {
        p_s,
        p_t,
        joint,
        s_keys,
        t_keys,
    })
}

/// `sup |P[G₁∩G₂] − P[G₁]P[G₂]|` over all `G₁ ∈ σ(A|_S)`, `G₂ ∈ σ(A|_T)`.
///
/// For fixed `G₁` the sup over `G₂` is attained by collecting the `T`-atoms
/// where the defect has one sign; both signs give the same total, half the
/// absolute sum. So only `G₁` needs enumerating.
pub fn exact_alpha(spec: &TinyFieldSpec, s: &[usize], t: &[usize]) -> Result<Rational> {
    let tab = joint_table(spec, s, t)?;
    let ns = tab.p_s.len();
    let mut best = Rational::zero();
    for mask in 0u32..(1u32 << ns) {
        let mut p_g = Rational::zero();
        let mut col = vec![Rational::zero(); tab.p_t.len()];
        for i in (0..ns).filter(|i| mask >> i & 1 == 1) {
            p_g += &tab.p_s[i];
            for (c, q) in col.iter_mut().zip(&tab.joint[i]) {
                *c += q;
            }
        }
        let total: Rational = col
            .iter()
            .zip(&tab.p_t)
            .map(|(c, pt)| (c - &p_g * pt).abs())
            .sum();
        let val = total / rat(2, 1);
        if val > best {
            best = val;
        }
    }
    Ok(best)
}

/// The same sup restricted to threshold events `{mean of A over S ≥ level}`
/// and `{mean of A over T ≥ level'}` with levels from `levels`.
pub fn exact_threshold_alpha(spec: &TinyFieldSpec, s: &[usize], t: &[usize], levels: &[Rational]) -> Result<Rational> {
    let tab = joint_table(spec, s, t)?;
    let mean = |k: &[Rational]| k.iter().sum::<Rational>() / Rational::from_integer(BigInt::from(k.len()));
    let s_means: Vec<Rational> = tab.s_keys.iter().map(|k| mean(k)).collect();
    let t_means: Vec<Rational> = tab.t_keys.iter().map(|k| mean(k)).collect();
    let mut best = Rational::zero();
    for l1 in levels {
        for l2 in levels {
            let mut p1 = Rational::zero();
            let mut p12 = Rational::zero();
            for (i, _) in s_means.iter().enumerate().filter(|(_, m)| *m >= l1) {
                p1 += &tab.p_s[i];
                for (j, _) in t_means.iter().enumerate().filter(|(_, m)| *m >= l2) {
                    p12 += &tab.joint[i][j];
                }
            }
            let p2: Rational = t_means
                .iter()
                .zip(&tab.p_t)
                .filter(|(m, _)| *m >= l2)
                .map(|(_, p)| p.clone())
                .sum();
            let val = (p12 - p1 * p2).abs();
            if val > best {
                best = val;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> CellLaw {
        CellLaw::bernoulli(rat(1, 2)).unwrap()
    }

    fn iid(n: usize) -> TinyFieldSpec {
        TinyFieldSpec::iid(vec![half(); n]).unwrap()
    }

    fn dup(n: usize, pairs: &[(usize, usize)]) -> TinyFieldSpec {
        TinyFieldSpec::new(vec![half(); n], Dependency::DuplicateOf(pairs.iter().copied().collect())).unwrap()
    }

    #[test]
    fn moments_by_hand() {
        let m = exact_moments(&iid(2), &TinyFunctional::Sum);
        assert_eq!((m.mean, m.variance), (rat(1, 1), rat(1, 2)));
        assert_eq!(m.fourth_central, rat(1, 2));
        let m = exact_moments(&iid(3), &TinyFunctional::Constant(rat(7, 3)));
        assert_eq!(m.variance, rat(0, 1));
        let m = exact_moments(&dup(2, &[(1, 0)]), &TinyFunctional::Sum);
        assert_eq!(m.variance, rat(1, 1));
    }

    #[test]
    fn oscillation_by_hand() {
        let osc = exact_oscillation(&iid(2), &TinyFunctional::Sum, &[0]).unwrap();
        assert!(osc.table.iter().all(|(_, o)| *o == rat(1, 1)));
        let osc = exact_oscillation(&iid(3), &TinyFunctional::Sum, &[0, 2]).unwrap();
        assert!(osc.table.iter().all(|(_, o)| *o == rat(2, 1)));

        let prod = exact_oscillation(&iid(2), &TinyFunctional::CellProduct, &[0]).unwrap();
        for (ext, o) in &prod.table {
            assert_eq!(o, &ext[0]);
        }
        assert_eq!(prod.expected_square, rat(1, 2));
    }

    #[test]
    fn independent_functional_has_zero_oscillation() {
        let spec = iid(3);
        let osc = exact_oscillation(&spec, &TinyFunctional::Constant(rat(1, 1)), &[1]).unwrap();
        assert!(osc.table.iter().all(|(_, o)| o.is_zero()));
    }

    #[test]
    fn efron_stein_by_hand() {
        let es = efron_stein_check(&iid(2), &TinyFunctional::Sum).unwrap();
        assert_eq!((es.variance, es.rhs, es.holds), (rat(1, 2), rat(1, 1), true));
        let es = efron_stein_check(&iid(2), &TinyFunctional::Constant(rat(3, 1))).unwrap();
        assert!(es.holds && es.rhs.is_zero());
        assert!(matches!(
            efron_stein_check(&dup(2, &[(1, 0)]), &TinyFunctional::Sum),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn alpha_by_hand() {
        assert!(exact_alpha(&iid(4), &[0, 1], &[2, 3]).unwrap().is_zero());
        assert_eq!(exact_alpha(&dup(2, &[(1, 0)]), &[0], &[1]).unwrap(), rat(1, 4));
        assert_eq!(exact_alpha(&dup(3, &[(1, 0)]), &[0], &[1, 2]).unwrap(), rat(1, 4));
    }

    #[test]
    fn threshold_alpha_at_most_alpha() {
        let spec = TinyFieldSpec::new(
            vec![half(), CellLaw::bernoulli(rat(1, 4)).unwrap(), half(), half()],
            Dependency::DuplicateOf([(2, 1)].into_iter().collect()),
        )
        .unwrap();
        let levels = [rat(1, 2), rat(1, 1)];
        let full = exact_alpha(&spec, &[0, 1], &[2, 3]).unwrap();
        let thr = exact_threshold_alpha(&spec, &[0, 1], &[2, 3], &levels).unwrap();
        assert!(thr <= full && thr.is_positive());
    }

    #[test]
    fn rejects_cycles_and_caps() {
        let cyc = TinyFieldSpec::new(vec![half(); 2], Dependency::DuplicateOf([(0, 1), (1, 0)].into_iter().collect()));
        assert!(cyc.is_err());
        assert!(TinyFieldSpec::iid(vec![half(); 13]).is_err());
        let four = CellLaw::finite((0..4).map(|v| (rat(v, 1), rat(1, 4))).collect()).unwrap();
        assert!(matches!(TinyFieldSpec::iid(vec![four; 11]), Err(Error::CapExceeded(_))));
        assert!(CellLaw::finite(vec![(rat(0, 1), rat(1, 3))]).is_err());
    }

    #[test]
    fn alpha_caps_sigma_atoms() {
        let four = CellLaw::finite((0..4).map(|v| (rat(v, 1), rat(1, 4))).collect()).unwrap();
        let spec = TinyFieldSpec::iid(vec![four; 4]).unwrap();
        assert!(exact_alpha(&spec, &[0, 1], &[2]).is_ok());
        assert!(matches!(exact_alpha(&spec, &[0, 1, 2], &[3]), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn lag_covariance_of_padded_row() {
        // a = (1, 1) padded to length 4: cross = 1/4, mean = 1/2.
        let f = TinyFunctional::LagCovariance { lag: 1, len: 4 };
        assert_eq!(f.eval(&[rat(1, 1), rat(1, 1)]), rat(0, 1));
        let f = TinyFunctional::LagCovariance { lag: 0, len: 4 };
        assert_eq!(f.eval(&[rat(1, 1), rat(0, 1)]), rat(3, 16));
    }

    #[test]
    fn sampling_respects_duplicates() {
        let spec = dup(4, &[(3, 0), (2, 3)]);
        let mut rng = crate::rng::stream(1);
        for _ in 0..20 {
            let v = spec.sample_values(&mut rng);
            assert_eq!(v[0], v[2]);
            assert_eq!(v[0], v[3]);
        }
    }
}
