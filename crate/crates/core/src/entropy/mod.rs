//! Φ-entropy calculus on finite joints.
//!
//! Everything is computed per support cell: a function is a vector of
//! values aligned with [`JointDistribution::probs`], and conditioning on a
//! variable set is a [`Partition`] of the cells. Sums run in cell order with
//! compensated accumulation, so results do not depend on the caller.

mod dist;

pub use dist::{validate_channel, GridSpec, JointDistribution, Partition, RandomFunction, MASS_TOL};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::numeric::{csum, CompensatedSum};
use crate::phi::PhiSpec;
use crate::{Error, Result};

/// Tolerance for the conditional independence checks guarding the inequalities.
pub const CI_TOL: f64 = 1e-10;

/// Cells whose conditioning mass falls below this are skipped in CI residuals.
pub const MASS_FLOOR: f64 = 1e-14;

/// Inequalities are reported as holding when `lhs − rhs ≥ −HOLD_TOL`.
pub const HOLD_TOL: f64 = 1e-10;

/// Per-cell 𝔼[f | partition]. Block means are clamped to the block's value
/// range so rounding never pushes them outside dom Φ.
pub fn cond_mean(probs: &[f64], values: &[f64], part: &Partition) -> Vec<f64> {
    let nb = part.blocks();
    let mut mass = vec![CompensatedSum::new(); nb];
    let mut moment = vec![CompensatedSum::new(); nb];
    let mut lo = vec![f64::INFINITY; nb];
    let mut hi = vec![f64::NEG_INFINITY; nb];
    for (i, (&p, &v)) in probs.iter().zip(values).enumerate() {
        let b = part.block_of(i);
        mass[b].add(p);
        moment[b].add(p * v);
        lo[b] = lo[b].min(v);
        hi[b] = hi[b].max(v);
    }
    let means: Vec<f64> = (0..nb)
        .map(|b| (moment[b].value() / mass[b].value()).clamp(lo[b], hi[b]))
        .collect();
    (0..values.len()).map(|i| means[part.block_of(i)]).collect()
}

/// H_Φ(f | partition) = Σ p Φ(f) − Σ_b p(b) Φ(𝔼[f | b]) over support cells.
pub fn h_phi(phi: &PhiSpec, probs: &[f64], values: &[f64], part: &Partition) -> f64 {
    let means = cond_mean(probs, values, part);
    csum(
        probs
            .iter()
            .zip(values)
            .zip(&means)
            .map(|((&p, &v), &m)| p * phi.value(v) - p * phi.value(m)),
    )
}

/// Per-cell values of `f`, checked against dom Φ.
pub fn values_in_domain(phi: &PhiSpec, dist: &JointDistribution, f: &RandomFunction) -> Result<Vec<f64>> {
    let vals = dist.evaluate(f)?;
    for (i, &v) in vals.iter().enumerate() {
        phi.ensure_in_domain(v, || dist.outcome_label(i))?;
    }
    Ok(vals)
}

/// 𝔼[f | cond] as a function of `cond`. Outcomes of `cond` with zero mass
/// get the unconditional mean.
pub fn conditional_expectation(
    dist: &JointDistribution,
    f: &RandomFunction,
    cond: &[&str],
) -> Result<RandomFunction> {
    let vals = dist.evaluate(f)?;
    let idx = dist.var_indices(cond)?;
    let probs = dist.probs();
    let total_mean = csum(probs.iter().zip(&vals).map(|(p, v)| p * v));
    let cells: usize = idx.iter().map(|&i| dist.sizes()[i]).product();
    let per_cell = cond_mean(probs, &vals, &dist.partition(&idx));
    let mut table: Vec<f64> = vec![total_mean; cells];
    for (i, &m) in per_cell.iter().enumerate() {
        table[dist.sub_index(i, &idx)] = m;
    }
    RandomFunction::new(cond.iter().map(|s| s.to_string()).collect(), table)
}

/// H_Φ(f).
pub fn phi_entropy(phi: &PhiSpec, dist: &JointDistribution, f: &RandomFunction) -> Result<f64> {
    let vals = values_in_domain(phi, dist, f)?;
    Ok(h_phi(phi, dist.probs(), &vals, &Partition::trivial(vals.len())))
}

/// H_Φ(f | cond).
pub fn conditional_phi_entropy(
    phi: &PhiSpec,
    dist: &JointDistribution,
    f: &RandomFunction,
    cond: &[&str],
) -> Result<f64> {
    let vals = values_in_domain(phi, dist, f)?;
    Ok(h_phi(phi, dist.probs(), &vals, &dist.partition_by(cond)?))
}

/// H_Φ(𝔼[f | inner] | outer) from per-cell values.
pub fn h_of_cond_mean(
    phi: &PhiSpec,
    probs: &[f64],
    values: &[f64],
    inner: &Partition,
    outer: &Partition,
) -> f64 {
    h_phi(phi, probs, &cond_mean(probs, values, inner), outer)
}

/// The three chain-rule identities.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainSpec {
    /// H(f) = H(f|X) + H(𝔼[f|X]).
    Cr1 { x: Vec<String> },
    /// H(𝔼[f|X₁…Xₙ]) = Σᵢ H(𝔼[f|X₁…Xᵢ] | X₁…Xᵢ₋₁).
    CrN { seq: Vec<Vec<String>> },
    /// H(f|X) = H(f|XY) + H(𝔼[f|XY]|X).
    Cr2 { x: Vec<String>, y: Vec<String> },
}

/// |LHS − RHS| of each requested identity.
pub fn chain_rule_residuals(
    phi: &PhiSpec,
    dist: &JointDistribution,
    f: &RandomFunction,
    chains: &[ChainSpec],
) -> Result<Vec<f64>> {
    let vals = values_in_domain(phi, dist, f)?;
    let p = dist.probs();
    let trivial = Partition::trivial(vals.len());
    chains
        .iter()
        .map(|chain| {
            Ok(match chain {
                ChainSpec::Cr1 { x } => {
                    let px = dist.partition_by(x)?;
                    let lhs = h_phi(phi, p, &vals, &trivial);
                    let rhs = h_phi(phi, p, &vals, &px) + h_of_cond_mean(phi, p, &vals, &px, &trivial);
                    (lhs - rhs).abs()
                }
                ChainSpec::CrN { seq } => {
                    let mut prefix: Vec<String> = Vec::new();
                    let mut prev = trivial.clone();
                    let mut rhs = CompensatedSum::new();
                    for group in seq {
                        prefix.extend(group.iter().cloned());
                        let cur = dist.partition_by(&prefix)?;
                        rhs.add(h_of_cond_mean(phi, p, &vals, &cur, &prev));
                        prev = cur;
                    }
                    let lhs = h_of_cond_mean(phi, p, &vals, &prev, &trivial);
                    (lhs - rhs.value()).abs()
                }
                ChainSpec::Cr2 { x, y } => {
                    let px = dist.partition_by(x)?;
                    let pxy = px.join(&dist.partition_by(y)?);
                    let lhs = h_phi(phi, p, &vals, &px);
                    let rhs = h_phi(phi, p, &vals, &pxy) + h_of_cond_mean(phi, p, &vals, &pxy, &px);
                    (lhs - rhs).abs()
                }
            })
        })
        .collect()
}

/// Max over `(mid, right)` outcomes with mass above [`MASS_FLOOR`] of
/// TV(p(left | mid, right), p(left | mid)). Zero means left → mid → right.
pub fn ci_residual<S: AsRef<str>>(
    dist: &JointDistribution,
    left: &[S],
    mid: &[S],
    right: &[S],
) -> Result<f64> {
    let l = dist.var_indices(left)?;
    let m = dist.var_indices(mid)?;
    let r = dist.var_indices(right)?;
    Ok(ci_residual_idx(dist, &l, &m, &r))
}

pub(crate) fn ci_residual_idx(dist: &JointDistribution, l: &[usize], m: &[usize], r: &[usize]) -> f64 {
    ci_residual_parts(dist.probs(), &dist.partition(l), &dist.partition(m), &dist.partition(r))
}

/// [`ci_residual`] with the three variable groups given as cell partitions.
pub fn ci_residual_parts(probs: &[f64], left: &Partition, mid: &Partition, right: &Partition) -> f64 {
    let mut p_lmr: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut p_mr: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut p_lm: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut p_m = vec![0.0; mid.blocks()];
    for (i, &p) in probs.iter().enumerate() {
        let (kl, km, kr) = (left.block_of(i), mid.block_of(i), right.block_of(i));
        *p_lmr.entry((kl, km, kr)).or_insert(0.0) += p;
        *p_mr.entry((km, kr)).or_insert(0.0) += p;
        *p_lm.entry((kl, km)).or_insert(0.0) += p;
        p_m[km] += p;
    }
    // TV = ½(Σ_{l in supp(m,r)} |a − b| + 1 − Σ_{l in supp(m,r)} b)
    let mut acc: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (&(kl, km, kr), &pj) in &p_lmr {
        let pmr = p_mr[&(km, kr)];
        if pmr < MASS_FLOOR {
            continue;
        }
        let a = pj / pmr;
        let b = p_lm[&(kl, km)] / p_m[km];
        let e = acc.entry((km, kr)).or_insert((0.0, 0.0));
        e.0 += (a - b).abs();
        e.1 += b;
    }
    acc.values()
        .map(|(d, b)| 0.5 * (d + (1.0 - b).max(0.0)))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl InequalityReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let slack = lhs - rhs;
        Self {
            lhs,
            rhs,
            slack,
            holds: slack >= -HOLD_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lemma1Part {
    I,
    II,
    III,
}

/// Variable groups playing X, Y and Z. `z` is ignored by part (i).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Roles {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub z: Vec<String>,
}

impl Roles {
    pub fn new(x: &[&str], y: &[&str], z: &[&str]) -> Self {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            x: own(x),
            y: own(y),
            z: own(z),
        }
    }
}

/// (i) H(f|X) ≥ H(𝔼[f|Y]) for X ⫫ Y;
/// (ii) H(f|XZ) ≥ H(𝔼[f|YZ] | Z) for X → Z → Y;
/// (iii) H(𝔼[f|Z]) + H(f|XZ) ≥ H(𝔼[f|YZ]) for X → Z → Y.
pub fn lemma1_check(
    phi: &PhiSpec,
    dist: &JointDistribution,
    f: &RandomFunction,
    part: Lemma1Part,
    roles: &Roles,
) -> Result<InequalityReport> {
    let (what, residual) = match part {
        Lemma1Part::I => ("X independent of Y", ci_residual(dist, &roles.y, &[], &roles.x)?),
        _ => ("Markov chain X → Z → Y", ci_residual(dist, &roles.y, &roles.z, &roles.x)?),
    };
    if residual > CI_TOL {
        return Err(Error::Precondition {
            what: what.to_string(),
            residual,
        });
    }
    let vals = values_in_domain(phi, dist, f)?;
    let p = dist.probs();
    let trivial = Partition::trivial(vals.len());
    let px = dist.partition_by(&roles.x)?;
    let py = dist.partition_by(&roles.y)?;
    let report = match part {
        Lemma1Part::I => InequalityReport::new(
            h_phi(phi, p, &vals, &px),
            h_of_cond_mean(phi, p, &vals, &py, &trivial),
        ),
        Lemma1Part::II | Lemma1Part::III => {
            let pz = dist.partition_by(&roles.z)?;
            let pxz = px.join(&pz);
            let pyz = py.join(&pz);
            let h_f_xz = h_phi(phi, p, &vals, &pxz);
            if part == Lemma1Part::II {
                InequalityReport::new(h_f_xz, h_of_cond_mean(phi, p, &vals, &pyz, &pz))
            } else {
                InequalityReport::new(
                    h_of_cond_mean(phi, p, &vals, &pz, &trivial) + h_f_xz,
                    h_of_cond_mean(phi, p, &vals, &pyz, &trivial),
                )
            }
        }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::make_phi;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn uniform2() -> JointDistribution {
        JointDistribution::uniform(names(&["X", "Y"]), vec![2, 2]).unwrap()
    }

    #[test]
    fn cond_expectation_of_product() {
        let d = uniform2();
        let f = RandomFunction::from_fn(&d, &["X", "Y"], |c| (c[0] * c[1]) as f64).unwrap();
        let g = conditional_expectation(&d, &f, &["X"]).unwrap();
        assert_eq!(g.table, vec![0.0, 0.5]);
        let all = conditional_expectation(&d, &f, &["X", "Y"]).unwrap();
        assert_eq!(all.table, f.table);
        let none = conditional_expectation(&d, &f, &[]).unwrap();
        assert_eq!(none.table, vec![0.25]);
    }

    #[test]
    fn zero_mass_outcome_gets_unconditional_mean() {
        let d = JointDistribution::new(names(&["X", "Y"]), vec![2, 2], &[0.5, 0.5, 0.0, 0.0]).unwrap();
        let f = RandomFunction::from_fn(&d, &["Y"], |c| c[0] as f64 * 4.0).unwrap();
        let g = conditional_expectation(&d, &f, &["X"]).unwrap();
        assert_eq!(g.table, vec![2.0, 2.0]);
    }

    #[test]
    fn bernoulli_variance_and_xlogx() {
        let d = JointDistribution::uniform(names(&["X"]), vec![2]).unwrap();
        let sq = make_phi("power", Some(2.0)).unwrap();
        let f = RandomFunction::new(names(&["X"]), vec![0.0, 1.0]).unwrap();
        assert!((phi_entropy(&sq, &d, &f).unwrap() - 0.25).abs() < 1e-15);
        let xl = make_phi("xlogx", None).unwrap();
        let g = RandomFunction::new(names(&["X"]), vec![2.0, 0.0]).unwrap();
        // ½·2 ln 2 + 0 − 1·ln 1
        assert!((phi_entropy(&xl, &d, &g).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(phi_entropy(&xl, &d, &RandomFunction::constant(3.0)).unwrap(), 0.0);
    }

    #[test]
    fn conditional_entropy_examples() {
        let d = uniform2();
        let sq = make_phi("power", Some(2.0)).unwrap();
        let f = RandomFunction::from_fn(&d, &["X", "Y"], |c| (c[0] ^ c[1]) as f64).unwrap();
        assert!((conditional_phi_entropy(&sq, &d, &f, &["X"]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(conditional_phi_entropy(&sq, &d, &f, &["X", "Y"]).unwrap(), 0.0);
        assert_eq!(
            conditional_phi_entropy(&sq, &d, &f, &[]).unwrap(),
            phi_entropy(&sq, &d, &f).unwrap()
        );
    }

    #[test]
    fn domain_error_names_outcome() {
        let d = uniform2();
        let nl = make_phi("neg_log", None).unwrap();
        let f = RandomFunction::from_fn(&d, &["X", "Y"], |c| (c[0] + c[1]) as f64).unwrap();
        match phi_entropy(&nl, &d, &f) {
            Err(Error::OutsideDomain { outcome, .. }) => assert_eq!(outcome, "X=0,Y=0"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_support_is_zero() {
        let d = JointDistribution::new(names(&["X"]), vec![3], &[0.0, 1.0, 0.0]).unwrap();
        let xl = make_phi("xlogx", None).unwrap();
        let f = RandomFunction::new(names(&["X"]), vec![1.0, 5.0, 9.0]).unwrap();
        assert_eq!(phi_entropy(&xl, &d, &f).unwrap(), 0.0);
    }

    #[test]
    fn ci_residual_detects_dependence() {
        let d = uniform2();
        assert_eq!(ci_residual(&d, &["Y"], &[] as &[&str], &["X"]).unwrap(), 0.0);
        let e = JointDistribution::new(names(&["X", "Y"]), vec![2, 2], &[0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((ci_residual(&e, &["Y"], &[] as &[&str], &["X"]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ci_residual(&e, &["Y"], &["X"], &["X"]).unwrap(), 0.0);
    }

    #[test]
    fn lemma1_part_i_xor() {
        let d = uniform2();
        let sq = make_phi("power", Some(2.0)).unwrap();
        let f = RandomFunction::from_fn(&d, &["X", "Y"], |c| (c[0] ^ c[1]) as f64).unwrap();
        let r = lemma1_check(&sq, &d, &f, Lemma1Part::I, &Roles::new(&["X"], &["Y"], &[])).unwrap();
        assert!((r.lhs - 0.25).abs() < 1e-15);
        assert!(r.rhs.abs() < 1e-15);
        assert!(r.holds);
    }

    #[test]
    fn lemma1_rejects_dependent_roles() {
        let e = JointDistribution::new(names(&["X", "Y"]), vec![2, 2], &[0.4, 0.1, 0.1, 0.4]).unwrap();
        let sq = make_phi("power", Some(2.0)).unwrap();
        let f = RandomFunction::constant(1.0);
        assert!(matches!(
            lemma1_check(&sq, &e, &f, Lemma1Part::I, &Roles::new(&["X"], &["Y"], &[])),
            Err(Error::Precondition { .. })
        ));
    }
}
