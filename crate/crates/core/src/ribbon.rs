//! Φ-ribbon falsification for finite joints.
//!
//! A point (λ₁, λ₂) is outside the ribbon of (A; B) when some f(A, B) has
//! V(f) = λ₁H_Φ(𝔼[f|A]) + λ₂H_Φ(𝔼[f|B]) − H_Φ(f) > 0. The search maximizes V
//! over f tables; a verdict of `NoViolationFound` only means the budget in
//! the verdict found nothing.

use serde::Serialize;

use crate::entropy::{conditional_expectation, h_phi, JointDistribution, Partition, RandomFunction};
use crate::optim::{ascend, SearchOptions};
use crate::phi::PhiSpec;
use crate::{Error, GridSpec, Result};

/// V must reach this for a point to be certified out.
pub const CERT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RibbonPoint {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl RibbonPoint {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1.is_finite() && lambda2.is_finite()) || lambda1 < 0.0 || lambda2 < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ribbon point needs finite non-negative λ, got ({lambda1}, {lambda2})"
            )));
        }
        Ok(Self { lambda1, lambda2 })
    }

    pub fn swapped(&self) -> Self {
        Self {
            lambda1: self.lambda2,
            lambda2: self.lambda1,
        }
    }
}

impl std::str::FromStr for RibbonPoint {
    type Err = Error;

    /// `l1,l2`
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected l1,l2, got `{s}`"));
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        Self::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
    }
}

/// The points of `l1 × l2`, λ₁ outermost.
pub fn point_grid(l1: &GridSpec, l2: &GridSpec) -> Vec<RibbonPoint> {
    let mut out = Vec::with_capacity(l1.n * l2.n);
    for a in l1.points() {
        for b in l2.points() {
            out.push(RibbonPoint {
                lambda1: a,
                lambda2: b,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    CertifiedOut,
    NoViolationFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchBudget {
    pub restarts: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipVerdict {
    pub status: Status,
    pub witness_f: Option<RandomFunction>,
    /// Largest V found (re-evaluated through the entropy engine when certified).
    pub violation_margin: f64,
    pub search_budget: SearchBudget,
    /// Input pair (x, y) of the box cell that certified out, for box verdicts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<(usize, usize)>,
}

impl MembershipVerdict {
    pub fn is_out(&self) -> bool {
        self.status == Status::CertifiedOut
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RibbonOptions {
    /// Search box for f values; `None` uses [`PhiSpec::default_fbox`].
    pub fbox: Option<(f64, f64)>,
    pub search: SearchOptions,
    pub bisection_tol: f64,
    /// Upper end of the λ₁ bracket in boundary bisection.
    pub lambda1_max: f64,
}

impl Default for RibbonOptions {
    fn default() -> Self {
        Self {
            fbox: None,
            search: SearchOptions {
                restarts: 64,
                max_sweeps: 500,
                seed: 0,
                step_tol: 1e-12,
                stop_above: Some(10.0 * CERT_MARGIN),
                ..SearchOptions::default()
            },
            bisection_tol: 1e-4,
            lambda1_max: 2.0,
        }
    }
}

impl RibbonOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.search.seed = seed;
        self
    }
}

/// Support cells of (A, B) with block labels, ready for repeated V evaluation.
struct Objective<'a> {
    phi: &'a PhiSpec,
    probs: Vec<f64>,
    a_of: Vec<usize>,
    b_of: Vec<usize>,
    pa: Vec<f64>,
    pb: Vec<f64>,
    l1: f64,
    l2: f64,
    ma: Vec<f64>,
    mb: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(phi: &'a PhiSpec, joint: &JointDistribution, na: usize, pt: RibbonPoint) -> Self {
        let a_vars: Vec<usize> = (0..na).collect();
        let b_vars: Vec<usize> = (na..joint.vars().len()).collect();
        let pa_part = joint.partition(&a_vars);
        let pb_part = joint.partition(&b_vars);
        let probs = joint.probs().to_vec();
        let mut pa = vec![0.0; pa_part.blocks()];
        let mut pb = vec![0.0; pb_part.blocks()];
        for (i, p) in probs.iter().enumerate() {
            pa[pa_part.block_of(i)] += p;
            pb[pb_part.block_of(i)] += p;
        }
        Self {
            phi,
            a_of: pa_part.labels().to_vec(),
            b_of: pb_part.labels().to_vec(),
            ma: vec![0.0; pa.len()],
            mb: vec![0.0; pb.len()],
            pa,
            pb,
            probs,
            l1: pt.lambda1,
            l2: pt.lambda2,
        }
    }

    /// V(f) and the per-cell direction ∂V/∂fᵢ / pᵢ.
    fn value_dir(&mut self, f: &[f64], dir: &mut [f64]) -> f64 {
        let phi = self.phi;
        self.ma.iter_mut().for_each(|v| *v = 0.0);
        self.mb.iter_mut().for_each(|v| *v = 0.0);
        let mut m = 0.0;
        let mut e_phi = 0.0;
        for (i, (&p, &v)) in self.probs.iter().zip(f).enumerate() {
            self.ma[self.a_of[i]] += p * v;
            self.mb[self.b_of[i]] += p * v;
            m += p * v;
            e_phi += p * phi.value(v);
        }
        let (lo, hi) = f
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let m = m.clamp(lo, hi);
        let mut ha = 0.0;
        for (ma, &pa) in self.ma.iter_mut().zip(&self.pa) {
            *ma = (*ma / pa).clamp(lo, hi);
            ha += pa * phi.value(*ma);
        }
        let mut hb = 0.0;
        for (mb, &pb) in self.mb.iter_mut().zip(&self.pb) {
            *mb = (*mb / pb).clamp(lo, hi);
            hb += pb * phi.value(*mb);
        }
        let rest = 1.0 - self.l1 - self.l2;
        let d1m = phi.d1(m);
        for (i, &v) in f.iter().enumerate() {
            dir[i] = self.l1 * phi.d1(self.ma[self.a_of[i]]) + self.l2 * phi.d1(self.mb[self.b_of[i]])
                - phi.d1(v)
                + rest * d1m;
        }
        self.l1 * ha + self.l2 * hb - e_phi + rest * phi.value(m)
    }
}

fn names<S: AsRef<str>>(v: &[S]) -> Vec<String> {
    v.iter().map(|s| s.as_ref().to_string()).collect()
}

fn joint_ab<S: AsRef<str>>(dist: &JointDistribution, a: &[S], b: &[S]) -> Result<(JointDistribution, Vec<String>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("ribbon needs non-empty A and B".into()));
    }
    let mut all = names(a);
    for v in b {
        if all.iter().any(|x| x == v.as_ref()) {
            return Err(Error::InvalidArgument(format!(
                "variable `{}` in both A and B",
                v.as_ref()
            )));
        }
        all.push(v.as_ref().to_string());
    }
    Ok((dist.marginal(&all)?, all))
}

/// V(f) through the general entropy engine.
pub fn ribbon_violation<S: AsRef<str>>(
    phi: &PhiSpec,
    dist: &JointDistribution,
    a: &[S],
    b: &[S],
    pt: RibbonPoint,
    f: &RandomFunction,
) -> Result<f64> {
    let vals = crate::entropy::values_in_domain(phi, dist, f)?;
    let a_ref: Vec<&str> = a.iter().map(|s| s.as_ref()).collect();
    let b_ref: Vec<&str> = b.iter().map(|s| s.as_ref()).collect();
    let ea = conditional_expectation(dist, f, &a_ref)?;
    let eb = conditional_expectation(dist, f, &b_ref)?;
    let trivial = Partition::trivial(dist.support_len());
    let p = dist.probs();
    let h = |g: &RandomFunction| -> Result<f64> { Ok(h_phi(phi, p, &dist.evaluate(g)?, &trivial)) };
    Ok(pt.lambda1 * h(&ea)? + pt.lambda2 * h(&eb)? - h_phi(phi, p, &vals, &trivial))
}

/// Seeded search for f(A, B) with V(f) > 0. `a` and `b` are variable groups.
pub fn ribbon_membership<S: AsRef<str>>(
    phi: &PhiSpec,
    dist: &JointDistribution,
    a: &[S],
    b: &[S],
    pt: RibbonPoint,
    opts: &RibbonOptions,
) -> Result<MembershipVerdict> {
    let (joint, all) = joint_ab(dist, a, b)?;
    let fbox = opts.fbox.unwrap_or_else(|| phi.default_fbox());
    if !(fbox.0 < fbox.1) || !phi.domain().contains(fbox.0) || !phi.domain().contains(fbox.1) {
        return Err(Error::InvalidArgument(format!(
            "f box [{}, {}] is not inside dom {}",
            fbox.0,
            fbox.1,
            phi.label()
        )));
    }
    let n = joint.support_len();
    let mut obj = Objective::new(phi, &joint, a.len(), pt);
    // indicator functions of single A and B blocks seed the first restarts
    let mut starts = Vec::new();
    for labels in [obj.a_of.clone(), obj.b_of.clone()] {
        let blocks = labels.iter().max().map_or(0, |m| m + 1);
        for blk in 0..blocks {
            starts.push(
                labels
                    .iter()
                    .map(|&l| if l == blk { fbox.1 } else { fbox.0 })
                    .collect::<Vec<f64>>(),
            );
        }
    }
    starts.truncate(opts.search.restarts / 2);
    let bounds = vec![fbox; n];
    let out = ascend(|f, d| obj.value_dir(f, d), &bounds, &starts, &opts.search)?;
    let budget = SearchBudget {
        restarts: opts.search.restarts,
        max_steps: opts.search.max_sweeps,
        seed: opts.search.seed,
        evaluations: out.evaluations(),
    };
    if out.value >= CERT_MARGIN {
        let all_ref: Vec<&str> = all.iter().map(|s| s.as_str()).collect();
        let mut table_index = std::collections::HashMap::new();
        for i in 0..n {
            table_index.insert(joint.cell(i).to_vec(), out.x[i]);
        }
        let witness = RandomFunction::from_fn(&joint, &all_ref, |c| {
            let key: Vec<u32> = c.iter().map(|&x| x as u32).collect();
            *table_index.get(&key).unwrap_or(&fbox.0)
        })?;
        let margin = ribbon_violation(phi, &joint, &names(a), &names(b), pt, &witness)?;
        if margin >= CERT_MARGIN {
            return Ok(MembershipVerdict {
                status: Status::CertifiedOut,
                witness_f: Some(witness),
                violation_margin: margin,
                search_budget: budget,
                cell: None,
            });
        }
    }
    Ok(MembershipVerdict {
        status: Status::NoViolationFound,
        witness_f: None,
        violation_margin: out.value,
        search_budget: budget,
        cell: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub lambda2: f64,
    /// Largest λ₁ probed without a violation.
    pub lambda1_low: f64,
    /// Smallest λ₁ probed with a certified violation; equals `lambda1_low`
    /// when the bracket end was reached without one.
    pub lambda1_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryEstimate {
    pub points: Vec<BoundaryPoint>,
    /// inf over boundary points with λ₂ > 0 of (1 − λ₁_low)/λ₂.
    pub eta_estimate: f64,
}

/// Bisects λ₁ at each λ₂ of the grid between no-violation and certified-out.
pub fn ribbon_boundary<S: AsRef<str>>(
    phi: &PhiSpec,
    dist: &JointDistribution,
    a: &[S],
    b: &[S],
    lambda2_grid: &GridSpec,
    opts: &RibbonOptions,
) -> Result<BoundaryEstimate> {
    let mut points = Vec::with_capacity(lambda2_grid.n);
    let mut query = 0u64;
    let mut out_at = |l1: f64, l2: f64| -> Result<bool> {
        query += 1;
        let o = opts.with_seed(opts.search.seed.wrapping_add(query));
        Ok(ribbon_membership(phi, dist, a, b, RibbonPoint::new(l1, l2)?, &o)?.is_out())
    };
    for l2 in lambda2_grid.points() {
        let (mut lo, mut hi) = (0.0, opts.lambda1_max);
        let p = if out_at(lo, l2)? {
            BoundaryPoint {
                lambda2: l2,
                lambda1_low: 0.0,
                lambda1_high: 0.0,
            }
        } else if !out_at(hi, l2)? {
            BoundaryPoint {
                lambda2: l2,
                lambda1_low: hi,
                lambda1_high: hi,
            }
        } else {
            while hi - lo > opts.bisection_tol {
                let mid = 0.5 * (lo + hi);
                if out_at(mid, l2)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            BoundaryPoint {
                lambda2: l2,
                lambda1_low: lo,
                lambda1_high: hi,
            }
        };
        points.push(p);
    }
    let eta_estimate = points
        .iter()
        .filter(|p| p.lambda2 > 0.0)
        .map(|p| (1.0 - p.lambda1_low) / p.lambda2)
        .fold(f64::INFINITY, f64::min);
    Ok(BoundaryEstimate {
        points,
        eta_estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCheck {
    pub point: RibbonPoint,
    /// e.g. "in ⇒ in" or "out ⇒ out".
    pub implication: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<RandomFunction>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub checks: Vec<PointCheck>,
    pub fails: usize,
    pub pass: bool,
}

impl PropertyReport {
    pub fn new(property: &str, checks: Vec<PointCheck>) -> Self {
        let fails = checks.iter().filter(|c| !c.pass).count();
        Self {
            property: property.to_string(),
            checks,
            fails,
            pass: fails == 0,
        }
    }
}

/// Property checks compare ribbons inside [0, 1]². Outside it a constant
/// variable is in the ribbon for every λ, and local noise destroys that.
pub fn require_unit_square(pts: &[RibbonPoint]) -> Result<()> {
    match pts.iter().find(|p| p.lambda1 > 1.0 || p.lambda2 > 1.0) {
        Some(p) => Err(Error::InvalidArgument(format!(
            "property checks need λ in [0, 1]², got ({}, {})",
            p.lambda1, p.lambda2
        ))),
        None => Ok(()),
    }
}

fn two_vars(dist: &JointDistribution, what: &str) -> Result<(String, String)> {
    match dist.vars() {
        [a, b] => Ok((a.clone(), b.clone())),
        _ => Err(Error::InvalidArgument(format!("{what} must be a two-variable joint"))),
    }
}

fn renamed(dist: &JointDistribution, a: &str, b: &str) -> Result<JointDistribution> {
    JointDistribution::new(vec![a.into(), b.into()], dist.sizes().to_vec(), &dist.dense())
}

/// Tensorization on a point grid: in for both factors ⇒ no violation found
/// on the product (searched), out for a factor ⇒ out for the product (the
/// factor witness lifted to the product).
pub fn check_tensorization(
    phi: &PhiSpec,
    dist1: &JointDistribution,
    dist2: &JointDistribution,
    pts: &[RibbonPoint],
    opts: &RibbonOptions,
) -> Result<PropertyReport> {
    require_unit_square(pts)?;
    let (a1, b1) = two_vars(dist1, "first factor")?;
    let (a2, b2) = two_vars(dist2, "second factor")?;
    let d1 = renamed(dist1, "A1", "B1")?;
    let d2 = renamed(dist2, "A2", "B2")?;
    log::debug!("tensorization of ({a1};{b1}) and ({a2};{b2})");
    let prod = d1.product(&d2)?;
    let (pa, pb) = (["A1", "A2"], ["B1", "B2"]);
    let mut checks = Vec::with_capacity(pts.len());
    for (k, &pt) in pts.iter().enumerate() {
        let o = opts.with_seed(opts.search.seed.wrapping_add(3 * k as u64));
        let v1 = ribbon_membership(phi, &d1, &["A1"], &["B1"], pt, &o)?;
        let v2 = ribbon_membership(phi, &d2, &["A2"], &["B2"], pt, &o.with_seed(o.search.seed + 1))?;
        let factor_out = [(&v1, &d1), (&v2, &d2)]
            .into_iter()
            .find(|(v, _)| v.is_out());
        let check = match factor_out {
            Some((v, d)) => {
                let w = v.witness_f.as_ref().expect("certified verdicts carry a witness");
                let lifted = RandomFunction::new(d.vars().to_vec(), w.table.clone())?;
                let margin = ribbon_violation(phi, &prod, &pa, &pb, pt, &lifted)?;
                PointCheck {
                    point: pt,
                    implication: "out ⇒ out".into(),
                    pass: margin >= CERT_MARGIN,
                    witness: Some(lifted),
                    margin,
                }
            }
            None => {
                let vp = ribbon_membership(phi, &prod, &pa, &pb, pt, &o.with_seed(o.search.seed + 2))?;
                PointCheck {
                    point: pt,
                    implication: "in ⇒ in".into(),
                    pass: !vp.is_out(),
                    margin: vp.violation_margin,
                    witness: vp.witness_f,
                }
            }
        };
        checks.push(check);
    }
    Ok(PropertyReport::new("tensorization", checks))
}

/// Composes p(a₁, b₁)·p(a₂|a₁)·p(b₂|b₁) over `A1, B1, A2, B2`.
pub fn compose_local_channels(
    source: &JointDistribution,
    chan_a: &[Vec<f64>],
    chan_b: &[Vec<f64>],
) -> Result<JointDistribution> {
    two_vars(source, "source")?;
    let src = renamed(source, "A1", "B1")?;
    let out_a = chan_a.first().map_or(0, |r| r.len());
    let out_b = chan_b.first().map_or(0, |r| r.len());
    src.with_channel(&["A1"], "A2", out_a, chan_a)?
        .with_channel(&["B1"], "B2", out_b, chan_b)
}

/// Data processing on a point grid: no violation on (A₁; B₁) ⇒ no violation
/// found on (A₂; B₂).
pub fn check_data_processing(
    phi: &PhiSpec,
    source: &JointDistribution,
    chan_a: &[Vec<f64>],
    chan_b: &[Vec<f64>],
    pts: &[RibbonPoint],
    opts: &RibbonOptions,
) -> Result<PropertyReport> {
    require_unit_square(pts)?;
    let joint = compose_local_channels(source, chan_a, chan_b)?;
    let mut checks = Vec::new();
    for (k, &pt) in pts.iter().enumerate() {
        let o = opts.with_seed(opts.search.seed.wrapping_add(2 * k as u64));
        let v1 = ribbon_membership(phi, &joint, &["A1"], &["B1"], pt, &o)?;
        if v1.is_out() {
            continue;
        }
        let v2 = ribbon_membership(phi, &joint, &["A2"], &["B2"], pt, &o.with_seed(o.search.seed + 1))?;
        checks.push(PointCheck {
            point: pt,
            implication: "in ⇒ in".into(),
            pass: !v2.is_out(),
            margin: v2.violation_margin,
            witness: v2.witness_f,
        });
    }
    Ok(PropertyReport::new("data processing", checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::make_phi;

    fn joint(p: [f64; 4]) -> JointDistribution {
        JointDistribution::new(vec!["A".into(), "B".into()], vec![2, 2], &p).unwrap()
    }

    fn quick() -> RibbonOptions {
        RibbonOptions {
            search: SearchOptions {
                restarts: 16,
                max_sweeps: 300,
                ..RibbonOptions::default().search
            },
            ..RibbonOptions::default()
        }
    }

    #[test]
    fn trivial_corner_is_inside() {
        let xl = make_phi("xlogx", None).unwrap();
        let d = joint([0.4, 0.1, 0.2, 0.3]);
        let v = ribbon_membership(&xl, &d, &["A"], &["B"], RibbonPoint::new(1.0, 0.0).unwrap(), &quick()).unwrap();
        assert_eq!(v.status, Status::NoViolationFound);
    }

    #[test]
    fn copies_are_out_at_one_one() {
        let xl = make_phi("xlogx", None).unwrap();
        let d = joint([0.5, 0.0, 0.0, 0.5]);
        let v = ribbon_membership(&xl, &d, &["A"], &["B"], RibbonPoint::new(1.0, 1.0).unwrap(), &quick()).unwrap();
        assert!(v.is_out());
        assert!(v.violation_margin >= CERT_MARGIN);
    }

    #[test]
    fn independent_is_inside_at_one_one() {
        let sq = make_phi("power", Some(2.0)).unwrap();
        let d = joint([0.12, 0.28, 0.18, 0.42]);
        let v = ribbon_membership(&sq, &d, &["A"], &["B"], RibbonPoint::new(1.0, 1.0).unwrap(), &quick()).unwrap();
        assert_eq!(v.status, Status::NoViolationFound);
    }

    #[test]
    fn witness_reevaluates_under_larger_lambdas() {
        let xl = make_phi("xlogx", None).unwrap();
        let d = joint([0.4, 0.1, 0.1, 0.4]);
        let pt = RibbonPoint::new(0.9, 0.9).unwrap();
        let v = ribbon_membership(&xl, &d, &["A"], &["B"], pt, &quick()).unwrap();
        assert!(v.is_out());
        let w = v.witness_f.unwrap();
        let bigger = RibbonPoint::new(1.2, 1.0).unwrap();
        assert!(ribbon_violation(&xl, &d, &["A"], &["B"], bigger, &w).unwrap() >= v.violation_margin);
    }

    #[test]
    fn parse_point() {
        let p: RibbonPoint = "0.5, 1.25".parse().unwrap();
        assert_eq!((p.lambda1, p.lambda2), (0.5, 1.25));
        assert!("0.5".parse::<RibbonPoint>().is_err());
        assert!("-1,0".parse::<RibbonPoint>().is_err());
    }

    #[test]
    fn overlapping_groups_rejected() {
        let sq = make_phi("power", Some(2.0)).unwrap();
        let d = joint([0.25; 4]);
        assert!(ribbon_membership(&sq, &d, &["A"], &["A"], RibbonPoint::new(1.0, 1.0).unwrap(), &quick()).is_err());
    }

    #[test]
    fn copies_boundary_is_the_antidiagonal() {
        let sq = make_phi("power", Some(2.0)).unwrap();
        let d = joint([0.5, 0.0, 0.0, 0.5]);
        let g = GridSpec::new(0.2, 0.8, 4).unwrap();
        let est = ribbon_boundary(&sq, &d, &["A"], &["B"], &g, &quick()).unwrap();
        for p in &est.points {
            assert!((p.lambda1_low + p.lambda2 - 1.0).abs() <= 2e-4, "{p:?}");
        }
    }

    #[test]
    fn ribbon_eta_matches_sdpi_for_squares() {
        use crate::sdpi::{eta_phi, EtaOptions};
        let sq = make_phi("power", Some(2.0)).unwrap();
        let d = joint([0.35, 0.15, 0.1, 0.4]);
        let eta = eta_phi(&sq, &d, "A", "B", &EtaOptions::default()).unwrap().eta;
        let g = GridSpec::new(0.002, 0.01, 3).unwrap();
        let opts = RibbonOptions {
            bisection_tol: 1e-7,
            ..quick()
        };
        let est = ribbon_boundary(&sq, &d, &["A"], &["B"], &g, &opts).unwrap();
        assert!((est.eta_estimate - eta).abs() <= 2e-3, "{} vs {eta}", est.eta_estimate);
    }

    fn grid5() -> Vec<RibbonPoint> {
        let g = GridSpec::new(0.2, 1.0, 5).unwrap();
        point_grid(&g, &g)
    }

    #[test]
    fn noise_on_a_constant_leaves_the_unit_square() {
        let sq = make_phi("power", Some(2.0)).unwrap();
        let d = joint([0.5, 0.0, 0.5, 0.0]);
        let pt = RibbonPoint::new(0.2, 1.4).unwrap();
        assert!(!ribbon_membership(&sq, &d, &["A"], &["B"], pt, &quick()).unwrap().is_out());
        let noisy = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let p = compose_local_channels(&d, &id, &noisy).unwrap();
        assert!(ribbon_membership(&sq, &p, &["A2"], &["B2"], pt, &quick()).unwrap().is_out());
        assert!(check_data_processing(&sq, &d, &id, &noisy, &[pt], &quick()).is_err());
    }

    #[test]
    fn copies_tensorize_by_lifting() {
        let xl = make_phi("xlogx", None).unwrap();
        let d = joint([0.5, 0.0, 0.0, 0.5]);
        let pt = RibbonPoint::new(0.6, 0.6).unwrap();
        let r = check_tensorization(&xl, &d, &d, &[pt], &quick()).unwrap();
        assert!(r.pass);
        assert_eq!(r.checks[0].implication, "out ⇒ out");
    }

    #[test]
    fn tensorization_grid_has_no_fails() {
        let xl = make_phi("xlogx", None).unwrap();
        let d1 = joint([0.3, 0.2, 0.1, 0.4]);
        let d2 = joint([0.05, 0.25, 0.45, 0.25]);
        let r = check_tensorization(&xl, &d1, &d2, &grid5(), &RibbonOptions::default()).unwrap();
        assert!(r.pass, "{:?}", r.checks.iter().find(|c| !c.pass));
    }

    #[test]
    fn noisy_channel_data_processing() {
        let pa = make_phi("phi_alpha", Some(1.5)).unwrap();
        let d = joint([0.3, 0.2, 0.1, 0.4]);
        let noisy = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = check_data_processing(&pa, &d, &noisy, &id, &grid5(), &RibbonOptions::default()).unwrap();
        assert!(r.pass);
        assert!(!r.checks.is_empty());
        let bad = vec![vec![0.5, 0.6], vec![0.5, 0.5]];
        assert!(check_data_processing(&pa, &d, &bad, &id, &grid5(), &quick()).is_err());
    }
}
