//! Grid certificates for the function classes 𝓕, 𝓕₁ and 𝓕₂.
//!
//! `member = true` always means "no violation on this grid"; the grid is
//! carried in every report.

use serde::Serialize;

use super::PhiSpec;
use crate::numeric::geq_with_slack;
use crate::{Error, GridSpec, Result};

/// |Φ″| or |Φ‴| below this is treated as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

const SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhiClass {
    F,
    F1,
    F2,
}

impl std::str::FromStr for PhiClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(PhiClass::F),
            "F1" => Ok(PhiClass::F1),
            "F2" => Ok(PhiClass::F2),
            other => Err(Error::InvalidArgument(format!(
                "unknown class `{other}` (expected F, F1 or F2)"
            ))),
        }
    }
}

/// A violated comparison `lhs ≥ rhs` at the pair (x, y).
///
/// For the 𝓕 midpoint test, `x` and `y` are the outer points and the
/// midpoint is `(x + y) / 2`. Convexity and Φ‴ sign failures use `x = y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub x: f64,
    pub y: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassReport {
    pub class: PhiClass,
    pub member: bool,
    pub witnesses: Vec<Witness>,
    pub violations: usize,
    pub degenerate_points: Vec<f64>,
    pub grid: GridSpec,
}

impl ClassReport {
    fn new(class: PhiClass, grid: GridSpec) -> Self {
        Self {
            class,
            member: true,
            witnesses: Vec::new(),
            violations: 0,
            degenerate_points: Vec::new(),
            grid,
        }
    }

    fn violate(&mut self, w: Witness) {
        if self.witnesses.is_empty() {
            self.witnesses.push(w);
        }
        self.violations += 1;
        self.member = false;
    }
}

fn interior_points(phi: &PhiSpec, grid: &GridSpec, nonneg: bool) -> Result<Vec<f64>> {
    let pts = grid.points();
    for &t in &pts {
        if !phi.domain().contains_interior(t) || (nonneg && t < 0.0) {
            return Err(Error::InvalidGrid(format!(
                "grid point {t} outside the admissible region of `{}` (domain {}{})",
                phi.label(),
                phi.domain(),
                if nonneg { " ∩ [0, ∞)" } else { "" }
            )));
        }
    }
    Ok(pts)
}

fn degenerate<'a>(pts: impl Iterator<Item = &'a f64>, value: impl Fn(f64) -> f64) -> Vec<f64> {
    pts.copied()
        .filter(|&t| value(t).abs() < DEGENERACY_THRESHOLD)
        .collect()
}

/// 𝓕: convex, non-affine, and 1/Φ″ midpoint-concave on the grid.
pub fn check_class_f(phi: &PhiSpec, grid: &GridSpec) -> Result<ClassReport> {
    if grid.n < 3 {
        return Err(Error::InvalidGrid("class 𝓕 check needs at least 3 points".into()));
    }
    let pts = interior_points(phi, grid, false)?;
    let d2: Vec<f64> = pts.iter().map(|&t| phi.d2(t)).collect();
    if d2.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Φ″ not finite on the grid for `{}`",
            phi.label()
        )));
    }
    let degen = degenerate(pts.iter(), |t| phi.d2(t));
    if !degen.is_empty() {
        return Err(Error::Degenerate { points: degen });
    }
    let mut report = ClassReport::new(PhiClass::F, *grid);
    for (&t, &c) in pts.iter().zip(&d2) {
        if c < 0.0 {
            report.violate(Witness {
                x: t,
                y: t,
                lhs: c,
                rhs: 0.0,
            });
        }
    }
    if !report.member {
        return Ok(report);
    }
    let recip: Vec<f64> = d2.iter().map(|c| 1.0 / c).collect();
    let n = pts.len();
    for i in 0..n {
        for k in (i + 2..n).step_by(2) {
            let j = (i + k) / 2;
            let lhs = recip[j];
            let rhs = 0.5 * (recip[i] + recip[k]);
            if !geq_with_slack(lhs, rhs, SLACK, &[recip[i], recip[k]]) {
                report.violate(Witness {
                    x: pts[i],
                    y: pts[k],
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(report)
}

/// Φ″/Φ‴, the ratio both 𝓕₁ and G_Φ are built from.
fn ratio(phi: &PhiSpec, t: f64) -> f64 {
    phi.d2(t) / phi.d3(t)
}

/// 𝓕₁: x + Φ″(x)/Φ‴(x) ≥ y + 3Φ″(y)/Φ‴(y) for every ordered grid pair.
pub fn check_class_f1(phi: &PhiSpec, grid: &GridSpec) -> Result<ClassReport> {
    let pts = interior_points(phi, grid, true)?;
    let degen = degenerate(pts.iter(), |t| phi.d3(t));
    if !degen.is_empty() {
        return Err(Error::Degenerate { points: degen });
    }
    let r: Vec<f64> = pts.iter().map(|&t| ratio(phi, t)).collect();
    let mut report = ClassReport::new(PhiClass::F1, *grid);
    for (&x, &rx) in pts.iter().zip(&r) {
        for (&y, &ry) in pts.iter().zip(&r) {
            let lhs = x + rx;
            let rhs = y + 3.0 * ry;
            if !geq_with_slack(lhs, rhs, SLACK, &[x, rx, y, 3.0 * ry]) {
                report.violate(Witness { x, y, lhs, rhs });
            }
        }
    }
    Ok(report)
}

/// The two summands of the 𝓕₂ expression (equivalently of Q_x(y)).
pub(crate) fn f2_terms(phi: &PhiSpec, x: f64, y: f64) -> (f64, f64) {
    if x == y {
        return (0.0, 0.0);
    }
    let (px, py) = (phi.value(x), phi.value(y));
    let (dx, dy) = (phi.d1(x), phi.d1(y));
    let first = (px + dx * (y - x) - py) * (dy - dx);
    let second = phi.d2(x) * (y - x) * (y - x) * (dy - (px - py) / (x - y));
    (first, second)
}

/// 𝓕₂: Φ‴ ≤ 0 on the grid and the two-point inequality for every pair.
pub fn check_class_f2(phi: &PhiSpec, grid: &GridSpec) -> Result<ClassReport> {
    let pts = interior_points(phi, grid, true)?;
    let mut report = ClassReport::new(PhiClass::F2, *grid);
    for &t in &pts {
        let d3 = phi.d3(t);
        if !d3.is_finite() {
            return Err(Error::InvalidArgument(format!("Φ‴({t}) is not finite")));
        }
        if d3 > SLACK * phi.d2(t).abs().max(1.0) {
            report.violate(Witness {
                x: t,
                y: t,
                lhs: -d3,
                rhs: 0.0,
            });
        }
    }
    for &x in &pts {
        for &y in &pts {
            let (a, b) = f2_terms(phi, x, y);
            let lhs = a + b;
            if !lhs.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "𝓕₂ expression not finite at ({x}, {y})"
                )));
            }
            if !geq_with_slack(lhs, 0.0, SLACK, &[a, b]) {
                report.violate(Witness {
                    x,
                    y,
                    lhs,
                    rhs: 0.0,
                });
            }
        }
    }
    Ok(report)
}

/// G_Φ(x, y) = −3Φ″(y)/Φ‴(y) − y + Φ″(x)/Φ‴(x) + x.
///
/// 𝓕₁ membership on a grid is equivalent to G_Φ ≥ 0 on all grid pairs.
pub fn g_big_phi(phi: &PhiSpec, x: f64, y: f64) -> Result<f64> {
    let degen: Vec<f64> = [x, y]
        .into_iter()
        .filter(|&t| phi.d3(t).abs() < DEGENERACY_THRESHOLD)
        .collect();
    if !degen.is_empty() {
        return Err(Error::Degenerate { points: degen });
    }
    Ok(-3.0 * ratio(phi, y) - y + ratio(phi, x) + x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::{catalog_samples, make_phi, Domain, PhiFns};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(lo: f64, hi: f64, n: usize) -> GridSpec {
        GridSpec::new(lo, hi, n).unwrap()
    }

    fn quartic() -> PhiSpec {
        PhiSpec::from_fns(
            "t^4",
            Domain::new(0.0, f64::INFINITY, false, false),
            PhiFns {
                value: |t| t.powi(4),
                d1: |t| 4.0 * t.powi(3),
                d2: |t| 12.0 * t * t,
                d3: |t| 24.0 * t,
            },
        )
    }

    fn exp_phi() -> PhiSpec {
        PhiSpec::from_fns(
            "exp",
            Domain::real_line(),
            PhiFns {
                value: f64::exp,
                d1: f64::exp,
                d2: f64::exp,
                d3: f64::exp,
            },
        )
    }

    // Brute-force midpoint concavity of 1/Φ″ = 1/(12 t²) over the grid.
    fn quartic_midpoint_violations(g: &GridSpec) -> usize {
        let pts = g.points();
        let r = |t: f64| 1.0 / (12.0 * t * t);
        let mut count = 0;
        for i in 0..pts.len() {
            for k in (i + 2..pts.len()).step_by(2) {
                let mid = pts[(i + k) / 2];
                if r(mid) < 0.5 * (r(pts[i]) + r(pts[k])) - 1e-10 {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn xlogx_in_f() {
        let p = make_phi("xlogx", None).unwrap();
        let rep = check_class_f(&p, &grid(0.01, 10.0, 200)).unwrap();
        assert!(rep.member, "{rep:?}");
    }

    #[test]
    fn quartic_not_in_f() {
        let g = grid(0.1, 10.0, 100);
        let rep = check_class_f(&quartic(), &g).unwrap();
        assert!(!rep.member);
        let oracle = quartic_midpoint_violations(&g);
        assert!(oracle > 0);
        assert_eq!(rep.violations, oracle);
        let w = rep.witnesses[0];
        assert!(w.lhs < w.rhs);
    }

    #[test]
    fn square_in_f_on_symmetric_grid() {
        let p = make_phi("power", Some(2.0)).unwrap();
        assert!(check_class_f(&p, &grid(-1.0, 1.0, 41)).unwrap().member);
    }

    #[test]
    fn reciprocal_and_neg_log_fail_f() {
        // 1/Φ″ is t³/2 and t² respectively, both convex.
        for name in ["one_over_t", "neg_log"] {
            let p = make_phi(name, None).unwrap();
            assert!(!check_class_f(&p, &grid(0.1, 10.0, 50)).unwrap().member);
        }
    }

    #[test]
    fn f_grid_errors() {
        let p = make_phi("xlogx", None).unwrap();
        assert!(matches!(
            check_class_f(&p, &grid(0.0, 1.0, 10)),
            Err(Error::InvalidGrid(_))
        ));
        assert!(check_class_f(&p, &grid(0.5, 1.0, 2)).is_err());
        let affine = PhiSpec::from_fns(
            "affine",
            Domain::real_line(),
            PhiFns {
                value: |t| 2.0 * t + 1.0,
                d1: |_| 2.0,
                d2: |_| 0.0,
                d3: |_| 0.0,
            },
        );
        match check_class_f(&affine, &grid(0.0, 1.0, 5)) {
            Err(Error::Degenerate { points }) => assert_eq!(points.len(), 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn f1_members() {
        for name in ["xlogx", "neg_log", "one_over_t"] {
            let p = make_phi(name, None).unwrap();
            let rep = check_class_f1(&p, &grid(0.01, 10.0, 200)).unwrap();
            assert!(rep.member, "{name}: {rep:?}");
        }
    }

    #[test]
    fn f1_square_is_degenerate() {
        let p = make_phi("power", Some(2.0)).unwrap();
        assert!(matches!(
            check_class_f1(&p, &grid(0.1, 1.0, 10)),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn f1_positive_third_derivative_fails_on_diagonal() {
        let g = grid(0.0, 3.0, 31);
        let rep = check_class_f1(&exp_phi(), &g).unwrap();
        assert!(!rep.member);
        let w = rep.witnesses[0];
        assert_eq!((w.x, w.y), (0.0, 0.0));
        // every diagonal point is a violation
        for t in g.points() {
            let lhs = t + 1.0;
            let rhs = t + 3.0;
            assert!(lhs < rhs);
        }
    }

    #[test]
    fn f2_members_and_failures() {
        let p = make_phi("one_over_t", None).unwrap();
        assert!(check_class_f2(&p, &grid(0.1, 10.0, 100)).unwrap().member);
        let rep = check_class_f2(&exp_phi(), &grid(0.0, 3.0, 31)).unwrap();
        assert!(!rep.member);
        assert_eq!(rep.witnesses[0].x, rep.witnesses[0].y);
    }

    #[test]
    fn f2_diagonal_is_zero() {
        for phi in catalog_samples() {
            let t = if phi.domain().is_compact() { 0.3 } else { 1.7 };
            assert_eq!(f2_terms(&phi, t, t), (0.0, 0.0));
        }
    }

    #[test]
    fn f1_implies_f2_across_catalog() {
        let g = grid(0.01, 10.0, 200);
        for phi in catalog_samples() {
            let Ok(f1) = check_class_f1(&phi, &g) else {
                continue;
            };
            if f1.member {
                assert!(check_class_f2(&phi, &g).unwrap().member, "{}", phi.label());
            }
        }
    }

    #[test]
    fn g_closed_forms() {
        let xlogx = make_phi("xlogx", None).unwrap();
        let recip = make_phi("one_over_t", None).unwrap();
        let neglog = make_phi("neg_log", None).unwrap();
        assert!((g_big_phi(&xlogx, 1.0, 2.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((g_big_phi(&recip, 3.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        // the definition gives (x + y)/2 here
        assert!((g_big_phi(&neglog, 2.0, 4.0).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn g_matches_closed_forms_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xlogx = make_phi("xlogx", None).unwrap();
        let recip = make_phi("one_over_t", None).unwrap();
        let neglog = make_phi("neg_log", None).unwrap();
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(0.01..10.0);
            let y: f64 = rng.gen_range(0.01..10.0);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            assert!(rel(g_big_phi(&xlogx, x, y).unwrap(), 2.0 * y) <= 1e-10);
            assert!(rel(g_big_phi(&recip, x, y).unwrap(), 2.0 * x / 3.0) <= 1e-10);
            assert!(rel(g_big_phi(&neglog, x, y).unwrap(), 0.5 * (x + y)) <= 1e-10);
        }
    }

    #[test]
    fn g_degenerate_for_square() {
        let p = make_phi("power", Some(2.0)).unwrap();
        assert!(matches!(g_big_phi(&p, 1.0, 2.0), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn g_nonneg_iff_f1_on_grid() {
        let g = grid(0.05, 5.0, 40);
        for phi in catalog_samples() {
            let Ok(rep) = check_class_f1(&phi, &g) else {
                continue;
            };
            let all_nonneg = g.points().iter().all(|&x| {
                g.points()
                    .iter()
                    .all(|&y| g_big_phi(&phi, x, y).unwrap() >= -1e-10 * x.max(y).max(1.0) * 4.0)
            });
            assert_eq!(rep.member, all_nonneg, "{}", phi.label());
        }
    }
}
