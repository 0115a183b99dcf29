//! Φ-SDPI constants η_Φ(X, Y) and the Z-channel auxiliary functions.
//!
//! `eta_phi` searches f_X over a compact box inside dom Φ. The Z-channel
//! helpers `g_of_v_m`, `k_of_t`, `w_of_x1` and `q_of_y` evaluate the
//! expressions used to show that the maximizer pins f_X(1) to the lower end
//! of the box for Φ in 𝓕₁ or 𝓕₂.

use log::warn;
use serde::Serialize;

use crate::entropy::{h_of_cond_mean, h_phi, JointDistribution, Partition, RandomFunction};
use crate::optim::{maximize, SearchOptions};
use crate::phi::{check_class_f1, check_class_f2, PhiClass, PhiSpec};
use crate::{Error, GridSpec, Result};

/// Candidates with H_Φ(f) below this are treated as constant.
pub const CONSTANT_H: f64 = 1e-12;

/// Candidates whose value spread is below this fraction of the box width are
/// treated as constant.
pub const CONSTANT_SPREAD: f64 = 1e-3;

/// Denominators at or below this make a closed form degenerate.
pub const DEGENERATE_DEN: f64 = 1e-14;

/// Binary source with p(X=0, Y=1) = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZChannelSource {
    pub s: f64,
    pub d: f64,
}

impl ZChannelSource {
    pub fn new(s: f64, d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&d) {
            return Err(Error::InvalidArgument(format!(
                "Z-channel needs s, d in [0, 1], got s={s}, d={d}"
            )));
        }
        Ok(Self { s, d })
    }

    /// [[1−s, 0], [s·d, s·(1−d)]] over variables `X`, `Y`.
    pub fn joint(&self) -> JointDistribution {
        let (s, d) = (self.s, self.d);
        JointDistribution::new(
            vec!["X".into(), "Y".into()],
            vec![2, 2],
            &[1.0 - s, 0.0, s * d, s * (1.0 - d)],
        )
        .expect("Z-channel parameters validated on construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaOptions {
    /// Search box for the values of f; `None` uses [`PhiSpec::default_fbox`].
    pub fbox: Option<(f64, f64)>,
    pub search: SearchOptions,
    /// Rescale every candidate to 𝔼[f] = 1 (candidates leaving the box are
    /// rejected).
    pub raginsky: bool,
    /// Fixed values for some X symbols, as (symbol, value).
    pub pinned: Vec<(usize, f64)>,
}

impl Default for EtaOptions {
    fn default() -> Self {
        Self {
            fbox: None,
            search: SearchOptions {
                restarts: 32,
                step_tol: 1e-10,
                ..SearchOptions::default()
            },
            raginsky: false,
            pinned: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpiTrace {
    pub restarts: usize,
    pub evaluations: usize,
    pub best_restart: usize,
    pub best_per_restart: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpiResult {
    pub eta: f64,
    pub argmax_f: RandomFunction,
    pub fbox: (f64, f64),
    pub dropped_symbols: Vec<usize>,
    pub trace: SdpiTrace,
}

fn check_fbox(phi: &PhiSpec, fbox: (f64, f64)) -> Result<()> {
    let (lo, hi) = fbox;
    if !(lo < hi) || !phi.domain().contains(lo) || !phi.domain().contains(hi) {
        return Err(Error::InvalidArgument(format!(
            "f box [{lo}, {hi}] is not a proper sub-interval of dom {} = {}",
            phi.label(),
            phi.domain()
        )));
    }
    Ok(())
}

/// η_Φ(X; Y) = sup over non-constant f_X of H_Φ(𝔼[f_X | Y]) / H_Φ(f_X).
pub fn eta_phi(
    phi: &PhiSpec,
    dist: &JointDistribution,
    x_var: &str,
    y_var: &str,
    opts: &EtaOptions,
) -> Result<SdpiResult> {
    if x_var == y_var {
        return Err(Error::InvalidArgument("X and Y must be different variables".into()));
    }
    let fbox = opts.fbox.unwrap_or_else(|| phi.default_fbox());
    check_fbox(phi, fbox)?;
    let pxy = dist.marginal(&[x_var, y_var])?;
    let nx = pxy.sizes()[0];
    let px = pxy.marginal(&[x_var])?.dense();
    let dropped: Vec<usize> = (0..nx).filter(|&x| px[x] == 0.0).collect();
    if !dropped.is_empty() {
        warn!("X symbols {dropped:?} have zero mass; their f values are unidentifiable and dropped");
    }
    for &(sym, val) in &opts.pinned {
        if sym >= nx {
            return Err(Error::InvalidArgument(format!("pinned symbol {sym} out of range")));
        }
        if !(fbox.0..=fbox.1).contains(&val) {
            return Err(Error::InvalidArgument(format!("pinned value {val} outside the f box")));
        }
    }
    let pinned_val = |x: usize| opts.pinned.iter().find(|(s, _)| *s == x).map(|(_, v)| *v);
    let free: Vec<usize> = (0..nx)
        .filter(|x| !dropped.contains(x) && pinned_val(*x).is_none())
        .collect();
    let x_of_cell: Vec<usize> = (0..pxy.support_len()).map(|i| pxy.cell(i)[0] as usize).collect();
    let probs = pxy.probs().to_vec();
    let trivial = Partition::trivial(probs.len());
    let by_y = pxy.partition(&[1]);
    let width = fbox.1 - fbox.0;

    let assemble = |params: &[f64]| -> Vec<f64> {
        let mut f = vec![0.5 * (fbox.0 + fbox.1); nx];
        for x in 0..nx {
            if let Some(v) = pinned_val(x) {
                f[x] = v;
            }
        }
        for (k, &x) in free.iter().enumerate() {
            f[x] = params[k];
        }
        f
    };
    let ratio_of = |f: &[f64]| -> Option<f64> {
        let mut f = f.to_vec();
        if opts.raginsky {
            let m: f64 = (0..nx).map(|x| px[x] * f[x]).sum();
            if m <= 0.0 {
                return None;
            }
            for v in &mut f {
                *v /= m;
                if !(fbox.0..=fbox.1).contains(v) {
                    return None;
                }
            }
        }
        let active = (0..nx).filter(|x| !dropped.contains(x));
        let (lo, hi) = active.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| {
            (l.min(f[x]), h.max(f[x]))
        });
        if hi - lo < CONSTANT_SPREAD * width {
            return None;
        }
        let vals: Vec<f64> = x_of_cell.iter().map(|&x| f[x]).collect();
        let h = h_phi(phi, &probs, &vals, &trivial);
        if !(h >= CONSTANT_H) {
            return None;
        }
        Some(h_of_cond_mean(phi, &probs, &vals, &by_y, &trivial) / h)
    };

    let bounds = vec![fbox; free.len()];
    // one-hot corners first: they are the optima for scale-free Φ
    let mut starts = Vec::new();
    for k in 0..free.len() {
        for (a, b) in [(fbox.1, fbox.0), (fbox.0, fbox.1)] {
            let mut p = vec![b; free.len()];
            p[k] = a;
            starts.push(p);
        }
    }
    starts.truncate(opts.search.restarts.max(1));
    let out = maximize(|p| ratio_of(&assemble(p)), &bounds, &starts, &opts.search)?;
    let mut f = assemble(&out.x);
    if opts.raginsky {
        let m: f64 = (0..nx).map(|x| px[x] * f[x]).sum();
        f.iter_mut().for_each(|v| *v /= m);
    }
    Ok(SdpiResult {
        eta: out.value,
        argmax_f: RandomFunction::new(vec![x_var.to_string()], f)?,
        fbox,
        dropped_symbols: dropped,
        trace: SdpiTrace {
            restarts: out.traces.len(),
            evaluations: out.evaluations(),
            best_restart: out.restart,
            best_per_restart: out.traces.iter().map(|t| t.value).collect(),
        },
    })
}

fn in_domain(phi: &PhiSpec, t: f64, what: &str) -> Result<()> {
    phi.ensure_in_domain(t, || what.to_string())
}

/// H_Φ(𝔼[f|Y]) / H_Φ(f) for f_X = (u, v) under a Z-channel, in closed form.
pub fn eta_phi_ratio(phi: &PhiSpec, z: &ZChannelSource, u: f64, v: f64) -> Result<f64> {
    in_domain(phi, u, "f_X(0)")?;
    in_domain(phi, v, "f_X(1)")?;
    let (s, d) = (z.s, z.d);
    let m = (1.0 - s) * u + s * v;
    let den = (1.0 - s) * phi.value(u) + s * phi.value(v) - phi.value(m);
    if !(den > DEGENERATE_DEN) {
        return Err(Error::Degenerate { points: vec![u, v] });
    }
    let w0 = 1.0 - s * (1.0 - d);
    let w1 = s * (1.0 - d);
    let mut num = w1 * phi.value(v) - phi.value(m);
    if w0 > 0.0 {
        let y0 = (((1.0 - s) * u + s * d * v) / w0).clamp(u.min(v), u.max(v));
        num += w0 * phi.value(y0);
    }
    Ok(num / den)
}

/// g(v, m): the Z-channel ratio with u eliminated through m = (1−s)u + s·v.
pub fn g_of_v_m(phi: &PhiSpec, z: &ZChannelSource, v: f64, m: f64) -> Result<f64> {
    let (s, d) = (z.s, z.d);
    if s >= 1.0 {
        return Err(Error::InvalidArgument("g(v, m) needs s < 1".into()));
    }
    let u = (m - s * v) / (1.0 - s);
    in_domain(phi, u, "u = (m − s·v)/(1 − s)")?;
    in_domain(phi, v, "v")?;
    in_domain(phi, m, "m")?;
    let den = (1.0 - s) * phi.value(u) + s * phi.value(v) - phi.value(m);
    if !(den > DEGENERATE_DEN) {
        return Err(Error::Degenerate { points: vec![v, m] });
    }
    let w1 = s * (1.0 - d);
    let w0 = 1.0 - w1;
    let y0 = (m - w1 * v) / w0;
    in_domain(phi, y0, "(m − s(1−d)v)/(1 − s(1−d))")?;
    Ok((w0 * phi.value(y0) + w1 * phi.value(v) - phi.value(m)) / den)
}

/// k(t) = st(Φ′(v) − Φ′(x₂)) / ((1 − st)Φ(x₂) + stΦ(v) − Φ(m)), with
/// x₂ = (m − svt)/(1 − st).
pub fn k_of_t(phi: &PhiSpec, z: &ZChannelSource, v: f64, m: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidArgument(format!("k(t) needs t in (0, 1], got {t}")));
    }
    let st = z.s * t;
    if st >= 1.0 {
        return Err(Error::InvalidArgument("k(t) needs s·t < 1".into()));
    }
    let x2 = (m - z.s * v * t) / (1.0 - st);
    in_domain(phi, v, "v")?;
    in_domain(phi, m, "m")?;
    in_domain(phi, x2, "x₂ = (m − svt)/(1 − st)")?;
    let den = (1.0 - st) * phi.value(x2) + st * phi.value(v) - phi.value(m);
    if !(den > DEGENERATE_DEN) {
        return Err(Error::Degenerate { points: vec![v, m, t] });
    }
    Ok(st * (phi.d1(v) - phi.d1(x2)) / den)
}

/// (Φ(a) − Φ(b))/(a − b), with Φ′ at the midpoint when a and b nearly coincide.
fn slope(phi: &PhiSpec, a: f64, b: f64) -> f64 {
    if a == b {
        return phi.d1(a);
    }
    if (a - b).abs() <= 1e-7 * a.abs().max(b.abs()).max(1e-300) {
        return phi.d1(0.5 * (a + b));
    }
    (phi.value(a) - phi.value(b)) / (a - b)
}

/// w_{m,x₂}(x₁). At x₁ = m the difference quotient is its limit Φ′(m).
pub fn w_of_x1(phi: &PhiSpec, m: f64, x2: f64, x1: f64) -> Result<f64> {
    for (t, name) in [(m, "m"), (x2, "x₂"), (x1, "x₁")] {
        in_domain(phi, t, name)?;
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("{name} = {t} is negative")));
        }
    }
    if !((x1 >= m && m >= x2) || (x2 >= m && m >= x1)) {
        return Err(Error::InvalidArgument(format!(
            "w needs x₁ ≥ m ≥ x₂ or x₂ ≥ m ≥ x₁, got x₁={x1}, m={m}, x₂={x2}"
        )));
    }
    if x2 == m {
        return Ok(0.0);
    }
    let a = phi.value(x2) + phi.d1(x2) * (m - x2) - phi.value(m);
    let first = a * (phi.d1(x1) - phi.d1(x2));
    // (Φ(x₂) − Φ(m))/(m − x₂) is minus the slope between x₂ and m
    let bracket = slope(phi, x1, m) - slope(phi, x2, m);
    Ok(first + phi.d2(x2) * (m - x2) * (m - x2) * bracket)
}

/// Q_x(y) and its first two derivatives in y; `Q_x(x)` is 0.
pub fn q_of_y(phi: &PhiSpec, x: f64, y: f64, order: u8) -> Result<f64> {
    for (t, name) in [(x, "x"), (y, "y")] {
        in_domain(phi, t, name)?;
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("{name} = {t} is negative")));
        }
    }
    let (px, py) = (phi.value(x), phi.value(y));
    let (d1x, d1y) = (phi.d1(x), phi.d1(y));
    let (d2x, d2y) = (phi.d2(x), phi.d2(y));
    let h = y - x;
    match order {
        0 => {
            if x == y {
                return Ok(0.0);
            }
            Ok((px + d1x * h - py) * (d1y - d1x) + d2x * h * h * (d1y - slope(phi, x, y)))
        }
        1 => Ok(-(d1x - d1y) * (d1x - d1y)
            + d2y * (px - py + d1x * h)
            + d2x * (px - py + d1y * h + d2y * h * h)),
        2 => Ok(3.0 * d2y * (d1x - d1y + d2x * h) + phi.d3(y) * (px - py + d1x * h + d2x * h * h)),
        other => Err(Error::InvalidArgument(format!("Q derivative order {other} not in 0..=2"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub phi: String,
    pub source: ZChannelSource,
    pub grid: GridSpec,
    pub hypothesis_verified: bool,
    pub hypothesis_class: Option<PhiClass>,
    pub eta_unrestricted: f64,
    pub eta_restricted: f64,
    pub argmax_u: f64,
    pub argmax_v: f64,
    pub pass: bool,
}

/// Largest allowed η gap between the unrestricted and pinned searches.
pub const ETA_GAP_TOL: f64 = 1e-8;

/// Compares η with f_X(1) free against η with f_X(1) pinned to `grid.lo`.
/// `grid` is both the f search box and the class-check grid.
pub fn verify_maximizer_at_zero(
    phi: &PhiSpec,
    z: &ZChannelSource,
    grid: &GridSpec,
    opts: &EtaOptions,
) -> Result<TheoremReport> {
    let hypothesis_class = if check_class_f1(phi, grid).is_ok_and(|r| r.member) {
        Some(PhiClass::F1)
    } else if check_class_f2(phi, grid).is_ok_and(|r| r.member) {
        Some(PhiClass::F2)
    } else {
        None
    };
    let fbox = (grid.lo, grid.hi);
    let free = EtaOptions {
        fbox: Some(fbox),
        pinned: Vec::new(),
        ..opts.clone()
    };
    let pinned = EtaOptions {
        pinned: vec![(1, grid.lo)],
        ..free.clone()
    };
    let joint = z.joint();
    let unrestricted = eta_phi(phi, &joint, "X", "Y", &free)?;
    let restricted = eta_phi(phi, &joint, "X", "Y", &pinned)?;
    let (u, v) = (unrestricted.argmax_f.table[0], unrestricted.argmax_f.table[1]);
    let pass = v - grid.lo <= grid.step() && unrestricted.eta - restricted.eta <= ETA_GAP_TOL;
    Ok(TheoremReport {
        phi: phi.label(),
        source: *z,
        grid: *grid,
        hypothesis_verified: hypothesis_class.is_some(),
        hypothesis_class,
        eta_unrestricted: unrestricted.eta,
        eta_restricted: restricted.eta,
        argmax_u: u,
        argmax_v: v,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::make_phi;

    fn sq() -> PhiSpec {
        make_phi("power", Some(2.0)).unwrap()
    }

    #[test]
    fn z_joint_layout() {
        let z = ZChannelSource::new(0.3, 0.4).unwrap();
        let d = z.joint().dense();
        assert_eq!(d, vec![0.7, 0.0, 0.3 * 0.4, 0.3 * 0.6]);
        assert!(ZChannelSource::new(1.2, 0.0).is_err());
    }

    #[test]
    fn ratio_square_example() {
        let z = ZChannelSource::new(0.5, 0.5).unwrap();
        let r = eta_phi_ratio(&sq(), &z, 1.0, 0.0).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_degenerate_when_effective_f_constant() {
        for s in [0.0, 1.0] {
            let z = ZChannelSource::new(s, 0.3).unwrap();
            assert!(matches!(
                eta_phi_ratio(&sq(), &z, 0.2, 0.9),
                Err(Error::Degenerate { .. })
            ));
        }
    }

    #[test]
    fn eta_z_channel_square() {
        let z = ZChannelSource::new(0.5, 0.5).unwrap();
        let r = eta_phi(&sq(), &z.joint(), "X", "Y", &EtaOptions::default()).unwrap();
        assert!((r.eta - 1.0 / 3.0).abs() < 1e-9, "{}", r.eta);
    }

    #[test]
    fn eta_independent_and_noiseless() {
        let xl = make_phi("xlogx", None).unwrap();
        let ind = JointDistribution::new(vec!["X".into(), "Y".into()], vec![2, 2], &[0.12, 0.28, 0.18, 0.42]).unwrap();
        let r = eta_phi(&xl, &ind, "X", "Y", &EtaOptions::default()).unwrap();
        // only rounding noise in the numerator survives
        assert!(r.eta.abs() < 1e-8, "{}", r.eta);
        let id = JointDistribution::new(vec!["X".into(), "Y".into()], vec![2, 2], &[0.3, 0.0, 0.0, 0.7]).unwrap();
        let r = eta_phi(&xl, &id, "X", "Y", &EtaOptions::default()).unwrap();
        assert!((r.eta - 1.0).abs() < 1e-12, "{}", r.eta);
    }

    #[test]
    fn zero_mass_symbol_is_dropped() {
        let d = JointDistribution::new(
            vec!["X".into(), "Y".into()],
            vec![3, 2],
            &[0.5, 0.0, 0.0, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let r = eta_phi(&sq(), &d, "X", "Y", &EtaOptions::default()).unwrap();
        assert_eq!(r.dropped_symbols, vec![1]);
        assert!((r.eta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn g_matches_ratio_after_reparameterization() {
        let xl = make_phi("xlogx", None).unwrap();
        let z = ZChannelSource::new(0.3, 0.4).unwrap();
        let (u, v) = (2.0, 0.5);
        let m = 0.7 * u + 0.3 * v;
        let a = g_of_v_m(&xl, &z, v, m).unwrap();
        let b = eta_phi_ratio(&xl, &z, u, v).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn k_at_one_is_the_left_side() {
        let xl = make_phi("xlogx", None).unwrap();
        let z = ZChannelSource::new(0.3, 0.4).unwrap();
        // v = m makes f constant
        assert!(matches!(k_of_t(&xl, &z, 1.0, 1.0, 0.5), Err(Error::Degenerate { .. })));
        assert!(k_of_t(&xl, &z, 1.0, 2.0, 0.0).is_err());
        let k1 = k_of_t(&xl, &z, 0.5, 2.0, 1.0).unwrap();
        let kd = k_of_t(&xl, &z, 0.5, 2.0, 0.6).unwrap();
        assert!(k1 >= kd);
    }

    #[test]
    fn w_limits() {
        let xl = make_phi("xlogx", None).unwrap();
        assert_eq!(w_of_x1(&xl, 2.0, 2.0, 5.0).unwrap(), 0.0);
        // the removable point agrees with nearby evaluations
        let at = w_of_x1(&xl, 2.0, 1.0, 2.0).unwrap();
        let near = w_of_x1(&xl, 2.0, 1.0, 2.0 + 1e-5).unwrap();
        assert!((at - near).abs() < 1e-5 * at.abs().max(1.0));
        assert!(w_of_x1(&xl, 2.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn q_vanishes_on_diagonal() {
        let xl = make_phi("xlogx", None).unwrap();
        for x in [0.1, 1.0, 7.5] {
            assert_eq!(q_of_y(&xl, x, x, 0).unwrap(), 0.0);
            assert_eq!(q_of_y(&xl, x, x, 1).unwrap(), 0.0);
        }
        assert!(q_of_y(&xl, 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn q_is_the_f2_expression() {
        let p = make_phi("one_over_t", None).unwrap();
        let (a, b) = crate::phi::f2_terms(&p, 0.7, 3.1);
        assert!((q_of_y(&p, 0.7, 3.1, 0).unwrap() - (a + b)).abs() < 1e-12);
    }

    #[test]
    fn q_first_derivative_matches_difference() {
        let p = make_phi("neg_log", None).unwrap();
        let (x, y, h) = (1.3, 2.2, 1e-6);
        let fd = (q_of_y(&p, x, y + h, 0).unwrap() - q_of_y(&p, x, y - h, 0).unwrap()) / (2.0 * h);
        assert!((fd - q_of_y(&p, x, y, 1).unwrap()).abs() < 1e-6);
        let fd2 = (q_of_y(&p, x, y + h, 1).unwrap() - q_of_y(&p, x, y - h, 1).unwrap()) / (2.0 * h);
        assert!((fd2 - q_of_y(&p, x, y, 2).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn maximizer_xlogx() {
        let xl = make_phi("xlogx", None).unwrap();
        let z = ZChannelSource::new(0.3, 0.4).unwrap();
        let g: GridSpec = "0.001:10:200".parse().unwrap();
        let r = verify_maximizer_at_zero(&xl, &z, &g, &EtaOptions::default()).unwrap();
        assert!(r.hypothesis_verified);
        assert!(r.pass, "{r:?}");
    }
}
