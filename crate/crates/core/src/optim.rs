//! Deterministic multi-start maximization over an axis-aligned box.
//!
//! Each restart runs coordinate ascent (a coarse scan of the coordinate
//! followed by golden-section refinement around the best scan point), then an
//! optional bounded Nelder–Mead polish and a snap of near-boundary
//! coordinates onto the boundary. Restart `r` draws its start from a ChaCha8
//! stream keyed by `(seed, r)`, so results only depend on the options.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    pub restarts: usize,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Relative coordinate tolerance of the line search, and relative value
    /// improvement below which a restart counts as converged.
    pub step_tol: f64,
    pub scan_points: usize,
    pub polish: bool,
    /// Stop all remaining work once a value above this is found.
    pub stop_above: Option<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_sweeps: 200,
            seed: 0,
            step_tol: 1e-10,
            scan_points: 17,
            polish: true,
            stop_above: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub value: f64,
    pub sweeps: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub restart: usize,
    pub traces: Vec<RestartTrace>,
}

impl SearchOutcome {
    pub fn evaluations(&self) -> usize {
        self.traces.iter().map(|t| t.evaluations).sum()
    }
}

/// Counts evaluations and maps inadmissible points to −∞.
struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> Option<f64>> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        match (self.f)(x) {
            Some(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        }
    }
}

pub(crate) fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64 + 1);
    rng
}

fn random_point(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
        .collect()
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization of `g` on [a, b].
fn golden<G: FnMut(f64) -> f64>(mut g: G, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > tol {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - GOLDEN * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + GOLDEN * (b - a);
            gd = g(d);
        }
    }
    if gc >= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

fn line_search<F: FnMut(&[f64]) -> Option<f64>>(
    obj: &mut Counted<F>,
    x: &mut [f64],
    fx: &mut f64,
    k: usize,
    (lo, hi): (f64, f64),
    opts: &SearchOptions,
) {
    if lo == hi {
        return;
    }
    let n = opts.scan_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let orig = x[k];
    let mut best = (orig, *fx);
    for j in 0..n {
        let t = if j + 1 == n { hi } else { lo + j as f64 * step };
        x[k] = t;
        let v = obj.eval(x);
        if v > best.1 {
            best = (t, v);
        }
    }
    let (a, b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let tol = opts.step_tol * (hi - lo);
    let (t, v) = golden(
        |t| {
            x[k] = t;
            obj.eval(x)
        },
        a,
        b,
        tol,
    );
    if v > best.1 {
        best = (t, v);
    }
    x[k] = best.0;
    *fx = best.1;
}

/// Bounded Nelder–Mead (points are clamped into the box).
fn nelder_mead<F: FnMut(&[f64]) -> Option<f64>>(
    obj: &mut Counted<F>,
    x0: &[f64],
    f0: f64,
    bounds: &[(f64, f64)],
    opts: &SearchOptions,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    if d == 0 {
        return (x0.to_vec(), f0);
    }
    let clamp = |p: &mut Vec<f64>| {
        for (v, &(lo, hi)) in p.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for k in 0..d {
        let (lo, hi) = bounds[k];
        let mut p = x0.to_vec();
        let h = 0.05 * (hi - lo);
        p[k] = if p[k] + h <= hi { p[k] + h } else { p[k] - h };
        clamp(&mut p);
        let v = obj.eval(&p);
        simplex.push((p, v));
    }
    let max_iter = 200 * d.max(1);
    let width: f64 = bounds.iter().map(|(l, h)| h - l).fold(0.0, f64::max);
    for _ in 0..max_iter {
        // descending by value; stable so ties keep insertion order
        simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        let spread = simplex
            .iter()
            .skip(1)
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= opts.step_tol * width.max(1e-300) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|(p, _)| p[k]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let towards = |s: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + s * (c - w))
                .collect()
        };
        let mut xr = towards(1.0);
        clamp(&mut xr);
        let fr = obj.eval(&xr);
        if fr > simplex[0].1 {
            let mut xe = towards(2.0);
            clamp(&mut xe);
            let fe = obj.eval(&xe);
            simplex[d] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let mut xc = towards(-0.5);
            clamp(&mut xc);
            let fc = obj.eval(&xc);
            if fc > worst.1 {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = item.0.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    clamp(&mut p);
                    let v = obj.eval(&p);
                    *item = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let (p, v) = simplex.swap_remove(0);
    if v > f0 {
        (p, v)
    } else {
        (x0.to_vec(), f0)
    }
}

/// Moves coordinates lying within `1e-6` of the box width from a bound onto
/// the bound when that does not lower the value.
fn snap<F: FnMut(&[f64]) -> Option<f64>>(
    obj: &mut Counted<F>,
    x: &mut [f64],
    fx: &mut f64,
    bounds: &[(f64, f64)],
) {
    for k in 0..x.len() {
        let (lo, hi) = bounds[k];
        let near = 1e-6 * (hi - lo);
        for target in [lo, hi] {
            if x[k] != target && (x[k] - target).abs() <= near {
                let old = x[k];
                x[k] = target;
                let v = obj.eval(x);
                if v >= *fx {
                    *fx = v;
                } else {
                    x[k] = old;
                }
            }
        }
    }
}

/// Maximizes `obj` over `bounds`. `obj` returns `None` at inadmissible
/// points. `starts` seed the first restarts; the rest start at random.
pub fn maximize<F>(obj: F, bounds: &[(f64, f64)], starts: &[Vec<f64>], opts: &SearchOptions) -> Result<SearchOutcome>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    if bounds.iter().any(|(l, h)| !(l.is_finite() && h.is_finite()) || l > h) {
        return Err(Error::InvalidArgument(format!("bad search box {bounds:?}")));
    }
    let mut obj = Counted { f: obj, evals: 0 };
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut traces = Vec::with_capacity(opts.restarts);
    let restarts = opts.restarts.max(starts.len()).max(1);
    for r in 0..restarts {
        let before = obj.evals;
        let mut rng = restart_rng(opts.seed, r);
        let mut x = match starts.get(r) {
            Some(s) => s.clone(),
            None => random_point(&mut rng, bounds),
        };
        let mut fx = obj.eval(&x);
        let mut tries = 0;
        while fx == f64::NEG_INFINITY && tries < 64 {
            x = random_point(&mut rng, bounds);
            fx = obj.eval(&x);
            tries += 1;
        }
        let mut sweeps = 0;
        if fx > f64::NEG_INFINITY {
            while sweeps < opts.max_sweeps {
                sweeps += 1;
                let start_val = fx;
                for k in 0..x.len() {
                    line_search(&mut obj, &mut x, &mut fx, k, bounds[k], opts);
                }
                if opts.stop_above.is_some_and(|s| fx > s) {
                    break;
                }
                if fx - start_val <= opts.step_tol * fx.abs().max(1e-300) {
                    break;
                }
            }
            if opts.polish && !opts.stop_above.is_some_and(|s| fx > s) {
                let (p, v) = nelder_mead(&mut obj, &x, fx, bounds, opts);
                x = p;
                fx = v;
            }
            snap(&mut obj, &mut x, &mut fx, bounds);
        }
        traces.push(RestartTrace {
            restart: r,
            value: fx,
            sweeps,
            evaluations: obj.evals - before,
        });
        if best.as_ref().map_or(true, |b| fx > b.1) {
            best = Some((x, fx, r));
        }
        if opts.stop_above.is_some_and(|s| fx > s) {
            break;
        }
    }
    match best {
        Some((x, value, restart)) if value > f64::NEG_INFINITY => Ok(SearchOutcome {
            x,
            value,
            restart,
            traces,
        }),
        _ => Err(Error::NoAdmissiblePoint),
    }
}

/// Multi-start projected ascent along a caller-supplied ascent direction.
///
/// `value_dir(x, dir)` returns the objective at `x` and writes an ascent
/// direction (the gradient, possibly preconditioned) into `dir`. A step is
/// accepted only if it increases the value; the step length grows after a
/// success and halves after a failure. `max_sweeps` caps the accepted steps
/// per restart.
pub fn ascend<F>(mut value_dir: F, bounds: &[(f64, f64)], starts: &[Vec<f64>], opts: &SearchOptions) -> Result<SearchOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    if bounds.iter().any(|(l, h)| !(l.is_finite() && h.is_finite()) || l > h) {
        return Err(Error::InvalidArgument(format!("bad search box {bounds:?}")));
    }
    let n = bounds.len();
    let width = bounds.iter().map(|(l, h)| h - l).fold(0.0, f64::max);
    let min_move = opts.step_tol * width;
    let reached = |v: f64| opts.stop_above.is_some_and(|s| v > s);
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut traces = Vec::with_capacity(opts.restarts);
    let mut dir = vec![0.0; n];
    let mut trial_dir = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let restarts = opts.restarts.max(starts.len()).max(1);
    for r in 0..restarts {
        let mut rng = restart_rng(opts.seed, r);
        let mut x = match starts.get(r) {
            Some(s) => s.clone(),
            None => random_point(&mut rng, bounds),
        };
        let mut evals = 1;
        let mut fx = value_dir(&x, &mut dir);
        let mut alpha = {
            let g = dir.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
            if g > 0.0 { 0.1 * width / g } else { 0.0 }
        };
        let mut steps = 0;
        while steps < opts.max_sweeps && alpha > 0.0 && fx.is_finite() && !reached(fx) {
            let mut accepted = false;
            for _ in 0..60 {
                let mut moved = 0.0_f64;
                for k in 0..n {
                    let (lo, hi) = bounds[k];
                    trial[k] = (x[k] + alpha * dir[k]).clamp(lo, hi);
                    moved = moved.max((trial[k] - x[k]).abs());
                }
                if moved <= min_move {
                    break;
                }
                evals += 1;
                let ft = value_dir(&trial, &mut trial_dir);
                if ft > fx {
                    std::mem::swap(&mut x, &mut trial);
                    std::mem::swap(&mut dir, &mut trial_dir);
                    fx = ft;
                    alpha *= 2.0;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
            steps += 1;
        }
        let fx = if fx.is_finite() { fx } else { f64::NEG_INFINITY };
        traces.push(RestartTrace {
            restart: r,
            value: fx,
            sweeps: steps,
            evaluations: evals,
        });
        if best.as_ref().map_or(true, |b| fx > b.1) {
            best = Some((x, fx, r));
        }
        if reached(fx) {
            break;
        }
    }
    match best {
        Some((x, value, restart)) if value > f64::NEG_INFINITY => Ok(SearchOutcome {
            x,
            value,
            restart,
            traces,
        }),
        _ => Err(Error::NoAdmissiblePoint),
    }
}
