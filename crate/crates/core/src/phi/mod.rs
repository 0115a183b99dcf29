//! The Φ catalog: convex functions with analytic derivatives up to third order.
//!
//! Catalog members (`make_phi` names):
//!
//! | name | Φ(t) | domain |
//! |------|------|--------|
//! | `power` | t^α, α ∈ (1, 2] | [0, ∞); all of ℝ when α = 2 |
//! | `xlogx` | t ln t, Φ(0) = 0 | [0, ∞) |
//! | `one_over_t` | 1/t | (0, ∞) |
//! | `neg_log` | −ln t | (0, ∞) |
//! | `binary_entropy_phi1` | 1 − h₂((1+t)/2) | [−1, 1] |
//! | `phi_alpha` | ((1+t)^α + (1−t)^α − 2)/(2^α − 2) | [−1, 1] |
//!
//! `binary_entropy_phi1` uses the base-2 binary entropy so that it is the
//! α → 1 limit of `phi_alpha` (both equal 1 at t = ±1 and 0 at t = 0).

mod classes;

pub use classes::{
    check_class_f, check_class_f1, check_class_f2, g_big_phi, ClassReport, PhiClass, Witness,
    DEGENERACY_THRESHOLD,
};
#[cfg(test)]
pub(crate) use classes::f2_terms;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{Error, Result};

/// A real interval with open/closed flags. Infinite endpoints are always open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Domain {
    pub const fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        Self {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    pub const fn real_line() -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY, false, false)
    }

    pub fn contains(&self, t: f64) -> bool {
        if !t.is_finite() {
            return false;
        }
        let above = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let below = if self.hi_closed { t <= self.hi } else { t < self.hi };
        above && below
    }

    pub fn contains_interior(&self, t: f64) -> bool {
        t.is_finite() && t > self.lo && t < self.hi
    }

    pub fn is_compact(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo_closed && self.hi_closed
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// Function pointers for a programmatically constructed Φ: value, Φ′, Φ″, Φ‴.
#[derive(Clone, Copy)]
pub struct PhiFns {
    pub value: fn(f64) -> f64,
    pub d1: fn(f64) -> f64,
    pub d2: fn(f64) -> f64,
    pub d3: fn(f64) -> f64,
}

#[derive(Clone)]
enum Kind {
    Power(f64),
    XLogX,
    OneOverT,
    NegLog,
    Phi1,
    PhiAlpha(f64),
    Custom(Arc<PhiFns>),
}

/// A convex Φ with analytic derivatives up to order three.
#[derive(Clone)]
pub struct PhiSpec {
    name: String,
    domain: Domain,
    alpha: Option<f64>,
    kind: Kind,
}

impl fmt::Debug for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("alpha", &self.alpha)
            .finish()
    }
}

/// Names accepted by [`make_phi`].
pub const CATALOG: [&str; 6] = [
    "power",
    "xlogx",
    "one_over_t",
    "neg_log",
    "binary_entropy_phi1",
    "phi_alpha",
];

fn alpha_in_range(alpha: Option<f64>) -> Option<f64> {
    alpha.filter(|a| a.is_finite() && *a > 1.0 && *a <= 2.0)
}

/// Builds a catalog Φ.
pub fn make_phi(name: &str, alpha: Option<f64>) -> Result<PhiSpec> {
    let nonneg = Domain::new(0.0, f64::INFINITY, true, false);
    let positive = Domain::new(0.0, f64::INFINITY, false, false);
    let unit = Domain::new(-1.0, 1.0, true, true);
    let no_alpha = |kind: Kind, domain: Domain| {
        if alpha.is_some() {
            return Err(Error::UnexpectedAlpha(name.to_string()));
        }
        Ok(PhiSpec {
            name: name.to_string(),
            domain,
            alpha: None,
            kind,
        })
    };
    match name {
        "power" | "phi_alpha" => {
            let a = alpha_in_range(alpha).ok_or_else(|| Error::AlphaOutOfRange {
                family: name.to_string(),
                alpha,
            })?;
            let (kind, domain) = if name == "power" {
                // t² extends to the whole line; fractional powers do not.
                let domain = if a == 2.0 { Domain::real_line() } else { nonneg };
                (Kind::Power(a), domain)
            } else {
                (Kind::PhiAlpha(a), unit)
            };
            Ok(PhiSpec {
                name: name.to_string(),
                domain,
                alpha: Some(a),
                kind,
            })
        }
        "xlogx" => no_alpha(Kind::XLogX, nonneg),
        "one_over_t" => no_alpha(Kind::OneOverT, positive),
        "neg_log" => no_alpha(Kind::NegLog, positive),
        "binary_entropy_phi1" | "phi1" => {
            let mut p = no_alpha(Kind::Phi1, unit)?;
            p.name = "binary_entropy_phi1".to_string();
            Ok(p)
        }
        other => Err(Error::UnknownPhi(other.to_string())),
    }
}

/// `x ln x` with the continuous extension `0 ln 0 = 0`.
fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

#[derive(Clone, Copy)]
enum Sym {
    Sum,
    Diff,
    SumMinusTwo,
}

/// (1+t)^β ± (1−t)^β, and the sum minus 2, without cancellation near t = 0.
///
/// With c = (β/2)·ln(1−t²) and δ = β·atanh t the three forms are
/// 2e^c cosh δ, 2e^c sinh δ and 2(expm1(c) cosh δ + 2 sinh²(δ/2)).
fn sym_pow(beta: f64, t: f64, which: Sym) -> f64 {
    if t.abs() >= 0.5 {
        let (p, q) = ((1.0 + t).powf(beta), (1.0 - t).powf(beta));
        return match which {
            Sym::Sum => p + q,
            Sym::Diff => p - q,
            Sym::SumMinusTwo => p + q - 2.0,
        };
    }
    let c = 0.5 * beta * (-t * t).ln_1p();
    let delta = beta * t.atanh();
    match which {
        Sym::Sum => 2.0 * c.exp() * delta.cosh(),
        Sym::Diff => 2.0 * c.exp() * delta.sinh(),
        Sym::SumMinusTwo => {
            let h = (0.5 * delta).sinh();
            2.0 * (c.exp_m1() * delta.cosh() + 2.0 * h * h)
        }
    }
}

impl PhiSpec {
    /// A Φ given by explicit function pointers, for shapes outside the catalog.
    pub fn from_fns(name: impl Into<String>, domain: Domain, fns: PhiFns) -> Self {
        Self {
            name: name.into(),
            domain,
            alpha: None,
            kind: Kind::Custom(Arc::new(fns)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// `name` or `name:alpha`, the form the CLI accepts.
    pub fn label(&self) -> String {
        match self.alpha {
            Some(a) => format!("{}:{}", self.name, a),
            None => self.name.clone(),
        }
    }

    /// Default compact search interval for f values.
    pub fn default_fbox(&self) -> (f64, f64) {
        if self.domain.is_compact() {
            (self.domain.lo, self.domain.hi)
        } else {
            (1e-3, 10.0)
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power(a) => {
                if *a == 2.0 {
                    t * t
                } else {
                    t.powf(*a)
                }
            }
            Kind::XLogX => xlnx(t),
            Kind::OneOverT => 1.0 / t,
            Kind::NegLog => -t.ln(),
            Kind::Phi1 => {
                let s = if t.abs() < 0.5 {
                    (-t * t).ln_1p() + 2.0 * t * t.atanh()
                } else {
                    xlnx(1.0 + t) + xlnx(1.0 - t)
                };
                s / (2.0 * std::f64::consts::LN_2)
            }
            Kind::PhiAlpha(a) => sym_pow(*a, t, Sym::SumMinusTwo) / (2f64.powf(*a) - 2.0),
            Kind::Custom(f) => (f.value)(t),
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power(a) => {
                if *a == 2.0 {
                    2.0 * t
                } else {
                    a * t.powf(a - 1.0)
                }
            }
            Kind::XLogX => t.ln() + 1.0,
            Kind::OneOverT => -1.0 / (t * t),
            Kind::NegLog => -1.0 / t,
            Kind::Phi1 => t.atanh() / std::f64::consts::LN_2,
            Kind::PhiAlpha(a) => a * sym_pow(a - 1.0, t, Sym::Diff) / (2f64.powf(*a) - 2.0),
            Kind::Custom(f) => (f.d1)(t),
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power(a) => {
                if *a == 2.0 {
                    2.0
                } else {
                    a * (a - 1.0) * t.powf(a - 2.0)
                }
            }
            Kind::XLogX => 1.0 / t,
            Kind::OneOverT => 2.0 / (t * t * t),
            Kind::NegLog => 1.0 / (t * t),
            Kind::Phi1 => 1.0 / ((1.0 - t * t) * std::f64::consts::LN_2),
            Kind::PhiAlpha(a) => {
                a * (a - 1.0) * sym_pow(a - 2.0, t, Sym::Sum) / (2f64.powf(*a) - 2.0)
            }
            Kind::Custom(f) => (f.d2)(t),
        }
    }

    pub fn d3(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Power(a) => {
                if *a == 2.0 {
                    0.0
                } else {
                    a * (a - 1.0) * (a - 2.0) * t.powf(a - 3.0)
                }
            }
            Kind::XLogX => -1.0 / (t * t),
            Kind::OneOverT => -6.0 / (t * t * t * t),
            Kind::NegLog => -2.0 / (t * t * t),
            Kind::Phi1 => {
                let q = 1.0 - t * t;
                2.0 * t / (q * q * std::f64::consts::LN_2)
            }
            Kind::PhiAlpha(a) => {
                a * (a - 1.0) * (a - 2.0) * sym_pow(a - 3.0, t, Sym::Diff) / (2f64.powf(*a) - 2.0)
            }
            Kind::Custom(f) => (f.d3)(t),
        }
    }

    /// Derivative of order 0..=3.
    pub fn derivative(&self, order: usize, t: f64) -> f64 {
        match order {
            0 => self.value(t),
            1 => self.d1(t),
            2 => self.d2(t),
            3 => self.d3(t),
            _ => panic!("derivative order {order} not available"),
        }
    }

    /// Fails with [`Error::OutsideDomain`] unless `t` lies in the domain.
    pub fn ensure_in_domain(&self, t: f64, outcome: impl FnOnce() -> String) -> Result<()> {
        if self.domain.contains(t) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                phi: self.name.clone(),
                value: t,
                outcome: outcome(),
            })
        }
    }
}

/// All catalog members with representative parameters, for sweeps and tests.
pub fn catalog_samples() -> Vec<PhiSpec> {
    vec![
        make_phi("power", Some(2.0)).unwrap(),
        make_phi("power", Some(1.5)).unwrap(),
        make_phi("xlogx", None).unwrap(),
        make_phi("one_over_t", None).unwrap(),
        make_phi("neg_log", None).unwrap(),
        make_phi("binary_entropy_phi1", None).unwrap(),
        make_phi("phi_alpha", Some(1.5)).unwrap(),
        make_phi("phi_alpha", Some(2.0)).unwrap(),
    ]
}

/// Parses `name` or `name:alpha`.
pub fn parse_phi(spec: &str) -> Result<PhiSpec> {
    match spec.split_once(':') {
        Some((name, a)) => {
            let alpha: f64 = a
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad alpha `{a}` in `{spec}`")))?;
            make_phi(name, Some(alpha))
        }
        None => make_phi(spec, None),
    }
}
