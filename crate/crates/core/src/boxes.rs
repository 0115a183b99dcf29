//! No-signaling boxes and wirings.
//!
//! A wiring of n boxes is enumerated exactly for fixed inputs (x′, y′): every
//! Alice path (boxes, inputs, outputs in her action order, then A′) is paired
//! with every Bob path and weighted by the product of the component box
//! probabilities. The resulting [`WiredJoint`] is a pmf over
//! `Pi1..Pin, X1..Xn, A1..An, Omega1..Omegan, Y1..Yn, B1..Bn, A', B'` where
//! `Pi_i` is the (0-based) action in which Alice uses box i.
//!
//! Transcripts are ordered lists of (box, input, output) triples. The
//! extended transcripts are T_i^e = (T_i, X_i, Π_i) and S_i^e = (S_i, Y_i, Ω_i),
//! and per action j, T̃_j^e = (T̃_j, X̃_j, Π̃_j).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{ci_residual_parts, h_of_cond_mean, InequalityReport, JointDistribution, Partition};
use crate::optim::restart_rng;
use crate::phi::PhiSpec;
use crate::ribbon::{
    require_unit_square, ribbon_membership, MembershipVerdict, PointCheck, PropertyReport, RibbonOptions, RibbonPoint,
};
use crate::{Error, RandomFunction, Result};

/// Normalization tolerance for boxes and strategy distributions.
pub const BOX_TOL: f64 = 1e-12;

/// Largest number of boxes [`wire`] accepts.
pub const MAX_BOXES: usize = 3;

/// A conditional pmf p(a, b | x, y), stored flat in `[x][y][a][b]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct NsBox {
    sizes: [usize; 4],
    p: Vec<f64>,
}

impl NsBox {
    /// `sizes` is (|X|, |Y|, |A|, |B|).
    pub fn new(sizes: [usize; 4], p: Vec<f64>) -> Result<Self> {
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidBox(format!("empty alphabet in {sizes:?}")));
        }
        let expect: usize = sizes.iter().product();
        if p.len() != expect {
            return Err(Error::InvalidBox(format!(
                "{} entries for alphabets {sizes:?}, expected {expect}",
                p.len()
            )));
        }
        let b = Self { sizes, p };
        for x in 0..sizes[0] {
            for y in 0..sizes[1] {
                let mut total = 0.0;
                for a in 0..sizes[2] {
                    for bb in 0..sizes[3] {
                        let v = b.p(x, y, a, bb);
                        if !v.is_finite() || v < 0.0 {
                            return Err(Error::InvalidBox(format!("p({a},{bb}|{x},{y}) = {v}")));
                        }
                        total += v;
                    }
                }
                if (total - 1.0).abs() > BOX_TOL {
                    return Err(Error::InvalidBox(format!(
                        "p(·,·|{x},{y}) sums to {total}"
                    )));
                }
            }
        }
        Ok(b)
    }

    pub fn from_nested(p: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let nx = p.len();
        let ny = p.first().map_or(0, |r| r.len());
        let na = p.first().and_then(|r| r.first()).map_or(0, |r| r.len());
        let nb = p
            .first()
            .and_then(|r| r.first())
            .and_then(|r| r.first())
            .map_or(0, |r| r.len());
        let mut flat = Vec::with_capacity(nx * ny * na * nb);
        for (x, px) in p.iter().enumerate() {
            if px.len() != ny {
                return Err(Error::InvalidBox(format!("p[{x}] has {} rows, expected {ny}", px.len())));
            }
            for (y, pxy) in px.iter().enumerate() {
                if pxy.len() != na {
                    return Err(Error::InvalidBox(format!("p[{x}][{y}] has {} rows, expected {na}", pxy.len())));
                }
                for (a, row) in pxy.iter().enumerate() {
                    if row.len() != nb {
                        return Err(Error::InvalidBox(format!(
                            "p[{x}][{y}][{a}] has {} entries, expected {nb}",
                            row.len()
                        )));
                    }
                    flat.extend_from_slice(row);
                }
            }
        }
        Self::new([nx, ny, na, nb], flat)
    }

    pub fn nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let [nx, ny, na, nb] = self.sizes;
        (0..nx)
            .map(|x| {
                (0..ny)
                    .map(|y| (0..na).map(|a| (0..nb).map(|b| self.p(x, y, a, b)).collect()).collect())
                    .collect()
            })
            .collect()
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.sizes
    }

    pub fn p(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        let [_, ny, na, nb] = self.sizes;
        self.p[((x * ny + y) * na + a) * nb + b]
    }

    /// p(a, b | x, y) as a joint over `A`, `B`.
    pub fn cell_joint(&self, x: usize, y: usize) -> Result<JointDistribution> {
        let [nx, ny, na, nb] = self.sizes;
        if x >= nx || y >= ny {
            return Err(Error::InvalidArgument(format!("input ({x},{y}) outside box alphabets")));
        }
        let start = (x * ny + y) * na * nb;
        JointDistribution::new(vec!["A".into(), "B".into()], vec![na, nb], &self.p[start..start + na * nb])
    }

    /// Per-input local post-processing: rows are p(a′|a) and p(b′|b).
    pub fn post_process(&self, chan_a: &[Vec<f64>], chan_b: &[Vec<f64>]) -> Result<Self> {
        let [nx, ny, na, nb] = self.sizes;
        let oa = chan_a.first().map_or(0, |r| r.len());
        let ob = chan_b.first().map_or(0, |r| r.len());
        crate::entropy::validate_channel(chan_a, na, oa)?;
        crate::entropy::validate_channel(chan_b, nb, ob)?;
        let mut p = vec![0.0; nx * ny * oa * ob];
        for x in 0..nx {
            for y in 0..ny {
                for a in 0..na {
                    for b in 0..nb {
                        let q = self.p(x, y, a, b);
                        for (a2, &ca) in chan_a[a].iter().enumerate() {
                            for (b2, &cb) in chan_b[b].iter().enumerate() {
                                p[((x * ny + y) * oa + a2) * ob + b2] += q * ca * cb;
                            }
                        }
                    }
                }
            }
        }
        renormalize_columns([nx, ny, oa, ob], &mut p);
        Self::new([nx, ny, oa, ob], p)
    }
}

/// Rescales each (x, y) column to unit mass (removes accumulated rounding).
fn renormalize_columns(sizes: [usize; 4], p: &mut [f64]) {
    let col = sizes[2] * sizes[3];
    for chunk in p.chunks_mut(col) {
        let t: f64 = chunk.iter().sum();
        if t > 0.0 {
            chunk.iter_mut().for_each(|v| *v /= t);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StandardBox {
    Pr,
    Isotropic { rho: f64 },
    SharedCoin,
    /// a = `a[x]`, b = `b[y]`.
    LocalDeterministic { a: Vec<u32>, b: Vec<u32> },
}

impl std::str::FromStr for StandardBox {
    type Err = Error;

    /// `pr`, `shared_coin`, `isotropic:RHO`, `local:A0A1:B0B1` (bits).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown standard box `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let bits = |t: &str| -> Result<Vec<u32>> {
            t.chars().map(|c| c.to_digit(10).ok_or_else(bad)).collect()
        };
        match parts.as_slice() {
            ["pr"] => Ok(Self::Pr),
            ["shared_coin"] => Ok(Self::SharedCoin),
            ["isotropic", r] => Ok(Self::Isotropic {
                rho: r.parse().map_err(|_| bad())?,
            }),
            ["local", a, b] => Ok(Self::LocalDeterministic {
                a: bits(a)?,
                b: bits(b)?,
            }),
            _ => Err(bad()),
        }
    }
}

pub fn make_standard_box(kind: &StandardBox) -> Result<NsBox> {
    let mut p = vec![0.0; 16];
    let idx = |x: usize, y: usize, a: usize, b: usize| ((x * 2 + y) * 2 + a) * 2 + b;
    let pr = |x: usize, y: usize, a: usize, b: usize| if a ^ b == x & y { 0.5 } else { 0.0 };
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    p[idx(x, y, a, b)] = match kind {
                        StandardBox::Pr => pr(x, y, a, b),
                        StandardBox::Isotropic { rho } => {
                            if !(0.0..=1.0).contains(rho) {
                                return Err(Error::InvalidArgument(format!("isotropic ρ = {rho} outside [0, 1]")));
                            }
                            rho * pr(x, y, a, b) + (1.0 - rho) * 0.25
                        }
                        StandardBox::SharedCoin => {
                            if a == b {
                                0.5
                            } else {
                                0.0
                            }
                        }
                        StandardBox::LocalDeterministic { a: fa, b: fb } => {
                            if fa.len() != 2 || fb.len() != 2 || fa.iter().chain(fb).any(|&v| v > 1) {
                                return Err(Error::InvalidArgument(
                                    "local deterministic box needs two output bits per party".into(),
                                ));
                            }
                            if fa[x] as usize == a && fb[y] as usize == b {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                }
            }
        }
    }
    NsBox::new([2, 2, 2, 2], p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalingWitness {
    /// The party whose marginal moves: "A" or "B".
    pub party: String,
    /// Own input, the two inputs of the other party, and the output.
    pub own_input: usize,
    pub other_inputs: (usize, usize),
    pub output: usize,
    pub deviation: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoSignalingReport {
    pub no_signaling: bool,
    pub max_deviation: f64,
    pub witness: Option<SignalingWitness>,
}

pub fn is_no_signaling(b: &NsBox, tol: f64) -> NoSignalingReport {
    let [nx, ny, na, nb] = b.sizes;
    let marg_a = |x: usize, y: usize, a: usize| (0..nb).map(|bb| b.p(x, y, a, bb)).sum::<f64>();
    let marg_b = |x: usize, y: usize, bb: usize| (0..na).map(|a| b.p(x, y, a, bb)).sum::<f64>();
    let mut max_dev = 0.0f64;
    let mut witness = None;
    let mut note = |dev: f64, w: &dyn Fn() -> SignalingWitness| {
        max_dev = max_dev.max(dev);
        if dev > tol && witness.is_none() {
            witness = Some(w());
        }
    };
    for x in 0..nx {
        for y in 1..ny {
            for a in 0..na {
                let dev = (marg_a(x, y, a) - marg_a(x, 0, a)).abs();
                note(dev, &|| SignalingWitness {
                    party: "A".into(),
                    own_input: x,
                    other_inputs: (0, y),
                    output: a,
                    deviation: dev,
                    description: format!("A-marginal depends on y: p(a={a}|x={x}) differs between y=0 and y={y}"),
                });
            }
        }
    }
    for y in 0..ny {
        for x in 1..nx {
            for bb in 0..nb {
                let dev = (marg_b(x, y, bb) - marg_b(0, y, bb)).abs();
                note(dev, &|| SignalingWitness {
                    party: "B".into(),
                    own_input: y,
                    other_inputs: (0, x),
                    output: bb,
                    deviation: dev,
                    description: format!("B-marginal depends on x: p(b={bb}|y={y}) differs between x=0 and x={x}"),
                });
            }
        }
    }
    NoSignalingReport {
        no_signaling: witness.is_none(),
        max_deviation: max_dev,
        witness,
    }
}

/// Ribbon membership of a box: out as soon as one input cell is out.
pub fn box_ribbon_membership(phi: &PhiSpec, b: &NsBox, pt: RibbonPoint, opts: &RibbonOptions) -> Result<MembershipVerdict> {
    let [nx, ny, _, _] = b.sizes;
    let mut best: Option<MembershipVerdict> = None;
    let mut evaluations = 0;
    for x in 0..nx {
        for y in 0..ny {
            let cell = (x * ny + y) as u64;
            let o = opts.with_seed(opts.search.seed.wrapping_add(cell));
            let mut v = ribbon_membership(phi, &b.cell_joint(x, y)?, &["A"], &["B"], pt, &o)?;
            evaluations += v.search_budget.evaluations;
            v.cell = Some((x, y));
            if v.is_out() {
                v.search_budget.evaluations = evaluations;
                return Ok(v);
            }
            if best.as_ref().map_or(true, |bv| v.violation_margin > bv.violation_margin) {
                best = Some(v);
            }
        }
    }
    let mut v = best.expect("boxes have at least one input cell");
    v.search_budget.evaluations = evaluations;
    Ok(v)
}

/// One action of a party: the box used, its input and its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    #[serde(rename = "box")]
    pub box_index: usize,
    pub input: u32,
    pub output: u32,
}

/// `x{input}|box,in,out;box,in,out`, the key format of strategy tables.
pub fn transcript_key(input: u32, transcript: &[Step]) -> String {
    let steps: Vec<String> = transcript
        .iter()
        .map(|s| format!("{},{},{}", s.box_index, s.input, s.output))
        .collect();
    format!("x{input}|{}", steps.join(";"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    #[serde(rename = "box")]
    pub box_index: usize,
    pub input: u32,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputChoice {
    pub output: u32,
    pub p: f64,
}

/// A party's wiring rule. `input` is the party's own x′ (or y′).
pub trait PartyPolicy: Send + Sync {
    /// Distribution over (unused box, input) for the next action.
    fn choice(&self, input: u32, transcript: &[Step]) -> Result<Vec<Choice>>;
    /// Distribution over the final output after all n actions.
    fn output(&self, input: u32, transcript: &[Step]) -> Result<Vec<OutputChoice>>;
}

/// A policy given by explicit tables keyed by [`transcript_key`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TablePolicy {
    pub choice: BTreeMap<String, Vec<Choice>>,
    pub output: BTreeMap<String, Vec<OutputChoice>>,
}

impl PartyPolicy for TablePolicy {
    fn choice(&self, input: u32, transcript: &[Step]) -> Result<Vec<Choice>> {
        let k = transcript_key(input, transcript);
        self.choice
            .get(&k)
            .cloned()
            .ok_or_else(|| Error::InvalidStrategy(format!("no choice entry for transcript `{k}`")))
    }

    fn output(&self, input: u32, transcript: &[Step]) -> Result<Vec<OutputChoice>> {
        let k = transcript_key(input, transcript);
        self.output
            .get(&k)
            .cloned()
            .ok_or_else(|| Error::InvalidStrategy(format!("no output entry for transcript `{k}`")))
    }
}

type ChoiceFn = dyn Fn(u32, &[Step]) -> Vec<Choice> + Send + Sync;
type OutputFn = dyn Fn(u32, &[Step]) -> Vec<OutputChoice> + Send + Sync;

/// A policy given by closures.
#[derive(Clone)]
pub struct FnPolicy {
    choice: Arc<ChoiceFn>,
    output: Arc<OutputFn>,
}

impl FnPolicy {
    pub fn new(
        choice: impl Fn(u32, &[Step]) -> Vec<Choice> + Send + Sync + 'static,
        output: impl Fn(u32, &[Step]) -> Vec<OutputChoice> + Send + Sync + 'static,
    ) -> Self {
        Self {
            choice: Arc::new(choice),
            output: Arc::new(output),
        }
    }

    /// Uses boxes 0, 1, … in order; the input of the next box and the final
    /// output are deterministic functions of (own input, transcript).
    pub fn sequential(
        next_input: impl Fn(u32, &[Step]) -> u32 + Send + Sync + 'static,
        output: impl Fn(u32, &[Step]) -> u32 + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            move |x, t| {
                vec![Choice {
                    box_index: t.len(),
                    input: next_input(x, t),
                    p: 1.0,
                }]
            },
            move |x, t| {
                vec![OutputChoice {
                    output: output(x, t),
                    p: 1.0,
                }]
            },
        )
    }
}

impl fmt::Debug for FnPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnPolicy")
    }
}

impl PartyPolicy for FnPolicy {
    fn choice(&self, input: u32, transcript: &[Step]) -> Result<Vec<Choice>> {
        Ok((self.choice)(input, transcript))
    }

    fn output(&self, input: u32, transcript: &[Step]) -> Result<Vec<OutputChoice>> {
        Ok((self.output)(input, transcript))
    }
}

/// Per-party wiring rules plus the wired box's alphabets.
#[derive(Clone)]
pub struct WiringStrategy {
    pub n: usize,
    /// |X′|, |Y′|.
    pub inputs: [usize; 2],
    /// |A′|, |B′|.
    pub outputs: [usize; 2],
    pub alice: Arc<dyn PartyPolicy>,
    pub bob: Arc<dyn PartyPolicy>,
}

impl fmt::Debug for WiringStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WiringStrategy")
            .field("n", &self.n)
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .finish_non_exhaustive()
    }
}

impl WiringStrategy {
    pub fn new(
        n: usize,
        inputs: [usize; 2],
        outputs: [usize; 2],
        alice: impl PartyPolicy + 'static,
        bob: impl PartyPolicy + 'static,
    ) -> Self {
        Self {
            n,
            inputs,
            outputs,
            alice: Arc::new(alice),
            bob: Arc::new(bob),
        }
    }

    /// Tables for the transcripts reachable under `boxes`, for both parties.
    pub fn tabulate(&self, boxes: &[NsBox]) -> Result<(TablePolicy, TablePolicy)> {
        let mut out = Vec::new();
        for party in [Party::Alice, Party::Bob] {
            let mut table = TablePolicy::default();
            for input in 0..self.inputs[party.idx()] as u32 {
                for path in party_paths(self, boxes, party, input)? {
                    let steps = &path.steps;
                    for k in 0..=steps.len() {
                        let key = transcript_key(input, &steps[..k]);
                        if k < steps.len() {
                            if !table.choice.contains_key(&key) {
                                let c = self.policy(party).choice(input, &steps[..k])?;
                                table.choice.insert(key, c);
                            }
                        } else if !table.output.contains_key(&key) {
                            let o = self.policy(party).output(input, steps)?;
                            table.output.insert(key, o);
                        }
                    }
                }
            }
            out.push(table);
        }
        let bob = out.pop().expect("two tables");
        let alice = out.pop().expect("two tables");
        Ok((alice, bob))
    }

    fn policy(&self, party: Party) -> &dyn PartyPolicy {
        match party {
            Party::Alice => self.alice.as_ref(),
            Party::Bob => self.bob.as_ref(),
        }
    }
}

/// Parity wiring over n boxes: each party feeds its own input to box 0,
/// then the previous output to the next box, and outputs the XOR of all its
/// outputs.
pub fn xor_wiring(n: usize) -> WiringStrategy {
    let party = || {
        FnPolicy::sequential(
            |x, t: &[Step]| t.last().map_or(x, |s| s.output),
            |_, t: &[Step]| t.iter().fold(0, |acc, s| acc ^ s.output),
        )
    };
    WiringStrategy::new(n, [2, 2], [2, 2], party(), party())
}

/// Two-box wiring in the order 1 → 2 with the second input taken from the
/// first (input, output) pair; the output is (a₁, a₂) encoded as a₁·|A₂| + a₂.
pub fn two_box_strategy(
    box2: &NsBox,
    box1: &NsBox,
    x2_map: impl Fn(u32, u32) -> u32 + Send + Sync + 'static,
    y2_map: impl Fn(u32, u32) -> u32 + Send + Sync + 'static,
) -> WiringStrategy {
    let [_, _, a2, b2] = box2.sizes;
    let [x1, y1, a1, b1] = box1.sizes;
    let alice = FnPolicy::sequential(
        move |x, t: &[Step]| t.first().map_or(x, |s| x2_map(s.input, s.output)),
        move |_, t: &[Step]| t[0].output * a2 as u32 + t[1].output,
    );
    let bob = FnPolicy::sequential(
        move |y, t: &[Step]| t.first().map_or(y, |s| y2_map(s.input, s.output)),
        move |_, t: &[Step]| t[0].output * b2 as u32 + t[1].output,
    );
    WiringStrategy::new(2, [x1, y1], [a1 * a2, b1 * b2], alice, bob)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Party {
    Alice,
    Bob,
}

impl Party {
    fn idx(self) -> usize {
        match self {
            Party::Alice => 0,
            Party::Bob => 1,
        }
    }
}

struct Path {
    steps: Vec<Step>,
    out: u32,
    weight: f64,
}

fn check_normalized(total: f64, what: impl Fn() -> String) -> Result<()> {
    if (total - 1.0).abs() > BOX_TOL {
        return Err(Error::InvalidStrategy(format!("{} sums to {total}", what())));
    }
    Ok(())
}

/// All paths of one party with their policy weights (box outputs excluded).
fn party_paths(strategy: &WiringStrategy, boxes: &[NsBox], party: Party, input: u32) -> Result<Vec<Path>> {
    let policy = strategy.policy(party);
    let (in_ax, out_ax) = match party {
        Party::Alice => (0, 2),
        Party::Bob => (1, 3),
    };
    let n = strategy.n;
    let mut done = Vec::new();
    let mut stack = vec![(Vec::<Step>::new(), 1.0)];
    while let Some((steps, w)) = stack.pop() {
        let key = || transcript_key(input, &steps);
        if steps.len() == n {
            let outs = policy.output(input, &steps)?;
            check_normalized(outs.iter().map(|o| o.p).sum(), || format!("output rule at `{}`", key()))?;
            for o in outs {
                if o.p < 0.0 || !o.p.is_finite() {
                    return Err(Error::InvalidStrategy(format!("negative output weight at `{}`", key())));
                }
                if o.output as usize >= strategy.outputs[party.idx()] {
                    return Err(Error::InvalidStrategy(format!(
                        "output {} at `{}` outside alphabet of size {}",
                        o.output,
                        key(),
                        strategy.outputs[party.idx()]
                    )));
                }
                if o.p > 0.0 {
                    done.push(Path {
                        steps: steps.clone(),
                        out: o.output,
                        weight: w * o.p,
                    });
                }
            }
            continue;
        }
        let choices = policy.choice(input, &steps)?;
        check_normalized(choices.iter().map(|c| c.p).sum(), || format!("choice rule at `{}`", key()))?;
        for c in choices {
            if c.p < 0.0 || !c.p.is_finite() {
                return Err(Error::InvalidStrategy(format!("negative choice weight at `{}`", key())));
            }
            if c.box_index >= n {
                return Err(Error::InvalidStrategy(format!(
                    "box index {} at `{}` out of range (n = {n})",
                    c.box_index,
                    key()
                )));
            }
            if steps.iter().any(|s| s.box_index == c.box_index) {
                return Err(Error::InvalidStrategy(format!(
                    "box {} reused at `{}`",
                    c.box_index,
                    key()
                )));
            }
            let sizes = boxes[c.box_index].sizes;
            if c.input as usize >= sizes[in_ax] {
                return Err(Error::InvalidStrategy(format!(
                    "input {} for box {} at `{}` outside alphabet of size {}",
                    c.input,
                    c.box_index,
                    key(),
                    sizes[in_ax]
                )));
            }
            if c.p == 0.0 {
                continue;
            }
            for o in 0..sizes[out_ax] as u32 {
                let mut next = steps.clone();
                next.push(Step {
                    box_index: c.box_index,
                    input: c.input,
                    output: o,
                });
                stack.push((next, w * c.p));
            }
        }
    }
    done.reverse();
    Ok(done)
}

/// Variable names of a wired joint with n boxes.
pub fn wired_var_names(n: usize) -> Vec<String> {
    let mut v = Vec::with_capacity(6 * n + 2);
    for prefix in ["Pi", "X", "A", "Omega", "Y", "B"] {
        for i in 1..=n {
            v.push(format!("{prefix}{i}"));
        }
    }
    v.push("A'".into());
    v.push("B'".into());
    v
}

/// Per-cell random variable of a wired joint; indices are 0-based boxes
/// (plain variables, T, S) or actions (tilde variables).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Pi(usize),
    X(usize),
    A(usize),
    Omega(usize),
    Y(usize),
    B(usize),
    APrime,
    BPrime,
    /// Alice's transcript before using box i, and T_i^e = (T_i, X_i, Π_i).
    T(usize),
    TExt(usize),
    S(usize),
    SExt(usize),
    /// Alice's transcript before action j, and T̃_j^e = (T̃_j, X̃_j, Π̃_j).
    TTilde(usize),
    TTildeExt(usize),
    STilde(usize),
    STildeExt(usize),
    PiTilde(usize),
    XTilde(usize),
    ATilde(usize),
    OmegaTilde(usize),
    YTilde(usize),
    BTilde(usize),
    /// A_{[n]} X_{[n]} Π_{[n]}.
    AliceAll,
    /// B_{[n]} Y_{[n]} Ω_{[n]}.
    BobAll,
}

/// The exhaustively enumerated joint of a wiring at fixed (x′, y′).
#[derive(Debug, Clone)]
pub struct WiredJoint {
    pub n: usize,
    pub x_prime: u32,
    pub y_prime: u32,
    pub dist: JointDistribution,
    /// Total mass before normalization; differs from 1 only for signaling
    /// components.
    pub raw_mass: f64,
}

struct CellView<'a> {
    pi: &'a [u32],
    x: &'a [u32],
    a: &'a [u32],
    om: &'a [u32],
    y: &'a [u32],
    b: &'a [u32],
    rest: &'a [u32],
    pit: Vec<usize>,
    omt: Vec<usize>,
}

impl<'a> CellView<'a> {
    fn new(c: &'a [u32], n: usize) -> Self {
        let inv = |perm: &[u32]| {
            let mut t = vec![0; n];
            for (bx, &act) in perm.iter().enumerate() {
                t[act as usize] = bx;
            }
            t
        };
        let pi = &c[0..n];
        let om = &c[3 * n..4 * n];
        Self {
            pi,
            x: &c[n..2 * n],
            a: &c[2 * n..3 * n],
            om,
            y: &c[4 * n..5 * n],
            b: &c[5 * n..6 * n],
            rest: &c[6 * n..],
            pit: inv(pi),
            omt: inv(om),
        }
    }

    fn transcript(out: &mut Vec<u32>, perm_inv: &[usize], inp: &[u32], outp: &[u32], upto: usize) {
        out.push(upto as u32);
        for &bx in &perm_inv[..upto] {
            out.extend([bx as u32, inp[bx], outp[bx]]);
        }
    }

    fn push(&self, v: Var, out: &mut Vec<u32>) {
        match v {
            Var::Pi(i) => out.push(self.pi[i]),
            Var::X(i) => out.push(self.x[i]),
            Var::A(i) => out.push(self.a[i]),
            Var::Omega(i) => out.push(self.om[i]),
            Var::Y(i) => out.push(self.y[i]),
            Var::B(i) => out.push(self.b[i]),
            Var::APrime => out.push(self.rest[0]),
            Var::BPrime => out.push(self.rest[1]),
            Var::T(i) => Self::transcript(out, &self.pit, self.x, self.a, self.pi[i] as usize),
            Var::TExt(i) => {
                self.push(Var::T(i), out);
                out.extend([self.x[i], self.pi[i]]);
            }
            Var::S(i) => Self::transcript(out, &self.omt, self.y, self.b, self.om[i] as usize),
            Var::SExt(i) => {
                self.push(Var::S(i), out);
                out.extend([self.y[i], self.om[i]]);
            }
            Var::TTilde(j) => Self::transcript(out, &self.pit, self.x, self.a, j),
            Var::TTildeExt(j) => {
                self.push(Var::TTilde(j), out);
                out.extend([self.x[self.pit[j]], self.pit[j] as u32]);
            }
            Var::STilde(j) => Self::transcript(out, &self.omt, self.y, self.b, j),
            Var::STildeExt(j) => {
                self.push(Var::STilde(j), out);
                out.extend([self.y[self.omt[j]], self.omt[j] as u32]);
            }
            Var::PiTilde(j) => out.push(self.pit[j] as u32),
            Var::XTilde(j) => out.push(self.x[self.pit[j]]),
            Var::ATilde(j) => out.push(self.a[self.pit[j]]),
            Var::OmegaTilde(j) => out.push(self.omt[j] as u32),
            Var::YTilde(j) => out.push(self.y[self.omt[j]]),
            Var::BTilde(j) => out.push(self.b[self.omt[j]]),
            Var::AliceAll => {
                out.extend_from_slice(self.a);
                out.extend_from_slice(self.x);
                out.extend_from_slice(self.pi);
            }
            Var::BobAll => {
                out.extend_from_slice(self.b);
                out.extend_from_slice(self.y);
                out.extend_from_slice(self.om);
            }
        }
    }
}

impl WiredJoint {
    pub fn probs(&self) -> &[f64] {
        self.dist.probs()
    }

    /// Values of the listed variables at support cell `i`, concatenated
    /// (transcripts are length-prefixed).
    pub fn key(&self, i: usize, vars: &[Var]) -> Vec<u32> {
        let view = CellView::new(self.dist.cell(i), self.n);
        let mut out = Vec::new();
        for &v in vars {
            view.push(v, &mut out);
        }
        out
    }

    pub fn partition(&self, vars: &[Var]) -> Partition {
        if vars.is_empty() {
            return Partition::trivial(self.dist.support_len());
        }
        Partition::from_keys((0..self.dist.support_len()).map(|i| self.key(i, vars)))
    }

    /// p(a′, b′) at this (x′, y′), row-major.
    pub fn output_column(&self, outputs: [usize; 2]) -> Vec<f64> {
        let mut col = vec![0.0; outputs[0] * outputs[1]];
        let n = self.n;
        for (i, &p) in self.probs().iter().enumerate() {
            let c = self.dist.cell(i);
            col[c[6 * n] as usize * outputs[1] + c[6 * n + 1] as usize] += p;
        }
        col
    }

    /// The conditional box p(a_i, b_i | x_i, y_i) recovered from the joint;
    /// inputs never used get the uniform column.
    pub fn component_box(&self, i: usize, sizes: [usize; 4]) -> Result<NsBox> {
        let [nx, ny, na, nb] = sizes;
        let mut p = vec![0.0; nx * ny * na * nb];
        let n = self.n;
        for (k, &q) in self.probs().iter().enumerate() {
            let c = self.dist.cell(k);
            let (x, y, a, b) = (c[n + i], c[4 * n + i], c[2 * n + i], c[5 * n + i]);
            p[((x as usize * ny + y as usize) * na + a as usize) * nb + b as usize] += q;
        }
        for chunk in p.chunks_mut(na * nb) {
            let t: f64 = chunk.iter().sum();
            if t > 0.0 {
                chunk.iter_mut().for_each(|v| *v /= t);
            } else {
                chunk.iter_mut().for_each(|v| *v = 1.0 / (na * nb) as f64);
            }
        }
        NsBox::new(sizes, p)
    }

    /// Random per-cell values in `fbox` that only depend on the component
    /// variables (not on A′, B′).
    pub fn random_values<R: Rng>(&self, rng: &mut R, fbox: (f64, f64)) -> Vec<f64> {
        let keys = self.partition(&[Var::AliceAll, Var::BobAll]);
        let table: Vec<f64> = (0..keys.blocks()).map(|_| rng.gen_range(fbox.0..=fbox.1)).collect();
        keys.labels().iter().map(|&b| table[b]).collect()
    }
}

fn validate_wiring(boxes: &[NsBox], strategy: &WiringStrategy, x_prime: u32, y_prime: u32) -> Result<()> {
    if strategy.n != boxes.len() {
        return Err(Error::InvalidStrategy(format!(
            "strategy wires {} boxes, {} given",
            strategy.n,
            boxes.len()
        )));
    }
    if boxes.is_empty() || boxes.len() > MAX_BOXES {
        return Err(Error::InvalidArgument(format!(
            "wiring supports 1 to {MAX_BOXES} boxes, got {}",
            boxes.len()
        )));
    }
    if let Some(b) = boxes.iter().find(|b| b.sizes.iter().any(|&s| s > 2)) {
        return Err(Error::InvalidArgument(format!(
            "wiring supports binary alphabets only, got {:?}",
            b.sizes
        )));
    }
    if x_prime as usize >= strategy.inputs[0] || y_prime as usize >= strategy.inputs[1] {
        return Err(Error::InvalidArgument(format!(
            "wired input ({x_prime},{y_prime}) outside {:?}",
            strategy.inputs
        )));
    }
    Ok(())
}

/// Exhaustive enumeration of the wiring at (x′, y′).
pub fn wire(boxes: &[NsBox], strategy: &WiringStrategy, x_prime: u32, y_prime: u32) -> Result<WiredJoint> {
    validate_wiring(boxes, strategy, x_prime, y_prime)?;
    for (i, b) in boxes.iter().enumerate() {
        if !is_no_signaling(b, BOX_TOL).no_signaling {
            log::warn!("component box {} is signaling; the wired pmf is renormalized", i + 1);
        }
    }
    let n = boxes.len();
    let alice = party_paths(strategy, boxes, Party::Alice, x_prime)?;
    let bob = party_paths(strategy, boxes, Party::Bob, y_prime)?;
    let mut sizes = Vec::with_capacity(6 * n + 2);
    for ax in [None, Some(0), Some(2), None, Some(1), Some(3)] {
        for b in boxes {
            sizes.push(ax.map_or(n, |k| b.sizes[k]));
        }
    }
    sizes.extend(strategy.outputs);
    let mut cells = Vec::with_capacity(alice.len() * bob.len());
    let mut ax = vec![(0u32, 0u32, 0u32); n];
    let mut bx = vec![(0u32, 0u32, 0u32); n];
    for pa in &alice {
        for (act, s) in pa.steps.iter().enumerate() {
            ax[s.box_index] = (act as u32, s.input, s.output);
        }
        for pb in &bob {
            for (act, s) in pb.steps.iter().enumerate() {
                bx[s.box_index] = (act as u32, s.input, s.output);
            }
            let mut w = pa.weight * pb.weight;
            for (i, b) in boxes.iter().enumerate() {
                w *= b.p(ax[i].1 as usize, bx[i].1 as usize, ax[i].2 as usize, bx[i].2 as usize);
            }
            if w == 0.0 {
                continue;
            }
            let mut c = Vec::with_capacity(6 * n + 2);
            c.extend(ax.iter().map(|t| t.0 as usize));
            c.extend(ax.iter().map(|t| t.1 as usize));
            c.extend(ax.iter().map(|t| t.2 as usize));
            c.extend(bx.iter().map(|t| t.0 as usize));
            c.extend(bx.iter().map(|t| t.1 as usize));
            c.extend(bx.iter().map(|t| t.2 as usize));
            c.push(pa.out as usize);
            c.push(pb.out as usize);
            cells.push((c, w));
        }
    }
    let (dist, raw_mass) = JointDistribution::from_cells_normalized(wired_var_names(n), sizes, cells)?;
    if (raw_mass - 1.0).abs() > BOX_TOL {
        log::warn!("wired mass {raw_mass} at ({x_prime},{y_prime}) renormalized to 1");
    }
    Ok(WiredJoint {
        n,
        x_prime,
        y_prime,
        dist,
        raw_mass,
    })
}

/// The wired box p(a′, b′ | x′, y′).
pub fn wired_box(boxes: &[NsBox], strategy: &WiringStrategy) -> Result<NsBox> {
    let [nx, ny] = strategy.inputs;
    let [na, nb] = strategy.outputs;
    let mut p = Vec::with_capacity(nx * ny * na * nb);
    for x in 0..nx as u32 {
        for y in 0..ny as u32 {
            p.extend(wire(boxes, strategy, x, y)?.output_column(strategy.outputs));
        }
    }
    renormalize_columns([nx, ny, na, nb], &mut p);
    NsBox::new([nx, ny, na, nb], p)
}

/// Fixed order 1 → 2: x₂ = x2_map(x₁, a₁), y₂ = y2_map(y₁, b₁), outputs
/// (a₁, a₂) and (b₁, b₂) encoded as in [`two_box_strategy`].
pub fn simple_two_box_wire(
    box1: &NsBox,
    box2: &NsBox,
    x2_map: impl Fn(u32, u32) -> u32,
    y2_map: impl Fn(u32, u32) -> u32,
    x_prime: u32,
    y_prime: u32,
) -> Result<WiredJoint> {
    let [nx1, ny1, na1, nb1] = box1.sizes;
    let [nx2, ny2, na2, nb2] = box2.sizes;
    if x_prime as usize >= nx1 || y_prime as usize >= ny1 {
        return Err(Error::InvalidArgument(format!("input ({x_prime},{y_prime}) outside box 1")));
    }
    let sizes = vec![2, 2, nx1, nx2, na1, na2, 2, 2, ny1, ny2, nb1, nb2, na1 * na2, nb1 * nb2];
    let mut cells = Vec::new();
    for a1 in 0..na1 {
        let x2 = x2_map(x_prime, a1 as u32) as usize;
        if x2 >= nx2 {
            return Err(Error::InvalidArgument(format!("x₂ map gives {x2}, box 2 has {nx2} inputs")));
        }
        for b1 in 0..nb1 {
            let y2 = y2_map(y_prime, b1 as u32) as usize;
            if y2 >= ny2 {
                return Err(Error::InvalidArgument(format!("y₂ map gives {y2}, box 2 has {ny2} inputs")));
            }
            let p1 = box1.p(x_prime as usize, y_prime as usize, a1, b1);
            for a2 in 0..na2 {
                for b2 in 0..nb2 {
                    let c = vec![
                        0,
                        1,
                        x_prime as usize,
                        x2,
                        a1,
                        a2,
                        0,
                        1,
                        y_prime as usize,
                        y2,
                        b1,
                        b2,
                        a1 * na2 + a2,
                        b1 * nb2 + b2,
                    ];
                    cells.push((c, p1 * box2.p(x2, y2, a2, b2)));
                }
            }
        }
    }
    let (dist, raw_mass) = JointDistribution::from_cells_normalized(wired_var_names(2), sizes, cells)?;
    Ok(WiredJoint {
        n: 2,
        x_prime,
        y_prime,
        dist,
        raw_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    /// "i" to "iv".
    pub chain: String,
    pub description: String,
    pub residual: f64,
    /// Box (chains i–iii) or action (chain iv) with the largest residual, 1-based.
    pub worst_index: usize,
    pub pass: bool,
}

/// The four Markov chains of a wired joint, each maximized over its index.
pub fn verify_markov_chains(wj: &WiredJoint, tol: f64) -> Vec<ChainReport> {
    type Triple = (Vec<Var>, Vec<Var>, Vec<Var>);
    let n = wj.n;
    let chains: [(&str, &str, &dyn Fn(usize) -> Triple); 4] = [
        ("i", "A_i B_i → X_i Y_i → T_i S_i Π_i Ω_i", &|i| {
            (
                vec![Var::A(i), Var::B(i)],
                vec![Var::X(i), Var::Y(i)],
                vec![Var::T(i), Var::S(i), Var::Pi(i), Var::Omega(i)],
            )
        }),
        ("ii", "B_i → S_i^e → T_i^e", &|i| (vec![Var::B(i)], vec![Var::SExt(i)], vec![Var::TExt(i)])),
        ("iii", "B_i → A_i T_i^e S_i^e → A_[n] X_[n] Π_[n]", &|i| {
            (
                vec![Var::B(i)],
                vec![Var::A(i), Var::TExt(i), Var::SExt(i)],
                vec![Var::AliceAll],
            )
        }),
        ("iv", "Ỹ_i Ω̃_i → S̃_i → A_[n] X_[n] Π_[n]", &|j| {
            (
                vec![Var::YTilde(j), Var::OmegaTilde(j)],
                vec![Var::STilde(j)],
                vec![Var::AliceAll],
            )
        }),
    ];
    chains
        .iter()
        .map(|(name, desc, roles)| {
            let (mut worst, mut at) = (0.0f64, 0);
            for i in 0..n {
                let (l, m, r) = roles(i);
                let res = ci_residual_parts(wj.probs(), &wj.partition(&l), &wj.partition(&m), &wj.partition(&r));
                if res > worst {
                    worst = res;
                    at = i;
                }
            }
            ChainReport {
                chain: name.to_string(),
                description: desc.to_string(),
                residual: worst,
                worst_index: at + 1,
                pass: worst <= tol,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionResidual {
    pub identity: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

struct Ctx<'a> {
    phi: &'a PhiSpec,
    wj: &'a WiredJoint,
    values: &'a [f64],
}

impl Ctx<'_> {
    /// H_Φ(𝔼[f | inner] | outer).
    fn h(&self, inner: &[Var], outer: &[Var]) -> f64 {
        h_of_cond_mean(
            self.phi,
            self.wj.probs(),
            self.values,
            &self.wj.partition(inner),
            &self.wj.partition(outer),
        )
    }
}

fn with(base: &[Var], extra: &[Var]) -> Vec<Var> {
    base.iter().chain(extra).copied().collect()
}

fn check_values(phi: &PhiSpec, wj: &WiredJoint, values: &[f64]) -> Result<()> {
    if values.len() != wj.dist.support_len() {
        return Err(Error::InvalidFunction(format!(
            "{} values for {} support cells",
            values.len(),
            wj.dist.support_len()
        )));
    }
    for (i, &v) in values.iter().enumerate() {
        phi.ensure_in_domain(v, || wj.dist.outcome_label(i))?;
    }
    Ok(())
}

/// The transcript expansions of H_Φ(𝔼[f|A_[n]X_[n]Π_[n]]), its Bob analogue
/// and H_Φ(𝔼[f|all]|A_[n]X_[n]Π_[n]).
pub fn verify_transcript_expansions(phi: &PhiSpec, wj: &WiredJoint, f: &RandomFunction) -> Result<Vec<ExpansionResidual>> {
    let values = wj.dist.evaluate(f)?;
    transcript_expansions_values(phi, wj, &values)
}

/// [`verify_transcript_expansions`] for per-support-cell values.
pub fn transcript_expansions_values(phi: &PhiSpec, wj: &WiredJoint, values: &[f64]) -> Result<Vec<ExpansionResidual>> {
    check_values(phi, wj, values)?;
    let cx = Ctx { phi, wj, values };
    let n = wj.n;
    let mk = |name: &str, lhs: f64, rhs: f64| ExpansionResidual {
        identity: name.to_string(),
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    };
    let alice_rhs = (0..n)
        .map(|k| cx.h(&[Var::TTildeExt(k)], &[Var::TTilde(k)]) + cx.h(&[Var::A(k), Var::TExt(k)], &[Var::TExt(k)]))
        .sum();
    let bob_rhs = (0..n)
        .map(|k| cx.h(&[Var::STildeExt(k)], &[Var::STilde(k)]) + cx.h(&[Var::B(k), Var::SExt(k)], &[Var::SExt(k)]))
        .sum();
    let w = [Var::AliceAll];
    let mixed_rhs = (0..n)
        .map(|k| {
            cx.h(&with(&w, &[Var::STildeExt(k)]), &with(&w, &[Var::STilde(k)]))
                + cx.h(&with(&w, &[Var::B(k), Var::SExt(k)]), &with(&w, &[Var::SExt(k)]))
        })
        .sum();
    Ok(vec![
        mk("alice", cx.h(&w, &[]), alice_rhs),
        mk("bob", cx.h(&[Var::BobAll], &[]), bob_rhs),
        mk("joint_given_alice", cx.h(&[Var::AliceAll, Var::BobAll], &w), mixed_rhs),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryCheck {
    /// "i", "ii" or "iii".
    pub part: String,
    /// Box (parts i, ii) or action (part iii), 1-based.
    pub index: usize,
    pub report: InequalityReport,
}

/// The three consequences of the Markov chains for Φ ∈ 𝓕, per index.
pub fn corollary_checks(phi: &PhiSpec, wj: &WiredJoint, values: &[f64]) -> Result<Vec<CorollaryCheck>> {
    check_values(phi, wj, values)?;
    let cx = Ctx { phi, wj, values };
    let w = [Var::AliceAll];
    let mut out = Vec::with_capacity(3 * wj.n);
    for i in 0..wj.n {
        let ts = [Var::TExt(i), Var::SExt(i)];
        out.push(CorollaryCheck {
            part: "i".into(),
            index: i + 1,
            report: InequalityReport::new(
                cx.h(&with(&[Var::B(i)], &ts), &ts),
                cx.h(&[Var::B(i), Var::SExt(i)], &[Var::SExt(i)]),
            ),
        });
        out.push(CorollaryCheck {
            part: "ii".into(),
            index: i + 1,
            report: InequalityReport::new(
                cx.h(&with(&w, &[Var::B(i), Var::SExt(i)]), &with(&w, &[Var::SExt(i)])),
                cx.h(&with(&[Var::A(i), Var::B(i)], &ts), &with(&[Var::A(i)], &ts)),
            ),
        });
        out.push(CorollaryCheck {
            part: "iii".into(),
            index: i + 1,
            report: InequalityReport::new(
                cx.h(&with(&w, &[Var::STildeExt(i)]), &with(&w, &[Var::STilde(i)])),
                cx.h(&[Var::STildeExt(i)], &[Var::STilde(i)]),
            ),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityOptions {
    pub ribbon: RibbonOptions,
    /// Random f per (x′, y′) for the corollary inequalities.
    pub f_samples: usize,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        Self {
            ribbon: RibbonOptions::default(),
            f_samples: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub ribbon: PropertyReport,
    /// Smallest slack per corollary part over all samples and inputs.
    pub corollary_min_slack: BTreeMap<String, f64>,
    pub corollary_pass: bool,
    pub pass: bool,
}

/// Wired-box ribbon verdicts at every point inside all component ribbons,
/// plus the corollary inequalities on random f.
pub fn check_wiring_monotonicity(
    phi: &PhiSpec,
    boxes: &[NsBox],
    strategy: &WiringStrategy,
    pts: &[RibbonPoint],
    opts: &MonotonicityOptions,
) -> Result<MonotonicityReport> {
    require_unit_square(pts)?;
    for (i, b) in boxes.iter().enumerate() {
        if !is_no_signaling(b, BOX_TOL).no_signaling {
            return Err(Error::InvalidBox(format!("component box {} is signaling", i + 1)));
        }
    }
    let wired = wired_box(boxes, strategy)?;
    let mut checks = Vec::with_capacity(pts.len());
    for (k, &pt) in pts.iter().enumerate() {
        let ro = opts.ribbon.with_seed(opts.ribbon.search.seed.wrapping_add(100 * k as u64));
        let mut comp_out = None;
        for (i, b) in boxes.iter().enumerate() {
            let o = ro.with_seed(ro.search.seed.wrapping_add(10 * (i as u64 + 1)));
            if box_ribbon_membership(phi, b, pt, &o)?.is_out() {
                comp_out = Some(i);
                break;
            }
        }
        let check = match comp_out {
            Some(i) => PointCheck {
                point: pt,
                implication: format!("component {} out", i + 1),
                pass: true,
                witness: None,
                margin: 0.0,
            },
            None => {
                let v = box_ribbon_membership(phi, &wired, pt, &ro)?;
                PointCheck {
                    point: pt,
                    implication: "in ⇒ in".into(),
                    pass: !v.is_out(),
                    margin: v.violation_margin,
                    witness: v.witness_f,
                }
            }
        };
        checks.push(check);
    }
    let ribbon = PropertyReport::new("wiring monotonicity", checks);

    let fbox = opts.ribbon.fbox.unwrap_or_else(|| phi.default_fbox());
    let mut min_slack: BTreeMap<String, f64> = BTreeMap::new();
    let mut cell = 0;
    for x in 0..strategy.inputs[0] as u32 {
        for y in 0..strategy.inputs[1] as u32 {
            let wj = wire(boxes, strategy, x, y)?;
            let mut rng = restart_rng(opts.ribbon.search.seed, cell);
            cell += 1;
            for _ in 0..opts.f_samples {
                let vals = wj.random_values(&mut rng, fbox);
                for c in corollary_checks(phi, &wj, &vals)? {
                    let e = min_slack.entry(c.part).or_insert(f64::INFINITY);
                    *e = e.min(c.report.slack);
                }
            }
        }
    }
    let corollary_pass = min_slack.values().all(|&s| s >= -crate::entropy::HOLD_TOL);
    Ok(MonotonicityReport {
        pass: ribbon.pass && corollary_pass,
        ribbon,
        corollary_min_slack: min_slack,
        corollary_pass,
    })
}

/// Source in ⇒ processed in, per point, for local post-processing.
pub fn check_box_data_processing(
    phi: &PhiSpec,
    b: &NsBox,
    chan_a: &[Vec<f64>],
    chan_b: &[Vec<f64>],
    pts: &[RibbonPoint],
    opts: &RibbonOptions,
) -> Result<PropertyReport> {
    require_unit_square(pts)?;
    let processed = b.post_process(chan_a, chan_b)?;
    let mut checks = Vec::new();
    for (k, &pt) in pts.iter().enumerate() {
        let o = opts.with_seed(opts.search.seed.wrapping_add(20 * k as u64));
        if box_ribbon_membership(phi, b, pt, &o)?.is_out() {
            continue;
        }
        let v = box_ribbon_membership(phi, &processed, pt, &o.with_seed(o.search.seed + 10))?;
        checks.push(PointCheck {
            point: pt,
            implication: "in ⇒ in".into(),
            pass: !v.is_out(),
            margin: v.violation_margin,
            witness: v.witness_f,
        });
    }
    Ok(PropertyReport::new("box data processing", checks))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomStrategyOptions {
    /// Largest number of (box, input) options per choice node.
    pub max_choices: usize,
    /// Force a deterministic box order 0, 1, …, n−1.
    pub fixed_order: bool,
}

impl Default for RandomStrategyOptions {
    fn default() -> Self {
        Self {
            max_choices: 2,
            fixed_order: false,
        }
    }
}

fn random_weights<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let t: f64 = w.iter().sum();
    let mut w: Vec<f64> = w.iter().map(|v| v / t).collect();
    // last weight absorbs the rounding so each rule sums to 1 exactly enough
    let head: f64 = w[..k - 1].iter().sum();
    w[k - 1] = 1.0 - head;
    w
}

fn random_table<R: Rng>(
    rng: &mut R,
    boxes: &[NsBox],
    party: Party,
    inputs: usize,
    outputs: usize,
    opts: &RandomStrategyOptions,
) -> TablePolicy {
    let (in_ax, out_ax) = match party {
        Party::Alice => (0, 2),
        Party::Bob => (1, 3),
    };
    let n = boxes.len();
    let mut table = TablePolicy::default();
    for input in 0..inputs as u32 {
        let mut stack = vec![Vec::<Step>::new()];
        while let Some(steps) = stack.pop() {
            let key = transcript_key(input, &steps);
            if steps.len() == n {
                let k = rng.gen_range(1..=outputs);
                let mut outs: Vec<u32> = (0..outputs as u32).collect();
                for i in 0..k {
                    let j = rng.gen_range(i..outs.len());
                    outs.swap(i, j);
                }
                let w = random_weights(rng, k);
                table.output.insert(
                    key,
                    outs[..k].iter().zip(w).map(|(&o, p)| OutputChoice { output: o, p }).collect(),
                );
                continue;
            }
            let mut options: Vec<(usize, u32)> = Vec::new();
            for bx in 0..n {
                if steps.iter().any(|s| s.box_index == bx) || (opts.fixed_order && bx != steps.len()) {
                    continue;
                }
                for x in 0..boxes[bx].sizes[in_ax] as u32 {
                    options.push((bx, x));
                }
            }
            let k = rng.gen_range(1..=opts.max_choices.max(1).min(options.len()));
            for i in 0..k {
                let j = rng.gen_range(i..options.len());
                options.swap(i, j);
            }
            let w = random_weights(rng, k);
            let chosen: Vec<Choice> = options[..k]
                .iter()
                .zip(w)
                .map(|(&(bx, x), p)| Choice {
                    box_index: bx,
                    input: x,
                    p,
                })
                .collect();
            for c in &chosen {
                for o in 0..boxes[c.box_index].sizes[out_ax] as u32 {
                    let mut next = steps.clone();
                    next.push(Step {
                        box_index: c.box_index,
                        input: c.input,
                        output: o,
                    });
                    stack.push(next);
                }
            }
            table.choice.insert(key, chosen);
        }
    }
    table
}

/// A random (generally probabilistic) strategy over `boxes` with binary
/// wired alphabets.
pub fn random_strategy<R: Rng>(rng: &mut R, boxes: &[NsBox], opts: &RandomStrategyOptions) -> WiringStrategy {
    let alice = random_table(rng, boxes, Party::Alice, 2, 2, opts);
    let bob = random_table(rng, boxes, Party::Bob, 2, 2, opts);
    WiringStrategy::new(boxes.len(), [2, 2], [2, 2], alice, bob)
}

/// A random no-signaling box: a convex mixture of the PR box, its relabelings
/// and local deterministic boxes.
pub fn random_ns_box<R: Rng>(rng: &mut R) -> NsBox {
    let k = 4;
    let w = random_weights(rng, k);
    let mut p = vec![0.0; 16];
    for wi in w {
        let b = if rng.gen_bool(0.5) {
            // PR relabeled: a ⊕ b = xy ⊕ αx ⊕ βy ⊕ γ
            let (al, be, ga) = (rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..2));
            let mut q = vec![0.0; 16];
            for x in 0..2 {
                for y in 0..2 {
                    for a in 0..2 {
                        for bb in 0..2 {
                            if a ^ bb == (x & y) ^ (al & x) ^ (be & y) ^ ga {
                                q[((x * 2 + y) * 2 + a) * 2 + bb] = 0.5;
                            }
                        }
                    }
                }
            }
            q
        } else {
            let kind = StandardBox::LocalDeterministic {
                a: vec![rng.gen_range(0..2), rng.gen_range(0..2)],
                b: vec![rng.gen_range(0..2), rng.gen_range(0..2)],
            };
            make_standard_box(&kind).expect("valid local box").p
        };
        for (t, v) in p.iter_mut().zip(b) {
            *t += wi * v;
        }
    }
    renormalize_columns([2, 2, 2, 2], &mut p);
    NsBox::new([2, 2, 2, 2], p).expect("mixture of boxes is a box")
}
