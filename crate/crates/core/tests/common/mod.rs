#![allow(dead_code)]

use phic_core::{JointDistribution, PhiSpec, RandomFunction};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random pmf with roughly a fifth of the entries zeroed.
pub fn pmf<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
            .collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            return w.iter().map(|x| x / s).collect();
        }
    }
}

/// Full-support pmf.
pub fn positive_pmf<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

pub fn joint<R: Rng>(rng: &mut R, vars: &[&str], sizes: &[usize]) -> JointDistribution {
    let n = sizes.iter().product();
    JointDistribution::new(vars.iter().map(|s| s.to_string()).collect(), sizes.to_vec(), &pmf(rng, n)).unwrap()
}

pub fn channel<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> Vec<Vec<f64>> {
    (0..inputs).map(|_| pmf(rng, outputs)).collect()
}

/// Random f over all variables of `dist` with values inside the default box of Φ.
pub fn function<R: Rng>(rng: &mut R, phi: &PhiSpec, dist: &JointDistribution) -> RandomFunction {
    let (lo, hi) = phi.default_fbox();
    let n: usize = dist.sizes().iter().product();
    let table = (0..n).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect();
    RandomFunction::new(dist.vars().to_vec(), table).unwrap()
}

/// X → Z → Y built by composing random channels; sizes in 2..=3.
pub fn markov<R: Rng>(rng: &mut R) -> JointDistribution {
    let (sx, sz, sy) = (rng.gen_range(2..=3), rng.gen_range(2..=3), rng.gen_range(2..=3));
    let x = joint(rng, &["X"], &[sx]);
    x.with_channel(&["X"], "Z", sz, &channel(rng, sx, sz))
        .unwrap()
        .with_channel(&["Z"], "Y", sy, &channel(rng, sz, sy))
        .unwrap()
}

/// X ⫫ Y with an extra variable W of arbitrary dependence.
pub fn independent<R: Rng>(rng: &mut R) -> JointDistribution {
    let (sx, sy) = (rng.gen_range(2..=3), rng.gen_range(2..=3));
    let x = joint(rng, &["X"], &[sx]);
    let y = joint(rng, &["Y"], &[sy]);
    let xy = x.product(&y).unwrap();
    xy.with_channel(&["X", "Y"], "W", 2, &channel(rng, sx * sy, 2)).unwrap()
}

pub fn two_by_two<R: Rng>(rng: &mut R, a: &str, b: &str) -> JointDistribution {
    JointDistribution::new(vec![a.into(), b.into()], vec![2, 2], &positive_pmf(rng, 4)).unwrap()
}
