mod common;

use phic_core::entropy::{
    chain_rule_residuals, conditional_phi_entropy, lemma1_check, phi_entropy, ChainSpec, Lemma1Part, Roles,
};
use phic_core::phi::catalog_samples;
use phic_core::{JointDistribution, PhiSpec};
use proptest::prelude::*;
use rand::Rng;

fn owned(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Three variables with sizes in 2..=3.
fn xyz(seed: u64) -> JointDistribution {
    let mut r = common::rng(seed);
    let sizes: Vec<usize> = (0..3).map(|_| r.gen_range(2..=3)).collect();
    common::joint(&mut r, &["X", "Y", "Z"], &sizes)
}

fn phi_at(k: usize) -> PhiSpec {
    let all = catalog_samples();
    all[k % all.len()].clone()
}

/// Members of 𝓕 used for the inequality checks.
fn f_member(k: usize) -> PhiSpec {
    let names = ["xlogx", "power:2", "phi_alpha:1.5"];
    phic_core::phi::parse_phi(names[k % 3]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn entropies_nonnegative(seed in any::<u64>(), k in 0usize..8) {
        let phi = phi_at(k);
        let d = xyz(seed);
        let f = common::function(&mut common::rng(seed ^ 1), &phi, &d);
        prop_assert!(phi_entropy(&phi, &d, &f).unwrap() >= -1e-12);
        for cond in [&["X"][..], &["X", "Z"], &["Y", "Z", "X"]] {
            prop_assert!(conditional_phi_entropy(&phi, &d, &f, cond).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn conditioning_contracts(seed in any::<u64>(), k in 0usize..8) {
        let phi = phi_at(k);
        let d = xyz(seed);
        let f = common::function(&mut common::rng(seed ^ 2), &phi, &d);
        let cm = phic_core::entropy::conditional_expectation(&d, &f, &["Y"]).unwrap();
        let h_cm = phi_entropy(&phi, &d, &cm).unwrap();
        prop_assert!(h_cm <= phi_entropy(&phi, &d, &f).unwrap() + 1e-10);
    }

    #[test]
    fn chain_rules_close(seed in any::<u64>(), k in 0usize..8) {
        let phi = phi_at(k);
        let d = xyz(seed);
        let f = common::function(&mut common::rng(seed ^ 3), &phi, &d);
        let chains = [
            ChainSpec::Cr1 { x: owned(&["Y"]) },
            ChainSpec::CrN { seq: vec![owned(&["Z"]), owned(&["X"]), owned(&["Y"])] },
            ChainSpec::Cr2 { x: owned(&["X"]), y: owned(&["Z"]) },
        ];
        for r in chain_rule_residuals(&phi, &d, &f, &chains).unwrap() {
            prop_assert!(r <= 1e-12, "residual {r}");
        }
    }

    #[test]
    fn lemma1_independent(seed in any::<u64>(), k in 0usize..3) {
        let phi = f_member(k);
        let mut r = common::rng(seed);
        let d = common::independent(&mut r);
        let f = common::function(&mut r, &phi, &d);
        let rep = lemma1_check(&phi, &d, &f, Lemma1Part::I, &Roles::new(&["X"], &["Y"], &[])).unwrap();
        prop_assert!(rep.slack >= -1e-10, "{rep:?}");
    }

    #[test]
    fn lemma1_markov(seed in any::<u64>(), k in 0usize..3) {
        let phi = f_member(k);
        let mut r = common::rng(seed);
        let d = common::markov(&mut r);
        let f = common::function(&mut r, &phi, &d);
        let roles = Roles::new(&["X"], &["Y"], &["Z"]);
        for part in [Lemma1Part::II, Lemma1Part::III] {
            let rep = lemma1_check(&phi, &d, &f, part, &roles).unwrap();
            prop_assert!(rep.slack >= -1e-10, "{part:?} {rep:?}");
        }
    }
}

#[test]
fn lemma1_rejects_dependent_inputs() {
    let phi = f_member(0);
    let d = JointDistribution::new(owned(&["X", "Y"]), vec![2, 2], &[0.5, 0.0, 0.0, 0.5]).unwrap();
    let f = common::function(&mut common::rng(0), &phi, &d);
    let e = lemma1_check(&phi, &d, &f, Lemma1Part::I, &Roles::new(&["X"], &["Y"], &[])).unwrap_err();
    assert!(matches!(e, phic_core::Error::Precondition { .. }), "{e:?}");
}
