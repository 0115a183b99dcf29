//! Φ-entropic dependence measures on finite alphabets.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`phi`] | the Φ catalog, analytic derivatives, grid tests for the classes 𝓕, 𝓕₁, 𝓕₂ |
//! | [`entropy`] | joint pmfs, random functions, H_Φ(f), conditional H_Φ, chain rules, independence and Markov inequalities |
//! | [`optim`] | seeded multi-start coordinate ascent with a Nelder–Mead polish |
//! | [`sdpi`] | η_Φ for finite joints, Z-channel closed forms and the auxiliary g, k, w, Q functions |
//! | [`ribbon`] | Φ-ribbon falsification, boundary estimation, tensorization and data-processing checks |
//! | [`boxes`] | no-signaling boxes, the wiring engine, Markov-chain and transcript identities |
//! | [`schema`] | JSON file formats for joints, functions, boxes and wiring strategies |
//!
//! Every ∀-quantified statement (class membership, ribbon membership) is
//! checked numerically: a positive answer only means no violation was found
//! on the grid or within the search budget.

pub mod boxes;
pub mod entropy;
mod error;
pub mod numeric;
pub mod optim;
pub mod phi;
pub mod ribbon;
pub mod schema;
pub mod sdpi;

pub use error::{Error, Result};

pub use entropy::{GridSpec, JointDistribution, Partition, RandomFunction};
pub use phi::{make_phi, PhiSpec};
