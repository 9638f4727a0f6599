//! Continual skill learning for web agents.
//!
//! Skills are organized polymorphically: a category interface declares
//! abstract signatures (and compositional default methods), and each site
//! provides its own concrete method bodies in a small action DSL. Skills are
//! induced from successful trajectories in deterministic simulated website
//! environments, verified by replay, and measured with trajectory metrics.

pub mod dsl;
pub mod harness;
pub mod induction;
pub mod metrics;
pub mod runtime;
pub mod sim;
pub mod skill_model;

pub use skill_model::{SkillLibrary, SkillId};
