//! Auditing and simulated enforcement of QoE-oriented document policies.

pub mod corpus;
pub mod css;
pub mod detect;
pub mod enforce;
pub mod error;
pub mod extract;
pub mod fetch;
pub mod headers;
pub mod layout;
pub mod model;
pub mod sniff;
pub mod synth;

pub use error::{Error, Result};
