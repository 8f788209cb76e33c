//! Exact simulation of quantum walk search via electric networks,
//! interpolated walks and quantum fast-forwarding.

pub mod classical;
pub mod electric;
pub mod error;
pub mod fast_forward;
pub mod graph;
pub mod harness;
pub mod instances;
pub mod linalg;
pub mod quantum;
pub mod search;

pub use error::{Error, Result};
