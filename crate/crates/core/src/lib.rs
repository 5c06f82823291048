//! Synthesis and simulation core for dynamic virtual power plants.
//!
//! Builds on `alloc` only, so it can run on targets without `std`.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adaptation;
pub mod design;
pub mod error;
pub mod lti;
pub mod network;
pub mod spatial;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod fixtures;
