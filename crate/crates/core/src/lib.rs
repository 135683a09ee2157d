//! Core of the pre-hoc text quality engine: random forests with first-class
//! decision paths, path-based responsibility scoring and its exact oracle,
//! a text feature library, LDA topic segmentation, and feature explanation
//! functions.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod features;
pub mod fef;
pub mod forest;
pub mod oracle;
pub mod segment;
pub mod synth;
pub mod tcruise;
pub mod text;
