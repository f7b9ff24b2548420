//! Building blocks for semantic GANs: generators whose output is a per-pixel
//! distribution over a finite label set.
//!
//! The crate is `no_std` (with `alloc`). Enable the `std` feature to let the
//! matrix kernels pick SIMD paths at runtime.

#![no_std]

extern crate alloc;

pub mod codec;
pub mod error;
pub mod gan;
pub mod metrics;
pub mod rng;
pub mod shapes;

pub use error::{Error, Result};
