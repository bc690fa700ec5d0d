//! Continued-fraction dynamics on coset spaces of the modular group.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature; `std` only adds thread parallelism (rayon) and `std::error::Error`.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod arith;
pub mod cf_core;
pub mod coset_space;
mod error;
pub mod limiting_symbols;
pub mod linalg;
pub mod mc;
pub mod mixmaster;
pub mod modular_symbols;
pub mod numerics;
pub mod par;
pub mod selberg_zeta;
pub mod transfer_operator;

pub use error::{Error, Result};
