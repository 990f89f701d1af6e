//! Solver library for downlink joint-transmission CoMP weighted sum-rate
//! maximization: centralized WMMSE, decentralized best-response / ADMM /
//! stochastic-gradient variants, their pilot-based direct-estimation
//! counterparts, and the signaling, admission and fading models used to
//! evaluate them.
//!
//! The crate is `no_std` with `alloc`; disable the default `std` feature to
//! build it for embedded or kernel targets.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod admission;
pub mod de;
pub mod error;
pub mod fading;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod scenario;
pub mod signaling;
pub mod sse;
pub mod wmmse;

pub use error::{Error, Result};
pub use linalg::{C64, CMat, CVec};
