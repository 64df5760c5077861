//! Occlusion-aware motion planning for automated vehicles.
//!
//! The crate predicts where hidden and perceived traffic participants may be,
//! checks whether the ego vehicle can always stop in front of them, picks a
//! maneuver and plans a lateral trajectory with a soft-constrained MPC.
//!
//! It is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod geometry;
pub mod mpc;
pub mod prediction;
pub mod qp;
pub mod safety;
pub mod scene;
pub mod sim;
pub mod tactical;
pub mod vehicle;
