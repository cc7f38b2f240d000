//! Vessel physics, control, perception and wire protocol for a
//! differential-thrust surface vessel.
//!
//! Everything in this crate is `no_std` (with `alloc`) and free of IO so the
//! same code can run on a companion computer, inside the headless simulator,
//! or behind a network service. The companion `helm` crate carries config
//! files, mission execution, logging and the CLI.
//!
//! Conventions shared by every module:
//!
//! * world frame is local East/North in meters, origin at mission start;
//! * headings are compass degrees, clockwise from North, in `[0, 360)`;
//! * yaw rate is clockwise-positive;
//! * body velocities are surge (forward) and sway (starboard).

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod angle;
pub mod control;
pub mod dynamics;
pub mod hydrostatics;
pub mod perception;
pub mod protocol;
pub mod world;

pub use angle::{wrap_360, wrap_error};
