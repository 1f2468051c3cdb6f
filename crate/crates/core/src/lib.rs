//! Classical model of laser-cooled ion crystals confined to a ring.
//!
//! The crate covers equilibrium configurations, tangential normal modes, rotational
//! energy barriers, surface-electrode electrostatics for a planar ring trap, and
//! Langevin dynamics of the crystal under Doppler cooling.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod cli;
pub mod consts;
pub mod equilibrium;
pub mod dynamics;
pub mod electrostatics;
mod elliptic;
pub mod error;
mod minimize;
pub mod model;
pub mod modes;
pub mod thermometry;
pub mod units;

pub use error::{Error, Result};
