//! Finite-element simulation of electrothermally actuated polymer
//! microgrippers: Joule heating, heat conduction with convection and
//! thermoelastic deflection, plus the studies built on top of them.

pub mod config;
pub mod design;
pub mod error;
pub mod export;
pub mod fem;
pub mod grip;
pub mod materials;
pub mod mesh;
pub mod oracles;
pub mod physics;
pub mod studies;

pub use error::{Error, Result};
