#![no_std]

extern crate alloc;

pub mod bath;
pub mod dynamics;
pub mod error;
pub mod expfit;
pub mod lsq;
pub mod model;
pub mod ode;
pub mod ops;
pub mod pipeline;
pub mod polaron;
pub mod quad;
pub mod steady;
pub mod weak;

pub use error::Error;
pub use model::ModelParams;
pub use ops::{Op2, C64};
