//! Transient, Monte-Carlo and metrics toolkit for an 8T SRAM bit-cell whose
//! read-port threshold flavor stores a second, read-only bit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod array;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod protocol;

pub use error::{Error, Result};
