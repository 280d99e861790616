//! Library side of the `hnsim` experiment runner: config resolution,
//! experiment runners, CSV output and verification suites.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod table;
pub mod verify;
