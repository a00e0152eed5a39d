//! File formats, configuration and the command line for the CACC/DSRC
//! freeway simulator. The simulation itself lives in `cacc_dsrc_core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;
