//! Numerical core of plenumlab.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std`; file formats, configuration files and the command line live in the
//! `plenumlab` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod geometry;
pub mod probes;
pub mod solver;
pub mod autodiff;
pub mod dataprep;
pub mod meshstudy;
pub mod metrics;
pub mod models;
