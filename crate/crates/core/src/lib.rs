#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod grid;
pub mod linalg;
pub mod noise_theory;
pub mod operator_algebra;
pub mod params;
pub mod spectra;
pub mod steady_state;
pub mod time_domain;
pub mod transform;
