// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod distributed;
pub mod error;
pub mod experiment;
pub mod hadamard;
pub mod hybrid;
pub mod io;
pub mod leverage;
pub mod linalg;
pub mod matrix;
pub mod regression;
pub mod rng;
pub mod sketch;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::SeededRng;
