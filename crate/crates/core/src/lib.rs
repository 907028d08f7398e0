//! Knowledge-integrated machine learning for electrolyzer activation losses.

pub mod bench;
pub mod cli;
pub mod dataset;
pub mod decomp;
pub mod eval;
pub mod learners;
pub mod matrix;
pub mod physics;
pub mod pinn;
pub mod rng;
pub mod symreg;
pub mod units;
