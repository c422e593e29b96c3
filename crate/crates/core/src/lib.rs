pub mod analysis;
pub mod classical;
pub mod data;
pub mod experiment;
pub mod linalg;
pub mod lsvd;
pub mod nn;
pub mod rng;
pub mod tomo;
