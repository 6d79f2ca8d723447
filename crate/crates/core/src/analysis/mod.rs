//! Statistical checks of generated data and the scaling-law fitter.

pub mod diversity;
pub mod fidelity;
pub mod powerlaw;
pub mod profile;
