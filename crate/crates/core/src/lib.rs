//! Monte Carlo funding valuation adjustment (FVA) for an uncollateralised
//! interest-rate swap, split into an independent part and a wrong-way-risk
//! part, under Hull-White rates and CIR++ default intensities with
//! correlated drivers.

pub mod calib;
pub mod fvacore;
pub mod mcsim;
mod quad;
pub mod ratemodels;
pub mod scenarios;
pub mod swap;
pub mod termstruct;
