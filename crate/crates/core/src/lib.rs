//! Monte Carlo laboratory and exact small-instance oracle for supercritical
//! oriented bond percolation on the 1+1 dimensional lattice.
//!
//! * [`lattice`]: bond randomness and the bit-parallel row update.
//! * [`enumerate`]: exact probabilities by exhaustive enumeration.
//! * [`processes`]: the origin, full-line and half-line processes on shared bonds.
//! * [`estimators`]: survival probability, edge speed, covariance sum, tail fits.
//! * [`clt`]: standardized cluster-size statistics and their distance to normal.
//! * [`assoc`]: association checks and random-index limit theorems for sums.

pub mod assoc;
pub mod clt;
pub mod enumerate;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod parallel;
pub mod processes;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::{step, evolve_coupled, BondRealization, BondWindow, Direction, Site, WetRow};
