//! Harmonic analysis adapted to a Schrödinger critical radius, realised on
//! periodic grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] — the torus, grid functions, closed balls;
//! * [`exponents`] — variable exponents and Luxemburg norms;
//! * [`potential`] — potentials, reverse-Hölder constants, the critical radius;
//! * [`maximal`] — localized maximal and sharp maximal operators, `BMO_rho(w)`;
//! * [`weights`] — Muckenhoupt-type constants, classical and rho-adapted;
//! * [`schrodinger`] — `L = -Δ + V`, its functional calculus and kernel checks;
//! * [`extrapolation`] — Rubio de Francia majorants and `L^∞` factorization;
//! * [`harness`] — ensembles, verification suites and reports.

pub mod error;
pub mod exponents;
pub mod extrapolation;
pub mod grid;
pub mod gridio;
pub mod harness;
pub mod maximal;
pub mod potential;
pub mod schrodinger;
pub mod spec;
pub mod weights;

pub use error::{Error, Result};
pub use exponents::{ExponentField, LogHolderReport};
pub use grid::{average_over, make_grid, Ball, Grid, GridFunction};
pub use maximal::BallFamily;
pub use potential::{CriticalRadiusField, PotentialField, RhoBoundsReport};
pub use schrodinger::{DiscreteOperator, KernelMatrix, SczType};
pub use weights::{WeightClassReport, WeightField};
