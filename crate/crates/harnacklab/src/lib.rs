//! harnacklab: a desk-scale numerical laboratory for boundary Harnack
//! inequalities on masked grid domains.
//!
//! The crate works with scalar fields sampled on a uniform Cartesian grid
//! over `[-1,1]^d` (`d` = 2 or 3), masked to the open unit ball. A
//! nonnegative "state" field `phi` carves out a domain `{phi > 0}`; the
//! modules estimate the geometric constants of that domain (Lipschitz,
//! distance comparability, exterior density, level-set decay,
//! nondegeneracy), solve Dirichlet problems for harmonic functions on it,
//! build constructive Harnack chains, evaluate the Alt–Caffarelli–Friedman
//! two-phase functional, and verify two-sided comparability and Hölder
//! decay of ratios of harmonic functions. Test domains are generated by
//! minimizing one-phase and vectorial free-boundary energies.
//!
//! Every operation is a pure function of immutable inputs; internal loops
//! may run in parallel but all reductions are order-independent, so output
//! is deterministic for fixed inputs and seeds.

pub mod acf;
pub mod bhi;
pub mod builtin;
pub mod chains;
pub mod config;
pub mod error;
pub mod freeboundary;
pub mod grid;
pub mod harmonic;
pub mod hypotheses;
pub mod report;

pub use error::{Error, Result};
pub use grid::{DomainMask, Grid, Role, ScalarField, VectorField};
