//! Builtin analytic domains and boundary-data generators, so experiments
//! and tests need no external input files.

use crate::error::{Error, Result};
use crate::grid::{Grid, Role, ScalarField};

/// `phi = max(x_d, 0)`: flat free boundary through the origin, the model
/// domain with constants (L, kappa, mu, eta) = (1, 1, 1/2, 1).
pub fn halfspace(grid: Grid) -> Result<ScalarField> {
    let d = grid.dim() - 1;
    ScalarField::from_fn(grid, Role::State, |x| x[d].max(0.0))
}

/// Cone over the ball `B_{1/2}`: `phi = (1/2 - |x|)+`. Distance-like but
/// strictly superharmonic along rays, so (d) fails; used for density tests.
pub fn ball(grid: Grid) -> Result<ScalarField> {
    ScalarField::from_fn(grid, Role::State, |x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        (0.5 - r).max(0.0)
    })
}

/// Quarter-plane sector field `phi = 2 x_1 x_2` on `{x_1 > 0, x_2 > 0}`:
/// harmonic, 2-homogeneous, degenerate at the corner, so (c) fails under
/// refinement.
pub fn sector(grid: Grid) -> Result<ScalarField> {
    ScalarField::from_fn(grid, Role::State, |x| {
        if x[0] > 0.0 && x[1] > 0.0 {
            2.0 * x[0] * x[1]
        } else {
            0.0
        }
    })
}

/// Two disjoint bumps: `phi = max(x_d, 0)` restricted to two separated
/// balls of radius 0.08 centered at `(±0.1, 0.15)`. Both carry admissible
/// points of `B_{0.2} ∩ {phi > 0.08}`, but the superlevel sets are
/// disconnected.
pub fn twobump(grid: Grid) -> Result<ScalarField> {
    let d = grid.dim() - 1;
    ScalarField::from_fn(grid, Role::State, |x| {
        let mut in_bump = false;
        for s in [-1.0f64, 1.0] {
            let dx0 = x[0] - s * 0.1;
            let dx1 = x[d] - 0.15;
            let mut q = dx0 * dx0 + dx1 * dx1;
            if grid.dim() == 3 {
                q += x[1] * x[1];
            }
            if q < 0.08 * 0.08 {
                in_bump = true;
            }
        }
        if in_bump {
            x[d].max(0.0)
        } else {
            0.0
        }
    })
}

pub fn domain_by_name(name: &str, grid: Grid) -> Result<ScalarField> {
    match name {
        "halfspace" => halfspace(grid),
        "ball" => ball(grid),
        "sector" => sector(grid),
        "twobump" => twobump(grid),
        other => Err(Error::Config {
            key: "domain.builtin".into(),
            message: format!("unknown builtin domain `{other}`"),
        }),
    }
}

pub const DOMAIN_NAMES: &[&str] = &["halfspace", "ball", "sector", "twobump"];

/// Boundary data generators (sampled at every node; the solver reads them
/// only off the domain).
pub fn data_by_name(name: &str, grid: Grid) -> Result<ScalarField> {
    let d = grid.dim() - 1;
    match name {
        "one" => ScalarField::constant(grid, Role::Auxiliary, 1.0),
        "linear" => ScalarField::from_fn(grid, Role::Auxiliary, |x| x[d].max(0.0)),
        "tilted" => {
            ScalarField::from_fn(grid, Role::Auxiliary, |x| x[d].max(0.0) * (1.0 + 0.5 * x[0]))
        }
        "left" => ScalarField::from_fn(grid, Role::Auxiliary, |x| if x[0] < 0.0 { 1.0 } else { 0.0 }),
        "right" => {
            ScalarField::from_fn(grid, Role::Auxiliary, |x| if x[0] > 0.0 { 1.0 } else { 0.0 })
        }
        "spike" => ScalarField::from_fn(grid, Role::Auxiliary, |x| {
            let dx = x[0] - 0.6;
            let dy = x[d] - 0.2;
            (-(dx * dx + dy * dy) / 0.02).exp()
        }),
        other => Err(Error::Config {
            key: "data".into(),
            message: format!("unknown builtin data `{other}`"),
        }),
    }
}

pub const DATA_NAMES: &[&str] = &["one", "linear", "tilted", "left", "right", "spike"];
