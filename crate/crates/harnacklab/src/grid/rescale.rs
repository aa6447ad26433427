//! Field rescaling `phi_{r,x0}(x) = phi(x0 + r x) / r` about a boundary
//! node, by multilinear interpolation onto a fresh grid.

use super::{build_grid, mask_from_state, Role, ScalarField};
use crate::error::{Error, Result};

/// Samples `phi(x0 + r x) / r` on an `n_out` grid. `x0` must be a boundary
/// node of the mask of `phi` (so `phi(x0) = 0`), and `0 < r < 1 - |x0|`,
/// which keeps every sample point strictly inside the cube. Output nodes
/// with `|x| >= 1` are set to 0 so the result is again a state field.
pub fn rescale_field(phi: &ScalarField, x0: usize, r: f64, n_out: usize) -> Result<ScalarField> {
    phi.require_role(Role::State)?;
    let grid = *phi.grid();
    let mask = mask_from_state(phi)?;
    if !mask.boundary_nodes().contains(&x0) {
        return Err(Error::pre(format!("x0 = {x0} is not a boundary node")));
    }
    let x0c = grid.coords(x0);
    let limit = 1.0 - grid.norm(x0);
    if !(r > 0.0 && r < limit) {
        return Err(Error::RadiusOutOfRange(r));
    }

    let out_grid = build_grid(grid.dim(), n_out)?;
    let mut values = vec![0.0; out_grid.node_count()];
    for (i, v) in values.iter_mut().enumerate() {
        if !out_grid.in_unit_ball(i) {
            continue;
        }
        let x = out_grid.coords(i);
        let mut p = [0.0; 3];
        for a in 0..grid.dim() {
            p[a] = x0c[a] + r * x[a];
        }
        *v = interpolate(phi, &p) / r;
    }
    ScalarField::new(out_grid, values, Role::State)
}

/// Multilinear interpolation at a point strictly inside the cube.
pub(crate) fn interpolate(phi: &ScalarField, p: &[f64; 3]) -> f64 {
    let grid = phi.grid();
    let n = grid.n();
    let h = grid.h();
    let dim = grid.dim();
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..dim {
        let s = (p[a] + 1.0) / h;
        let mut b = s.floor();
        if b as i64 >= (n - 1) as i64 {
            b = (n - 2) as f64; // clamp for points landing exactly on the top face
        }
        if b < 0.0 {
            b = 0.0;
        }
        base[a] = b as usize;
        frac[a] = (s - b).clamp(0.0, 1.0);
    }
    let corners = 1usize << dim;
    let mut acc = 0.0;
    for c in 0..corners {
        let mut m = base;
        let mut w = 1.0;
        for a in 0..dim {
            if (c >> a) & 1 == 1 {
                m[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        acc += w * phi.get(grid.index(m));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn one_homogeneous_field_is_a_fixed_point() {
        // phi = max(x_d, 0) is 1-homogeneous about the origin; the r = 1/2
        // rescaling reproduces it exactly at nodes (piecewise-linear in x_d).
        let g = build_grid(2, 65).unwrap();
        let phi = ScalarField::from_fn(g, Role::State, |x| x[1].max(0.0)).unwrap();
        let out = rescale_field(&phi, g.origin(), 0.5, 65).unwrap();
        for i in 0..g.node_count() {
            if g.in_unit_ball(i) {
                assert!(
                    (out.get(i) - phi.get(i)).abs() <= 2.0 * g.h() * 1e-12,
                    "node {i}: {} vs {}",
                    out.get(i),
                    phi.get(i)
                );
            }
        }
    }

    #[test]
    fn homogeneous_fixed_point_within_interpolation_error() {
        // generic 1-homogeneous cone about the origin, odd output size
        let g = build_grid(2, 129).unwrap();
        let phi = ScalarField::from_fn(g, Role::State, |x| {
            (0.8 * x[1] - 0.3 * x[0]).max(0.0)
        })
        .unwrap();
        for r in [0.25, 0.5, 0.75] {
            let out = rescale_field(&phi, g.origin(), r, 129).unwrap();
            for i in 0..g.node_count() {
                if g.in_unit_ball(i) {
                    assert!(
                        (out.get(i) - phi.get(i)).abs() <= 2.0 * g.h(),
                        "r = {r}, node {i}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_radius_out_of_range() {
        let g = build_grid(2, 33).unwrap();
        let phi = ScalarField::from_fn(g, Role::State, |x| x[1].max(0.0)).unwrap();
        assert!(matches!(
            rescale_field(&phi, g.origin(), 1.0, 33),
            Err(Error::RadiusOutOfRange(_))
        ));
        assert!(matches!(
            rescale_field(&phi, g.origin(), 0.0, 33),
            Err(Error::RadiusOutOfRange(_))
        ));
    }

    #[test]
    fn rejects_non_boundary_anchor() {
        let g = build_grid(2, 33).unwrap();
        let phi = ScalarField::from_fn(g, Role::State, |x| x[1].max(0.0)).unwrap();
        let inside = g.index([g.center(), g.center() + 3, 0]);
        assert!(rescale_field(&phi, inside, 0.5, 33).is_err());
    }
}
