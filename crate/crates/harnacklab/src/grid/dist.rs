//! Exact Euclidean distance transform on the node set.
//!
//! Distances are to the nearest node of the complement of the mask (outside
//! nodes, including every node with `|x| >= 1`), computed exactly in squared
//! lattice units by per-axis lower-envelope passes, so the result equals the
//! brute-force all-pairs scan on every grid.

use super::{DomainMask, Role, ScalarField};
use crate::error::Result;

const INF: f64 = 1e18;

/// 1-D squared distance transform of a sampled cost `f` (lower envelope of
/// parabolas): `d[p] = min_q (p-q)^2 + f[q]`.
fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -INF;
    z[1] = INF;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        let s = loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                // z[0] = -inf, so k never underflows here
                k -= 1;
            } else {
                break s;
            }
        };
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = INF;
    }
    let mut k = 0usize;
    for p in 0..n {
        while z[k + 1] < p as f64 {
            k += 1;
        }
        let q = v[k];
        let dp = p as i64 - q as i64;
        d[p] = (dp * dp) as f64 + f[q];
    }
}

/// Squared lattice distance (units of `h^2`) from every node to the nearest
/// complement node; 0 on the complement itself.
pub fn distance_transform_sq(mask: &DomainMask) -> Vec<u64> {
    let grid = *mask.grid();
    let n = grid.n();
    let nn = grid.node_count();
    let mut cost: Vec<f64> = (0..nn).map(|i| if mask.inside(i) { INF } else { 0.0 }).collect();

    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    let axes = grid.dim();
    for axis in 0..axes {
        // stride of the axis in the flat layout (last axis fastest)
        let stride = n.pow((axes - 1 - axis) as u32);
        let block = stride * n;
        let lines = nn / n;
        for l in 0..lines {
            let base = (l / stride) * block + (l % stride);
            for j in 0..n {
                line[j] = cost[base + j * stride];
            }
            dt_1d(&line, &mut out, &mut v, &mut z);
            for j in 0..n {
                cost[base + j * stride] = out[j];
            }
        }
    }
    // every axis line hits the cube edge, which lies outside the unit ball,
    // so all values are finite after the first pass
    cost.iter().map(|&c| c.round() as u64).collect()
}

/// `distance_transform`: exact node-set distance to `B_1 \ Omega`, zero at
/// outside nodes.
pub fn distance_transform(mask: &DomainMask) -> Result<ScalarField> {
    let grid = *mask.grid();
    let sq = distance_transform_sq(mask);
    let h = grid.h();
    let values = sq.iter().map(|&k| h * (k as f64).sqrt()).collect();
    ScalarField::new(grid, values, Role::Auxiliary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, mask_from_state, Grid, ScalarField};
    use rand::{Rng, SeedableRng};

    fn brute_force_sq(mask: &DomainMask) -> Vec<u64> {
        let grid = *mask.grid();
        let nn = grid.node_count();
        let complement: Vec<usize> = (0..nn).filter(|&i| !mask.inside(i)).collect();
        (0..nn)
            .map(|i| {
                if !mask.inside(i) {
                    0
                } else {
                    complement.iter().map(|&j| grid.lat2(i, j)).min().unwrap()
                }
            })
            .collect()
    }

    fn random_state(grid: Grid, rng: &mut impl Rng, fill: f64) -> Option<DomainMask> {
        let mut vals = vec![0.0; grid.node_count()];
        for (i, v) in vals.iter_mut().enumerate() {
            if grid.in_unit_ball(i) && rng.gen_bool(fill) {
                *v = 1.0;
            }
        }
        let phi = ScalarField::new(grid, vals, Role::State).unwrap();
        mask_from_state(&phi).ok()
    }

    #[test]
    fn halfspace_distance_is_height() {
        let g = build_grid(2, 33).unwrap();
        let phi = ScalarField::from_fn(g, Role::State, |x| x[1].max(0.0)).unwrap();
        let mask = mask_from_state(&phi).unwrap();
        let dist = distance_transform(&mask).unwrap();
        // node at x_d = 4h on the vertical axis, far from the sphere
        let c = g.center();
        let idx = g.index([c, c + 4, 0]);
        assert_eq!(dist.get(idx), 4.0 * g.h());
        // any outside node is 0
        let out = g.index([c, c - 2, 0]);
        assert_eq!(dist.get(out), 0.0);
    }

    #[test]
    fn matches_brute_force_on_random_masks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [9usize, 11, 17, 25, 33] {
            let g = build_grid(2, n).unwrap();
            for _ in 0..4 {
                let Some(mask) = random_state(g, &mut rng, 0.6) else { continue };
                assert_eq!(distance_transform_sq(&mask), brute_force_sq(&mask), "n = {n}");
            }
        }
    }

    #[test]
    fn matches_brute_force_small_3d() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [9usize, 13] {
            let g = build_grid(3, n).unwrap();
            let Some(mask) = random_state(g, &mut rng, 0.5) else { continue };
            assert_eq!(distance_transform_sq(&mask), brute_force_sq(&mask));
        }
    }
}
