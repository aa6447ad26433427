//! Dirichlet problems for discrete harmonic functions on masked domains.
//!
//! The unknowns are the inside nodes of a [`DomainMask`]; every other node
//! carries Dirichlet data. The solver is projected red-black SOR: each
//! update is over-relaxed and then projected onto the interval spanned by
//! the boundary data. The unconstrained solution of the 5/7-point system
//! already satisfies the discrete maximum principle, so the projection does
//! not change the limit, while making `min data <= f <= max data` hold
//! exactly at every sweep.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DomainMask, Role, ScalarField};

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    /// Max-norm bound on the interior discrete Laplacian at convergence.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Validate that the Dirichlet data is nonnegative.
    pub require_nonnegative_data: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tolerance: 1e-8, max_sweeps: 200_000, require_nonnegative_data: false }
    }
}

#[derive(Debug, Clone)]
pub struct DirichletProblem {
    mask: DomainMask,
    boundary_data: ScalarField,
    settings: SolverSettings,
}

impl DirichletProblem {
    pub fn new(
        mask: DomainMask,
        boundary_data: ScalarField,
        settings: SolverSettings,
    ) -> Result<DirichletProblem> {
        if boundary_data.grid() != mask.grid() {
            return Err(Error::GridMismatch);
        }
        if settings.require_nonnegative_data {
            for i in 0..mask.grid().node_count() {
                if !mask.inside(i) && boundary_data.get(i) < 0.0 {
                    return Err(Error::NonPositive { node: i, value: boundary_data.get(i) });
                }
            }
        }
        Ok(DirichletProblem { mask, boundary_data, settings })
    }

    pub fn mask(&self) -> &DomainMask {
        &self.mask
    }

    pub fn boundary_data(&self) -> &ScalarField {
        &self.boundary_data
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }
}

/// A converged solve: the underlying field plus the residual it achieved.
#[derive(Debug, Clone)]
pub struct HarmonicField {
    field: ScalarField,
    mask: DomainMask,
    residual: f64,
}

impl HarmonicField {
    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn mask(&self) -> &DomainMask {
        &self.mask
    }

    pub fn achieved_residual(&self) -> f64 {
        self.residual
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.field.get(idx)
    }

    pub fn grid(&self) -> &crate::grid::Grid {
        self.field.grid()
    }
}

struct SyncPtr(*mut f64);
unsafe impl Sync for SyncPtr {}

/// Precomputed sweep structure: inside nodes split by lattice parity, with
/// their face-neighbor indices (every inside node has all 2d neighbors).
struct Stencil {
    colors: [Vec<u32>; 2],
    nbrs: [Vec<u32>; 2],
    deg: usize,
}

impl Stencil {
    fn build(mask: &DomainMask) -> Stencil {
        let grid = mask.grid();
        let deg = 2 * grid.dim();
        let mut colors = [Vec::new(), Vec::new()];
        let mut nbrs = [Vec::new(), Vec::new()];
        let mut scratch = Vec::with_capacity(6);
        for i in 0..grid.node_count() {
            if !mask.inside(i) {
                continue;
            }
            let m = grid.multi(i);
            let parity = (m[0] + m[1] + m[2]) % 2;
            colors[parity].push(i as u32);
            grid.neighbors(i, &mut scratch);
            debug_assert_eq!(scratch.len(), deg);
            for &j in &scratch {
                nbrs[parity].push(j as u32);
            }
        }
        Stencil { colors, nbrs, deg }
    }
}

fn data_bounds(mask: &DomainMask, data: &ScalarField) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..mask.grid().node_count() {
        if !mask.inside(i) {
            lo = lo.min(data.get(i));
            hi = hi.max(data.get(i));
        }
    }
    (lo, hi)
}

/// Solves the Dirichlet problem. See [`solve_with_init`].
pub fn solve(problem: &DirichletProblem) -> Result<HarmonicField> {
    solve_with_init(problem, None)
}

/// Solves with an optional warm start (values at inside nodes; clamped to
/// the data range so the maximum principle is preserved from the start).
pub fn solve_with_init(problem: &DirichletProblem, init: Option<&[f64]>) -> Result<HarmonicField> {
    let mask = &problem.mask;
    let data = &problem.boundary_data;
    let grid = *mask.grid();
    let h = grid.h();
    let deg = 2 * grid.dim();
    let (lo, hi) = data_bounds(mask, data);

    let mut values: Vec<f64> = data.values().to_vec();
    match init {
        Some(init_vals) => {
            for i in 0..grid.node_count() {
                if mask.inside(i) {
                    values[i] = init_vals[i].clamp(lo, hi);
                }
            }
        }
        None => {
            let mid = 0.5 * (lo + hi);
            for i in 0..grid.node_count() {
                if mask.inside(i) {
                    values[i] = mid;
                }
            }
        }
    }

    let stencil = Stencil::build(mask);
    let omega = 2.0 / (1.0 + (std::f64::consts::PI * h / 2.0).sin());
    let tol = problem.settings.tolerance;
    let inv_deg = 1.0 / deg as f64;

    let mut sweeps = 0usize;
    let mut res = f64::INFINITY;
    let check_every = 4;
    while sweeps < problem.settings.max_sweeps {
        for color in 0..2 {
            let idxs = &stencil.colors[color];
            let nbrs = &stencil.nbrs[color];
            let ptr = SyncPtr(values.as_mut_ptr());
            let body = |t: usize| {
                // Safety: nodes of one color are pairwise distinct and their
                // neighbors are all of the other color, so writes never alias
                // reads within a phase.
                let p = &ptr;
                let i = idxs[t] as usize;
                let base = t * stencil.deg;
                let mut s = 0.0;
                for e in 0..stencil.deg {
                    s += unsafe { *p.0.add(nbrs[base + e] as usize) };
                }
                let avg = s * inv_deg;
                let old = unsafe { *p.0.add(i) };
                let new = (old + omega * (avg - old)).clamp(lo, hi);
                unsafe { *p.0.add(i) = new };
            };
            if idxs.len() >= 4096 {
                (0..idxs.len()).into_par_iter().for_each(body);
            } else {
                (0..idxs.len()).for_each(body);
            }
        }
        sweeps += 1;
        if sweeps % check_every == 0 || sweeps == problem.settings.max_sweeps {
            res = residual_of(&grid, mask, &values);
            if res <= tol {
                break;
            }
        }
    }
    if res > tol {
        return Err(Error::NotConverged { residual: res, sweeps });
    }
    let field = ScalarField::new(grid, values, Role::Harmonic)?;
    Ok(HarmonicField { field, mask: mask.clone(), residual: res })
}

fn residual_of(grid: &crate::grid::Grid, mask: &DomainMask, values: &[f64]) -> f64 {
    let deg = 2 * grid.dim();
    let h2 = grid.h() * grid.h();
    let nn = grid.node_count();
    let per_node = |i: usize| -> f64 {
        if !mask.inside(i) {
            return 0.0;
        }
        let m = grid.multi(i);
        let mut s = -(deg as f64) * values[i];
        for a in 0..grid.dim() {
            let mut mm = m;
            mm[a] -= 1;
            s += values[grid.index(mm)];
            mm[a] += 2;
            s += values[grid.index(mm)];
        }
        (s / h2).abs()
    };
    if nn >= 16384 {
        (0..nn).into_par_iter().map(per_node).reduce(|| 0.0, f64::max)
    } else {
        (0..nn).map(per_node).fold(0.0, f64::max)
    }
}

/// Recomputed max-norm interior residual of a harmonic field.
pub fn residual(field: &HarmonicField) -> f64 {
    residual_of(field.field.grid(), &field.mask, field.field.values())
}

/// Mean value defect `|avg_{B_r(x0)} f - f(x0)|` over the closed node ball;
/// the ball must lie entirely inside the domain.
pub fn mean_value_check(field: &HarmonicField, x0: usize, r: f64) -> Result<f64> {
    let grid = *field.grid();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut all_inside = true;
    grid.for_each_ball_node(x0, r, |i, _| {
        if !field.mask.inside(i) {
            all_inside = false;
        }
        sum += field.get(i);
        count += 1;
    });
    if !all_inside || count == 0 {
        return Err(Error::BallNotInside { center: x0, r });
    }
    Ok((sum / count as f64 - field.get(x0)).abs())
}

/// Max and min of a field over the closed node ball intersected with the
/// domain. Returns `None` when the intersection is empty.
pub fn ball_extrema(field: &HarmonicField, x0: usize, r: f64) -> Option<(f64, f64)> {
    let grid = *field.grid();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut seen = false;
    grid.for_each_ball_node(x0, r, |i, _| {
        if field.mask.inside(i) {
            seen = true;
            lo = lo.min(field.get(i));
            hi = hi.max(field.get(i));
        }
    });
    seen.then_some((hi, lo))
}
