//! Estimators for the geometric constants of a state function: Lipschitz
//! bound, distance comparability, subharmonicity defect, exterior density,
//! level-set decay and nondegeneracy, with per-condition verdicts against
//! user thresholds.
//!
//! Continuum quantifiers ("for every r", "for every t") are sampled on
//! dyadic ladders, and bands at grid scale are excluded: kappa needs
//! `dist >= 2h`, density radii start at `4h`, level radii at `8h` with level
//! thresholds `r t >= 2 L_hat h`, nondegeneracy radii at `4h`. Ball node
//! sets are closed (`|y - x0| <= r`); the unit ball stays open.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{distance_transform, mask_from_state, DomainMask, Role, ScalarField};

/// Verdict thresholds. The theorem only needs the constants positive and
/// finite; how positive is an experiment parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// (b): pass iff `0 < L_hat <= lipschitz_max`.
    pub lipschitz_max: f64,
    /// (c): pass iff `kappa_hat >= kappa_min`.
    pub kappa_min: f64,
    /// (d): pass iff `defect >= -subharmonic_ctol * L_hat / h`. Discrete
    /// Laplacians of Lipschitz kinks scale like `1/h`, so the tolerance must
    /// carry that factor; a fixed absolute tolerance would fail every
    /// piecewise-linear state function.
    pub subharmonic_ctol: f64,
    /// (e): pass iff `mu_hat >= mu_min`.
    pub mu_min: f64,
    /// (f): pass iff `Lambda_hat <= lambda_max`.
    pub lambda_max: f64,
    /// (g): pass iff `eta_hat >= eta_min`.
    pub eta_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            lipschitz_max: 10.0,
            kappa_min: 0.05,
            subharmonic_ctol: 0.01,
            mu_min: 0.1,
            lambda_max: 10.0,
            eta_min: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub threshold: f64,
    pub note: String,
}

impl Verdict {
    fn new(pass: bool, threshold: f64, note: impl Into<String>) -> Verdict {
        Verdict { pass, threshold, note: note.into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdicts {
    pub a: Verdict,
    pub b: Verdict,
    pub c: Verdict,
    pub d: Verdict,
    pub e: Verdict,
    pub f: Verdict,
    pub g: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMeta {
    pub n: usize,
    pub h: f64,
    /// Absolute dyadic radius ladder used by the nondegeneracy scan.
    pub radii: Vec<f64>,
    /// Dyadic level grid at the outermost radius.
    pub t_grid: Vec<f64>,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    #[serde(rename = "L_hat")]
    pub l_hat: Option<f64>,
    pub kappa_hat: Option<f64>,
    pub subharmonic_defect: Option<f64>,
    pub mu_hat: Option<f64>,
    #[serde(rename = "Lambda_hat")]
    pub lambda_hat: Option<f64>,
    pub eta_hat: Option<f64>,
    pub verdicts: Verdicts,
    pub meta: ReportMeta,
}

impl HypothesisReport {
    pub fn passes_all(&self) -> bool {
        let v = &self.verdicts;
        v.a.pass && v.b.pass && v.c.pass && v.d.pass && v.e.pass && v.f.pass && v.g.pass
    }
}

/// (b) Lipschitz estimate: max slope over face-neighbor pairs with both
/// endpoints strictly inside the unit ball.
pub fn estimate_lipschitz(phi: &ScalarField) -> Result<f64> {
    phi.require_role(Role::State)?;
    let grid = *phi.grid();
    let h = grid.h();
    let mut best = 0.0f64;
    for i in 0..grid.node_count() {
        if !grid.in_unit_ball(i) {
            continue;
        }
        let m = grid.multi(i);
        for a in 0..grid.dim() {
            if m[a] + 1 >= grid.n() {
                continue;
            }
            let mut mm = m;
            mm[a] += 1;
            let j = grid.index(mm);
            if grid.in_unit_ball(j) {
                best = best.max((phi.get(i) - phi.get(j)).abs() / h);
            }
        }
    }
    Ok(best)
}

/// (c) distance comparability: min of `phi/dist` over inside nodes with
/// `|x| < 1/2` and `dist >= 2h`.
pub fn estimate_kappa(phi: &ScalarField, dist: &ScalarField) -> Result<f64> {
    phi.require_role(Role::State)?;
    if dist.grid() != phi.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = *phi.grid();
    let c = grid.center() as u64;
    let h = grid.h();
    let mut best = f64::INFINITY;
    for i in 0..grid.node_count() {
        // |x| < 1/2 on the integer lattice: 4*|x|^2_units < center^2
        if phi.get(i) > 0.0 && 4 * grid.norm2_units(i) < c * c && dist.get(i) >= 2.0 * h {
            best = best.min(phi.get(i) / dist.get(i));
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::DomainTooThin)
    }
}

/// (d) most negative interior discrete Laplacian `(sum_nbrs - 2d f)/h^2`
/// over interior nodes, i.e. nodes whose whole stencil stays inside the
/// unit ball (values at `|x| >= 1` are a storage artifact, not part of
/// `phi`). Accepts any role; for state fields the verdict threshold is
/// `-ctol * L_hat / h`.
pub fn subharmonic_defect(phi: &ScalarField) -> f64 {
    let grid = *phi.grid();
    let h2 = grid.h() * grid.h();
    let deg = 2.0 * grid.dim() as f64;
    let mut worst = f64::INFINITY;
    'nodes: for i in 0..grid.node_count() {
        if !grid.in_unit_ball(i) {
            continue;
        }
        let m = grid.multi(i);
        let mut s = -deg * phi.get(i);
        for a in 0..grid.dim() {
            let mut mm = m;
            mm[a] -= 1;
            let lo = grid.index(mm);
            mm[a] += 2;
            let hi = grid.index(mm);
            if !grid.in_unit_ball(lo) || !grid.in_unit_ball(hi) {
                continue 'nodes;
            }
            s += phi.get(lo) + phi.get(hi);
        }
        worst = worst.min(s / h2);
    }
    if worst.is_finite() {
        worst
    } else {
        0.0
    }
}

/// Scaled dyadic radii `2^{-j} * limit`, largest first, down to `floor`.
fn scaled_dyadic(limit: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = limit;
    while r >= floor {
        out.push(r);
        r *= 0.5;
    }
    out
}

/// Absolute dyadic radii `2^{-j}` in `[floor, limit)`, largest first.
fn absolute_dyadic(limit: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = 1.0;
    while r >= limit {
        r *= 0.5;
    }
    while r >= floor {
        out.push(r);
        r *= 0.5;
    }
    out
}

/// (e) exterior density: min over boundary nodes and scaled dyadic radii
/// `r = 2^{-j}(1-|x0|) >= 4h` of the complement node fraction of the ball.
pub fn estimate_density(mask: &DomainMask) -> Result<f64> {
    let grid = *mask.grid();
    let h = grid.h();
    if mask.boundary_nodes().is_empty() {
        return Err(Error::pre("mask has no boundary nodes"));
    }
    let per_x0 = |&x0: &usize| -> f64 {
        let limit = 1.0 - grid.norm(x0);
        let radii = scaled_dyadic(limit, 4.0 * h);
        if radii.is_empty() {
            return f64::INFINITY;
        }
        let r_units: Vec<f64> = radii.iter().map(|r| (r / h) * (r / h)).collect();
        let mut total = vec![0u64; radii.len()];
        let mut outside = vec![0u64; radii.len()];
        grid.for_each_ball_node(x0, radii[0], |i, k| {
            let kf = k as f64;
            for (j, &ru) in r_units.iter().enumerate() {
                if kf <= ru {
                    total[j] += 1;
                    if !mask.inside(i) {
                        outside[j] += 1;
                    }
                }
            }
        });
        let mut best = f64::INFINITY;
        for j in 0..radii.len() {
            if total[j] > 0 {
                best = best.min(outside[j] as f64 / total[j] as f64);
            }
        }
        best
    };
    let best = mask.boundary_nodes().par_iter().map(per_x0).reduce(|| f64::INFINITY, f64::min);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::ResolutionTooCoarse)
    }
}

/// (f) level-set constant: max over boundary nodes, scaled dyadic radii
/// `r >= 8h` and dyadic levels `t = 2^{-m} <= 1` with `r t >= 2 L_hat h` of
/// `|{0 < phi < r t} ∩ B_r| / (t |B_r|)` in node measure.
pub fn estimate_level_constant(phi: &ScalarField) -> Result<f64> {
    let mask = mask_from_state(phi)?;
    let l_hat = estimate_lipschitz(phi)?;
    estimate_level_constant_with(phi, &mask, l_hat)
}

pub fn estimate_level_constant_with(
    phi: &ScalarField,
    mask: &DomainMask,
    l_hat: f64,
) -> Result<f64> {
    let grid = *phi.grid();
    let h = grid.h();
    let t_floor_scale = 2.0 * l_hat.max(1e-300) * h;
    let per_x0 = |&x0: &usize| -> f64 {
        let limit = 1.0 - grid.norm(x0);
        let radii = scaled_dyadic(limit, 8.0 * h);
        let mut best = f64::NEG_INFINITY;
        for &r in &radii {
            if r < t_floor_scale {
                continue;
            }
            // number of admissible dyadic levels: r * 2^{-m} >= 2 L h
            let mut m_cap = 0usize;
            while r * 0.5f64.powi(m_cap as i32 + 1) >= t_floor_scale {
                m_cap += 1;
            }
            let mut hist = vec![0u64; m_cap + 1];
            let mut ball = 0u64;
            grid.for_each_ball_node(x0, r, |i, _| {
                ball += 1;
                let v = phi.get(i);
                if v > 0.0 && v < r {
                    // largest admissible m with phi < r 2^{-m}
                    let mut m = 0usize;
                    let mut thr = r * 0.5;
                    while m < m_cap && thr > v {
                        m += 1;
                        thr *= 0.5;
                    }
                    hist[m] += 1;
                }
            });
            if ball == 0 {
                continue;
            }
            // suffix sums give the count of {0 < phi < r 2^{-m}}
            let mut count = 0u64;
            for m in (0..=m_cap).rev() {
                count += hist[m];
                let t = 0.5f64.powi(m as i32);
                best = best.max(count as f64 / (t * ball as f64));
            }
        }
        best
    };
    let best =
        mask.boundary_nodes().par_iter().map(per_x0).reduce(|| f64::NEG_INFINITY, f64::max);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::ResolutionTooCoarse)
    }
}

/// (g) nondegeneracy: min over boundary nodes and absolute dyadic radii
/// `2^{-j} in [4h, 1-|x0|)` of `max_{B_r(x0)} phi / r`.
pub fn estimate_nondegeneracy(phi: &ScalarField) -> Result<f64> {
    let mask = mask_from_state(phi)?;
    estimate_nondegeneracy_with(phi, &mask)
}

pub fn estimate_nondegeneracy_with(phi: &ScalarField, mask: &DomainMask) -> Result<f64> {
    let grid = *phi.grid();
    let h = grid.h();
    let per_x0 = |&x0: &usize| -> f64 {
        let limit = 1.0 - grid.norm(x0);
        let radii = absolute_dyadic(limit, 4.0 * h);
        if radii.is_empty() {
            return f64::INFINITY;
        }
        let r_units: Vec<f64> = radii.iter().map(|r| (r / h) * (r / h)).collect();
        let mut sup = vec![f64::NEG_INFINITY; radii.len()];
        grid.for_each_ball_node(x0, radii[0], |i, k| {
            let kf = k as f64;
            let v = phi.get(i);
            for (j, &ru) in r_units.iter().enumerate() {
                if kf <= ru && v > sup[j] {
                    sup[j] = v;
                }
            }
        });
        let mut best = f64::INFINITY;
        for (j, &r) in radii.iter().enumerate() {
            if sup[j].is_finite() {
                best = best.min(sup[j] / r);
            }
        }
        best
    };
    let best = mask.boundary_nodes().par_iter().map(per_x0).reduce(|| f64::INFINITY, f64::min);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::ResolutionTooCoarse)
    }
}

/// Runs every estimator and issues the seven verdicts. Estimator errors
/// become per-condition failures, not global aborts.
pub fn full_report(phi: &ScalarField, thresholds: &Thresholds) -> Result<HypothesisReport> {
    phi.require_role(Role::State)?;
    let grid = *phi.grid();
    let h = grid.h();

    // (a) positivity and vanishing: nonnegative everywhere, zero outside the
    // unit ball, positivity set nonempty. The state role already enforces
    // the first two; re-verify explicitly.
    let nonneg = phi.values().iter().all(|&v| v >= 0.0);
    let vanishes = (0..grid.node_count()).all(|i| grid.in_unit_ball(i) || phi.get(i) == 0.0);
    let mask = mask_from_state(phi);
    let a_pass = nonneg && vanishes && mask.is_ok();
    let verdict_a = Verdict::new(
        a_pass,
        0.0,
        if a_pass { "phi >= 0, vanishes off the mask, domain nonempty" } else { "violated" },
    );

    let l = estimate_lipschitz(phi);
    let (l_val, verdict_b) = match &l {
        Ok(v) => (
            Some(*v),
            Verdict::new(
                *v > 0.0 && *v <= thresholds.lipschitz_max,
                thresholds.lipschitz_max,
                format!("L_hat = {v:.6}"),
            ),
        ),
        Err(e) => (None, Verdict::new(false, thresholds.lipschitz_max, e.to_string())),
    };
    let l_hat = l_val.unwrap_or(0.0);

    let (kappa_val, verdict_c) = match &mask {
        Ok(m) => {
            let dist = distance_transform(m)?;
            match estimate_kappa(phi, &dist) {
                Ok(v) => (
                    Some(v),
                    Verdict::new(
                        v >= thresholds.kappa_min,
                        thresholds.kappa_min,
                        format!("kappa_hat = {v:.6}"),
                    ),
                ),
                Err(e) => (None, Verdict::new(false, thresholds.kappa_min, e.to_string())),
            }
        }
        Err(e) => (None, Verdict::new(false, thresholds.kappa_min, e.to_string())),
    };

    let defect = subharmonic_defect(phi);
    let tol_sub = thresholds.subharmonic_ctol * l_hat / h;
    let verdict_d = Verdict::new(
        defect >= -tol_sub,
        -tol_sub,
        format!("defect = {defect:.6}, tol_sub = {tol_sub:.6}"),
    );

    let (mu_val, verdict_e) = match &mask {
        Ok(m) => match estimate_density(m) {
            Ok(v) => (
                Some(v),
                Verdict::new(v >= thresholds.mu_min, thresholds.mu_min, {
                    format!("mu_hat = {v:.6}")
                }),
            ),
            Err(e) => (None, Verdict::new(false, thresholds.mu_min, e.to_string())),
        },
        Err(e) => (None, Verdict::new(false, thresholds.mu_min, e.to_string())),
    };

    let (lambda_val, verdict_f) = match &mask {
        Ok(m) => match estimate_level_constant_with(phi, m, l_hat) {
            Ok(v) => (
                Some(v),
                Verdict::new(v <= thresholds.lambda_max, thresholds.lambda_max, {
                    format!("Lambda_hat = {v:.6}")
                }),
            ),
            Err(e) => (None, Verdict::new(false, thresholds.lambda_max, e.to_string())),
        },
        Err(e) => (None, Verdict::new(false, thresholds.lambda_max, e.to_string())),
    };

    let (eta_val, verdict_g) = match &mask {
        Ok(m) => match estimate_nondegeneracy_with(phi, m) {
            Ok(v) => (
                Some(v),
                Verdict::new(v >= thresholds.eta_min, thresholds.eta_min, {
                    format!("eta_hat = {v:.6}")
                }),
            ),
            Err(e) => (None, Verdict::new(false, thresholds.eta_min, e.to_string())),
        },
        Err(e) => (None, Verdict::new(false, thresholds.eta_min, e.to_string())),
    };

    let radii = absolute_dyadic(1.0 + 1e-12, 4.0 * h);
    let t_grid = scaled_dyadic(1.0, 2.0 * l_hat.max(1e-300) * h);
    Ok(HypothesisReport {
        l_hat: l_val,
        kappa_hat: kappa_val,
        subharmonic_defect: Some(defect),
        mu_hat: mu_val,
        lambda_hat: lambda_val,
        eta_hat: eta_val,
        verdicts: Verdicts {
            a: verdict_a,
            b: verdict_b,
            c: verdict_c,
            d: verdict_d,
            e: verdict_e,
            f: verdict_f,
            g: verdict_g,
        },
        meta: ReportMeta { n: grid.n(), h, radii, t_grid, thresholds: *thresholds },
    })
}
