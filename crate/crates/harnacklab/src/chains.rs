//! Constructive Harnack chains.
//!
//! Close to the boundary, a single improving step jumps from `x0` to the
//! argmax of `phi` on the discrete sphere of radius `dist(x0)`, gaining a
//! factor `1 + sigma` in `phi`; iterating escapes the band `{phi <= delta}`
//! in at most `log(delta/phi(x0)) / log(1 + sigma)` steps. Away from the
//! boundary, two points of a superlevel set are connected by a face-adjacent
//! path inside the half-level set, or reported as lying in distinct
//! components.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{label_components, Role, ScalarField};
use crate::harmonic::HarmonicField;

#[derive(Debug, Clone, Copy)]
pub struct ChainConfig {
    /// Required per-step improvement factor is `1 + sigma_min`.
    pub sigma_min: f64,
    /// Largest admissible escape level.
    pub delta0: f64,
    /// Configured per-step Harnack constant, calibrated on analytic domains.
    pub h_cfg: f64,
    /// Inner-ball fraction for away-from-boundary connectivity.
    pub tau: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { sigma_min: 0.05, delta0: 0.25, h_cfg: 8.0, tau: 0.25 }
    }
}

/// An escape chain `x_0, ..., x_N` with per-step radii `r_k = dist(x_k)`.
#[derive(Debug, Clone)]
pub struct HarnackChain {
    points: Vec<usize>,
    radii: Vec<f64>,
    sigma_achieved: Option<f64>,
    h_bound: f64,
    terminal_level: f64,
}

impl HarnackChain {
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.radii.len()
    }

    /// Min over steps of `phi(x_{k+1})/phi(x_k) - 1`; `None` for an empty
    /// chain.
    pub fn sigma_achieved(&self) -> Option<f64> {
        self.sigma_achieved
    }

    /// Accumulated multiplicative Harnack constant `h_cfg^N`.
    pub fn h_bound(&self) -> f64 {
        self.h_bound
    }

    pub fn terminal_level(&self) -> f64 {
        self.terminal_level
    }

    pub fn total_travel(&self) -> f64 {
        self.radii.iter().sum()
    }

    /// Re-checks every chain invariant against the fields it was built from.
    pub fn validate(
        &self,
        phi: &ScalarField,
        dist: &ScalarField,
        cfg: &ChainConfig,
        delta: f64,
    ) -> Result<()> {
        let grid = phi.grid();
        let h = grid.h();
        if self.points.len() != self.radii.len() + 1 {
            return Err(Error::pre("chain points/radii length mismatch"));
        }
        for k in 0..self.radii.len() {
            let (a, b) = (self.points[k], self.points[k + 1]);
            let r = self.radii[k];
            if (dist.get(a) - r).abs() > 1e-12 {
                return Err(Error::pre(format!("radius {k} does not match dist")));
            }
            let step = h * (grid.lat2(a, b) as f64).sqrt();
            if !(step <= r + 1e-12 && step > r - h - 1e-12) {
                return Err(Error::pre(format!("step {k} leaves the discrete sphere")));
            }
            let ratio = phi.get(b) / phi.get(a);
            if ratio < 1.0 + cfg.sigma_min {
                return Err(Error::NoImprovement { achieved: ratio, required: 1.0 + cfg.sigma_min });
            }
        }
        let phi0 = phi.get(self.points[0]);
        let cap = n_max(phi0, delta, cfg.sigma_min);
        if self.steps() > cap {
            return Err(Error::pre(format!("chain length {} exceeds bound {cap}", self.steps())));
        }
        if self.terminal_level != phi.get(*self.points.last().unwrap()) {
            return Err(Error::pre("terminal level mismatch"));
        }
        Ok(())
    }

    /// JSON form: `{points: [[..]], radii, sigma_achieved, H_bound,
    /// terminal_level}` with points as lattice multi-indices.
    pub fn to_json(&self, grid: &crate::grid::Grid) -> serde_json::Value {
        #[derive(Serialize)]
        struct ChainJson {
            points: Vec<Vec<usize>>,
            radii: Vec<f64>,
            sigma_achieved: Option<f64>,
            #[serde(rename = "H_bound")]
            h_bound: f64,
            terminal_level: f64,
        }
        let points = self
            .points
            .iter()
            .map(|&i| grid.multi(i)[..grid.dim()].to_vec())
            .collect();
        serde_json::to_value(ChainJson {
            points,
            radii: self.radii.clone(),
            sigma_achieved: self.sigma_achieved,
            h_bound: self.h_bound,
            terminal_level: self.terminal_level,
        })
        .expect("chain serialization")
    }
}

/// `N_max`: chains from `phi0` to `target` gain at least `1 + sigma` per
/// step.
pub fn n_max(phi0: f64, target: f64, sigma_min: f64) -> usize {
    if phi0 > target {
        return 0;
    }
    ((target / phi0).ln() / (1.0 + sigma_min).ln()).ceil() as usize
}

/// One improving step: the argmax of `phi` over the discrete sphere
/// `{ r - h < |y - x0| <= r }` with `r = dist(x0)`.
///
/// Preconditions from the short-chain lemma: `x0` inside the domain,
/// `3 dist(x0) < 1 - |x0|`, and `dist(x0) >= 2h` so the sphere is resolved.
/// Fails with the achieved ratio when the improvement falls short of
/// `1 + sigma_min`.
pub fn improving_step(
    phi: &ScalarField,
    dist: &ScalarField,
    x0: usize,
    cfg: &ChainConfig,
) -> Result<usize> {
    phi.require_role(Role::State)?;
    let grid = *phi.grid();
    let h = grid.h();
    if phi.get(x0) <= 0.0 || !grid.in_unit_ball(x0) {
        return Err(Error::pre("x0 is not inside the domain"));
    }
    let r = dist.get(x0);
    if r < 2.0 * h {
        return Err(Error::pre(format!("dist(x0) = {r} below 2h")));
    }
    if 3.0 * r >= 1.0 - grid.norm(x0) {
        return Err(Error::pre("3 dist(x0) < 1 - |x0| violated"));
    }
    let sphere = grid.discrete_sphere(x0, r);
    let mut best = x0;
    let mut best_val = f64::NEG_INFINITY;
    for &y in &sphere {
        if phi.get(y) > best_val {
            best_val = phi.get(y);
            best = y;
        }
    }
    let ratio = best_val / phi.get(x0);
    if ratio < 1.0 + cfg.sigma_min {
        return Err(Error::NoImprovement { achieved: ratio, required: 1.0 + cfg.sigma_min });
    }
    Ok(best)
}

/// Iterates [`improving_step`] until `phi > delta`, recording the chain.
/// Requires `phi(x0) > delta/2` and `delta <= delta0`.
pub fn escape_chain(
    phi: &ScalarField,
    dist: &ScalarField,
    x0: usize,
    delta: f64,
    cfg: &ChainConfig,
) -> Result<HarnackChain> {
    if delta > cfg.delta0 {
        return Err(Error::pre(format!("delta = {delta} exceeds delta0 = {}", cfg.delta0)));
    }
    if phi.get(x0) <= delta / 2.0 {
        return Err(Error::pre("phi(x0) <= delta/2"));
    }
    let mut points = vec![x0];
    let mut radii = Vec::new();
    let mut sigma: Option<f64> = None;
    let cap = n_max(phi.get(x0), delta, cfg.sigma_min);
    let mut current = x0;
    while phi.get(current) <= delta {
        if radii.len() >= cap {
            return Err(Error::pre(format!("chain exceeded N_max = {cap}")));
        }
        let next = improving_step(phi, dist, current, cfg)?;
        let ratio = phi.get(next) / phi.get(current) - 1.0;
        sigma = Some(sigma.map_or(ratio, |s: f64| s.min(ratio)));
        radii.push(dist.get(current));
        points.push(next);
        current = next;
    }
    let chain = HarnackChain {
        terminal_level: phi.get(current),
        h_bound: cfg.h_cfg.powi(radii.len() as i32),
        points,
        radii,
        sigma_achieved: sigma,
    };
    chain.validate(phi, dist, cfg, delta)?;
    Ok(chain)
}

/// Empirical per-step and end-to-end transfer of a positive harmonic field
/// along a chain.
#[derive(Debug, Clone, Serialize)]
pub struct TransferBound {
    pub max_step_ratio: f64,
    pub end_to_end_ratio: f64,
    /// `max_step_ratio <= h_cfg` and `end_to_end_ratio <= h_cfg^N`.
    pub within_config: bool,
}

pub fn chain_transfer_bound(
    chain: &HarnackChain,
    w: &HarmonicField,
    cfg: &ChainConfig,
) -> Result<TransferBound> {
    for &p in chain.points() {
        if w.get(p) <= 0.0 {
            return Err(Error::NonPositive { node: p, value: w.get(p) });
        }
    }
    let mut max_step = 1.0f64;
    for k in 0..chain.steps() {
        let (a, b) = (w.get(chain.points()[k]), w.get(chain.points()[k + 1]));
        max_step = max_step.max(a / b).max(b / a);
    }
    let first = w.get(chain.points()[0]);
    let last = w.get(*chain.points().last().unwrap());
    let end = (first / last).max(last / first);
    let within = max_step <= cfg.h_cfg && end <= cfg.h_cfg.powi(chain.steps() as i32);
    Ok(TransferBound { max_step_ratio: max_step, end_to_end_ratio: end, within_config: within })
}

/// Outcome of away-from-boundary connectivity.
#[derive(Debug, Clone)]
pub enum ConnectOutcome {
    /// Face-adjacent path through `B_R ∩ {phi > delta R / 2}`.
    Path(Vec<usize>),
    /// Endpoint component labels in the half-level superlevel set.
    NotConnected { label1: u32, label2: u32 },
}

/// Connects `x1` to `x2` inside `B_R ∩ {phi > (delta/2) R}` by shortest
/// face-adjacency path, or reports the two component labels. Both points
/// must lie in `B_{tau R} ∩ {phi > delta R}`.
pub fn connect_away(
    phi: &ScalarField,
    x1: usize,
    x2: usize,
    delta: f64,
    r_upper: f64,
    cfg: &ChainConfig,
) -> Result<ConnectOutcome> {
    phi.require_role(Role::State)?;
    let grid = *phi.grid();
    for &p in &[x1, x2] {
        if grid.norm(p) >= cfg.tau * r_upper {
            return Err(Error::pre(format!("node {p} outside B_(tau R)")));
        }
        if phi.get(p) <= delta * r_upper {
            return Err(Error::pre(format!("phi at node {p} not above delta R")));
        }
    }
    if x1 == x2 {
        return Ok(ConnectOutcome::Path(vec![x1]));
    }
    let pred =
        |i: usize| grid.norm(i) < r_upper && phi.get(i) > 0.5 * delta * r_upper;

    // breadth-first search from x1
    let mut parent = vec![usize::MAX; grid.node_count()];
    let mut queue = std::collections::VecDeque::new();
    let mut nbrs = Vec::with_capacity(6);
    parent[x1] = x1;
    queue.push_back(x1);
    let mut found = false;
    'bfs: while let Some(i) = queue.pop_front() {
        grid.neighbors(i, &mut nbrs);
        for &j in &nbrs {
            if parent[j] == usize::MAX && pred(j) {
                parent[j] = i;
                if j == x2 {
                    found = true;
                    break 'bfs;
                }
                queue.push_back(j);
            }
        }
    }
    if found {
        let mut path = vec![x2];
        let mut cur = x2;
        while cur != x1 {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        Ok(ConnectOutcome::Path(path))
    } else {
        let (labels, _) = label_components(&grid, pred);
        Ok(ConnectOutcome::NotConnected { label1: labels[x1], label2: labels[x2] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::grid::{build_grid, distance_transform, mask_from_state};
    use crate::harmonic::{solve, DirichletProblem, SolverSettings};

    fn halfspace_setup(n: usize) -> (ScalarField, ScalarField) {
        let g = build_grid(2, n).unwrap();
        let phi = builtin::halfspace(g).unwrap();
        let mask = mask_from_state(&phi).unwrap();
        let dist = distance_transform(&mask).unwrap();
        (phi, dist)
    }

    #[test]
    fn improving_step_doubles_on_halfspace() {
        let (phi, dist) = halfspace_setup(129);
        let g = *phi.grid();
        let c = g.center();
        let x0 = g.index([c, c + 8, 0]);
        let y0 = improving_step(&phi, &dist, x0, &ChainConfig::default()).unwrap();
        assert_eq!(y0, g.index([c, c + 16, 0]));
        assert_eq!(phi.get(y0) / phi.get(x0), 2.0);
    }

    #[test]
    fn improving_step_argmax_is_scaling_invariant() {
        let (phi, dist) = halfspace_setup(65);
        let g = *phi.grid();
        let x0 = g.index([g.center() + 5, g.center() + 4, 0]);
        let base = improving_step(&phi, &dist, x0, &ChainConfig::default()).unwrap();
        for c in [0.5f64, 4.0] {
            let scaled = ScalarField::new(
                g,
                phi.values().iter().map(|v| c * v).collect(),
                Role::State,
            )
            .unwrap();
            let y = improving_step(&scaled, &dist, x0, &ChainConfig::default()).unwrap();
            assert_eq!(y, base, "c = {c}");
        }
    }

    #[test]
    fn improving_step_preconditions() {
        let (phi, dist) = halfspace_setup(65);
        let g = *phi.grid();
        let c = g.center();
        let cfg = ChainConfig::default();
        // dist < 2h
        assert!(improving_step(&phi, &dist, g.index([c, c + 1, 0]), &cfg).is_err());
        // 3 dist >= 1 - |x0| high above the boundary
        assert!(improving_step(&phi, &dist, g.index([c, c + 20, 0]), &cfg).is_err());
        // not inside
        assert!(improving_step(&phi, &dist, g.index([c, c - 3, 0]), &cfg).is_err());
    }

    #[test]
    fn improving_step_reports_failed_ratio_at_local_max() {
        // cone peaked at an interior point: every sphere value is smaller
        let g = build_grid(2, 129).unwrap();
        let peak = [0.0, 0.25];
        let phi = ScalarField::from_fn(g, Role::State, |x| {
            (0.2 - ((x[0] - peak[0]).powi(2) + (x[1] - peak[1]).powi(2)).sqrt()).max(0.0)
        })
        .unwrap();
        let mask = mask_from_state(&phi).unwrap();
        let dist = distance_transform(&mask).unwrap();
        let x0 = g.index([g.center(), g.center() + 16, 0]); // the peak node
        match improving_step(&phi, &dist, x0, &ChainConfig::default()) {
            Err(Error::NoImprovement { achieved, required }) => {
                assert!(achieved < required, "{achieved} vs {required}");
            }
            other => panic!("expected NoImprovement, got {other:?}"),
        }
    }

    #[test]
    fn escape_chain_single_doubling() {
        let (phi, dist) = halfspace_setup(129);
        let g = *phi.grid();
        let c = g.center();
        let cfg = ChainConfig::default();
        let delta = 0.2;
        // phi(x0) = 0.125 in (delta/2, delta]: one doubling escapes
        let x0 = g.index([c, c + 8, 0]);
        let chain = escape_chain(&phi, &dist, x0, delta, &cfg).unwrap();
        assert_eq!(chain.steps(), 1);
        assert!(chain.terminal_level() > delta);
        assert_eq!(chain.sigma_achieved(), Some(1.0));
        // already above delta: empty chain
        let x_hi = g.index([c, c + 20, 0]);
        let chain = escape_chain(&phi, &dist, x_hi, delta, &cfg).unwrap();
        assert_eq!(chain.steps(), 0);
        assert_eq!(chain.h_bound(), 1.0);
        // below delta/2 is rejected
        assert!(escape_chain(&phi, &dist, g.index([c, c + 2, 0]), delta, &cfg).is_err());
    }

    #[test]
    fn escape_chain_travel_bound_on_halfspace() {
        let (phi, dist) = halfspace_setup(257);
        let g = *phi.grid();
        let c = g.center();
        let cfg = ChainConfig::default();
        let delta = 0.2;
        let kappa = 1.0; // analytic for the halfspace
        for start in [3usize, 5, 9, 13] {
            let x0 = g.index([c - 7, c + start, 0]);
            if phi.get(x0) <= delta / 2.0 {
                continue;
            }
            let chain = escape_chain(&phi, &dist, x0, delta, &cfg).unwrap();
            let n = chain.steps() as f64;
            assert!(
                chain.total_travel() <= n * delta / kappa + n * g.h() + 1e-12,
                "travel {} with N = {n}",
                chain.total_travel()
            );
            assert!(chain.steps() <= n_max(phi.get(x0), delta, cfg.sigma_min));
        }
    }

    #[test]
    fn transfer_bound_constant_and_linear() {
        let (phi, dist) = halfspace_setup(129);
        let g = *phi.grid();
        let c = g.center();
        let cfg = ChainConfig::default();
        let x0 = g.index([c, c + 8, 0]);
        let chain = escape_chain(&phi, &dist, x0, 0.2, &cfg).unwrap();
        let mask = mask_from_state(&phi).unwrap();

        let one = ScalarField::constant(g, Role::Auxiliary, 1.0).unwrap();
        let w1 = solve(&DirichletProblem::new(mask.clone(), one, SolverSettings::default()).unwrap())
            .unwrap();
        let t = chain_transfer_bound(&chain, &w1, &cfg).unwrap();
        assert_eq!(t.max_step_ratio, 1.0);
        assert!(t.within_config);

        // w = x_d doubles along the doubling chain
        let lin = builtin::data_by_name("linear", g).unwrap();
        let wl = solve(&DirichletProblem::new(mask, lin, SolverSettings::default()).unwrap())
            .unwrap();
        let t = chain_transfer_bound(&chain, &wl, &cfg).unwrap();
        assert!((t.max_step_ratio - 2.0).abs() < 1e-6, "ratio {}", t.max_step_ratio);
        assert!(t.within_config);
    }

    #[test]
    fn transfer_bound_rejects_nonpositive_w() {
        let (phi, dist) = halfspace_setup(129);
        let g = *phi.grid();
        let chain =
            escape_chain(&phi, &dist, g.index([g.center(), g.center() + 8, 0]), 0.2, &ChainConfig::default())
                .unwrap();
        let mask = mask_from_state(&phi).unwrap();
        let zero = ScalarField::constant(g, Role::Auxiliary, 0.0).unwrap();
        let w = solve(&DirichletProblem::new(mask, zero, SolverSettings::default()).unwrap())
            .unwrap();
        assert!(matches!(
            chain_transfer_bound(&chain, &w, &ChainConfig::default()),
            Err(Error::NonPositive { .. })
        ));
    }

    #[test]
    fn connect_away_on_halfspace_slab() {
        let g = build_grid(2, 129).unwrap();
        let phi = builtin::halfspace(g).unwrap();
        let cfg = ChainConfig::default();
        let (delta, r) = (0.1, 0.8);
        let c = g.center();
        let x1 = g.index([c - 8, c + 7, 0]);
        let x2 = g.index([c + 9, c + 6, 0]);
        match connect_away(&phi, x1, x2, delta, r, &cfg).unwrap() {
            ConnectOutcome::Path(path) => {
                assert_eq!(*path.first().unwrap(), x1);
                assert_eq!(*path.last().unwrap(), x2);
                for w in path.windows(2) {
                    assert_eq!(g.lat2(w[0], w[1]), 1, "face adjacency");
                }
                for &p in &path {
                    assert!(g.norm(p) < r && phi.get(p) > 0.5 * delta * r);
                }
            }
            other => panic!("expected a path, got {other:?}"),
        }
    }

    #[test]
    fn connect_away_two_bumps_not_connected() {
        let g = build_grid(2, 129).unwrap();
        let phi = builtin::twobump(g).unwrap();
        let cfg = ChainConfig::default();
        let (delta, r) = (0.1, 0.8);
        // seeds near the two bump centers
        let c = g.center();
        let x1 = g.index([c - 6, c + 10, 0]);
        let x2 = g.index([c + 6, c + 10, 0]);
        assert!(phi.get(x1) > delta * r && phi.get(x2) > delta * r, "seeds admissible");
        match connect_away(&phi, x1, x2, delta, r, &cfg).unwrap() {
            ConnectOutcome::NotConnected { label1, label2 } => {
                assert_ne!(label1, 0);
                assert_ne!(label2, 0);
                assert_ne!(label1, label2);
            }
            other => panic!("expected NotConnected, got {other:?}"),
        }
    }

    #[test]
    fn connect_away_agrees_with_labeling() {
        let g = build_grid(2, 65).unwrap();
        for name in ["halfspace", "twobump"] {
            let phi = builtin::domain_by_name(name, g).unwrap();
            let cfg = ChainConfig::default();
            let (delta, r) = (0.1, 0.8);
            let pred = |i: usize| g.norm(i) < r && phi.get(i) > 0.5 * delta * r;
            let (labels, _) = label_components(&g, pred);
            let admissible: Vec<usize> = (0..g.node_count())
                .filter(|&i| g.norm(i) < cfg.tau * r && phi.get(i) > delta * r)
                .collect();
            for (a_pos, &x1) in admissible.iter().enumerate().step_by(7) {
                for &x2 in admissible.iter().skip(a_pos).step_by(11) {
                    let connected = labels[x1] == labels[x2];
                    match connect_away(&phi, x1, x2, delta, r, &cfg).unwrap() {
                        ConnectOutcome::Path(_) => assert!(connected, "{name}"),
                        ConnectOutcome::NotConnected { .. } => assert!(!connected, "{name}"),
                    }
                }
            }
        }
    }
}
