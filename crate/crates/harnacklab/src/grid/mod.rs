//! Uniform Cartesian grid over `[-1,1]^d`, masked scalar/vector fields,
//! domain masks and geometric queries.
//!
//! Node coordinates are `x_a = -1 + i_a * h` with `h = 2/(n-1)`; `n` is odd
//! so the origin is a node. Squared distances between nodes are integers in
//! units of `h^2`, and membership tests (`|x| < 1`, `|y - x0| <= r`) are
//! computed on that integer lattice, which keeps every geometric predicate
//! exact and deterministic.

mod dist;
mod io;
mod rescale;

pub use dist::{distance_transform, distance_transform_sq};
pub use io::{load_field, save_field};
pub use rescale::rescale_field;

use crate::error::{Error, Result};

/// What a scalar field holds. `State` fields house the domain-defining
/// function `phi` and must be nonnegative and vanish outside the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    State,
    Harmonic,
    Auxiliary,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::State => "state",
            Role::Harmonic => "harmonic",
            Role::Auxiliary => "auxiliary",
        }
    }

    pub fn parse(s: &str) -> Result<Role> {
        match s {
            "state" => Ok(Role::State),
            "harmonic" => Ok(Role::Harmonic),
            "auxiliary" => Ok(Role::Auxiliary),
            other => Err(Error::BadHeader(format!("unknown role `{other}`"))),
        }
    }
}

/// Uniform grid over `[-1,1]^d` with an odd number of nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
}

/// `build_grid`: rejects even `n` (origin would fall between nodes) and
/// `n < 9` (under-resolved domain).
pub fn build_grid(dim: usize, n: usize) -> Result<Grid> {
    Grid::build(dim, n)
}

impl Grid {
    pub fn build(dim: usize, n: usize) -> Result<Grid> {
        if dim != 2 && dim != 3 {
            return Err(Error::BadDim(dim));
        }
        if n % 2 == 0 || n < 9 {
            return Err(Error::BadGridSize(n));
        }
        Ok(Grid { dim, n, h: 2.0 / (n - 1) as f64 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Total number of nodes, `n^dim`.
    pub fn node_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Lattice index of the origin along one axis.
    #[inline]
    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Flat index of the origin node.
    pub fn origin(&self) -> usize {
        let c = self.center();
        self.index([c, c, c])
    }

    /// Row-major flat index, last axis fastest. The third entry of `m` is
    /// ignored in 2D.
    #[inline]
    pub fn index(&self, m: [usize; 3]) -> usize {
        if self.dim == 2 {
            m[0] * self.n + m[1]
        } else {
            (m[0] * self.n + m[1]) * self.n + m[2]
        }
    }

    /// Inverse of [`Grid::index`]; unused axes are 0.
    #[inline]
    pub fn multi(&self, idx: usize) -> [usize; 3] {
        if self.dim == 2 {
            [idx / self.n, idx % self.n, 0]
        } else {
            let i2 = idx % self.n;
            let r = idx / self.n;
            [r / self.n, r % self.n, i2]
        }
    }

    /// Node coordinates; unused axes are 0.
    #[inline]
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = -1.0 + m[a] as f64 * self.h;
        }
        x
    }

    /// Squared lattice distance (units of `h^2`) between two nodes.
    #[inline]
    pub fn lat2(&self, a: usize, b: usize) -> u64 {
        let ma = self.multi(a);
        let mb = self.multi(b);
        let mut s = 0u64;
        for k in 0..self.dim {
            let d = ma[k] as i64 - mb[k] as i64;
            s += (d * d) as u64;
        }
        s
    }

    /// Squared lattice distance from the origin node.
    #[inline]
    pub fn norm2_units(&self, idx: usize) -> u64 {
        let m = self.multi(idx);
        let c = self.center() as i64;
        let mut s = 0u64;
        for a in 0..self.dim {
            let d = m[a] as i64 - c;
            s += (d * d) as u64;
        }
        s
    }

    /// Euclidean norm of a node's position.
    #[inline]
    pub fn norm(&self, idx: usize) -> f64 {
        self.h * (self.norm2_units(idx) as f64).sqrt()
    }

    /// Strict membership in the open unit ball. Exact: `|x| < 1` iff the
    /// squared lattice distance from the origin is below `center^2`.
    #[inline]
    pub fn in_unit_ball(&self, idx: usize) -> bool {
        let c = self.center() as u64;
        self.norm2_units(idx) < c * c
    }

    /// Face neighbors of a node (4 in 2D, 6 in 3D), in axis order.
    pub fn neighbors(&self, idx: usize, out: &mut Vec<usize>) {
        out.clear();
        let m = self.multi(idx);
        for a in 0..self.dim {
            if m[a] > 0 {
                let mut mm = m;
                mm[a] -= 1;
                out.push(self.index(mm));
            }
            if m[a] + 1 < self.n {
                let mut mm = m;
                mm[a] += 1;
                out.push(self.index(mm));
            }
        }
    }

    /// Visits every node of the closed ball `|y - center| <= r`, passing the
    /// flat index and the squared lattice distance to the center.
    pub fn for_each_ball_node(&self, center: usize, r: f64, mut f: impl FnMut(usize, u64)) {
        let cm = self.multi(center);
        let reach = (r / self.h).floor() as i64 + 1;
        let r2 = (r / self.h) * (r / self.h);
        let lo = |c: usize| (c as i64 - reach).max(0) as usize;
        let hi = |c: usize| ((c as i64 + reach) as usize).min(self.n - 1);
        let zr = if self.dim == 3 { lo(cm[2])..=hi(cm[2]) } else { 0..=0 };
        for i0 in lo(cm[0])..=hi(cm[0]) {
            let d0 = i0 as i64 - cm[0] as i64;
            for i1 in lo(cm[1])..=hi(cm[1]) {
                let d1 = i1 as i64 - cm[1] as i64;
                for i2 in zr.clone() {
                    let d2 = i2 as i64 - cm[2] as i64;
                    let k = (d0 * d0 + d1 * d1 + d2 * d2) as u64;
                    if (k as f64) <= r2 {
                        f(self.index([i0, i1, i2]), k);
                    }
                }
            }
        }
    }

    /// Nodes of the discrete sphere `{y : r - h < |y - center| <= r}`,
    /// in flat-index order. Nonempty for every `r >= h` (the axis-aligned
    /// node at distance `floor(r/h)*h` always qualifies).
    pub fn discrete_sphere(&self, center: usize, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let r_units = r / self.h;
        let lo2 = (r_units - 1.0) * (r_units - 1.0);
        let hi2 = r_units * r_units;
        self.for_each_ball_node(center, r, |idx, k| {
            let kf = k as f64;
            if kf <= hi2 && (r_units <= 1.0 || kf > lo2) {
                out.push(idx);
            }
        });
        out.sort_unstable();
        out
    }
}

/// Scalar field on a grid. Values are stored for every node of the cube;
/// the role tag records what the field is used for.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    role: Role,
}

impl ScalarField {
    /// Validates finiteness everywhere, and for `State` fields nonnegativity
    /// plus vanishing at every node with `|x| >= 1`.
    pub fn new(grid: Grid, values: Vec<f64>, role: Role) -> Result<ScalarField> {
        if values.len() != grid.node_count() {
            return Err(Error::SizeMismatch { expected: grid.node_count(), got: values.len() });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
        }
        if role == Role::State {
            for (i, &v) in values.iter().enumerate() {
                if v < 0.0 {
                    return Err(Error::NegativeState(i));
                }
                if v != 0.0 && !grid.in_unit_ball(i) {
                    return Err(Error::StateOutsideBall(i));
                }
            }
        }
        Ok(ScalarField { grid, values, role })
    }

    /// Builds a field from a function of node coordinates. For `State`
    /// fields the value is forced to 0 outside the unit ball.
    pub fn from_fn(grid: Grid, role: Role, f: impl Fn(&[f64; 3]) -> f64) -> Result<ScalarField> {
        let mut values = vec![0.0; grid.node_count()];
        for (i, v) in values.iter_mut().enumerate() {
            let keep = role != Role::State || grid.in_unit_ball(i);
            if keep {
                *v = f(&grid.coords(i));
            }
        }
        ScalarField::new(grid, values, role)
    }

    pub fn constant(grid: Grid, role: Role, c: f64) -> Result<ScalarField> {
        ScalarField::new(grid, vec![c; grid.node_count()], role)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn role(&self) -> Role {
        self.role
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn require_role(&self, role: Role) -> Result<()> {
        if self.role != role {
            return Err(Error::RoleMismatch { expected: role.as_str(), got: self.role.as_str() });
        }
        Ok(())
    }

    /// Same values under a different role tag; re-validated.
    pub fn with_role(&self, role: Role) -> Result<ScalarField> {
        ScalarField::new(self.grid, self.values.clone(), role)
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>, role: Role) -> ScalarField {
        ScalarField { grid, values, role }
    }
}

/// Vector-valued field; all components share one grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Grid,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<VectorField> {
        let grid = components
            .first()
            .map(|c| *c.grid())
            .ok_or_else(|| Error::pre("vector field needs at least one component"))?;
        if components.iter().any(|c| *c.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { grid, components })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn component(&self, j: usize) -> &ScalarField {
        &self.components[j]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// Pointwise Euclidean modulus `|U|`. Exactly zero where all components
    /// vanish.
    pub fn modulus(&self) -> Result<ScalarField> {
        let mut values = vec![0.0; self.grid.node_count()];
        for (i, v) in values.iter_mut().enumerate() {
            let s: f64 = self.components.iter().map(|c| c.get(i) * c.get(i)).sum();
            *v = s.sqrt();
        }
        ScalarField::new(self.grid, values, Role::Auxiliary)
    }

    /// The modulus restricted to the open unit ball, as a state field: the
    /// domain-defining function of a vector solution.
    pub fn modulus_state(&self) -> Result<ScalarField> {
        let mut values = vec![0.0; self.grid.node_count()];
        for (i, v) in values.iter_mut().enumerate() {
            if self.grid.in_unit_ball(i) {
                let s: f64 = self.components.iter().map(|c| c.get(i) * c.get(i)).sum();
                *v = s.sqrt();
            }
        }
        ScalarField::new(self.grid, values, Role::State)
    }
}

/// The open set `{phi > 0}` inside the unit ball, as a per-node boolean
/// field plus the derived boundary node set: outside nodes in the unit ball
/// with at least one inside face neighbor.
#[derive(Debug, Clone)]
pub struct DomainMask {
    grid: Grid,
    inside: Vec<bool>,
    boundary_nodes: Vec<usize>,
}

/// `mask_from_state`: `inside(x) <=> phi(x) > 0 and |x| < 1`.
pub fn mask_from_state(phi: &ScalarField) -> Result<DomainMask> {
    phi.require_role(Role::State)?;
    let grid = *phi.grid();
    let inside: Vec<bool> =
        (0..grid.node_count()).map(|i| phi.get(i) > 0.0 && grid.in_unit_ball(i)).collect();
    DomainMask::from_inside(grid, inside)
}

impl DomainMask {
    pub fn from_inside(grid: Grid, inside: Vec<bool>) -> Result<DomainMask> {
        if inside.len() != grid.node_count() {
            return Err(Error::SizeMismatch { expected: grid.node_count(), got: inside.len() });
        }
        if inside.iter().enumerate().any(|(i, &b)| b && !grid.in_unit_ball(i)) {
            return Err(Error::pre("mask marks a node outside the unit ball as inside"));
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::EmptyDomain);
        }
        let mut boundary_nodes = Vec::new();
        let mut nbrs = Vec::with_capacity(6);
        for i in 0..grid.node_count() {
            if inside[i] || !grid.in_unit_ball(i) {
                continue;
            }
            grid.neighbors(i, &mut nbrs);
            if nbrs.iter().any(|&j| inside[j]) {
                boundary_nodes.push(i);
            }
        }
        Ok(DomainMask { grid, inside, boundary_nodes })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    pub fn inside_slice(&self) -> &[bool] {
        &self.inside
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Mask as a 0/1 auxiliary field (the FLD1 representation of masks).
    pub fn to_field(&self) -> ScalarField {
        let values = self.inside.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        ScalarField::from_parts_unchecked(self.grid, values, Role::Auxiliary)
    }

    /// Rebuilds a mask from a 0/1 field.
    pub fn from_field(field: &ScalarField) -> Result<DomainMask> {
        let grid = *field.grid();
        let inside =
            (0..grid.node_count()).map(|i| field.get(i) > 0.5 && grid.in_unit_ball(i)).collect();
        DomainMask::from_inside(grid, inside)
    }
}

/// Face-adjacency connected components of `{pred}`. Returns per-node labels
/// (0 = background, components numbered from 1 in first-seen index order)
/// and the number of components.
pub fn label_components(grid: &Grid, pred: impl Fn(usize) -> bool) -> (Vec<u32>, usize) {
    let nn = grid.node_count();
    let mut labels = vec![0u32; nn];
    let mut count = 0u32;
    let mut queue = std::collections::VecDeque::new();
    let mut nbrs = Vec::with_capacity(6);
    for start in 0..nn {
        if labels[start] != 0 || !pred(start) {
            continue;
        }
        count += 1;
        labels[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            grid.neighbors(i, &mut nbrs);
            for &j in &nbrs {
                if labels[j] == 0 && pred(j) {
                    labels[j] = count;
                    queue.push_back(j);
                }
            }
        }
    }
    (labels, count as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_grid_arithmetic() {
        let g = build_grid(2, 9).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.node_count(), 81);
        let g = build_grid(2, 257).unwrap();
        assert_eq!(g.h(), 1.0 / 128.0);
        let g = build_grid(3, 65).unwrap();
        assert_eq!(g.h(), 1.0 / 32.0);
        assert_eq!(g.node_count(), 65 * 65 * 65);
    }

    #[test]
    fn build_grid_rejects_bad_sizes() {
        assert!(matches!(build_grid(2, 8), Err(Error::BadGridSize(8))));
        assert!(matches!(build_grid(2, 7), Err(Error::BadGridSize(7))));
        assert!(matches!(build_grid(4, 9), Err(Error::BadDim(4))));
    }

    #[test]
    fn origin_is_a_node() {
        for (dim, n) in [(2, 9), (2, 33), (3, 9)] {
            let g = build_grid(dim, n).unwrap();
            let x = g.coords(g.origin());
            assert_eq!(x, [0.0; 3]);
        }
    }

    #[test]
    fn index_multi_roundtrip() {
        for (dim, n) in [(2usize, 11usize), (3, 9)] {
            let g = build_grid(dim, n).unwrap();
            for idx in 0..g.node_count() {
                assert_eq!(g.index(g.multi(idx)), idx);
            }
        }
    }

    #[test]
    fn mask_halfspace_is_upper_half_ball() {
        let g = build_grid(2, 17).unwrap();
        let phi = ScalarField::from_fn(g, Role::State, |x| x[1].max(0.0)).unwrap();
        let mask = mask_from_state(&phi).unwrap();
        for i in 0..g.node_count() {
            let x = g.coords(i);
            assert_eq!(mask.inside(i), x[1] > 0.0 && g.in_unit_ball(i), "node {i:?} {x:?}");
        }
        // boundary nodes: the x_d = 0 row strictly inside the ball
        for &b in mask.boundary_nodes() {
            let x = g.coords(b);
            assert_eq!(x[1], 0.0);
            assert!(g.in_unit_ball(b));
        }
        assert!(!mask.boundary_nodes().is_empty());
    }

    #[test]
    fn mask_rejects_empty_domain() {
        let g = build_grid(2, 9).unwrap();
        let phi = ScalarField::constant(g, Role::State, 0.0).unwrap();
        assert!(matches!(mask_from_state(&phi), Err(Error::EmptyDomain)));
    }

    #[test]
    fn remasking_is_idempotent() {
        let g = build_grid(2, 21).unwrap();
        let phi = ScalarField::from_fn(g, Role::State, |x| (x[0] * x[0] - 0.1).max(0.0)).unwrap();
        let m1 = mask_from_state(&phi).unwrap();
        // zero the field outside the mask, remask: nothing changes
        let vals: Vec<f64> = (0..g.node_count())
            .map(|i| if m1.inside(i) { phi.get(i) } else { 0.0 })
            .collect();
        let phi2 = ScalarField::new(g, vals, Role::State).unwrap();
        let m2 = mask_from_state(&phi2).unwrap();
        assert_eq!(m1.inside_slice(), m2.inside_slice());
        assert_eq!(m1.boundary_nodes(), m2.boundary_nodes());
    }

    #[test]
    fn state_invariants_enforced() {
        let g = build_grid(2, 9).unwrap();
        let mut vals = vec![0.0; g.node_count()];
        vals[0] = 1.0; // corner node, |x| >= 1
        assert!(matches!(
            ScalarField::new(g, vals, Role::State),
            Err(Error::StateOutsideBall(0))
        ));
        let mut vals = vec![0.0; g.node_count()];
        vals[g.origin()] = -1.0;
        assert!(matches!(ScalarField::new(g, vals, Role::State), Err(Error::NegativeState(_))));
    }

    #[test]
    fn discrete_sphere_nonempty_and_in_annulus() {
        let g = build_grid(2, 33).unwrap();
        for ru in [2.0, 3.5, 7.0, 12.3] {
            let r = ru * g.h();
            let sph = g.discrete_sphere(g.origin(), r);
            assert!(!sph.is_empty(), "empty sphere at r = {ru}h");
            for &i in &sph {
                let d = g.norm(i);
                assert!(d <= r + 1e-12 && d > r - g.h() - 1e-12);
            }
        }
    }

    #[test]
    fn label_components_two_blobs() {
        let g = build_grid(2, 33).unwrap();
        let pred = |i: usize| {
            let x = g.coords(i);
            let l = (x[0] + 0.5) * (x[0] + 0.5) + x[1] * x[1];
            let r = (x[0] - 0.5) * (x[0] - 0.5) + x[1] * x[1];
            l < 0.04 || r < 0.04
        };
        let (labels, count) = label_components(&g, pred);
        assert_eq!(count, 2);
        let li = labels[g.index([g.center() - 8, g.center(), 0])];
        let ri = labels[g.index([g.center() + 8, g.center(), 0])];
        assert_ne!(li, 0);
        assert_ne!(ri, 0);
        assert_ne!(li, ri);
    }
}
