use harnacklab::builtin;
use harnacklab::freeboundary::*;
use harnacklab::grid::{build_grid, Role, ScalarField, VectorField};

fn main() {
    let g = build_grid(2, 65).unwrap();
    let data = VectorField::new(vec![builtin::data_by_name("linear", g).unwrap()]).unwrap();
    let sol = minimize(&FbProblem::new(1.0, data, FbSettings::default()).unwrap()).unwrap();
    println!("converged {} history {:?}", sol.converged, &sol.energy_history[sol.energy_history.len().saturating_sub(4)..]);
    // where does the support differ from {x2 >= h}?
    let c = g.center();
    for i in 0..g.node_count() {
        let m = g.multi(i);
        let inside_planar = m[1] > c && g.in_unit_ball(i);
        let inside_sol = sol.phi.get(i) > 0.0;
        if inside_planar != inside_sol {
            let x = g.coords(i);
            println!("mismatch {:?} coords ({:.4},{:.4}): planar {} sol {} val {:.5}", &m[..2], x[0], x[1], inside_planar, inside_sol, sol.phi.get(i));
        }
    }
    // steep profile competitors
    let steep = ScalarField::from_fn(g, Role::State, |x| 10.0 * x[1].max(0.0)).unwrap();
    let rep = sub_super_check(&steep, 1.0, 1.0, 40, 11, 1e-8).unwrap();
    println!("steep pass={} violations:", rep.pass);
    for v in rep.violations.iter().take(6) {
        println!("  {} {} param {:.4}: {:.6} -> {:.6}", v.family, v.direction, v.param, v.energy_u, v.energy_v);
    }
    // manual truncation check
    let max_u = 10.0 * (1.0 - g.h());
    for q in [0.02, 0.05, 0.1, 0.2] {
        let s = q * max_u;
        let cutoff = |i: usize| -> f64 { ((0.9 - g.norm(i)) / 0.2).clamp(0.0, 1.0) };
        let vals: Vec<f64> = (0..g.node_count()).map(|i| (steep.get(i) - s * cutoff(i)).max(0.0)).collect();
        let v = ScalarField::new(g, vals, Role::Auxiliary).unwrap();
        println!("trunc s={s:.3}: F(u)={:.5} F(v)={:.5}", discrete_energy_scalar(&steep.with_role(Role::Auxiliary).unwrap(), 1.0), discrete_energy_scalar(&v, 1.0));
    }
}
