use harnacklab::grid::{build_grid, mask_from_state, ScalarField};
use harnacklab::harmonic::{solve, DirichletProblem, SolverSettings};
use harnacklab::Role;

fn main() {
    for n in [129usize, 257] {
        let g = build_grid(2, n).unwrap();
        let phi = ScalarField::from_fn(g, Role::State, |x| x[1].max(0.0)).unwrap();
        let mask = mask_from_state(&phi).unwrap();
        let data = ScalarField::from_fn(g, Role::Auxiliary, |x| {
            x[1].max(0.0) * (1.0 + 0.5 * x[0])
        })
        .unwrap();
        let t = std::time::Instant::now();
        let sol = solve(&DirichletProblem::new(mask, data, SolverSettings::default()).unwrap()).unwrap();
        println!("n={n}: {:?}, residual {:.2e}", t.elapsed(), sol.achieved_residual());
    }
    let g = build_grid(3, 65).unwrap();
    let phi = ScalarField::from_fn(g, Role::State, |x| x[2].max(0.0)).unwrap();
    let mask = mask_from_state(&phi).unwrap();
    let data = ScalarField::from_fn(g, Role::Auxiliary, |x| x[2].max(0.0) * (1.0 + 0.3 * x[0])).unwrap();
    let t = std::time::Instant::now();
    let sol = solve(&DirichletProblem::new(mask, data, SolverSettings::default()).unwrap()).unwrap();
    println!("3d n=65: {:?}, residual {:.2e}", t.elapsed(), sol.achieved_residual());
}
