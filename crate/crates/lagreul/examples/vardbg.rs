use lagreul::analytic::*;
use lagreul::commutators::*;
use lagreul::field::FieldKind;
use lagreul::flowmap::*;
use lagreul::grid::Grid;
use lagreul::interp::InterpScheme;
use lagreul::path::*;

fn main() {
    let l = 4.0 * std::f64::consts::PI;
    let grid = Grid::new(2, 48, l).unwrap();
    let times = TimeGrid::new(0.25, 6).unwrap();
    let center = [l / 2.0, l / 2.0, 0.0];
    let region = l / 5.0;
    let seedset = |seed: u64, sets: usize, amp: f64| -> Vec<Vec<Bump>> {
        (0..sets)
            .map(|k| random_bump_set(seed + 1000 * k as u64, 2, 3, center, region, (0.68, 0.92), amp))
            .collect()
    };
    let pots = seedset(373, 1, 0.5);
    let vel = PathField::from_fn(times, |_, t| {
        stream_velocity(grid, &pots).unwrap().scaled(0.8 + 0.4 * (2.0 * t).sin())
    })
    .unwrap();
    let x = FlowMap::from_velocity_path(&vel, InterpScheme::Trig).unwrap();
    println!("grad_sup {:?}", x.grad_sup_all().unwrap());
    let tau = modulated_bump_path(grid, times, FieldKind::Tensor { symmetric: true }, &seedset(379, 3, 0.6), 379, false).unwrap();
    let x_dir = modulated_bump_path(grid, times, FieldKind::Vector, &seedset(389, 2, 0.25), 389, true).unwrap();
    let tau_dir = modulated_bump_path(grid, times, FieldKind::Tensor { symmetric: true }, &seedset(397, 3, 0.4), 397, false).unwrap();
    let v_dir = modulated_bump_path(grid, times, FieldKind::Vector, &seedset(401, 2, 0.25), 401, true).unwrap();

    let eps = [0.2, 0.1, 0.05, 0.025];
    let r1 = variation_identity_stress(&x, &tau, &x_dir, &tau_dir, 1.0, 6, &eps).unwrap();
    println!("stress errors {:?} order {} rhs {}", r1.errors, r1.observed_order, r1.rhs_scale);
    let r2 = variation_identity_velocity(&x, &vel, &x_dir, &v_dir, 1.0, 6, &eps).unwrap();
    println!("vel errors {:?} order {} rhs {}", r2.errors, r2.observed_order, r2.rhs_scale);
}
