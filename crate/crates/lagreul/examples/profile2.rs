use lagreul::flowmap::*;
use lagreul::grid::Grid;
use lagreul::manifest::*;
use lagreul::operators::*;
use lagreul::solver::*;
use lagreul::spaces::*;
use std::time::Instant;

fn main() {
    let l = 4.0 * std::f64::consts::PI;
    let grid = Grid::new(2, 48, l).unwrap();
    let common = Common::default();
    let engine = NormEngine::new(grid, 0.5, 2.0, 42).unwrap();
    let sec = ContractionSection::default();
    let u0 = sec.solve.u0.pinned(grid).build_velocity(grid).unwrap();
    let sigma0 = sec.solve.sigma0.pinned(grid).build_stress(grid).unwrap();
    let params = sec.solve.model_params(&common).with_horizon(0.5);
    let config = sec.solve.config.to_config();
    let sampler = BallSampler::new(&u0, &sigma0, &params, &config, &engine, 20.0, DataRegion::of_box(l)).unwrap();
    let s1 = sampler.sample(7, 0.8).unwrap();

    // warm
    let _ = fixed_point_map(&s1, &u0, &sigma0, &params, &config).unwrap();

    let t0 = Instant::now();
    let v = nonlinearity_v(&s1, &u0, &params, &config).unwrap();
    println!("nonlinearity_v: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let g = lagrangian_g(&s1, &u0, &params, &config).unwrap();
    println!("lagrangian_g: {:?}", t0.elapsed());
    let t0 = Instant::now();
    for i in 0..s1.tau.samples() {
        let _ = nonlinearity_t(s1.tau.sample(i), g.sample(i), &params, &config).unwrap();
    }
    println!("nonlinearity_t all samples: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let _ = v.integrate_trapezoid();
    println!("trapezoid: {:?}", t0.elapsed());

    // compose costs
    let t0 = Instant::now();
    let inv = s1.flow.compose_path(&s1.tau, ComposeDirection::Inverse).unwrap();
    println!("compose_path inverse (tensor): {:?}", t0.elapsed());
    let t0 = Instant::now();
    let _ = s1.flow.compose_path(&inv, ComposeDirection::Forward).unwrap();
    println!("compose_path forward (tensor): {:?}", t0.elapsed());
    let t0 = Instant::now();
    let _ = duhamel_u_path(&inv, 1.0).unwrap();
    println!("duhamel_u_path: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let _ = duhamel_g_path(&inv, 1.0).unwrap();
    println!("duhamel_g_path: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let _ = heat_path(&u0, 1.0, s1.times()).unwrap();
    println!("heat_path: {:?}", t0.elapsed());
}
