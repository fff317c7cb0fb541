use lagreul::field::FieldKind;
use lagreul::grid::Grid;
use lagreul::manifest::*;
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

    let t0 = Instant::now();
    let sampler = BallSampler::new(&u0, &sigma0, &params, &config, &engine, 20.0, DataRegion::of_box(l)).unwrap();
    println!("sampler new (base+norm): {:?}", t0.elapsed());

    let t0 = Instant::now();
    let s1 = sampler.sample(7, 0.8).unwrap();
    println!("sample: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let s2 = sampler.sample(8, 0.6).unwrap();
    println!("sample2: {:?}", t0.elapsed());

    let t0 = Instant::now();
    let i1 = fixed_point_map(&s1, &u0, &sigma0, &params, &config).unwrap();
    println!("fixed_point_map: {:?}", t0.elapsed());

    let t0 = Instant::now();
    let d = p1_distance(&s2, &s1, &engine).unwrap();
    println!("p1_distance: {:?} ({})", t0.elapsed(), d.total);

    let t0 = Instant::now();
    let n = i1.p1_norm(&engine).unwrap();
    println!("p1_norm: {:?} ({n})", t0.elapsed());

    // norm engine component costs
    let f = s1.vel.sample(8).clone();
    let t0 = Instant::now();
    for _ in 0..10 { let _ = engine.c1_norms(&f).unwrap(); }
    println!("c1_norms x10 (vector): {:?}", t0.elapsed());
    let g = lagreul::spectral::gradient(&f).unwrap();
    let t0 = Instant::now();
    for _ in 0..10 { let _ = engine.holder_seminorm(&g); }
    println!("holder seminorm x10 (tensor): {:?}", t0.elapsed());
    let t0 = Instant::now();
    for _ in 0..10 { let _ = lagreul::spectral::gradient(&f).unwrap(); }
    println!("gradient x10: {:?}", t0.elapsed());
    let ten = Field_tensor(grid);
    let t0 = Instant::now();
    for _ in 0..10 { let _ = engine.lp(&ten); }
    println!("lp x10 (tensor): {:?}", t0.elapsed());
}

fn Field_tensor(grid: Grid) -> lagreul::Field {
    lagreul::Field::from_fn(grid, FieldKind::Tensor { symmetric: false }, |c, x| (x[0] + c as f64).sin())
}
