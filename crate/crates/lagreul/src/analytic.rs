//! Analytic field families used by experiments and tests.
//!
//! Everything here is parameterized in physical units and decays inside the
//! box (Gaussian bumps periodized over one image ring), so the same family
//! evaluated on a doubled box is the same function; enlarging the box leaves
//! the measured norms essentially unchanged.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldKind};
use crate::grid::Grid;
use crate::path::{PathField, TimeGrid};
use crate::spectral::{dft_forward, dft_inverse, derivative_in_place};

/// One periodized Gaussian bump `amp * exp(-|x - center|^2 / (2 width^2))`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 3],
    pub width: f64,
    pub amp: f64,
}

impl Bump {
    /// Periodized evaluation: sum over one ring of box images of side `l`.
    pub fn value(&self, d: usize, l: f64, x: [f64; 3]) -> f64 {
        let inv2w2 = 1.0 / (2.0 * self.width * self.width);
        let mut total = 0.0;
        let images: &[f64] = &[-l, 0.0, l];
        match d {
            2 => {
                for &ix in images {
                    let dx = x[0] - self.center[0] + ix;
                    for &iy in images {
                        let dy = x[1] - self.center[1] + iy;
                        total += (-(dx * dx + dy * dy) * inv2w2).exp();
                    }
                }
            }
            _ => {
                for &ix in images {
                    let dx = x[0] - self.center[0] + ix;
                    for &iy in images {
                        let dy = x[1] - self.center[1] + iy;
                        for &iz in images {
                            let dz = x[2] - self.center[2] + iz;
                            total += (-(dx * dx + dy * dy + dz * dz) * inv2w2).exp();
                        }
                    }
                }
            }
        }
        self.amp * total
    }
}

pub fn bumps_value(d: usize, l: f64, bumps: &[Bump], x: [f64; 3]) -> f64 {
    bumps.iter().map(|b| b.value(d, l, x)).sum()
}

/// Per-axis factor table of a periodized bump: the image-summed Gaussian is
/// a product of per-axis image sums, so sampling costs one table lookup per
/// axis instead of an exponential per node.
fn bump_axis_table(b: &Bump, grid: Grid, axis: usize) -> Vec<f64> {
    let n = grid.n();
    let h = grid.h();
    let l = grid.l();
    let inv2w2 = 1.0 / (2.0 * b.width * b.width);
    (0..n)
        .map(|i| {
            let x = i as f64 * h;
            let mut s = 0.0;
            for img in [-l, 0.0, l] {
                let dx = x - b.center[axis] + img;
                s += (-dx * dx * inv2w2).exp();
            }
            s
        })
        .collect()
}

/// Adds `weight_j * bump_j` to one component buffer via separable tables.
fn add_bumps_weighted(grid: Grid, items: &[(&Bump, f64)], out: &mut [f64]) {
    let n = grid.n();
    let d = grid.d();
    for (b, w) in items {
        let amp = b.amp * w;
        if amp == 0.0 {
            continue;
        }
        let t0 = bump_axis_table(b, grid, 0);
        let t1 = bump_axis_table(b, grid, 1);
        match d {
            2 => {
                for i0 in 0..n {
                    let c0 = amp * t0[i0];
                    let row = &mut out[i0 * n..(i0 + 1) * n];
                    for (i1, v) in row.iter_mut().enumerate() {
                        *v += c0 * t1[i1];
                    }
                }
            }
            _ => {
                let t2 = bump_axis_table(b, grid, 2);
                for i0 in 0..n {
                    for i1 in 0..n {
                        let c01 = amp * t0[i0] * t1[i1];
                        let base = (i0 * n + i1) * n;
                        let row = &mut out[base..base + n];
                        for (i2, v) in row.iter_mut().enumerate() {
                            *v += c01 * t2[i2];
                        }
                    }
                }
            }
        }
    }
}

/// Scalar field from a bump set.
pub fn scalar_bumps(grid: Grid, bumps: &[Bump]) -> Field {
    let mut f = Field::scalar(grid);
    let items: Vec<(&Bump, f64)> = bumps.iter().map(|b| (b, 1.0)).collect();
    add_bumps_weighted(grid, &items, f.comp_mut(0));
    f
}

/// Divergence-free velocity from scalar potentials, built spectrally so the
/// discrete divergence vanishes to roundoff.
///
/// In 2D one potential is used (`u = grad-perp psi`); in 3D three
/// (`u = curl A`).
pub fn stream_velocity(grid: Grid, potentials: &[Vec<Bump>]) -> Result<Field> {
    let d = grid.d();
    if (d == 2 && potentials.is_empty()) || (d == 3 && potentials.len() < 3) {
        return Err(Error::Config(format!(
            "stream_velocity needs {} potentials for d={d}",
            if d == 2 { 1 } else { 3 }
        )));
    }
    let mut out = Field::vector(grid);
    if d == 2 {
        let psi = scalar_bumps(grid, &potentials[0]);
        let spec = dft_forward(&psi)?;
        let mut d0 = spec.clone();
        derivative_in_place(&mut d0, 0);
        let mut d1 = spec;
        derivative_in_place(&mut d1, 1);
        let u0 = dft_inverse(&d1);
        let u1 = dft_inverse(&d0);
        out.comp_mut(0).copy_from_slice(u0.comp(0));
        for (o, v) in out.comp_mut(1).iter_mut().zip(u1.comp(0)) {
            *o = -v;
        }
    } else {
        // u = curl A: u_i = eps_{ijk} d_j A_k.
        let mut da = vec![Vec::new(); 3]; // da[k][j] = d_j A_k component fields
        for k in 0..3 {
            let a = scalar_bumps(grid, &potentials[k]);
            let spec = dft_forward(&a)?;
            for j in 0..3 {
                let mut dj = spec.clone();
                derivative_in_place(&mut dj, j);
                da[k].push(dft_inverse(&dj));
            }
        }
        let curl = |j: usize, k: usize, sign: f64, out: &mut [f64]| {
            let term = da[k][j].comp(0);
            for (o, v) in out.iter_mut().zip(term) {
                *o += sign * v;
            }
        };
        // u_0 = d1 A2 - d2 A1, etc.
        curl(1, 2, 1.0, out.comp_mut(0));
        curl(2, 1, -1.0, out.comp_mut(0));
        curl(2, 0, 1.0, out.comp_mut(1));
        curl(0, 2, -1.0, out.comp_mut(1));
        curl(0, 1, 1.0, out.comp_mut(2));
        curl(1, 0, -1.0, out.comp_mut(2));
    }
    Ok(out)
}

/// Vector field with an independent bump set per component.
pub fn vector_bumps(grid: Grid, comps: &[Vec<Bump>]) -> Result<Field> {
    if comps.len() != grid.d() {
        return Err(Error::Config("vector_bumps needs d component sets".into()));
    }
    let mut f = Field::vector(grid);
    for (c, set) in comps.iter().enumerate() {
        let items: Vec<(&Bump, f64)> = set.iter().map(|b| (b, 1.0)).collect();
        add_bumps_weighted(grid, &items, f.comp_mut(c));
    }
    Ok(f)
}

/// Symmetric tensor from independent bump sets for the upper triangle
/// (order: (0,0), (1,1), [(2,2)], (0,1), [(0,2), (1,2)]).
pub fn symmetric_tensor_bumps(grid: Grid, comps: &[Vec<Bump>]) -> Result<Field> {
    let d = grid.d();
    let need = d * (d + 1) / 2;
    if comps.len() != need {
        return Err(Error::Config(format!(
            "symmetric tensor needs {need} component sets for d={d}"
        )));
    }
    let upper_index = |i: usize, j: usize| -> usize {
        // diag first, then off-diagonals in row order
        if i == j {
            i
        } else {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            match (d, a, b) {
                (2, 0, 1) => 2,
                (3, 0, 1) => 3,
                (3, 0, 2) => 4,
                _ => 5, // (3,1,2)
            }
        }
    };
    let mut f = Field::tensor(grid, true);
    for c in 0..d * d {
        let set = &comps[upper_index(c / d, c % d)];
        let items: Vec<(&Bump, f64)> = set.iter().map(|b| (b, 1.0)).collect();
        add_bumps_weighted(grid, &items, f.comp_mut(c));
    }
    Ok(f)
}

/// Alpha-cone capped at `radius`: `min(|x - center|_torus, radius)^alpha`.
pub fn cone(grid: Grid, center: [f64; 3], radius: f64, alpha: f64) -> Field {
    Field::scalar_from_fn(grid, |x| grid.distance(x, center).min(radius).powf(alpha))
}

/// Deterministic bump set: `count` bumps inside `center +- region_half`,
/// widths in `width_range`, amplitudes in `[-amp, amp]` (never tiny).
pub fn random_bump_set(
    seed: u64,
    d: usize,
    count: usize,
    center: [f64; 3],
    region_half: f64,
    width_range: (f64, f64),
    amp: f64,
) -> Vec<Bump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut c = [0.0; 3];
            for (ca, base) in c.iter_mut().zip(center.iter()).take(d) {
                *ca = base + rng.gen_range(-region_half..region_half);
            }
            let width = rng.gen_range(width_range.0..width_range.1);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let magnitude = rng.gen_range(0.4..1.0) * amp;
            Bump {
                center: c,
                width,
                amp: sign * magnitude,
            }
        })
        .collect()
}

/// Smooth time modulation `0.6 + 0.4 sin(2 pi f t + phase)` with seed-drawn
/// frequency and phase; the timescale is absolute (box independent).
#[derive(Clone, Copy, Debug)]
pub struct Modulation {
    pub freq: f64,
    pub phase: f64,
}

impl Modulation {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        Modulation {
            freq: rng.gen_range(0.4..1.6),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        0.6 + 0.4 * (std::f64::consts::TAU * self.freq * t + self.phase).sin()
    }

    /// Modulation vanishing at `t = 0` with unit slope there.
    pub fn ramp_at(&self, t: f64) -> f64 {
        t * (1.0 + 0.5 * (std::f64::consts::TAU * self.freq * t + self.phase).sin().powi(2))
    }
}

/// Time-modulated bump path: each bump's amplitude follows its own smooth
/// modulation. `ramp = true` pins the path to zero at `t = 0`.
pub fn modulated_bump_path(
    grid: Grid,
    times: TimeGrid,
    kind: FieldKind,
    comp_bumps: &[Vec<Bump>],
    seed: u64,
    ramp: bool,
) -> Result<PathField> {
    let ncomp = kind.ncomp(grid.d());
    if comp_bumps.len() != ncomp && !(matches!(kind, FieldKind::Tensor { symmetric: true })) {
        return Err(Error::Config("modulated path: component sets mismatch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_6475);
    let mods: Vec<Vec<Modulation>> = comp_bumps
        .iter()
        .map(|set| set.iter().map(|_| Modulation::draw(&mut rng)).collect())
        .collect();
    let d = grid.d();
    let sym_upper = |i: usize, j: usize| -> usize {
        if i == j {
            i
        } else {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            match (d, a, b) {
                (2, 0, 1) => 2,
                (3, 0, 1) => 3,
                (3, 0, 2) => 4,
                _ => 5,
            }
        }
    };
    PathField::from_fn(times, |_, t| {
        let mut f = Field::zeros(grid, kind);
        for c in 0..ncomp {
            let set = if matches!(kind, FieldKind::Tensor { symmetric: true }) {
                sym_upper(c / d, c % d)
            } else {
                c
            };
            let items: Vec<(&Bump, f64)> = comp_bumps[set]
                .iter()
                .zip(&mods[set])
                .map(|(b, m)| (b, if ramp { m.ramp_at(t) } else { m.at(t) }))
                .collect();
            add_bumps_weighted(grid, &items, f.comp_mut(c));
        }
        f
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::divergence;
    use std::f64::consts::PI;

    #[test]
    fn stream_velocity_is_divergence_free() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let bumps = random_bump_set(3, 2, 4, [PI, PI, 0.0], g.l() / 5.0, (0.7, 1.0), 1.0);
        let u = stream_velocity(g, &[bumps]).unwrap();
        let div = divergence(&u).unwrap();
        assert!(div.max_abs() < 1e-12 * u.max_abs().max(1.0) * g.n() as f64);
    }

    #[test]
    fn stream_velocity_3d_divergence_free() {
        let g = Grid::new(3, 16, 2.0 * PI).unwrap();
        let pots: Vec<Vec<Bump>> = (0..3)
            .map(|k| random_bump_set(10 + k, 3, 2, [PI, PI, PI], g.l() / 6.0, (0.8, 1.2), 0.5))
            .collect();
        let u = stream_velocity(g, &pots).unwrap();
        let div = divergence(&u).unwrap();
        assert!(div.max_abs() < 1e-11 * u.max_abs().max(1.0) * g.n() as f64);
    }

    #[test]
    fn tensor_bumps_are_symmetric() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let comps: Vec<Vec<Bump>> = (0..3)
            .map(|k| random_bump_set(20 + k, 2, 3, [PI, PI, 0.0], g.l() / 5.0, (0.7, 1.0), 1.0))
            .collect();
        let t = symmetric_tensor_bumps(g, &comps).unwrap();
        assert_eq!(t.symmetry_defect(), 0.0);
    }

    #[test]
    fn bump_periodization_is_smooth_across_the_seam() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let b = Bump {
            center: [0.3, 0.2, 0.0],
            width: 0.8,
            amp: 1.0,
        };
        // Same physical point expressed on either side of the seam.
        let v1 = b.value(2, g.l(), [0.0, 1.0, 0.0]);
        let v2 = b.value(2, g.l(), [g.l(), 1.0, 0.0]);
        assert!((v1 - v2).abs() < 1e-12);
    }

    #[test]
    fn modulated_path_ramp_starts_at_zero() {
        let g = Grid::new(2, 16, 2.0 * PI).unwrap();
        let times = TimeGrid::new(0.5, 4).unwrap();
        let bumps = vec![random_bump_set(7, 2, 2, [PI, PI, 0.0], 1.0, (0.7, 1.0), 1.0); 2];
        let path =
            modulated_bump_path(g, times, FieldKind::Vector, &bumps, 7, true).unwrap();
        assert_eq!(path.sample(0).max_abs(), 0.0);
        assert!(path.sample(2).max_abs() > 0.0);
    }
}
