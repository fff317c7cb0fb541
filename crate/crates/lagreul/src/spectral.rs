//! Discrete Fourier transforms and spectral calculus on the periodic grid.
//!
//! Coefficients are indexed by integer wavevectors `k` with physical
//! wavenumber `xi = 2 pi k / L`, normalized so that
//! `f(x) = sum_k c_k exp(i xi_k . x)`. Forward and inverse transforms are
//! exact inverse pairs up to roundoff and Parseval holds in the form
//! `mean(|f|^2) = sum_k |c_k|^2`.
//!
//! Odd-order multipliers (derivatives) zero the Nyquist mode, which keeps
//! derivatives of real fields real and antisymmetric.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{Field, FieldKind};
use crate::grid::Grid;
use crate::par;

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, matches!(dir, FftDirection::Forward));
    let mut cache = cache.lock().unwrap();
    cache
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, dir))
        .clone()
}

/// Complex spectral coefficients of a (usually real) field, one block of
/// `n^d` coefficients per component.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    kind: FieldKind,
    data: Vec<Complex64>,
}

/// In-place d-dimensional FFT of one component.
///
/// Each pass transforms the last axis (contiguous lines) and then rotates the
/// axis order, so after `d` passes the layout is restored.
fn fft_nd(grid: Grid, data: &mut Vec<Complex64>, dir: FftDirection) {
    let n = grid.n();
    let d = grid.d();
    let fft = plan(n, dir);
    // Batch whole lines per task; tiny per-line tasks cost more in
    // scheduling than in arithmetic.
    let lines_per_task = (par::CHUNK / n).max(1);
    for _ in 0..d {
        par::for_each_chunk_mut(data, n * lines_per_task, |_, block| {
            for line in block.chunks_mut(n) {
                fft.process(line);
            }
        });
        // Rotate axes: (i0, ..., i_{d-1}) -> (i_{d-1}, i0, ..., i_{d-2}).
        let mut rotated = vec![Complex64::default(); data.len()];
        let npts = data.len();
        let stride = npts / n; // elements per value of the last axis block
        {
            let src: &[Complex64] = data;
            par::for_each_chunk_mut(&mut rotated, stride, |last, block| {
                // block holds all entries with new leading coordinate `last`,
                // i.e. old last-axis index = last.
                for (rest, v) in block.iter_mut().enumerate() {
                    *v = src[rest * n + last];
                }
            });
        }
        *data = rotated;
    }
}

impl SpectralField {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn ncomp(&self) -> usize {
        self.kind.ncomp(self.grid.d())
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        let npts = self.grid.points();
        &self.data[c * npts..(c + 1) * npts]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        let npts = self.grid.points();
        &mut self.data[c * npts..(c + 1) * npts]
    }

    pub fn zeros(grid: Grid, kind: FieldKind) -> Self {
        let ncomp = kind.ncomp(grid.d());
        SpectralField {
            grid,
            kind,
            data: vec![Complex64::default(); ncomp * grid.points()],
        }
    }

    /// Sum of `|c_k|^2` over all modes of all components (Parseval energy).
    pub fn energy(&self) -> f64 {
        par::sum_indexed(self.data.len(), |i| self.data[i].norm_sqr())
    }

    /// Zeroes every coefficient with a Nyquist index on some axis.
    ///
    /// The path operators canonicalize their inputs this way so that even and
    /// odd multiplier routes agree exactly; smooth decaying data carries only
    /// roundoff-level Nyquist content to begin with.
    pub fn zero_nyquist(&mut self) {
        let grid = self.grid;
        let n = grid.n();
        let ny = n / 2;
        let ncomp = self.ncomp();
        let npts = grid.points();
        for c in 0..ncomp {
            let comp = &mut self.data[c * npts..(c + 1) * npts];
            par::for_each_chunk_mut(comp, par::CHUNK, |chunk_idx, chunk| {
                let base = chunk_idx * par::CHUNK;
                for (off, v) in chunk.iter_mut().enumerate() {
                    let coords = grid.coords(base + off);
                    if (0..grid.d()).any(|a| coords[a] == ny) {
                        *v = Complex64::default();
                    }
                }
            });
        }
    }

    /// Applies a diagonal multiplier `m(xi)` to one component in place.
    pub fn apply_multiplier(&mut self, c: usize, m: impl Fn([f64; 3]) -> Complex64 + Sync) {
        let grid = self.grid;
        let comp = self.comp_mut(c);
        par::for_each_chunk_mut(comp, par::CHUNK, |chunk_idx, chunk| {
            let base = chunk_idx * par::CHUNK;
            for (off, v) in chunk.iter_mut().enumerate() {
                let coords = grid.coords(base + off);
                let mut xi = [0.0; 3];
                for a in 0..grid.d() {
                    xi[a] = grid.xi(grid.mode(coords[a]));
                }
                *v *= m(xi);
            }
        });
    }

    /// Builds a new spectral field whose modes are computed from this one by
    /// `f(xi, input_comps, output_comps)`.
    pub fn map_modes(
        &self,
        out_kind: FieldKind,
        f: impl Fn([f64; 3], &[Complex64], &mut [Complex64]) + Sync,
    ) -> SpectralField {
        let grid = self.grid;
        let d = grid.d();
        let npts = grid.points();
        let nin = self.ncomp();
        let nout = out_kind.ncomp(d);
        let input = &self.data;
        let out_data: Vec<Complex64> = {
            let mut out = vec![Complex64::default(); nout * npts];
            // Work in mode-major order: gather the input components of one
            // mode, apply f, scatter the outputs.
            let out_ptr = ThreadSlices::new(&mut out, npts, nout);
            par::map_indexed(npts.div_ceil(par::CHUNK), |chunk_idx| {
                let lo = chunk_idx * par::CHUNK;
                let hi = (lo + par::CHUNK).min(npts);
                let mut in_buf = vec![Complex64::default(); nin];
                let mut out_buf = vec![Complex64::default(); nout];
                for mode in lo..hi {
                    let coords = grid.coords(mode);
                    let mut xi = [0.0; 3];
                    for a in 0..d {
                        xi[a] = grid.xi(grid.mode(coords[a]));
                    }
                    for c in 0..nin {
                        in_buf[c] = input[c * npts + mode];
                    }
                    out_buf.iter_mut().for_each(|v| *v = Complex64::default());
                    f(xi, &in_buf, &mut out_buf);
                    for c in 0..nout {
                        // Safety: each mode index is written exactly once.
                        unsafe { out_ptr.write(c, mode, out_buf[c]) };
                    }
                }
            });
            out
        };
        SpectralField {
            grid,
            kind: out_kind,
            data: out_data,
        }
    }
}

/// Shared-write helper for disjoint mode indices across components.
struct ThreadSlices {
    ptr: *mut Complex64,
    npts: usize,
    #[allow(dead_code)]
    ncomp: usize,
}
unsafe impl Sync for ThreadSlices {}
impl ThreadSlices {
    fn new(data: &mut [Complex64], npts: usize, ncomp: usize) -> Self {
        assert_eq!(data.len(), npts * ncomp);
        ThreadSlices {
            ptr: data.as_mut_ptr(),
            npts,
            ncomp,
        }
    }
    /// Caller must guarantee each (comp, mode) pair is written by one task.
    unsafe fn write(&self, comp: usize, mode: usize, v: Complex64) {
        unsafe { *self.ptr.add(comp * self.npts + mode) = v };
    }
}

/// Forward transform. Rejects non-finite samples.
pub fn dft_forward(f: &Field) -> Result<SpectralField> {
    f.ensure_finite("dft_forward input")?;
    let grid = f.grid();
    let npts = grid.points();
    let scale = 1.0 / npts as f64;
    let ncomp = f.ncomp();
    let bufs: Vec<Vec<Complex64>> = par::map_indexed(ncomp, |c| {
        let src = f.comp(c);
        let mut buf: Vec<Complex64> = src
            .iter()
            .map(|&v| Complex64::new(v * scale, 0.0))
            .collect();
        fft_nd(grid, &mut buf, FftDirection::Forward);
        buf
    });
    let mut data = Vec::with_capacity(ncomp * npts);
    for buf in bufs {
        data.extend_from_slice(&buf);
    }
    Ok(SpectralField {
        grid,
        kind: f.kind(),
        data,
    })
}

/// Inverse transform; takes the real part (imaginary content of Hermitian
/// spectra is roundoff).
pub fn dft_inverse(spec: &SpectralField) -> Field {
    let grid = spec.grid;
    let mut out = Field::zeros(grid, spec.kind);
    let cols: Vec<Vec<f64>> = par::map_indexed(spec.ncomp(), |c| {
        let mut buf: Vec<Complex64> = spec.comp(c).to_vec();
        fft_nd(grid, &mut buf, FftDirection::Inverse);
        buf.into_iter().map(|v| v.re).collect()
    });
    for (c, col) in cols.into_iter().enumerate() {
        out.comp_mut(c).copy_from_slice(&col);
    }
    out
}

/// Spectral partial derivative along `axis`: multiplication by `i xi_axis`,
/// Nyquist mode zeroed.
pub fn spectral_derivative(f: &Field, axis: usize) -> Result<Field> {
    let grid = f.grid();
    if axis >= grid.d() {
        return Err(Error::AxisOutOfRange { axis, d: grid.d() });
    }
    let mut spec = dft_forward(f)?;
    derivative_in_place(&mut spec, axis);
    Ok(dft_inverse(&spec))
}

/// In-place spectral derivative of every component along `axis`.
pub fn derivative_in_place(spec: &mut SpectralField, axis: usize) {
    let grid = spec.grid;
    let ny = grid.n() / 2;
    for c in 0..spec.ncomp() {
        let comp = spec.comp_mut(c);
        par::for_each_chunk_mut(comp, par::CHUNK, |chunk_idx, chunk| {
            let base = chunk_idx * par::CHUNK;
            for (off, v) in chunk.iter_mut().enumerate() {
                let coords = grid.coords(base + off);
                if coords[axis] == ny {
                    *v = Complex64::default();
                } else {
                    let xi = grid.xi(grid.mode(coords[axis]));
                    *v *= Complex64::new(0.0, xi);
                }
            }
        });
    }
}

/// Gradient of a field with `m` components: a field with `d*m` components in
/// gradient-first layout, entry `(a, c) -> a*m + c` holding `d f_c / d x_a`.
pub fn gradient(f: &Field) -> Result<Field> {
    let grid = f.grid();
    let d = grid.d();
    let m = f.ncomp();
    let spec = dft_forward(f)?;
    let kind = match f.kind() {
        FieldKind::Scalar => FieldKind::Vector,
        FieldKind::Vector => FieldKind::Tensor { symmetric: false },
        FieldKind::Tensor { .. } => {
            return Err(Error::Config(
                "gradient of a tensor field is not representable as a Field".into(),
            ))
        }
    };
    let mut out = Field::zeros(grid, kind);
    let npts = grid.points();
    for a in 0..d {
        let mut dspec = spec.clone();
        derivative_in_place(&mut dspec, a);
        let df = dft_inverse(&dspec);
        for c in 0..m {
            out.comp_mut(a * m + c)[..npts].copy_from_slice(df.comp(c));
        }
    }
    Ok(out)
}

/// Divergence of a vector field (or row divergence of a tensor field,
/// contracting the derivative with the first index: `(div T)_j = d_i T_ij`).
pub fn divergence(f: &Field) -> Result<Field> {
    let grid = f.grid();
    let d = grid.d();
    let spec = dft_forward(f)?;
    match f.kind() {
        FieldKind::Vector => {
            let out = spec.map_modes(FieldKind::Scalar, |xi, inp, out| {
                let mut s = Complex64::default();
                for (a, v) in inp.iter().enumerate() {
                    s += Complex64::new(0.0, xi[a]) * v;
                }
                out[0] = s;
            });
            let mut out = out;
            out.zero_nyquist();
            Ok(dft_inverse(&out))
        }
        FieldKind::Tensor { .. } => {
            let out = spec.map_modes(FieldKind::Vector, |xi, inp, out| {
                for j in 0..d {
                    let mut s = Complex64::default();
                    for i in 0..d {
                        s += Complex64::new(0.0, xi[i]) * inp[i * d + j];
                    }
                    out[j] = s;
                }
            });
            let mut out = out;
            out.zero_nyquist();
            Ok(dft_inverse(&out))
        }
        FieldKind::Scalar => Err(Error::Config("divergence of a scalar field".into())),
    }
}

/// Dealiased pointwise product of two fields, combined componentwise by
/// `combine(comps_a, comps_b, out_comps)` on a 3/2 zero-padded grid.
///
/// Both factor spectra have their Nyquist modes zeroed before padding, so the
/// product of band-limited factors is the exact spectral truncation of the
/// true product (no aliasing).
pub fn dealiased_product(
    a: &Field,
    b: &Field,
    out_kind: FieldKind,
    combine: impl Fn(&[f64], &[f64], &mut [f64]) + Sync,
) -> Result<Field> {
    let grid = a.grid();
    if b.grid() != grid {
        return Err(Error::Config("dealiased_product: grid mismatch".into()));
    }
    let n = grid.n();
    let m = pad_size(n);
    let fine = Grid::new(grid.d(), m, grid.l())?;

    let fa = pad_to(a, fine)?;
    let fb = pad_to(b, fine)?;

    let npts = fine.points();
    let nout = out_kind.ncomp(grid.d());
    let mut prod = Field::zeros(fine, out_kind);
    {
        let na = fa.ncomp();
        let nb = fb.ncomp();
        let pa = &fa;
        let pb = &fb;
        let data = prod.data_mut();
        let out_ptr = FieldSlices {
            ptr: data.as_mut_ptr(),
            npts,
        };
        par::map_indexed(npts.div_ceil(par::CHUNK), |chunk_idx| {
            let lo = chunk_idx * par::CHUNK;
            let hi = (lo + par::CHUNK).min(npts);
            let mut abuf = vec![0.0; na];
            let mut bbuf = vec![0.0; nb];
            let mut obuf = vec![0.0; nout];
            for p in lo..hi {
                for c in 0..na {
                    abuf[c] = pa.comp(c)[p];
                }
                for c in 0..nb {
                    bbuf[c] = pb.comp(c)[p];
                }
                obuf.iter_mut().for_each(|v| *v = 0.0);
                combine(&abuf, &bbuf, &mut obuf);
                for c in 0..nout {
                    unsafe { out_ptr.write(c, p, obuf[c]) };
                }
            }
        });
    }
    truncate_to(&prod, grid)
}

struct FieldSlices {
    ptr: *mut f64,
    npts: usize,
}
unsafe impl Sync for FieldSlices {}
impl FieldSlices {
    unsafe fn write(&self, comp: usize, p: usize, v: f64) {
        unsafe { *self.ptr.add(comp * self.npts + p) = v };
    }
}

pub fn pad_size(n: usize) -> usize {
    let m = (3 * n) / 2;
    if m % 2 == 0 {
        m
    } else {
        m + 1
    }
}

/// Spectrally resamples a field onto a grid refined by the given factor
/// (same box, `factor * n` points per axis).
pub fn spectral_refine(f: &Field, factor: usize) -> Result<Field> {
    let grid = f.grid();
    let fine = Grid::new(grid.d(), grid.n() * factor, grid.l())?;
    pad_to(f, fine)
}

/// Resamples a field onto a finer grid of the same box by spectral zero
/// padding (Nyquist modes dropped).
fn pad_to(f: &Field, fine: Grid) -> Result<Field> {
    let spec = dft_forward(f)?;
    let mut out = SpectralField::zeros(fine, f.kind());
    copy_band(&spec, &mut out);
    Ok(dft_inverse(&out))
}

/// Truncates a fine-grid field back to the coarse band (Nyquist zeroed).
fn truncate_to(f: &Field, coarse: Grid) -> Result<Field> {
    let spec = dft_forward(f)?;
    let mut out = SpectralField::zeros(coarse, f.kind());
    copy_band(&spec, &mut out);
    Ok(dft_inverse(&out))
}

/// Copies the common non-Nyquist band between two spectral fields of the
/// same box.
fn copy_band(src: &SpectralField, dst: &mut SpectralField) {
    let gs = src.grid;
    let gd = dst.grid;
    let d = gs.d();
    let kmax = (gs.n().min(gd.n())) as i64 / 2; // exclusive band edge
    let ncomp = src.ncomp();
    for c in 0..ncomp {
        let s = src.comp(c);
        let dstc = dst.comp_mut(c);
        // Iterate over the band of the destination: for every destination
        // mode inside the common band, fetch the matching source mode.
        par::for_each_chunk_mut(dstc, par::CHUNK, |chunk_idx, chunk| {
            let base = chunk_idx * par::CHUNK;
            for (off, v) in chunk.iter_mut().enumerate() {
                let idx = base + off;
                let coords = gd.coords(idx);
                let mut inside = true;
                let mut src_coords = [0usize; 3];
                for a in 0..d {
                    let k = gd.mode(coords[a]);
                    if k.abs() >= kmax {
                        inside = false;
                        break;
                    }
                    let ns = gs.n() as i64;
                    src_coords[a] = k.rem_euclid(ns) as usize;
                }
                if inside {
                    *v = s[gs.index(src_coords)];
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(2, n, 2.0 * PI).unwrap()
    }

    fn random_field(g: Grid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::scalar(g);
        for v in f.comp_mut(0) {
            *v = rng.gen_range(-1.0..1.0);
        }
        f
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = grid(16);
        let spec = dft_forward(&Field::scalar(g)).unwrap();
        assert!(spec.comp(0).iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn cosine_has_two_coefficients() {
        let g = grid(16);
        let l = g.l();
        let f = Field::scalar_from_fn(g, |x| (2.0 * PI * x[0] / l).cos());
        let spec = dft_forward(&f).unwrap();
        for idx in 0..g.points() {
            let c = g.coords(idx);
            let k = [g.mode(c[0]), g.mode(c[1])];
            let v = spec.comp(0)[idx];
            if k == [1, 0] || k == [-1, 0] {
                assert!((v.re - 0.5).abs() < 1e-12 && v.im.abs() < 1e-12, "{v:?}");
            } else {
                assert!(v.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn roundtrip_many_random_fields() {
        let g = grid(16);
        for seed in 0..1000 {
            let f = random_field(g, seed);
            let back = dft_inverse(&dft_forward(&f).unwrap());
            let scale = f.max_abs().max(1e-300);
            let err = par::max_indexed(g.points(), |i| (back.comp(0)[i] - f.comp(0)[i]).abs());
            assert!(err <= 1e-12 * scale, "seed {seed}: err {err}");
        }
    }

    #[test]
    fn parseval() {
        let g = grid(32);
        let f = random_field(g, 7);
        let spec = dft_forward(&f).unwrap();
        let phys = par::sum_indexed(g.points(), |i| f.comp(0)[i] * f.comp(0)[i])
            / g.points() as f64;
        assert!((phys - spec.energy()).abs() < 1e-12 * phys.max(1.0));
    }

    #[test]
    fn derivative_of_single_mode() {
        let g = grid(32);
        let l = g.l();
        let f = Field::scalar_from_fn(g, |x| (2.0 * PI * x[0] / l).sin());
        let df = spectral_derivative(&f, 0).unwrap();
        let expect = Field::scalar_from_fn(g, |x| 2.0 * PI / l * (2.0 * PI * x[0] / l).cos());
        let err = par::max_indexed(g.points(), |i| (df.comp(0)[i] - expect.comp(0)[i]).abs());
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = grid(16);
        let f = Field::scalar_from_fn(g, |_| 3.25);
        let df = spectral_derivative(&f, 0).unwrap();
        assert!(df.max_abs() < 1e-13);
    }

    #[test]
    fn derivative_axis_out_of_range() {
        let g = grid(16);
        let f = Field::scalar(g);
        assert!(matches!(
            spectral_derivative(&f, 2),
            Err(Error::AxisOutOfRange { .. })
        ));
    }

    #[test]
    fn divergence_of_stream_function_field_vanishes() {
        // u = (d psi / d x1, -d psi / d x0) is divergence free.
        let g = grid(32);
        let psi = random_field(g, 3);
        let dpsi0 = spectral_derivative(&psi, 0).unwrap();
        let dpsi1 = spectral_derivative(&psi, 1).unwrap();
        let mut u = Field::vector(g);
        u.comp_mut(0).copy_from_slice(dpsi1.comp(0));
        u.comp_mut(1).copy_from_slice(&dpsi0.comp(0).iter().map(|v| -v).collect::<Vec<_>>());
        let div = divergence(&u).unwrap();
        assert!(div.max_abs() < 1e-12 * psi.max_abs().max(1.0) * g.n() as f64);
    }

    #[test]
    fn derivative_commutes_with_grid_shift() {
        let g = grid(16);
        let f = random_field(g, 11);
        let shift = [3usize, 5usize];
        let shifted = {
            let mut s = Field::scalar(g);
            for idx in 0..g.points() {
                let c = g.coords(idx);
                let sc = [(c[0] + shift[0]) % g.n(), (c[1] + shift[1]) % g.n(), 0];
                s.comp_mut(0)[idx] = f.comp(0)[g.index(sc)];
            }
            s
        };
        let d_shifted = spectral_derivative(&shifted, 0).unwrap();
        let shifted_d = {
            let df = spectral_derivative(&f, 0).unwrap();
            let mut s = Field::scalar(g);
            for idx in 0..g.points() {
                let c = g.coords(idx);
                let sc = [(c[0] + shift[0]) % g.n(), (c[1] + shift[1]) % g.n(), 0];
                s.comp_mut(0)[idx] = df.comp(0)[g.index(sc)];
            }
            s
        };
        let err = d_shifted.sub(&shifted_d).max_abs();
        assert!(err < 1e-12 * f.max_abs().max(1.0) * g.n() as f64, "{err}");
    }

    #[test]
    fn dealiased_product_matches_exact_truncation() {
        // Product of two single modes: cos(k1 x) * cos(k2 x) has exactly the
        // modes k1 +- k2; both fit in band for small k.
        let g = grid(32);
        let l = g.l();
        let a = Field::scalar_from_fn(g, |x| (2.0 * 2.0 * PI * x[0] / l).cos());
        let b = Field::scalar_from_fn(g, |x| (3.0 * 2.0 * PI * x[0] / l).cos());
        let p = dealiased_product(&a, &b, FieldKind::Scalar, |a, b, out| {
            out[0] = a[0] * b[0];
        })
        .unwrap();
        let expect = Field::scalar_from_fn(g, |x| {
            0.5 * ((5.0 * 2.0 * PI * x[0] / l).cos() + (2.0 * PI * x[0] / l).cos())
        });
        assert!(p.sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn nyquist_zeroing() {
        let g = grid(8);
        let mut f = Field::scalar(g);
        // Highest-frequency checkerboard lives on the Nyquist plane.
        for idx in 0..g.points() {
            let c = g.coords(idx);
            f.comp_mut(0)[idx] = if (c[0] + c[1]) % 2 == 0 { 1.0 } else { -1.0 };
        }
        let mut spec = dft_forward(&f).unwrap();
        spec.zero_nyquist();
        assert!(dft_inverse(&spec).max_abs() < 1e-12);
    }
}
