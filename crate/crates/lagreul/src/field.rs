//! Real-valued fields on a periodic grid.
//!
//! A `Field` holds one or more scalar components sampled at every grid node:
//! one component for scalars, `d` for vectors, `d*d` for second-order tensors
//! (gradient/first index outermost). Tensors carry a symmetry flag that is
//! checked, not assumed.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
    /// `symmetric` records that the field is intended to satisfy
    /// `T_ij = T_ji`; see [`Field::symmetry_defect`].
    Tensor {
        symmetric: bool,
    },
}

impl FieldKind {
    pub fn ncomp(&self, d: usize) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Vector => d,
            FieldKind::Tensor { .. } => d * d,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    kind: FieldKind,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid, kind: FieldKind) -> Self {
        let ncomp = kind.ncomp(grid.d());
        Field {
            grid,
            kind,
            data: vec![0.0; ncomp * grid.points()],
        }
    }

    pub fn scalar(grid: Grid) -> Self {
        Self::zeros(grid, FieldKind::Scalar)
    }

    pub fn vector(grid: Grid) -> Self {
        Self::zeros(grid, FieldKind::Vector)
    }

    pub fn tensor(grid: Grid, symmetric: bool) -> Self {
        Self::zeros(grid, FieldKind::Tensor { symmetric })
    }

    /// Samples `f(comp, x)` at every node of every component.
    pub fn from_fn(grid: Grid, kind: FieldKind, f: impl Fn(usize, [f64; 3]) -> f64 + Sync) -> Self {
        let mut out = Self::zeros(grid, kind);
        let npts = grid.points();
        for c in 0..out.ncomp() {
            let comp = &mut out.data[c * npts..(c + 1) * npts];
            par::for_each_chunk_mut(comp, par::CHUNK, |chunk_idx, chunk| {
                let base = chunk_idx * par::CHUNK;
                for (off, v) in chunk.iter_mut().enumerate() {
                    *v = f(c, grid.position(base + off));
                }
            });
        }
        out
    }

    /// Scalar field from a pointwise function.
    pub fn scalar_from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        Self::from_fn(grid, FieldKind::Scalar, |_, x| f(x))
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn ncomp(&self) -> usize {
        self.kind.ncomp(self.grid.d())
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        let npts = self.grid.points();
        &self.data[c * npts..(c + 1) * npts]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let npts = self.grid.points();
        &mut self.data[c * npts..(c + 1) * npts]
    }

    /// Tensor component `(i, j)` with the gradient index `i` first.
    pub fn tensor_comp(&self, i: usize, j: usize) -> &[f64] {
        self.comp(i * self.grid.d() + j)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }

    /// `max_ij max_x |T_ij - T_ji|` for tensors; zero for other kinds.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.grid.d();
        if !matches!(self.kind, FieldKind::Tensor { .. }) {
            return 0.0;
        }
        let mut defect: f64 = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                let a = self.tensor_comp(i, j);
                let b = self.tensor_comp(j, i);
                let m = par::max_indexed(a.len(), |p| (a[p] - b[p]).abs());
                defect = defect.max(m);
            }
        }
        defect
    }

    pub fn max_abs(&self) -> f64 {
        par::max_indexed(self.data.len(), |i| self.data[i].abs())
    }

    pub fn scale(&mut self, c: f64) {
        par::for_each_chunk_mut(&mut self.data, par::CHUNK, |_, chunk| {
            for v in chunk {
                *v *= c;
            }
        });
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// `self += c * other`. Panics if shapes differ.
    pub fn add_scaled(&mut self, other: &Field, c: f64) {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        assert_eq!(self.data.len(), other.data.len(), "shape mismatch");
        let src = &other.data;
        par::for_each_chunk_mut(&mut self.data, par::CHUNK, |chunk_idx, chunk| {
            let base = chunk_idx * par::CHUNK;
            for (off, v) in chunk.iter_mut().enumerate() {
                *v += c * src[base + off];
            }
        });
    }

    pub fn sub(&self, other: &Field) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn add(&self, other: &Field) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(2, 8, 1.0).unwrap()
    }

    #[test]
    fn shapes() {
        let g = grid();
        assert_eq!(Field::scalar(g).ncomp(), 1);
        assert_eq!(Field::vector(g).ncomp(), 2);
        assert_eq!(Field::tensor(g, true).ncomp(), 4);
    }

    #[test]
    fn symmetry_defect_detects_asymmetry() {
        let g = grid();
        let mut t = Field::tensor(g, true);
        assert_eq!(t.symmetry_defect(), 0.0);
        t.comp_mut(1)[3] = 2.0; // T_01
        t.comp_mut(2)[3] = 1.5; // T_10
        assert!((t.symmetry_defect() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn finite_check() {
        let g = grid();
        let mut f = Field::scalar(g);
        assert!(f.ensure_finite("test").is_ok());
        f.comp_mut(0)[0] = f64::NAN;
        assert!(f.ensure_finite("test").is_err());
    }

    #[test]
    fn axpy() {
        let g = grid();
        let a = Field::scalar_from_fn(g, |x| x[0]);
        let b = Field::scalar_from_fn(g, |x| x[1]);
        let mut c = a.clone();
        c.add_scaled(&b, 2.0);
        let idx = g.index([3, 5, 0]);
        let h = g.h();
        assert!((c.comp(0)[idx] - (3.0 * h + 2.0 * 5.0 * h)).abs() < 1e-14);
    }
}
