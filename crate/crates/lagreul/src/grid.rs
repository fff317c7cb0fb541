//! Periodic d-dimensional grid.
//!
//! The grid is a uniform lattice on the torus `[0, L)^d` with `n` points per
//! axis and spacing `h = L/n`. It stands in for the full space: all fields
//! used by the experiments decay inside the box, so enlarging the box leaves
//! every measured norm essentially unchanged (checked by the acceptance
//! suite's box-doubling run).

use crate::error::{Error, Result};

/// Maximum total point count accepted by the guarded constructor.
const MAX_POINTS: usize = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    d: usize,
    n: usize,
    l: f64,
}

impl Grid {
    /// A periodic grid with `n` points per axis on a box of side `l`.
    ///
    /// `n` must be even and at least 8; `d` must be 2 or 3; the total point
    /// count must fit comfortably in memory.
    pub fn new(d: usize, n: usize, l: f64) -> Result<Self> {
        if !(d == 2 || d == 3) {
            return Err(Error::InvalidGrid(format!("d must be 2 or 3, got {d}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n must be even and >= 8, got {n}"
            )));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidGrid(format!("L must be positive, got {l}")));
        }
        let points = n.checked_pow(d as u32).filter(|&p| p <= MAX_POINTS);
        if points.is_none() {
            return Err(Error::InvalidGrid(format!(
                "n^d = {n}^{d} exceeds the addressable limit {MAX_POINTS}"
            )));
        }
        Ok(Self { d, n, l })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Grid spacing `h = L/n`.
    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Total number of nodes, `n^d`.
    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Same grid on a box of side `2L` with `2n` points (spacing preserved).
    pub fn doubled(&self) -> Result<Self> {
        Grid::new(self.d, 2 * self.n, 2.0 * self.l)
    }

    /// Flat index of the node with integer coordinates `c` (row-major,
    /// axis 0 outermost).
    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        let mut idx = c[0];
        for a in 1..self.d {
            idx = idx * self.n + c[a];
        }
        idx
    }

    /// Integer coordinates of flat node index `idx`.
    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        let mut rem = idx;
        for a in (0..self.d).rev() {
            c[a] = rem % self.n;
            rem /= self.n;
        }
        c
    }

    /// Physical position of node `idx`.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let h = self.h();
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = c[a] as f64 * h;
        }
        x
    }

    /// Minimum-image displacement: each component wrapped into `[-L/2, L/2)`.
    #[inline]
    pub fn min_image(&self, mut dx: [f64; 3]) -> [f64; 3] {
        for a in 0..self.d {
            dx[a] -= self.l * (dx[a] / self.l).round();
        }
        dx
    }

    /// Torus distance between two points.
    #[inline]
    pub fn distance(&self, x: [f64; 3], y: [f64; 3]) -> f64 {
        let mut dx = [0.0; 3];
        for a in 0..self.d {
            dx[a] = x[a] - y[a];
        }
        let dx = self.min_image(dx);
        let mut s = 0.0;
        for a in 0..self.d {
            s += dx[a] * dx[a];
        }
        s.sqrt()
    }

    /// Torus distance between two nodes.
    #[inline]
    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        self.distance(self.position(i), self.position(j))
    }

    /// Physical wavenumber of integer mode `k`: `2 pi k / L`.
    #[inline]
    pub fn xi(&self, k: i64) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.l
    }

    /// Signed integer mode for spectral index `i` (Nyquist maps to `-n/2`).
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_guards() {
        assert!(Grid::new(2, 64, 1.0).is_ok());
        assert!(Grid::new(2, 6, 1.0).is_err());
        assert!(Grid::new(2, 63, 1.0).is_err());
        assert!(Grid::new(4, 64, 1.0).is_err());
        assert!(Grid::new(2, 64, -1.0).is_err());
        assert!(Grid::new(3, 1024, 1.0).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        for idx in 0..g.points() {
            assert_eq!(g.index(g.coords(idx)), idx);
        }
    }

    #[test]
    fn min_image_wraps() {
        let g = Grid::new(2, 8, 2.0).unwrap();
        let dx = g.min_image([1.9, -1.9, 0.0]);
        assert!((dx[0] + 0.1).abs() < 1e-14);
        assert!((dx[1] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn modes_cover_nyquist() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let modes: Vec<i64> = (0..8).map(|i| g.mode(i)).collect();
        assert_eq!(modes, vec![0, 1, 2, 3, -4, -3, -2, -1]);
    }
}
