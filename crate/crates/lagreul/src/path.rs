//! Field-valued paths on a uniform time grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldKind};
use crate::grid::Grid;
use crate::spaces::{path_norms, NormEngine, PathNorms, SpaceNorm};

/// Uniform time grid `0 = t_0 < ... < t_steps = T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::TimeDomain(format!("T must be positive, got {t_end}")));
        }
        if steps < 2 {
            return Err(Error::TimeDomain(format!(
                "need at least 2 time steps, got {steps}"
            )));
        }
        Ok(TimeGrid { t_end, steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    /// Number of samples including both endpoints.
    pub fn samples(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    /// Same horizon with the step count halved (for refinement studies the
    /// other way use `refined`).
    pub fn halved_horizon(&self) -> Result<Self> {
        TimeGrid::new(self.t_end / 2.0, self.steps)
    }
}

/// One field per time sample; all samples share a grid and a shape.
#[derive(Clone, Debug)]
pub struct PathField {
    times: TimeGrid,
    fields: Vec<Field>,
}

impl PathField {
    pub fn new(times: TimeGrid, fields: Vec<Field>) -> Result<Self> {
        if fields.len() != times.samples() {
            return Err(Error::Config(format!(
                "path needs {} samples, got {}",
                times.samples(),
                fields.len()
            )));
        }
        let grid = fields[0].grid();
        let kind = fields[0].kind();
        for f in &fields {
            if f.grid() != grid || f.ncomp() != kind.ncomp(grid.d()) {
                return Err(Error::Config("path samples differ in grid or shape".into()));
            }
        }
        Ok(PathField { times, fields })
    }

    pub fn zeros(grid: Grid, kind: FieldKind, times: TimeGrid) -> Self {
        let fields = (0..times.samples())
            .map(|_| Field::zeros(grid, kind))
            .collect();
        PathField { times, fields }
    }

    /// Constant-in-time path.
    pub fn constant(f: Field, times: TimeGrid) -> Self {
        let fields = (0..times.samples()).map(|_| f.clone()).collect();
        PathField { times, fields }
    }

    /// Samples `make(i, t_i)`.
    pub fn from_fn(times: TimeGrid, make: impl Fn(usize, f64) -> Field) -> Result<Self> {
        let fields: Vec<Field> = (0..times.samples())
            .map(|i| make(i, times.time(i)))
            .collect();
        PathField::new(times, fields)
    }

    pub fn times(&self) -> TimeGrid {
        self.times
    }

    pub fn grid(&self) -> Grid {
        self.fields[0].grid()
    }

    pub fn kind(&self) -> FieldKind {
        self.fields[0].kind()
    }

    pub fn samples(&self) -> usize {
        self.fields.len()
    }

    pub fn sample(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut Field {
        &mut self.fields[i]
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.samples() {
            Ok(())
        } else {
            Err(Error::TimeIndexOutOfRange {
                index: i,
                len: self.samples(),
            })
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Field> {
        self.fields.iter()
    }

    pub fn map(&self, f: impl Fn(usize, &Field) -> Result<Field>) -> Result<PathField> {
        let fields: Result<Vec<Field>> = self
            .fields
            .iter()
            .enumerate()
            .map(|(i, fld)| f(i, fld))
            .collect();
        PathField::new(self.times, fields?)
    }

    /// Pointwise linear combination `self + c * other`.
    pub fn add_scaled(&self, other: &PathField, c: f64) -> Result<PathField> {
        if self.times != other.times {
            return Err(Error::Config("path time grids differ".into()));
        }
        self.map(|i, f| {
            let mut out = f.clone();
            out.add_scaled(other.sample(i), c);
            Ok(out)
        })
    }

    pub fn sub(&self, other: &PathField) -> Result<PathField> {
        self.add_scaled(other, -1.0)
    }

    /// Running trapezoid integral: `out(t_i) = sum over [t_{j-1},t_j] of
    /// dt * (f_{j-1} + f_j) / 2` for `j <= i`; `out(0) = 0`.
    pub fn integrate_trapezoid(&self) -> PathField {
        let dt = self.times.dt();
        let mut fields = Vec::with_capacity(self.samples());
        let mut acc = Field::zeros(self.grid(), self.kind());
        fields.push(acc.clone());
        for i in 1..self.samples() {
            acc.add_scaled(&self.fields[i - 1], dt / 2.0);
            acc.add_scaled(&self.fields[i], dt / 2.0);
            fields.push(acc.clone());
        }
        PathField {
            times: self.times,
            fields,
        }
    }

    /// Path norms under the chosen space norm: per-sample norms plus
    /// consecutive-difference norms, assembled by [`path_norms`].
    pub fn path_norms(&self, engine: &NormEngine, norm: SpaceNorm) -> Result<PathNorms> {
        let sample_norms: Result<Vec<f64>> = self
            .fields
            .iter()
            .map(|f| engine.space_norm(f, norm))
            .collect();
        let diffs: Result<Vec<f64>> = (1..self.samples())
            .map(|i| engine.space_norm(&self.fields[i].sub(&self.fields[i - 1]), norm))
            .collect();
        path_norms(&sample_norms?, &diffs?, self.times.dt())
    }

    /// `L^inf(0,T;Y)` only (cheaper than full path norms).
    pub fn sup_norm(&self, engine: &NormEngine, norm: SpaceNorm) -> Result<f64> {
        let mut sup: f64 = 0.0;
        for f in &self.fields {
            sup = sup.max(engine.space_norm(f, norm)?);
        }
        Ok(sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_integrates_linear_paths_exactly() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let times = TimeGrid::new(1.0, 4).unwrap();
        // f(t) = t  ->  integral = t^2/2, exact for trapezoid on linear data.
        let path = PathField::from_fn(times, |_, t| Field::scalar_from_fn(g, |_| t)).unwrap();
        let integral = path.integrate_trapezoid();
        for i in 0..times.samples() {
            let t = times.time(i);
            let v = integral.sample(i).comp(0)[0];
            assert!((v - t * t / 2.0).abs() < 1e-14, "t={t} v={v}");
        }
    }

    #[test]
    fn time_grid_guards() {
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        let tg = TimeGrid::new(0.5, 10).unwrap();
        assert_eq!(tg.samples(), 11);
        assert!((tg.dt() - 0.05).abs() < 1e-15);
    }
}
