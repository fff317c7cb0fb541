//! Discrete estimators for the Holder/Lebesgue space norms and the path
//! norms used by the solver ball and every bound audit.
//!
//! The Holder seminorm `[f]_alpha = sup |f(x)-f(y)| / dist(x,y)^alpha` (torus
//! distance) is estimated over a fixed pair set: all node pairs within a
//! window of `w = 4` cells (exhaustive; for genuinely C^alpha data the
//! supremum concentrates at small separations), deterministic dyadic-ring
//! offsets that cover the intermediate scales where the quotient of smooth
//! fields peaks, and a seeded budget of random far pairs. The pair set is a
//! pure function of (grid, params, seed), so estimates are reproducible and
//! norm subadditivity holds exactly on the sampled set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::flowmap::FlowMap;
use crate::grid::Grid;
use crate::par;
use crate::spectral::gradient;

/// Parameters of the Holder-space estimators.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderParams {
    /// Holder exponent, in (0, 1).
    pub alpha: f64,
    /// Lebesgue exponent, in (1, infinity).
    pub p: f64,
    /// Random far-pair budget; `None` resolves to `10 n^d`.
    pub far_pairs: Option<usize>,
    /// Exhaustive near-pair window in cells.
    pub window: usize,
    /// Far pairs are sampled inside a centered cube of this half-width.
    /// `None` means the whole box. Used by box-doubling runs to keep the
    /// pair-set geometry fixed.
    pub sample_half_width: Option<f64>,
}

impl HolderParams {
    pub fn new(alpha: f64, p: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0,1), got {alpha}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("p must be in (1,inf), got {p}")));
        }
        Ok(HolderParams {
            alpha,
            p,
            far_pairs: None,
            window: 4,
            sample_half_width: None,
        })
    }

    pub fn resolved_far_pairs(&self, grid: Grid) -> usize {
        self.far_pairs.unwrap_or(10 * grid.points())
    }
}

/// One scalar offset pair class: integer node offset plus `1/dist^alpha`.
struct OffsetPair {
    delta: [i64; 3],
    inv_dist_alpha: f64,
}

/// Precomputed pair set for one (grid, params, seed) triple.
struct PairSet {
    offsets: Vec<OffsetPair>,
    /// Random far pairs as flat node indices with `1/dist^alpha`.
    far: Vec<(u32, u32, f64)>,
}

impl PairSet {
    fn build(grid: Grid, params: &HolderParams, seed: u64) -> Self {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;

        let d = grid.d();
        let n = grid.n() as i64;
        let h = grid.h();
        let alpha = params.alpha;
        let w = params.window as i64;
        let mut offsets: Vec<OffsetPair> = Vec::new();

        let canonical = |delta: &[i64; 3]| -> bool {
            for a in 0..d {
                if delta[a] > 0 {
                    return true;
                }
                if delta[a] < 0 {
                    return false;
                }
            }
            false
        };
        let mut push_offset = |delta: [i64; 3]| {
            if !canonical(&delta) {
                return;
            }
            if offsets.iter().any(|o| o.delta == delta) {
                return;
            }
            let mut s = 0.0;
            for &da in delta.iter().take(d) {
                let wrapped = da.rem_euclid(n);
                let m = wrapped.min(n - wrapped) as f64;
                s += (m * h) * (m * h);
            }
            let dist = s.sqrt();
            if dist > 0.0 {
                offsets.push(OffsetPair {
                    delta,
                    inv_dist_alpha: dist.powf(-alpha),
                });
            }
        };

        // Exhaustive near window.
        match d {
            2 => {
                for d0 in -w..=w {
                    for d1 in -w..=w {
                        push_offset([d0, d1, 0]);
                    }
                }
            }
            _ => {
                for d0 in -w..=w {
                    for d1 in -w..=w {
                        for d2 in -w..=w {
                            push_offset([d0, d1, d2]);
                        }
                    }
                }
            }
        }

        // Dyadic rings: deterministic directions at scales 2w, 4w, ... up to
        // just below n/2 cells, catching the quotient peaks of smooth fields.
        let dirs_2d: Vec<[f64; 3]> = (0..16)
            .map(|j| {
                let th = std::f64::consts::PI * j as f64 / 16.0;
                [th.cos(), th.sin(), 0.0]
            })
            .collect();
        let dirs_3d: Vec<[f64; 3]> = {
            let mut v = Vec::new();
            for a in -1i64..=1 {
                for b in -1i64..=1 {
                    for c in -1i64..=1 {
                        if (a, b, c) <= (0, 0, 0) {
                            continue;
                        }
                        let norm = ((a * a + b * b + c * c) as f64).sqrt();
                        v.push([a as f64 / norm, b as f64 / norm, c as f64 / norm]);
                    }
                }
            }
            v
        };
        let dirs = if d == 2 { &dirs_2d } else { &dirs_3d };
        let mut scale = 2 * w;
        while scale < n / 2 {
            for dir in dirs {
                let delta = [
                    (dir[0] * scale as f64).round() as i64,
                    (dir[1] * scale as f64).round() as i64,
                    if d == 3 {
                        (dir[2] * scale as f64).round() as i64
                    } else {
                        0
                    },
                ];
                push_offset(delta);
                push_offset([-delta[0], delta[1], delta[2]]);
            }
            scale *= 2;
        }

        // Random far pairs, sampled in physical coordinates and snapped to
        // nodes so the set survives box doubling at fixed spacing.
        let m = params.resolved_far_pairs(grid);
        let half = params.sample_half_width.unwrap_or(grid.l() / 2.0);
        let center = grid.l() / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut far = Vec::with_capacity(m);
        let snap = |u: f64| -> usize { ((u / h).round() as i64).rem_euclid(n) as usize };
        while far.len() < m {
            let mut nodes = [[0usize; 3]; 2];
            for node in nodes.iter_mut() {
                for a in 0..d {
                    node[a] = snap(center + rng.gen_range(-half..half));
                }
            }
            let i = grid.index(nodes[0]);
            let j = grid.index(nodes[1]);
            if i == j {
                continue;
            }
            let dist = grid.node_distance(i, j);
            far.push((i as u32, j as u32, dist.powf(-alpha)));
        }

        PairSet { offsets, far }
    }
}

/// Norm estimator bound to one grid, one (alpha, p), and one pair-set seed.
pub struct NormEngine {
    grid: Grid,
    pub params: HolderParams,
    pairs: PairSet,
}

impl NormEngine {
    pub fn new(grid: Grid, alpha: f64, p: f64, seed: u64) -> Result<Self> {
        let params = HolderParams::new(alpha, p)?;
        Ok(Self::with_params(grid, params, seed))
    }

    pub fn with_params(grid: Grid, params: HolderParams, seed: u64) -> Self {
        let pairs = PairSet::build(grid, &params, seed);
        NormEngine {
            grid,
            params,
            pairs,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    /// Holder seminorm of one scalar component over the pair set.
    pub fn holder_seminorm_comp(&self, comp: &[f64]) -> f64 {
        let grid = self.grid;
        let n = grid.n();
        let d = grid.d();

        let offset_max = par::max_indexed(self.pairs.offsets.len(), |oi| {
            let off = &self.pairs.offsets[oi];
            // Wrapped index tables per axis; the inner loops are pure
            // lookups.
            let table = |delta: i64| -> Vec<usize> {
                (0..n)
                    .map(|i| (i as i64 + delta).rem_euclid(n as i64) as usize)
                    .collect()
            };
            let w0 = table(off.delta[0]);
            let w1 = table(off.delta[1]);
            let mut m = 0.0f64;
            match d {
                2 => {
                    for i0 in 0..n {
                        let j0 = w0[i0] * n;
                        let b0 = i0 * n;
                        let shifted = &comp[j0..j0 + n];
                        let row = &comp[b0..b0 + n];
                        for i1 in 0..n {
                            let diff = (shifted[w1[i1]] - row[i1]).abs();
                            if diff > m {
                                m = diff;
                            }
                        }
                    }
                }
                _ => {
                    let w2 = table(off.delta[2]);
                    for i0 in 0..n {
                        let j0 = w0[i0] * n * n;
                        let b0 = i0 * n * n;
                        for i1 in 0..n {
                            let j1 = j0 + w1[i1] * n;
                            let b1 = b0 + i1 * n;
                            for i2 in 0..n {
                                let diff = (comp[j1 + w2[i2]] - comp[b1 + i2]).abs();
                                if diff > m {
                                    m = diff;
                                }
                            }
                        }
                    }
                }
            }
            m * off.inv_dist_alpha
        });

        let far = &self.pairs.far;
        let far_max = par::max_indexed(far.len(), |pi| {
            let (i, j, q) = far[pi];
            (comp[i as usize] - comp[j as usize]).abs() * q
        });
        offset_max.max(far_max).max(0.0)
    }

    /// Holder seminorm of a field: componentwise max.
    pub fn holder_seminorm(&self, f: &Field) -> f64 {
        (0..f.ncomp())
            .map(|c| self.holder_seminorm_comp(f.comp(c)))
            .fold(0.0, f64::max)
    }

    /// `L^p` norm: uniform-weight Riemann sum with the pointwise l2
    /// magnitude across components.
    pub fn lp(&self, f: &Field) -> f64 {
        let grid = self.grid;
        let p = self.params.p;
        let npts = grid.points();
        let nc = f.ncomp();
        let sum = if nc == 1 {
            let comp = f.comp(0);
            if (p - 2.0).abs() < 1e-14 {
                par::sum_indexed(npts, |i| comp[i] * comp[i])
            } else {
                par::sum_indexed(npts, |i| comp[i].abs().powf(p))
            }
        } else {
            par::sum_indexed(npts, |i| {
                let mut s = 0.0;
                for c in 0..nc {
                    let v = f.comp(c)[i];
                    s += v * v;
                }
                if (p - 2.0).abs() < 1e-14 {
                    s
                } else {
                    s.sqrt().powf(p)
                }
            })
        };
        sum.powf(1.0 / p) * grid.h().powf(grid.d() as f64 / p)
    }

    /// `L^infinity` norm: componentwise max over nodes.
    pub fn linf(&self, f: &Field) -> f64 {
        f.max_abs()
    }

    /// Composite `C^{alpha,p}` report.
    pub fn c_norms(&self, f: &Field) -> Result<NormReport> {
        f.ensure_finite("c_norms input")?;
        let lp = self.lp(f);
        let linf = self.linf(f);
        let holder = self.holder_seminorm(f);
        Ok(NormReport {
            lp,
            linf,
            holder,
            c_alpha_p: lp + linf + holder,
            ..NormReport::default()
        })
    }

    /// Composite `C^{1+alpha,p}` report (gradient parts via spectral
    /// derivatives). Defined for scalar and vector fields.
    pub fn c1_norms(&self, f: &Field) -> Result<NormReport> {
        let mut report = self.c_norms(f)?;
        let grad = gradient(f)?;
        let grad_lp = self.lp(&grad);
        let grad_linf = self.linf(&grad);
        let grad_holder = self.holder_seminorm(&grad);
        let c1_alpha = report.linf + grad_linf + grad_holder;
        let w1p = report.lp + grad_lp;
        report.grad_lp = Some(grad_lp);
        report.grad_linf = Some(grad_linf);
        report.grad_holder = Some(grad_holder);
        report.c1_alpha = Some(c1_alpha);
        report.w1p = Some(w1p);
        report.c1_alpha_p = Some(c1_alpha + w1p);
        Ok(report)
    }

    /// Space norm of one field under the chosen composite.
    pub fn space_norm(&self, f: &Field, norm: SpaceNorm) -> Result<f64> {
        let report = if norm.needs_gradient() {
            self.c1_norms(f)?
        } else {
            self.c_norms(f)?
        };
        Ok(norm.extract(&report))
    }
}

/// Discrete norm estimates of one field. Serializes flat; gradient entries
/// appear only when a `C^{1+alpha,p}` report was requested.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct NormReport {
    pub lp: f64,
    pub linf: f64,
    pub holder: f64,
    pub c_alpha_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_lp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_linf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_holder: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1_alpha_p: Option<f64>,
}

impl NormReport {
    /// `C^alpha` norm: `||f||_inf + [f]_alpha`.
    pub fn c_alpha(&self) -> f64 {
        self.linf + self.holder
    }
}

/// Which composite to read from a report when forming space/path norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceNorm {
    CAlpha,
    CAlphaP,
    C1Alpha,
    C1AlphaP,
    W1P,
    LpInf,
}

impl SpaceNorm {
    pub fn needs_gradient(&self) -> bool {
        matches!(
            self,
            SpaceNorm::C1Alpha | SpaceNorm::C1AlphaP | SpaceNorm::W1P
        )
    }

    pub fn extract(&self, r: &NormReport) -> f64 {
        match self {
            SpaceNorm::CAlpha => r.c_alpha(),
            SpaceNorm::CAlphaP => r.c_alpha_p,
            SpaceNorm::C1Alpha => r.c1_alpha.expect("report lacks gradient parts"),
            SpaceNorm::C1AlphaP => r.c1_alpha_p.expect("report lacks gradient parts"),
            SpaceNorm::W1P => r.w1p.expect("report lacks gradient parts"),
            SpaceNorm::LpInf => r.lp + r.linf,
        }
    }
}

/// Path-space norm estimates over a uniform time grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PathNorms {
    /// `L^inf(0,T;Y)`: max over samples.
    pub sup_norm: f64,
    /// `Lip(0,T;Y)`: max consecutive difference quotient plus `sup_norm`;
    /// `None` when fewer than two samples exist.
    pub lip_norm: Option<f64>,
}

impl PathNorms {
    pub fn lip_or_err(&self) -> Result<f64> {
        self.lip_norm.ok_or_else(|| {
            Error::InsufficientSamples("Lip path norm needs at least 2 time samples".into())
        })
    }
}

/// Assembles path norms from per-sample norms and per-consecutive-pair
/// difference norms (`diff_norms[j] = ||f(t_{j+1}) - f(t_j)||_Y`).
pub fn path_norms(sample_norms: &[f64], diff_norms: &[f64], dt: f64) -> Result<PathNorms> {
    if sample_norms.is_empty() {
        return Err(Error::InsufficientSamples("empty norm series".into()));
    }
    let sup = sample_norms.iter().cloned().fold(0.0, f64::max);
    if sample_norms.len() < 2 {
        return Ok(PathNorms {
            sup_norm: sup,
            lip_norm: None,
        });
    }
    if diff_norms.len() != sample_norms.len() - 1 {
        return Err(Error::Config(format!(
            "need {} difference norms, got {}",
            sample_norms.len() - 1,
            diff_norms.len()
        )));
    }
    let quot = diff_norms.iter().cloned().fold(0.0, f64::max) / dt;
    Ok(PathNorms {
        sup_norm: sup,
        lip_norm: Some(quot + sup),
    })
}

/// Path norms of a scalar-valued series `a_j` sampled uniformly on `[0,T]`.
pub fn path_norms_scalar(series: &[f64], t_end: f64) -> Result<PathNorms> {
    let n = series.len();
    let sample_norms: Vec<f64> = series.iter().map(|v| v.abs()).collect();
    if n < 2 {
        return path_norms(&sample_norms, &[], 1.0);
    }
    let dt = t_end / (n - 1) as f64;
    let diffs: Vec<f64> = series.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    path_norms(&sample_norms, &diffs, dt)
}

/// `M_X = 1 + ||X - Id||_{L^inf(0,T;C^{1+alpha})}` for a flow map.
pub fn m_x(engine: &NormEngine, x: &FlowMap) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for i in 0..x.samples() {
        let r = engine.c1_norms(x.displacement(i))?;
        sup = sup.max(r.c1_alpha.unwrap());
    }
    Ok(1.0 + sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldKind;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(2, n, 2.0 * PI).unwrap()
    }

    fn engine(g: Grid) -> NormEngine {
        NormEngine::new(g, 0.5, 2.0, 42).unwrap()
    }

    #[test]
    fn constant_field_has_zero_seminorm_and_zero_field_zero_report() {
        let g = grid(32);
        let e = engine(g);
        let c = Field::scalar_from_fn(g, |_| 4.2);
        assert_eq!(e.holder_seminorm(&c), 0.0);
        let z = e.c_norms(&Field::scalar(g)).unwrap();
        assert_eq!(z.lp, 0.0);
        assert_eq!(z.linf, 0.0);
        assert_eq!(z.holder, 0.0);
        assert_eq!(z.c_alpha_p, 0.0);
    }

    #[test]
    fn alpha_cone_seminorm_is_one() {
        // f(x) = min(|x - x0|_torus, r)^alpha has [f]_alpha = 1 exactly.
        let g = Grid::new(2, 256, 2.0 * PI).unwrap();
        let e = engine(g);
        let x0 = [PI, PI, 0.0];
        let r = g.l() / 5.0;
        let f = Field::scalar_from_fn(g, |x| g.distance(x, x0).min(r).sqrt());
        let s = e.holder_seminorm(&f);
        assert!((s - 1.0).abs() <= 0.03, "seminorm {s}");
    }

    #[test]
    fn sine_seminorm_matches_exhaustive_oracle() {
        let g = grid(64);
        let e = engine(g);
        let f = Field::scalar_from_fn(g, |x| x[0].sin());
        let est = e.holder_seminorm(&f);
        // Exhaustive all-pairs oracle at this resolution.
        let comp = f.comp(0);
        let npts = g.points();
        let oracle = par::max_indexed(npts, |i| {
            let xi = g.position(i);
            let vi = comp[i];
            let mut m = 0.0f64;
            for j in (i + 1)..npts {
                let dist = g.distance(xi, g.position(j));
                let q = (comp[j] - vi).abs() / dist.sqrt();
                if q > m {
                    m = q;
                }
            }
            m
        });
        assert!(
            (est - oracle).abs() <= 0.02 * oracle,
            "est {est} oracle {oracle}"
        );
    }

    #[test]
    fn single_mode_norms() {
        let g = grid(64);
        let e = engine(g);
        let amp = 0.7;
        let f = Field::scalar_from_fn(g, |x| amp * x[0].sin());
        let r = e.c_norms(&f).unwrap();
        assert!((r.linf - amp).abs() < 1e-12);
        // Closed-form L2 of a sine mode: A * (L^d / 2)^{1/2}.
        let expect = amp * (g.l().powi(2) / 2.0).sqrt();
        assert!((r.lp - expect).abs() < 1e-6 * expect, "{} vs {expect}", r.lp);
    }

    #[test]
    fn cone_composite_norm() {
        let g = Grid::new(2, 256, 2.0 * PI).unwrap();
        let e = engine(g);
        let x0 = [PI, PI, 0.0];
        let r = g.l() / 5.0;
        let f = Field::scalar_from_fn(g, |x| g.distance(x, x0).min(r).sqrt());
        let rep = e.c_norms(&f).unwrap();
        let expect = rep.lp + rep.linf + 1.0;
        assert!(
            (rep.c_alpha_p - expect).abs() <= 0.03 * expect,
            "{} vs {expect}",
            rep.c_alpha_p
        );
    }

    #[test]
    fn homogeneity_is_exact() {
        let g = grid(32);
        let e = engine(g);
        let f = Field::scalar_from_fn(g, |x| (x[0] - 2.0).exp() * (2.0 * x[1]).sin());
        let r1 = e.c_norms(&f).unwrap();
        let r2 = e.c_norms(&f.scaled(3.5)).unwrap();
        assert!((r2.lp - 3.5 * r1.lp).abs() < 1e-12 * r2.lp.max(1.0));
        assert!((r2.linf - 3.5 * r1.linf).abs() < 1e-12 * r2.linf.max(1.0));
        assert!((r2.holder - 3.5 * r1.holder).abs() < 1e-12 * r2.holder.max(1.0));
    }

    #[test]
    fn triangle_inequality_on_random_pairs() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let g = grid(16);
        let e = engine(g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let mut a = Field::scalar(g);
            let mut b = Field::scalar(g);
            for v in a.comp_mut(0) {
                *v = rng.gen_range(-1.0..1.0);
            }
            for v in b.comp_mut(0) {
                *v = rng.gen_range(-1.0..1.0);
            }
            let ra = e.c_norms(&a).unwrap();
            let rb = e.c_norms(&b).unwrap();
            let rab = e.c_norms(&a.add(&b)).unwrap();
            assert!(rab.c_alpha_p <= ra.c_alpha_p + rb.c_alpha_p + 1e-12);
        }
    }

    #[test]
    fn path_norms_constant_and_linear() {
        let flat = path_norms_scalar(&[2.0; 9], 1.0).unwrap();
        assert_eq!(flat.lip_norm.unwrap(), flat.sup_norm);

        let c = 3.0;
        let n = 17;
        let t_end = 0.8;
        let series: Vec<f64> = (0..n)
            .map(|j| j as f64 * t_end / (n - 1) as f64 * c)
            .collect();
        let p = path_norms_scalar(&series, t_end).unwrap();
        let quot = p.lip_norm.unwrap() - p.sup_norm;
        assert!((quot - c).abs() < 1e-12, "quot {quot}");
    }

    #[test]
    fn path_norm_lip_requires_two_samples() {
        let p = path_norms_scalar(&[1.0], 1.0).unwrap();
        assert!(p.lip_norm.is_none());
        assert!(p.lip_or_err().is_err());
        assert_eq!(p.sup_norm, 1.0);
    }

    #[test]
    fn convex_profiles_consecutive_equals_all_pairs() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = 12;
            let t_end = 1.0;
            let dt = t_end / (n - 1) as f64;
            // Convex profile: increments nondecreasing.
            let mut incr: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            incr.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut series = vec![rng.gen_range(-1.0..1.0)];
            for &di in incr.iter() {
                let last = *series.last().unwrap();
                series.push(last + di);
            }
            let consecutive = path_norms_scalar(&series, t_end).unwrap();
            let mut all_pairs = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    let q = (series[j] - series[i]).abs() / ((j - i) as f64 * dt);
                    all_pairs = all_pairs.max(q);
                }
            }
            let quot = consecutive.lip_norm.unwrap() - consecutive.sup_norm;
            assert!((quot - all_pairs).abs() <= 1e-12 * all_pairs.max(1.0));
        }
    }

    #[test]
    fn vector_lp_uses_l2_aggregate() {
        let g = grid(16);
        let e = engine(g);
        let mut v = Field::zeros(g, FieldKind::Vector);
        for x in v.comp_mut(0) {
            *x = 3.0;
        }
        for x in v.comp_mut(1) {
            *x = 4.0;
        }
        // |v| = 5 pointwise; L2 norm = 5 * L^{d/p} over the box.
        let expect = 5.0 * g.l().powf(2.0 / 2.0);
        assert!((e.lp(&v) - expect).abs() < 1e-9 * expect);
        assert_eq!(e.linf(&v), 4.0);
    }
}
