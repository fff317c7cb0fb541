//! Adaptive tensorized Gauss-Legendre quadrature over boxes in R^d.
//!
//! Panels start at a caller-provided base scale (the kernel audits key it on
//! `sqrt(nu t)`) and split dyadically wherever a refinement step still moves
//! the panel integral. Non-convergence is reported, never silently accepted.

use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::par;

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence and cached per order.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<std::collections::HashMap<usize, (Vec<f64>, Vec<f64>)>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(std::collections::HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&m) {
        return hit.clone();
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Initial guess: Chebyshev-like.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(m, x);
        nodes[m - 1 - i] = x;
        weights[m - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    cache.lock().unwrap().insert(m, (nodes.clone(), weights.clone()));
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial P_m at x.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[derive(Clone, Copy, Debug)]
pub struct QuadConfig {
    /// Gauss points per axis per panel.
    pub points: usize,
    /// Absolute tolerance on the total integral.
    pub tol_abs: f64,
    /// Maximum dyadic refinement depth per panel.
    pub max_depth: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            points: 8,
            tol_abs: 1e-10,
            max_depth: 12,
        }
    }
}

impl QuadConfig {
    /// Tight tolerance for mass-type integrals of smooth integrands.
    pub fn tight() -> Self {
        QuadConfig::default()
    }

    /// Relative-accuracy workhorse for integrands with |.| kinks, where the
    /// consumers (exponent fits, calibrated ratio audits) need about five
    /// digits.
    pub fn standard() -> Self {
        QuadConfig {
            points: 8,
            tol_abs: 1e-5,
            max_depth: 9,
        }
    }
}

#[derive(Clone, Copy)]
struct Panel {
    lo: [f64; 3],
    hi: [f64; 3],
}

fn panel_gauss<F: Fn([f64; 3]) -> f64>(
    d: usize,
    panel: &Panel,
    nodes: &[f64],
    weights: &[f64],
    f: &F,
) -> f64 {
    let m = nodes.len();
    let mut mid = [0.0; 3];
    let mut half = [0.0; 3];
    for a in 0..d {
        mid[a] = 0.5 * (panel.lo[a] + panel.hi[a]);
        half[a] = 0.5 * (panel.hi[a] - panel.lo[a]);
    }
    let mut sum = 0.0;
    match d {
        2 => {
            for i in 0..m {
                let x0 = mid[0] + half[0] * nodes[i];
                for j in 0..m {
                    let x1 = mid[1] + half[1] * nodes[j];
                    sum += weights[i] * weights[j] * f([x0, x1, 0.0]);
                }
            }
            sum * half[0] * half[1]
        }
        _ => {
            for i in 0..m {
                let x0 = mid[0] + half[0] * nodes[i];
                for j in 0..m {
                    let x1 = mid[1] + half[1] * nodes[j];
                    for k in 0..m {
                        let x2 = mid[2] + half[2] * nodes[k];
                        sum += weights[i] * weights[j] * weights[k] * f([x0, x1, x2]);
                    }
                }
            }
            sum * half[0] * half[1] * half[2]
        }
    }
}

/// Recursive refinement: accept a panel when splitting it changes the value
/// by less than its share of the tolerance.
fn refine<F: Fn([f64; 3]) -> f64>(
    d: usize,
    panel: Panel,
    coarse: f64,
    tol: f64,
    depth: usize,
    cfg: &QuadConfig,
    nodes: &[f64],
    weights: &[f64],
    f: &F,
) -> (f64, f64) {
    let nchild = 1usize << d;
    let mut children = Vec::with_capacity(nchild);
    for mask in 0..nchild {
        let mut lo = panel.lo;
        let mut hi = panel.hi;
        for a in 0..d {
            let mid = 0.5 * (panel.lo[a] + panel.hi[a]);
            if mask >> a & 1 == 0 {
                hi[a] = mid;
            } else {
                lo[a] = mid;
            }
        }
        children.push(Panel { lo, hi });
    }
    let child_vals: Vec<f64> = children
        .iter()
        .map(|c| panel_gauss(d, c, nodes, weights, f))
        .collect();
    let fine: f64 = child_vals.iter().sum();
    let err = (fine - coarse).abs();
    if err <= tol || depth >= cfg.max_depth {
        return (fine, err);
    }
    let mut total = 0.0;
    let mut total_err = 0.0;
    for (c, v) in children.into_iter().zip(child_vals) {
        let (val, e) = refine(
            d,
            c,
            v,
            tol / nchild as f64,
            depth + 1,
            cfg,
            nodes,
            weights,
            f,
        );
        total += val;
        total_err += e;
    }
    (total, total_err)
}

/// Integrates `f` over the box centered at `center` with half-width
/// `half_width` per axis, starting from panels of size about `base_scale`.
pub fn integrate_box<F: Fn([f64; 3]) -> f64 + Sync>(
    d: usize,
    center: [f64; 3],
    half_width: f64,
    base_scale: f64,
    cfg: &QuadConfig,
    f: F,
) -> Result<f64> {
    let (nodes, weights) = gauss_legendre(cfg.points);
    let per_axis = ((2.0 * half_width / base_scale).ceil() as usize).clamp(1, 48);
    let step = 2.0 * half_width / per_axis as f64;
    let npanels = per_axis.pow(d as u32);
    let panel_of = |idx: usize| -> Panel {
        let mut rem = idx;
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in (0..d).rev() {
            let i = rem % per_axis;
            rem /= per_axis;
            lo[a] = center[a] - half_width + i as f64 * step;
            hi[a] = lo[a] + step;
        }
        Panel { lo, hi }
    };
    let tol_per_panel = cfg.tol_abs / npanels as f64;
    let results: Vec<(f64, f64)> = par::map_indexed(npanels, |idx| {
        let p = panel_of(idx);
        let coarse = panel_gauss(d, &p, &nodes, &weights, &f);
        refine(d, p, coarse, tol_per_panel, 0, cfg, &nodes, &weights, &f)
    });
    let total: f64 = results.iter().map(|r| r.0).sum();
    let err: f64 = results.iter().map(|r| r.1).sum();
    if err > cfg.tol_abs.max(1e-12 * total.abs()) * 50.0 {
        return Err(Error::QuadratureInconclusive(format!(
            "estimated error {err:.3e} for integral {total:.6e}"
        )));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_nodes_integrate_polynomials_exactly() {
        let (n, w) = gauss_legendre(8);
        // degree-15 polynomial x^14 on [-1,1]: integral 2/15
        let val: f64 = n.iter().zip(&w).map(|(x, wi)| wi * x.powi(14)).sum();
        assert!((val - 2.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_mass_2d() {
        let s2: f64 = 0.05; // variance per axis
        let cfg = QuadConfig::default();
        let val = integrate_box(2, [0.0; 3], 10.0 * s2.sqrt(), s2.sqrt(), &cfg, |x| {
            (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * s2)).exp() / (2.0 * PI * s2)
        })
        .unwrap();
        assert!((val - 1.0).abs() < 1e-9, "mass {val}");
    }

    #[test]
    fn absolute_value_kink_is_resolved() {
        // integral of |x0| over [-1,1]^2 = 2
        let cfg = QuadConfig {
            tol_abs: 1e-9,
            ..Default::default()
        };
        let val = integrate_box(2, [0.0; 3], 1.0, 0.7, &cfg, |x| x[0].abs()).unwrap();
        assert!((val - 2.0).abs() < 1e-8, "{val}");
    }
}
