//! Run manifests: one JSON document drives every subcommand, with a shared
//! `common` block (grid, alpha, p, nu, seed) so audits run on identical
//! discretizations. Every section has defaults; an empty manifest `{}` runs
//! the stock experiments.

use serde::{Deserialize, Serialize};

use crate::analytic::{random_bump_set, stream_velocity, symmetric_tensor_bumps, Bump};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::interp::InterpScheme;
use crate::solver::{Model, ModelParams, SolverConfig};

fn default_l() -> f64 {
    4.0 * std::f64::consts::PI
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Common {
    pub d: usize,
    pub n: usize,
    pub l: f64,
    pub alpha: f64,
    pub p: f64,
    pub nu: f64,
    pub seed: u64,
    pub out_dir: Option<String>,
}

impl Default for Common {
    fn default() -> Self {
        Common {
            d: 2,
            n: 64,
            l: default_l(),
            alpha: 0.5,
            p: 2.0,
            nu: 1.0,
            seed: 42,
            out_dir: None,
        }
    }
}

impl Common {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.d, self.n, self.l)
    }

    pub fn grid_with(&self, n: Option<usize>) -> Result<Grid> {
        Grid::new(self.d, n.unwrap_or(self.n), self.l)
    }

    /// Same configuration on a doubled box at fixed spacing.
    pub fn doubled(&self) -> Common {
        Common {
            n: 2 * self.n,
            l: 2.0 * self.l,
            ..self.clone()
        }
    }
}

/// Analytic data families. Centers and extents are in physical units and
/// default to the center of the *base* box, so a doubled box carries the
/// same function.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DataSpec {
    Zero,
    /// Divergence-free velocity from bump stream potentials.
    StreamBumps {
        seed: u64,
        count: usize,
        amp: f64,
        width: f64,
        #[serde(default)]
        center: Option<[f64; 3]>,
        #[serde(default)]
        region_half: Option<f64>,
    },
    /// Symmetric tensor with independent bump sets per component.
    TensorBumps {
        seed: u64,
        count: usize,
        amp: f64,
        width: f64,
        #[serde(default)]
        center: Option<[f64; 3]>,
        #[serde(default)]
        region_half: Option<f64>,
    },
    /// `c I` (viscoelastic relaxation oracle).
    ConstIsotropic { c: f64 },
    /// FLD1 file.
    Fld { path: String },
}

impl DataSpec {
    /// Fills center/extent defaults against the given base box so the spec
    /// is box-pinned.
    pub fn pinned(&self, base: Grid) -> DataSpec {
        let center = [base.l() / 2.0, base.l() / 2.0, base.l() / 2.0];
        let region = base.l() / 5.0;
        match self.clone() {
            DataSpec::StreamBumps {
                seed,
                count,
                amp,
                width,
                center: c,
                region_half: r,
            } => DataSpec::StreamBumps {
                seed,
                count,
                amp,
                width,
                center: Some(c.unwrap_or(center)),
                region_half: Some(r.unwrap_or(region)),
            },
            DataSpec::TensorBumps {
                seed,
                count,
                amp,
                width,
                center: c,
                region_half: r,
            } => DataSpec::TensorBumps {
                seed,
                count,
                amp,
                width,
                center: Some(c.unwrap_or(center)),
                region_half: Some(r.unwrap_or(region)),
            },
            other => other,
        }
    }

    /// Velocity-shaped realization (vector, divergence free families).
    pub fn build_velocity(&self, grid: Grid) -> Result<Field> {
        match self.pinned(grid) {
            DataSpec::Zero => Ok(Field::vector(grid)),
            DataSpec::StreamBumps {
                seed,
                count,
                amp,
                width,
                center,
                region_half,
            } => {
                let d = grid.d();
                let pots: Vec<Vec<Bump>> = (0..if d == 2 { 1 } else { 3 })
                    .map(|k| {
                        random_bump_set(
                            seed + k as u64,
                            d,
                            count,
                            center.unwrap(),
                            region_half.unwrap(),
                            (0.85 * width, 1.15 * width),
                            amp,
                        )
                    })
                    .collect();
                stream_velocity(grid, &pots)
            }
            DataSpec::Fld { path } => {
                let (f, _) = crate::fld::read_fld_file(std::path::Path::new(&path))?;
                if f.grid() != grid {
                    return Err(Error::Manifest(format!(
                        "field in {path} lives on a different grid"
                    )));
                }
                Ok(f)
            }
            other => Err(Error::Manifest(format!(
                "{other:?} is not a velocity family"
            ))),
        }
    }

    /// Symmetric stress realization.
    pub fn build_stress(&self, grid: Grid) -> Result<Field> {
        match self.pinned(grid) {
            DataSpec::Zero => Ok(Field::tensor(grid, true)),
            DataSpec::TensorBumps {
                seed,
                count,
                amp,
                width,
                center,
                region_half,
            } => {
                let d = grid.d();
                let sets = d * (d + 1) / 2;
                let comps: Vec<Vec<Bump>> = (0..sets)
                    .map(|k| {
                        random_bump_set(
                            seed + 17 * k as u64,
                            d,
                            count,
                            center.unwrap(),
                            region_half.unwrap(),
                            (0.85 * width, 1.15 * width),
                            amp,
                        )
                    })
                    .collect();
                symmetric_tensor_bumps(grid, &comps)
            }
            DataSpec::ConstIsotropic { c } => {
                Ok(Field::from_fn(
                    grid,
                    crate::field::FieldKind::Tensor { symmetric: true },
                    move |comp, _| {
                        let d = grid.d();
                        if comp / d == comp % d {
                            c
                        } else {
                            0.0
                        }
                    },
                ))
            }
            DataSpec::Fld { path } => {
                let (f, _) = crate::fld::read_fld_file(std::path::Path::new(&path))?;
                Ok(f)
            }
            other => Err(Error::Manifest(format!("{other:?} is not a stress family"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigSection {
    pub ball_radius: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
    pub interp: InterpScheme,
    pub dealias: bool,
}

impl Default for ConfigSection {
    fn default() -> Self {
        let c = SolverConfig::default();
        ConfigSection {
            ball_radius: c.ball_radius,
            max_iters: c.max_iters,
            tol: c.tol,
            interp: c.interp,
            dealias: c.dealias,
        }
    }
}

impl ConfigSection {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            ball_radius: self.ball_radius,
            max_iters: self.max_iters,
            tol: self.tol,
            interp: self.interp,
            dealias: self.dealias,
            skip_stress_coupling: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveSection {
    pub model: Model,
    pub k_relax: f64,
    pub rho_k: f64,
    pub t_end: f64,
    pub n_t: usize,
    pub n: Option<usize>,
    pub u0: DataSpec,
    pub sigma0: DataSpec,
    pub config: ConfigSection,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            model: Model::OldroydB,
            k_relax: 1.0,
            rho_k: 0.1,
            t_end: 0.25,
            n_t: 16,
            n: None,
            u0: DataSpec::StreamBumps {
                seed: 11,
                count: 3,
                amp: 0.5,
                width: 0.8,
                center: None,
                region_half: None,
            },
            sigma0: DataSpec::TensorBumps {
                seed: 12,
                count: 2,
                amp: 0.3,
                width: 0.8,
                center: None,
                region_half: None,
            },
            config: ConfigSection::default(),
        }
    }
}

impl SolveSection {
    pub fn model_params(&self, common: &Common) -> ModelParams {
        ModelParams {
            model: self.model,
            nu: common.nu,
            k_relax: self.k_relax,
            rho_k: self.rho_k,
            alpha: common.alpha,
            p: common.p,
            t_end: self.t_end,
            n_t: self.n_t,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelsSection {
    pub mass_ts: Vec<f64>,
    pub mass_nus: Vec<f64>,
    pub mass_tol: f64,
    pub exponent_ts: Vec<f64>,
    pub exponent_tol: f64,
    pub k_t: f64,
    pub k_thetas: Vec<f64>,
    pub k_v: [f64; 3],
    pub k_nus: Vec<f64>,
    pub k_exponent_tol: f64,
}

impl Default for KernelsSection {
    fn default() -> Self {
        KernelsSection {
            mass_ts: vec![1e-3, 1e-2, 1e-1, 1.0],
            mass_nus: vec![0.1, 1.0],
            mass_tol: 1e-8,
            exponent_ts: (0..7).map(|k| 2f64.powi(-k)).collect(),
            exponent_tol: 0.05,
            k_t: 0.5,
            k_thetas: (1..6).map(|k| 0.2 * 2f64.powi(-k)).collect(),
            k_v: [0.08, 0.05, 0.0],
            k_nus: vec![0.1, 0.5, 1.0],
            k_exponent_tol: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorsSection {
    pub n: Option<usize>,
    pub identity_trials: usize,
    pub identity_tol: f64,
    pub heat_ts: Vec<f64>,
    pub duhamel_ts: Vec<f64>,
    pub g_ts: Vec<f64>,
    pub n_t: usize,
    pub translation_v: [f64; 3],
}

impl Default for OperatorsSection {
    fn default() -> Self {
        OperatorsSection {
            n: None,
            identity_trials: 20,
            identity_tol: 1e-8,
            heat_ts: vec![1e-3, 1e-2, 0.05, 0.1, 0.25, 0.5],
            duhamel_ts: vec![0.005, 0.015, 0.05, 0.15, 0.5],
            g_ts: vec![0.01, 0.03, 0.1, 0.3],
            n_t: 8,
            translation_v: [0.6, -0.45, 0.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowmapSection {
    pub n: Option<usize>,
    pub t_end: f64,
    pub n_t: usize,
    pub translation_v: [f64; 3],
    pub slack: f64,
    pub solver_map: SolveSection,
}

impl Default for FlowmapSection {
    fn default() -> Self {
        FlowmapSection {
            n: None,
            t_end: 0.25,
            n_t: 8,
            translation_v: [0.8, 0.6, 0.0],
            slack: 0.05,
            solver_map: SolveSection {
                t_end: 0.25,
                n_t: 8,
                u0: DataSpec::StreamBumps {
                    seed: 21,
                    count: 3,
                    amp: 0.9,
                    width: 0.8,
                    center: None,
                    region_half: None,
                },
                sigma0: DataSpec::TensorBumps {
                    seed: 22,
                    count: 2,
                    amp: 0.3,
                    width: 0.8,
                    center: None,
                    region_half: None,
                },
                ..SolveSection::default()
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CommutatorsSection {
    pub n: Option<usize>,
    pub trials: usize,
    pub tol_u: f64,
    pub tol_g: f64,
    pub t_end: f64,
    pub n_t: usize,
    pub cz_trials: usize,
    pub variation_n: usize,
    pub variation_eps: Vec<f64>,
    pub variation_min_order: f64,
    pub comm_u_ts: Vec<f64>,
}

impl Default for CommutatorsSection {
    fn default() -> Self {
        CommutatorsSection {
            n: Some(48),
            trials: 20,
            tol_u: 1e-6,
            tol_g: 1e-5,
            t_end: 0.3,
            n_t: 6,
            cz_trials: 50,
            variation_n: 48,
            variation_eps: vec![0.2, 0.1, 0.05, 0.025],
            variation_min_order: 1.9,
            comm_u_ts: vec![0.025, 0.05, 0.1, 0.2, 0.4],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ContractionSection {
    pub solve: SolveSection,
    pub trials: usize,
    pub t_halvings: usize,
    pub search_start_t: f64,
}

impl Default for ContractionSection {
    fn default() -> Self {
        ContractionSection {
            solve: SolveSection {
                t_end: 0.5,
                n_t: 16,
                n: Some(48),
                ..SolveSection::default()
            },
            trials: 5,
            t_halvings: 2,
            search_start_t: 0.5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LipschitzSection {
    pub solve: SolveSection,
    pub perturbation_amp: f64,
    pub scales: Vec<f64>,
    pub stability_factor: f64,
}

impl Default for LipschitzSection {
    fn default() -> Self {
        LipschitzSection {
            solve: SolveSection {
                t_end: 0.125,
                n_t: 12,
                n: Some(48),
                ..SolveSection::default()
            },
            perturbation_amp: 0.1,
            scales: vec![1.0, 0.1, 0.01],
            stability_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterexampleSection {
    pub n: Option<usize>,
    pub alpha: f64,
    pub v: [f64; 3],
    pub radius_frac: f64,
    pub decades: f64,
    pub points: usize,
    pub seminorm_floor: f64,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        CounterexampleSection {
            n: Some(128),
            alpha: 0.5,
            v: [1.0, 0.0, 0.0],
            radius_frac: 0.2,
            decades: 3.0,
            points: 7,
            seminorm_floor: 1.8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct MhdSection {
    pub n: Option<usize>,
    pub t_end: f64,
    pub n_t_levels: Vec<usize>,
    pub tolerance: f64,
    pub min_order: f64,
    pub u0: DataSpec,
    pub b0: DataSpec,
    pub config: ConfigSection,
}

impl Default for MhdSection {
    fn default() -> Self {
        MhdSection {
            n: Some(48),
            t_end: 0.25,
            n_t_levels: vec![8, 16, 32],
            tolerance: 1e-3,
            min_order: 1.9,
            u0: DataSpec::StreamBumps {
                seed: 31,
                count: 2,
                amp: 0.4,
                width: 0.9,
                center: None,
                region_half: None,
            },
            b0: DataSpec::StreamBumps {
                seed: 32,
                count: 2,
                amp: 0.3,
                width: 0.9,
                center: None,
                region_half: None,
            },
            config: ConfigSection {
                interp: InterpScheme::Trig,
                ..ConfigSection::default()
            },
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Manifest {
    pub common: Common,
    pub solve: SolveSection,
    pub kernels: KernelsSection,
    pub operators: OperatorsSection,
    pub flowmap: FlowmapSection,
    pub commutators: CommutatorsSection,
    pub contraction: ContractionSection,
    pub lipschitz: LipschitzSection,
    pub counterexample: CounterexampleSection,
    pub mhd: MhdSection,
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Manifest> {
        serde_json::from_str(text).map_err(|e| Error::Manifest(format!("invalid manifest: {e}")))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_parses_with_defaults() {
        let m = Manifest::from_json("{}").unwrap();
        assert_eq!(m.common.n, 64);
        assert_eq!(m.kernels.mass_nus, vec![0.1, 1.0]);
    }

    #[test]
    fn bad_manifest_is_reported_with_field_context() {
        let err = Manifest::from_json(r#"{"common": {"n": "forty"}}"#).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("manifest"), "{msg}");
        assert!(msg.contains("common.n") || msg.contains("expected"), "{msg}");
    }

    #[test]
    fn data_specs_build_on_doubled_boxes_identically() {
        let base = Grid::new(2, 32, 2.0 * std::f64::consts::PI).unwrap();
        let spec = DataSpec::StreamBumps {
            seed: 3,
            count: 2,
            amp: 0.5,
            width: 0.45,
            center: None,
            region_half: Some(0.8),
        };
        let pinned = spec.pinned(base);
        let f1 = pinned.build_velocity(base).unwrap();
        let doubled = base.doubled().unwrap();
        let f2 = pinned.build_velocity(doubled).unwrap();
        // The base-box nodes are a subset of the doubled-box nodes with the
        // same physical positions; compare samples there.
        let mut worst: f64 = 0.0;
        for idx in 0..base.points() {
            let c = base.coords(idx);
            let idx2 = doubled.index(c);
            for comp in 0..2 {
                worst = worst.max((f1.comp(comp)[idx] - f2.comp(comp)[idx2]).abs());
            }
        }
        // Spectral stream construction differs only through box truncation.
        assert!(worst < 1e-5 * f1.max_abs().max(1e-300), "worst {worst}");
    }
}
