//! The Lagrangian fixed-point system: nonlinearities, the solution map,
//! Picard iteration in the short-time ball, and the contraction and
//! Lipschitz-dependence probes.
//!
//! A state is the triple `(X, tau, v)` on a uniform time grid, with `tau`
//! the Lagrangian stress (symmetric tensor) for the viscoelastic model and
//! the Lagrangian magnetic field (vector) for the ideal-transport one. The
//! gradient convention is fixed once: `g_{kj} = (d u_j / d x_k) o X`,
//! the unique choice consistent with the chain rule
//! `grad_a V = (grad_a X) g`; the magnetic stretching then reads
//! `dB/dt = g^T B` and the transport invariant uses `(grad_a X)^T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, FieldKind};
use crate::flowmap::{ComposeDirection, FlowMap};
use crate::grid::Grid;
use crate::interp::InterpScheme;
use crate::path::{PathField, TimeGrid};
use crate::spaces::{NormEngine, SpaceNorm};
use crate::spectral::{dealiased_product, gradient};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    OldroydB,
    Mhd,
}

impl Model {
    pub fn stress_kind(&self) -> FieldKind {
        match self {
            Model::OldroydB => FieldKind::Tensor { symmetric: true },
            Model::Mhd => FieldKind::Vector,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: Model,
    /// Viscosity.
    pub nu: f64,
    /// Stress relaxation rate (viscoelastic model only).
    pub k_relax: f64,
    /// Stress forcing coupling (viscoelastic model only).
    pub rho_k: f64,
    pub alpha: f64,
    pub p: f64,
    pub t_end: f64,
    pub n_t: usize,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::Config(format!("nu must be positive, got {}", self.nu)));
        }
        if self.k_relax < 0.0 || self.rho_k < 0.0 {
            return Err(Error::Config("k and rho K must be nonnegative".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("alpha must be in (0,1)".into()));
        }
        TimeGrid::new(self.t_end, self.n_t)?;
        Ok(())
    }

    pub fn times(&self) -> TimeGrid {
        TimeGrid {
            t_end: self.t_end,
            steps: self.n_t,
        }
    }

    pub fn with_horizon(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Ball radius; `None` applies the selection rule
    /// `4 max(||u0||_{1+alpha,p}, ||sigma0||_{alpha,p}, 1)`.
    pub ball_radius: Option<f64>,
    pub max_iters: usize,
    /// Convergence tolerance in the path-space norm.
    pub tol: f64,
    pub interp: InterpScheme,
    /// Dealias the quadratic solver products (outer products, stress
    /// algebra) by 3/2 zero padding.
    pub dealias: bool,
    /// Probe hook: drop the stress feedback into the velocity and gradient
    /// so the stress equation evolves under a frozen flow.
    pub skip_stress_coupling: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            ball_radius: None,
            max_iters: 48,
            tol: 1e-9,
            interp: InterpScheme::Spline,
            dealias: true,
            skip_stress_coupling: false,
        }
    }
}

/// The state triple `(X, tau, v)`.
pub struct PathState {
    pub flow: FlowMap,
    pub tau: PathField,
    pub vel: PathField,
}

impl PathState {
    pub fn new(flow: FlowMap, tau: PathField, vel: PathField) -> Result<Self> {
        if tau.times() != flow.times() || vel.times() != flow.times() {
            return Err(Error::Config("state components on different time grids".into()));
        }
        if vel.kind() != FieldKind::Vector {
            return Err(Error::Config("velocity path must be a vector path".into()));
        }
        Ok(PathState { flow, tau, vel })
    }

    pub fn grid(&self) -> Grid {
        self.flow.grid()
    }

    pub fn times(&self) -> TimeGrid {
        self.flow.times()
    }

    /// Max deviation from the trapezoid-consistent velocity relation
    /// `(X_i - X_{i-1})/dt = (v_i + v_{i-1})/2`.
    pub fn velocity_consistency(&self) -> f64 {
        let dt = self.times().dt();
        let disp = self.flow.displacement_path();
        let mut worst: f64 = 0.0;
        for i in 1..disp.samples() {
            let mut diff = disp.sample(i).sub(disp.sample(i - 1));
            diff.scale(1.0 / dt);
            diff.add_scaled(self.vel.sample(i), -0.5);
            diff.add_scaled(self.vel.sample(i - 1), -0.5);
            worst = worst.max(diff.max_abs());
        }
        worst
    }

    /// Max symmetry defect of the stress over the path (zero for vector
    /// stresses).
    pub fn stress_symmetry_defect(&self) -> f64 {
        self.tau
            .iter()
            .map(|f| f.symmetry_defect())
            .fold(0.0, f64::max)
    }

    /// Path-space norm
    /// `||X - Id||_{Lip C^{1+a,p}} + ||tau||_{Lip C^{a,p}} + ||v||_{L^inf C^{1+a,p}}`.
    pub fn p1_norm(&self, engine: &NormEngine) -> Result<f64> {
        let x = self
            .flow
            .displacement_path()
            .path_norms(engine, SpaceNorm::C1AlphaP)?
            .lip_or_err()?;
        let tau = self.tau.path_norms(engine, SpaceNorm::CAlphaP)?.lip_or_err()?;
        let v = self.vel.sup_norm(engine, SpaceNorm::C1AlphaP)?;
        Ok(x + tau + v)
    }

    /// Eulerian velocity at one sample, `u = v o X^{-1}`.
    pub fn eulerian_velocity(&self, t_index: usize) -> Result<Field> {
        self.flow
            .compose(self.vel.sample(t_index), t_index, ComposeDirection::Inverse)
    }
}

/// Componentwise path-space distance between states.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct P1Distance {
    pub dx_lip: f64,
    pub dtau_lip: f64,
    pub dv_sup: f64,
    pub total: f64,
}

pub fn p1_distance(a: &PathState, b: &PathState, engine: &NormEngine) -> Result<P1Distance> {
    let dx = a
        .flow
        .displacement_path()
        .sub(b.flow.displacement_path())?;
    let dtau = a.tau.sub(&b.tau)?;
    let dv = a.vel.sub(&b.vel)?;
    let dx_lip = dx.path_norms(engine, SpaceNorm::C1AlphaP)?.lip_or_err()?;
    let dtau_lip = dtau.path_norms(engine, SpaceNorm::CAlphaP)?.lip_or_err()?;
    let dv_sup = dv.sup_norm(engine, SpaceNorm::C1AlphaP)?;
    Ok(P1Distance {
        dx_lip,
        dtau_lip,
        dv_sup,
        total: dx_lip + dtau_lip + dv_sup,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub dx_lip: f64,
    pub dtau_lip: f64,
    pub dv_sup: f64,
    pub p1_distance: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

impl IterationTrace {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,dx_lip,dtau_lip,dv_sup,p1_distance,ratio")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                r.iter,
                r.dx_lip,
                r.dtau_lip,
                r.dv_sup,
                r.p1_distance,
                r.ratio.map(|x| format!("{x:.6}")).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// Pointwise matrix product of two tensor fields (`out = a b`), dealiased
/// when requested.
fn tensor_matmul(a: &Field, b: &Field, dealias: bool) -> Result<Field> {
    let d = a.grid().d();
    let kind = FieldKind::Tensor { symmetric: false };
    if dealias {
        dealiased_product(a, b, kind, |ta, tb, o| {
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for m in 0..d {
                        s += ta[i * d + m] * tb[m * d + j];
                    }
                    o[i * d + j] = s;
                }
            }
        })
    } else {
        let mut out = Field::zeros(a.grid(), kind);
        let npts = a.grid().points();
        for i in 0..d {
            for j in 0..d {
                let oc = out.comp_mut(i * d + j);
                for m in 0..d {
                    let ac = a.comp(i * d + m);
                    let bc = b.comp(m * d + j);
                    for p in 0..npts {
                        oc[p] += ac[p] * bc[p];
                    }
                }
            }
        }
        Ok(out)
    }
}

fn outer_product(a: &Field, b: &Field, dealias: bool) -> Result<Field> {
    let d = a.grid().d();
    let kind = FieldKind::Tensor {
        symmetric: std::ptr::eq(a, b),
    };
    if dealias {
        dealiased_product(a, b, kind, |va, vb, o| {
            for i in 0..d {
                for j in 0..d {
                    o[i * d + j] = va[i] * vb[j];
                }
            }
        })
    } else {
        let mut out = Field::zeros(a.grid(), kind);
        let npts = a.grid().points();
        for i in 0..d {
            for j in 0..d {
                let oc = out.comp_mut(i * d + j);
                let ac = a.comp(i);
                let bc = b.comp(j);
                for p in 0..npts {
                    oc[p] = ac[p] * bc[p];
                }
            }
        }
        Ok(out)
    }
}

fn transpose(a: &Field) -> Field {
    let d = a.grid().d();
    let mut out = Field::zeros(a.grid(), a.kind());
    for i in 0..d {
        for j in 0..d {
            out.comp_mut(i * d + j).copy_from_slice(a.tensor_comp(j, i));
        }
    }
    out
}

/// `g^T B` pointwise: `out_j = sum_k g_{kj} B_k`.
fn grad_transpose_times(g: &Field, b: &Field, dealias: bool) -> Result<Field> {
    let d = g.grid().d();
    if dealias {
        dealiased_product(g, b, FieldKind::Vector, |tg, vb, o| {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += tg[k * d + j] * vb[k];
                }
                o[j] = s;
            }
        })
    } else {
        let mut out = Field::vector(g.grid());
        let npts = g.grid().points();
        for j in 0..d {
            let oc = out.comp_mut(j);
            for k in 0..d {
                let gc = g.tensor_comp(k, j);
                let bc = b.comp(k);
                for p in 0..npts {
                    oc[p] += gc[p] * bc[p];
                }
            }
        }
        Ok(out)
    }
}

/// Checks the ball invariant `sup |grad d| < 1/2` that inversion rests on.
fn ensure_in_ball(state: &PathState) -> Result<()> {
    let grad_sup = state.flow.grad_sup_all()?;
    if grad_sup >= 0.5 {
        return Err(Error::BallViolation { grad_sup });
    }
    Ok(())
}

/// The Eulerian Duhamel input `(stress - v tensor v) o X^{-1}` per sample
/// (stress replaced by `B tensor B` for the transport model, dropped
/// entirely when the probe hook disables stress coupling).
fn eulerian_forcing(
    state: &PathState,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<PathField> {
    let lagrangian = state.tau.times();
    let forcing = PathField::from_fn(lagrangian, |i, _| {
        let vv = outer_product(state.vel.sample(i), state.vel.sample(i), config.dealias)
            .expect("outer product");
        let mut f = match (params.model, config.skip_stress_coupling) {
            (_, true) => Field::zeros(state.grid(), FieldKind::Tensor { symmetric: true }),
            (Model::OldroydB, false) => state.tau.sample(i).clone(),
            (Model::Mhd, false) => {
                outer_product(state.tau.sample(i), state.tau.sample(i), config.dealias)
                    .expect("outer product")
            }
        };
        // Tensor kinds may differ in symmetry flag; combine raw data.
        let mut out = Field::tensor(state.grid(), false);
        for c in 0..out.ncomp() {
            let fc = f.comp_mut(c);
            let vc = vv.comp(c);
            let oc = out.comp_mut(c);
            for p in 0..oc.len() {
                oc[p] = fc[p] - vc[p];
            }
        }
        out
    })?;
    state.flow.compose_path(&forcing, ComposeDirection::Inverse)
}

/// The Lagrangian velocity `V = L_nu(u0) o X + U(forcing) o X` at every
/// sample.
pub fn nonlinearity_v(
    state: &PathState,
    u0: &Field,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<PathField> {
    ensure_in_ball(state)?;
    let forcing = eulerian_forcing(state, params, config)?;
    let u_duhamel = crate::operators::duhamel_u_path(&forcing, params.nu)?;
    let heat = crate::operators::heat_path(u0, params.nu, state.times())?;
    let times = state.times();
    PathField::from_fn(times, |i, _| {
        let mut eulerian = heat.sample(i).clone();
        eulerian.add_scaled(u_duhamel.sample(i), 1.0);
        state
            .flow
            .compose(&eulerian, i, ComposeDirection::Forward)
            .expect("compose")
    })
}

/// The Lagrangian velocity gradient
/// `g = L_nu(grad u0) o X + G(forcing) o X` at every sample, with
/// `g_{kj} = (d u_j / d x_k) o X`.
pub fn lagrangian_g(
    state: &PathState,
    u0: &Field,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<PathField> {
    ensure_in_ball(state)?;
    let forcing = eulerian_forcing(state, params, config)?;
    let g_duhamel = crate::operators::duhamel_g_path(&forcing, params.nu)?;
    let grad_u0 = gradient(u0)?;
    let heat = crate::operators::heat_path(&grad_u0, params.nu, state.times())?;
    let times = state.times();
    PathField::from_fn(times, |i, _| {
        let mut eulerian = heat.sample(i).clone();
        eulerian.add_scaled(g_duhamel.sample(i), 1.0);
        state
            .flow
            .compose(&eulerian, i, ComposeDirection::Forward)
            .expect("compose")
    })
}

/// The stress update field at one sample:
/// `g tau + tau g^T - 2k tau + 2 rho K (g + g^T)` for the viscoelastic
/// model, `g^T B` for the transport model.
pub fn nonlinearity_t(
    tau_sample: &Field,
    g_sample: &Field,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<Field> {
    match params.model {
        Model::OldroydB => {
            if !matches!(tau_sample.kind(), FieldKind::Tensor { .. }) {
                return Err(Error::Config("viscoelastic stress must be a tensor".into()));
            }
            let s = tensor_matmul(g_sample, tau_sample, config.dealias)?;
            let mut out = s.clone();
            out.add_scaled(&transpose(&s), 1.0);
            out.add_scaled(tau_sample, -2.0 * params.k_relax);
            out.add_scaled(g_sample, 2.0 * params.rho_k);
            out.add_scaled(&transpose(g_sample), 2.0 * params.rho_k);
            Ok(out)
        }
        Model::Mhd => {
            if tau_sample.kind() != FieldKind::Vector {
                return Err(Error::Config("magnetic stress must be a vector".into()));
            }
            grad_transpose_times(g_sample, tau_sample, config.dealias)
        }
    }
}

/// One application of the solution map:
/// `X_new = Id + int V`, `tau_new = sigma0 + int T`, `v_new = V`
/// (trapezoid in time), so `v = dX/dt` holds by construction.
pub fn fixed_point_map(
    state: &PathState,
    u0: &Field,
    sigma0: &Field,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<PathState> {
    ensure_in_ball(state)?;
    let forcing = eulerian_forcing(state, params, config)?;
    let u_duhamel = crate::operators::duhamel_u_path(&forcing, params.nu)?;
    let g_duhamel = crate::operators::duhamel_g_path(&forcing, params.nu)?;
    let heat_u = crate::operators::heat_path(u0, params.nu, state.times())?;
    let grad_u0 = gradient(u0)?;
    let heat_g = crate::operators::heat_path(&grad_u0, params.nu, state.times())?;
    let times = state.times();

    let v_path = PathField::from_fn(times, |i, _| {
        let mut eulerian = heat_u.sample(i).clone();
        eulerian.add_scaled(u_duhamel.sample(i), 1.0);
        state
            .flow
            .compose(&eulerian, i, ComposeDirection::Forward)
            .expect("compose")
    })?;
    let g_path = PathField::from_fn(times, |i, _| {
        let mut eulerian = heat_g.sample(i).clone();
        eulerian.add_scaled(g_duhamel.sample(i), 1.0);
        state
            .flow
            .compose(&eulerian, i, ComposeDirection::Forward)
            .expect("compose")
    })?;

    let t_path = PathField::from_fn(times, |i, _| {
        nonlinearity_t(state.tau.sample(i), g_path.sample(i), params, config)
            .expect("stress update")
    })?;

    let new_disp = v_path.integrate_trapezoid();
    let new_flow = FlowMap::new(new_disp, config.interp)?;
    let tau_increment = t_path.integrate_trapezoid();
    let new_tau = tau_increment.map(|_, f| {
        let mut out = f.clone();
        out.add_scaled(sigma0, 1.0);
        Ok(out)
    })?;
    PathState::new(new_flow, new_tau, v_path)
}

/// Initial Picard guess `(Id, sigma0 constant, heat flow of u0)`.
pub fn initial_guess(
    u0: &Field,
    sigma0: &Field,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<PathState> {
    let grid = u0.grid();
    let times = params.times();
    let flow = FlowMap::identity(grid, times, config.interp)?;
    let tau = PathField::constant(sigma0.clone(), times);
    let vel = crate::operators::heat_path(u0, params.nu, times)?;
    PathState::new(flow, tau, vel)
}

/// Picard iteration of the solution map until the path-space distance
/// between successive iterates drops below tolerance. Convergence is
/// declared only when the observed ratio sequence stays below one.
pub fn picard_solve(
    u0: &Field,
    sigma0: &Field,
    params: &ModelParams,
    config: &SolverConfig,
    engine: &NormEngine,
) -> Result<(PathState, IterationTrace)> {
    params.validate()?;
    u0.ensure_finite("u0")?;
    sigma0.ensure_finite("sigma0")?;
    let mut state = initial_guess(u0, sigma0, params, config)?;
    let mut trace = IterationTrace::default();
    let mut last_distance: Option<f64> = None;
    let mut ratios_ok = true;

    for iter in 1..=config.max_iters {
        let next = fixed_point_map(&state, u0, sigma0, params, config)?;
        let dist = p1_distance(&next, &state, engine)?;
        let ratio = last_distance.map(|prev| if prev > 0.0 { dist.total / prev } else { 0.0 });
        if let Some(r) = ratio {
            if dist.total > config.tol && r >= 1.0 {
                ratios_ok = false;
            }
        }
        trace.rows.push(TraceRow {
            iter,
            dx_lip: dist.dx_lip,
            dtau_lip: dist.dtau_lip,
            dv_sup: dist.dv_sup,
            p1_distance: dist.total,
            ratio,
        });
        state = next;
        if dist.total < config.tol && ratios_ok {
            return Ok((state, trace));
        }
        last_distance = Some(dist.total);
    }
    let last = trace.rows.last().map(|r| r.p1_distance).unwrap_or(f64::NAN);
    Err(Error::NonConvergence {
        iters: config.max_iters,
        last_distance: last,
        trace: Box::new(trace),
    })
}

/// Ball radius from the selection rule
/// `4 max(||u0||_{1+alpha,p}, ||sigma0||_{alpha,p}, 1)`.
pub fn default_ball_radius(u0: &Field, sigma0: &Field, engine: &NormEngine) -> Result<f64> {
    let nu0 = engine.c1_norms(u0)?.c1_alpha_p.unwrap();
    let ns0 = engine.c_norms(sigma0)?.c_alpha_p;
    Ok(4.0 * nu0.max(ns0).max(1.0))
}

/// Physical region random states draw their bumps from; pinned against the
/// base box so doubled-box runs build the same functions.
#[derive(Clone, Copy, Debug)]
pub struct DataRegion {
    pub center: [f64; 3],
    pub half_width: f64,
}

impl DataRegion {
    pub fn of_box(l: f64) -> Self {
        DataRegion {
            center: [l / 2.0, l / 2.0, l / 2.0],
            half_width: l / 5.0,
        }
    }
}

/// Seeded sampler of random states inside the ball, pinned to the
/// data-compatible initial values `X(0) = Id`, `tau(0) = sigma0`,
/// `v(0) = u0` (the subset the solution map iterates in). The data-pinned
/// base state and its norm are computed once and shared across samples.
pub struct BallSampler<'a> {
    params: ModelParams,
    config: SolverConfig,
    engine: &'a NormEngine,
    gamma: f64,
    region: DataRegion,
    base: PathState,
    base_norm: f64,
}

impl<'a> BallSampler<'a> {
    pub fn new(
        u0: &Field,
        sigma0: &Field,
        params: &ModelParams,
        config: &SolverConfig,
        engine: &'a NormEngine,
        gamma: f64,
        region: DataRegion,
    ) -> Result<Self> {
        let base = initial_guess(u0, sigma0, params, config)?;
        let base_norm = base.p1_norm(engine)?;
        Ok(BallSampler {
            params: *params,
            config: config.clone(),
            engine,
            gamma,
            region,
            base,
            base_norm,
        })
    }

    pub fn sample(&self, seed: u64, fraction: f64) -> Result<PathState> {
        use crate::analytic::{modulated_bump_path, random_bump_set};
        let grid = self.base.grid();
        let times = self.params.times();
        let d = grid.d();
        let center = self.region.center;
        let region = self.region.half_width;

        let vel_bumps: Vec<Vec<crate::analytic::Bump>> = (0..d)
            .map(|c| random_bump_set(seed * 97 + c as u64, d, 3, center, region, (0.7, 1.1), 1.0))
            .collect();
        let stress_kind = self.params.model.stress_kind();
        let n_stress_sets = match stress_kind {
            FieldKind::Vector => d,
            _ => d * (d + 1) / 2,
        };
        let stress_bumps: Vec<Vec<crate::analytic::Bump>> = (0..n_stress_sets)
            .map(|c| {
                random_bump_set(
                    seed * 131 + 7 + c as u64,
                    d,
                    3,
                    center,
                    region,
                    (0.7, 1.1),
                    1.0,
                )
            })
            .collect();

        let rv = modulated_bump_path(grid, times, FieldKind::Vector, &vel_bumps, seed, true)?;
        let rtau = modulated_bump_path(grid, times, stress_kind, &stress_bumps, seed + 1, true)?;

        // Budget for the random parts on top of the data-pinned base state.
        let rv_norm = rv.path_norms(self.engine, SpaceNorm::C1AlphaP)?.lip_or_err()?
            + rv.sup_norm(self.engine, SpaceNorm::C1AlphaP)?;
        let rtau_norm = rtau.path_norms(self.engine, SpaceNorm::CAlphaP)?.lip_or_err()?;
        let budget = (fraction * self.gamma - self.base_norm).max(0.0);
        let mut scale = if rv_norm + rtau_norm > 0.0 {
            (budget / (2.0 * (rv_norm + rtau_norm))).min(1.0)
        } else {
            0.0
        };

        loop {
            let vel = self.base.vel.add_scaled(&rv, scale)?;
            let flow = FlowMap::from_velocity_path(&vel, self.config.interp)?;
            let tau = self.base.tau.add_scaled(&rtau, scale)?;
            let state = PathState::new(flow, tau, vel)?;
            if state.flow.grad_sup_all()? < 0.45 || scale == 0.0 {
                return Ok(state);
            }
            scale *= 0.5;
        }
    }
}

/// One-shot convenience wrapper around [`BallSampler`].
#[allow(clippy::too_many_arguments)]
pub fn random_ball_state(
    u0: &Field,
    sigma0: &Field,
    params: &ModelParams,
    config: &SolverConfig,
    engine: &NormEngine,
    gamma: f64,
    seed: u64,
    fraction: f64,
    region_spec: DataRegion,
) -> Result<PathState> {
    BallSampler::new(u0, sigma0, params, config, engine, gamma, region_spec)?
        .sample(seed, fraction)
}

/// Result of a contraction probe at one horizon.
#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub t_end: f64,
    pub gamma: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Measures `||S P2 - S P1|| / ||P2 - P1||` over seeded random ball pairs
/// (identical pairs are excluded by construction).
#[allow(clippy::too_many_arguments)]
pub fn contraction_probe(
    u0: &Field,
    sigma0: &Field,
    params: &ModelParams,
    config: &SolverConfig,
    engine: &NormEngine,
    gamma: f64,
    trials: usize,
    seed: u64,
    region: DataRegion,
) -> Result<ContractionReport> {
    let sampler = BallSampler::new(u0, sigma0, params, config, engine, gamma, region)?;
    let mut ratios = Vec::new();
    for trial in 0..trials {
        let p1 = sampler.sample(seed + 2 * trial as u64, 0.8)?;
        let p2 = sampler.sample(seed + 2 * trial as u64 + 1, 0.6)?;
        let denom = p1_distance(&p2, &p1, engine)?.total;
        if denom <= 1e-14 {
            continue; // zero-denominator guard
        }
        let s1 = fixed_point_map(&p1, u0, sigma0, params, config)?;
        let s2 = fixed_point_map(&p2, u0, sigma0, params, config)?;
        let numer = p1_distance(&s2, &s1, engine)?.total;
        ratios.push(numer / denom);
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ContractionReport {
        t_end: params.t_end,
        gamma,
        ratios,
        max_ratio,
    })
}

/// Executable `(Gamma, T)` search: the radius comes from the selection rule
/// and the horizon is halved until the map sends random ball states into
/// the ball and the probe contracts with margin.
pub struct BallSearch {
    pub gamma: f64,
    pub t_end: f64,
    pub halvings: usize,
    pub final_max_ratio: f64,
}

pub fn select_gamma_t(
    u0: &Field,
    sigma0: &Field,
    params: &ModelParams,
    config: &SolverConfig,
    engine: &NormEngine,
    seed: u64,
    region: DataRegion,
) -> Result<BallSearch> {
    let gamma = match config.ball_radius {
        Some(g) => g,
        None => default_ball_radius(u0, sigma0, engine)?,
    };
    let mut t_end = params.t_end;
    const MAX_HALVINGS: usize = 8;
    for halvings in 0..=MAX_HALVINGS {
        let p = params.with_horizon(t_end);
        let sampler = BallSampler::new(u0, sigma0, &p, config, engine, gamma, region)?;
        let mut all_in_ball = true;
        for i in 0..10 {
            let state = sampler.sample(seed + 100 + i, 0.5 + 0.04 * i as f64)?;
            let image = fixed_point_map(&state, u0, sigma0, &p, config)?;
            if image.p1_norm(engine)? > gamma {
                all_in_ball = false;
                break;
            }
        }
        if all_in_ball {
            let probe =
                contraction_probe(u0, sigma0, &p, config, engine, gamma, 5, seed + 500, region)?;
            if probe.max_ratio <= 0.45 {
                return Ok(BallSearch {
                    gamma,
                    t_end,
                    halvings,
                    final_max_ratio: probe.max_ratio,
                });
            }
        }
        t_end /= 2.0;
    }
    Err(Error::Probe(format!(
        "ball/contraction search did not terminate above T = {t_end:.3e}"
    )))
}

/// Lipschitz-dependence probe: solves two data sets at a shared horizon and
/// reports the solution-distance to data-distance ratio.
#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub data_distance: f64,
    pub dx_lip: f64,
    pub dtau_lip: f64,
    pub dv_sup: f64,
    pub solution_distance: f64,
    pub ratio: f64,
}

pub fn lipschitz_probe(
    u0_pair: (&Field, &Field),
    sigma0_pair: (&Field, &Field),
    params: &ModelParams,
    config: &SolverConfig,
    engine: &NormEngine,
) -> Result<LipschitzReport> {
    let (s1, _) = picard_solve(u0_pair.0, sigma0_pair.0, params, config, engine)
        .map_err(|e| Error::Probe(format!("first solve failed: {e}")))?;
    let (s2, _) = picard_solve(u0_pair.1, sigma0_pair.1, params, config, engine)
        .map_err(|e| Error::Probe(format!("second solve failed: {e}")))?;
    let dist = p1_distance(&s2, &s1, engine)?;
    let du = engine
        .c1_norms(&u0_pair.1.sub(u0_pair.0))?
        .c1_alpha_p
        .unwrap();
    let dsigma = engine.c_norms(&sigma0_pair.1.sub(sigma0_pair.0))?.c_alpha_p;
    let data_distance = du + dsigma;
    Ok(LipschitzReport {
        data_distance,
        dx_lip: dist.dx_lip,
        dtau_lip: dist.dtau_lip,
        dv_sup: dist.dv_sup,
        solution_distance: dist.total,
        ratio: if data_distance > 0.0 {
            dist.total / data_distance
        } else {
            0.0
        },
    })
}

/// Transport invariant for the ideal magnetic model:
/// `max_i ||B(t_i) - (grad_a X(t_i))^T b0||_inf / ||b0||_inf`.
pub fn cauchy_invariant_error(state: &PathState, b0: &Field) -> Result<f64> {
    let d = state.grid().d();
    let b0_sup = b0.max_abs().max(1e-300);
    let mut worst: f64 = 0.0;
    for i in 0..state.times().samples() {
        let grad_d = gradient(state.flow.displacement(i))?;
        let b = state.tau.sample(i);
        let npts = state.grid().points();
        let err = crate::par::max_indexed(npts, |p| {
            let mut worst_comp: f64 = 0.0;
            for j in 0..d {
                // (I + grad d)^T b0, component j: sum_k (delta_kj + d_k d_j) b0_k
                let mut s = b0.comp(j)[p];
                for k in 0..d {
                    s += grad_d.comp(k * d + j)[p] * b0.comp(k)[p];
                }
                worst_comp = worst_comp.max((b.comp(j)[p] - s).abs());
            }
            worst_comp
        });
        worst = worst.max(err);
    }
    Ok(worst / b0_sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{random_bump_set, stream_velocity, symmetric_tensor_bumps};
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(2, 32, 2.0 * PI).unwrap()
    }

    fn engine(g: Grid) -> NormEngine {
        NormEngine::new(g, 0.5, 2.0, 42).unwrap()
    }

    fn params(model: Model) -> ModelParams {
        ModelParams {
            model,
            nu: 1.0,
            k_relax: 1.0,
            rho_k: 0.1,
            alpha: 0.5,
            p: 2.0,
            t_end: 0.2,
            n_t: 8,
        }
    }

    fn small_data(g: Grid) -> (Field, Field) {
        let pots = random_bump_set(5, 2, 3, [PI, PI, 0.0], g.l() / 5.0, (0.8, 1.2), 0.25);
        let u0 = stream_velocity(g, &[pots]).unwrap();
        let comps: Vec<Vec<crate::analytic::Bump>> = (0..3)
            .map(|k| random_bump_set(50 + k, 2, 2, [PI, PI, 0.0], g.l() / 5.0, (0.8, 1.2), 0.15))
            .collect();
        let sigma0 = symmetric_tensor_bumps(g, &comps).unwrap();
        (u0, sigma0)
    }

    #[test]
    fn zero_data_converges_in_one_iteration() {
        let g = grid();
        let e = engine(g);
        let p = params(Model::OldroydB);
        let cfg = SolverConfig::default();
        let u0 = Field::vector(g);
        let sigma0 = Field::tensor(g, true);
        let (state, trace) = picard_solve(&u0, &sigma0, &p, &cfg, &e).unwrap();
        assert_eq!(trace.rows.len(), 1);
        assert!(state.flow.displacement(4).max_abs() < 1e-14);
        assert!(state.tau.sample(4).max_abs() < 1e-14);
        assert!(state.vel.sample(4).max_abs() < 1e-14);
    }

    #[test]
    fn decoupled_stress_stays_zero() {
        // sigma0 = 0, k = 0, rho K = 0: tau_new = 0 for any state.
        let g = grid();
        let e = engine(g);
        let mut p = params(Model::OldroydB);
        p.k_relax = 0.0;
        p.rho_k = 0.0;
        let cfg = SolverConfig::default();
        let (u0, _) = small_data(g);
        let sigma0 = Field::tensor(g, true);
        let state = initial_guess(&u0, &sigma0, &p, &cfg).unwrap();
        let next = fixed_point_map(&state, &u0, &sigma0, &p, &cfg).unwrap();
        assert!(next.tau.sample(p.n_t).max_abs() < 1e-14);
        let _ = e;
    }

    #[test]
    fn relaxation_only_reproduces_exponential_decay() {
        // u0 = 0, sigma0 = c Id, rho K = 0: tau(t) = c exp(-2 k t) Id.
        let g = grid();
        let e = engine(g);
        let p = ModelParams {
            model: Model::OldroydB,
            nu: 1.0,
            k_relax: 1.0,
            rho_k: 0.0,
            alpha: 0.5,
            p: 2.0,
            t_end: 0.1,
            n_t: 32,
        };
        let cfg = SolverConfig {
            tol: 1e-12,
            ..Default::default()
        };
        let u0 = Field::vector(g);
        let c = 0.8;
        let sigma0 = Field::from_fn(g, FieldKind::Tensor { symmetric: true }, |comp, _| {
            if comp == 0 || comp == 3 {
                c
            } else {
                0.0
            }
        });
        let (state, trace) = picard_solve(&u0, &sigma0, &p, &cfg, &e).unwrap();
        // Geometric convergence with ratio well below 1/2.
        for r in trace.ratios() {
            assert!(r <= 0.5, "ratio {r}");
        }
        let times = p.times();
        for i in 0..times.samples() {
            let expect = c * (-2.0 * p.k_relax * times.time(i)).exp();
            let tau_i = state.tau.sample(i);
            for comp in [0usize, 3] {
                let got = tau_i.comp(comp)[5];
                assert!(
                    (got - expect).abs() <= 1e-6 * c,
                    "i={i} comp={comp}: {got} vs {expect}"
                );
            }
            assert!(tau_i.comp(1).iter().all(|v| v.abs() < 1e-12));
        }
        assert!(state.flow.displacement(times.steps).max_abs() < 1e-12);
    }

    #[test]
    fn solution_map_preserves_velocity_consistency_and_symmetry() {
        let g = grid();
        let e = engine(g);
        let p = params(Model::OldroydB);
        let cfg = SolverConfig::default();
        let (u0, sigma0) = small_data(g);
        let state = initial_guess(&u0, &sigma0, &p, &cfg).unwrap();
        let next = fixed_point_map(&state, &u0, &sigma0, &p, &cfg).unwrap();
        assert!(next.velocity_consistency() < 1e-8, "{}", next.velocity_consistency());
        assert!(next.stress_symmetry_defect() < 1e-12 * next.tau.sample(0).max_abs().max(1e-300));
        // t = 0: V = u0 exactly (empty Duhamel, heat at t=0).
        let v0 = next.vel.sample(0);
        assert!(v0.sub(&u0).max_abs() <= 1e-9 * u0.max_abs());
        let _ = e;
    }

    #[test]
    fn lagrangian_g_reduces_to_heat_flow_for_trivial_state() {
        // tau = 0, v = 0, X = Id: g = L_nu(grad u0).
        let g = grid();
        let p = params(Model::OldroydB);
        let cfg = SolverConfig::default();
        let (u0, _) = small_data(g);
        let state = PathState::new(
            FlowMap::identity(g, p.times(), cfg.interp).unwrap(),
            PathField::zeros(g, FieldKind::Tensor { symmetric: true }, p.times()),
            PathField::zeros(g, FieldKind::Vector, p.times()),
        )
        .unwrap();
        let g_path = lagrangian_g(&state, &u0, &p, &cfg).unwrap();
        let grad_u0 = gradient(&u0).unwrap();
        let heat = crate::operators::heat_path(&grad_u0, p.nu, p.times()).unwrap();
        for i in 0..p.times().samples() {
            let err = g_path.sample(i).sub(heat.sample(i)).max_abs();
            assert!(err <= 1e-10 * grad_u0.max_abs(), "i={i} err={err}");
        }
    }

    #[test]
    fn chain_rule_grad_v_equals_grad_x_times_g() {
        let g = grid();
        let e = engine(g);
        let p = params(Model::OldroydB);
        let cfg = SolverConfig {
            interp: InterpScheme::Trig,
            ..Default::default()
        };
        let (u0, sigma0) = small_data(g);
        let gamma = default_ball_radius(&u0, &sigma0, &e).unwrap();
        let state = random_ball_state(
            &u0,
            &sigma0,
            &p,
            &cfg,
            &e,
            gamma,
            9,
            0.5,
            DataRegion::of_box(g.l()),
        )
        .unwrap();
        let v_path = nonlinearity_v(&state, &u0, &p, &cfg).unwrap();
        let g_path = lagrangian_g(&state, &u0, &p, &cfg).unwrap();
        let i = p.n_t;
        let grad_v = gradient(v_path.sample(i)).unwrap();
        let grad_x_g = {
            let grad_d = gradient(state.flow.displacement(i)).unwrap();
            let mut jac = grad_d.clone();
            let d = g.d();
            let npts = g.points();
            for k in 0..d {
                let comp = jac.comp_mut(k * d + k);
                for p in 0..npts {
                    comp[p] += 1.0;
                }
            }
            tensor_matmul(&jac, g_path.sample(i), true).unwrap()
        };
        let scale = grad_v.max_abs().max(1e-300);
        let rel = grad_v.sub(&grad_x_g).max_abs() / scale;
        assert!(rel <= 1e-5, "chain rule relative error {rel}");
    }

    #[test]
    fn mhd_stretching_matches_matrix_exponential() {
        // Constant g corresponding to the linear velocity u = A x with A
        // symmetric traceless: B(t) = exp(A t) b0 pointwise.
        let g = grid();
        let p = ModelParams {
            model: Model::Mhd,
            nu: 1.0,
            k_relax: 0.0,
            rho_k: 0.0,
            alpha: 0.5,
            p: 2.0,
            t_end: 0.5,
            n_t: 256,
        };
        let cfg = SolverConfig::default();
        let a = [[0.3, 0.1], [0.1, -0.3]];
        // g_{kj} = d_k u_j = A_{jk}
        let g_field = Field::from_fn(g, FieldKind::Tensor { symmetric: false }, |c, _| {
            let k = c / 2;
            let j = c % 2;
            a[j][k]
        });
        let b0 = Field::from_fn(g, FieldKind::Vector, |c, x| {
            let s = (x[0]).sin() * (x[1]).cos();
            if c == 0 {
                0.5 + 0.1 * s
            } else {
                -0.2 + 0.05 * s
            }
        });
        // Integrate dB/dt = g^T B with the same trapezoid scheme the
        // solution map uses (implicit trapezoid via fixed point per step).
        let times = p.times();
        let dt = times.dt();
        let mut b = b0.clone();
        let mut samples = vec![b.clone()];
        for _ in 0..times.steps {
            let rhs_old = nonlinearity_t(&b, &g_field, &p, &cfg).unwrap();
            let mut b_new = b.clone();
            for _ in 0..40 {
                let rhs_new = nonlinearity_t(&b_new, &g_field, &p, &cfg).unwrap();
                let mut candidate = b.clone();
                candidate.add_scaled(&rhs_old, dt / 2.0);
                candidate.add_scaled(&rhs_new, dt / 2.0);
                let delta = candidate.sub(&b_new).max_abs();
                b_new = candidate;
                if delta < 1e-14 {
                    break;
                }
            }
            b = b_new;
            samples.push(b.clone());
        }
        // exp(A t) for symmetric traceless A: closed form via eigenvalues.
        let lam = (a[0][0] * a[0][0] + a[0][1] * a[0][1]).sqrt();
        let t = times.t_end;
        let (ch, sh) = ((lam * t).cosh(), (lam * t).sinh());
        let exp_at = [
            [ch + sh * a[0][0] / lam, sh * a[0][1] / lam],
            [sh * a[1][0] / lam, ch + sh * a[1][1] / lam],
        ];
        let last = samples.last().unwrap();
        let npts = g.points();
        let mut worst: f64 = 0.0;
        for pnt in 0..npts {
            for j in 0..2 {
                let expect =
                    exp_at[j][0] * b0.comp(0)[pnt] + exp_at[j][1] * b0.comp(1)[pnt];
                worst = worst.max((last.comp(j)[pnt] - expect).abs());
            }
        }
        assert!(worst <= 1e-6, "matrix exponential error {worst}");
    }

    #[test]
    fn picard_on_small_data_contracts_geometrically() {
        let g = grid();
        let e = engine(g);
        let p = params(Model::OldroydB);
        let cfg = SolverConfig::default();
        let (u0, sigma0) = small_data(g);
        let (state, trace) = picard_solve(&u0, &sigma0, &p, &cfg, &e).unwrap();
        assert!(trace.rows.len() >= 2);
        for r in trace.ratios() {
            assert!(r <= 0.5, "ratio {r} (trace {:?})", trace.ratios());
        }
        assert!(state.velocity_consistency() < 1e-8);
        // Volume defect of the converged map stays small.
        assert!(state.flow.volume_defect_all().unwrap() <= 1e-3);
    }

    #[test]
    fn ball_violation_is_reported() {
        let g = grid();
        let p = params(Model::OldroydB);
        let cfg = SolverConfig::default();
        let (u0, sigma0) = small_data(g);
        // Displacement with a huge gradient.
        let times = p.times();
        let disp = PathField::from_fn(times, |_, t| {
            Field::from_fn(g, FieldKind::Vector, |c, x| {
                if c == 0 {
                    (4.0 * t).max(0.6) * (x[0]).sin()
                } else {
                    0.0
                }
            })
        })
        .unwrap();
        let flow = FlowMap::new(disp, cfg.interp).unwrap();
        let state = PathState::new(
            flow,
            PathField::zeros(g, FieldKind::Tensor { symmetric: true }, times),
            PathField::zeros(g, FieldKind::Vector, times),
        )
        .unwrap();
        assert!(matches!(
            fixed_point_map(&state, &u0, &sigma0, &p, &cfg),
            Err(Error::BallViolation { .. })
        ));
    }

    #[test]
    fn stress_model_shape_mismatch_is_config_error() {
        let g = grid();
        let p = params(Model::Mhd);
        let cfg = SolverConfig::default();
        let tau = Field::tensor(g, true);
        let gf = Field::tensor(g, false);
        assert!(matches!(
            nonlinearity_t(&tau, &gf, &p, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pure_relaxation_and_pure_forcing_terms() {
        let g = grid();
        let p = params(Model::OldroydB);
        let cfg = SolverConfig::default();
        let (_, sigma0) = small_data(g);
        // g = 0: T = -2k tau.
        let zero_g = Field::tensor(g, false);
        let t1 = nonlinearity_t(&sigma0, &zero_g, &p, &cfg).unwrap();
        let expect = sigma0.scaled(-2.0 * p.k_relax);
        assert!(t1.sub(&expect).max_abs() < 1e-13);
        // tau = 0: T = 2 rho K (g + g^T).
        let gf = gradient(&small_data(g).0).unwrap();
        let zero_tau = Field::tensor(g, true);
        let t2 = nonlinearity_t(&zero_tau, &gf, &p, &cfg).unwrap();
        let mut expect2 = gf.clone();
        expect2.add_scaled(&transpose(&gf), 1.0);
        expect2.scale(2.0 * p.rho_k);
        assert!(t2.sub(&expect2).max_abs() < 1e-13);
    }
}
