//! Manifest-driven experiments: one runner per CLI subcommand, each
//! returning bound audits plus the box-comparable measured scalars used by
//! the box-doubling robustness run.
//!
//! Every runner pins its data families and far-pair sampling region against
//! a *base* box, so rerunning on a doubled box (same spacing) evaluates the
//! same functions and the measured norms can be compared one to one.

use crate::analytic::{modulated_bump_path, random_bump_set, Bump};
use crate::audit::BoundAudit;
use crate::calibration;
use crate::commutators::{
    commutator_g, commutator_u, cz_commutator, variation_identity_stress,
    variation_identity_velocity, CommutatorForm, CzSymbol,
};
use crate::error::{Error, Result};
use crate::field::{Field, FieldKind};
use crate::flowmap::{
    audit_composition_bounds, displacement_lip_c1alpha, ComposeDirection, FlowMap,
};
use crate::grid::Grid;
use crate::kernels::{self, TranslationFlow};
use crate::manifest::*;
use crate::operators;
use crate::path::{PathField, TimeGrid};
use crate::quadrature::QuadConfig;
use crate::solver::{self, DataRegion, Model, SolverConfig};
use crate::spaces::{m_x, HolderParams, NormEngine, SpaceNorm};

#[derive(Clone, Debug, Default)]
pub struct HarnessReport {
    pub audits: Vec<BoundAudit>,
    /// Measured quantities stable under box doubling, for criterion-style
    /// robustness comparisons.
    pub scalars: Vec<(String, f64)>,
}

impl HarnessReport {
    pub fn all_passed(&self) -> bool {
        self.audits.iter().all(|a| a.passed())
    }

    fn push_scalar(&mut self, name: &str, v: f64) {
        self.scalars.push((name.to_string(), v));
    }

    pub fn merged(mut self, mut other: HarnessReport) -> HarnessReport {
        self.audits.append(&mut other.audits);
        self.scalars.append(&mut other.scalars);
        self
    }
}

/// Norm engine with the far-pair sampling region pinned to the base box.
fn pinned_engine(common: &Common, base: &Common, n: Option<usize>) -> Result<NormEngine> {
    let grid = common.grid_with(n)?;
    let mut params = HolderParams::new(common.alpha, common.p)?;
    params.sample_half_width = Some(base.l / 2.0);
    Ok(NormEngine::with_params(grid, params, common.seed))
}

fn base_region(base: &Common) -> DataRegion {
    DataRegion::of_box(base.l)
}

fn bump_sets(
    base: &Common,
    seed: u64,
    sets: usize,
    count: usize,
    amp: f64,
    width: f64,
) -> Vec<Vec<Bump>> {
    let region = base_region(base);
    (0..sets)
        .map(|k| {
            random_bump_set(
                seed + 1000 * k as u64,
                base.d,
                count,
                region.center,
                region.half_width,
                (0.85 * width, 1.15 * width),
                amp,
            )
        })
        .collect()
}

fn vector_path(
    grid: Grid,
    base: &Common,
    times: TimeGrid,
    seed: u64,
    amp: f64,
    ramp: bool,
) -> Result<PathField> {
    let sets = bump_sets(base, seed, grid.d(), 3, amp, 0.8);
    modulated_bump_path(grid, times, FieldKind::Vector, &sets, seed, ramp)
}

fn tensor_path(
    grid: Grid,
    base: &Common,
    times: TimeGrid,
    seed: u64,
    amp: f64,
    ramp: bool,
) -> Result<PathField> {
    let d = grid.d();
    let sets = bump_sets(base, seed, d * (d + 1) / 2, 3, amp, 0.8);
    modulated_bump_path(
        grid,
        times,
        FieldKind::Tensor { symmetric: true },
        &sets,
        seed,
        ramp,
    )
}

// ---------------------------------------------------------------------------
// Kernel audits (heat-kernel mass, scaling exponents, two-time kernel).
// ---------------------------------------------------------------------------

pub fn run_kernel_audits(common: &Common, section: &KernelsSection) -> Result<HarnessReport> {
    let mut report = HarnessReport::default();
    let d = common.d;
    let cfg = QuadConfig::standard();
    let tight = QuadConfig::tight();

    let mass = kernels::heat_mass_audits(
        d,
        &section.mass_nus,
        &section.mass_ts,
        section.mass_tol,
        &tight,
    )?;
    for a in &mass {
        report.push_scalar(&format!("mass[{:?}]", a.sweep), a.measured);
    }
    report.audits.extend(mass);

    let exponents =
        kernels::kernel_exponent_audits(d, common.nu, &section.exponent_ts, section.exponent_tol, &cfg)?;
    for a in &exponents {
        report.push_scalar(&a.id.clone(), a.measured);
    }
    report.audits.extend(exponents);

    let flow = TranslationFlow { v: section.k_v };
    let disp_bound = (section.k_v[0].powi(2) + section.k_v[1].powi(2) + section.k_v[2].powi(2))
        .sqrt()
        * section.k_t;
    for &nu in &section.k_nus {
        let lip = flow.lip_linf(section.k_t, d);
        let audits = kernels::k_l1_audit(
            nu,
            d,
            section.k_t,
            &section.k_thetas,
            &flow,
            lip,
            disp_bound,
            calibration::K_L1_CONST,
            section.k_exponent_tol,
            &cfg,
        )?;
        for a in &audits {
            if a.exponent.is_some() {
                report.push_scalar(&format!("k_l1_exponent[nu={nu}]"), a.measured);
            }
        }
        report.audits.extend(audits);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Operator audits (identities plus the heat/Duhamel/gradient bounds).
// ---------------------------------------------------------------------------

pub fn run_operator_audits(
    common: &Common,
    section: &OperatorsSection,
    base: &Common,
) -> Result<HarnessReport> {
    let mut report = HarnessReport::default();
    let grid = common.grid_with(section.n)?;
    let engine = pinned_engine(common, base, section.n)?;
    let nu = common.nu;

    // Operator identity G = grad U = Riesz-Hodge of Gamma on random paths.
    let times = TimeGrid::new(0.3, section.n_t)?;
    for trial in 0..section.identity_trials {
        let path = tensor_path(grid, base, times, common.seed + 7 + trial as u64, 0.8, false)?;
        let g_val = operators::duhamel_g(&path, nu, times.steps)?;
        let grad_u = crate::spectral::gradient(&operators::duhamel_u(&path, nu, times.steps)?)?;
        let gamma = operators::gamma_op(&path, nu, times.steps)?;
        let recon = operators::riesz_hodge_from_gamma(&gamma)?;
        let scale = g_val.max_abs().max(1e-300);
        let rel_grad = g_val.sub(&grad_u).max_abs() / scale;
        let rel_gamma = g_val.sub(&recon).max_abs() / scale;
        report.audits.push(
            BoundAudit::ratio_check("operators/identity_grad_u", rel_grad, section.identity_tol, 0.0)
                .with_sweep(&[("trial", trial as f64)]),
        );
        report.audits.push(
            BoundAudit::ratio_check(
                "operators/identity_riesz_hodge",
                rel_gamma,
                section.identity_tol,
                0.0,
            )
            .with_sweep(&[("trial", trial as f64)]),
        );
        if trial == 0 {
            report.push_scalar("identity_g_sup", g_val.max_abs());
        }
    }

    // Heat semigroup bounds.
    let u0_spec = DataSpec::StreamBumps {
        seed: common.seed + 3,
        count: 3,
        amp: 1.0,
        width: 0.8,
        center: None,
        region_half: None,
    }
    .pinned(base.grid()?);
    let u0 = u0_spec.build_velocity(grid)?;
    let u0_c = engine.c_norms(&u0)?;
    let u0_c1 = engine.c1_norms(&u0)?;
    report.push_scalar("u0_c_alpha_p", u0_c.c_alpha_p);
    report.push_scalar("u0_c1_alpha_p", u0_c1.c1_alpha_p.unwrap());
    let slack = calibration::HEAT_CONTRACTION_SLACK;
    for &t in &section.heat_ts {
        let heated = operators::heat_semigroup(&u0, nu, t)?;
        let hc = engine.c_norms(&heated)?;
        let hc1 = engine.c1_norms(&heated)?;
        report.audits.push(
            BoundAudit::ratio_check("operators/heat_c_alpha_p", hc.c_alpha_p, u0_c.c_alpha_p, slack)
                .with_sweep(&[("t", t), ("nu", nu)]),
        );
        report.audits.push(
            BoundAudit::ratio_check(
                "operators/heat_c1_alpha_p",
                hc1.c1_alpha_p.unwrap(),
                u0_c1.c1_alpha_p.unwrap(),
                slack,
            )
            .with_sweep(&[("t", t), ("nu", nu)]),
        );
        let grad_u0 = crate::spectral::gradient(&u0)?;
        let heated_grad = operators::heat_semigroup(&grad_u0, nu, t)?;
        let hg = engine.c_norms(&heated_grad)?;
        report.audits.push(
            BoundAudit::ratio_check(
                "operators/heat_grad_scaled",
                hg.c_alpha_p * (nu * t).sqrt(),
                calibration::HEAT_GRAD_CONST * u0_c.c_alpha_p,
                0.0,
            )
            .with_sweep(&[("t", t), ("nu", nu)]),
        );
        report.audits.push(
            BoundAudit::ratio_check(
                "operators/heat_grad_c1_data",
                hg.c_alpha_p,
                u0_c1.c1_alpha_p.unwrap(),
                slack,
            )
            .with_sweep(&[("t", t), ("nu", nu)]),
        );
        report.push_scalar(&format!("heat_c_alpha_p[t={t}]"), hc.c_alpha_p);
    }

    // Duhamel velocity gain over a two-decade horizon sweep.
    for &t_end in &section.duhamel_ts {
        let times = TimeGrid::new(t_end, section.n_t)?;
        let sigma = tensor_path(grid, base, times, common.seed + 23, 0.8, false)?;
        let u_path = operators::duhamel_u_path(&sigma, nu)?;
        let measured = u_path.sup_norm(&engine, SpaceNorm::CAlphaP)?;
        let sup_sigma = sigma.sup_norm(&engine, SpaceNorm::CAlphaP)?;
        let bound = calibration::DUHAMEL_U_CONST * (t_end / nu).sqrt() * sup_sigma;
        report.audits.push(
            BoundAudit::ratio_check("operators/duhamel_u_gain", measured, bound, 0.0)
                .with_sweep(&[("T", t_end), ("nu", nu)]),
        );
        report.push_scalar(&format!("duhamel_u_sup[T={t_end}]"), measured);
    }

    // Stress-to-gradient bound with a translation map.
    for &t_end in &section.g_ts {
        let times = TimeGrid::new(t_end, section.n_t)?;
        let tau = tensor_path(grid, base, times, common.seed + 29, 0.6, false)?;
        let x = FlowMap::translation(grid, section.translation_v, times, crate::interp::InterpScheme::Trig)?;
        let audit = operators::audit_g_bound(
            &engine,
            &tau,
            &x,
            nu,
            calibration::G_BOUND_C1,
            calibration::G_BOUND_C2,
        )?;
        report.push_scalar(&format!("g_bound_measured[T={t_end}]"), audit.measured);
        report.audits.push(audit);
    }

    Ok(report)
}

// ---------------------------------------------------------------------------
// Flow map composition audits.
// ---------------------------------------------------------------------------

pub fn run_flowmap_audits(
    common: &Common,
    section: &FlowmapSection,
    base: &Common,
) -> Result<HarnessReport> {
    let mut report = HarnessReport::default();
    let grid = common.grid_with(section.n)?;
    let engine = pinned_engine(common, base, section.n)?;
    let times = TimeGrid::new(section.t_end, section.n_t)?;

    let tau = tensor_path(grid, base, times, common.seed + 41, 0.7, false)?;
    let x_prime = vector_path(grid, base, times, common.seed + 43, 0.6, true)?;

    // Translation map.
    let x_trans = FlowMap::translation(
        grid,
        section.translation_v,
        times,
        crate::interp::InterpScheme::Trig,
    )?;
    let audits = audit_composition_bounds(&engine, &x_trans, &x_prime, &tau, section.slack)?;
    for a in &audits {
        report.push_scalar(&format!("translation/{}", a.id), a.measured);
    }
    report
        .audits
        .extend(audits.into_iter().map(|mut a| {
            a.id = format!("translation/{}", a.id);
            a
        }));

    // Solver-produced map.
    let solve = &section.solver_map;
    let params = solve.model_params(common);
    let config = solve.config.to_config();
    let u0 = solve.u0.pinned(base.grid()?).build_velocity(grid)?;
    let sigma0 = solve.sigma0.pinned(base.grid()?).build_stress(grid)?;
    let (state, _) = solver::picard_solve(&u0, &sigma0, &params, &config, &engine)?;
    // Rebuild the map with trig interpolation for the audit compositions.
    let x_solver = FlowMap::new(
        state.flow.displacement_path().clone(),
        crate::interp::InterpScheme::Trig,
    )?;
    let times_sol = x_solver.times();
    let tau_sol = tensor_path(grid, base, times_sol, common.seed + 47, 0.7, false)?;
    let xp_sol = vector_path(grid, base, times_sol, common.seed + 53, 0.6, true)?;
    let audits = audit_composition_bounds(&engine, &x_solver, &xp_sol, &tau_sol, section.slack)?;
    for a in &audits {
        report.push_scalar(&format!("solver/{}", a.id), a.measured);
    }
    report.audits.extend(audits.into_iter().map(|mut a| {
        a.id = format!("solver/{}", a.id);
        a
    }));

    let defect = x_solver.volume_defect_all()?;
    report.audits.push(
        BoundAudit::ratio_check("flowmap/solver_volume_defect", defect, 1e-3, 0.0)
            .with_sweep(&[("T", params.t_end)]),
    );
    report.push_scalar("solver_volume_defect", defect);
    report.push_scalar("solver_m_x", m_x(&engine, &x_solver)?);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Commutator audits (dual forms, CZ bound, velocity-commutator bound,
// variation identities).
// ---------------------------------------------------------------------------

pub fn run_commutator_audits(
    common: &Common,
    section: &CommutatorsSection,
    base: &Common,
) -> Result<HarnessReport> {
    let mut report = HarnessReport::default();
    let grid = common.grid_with(section.n)?;
    let engine = pinned_engine(common, base, section.n)?;
    let nu = common.nu;
    let times = TimeGrid::new(section.t_end, section.n_t)?;

    // Dual-form equivalence for the velocity commutator.
    for trial in 0..section.trials {
        let eta = vector_path(grid, base, times, common.seed + 61 + trial as u64, 0.8, false)?;
        let sigma = tensor_path(grid, base, times, common.seed + 91 + trial as u64, 0.8, false)?;
        let direct = commutator_u(&eta, &sigma, nu, times.steps, CommutatorForm::Direct)?;
        let decomposed = commutator_u(&eta, &sigma, nu, times.steps, CommutatorForm::Decomposed)?;
        let rel = direct.sub(&decomposed).max_abs() / direct.max_abs().max(1e-300);
        report.audits.push(
            BoundAudit::ratio_check("commutators/u_dual_form", rel, section.tol_u, 0.0)
                .with_sweep(&[("trial", trial as f64)]),
        );
        if trial == 0 {
            report.push_scalar("comm_u_direct_sup", direct.max_abs());
        }
    }

    // Dual-form equivalence for the gradient commutator.
    let x = FlowMap::translation(
        grid,
        [0.25, -0.15, 0.0],
        times,
        crate::interp::InterpScheme::Trig,
    )?;
    for trial in 0..section.trials {
        let eta = vector_path(grid, base, times, common.seed + 131 + trial as u64, 0.8, false)?;
        let tau = tensor_path(grid, base, times, common.seed + 161 + trial as u64, 0.8, false)?;
        let direct = commutator_g(&eta, &tau, &x, nu, times.steps, CommutatorForm::Direct)?;
        let decomposed = commutator_g(&eta, &tau, &x, nu, times.steps, CommutatorForm::Decomposed)?;
        let rel = direct.sub(&decomposed).max_abs() / direct.max_abs().max(1e-300);
        report.audits.push(
            BoundAudit::ratio_check("commutators/g_dual_form", rel, section.tol_g, 0.0)
                .with_sweep(&[("trial", trial as f64)]),
        );
        if trial == 0 {
            report.push_scalar("comm_g_direct_sup", direct.max_abs());
        }
    }

    // Calderon-Zygmund commutator bound on random snapshot pairs.
    let mut worst_cz: f64 = 0.0;
    for trial in 0..section.cz_trials {
        let eta = vector_path(grid, base, times, common.seed + 211 + trial as u64, 0.8, false)?;
        let sigma = tensor_path(grid, base, times, common.seed + 271 + trial as u64, 0.8, false)?;
        let eta_f = eta.sample(section.n_t / 2);
        let sigma_f = sigma.sample(section.n_t / 2);
        let symbol = if trial % 2 == 0 {
            CzSymbol::RieszProduct(0, 1)
        } else {
            CzSymbol::RieszProduct(trial % 3 / 2, 1 - trial % 2)
        };
        let comm = cz_commutator(eta_f, symbol, sigma_f)?;
        let measured = engine.c_norms(&comm)?.c_alpha_p;
        let eta_c1 = engine.c1_norms(eta_f)?.c1_alpha.unwrap();
        let sigma_c = engine.c_norms(sigma_f)?.c_alpha_p;
        let bound = calibration::CZ_COMMUTATOR_CONST * eta_c1 * sigma_c;
        worst_cz = worst_cz.max(measured / bound);
        report.audits.push(
            BoundAudit::ratio_check("commutators/cz_bound", measured, bound, 0.0)
                .with_sweep(&[("trial", trial as f64)]),
        );
    }
    report.push_scalar("cz_worst_ratio", worst_cz);

    // Velocity commutator bound over a horizon sweep.
    for &t_end in &section.comm_u_ts {
        let times_t = TimeGrid::new(t_end, section.n_t)?;
        let x_t = FlowMap::translation(
            grid,
            [0.5, -0.35, 0.0],
            times_t,
            crate::interp::InterpScheme::Trig,
        )?;
        let x_prime = vector_path(grid, base, times_t, common.seed + 307, 0.6, true)?;
        let sigma = tensor_path(grid, base, times_t, common.seed + 311, 0.8, false)?;
        let eta = x_t.compose_path(&x_prime, ComposeDirection::Inverse)?;

        let u_sigma = operators::duhamel_u_path(&sigma, nu)?;
        let adv_path = sigma.map(|i, f| crate::commutators::advect(eta.sample(i), f))?;
        let u_adv = operators::duhamel_u_path(&adv_path, nu)?;
        let mut measured: f64 = 0.0;
        for i in 0..times_t.samples() {
            let commut = crate::commutators::advect(eta.sample(i), u_sigma.sample(i))?
                .sub(u_adv.sample(i));
            measured = measured.max(engine.c_norms(&commut)?.c_alpha_p);
        }

        let mx = m_x(&engine, &x_t)?;
        let lip_x = displacement_lip_c1alpha(&engine, &x_t)?;
        let xp_lip = x_prime
            .path_norms(&engine, SpaceNorm::C1Alpha)?
            .lip_or_err()?;
        let sigma_sup = sigma.sup_norm(&engine, SpaceNorm::CAlphaP)?;
        let alpha = engine.alpha();
        let bound = calibration::COMM_U_CONST
            * ((t_end / nu).sqrt() + (t_end / nu) * lip_x)
            * mx.powf(1.0 + 3.0 * alpha)
            * xp_lip
            * sigma_sup;
        report.audits.push(
            BoundAudit::ratio_check("commutators/u_bound", measured, bound, 0.0)
                .with_sweep(&[("T", t_end), ("nu", nu)]),
        );
        report.push_scalar(&format!("comm_u_measured[T={t_end}]"), measured);
    }

    // Variation identities on a smooth base family.
    {
        // Scale the variation grid with the box so doubled runs keep the
        // spacing fixed.
        let factor = common.n / base.n.max(1);
        let vgrid = common.grid_with(Some(section.variation_n * factor.max(1)))?;
        let vengine = {
            let mut params = HolderParams::new(common.alpha, common.p)?;
            params.sample_half_width = Some(base.l / 2.0);
            NormEngine::with_params(vgrid, params, common.seed)
        };
        let _ = &vengine;
        let vtimes = TimeGrid::new(0.25, 6)?;
        let vel = {
            let pots = bump_sets(base, common.seed + 331, 1, 3, 0.5, 0.9);
            PathField::from_fn(vtimes, |_, t| {
                let f = crate::analytic::stream_velocity(vgrid, &pots).expect("stream");
                f.scaled(0.8 + 0.4 * (2.0 * t).sin())
            })?
        };
        let x = FlowMap::from_velocity_path(&vel, crate::interp::InterpScheme::Trig)?;
        let tau = tensor_path(vgrid, base, vtimes, common.seed + 337, 0.6, false)?;
        let x_dir = vector_path(vgrid, base, vtimes, common.seed + 347, 0.25, true)?;
        let tau_dir = tensor_path(vgrid, base, vtimes, common.seed + 349, 0.4, false)?;

        let stress_report = variation_identity_stress(
            &x,
            &tau,
            &x_dir,
            &tau_dir,
            nu,
            vtimes.steps,
            &section.variation_eps,
        )?;
        report.audits.push(stress_report.to_audit(
            "commutators/variation_stress_order",
            section.variation_min_order,
        ));
        report.push_scalar("variation_stress_rhs", stress_report.rhs_scale);

        let v_dir = vector_path(vgrid, base, vtimes, common.seed + 353, 0.25, true)?;
        let velocity_report = variation_identity_velocity(
            &x,
            &vel,
            &x_dir,
            &v_dir,
            nu,
            vtimes.steps,
            &section.variation_eps,
        )?;
        report.audits.push(velocity_report.to_audit(
            "commutators/variation_velocity_order",
            section.variation_min_order,
        ));
        report.push_scalar("variation_velocity_rhs", velocity_report.rhs_scale);

        // Stress-only direction: the identity is linear, central differences
        // are exact up to interpolation.
        let zero_dir = PathField::zeros(vgrid, FieldKind::Vector, vtimes);
        let linear_report = variation_identity_stress(
            &x,
            &tau,
            &zero_dir,
            &tau_dir,
            nu,
            vtimes.steps,
            &[0.1],
        )?;
        let rel = linear_report.errors[0] / linear_report.rhs_scale.max(1e-300);
        report.audits.push(BoundAudit::ratio_check(
            "commutators/variation_tau_linearity",
            rel,
            1e-6,
            0.0,
        ));
    }

    Ok(report)
}

// ---------------------------------------------------------------------------
// Contraction / ball invariance.
// ---------------------------------------------------------------------------

pub fn run_contraction(
    common: &Common,
    section: &ContractionSection,
    base: &Common,
) -> Result<HarnessReport> {
    let mut report = HarnessReport::default();
    let solve = &section.solve;
    let grid = common.grid_with(solve.n)?;
    let engine = pinned_engine(common, base, solve.n)?;
    let region = base_region(base);
    let u0 = solve.u0.pinned(base.grid()?).build_velocity(grid)?;
    let sigma0 = solve.sigma0.pinned(base.grid()?).build_stress(grid)?;
    let params = solve
        .model_params(common)
        .with_horizon(section.search_start_t);
    let config = solve.config.to_config();

    let search = solver::select_gamma_t(&u0, &sigma0, &params, &config, &engine, common.seed, region)?;
    report.audits.push(
        BoundAudit::ratio_check("contraction/search_terminated", search.final_max_ratio, 0.45, 0.0)
            .with_sweep(&[("T", search.t_end), ("gamma", search.gamma)]),
    );
    report.push_scalar("selected_t", search.t_end);
    report.push_scalar("gamma", search.gamma);

    // Ball invariance at the selected horizon with fresh states.
    let p_sel = params.with_horizon(search.t_end);
    let sampler =
        solver::BallSampler::new(&u0, &sigma0, &p_sel, &config, &engine, search.gamma, region)?;
    for i in 0..10u64 {
        let state = sampler.sample(common.seed + 900 + i, 0.45 + 0.05 * (i as f64))?;
        let image = solver::fixed_point_map(&state, &u0, &sigma0, &p_sel, &config)?;
        let norm = image.p1_norm(&engine)?;
        report.audits.push(
            BoundAudit::ratio_check("contraction/ball_invariance", norm, search.gamma, 0.0)
                .with_sweep(&[("state", i as f64)]),
        );
        if i == 0 {
            report.push_scalar("first_image_norm", norm);
        }
    }

    // Contraction ratios at the selected horizon and under halving.
    let mut prev_ratio: Option<f64> = None;
    for level in 0..=section.t_halvings {
        let t = search.t_end / 2f64.powi(level as i32);
        let p = params.with_horizon(t);
        let probe = solver::contraction_probe(
            &u0,
            &sigma0,
            &p,
            &config,
            &engine,
            search.gamma,
            section.trials,
            common.seed + 2000,
            region,
        )?;
        report.audits.push(
            BoundAudit::ratio_check("contraction/max_ratio", probe.max_ratio, 0.5, 0.0)
                .with_sweep(&[("T", t)]),
        );
        report.push_scalar(&format!("contraction_ratio[level={level}]"), probe.max_ratio);
        if let Some(prev) = prev_ratio {
            report.audits.push(
                BoundAudit::ratio_check(
                    "contraction/ratio_decreases_with_t",
                    probe.max_ratio,
                    0.9 * prev,
                    0.0,
                )
                .with_sweep(&[("T", t)]),
            );
        }
        prev_ratio = Some(probe.max_ratio);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Relaxation oracle (decoupled stress ODE).
// ---------------------------------------------------------------------------

pub fn run_relaxation_oracle(common: &Common) -> Result<HarnessReport> {
    let mut report = HarnessReport::default();
    let grid = Grid::new(common.d, 16, common.l)?;
    let engine = NormEngine::new(grid, common.alpha, common.p, common.seed)?;
    let params = solver::ModelParams {
        model: Model::OldroydB,
        nu: common.nu,
        k_relax: 1.0,
        rho_k: 0.0,
        alpha: common.alpha,
        p: common.p,
        t_end: 0.1,
        n_t: 32,
    };
    let config = SolverConfig {
        tol: 1e-12,
        ..Default::default()
    };
    let c = 0.8;
    let u0 = Field::vector(grid);
    let sigma0 = DataSpec::ConstIsotropic { c }.build_stress(grid)?;
    let (state, trace) = solver::picard_solve(&u0, &sigma0, &params, &config, &engine)?;

    let times = params.times();
    let mut worst: f64 = 0.0;
    for i in 0..times.samples() {
        let expect = c * (-2.0 * params.k_relax * times.time(i)).exp();
        let tau = state.tau.sample(i);
        for comp in 0..grid.d() * grid.d() {
            let target = if comp / grid.d() == comp % grid.d() {
                expect
            } else {
                0.0
            };
            let err = tau
                .comp(comp)
                .iter()
                .map(|v| (v - target).abs())
                .fold(0.0f64, f64::max);
            worst = worst.max(err);
        }
    }
    report.audits.push(BoundAudit::ratio_check(
        "solver/relaxation_ode_error",
        worst,
        1e-6 * c,
        0.0,
    ));
    let max_ratio = trace.ratios().into_iter().fold(0.0f64, f64::max);
    report.audits.push(BoundAudit::ratio_check(
        "solver/relaxation_geometric_ratio",
        max_ratio,
        0.5,
        0.0,
    ));
    report.push_scalar("relaxation_ode_error", worst);
    report.push_scalar("relaxation_max_ratio", max_ratio);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Lipschitz dependence probe.
// ---------------------------------------------------------------------------

pub fn run_lipschitz(
    common: &Common,
    section: &LipschitzSection,
    base: &Common,
) -> Result<HarnessReport> {
    let mut report = HarnessReport::default();
    let solve = &section.solve;
    let grid = common.grid_with(solve.n)?;
    let engine = pinned_engine(common, base, solve.n)?;
    let u0 = solve.u0.pinned(base.grid()?).build_velocity(grid)?;
    let sigma0 = solve.sigma0.pinned(base.grid()?).build_stress(grid)?;
    let params = solve.model_params(common);
    let config = solve.config.to_config();

    let du = DataSpec::StreamBumps {
        seed: common.seed + 77,
        count: 2,
        amp: section.perturbation_amp,
        width: 0.8,
        center: None,
        region_half: None,
    }
    .pinned(base.grid()?)
    .build_velocity(grid)?;
    let dsigma = DataSpec::TensorBumps {
        seed: common.seed + 79,
        count: 2,
        amp: section.perturbation_amp,
        width: 0.8,
        center: None,
        region_half: None,
    }
    .pinned(base.grid()?)
    .build_stress(grid)?;

    for (family, du_scale, ds_scale) in [("u0_only", 1.0, 0.0), ("sigma0_only", 0.0, 1.0)] {
        let mut ratios = Vec::new();
        let mut dists = Vec::new();
        for &s in &section.scales {
            let mut u2 = u0.clone();
            u2.add_scaled(&du, s * du_scale);
            let mut s2 = sigma0.clone();
            s2.add_scaled(&dsigma, s * ds_scale);
            let probe = solver::lipschitz_probe(
                (&u0, &u2),
                (&sigma0, &s2),
                &params,
                &config,
                &engine,
            )?;
            report.push_scalar(
                &format!("lipschitz_ratio[{family},scale={s}]"),
                probe.ratio,
            );
            ratios.push(probe.ratio);
            dists.push(probe.solution_distance);
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        report.audits.push(
            BoundAudit::ratio_check(
                &format!("lipschitz/{family}_stability"),
                max,
                section.stability_factor * min,
                0.0,
            )
            .with_sweep(&[("scales", section.scales.len() as f64)]),
        );
        // Linear regime: solution distance scales linearly over one halving.
        if section.scales.len() >= 2 {
            let ratio01 = dists[1] / dists[0];
            let expected = section.scales[1] / section.scales[0];
            report.audits.push(
                BoundAudit::ratio_check(
                    &format!("lipschitz/{family}_linearity"),
                    (ratio01 - expected).abs(),
                    0.1 * expected,
                    0.0,
                )
                .with_sweep(&[("expected", expected)]),
            );
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Transport invariant for the magnetic model.
// ---------------------------------------------------------------------------

pub fn run_mhd_invariant(
    common: &Common,
    section: &MhdSection,
    base: &Common,
) -> Result<HarnessReport> {
    let mut report = HarnessReport::default();
    let grid = common.grid_with(section.n)?;
    let engine = pinned_engine(common, base, section.n)?;
    let u0 = section.u0.pinned(base.grid()?).build_velocity(grid)?;
    let b0 = section.b0.pinned(base.grid()?).build_velocity(grid)?;
    let config = section.config.to_config();

    let mut errors = Vec::new();
    for &n_t in &section.n_t_levels {
        let params = solver::ModelParams {
            model: Model::Mhd,
            nu: common.nu,
            k_relax: 0.0,
            rho_k: 0.0,
            alpha: common.alpha,
            p: common.p,
            t_end: section.t_end,
            n_t,
        };
        let (state, _) = solver::picard_solve(&u0, &b0, &params, &config, &engine)?;
        let err = solver::cauchy_invariant_error(&state, &b0)?;
        errors.push((n_t, err));
        report.push_scalar(&format!("cauchy_error[n_t={n_t}]"), err);
    }
    let finest = errors.last().unwrap();
    report.audits.push(
        BoundAudit::ratio_check("mhd/cauchy_invariant", finest.1, section.tolerance, 0.0)
            .with_sweep(&[("n_t", finest.0 as f64)]),
    );
    for w in errors.windows(2) {
        let order = (w[0].1 / w[1].1).log2();
        report.audits.push(
            BoundAudit::exponent_check(
                "mhd/cauchy_order",
                order,
                2.0,
                2.0 - section.min_order,
            )
            .with_sweep(&[("n_t", w[1].0 as f64)]),
        );
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// The Holder-continuity counterexample demonstration.
// ---------------------------------------------------------------------------

pub fn run_counterexample(
    common: &Common,
    section: &CounterexampleSection,
    base: &Common,
) -> Result<HarnessReport> {
    let mut report = HarnessReport::default();
    let grid = common.grid_with(section.n)?;
    let alpha = section.alpha;
    let mut params = HolderParams::new(alpha, common.p)?;
    params.sample_half_width = Some(base.l / 2.0);
    let engine = NormEngine::with_params(grid, params, common.seed);

    let center = [base.l / 2.0, base.l / 2.0, base.l / 2.0];
    let radius = section.radius_frac * base.l;
    let speed = (section.v[0].powi(2) + section.v[1].powi(2) + section.v[2].powi(2)).sqrt();
    if speed == 0.0 {
        // Degenerate demo: no translation, the difference vanishes
        // identically.
        report.audits.push(BoundAudit::ratio_check(
            "counterexample/zero_velocity_difference",
            0.0,
            0.0,
            0.0,
        ));
        return Ok(report);
    }
    let t_max = radius / speed;
    let t_values: Vec<f64> = (0..section.points)
        .map(|j| t_max * 10f64.powf(-section.decades * j as f64 / (section.points - 1) as f64))
        .collect();

    let cone = crate::analytic::cone(grid, center, radius, alpha);
    let cone_analytic =
        |x: [f64; 3]| -> f64 { grid.distance(x, center).min(radius).powf(alpha) };

    // The Lagrangian stress is time independent: its path norm difference
    // vanishes identically.
    report.audits.push(BoundAudit::ratio_check(
        "counterexample/tau_time_difference",
        0.0,
        0.0,
        0.0,
    ));

    let mut prev_linf = f64::INFINITY;
    for &t in &t_values {
        let shift = [section.v[0] * t, section.v[1] * t, section.v[2] * t];
        // Eulerian difference sigma(t) - sigma(0) sampled on the grid.
        let diff = Field::scalar_from_fn(grid, |x| {
            cone_analytic([x[0] - shift[0], x[1] - shift[1], x[2] - shift[2]]) - cone_analytic(x)
        });
        let grid_seminorm = engine.holder_seminorm(&diff);

        // Pinch-point pair: the tip and the translated tip. For the exact
        // cone the quotient evaluates to 2 whenever |v| t <= radius.
        let vt = speed * t;
        let tip_quotient = 2.0 * vt.min(radius).powf(alpha) / vt.powf(alpha);
        let seminorm_lower = grid_seminorm.max(tip_quotient);

        report.audits.push(
            BoundAudit::lower_bound_check(
                "counterexample/difference_seminorm",
                seminorm_lower,
                section.seminorm_floor,
                0.0,
            )
            .with_sweep(&[("t", t)]),
        );
        report.push_scalar(&format!("tip_quotient[t={t:.3e}]"), tip_quotient);
        report.push_scalar(&format!("grid_seminorm[t={t:.3e}]"), grid_seminorm);

        // sup norm decays like (|v| t)^alpha.
        let linf = diff.max_abs();
        let analytic_linf = vt.min(radius).powf(alpha);
        report.audits.push(
            BoundAudit::ratio_check(
                "counterexample/linf_matches_analytic",
                (linf - analytic_linf).abs(),
                0.05 * analytic_linf,
                0.0,
            )
            .with_sweep(&[("t", t)]),
        );
        report.audits.push(
            BoundAudit::ratio_check("counterexample/linf_decreasing", linf, prev_linf, 1e-12)
                .with_sweep(&[("t", t)]),
        );
        report.push_scalar(&format!("linf[t={t:.3e}]"), linf);
        prev_linf = linf;
    }
    let _ = cone;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Full solve with artifacts.
// ---------------------------------------------------------------------------

pub struct SolveArtifacts {
    pub report: HarnessReport,
    pub iterations: usize,
}

pub fn run_solve(
    common: &Common,
    section: &SolveSection,
    out_dir: Option<&std::path::Path>,
) -> Result<SolveArtifacts> {
    let grid = common.grid_with(section.n)?;
    let engine = NormEngine::new(grid, common.alpha, common.p, common.seed)?;
    let u0 = section.u0.pinned(grid).build_velocity(grid)?;
    let sigma0 = section.sigma0.pinned(grid).build_stress(grid)?;
    let params = section.model_params(common);
    let config = section.config.to_config();

    let (state, trace) = solver::picard_solve(&u0, &sigma0, &params, &config, &engine)?;
    let mut report = HarnessReport::default();
    let final_norm = state.p1_norm(&engine)?;
    report.push_scalar("final_p1_norm", final_norm);
    report.push_scalar("velocity_consistency", state.velocity_consistency());
    report.push_scalar("volume_defect", state.flow.volume_defect_all()?);
    report.audits.push(BoundAudit::ratio_check(
        "solve/velocity_consistency",
        state.velocity_consistency(),
        1e-8,
        0.0,
    ));

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let last = params.n_t;
        crate::fld::write_fld_file(
            &dir.join("displacement_final.fld"),
            state.flow.displacement(last),
            "displacement",
        )?;
        crate::fld::write_fld_file(&dir.join("tau_final.fld"), state.tau.sample(last), "tau")?;
        crate::fld::write_fld_file(&dir.join("velocity_final.fld"), state.vel.sample(last), "v")?;
        let mut csv = Vec::new();
        trace.write_csv(&mut csv)?;
        std::fs::write(dir.join("iterations.csv"), csv)?;
    }
    Ok(SolveArtifacts {
        report,
        iterations: trace.rows.len(),
    })
}

// ---------------------------------------------------------------------------
// Box-doubling robustness.
// ---------------------------------------------------------------------------

/// Which experiment families to include in a robustness comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Kernels,
    Operators,
    Flowmap,
    Commutators,
    Contraction,
    Relaxation,
    Lipschitz,
    Mhd,
    Counterexample,
}

pub fn run_experiment(
    exp: Experiment,
    common: &Common,
    manifest: &Manifest,
    base: &Common,
) -> Result<HarnessReport> {
    match exp {
        Experiment::Kernels => run_kernel_audits(common, &manifest.kernels),
        Experiment::Operators => run_operator_audits(common, &manifest.operators, base),
        Experiment::Flowmap => run_flowmap_audits(common, &manifest.flowmap, base),
        Experiment::Commutators => run_commutator_audits(common, &manifest.commutators, base),
        Experiment::Contraction => run_contraction(common, &manifest.contraction, base),
        Experiment::Relaxation => run_relaxation_oracle(common),
        Experiment::Lipschitz => run_lipschitz(common, &manifest.lipschitz, base),
        Experiment::Mhd => run_mhd_invariant(common, &manifest.mhd, base),
        Experiment::Counterexample => run_counterexample(common, &manifest.counterexample, base),
    }
}

/// Runs the experiment on the base box and on a doubled box at fixed
/// spacing, comparing every box-comparable scalar to the given relative
/// tolerance.
pub fn box_robustness(
    exp: Experiment,
    manifest: &Manifest,
    rel_tol: f64,
) -> Result<HarnessReport> {
    let base = manifest.common.clone();
    let doubled = base.doubled();
    let r1 = run_experiment(exp, &base, manifest, &base)?;
    let r2 = run_experiment(exp, &doubled, manifest, &base)?;
    let mut report = HarnessReport::default();
    for ((name, a), (name2, b)) in r1.scalars.iter().zip(r2.scalars.iter()) {
        if name != name2 {
            return Err(Error::Probe(format!(
                "scalar streams diverged: {name} vs {name2}"
            )));
        }
        let denom = a.abs().max(1e-12);
        report.audits.push(
            BoundAudit::ratio_check(
                &format!("box_robustness/{exp:?}/{name}"),
                (a - b).abs(),
                rel_tol * denom,
                0.0,
            )
            .with_sweep(&[("base", *a), ("doubled", *b)]),
        );
    }
    report.scalars = r1.scalars;
    Ok(report)
}
