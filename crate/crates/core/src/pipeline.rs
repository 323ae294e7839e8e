//! Subcommand orchestration: model building, spectrum, verify, sweep, simulate,
//! structural check and the oracle battery.
//!
//! Every run returns a report struct with JSON and CSV renderings; writing files
//! is left to the caller.

use crate::cauchy::{decompose_solution, DecompositionSummary, Forcing};
use crate::config::{matrix_from_rows, Lambda, ModelConfig, Nu0, RunConfig};
use crate::dde::presets::{
    build_mackey_glass, build_suarez_schopf, mackey_glass_equilibrium_linearization,
    LocalizationReport,
};
use crate::dde::{semigroup_apply, solve_linear, LinearDelayModel};
use crate::error::{Error, Result};
use crate::exterior::{
    compound_generator_apply_checked, compound_inner, compound_semigroup_apply, gram_oracle, wedge,
    FaceIndex,
};
use crate::hilbert::{embed_continuous, Grid, HistoryElement, StieltjesKernel};
use crate::spectrum::{spectrum_report, SpectrumReport};
use crate::sweep::{sweep, SweepConfig, SweepReport, Verdict};
use crate::transfer::{
    control_wedge, dense_resolvent_extrapolated, resolvent_laplace, LaplaceOptions, ProperBasis,
    WedgeSum,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt::Write as _;

pub struct ResolvedModel {
    pub model: LinearDelayModel,
    pub localization: Option<LocalizationReport>,
}

pub fn build_model(cfg: &ModelConfig) -> Result<ResolvedModel> {
    Ok(match cfg {
        ModelConfig::MackeyGlass {
            gamma,
            beta,
            kappa,
            tau,
        } => {
            let (model, rep) = build_mackey_glass(*gamma, *beta, *kappa, *tau)?;
            ResolvedModel {
                model,
                localization: Some(rep),
            }
        }
        ModelConfig::MackeyGlassEquilibrium {
            gamma,
            beta,
            kappa,
            tau,
        } => {
            let model = mackey_glass_equilibrium_linearization(*gamma, *beta, *kappa, *tau)?
                .autonomous()?;
            let (_, rep) = build_mackey_glass(*gamma, *beta, *kappa, *tau)?;
            ResolvedModel {
                model,
                localization: Some(rep),
            }
        }
        ModelConfig::SuarezSchopf { alpha, tau, x_max } => {
            let (model, rep) = build_suarez_schopf(*alpha, *tau, *x_max)?;
            ResolvedModel {
                model,
                localization: Some(rep),
            }
        }
        ModelConfig::Toy { rate, tau } => {
            let model = LinearDelayModel::new(
                *tau,
                StieltjesKernel::scalar_atom(0.0, -rate),
                DMatrix::from_element(1, 1, 1.0),
                StieltjesKernel::scalar_atom(-tau, 1.0),
                1.0,
                None,
            )?;
            ResolvedModel {
                model,
                localization: None,
            }
        }
        ModelConfig::Custom {
            tau,
            alpha,
            b,
            c,
            lambda,
        } => {
            let model = LinearDelayModel::new(
                *tau,
                alpha.to_kernel()?,
                matrix_from_rows(b)?,
                c.to_kernel()?,
                *lambda,
                None,
            )?;
            ResolvedModel {
                model,
                localization: None,
            }
        }
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub parameters: &'static str,
}

pub fn preset_catalog() -> Vec<PresetInfo> {
    vec![
        PresetInfo {
            name: "mackey-glass",
            description: "x' = -gamma x + beta x(t-tau) / (1 + |x(t-tau)|^kappa), linear part -gamma x, measurement x(t-tau)",
            parameters: "gamma=0.1 beta=0.2 kappa=10 tau=1",
        },
        PresetInfo {
            name: "mackey-glass-equilibrium",
            description: "Mackey-Glass linearized at the positive equilibrium",
            parameters: "gamma=0.1 beta=0.2 kappa=10 tau=1",
        },
        PresetInfo {
            name: "suarez-schopf",
            description: "x' = x - alpha x(t-tau) - x^3 with the sector shift applied",
            parameters: "alpha=0.75 tau=0.6 x_max=sqrt(1+alpha)",
        },
        PresetInfo {
            name: "toy",
            description: "x' = -rate x with measurement x(t-tau)",
            parameters: "rate=1 tau=1",
        },
        PresetInfo {
            name: "custom",
            description: "kernels given as atom and density lists",
            parameters: "tau, alpha, b, c, lambda (all required)",
        },
    ]
}

pub fn models_table() -> String {
    let mut s = String::new();
    for p in preset_catalog() {
        let _ = writeln!(
            s,
            "{:<26} {}\n{:<26} defaults: {}",
            p.name, p.description, "", p.parameters
        );
    }
    s
}

/// Concrete values behind every "auto" or preset default.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub preset: String,
    pub tau: f64,
    pub ng: usize,
    pub m: usize,
    pub nu0: f64,
    pub nu0_source: &'static str,
    pub lambda: f64,
    pub lambda_source: &'static str,
    pub spectral_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumOutput {
    pub resolved: Resolved,
    pub localization: Option<LocalizationReport>,
    pub report: SpectrumReport,
    pub notes: Vec<String>,
}

impl SpectrumOutput {
    /// `re,im,tensor_multiplicity,antisym_multiplicity`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,tensor_multiplicity,antisym_multiplicity\n");
        for e in &self.report.eigenvalues {
            let _ = writeln!(
                s,
                "{:.12e},{:.12e},{},{}",
                e.value.re, e.value.im, e.tensor_multiplicity, e.antisym_multiplicity
            );
        }
        s
    }
}

fn resolve_lambda(cfg: &RunConfig, model: &LinearDelayModel) -> (f64, &'static str) {
    match cfg.sweep.lambda {
        Lambda::Value(v) => (v, "config"),
        Lambda::FromPreset => (model.lambda_gain, "preset"),
    }
}

pub fn run_spectrum(cfg: &RunConfig) -> Result<SpectrumOutput> {
    let rm = build_model(&cfg.model)?;
    let (nu0, source) = match cfg.sweep.nu0.unwrap_or_else(|| cfg.model.default_nu0()) {
        Nu0::Value(v) if cfg.sweep.nu0.is_some() => (Some(v), "config"),
        Nu0::Value(v) => (Some(v), "preset"),
        Nu0::Auto => (None, "auto"),
    };
    let window = cfg.spectrum.root_window;
    let report = spectrum_report(
        &rm.model,
        cfg.m,
        &window,
        &cfg.spectrum.compound_window.unwrap_or(window),
        nu0,
        cfg.spectrum.max_roots,
    )?;
    let mut notes = report.notes.clone();
    if let Some(loc) = &rm.localization {
        notes.extend(loc.notes.iter().cloned());
    }
    if nu0.is_some() {
        if let Some(auto) = crate::spectrum::auto_nu0(
            &report.eigenvalues,
            Some(report.complete_above.max(window.re_min)),
        ) {
            notes.push(format!("suggested nu0 = {auto}"));
        }
    }
    let (lambda, lambda_source) = resolve_lambda(cfg, &rm.model);
    Ok(SpectrumOutput {
        resolved: Resolved {
            preset: cfg.model.name().into(),
            tau: rm.model.tau,
            ng: cfg.discretization.ng,
            m: cfg.m,
            nu0: report.nu0,
            nu0_source: source,
            lambda,
            lambda_source,
            spectral_bound: report.bound.s,
        },
        localization: rm.localization,
        report,
        notes,
    })
}

pub const INTERPRETATION_M2: &str = "m = 2: the frequency inequality holds, so the system admits no closed invariant contours in the localization set (Bendixson-type criterion)";

#[derive(Clone, Debug, Serialize)]
pub struct VerifyOutput {
    pub resolved: Resolved,
    pub unstable_count: usize,
    pub line_distance: f64,
    pub sweep: SweepReport,
    pub verdict: String,
    pub interpretation: Option<String>,
    pub notes: Vec<String>,
    pub exit_code: i32,
}

impl VerifyOutput {
    pub fn to_csv(&self) -> String {
        self.sweep.to_csv()
    }
}

fn sweep_config(cfg: &RunConfig, nu0: f64, lambda: f64) -> SweepConfig {
    let s = &cfg.sweep;
    SweepConfig {
        nu0,
        omega_max: s.omega_max,
        d_omega: s.d_omega,
        n_u: s.n_u,
        n_m: s.n_m,
        horizon: s.horizon,
        lambda,
        substeps: cfg.discretization.substeps,
        safety: s.safety,
        refine: s.refine,
    }
}

/// Spectrum, line check and sweep; the verdict sets the exit code.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyOutput> {
    let spec = run_spectrum(cfg)?;
    if spec.report.unstable_count > 0 {
        return Err(Error::LaplaceInvalid {
            re_p: -spec.report.nu0,
            bound: spec.report.bound.s,
        });
    }
    let model = build_model(&cfg.model)?.model;
    let grid = Grid::new(model.tau, cfg.discretization.ng)?;
    let sc = sweep_config(cfg, spec.resolved.nu0, spec.resolved.lambda);
    let report = sweep(&model, grid, cfg.m, spec.report.bound.s, &sc)?;
    let interpretation = (cfg.m == 2 && matches!(report.verdict, Verdict::Verified { .. }))
        .then(|| INTERPRETATION_M2.to_string());
    let mut notes = spec.notes.clone();
    notes.extend(report.notes.iter().cloned());
    Ok(VerifyOutput {
        resolved: spec.resolved,
        unstable_count: spec.report.unstable_count,
        line_distance: spec.report.min_distance,
        verdict: report.verdict.to_string(),
        exit_code: report.verdict.exit_code(),
        sweep: report,
        interpretation,
        notes,
    })
}

/// Sweep only; `nu0` "auto" still consults the spectrum.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    Ok(run_verify(cfg)?.sweep)
}

fn initial_history(cfg: &RunConfig, grid: Grid, n: usize) -> Result<HistoryElement> {
    let s = &cfg.simulate;
    embed_continuous(grid, n, |t| {
        vec![s.a + s.b * t + s.c * (s.omega * t).sin(); n]
    })
}

/// `t,x1..xn` from `t = 0` on.
pub fn run_simulate(cfg: &RunConfig) -> Result<String> {
    let model = build_model(&cfg.model)?.model;
    let grid = Grid::new(model.tau, cfg.discretization.ng)?;
    let phi = initial_history(cfg, grid, model.n)?;
    let dt = grid.h() / cfg.discretization.substeps as f64;
    let tr = solve_linear(&model, &phi, cfg.simulate.t_end, dt, cfg.simulate.with_gain)?;
    let mut s = String::from("t");
    for i in 1..=model.n {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for k in (0..=tr.steps()).step_by(cfg.simulate.every) {
        let _ = write!(s, "{:.6}", tr.time(k));
        for v in tr.x(k as isize) {
            let _ = write!(s, ",{v:.12e}");
        }
        s.push('\n');
    }
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct StructuralOutput {
    pub rows: Vec<DecompositionSummary>,
    /// Least-squares slope of `log residual` against `log h`.
    pub order: f64,
}

impl StructuralOutput {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,steps,residual,relative_residual,norm_ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.8e},{},{:.12e},{:.12e},{:.12e}",
                r.h, r.steps, r.max_residual, r.max_relative_residual, r.norm_ratio
            );
        }
        s
    }
}

pub fn fitted_order(h: &[f64], err: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Smooth compatible factors `cos(0.7 theta + j) + 0.2 j` and `e^{0.5 theta}`-type data.
fn smooth_factors(grid: Grid, n: usize, m: usize) -> Result<Vec<HistoryElement>> {
    (0..m)
        .map(|j| {
            let j = j as f64;
            embed_continuous(grid, n, move |t| {
                (0..n)
                    .map(|c| {
                        (0.7 * t + j).cos()
                            + 0.2 * j
                            + 0.3 * (c as f64) * ((0.5 + 0.1 * j) * t).exp()
                    })
                    .collect()
            })
        })
        .collect()
}

fn structural_run(
    model: &LinearDelayModel,
    ng: usize,
    m: usize,
    nu: f64,
    t_end: f64,
) -> Result<DecompositionSummary> {
    let grid = Grid::new(model.tau, ng)?;
    let steps = (t_end / grid.h()).round() as usize;
    let profile = (0..=steps)
        .map(|k| (2.0 * k as f64 * grid.h()).sin())
        .collect();
    let forcing = Forcing {
        factors: smooth_factors(grid, model.n, m)?
            .into_iter()
            .rev()
            .collect(),
        profile,
    };
    let d = decompose_solution(
        model,
        &smooth_factors(grid, model.n, m)?,
        Some(&forcing),
        nu,
        steps as f64 * grid.h(),
    )?;
    Ok(d.summary)
}

pub fn run_structural_check(cfg: &RunConfig) -> Result<StructuralOutput> {
    let model = build_model(&cfg.model)?.model;
    let t_end = cfg.structural.t_end.unwrap_or(model.tau);
    let rows = cfg
        .structural
        .grids
        .iter()
        .map(|&ng| structural_run(&model, ng, cfg.m, cfg.structural.nu, t_end))
        .collect::<Result<Vec<_>>>()?;
    let order = fitted_order(
        &rows.iter().map(|r| r.h).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.max_residual).collect::<Vec<_>>(),
    );
    Ok(StructuralOutput { rows, order })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub check: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleTable {
    pub ng: usize,
    pub rows: Vec<OracleRow>,
    pub all_pass: bool,
}

impl OracleTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("check,measured,tolerance,pass\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.6e},{:.6e},{}",
                r.check, r.measured, r.tolerance, r.pass
            );
        }
        s
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass {
            0
        } else {
            1
        }
    }
}

fn row(check: &str, measured: Result<f64>, tolerance: f64) -> OracleRow {
    match measured {
        Ok(v) => OracleRow {
            check: check.into(),
            measured: v,
            tolerance,
            pass: v.is_finite() && v <= tolerance,
            detail: None,
        },
        Err(e) => OracleRow {
            check: check.into(),
            measured: f64::NAN,
            tolerance,
            pass: false,
            detail: Some(e.to_string()),
        },
    }
}

fn random_smooth(rng: &mut ChaCha8Rng, grid: Grid, n: usize) -> Result<HistoryElement> {
    let c: [f64; 4] = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(0.5..3.0),
    ];
    embed_continuous(grid, n, |t| {
        vec![c[0] + c[1] * t + c[2] * (c[3] * t).sin(); n]
    })
}

/// Largest relative gap between the compound inner product of wedges and the Gram determinant.
pub fn gram_check(grid: Grid, n: usize, m: usize, pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let v = (0..m)
            .map(|_| random_smooth(&mut rng, grid, n))
            .collect::<Result<Vec<_>>>()?;
        let w = (0..m)
            .map(|_| random_smooth(&mut rng, grid, n))
            .collect::<Result<Vec<_>>>()?;
        let vr: Vec<&HistoryElement> = v.iter().collect();
        let wr: Vec<&HistoryElement> = w.iter().collect();
        let lhs = compound_inner(&wedge(&vr)?, &wedge(&wr)?)?;
        let rhs = gram_oracle(&vr, &wr)?;
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-300));
    }
    Ok(worst)
}

/// Relative gap between the Laplace and the extrapolated dense resolvent on the first control element.
pub fn resolvent_check(
    model: &LinearDelayModel,
    grid: Grid,
    m: usize,
    p: Complex64,
    bound: f64,
    horizon: f64,
) -> Result<f64> {
    let basis = ProperBasis::legendre(grid, m, 3)?;
    let input = control_wedge(model, &basis, 0)?;
    let neg = WedgeSum {
        terms: input.terms.iter().map(|(k, f)| (-k, f.clone())).collect(),
    };
    let lap = resolvent_laplace(model, &neg, p, &LaplaceOptions::new(horizon, bound))?;
    let dense = dense_resolvent_extrapolated(model, &input.to_grid()?.to_complex(), p)?;
    let mut d = lap.value.clone();
    d.axpy(Complex64::new(-1.0, 0.0), &dense.value)?;
    Ok(d.norm() / dense.value.norm())
}

/// Relative gap between the compound generator and the semigroup difference quotient.
///
/// `break_trace` zeroes the lower faces before applying the generator, which
/// decouples the head values from the body.
pub fn generator_check(
    model: &LinearDelayModel,
    grid: Grid,
    m: usize,
    break_trace: bool,
) -> Result<f64> {
    let f = smooth_factors(grid, model.n, m)?;
    let fr: Vec<&HistoryElement> = f.iter().collect();
    let phi = wedge(&fr)?;
    let dt = grid.h();
    let mut fd = compound_semigroup_apply(model, &fr, dt, dt / 4.0)?;
    fd.axpy(-1.0, &phi)?;
    fd.scale(1.0 / dt);
    let mut input = phi.clone();
    if break_trace {
        for face in FaceIndex::all(m).into_iter().filter(|f| f.size() < m) {
            let len = input.face(face).len();
            input.set_face(face, &vec![0.0; len])?;
        }
    }
    let gen = compound_generator_apply_checked(model, &input, None)?;
    let mut diff = fd;
    diff.axpy(-1.0, &gen)?;
    Ok(diff.norm() / gen.norm().max(1e-300))
}

/// `|G(t+s) phi - G(t) G(s) phi| / |G(t+s) phi|`.
pub fn semigroup_check(
    model: &LinearDelayModel,
    grid: Grid,
    t: f64,
    s: f64,
    dt: f64,
) -> Result<f64> {
    let phi = embed_continuous(grid, model.n, |x| vec![(3.0 * x).sin() + 1.0; model.n])?;
    let a = semigroup_apply(model, &phi, t + s, dt)?;
    let b = semigroup_apply(model, &semigroup_apply(model, &phi, s, dt)?, t, dt)?;
    let d = b.axpy(-1.0, &a)?;
    Ok(d.norm() / a.norm().max(1e-300))
}

/// Cross-route battery at `cfg.oracle.ng` and twice that.
pub fn run_oracle(cfg: &RunConfig) -> Result<OracleTable> {
    let model = build_model(&cfg.model)?.model;
    let ng = cfg.oracle.ng;
    let m = cfg.m;
    let coarse = Grid::new(model.tau, ng)?;
    let fine = Grid::new(model.tau, 2 * ng)?;
    let mut rows = Vec::new();
    rows.push(row(
        "gram-identity",
        gram_check(coarse, model.n, m, cfg.oracle.pairs, cfg.seed),
        1e-10,
    ));

    let window = cfg.spectrum.root_window;
    let bound = spectrum_report(
        &model,
        m,
        &window,
        &cfg.spectrum.compound_window.unwrap_or(window),
        Some(f64::MAX),
        cfg.spectrum.max_roots,
    )
    .map(|r| r.bound.s)
    .or_else(|e| match e {
        Error::LineHitsSpectrum { .. } => Ok(f64::NEG_INFINITY),
        other => Err(other),
    });
    let resolvent = bound.and_then(|s| {
        let s = if s.is_finite() { s } else { -1.0 };
        let re = if s < 0.0 { 0.5 * s } else { s + 0.5 };
        let horizon = (30.0 / (re - s)).min(400.0);
        resolvent_check(&model, coarse, m, Complex64::new(re, 1.0), s, horizon)
    });
    rows.push(row("laplace-vs-dense", resolvent, 0.05));

    let gen = generator_check(&model, coarse, m, cfg.oracle.break_trace_coupling).and_then(|c| {
        generator_check(&model, fine, m, cfg.oracle.break_trace_coupling).map(|f| (c, f))
    });
    rows.push(match gen {
        Ok((c, f)) => {
            let mut r = row("generator-difference-quotient", Ok(f), 0.25);
            if !(f < c) {
                r.pass = false;
                r.detail = Some(format!("no refinement trend: {c:.3e} then {f:.3e}"));
            }
            r
        }
        Err(e) => row("generator-difference-quotient", Err(e), 0.25),
    });

    let h = coarse.h();
    rows.push(row(
        "semigroup-law",
        semigroup_check(&model, fine, model.tau, 0.5 * model.tau, h / 4.0),
        1e-4,
    ));

    let structural = structural_run(&model, ng, m, 0.05, model.tau)
        .and_then(|a| structural_run(&model, 2 * ng, m, 0.05, model.tau).map(|b| (a, b)));
    rows.push(match structural {
        Ok((a, b)) => {
            let order = (a.max_residual / b.max_residual).log2();
            let mut r = row("structural-cauchy", Ok(b.max_relative_residual), 0.05);
            r.detail = Some(format!(
                "residual {:.3e} -> {:.3e}, order {order:.2}",
                a.max_residual, b.max_residual
            ));
            if !(order >= 0.9) {
                r.pass = false;
            }
            r
        }
        Err(e) => row("structural-cauchy", Err(e), 0.05),
    });
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(OracleTable { ng, rows, all_pass })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
