//! Frequency sweep of `alpha_N(omega) = ||P_M W(-nu0 + i omega) P_U||`.

use crate::dde::LinearDelayModel;
use crate::error::{Error, Result};
use crate::hilbert::Grid;
use crate::transfer::{ProperBasis, TransferKernel};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Duration;

/// Fraction of failed frequency nodes above which the sweep is abandoned.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub nu0: f64,
    /// Upper end of the window; `None` picks `20 max(1, |s|, 2 pi / tau)`.
    pub omega_max: Option<f64>,
    pub d_omega: f64,
    pub n_u: usize,
    pub n_m: usize,
    /// Laplace horizon `T`.
    pub horizon: f64,
    /// Gain bound; the threshold is `1 / lambda`.
    pub lambda: f64,
    pub substeps: usize,
    /// Safety factor on the empirical Lipschitz constant.
    pub safety: f64,
    /// Also evaluate the midpoints (halved step) and use them for the verdict.
    pub refine: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            nu0: 0.05,
            omega_max: None,
            d_omega: 0.05,
            n_u: 8,
            n_m: 8,
            horizon: 120.0,
            lambda: 1.0,
            substeps: 1,
            safety: 2.0,
            refine: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_omega > 0.0) {
            return Err(Error::Config(format!(
                "d_omega must be positive, got {}",
                self.d_omega
            )));
        }
        if let Some(w) = self.omega_max {
            if !(w >= self.d_omega) {
                return Err(Error::Config(format!(
                    "omega_max {w} is below the step {}",
                    self.d_omega
                )));
            }
        }
        if self.n_u == 0 || self.n_m == 0 {
            return Err(Error::Config("basis sizes must be at least 1".into()));
        }
        if !(self.horizon > 0.0)
            || !(self.lambda >= 0.0)
            || !(self.safety >= 1.0)
            || self.substeps == 0
        {
            return Err(Error::Config(
                "need horizon > 0, lambda >= 0, safety >= 1 and substeps >= 1".into(),
            ));
        }
        if !self.nu0.is_finite() {
            return Err(Error::Config("nu0 must be finite".into()));
        }
        Ok(())
    }
}

/// Default window `20 max(1, |s|, 2 pi / tau)`.
pub fn default_omega_max(bound: f64, tau: f64) -> f64 {
    20.0 * 1f64.max(bound.abs()).max(2.0 * std::f64::consts::PI / tau)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// `sup + L d_omega / 2` is below the threshold on `[0, omega_max]`; the tail is not certified.
    Verified {
        window: (f64, f64),
    },
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Verified { .. } => 0,
            Verdict::Violated => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Verified { window } => {
                write!(f, "verified on omega in [{}, {}]", window.0, window.1)
            }
            Verdict::Violated => write!(f, "violated"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub omega: f64,
    /// `None` when the node failed.
    pub alpha: Option<f64>,
    pub remainder: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub nu0: f64,
    pub omega_max: f64,
    /// Step of the grid the verdict uses.
    pub d_omega: f64,
    pub n_u: usize,
    pub n_m: usize,
    pub horizon: f64,
    pub lambda: f64,
    pub threshold: f64,
    pub points: Vec<SweepPoint>,
    pub sup: f64,
    pub sup_omega: f64,
    pub margin: f64,
    pub lipschitz: f64,
    pub remainder_max: f64,
    /// `sup` on the coarse grid when refinement ran.
    pub coarse_sup: Option<f64>,
    /// Largest `alpha` on the last tenth of the window.
    pub tail_sup: f64,
    pub failed: usize,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub elapsed: Duration,
    #[serde(skip)]
    pub jobs: usize,
}

impl SweepReport {
    /// `omega,alpha,margin` rows; failed nodes leave `alpha` and `margin` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega,alpha,margin\n");
        for p in &self.points {
            match p.alpha {
                Some(a) => out.push_str(&format!(
                    "{:.6},{:.12e},{:.12e}\n",
                    p.omega,
                    a,
                    self.threshold - a
                )),
                None => out.push_str(&format!("{:.6},,\n", p.omega)),
            }
        }
        out
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.alpha).collect()
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Safety factor times the largest finite-difference slope of `alpha` over the grid.
pub fn lipschitz_estimate(omegas: &[f64], alphas: &[Option<f64>], safety: f64) -> f64 {
    let mut slope = 0.0f64;
    for k in 1..omegas.len() {
        if let (Some(a), Some(b)) = (alphas[k - 1], alphas[k]) {
            slope = slope.max((b - a).abs() / (omegas[k] - omegas[k - 1]));
        }
    }
    safety * slope
}

/// Decision rule on a finished grid.
pub fn verdict(
    alphas: &[Option<f64>],
    lipschitz: f64,
    d_omega: f64,
    threshold: f64,
    window: (f64, f64),
) -> Verdict {
    let sup = alphas.iter().flatten().cloned().fold(0.0, f64::max);
    if alphas.iter().flatten().any(|&a| a >= threshold) {
        Verdict::Violated
    } else if alphas.iter().all(|a| a.is_some()) && sup + 0.5 * lipschitz * d_omega < threshold {
        Verdict::Verified { window }
    } else {
        Verdict::Inconclusive
    }
}

/// `alpha_N` at one frequency from a prebuilt kernel.
pub fn alpha_at(kernel: &TransferKernel, nu0: f64, omega: f64, bound: f64) -> Result<(f64, f64)> {
    let w = kernel.evaluate(Complex64::new(-nu0, omega), bound)?;
    Ok((spectral_norm(&w.matrix), w.remainder))
}

/// `alpha_N(omega)` for a single frequency, building the bases and kernel.
pub fn alpha_n(
    model: &LinearDelayModel,
    grid: Grid,
    m: usize,
    bound: f64,
    omega: f64,
    cfg: &SweepConfig,
) -> Result<f64> {
    cfg.validate()?;
    let control = ProperBasis::legendre(grid, m, cfg.n_u)?;
    let measurement = ProperBasis::legendre(grid, m, cfg.n_m)?;
    let kernel = TransferKernel::build(model, &control, &measurement, cfg.horizon, cfg.substeps)?;
    Ok(alpha_at(&kernel, cfg.nu0, omega, bound)?.0)
}

fn evaluate_nodes(
    kernel: &TransferKernel,
    nu0: f64,
    bound: f64,
    omegas: &[f64],
) -> Vec<SweepPoint> {
    omegas
        .par_iter()
        .map(|&omega| match alpha_at(kernel, nu0, omega, bound) {
            Ok((a, r)) => SweepPoint {
                omega,
                alpha: Some(a),
                remainder: r,
                error: None,
            },
            Err(e) => SweepPoint {
                omega,
                alpha: None,
                remainder: f64::NAN,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// Sweeps `[0, omega_max]`; the negative half follows from conjugate symmetry.
pub fn sweep(
    model: &LinearDelayModel,
    grid: Grid,
    m: usize,
    bound: f64,
    cfg: &SweepConfig,
) -> Result<SweepReport> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    if !(-cfg.nu0 > bound) {
        return Err(Error::LaplaceInvalid {
            re_p: -cfg.nu0,
            bound,
        });
    }
    let omega_max = cfg
        .omega_max
        .unwrap_or_else(|| default_omega_max(bound, model.tau));
    let steps = (omega_max / cfg.d_omega).ceil() as usize;
    let control = ProperBasis::legendre(grid, m, cfg.n_u)?;
    let measurement = ProperBasis::legendre(grid, m, cfg.n_m)?;
    let kernel = TransferKernel::build(model, &control, &measurement, cfg.horizon, cfg.substeps)?;
    log::info!(
        "kernel built: {} time nodes, {}x{} blocks",
        kernel.values.len(),
        kernel.rows,
        kernel.cols
    );

    let coarse: Vec<f64> = (0..=steps).map(|k| k as f64 * cfg.d_omega).collect();
    let mut points = evaluate_nodes(&kernel, cfg.nu0, bound, &coarse);
    let mut d_omega = cfg.d_omega;
    let mut coarse_sup = None;
    let mut notes = Vec::new();
    if cfg.refine {
        coarse_sup = Some(points.iter().filter_map(|p| p.alpha).fold(0.0, f64::max));
        let coarse_l = lipschitz_estimate(
            &coarse,
            &points.iter().map(|p| p.alpha).collect::<Vec<_>>(),
            cfg.safety,
        );
        let mids: Vec<f64> = (0..steps).map(|k| (k as f64 + 0.5) * cfg.d_omega).collect();
        let extra = evaluate_nodes(&kernel, cfg.nu0, bound, &mids);
        let mut merged = Vec::with_capacity(points.len() + extra.len());
        let mut extra = extra.into_iter();
        for p in points {
            merged.push(p);
            if let Some(e) = extra.next() {
                merged.push(e);
            }
        }
        points = merged;
        d_omega *= 0.5;
        let fine_sup = points.iter().filter_map(|p| p.alpha).fold(0.0, f64::max);
        let gap = fine_sup - coarse_sup.unwrap();
        if gap > 0.5 * coarse_l * cfg.d_omega {
            notes.push(format!(
                "refined supremum exceeds the coarse one by {gap:.3e}, more than the certified inter-node bound"
            ));
        }
    }

    let total = points.len();
    let failed = points.iter().filter(|p| p.alpha.is_none()).count();
    if failed as f64 > MAX_FAILED_FRACTION * total as f64 {
        return Err(Error::Sweep { failed, total });
    }
    if failed > 0 {
        notes.push(format!("{failed} of {total} frequency nodes failed"));
    }
    let omegas: Vec<f64> = points.iter().map(|p| p.omega).collect();
    let alphas: Vec<Option<f64>> = points.iter().map(|p| p.alpha).collect();
    let lipschitz = lipschitz_estimate(&omegas, &alphas, cfg.safety);
    let (mut sup, mut sup_omega) = (0.0f64, 0.0);
    for p in &points {
        if let Some(a) = p.alpha {
            if a > sup {
                sup = a;
                sup_omega = p.omega;
            }
        }
    }
    let threshold = if cfg.lambda > 0.0 {
        1.0 / cfg.lambda
    } else {
        f64::INFINITY
    };
    let tail_sup = points
        .iter()
        .filter(|p| p.omega >= 0.9 * omega_max)
        .filter_map(|p| p.alpha)
        .fold(0.0, f64::max);
    if tail_sup > 0.5 * sup {
        notes.push(format!(
            "alpha on the last tenth of the window is {:.0}% of the supremum; the tail beyond omega_max is not certified",
            100.0 * tail_sup / sup.max(f64::MIN_POSITIVE)
        ));
    }
    let remainder_max = points
        .iter()
        .map(|p| p.remainder)
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    let verdict = verdict(&alphas, lipschitz, d_omega, threshold, (0.0, omega_max));
    Ok(SweepReport {
        nu0: cfg.nu0,
        omega_max,
        d_omega,
        n_u: cfg.n_u,
        n_m: cfg.n_m,
        horizon: kernel.horizon,
        lambda: cfg.lambda,
        threshold,
        points,
        sup,
        sup_omega,
        margin: threshold - sup,
        lipschitz,
        remainder_max,
        coarse_sup,
        tail_sup,
        failed,
        verdict,
        notes,
        elapsed: start.elapsed(),
        jobs: rayon::current_num_threads(),
    })
}
