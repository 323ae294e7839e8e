//! Model presets: Mackey-Glass and Suarez-Schopf.
//!
//! Localization bounds and gain bounds are computed numerically from the
//! nonlinearity and can be overridden by the caller.

use super::model::{shift_feedback, Gain, LinearDelayModel};
use super::roots::{characteristic_roots, newton_refine, Rect};
use crate::error::{Error, Result};
use crate::hilbert::StieltjesKernel;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationReport {
    pub preset: String,
    /// Bound on |x| over the absorbing set.
    pub x_max: f64,
    /// Range of F' over `[-x_max, x_max]`.
    pub gain_interval: (f64, f64),
    /// Constant shift folded into the stationary part.
    pub shift: f64,
    pub lambda: f64,
    pub equilibria: Vec<f64>,
    pub slope_at_equilibrium: Option<f64>,
    pub inside_verified_region: Option<bool>,
    pub notes: Vec<String>,
}

/// Maximizer of `f` on `[a, b]`: grid scan followed by Newton on `f'` (finite differences).
pub fn maximize_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> (f64, f64) {
    let n = 4000;
    let mut best = (a, f(a));
    for k in 1..=n {
        let x = a + (b - a) * k as f64 / n as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let cell = (b - a) / n as f64;
    let mut x = best.0;
    let e = 1e-2 * cell.max(1e-8);
    for _ in 0..50 {
        let d1 = (f(x + e) - f(x - e)) / (2.0 * e);
        let d2 = (f(x + e) - 2.0 * f(x) + f(x - e)) / (e * e);
        if !(d2 < 0.0) {
            break;
        }
        let step = d1 / d2;
        let xn = (x - step).clamp(best.0 - cell, best.0 + cell).clamp(a, b);
        if (xn - x).abs() < 1e-14 * (1.0 + x.abs()) {
            x = xn;
            break;
        }
        x = xn;
    }
    let v = f(x);
    if v >= best.1 {
        (x, v)
    } else {
        best
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MackeyGlass {
    pub gamma: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl MackeyGlass {
    pub fn f(&self, y: f64) -> f64 {
        self.beta * y / (1.0 + y.abs().powf(self.kappa))
    }

    pub fn f_prime(&self, y: f64) -> f64 {
        let u = y.abs().powf(self.kappa);
        self.beta * (1.0 + (1.0 - self.kappa) * u) / ((1.0 + u) * (1.0 + u))
    }

    /// Positive equilibrium `x*^kappa = beta/gamma - 1`, if any.
    pub fn equilibrium(&self) -> Option<f64> {
        let r = self.beta / self.gamma - 1.0;
        (r > 0.0).then(|| r.powf(1.0 / self.kappa))
    }
}

/// Stationary part `x' = -gamma x`, input `B = 1`, measurement `c = delta(-tau)`.
pub fn build_mackey_glass(
    gamma: f64,
    beta: f64,
    kappa: f64,
    tau: f64,
) -> Result<(LinearDelayModel, LocalizationReport)> {
    if !(gamma > 0.0 && beta > 0.0 && kappa > 1.0) {
        return Err(Error::Config(format!(
            "Mackey-Glass needs gamma > 0, beta > 0, kappa > 1 (got {gamma}, {beta}, {kappa})"
        )));
    }
    let mg = MackeyGlass { gamma, beta, kappa };
    let ypeak = (1.0 / (kappa - 1.0)).powf(1.0 / kappa);
    let (_, peak) = maximize_1d(|y| y / (1.0 + y.powf(kappa)), 0.0, 4.0 * ypeak.max(1.0));
    let x_max = beta / gamma * peak;
    let (_, lambda) = maximize_1d(|y| mg.f_prime(y).abs(), 0.0, x_max);
    let (_, fmax) = maximize_1d(|y| mg.f_prime(y), 0.0, x_max);
    let (_, fmin) = maximize_1d(|y| -mg.f_prime(y), 0.0, x_max);
    let mut notes = Vec::new();
    let eq = mg.equilibrium();
    let mut equilibria = vec![0.0];
    if let Some(x) = eq {
        equilibria.push(x);
    } else {
        notes.push(
            "trivially stable zero equilibrium: beta <= gamma makes it globally attracting".into(),
        );
    }
    let model = LinearDelayModel::new(
        tau,
        StieltjesKernel::scalar_atom(0.0, -gamma),
        DMatrix::from_element(1, 1, 1.0),
        StieltjesKernel::scalar_atom(-tau, 1.0),
        lambda,
        None,
    )?;
    let report = LocalizationReport {
        preset: "mackey-glass".into(),
        x_max,
        gain_interval: (-fmin, fmax),
        shift: 0.0,
        lambda,
        equilibria,
        slope_at_equilibrium: eq.map(|x| mg.f_prime(x)),
        inside_verified_region: None,
        notes,
    };
    Ok((model, report))
}

/// Mackey-Glass model linearized along the positive equilibrium (constant gain).
pub fn mackey_glass_equilibrium_linearization(
    gamma: f64,
    beta: f64,
    kappa: f64,
    tau: f64,
) -> Result<LinearDelayModel> {
    let (model, report) = build_mackey_glass(gamma, beta, kappa, tau)?;
    let slope = report
        .slope_at_equilibrium
        .ok_or_else(|| Error::Config("no positive equilibrium to linearize at".into()))?;
    model.with_gain(Some(Gain::Constant(DMatrix::from_element(1, 1, slope))))
}

/// `x' = x - alpha x(t - tau) - x^3` with the sector shift `D = -3 X^2 / 2` applied.
pub fn build_suarez_schopf(
    alpha: f64,
    tau: f64,
    x_max: Option<f64>,
) -> Result<(LinearDelayModel, LocalizationReport)> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!(
            "Suarez-Schopf needs alpha > 0, got {alpha}"
        )));
    }
    let x = x_max.unwrap_or_else(|| (1.0 + alpha).sqrt());
    if !(x > 0.0) {
        return Err(Error::Config("localization bound must be positive".into()));
    }
    let kernel =
        StieltjesKernel::scalar_atom(0.0, 1.0).plus(&StieltjesKernel::scalar_atom(-tau, -alpha))?;
    let span = 3.0 * x * x;
    let base = LinearDelayModel::new(
        tau,
        kernel,
        DMatrix::from_element(1, 1, 1.0),
        StieltjesKernel::scalar_atom(0.0, 1.0),
        span,
        None,
    )?;
    let d = -0.5 * span;
    let model = shift_feedback(&base, &DMatrix::from_element(1, 1, d), Some(0.5 * span))?;
    let mut equilibria = vec![0.0];
    if alpha < 1.0 {
        let e = (1.0 - alpha).sqrt();
        equilibria.extend([-e, e]);
    }
    let inside = 2.0 * alpha * tau < 1.0;
    let mut notes = vec![format!(
        "sector shift D = {d} applied to the stationary part"
    )];
    if inside {
        notes.push("parameters inside the region 2*alpha*tau < 1".into());
    }
    let report = LocalizationReport {
        preset: "suarez-schopf".into(),
        x_max: x,
        gain_interval: (-span, 0.0),
        shift: d,
        lambda: 0.5 * span,
        equilibria,
        slope_at_equilibrium: None,
        inside_verified_region: Some(inside),
        notes,
    };
    Ok((model, report))
}

/// Closed-form crossing of `lambda = -gamma + d e^{-lambda tau}` through the imaginary axis.
///
/// Returns `(omega*, tau)` with `omega* = sqrt(d^2 - gamma^2)` and
/// `tau = (pi - atan(omega*/gamma)) / omega*`; requires `d < -gamma < 0`.
pub fn hopf_closed_form(gamma: f64, d: f64) -> Option<(f64, f64)> {
    if !(d < 0.0 && d.abs() > gamma && gamma > 0.0) {
        return None;
    }
    let w = (d * d - gamma * gamma).sqrt();
    Some((w, (std::f64::consts::PI - (w / gamma).atan()) / w))
}

/// Delay at which the leading root of `build(tau)` crosses the imaginary axis.
///
/// The leading root is isolated by winding numbers at both ends of the bracket
/// and then followed by Newton continuation inside an Illinois iteration on its
/// real part.
pub fn stability_loss_tau<F>(
    build: F,
    tau_lo: f64,
    tau_hi: f64,
    window: Rect,
) -> Result<(f64, Complex64)>
where
    F: Fn(f64) -> Result<LinearDelayModel>,
{
    let leading = |tau: f64| -> Result<Complex64> {
        let roots = characteristic_roots(&build(tau)?, &window, usize::MAX)?;
        roots
            .into_iter()
            .map(|r| r.value)
            .filter(|z| z.im >= 0.0)
            .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap())
            .ok_or_else(|| Error::Region(format!("no root in window at tau = {tau}")))
    };
    let mut za = leading(tau_lo)?;
    let mut zb = leading(tau_hi)?;
    if za.re.signum() == zb.re.signum() {
        return Err(Error::Region(format!(
            "leading root does not cross the axis between tau = {tau_lo} and {tau_hi}"
        )));
    }
    let (mut a, mut b) = (tau_lo, tau_hi);
    let (mut fa, mut fb) = (za.re, zb.re);
    let mut side = 0i32;
    let mut best = (a, za);
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let start = if (c - a).abs() < (b - c).abs() {
            za
        } else {
            zb
        };
        let model = build(c)?;
        let zc = newton_refine(&model, start, 1)
            .ok_or_else(|| Error::Region(format!("continuation lost the root at tau = {c}")))?;
        let fc = zc.re;
        best = (c, zc);
        if fc.abs() < 1e-15 || (b - a).abs() < 1e-14 * c.abs() {
            break;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            zb = zc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            za = zc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mackey_glass_equilibrium_and_slope() {
        let (_, rep) = build_mackey_glass(0.1, 0.2, 10.0, 1.0).unwrap();
        assert!((rep.equilibria[1] - 1.0).abs() < 1e-14);
        let s = rep.slope_at_equilibrium.unwrap();
        assert!((s - 0.2 * (2.0 - 10.0) / 4.0).abs() < 1e-14);
        assert!((rep.lambda - 0.405).abs() < 1e-9, "{}", rep.lambda);
        assert!((rep.x_max - 2.0 * 0.8027415617602307 / (1.0 + 1.0 / 9.0)).abs() < 1e-9);
    }

    #[test]
    fn mackey_glass_small_beta_is_flagged() {
        let (_, rep) = build_mackey_glass(0.2, 0.1, 10.0, 1.0).unwrap();
        assert!(rep.notes.iter().any(|n| n.contains("trivially stable")));
        assert_eq!(rep.equilibria, vec![0.0]);
    }

    #[test]
    fn suarez_schopf_defaults() {
        let (m, rep) = build_suarez_schopf(0.75, 0.6, None).unwrap();
        assert!((rep.x_max - 1.75f64.sqrt()).abs() < 1e-15);
        assert!((rep.equilibria[2] - 0.5).abs() < 1e-15);
        assert!((rep.lambda - 1.5 * 1.75).abs() < 1e-12);
        assert!((m.lambda_gain - 2.625).abs() < 1e-12);
        assert_eq!(rep.inside_verified_region, Some(true));
        let a0: f64 = m
            .alpha
            .atoms
            .iter()
            .filter(|a| a.theta == 0.0)
            .map(|a| a.matrix[(0, 0)])
            .sum();
        assert!((a0 + 1.625).abs() < 1e-12);
    }

    #[test]
    fn closed_form_crossing() {
        let (w, tau) = hopf_closed_form(0.1, -0.4).unwrap();
        assert!((w - 0.15f64.sqrt()).abs() < 1e-15);
        assert!((tau - 4.708).abs() < 1e-3, "{tau}");
        assert!(hopf_closed_form(0.1, 0.4).is_none());
    }

    #[test]
    fn maximize_finds_interior_peak() {
        let (x, v) = maximize_1d(|x| -(x - 0.3) * (x - 0.3) + 2.0, 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-12);
    }
}
