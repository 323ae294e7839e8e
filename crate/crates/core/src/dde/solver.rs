//! Fixed-step RK4 for linear delay equations.
//!
//! The path is stored at step resolution together with derivative samples, and
//! history values between stored points come from cubic Hermite interpolation.
//! Because the step divides the grid spacing, every delay node lands on a stored
//! point or on a step midpoint.

use super::model::{Gain, LinearDelayModel};
use crate::error::{Error, Result};
use crate::hilbert::{Grid, HistoryElement, Stencil};
use nalgebra::DMatrix;

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: Grid,
    pub n: usize,
    pub dt: f64,
    /// Steps per grid cell, `h = q * dt`.
    pub q: usize,
    steps: usize,
    /// Index of `t = 0` in the stored path.
    offset: usize,
    values: Vec<f64>,
    derivs: Vec<f64>,
    /// Left derivative at `t = 0` (the initial history may have a kink there).
    d0_left: Vec<f64>,
}

fn hermite(x0: f64, x1: f64, d0: f64, d1: f64, dt: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * x0 + h10 * dt * d0 + h01 * x1 + h11 * dt * d1
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t_end(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Stored path value at step index `j` (negative indices reach into the history).
    pub fn x(&self, j: isize) -> &[f64] {
        let p = (j + self.offset as isize) as usize;
        &self.values[p * self.n..(p + 1) * self.n]
    }

    fn d_right(&self, j: isize) -> &[f64] {
        let p = (j + self.offset as isize) as usize;
        &self.derivs[p * self.n..(p + 1) * self.n]
    }

    fn d_left(&self, j: isize) -> &[f64] {
        if j == 0 {
            &self.d0_left
        } else {
            self.d_right(j)
        }
    }

    /// Path value at an arbitrary time in `[-tau, t_end]`.
    pub fn value(&self, t: f64) -> Vec<f64> {
        let lo = -(self.offset as f64) * self.dt;
        let t = t.clamp(lo, self.t_end());
        let x = t / self.dt;
        let mut j = x.floor() as isize;
        if j >= self.steps as isize {
            j = self.steps as isize - 1;
        }
        if j < -(self.offset as isize) {
            j = -(self.offset as isize);
        }
        let s = x - j as f64;
        if s.abs() < 1e-12 {
            return self.x(j).to_vec();
        }
        (0..self.n)
            .map(|c| {
                hermite(
                    self.x(j)[c],
                    self.x(j + 1)[c],
                    self.d_right(j)[c],
                    self.d_left(j + 1)[c],
                    self.dt,
                    s,
                )
            })
            .collect()
    }

    /// The segment `x_{t_k}` as an element of `H`.
    pub fn snapshot(&self, k: usize) -> HistoryElement {
        let ng = self.grid.ng;
        let mut body = Vec::with_capacity(ng * self.n);
        for i in 0..ng {
            let j = k as isize - ((ng - i) * self.q) as isize;
            body.extend_from_slice(self.x(j));
        }
        HistoryElement {
            grid: self.grid,
            n: self.n,
            head: self.x(k as isize).to_vec(),
            body,
        }
    }

    pub fn final_snapshot(&self) -> HistoryElement {
        self.snapshot(self.steps)
    }

    /// Snapshots at `t = 0, h, 2h, ...` up to the final time.
    pub fn grid_snapshots(&self) -> Vec<HistoryElement> {
        (0..=self.steps / self.q)
            .map(|k| self.snapshot(k * self.q))
            .collect()
    }

    /// `(t, x)` samples of the computed path for `t >= 0`.
    pub fn path(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        (0..=self.steps).map(move |k| (self.time(k), self.x(k as isize)))
    }
}

/// Right-hand side pieces resolved on the grid.
struct Rhs {
    alpha: Stencil,
    feedback: Option<(Stencil, DMatrix<f64>, Gain)>,
}

impl Rhs {
    fn eval<'a, F>(&self, t: f64, value: F) -> Vec<f64>
    where
        F: Fn(usize) -> &'a [f64] + Copy,
    {
        let mut f = self.alpha.apply(value);
        if let Some((c, b, gain)) = &self.feedback {
            let y = c.apply(value);
            let g = gain.at(t);
            let u = &g * nalgebra::DVector::from_column_slice(&y);
            let bu = b * u;
            for (fi, v) in f.iter_mut().zip(bu.iter()) {
                *fi += v;
            }
        }
        f
    }
}

/// Integrates `x' = alpha x_t [+ B gain(t) c x_t]` from the initial segment `phi0`.
pub fn solve_linear(
    model: &LinearDelayModel,
    phi0: &HistoryElement,
    t_end: f64,
    dt: f64,
    with_gain: bool,
) -> Result<Trajectory> {
    solve_linear_from(model, phi0, &phi0.head, t_end, dt, with_gain)
}

/// As [`solve_linear`], with `left0` the history's limit at `0-` when it differs
/// from the head.
pub fn solve_linear_from(
    model: &LinearDelayModel,
    phi0: &HistoryElement,
    left0: &[f64],
    t_end: f64,
    dt: f64,
    with_gain: bool,
) -> Result<Trajectory> {
    let grid = phi0.grid;
    if left0.len() != phi0.n {
        return Err(Error::Shape(format!(
            "left limit has {} entries, expected {}",
            left0.len(),
            phi0.n
        )));
    }
    if (grid.tau - model.tau).abs() > 1e-12 * model.tau {
        return Err(Error::Shape(format!(
            "history horizon {} differs from model delay {}",
            grid.tau, model.tau
        )));
    }
    if phi0.n != model.n {
        return Err(Error::Shape(format!(
            "history dimension {} vs model {}",
            phi0.n, model.n
        )));
    }
    if !(t_end >= 0.0) || !(dt > 0.0) {
        return Err(Error::Domain(format!(
            "need t_end >= 0 and dt > 0, got {t_end}, {dt}"
        )));
    }
    let h = grid.h();
    let q = (h / dt).round().max(1.0) as usize;
    if ((q as f64) * dt - h).abs() > 1e-9 * h {
        return Err(Error::Config(format!(
            "step {dt} does not divide the grid spacing {h}"
        )));
    }
    let steps = (t_end / dt).round() as usize;
    if (steps as f64 * dt - t_end).abs() > 1e-9 * dt.max(t_end) {
        return Err(Error::Config(format!(
            "final time {t_end} is not a multiple of the step {dt}"
        )));
    }
    let feedback = if with_gain {
        let gain = model
            .gain
            .clone()
            .ok_or_else(|| Error::Config("gain requested but the model has none".into()))?;
        Some((model.c_kernel.stencil(&grid)?, model.b_tilde.clone(), gain))
    } else {
        None
    };
    let rhs = Rhs {
        alpha: model.alpha.stencil(&grid)?,
        feedback,
    };
    let n = model.n;
    let ng = grid.ng;
    let offset = ng * q;
    let total = offset + steps + 1;
    let mut values = vec![0.0; total * n];
    let mut derivs = vec![0.0; total * n];

    // initial segment: node values with finite-difference slopes, refined to step resolution
    // history seen from the left: node ng reads the limit at 0-
    let hist = |i: usize, c: usize| if i == ng { left0[c] } else { phi0.node(i)[c] };
    let mut node_d = vec![0.0; (ng + 1) * n];
    for i in 0..=ng {
        for c in 0..n {
            let xm = if i > 0 { Some(hist(i - 1, c)) } else { None };
            let xp = if i < ng { Some(hist(i + 1, c)) } else { None };
            let x = hist(i, c);
            node_d[i * n + c] = match (xm, xp) {
                (Some(a), Some(b)) => (b - a) / (2.0 * h),
                (None, Some(b)) => (b - x) / h,
                (Some(a), None) => (x - a) / h,
                (None, None) => 0.0,
            };
        }
    }
    for p in 0..=offset {
        let i = p / q;
        let r = p % q;
        for c in 0..n {
            let (v, d) = if r == 0 {
                (phi0.node(i)[c], node_d[i * n + c])
            } else {
                let s = r as f64 / q as f64;
                let x0 = hist(i, c);
                let x1 = hist(i + 1, c);
                let d0 = node_d[i * n + c];
                let d1 = node_d[(i + 1) * n + c];
                let v = hermite(x0, x1, d0, d1, h, s);
                let s2 = s * s;
                let dv = ((6.0 * s2 - 6.0 * s) * x0
                    + (3.0 * s2 - 4.0 * s + 1.0) * h * d0
                    + (-6.0 * s2 + 6.0 * s) * x1
                    + (3.0 * s2 - 2.0 * s) * h * d1)
                    / h;
                (v, dv)
            };
            values[p * n + c] = v;
            derivs[p * n + c] = d;
        }
    }
    let d0_left = derivs[offset * n..(offset + 1) * n].to_vec();

    // delay node l sits (ng - l) * q steps behind the current time
    let mid = |values: &[f64], derivs: &[f64], p: usize, c: usize| -> f64 {
        let x0 = values[p * n + c];
        let x1 = values[(p + 1) * n + c];
        let d0 = derivs[p * n + c];
        let d1 = derivs[(p + 1) * n + c];
        0.5 * (x0 + x1) + dt * (d0 - d1) / 8.0
    };

    let mut stage_buf = vec![0.0; (ng + 1) * n];
    for j in 0..steps {
        let p = offset + j;
        let t = j as f64 * dt;
        // stage 1: all delayed values are stored points
        let k1 = rhs.eval(t, |l| {
            let pp = p - (ng - l) * q;
            &values[pp * n..(pp + 1) * n]
        });
        // right derivative at t_j; at t = 0 this replaces the history slope
        derivs[p * n..(p + 1) * n].copy_from_slice(&k1);
        let xj = values[p * n..(p + 1) * n].to_vec();

        // stages 2, 3 at the half step
        for l in 0..ng {
            let pp = p - (ng - l) * q;
            for c in 0..n {
                // left slope at the cell end is only distinct at t = 0
                let v = if pp + 1 == offset {
                    let x0 = values[pp * n + c];
                    0.5 * (x0 + left0[c]) + dt * (derivs[pp * n + c] - d0_left[c]) / 8.0
                } else {
                    mid(&values, &derivs, pp, c)
                };
                stage_buf[l * n + c] = v;
            }
        }
        let y2: Vec<f64> = (0..n).map(|c| xj[c] + 0.5 * dt * k1[c]).collect();
        stage_buf[ng * n..].copy_from_slice(&y2);
        let k2 = rhs.eval(t + 0.5 * dt, |l| &stage_buf[l * n..(l + 1) * n]);
        let y3: Vec<f64> = (0..n).map(|c| xj[c] + 0.5 * dt * k2[c]).collect();
        stage_buf[ng * n..].copy_from_slice(&y3);
        let k3 = rhs.eval(t + 0.5 * dt, |l| &stage_buf[l * n..(l + 1) * n]);

        // stage 4 at the full step
        for l in 0..ng {
            let pp = p + 1 - (ng - l) * q;
            let src = if pp == offset {
                left0
            } else {
                &values[pp * n..(pp + 1) * n]
            };
            stage_buf[l * n..(l + 1) * n].copy_from_slice(src);
        }
        let y4: Vec<f64> = (0..n).map(|c| xj[c] + dt * k3[c]).collect();
        stage_buf[ng * n..].copy_from_slice(&y4);
        let k4 = rhs.eval(t + dt, |l| &stage_buf[l * n..(l + 1) * n]);

        for c in 0..n {
            values[(p + 1) * n + c] =
                xj[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    // slope at the final point
    if steps > 0 || offset > 0 {
        let p = offset + steps;
        let kf = rhs.eval(steps as f64 * dt, |l| {
            let pp = p - (ng - l) * q;
            &values[pp * n..(pp + 1) * n]
        });
        derivs[p * n..(p + 1) * n].copy_from_slice(&kf);
    }
    Ok(Trajectory {
        grid,
        n,
        dt,
        q,
        steps,
        offset,
        values,
        derivs,
        d0_left,
    })
}

/// `G(t) phi0`: the stationary semigroup.
pub fn semigroup_apply(
    model: &LinearDelayModel,
    phi0: &HistoryElement,
    t: f64,
    dt: f64,
) -> Result<HistoryElement> {
    if t < 0.0 {
        return Err(Error::Domain(format!(
            "semigroup time must be nonnegative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(phi0.clone());
    }
    Ok(solve_linear(model, phi0, t, dt, false)?.final_snapshot())
}

/// The cocycle with the time-varying gain active.
pub fn cocycle_apply(
    model: &LinearDelayModel,
    phi0: &HistoryElement,
    t: f64,
    dt: f64,
) -> Result<HistoryElement> {
    if model.gain.is_none() {
        return Err(Error::Config("cocycle needs a gain".into()));
    }
    if t < 0.0 {
        return Err(Error::Domain(format!(
            "cocycle time must be nonnegative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(phi0.clone());
    }
    Ok(solve_linear(model, phi0, t, dt, true)?.final_snapshot())
}
