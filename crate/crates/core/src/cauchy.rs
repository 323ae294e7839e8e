//! Adorned and twisted decomposition of compound inhomogeneous solutions, and
//! pointwise measurements of face time series.
//!
//! Face grids are dense arrays over body nodes `{0..N_g}^k` (row-major over the
//! face slots) times tensor components. Closed face grids also carry the index
//! `N_g`, which reads the lower face at `theta = 0`.

use crate::dde::{solve_linear, LinearDelayModel, Trajectory};
use crate::error::{Error, Result};
use crate::exterior::{
    comp_coords, comp_flat, for_each_index, tensor, trace_jump, CompoundGridFunction, FaceIndex,
    TRACE_TOL,
};
use crate::hilbert::{Grid, HistoryElement, StieltjesKernel};
use crate::scalar::Scalar;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

/// `rho(t) = e^{nu t}`.
pub fn rho(nu: f64, t: f64) -> f64 {
    (nu * t).exp()
}

/// `rho0` with `rho(t + s) <= rho0 rho(t)` for `s` in `[0, tau]`.
pub fn rho0(nu: f64, tau: f64) -> f64 {
    1f64.max((nu * tau).exp())
}

fn flat_of(idx: &[usize], side: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * side + i)
}

/// Closed grid of one face: `{0..=N_g}^k` nodes, index `N_g` reading the lower faces.
fn closed_face<T: Scalar>(phi: &CompoundGridFunction<T>, face: FaceIndex) -> Vec<T> {
    let slots = face.slots();
    let ng = phi.grid.ng;
    let mut out = Vec::with_capacity((ng + 1).pow(slots.len() as u32) * phi.comps());
    let mut idx = vec![ng; phi.m];
    for_each_index(slots.len(), ng + 1, |_, sub| {
        for (k, &j) in slots.iter().enumerate() {
            idx[j] = sub[k];
        }
        out.extend_from_slice(phi.at(&idx));
    });
    out
}

/// `X` on the diagonal prism of one face: the initial cube plus, for every time
/// step, the values entering through the faces `theta_l = 0`.
#[derive(Clone, Debug)]
pub struct AdornedSource {
    pub grid: Grid,
    pub k: usize,
    pub comps: usize,
    pub nu: f64,
    /// Body nodes of the face at `t = 0`.
    pub initial: Vec<f64>,
    /// `layers[step][l]`: closed grid over the other `k - 1` face slots with slot `l` at zero.
    pub layers: Vec<Vec<Vec<f64>>>,
}

impl AdornedSource {
    /// `X` constant equal to `value` (one entry per component) for `steps` steps.
    pub fn constant(grid: Grid, k: usize, nu: f64, value: &[f64], steps: usize) -> Self {
        let c = value.len();
        let cube: Vec<f64> = value
            .iter()
            .cloned()
            .cycle()
            .take(grid.ng.pow(k as u32) * c)
            .collect();
        let layer: Vec<f64> = value
            .iter()
            .cloned()
            .cycle()
            .take((grid.ng + 1).pow(k as u32 - 1) * c)
            .collect();
        AdornedSource {
            grid,
            k,
            comps: c,
            nu,
            initial: cube,
            layers: vec![vec![layer; k]; steps + 1],
        }
    }

    pub fn steps(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    fn shell_value(&self, step: usize, p: &[usize]) -> &[f64] {
        let ng = self.grid.ng;
        let l = p.iter().position(|&i| i == ng).unwrap();
        let rest: Vec<usize> = p
            .iter()
            .enumerate()
            .filter(|&(s, _)| s != l)
            .map(|(_, &i)| i)
            .collect();
        let f = flat_of(&rest, ng + 1);
        &self.layers[step][l][f * self.comps..(f + 1) * self.comps]
    }

    /// `rho(t) X(theta + t)` on the body nodes at `t = step h`.
    pub fn adorn(&self, step: usize) -> Result<Vec<f64>> {
        if step > self.steps() {
            return Err(Error::Domain(format!(
                "step {step} beyond the stored {} steps",
                self.steps()
            )));
        }
        let ng = self.grid.ng;
        let c = self.comps;
        let r = rho(self.nu, step as f64 * self.grid.h());
        let mut out = vec![0.0; ng.pow(self.k as u32) * c];
        let mut p = vec![0usize; self.k];
        for_each_index(self.k, ng, |flat, idx| {
            let top = idx.iter().copied().max().unwrap_or(0);
            let src: &[f64] = if top + step < ng {
                for (q, &i) in p.iter_mut().zip(idx) {
                    *q = i + step;
                }
                let f = flat_of(&p, ng);
                &self.initial[f * c..(f + 1) * c]
            } else {
                // entered through a zero face at step top + step - ng
                for (q, &i) in p.iter_mut().zip(idx) {
                    *q = i + ng - top;
                }
                self.shell_value(top + step - ng, &p)
            };
            for (o, v) in out[flat * c..(flat + 1) * c].iter_mut().zip(src) {
                *o = r * v;
            }
        });
        Ok(out)
    }
}

/// Time series `Y(t)` of closed face grids.
#[derive(Clone, Debug)]
pub struct TwistedSource {
    pub grid: Grid,
    pub k: usize,
    pub comps: usize,
    pub nu: f64,
    pub y: Vec<Vec<f64>>,
}

impl TwistedSource {
    /// `rho(t) int_0^t T(t - s) Y(s) ds` at `t = step h`, trapezoid in `s`.
    ///
    /// Along the characteristic through a node the integrand is supported on
    /// `s >= t + max theta`, a grid time, so the rule needs no cut cells.
    pub fn twist(&self, step: usize) -> Result<Vec<f64>> {
        if step >= self.y.len() {
            return Err(Error::Domain(format!(
                "step {step} beyond the stored {} values",
                self.y.len()
            )));
        }
        let ng = self.grid.ng;
        let h = self.grid.h();
        let c = self.comps;
        let r = rho(self.nu, step as f64 * h);
        let mut out = vec![0.0; ng.pow(self.k as u32) * c];
        let mut p = vec![0usize; self.k];
        for_each_index(self.k, ng, |flat, idx| {
            let top = idx.iter().copied().max().unwrap_or(0);
            let j0 = (step + top).saturating_sub(ng);
            if j0 >= step {
                return;
            }
            for j in j0..=step {
                let w = if j == j0 || j == step { 0.5 * h } else { h };
                for (q, &i) in p.iter_mut().zip(idx) {
                    *q = i + step - j;
                }
                let f = flat_of(&p, ng + 1);
                for (o, v) in out[flat * c..(flat + 1) * c]
                    .iter_mut()
                    .zip(&self.y[j][f * c..(f + 1) * c])
                {
                    *o += r * w * v;
                }
            }
        });
        Ok(out)
    }
}

/// `eta_nu(t_k) = profile[k] * (psi_1 (x) ... (x) psi_m)`.
#[derive(Clone, Debug)]
pub struct Forcing {
    pub factors: Vec<HistoryElement>,
    pub profile: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FaceDecomposition {
    pub face: FaceIndex,
    pub adorned: AdornedSource,
    pub twisted: TwistedSource,
    /// `|R Phi_nu(t) - adorn(t) - twist(t)|` per time step.
    pub residuals: Vec<f64>,
    /// `|R Phi_nu(t)|` per time step.
    pub norms: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionSummary {
    pub h: f64,
    pub steps: usize,
    pub max_residual: f64,
    pub max_relative_residual: f64,
    /// `(|adorned|^2 + |twisted|^2) / (|Phi0|^2 + int |Phi|^2 + int |eta|^2)` on the top face.
    pub norm_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub h: f64,
    pub steps: usize,
    pub faces: Vec<FaceDecomposition>,
    pub summary: DecompositionSummary,
}

fn face_norm(values: &[f64], k: usize, grid: &Grid, comps: usize) -> f64 {
    let ng = grid.ng;
    let mut s = 0.0;
    for_each_index(k, ng, |flat, idx| {
        let w: f64 = idx.iter().map(|&i| grid.body_weight(i)).product();
        s += w * values[flat * comps..(flat + 1) * comps]
            .iter()
            .map(|v| v * v)
            .sum::<f64>();
    });
    s.sqrt()
}

fn body_of_closed(closed: &[f64], k: usize, ng: usize, comps: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(ng.pow(k as u32) * comps);
    for_each_index(k, ng, |_, idx| {
        let f = flat_of(idx, ng + 1);
        out.extend_from_slice(&closed[f * comps..(f + 1) * comps]);
    });
    out
}

fn snapshots(tr: &Trajectory, steps: usize) -> Vec<HistoryElement> {
    (0..=steps).map(|k| tr.snapshot(k * tr.q)).collect()
}

/// Solves `Phi' = (A + nu) Phi + eta_nu` from `Phi0 = phi_1 (x) ... (x) phi_m` and
/// splits every face of positive dimension into its adorned and twisted parts.
///
/// The solution comes from the Duhamel form, one trajectory per factor, at time
/// steps equal to the grid spacing.
pub fn decompose_solution(
    model: &LinearDelayModel,
    phi0: &[HistoryElement],
    forcing: Option<&Forcing>,
    nu: f64,
    t_end: f64,
) -> Result<Decomposition> {
    let first = phi0
        .first()
        .ok_or_else(|| Error::Shape("no initial factors".into()))?;
    let grid = first.grid;
    let m = phi0.len();
    let n = model.n;
    let ng = grid.ng;
    let h = grid.h();
    let steps = (t_end / h).round() as usize;
    if steps == 0 || (steps as f64 * h - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Config(format!(
            "final time {t_end} is not a positive multiple of h = {h}"
        )));
    }
    let refs: Vec<&HistoryElement> = phi0.iter().collect();
    let init = tensor(&refs)?;
    let jump = trace_jump(&init);
    if jump > TRACE_TOL {
        return Err(Error::Domain(format!(
            "initial data not in the domain: trace jump {jump:.3e}"
        )));
    }
    if let Some(f) = forcing {
        if f.factors.len() != m || f.profile.len() < steps + 1 {
            return Err(Error::Shape(format!(
                "forcing needs {m} factors and {} profile values",
                steps + 1
            )));
        }
    }
    let t_total = steps as f64 * h;
    let run = |f: &HistoryElement| {
        solve_linear(model, f, t_total, h, false).map(|t| snapshots(&t, steps))
    };
    let phi_snaps = phi0.iter().map(run).collect::<Result<Vec<_>>>()?;
    let eta_snaps = match forcing {
        Some(f) => f.factors.iter().map(run).collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let eta_weight =
        |j: usize| -> f64 { forcing.map_or(0.0, |f| f.profile[j] * rho(-nu, j as f64 * h)) };
    let eta_tensor = match forcing {
        Some(f) => Some(tensor(&f.factors.iter().collect::<Vec<_>>())?),
        None => None,
    };

    // unweighted solution Phi = e^{-nu t} Phi_nu
    let mut sol = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let r: Vec<&HistoryElement> = phi_snaps.iter().map(|s| &s[k]).collect();
        let mut phi = tensor(&r)?;
        if !eta_snaps.is_empty() && k > 0 {
            for j in 0..=k {
                let w = if j == 0 || j == k { 0.5 * h } else { h } * eta_weight(j);
                if w == 0.0 {
                    continue;
                }
                let r: Vec<&HistoryElement> = eta_snaps.iter().map(|s| &s[k - j]).collect();
                phi.axpy(w, &tensor(&r)?)?;
            }
        }
        sol.push(phi);
    }

    let stencil = model.alpha.stencil(&grid)?;
    let comps = init.comps();
    let comp_idx: Vec<Vec<usize>> = (0..comps).map(|c| comp_coords(c, n, m)).collect();
    let mut faces = Vec::new();
    let mut norm_ratio = 0.0;
    for face in FaceIndex::all(m).into_iter().filter(|f| f.size() > 0) {
        let slots = face.slots();
        let k = slots.len();
        let outside = face.complement();
        let layers: Vec<Vec<Vec<f64>>> = sol
            .iter()
            .map(|phi| {
                let closed = closed_face(phi, face);
                (0..k)
                    .map(|l| {
                        let mut out = Vec::with_capacity((ng + 1).pow(k as u32 - 1) * comps);
                        let mut full = vec![0usize; k];
                        for_each_index(k - 1, ng + 1, |_, sub| {
                            let mut it = sub.iter();
                            for (s, v) in full.iter_mut().enumerate() {
                                *v = if s == l { ng } else { *it.next().unwrap() };
                            }
                            let f = flat_of(&full, ng + 1);
                            out.extend_from_slice(&closed[f * comps..(f + 1) * comps]);
                        });
                        out
                    })
                    .collect()
            })
            .collect();
        let adorned = AdornedSource {
            grid,
            k,
            comps,
            nu,
            initial: init.face(face),
            layers,
        };
        // Y = R eta + sum over slots at zero of the kernel along that slot
        let eta_face = eta_tensor.as_ref().map(|e| closed_face(e, face));
        let y: Vec<Vec<f64>> = (0..=steps)
            .map(|j| {
                let mut out = eta_face.as_ref().map_or_else(
                    || vec![0.0; (ng + 1).pow(k as u32) * comps],
                    |e| e.iter().map(|v| v * eta_weight(j)).collect(),
                );
                let phi = &sol[j];
                let mut idx = vec![ng; m];
                for_each_index(k, ng + 1, |flat, sub| {
                    for (q, &s) in slots.iter().enumerate() {
                        idx[s] = sub[q];
                    }
                    for &jo in &outside {
                        let keep = idx[jo];
                        for (l, mat) in &stencil.entries {
                            idx[jo] = *l;
                            let v = phi.at(&idx);
                            for (c, ck) in comp_idx.iter().enumerate() {
                                let mut cc = ck.clone();
                                let mut s = 0.0;
                                for q in 0..n {
                                    cc[jo] = q;
                                    s += mat[(ck[jo], q)] * v[comp_flat(&cc, n)];
                                }
                                out[flat * comps + c] += s;
                            }
                        }
                        idx[jo] = keep;
                    }
                });
                out
            })
            .collect();
        let twisted = TwistedSource {
            grid,
            k,
            comps,
            nu,
            y,
        };

        let mut residuals = Vec::with_capacity(steps + 1);
        let mut norms = Vec::with_capacity(steps + 1);
        let (mut adorn_sq, mut sol_sq) = (0.0, 0.0);
        for (step, phi) in sol.iter().enumerate() {
            let r = rho(nu, step as f64 * h);
            let actual: Vec<f64> = body_of_closed(&closed_face(phi, face), k, ng, comps)
                .iter()
                .map(|v| r * v)
                .collect();
            let a = adorned.adorn(step)?;
            let t = twisted.twist(step)?;
            let diff: Vec<f64> = actual
                .iter()
                .zip(&a)
                .zip(&t)
                .map(|((x, y), z)| x - y - z)
                .collect();
            residuals.push(face_norm(&diff, k, &grid, comps));
            let nrm = face_norm(&actual, k, &grid, comps);
            norms.push(nrm);
            let w = if step == 0 || step == steps {
                0.5 * h
            } else {
                h
            };
            adorn_sq += w * face_norm(&a, k, &grid, comps).powi(2);
            sol_sq += w * nrm * nrm;
        }
        if k == m {
            let twist_sq: f64 = (0..=steps)
                .map(|j| {
                    let w = if j == 0 || j == steps { 0.5 * h } else { h };
                    let body = body_of_closed(&twisted.y[j], k, ng, comps);
                    w * (rho(nu, j as f64 * h) * face_norm(&body, k, &grid, comps)).powi(2)
                })
                .sum();
            let eta_sq: f64 = match &eta_face {
                Some(e) => {
                    let body = body_of_closed(e, k, ng, comps);
                    let base = face_norm(&body, k, &grid, comps).powi(2);
                    (0..=steps)
                        .map(|j| {
                            let w = if j == 0 || j == steps { 0.5 * h } else { h };
                            w * base * forcing.unwrap().profile[j].powi(2)
                        })
                        .sum()
                }
                None => 0.0,
            };
            let denom = init.norm().powi(2) + sol_sq + eta_sq;
            norm_ratio = if denom > 0.0 {
                (adorn_sq + twist_sq) / denom
            } else {
                0.0
            };
        }
        faces.push(FaceDecomposition {
            face,
            adorned,
            twisted,
            residuals,
            norms,
        });
    }
    let max_residual = faces
        .iter()
        .flat_map(|f| f.residuals.iter())
        .cloned()
        .fold(0.0, f64::max);
    let scale = faces
        .iter()
        .flat_map(|f| f.norms.iter())
        .cloned()
        .fold(0.0, f64::max);
    let summary = DecompositionSummary {
        h,
        steps,
        max_residual,
        max_relative_residual: if scale > 0.0 {
            max_residual / scale
        } else {
            0.0
        },
        norm_ratio,
    };
    Ok(Decomposition {
        h,
        steps,
        faces,
        summary,
    })
}

/// Applies a scalar kernel along `slot` of `face` at every time node.
///
/// Atoms at zero read the lower face. The result lives on the body nodes of
/// the face without `slot`.
pub fn pointwise_measure_series<T: Scalar>(
    series: &[CompoundGridFunction<T>],
    face: FaceIndex,
    slot: usize,
    kernel: &StieltjesKernel,
) -> Result<Vec<Vec<T>>> {
    let first = series
        .first()
        .ok_or_else(|| Error::Shape("empty time series".into()))?;
    if !face.contains(slot) || face.m != first.m {
        return Err(Error::Shape(format!(
            "slot {slot} is not a body slot of face {face}"
        )));
    }
    let grid = first.grid;
    if kernel.out_dim != 1 || kernel.in_dim != 1 {
        return Err(Error::Config(
            "pointwise measurement takes a scalar kernel".into(),
        ));
    }
    let stencil = kernel.stencil(&grid)?.scalar_entries();
    let rest: Vec<usize> = face.slots().into_iter().filter(|&s| s != slot).collect();
    let ng = grid.ng;
    let c = first.comps();
    series
        .iter()
        .map(|phi| {
            if phi.grid != grid || phi.m != first.m || phi.n != first.n {
                return Err(Error::Shape("time series elements differ in shape".into()));
            }
            let mut out = vec![T::zero(); ng.pow(rest.len() as u32) * c];
            let mut idx = vec![ng; phi.m];
            for_each_index(rest.len(), ng, |flat, sub| {
                for (q, &s) in rest.iter().enumerate() {
                    idx[s] = sub[q];
                }
                for &(l, a) in &stencil {
                    idx[slot] = l;
                    for (o, v) in out[flat * c..(flat + 1) * c].iter_mut().zip(phi.at(&idx)) {
                        *o += *v * a;
                    }
                }
            });
            Ok(out)
        })
        .collect()
}

/// Discrete Fourier transform along time of a series of compound elements,
/// zero-padded to `len` nodes.
pub fn fourier_series(
    series: &[CompoundGridFunction<Complex64>],
    len: usize,
) -> Result<Vec<CompoundGridFunction<Complex64>>> {
    let first = series
        .first()
        .ok_or_else(|| Error::Shape("empty time series".into()))?;
    if len < series.len() {
        return Err(Error::Config(format!(
            "padded length {len} is shorter than the series"
        )));
    }
    let fft = FftPlanner::new().plan_fft_forward(len);
    let size = first.data().len();
    let mut out: Vec<CompoundGridFunction<Complex64>> = (0..len)
        .map(|_| CompoundGridFunction::zeros(first.grid, first.m, first.n))
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for e in 0..size {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (b, s) in buf.iter_mut().zip(series) {
            *b = s.data()[e];
        }
        fft.process(&mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            o.data_mut()[e] = *b;
        }
    }
    Ok(out)
}

fn fourier_vectors(series: &[Vec<Complex64>], len: usize) -> Vec<Vec<Complex64>> {
    let fft = FftPlanner::new().plan_fft_forward(len);
    let size = series.first().map_or(0, |s| s.len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); size]; len];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for e in 0..size {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (b, s) in buf.iter_mut().zip(series) {
            *b = s[e];
        }
        fft.process(&mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            o[e] = *b;
        }
    }
    out
}

/// Relative difference between "measure, then transform" and "transform, then measure".
pub fn fourier_commutation_residual(
    series: &[CompoundGridFunction<f64>],
    face: FaceIndex,
    slot: usize,
    kernel: &StieltjesKernel,
    padded_len: usize,
) -> Result<f64> {
    let cseries: Vec<CompoundGridFunction<Complex64>> =
        series.iter().map(|s| s.to_complex()).collect();
    let measured = pointwise_measure_series(&cseries, face, slot, kernel)?;
    let a = fourier_vectors(&measured, padded_len);
    let b = pointwise_measure_series(&fourier_series(&cseries, padded_len)?, face, slot, kernel)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        for (u, v) in x.iter().zip(y) {
            num += (u - v).norm_sqr();
            den += v.norm_sqr();
        }
    }
    Ok(if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    })
}
