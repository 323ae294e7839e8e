use super::basis::ProperBasis;
use super::embed::{control_wedge, measurement_project, scalar_io, WedgeSum};
use super::laplace::{
    check_line, laplace_weight_pairs, remainder_estimate, resolvent_laplace, trajectories,
    LaplaceOptions,
};
use crate::dde::LinearDelayModel;
use crate::error::{Error, Result};
use crate::hilbert::HistoryElement;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct TransferMatrix {
    pub p: Complex64,
    pub horizon: f64,
    /// `N_M x N_U`.
    pub matrix: DMatrix<Complex64>,
    pub remainder: f64,
}

impl TransferMatrix {
    /// Leading `rows x cols` block, the matrix for nested smaller bases.
    pub fn block(&self, rows: usize, cols: usize) -> DMatrix<Complex64> {
        self.matrix
            .view(
                (0, 0),
                (rows.min(self.matrix.nrows()), cols.min(self.matrix.ncols())),
            )
            .into_owned()
    }
}

/// Time-domain kernel `Q(t)` with `W(p) = -int e^{-p t} Q(t) dt`.
///
/// For control element `zeta_K` and measurement element `zeta_K'`, `Q(t)` is the
/// determinant of the `m x m` matrix whose columns are the images `G(t) psi_k`
/// (for `k` in `K`, then `psi_inf`), read through the measurement kernel in the
/// first row and through `<e_k', .>` for `k'` in `K'` in the remaining `m - 1`.
#[derive(Clone, Debug)]
pub struct TransferKernel {
    pub h: f64,
    pub horizon: f64,
    pub rows: usize,
    pub cols: usize,
    /// `values[t][row * cols + col]` at `t = k h`.
    pub values: Vec<Vec<f64>>,
    /// Left limits `Q(k h-)` for `k` in `1..=ng`, where `Q` may jump.
    pub left_values: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
}

impl TransferKernel {
    pub fn build(
        model: &LinearDelayModel,
        control: &ProperBasis,
        measurement: &ProperBasis,
        horizon: f64,
        substeps: usize,
    ) -> Result<Self> {
        let b = scalar_io(model)?;
        if control.grid != measurement.grid || control.m != measurement.m {
            return Err(Error::Shape(
                "control and measurement bases differ in grid or order".into(),
            ));
        }
        let grid = control.grid;
        if (grid.tau - model.tau).abs() > 1e-12 * model.tau {
            return Err(Error::Shape("basis grid and model delay differ".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::Config(format!(
                "Laplace horizon must be positive, got {horizon}"
            )));
        }
        let m = control.m;
        let ng = grid.ng;
        let h = grid.h();
        // univariate functions driven through the semigroup: control ones plus psi_inf
        let nu_c = control.univariate.len().max(
            control
                .tuples
                .iter()
                .flatten()
                .map(|k| k + 1)
                .max()
                .unwrap_or(0),
        );
        let nu_m = measurement
            .tuples
            .iter()
            .flatten()
            .map(|k| k + 1)
            .max()
            .unwrap_or(0);
        let mut factors: Vec<HistoryElement> = (0..nu_c)
            .map(|k| HistoryElement::new(grid, 1, vec![0.0], control.univariate[k].clone()))
            .collect::<Result<_>>()?;
        factors.push(HistoryElement::head_only(grid, vec![b]));
        let runs = trajectories(model, &factors, horizon, substeps)?;
        let cells = runs.cells;
        let cstencil = model.c_kernel.stencil(&grid)?.scalar_entries();
        let bw: Vec<f64> = (0..ng).map(|i| grid.body_weight(i)).collect();
        let nf = factors.len();
        // grid-resolution paths: node i of the snapshot at step s is path[s + i]
        let paths: Vec<Vec<f64>> = runs
            .trs
            .iter()
            .map(|t| match t {
                Some(t) => {
                    let q = t.q as isize;
                    (-(ng as isize)..=cells as isize)
                        .map(|s| t.x(s * q)[0])
                        .collect()
                }
                None => vec![0.0; ng + cells + 1],
            })
            .collect();
        let rows = measurement.len();
        let cols = control.len();
        let mut s_mat = vec![0.0; nu_m * nf];
        let mut cvals = vec![0.0; nf];
        let mut pm = DMatrix::<f64>::zeros(m, m);
        let mut win = vec![0.0; ng + 1];
        // kernel at step s; with `left` the node reading time zero takes the 0- limit
        let mut eval = |s: usize, left: bool| -> Vec<f64> {
            for f in 0..nf {
                win.copy_from_slice(&paths[f][s..s + ng + 1]);
                if left {
                    win[ng - s] = runs.lefts[f][0];
                }
                cvals[f] = cstencil.iter().map(|&(l, a)| a * win[l]).sum();
                for k in 0..nu_m {
                    let e = &measurement.univariate[k];
                    s_mat[k * nf + f] = (0..ng).map(|i| bw[i] * e[i] * win[i]).sum();
                }
            }
            let mut q = vec![0.0; rows * cols];
            for (r, kp) in measurement.tuples.iter().enumerate() {
                for (c, kc) in control.tuples.iter().enumerate() {
                    let col_of = |j: usize| if j < m - 1 { kc[j] } else { nf - 1 };
                    q[r * cols + c] = match m {
                        1 => cvals[nf - 1],
                        2 => {
                            let (a, inf) = (col_of(0), nf - 1);
                            cvals[a] * s_mat[kp[0] * nf + inf] - cvals[inf] * s_mat[kp[0] * nf + a]
                        }
                        _ => {
                            for i in 0..m {
                                for j in 0..m {
                                    pm[(i, j)] = if i == 0 {
                                        cvals[col_of(j)]
                                    } else {
                                        s_mat[kp[i - 1] * nf + col_of(j)]
                                    };
                                }
                            }
                            pm.determinant()
                        }
                    };
                }
            }
            q
        };
        let mut values = Vec::with_capacity(cells + 1);
        let mut norms = Vec::with_capacity(cells + 1);
        for s in 0..=cells {
            let q = eval(s, false);
            norms.push(q.iter().map(|v| v * v).sum::<f64>().sqrt());
            values.push(q);
        }
        let left_values: Vec<Vec<f64>> = (1..=ng.min(cells)).map(|s| eval(s, true)).collect();
        // trailing values below roundoff contribute nothing; one negligible node
        // is kept so the last live interval is still integrated
        let peak = norms.iter().cloned().fold(0.0, f64::max);
        let live = |k: usize| {
            let l = if k >= 1 {
                left_values
                    .get(k - 1)
                    .map_or(0.0, |q| q.iter().map(|v| v * v).sum::<f64>().sqrt())
            } else {
                0.0
            };
            norms[k].max(l) > 1e-15 * peak
        };
        let last = (0..values.len()).rev().find(|&k| live(k)).unwrap_or(0);
        values.truncate((last + 2).min(values.len()).max(values.len().min(2)));
        Ok(TransferKernel {
            h,
            horizon: cells as f64 * h,
            rows,
            cols,
            values,
            left_values,
            norms,
        })
    }

    /// `W(p)` by integrating the kernel against `e^{-p t}`.
    pub fn evaluate(&self, p: Complex64, bound: f64) -> Result<TransferMatrix> {
        check_line(p, bound)?;
        let (w_right, w_left) = laplace_weight_pairs(p, self.h, self.values.len());
        let mut acc = vec![Complex64::new(0.0, 0.0); self.rows * self.cols];
        for (k, q) in self.values.iter().enumerate() {
            let ql = if k >= 1 {
                self.left_values.get(k - 1).unwrap_or(q)
            } else {
                q
            };
            for ((a, v), u) in acc.iter_mut().zip(q).zip(ql) {
                *a += w_right[k] * v + w_left[k] * u;
            }
        }
        let matrix = DMatrix::from_fn(self.rows, self.cols, |r, c| -acc[r * self.cols + c]);
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Domain(
                "transfer matrix has non-finite entries".into(),
            ));
        }
        let remainder = remainder_estimate(&self.norms, p, self.h, bound);
        Ok(TransferMatrix {
            p,
            horizon: self.horizon,
            matrix,
            remainder,
        })
    }
}

/// `P_M W(p) P_U` with `W(p) = C^ (A - p)^{-1} B^`, through the time-domain kernel.
pub fn transfer_matrix(
    model: &LinearDelayModel,
    p: Complex64,
    control: &ProperBasis,
    measurement: &ProperBasis,
    opts: &LaplaceOptions,
) -> Result<TransferMatrix> {
    check_line(p, opts.bound)?;
    TransferKernel::build(model, control, measurement, opts.horizon, opts.substeps)?
        .evaluate(p, opts.bound)
}

/// Column by column through `resolvent_laplace` and `measurement_project`.
///
/// Much slower than [`transfer_matrix`]; kept as an independent route.
pub fn transfer_matrix_generic(
    model: &LinearDelayModel,
    p: Complex64,
    control: &ProperBasis,
    measurement: &ProperBasis,
    opts: &LaplaceOptions,
) -> Result<TransferMatrix> {
    let mut matrix = DMatrix::zeros(measurement.len(), control.len());
    let mut remainder = 0.0f64;
    for c in 0..control.len() {
        let WedgeSum { terms } = control_wedge(model, control, c)?;
        let neg = WedgeSum {
            terms: terms.into_iter().map(|(k, f)| (-k, f)).collect(),
        };
        let res = resolvent_laplace(model, &neg, p, opts)?;
        remainder = remainder.max(res.remainder);
        let col = measurement_project(model, &res.value, measurement)?;
        for (r, v) in col.into_iter().enumerate() {
            matrix[(r, c)] = v;
        }
    }
    Ok(TransferMatrix {
        p,
        horizon: opts.horizon,
        matrix,
        remainder,
    })
}
