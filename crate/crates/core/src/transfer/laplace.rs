use super::embed::WedgeSum;
use crate::dde::{solve_linear_from, LinearDelayModel, Trajectory};
use crate::error::{Error, Result};
use crate::exterior::{wedge, CompoundGridFunction};
use crate::hilbert::HistoryElement;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceOptions {
    /// Truncation horizon `T`.
    pub horizon: f64,
    /// Integrator steps per grid cell.
    pub substeps: usize,
    /// Spectral bound `s` of the compound semigroup; `Re p` must exceed it.
    pub bound: f64,
}

impl LaplaceOptions {
    pub fn new(horizon: f64, bound: f64) -> Self {
        LaplaceOptions {
            horizon,
            substeps: 1,
            bound,
        }
    }
}

/// `int_0^1 (1 - s) e^{-z s} ds` and `int_0^1 s e^{-z s} ds`.
pub fn filon_phi(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.05 {
        let mut p0 = Complex64::new(0.0, 0.0);
        let mut p1 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..10 {
            let nf = n as f64;
            p0 += term / ((nf + 1.0) * (nf + 2.0));
            p1 += term / (nf + 2.0);
            term *= -z / (nf + 1.0);
        }
        return (p0, p1);
    }
    let e = (-z).exp();
    let z2 = z * z;
    ((z - 1.0 + e) / z2, (1.0 - e - z * e) / z2)
}

/// Weights `w_k` with `int_0^{K h} e^{-p t} q(t) dt = sum_k w_k q_k` for piecewise linear `q`.
pub fn laplace_weights(p: Complex64, h: f64, nodes: usize) -> Vec<Complex64> {
    let (a, b) = laplace_weight_pairs(p, h, nodes);
    a.iter().zip(&b).map(|(x, y)| x + y).collect()
}

/// The same weights split by side: `right[k]` multiplies `q(k h+)` as the left end
/// of its interval, `left[k]` multiplies `q(k h-)` as the right end.
pub fn laplace_weight_pairs(
    p: Complex64,
    h: f64,
    nodes: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut right = vec![Complex64::new(0.0, 0.0); nodes];
    let mut left = vec![Complex64::new(0.0, 0.0); nodes];
    if nodes < 2 {
        return (right, left);
    }
    let (p0, p1) = filon_phi(p * h);
    for k in 0..nodes - 1 {
        let e = (-p * (k as f64 * h)).exp() * h;
        right[k] += e * p0;
        left[k + 1] += e * p1;
    }
    (right, left)
}

/// Tail bound `M e^{-kappa T} / kappa` with `kappa = (Re p - s) / 2`.
///
/// `M` is the largest observed `|integrand(t)| e^{kappa t}`; `norms[k]` is the
/// norm of the undamped integrand at `t = k h`.
pub fn remainder_estimate(norms: &[f64], p: Complex64, h: f64, bound: f64) -> f64 {
    let kappa = 0.5 * (p.re - bound);
    if !(kappa > 0.0) {
        return f64::INFINITY;
    }
    let horizon = (norms.len().saturating_sub(1)) as f64 * h;
    let mut m = 0.0f64;
    for (k, n) in norms.iter().enumerate() {
        let t = k as f64 * h;
        m = m.max(n * ((kappa - p.re) * t).exp());
    }
    m * (-kappa * horizon).exp() / kappa
}

pub(crate) fn check_line(p: Complex64, bound: f64) -> Result<()> {
    if !(p.re > bound) {
        return Err(Error::LaplaceInvalid { re_p: p.re, bound });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct LaplaceResult {
    pub value: CompoundGridFunction<Complex64>,
    pub remainder: f64,
}

/// Solutions of each factor with the body limit at `0-` as the left value, so
/// that jump data (body and head disagreeing at zero) is integrated one-sidedly.
pub(crate) struct Runs {
    pub trs: Vec<Option<Trajectory>>,
    pub cells: usize,
    /// Body limit at `0-` of each factor.
    pub lefts: Vec<Vec<f64>>,
}

pub(crate) fn trajectories(
    model: &LinearDelayModel,
    factors: &[HistoryElement],
    horizon: f64,
    substeps: usize,
) -> Result<Runs> {
    let grid = factors[0].grid;
    let h = grid.h();
    let cells = (horizon / h).round() as usize;
    let dt = h / substeps.max(1) as f64;
    let trs = factors
        .iter()
        .map(|f| {
            if f.norm() == 0.0 {
                Ok(None)
            } else {
                solve_linear_from(model, f, &f.body_limit(), cells as f64 * h, dt, false).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let lefts = factors.iter().map(|f| f.body_limit()).collect();
    Ok(Runs { trs, cells, lefts })
}

/// `int_0^T e^{-p t} G(t) Phi dt` for `Phi` a sum of wedges; approximates `-(A - p)^{-1} Phi`.
///
/// Each factor is integrated once; the wedges are formed from snapshots at the
/// grid times and integrated with piecewise linear exponential weights.
pub fn resolvent_laplace(
    model: &LinearDelayModel,
    phi: &WedgeSum,
    p: Complex64,
    opts: &LaplaceOptions,
) -> Result<LaplaceResult> {
    check_line(p, opts.bound)?;
    let first = phi
        .terms
        .first()
        .ok_or_else(|| Error::Shape("empty wedge sum".into()))?;
    let grid = first.1[0].grid;
    let m = phi.order();
    let n = first.1[0].n;
    let h = grid.h();
    let runs = phi
        .terms
        .iter()
        .map(|(c, f)| trajectories(model, f, opts.horizon, opts.substeps).map(|r| (*c, r)))
        .collect::<Result<Vec<_>>>()?;
    let cells = runs.first().map_or(0, |r| r.1.cells);
    let (w_right, w_left) = laplace_weight_pairs(p, h, cells + 1);
    let ng = grid.ng;
    let mut value = CompoundGridFunction::<Complex64>::zeros(grid, m, n);
    let mut norms = vec![0.0; cells + 1];
    for k in 0..=cells {
        // the node reading time zero takes the left limit for k in 1..=ng
        let jump = k >= 1 && k <= ng;
        let mut right = CompoundGridFunction::<f64>::zeros(grid, m, n);
        let mut left = CompoundGridFunction::<f64>::zeros(grid, m, n);
        let mut live = false;
        for (c, r) in &runs {
            if r.trs.iter().any(|t| t.is_none()) {
                continue;
            }
            let snaps: Vec<HistoryElement> = r
                .trs
                .iter()
                .map(|t| t.as_ref().unwrap())
                .map(|t| t.snapshot(k * t.q))
                .collect();
            let refs: Vec<&HistoryElement> = snaps.iter().collect();
            let wr = wedge(&refs)?;
            if jump {
                let lsnaps: Vec<HistoryElement> = snaps
                    .iter()
                    .zip(&r.lefts)
                    .map(|(s, l)| {
                        let mut s = s.clone();
                        s.node_mut(ng - k).copy_from_slice(l);
                        s
                    })
                    .collect();
                let lrefs: Vec<&HistoryElement> = lsnaps.iter().collect();
                left.axpy(*c, &wedge(&lrefs)?)?;
            } else {
                left.axpy(*c, &wr)?;
            }
            right.axpy(*c, &wr)?;
            live = true;
        }
        if !live {
            continue;
        }
        norms[k] = right.norm();
        for ((o, v), u) in value
            .data_mut()
            .iter_mut()
            .zip(right.data())
            .zip(left.data())
        {
            *o += w_right[k] * v + w_left[k] * u;
        }
    }
    value.antisymmetric = true;
    let remainder = remainder_estimate(&norms, p, h, opts.bound);
    Ok(LaplaceResult { value, remainder })
}
