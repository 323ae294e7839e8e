//! Direct solve of `(A_h - p) Phi = Psi` for the discretized additive compound.
//!
//! On the top face the equation is a pure upwind transport, so each top node is
//! `r^d Phi(exit) + U(i)` with `r = 1 / (1 + p h)`, where `exit` is the node where
//! its diagonal meets a lower face. Substituting this into the lower-face
//! equations leaves a dense system in the lower-face unknowns only.

use crate::dde::LinearDelayModel;
use crate::error::{Error, Result};
use crate::exterior::{
    check_antisymmetry, comp_coords, comp_flat, for_each_index, CompoundGridFunction,
};
use crate::hilbert::{Grid, Stencil};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

/// Largest number of lower-face unknowns accepted by the dense solver.
pub const MAX_DENSE_UNKNOWNS: usize = 3000;

/// Pivot ratios below this are reported as a conditioning failure.
pub const PIVOT_TOL: f64 = 1e-13;

#[derive(Clone, Debug, Serialize)]
pub struct DenseDiagnostics {
    pub unknowns: usize,
    pub pivot_ratio: f64,
    /// `|(A_h - p) Phi - Psi| / |Psi|`.
    pub residual: f64,
    pub antisymmetry_violation: f64,
}

#[derive(Clone, Debug)]
pub struct DenseSolution {
    pub value: CompoundGridFunction<Complex64>,
    pub diagnostics: DenseDiagnostics,
}

struct Layout {
    m: usize,
    n: usize,
    ng: usize,
    comps: usize,
    /// Position of each closed node among the lower-face nodes (`usize::MAX` on the top face).
    pos: Vec<usize>,
    lower: Vec<usize>,
}

impl Layout {
    fn new(grid: &Grid, m: usize, n: usize) -> Self {
        let ng = grid.ng;
        let side = ng + 1;
        let total = side.pow(m as u32);
        let mut pos = vec![usize::MAX; total];
        let mut lower = Vec::new();
        for_each_index(m, side, |flat, idx| {
            if idx.iter().any(|&i| i == ng) {
                pos[flat] = lower.len();
                lower.push(flat);
            }
        });
        Layout {
            m,
            n,
            ng,
            comps: n.pow(m as u32),
            pos,
            lower,
        }
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * (self.ng + 1) + i)
    }

    fn unknowns(&self) -> usize {
        self.lower.len() * self.comps
    }
}

fn transport_factor(p: Complex64, h: f64) -> Result<Complex64> {
    let d = Complex64::new(1.0, 0.0) + p * h;
    if d.norm() < 1e-14 {
        return Err(Error::Conditioning { ratio: 0.0 });
    }
    Ok(d.inv())
}

/// Particular part `U` on the top face: zero exit data, driven by `Psi`.
fn top_particular(lay: &Layout, psi: &[Complex64], r: Complex64, h: f64) -> Vec<Complex64> {
    let c = lay.comps;
    let mut u = vec![Complex64::new(0.0, 0.0); psi.len()];
    let step = (0..lay.m).fold(0, |acc, _| acc * (lay.ng + 1) + 1);
    // descending flat order visits i + (1,..,1) before i
    for flat in (0..lay.pos.len()).rev() {
        if lay.pos[flat] != usize::MAX {
            continue;
        }
        let next = flat + step;
        for k in 0..c {
            let ahead = if lay.pos[next] == usize::MAX {
                u[next * c + k]
            } else {
                Complex64::new(0.0, 0.0)
            };
            u[flat * c + k] = r * ahead - r * h * psi[flat * c + k];
        }
    }
    u
}

/// Exit node and distance of a top-face node.
fn exit_of(lay: &Layout, idx: &[usize], buf: &mut Vec<usize>) -> usize {
    let d = lay.ng - idx.iter().copied().max().unwrap();
    buf.clear();
    buf.extend(idx.iter().map(|&i| i + d));
    d
}

/// Lower-face system matrix and right-hand side.
fn assemble(
    lay: &Layout,
    stencil: &Stencil,
    p: Complex64,
    h: f64,
    psi: &[Complex64],
    u: &[Complex64],
    r: Complex64,
) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let c = lay.comps;
    let m = lay.m;
    let n = lay.n;
    let ng = lay.ng;
    let size = lay.unknowns();
    let mut a = DMatrix::<Complex64>::zeros(size, size);
    let mut rhs = DVector::<Complex64>::zeros(size);
    let rpow: Vec<Complex64> = (0..=ng).map(|d| r.powu(d as u32)).collect();
    let comp_idx: Vec<Vec<usize>> = (0..c).map(|k| comp_coords(k, n, m)).collect();
    let mut idx = vec![0usize; m];
    let mut nb = vec![0usize; m];
    let mut ex = Vec::with_capacity(m);
    for (row_node, &flat) in lay.lower.iter().enumerate() {
        let mut f = flat;
        for j in (0..m).rev() {
            idx[j] = f % (ng + 1);
            f /= ng + 1;
        }
        let in_body: Vec<bool> = idx.iter().map(|&i| i < ng).collect();
        for k in 0..c {
            let row = row_node * c + k;
            rhs[row] += psi[flat * c + k];
            a[(row, row)] -= p;
            if in_body.iter().any(|&b| b) {
                for j in 0..m {
                    nb[j] = if in_body[j] { idx[j] + 1 } else { idx[j] };
                }
                let col = lay.pos[lay.flat(&nb)] * c + k;
                a[(row, col)] += 1.0 / h;
                a[(row, row)] -= 1.0 / h;
            }
            let ck = &comp_idx[k];
            for j in 0..m {
                if in_body[j] {
                    continue;
                }
                nb.copy_from_slice(&idx);
                for (l, mat) in &stencil.entries {
                    nb[j] = *l;
                    let nflat = lay.flat(&nb);
                    for q in 0..n {
                        let coef = mat[(ck[j], q)];
                        if coef == 0.0 {
                            continue;
                        }
                        let mut cc = ck.clone();
                        cc[j] = q;
                        let kk = comp_flat(&cc, n);
                        if lay.pos[nflat] == usize::MAX {
                            let d = exit_of(lay, &nb, &mut ex);
                            let col = lay.pos[lay.flat(&ex)] * c + kk;
                            a[(row, col)] += rpow[d] * coef;
                            rhs[row] -= u[nflat * c + kk] * coef;
                        } else {
                            a[(row, lay.pos[nflat] * c + kk)] += coef;
                        }
                    }
                }
            }
        }
    }
    (a, rhs)
}

fn layout_for(grid: &Grid, m: usize, n: usize) -> Result<Layout> {
    let lay = Layout::new(grid, m, n);
    if lay.unknowns() > MAX_DENSE_UNKNOWNS {
        return Err(Error::Config(format!(
            "dense solve needs {} lower-face unknowns, limit is {MAX_DENSE_UNKNOWNS}",
            lay.unknowns()
        )));
    }
    Ok(lay)
}

/// Lower-face operator after eliminating the top face; singular exactly at the
/// eigenvalues of the discretized compound generator (away from `p = -1/h`).
pub fn dense_operator_matrix(
    model: &LinearDelayModel,
    grid: &Grid,
    m: usize,
    p: Complex64,
) -> Result<DMatrix<Complex64>> {
    let lay = layout_for(grid, m, model.n)?;
    let stencil = model.alpha.stencil(grid)?;
    let h = grid.h();
    let r = transport_factor(p, h)?;
    let zero = vec![Complex64::new(0.0, 0.0); lay.pos.len() * lay.comps];
    Ok(assemble(&lay, &stencil, p, h, &zero, &zero, r).0)
}

/// Solves `(A_h - p) Phi = Psi` on the antisymmetric part of `Psi` (for `m >= 2`).
pub fn dense_resolvent_solve(
    model: &LinearDelayModel,
    psi: &CompoundGridFunction<Complex64>,
    p: Complex64,
) -> Result<DenseSolution> {
    if psi.n != model.n {
        return Err(Error::Shape(format!(
            "element dimension {} vs model {}",
            psi.n, model.n
        )));
    }
    let grid = psi.grid;
    let m = psi.m;
    let lay = layout_for(&grid, m, model.n)?;
    let psi = if m >= 2 {
        psi.antisymmetrized()
    } else {
        psi.clone()
    };
    let stencil = model.alpha.stencil(&grid)?;
    let h = grid.h();
    let r = transport_factor(p, h)?;
    let u = top_particular(&lay, psi.data(), r, h);
    let (a, rhs) = assemble(&lay, &stencil, p, h, psi.data(), &u, r);
    let lu = a.lu();
    let diag = lu.u().diagonal();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for d in diag.iter() {
        lo = lo.min(d.norm());
        hi = hi.max(d.norm());
    }
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if ratio < PIVOT_TOL {
        return Err(Error::Conditioning { ratio });
    }
    let x = lu.solve(&rhs).ok_or(Error::Conditioning { ratio })?;
    let c = lay.comps;
    let mut value = CompoundGridFunction::<Complex64>::zeros(grid, m, model.n);
    {
        let data = value.data_mut();
        for (node, &flat) in lay.lower.iter().enumerate() {
            data[flat * c..(flat + 1) * c].copy_from_slice(&x.as_slice()[node * c..(node + 1) * c]);
        }
        let rpow: Vec<Complex64> = (0..=lay.ng).map(|d| r.powu(d as u32)).collect();
        let mut ex = Vec::with_capacity(m);
        for_each_index(m, lay.ng + 1, |flat, idx| {
            if lay.pos[flat] != usize::MAX {
                return;
            }
            let d = exit_of(&lay, idx, &mut ex);
            let ef = lay.flat(&ex);
            for k in 0..c {
                data[flat * c + k] = rpow[d] * x[lay.pos[ef] * c + k] + u[flat * c + k];
            }
        });
    }
    value.antisymmetric = m >= 2;
    let mut res = crate::exterior::apply_generator(&stencil, &value);
    res.axpy(-p, &value)?;
    res.axpy(Complex64::new(-1.0, 0.0), &psi)?;
    let residual = res.norm() / psi.norm().max(1e-300);
    let scale = value.max_abs().max(1e-300);
    let antisymmetry_violation = if m >= 2 {
        check_antisymmetry(&value, f64::INFINITY).permutation / scale
    } else {
        0.0
    };
    Ok(DenseSolution {
        value,
        diagnostics: DenseDiagnostics {
            unknowns: lay.unknowns(),
            pivot_ratio: ratio,
            residual,
            antisymmetry_violation,
        },
    })
}

/// Extrapolated dense solve `2 Phi_{h/2} - Phi_h`, sampled on the grid of `psi`.
///
/// The upwind scheme is first order; the input is carried to the refined grid
/// with [`CompoundGridFunction::refined`] so both solves see the same element.
/// Diagnostics are those of the coarse solve.
pub fn dense_resolvent_extrapolated(
    model: &LinearDelayModel,
    psi: &CompoundGridFunction<Complex64>,
    p: Complex64,
) -> Result<DenseSolution> {
    let coarse = dense_resolvent_solve(model, psi, p)?;
    let fine = dense_resolvent_solve(model, &psi.refined()?, p)?;
    let mut value = coarse.value.clone();
    let mut src = vec![0usize; psi.m];
    for_each_index(psi.m, psi.grid.ng + 1, |_, idx| {
        for (s, &i) in src.iter_mut().zip(idx) {
            *s = 2 * i;
        }
        let f = fine.value.at(&src).to_vec();
        for (v, fv) in value.at_mut(idx).iter_mut().zip(f) {
            *v = fv * 2.0 - *v;
        }
    });
    Ok(DenseSolution {
        value,
        diagnostics: coarse.diagnostics,
    })
}
