//! The delay Hilbert space `H = L2([-tau,0]; Leb + delta_0; R^n)` on a uniform grid.
//!
//! A [`HistoryElement`] stores the body on the nodes `theta_i = -tau + i*h`,
//! `i = 0..N_g-1`, and the head (the value carried by the point mass at zero)
//! separately. Many routines treat the head as node `N_g` of a closed grid, so
//! closed-grid index `N_g` always means `theta = 0`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Uniform grid on `[-tau, 0]` with `ng` cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub tau: f64,
    pub ng: usize,
}

impl Grid {
    pub fn new(tau: f64, ng: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Input(format!(
                "delay horizon must be positive, got {tau}"
            )));
        }
        if ng == 0 {
            return Err(Error::Input("grid needs at least one cell".into()));
        }
        Ok(Grid { tau, ng })
    }

    pub fn h(&self) -> f64 {
        self.tau / self.ng as f64
    }

    /// Location of closed-grid node `i` (node `ng` is zero).
    pub fn theta(&self, i: usize) -> f64 {
        if i == self.ng {
            0.0
        } else {
            -self.tau + i as f64 * self.h()
        }
    }

    /// Quadrature weight of closed node `i` for the measure `Leb + delta_0`.
    ///
    /// Trapezoid over `[-tau, 0]` with the head as the right endpoint value,
    /// plus the unit point mass at zero. These weights are of product type, which
    /// makes wedge inner products reduce exactly to Gram determinants.
    pub fn closed_weight(&self, i: usize) -> f64 {
        let h = self.h();
        if i == self.ng {
            1.0 + 0.5 * h
        } else if i == 0 {
            0.5 * h
        } else {
            h
        }
    }

    /// Trapezoid weight on the open body (`i < ng`), with the endpoint at zero dropped.
    pub fn body_weight(&self, i: usize) -> f64 {
        let h = self.h();
        if i >= self.ng {
            0.0
        } else if i == 0 {
            0.5 * h
        } else {
            h
        }
    }

    /// Nearest node to `theta`; errors if `theta` lies outside `[-tau, 0]`.
    pub fn snap(&self, theta: f64) -> Result<usize> {
        let h = self.h();
        let tol = 1e-9 * self.tau.max(1.0);
        if theta > tol || theta < -self.tau - tol {
            return Err(Error::Config(format!(
                "kernel location {theta} outside [-{}, 0]",
                self.tau
            )));
        }
        let x = (theta + self.tau) / h;
        let i = x.round().max(0.0) as usize;
        let i = i.min(self.ng);
        let dist = (x - i as f64).abs() * h;
        if dist > 1e-9 * h.max(1e-300) {
            log::warn!("kernel location {theta} snapped to node {i} (distance {dist:.3e})");
        }
        Ok(i)
    }
}

/// One element of `H`: head value at zero plus body samples.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryElement {
    pub grid: Grid,
    pub n: usize,
    pub head: Vec<f64>,
    /// Node-major body samples, `ng * n` entries.
    pub body: Vec<f64>,
}

impl HistoryElement {
    pub fn new(grid: Grid, n: usize, head: Vec<f64>, body: Vec<f64>) -> Result<Self> {
        if head.len() != n || body.len() != grid.ng * n {
            return Err(Error::Shape(format!(
                "expected head {n} and body {}, got {} and {}",
                grid.ng * n,
                head.len(),
                body.len()
            )));
        }
        if head.iter().chain(body.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite history value".into()));
        }
        Ok(HistoryElement {
            grid,
            n,
            head,
            body,
        })
    }

    pub fn zeros(grid: Grid, n: usize) -> Self {
        HistoryElement {
            grid,
            n,
            head: vec![0.0; n],
            body: vec![0.0; grid.ng * n],
        }
    }

    /// Head-only element with the given head vector.
    pub fn head_only(grid: Grid, head: Vec<f64>) -> Self {
        let n = head.len();
        HistoryElement {
            grid,
            n,
            head,
            body: vec![0.0; grid.ng * n],
        }
    }

    /// Body extrapolated linearly to `theta = 0`; differs from the head for jump data.
    pub fn body_limit(&self) -> Vec<f64> {
        let ng = self.grid.ng;
        let n = self.n;
        (0..n)
            .map(|c| {
                let a = self.body[(ng - 1) * n + c];
                if ng >= 2 {
                    2.0 * a - self.body[(ng - 2) * n + c]
                } else {
                    a
                }
            })
            .collect()
    }

    /// Value at closed node `i` (node `ng` reads the head).
    pub fn node(&self, i: usize) -> &[f64] {
        if i == self.grid.ng {
            &self.head
        } else {
            &self.body[i * self.n..(i + 1) * self.n]
        }
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        if i == self.grid.ng {
            &mut self.head
        } else {
            &mut self.body[i * self.n..(i + 1) * self.n]
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.grid != other.grid {
            return Err(Error::Shape(format!(
                "elements live on different grids (n {} vs {}, grid {:?} vs {:?})",
                self.n, other.n, self.grid, other.grid
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.head.iter_mut().for_each(|v| *v *= a);
        out.body.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (x, y) in out.head.iter_mut().zip(&other.head) {
            *x += a * y;
        }
        for (x, y) in out.body.iter_mut().zip(&other.body) {
            *x += a * y;
        }
        Ok(out)
    }

    pub fn norm(&self) -> f64 {
        inner_product(self, self)
            .map(|v| v.max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    }
}

/// Inner product of `H` on the grid: body trapezoid closed by the head, plus head dot head.
pub fn inner_product(phi: &HistoryElement, psi: &HistoryElement) -> Result<f64> {
    phi.check_same(psi)?;
    let g = phi.grid;
    let mut acc = 0.0;
    for i in 0..=g.ng {
        let w = g.closed_weight(i);
        let d: f64 = phi
            .node(i)
            .iter()
            .zip(psi.node(i))
            .map(|(a, b)| a * b)
            .sum();
        acc += w * d;
    }
    Ok(acc)
}

/// Samples a continuous function on the grid: `head = f(0)`, `body_i = f(theta_i)`.
pub fn embed_continuous<F>(grid: Grid, n: usize, f: F) -> Result<HistoryElement>
where
    F: Fn(f64) -> Vec<f64>,
{
    let mut body = Vec::with_capacity(grid.ng * n);
    for i in 0..grid.ng {
        let v = f(grid.theta(i));
        if v.len() != n {
            return Err(Error::Shape(format!(
                "sample has length {}, expected {n}",
                v.len()
            )));
        }
        body.extend(v);
    }
    let head = f(0.0);
    if head.len() != n {
        return Err(Error::Shape(format!(
            "sample has length {}, expected {n}",
            head.len()
        )));
    }
    HistoryElement::new(grid, n, head, body)
}

/// Scalar convenience wrapper around [`embed_continuous`].
pub fn embed_scalar<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<HistoryElement> {
    embed_continuous(grid, 1, |t| vec![f(t)])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub theta: f64,
    pub matrix: DMatrix<f64>,
}

/// Piecewise-constant density on `[from, to]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityPiece {
    pub from: f64,
    pub to: f64,
    pub matrix: DMatrix<f64>,
}

/// Matrix-valued measure of bounded variation on `[-tau, 0]`: atoms plus a piecewise density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StieltjesKernel {
    pub out_dim: usize,
    pub in_dim: usize,
    pub atoms: Vec<Atom>,
    pub density: Vec<DensityPiece>,
}

/// A kernel resolved onto closed-grid nodes: `sum_l M_l * phi(node_l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub out_dim: usize,
    pub in_dim: usize,
    pub entries: Vec<(usize, DMatrix<f64>)>,
}

impl Stencil {
    pub fn apply<'a, F>(&self, value: F) -> Vec<f64>
    where
        F: Fn(usize) -> &'a [f64],
    {
        let mut out = vec![0.0; self.out_dim];
        for (node, m) in &self.entries {
            let x = value(*node);
            for r in 0..self.out_dim {
                let mut s = 0.0;
                for c in 0..self.in_dim {
                    s += m[(r, c)] * x[c];
                }
                out[r] += s;
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Scalar coefficients for `1 x 1` kernels.
    pub fn scalar_entries(&self) -> Vec<(usize, f64)> {
        self.entries.iter().map(|(i, m)| (*i, m[(0, 0)])).collect()
    }
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.clone().svd(false, false).singular_values.max()
}

impl StieltjesKernel {
    pub fn zero(out_dim: usize, in_dim: usize) -> Self {
        StieltjesKernel {
            out_dim,
            in_dim,
            atoms: vec![],
            density: vec![],
        }
    }

    pub fn atom(theta: f64, matrix: DMatrix<f64>) -> Self {
        StieltjesKernel {
            out_dim: matrix.nrows(),
            in_dim: matrix.ncols(),
            atoms: vec![Atom { theta, matrix }],
            density: vec![],
        }
    }

    pub fn scalar_atom(theta: f64, a: f64) -> Self {
        Self::atom(theta, DMatrix::from_element(1, 1, a))
    }

    pub fn scalar_density(from: f64, to: f64, a: f64) -> Self {
        StieltjesKernel {
            out_dim: 1,
            in_dim: 1,
            atoms: vec![],
            density: vec![DensityPiece {
                from,
                to,
                matrix: DMatrix::from_element(1, 1, a),
            }],
        }
    }

    /// Kernel sum (concatenation of atoms and density pieces).
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.out_dim != other.out_dim || self.in_dim != other.in_dim {
            return Err(Error::Shape(format!(
                "kernel shapes {}x{} and {}x{} differ",
                self.out_dim, self.in_dim, other.out_dim, other.in_dim
            )));
        }
        let mut out = self.clone();
        out.atoms.extend(other.atoms.iter().cloned());
        out.density.extend(other.density.iter().cloned());
        Ok(out)
    }

    /// `left * self * right` for constant matrices.
    pub fn sandwich(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<Self> {
        if left.ncols() != self.out_dim || right.nrows() != self.in_dim {
            return Err(Error::Shape("kernel sandwich dimensions disagree".into()));
        }
        Ok(StieltjesKernel {
            out_dim: left.nrows(),
            in_dim: right.ncols(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    theta: a.theta,
                    matrix: left * &a.matrix * right,
                })
                .collect(),
            density: self
                .density
                .iter()
                .map(|d| DensityPiece {
                    from: d.from,
                    to: d.to,
                    matrix: left * &d.matrix * right,
                })
                .collect(),
        })
    }

    pub fn validate(&self, tau: f64) -> Result<()> {
        let tol = 1e-9 * tau.max(1.0);
        for a in &self.atoms {
            if a.matrix.nrows() != self.out_dim || a.matrix.ncols() != self.in_dim {
                return Err(Error::Shape(
                    "atom matrix shape disagrees with kernel".into(),
                ));
            }
            if a.theta > tol || a.theta < -tau - tol || !a.theta.is_finite() {
                return Err(Error::Config(format!(
                    "atom at {} outside [-{tau}, 0]",
                    a.theta
                )));
            }
        }
        for d in &self.density {
            if d.matrix.nrows() != self.out_dim || d.matrix.ncols() != self.in_dim {
                return Err(Error::Shape(
                    "density matrix shape disagrees with kernel".into(),
                ));
            }
            if !(d.from < d.to) || d.from < -tau - tol || d.to > tol {
                return Err(Error::Config(format!(
                    "density piece [{}, {}] invalid on [-{tau}, 0]",
                    d.from, d.to
                )));
            }
        }
        Ok(())
    }

    /// Resolves atoms and density onto the closed nodes of `grid`.
    pub fn stencil(&self, grid: &Grid) -> Result<Stencil> {
        self.validate(grid.tau)?;
        let mut acc: Vec<Option<DMatrix<f64>>> = vec![None; grid.ng + 1];
        let mut add = |i: usize, m: DMatrix<f64>| match &mut acc[i] {
            Some(x) => *x += m,
            None => acc[i] = Some(m),
        };
        for a in &self.atoms {
            add(grid.snap(a.theta)?, a.matrix.clone());
        }
        let h = grid.h();
        for d in &self.density {
            let i0 = grid.snap(d.from)?;
            let i1 = grid.snap(d.to)?;
            for i in i0..=i1 {
                let w = if i == i0 || i == i1 { 0.5 * h } else { h };
                if i0 == i1 {
                    continue;
                }
                add(i, &d.matrix * w);
            }
        }
        let entries = acc
            .into_iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|m| (i, m)))
            .collect();
        Ok(Stencil {
            out_dim: self.out_dim,
            in_dim: self.in_dim,
            entries,
        })
    }

    /// Sum of spectral norms of the atoms plus the integral of the density norm.
    pub fn total_variation(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|a| spectral_norm(&a.matrix)).sum();
        let d: f64 = self
            .density
            .iter()
            .map(|d| (d.to - d.from) * spectral_norm(&d.matrix))
            .sum();
        a + d
    }

    pub fn is_zero(&self) -> bool {
        self.atoms
            .iter()
            .all(|a| a.matrix.iter().all(|v| *v == 0.0))
            && self
                .density
                .iter()
                .all(|d| d.matrix.iter().all(|v| *v == 0.0))
    }
}

/// `k phi`: atoms read node values (the head at zero), density by trapezoid.
pub fn stieltjes_apply(k: &StieltjesKernel, phi: &HistoryElement) -> Result<Vec<f64>> {
    if k.in_dim != phi.n {
        return Err(Error::Shape(format!(
            "kernel expects dimension {}, got {}",
            k.in_dim, phi.n
        )));
    }
    let st = k.stencil(&phi.grid)?;
    Ok(st.apply(|i| phi.node(i)))
}
