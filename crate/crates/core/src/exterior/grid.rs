//! Elements of the m-fold tensor power of `H` on a closed product grid.
//!
//! Every node of `{0..N_g}^m` belongs to exactly one face: the slots with index
//! `N_g` sit at zero, the others are in the body. Storing the closed grid is the
//! same as storing one dense array per face, and the rows of a face that touch
//! `theta_j = 0` are exactly the nodes of the lower face.

use super::face::FaceIndex;
use crate::error::{Error, Result};
use crate::hilbert::{inner_product, Grid, HistoryElement};
use crate::scalar::Scalar;
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct CompoundGridFunction<T: Scalar> {
    pub grid: Grid,
    pub m: usize,
    pub n: usize,
    /// Set by constructions that produce antisymmetric elements.
    pub antisymmetric: bool,
    data: Vec<T>,
}

/// Iterates multi-indices of `{0..side}^m` in row-major order.
pub(crate) fn for_each_index<F: FnMut(usize, &[usize])>(m: usize, side: usize, mut f: F) {
    let mut idx = vec![0usize; m];
    let total = side.pow(m as u32);
    for flat in 0..total {
        f(flat, &idx);
        for j in (0..m).rev() {
            idx[j] += 1;
            if idx[j] < side {
                break;
            }
            idx[j] = 0;
        }
    }
}

impl<T: Scalar> CompoundGridFunction<T> {
    pub fn zeros(grid: Grid, m: usize, n: usize) -> Self {
        assert!(m >= 1, "compound order must be positive");
        let len = (grid.ng + 1).pow(m as u32) * n.pow(m as u32);
        CompoundGridFunction {
            grid,
            m,
            n,
            antisymmetric: false,
            data: vec![T::zero(); len],
        }
    }

    pub fn side(&self) -> usize {
        self.grid.ng + 1
    }

    pub fn comps(&self) -> usize {
        self.n.pow(self.m as u32)
    }

    pub fn num_nodes(&self) -> usize {
        self.side().pow(self.m as u32)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn node_flat(&self, idx: &[usize]) -> usize {
        let s = self.side();
        idx.iter().fold(0, |acc, &i| acc * s + i)
    }

    pub fn node_coords(&self, mut flat: usize) -> Vec<usize> {
        let s = self.side();
        let mut v = vec![0; self.m];
        for j in (0..self.m).rev() {
            v[j] = flat % s;
            flat /= s;
        }
        v
    }

    /// Tensor components at a node.
    pub fn at(&self, idx: &[usize]) -> &[T] {
        let c = self.comps();
        let f = self.node_flat(idx);
        &self.data[f * c..(f + 1) * c]
    }

    pub fn at_mut(&mut self, idx: &[usize]) -> &mut [T] {
        let c = self.comps();
        let f = self.node_flat(idx);
        &mut self.data[f * c..(f + 1) * c]
    }

    pub fn face_of(&self, idx: &[usize]) -> FaceIndex {
        let ng = self.grid.ng;
        let mut mask = 0;
        for (j, &i) in idx.iter().enumerate() {
            if i < ng {
                mask |= 1 << j;
            }
        }
        FaceIndex { m: self.m, mask }
    }

    /// Product quadrature weight of a closed node.
    pub fn weight(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.grid.closed_weight(i)).product()
    }

    /// Dense copy of one face: `N_g^k` nodes (row-major over the face slots) times components.
    pub fn face(&self, face: FaceIndex) -> Vec<T> {
        let slots = face.slots();
        let ng = self.grid.ng;
        let c = self.comps();
        let mut out = Vec::with_capacity(ng.pow(slots.len() as u32) * c);
        let mut idx = vec![ng; self.m];
        for_each_index(slots.len(), ng, |_, sub| {
            for (k, &j) in slots.iter().enumerate() {
                idx[j] = sub[k];
            }
            out.extend_from_slice(self.at(&idx));
        });
        out
    }

    pub fn set_face(&mut self, face: FaceIndex, values: &[T]) -> Result<()> {
        let slots = face.slots();
        let ng = self.grid.ng;
        let c = self.comps();
        if values.len() != ng.pow(slots.len() as u32) * c {
            return Err(Error::Shape(format!(
                "face {face} expects {} values",
                ng.pow(slots.len() as u32) * c
            )));
        }
        let mut idx = vec![ng; self.m];
        for_each_index(slots.len(), ng, |flat, sub| {
            for (k, &j) in slots.iter().enumerate() {
                idx[j] = sub[k];
            }
            let dst = self.node_flat(&idx);
            self.data[dst * c..(dst + 1) * c].copy_from_slice(&values[flat * c..(flat + 1) * c]);
        });
        Ok(())
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self.m != other.m || self.n != other.n || self.grid != other.grid {
            return Err(Error::Shape(
                "compound elements live on different grids".into(),
            ));
        }
        Ok(())
    }

    pub fn scale(&mut self, a: T) {
        self.data.iter_mut().for_each(|v| *v = *v * a);
    }

    pub fn axpy(&mut self, a: T, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * *y;
        }
        self.antisymmetric = self.antisymmetric && other.antisymmetric;
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.abs2().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        compound_inner(self, self)
            .map(|v| v.to_complex().re.max(0.0).sqrt())
            .unwrap_or(f64::NAN)
    }

    pub fn map_to<U: Scalar, F: Fn(T) -> U>(&self, f: F) -> CompoundGridFunction<U> {
        CompoundGridFunction {
            grid: self.grid,
            m: self.m,
            n: self.n,
            antisymmetric: self.antisymmetric,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn from_data(grid: Grid, m: usize, n: usize, data: Vec<T>) -> Result<Self> {
        let len = (grid.ng + 1).pow(m as u32) * n.pow(m as u32);
        if data.len() != len {
            return Err(Error::Shape(format!(
                "expected {len} values, got {}",
                data.len()
            )));
        }
        Ok(CompoundGridFunction {
            grid,
            m,
            n,
            antisymmetric: false,
            data,
        })
    }

    /// The same element on the grid with half the spacing.
    ///
    /// Body slots are interpolated linearly between body nodes; the new node in
    /// the last cell is extrapolated from the body, so a jump between body and
    /// head stays a jump.
    pub fn refined(&self) -> Result<Self> {
        let ng = self.grid.ng;
        let fine = Grid::new(self.grid.tau, 2 * ng)?;
        let mut out = Self::zeros(fine, self.m, self.n);
        out.antisymmetric = self.antisymmetric;
        let c = self.comps();
        // per fine index: coarse nodes and weights
        let stencil = |j: usize| -> Vec<(usize, f64)> {
            if j == 2 * ng {
                vec![(ng, 1.0)]
            } else if j % 2 == 0 {
                vec![(j / 2, 1.0)]
            } else if (j + 1) / 2 < ng {
                vec![(j / 2, 0.5), (j / 2 + 1, 0.5)]
            } else if ng >= 2 {
                vec![(ng - 1, 1.5), (ng - 2, -0.5)]
            } else {
                vec![(ng - 1, 1.0)]
            }
        };
        let per: Vec<Vec<(usize, f64)>> = (0..=2 * ng).map(stencil).collect();
        let mut src = vec![0usize; self.m];
        for_each_index(self.m, 2 * ng + 1, |flat, idx| {
            let parts: Vec<&Vec<(usize, f64)>> = idx.iter().map(|&j| &per[j]).collect();
            let mut pick = vec![0usize; self.m];
            loop {
                let mut w = 1.0;
                for j in 0..self.m {
                    let (node, wj) = parts[j][pick[j]];
                    src[j] = node;
                    w *= wj;
                }
                let sf = self.node_flat(&src);
                for k in 0..c {
                    let v = self.data[sf * c + k] * w;
                    out.data[flat * c + k] += v;
                }
                let mut j = 0;
                while j < self.m {
                    pick[j] += 1;
                    if pick[j] < parts[j].len() {
                        break;
                    }
                    pick[j] = 0;
                    j += 1;
                }
                if j == self.m {
                    break;
                }
            }
        });
        Ok(out)
    }

    /// Projection onto antisymmetric tensors: average over slot permutations with signs.
    pub fn antisymmetrized(&self) -> Self {
        let perms = permutations(self.m);
        let mut out = Self::zeros(self.grid, self.m, self.n);
        let c = self.comps();
        let inv = 1.0 / perms.len() as f64;
        let mut src = vec![0usize; self.m];
        let mut comp_src = vec![0usize; self.m];
        for_each_index(self.m, self.side(), |flat, idx| {
            for (perm, sign) in &perms {
                for j in 0..self.m {
                    src[j] = idx[perm[j]];
                }
                let sf = self.node_flat(&src);
                for cc in 0..c {
                    let cidx = comp_coords(cc, self.n, self.m);
                    for j in 0..self.m {
                        comp_src[j] = cidx[perm[j]];
                    }
                    let scf = comp_flat(&comp_src, self.n);
                    let v = self.data[sf * c + scf];
                    out.data[flat * c + cc] += v * (sign * inv);
                }
            }
        });
        out.antisymmetric = true;
        out
    }
}

impl CompoundGridFunction<f64> {
    pub fn to_complex(&self) -> CompoundGridFunction<Complex64> {
        self.map_to(|v| Complex64::new(v, 0.0))
    }
}

pub(crate) fn comp_coords(mut flat: usize, n: usize, m: usize) -> Vec<usize> {
    let mut v = vec![0; m];
    for j in (0..m).rev() {
        v[j] = flat % n;
        flat /= n;
    }
    v
}

pub(crate) fn comp_flat(c: &[usize], n: usize) -> usize {
    c.iter().fold(0, |acc, &x| acc * n + x)
}

/// All permutations of `0..m` with their signs.
pub fn permutations(m: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(
        prefix: &mut Vec<usize>,
        used: &mut Vec<bool>,
        m: usize,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        if prefix.len() == m {
            let mut sign = 1.0;
            for a in 0..m {
                for b in a + 1..m {
                    if prefix[a] > prefix[b] {
                        sign = -sign;
                    }
                }
            }
            out.push((prefix.clone(), sign));
            return;
        }
        for k in 0..m {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, m, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; m], m, &mut out);
    out
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Largest compound order accepted by the constructors; storage grows like `N_g^m`.
pub const MAX_ORDER: usize = 3;

fn check_factors(factors: &[&HistoryElement]) -> Result<(Grid, usize)> {
    let first = factors
        .first()
        .ok_or_else(|| Error::Shape("need at least one factor".into()))?;
    if factors.len() > MAX_ORDER {
        return Err(Error::Config(format!(
            "compound order {} exceeds the cap {MAX_ORDER}",
            factors.len()
        )));
    }
    for f in factors {
        if f.grid != first.grid || f.n != first.n {
            return Err(Error::Shape("wedge factors live on different grids".into()));
        }
    }
    Ok((first.grid, first.n))
}

/// `phi_1 (x) ... (x) phi_m`.
pub fn tensor(factors: &[&HistoryElement]) -> Result<CompoundGridFunction<f64>> {
    let (grid, n) = check_factors(factors)?;
    let m = factors.len();
    let mut out = CompoundGridFunction::zeros(grid, m, n);
    let c = out.comps();
    for_each_index(m, grid.ng + 1, |flat, idx| {
        for cc in 0..c {
            let cidx = comp_coords(cc, n, m);
            let mut p = 1.0;
            for j in 0..m {
                p *= factors[j].node(idx[j])[cidx[j]];
            }
            out.data[flat * c + cc] = p;
        }
    });
    Ok(out)
}

/// `phi_1 ^ ... ^ phi_m = (1/m!) sum_sigma sgn(sigma) phi_sigma(1) (x) ... (x) phi_sigma(m)`.
pub fn wedge(factors: &[&HistoryElement]) -> Result<CompoundGridFunction<f64>> {
    let (grid, n) = check_factors(factors)?;
    let m = factors.len();
    let mut out = CompoundGridFunction::zeros(grid, m, n);
    let c = out.comps();
    let scale = 1.0 / factorial(m);
    let perms = permutations(m);
    for_each_index(m, grid.ng + 1, |flat, idx| {
        for cc in 0..c {
            let cidx = comp_coords(cc, n, m);
            let v = if m == 2 {
                let a = factors[0].node(idx[0])[cidx[0]] * factors[1].node(idx[1])[cidx[1]];
                let b = factors[1].node(idx[0])[cidx[0]] * factors[0].node(idx[1])[cidx[1]];
                a - b
            } else {
                let mut s = 0.0;
                for (perm, sign) in &perms {
                    let mut p = *sign;
                    for j in 0..m {
                        p *= factors[perm[j]].node(idx[j])[cidx[j]];
                    }
                    s += p;
                }
                s
            };
            out.data[flat * c + cc] = scale * v;
        }
    });
    out.antisymmetric = true;
    Ok(out)
}

/// `sum_faces` of trapezoid inner products, conjugating the first argument.
pub fn compound_inner<T: Scalar>(
    a: &CompoundGridFunction<T>,
    b: &CompoundGridFunction<T>,
) -> Result<T> {
    a.check_same(b)?;
    let c = a.comps();
    let mut acc = T::zero();
    for_each_index(a.m, a.side(), |flat, idx| {
        let w = a.weight(idx);
        let mut s = T::zero();
        for k in 0..c {
            s += a.data[flat * c + k].conj() * b.data[flat * c + k];
        }
        acc += s * w;
    });
    Ok(acc)
}

/// `(1/m!) det [<v_i, w_j>]`.
pub fn gram_oracle(v: &[&HistoryElement], w: &[&HistoryElement]) -> Result<f64> {
    let m = v.len();
    if w.len() != m {
        return Err(Error::Shape(
            "Gram oracle needs equally many factors".into(),
        ));
    }
    let mut g = nalgebra::DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] = inner_product(v[i], w[j])?;
        }
    }
    Ok(g.determinant() / factorial(m))
}

/// Largest violations of the antisymmetry relations.
#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct AntisymmetryReport {
    /// `Phi(sigma x) = sgn(sigma) Phi(x)` across faces, including face-to-face signs.
    pub permutation: f64,
    /// Values on faces of size `<= m - 2` (only meaningful for `n = 1`).
    pub improper_face: f64,
    /// Antisymmetry inside the top face.
    pub top_face: f64,
    pub flags: Vec<String>,
}

impl AntisymmetryReport {
    pub fn max_violation(&self) -> f64 {
        self.permutation.max(self.improper_face).max(self.top_face)
    }
}

/// Checks the sign relations of an antisymmetric tensor on every face.
pub fn check_antisymmetry<T: Scalar>(
    phi: &CompoundGridFunction<T>,
    tol: f64,
) -> AntisymmetryReport {
    let m = phi.m;
    let n = phi.n;
    let c = phi.comps();
    let ng = phi.grid.ng;
    let mut rep = AntisymmetryReport::default();
    let mut swapped = vec![0usize; m];
    for_each_index(m, phi.side(), |flat, idx| {
        let face = phi.face_of(idx);
        for a in 0..m {
            for b in a + 1..m {
                swapped.copy_from_slice(idx);
                swapped.swap(a, b);
                let sf = phi.node_flat(&swapped);
                for cc in 0..c {
                    let mut cidx = comp_coords(cc, n, m);
                    cidx.swap(a, b);
                    let scc = comp_flat(&cidx, n);
                    let v = phi.data[flat * c + cc] + phi.data[sf * c + scc];
                    let e = v.abs2().sqrt();
                    rep.permutation = rep.permutation.max(e);
                    if face.size() == m {
                        rep.top_face = rep.top_face.max(e);
                    }
                }
            }
        }
        if n == 1 && m >= 2 && idx.iter().filter(|&&i| i == ng).count() >= 2 {
            for cc in 0..c {
                rep.improper_face = rep.improper_face.max(phi.data[flat * c + cc].abs2().sqrt());
            }
        }
    });
    if rep.permutation > tol {
        rep.flags.push(format!(
            "face sign relations violated by {:.3e}",
            rep.permutation
        ));
    }
    if rep.improper_face > tol {
        rep.flags
            .push(format!("improper face nonzero ({:.3e})", rep.improper_face));
    }
    if rep.top_face > tol {
        rep.flags
            .push(format!("top face not antisymmetric ({:.3e})", rep.top_face));
    }
    rep
}

/// Translation along the main diagonal of a `k`-dimensional face grid with zero fill.
///
/// `values` holds `N_g^k` nodes times `comps` entries. `t` is snapped to the
/// nearest multiple of `h`.
pub fn diagonal_shift<T: Scalar>(
    values: &[T],
    k: usize,
    grid: &Grid,
    comps: usize,
    t: f64,
) -> Result<Vec<T>> {
    if t < 0.0 {
        return Err(Error::Domain(format!(
            "shift time must be nonnegative, got {t}"
        )));
    }
    let ng = grid.ng;
    if values.len() != ng.pow(k as u32) * comps {
        return Err(Error::Shape("face grid has the wrong size".into()));
    }
    let s = (t / grid.h()).round() as usize;
    Ok(shift_nodes(values, k, ng, comps, s))
}

pub(crate) fn shift_nodes<T: Scalar>(
    values: &[T],
    k: usize,
    ng: usize,
    comps: usize,
    s: usize,
) -> Vec<T> {
    let mut out = vec![T::zero(); values.len()];
    if s >= ng {
        return out;
    }
    if s == 0 {
        out.copy_from_slice(values);
        return out;
    }
    let mut src = vec![0usize; k];
    for_each_index(k, ng, |flat, idx| {
        let mut inside = true;
        for j in 0..k {
            src[j] = idx[j] + s;
            if src[j] >= ng {
                inside = false;
            }
        }
        if inside {
            let sf = src.iter().fold(0, |acc, &i| acc * ng + i);
            out[flat * comps..(flat + 1) * comps]
                .copy_from_slice(&values[sf * comps..(sf + 1) * comps]);
        }
    });
    out
}
