use crate::error::{Error, Result};
use crate::hilbert::Grid;
use serde::Serialize;

/// Orthonormal functions on the proper level `(-tau, 0)^(m-1)`.
///
/// Univariate functions are Legendre polynomials sampled on the body nodes and
/// re-orthonormalized under the body weights. For `m >= 3` the elements are
/// normalized determinants `det[e_{k_a}(theta_b)] / sqrt((m-1)!)` over increasing
/// index tuples, ordered so that every prefix is itself a basis of a nested space.
#[derive(Clone, Debug, Serialize)]
pub struct ProperBasis {
    pub grid: Grid,
    pub m: usize,
    /// Univariate functions, `grid.ng` body samples each.
    pub univariate: Vec<Vec<f64>>,
    /// Index tuple of each element (length `m - 1`).
    pub tuples: Vec<Vec<usize>>,
}

pub type ControlBasis = ProperBasis;
pub type MeasurementBasis = ProperBasis;

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Increasing `k`-tuples of `0..`, graded by their largest entry.
fn graded_tuples(k: usize, count: usize) -> (usize, Vec<Vec<usize>>) {
    if k == 0 {
        return (0, vec![Vec::new()]);
    }
    let mut out = Vec::with_capacity(count);
    let mut top = k - 1;
    while out.len() < count {
        // all tuples with largest entry `top`
        let mut rest: Vec<Vec<usize>> = Vec::new();
        combos(top, k - 1, 0, &mut Vec::new(), &mut rest);
        for mut r in rest {
            r.push(top);
            out.push(r);
            if out.len() == count {
                break;
            }
        }
        top += 1;
    }
    let needed = out.iter().map(|t| t[k - 1] + 1).max().unwrap_or(0);
    (needed, out)
}

fn combos(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        combos(n, k, i + 1, cur, out);
        cur.pop();
    }
}

fn legendre(k: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return p0;
    }
    for j in 1..k {
        let p2 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p0) / (j + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// First `count` Legendre functions on `(-tau, 0)`, orthonormal under the body weights.
pub fn legendre_univariate(grid: &Grid, count: usize) -> Result<Vec<Vec<f64>>> {
    let ng = grid.ng;
    if count > ng {
        return Err(Error::Config(format!(
            "basis size {count} exceeds the {ng} grid nodes"
        )));
    }
    let w: Vec<f64> = (0..ng).map(|i| grid.body_weight(i)).collect();
    let dot = |a: &[f64], b: &[f64]| -> f64 { (0..ng).map(|i| w[i] * a[i] * b[i]).sum() };
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    for k in 0..count {
        let mut v: Vec<f64> = (0..ng)
            .map(|i| legendre(k, 2.0 * (grid.theta(i) + grid.tau) / grid.tau - 1.0))
            .collect();
        for _ in 0..2 {
            for e in &out {
                let c = dot(e, &v);
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= c * ei;
                }
            }
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm < 1e-10 {
            return Err(Error::Config(format!(
                "basis function {k} is degenerate on this grid"
            )));
        }
        v.iter_mut().for_each(|x| *x /= nrm);
        out.push(v);
    }
    Ok(out)
}

impl ProperBasis {
    pub fn legendre(grid: Grid, m: usize, size: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("compound order must be positive".into()));
        }
        let k = m - 1;
        let size = if k == 0 { 1 } else { size };
        if size == 0 {
            return Err(Error::Config("basis size must be positive".into()));
        }
        let (needed, tuples) = graded_tuples(k, size);
        if k > 0 && binomial(needed, k) < size {
            return Err(Error::Config("basis tuple enumeration failed".into()));
        }
        let univariate = legendre_univariate(&grid, needed)?;
        Ok(ProperBasis {
            grid,
            m,
            univariate,
            tuples,
        })
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Leading `size` elements.
    pub fn truncated(&self, size: usize) -> Self {
        let mut b = self.clone();
        b.tuples.truncate(size.max(1));
        b
    }

    /// Element `e` at body nodes `idx` (length `m - 1`, each `< ng`).
    pub fn value(&self, e: usize, idx: &[usize]) -> f64 {
        let t = &self.tuples[e];
        match t.len() {
            0 => 1.0,
            1 => self.univariate[t[0]][idx[0]],
            2 => {
                let (a, b) = (&self.univariate[t[0]], &self.univariate[t[1]]);
                (a[idx[0]] * b[idx[1]] - b[idx[0]] * a[idx[1]]) / 2f64.sqrt()
            }
            k => {
                let mat = nalgebra::DMatrix::from_fn(k, k, |a, b| self.univariate[t[a]][idx[b]]);
                let fact: f64 = (1..=k).map(|x| x as f64).product();
                mat.determinant() / fact.sqrt()
            }
        }
    }

    /// Product of body weights at `idx`.
    pub fn weight(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.grid.body_weight(i)).product()
    }
}
