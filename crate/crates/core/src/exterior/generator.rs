use super::grid::{comp_coords, comp_flat, for_each_index, wedge, CompoundGridFunction};
use crate::dde::{semigroup_apply, LinearDelayModel};
use crate::error::{Error, Result};
use crate::hilbert::{HistoryElement, Stencil};
use crate::scalar::Scalar;

/// Default tolerance for the trace check: relative jump between the last body
/// row of a face and the lower face it meets at zero.
pub const TRACE_TOL: f64 = 0.1;

/// `G(t) phi_1 ^ ... ^ G(t) phi_m`.
pub fn compound_semigroup_apply(
    model: &LinearDelayModel,
    factors: &[&HistoryElement],
    t: f64,
    dt: f64,
) -> Result<CompoundGridFunction<f64>> {
    let moved = factors
        .iter()
        .map(|f| semigroup_apply(model, f, t, dt))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&HistoryElement> = moved.iter().collect();
    wedge(&refs)
}

/// Largest relative jump across the shared rows `theta_j = -h` / `theta_j = 0`.
pub fn trace_jump<T: Scalar>(phi: &CompoundGridFunction<T>) -> f64 {
    let ng = phi.grid.ng;
    if ng < 2 {
        return 0.0;
    }
    let scale = phi.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let c = phi.comps();
    let mut worst = 0.0f64;
    let mut other = vec![0usize; phi.m];
    for_each_index(phi.m, phi.side(), |_, idx| {
        for j in 0..phi.m {
            if idx[j] == ng - 1 {
                other.copy_from_slice(idx);
                other[j] = ng;
                let a = phi.at(idx);
                let b = phi.at(&other);
                for k in 0..c {
                    worst = worst.max((a[k] - b[k]).abs2().sqrt());
                }
            }
        }
    });
    worst / scale
}

/// Applies `sum_faces` of the diagonal derivative plus slotwise kernel couplings.
///
/// On a face node the derivative is the one-sided difference toward zero along
/// the diagonal of the face; the neighbour may lie on a lower face. Each slot at
/// zero receives the stationary kernel applied along that slot of the closed grid.
pub fn compound_generator_apply<T: Scalar>(
    model: &LinearDelayModel,
    phi: &CompoundGridFunction<T>,
) -> Result<CompoundGridFunction<T>> {
    compound_generator_apply_checked(model, phi, Some(TRACE_TOL))
}

pub fn compound_generator_apply_checked<T: Scalar>(
    model: &LinearDelayModel,
    phi: &CompoundGridFunction<T>,
    trace_tol: Option<f64>,
) -> Result<CompoundGridFunction<T>> {
    if model.n != phi.n {
        return Err(Error::Shape(format!(
            "model dimension {} vs element {}",
            model.n, phi.n
        )));
    }
    if let Some(tol) = trace_tol {
        let jump = trace_jump(phi);
        if jump > tol {
            return Err(Error::Domain(format!(
                "trace incompatibility: relative jump {jump:.3e} exceeds {tol:.3e}"
            )));
        }
    }
    let stencil = model.alpha.stencil(&phi.grid)?;
    Ok(apply_generator(&stencil, phi))
}

pub(crate) fn apply_generator<T: Scalar>(
    stencil: &Stencil,
    phi: &CompoundGridFunction<T>,
) -> CompoundGridFunction<T> {
    let m = phi.m;
    let n = phi.n;
    let ng = phi.grid.ng;
    let inv_h = 1.0 / phi.grid.h();
    let c = phi.comps();
    let mut out = CompoundGridFunction::zeros(phi.grid, m, n);
    out.antisymmetric = phi.antisymmetric;
    let mut nb = vec![0usize; m];
    let comp_idx: Vec<Vec<usize>> = (0..c).map(|k| comp_coords(k, n, m)).collect();
    for_each_index(m, phi.side(), |flat, idx| {
        let mut acc = vec![T::zero(); c];
        let mut any_body = false;
        for j in 0..m {
            nb[j] = if idx[j] < ng {
                any_body = true;
                idx[j] + 1
            } else {
                idx[j]
            };
        }
        if any_body {
            let a = phi.at(&nb);
            let b = phi.at(idx);
            for k in 0..c {
                acc[k] += (a[k] - b[k]) * inv_h;
            }
        }
        for j in 0..m {
            if idx[j] != ng {
                continue;
            }
            nb.copy_from_slice(idx);
            for (l, mat) in &stencil.entries {
                nb[j] = *l;
                let v = phi.at(&nb);
                for k in 0..c {
                    let ck = &comp_idx[k];
                    let mut cc = ck.clone();
                    let mut s = T::zero();
                    for q in 0..n {
                        cc[j] = q;
                        s += v[comp_flat(&cc, n)] * mat[(ck[j], q)];
                    }
                    acc[k] += s;
                }
            }
        }
        out.data_mut()[flat * c..(flat + 1) * c].copy_from_slice(&acc);
    });
    out
}
