use super::basis::ProperBasis;
use crate::dde::LinearDelayModel;
use crate::error::{Error, Result};
use crate::exterior::{for_each_index, wedge, CompoundGridFunction};
use crate::hilbert::HistoryElement;
use crate::scalar::Scalar;

/// A finite sum of decomposable wedges `sum_k c_k phi_k1 ^ ... ^ phi_km`.
#[derive(Clone, Debug)]
pub struct WedgeSum {
    pub terms: Vec<(f64, Vec<HistoryElement>)>,
}

impl WedgeSum {
    pub fn single(coef: f64, factors: Vec<HistoryElement>) -> Self {
        WedgeSum {
            terms: vec![(coef, factors)],
        }
    }

    pub fn order(&self) -> usize {
        self.terms.first().map_or(0, |t| t.1.len())
    }

    pub fn to_grid(&self) -> Result<CompoundGridFunction<f64>> {
        let first = self
            .terms
            .first()
            .ok_or_else(|| Error::Shape("empty wedge sum".into()))?;
        let mut out = CompoundGridFunction::zeros(first.1[0].grid, first.1.len(), first.1[0].n);
        for (c, f) in &self.terms {
            let refs: Vec<&HistoryElement> = f.iter().collect();
            out.axpy(*c, &wedge(&refs)?)?;
        }
        out.antisymmetric = true;
        Ok(out)
    }
}

/// Scalar input and output are required for the control and measurement spaces.
pub(crate) fn scalar_io(model: &LinearDelayModel) -> Result<f64> {
    if model.n != 1 || model.r1() != 1 || model.r2() != 1 {
        return Err(Error::Config(format!(
            "transfer operator needs n = r1 = r2 = 1, got n = {}, r1 = {}, r2 = {}",
            model.n,
            model.r1(),
            model.r2()
        )));
    }
    Ok(model.b_tilde[(0, 0)])
}

fn check_basis(model: &LinearDelayModel, basis: &ProperBasis) -> Result<f64> {
    let b = scalar_io(model)?;
    if (basis.grid.tau - model.tau).abs() > 1e-12 * model.tau {
        return Err(Error::Shape("basis grid and model delay differ".into()));
    }
    Ok(b)
}

/// `B^ zeta_e`: the free component sits on the face with the last slot at zero,
/// the other faces follow from antisymmetry.
pub fn control_embed(
    model: &LinearDelayModel,
    basis: &ProperBasis,
    e: usize,
) -> Result<CompoundGridFunction<f64>> {
    let b = check_basis(model, basis)?;
    let grid = basis.grid;
    let m = basis.m;
    let ng = grid.ng;
    let mut out = CompoundGridFunction::zeros(grid, m, 1);
    let mut others = Vec::with_capacity(m);
    for_each_index(m, ng + 1, |_, idx| {
        let at_zero: Vec<usize> = (0..m).filter(|&j| idx[j] == ng).collect();
        if at_zero.len() != 1 {
            return;
        }
        let j = at_zero[0];
        others.clear();
        others.extend(
            idx.iter()
                .enumerate()
                .filter(|&(s, _)| s != j)
                .map(|(_, &i)| i),
        );
        let sign = if (m - 1 - j) % 2 == 0 { 1.0 } else { -1.0 };
        let v = sign * b * basis.value(e, &others);
        out.at_mut(idx)[0] = v;
    });
    out.antisymmetric = true;
    Ok(out)
}

/// The same element written as `m! / sqrt((m-1)!) psi_k1 ^ ... ^ psi_inf`.
pub fn control_wedge(model: &LinearDelayModel, basis: &ProperBasis, e: usize) -> Result<WedgeSum> {
    let b = check_basis(model, basis)?;
    let grid = basis.grid;
    let m = basis.m;
    let mut factors: Vec<HistoryElement> = basis.tuples[e]
        .iter()
        .map(|&k| HistoryElement::new(grid, 1, vec![0.0], basis.univariate[k].clone()))
        .collect::<Result<_>>()?;
    factors.push(HistoryElement::head_only(grid, vec![b]));
    let mf: f64 = (1..=m).map(|x| x as f64).product();
    let mf1: f64 = (1..m).map(|x| x as f64).product();
    Ok(WedgeSum::single(mf / mf1.sqrt(), factors))
}

/// `C^` followed by projection onto the measurement basis.
///
/// The measurement kernel acts along the first slot; atoms at zero read the lower
/// face. The free slots run over body nodes and are projected with body weights.
pub fn measurement_project<T: Scalar>(
    model: &LinearDelayModel,
    phi: &CompoundGridFunction<T>,
    basis: &ProperBasis,
) -> Result<Vec<T>> {
    check_basis(model, basis)?;
    if phi.m != basis.m || phi.n != 1 || phi.grid != basis.grid {
        return Err(Error::Shape(
            "element and measurement basis do not match".into(),
        ));
    }
    let m = phi.m;
    let stencil = model.c_kernel.stencil(&phi.grid)?.scalar_entries();
    let mut out = vec![T::zero(); basis.len()];
    let mut full = vec![0usize; m];
    for_each_index(m - 1, phi.grid.ng, |_, idx| {
        full[1..].copy_from_slice(idx);
        let mut y = T::zero();
        for &(l, a) in &stencil {
            full[0] = l;
            y += phi.at(&full)[0] * a;
        }
        let w = basis.weight(idx);
        for (e, o) in out.iter_mut().enumerate() {
            *o += y * (w * basis.value(e, idx));
        }
    });
    Ok(out)
}
