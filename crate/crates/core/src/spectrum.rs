//! Spectra of the additive compounds from the characteristic roots.

use crate::dde::{characteristic_roots, CharRoot, LinearDelayModel, Rect};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Sums closer than this are treated as the same eigenvalue.
pub const MERGE_TOL: f64 = 1e-9;

/// Smallest admissible distance between the line and the compound spectrum.
pub const LINE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct CompoundEigenvalue {
    pub value: Complex64,
    /// Multisets of root indices (nondecreasing) whose values sum to `value`.
    pub decompositions: Vec<Vec<usize>>,
    pub tensor_multiplicity: usize,
    pub antisym_multiplicity: usize,
}

/// All `m`-multisets of `roots` whose sums fall in `window`, grouped by value.
pub fn compound_spectrum_sums(
    roots: &[CharRoot],
    m: usize,
    window: &Rect,
) -> Vec<CompoundEigenvalue> {
    let mut out: Vec<CompoundEigenvalue> = Vec::new();
    let mut pick = Vec::with_capacity(m);
    multisets(roots.len(), m, 0, &mut pick, &mut |combo| {
        let value: Complex64 = combo.iter().map(|&k| roots[k].value).sum();
        if !window.contains(value, 0.0) {
            return;
        }
        let parts: Vec<(Complex64, usize)> = combo
            .iter()
            .map(|&k| (roots[k].value, roots[k].multiplicity))
            .collect();
        let tm = tensor_multiplicity(&parts);
        let am = antisym_multiplicity(&parts);
        match out
            .iter_mut()
            .find(|e| (e.value - value).norm() <= MERGE_TOL)
        {
            Some(e) => {
                e.decompositions.push(combo.to_vec());
                e.tensor_multiplicity += tm;
                e.antisym_multiplicity += am;
            }
            None => out.push(CompoundEigenvalue {
                value,
                decompositions: vec![combo.to_vec()],
                tensor_multiplicity: tm,
                antisym_multiplicity: am,
            }),
        }
    });
    out.sort_by(|a, b| {
        b.value
            .re
            .partial_cmp(&a.value.re)
            .unwrap()
            .then(b.value.im.partial_cmp(&a.value.im).unwrap())
    });
    out
}

fn multisets<F: FnMut(&[usize])>(
    len: usize,
    m: usize,
    start: usize,
    pick: &mut Vec<usize>,
    f: &mut F,
) {
    if pick.len() == m {
        f(pick);
        return;
    }
    for k in start..len {
        pick.push(k);
        multisets(len, m, k, pick, f);
        pick.pop();
    }
}

/// Groups a decomposition into distinct eigenvalues: `(dim, repetitions)`.
fn classes(parts: &[(Complex64, usize)]) -> Vec<(usize, usize)> {
    let mut seen: Vec<(Complex64, usize, usize)> = Vec::new();
    for &(z, d) in parts {
        match seen.iter_mut().find(|s| (s.0 - z).norm() <= MERGE_TOL) {
            Some(s) => s.2 += 1,
            None => seen.push((z, d, 1)),
        }
    }
    seen.into_iter().map(|(_, d, k)| (d, k)).collect()
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `prod_l binom(dim V_l, kappa_l)` over the distinct eigenvalues of the decomposition.
pub fn antisym_multiplicity(parts: &[(Complex64, usize)]) -> usize {
    classes(parts)
        .into_iter()
        .map(|(d, k)| binomial(d, k))
        .product()
}

/// Dimension of the matching subspace of the full tensor power.
pub fn tensor_multiplicity(parts: &[(Complex64, usize)]) -> usize {
    let cls = classes(parts);
    let m: usize = cls.iter().map(|c| c.1).sum();
    let mut arrangements = (1..=m).product::<usize>();
    for (d, k) in cls {
        arrangements /= (1..=k).product::<usize>();
        arrangements *= d.pow(k as u32);
    }
    arrangements
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralBound {
    /// Largest real part over the antisymmetric spectrum; `None` when it is empty in the window.
    pub antisymmetric: Option<f64>,
    pub tensor: Option<f64>,
    /// The bound used downstream: antisymmetric when available, tensor otherwise.
    pub s: f64,
    /// The growth bound is taken equal to the spectral bound (eventual compactness).
    pub growth_equals_spectral: bool,
}

pub fn spectral_bound(eigs: &[CompoundEigenvalue]) -> SpectralBound {
    let max_re = |filter: &dyn Fn(&CompoundEigenvalue) -> bool| {
        eigs.iter()
            .filter(|e| filter(e))
            .map(|e| e.value.re)
            .fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.max(x))))
    };
    let antisymmetric = max_re(&|e| e.antisym_multiplicity > 0);
    let tensor = max_re(&|e| e.tensor_multiplicity > 0);
    SpectralBound {
        antisymmetric,
        tensor,
        s: antisymmetric.or(tensor).unwrap_or(f64::NEG_INFINITY),
        growth_equals_spectral: true,
    }
}

/// `(j, distance)`: antisymmetric eigenvalues right of `Re = -nu0` and the gap to the line.
///
/// The gap is measured over the whole tensor spectrum, which contains the
/// antisymmetric one.
pub fn line_clearance(eigs: &[CompoundEigenvalue], nu0: f64) -> Result<(usize, f64)> {
    let line = -nu0;
    let j = eigs
        .iter()
        .filter(|e| e.value.re > line)
        .map(|e| e.antisym_multiplicity)
        .sum();
    let distance = eigs
        .iter()
        .filter(|e| e.tensor_multiplicity > 0)
        .map(|e| (e.value.re - line).abs())
        .fold(f64::INFINITY, f64::min);
    if distance < LINE_TOL {
        return Err(Error::LineHitsSpectrum { distance });
    }
    Ok((j, distance))
}

/// Picks `nu0` as the middle of the widest gap between `0` and the spectrum left of it.
///
/// Candidate abscissas are the antisymmetric real parts in `[floor, 0)`, falling
/// back to the tensor spectrum when the antisymmetric one is empty there. Spectrum
/// below `floor` is ignored because the window may not resolve it.
pub fn auto_nu0(eigs: &[CompoundEigenvalue], floor: Option<f64>) -> Option<f64> {
    let lo = floor.unwrap_or(f64::NEG_INFINITY);
    let collect = |anti: bool| -> Vec<f64> {
        eigs.iter()
            .filter(|e| {
                if anti {
                    e.antisym_multiplicity > 0
                } else {
                    e.tensor_multiplicity > 0
                }
            })
            .map(|e| e.value.re)
            .filter(|&x| x < 0.0 && x >= lo)
            .collect()
    };
    let mut pts = collect(true);
    if pts.is_empty() {
        pts = collect(false);
    }
    if pts.is_empty() {
        return None;
    }
    pts.push(0.0);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= MERGE_TOL);
    let (a, b) = pts
        .windows(2)
        .map(|w| (w[0], w[1]))
        .max_by(|x, y| (x.1 - x.0).partial_cmp(&(y.1 - y.0)).unwrap())?;
    Some(-0.5 * (a + b))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub m: usize,
    pub roots: Vec<CharRoot>,
    pub root_window: Rect,
    pub compound_window: Rect,
    pub eigenvalues: Vec<CompoundEigenvalue>,
    pub bound: SpectralBound,
    pub nu0: f64,
    pub nu0_automatic: bool,
    pub unstable_count: usize,
    pub min_distance: f64,
    /// Sums with real part at least this are complete given the root window.
    pub complete_above: f64,
    pub deepest_root_re: Option<f64>,
    pub notes: Vec<String>,
}

/// Roots in `root_window`, compound sums in `compound_window` and the line report.
pub fn spectrum_report(
    model: &LinearDelayModel,
    m: usize,
    root_window: &Rect,
    compound_window: &Rect,
    nu0: Option<f64>,
    max_roots: usize,
) -> Result<SpectrumReport> {
    if m == 0 {
        return Err(Error::Config("compound order must be positive".into()));
    }
    let roots = characteristic_roots(model, root_window, max_roots)?;
    let eigs = compound_spectrum_sums(&roots, m, compound_window);
    let bound = spectral_bound(&eigs);
    let mut notes = Vec::new();
    if roots.iter().any(|r| r.multiplicity > 1) {
        notes.push(
            "nonsimple characteristic root: eigenspace dimension taken equal to the multiplicity"
                .into(),
        );
    }
    if bound.antisymmetric.is_none() {
        notes.push("antisymmetric spectrum empty in the window; bound and line gap use the tensor spectrum".into());
    }
    let top = roots
        .iter()
        .map(|r| r.value.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let complete_above = root_window.re_min + (m as f64 - 1.0) * top.max(root_window.re_min);
    if compound_window.re_min < complete_above {
        notes.push(format!(
            "sums below Re = {complete_above:.4} may be missing; widen the root window to cover them"
        ));
    }
    let (nu0, automatic) = match nu0 {
        Some(v) => (v, false),
        None => {
            let floor = compound_window.re_min.max(complete_above);
            let v = auto_nu0(&eigs, Some(floor).filter(|f| f.is_finite())).ok_or_else(|| {
                Error::Config("cannot choose nu0: no spectrum left of zero in the window".into())
            })?;
            (v, true)
        }
    };
    let (unstable_count, min_distance) = line_clearance(&eigs, nu0)?;
    Ok(SpectrumReport {
        m,
        deepest_root_re: roots.iter().map(|r| r.value.re).reduce(f64::min),
        roots,
        root_window: *root_window,
        compound_window: *compound_window,
        eigenvalues: eigs,
        bound,
        nu0,
        nu0_automatic: automatic,
        unstable_count,
        min_distance,
        complete_above,
        notes,
    })
}
