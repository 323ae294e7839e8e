//! Characteristic matrix and its roots.
//!
//! Roots are isolated by winding numbers of `det Delta` around rectangles, with
//! recursive bisection, and then polished by Newton on `det Delta`.

use super::model::LinearDelayModel;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    fn diameter(&self) -> f64 {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }

    fn grown(&self, eps: f64) -> Rect {
        Rect::new(
            self.re_min - eps,
            self.re_max + eps,
            self.im_min - eps,
            self.im_max + eps,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharRoot {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// `int_a^b e^{lambda s} ds` and `int_a^b s e^{lambda s} ds`.
fn exp_moments(lambda: Complex64, a: f64, b: f64) -> (Complex64, Complex64) {
    let scale = lambda.norm() * a.abs().max(b.abs());
    if scale < 1e-3 {
        let mut e0 = Complex64::new(0.0, 0.0);
        let mut e1 = Complex64::new(0.0, 0.0);
        let mut lk = Complex64::new(1.0, 0.0);
        let mut fact = 1.0;
        for k in 0..10 {
            let kf = k as f64;
            e0 += lk * ((b.powi(k + 1) - a.powi(k + 1)) / ((kf + 1.0) * fact));
            e1 += lk * ((b.powi(k + 2) - a.powi(k + 2)) / ((kf + 2.0) * fact));
            lk *= lambda;
            fact *= kf + 1.0;
        }
        (e0, e1)
    } else {
        let ea = (lambda * a).exp();
        let eb = (lambda * b).exp();
        let inv = 1.0 / lambda;
        let e0 = (eb - ea) * inv;
        let e1 = eb * (b * inv - inv * inv) - ea * (a * inv - inv * inv);
        (e0, e1)
    }
}

fn to_c(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `Delta(lambda) = lambda I - sum_atoms M e^{lambda theta} - int D(theta) e^{lambda theta} dtheta`.
///
/// Density pieces are integrated in closed form.
pub fn characteristic_matrix(model: &LinearDelayModel, lambda: Complex64) -> DMatrix<Complex64> {
    char_pair(model, lambda).0
}

/// `Delta` and its derivative in `lambda`.
pub fn char_pair(
    model: &LinearDelayModel,
    lambda: Complex64,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = model.n;
    let mut d = DMatrix::<Complex64>::identity(n, n) * lambda;
    let mut dd = DMatrix::<Complex64>::identity(n, n);
    for a in &model.alpha.atoms {
        let e = (lambda * a.theta).exp();
        let m = to_c(&a.matrix);
        d -= &m * e;
        dd -= &m * (e * a.theta);
    }
    for p in &model.alpha.density {
        let (e0, e1) = exp_moments(lambda, p.from, p.to);
        let m = to_c(&p.matrix);
        d -= &m * e0;
        dd -= &m * e1;
    }
    (d, dd)
}

fn det_c(m: &DMatrix<Complex64>) -> Complex64 {
    if m.nrows() == 1 {
        m[(0, 0)]
    } else {
        m.clone().determinant()
    }
}

/// `det Delta(lambda)`.
pub fn char_det(model: &LinearDelayModel, lambda: Complex64) -> Complex64 {
    det_c(&characteristic_matrix(model, lambda))
}

/// Magnitude scale for residual checks on `det Delta`.
pub fn det_scale(model: &LinearDelayModel, lambda: Complex64) -> f64 {
    let tv = model.alpha.total_variation();
    let growth: f64 = model
        .alpha
        .atoms
        .iter()
        .map(|a| (lambda.re * a.theta).exp())
        .fold(1.0, f64::max);
    (1.0 + lambda.norm() + tv * growth).powi(model.n as i32)
}

/// `(det Delta)' / det Delta = tr(Delta^{-1} Delta')`.
fn log_derivative(model: &LinearDelayModel, lambda: Complex64) -> Option<Complex64> {
    let (d, dd) = char_pair(model, lambda);
    if model.n == 1 {
        if d[(0, 0)].norm() == 0.0 {
            return None;
        }
        return Some(dd[(0, 0)] / d[(0, 0)]);
    }
    let lu = d.lu();
    let x = lu.solve(&dd)?;
    Some(x.trace())
}

/// Newton on `det Delta` with multiplicity-aware steps.
pub fn newton_refine(
    model: &LinearDelayModel,
    start: Complex64,
    multiplicity: usize,
) -> Option<Complex64> {
    let mut z = start;
    let mult = multiplicity.max(1) as f64;
    for _ in 0..200 {
        let ld = log_derivative(model, z);
        let ld = match ld {
            Some(v) if v.is_finite() => v,
            // exactly on a root
            _ => return Some(z),
        };
        if ld.norm() == 0.0 {
            return None;
        }
        let step = mult / ld;
        let step = if step.norm() > 1.0 {
            step / step.norm()
        } else {
            step
        };
        z -= step;
        if !z.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    let f = char_det(model, z);
    let tol = 1e-10 * det_scale(model, z);
    let tol = if multiplicity > 1 {
        tol.powf(1.0 / mult).max(tol)
    } else {
        tol
    };
    if f.norm() <= tol {
        Some(z)
    } else {
        None
    }
}

struct Winding<'a> {
    model: &'a LinearDelayModel,
    refine: usize,
}

impl<'a> Winding<'a> {
    fn f(&self, z: Complex64) -> Result<Complex64> {
        let v = char_det(self.model, z);
        let tol = 1e-11 * det_scale(self.model, z);
        if !(v.norm() > tol) {
            return Err(Error::Region(format!("boundary passes near a root at {z}")));
        }
        Ok(v)
    }

    fn segment(
        &self,
        z0: Complex64,
        f0: Complex64,
        z1: Complex64,
        f1: Complex64,
        depth: u32,
    ) -> Result<f64> {
        let darg = (f1 / f0).arg();
        if darg.abs() <= PI / 6.0 || depth > 40 {
            if depth > 40 {
                return Err(Error::Region(
                    "argument increments failed to resolve".into(),
                ));
            }
            return Ok(darg);
        }
        let zm = 0.5 * (z0 + z1);
        let fm = self.f(zm)?;
        Ok(self.segment(z0, f0, zm, fm, depth + 1)? + self.segment(zm, fm, z1, f1, depth + 1)?)
    }

    fn edge(&self, a: Complex64, b: Complex64) -> Result<f64> {
        let m = 32 * self.refine;
        let mut total = 0.0;
        let mut z0 = a;
        let mut f0 = self.f(z0)?;
        for k in 1..=m {
            let z1 = a + (b - a) * (k as f64 / m as f64);
            let f1 = self.f(z1)?;
            total += self.segment(z0, f0, z1, f1, 0)?;
            z0 = z1;
            f0 = f1;
        }
        Ok(total)
    }

    fn count(&self, r: &Rect) -> Result<usize> {
        let c = [
            Complex64::new(r.re_min, r.im_min),
            Complex64::new(r.re_max, r.im_min),
            Complex64::new(r.re_max, r.im_max),
            Complex64::new(r.re_min, r.im_max),
        ];
        let mut total = 0.0;
        for k in 0..4 {
            total += self.edge(c[k], c[(k + 1) % 4])?;
        }
        let w = total / (2.0 * PI);
        let wr = w.round();
        if (w - wr).abs() > 0.05 || wr < 0.0 {
            return Err(Error::Region(format!("non-integer winding number {w}")));
        }
        Ok(wr as usize)
    }
}

/// Number of roots inside `rect`, counted with multiplicity.
pub fn winding_number(model: &LinearDelayModel, rect: &Rect, refine: usize) -> Result<usize> {
    Winding {
        model,
        refine: refine.max(1),
    }
    .count(rect)
}

/// All roots in `rect`, rightmost first, truncated to `max_roots` entries.
///
/// The rectangle is grown slightly and retried when its boundary passes too
/// close to a root.
pub fn characteristic_roots(
    model: &LinearDelayModel,
    rect: &Rect,
    max_roots: usize,
) -> Result<Vec<CharRoot>> {
    let size = rect.diameter().max(1e-6);
    let mut last_err = None;
    for attempt in 0..4 {
        let r = if attempt == 0 {
            *rect
        } else {
            rect.grown(size * 1.7e-3 * attempt as f64)
        };
        match roots_in(model, &r) {
            Ok(mut roots) => {
                roots.sort_by(|a, b| {
                    b.value
                        .re
                        .partial_cmp(&a.value.re)
                        .unwrap()
                        .then(b.value.im.partial_cmp(&a.value.im).unwrap())
                });
                roots.truncate(max_roots);
                return Ok(roots);
            }
            Err(e @ Error::Region(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Region("root isolation failed".into())))
}

fn roots_in(model: &LinearDelayModel, rect: &Rect) -> Result<Vec<CharRoot>> {
    let w = Winding { model, refine: 1 };
    let total = w.count(rect)?;
    let mut out = Vec::new();
    isolate(&w, rect, total, 0, &mut out)?;
    let found: usize = out.iter().map(|r| r.multiplicity).sum();
    if found != total {
        return Err(Error::Region(format!(
            "found {found} roots, winding count {total}"
        )));
    }
    Ok(out)
}

const SPLITS: [f64; 5] = [0.5173, 0.4791, 0.5411, 0.4527, 0.6037];

fn isolate(w: &Winding, r: &Rect, count: usize, depth: u32, out: &mut Vec<CharRoot>) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    if count == 1 || r.diameter() < 1e-7 || depth > 60 {
        if let Some(z) = newton_refine(w.model, r.center(), count) {
            if r.contains(z, 1e-9 * (1.0 + z.norm())) {
                out.push(CharRoot {
                    value: z,
                    multiplicity: count,
                });
                return Ok(());
            }
        }
        if r.diameter() < 1e-7 || depth > 60 {
            return Err(Error::Region(format!(
                "could not polish a root near {}",
                r.center()
            )));
        }
    }
    let vertical = (r.re_max - r.re_min) >= (r.im_max - r.im_min);
    for s in SPLITS {
        let (a, b) = if vertical {
            let x = r.re_min + s * (r.re_max - r.re_min);
            (
                Rect::new(r.re_min, x, r.im_min, r.im_max),
                Rect::new(x, r.re_max, r.im_min, r.im_max),
            )
        } else {
            let y = r.im_min + s * (r.im_max - r.im_min);
            (
                Rect::new(r.re_min, r.re_max, r.im_min, y),
                Rect::new(r.re_min, r.re_max, y, r.im_max),
            )
        };
        let ca = match w.count(&a) {
            Ok(c) => c,
            Err(Error::Region(_)) => continue,
            Err(e) => return Err(e),
        };
        if ca > count {
            continue;
        }
        isolate(w, &a, ca, depth + 1, out)?;
        isolate(w, &b, count - ca, depth + 1, out)?;
        return Ok(());
    }
    Err(Error::Region(format!("no admissible split of {r:?}")))
}
