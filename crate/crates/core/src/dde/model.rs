use crate::error::{Error, Result};
use crate::hilbert::{spectral_norm, StieltjesKernel};
use nalgebra::DMatrix;

/// Time-dependent gain `F'(t)`, an `r1 x r2` matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Gain {
    Constant(DMatrix<f64>),
    /// Samples at `t0 + k*dt`, linearly interpolated and clamped at both ends.
    Series {
        t0: f64,
        dt: f64,
        values: Vec<DMatrix<f64>>,
    },
}

impl Gain {
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        match self {
            Gain::Constant(d) => d.clone(),
            Gain::Series { t0, dt, values } => {
                let x = (t - t0) / dt;
                if x <= 0.0 {
                    return values[0].clone();
                }
                let k = x.floor() as usize;
                if k + 1 >= values.len() {
                    return values[values.len() - 1].clone();
                }
                let s = x - k as f64;
                &values[k] * (1.0 - s) + &values[k + 1] * s
            }
        }
    }

    /// The gain seen after time `s` has elapsed: `t -> gain(t + s)`.
    pub fn shifted(&self, s: f64) -> Gain {
        match self {
            Gain::Constant(d) => Gain::Constant(d.clone()),
            Gain::Series { t0, dt, values } => Gain::Series {
                t0: t0 - s,
                dt: *dt,
                values: values.clone(),
            },
        }
    }

    pub fn minus(&self, d: &DMatrix<f64>) -> Gain {
        match self {
            Gain::Constant(g) => Gain::Constant(g - d),
            Gain::Series { t0, dt, values } => Gain::Series {
                t0: *t0,
                dt: *dt,
                values: values.iter().map(|g| g - d).collect(),
            },
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Gain::Constant(d) => d.shape(),
            Gain::Series { values, .. } => values[0].shape(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        match self {
            Gain::Constant(d) => spectral_norm(d),
            Gain::Series { values, .. } => values.iter().map(spectral_norm).fold(0.0, f64::max),
        }
    }
}

/// `x'(t) = alpha x_t + B F'(t) c x_t` with `|F'(t)| <= Lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDelayModel {
    pub n: usize,
    pub tau: f64,
    pub alpha: StieltjesKernel,
    pub b_tilde: DMatrix<f64>,
    pub c_kernel: StieltjesKernel,
    pub lambda_gain: f64,
    pub gain: Option<Gain>,
}

impl LinearDelayModel {
    pub fn new(
        tau: f64,
        alpha: StieltjesKernel,
        b_tilde: DMatrix<f64>,
        c_kernel: StieltjesKernel,
        lambda_gain: f64,
        gain: Option<Gain>,
    ) -> Result<Self> {
        let model = LinearDelayModel {
            n: alpha.in_dim,
            tau,
            alpha,
            b_tilde,
            c_kernel,
            lambda_gain,
            gain,
        };
        model.validate()?;
        Ok(model)
    }

    /// Scalar model with no input and no measurement.
    pub fn scalar(tau: f64, alpha: StieltjesKernel) -> Result<Self> {
        Self::new(
            tau,
            alpha,
            DMatrix::from_element(1, 1, 1.0),
            StieltjesKernel::zero(1, 1),
            0.0,
            None,
        )
    }

    pub fn r1(&self) -> usize {
        self.b_tilde.ncols()
    }

    pub fn r2(&self) -> usize {
        self.c_kernel.out_dim
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!(
                "delay horizon must be positive, got {}",
                self.tau
            )));
        }
        if self.alpha.out_dim != self.n || self.alpha.in_dim != self.n {
            return Err(Error::Shape("stationary kernel must be n x n".into()));
        }
        if self.b_tilde.nrows() != self.n {
            return Err(Error::Shape("input matrix must have n rows".into()));
        }
        if self.c_kernel.in_dim != self.n {
            return Err(Error::Shape("measurement kernel must act on R^n".into()));
        }
        self.alpha.validate(self.tau)?;
        self.c_kernel.validate(self.tau)?;
        if !(self.lambda_gain >= 0.0) {
            return Err(Error::Config("gain bound must be nonnegative".into()));
        }
        if let Some(g) = &self.gain {
            if g.shape() != (self.r1(), self.r2()) {
                return Err(Error::Shape(format!(
                    "gain is {:?}, expected {}x{}",
                    g.shape(),
                    self.r1(),
                    self.r2()
                )));
            }
            let gmax = g.max_norm();
            if gmax > self.lambda_gain * (1.0 + 1e-12) + 1e-15 {
                return Err(Error::Config(format!(
                    "gain norm {gmax} exceeds the bound {}",
                    self.lambda_gain
                )));
            }
        }
        Ok(())
    }

    /// Replace the gain bound, e.g. after a sector shift.
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda_gain = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gain(mut self, gain: Option<Gain>) -> Result<Self> {
        self.gain = gain;
        self.validate()?;
        Ok(self)
    }

    /// The model without its time-varying part.
    pub fn stationary(&self) -> Self {
        LinearDelayModel {
            gain: None,
            ..self.clone()
        }
    }

    /// Folds a constant gain into the kernel; other models are returned as they are.
    pub fn autonomous(&self) -> Result<Self> {
        match &self.gain {
            Some(Gain::Constant(d)) => {
                let mut out = shift_feedback(self, d, None)?;
                out.gain = None;
                Ok(out)
            }
            _ => Ok(self.clone()),
        }
    }
}

/// Folds a constant `D` into the stationary part: `alpha' = alpha + B D c`, `gain' = gain - D`.
///
/// The right-hand side of the equation is unchanged. `lambda` replaces the gain
/// bound when given; otherwise the old bound is kept.
pub fn shift_feedback(
    model: &LinearDelayModel,
    d: &DMatrix<f64>,
    lambda: Option<f64>,
) -> Result<LinearDelayModel> {
    if d.shape() != (model.r1(), model.r2()) {
        return Err(Error::Shape(format!(
            "shift is {:?}, expected {}x{}",
            d.shape(),
            model.r1(),
            model.r2()
        )));
    }
    let bd = &model.b_tilde * d;
    let extra = model
        .c_kernel
        .sandwich(&bd, &DMatrix::identity(model.n, model.n))?;
    let alpha = if d.iter().all(|v| *v == 0.0) {
        model.alpha.clone()
    } else {
        model.alpha.plus(&extra)?
    };
    let gain = model.gain.as_ref().map(|g| g.minus(d));
    let out = LinearDelayModel {
        n: model.n,
        tau: model.tau,
        alpha,
        b_tilde: model.b_tilde.clone(),
        c_kernel: model.c_kernel.clone(),
        lambda_gain: lambda.unwrap_or(model.lambda_gain),
        gain,
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mg_like(gamma: f64, tau: f64) -> LinearDelayModel {
        LinearDelayModel::new(
            tau,
            StieltjesKernel::scalar_atom(0.0, -gamma),
            DMatrix::from_element(1, 1, 1.0),
            StieltjesKernel::scalar_atom(-tau, 1.0),
            0.5,
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_shift_is_identity() {
        let m = mg_like(0.1, 2.0);
        let s = shift_feedback(&m, &DMatrix::zeros(1, 1), None).unwrap();
        assert_eq!(s, m);
    }

    #[test]
    fn shift_adds_delayed_atom() {
        let m = mg_like(0.1, 2.0);
        let s = shift_feedback(&m, &DMatrix::from_element(1, 1, -0.3), None).unwrap();
        assert_eq!(s.alpha.atoms.len(), 2);
        assert_eq!(s.alpha.atoms[1].theta, -2.0);
        assert!((s.alpha.atoms[1].matrix[(0, 0)] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn gain_bound_is_enforced() {
        let m = mg_like(0.1, 1.0);
        let g = Some(Gain::Constant(DMatrix::from_element(1, 1, 0.7)));
        assert!(matches!(m.with_gain(g), Err(Error::Config(_))));
    }

    #[test]
    fn series_gain_interpolates_and_shifts() {
        let g = Gain::Series {
            t0: 0.0,
            dt: 1.0,
            values: vec![
                DMatrix::from_element(1, 1, 0.0),
                DMatrix::from_element(1, 1, 1.0),
            ],
        };
        assert!((g.at(0.25)[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((g.shifted(0.5).at(0.25)[(0, 0)] - 0.75).abs() < 1e-15);
        assert_eq!(g.at(5.0)[(0, 0)], 1.0);
    }
}
