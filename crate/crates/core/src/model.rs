//! Lagrangian models and their partial derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd;
use crate::metric::Metric;

/// First and second partials of a Lagrangian at one point `(s, x, v)`.
///
/// `lxv[(mu, nu)]` is the mixed partial with respect to `x^mu` and `v^nu`;
/// the velocity-first matrix is [`PartialBundle::lvx`].
#[derive(Debug, Clone, PartialEq)]
pub struct PartialBundle {
    pub lx: DVector<f64>,
    pub lv: DVector<f64>,
    pub lxx: DMatrix<f64>,
    pub lxv: DMatrix<f64>,
    pub lvv: DMatrix<f64>,
}

impl PartialBundle {
    pub fn zeros(n: usize) -> Self {
        PartialBundle {
            lx: DVector::zeros(n),
            lv: DVector::zeros(n),
            lxx: DMatrix::zeros(n, n),
            lxv: DMatrix::zeros(n, n),
            lvv: DMatrix::zeros(n, n),
        }
    }

    /// `lvx[(mu, nu)] = d2L / dv^mu dx^nu`.
    pub fn lvx(&self) -> DMatrix<f64> {
        self.lxv.transpose()
    }

    pub fn is_finite(&self) -> bool {
        self.lx.iter().chain(self.lv.iter()).all(|v| v.is_finite())
            && self.lxx.iter().chain(self.lxv.iter()).chain(self.lvv.iter()).all(|v| v.is_finite())
    }

    /// Largest absolute elementwise difference to another bundle.
    pub fn max_abs_diff(&self, other: &PartialBundle) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        d(self.lx.as_slice(), other.lx.as_slice())
            .max(d(self.lv.as_slice(), other.lv.as_slice()))
            .max(d(self.lxx.as_slice(), other.lxx.as_slice()))
            .max(d(self.lxv.as_slice(), other.lxv.as_slice()))
            .max(d(self.lvv.as_slice(), other.lvv.as_slice()))
    }
}

/// A scalar Lagrangian `L(s, x, v)` on an `n`-dimensional configuration space.
pub trait Lagrangian: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, s: f64, x: &[f64], v: &[f64]) -> f64;

    /// Closed-form partials, if the model has them.
    fn analytic_partials(&self, _s: f64, _x: &[f64], _v: &[f64]) -> Option<PartialBundle> {
        None
    }

    /// Metric `g` when `L = m g(v, v) / 2`.
    fn metric(&self) -> Option<&dyn Metric> {
        None
    }

    fn mass(&self) -> f64 {
        1.0
    }

    /// Whether `L` is independent of `s`.
    fn is_autonomous(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartialsMode {
    Analytic,
    FiniteDifference,
}

/// A Lagrangian together with the way its partials are obtained.
#[derive(Clone, Debug)]
pub struct ConfigurationModel {
    lagrangian: Arc<dyn Lagrangian>,
    mode: PartialsMode,
}

impl ConfigurationModel {
    pub fn new(lagrangian: Arc<dyn Lagrangian>, mode: PartialsMode) -> Result<Self> {
        if mode == PartialsMode::Analytic {
            let z = vec![0.0; lagrangian.dim()];
            if lagrangian.analytic_partials(0.0, &z, &z).is_none() {
                return Err(Error::MissingAnalyticPartials);
            }
        }
        Ok(ConfigurationModel { lagrangian, mode })
    }

    pub fn analytic<L: Lagrangian + 'static>(lagrangian: L) -> Result<Self> {
        Self::new(Arc::new(lagrangian), PartialsMode::Analytic)
    }

    pub fn finite_difference<L: Lagrangian + 'static>(lagrangian: L) -> Self {
        ConfigurationModel { lagrangian: Arc::new(lagrangian), mode: PartialsMode::FiniteDifference }
    }

    /// Same Lagrangian with a different partials mode.
    pub fn with_mode(&self, mode: PartialsMode) -> Result<Self> {
        Self::new(self.lagrangian.clone(), mode)
    }

    pub fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    pub fn mode(&self) -> PartialsMode {
        self.mode
    }

    pub fn name(&self) -> &str {
        self.lagrangian.name()
    }

    pub fn lagrangian(&self) -> &dyn Lagrangian {
        self.lagrangian.as_ref()
    }

    pub fn metric(&self) -> Option<&dyn Metric> {
        self.lagrangian.metric()
    }

    pub fn mass(&self) -> f64 {
        self.lagrangian.mass()
    }

    pub fn value(&self, s: f64, x: &[f64], v: &[f64]) -> f64 {
        self.lagrangian.value(s, x, v)
    }

    /// Partials in the configured mode; fails on non-finite output.
    pub fn partials(&self, s: f64, x: &[f64], v: &[f64]) -> Result<PartialBundle> {
        let bundle = match self.mode {
            PartialsMode::Analytic => {
                self.lagrangian.analytic_partials(s, x, v).ok_or(Error::MissingAnalyticPartials)?
            }
            PartialsMode::FiniteDifference => self.partials_fd(s, x, v),
        };
        if bundle.is_finite() {
            Ok(bundle)
        } else {
            Err(Error::NonFiniteDerivative { s })
        }
    }

    /// Central-difference partials regardless of the configured mode.
    pub fn partials_fd(&self, s: f64, x: &[f64], v: &[f64]) -> PartialBundle {
        let n = self.dim();
        let mut z = Vec::with_capacity(2 * n);
        z.extend_from_slice(x);
        z.extend_from_slice(v);
        let l = |z: &[f64]| self.lagrangian.value(s, &z[..n], &z[n..]);
        let g = fd::gradient(l, &z);
        let h = fd::hessian(l, &z);
        PartialBundle {
            lx: DVector::from_column_slice(&g[..n]),
            lv: DVector::from_column_slice(&g[n..]),
            lxx: h.view((0, 0), (n, n)).into_owned(),
            lxv: h.view((0, n), (n, n)).into_owned(),
            lvv: h.view((n, n), (n, n)).into_owned(),
        }
    }

    /// `d2L / dv ds`, zero for autonomous models.
    pub fn lvs(&self, s: f64, x: &[f64], v: &[f64]) -> Result<DVector<f64>> {
        if self.lagrangian.is_autonomous() {
            return Ok(DVector::zeros(self.dim()));
        }
        let h = fd::step(fd::FIRST_STEP, s);
        let p = self.partials(s + h, x, v)?;
        let m = self.partials(s - h, x, v)?;
        Ok((p.lv - m.lv) / (2.0 * h))
    }
}

/// Free-function form of [`ConfigurationModel::partials`].
pub fn partials(model: &ConfigurationModel, s: f64, x: &[f64], v: &[f64]) -> Result<PartialBundle> {
    model.partials(s, x, v)
}
