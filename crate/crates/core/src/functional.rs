//! Local functionals of a path, `A[x] = int f(s, x(s), x'(s)) ds`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd;
use crate::model::ConfigurationModel;
use crate::trajectory::{central_difference, interior_max_norm, Grid, Trajectory};

/// Number of standard deviations at which [`Window::Gaussian`] is cut off.
pub const GAUSSIAN_CUTOFF: f64 = 8.0;

/// Smooth compactly supported weights in `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// `a * exp(1 - 1/(1 - r^2))`, `r = (s - center) / half_width`.
    Bump { center: f64, half_width: f64, amplitude: f64 },
    /// `a * exp(-r^2 / 2)`, `r = (s - center) / sigma`, zero beyond the cutoff.
    Gaussian { center: f64, sigma: f64, amplitude: f64 },
}

impl Window {
    pub fn bump(center: f64, half_width: f64) -> Self {
        Window::Bump { center, half_width, amplitude: 1.0 }
    }

    pub fn gaussian(center: f64, sigma: f64) -> Self {
        Window::Gaussian { center, sigma, amplitude: 1.0 }
    }

    /// Gaussian with unit integral.
    pub fn unit_gaussian(center: f64, sigma: f64) -> Self {
        Window::Gaussian { center, sigma, amplitude: 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt()) }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Window::Bump { center, half_width, .. } => (center - half_width, center + half_width),
            Window::Gaussian { center, sigma, .. } => (center - GAUSSIAN_CUTOFF * sigma, center + GAUSSIAN_CUTOFF * sigma),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Window::Bump { center, half_width, amplitude } => {
                let r = (s - center) / half_width;
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - r * r)).exp()
                }
            }
            Window::Gaussian { center, sigma, amplitude } => {
                let r = (s - center) / sigma;
                if r.abs() > GAUSSIAN_CUTOFF {
                    0.0
                } else {
                    amplitude * (-0.5 * r * r).exp()
                }
            }
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Window::Bump { center, half_width, .. } => {
                let r = (s - center) / half_width;
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    let q = 1.0 - r * r;
                    self.value(s) * (-2.0 * r / (q * q)) / half_width
                }
            }
            Window::Gaussian { center, sigma, .. } => {
                let r = (s - center) / sigma;
                -self.value(s) * r / sigma
            }
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        match *self {
            Window::Bump { center, half_width, amplitude } => Window::Bump { center: center + c, half_width, amplitude },
            Window::Gaussian { center, sigma, amplitude } => Window::Gaussian { center: center + c, sigma, amplitude },
        }
    }
}

/// Density `f(s, x, v)`.
pub type Density = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
/// Closed-form `(df/dx, df/dv)`.
pub type DensityGradient = Arc<dyn Fn(f64, &[f64], &[f64]) -> (DVector<f64>, DVector<f64>) + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Smooth { a: f64, b: f64 },
    /// Delta-like density `f(x) / ds` at a single grid point.
    Point { s: f64, index: usize, cell: f64 },
}

#[derive(Clone)]
pub struct PathFunctional {
    label: String,
    kind: Kind,
    density: Density,
    gradient: Option<DensityGradient>,
}

impl fmt::Debug for PathFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathFunctional").field("label", &self.label).field("kind", &self.kind).finish()
    }
}

impl PathFunctional {
    /// Functional with density `f` supported on `[a, b]`.
    pub fn new<F>(label: impl Into<String>, a: f64, b: f64, density: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!("support [{a}, {b}] is empty")));
        }
        Ok(PathFunctional { label: label.into(), kind: Kind::Smooth { a, b }, density: Arc::new(density), gradient: None })
    }

    /// Point functional `A[x] = f(x(s))` at the grid point `s`.
    pub fn point<F>(label: impl Into<String>, grid: &Grid, s: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let index = grid
            .index_of(s)
            .ok_or_else(|| Error::InvalidInput(format!("point functional at s = {s} is not on the grid")))?;
        Ok(PathFunctional {
            label: label.into(),
            kind: Kind::Point { s: grid.s(index), index, cell: grid.step() },
            density: Arc::new(move |_, x, _| f(x)),
            gradient: None,
        })
    }

    /// `A[x] = x^component(s)`.
    pub fn coordinate_at(label: impl Into<String>, grid: &Grid, s: f64, component: usize, n: usize) -> Result<Self> {
        let mut e = DVector::zeros(n);
        e[component] = 1.0;
        Ok(Self::point(label, grid, s, move |x| x[component])?
            .with_gradient(move |_, _, _| (e.clone(), DVector::zeros(e.len()))))
    }

    /// `A[x] = int w(s) (cx . x + cv . v) ds`.
    pub fn linear(label: impl Into<String>, window: Window, cx: DVector<f64>, cv: DVector<f64>) -> Result<Self> {
        let (a, b) = window.support();
        let (cx1, cv1) = (cx.clone(), cv.clone());
        Ok(Self::new(label, a, b, move |s, x, v| {
            window.value(s) * (cx1.iter().zip(x).map(|(c, y)| c * y).sum::<f64>() + cv1.iter().zip(v).map(|(c, y)| c * y).sum::<f64>())
        })?
        .with_gradient(move |s, _, _| {
            let w = window.value(s);
            (&cx * w, &cv * w)
        }))
    }

    /// `A[x] = int w(s) x.Q x / 2 ds` with symmetric `Q`.
    pub fn quadratic(label: impl Into<String>, window: Window, q: DMatrix<f64>) -> Result<Self> {
        let (a, b) = window.support();
        let q1 = q.clone();
        Ok(Self::new(label, a, b, move |s, x, _| {
            let xv = DVector::from_column_slice(x);
            0.5 * window.value(s) * xv.dot(&(&q1 * &xv))
        })?
        .with_gradient(move |s, x, v| {
            let xv = DVector::from_column_slice(x);
            (&q * xv * window.value(s), DVector::zeros(v.len()))
        }))
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(f64, &[f64], &[f64]) -> (DVector<f64>, DVector<f64>) + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Closed support `[a, b]` (degenerate for point functionals).
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            Kind::Smooth { a, b } => (a, b),
            Kind::Point { s, .. } => (s, s),
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self.kind, Kind::Point { .. })
    }

    pub fn point_index(&self) -> Option<usize> {
        match self.kind {
            Kind::Point { index, .. } => Some(index),
            Kind::Smooth { .. } => None,
        }
    }

    /// Fails with [`Error::SupportOutOfRange`] unless the support lies in `[-T, T]`.
    pub fn check_support(&self, grid: &Grid) -> Result<()> {
        let (a, b) = self.support();
        let t = grid.half_width();
        if a < -t - 1e-12 || b > t + 1e-12 {
            return Err(Error::SupportOutOfRange { a, b, t });
        }
        if let Kind::Point { index, cell, .. } = self.kind {
            if index >= grid.len() || (cell - grid.step()).abs() > 1e-12 * cell {
                return Err(Error::GridMismatch { expected: grid.len(), found: index });
            }
        }
        Ok(())
    }

    fn raw_gradient(&self, s: f64, x: &[f64], v: &[f64]) -> (DVector<f64>, DVector<f64>) {
        if let Some(g) = &self.gradient {
            return g(s, x, v);
        }
        let n = x.len();
        let mut z = Vec::with_capacity(2 * n);
        z.extend_from_slice(x);
        z.extend_from_slice(v);
        let g = fd::gradient(|z: &[f64]| (self.density)(s, &z[..n], &z[n..]), &z);
        (DVector::from_column_slice(&g[..n]), DVector::from_column_slice(&g[n..]))
    }

    /// Density value; point functionals give `f / ds` at their grid point.
    pub fn density(&self, s: f64, x: &[f64], v: &[f64]) -> f64 {
        match self.kind {
            Kind::Smooth { a, b } => {
                if s < a || s > b {
                    0.0
                } else {
                    (self.density)(s, x, v)
                }
            }
            Kind::Point { s: p, cell, .. } => {
                if (s - p).abs() <= 1e-9 * cell {
                    (self.density)(s, x, v) / cell
                } else {
                    0.0
                }
            }
        }
    }

    /// `(dA/dx, dA/dv)` of the continuous part of the density; zero for point functionals.
    pub fn smooth_partials(&self, s: f64, x: &[f64], v: &[f64]) -> (DVector<f64>, DVector<f64>) {
        match self.kind {
            Kind::Smooth { a, b } if s >= a && s <= b => self.raw_gradient(s, x, v),
            _ => (DVector::zeros(x.len()), DVector::zeros(v.len())),
        }
    }

    /// Jump in momentum produced by a point functional, `df/dx` at its point.
    pub fn impulse(&self, traj: &Trajectory) -> Result<Option<(usize, DVector<f64>)>> {
        match self.kind {
            Kind::Smooth { .. } => Ok(None),
            Kind::Point { s, index, .. } => {
                let (gx, gv) = self.raw_gradient(s, traj.x(index).as_slice(), traj.v(index).as_slice());
                if gv.amax() > 0.0 {
                    return Err(Error::UnsupportedSource {
                        label: self.label.clone(),
                        reason: "point functionals may depend on position only".into(),
                    });
                }
                Ok(Some((index, gx)))
            }
        }
    }

    /// Density partials at grid point `i`, including point contributions.
    pub fn grid_partials(&self, traj: &Trajectory, i: usize) -> (DVector<f64>, DVector<f64>) {
        let s = traj.grid().s(i);
        let (x, v) = (traj.x(i).as_slice(), traj.v(i).as_slice());
        match self.kind {
            Kind::Point { index, cell, .. } if index == i => {
                let (gx, gv) = self.raw_gradient(s, x, v);
                (gx / cell, gv / cell)
            }
            _ => self.smooth_partials(s, x, v),
        }
    }

    /// Trapezoid value of the functional along `traj`.
    pub fn evaluate(&self, traj: &Trajectory) -> f64 {
        let g = traj.grid();
        (0..g.len())
            .map(|i| g.trapezoid_weight(i) * self.density(g.s(i), traj.x(i).as_slice(), traj.v(i).as_slice()))
            .sum()
    }

    /// Weak pairing `int (dA/dx . J + dA/dv . J') ds` by the trapezoid rule.
    ///
    /// Equals `int eps . J ds` after integration by parts whenever the support
    /// is interior, and avoids differencing the sampled density.
    pub fn pair(&self, traj: &Trajectory, values: &[DVector<f64>], derivs: &[DVector<f64>]) -> f64 {
        let g = traj.grid();
        (0..g.len())
            .map(|i| {
                let (ax, av) = self.grid_partials(traj, i);
                if ax.amax() == 0.0 && av.amax() == 0.0 {
                    return 0.0;
                }
                g.trapezoid_weight(i) * (ax.dot(&values[i]) + av.dot(&derivs[i]))
            })
            .sum()
    }

    /// `A o tau_c`, the functional translated forward in time by `c`.
    pub fn translated(&self, c: f64) -> Self {
        let density = self.density.clone();
        let gradient = self.gradient.clone();
        let kind = match self.kind {
            Kind::Smooth { a, b } => Kind::Smooth { a: a + c, b: b + c },
            Kind::Point { s, index, cell } => {
                let shift = (c / cell).round();
                Kind::Point { s: s + shift * cell, index: (index as f64 + shift) as usize, cell }
            }
        };
        PathFunctional {
            label: format!("{}+{c}", self.label),
            kind,
            density: Arc::new(move |s, x, v| density(s - c, x, v)),
            gradient: gradient.map(|g| -> DensityGradient { Arc::new(move |s, x, v| g(s - c, x, v)) }),
        }
    }

    /// Linear combination of smooth functionals.
    pub fn combine(label: impl Into<String>, terms: &[(f64, &PathFunctional)]) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(|(_, f)| f.is_point()) {
            return Err(Error::InvalidInput("combine needs smooth functionals".into()));
        }
        let a = terms.iter().map(|(_, f)| f.support().0).fold(f64::INFINITY, f64::min);
        let b = terms.iter().map(|(_, f)| f.support().1).fold(f64::NEG_INFINITY, f64::max);
        let parts: Vec<(f64, PathFunctional)> = terms.iter().map(|(c, f)| (*c, (*f).clone())).collect();
        let parts2 = parts.clone();
        Ok(Self::new(label, a, b, move |s, x, v| parts.iter().map(|(c, f)| c * f.density(s, x, v)).sum())?
            .with_gradient(move |s, x, v| {
                let mut gx = DVector::zeros(x.len());
                let mut gv = DVector::zeros(v.len());
                for (c, f) in &parts2 {
                    let (px, pv) = f.smooth_partials(s, x, v);
                    gx += px * *c;
                    gv += pv * *c;
                }
                (gx, gv)
            }))
    }
}

/// `eps = dA/dx - d/ds (dA/dv)` on the grid, with central differences in `s`.
pub fn functional_gradient(functional: &PathFunctional, traj: &Trajectory) -> Result<Vec<DVector<f64>>> {
    functional.check_support(traj.grid())?;
    let n = traj.len();
    let (ax, av): (Vec<_>, Vec<_>) = (0..n).map(|i| functional.grid_partials(traj, i)).unzip();
    let dav = central_difference(&av, traj.grid().step());
    Ok(ax.into_iter().zip(dav).map(|(a, d)| a - d).collect())
}

/// Euler-Lagrange residual `d/ds (dL/dv) - dL/dx` at every grid point.
///
/// The derivative uses central differences, one-sided at the two ends; norms
/// over the result should skip those ends.
pub fn el_residual(model: &ConfigurationModel, traj: &Trajectory) -> Result<Vec<DVector<f64>>> {
    if model.dim() != traj.dim() {
        return Err(Error::InvalidInput(format!("model dimension {} != trajectory dimension {}", model.dim(), traj.dim())));
    }
    let (lv, lx) = momentum_and_force(model, traj)?;
    let dlv = central_difference(&lv, traj.grid().step());
    Ok(dlv.into_iter().zip(lx).map(|(d, x)| d - x).collect())
}

fn momentum_and_force(model: &ConfigurationModel, traj: &Trajectory) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let g = traj.grid();
    let mut lv = Vec::with_capacity(traj.len());
    let mut lx = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let p = model.partials(g.s(i), traj.x(i).as_slice(), traj.v(i).as_slice())?;
        lv.push(p.lv);
        lx.push(p.lx);
    }
    Ok((lv, lx))
}

/// Largest Euler-Lagrange residual with the momentum differenced by the
/// five-point stencil, over points `2..N-2`. Used to decide whether a path is
/// on shell, where the `O(h^2)` error of [`el_residual`] would reject accurate
/// solutions of stiff models on coarse grids.
pub fn on_shell_residual(model: &ConfigurationModel, traj: &Trajectory) -> Result<f64> {
    if traj.len() < 5 {
        return Ok(interior_max_norm(&el_residual(model, traj)?));
    }
    if model.dim() != traj.dim() {
        return Err(Error::InvalidInput(format!("model dimension {} != trajectory dimension {}", model.dim(), traj.dim())));
    }
    let (lv, lx) = momentum_and_force(model, traj)?;
    let h = traj.grid().step();
    Ok((2..traj.len() - 2)
        .map(|i| ((&lv[i - 2] - &lv[i + 2] + (&lv[i + 1] - &lv[i - 1]) * 8.0) / (12.0 * h) - &lx[i]).norm())
        .fold(0.0, f64::max))
}
