//! Linearized flow along a reference solution.
//!
//! Jacobi fields and sourced responses are integrated in momentum form,
//! `delta' = Lvv^-1 (pi - Lvx delta - dA/dv)`, `pi' = Lxv delta' + Lxx delta + dA/dx`,
//! which needs second partials of `L` only. The reference path is re-integrated
//! inside every grid interval from the stored samples (or evaluated exactly when
//! the trajectory carries a closed form), so RK4 stage points see consistent data.
//!
//! Models with `Lvv = 0` (first order in time) are handled with
//! `(Lvx - Lxv) delta' = (Lxx - dLvx/ds) delta + dA/dx` and need an exact reference.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functional::PathFunctional;
use crate::model::ConfigurationModel;
use crate::solver::dynamics;
use crate::trajectory::{central_difference, ExactPath, Grid, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// RK4 steps per grid interval.
    pub substeps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { substeps: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// Regular Lagrangian, `Lvv` invertible.
    Second,
    /// `Lvv = 0` with an invertible `Lvx - Lxv`.
    First,
}

#[derive(Debug, Clone)]
pub(crate) enum Linearization {
    Second { lvv: DMatrix<f64>, lvv_inv: DMatrix<f64>, lvx: DMatrix<f64>, lxv: DMatrix<f64>, lxx: DMatrix<f64> },
    First { k: DMatrix<f64>, kinv: DMatrix<f64>, drift: DMatrix<f64> },
}

impl Linearization {
    /// `Lvv` and `Lvx - Lxv`, the matrices entering the two-form.
    fn form(&self) -> (Option<&DMatrix<f64>>, DMatrix<f64>) {
        match self {
            Linearization::Second { lvv, lvx, lxv, .. } => (Some(lvv), lvx - lxv),
            Linearization::First { k, .. } => (None, k.clone()),
        }
    }
}

#[derive(Debug, Clone)]
struct Stage {
    s: f64,
    x: DVector<f64>,
    v: DVector<f64>,
    lin: Linearization,
}

/// A Jacobi field (or response) sampled on the grid together with its `s`-derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiField {
    pub values: Vec<DVector<f64>>,
    pub derivs: Vec<DVector<f64>>,
}

impl JacobiField {
    pub fn zeros(points: usize, dim: usize) -> Self {
        JacobiField { values: vec![DVector::zeros(dim); points], derivs: vec![DVector::zeros(dim); points] }
    }

    /// Field from samples, derivative by central differences.
    pub fn from_samples(grid: &Grid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch { expected: grid.len(), found: values.len() });
        }
        let derivs = central_difference(&values, grid.step());
        Ok(JacobiField { values, derivs })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// `sum_k c_k F_k`.
    pub fn combination(terms: &[(f64, &JacobiField)]) -> JacobiField {
        let (c0, f0) = terms[0];
        let mut out = JacobiField {
            values: f0.values.iter().map(|v| v * c0).collect(),
            derivs: f0.derivs.iter().map(|v| v * c0).collect(),
        };
        for (c, f) in &terms[1..] {
            for i in 0..out.len() {
                out.values[i] += &f.values[i] * *c;
                out.derivs[i] += &f.derivs[i] * *c;
            }
        }
        out
    }

    pub fn difference(&self, other: &JacobiField) -> JacobiField {
        JacobiField::combination(&[(1.0, self), (-1.0, other)])
    }

    /// Largest absolute component of the sampled values.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.amax()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Forward,
    Backward,
}

/// Precomputed linearization of a model along a trajectory.
#[derive(Debug, Clone)]
pub struct LinearizedFlow {
    model: ConfigurationModel,
    traj: Trajectory,
    options: FlowOptions,
    order: Order,
    grid_lin: Vec<Linearization>,
    forward: Vec<Vec<Stage>>,
    backward: Vec<Vec<Stage>>,
}

const FIRST_ORDER_TOL: f64 = 1e-14;

fn second_order(model: &ConfigurationModel, s: f64, x: &DVector<f64>, v: &DVector<f64>) -> Result<(Linearization, DVector<f64>)> {
    let d = dynamics(model, s, x, v)?;
    let lvx = d.partials.lvx();
    let p = d.partials;
    Ok((Linearization::Second { lvv: p.lvv, lvv_inv: d.lvv_inv, lvx, lxv: p.lxv, lxx: p.lxx }, d.accel))
}

fn first_order(model: &ConfigurationModel, exact: &ExactPath, s: f64, x: &DVector<f64>, v: &DVector<f64>) -> Result<Linearization> {
    let p = model.partials(s, x.as_slice(), v.as_slice())?;
    let k = p.lvx() - &p.lxv;
    let kinv = k.clone().try_inverse().ok_or(Error::DegenerateFirstOrder { s })?;
    let eta = 1e-5 * s.abs().max(1.0);
    let (xp, vp) = exact(s + eta);
    let (xm, vm) = exact(s - eta);
    let lp = model.partials(s + eta, xp.as_slice(), vp.as_slice())?.lvx();
    let lm = model.partials(s - eta, xm.as_slice(), vm.as_slice())?.lvx();
    let dlvx = (lp - lm) / (2.0 * eta);
    let drift = &kinv * (&p.lxx - dlvx);
    Ok(Linearization::First { k, kinv, drift })
}

impl LinearizedFlow {
    pub fn new(model: &ConfigurationModel, traj: &Trajectory, options: FlowOptions) -> Result<Self> {
        if model.dim() != traj.dim() {
            return Err(Error::InvalidInput(format!("model dimension {} != trajectory dimension {}", model.dim(), traj.dim())));
        }
        let grid = traj.grid();
        let p0 = model.partials(grid.s(0), traj.x(0).as_slice(), traj.v(0).as_slice())?;
        let order = if p0.lvv.amax() <= FIRST_ORDER_TOL * (1.0 + p0.lxv.amax()) { Order::First } else { Order::Second };
        let exact = traj.exact().cloned();
        if order == Order::First && exact.is_none() {
            return Err(Error::MissingReference);
        }
        let lin_at = |s: f64, x: &DVector<f64>, v: &DVector<f64>| -> Result<Linearization> {
            match order {
                Order::Second => Ok(second_order(model, s, x, v)?.0),
                Order::First => first_order(model, exact.as_ref().unwrap(), s, x, v),
            }
        };
        let grid_lin = (0..traj.len()).map(|i| lin_at(grid.s(i), traj.x(i), traj.v(i))).collect::<Result<Vec<_>>>()?;

        let m = options.substeps.max(1);
        let build = |start: usize, end: usize| -> Result<Vec<Stage>> {
            let (s_start, s_end) = (grid.s(start), grid.s(end));
            let h = (s_end - s_start) / m as f64;
            let mut stages = Vec::with_capacity(4 * m);
            let mut x = traj.x(start).clone();
            let mut v = traj.v(start).clone();
            for k in 0..m {
                let s0 = s_start + k as f64 * h;
                if let Some(path) = &exact {
                    let at = |s: f64| -> Result<Stage> {
                        let (x, v) = path(s);
                        let lin = lin_at(s, &x, &v)?;
                        Ok(Stage { s, x, v, lin })
                    };
                    let mid = at(s0 + 0.5 * h)?;
                    stages.push(at(s0)?);
                    stages.push(mid.clone());
                    stages.push(mid);
                    stages.push(at(if k == m - 1 { s_end } else { s0 + h })?);
                } else {
                    let (l1, a1) = second_order(model, s0, &x, &v)?;
                    let (x2, v2) = (&x + &v * (0.5 * h), &v + &a1 * (0.5 * h));
                    let (l2, a2) = second_order(model, s0 + 0.5 * h, &x2, &v2)?;
                    let (x3, v3) = (&x + &v2 * (0.5 * h), &v + &a2 * (0.5 * h));
                    let (l3, a3) = second_order(model, s0 + 0.5 * h, &x3, &v3)?;
                    let (x4, v4) = (&x + &v3 * h, &v + &a3 * h);
                    let (l4, a4) = second_order(model, s0 + h, &x4, &v4)?;
                    let nx = &x + (&v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
                    let nv = &v + (&a1 + &a2 * 2.0 + &a3 * 2.0 + &a4) * (h / 6.0);
                    stages.push(Stage { s: s0, x: x.clone(), v: v.clone(), lin: l1 });
                    stages.push(Stage { s: s0 + 0.5 * h, x: x2, v: v2, lin: l2 });
                    stages.push(Stage { s: s0 + 0.5 * h, x: x3, v: v3, lin: l3 });
                    stages.push(Stage { s: s0 + h, x: x4, v: v4, lin: l4 });
                    x = nx;
                    v = nv;
                }
            }
            Ok(stages)
        };
        let intervals = traj.len() - 1;
        let forward = (0..intervals).map(|i| build(i, i + 1)).collect::<Result<Vec<_>>>()?;
        let backward = (0..intervals).map(|i| build(i + 1, i)).collect::<Result<Vec<_>>>()?;
        Ok(LinearizedFlow { model: model.clone(), traj: traj.clone(), options, order, grid_lin, forward, backward })
    }

    pub fn model(&self) -> &ConfigurationModel {
        &self.model
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn grid(&self) -> &Grid {
        self.traj.grid()
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn options(&self) -> FlowOptions {
        self.options
    }

    fn state_dim(&self) -> usize {
        match self.order {
            Order::Second => 2 * self.traj.dim(),
            Order::First => self.traj.dim(),
        }
    }

    /// Initial state with `delta = 0` and `delta' = slope` at grid point `i` (second order only).
    pub(crate) fn state_from_slope(&self, i: usize, slope: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.traj.dim();
        match &self.grid_lin[i] {
            Linearization::Second { lvv, .. } => {
                let mut y = DVector::zeros(2 * n);
                y.rows_mut(n, n).copy_from(&(lvv * slope));
                Ok(y)
            }
            Linearization::First { .. } => Err(Error::NotSecondOrder),
        }
    }

    fn source_partials(
        &self,
        source: Option<&PathFunctional>,
        s: f64,
        x: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.traj.dim();
        let (ax, av) = match source {
            Some(f) => f.smooth_partials(s, x.as_slice(), v.as_slice()),
            None => return Ok((DVector::zeros(n), DVector::zeros(n))),
        };
        if self.order == Order::First && av.amax() > 0.0 {
            return Err(Error::UnsupportedSource {
                label: source.unwrap().label().to_string(),
                reason: "velocity-dependent densities need a second-order model".into(),
            });
        }
        Ok((ax, av))
    }

    fn rhs(&self, lin: &Linearization, y: &DVector<f64>, ax: &DVector<f64>, av: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.traj.dim();
        match lin {
            Linearization::Second { lvv_inv, lvx, lxv, lxx, .. } => {
                let delta = y.rows(0, n);
                let pi = y.rows(n, n);
                let d = lvv_inv * (pi - lvx * delta - av);
                let dpi = lxv * &d + lxx * delta + ax;
                (d, dpi)
            }
            Linearization::First { kinv, drift, .. } => (drift * y + kinv * ax, DVector::zeros(0)),
        }
    }

    fn derivative(&self, lin: &Linearization, y: &DVector<f64>, ax: &DVector<f64>, av: &DVector<f64>) -> DVector<f64> {
        let (d, dpi) = self.rhs(lin, y, ax, av);
        match self.order {
            Order::Second => {
                let mut out = DVector::zeros(y.len());
                let n = d.len();
                out.rows_mut(0, n).copy_from(&d);
                out.rows_mut(n, n).copy_from(&dpi);
                out
            }
            Order::First => d,
        }
    }

    fn apply_impulse(&self, i: usize, y: &mut DVector<f64>, impulse: &DVector<f64>, sign: f64) {
        let n = self.traj.dim();
        match &self.grid_lin[i] {
            Linearization::Second { .. } => {
                let mut pi = y.rows_mut(n, n);
                pi += impulse * sign;
            }
            Linearization::First { kinv, .. } => *y += kinv * impulse * sign,
        }
    }

    /// Integrates a linearized field across the whole grid starting from `init`
    /// (`[delta, pi]` for second-order models, `delta` for first-order ones).
    ///
    /// Point sources add their impulse at their grid point; stored derivatives
    /// there are right limits.
    pub fn propagate(&self, init: &DVector<f64>, sweep: Sweep, source: Option<&PathFunctional>) -> Result<JacobiField> {
        if init.len() != self.state_dim() {
            return Err(Error::InvalidInput(format!("initial state must have length {}", self.state_dim())));
        }
        let n = self.traj.dim();
        let points = self.traj.len();
        let grid = *self.traj.grid();
        let impulse = match source {
            Some(f) => f.impulse(&self.traj)?,
            None => None,
        };
        let mut field = JacobiField::zeros(points, n);
        let record = |i: usize, y: &DVector<f64>, field: &mut JacobiField| -> Result<()> {
            let (ax, av) = self.source_partials(source, grid.s(i), self.traj.x(i), self.traj.v(i))?;
            let (d, _) = self.rhs(&self.grid_lin[i], y, &ax, &av);
            field.values[i] = y.rows(0, n).into_owned();
            field.derivs[i] = d;
            Ok(())
        };
        let mut y = init.clone();
        let m = self.options.substeps.max(1);
        let step = |y: &DVector<f64>, stages: &[Stage]| -> Result<DVector<f64>> {
            let mut y = y.clone();
            for k in 0..m {
                let st = &stages[4 * k..4 * k + 4];
                let h = st[3].s - st[0].s;
                let mut ks = Vec::with_capacity(4);
                let mut probe = y.clone();
                for (j, stage) in st.iter().enumerate() {
                    let (ax, av) = self.source_partials(source, stage.s, &stage.x, &stage.v)?;
                    let kj = self.derivative(&stage.lin, &probe, &ax, &av);
                    if j < 3 {
                        let c = if j == 2 { h } else { 0.5 * h };
                        probe = &y + &kj * c;
                    }
                    ks.push(kj);
                }
                y += (&ks[0] + &ks[1] * 2.0 + &ks[2] * 2.0 + &ks[3]) * (h / 6.0);
            }
            if y.iter().all(|v| v.is_finite()) {
                Ok(y)
            } else {
                Err(Error::BlowUp { s: stages[stages.len() - 1].s })
            }
        };
        match sweep {
            Sweep::Forward => {
                for i in 0..points {
                    if i > 0 {
                        y = step(&y, &self.forward[i - 1])?;
                    }
                    if let Some((j, imp)) = &impulse {
                        if *j == i {
                            self.apply_impulse(i, &mut y, imp, 1.0);
                        }
                    }
                    record(i, &y, &mut field)?;
                }
            }
            Sweep::Backward => {
                for i in (0..points).rev() {
                    if i < points - 1 {
                        y = step(&y, &self.backward[i])?;
                    }
                    record(i, &y, &mut field)?;
                    if let Some((j, imp)) = &impulse {
                        if *j == i {
                            self.apply_impulse(i, &mut y, imp, -1.0);
                        }
                    }
                }
            }
        }
        Ok(field)
    }

    /// `omega_L(J1, J2) = J1.Lvv J2' - J2.Lvv J1' + J1.(Lvx - Lxv) J2` at grid point `i`.
    pub fn omega(&self, i: usize, j1: (&DVector<f64>, &DVector<f64>), j2: (&DVector<f64>, &DVector<f64>)) -> f64 {
        let (lvv, k) = self.grid_lin[i].form();
        let mut w = j1.0.dot(&(&k * j2.0));
        if let Some(lvv) = lvv {
            w += j1.0.dot(&(lvv * j2.1)) - j2.0.dot(&(lvv * j1.1));
        }
        w
    }

    /// [`LinearizedFlow::omega`] of two sampled fields at grid point `i`.
    pub fn omega_fields(&self, i: usize, a: &JacobiField, b: &JacobiField) -> f64 {
        self.omega(i, (&a.values[i], &a.derivs[i]), (&b.values[i], &b.derivs[i]))
    }
}
