//! Euler-Lagrange initial value and two-point boundary value problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ConfigurationModel, PartialBundle};
use crate::trajectory::{Grid, Trajectory, VelocitySource};

const SINGULAR_DET: f64 = 1e-12;
const BLOW_UP: f64 = 1e12;

/// Integrator settings shared by [`solve_ivp_with`] and [`solve_bvp_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// RK4 steps per grid interval.
    pub substeps: usize,
    pub max_newton_steps: usize,
    pub max_halvings: usize,
    /// Endpoint tolerance, relative to `1 + |x_+|`.
    pub tolerance: f64,
    /// Normalized Jacobian determinant below which the endpoint counts as conjugate.
    pub conjugate_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { substeps: 1, max_newton_steps: 100, max_halvings: 30, tolerance: 1e-10, conjugate_threshold: 1e-10 }
    }
}

impl SolverOptions {
    /// Defaults for the two-point problem. Eight RK4 steps per interval keep
    /// the discrete endpoint map close enough to the exact one for the
    /// conjugate-point test to resolve determinants near `1e-10`.
    pub fn boundary() -> Self {
        SolverOptions { substeps: 8, ..Self::default() }
    }
}

/// Endpoint data for the two-point problem on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub grid: Grid,
    pub x_minus: DVector<f64>,
    pub x_plus: DVector<f64>,
}

impl BoundaryData {
    pub fn new(half_width: f64, points: usize, x_minus: &[f64], x_plus: &[f64]) -> Result<Self> {
        if x_minus.len() != x_plus.len() || x_minus.is_empty() {
            return Err(Error::InvalidInput("endpoint dimensions differ".into()));
        }
        Ok(BoundaryData {
            grid: Grid::new(half_width, points)?,
            x_minus: DVector::from_column_slice(x_minus),
            x_plus: DVector::from_column_slice(x_plus),
        })
    }
}

pub(crate) struct Dynamics {
    pub partials: PartialBundle,
    pub lvv_inv: DMatrix<f64>,
    pub accel: DVector<f64>,
}

/// `v' = Lvv^-1 (Lx - Lvx v - Lvs)` together with the partials used.
pub(crate) fn dynamics(model: &ConfigurationModel, s: f64, x: &DVector<f64>, v: &DVector<f64>) -> Result<Dynamics> {
    let p = model.partials(s, x.as_slice(), v.as_slice())?;
    let det = p.lvv.determinant();
    if !(det.abs() >= SINGULAR_DET) {
        return Err(Error::SingularLvv { s, det });
    }
    let lvv_inv = p.lvv.clone().try_inverse().ok_or(Error::SingularLvv { s, det })?;
    let lvs = model.lvs(s, x.as_slice(), v.as_slice())?;
    let accel = &lvv_inv * (&p.lx - p.lvx() * v - lvs);
    Ok(Dynamics { partials: p, lvv_inv, accel })
}

fn check_state(y: &DVector<f64>, s: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) && y.amax() < BLOW_UP {
        Ok(())
    } else {
        Err(Error::BlowUp { s })
    }
}

/// Right-hand side of the state `[x, v, (delta_k, pi_k)...]` carrying `k`
/// linearized fields in momentum form.
fn augmented_rhs(model: &ConfigurationModel, s: f64, y: &DVector<f64>, n: usize, fields: usize) -> Result<DVector<f64>> {
    let x = y.rows(0, n).into_owned();
    let v = y.rows(n, n).into_owned();
    let d = dynamics(model, s, &x, &v)?;
    let mut out = DVector::zeros(y.len());
    out.rows_mut(0, n).copy_from(&v);
    out.rows_mut(n, n).copy_from(&d.accel);
    let lvx = d.partials.lvx();
    for k in 0..fields {
        let off = 2 * n + 2 * n * k;
        let delta = y.rows(off, n).into_owned();
        let pi = y.rows(off + n, n).into_owned();
        let ddelta = &d.lvv_inv * (pi - &lvx * &delta);
        let dpi = &d.partials.lxv * &ddelta + &d.partials.lxx * &delta;
        out.rows_mut(off, n).copy_from(&ddelta);
        out.rows_mut(off + n, n).copy_from(&dpi);
    }
    Ok(out)
}

fn rk4_step(model: &ConfigurationModel, s: f64, y: &DVector<f64>, h: f64, n: usize, fields: usize) -> Result<DVector<f64>> {
    let k1 = augmented_rhs(model, s, y, n, fields)?;
    let k2 = augmented_rhs(model, s + 0.5 * h, &(y + &k1 * (0.5 * h)), n, fields)?;
    let k3 = augmented_rhs(model, s + 0.5 * h, &(y + &k2 * (0.5 * h)), n, fields)?;
    let k4 = augmented_rhs(model, s + h, &(y + &k3 * h), n, fields)?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Marches the augmented state across the grid, calling `visit` at every grid point.
fn march<F: FnMut(usize, &DVector<f64>)>(
    model: &ConfigurationModel,
    grid: &Grid,
    y0: DVector<f64>,
    fields: usize,
    substeps: usize,
    mut visit: F,
) -> Result<DVector<f64>> {
    let n = model.dim();
    let mut y = y0;
    check_state(&y, grid.s(0))?;
    visit(0, &y);
    let m = substeps.max(1);
    for i in 0..grid.len() - 1 {
        let (s0, s1) = (grid.s(i), grid.s(i + 1));
        let h = (s1 - s0) / m as f64;
        for k in 0..m {
            let s = s0 + k as f64 * h;
            y = rk4_step(model, s, &y, h, n, fields)?;
            check_state(&y, s + h)?;
        }
        visit(i + 1, &y);
    }
    Ok(y)
}

/// Integrates from `(x0, v0)` at `s = -T` with RK4, one step per interval.
pub fn solve_ivp(model: &ConfigurationModel, x0: &[f64], v0: &[f64], half_width: f64, points: usize) -> Result<Trajectory> {
    solve_ivp_with(model, x0, v0, &Grid::new(half_width, points)?, &SolverOptions::default())
}

pub fn solve_ivp_with(
    model: &ConfigurationModel,
    x0: &[f64],
    v0: &[f64],
    grid: &Grid,
    options: &SolverOptions,
) -> Result<Trajectory> {
    let n = model.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::InvalidInput(format!("initial data must have dimension {n}")));
    }
    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from_slice(x0);
    y0.rows_mut(n, n).copy_from_slice(v0);
    let mut xs = Vec::with_capacity(grid.len());
    let mut vs = Vec::with_capacity(grid.len());
    march(model, grid, y0, 0, options.substeps, |_, y| {
        xs.push(y.rows(0, n).into_owned());
        vs.push(y.rows(n, n).into_owned());
    })?;
    Trajectory::new(*grid, xs, vs, VelocitySource::Integrator)
}

/// Endpoint of a shot and the Jacobian `dx(T)/dv(-T)` with its conditioning.
struct Shot {
    end: DVector<f64>,
    jacobian: DMatrix<f64>,
    normalized_det: f64,
}

fn shoot(model: &ConfigurationModel, bc: &BoundaryData, v0: &DVector<f64>, substeps: usize) -> Result<Shot> {
    let n = model.dim();
    let grid = &bc.grid;
    let lvv0 = model.partials(grid.s(0), bc.x_minus.as_slice(), v0.as_slice())?.lvv;
    let mut y0 = DVector::zeros(2 * n + 2 * n * n);
    y0.rows_mut(0, n).copy_from(&bc.x_minus);
    y0.rows_mut(n, n).copy_from(v0);
    for k in 0..n {
        // delta(-T) = 0, delta'(-T) = e_k, so pi = Lvv e_k
        y0.rows_mut(2 * n + 2 * n * k + n, n).copy_from(&lvv0.column(k));
    }
    let mut scale = vec![0.0f64; n];
    let y = march(model, grid, y0, n, substeps, |_, y| {
        for (k, sc) in scale.iter_mut().enumerate() {
            *sc = sc.max(y.rows(2 * n + 2 * n * k, n).norm());
        }
    })?;
    let mut jacobian = DMatrix::zeros(n, n);
    for k in 0..n {
        jacobian.column_mut(k).copy_from(&y.rows(2 * n + 2 * n * k, n));
    }
    let norm: f64 = scale.iter().product();
    Ok(Shot { end: y.rows(0, n).into_owned(), normalized_det: jacobian.determinant() / norm, jacobian })
}

/// Shooting with damped Newton on the initial velocity.
pub fn solve_bvp(model: &ConfigurationModel, bc: &BoundaryData) -> Result<Trajectory> {
    solve_bvp_with(model, bc, &SolverOptions::boundary())
}

pub fn solve_bvp_with(model: &ConfigurationModel, bc: &BoundaryData, options: &SolverOptions) -> Result<Trajectory> {
    let n = model.dim();
    if bc.x_minus.len() != n {
        return Err(Error::InvalidInput(format!("endpoints must have dimension {n}")));
    }
    let tol = options.tolerance * (1.0 + bc.x_plus.norm());
    let mut v0 = (&bc.x_plus - &bc.x_minus) / (2.0 * bc.grid.half_width());
    let mut shot = shoot(model, bc, &v0, options.substeps)?;
    for _ in 0..options.max_newton_steps {
        if shot.normalized_det.abs() < options.conjugate_threshold {
            return Err(Error::ConjugatePoint { det: shot.normalized_det });
        }
        let mismatch = &shot.end - &bc.x_plus;
        let size = mismatch.norm();
        if size <= tol {
            return solve_ivp_with(model, bc.x_minus.as_slice(), v0.as_slice(), &bc.grid, options);
        }
        let dv = shot
            .jacobian
            .clone()
            .lu()
            .solve(&mismatch)
            .ok_or(Error::ConjugatePoint { det: shot.normalized_det })?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let trial = &v0 - &dv * lambda;
            if let Ok(s) = shoot(model, bc, &trial, options.substeps) {
                if (&s.end - &bc.x_plus).norm() < size {
                    accepted = Some((trial, s));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((v, s)) => {
                v0 = v;
                shot = s;
            }
            None => return Err(Error::NoConvergence { iterations: options.max_newton_steps, mismatch: size }),
        }
    }
    Err(Error::NoConvergence { iterations: options.max_newton_steps, mismatch: (&shot.end - &bc.x_plus).norm() })
}
