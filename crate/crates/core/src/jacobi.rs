//! The Jacobi operator `C J'' + D J' + E J` along a solution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functional::on_shell_residual;
use crate::model::ConfigurationModel;
use crate::trajectory::{Grid, Trajectory};

/// Largest [`on_shell_residual`] accepted as a solution.
pub const SOLUTION_THRESHOLD: f64 = 1e-4;

/// Sampled coefficients of the linearized Euler-Lagrange operator:
/// `C = -Lvv`, `D = -dLvv/ds - Lvx + Lxv`, `E = -dLvx/ds + Lxx`.
#[derive(Debug, Clone)]
pub struct JacobiCoefficients {
    pub grid: Grid,
    pub c: Vec<DMatrix<f64>>,
    pub d: Vec<DMatrix<f64>>,
    pub e: Vec<DMatrix<f64>>,
}

fn difference_matrices(values: &[DMatrix<f64>], h: f64) -> Vec<DMatrix<f64>> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (&values[1] * 4.0 - &values[0] * 3.0 - &values[2]) / (2.0 * h)
            } else if i == n - 1 {
                (&values[n - 1] * 3.0 - &values[n - 2] * 4.0 + &values[n - 3]) / (2.0 * h)
            } else {
                (&values[i + 1] - &values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Fails with [`Error::NotASolution`] if `traj` does not solve the equations of motion.
pub fn require_solution(model: &ConfigurationModel, traj: &Trajectory) -> Result<f64> {
    let residual = on_shell_residual(model, traj)?;
    if residual > SOLUTION_THRESHOLD {
        return Err(Error::NotASolution { residual, threshold: SOLUTION_THRESHOLD });
    }
    Ok(residual)
}

pub fn coefficients(model: &ConfigurationModel, traj: &Trajectory) -> Result<JacobiCoefficients> {
    require_solution(model, traj)?;
    let g = *traj.grid();
    let mut lvv = Vec::with_capacity(traj.len());
    let mut lvx = Vec::with_capacity(traj.len());
    let mut lxv = Vec::with_capacity(traj.len());
    let mut lxx = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let p = model.partials(g.s(i), traj.x(i).as_slice(), traj.v(i).as_slice())?;
        lvx.push(p.lvx());
        lvv.push(p.lvv);
        lxv.push(p.lxv);
        lxx.push(p.lxx);
    }
    let dlvv = difference_matrices(&lvv, g.step());
    let dlvx = difference_matrices(&lvx, g.step());
    let c = lvv.iter().map(|m| -m).collect();
    let d = (0..traj.len()).map(|i| -&dlvv[i] - &lvx[i] + &lxv[i]).collect();
    let e = (0..traj.len()).map(|i| -&dlvx[i] + &lxx[i]).collect();
    Ok(JacobiCoefficients { grid: g, c, d, e })
}

/// `C J'' + D J' + E J` with second-order differences; the two boundary rows are zero.
pub fn apply_operator(coeffs: &JacobiCoefficients, field: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let n = coeffs.c.len();
    if field.len() != n {
        return Err(Error::GridMismatch { expected: n, found: field.len() });
    }
    let dim = coeffs.c[0].nrows();
    if let Some(bad) = field.iter().find(|j| j.len() != dim) {
        return Err(Error::GridMismatch { expected: dim, found: bad.len() });
    }
    let h = coeffs.grid.step();
    let mut out = vec![DVector::zeros(dim); n];
    for i in 1..n - 1 {
        let d1 = (&field[i + 1] - &field[i - 1]) / (2.0 * h);
        let d2 = (&field[i + 1] - &field[i] * 2.0 + &field[i - 1]) / (h * h);
        out[i] = &coeffs.c[i] * d2 + &coeffs.d[i] * d1 + &coeffs.e[i] * &field[i];
    }
    Ok(out)
}

/// The two sides compared by [`covariant_jacobi_check`] at interior points.
#[derive(Debug, Clone)]
pub struct CovariantComparison {
    /// `-g^-1 (C J'' + D J' + E J) / m`.
    pub operator_side: Vec<DVector<f64>>,
    /// `nabla^2 J + R(J, x') x'`.
    pub covariant_side: Vec<DVector<f64>>,
    pub max_deviation: f64,
}

/// Compares the Jacobi operator of a geodesic Lagrangian `m g(v, v)/2` with
/// the covariant form of the geodesic deviation equation.
pub fn covariant_comparison(model: &ConfigurationModel, traj: &Trajectory, field: &[DVector<f64>]) -> Result<CovariantComparison> {
    let metric = model.metric().ok_or(Error::MissingMetric)?;
    let coeffs = coefficients(model, traj)?;
    let lj = apply_operator(&coeffs, field)?;
    let n = traj.len();
    let dim = traj.dim();
    let h = traj.grid().step();
    let mass = model.mass();
    let mut operator_side = vec![DVector::zeros(dim); n];
    let mut covariant_side = vec![DVector::zeros(dim); n];
    let mut max_deviation = 0.0f64;
    for i in 1..n - 1 {
        let x = traj.x(i).as_slice();
        let u = traj.v(i).as_slice();
        let ginv = metric.tensor(x).try_inverse().ok_or(Error::NonFiniteDerivative { s: traj.grid().s(i) })?;
        operator_side[i] = -(ginv * &lj[i]) / mass;

        let j = field[i].as_slice();
        let dj: Vec<f64> = (0..dim).map(|k| (field[i + 1][k] - field[i - 1][k]) / (2.0 * h)).collect();
        let ddj: Vec<f64> = (0..dim).map(|k| (field[i + 1][k] - 2.0 * field[i][k] + field[i - 1][k]) / (h * h)).collect();
        let gamma = metric.christoffel(x);
        let dgamma = metric.christoffel_derivatives(x);
        let accel: Vec<f64> = gamma.contract(u, u).iter().map(|a| -a).collect();
        let curv = metric.riemann(x).apply(j, u);
        let mut out = DVector::zeros(dim);
        for mu in 0..dim {
            let mut acc = ddj[mu] + curv[mu];
            for nu in 0..dim {
                for rho in 0..dim {
                    let g = gamma.get(mu, nu, rho);
                    acc += 2.0 * g * u[nu] * dj[rho] + g * accel[nu] * j[rho];
                    for sigma in 0..dim {
                        acc += dgamma[sigma].get(mu, nu, rho) * u[sigma] * u[nu] * j[rho];
                    }
                }
            }
            // Gamma^mu_{nu lam} u^nu Gamma^lam_{sigma rho} u^sigma J^rho
            for nu in 0..dim {
                for lam in 0..dim {
                    for sigma in 0..dim {
                        for rho in 0..dim {
                            acc += gamma.get(mu, nu, lam) * u[nu] * gamma.get(lam, sigma, rho) * u[sigma] * j[rho];
                        }
                    }
                }
            }
            out[mu] = acc;
        }
        max_deviation = max_deviation.max((&out - &operator_side[i]).amax());
        covariant_side[i] = out;
    }
    Ok(CovariantComparison { operator_side, covariant_side, max_deviation })
}

/// Largest interior deviation between the operator and covariant forms.
pub fn covariant_jacobi_check(model: &ConfigurationModel, traj: &Trajectory, field: &[DVector<f64>]) -> Result<f64> {
    Ok(covariant_comparison(model, traj, field)?.max_deviation)
}
