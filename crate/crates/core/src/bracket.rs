//! The covariant bracket of two path functionals and action-based validators.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::{FlowOptions, JacobiField, LinearizedFlow};
use crate::functional::PathFunctional;
use crate::green::{commutator_kernel, commutator_response, solve_basis, CommutatorKernel, JacobiBasis};
use crate::jacobi::require_solution;
use crate::model::ConfigurationModel;
use crate::solver::{solve_bvp_with, BoundaryData, SolverOptions};
use crate::trajectory::Trajectory;

/// Everything needed to evaluate brackets along one reference solution.
#[derive(Debug)]
pub struct BracketContext {
    flow: LinearizedFlow,
    basis: std::result::Result<JacobiBasis, Error>,
    kernel: OnceLock<CommutatorKernel>,
    residual: f64,
}

impl BracketContext {
    pub fn new(model: &ConfigurationModel, traj: &Trajectory) -> Result<Self> {
        Self::with_options(model, traj, FlowOptions::default())
    }

    /// Validates `traj` as a solution and prepares the linearized flow. The
    /// two-point basis is optional: conjugate endpoints only disable the
    /// basis route.
    pub fn with_options(model: &ConfigurationModel, traj: &Trajectory, options: FlowOptions) -> Result<Self> {
        let residual = require_solution(model, traj)?;
        let flow = LinearizedFlow::new(model, traj, options)?;
        let basis = solve_basis(&flow);
        Ok(BracketContext { flow, basis, kernel: OnceLock::new(), residual })
    }

    pub fn flow(&self) -> &LinearizedFlow {
        &self.flow
    }

    pub fn model(&self) -> &ConfigurationModel {
        self.flow.model()
    }

    pub fn trajectory(&self) -> &Trajectory {
        self.flow.trajectory()
    }

    /// Interior Euler-Lagrange residual of the reference path.
    pub fn solution_residual(&self) -> f64 {
        self.residual
    }

    pub fn basis(&self) -> Result<&JacobiBasis> {
        self.basis.as_ref().map_err(|e| e.clone())
    }

    pub fn kernel(&self) -> Result<&CommutatorKernel> {
        let basis = self.basis()?;
        Ok(self.kernel.get_or_init(|| commutator_kernel(basis)))
    }

    /// `G(eps_A)`, retarded minus advanced response to `A`.
    pub fn commutator_response(&self, a: &PathFunctional) -> Result<JacobiField> {
        commutator_response(&self.flow, a)
    }

    /// Weak pairing of `B` with a sampled field.
    pub fn pair(&self, b: &PathFunctional, field: &JacobiField) -> f64 {
        b.pair(self.trajectory(), &field.values, &field.derivs)
    }
}

/// `{A, B} = int G(eps_A) . eps_B ds`.
pub fn bracket_integral(ctx: &BracketContext, a: &PathFunctional, b: &PathFunctional) -> Result<f64> {
    b.check_support(ctx.trajectory().grid())?;
    let delta = ctx.commutator_response(a)?;
    Ok(ctx.pair(b, &delta))
}

/// `{A, B} = omega_L(G(eps_A), G(eps_B))` on the slice at grid point `i`.
pub fn bracket_omega(ctx: &BracketContext, a: &PathFunctional, b: &PathFunctional, i: usize) -> Result<f64> {
    if i >= ctx.trajectory().len() {
        return Err(Error::GridMismatch { expected: ctx.trajectory().len(), found: i });
    }
    let da = ctx.commutator_response(a)?;
    let db = ctx.commutator_response(b)?;
    Ok(ctx.flow().omega_fields(i, &da, &db))
}

fn bivector_from_pairings(basis: &JacobiBasis, ctx: &BracketContext, a: &PathFunctional, b: &PathFunctional) -> f64 {
    basis
        .pairings
        .iter()
        .enumerate()
        .map(|(rho, w)| {
            let (p, q) = (&basis.plus[rho], &basis.partners[rho]);
            (ctx.pair(b, q) * ctx.pair(a, p) - ctx.pair(b, p) * ctx.pair(a, q)) / w
        })
        .sum()
}

/// `{A, B}` from the two-point basis:
/// `sum_rho (<eps_B, Q_rho><P_rho, eps_A> - <eps_B, P_rho><Q_rho, eps_A>) / W_rho`.
pub fn bracket_bivector(ctx: &BracketContext, a: &PathFunctional, b: &PathFunctional) -> Result<f64> {
    let basis = ctx.basis()?;
    let grid = ctx.trajectory().grid();
    a.check_support(grid)?;
    b.check_support(grid)?;
    Ok(bivector_from_pairings(basis, ctx, a, b))
}

/// All routes for one pair, sharing the responses.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketRoutes {
    pub integral: f64,
    /// `{B, A}` by the integral route, for antisymmetry checks.
    pub integral_reversed: f64,
    /// Two-form at the middle grid point.
    pub omega: f64,
    /// Two-form at every grid point.
    pub omega_profile: Vec<f64>,
    pub bivector: Option<f64>,
}

impl BracketRoutes {
    /// `(max - min) / |median|` of the two-form over the grid.
    pub fn omega_spread(&self) -> f64 {
        spread(&self.omega_profile)
    }

    /// Largest pairwise relative deviation between the available routes.
    pub fn route_deviation(&self) -> f64 {
        let mut vals = vec![self.integral, self.omega];
        vals.extend(self.bivector);
        let mut worst = 0.0f64;
        for i in 0..vals.len() {
            for j in 0..i {
                worst = worst.max(relative_deviation(vals[i], vals[j]));
            }
        }
        worst
    }
}

pub fn relative_deviation(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `(max - min) / |median|`.
pub fn spread(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let range = sorted[sorted.len() - 1] - sorted[0];
    if range == 0.0 {
        0.0
    } else {
        range / median.abs()
    }
}

pub fn bracket_routes(ctx: &BracketContext, a: &PathFunctional, b: &PathFunctional) -> Result<BracketRoutes> {
    let da = ctx.commutator_response(a)?;
    let db = ctx.commutator_response(b)?;
    let flow = ctx.flow();
    let omega_profile: Vec<f64> = (0..ctx.trajectory().len()).map(|i| flow.omega_fields(i, &da, &db)).collect();
    Ok(BracketRoutes {
        integral: ctx.pair(b, &da),
        integral_reversed: ctx.pair(a, &db),
        omega: omega_profile[ctx.trajectory().grid().mid()],
        omega_profile,
        bivector: ctx.basis().ok().map(|basis| bivector_from_pairings(basis, ctx, a, b)),
    })
}

/// Composite Simpson integral of `L` along a trajectory.
pub fn action(model: &ConfigurationModel, traj: &Trajectory) -> f64 {
    let g = traj.grid();
    g.simpson_weights()
        .iter()
        .enumerate()
        .map(|(i, w)| w * model.value(g.s(i), traj.x(i).as_slice(), traj.v(i).as_slice()))
        .sum()
}

/// Action of the solution through the two endpoints.
pub fn hamilton_principal(model: &ConfigurationModel, bc: &BoundaryData) -> Result<f64> {
    Ok(action(model, &solve_bvp_with(model, bc, &chart_solver())?))
}

fn chart_solver() -> SolverOptions {
    SolverOptions { tolerance: 1e-13, ..SolverOptions::boundary() }
}

/// `d2S / dx_+^rho dx_-^sigma` by central differences of the principal function.
pub fn principal_mixed_hessian(model: &ConfigurationModel, bc: &BoundaryData, step: f64) -> Result<DMatrix<f64>> {
    let n = bc.x_minus.len();
    let mut out = DMatrix::zeros(n, n);
    for r in 0..n {
        for s in 0..n {
            let mut acc = 0.0;
            for (dp, dm, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                let mut shifted = bc.clone();
                shifted.x_plus[r] += dp * step;
                shifted.x_minus[s] += dm * step;
                acc += sign * hamilton_principal(model, &shifted)?;
            }
            out[(r, s)] = acc / (4.0 * step * step);
        }
    }
    Ok(out)
}

/// Poisson bivector on the endpoint chart `(x_-, x_+)`:
/// `{x_-^i, x_+^j} = -(W^-1)_{ij}` where `W` is the basis pairing matrix.
pub fn chart_bivector(basis: &JacobiBasis) -> DMatrix<f64> {
    let n = basis.pairing.nrows();
    let winv = basis.pairing.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let mut p = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            p[(i, n + j)] = -winv[(i, j)];
            p[(n + j, i)] = winv[(i, j)];
        }
    }
    p
}

/// Solutions parametrized by their endpoints near a reference solution.
struct SolutionChart<'a> {
    model: &'a ConfigurationModel,
    center: DVector<f64>,
    step: f64,
    template: BoundaryData,
    cache: BTreeMap<Vec<i32>, Vec<f64>>,
    functionals: Vec<&'a PathFunctional>,
}

impl<'a> SolutionChart<'a> {
    fn values(&mut self, offset: &[i32]) -> Result<Vec<f64>> {
        if let Some(v) = self.cache.get(offset) {
            return Ok(v.clone());
        }
        let n = self.center.len() / 2;
        let mut bc = self.template.clone();
        for k in 0..2 * n {
            let z = self.center[k] + offset[k] as f64 * self.step;
            if k < n {
                bc.x_minus[k] = z;
            } else {
                bc.x_plus[k - n] = z;
            }
        }
        let traj = solve_bvp_with(self.model, &bc, &chart_solver())?;
        let vals: Vec<f64> = self.functionals.iter().map(|f| f.evaluate(&traj)).collect();
        self.cache.insert(offset.to_vec(), vals.clone());
        Ok(vals)
    }

    fn gradient(&mut self, offset: &[i32], which: usize) -> Result<DVector<f64>> {
        let m = offset.len();
        let mut g = DVector::zeros(m);
        for k in 0..m {
            let mut up = offset.to_vec();
            up[k] += 1;
            let mut down = offset.to_vec();
            down[k] -= 1;
            g[k] = (self.values(&up)?[which] - self.values(&down)?[which]) / (2.0 * self.step);
        }
        Ok(g)
    }
}

/// `|{A,{B,C}} + {B,{C,A}} + {C,{A,B}}|` at the reference solution, with the
/// brackets evaluated on the endpoint chart by nested central differences.
pub fn jacobi_identity_residual(
    ctx: &BracketContext,
    a: &PathFunctional,
    b: &PathFunctional,
    c: &PathFunctional,
) -> Result<f64> {
    let basis = ctx.basis()?;
    let poisson = chart_bivector(basis);
    let traj = ctx.trajectory();
    let n = traj.dim();
    let mut center = DVector::zeros(2 * n);
    center.rows_mut(0, n).copy_from(traj.x(0));
    center.rows_mut(n, n).copy_from(traj.x(traj.len() - 1));
    let template = BoundaryData { grid: *traj.grid(), x_minus: traj.x(0).clone(), x_plus: traj.x(traj.len() - 1).clone() };
    let mut chart = SolutionChart {
        model: ctx.model(),
        center,
        step: 1e-4,
        template,
        cache: BTreeMap::new(),
        functionals: vec![a, b, c],
    };
    let origin = vec![0i32; 2 * n];
    let bracket_at = |chart: &mut SolutionChart, offset: &[i32], f: usize, g: usize| -> Result<f64> {
        let gf = chart.gradient(offset, f)?;
        let gg = chart.gradient(offset, g)?;
        Ok(gf.dot(&(&poisson * gg)))
    };
    let mut total = 0.0;
    for (f, g, h) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let mut grad_inner = DVector::zeros(2 * n);
        for k in 0..2 * n {
            let mut up = origin.clone();
            up[k] = 1;
            let mut down = origin.clone();
            down[k] = -1;
            grad_inner[k] = (bracket_at(&mut chart, &up, g, h)? - bracket_at(&mut chart, &down, g, h)?) / (2.0 * chart.step);
        }
        let grad_outer = chart.gradient(&origin, f)?;
        total += grad_outer.dot(&(&poisson * grad_inner));
    }
    Ok(total.abs())
}
