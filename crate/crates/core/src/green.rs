//! Retarded and advanced responses, two-point bases and the commutator kernel.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flow::{JacobiField, LinearizedFlow, Order, Sweep};
use crate::functional::PathFunctional;
use crate::model::ConfigurationModel;
use crate::trajectory::{central_difference, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Vanishes before the support of the source.
    Retarded,
    /// Vanishes after the support of the source.
    Advanced,
}

/// Threshold on the normalized determinant of the endpoint map.
pub const CONJUGATE_THRESHOLD: f64 = 1e-10;
/// Smallest accepted diagonal pairing.
pub const DEGENERATE_PAIRING: f64 = 1e-10;

/// `omega_L(J1, J2)` at grid point `i`, with the field velocities taken by
/// central differences.
pub fn two_form(model: &ConfigurationModel, traj: &Trajectory, i: usize, j1: &[DVector<f64>], j2: &[DVector<f64>]) -> Result<f64> {
    if j1.len() != traj.len() || j2.len() != traj.len() {
        return Err(Error::GridMismatch { expected: traj.len(), found: j1.len().min(j2.len()) });
    }
    let h = traj.grid().step();
    let d1 = central_difference(j1, h);
    let d2 = central_difference(j2, h);
    let p = model.partials(traj.grid().s(i), traj.x(i).as_slice(), traj.v(i).as_slice())?;
    let k = p.lvx() - &p.lxv;
    Ok(j1[i].dot(&(&p.lvv * &d2[i])) - j2[i].dot(&(&p.lvv * &d1[i])) + j1[i].dot(&(k * &j2[i])))
}

fn check_interior(flow: &LinearizedFlow, source: &PathFunctional) -> Result<()> {
    let grid = flow.grid();
    source.check_support(grid)?;
    let inside = match source.point_index() {
        Some(i) => i >= 1 && i + 1 < grid.len(),
        None => {
            let (a, b) = source.support();
            a > grid.s(0) && b < grid.s(grid.len() - 1)
        }
    };
    if inside {
        Ok(())
    } else {
        Err(Error::SupportTouchesBoundary { label: source.label().to_string() })
    }
}

/// Response of the reference solution to `S -> S + lambda A`, to first order in `lambda`.
pub fn response(flow: &LinearizedFlow, source: &PathFunctional, direction: Direction) -> Result<JacobiField> {
    check_interior(flow, source)?;
    let zero = DVector::zeros(match flow.order() {
        Order::Second => 2 * flow.trajectory().dim(),
        Order::First => flow.trajectory().dim(),
    });
    match direction {
        Direction::Retarded => flow.propagate(&zero, Sweep::Forward, Some(source)),
        Direction::Advanced => flow.propagate(&zero, Sweep::Backward, Some(source)),
    }
}

/// Retarded minus advanced response, the homogeneous field generated by `A`.
pub fn commutator_response(flow: &LinearizedFlow, source: &PathFunctional) -> Result<JacobiField> {
    let ret = response(flow, source, Direction::Retarded)?;
    let adv = response(flow, source, Direction::Advanced)?;
    Ok(ret.difference(&adv))
}

/// Jacobi fields vanishing at one end, paired under the two-form.
///
/// `plus[rho]` vanishes at `-T` with `plus[rho](T) = e_rho`; `minus[rho]`
/// vanishes at `T` with `minus[rho](-T) = e_rho`. `partners` are combinations
/// of `minus` satisfying `omega(plus[rho], partners[sigma]) = delta * pairings[rho]`.
#[derive(Debug, Clone)]
pub struct JacobiBasis {
    pub plus: Vec<JacobiField>,
    pub minus: Vec<JacobiField>,
    pub partners: Vec<JacobiField>,
    /// `pairing[(rho, sigma)] = omega(plus[rho], minus[sigma])`.
    pub pairing: DMatrix<f64>,
    /// Diagonal pairings `W_rho`.
    pub pairings: Vec<f64>,
    /// Largest relative drift of the pairing matrix across grid points.
    pub pairing_drift: f64,
}

fn combine_columns(fields: &[JacobiField], coeffs: &DMatrix<f64>) -> Vec<JacobiField> {
    (0..coeffs.ncols())
        .map(|r| {
            let terms: Vec<(f64, &JacobiField)> = fields.iter().enumerate().map(|(s, f)| (coeffs[(s, r)], f)).collect();
            JacobiField::combination(&terms)
        })
        .collect()
}

fn endpoint_matrix(fields: &[JacobiField], i: usize) -> (DMatrix<f64>, f64) {
    let n = fields.len();
    let mut m = DMatrix::zeros(n, n);
    let mut scale = 1.0;
    for (k, f) in fields.iter().enumerate() {
        m.column_mut(k).copy_from(&f.values[i]);
        scale *= f.max_abs().max(f64::MIN_POSITIVE);
    }
    let det = m.determinant();
    (m, det / scale)
}

pub fn solve_basis(flow: &LinearizedFlow) -> Result<JacobiBasis> {
    if flow.order() != Order::Second {
        return Err(Error::NotSecondOrder);
    }
    let n = flow.trajectory().dim();
    let last = flow.grid().len() - 1;
    let mut from_left = Vec::with_capacity(n);
    let mut from_right = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        from_left.push(flow.propagate(&flow.state_from_slope(0, &e)?, Sweep::Forward, None)?);
        from_right.push(flow.propagate(&flow.state_from_slope(last, &e)?, Sweep::Backward, None)?);
    }
    let (yt, det_plus) = endpoint_matrix(&from_left, last);
    let (zt, det_minus) = endpoint_matrix(&from_right, 0);
    for det in [det_plus, det_minus] {
        if !(det.abs() >= CONJUGATE_THRESHOLD) {
            return Err(Error::ConjugateEndpoints { det });
        }
    }
    let yinv = yt.try_inverse().ok_or(Error::ConjugateEndpoints { det: det_plus })?;
    let zinv = zt.try_inverse().ok_or(Error::ConjugateEndpoints { det: det_minus })?;
    let plus = combine_columns(&from_left, &yinv);
    let minus = combine_columns(&from_right, &zinv);

    let pairing_at = |i: usize| DMatrix::from_fn(n, n, |r, s| flow.omega_fields(i, &plus[r], &minus[s]));
    let pairing = pairing_at(flow.grid().mid());
    let scale = pairing.amax();
    let mut pairing_drift = 0.0f64;
    for i in 0..=last {
        pairing_drift = pairing_drift.max((pairing_at(i) - &pairing).amax() / scale);
    }
    let pairings: Vec<f64> = (0..n).map(|r| pairing[(r, r)]).collect();
    for (rho, w) in pairings.iter().enumerate() {
        if !(w.abs() >= DEGENERATE_PAIRING) {
            return Err(Error::DegenerateWronskian { rho, value: *w });
        }
    }
    let pinv = pairing.clone().try_inverse().ok_or(Error::DegenerateWronskian { rho: 0, value: 0.0 })?;
    let partners = combine_columns(&minus, &(pinv * DMatrix::from_diagonal(&DVector::from_vec(pairings.clone()))));
    Ok(JacobiBasis { plus, minus, partners, pairing, pairings, pairing_drift })
}

/// Dense commutator kernel `G(s_i, s_j)^{mu nu}` and its derivative in the second time.
///
/// `G = sum_rho (partner_rho(s) plus_rho(s')^T - plus_rho(s) partner_rho(s')^T) / W_rho`,
/// the retarded minus advanced Green function of the Jacobi operator.
#[derive(Debug, Clone)]
pub struct CommutatorKernel {
    points: usize,
    dim: usize,
    values: DMatrix<f64>,
    second_derivative: DMatrix<f64>,
}

impl CommutatorKernel {
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `G^{mu nu}(s_i, s_j)`.
    pub fn get(&self, i: usize, mu: usize, j: usize, nu: usize) -> f64 {
        self.values[(i * self.dim + mu, j * self.dim + nu)]
    }

    /// `d/ds' G^{mu nu}(s_i, s')` at `s' = s_j`.
    pub fn get_d2(&self, i: usize, mu: usize, j: usize, nu: usize) -> f64 {
        self.second_derivative[(i * self.dim + mu, j * self.dim + nu)]
    }

    /// `int G(s_i, s') eps(s') ds'` for the density of `source`, in weak form.
    pub fn apply(&self, traj: &Trajectory, source: &PathFunctional) -> Vec<DVector<f64>> {
        let g = traj.grid();
        let mut out = vec![DVector::zeros(self.dim); self.points];
        for j in 0..self.points {
            let (ax, av) = source.grid_partials(traj, j);
            if ax.amax() == 0.0 && av.amax() == 0.0 {
                continue;
            }
            let w = g.trapezoid_weight(j);
            for (i, o) in out.iter_mut().enumerate() {
                for mu in 0..self.dim {
                    for nu in 0..self.dim {
                        o[mu] += w * (self.get(i, mu, j, nu) * ax[nu] + self.get_d2(i, mu, j, nu) * av[nu]);
                    }
                }
            }
        }
        out
    }

    /// Largest `|G(s, s') + G(s', s)^T|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        (&self.values + self.values.transpose()).amax()
    }
}

pub fn commutator_kernel(basis: &JacobiBasis) -> CommutatorKernel {
    let points = basis.plus[0].len();
    let dim = basis.plus[0].dim();
    let size = points * dim;
    let mut values = DMatrix::zeros(size, size);
    let mut second_derivative = DMatrix::zeros(size, size);
    for (rho, w) in basis.pairings.iter().enumerate() {
        let (p, q) = (&basis.plus[rho], &basis.partners[rho]);
        let stack = |f: &[DVector<f64>]| DVector::from_iterator(size, f.iter().flat_map(|v| v.iter().copied()));
        let (pv, pd, qv, qd) = (stack(&p.values), stack(&p.derivs), stack(&q.values), stack(&q.derivs));
        values += (&qv * pv.transpose() - &pv * qv.transpose()) / *w;
        second_derivative += (&qv * pd.transpose() - &pv * qd.transpose()) / *w;
    }
    CommutatorKernel { points, dim, values, second_derivative }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowOptions;
    use crate::models::{FreeParticle, HarmonicOscillator};
    use crate::trajectory::Grid;

    fn flow(model: ConfigurationModel, t: f64, points: usize) -> LinearizedFlow {
        let g = Grid::new(t, points).unwrap();
        let n = model.dim();
        let traj = Trajectory::from_fn(g, move |_| (DVector::zeros(n), DVector::zeros(n))).unwrap();
        LinearizedFlow::new(&model, &traj, FlowOptions::default()).unwrap()
    }

    #[test]
    fn free_kernel_is_time_difference() {
        let f = flow(ConfigurationModel::analytic(FreeParticle::new(1, 1.0)).unwrap(), 1.0, 201);
        let b = solve_basis(&f).unwrap();
        assert!((b.pairings[0] + 0.5).abs() < 1e-12);
        let k = commutator_kernel(&b);
        let g = f.grid();
        for i in (0..201).step_by(7) {
            for j in (0..201).step_by(5) {
                assert!((k.get(i, 0, j, 0) - (g.s(i) - g.s(j))).abs() < 1e-12);
            }
        }
        assert!(k.antisymmetry_defect() < 1e-14);
    }

    #[test]
    fn harmonic_kernel_is_sine() {
        let f = flow(ConfigurationModel::analytic(HarmonicOscillator::unit()).unwrap(), 1.0, 201);
        let b = solve_basis(&f).unwrap();
        assert!((b.pairings[0] + 1.0 / 2f64.sin()).abs() < 1e-10);
        let k = commutator_kernel(&b);
        let g = f.grid();
        for i in (0..201).step_by(9) {
            for j in (0..201).step_by(4) {
                assert!((k.get(i, 0, j, 0) - (g.s(i) - g.s(j)).sin()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn conjugate_endpoints_are_rejected() {
        let f = flow(ConfigurationModel::analytic(HarmonicOscillator::unit()).unwrap(), std::f64::consts::FRAC_PI_2, 201);
        assert!(matches!(solve_basis(&f), Err(Error::ConjugateEndpoints { .. })));
    }

    #[test]
    fn two_form_of_linear_fields() {
        let m = ConfigurationModel::analytic(FreeParticle::new(1, 1.0)).unwrap();
        let g = Grid::new(1.0, 21).unwrap();
        let traj = Trajectory::from_fn(g, |_| (DVector::zeros(1), DVector::zeros(1))).unwrap();
        let j1: Vec<_> = g.times().iter().map(|s| DVector::from_element(1, s + 1.0)).collect();
        let j2: Vec<_> = g.times().iter().map(|s| DVector::from_element(1, s - 1.0)).collect();
        for i in 0..21 {
            assert!((two_form(&m, &traj, i, &j1, &j2).unwrap() - 2.0).abs() < 1e-12);
        }
    }
}
