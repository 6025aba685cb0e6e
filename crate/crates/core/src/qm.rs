//! Quadratic observables on a finite-dimensional Hilbert space.
//!
//! A state `psi = q + i p` is treated as a point `z = (q, p)` of a real phase
//! space with the first-order Lagrangian `L = (q.p' - p.q')/2 + z.h z/4`, where
//! `h` is the realification of the Hamiltonian. Its solutions obey
//! `2 i psi' = H psi`, and `{p_j, q_k} = delta_jk`. An observable `A` enters as
//! the density `w(s) <psi|A|psi> / 2 = w(s) z.a z / 2`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

use crate::bracket::{bracket_integral, BracketContext};
use crate::error::{Error, Result};
use crate::flow::FlowOptions;
use crate::functional::{PathFunctional, Window};
use crate::model::{ConfigurationModel, Lagrangian, PartialBundle};
use crate::trajectory::{Grid, Trajectory};

pub type C64 = Complex<f64>;

/// Tolerance on `|A - A^dagger|` for operators accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub fn hermitian_deviation(a: &DMatrix<C64>) -> f64 {
    (a - a.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn require_hermitian(a: &DMatrix<C64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidInput("operator must be square".into()));
    }
    let deviation = hermitian_deviation(a);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NonHermitian { deviation });
    }
    Ok(())
}

/// `[[Re A, -Im A], [Im A, Re A]]`, the action of `A` on `(q, p)`.
pub fn realify(a: &DMatrix<C64>) -> DMatrix<f64> {
    let d = a.nrows();
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let c = a[(i, j)];
            out[(i, j)] = c.re;
            out[(i, d + j)] = -c.im;
            out[(d + i, j)] = c.im;
            out[(d + i, d + j)] = c.re;
        }
    }
    out
}

/// Pauli matrices `(sigma_x, sigma_y, sigma_z)`.
pub fn pauli() -> [DMatrix<C64>; 3] {
    let c = |re: f64, im: f64| Complex::new(re, im);
    [
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}

/// Random Hermitian matrix with entries uniform in `[-1, 1]`.
pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> DMatrix<C64> {
    let m = DMatrix::from_fn(d, d, |_, _| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (&m + m.adjoint()).map(|c| c * 0.5)
}

/// Hamiltonian and initial state `psi_0 = q_0 + i p_0`.
#[derive(Debug, Clone)]
pub struct HilbertModel {
    hamiltonian: DMatrix<C64>,
    q0: DVector<f64>,
    p0: DVector<f64>,
}

impl HilbertModel {
    pub fn new(hamiltonian: DMatrix<C64>, q0: DVector<f64>, p0: DVector<f64>) -> Result<Self> {
        require_hermitian(&hamiltonian)?;
        let d = hamiltonian.nrows();
        if q0.len() != d || p0.len() != d {
            return Err(Error::InvalidInput(format!("initial state must have dimension {d}")));
        }
        Ok(HilbertModel { hamiltonian, q0, p0 })
    }

    pub fn free(q0: DVector<f64>, p0: DVector<f64>) -> Result<Self> {
        let d = q0.len();
        Self::new(DMatrix::zeros(d, d), q0, p0)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &DMatrix<C64> {
        &self.hamiltonian
    }

    pub fn psi0(&self) -> DVector<C64> {
        DVector::from_fn(self.dim(), |i, _| Complex::new(self.q0[i], self.p0[i]))
    }

    /// The same state with the Hamiltonian set to zero.
    pub fn without_hamiltonian(&self) -> Self {
        let d = self.dim();
        HilbertModel { hamiltonian: DMatrix::zeros(d, d), q0: self.q0.clone(), p0: self.p0.clone() }
    }

    /// `exp(-i H tau / 2)` by scaling and squaring.
    pub fn evolution(&self, tau: f64) -> DMatrix<C64> {
        self.hamiltonian.map(|c| c * Complex::new(0.0, -0.5 * tau)).exp()
    }

    /// Reference solution `z(s) = realify(U(s)) z_0`, evaluated through an
    /// eigendecomposition of `H` (independent of [`HilbertModel::evolution`]).
    pub fn reference_trajectory(&self, grid: Grid) -> Result<Trajectory> {
        let d = self.dim();
        let eig = self.hamiltonian.clone().symmetric_eigen();
        let vecs = eig.eigenvectors.clone();
        let vals = eig.eigenvalues.clone();
        let coeffs = vecs.adjoint() * self.psi0();
        Trajectory::from_fn(grid, move |s| {
            let phase = DVector::from_fn(d, |k, _| coeffs[k] * Complex::new(0.0, -0.5 * vals[k] * s).exp());
            let psi = &vecs * &phase;
            let dpsi = &vecs * DVector::from_fn(d, |k, _| phase[k] * Complex::new(0.0, -0.5 * vals[k]));
            let real = |v: &DVector<C64>| DVector::from_fn(2 * d, |i, _| if i < d { v[i].re } else { v[i - d].im });
            (real(&psi), real(&dpsi))
        })
    }

    pub fn lagrangian(&self) -> CanonicalLagrangian {
        CanonicalLagrangian { d: self.dim(), h: realify(&self.hamiltonian) }
    }
}

/// `L = (q.p' - p.q')/2 + z.h z/4` on `z = (q, p)`.
#[derive(Debug, Clone)]
pub struct CanonicalLagrangian {
    d: usize,
    h: DMatrix<f64>,
}

impl Lagrangian for CanonicalLagrangian {
    fn name(&self) -> &str {
        "qm"
    }
    fn dim(&self) -> usize {
        2 * self.d
    }
    fn value(&self, _s: f64, x: &[f64], v: &[f64]) -> f64 {
        let d = self.d;
        let z = DVector::from_column_slice(x);
        let kinetic: f64 = (0..d).map(|j| x[j] * v[d + j] - x[d + j] * v[j]).sum();
        0.5 * kinetic + 0.25 * z.dot(&(&self.h * &z))
    }
    fn analytic_partials(&self, _s: f64, x: &[f64], v: &[f64]) -> Option<PartialBundle> {
        let d = self.d;
        let z = DVector::from_column_slice(x);
        let hz = &self.h * &z;
        let mut b = PartialBundle::zeros(2 * d);
        for j in 0..d {
            b.lx[j] = 0.5 * v[d + j] + 0.5 * hz[j];
            b.lx[d + j] = -0.5 * v[j] + 0.5 * hz[d + j];
            b.lv[j] = -0.5 * x[d + j];
            b.lv[d + j] = 0.5 * x[j];
            b.lxv[(j, d + j)] = 0.5;
            b.lxv[(d + j, j)] = -0.5;
        }
        b.lxx = &self.h * 0.5;
        Some(b)
    }
}

/// `A[psi] = int w(s) <psi(s)|A|psi(s)> / 2 ds`.
#[derive(Debug, Clone)]
pub struct QuadraticFunctional {
    pub label: String,
    pub operator: DMatrix<C64>,
    pub window: Window,
}

impl QuadraticFunctional {
    pub fn new(label: impl Into<String>, operator: DMatrix<C64>, window: Window) -> Result<Self> {
        require_hermitian(&operator)?;
        Ok(QuadraticFunctional { label: label.into(), operator, window })
    }

    pub fn to_path_functional(&self) -> Result<PathFunctional> {
        PathFunctional::quadratic(self.label.clone(), self.window, realify(&self.operator))
    }

    fn check_window(&self, grid: &Grid) -> Result<()> {
        let (a, b) = self.window.support();
        let t = grid.half_width();
        if a <= -t || b >= t || self.window.value(-t) != 0.0 || self.window.value(t) != 0.0 {
            return Err(Error::UnboundedWindow { label: self.label.clone() });
        }
        Ok(())
    }
}

/// `(i/2) <psi_0|[A, B]|psi_0>`.
pub fn free_commutator_bracket(model: &HilbertModel, a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<f64> {
    require_hermitian(a)?;
    require_hermitian(b)?;
    let psi = model.psi0();
    let c = (psi.adjoint() * (a * b - b * a) * &psi)[(0, 0)];
    Ok((Complex::new(0.0, 0.5) * c).re)
}

/// Covariant-bracket pipeline on the canonical Lagrangian of a [`HilbertModel`].
#[derive(Debug)]
pub struct QmPipeline {
    ctx: BracketContext,
}

impl QmPipeline {
    pub fn new(model: &HilbertModel, half_width: f64, points: usize, options: FlowOptions) -> Result<Self> {
        let grid = Grid::new(half_width, points)?;
        let lagrangian = ConfigurationModel::analytic(model.lagrangian())?;
        let traj = model.reference_trajectory(grid)?;
        Ok(QmPipeline { ctx: BracketContext::with_options(&lagrangian, &traj, options)? })
    }

    pub fn context(&self) -> &BracketContext {
        &self.ctx
    }

    pub fn bracket(&self, a: &QuadraticFunctional, b: &QuadraticFunctional) -> Result<f64> {
        let grid = self.ctx.trajectory().grid();
        a.check_window(grid)?;
        b.check_window(grid)?;
        bracket_integral(&self.ctx, &a.to_path_functional()?, &b.to_path_functional()?)
    }
}

/// Brackets of the phase-space coordinates `{z_a, z_b}` computed by the
/// pipeline with `H = 0`, and their largest deviation from the canonical
/// matrix (`{p_j, q_k} = delta_jk`).
pub fn canonical_bivector(model: &HilbertModel, half_width: f64, points: usize) -> Result<(DMatrix<f64>, f64)> {
    let free = model.without_hamiltonian();
    let pipeline = QmPipeline::new(&free, half_width, points, FlowOptions { substeps: 2 })?;
    let d = model.dim();
    let window = Window::unit_gaussian(0.0, half_width / 10.0);
    let coordinate = |k: usize| {
        let mut c = DVector::zeros(2 * d);
        c[k] = 1.0;
        PathFunctional::linear(format!("z{k}"), window, c, DVector::zeros(2 * d))
    };
    let mut measured = DMatrix::zeros(2 * d, 2 * d);
    let mut deviation = 0.0f64;
    for a in 0..2 * d {
        let fa = coordinate(a)?;
        for b in 0..2 * d {
            let value = bracket_integral(pipeline.context(), &fa, &coordinate(b)?)?;
            let expected = if a >= d && b == a - d {
                1.0
            } else if a < d && b == a + d {
                -1.0
            } else {
                0.0
            };
            measured[(a, b)] = value;
            deviation = deviation.max((value - expected).abs());
        }
    }
    Ok((measured, deviation))
}

pub fn canonical_bivector_check(model: &HilbertModel, half_width: f64, points: usize) -> Result<f64> {
    Ok(canonical_bivector(model, half_width, points)?.1)
}

/// Result of [`heisenberg_bracket`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisenbergValue {
    /// `(i/2) int int w_A w_B <[A_H(tau), B_H(t)]>`, comparable with the covariant bracket.
    pub value: f64,
    /// `-i int int w_A w_B <[A_H(tau), B_H(t)]>`.
    pub raw: f64,
    /// Real part of the commutator expectation, zero up to roundoff.
    pub imaginary_residual: f64,
}

/// `int w(tau) U^dagger(tau) A U(tau) dtau` by the trapezoid rule.
pub fn smeared_operator(model: &HilbertModel, a: &QuadraticFunctional, grid: &Grid) -> Result<DMatrix<C64>> {
    a.check_window(grid)?;
    let d = model.dim();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..grid.len() {
        let s = grid.s(i);
        let w = a.window.value(s) * grid.trapezoid_weight(i);
        if w == 0.0 {
            continue;
        }
        let u = model.evolution(s);
        out += (u.adjoint() * &a.operator * u).map(|c| c * w);
    }
    Ok(out)
}

pub fn heisenberg_bracket(model: &HilbertModel, a: &QuadraticFunctional, b: &QuadraticFunctional, grid: &Grid) -> Result<HeisenbergValue> {
    let abar = smeared_operator(model, a, grid)?;
    let bbar = smeared_operator(model, b, grid)?;
    let psi = model.psi0();
    let c = (psi.adjoint() * (&abar * &bbar - &bbar * &abar) * &psi)[(0, 0)];
    Ok(HeisenbergValue { value: -0.5 * c.im, raw: c.im, imaginary_residual: c.re.abs() })
}

/// Largest change of `<psi(s)|psi(s)>` over the grid.
pub fn unitarity_drift(model: &HilbertModel, grid: &Grid) -> f64 {
    let psi = model.psi0();
    let n0 = psi.norm_squared();
    grid.times().iter().map(|s| ((model.evolution(*s) * &psi).norm_squared() - n0).abs()).fold(0.0, f64::max)
}
