//! Built-in mechanical models with closed-form partials.

use nalgebra::{DMatrix, DVector};

use crate::metric::{FlatMetric, Metric, SphereMetric};
use crate::model::{Lagrangian, PartialBundle};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// `L = m |v|^2 / 2` on `R^n`.
#[derive(Debug, Clone)]
pub struct FreeParticle {
    mass: f64,
    metric: FlatMetric,
}

impl FreeParticle {
    pub fn new(n: usize, mass: f64) -> Self {
        FreeParticle { mass, metric: FlatMetric { n } }
    }
}

impl Lagrangian for FreeParticle {
    fn name(&self) -> &str {
        "free"
    }
    fn dim(&self) -> usize {
        self.metric.n
    }
    fn value(&self, _s: f64, _x: &[f64], v: &[f64]) -> f64 {
        0.5 * self.mass * dot(v, v)
    }
    fn analytic_partials(&self, _s: f64, _x: &[f64], v: &[f64]) -> Option<PartialBundle> {
        let n = self.metric.n;
        let mut b = PartialBundle::zeros(n);
        b.lv = DVector::from_column_slice(v) * self.mass;
        b.lvv = DMatrix::identity(n, n) * self.mass;
        Some(b)
    }
    fn metric(&self) -> Option<&dyn Metric> {
        Some(&self.metric)
    }
    fn mass(&self) -> f64 {
        self.mass
    }
}

/// Isotropic oscillator `L = m (|v|^2 - w^2 |x|^2) / 2`.
#[derive(Debug, Clone)]
pub struct HarmonicOscillator {
    pub n: usize,
    pub mass: f64,
    pub omega: f64,
}

impl HarmonicOscillator {
    pub fn new(n: usize, mass: f64, omega: f64) -> Self {
        HarmonicOscillator { n, mass, omega }
    }

    pub fn unit() -> Self {
        Self::new(1, 1.0, 1.0)
    }
}

impl Lagrangian for HarmonicOscillator {
    fn name(&self) -> &str {
        "harmonic"
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, _s: f64, x: &[f64], v: &[f64]) -> f64 {
        0.5 * self.mass * (dot(v, v) - self.omega * self.omega * dot(x, x))
    }
    fn analytic_partials(&self, _s: f64, x: &[f64], v: &[f64]) -> Option<PartialBundle> {
        let k = self.mass * self.omega * self.omega;
        let mut b = PartialBundle::zeros(self.n);
        b.lx = DVector::from_column_slice(x) * -k;
        b.lv = DVector::from_column_slice(v) * self.mass;
        b.lxx = DMatrix::identity(self.n, self.n) * -k;
        b.lvv = DMatrix::identity(self.n, self.n) * self.mass;
        Some(b)
    }
    fn mass(&self) -> f64 {
        self.mass
    }
}

/// Geodesic motion on the unit 2-sphere, `L = m (theta'^2 + sin^2 theta phi'^2) / 2`.
#[derive(Debug, Clone)]
pub struct SphereGeodesic {
    pub mass: f64,
}

impl Lagrangian for SphereGeodesic {
    fn name(&self) -> &str {
        "sphere"
    }
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, _s: f64, x: &[f64], v: &[f64]) -> f64 {
        let st = x[0].sin();
        0.5 * self.mass * (v[0] * v[0] + st * st * v[1] * v[1])
    }
    fn analytic_partials(&self, _s: f64, x: &[f64], v: &[f64]) -> Option<PartialBundle> {
        let m = self.mass;
        let (st, ct) = x[0].sin_cos();
        let mut b = PartialBundle::zeros(2);
        b.lx[0] = m * st * ct * v[1] * v[1];
        b.lv[0] = m * v[0];
        b.lv[1] = m * st * st * v[1];
        b.lxx[(0, 0)] = m * (2.0 * x[0]).cos() * v[1] * v[1];
        b.lxv[(0, 1)] = m * (2.0 * x[0]).sin() * v[1];
        b.lvv[(0, 0)] = m;
        b.lvv[(1, 1)] = m * st * st;
        Some(b)
    }
    fn metric(&self) -> Option<&dyn Metric> {
        Some(&SphereMetric)
    }
    fn mass(&self) -> f64 {
        self.mass
    }
}

/// Charged particle in the plane with a uniform magnetic field and an
/// isotropic spring: `L = m|v|^2/2 + b (x1 v2 - x2 v1)/2 - k|x|^2/2`.
///
/// The velocity-position coupling makes the linearized operator non-diagonal.
#[derive(Debug, Clone)]
pub struct MagneticPlane {
    pub mass: f64,
    pub field: f64,
    pub spring: f64,
}

impl Lagrangian for MagneticPlane {
    fn name(&self) -> &str {
        "magnetic"
    }
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, _s: f64, x: &[f64], v: &[f64]) -> f64 {
        0.5 * self.mass * dot(v, v) + 0.5 * self.field * (x[0] * v[1] - x[1] * v[0])
            - 0.5 * self.spring * dot(x, x)
    }
    fn analytic_partials(&self, _s: f64, x: &[f64], v: &[f64]) -> Option<PartialBundle> {
        let (m, b, k) = (self.mass, self.field, self.spring);
        let mut p = PartialBundle::zeros(2);
        p.lx[0] = 0.5 * b * v[1] - k * x[0];
        p.lx[1] = -0.5 * b * v[0] - k * x[1];
        p.lv[0] = m * v[0] - 0.5 * b * x[1];
        p.lv[1] = m * v[1] + 0.5 * b * x[0];
        p.lxx = DMatrix::identity(2, 2) * -k;
        p.lxv[(0, 1)] = 0.5 * b;
        p.lxv[(1, 0)] = -0.5 * b;
        p.lvv = DMatrix::identity(2, 2) * m;
        Some(p)
    }
    fn mass(&self) -> f64 {
        self.mass
    }
}

/// Unit-speed great circle through `(theta, phi) = (pi/2, 0)` at `s = 0`,
/// tilted by `tilt` out of the equator. Returns `(x, v)` at parameter `s`.
///
/// Stays away from the coordinate poles while `|tilt| < pi/2`.
pub fn great_circle(tilt: f64, s: f64) -> (DVector<f64>, DVector<f64>) {
    let (ss, cs) = s.sin_cos();
    let (sa, ca) = tilt.sin_cos();
    let (px, py, pz) = (cs, ss * ca, ss * sa);
    let (dx, dy, dz) = (-ss, cs * ca, cs * sa);
    let rho2 = px * px + py * py;
    let theta = pz.acos();
    let phi = py.atan2(px);
    let dtheta = -dz / rho2.sqrt();
    let dphi = (px * dy - py * dx) / rho2;
    (DVector::from_vec(vec![theta, phi]), DVector::from_vec(vec![dtheta, dphi]))
}
