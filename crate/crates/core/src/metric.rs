//! Riemannian metrics, Levi-Civita connection and curvature.

use std::fmt;

use nalgebra::DMatrix;

use crate::fd;

/// Christoffel symbols `gamma^mu_{nu rho}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Christoffel { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, mu: usize, nu: usize, rho: usize) -> f64 {
        self.data[(mu * self.n + nu) * self.n + rho]
    }

    pub fn set(&mut self, mu: usize, nu: usize, rho: usize, value: f64) {
        let n = self.n;
        self.data[(mu * n + nu) * n + rho] = value;
    }

    /// `gamma^mu_{nu rho} a^nu b^rho`.
    pub fn contract(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|mu| {
                let mut acc = 0.0;
                for nu in 0..n {
                    for rho in 0..n {
                        acc += self.get(mu, nu, rho) * a[nu] * b[rho];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Riemann tensor `R^nu_{mu rho sigma}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, nu: usize, mu: usize, rho: usize, sigma: usize) -> f64 {
        let n = self.n;
        self.data[((nu * n + mu) * n + rho) * n + sigma]
    }

    /// `(R(J, u) u)^nu = R^nu_{mu rho sigma} u^mu J^rho u^sigma`.
    pub fn apply(&self, j: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|nu| {
                let mut acc = 0.0;
                for mu in 0..n {
                    for rho in 0..n {
                        for sigma in 0..n {
                            acc += self.get(nu, mu, rho, sigma) * u[mu] * j[rho] * u[sigma];
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// Builds the tensor from a connection and its coordinate derivatives
    /// (`dgamma[sigma]` holds `d_sigma gamma`).
    pub fn from_connection(gamma: &Christoffel, dgamma: &[Christoffel]) -> Self {
        let n = gamma.dim();
        let mut data = vec![0.0; n * n * n * n];
        for nu in 0..n {
            for mu in 0..n {
                for rho in 0..n {
                    for sigma in 0..n {
                        let mut r = dgamma[rho].get(nu, sigma, mu) - dgamma[sigma].get(nu, rho, mu);
                        for lam in 0..n {
                            r += gamma.get(nu, rho, lam) * gamma.get(lam, sigma, mu)
                                - gamma.get(nu, sigma, lam) * gamma.get(lam, rho, mu);
                        }
                        data[((nu * n + mu) * n + rho) * n + sigma] = r;
                    }
                }
            }
        }
        Riemann { n, data }
    }
}

pub trait Metric: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn tensor(&self, x: &[f64]) -> DMatrix<f64>;

    fn christoffel(&self, x: &[f64]) -> Christoffel {
        levi_civita_fd(self, x)
    }

    /// `d_sigma gamma` for each coordinate `sigma`.
    fn christoffel_derivatives(&self, x: &[f64]) -> Vec<Christoffel> {
        let n = self.dim();
        let mut work = x.to_vec();
        (0..n)
            .map(|sigma| {
                let h = fd::step(fd::FIRST_STEP, x[sigma]);
                work[sigma] = x[sigma] + h;
                let p = self.christoffel(&work);
                work[sigma] = x[sigma] - h;
                let m = self.christoffel(&work);
                work[sigma] = x[sigma];
                Christoffel { n, data: p.data.iter().zip(&m.data).map(|(a, b)| (a - b) / (2.0 * h)).collect() }
            })
            .collect()
    }

    fn riemann(&self, x: &[f64]) -> Riemann {
        Riemann::from_connection(&self.christoffel(x), &self.christoffel_derivatives(x))
    }
}

/// Levi-Civita symbols from central differences of the metric.
pub fn levi_civita_fd<M: Metric + ?Sized>(metric: &M, x: &[f64]) -> Christoffel {
    let n = metric.dim();
    let mut work = x.to_vec();
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let h = fd::step(fd::FIRST_STEP, x[k]);
            work[k] = x[k] + h;
            let p = metric.tensor(&work);
            work[k] = x[k] - h;
            let m = metric.tensor(&work);
            work[k] = x[k];
            (p - m) / (2.0 * h)
        })
        .collect();
    let ginv = metric.tensor(x).try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let mut out = Christoffel::zeros(n);
    for mu in 0..n {
        for nu in 0..n {
            for rho in 0..n {
                let mut acc = 0.0;
                for lam in 0..n {
                    acc += ginv[(mu, lam)] * (dg[nu][(lam, rho)] + dg[rho][(lam, nu)] - dg[lam][(nu, rho)]);
                }
                out.set(mu, nu, rho, 0.5 * acc);
            }
        }
    }
    out
}

/// Euclidean metric on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct FlatMetric {
    pub n: usize,
}

impl Metric for FlatMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn tensor(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }

    fn christoffel(&self, _x: &[f64]) -> Christoffel {
        Christoffel::zeros(self.n)
    }

    fn christoffel_derivatives(&self, _x: &[f64]) -> Vec<Christoffel> {
        vec![Christoffel::zeros(self.n); self.n]
    }
}

/// Round metric of the unit 2-sphere in coordinates `(theta, phi)`.
#[derive(Debug, Clone, Copy)]
pub struct SphereMetric;

impl Metric for SphereMetric {
    fn dim(&self) -> usize {
        2
    }

    fn tensor(&self, x: &[f64]) -> DMatrix<f64> {
        let s = x[0].sin();
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s * s])
    }

    fn christoffel(&self, x: &[f64]) -> Christoffel {
        let (s, c) = x[0].sin_cos();
        let mut g = Christoffel::zeros(2);
        g.set(0, 1, 1, -s * c);
        g.set(1, 0, 1, c / s);
        g.set(1, 1, 0, c / s);
        g
    }

    fn christoffel_derivatives(&self, x: &[f64]) -> Vec<Christoffel> {
        let s = x[0].sin();
        let mut dtheta = Christoffel::zeros(2);
        dtheta.set(0, 1, 1, -(2.0 * x[0]).cos());
        dtheta.set(1, 0, 1, -1.0 / (s * s));
        dtheta.set(1, 1, 0, -1.0 / (s * s));
        vec![dtheta, Christoffel::zeros(2)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct FdSphere;
    impl Metric for FdSphere {
        fn dim(&self) -> usize {
            2
        }
        fn tensor(&self, x: &[f64]) -> DMatrix<f64> {
            SphereMetric.tensor(x)
        }
    }

    #[test]
    fn sphere_connection_matches_finite_differences() {
        for &theta in &[0.4, 1.1, 2.3] {
            let x = [theta, 0.7];
            let a = SphereMetric.christoffel(&x);
            let b = FdSphere.christoffel(&x);
            for mu in 0..2 {
                for nu in 0..2 {
                    for rho in 0..2 {
                        assert!((a.get(mu, nu, rho) - b.get(mu, nu, rho)).abs() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_has_unit_sectional_curvature() {
        for &theta in &[0.5f64, 1.2, 2.0] {
            let x = [theta, -0.3];
            let s2 = theta.sin().powi(2);
            for r in [SphereMetric.riemann(&x), FdSphere.riemann(&x)] {
                // K = R_{theta phi theta phi} / det g with R_{theta..} = g_{theta theta} R^theta_{phi theta phi}
                assert!((r.get(0, 1, 0, 1) / s2 - 1.0).abs() < 1e-5);
                assert!((r.get(1, 0, 1, 0) - 1.0).abs() < 1e-5);
                assert!((r.get(0, 1, 0, 1) + r.get(0, 1, 1, 0)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn flat_metric_is_flat() {
        let r = FlatMetric { n: 3 }.riemann(&[0.1, 0.2, 0.3]);
        assert!(r.data.iter().all(|v| *v == 0.0));
    }
}
