//! Uniform time grids and sampled paths.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// `N` equally spaced points on `[-T, T]`, `N` odd.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    points: usize,
}

impl Grid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidInput(format!("half width must be positive, got {half_width}")));
        }
        if points < 3 || points % 2 == 0 {
            return Err(Error::InvalidInput(format!("grid size must be odd and at least 3, got {points}")));
        }
        Ok(Grid { half_width, points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        if i == self.points - 1 {
            self.half_width
        } else {
            -self.half_width + i as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.s(i)).collect()
    }

    pub fn mid(&self) -> usize {
        self.points / 2
    }

    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.points - 1 {
            0.5 * self.step()
        } else {
            self.step()
        }
    }

    /// Composite Simpson weights (valid because `N` is odd).
    pub fn simpson_weights(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points)
            .map(|i| {
                if i == 0 || i == self.points - 1 {
                    h / 3.0
                } else if i % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                }
            })
            .collect()
    }

    /// Index of the grid point at `s`, if `s` sits on the grid.
    pub fn index_of(&self, s: f64) -> Option<usize> {
        let r = (s + self.half_width) / self.step();
        let i = r.round();
        if i < 0.0 || i > (self.points - 1) as f64 || (r - i).abs() > 1e-9 {
            None
        } else {
            Some(i as usize)
        }
    }
}

/// How the stored velocities were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocitySource {
    Integrator,
    Analytic,
    CentralDifference,
}

/// Closed-form evaluator `s -> (x(s), v(s))`.
pub type ExactPath = Arc<dyn Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync>;

/// Positions and velocities sampled on a [`Grid`].
#[derive(Clone)]
pub struct Trajectory {
    grid: Grid,
    x: Vec<DVector<f64>>,
    v: Vec<DVector<f64>>,
    source: VelocitySource,
    exact: Option<ExactPath>,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("grid", &self.grid)
            .field("dim", &self.dim())
            .field("source", &self.source)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl Trajectory {
    pub fn new(grid: Grid, x: Vec<DVector<f64>>, v: Vec<DVector<f64>>, source: VelocitySource) -> Result<Self> {
        if x.len() != grid.len() {
            return Err(Error::GridMismatch { expected: grid.len(), found: x.len() });
        }
        if v.len() != grid.len() {
            return Err(Error::GridMismatch { expected: grid.len(), found: v.len() });
        }
        let n = x[0].len();
        if x.iter().chain(v.iter()).any(|p| p.len() != n) {
            return Err(Error::InvalidInput("inconsistent trajectory dimension".into()));
        }
        Ok(Trajectory { grid, x, v, source, exact: None })
    }

    /// Velocities from second-order central differences of the positions.
    pub fn from_positions(grid: Grid, x: Vec<DVector<f64>>) -> Result<Self> {
        if x.len() != grid.len() {
            return Err(Error::GridMismatch { expected: grid.len(), found: x.len() });
        }
        let v = central_difference(&x, grid.step());
        Self::new(grid, x, v, VelocitySource::CentralDifference)
    }

    /// Samples a closed-form path and keeps the evaluator for off-grid queries.
    pub fn from_fn<F>(grid: Grid, path: F) -> Result<Self>
    where
        F: Fn(f64) -> (DVector<f64>, DVector<f64>) + Send + Sync + 'static,
    {
        let (x, v): (Vec<_>, Vec<_>) = grid.times().into_iter().map(&path).unzip();
        let mut t = Self::new(grid, x, v, VelocitySource::Analytic)?;
        t.exact = Some(Arc::new(path));
        Ok(t)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self, i: usize) -> &DVector<f64> {
        &self.x[i]
    }

    pub fn v(&self, i: usize) -> &DVector<f64> {
        &self.v[i]
    }

    pub fn positions(&self) -> &[DVector<f64>] {
        &self.x
    }

    pub fn velocities(&self) -> &[DVector<f64>] {
        &self.v
    }

    pub fn velocity_source(&self) -> VelocitySource {
        self.source
    }

    pub fn exact(&self) -> Option<&ExactPath> {
        self.exact.as_ref()
    }

    /// Copy whose velocities are recomputed by central differences.
    pub fn with_difference_velocities(&self) -> Self {
        Trajectory {
            grid: self.grid,
            x: self.x.clone(),
            v: central_difference(&self.x, self.grid.step()),
            source: VelocitySource::CentralDifference,
            exact: None,
        }
    }
}

/// Second-order derivative of sampled values: central in the interior,
/// three-point one-sided at the ends.
pub fn central_difference(values: &[DVector<f64>], h: f64) -> Vec<DVector<f64>> {
    let n = values.len();
    assert!(n >= 3, "need at least three samples");
    // Ends use a ghost sample from cubic extrapolation, so they carry the same
    // leading error as the interior stencil and a second difference of the
    // result stays second order next to the boundary.
    if n >= 4 {
        return (0..n)
            .map(|i| {
                if i == 0 {
                    (&values[1] * 7.0 - &values[0] * 4.0 - &values[2] * 4.0 + &values[3]) / (2.0 * h)
                } else if i == n - 1 {
                    (&values[n - 1] * 4.0 - &values[n - 2] * 7.0 + &values[n - 3] * 4.0 - &values[n - 4]) / (2.0 * h)
                } else {
                    (&values[i + 1] - &values[i - 1]) / (2.0 * h)
                }
            })
            .collect();
    }
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

/// Largest Euclidean norm over the interior points `1..N-1`.
pub fn interior_max_norm(values: &[DVector<f64>]) -> f64 {
    values[1..values.len() - 1].iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = Grid::new(1.0, 201).unwrap();
        assert_eq!(g.s(0), -1.0);
        assert_eq!(g.s(200), 1.0);
        assert!((g.s(100)).abs() < 1e-15);
        assert_eq!(g.index_of(0.5), Some(150));
        assert_eq!(g.index_of(0.505), None);
        assert!(Grid::new(1.0, 200).is_err());
        assert!(Grid::new(-1.0, 201).is_err());
        let w: f64 = g.simpson_weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-13);
    }

    #[test]
    fn difference_velocities_are_exact_on_quadratics() {
        let g = Grid::new(1.0, 11).unwrap();
        let x: Vec<_> = g.times().iter().map(|s| DVector::from_element(1, s * s)).collect();
        let t = Trajectory::from_positions(g, x).unwrap();
        for i in 0..11 {
            assert!((t.v(i)[0] - 2.0 * g.s(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_difference_is_second_order_up_to_the_boundary() {
        let err = |n: usize| {
            let g = Grid::new(1.0, n).unwrap();
            let x: Vec<_> = g.times().iter().map(|s| DVector::from_element(1, s.sin())).collect();
            let xx = central_difference(&central_difference(&x, g.step()), g.step());
            (1..n - 1).map(|i| (xx[i][0] + g.s(i).sin()).abs()).fold(0.0, f64::max)
        };
        let ratio = err(101) / err(201);
        assert!(ratio > 3.8, "{ratio}");
    }
}
