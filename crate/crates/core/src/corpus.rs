//! Seeded random functionals used by the CLI checks and the test suites.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::functional::{PathFunctional, Window};

/// Gaussian window whose truncated support stays inside `[-0.95 T, 0.95 T]`.
pub fn random_window<R: Rng>(rng: &mut R, half_width: f64) -> Window {
    let sigma = rng.gen_range(0.06..0.1) * half_width;
    let center = rng.gen_range(-0.15..0.15) * half_width;
    Window::gaussian(center, sigma)
}

fn random_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// One of four families: linear in `x`, linear in `v`, quadratic in `x`, or a
/// non-polynomial density mixing `x` and `v` (gradient by finite differences).
pub fn random_functional<R: Rng>(rng: &mut R, label: &str, n: usize, half_width: f64) -> Result<PathFunctional> {
    let window = random_window(rng, half_width);
    match rng.gen_range(0..4) {
        0 => PathFunctional::linear(label, window, random_vector(rng, n), DVector::zeros(n)),
        1 => PathFunctional::linear(label, window, random_vector(rng, n) * 0.3, random_vector(rng, n)),
        2 => {
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            PathFunctional::quadratic(label, window, &m + m.transpose())
        }
        _ => {
            let c = random_vector(rng, n);
            let d = random_vector(rng, n) * 0.5;
            let (a, b) = window.support();
            PathFunctional::new(label, a, b, move |s, x, v| {
                let cx: f64 = c.iter().zip(x).map(|(p, q)| p * q).sum();
                let dv: f64 = d.iter().zip(v).map(|(p, q)| p * q).sum();
                window.value(s) * (cx.sin() + 0.5 * cx * dv)
            })
        }
    }
}

/// `count` labelled pairs `(A_k, B_k)`.
pub fn random_pairs<R: Rng>(rng: &mut R, count: usize, n: usize, half_width: f64) -> Result<Vec<(PathFunctional, PathFunctional)>> {
    (0..count)
        .map(|k| Ok((random_functional(rng, &format!("A{k}"), n, half_width)?, random_functional(rng, &format!("B{k}"), n, half_width)?)))
        .collect()
}
