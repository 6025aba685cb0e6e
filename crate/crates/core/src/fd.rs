//! Central finite differences on flat argument vectors.

use nalgebra::DMatrix;

/// Relative step for first derivatives.
pub const FIRST_STEP: f64 = 1e-5;
/// Relative step for second derivatives. Roundoff in a second difference
/// grows like eps/h^2, so the optimum sits near eps^(1/4).
pub const SECOND_STEP: f64 = 1e-4;

pub fn step(rel: f64, z: f64) -> f64 {
    rel * z.abs().max(1.0)
}

fn shifted<F: Fn(&[f64]) -> f64>(f: &F, work: &mut [f64], z: &[f64], i: usize, di: f64, j: usize, dj: f64) -> f64 {
    work[i] = z[i] + di;
    work[j] += dj;
    let r = f(work);
    work[i] = z[i];
    work[j] = z[j];
    r
}

pub fn gradient<F: Fn(&[f64]) -> f64>(f: F, z: &[f64]) -> Vec<f64> {
    let mut work = z.to_vec();
    (0..z.len())
        .map(|i| {
            let h = step(FIRST_STEP, z[i]);
            let fp = shifted(&f, &mut work, z, i, h, i, 0.0);
            let fm = shifted(&f, &mut work, z, i, -h, i, 0.0);
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

pub fn hessian<F: Fn(&[f64]) -> f64>(f: F, z: &[f64]) -> DMatrix<f64> {
    let m = z.len();
    let mut work = z.to_vec();
    let f0 = f(z);
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        let hi = step(SECOND_STEP, z[i]);
        let fp = shifted(&f, &mut work, z, i, hi, i, 0.0);
        let fm = shifted(&f, &mut work, z, i, -hi, i, 0.0);
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = step(SECOND_STEP, z[j]);
            let v = (shifted(&f, &mut work, z, i, hi, j, hj) - shifted(&f, &mut work, z, i, hi, j, -hj)
                - shifted(&f, &mut work, z, i, -hi, j, hj)
                + shifted(&f, &mut work, z, i, -hi, j, -hj))
                / (4.0 * hi * hj);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}
