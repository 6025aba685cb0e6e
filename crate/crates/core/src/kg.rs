//! Free real scalar field on a periodic spatial lattice with continuous time.
//!
//! Modes are `k = 2 pi n / L` with `n` in `(-M/2, M/2]^d` and
//! `w_k = sqrt(|k|^2 + m^2)`. The commutator kernel is the mode sum
//! `G(x, y) = L^-d sum_k cos(k.(x - y)) sin(w_k (x0 - y0)) / w_k`.

use nalgebra::Complex;

use crate::error::{Error, Result};

/// `|sin(w (tau2 - tau1))|` below which a boundary problem is resonant.
pub const RESONANCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub n: [i64; 3],
    pub k: [f64; 3],
    pub omega: f64,
}

/// Lattice geometry and mass.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    dim: usize,
    length: f64,
    sites: usize,
    mass: f64,
    modes: Vec<Mode>,
    /// `phase[m * site_count + x] = k_m . x`.
    phase: Vec<f64>,
}

impl LatticeSpec {
    pub fn new(dim: usize, length: f64, sites: usize, mass: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidLattice(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if sites < 2 || sites % 2 != 0 {
            return Err(Error::InvalidLattice(format!("sites per side must be even and at least 2, got {sites}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidLattice(format!("box length must be positive, got {length}")));
        }
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(Error::InvalidLattice(format!("mass must be non-negative, got {mass}")));
        }
        let half = (sites / 2) as i64;
        let count = sites.pow(dim as u32);
        let mut modes = Vec::with_capacity(count);
        for flat in 0..count {
            let mut n = [0i64; 3];
            let mut rest = flat;
            for axis in (0..dim).rev() {
                n[axis] = (rest % sites) as i64 - half + 1;
                rest /= sites;
            }
            let mut k = [0.0; 3];
            let mut k2 = 0.0;
            for axis in 0..dim {
                k[axis] = 2.0 * std::f64::consts::PI * n[axis] as f64 / length;
                k2 += k[axis] * k[axis];
            }
            modes.push(Mode { n, k, omega: (k2 + mass * mass).sqrt() });
        }
        let mut spec = LatticeSpec { dim, length, sites, mass, modes, phase: Vec::new() };
        let mut phase = Vec::with_capacity(count * count);
        for m in &spec.modes {
            for x in 0..count {
                let p = spec.position(x);
                phase.push((0..dim).map(|a| m.k[a] * p[a]).sum());
            }
        }
        spec.phase = phase;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn sites_per_side(&self) -> usize {
        self.sites
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn site_count(&self) -> usize {
        self.sites.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.sites as f64
    }

    /// `(L/M)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Integer coordinates of a site, first axis slowest.
    pub fn coordinates(&self, site: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        let mut rest = site;
        for axis in (0..self.dim).rev() {
            c[axis] = rest % self.sites;
            rest /= self.sites;
        }
        c
    }

    pub fn site_index(&self, coords: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.sites + coords[a] % self.sites)
    }

    pub fn position(&self, site: usize) -> [f64; 3] {
        let c = self.coordinates(site);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = c[a] as f64 * self.spacing();
        }
        p
    }

    fn require_massive(&self) -> Result<()> {
        if self.mass == 0.0 {
            Err(Error::MasslessZeroMode)
        } else {
            Ok(())
        }
    }

    /// `(c_k, s_k) = sum_x phi(x) (cos k.x, sin k.x)`.
    pub fn transform(&self, field: &[f64]) -> Result<Vec<(f64, f64)>> {
        let count = self.site_count();
        if field.len() != count {
            return Err(Error::InvalidLattice(format!("field has {} sites, expected {count}", field.len())));
        }
        Ok((0..self.modes.len())
            .map(|m| {
                let row = &self.phase[m * count..(m + 1) * count];
                row.iter().zip(field).fold((0.0, 0.0), |(c, s), (p, f)| (c + f * p.cos(), s + f * p.sin()))
            })
            .collect())
    }

    /// Inverse of [`LatticeSpec::transform`].
    pub fn inverse(&self, coeffs: &[(f64, f64)]) -> Vec<f64> {
        let count = self.site_count();
        let norm = 1.0 / count as f64;
        (0..count)
            .map(|x| {
                norm * coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, (c, s))| {
                        let p = self.phase[m * count + x];
                        c * p.cos() + s * p.sin()
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    /// `(-laplacian + m^2) phi` with the spectral Laplacian.
    pub fn spatial_operator(&self, field: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self.transform(field)?;
        let scaled: Vec<(f64, f64)> = coeffs
            .iter()
            .zip(&self.modes)
            .map(|((c, s), m)| (c * m.omega * m.omega, s * m.omega * m.omega))
            .collect();
        Ok(self.inverse(&scaled))
    }

    fn max_omega(&self) -> f64 {
        self.modes.iter().map(|m| m.omega).fold(0.0, f64::max)
    }
}

/// A lattice site at a time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimePoint {
    pub site: usize,
    pub time: f64,
}

/// `G(x, y)`, retarded minus advanced Green function.
pub fn kg_commutator(spec: &LatticeSpec, x: SpacetimePoint, y: SpacetimePoint) -> Result<f64> {
    spec.require_massive()?;
    let (px, py) = (spec.position(x.site), spec.position(y.site));
    let dt = x.time - y.time;
    let sum: f64 = spec
        .modes
        .iter()
        .map(|m| {
            let kd: f64 = (0..spec.dim).map(|a| m.k[a] * (px[a] - py[a])).sum();
            kd.cos() * (m.omega * dt).sin() / m.omega
        })
        .sum();
    Ok(sum / spec.length.powi(spec.dim as i32))
}

/// `dG/dx0 (x, y)`.
pub fn kg_commutator_time_derivative(spec: &LatticeSpec, x: SpacetimePoint, y: SpacetimePoint) -> Result<f64> {
    spec.require_massive()?;
    let (px, py) = (spec.position(x.site), spec.position(y.site));
    let dt = x.time - y.time;
    let sum: f64 = spec
        .modes
        .iter()
        .map(|m| {
            let kd: f64 = (0..spec.dim).map(|a| m.k[a] * (px[a] - py[a])).sum();
            kd.cos() * (m.omega * dt).cos()
        })
        .sum();
    Ok(sum / spec.length.powi(spec.dim as i32))
}

/// Sampled functional derivative `dA/dphi` with its spacetime cell volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeDensity {
    pub entries: Vec<(SpacetimePoint, f64)>,
    /// `dV dtau` attached to each entry.
    pub cell: f64,
}

impl SpacetimeDensity {
    /// Density of the point functional `A[phi] = phi(x)`.
    pub fn point(x: SpacetimePoint, cell: f64) -> Self {
        SpacetimeDensity { entries: vec![(x, 1.0 / cell)], cell }
    }
}

/// `{A, B} = sum_{y,z} A(y) G(y, z) B(z) cell_A cell_B`.
pub fn kg_peierls_bracket(spec: &LatticeSpec, a: &SpacetimeDensity, b: &SpacetimeDensity) -> Result<f64> {
    spec.require_massive()?;
    // cos(k.D) sin(w T) = Im(e^{i(k.D + w T)} - e^{i(k.D - w T)}) / 2 factorizes over the two points.
    let sums = |d: &SpacetimeDensity, m: &Mode, sign: f64| -> Complex<f64> {
        d.entries.iter().fold(Complex::new(0.0, 0.0), |acc, (pt, v)| {
            let p = spec.position(pt.site);
            let arg: f64 = (0..spec.dim).map(|ax| m.k[ax] * p[ax]).sum::<f64>() + sign * m.omega * pt.time;
            acc + Complex::from_polar(*v, arg)
        })
    };
    let total: f64 = spec
        .modes
        .iter()
        .map(|m| {
            let plus = sums(a, m, 1.0) * sums(b, m, 1.0).conj();
            let minus = sums(a, m, -1.0) * sums(b, m, -1.0).conj();
            0.5 * (plus - minus).im / m.omega
        })
        .sum();
    Ok(total * a.cell * b.cell / spec.length.powi(spec.dim as i32))
}

/// Field values on a sequence of time slices.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfiguration {
    pub taus: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Time derivatives on the same slices, when known in closed form.
    pub velocities: Option<Vec<Vec<f64>>>,
}

/// Solution with `phi(tau1) = phi1` and `phi(tau2) = phi2`, sampled at `taus`.
pub fn kg_boundary_solution(
    spec: &LatticeSpec,
    phi1: &[f64],
    phi2: &[f64],
    tau1: f64,
    tau2: f64,
    taus: &[f64],
) -> Result<FieldConfiguration> {
    if !(tau2 != tau1 && tau1.is_finite() && tau2.is_finite()) {
        return Err(Error::InvalidLattice("boundary times must differ".into()));
    }
    let c1 = spec.transform(phi1)?;
    let c2 = spec.transform(phi2)?;
    let span = tau2 - tau1;
    let resonant = spec.modes.iter().filter(|m| m.omega > 0.0 && (m.omega * span).sin().abs() < RESONANCE_TOL).count();
    if resonant > 0 {
        return Err(Error::ResonantInterval { count: resonant });
    }
    let mut values = Vec::with_capacity(taus.len());
    let mut velocities = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut at = Vec::with_capacity(c1.len());
        let mut rate = Vec::with_capacity(c1.len());
        for (m, ((a1, b1), (a2, b2))) in spec.modes.iter().zip(c1.iter().zip(&c2)) {
            let w = m.omega;
            let (f1, f2, g1, g2) = if w == 0.0 {
                let u = (tau - tau1) / span;
                (1.0 - u, u, -1.0 / span, 1.0 / span)
            } else {
                let den = (w * span).sin();
                (
                    -(w * (tau - tau2)).sin() / den,
                    (w * (tau - tau1)).sin() / den,
                    -w * (w * (tau - tau2)).cos() / den,
                    w * (w * (tau - tau1)).cos() / den,
                )
            };
            at.push((f1 * a1 + f2 * a2, f1 * b1 + f2 * b2));
            rate.push((g1 * a1 + g2 * a2, g1 * b1 + g2 * b2));
        }
        values.push(spec.inverse(&at));
        velocities.push(spec.inverse(&rate));
    }
    Ok(FieldConfiguration { taus: taus.to_vec(), values, velocities: Some(velocities) })
}

/// Largest leapfrog residual `phi_tt + (-laplacian + m^2) phi` over interior
/// slices of a uniformly spaced configuration, and the truncation bound it is
/// compared against.
pub fn kg_residual(spec: &LatticeSpec, config: &FieldConfiguration) -> Result<(f64, f64)> {
    let n = config.taus.len();
    if n < 3 {
        return Err(Error::InvalidLattice("need at least three time slices".into()));
    }
    let dt = config.taus[1] - config.taus[0];
    if config.taus.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-12 * dt.abs().max(1.0)) {
        return Err(Error::InvalidLattice("time slices must be equally spaced".into()));
    }
    let mut residual = 0.0f64;
    let mut fourth = 0.0f64;
    let mut second = 0.0f64;
    for j in 1..n - 1 {
        let op = spec.spatial_operator(&config.values[j])?;
        let op2 = spec.spatial_operator(&op)?;
        for x in 0..spec.site_count() {
            let tt = (config.values[j + 1][x] - 2.0 * config.values[j][x] + config.values[j - 1][x]) / (dt * dt);
            residual = residual.max((tt + op[x]).abs());
            second = second.max(op[x].abs());
            fourth = fourth.max(op2[x].abs());
        }
    }
    // leapfrog truncation is dt^2 phi_tttt / 12 = dt^2 (-lap + m^2)^2 phi / 12
    let bound = 4.0 * dt * dt * fourth / 12.0 + 1e-9 * (1.0 + second) + 1e-6 * spec.max_omega().powi(4) * dt.powi(4) * fourth;
    Ok((residual, bound))
}

/// `sum_x (J2 dJ1/dtau - J1 dJ2/dtau) dV` on slice `slice`.
pub fn symplectic_current_flux(spec: &LatticeSpec, j1: &FieldConfiguration, j2: &FieldConfiguration, slice: usize) -> Result<f64> {
    for j in [j1, j2] {
        let (residual, threshold) = kg_residual(spec, j)?;
        if residual > threshold {
            return Err(Error::NotASolution { residual, threshold });
        }
        if slice >= j.taus.len() {
            return Err(Error::InvalidLattice(format!("slice {slice} out of range")));
        }
    }
    let rate = |c: &FieldConfiguration| -> Vec<f64> {
        match &c.velocities {
            Some(v) => v[slice].clone(),
            None => {
                let n = c.taus.len();
                let (a, b) = if slice == 0 { (0, 1) } else if slice == n - 1 { (n - 2, n - 1) } else { (slice - 1, slice + 1) };
                let dt = c.taus[b] - c.taus[a];
                (0..c.values[0].len()).map(|x| (c.values[b][x] - c.values[a][x]) / dt).collect()
            }
        }
    };
    let (r1, r2) = (rate(j1), rate(j2));
    let sum: f64 = (0..spec.site_count()).map(|x| j2.values[slice][x] * r1[x] - j1.values[slice][x] * r2[x]).sum();
    Ok(sum * spec.cell_volume())
}

/// `|G|` at fixed physical separation `(dx, dt)` along the first axis for
/// each lattice size (`d = 1`).
pub fn microcausality_profile(length: f64, mass: f64, dx: f64, dt: f64, sizes: &[usize]) -> Result<Vec<(usize, f64)>> {
    sizes
        .iter()
        .map(|&m| {
            let spec = LatticeSpec::new(1, length, m, mass)?;
            let units = dx / spec.spacing();
            if (units - units.round()).abs() > 1e-9 {
                return Err(Error::InvalidLattice(format!("separation {dx} is not a multiple of the spacing at M = {m}")));
            }
            let x = SpacetimePoint { site: units.round() as usize % m, time: dt };
            let y = SpacetimePoint { site: 0, time: 0.0 };
            Ok((m, kg_commutator(&spec, x, y)?.abs()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_set_and_transform_roundtrip() {
        for (d, m) in [(1, 8), (2, 4), (3, 2)] {
            let spec = LatticeSpec::new(d, 3.0, m, 1.0).unwrap();
            assert_eq!(spec.modes().len(), spec.site_count());
            let field: Vec<f64> = (0..spec.site_count()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
            let back = spec.inverse(&spec.transform(&field).unwrap());
            for (a, b) in field.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_lattices() {
        assert!(LatticeSpec::new(4, 1.0, 4, 1.0).is_err());
        assert!(LatticeSpec::new(1, 1.0, 5, 1.0).is_err());
        let massless = LatticeSpec::new(1, 1.0, 4, 0.0).unwrap();
        let p = SpacetimePoint { site: 0, time: 0.0 };
        assert_eq!(kg_commutator(&massless, p, p), Err(Error::MasslessZeroMode));
    }

    #[test]
    fn equal_time_commutator_vanishes() {
        let spec = LatticeSpec::new(2, 2.0, 6, 0.7).unwrap();
        for x in 0..spec.site_count() {
            let g = kg_commutator(&spec, SpacetimePoint { site: x, time: 0.4 }, SpacetimePoint { site: 5, time: 0.4 }).unwrap();
            assert_eq!(g, 0.0);
        }
    }

    #[test]
    fn time_derivative_is_a_lattice_delta() {
        let spec = LatticeSpec::new(1, 2.0, 16, 1.0).unwrap();
        for x in 0..16 {
            let d = kg_commutator_time_derivative(&spec, SpacetimePoint { site: x, time: 0.0 }, SpacetimePoint { site: 3, time: 0.0 })
                .unwrap();
            let expected = if x == 3 { 1.0 / spec.cell_volume() } else { 0.0 };
            assert!((d - expected).abs() < 1e-12, "{x} {d}");
        }
    }

    #[test]
    fn resonant_interval_is_reported() {
        let spec = LatticeSpec::new(1, 1.0, 2, 1.0).unwrap();
        let zero = vec![0.0; 2];
        let r = kg_boundary_solution(&spec, &zero, &zero, 0.0, std::f64::consts::PI, &[0.5]);
        assert!(matches!(r, Err(Error::ResonantInterval { count: 1 })));
    }
}
