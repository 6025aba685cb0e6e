//! Runs a configured experiment and writes CSV/JSON artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bracket::{bracket_routes, relative_deviation, BracketContext};
use crate::config::{ConfigError, ExperimentConfig, HamiltonianSource, KgParams, ModelKind, Output, Parameters, ParticleParams, QmParams};
use crate::corpus::random_pairs;
use crate::error::Error;
use crate::flow::FlowOptions;
use crate::functional::Window;
use crate::jacobi::{covariant_jacobi_check, SOLUTION_THRESHOLD};
use crate::kg::{kg_commutator, kg_commutator_time_derivative, kg_peierls_bracket, microcausality_profile, LatticeSpec, SpacetimeDensity, SpacetimePoint};
use crate::model::ConfigurationModel;
use crate::models::{great_circle, FreeParticle, HarmonicOscillator, SphereGeodesic};
use crate::qm::{canonical_bivector_check, free_commutator_bracket, heisenberg_bracket, random_hermitian, unitarity_drift, HilbertModel, QmPipeline, QuadraticFunctional, C64};
use crate::solver::{solve_bvp, BoundaryData};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("error in {module}: {source}", module = source.module())]
    Model {
        #[from]
        source: Error,
    },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// Process exit status: 1 for configuration and I/O problems, 3 for model errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 1,
            RunError::Model { .. } => 3,
        }
    }
}

/// One invariant outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub tolerance: f64,
    pub measured: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, tolerance: f64, measured: f64) -> Self {
        Check { name: name.to_string(), tolerance, measured, pass: measured <= tolerance }
    }

    /// Passes when `measured < tolerance` strictly.
    pub fn below(name: &str, tolerance: f64, measured: f64) -> Self {
        Check { name: name.to_string(), tolerance, measured, pass: measured < tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Round-trip formatting with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv { text: header.join(",") + "\n" }
    }

    fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| RunError::Io { path, source })?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Executes the pipeline for `config`, writes the requested artifacts and
/// `summary.json` into `out_dir`, and returns the summary.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Summary, RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.to_path_buf(), source })?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut writer = Writer { dir: out_dir, written: Vec::new() };
    let checks = match &config.parameters {
        Parameters::Particle(p) => particle(config, p, &mut rng, &mut writer)?,
        Parameters::Qm(p) => quantum(config, p, &mut rng, &mut writer)?,
        Parameters::Kg(p) => field(config, p, &mut writer)?,
    };
    let mut artifacts = writer.written.clone();
    artifacts.push("summary.json".into());
    let summary = Summary { model: config.model.name().to_string(), seed: config.seed, checks, artifacts };
    writer.write("summary.json", &(summary.to_json() + "\n"))?;
    Ok(summary)
}

fn particle(config: &ExperimentConfig, p: &ParticleParams, rng: &mut ChaCha8Rng, out: &mut Writer) -> Result<Vec<Check>, RunError> {
    let (model, bc) = match config.model {
        ModelKind::Free => (ConfigurationModel::analytic(FreeParticle::new(p.n, p.mass))?, BoundaryData::new(p.half_width, p.points, &p.x_minus, &p.x_plus)?),
        ModelKind::Harmonic => (
            ConfigurationModel::analytic(HarmonicOscillator::new(p.n, p.mass, p.omega))?,
            BoundaryData::new(p.half_width, p.points, &p.x_minus, &p.x_plus)?,
        ),
        _ => {
            let (xm, _) = great_circle(p.tilt, -p.half_width);
            let (xp, _) = great_circle(p.tilt, p.half_width);
            (ConfigurationModel::analytic(SphereGeodesic { mass: p.mass })?, BoundaryData::new(p.half_width, p.points, xm.as_slice(), xp.as_slice())?)
        }
    };
    let traj = solve_bvp(&model, &bc)?;
    let ctx = BracketContext::new(&model, &traj)?;
    let g = *traj.grid();
    let mut checks = vec![Check::at_most("el_residual", SOLUTION_THRESHOLD, ctx.solution_residual())];
    let basis = ctx.basis()?;
    checks.push(Check::at_most("wronskian_drift", 1e-6, basis.pairing_drift));
    let kernel = ctx.kernel()?;
    checks.push(Check::at_most("kernel_antisymmetry", 1e-8, kernel.antisymmetry_defect()));

    let closed_form: Option<(f64, Box<dyn Fn(f64) -> f64>)> = match config.model {
        ModelKind::Free => {
            let m = p.mass;
            Some((1e-8, Box::new(move |d| d / m)))
        }
        ModelKind::Harmonic => {
            let (m, w) = (p.mass, p.omega);
            Some((1e-6, Box::new(move |d| (w * d).sin() / (m * w))))
        }
        _ => None,
    };
    if let Some((tol, f)) = closed_form {
        let mut worst = 0.0f64;
        for i in 0..g.len() {
            for j in 0..g.len() {
                for mu in 0..p.n {
                    for nu in 0..p.n {
                        let want = if mu == nu { f(g.s(i) - g.s(j)) } else { 0.0 };
                        worst = worst.max((kernel.get(i, mu, j, nu) - want).abs());
                    }
                }
            }
        }
        checks.push(Check::at_most("kernel_closed_form", tol, worst));
    } else {
        checks.push(Check::at_most("covariant_jacobi", 1e-3, covariant_jacobi_check(&model, &traj, traj.velocities())?));
    }

    let pairs = random_pairs(rng, config.pairs, p.n, p.half_width)?;
    let mut bracket_csv = Csv::new(&["a", "b", "route", "value"]);
    let (mut spread, mut routes_dev, mut antisym) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in &pairs {
        let r = bracket_routes(&ctx, a, b)?;
        spread = spread.max(r.omega_spread());
        routes_dev = routes_dev.max(r.route_deviation());
        antisym = antisym.max(relative_deviation(r.integral, -r.integral_reversed));
        let mut rows = vec![("integral", r.integral), ("omega", r.omega)];
        rows.extend(r.bivector.map(|v| ("bivector", v)));
        for (route, v) in rows {
            bracket_csv.row(&[a.label().to_string(), b.label().to_string(), route.to_string(), format_float(v)]);
        }
    }
    if !pairs.is_empty() {
        checks.push(Check::at_most("omega_conservation", 1e-6, spread));
        checks.push(Check::at_most("route_equivalence", 1e-6, routes_dev));
        checks.push(Check::at_most("integral_antisymmetry", 1e-6, antisym));
    }

    for o in &config.outputs {
        match o {
            Output::Trajectory => {
                let mut header = vec!["s".to_string()];
                header.extend((0..p.n).map(|k| format!("x{k}")));
                header.extend((0..p.n).map(|k| format!("v{k}")));
                let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
                for i in 0..g.len() {
                    let mut row = vec![format_float(g.s(i))];
                    row.extend(traj.x(i).iter().chain(traj.v(i).iter()).map(|v| format_float(*v)));
                    csv.row(&row);
                }
                out.write("trajectory.csv", &csv.text)?;
            }
            Output::Kernel => {
                let mut csv = Csv::new(&["s", "s_prime", "mu", "nu", "value"]);
                for i in 0..g.len() {
                    for j in 0..g.len() {
                        for mu in 0..p.n {
                            for nu in 0..p.n {
                                csv.row(&[format_float(g.s(i)), format_float(g.s(j)), mu.to_string(), nu.to_string(), format_float(kernel.get(i, mu, j, nu))]);
                            }
                        }
                    }
                }
                out.write("kernel.csv", &csv.text)?;
            }
            Output::Brackets => out.write("brackets.csv", &bracket_csv.text)?,
            Output::Commutator => {}
        }
    }
    Ok(checks)
}

/// Reads `d` rows of `2d` numbers, `re im` pairs.
fn read_hamiltonian(path: &Path, d: usize) -> Result<DMatrix<C64>, ConfigError> {
    let bad = |message: String| ConfigError { line: None, key: Some("hamiltonian".into()), message };
    let text = fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    if rows.len() != d {
        return Err(bad(format!("{} has {} rows, expected {d}", path.display(), rows.len())));
    }
    let mut h = DMatrix::zeros(d, d);
    for (r, row) in rows.iter().enumerate() {
        let nums = row
            .split_whitespace()
            .map(|t| t.parse::<f64>().ok())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(format!("row {} of {} is not numeric", r + 1, path.display())))?;
        if nums.len() != 2 * d {
            return Err(bad(format!("row {} of {} has {} numbers, expected {}", r + 1, path.display(), nums.len(), 2 * d)));
        }
        for c in 0..d {
            h[(r, c)] = Complex::new(nums[2 * c], nums[2 * c + 1]);
        }
    }
    Ok(h)
}

fn quantum(config: &ExperimentConfig, p: &QmParams, rng: &mut ChaCha8Rng, out: &mut Writer) -> Result<Vec<Check>, RunError> {
    let d = p.d;
    let hamiltonian = match &p.hamiltonian {
        HamiltonianSource::Zero => DMatrix::zeros(d, d),
        HamiltonianSource::Random => random_hermitian(d, rng),
        HamiltonianSource::File(path) => read_hamiltonian(path, d)?,
    };
    let free = matches!(p.hamiltonian, HamiltonianSource::Zero);
    let q0 = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
    let p0 = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
    let model = HilbertModel::new(hamiltonian, q0, p0)?;
    let pipeline = QmPipeline::new(&model, p.half_width, p.points, FlowOptions::default())?;
    let grid = *pipeline.context().trajectory().grid();

    let mut csv = Csv::new(&["a", "b", "route", "value"]);
    let (mut formula_dev, mut heis_dev, mut imag) = (0.0f64, 0.0f64, 0.0f64);
    let window = |rng: &mut ChaCha8Rng| {
        Window::unit_gaussian(rng.gen_range(-0.15..0.15) * p.half_width, rng.gen_range(0.06..0.1) * p.half_width)
    };
    for k in 0..config.pairs {
        let a = QuadraticFunctional::new(format!("A{k}"), random_hermitian(d, rng), window(rng))?;
        let b = QuadraticFunctional::new(format!("B{k}"), random_hermitian(d, rng), window(rng))?;
        let value = pipeline.bracket(&a, &b)?;
        let heis = heisenberg_bracket(&model, &a, &b, &grid)?;
        heis_dev = heis_dev.max((value - heis.value).abs() / (1.0 + heis.value.abs()));
        imag = imag.max(heis.imaginary_residual);
        let mut rows = vec![("pipeline", value), ("heisenberg", heis.value)];
        if free {
            let f = free_commutator_bracket(&model, &a.operator, &b.operator)?;
            formula_dev = formula_dev.max((value - f).abs());
            rows.push(("formula", f));
        }
        for (route, v) in rows {
            csv.row(&[a.label.clone(), b.label.clone(), route.to_string(), format_float(v)]);
        }
    }
    let mut checks = vec![Check::at_most("unitarity_drift", 1e-10, unitarity_drift(&model, &grid))];
    if config.pairs > 0 {
        checks.push(Check::at_most("heisenberg_route", 1e-7, heis_dev));
        checks.push(Check::at_most("heisenberg_realness", 1e-10, imag));
        if free {
            checks.push(Check::at_most("commutator_formula", 1e-8, formula_dev));
        }
    }
    if free {
        checks.push(Check::at_most("canonical_bivector", 1e-8, canonical_bivector_check(&model, p.half_width, p.points)?));
    }
    if config.outputs.contains(&Output::Brackets) {
        out.write("brackets.csv", &csv.text)?;
    }
    Ok(checks)
}

fn field(config: &ExperimentConfig, p: &KgParams, out: &mut Writer) -> Result<Vec<Check>, RunError> {
    let spec = LatticeSpec::new(p.d, p.length, p.sites, p.mass)?;
    let origin = SpacetimePoint { site: 0, time: 0.3 };
    let (mut zero, mut delta) = (0.0f64, 0.0f64);
    for site in 0..spec.site_count() {
        let x = SpacetimePoint { site, time: origin.time };
        zero = zero.max(kg_commutator(&spec, x, origin)?.abs());
        let want = if site == 0 { 1.0 / spec.cell_volume() } else { 0.0 };
        delta = delta.max((kg_commutator_time_derivative(&spec, x, origin)? - want).abs());
    }
    let mut route = 0.0f64;
    let dtau = 0.05;
    for (k, site) in (0..spec.site_count()).step_by((spec.site_count() / 7).max(1)).enumerate() {
        let x = SpacetimePoint { site, time: dtau * k as f64 };
        let y = SpacetimePoint { site: (site * 3 + 1) % spec.site_count(), time: -dtau * (k % 3) as f64 };
        let cell = spec.cell_volume() * dtau;
        let b = kg_peierls_bracket(&spec, &SpacetimeDensity::point(x, cell), &SpacetimeDensity::point(y, cell))?;
        route = route.max((b - kg_commutator(&spec, x, y)?).abs());
    }
    let mut checks = vec![
        Check::at_most("equal_time_commutator", 0.0, zero),
        Check::at_most("equal_time_delta", 1e-12, delta),
        Check::at_most("bracket_route", 1e-12, route),
    ];
    if p.d == 1 && p.sites % 8 == 0 {
        let prof = microcausality_profile(p.length, p.mass, p.length / 4.0, 1.0, &[p.sites / 2, p.sites])?;
        checks.push(Check::below("microcausality_decay", 1.0, prof[1].1 / prof[0].1));
    }
    if config.outputs.contains(&Output::Commutator) {
        let mut csv = Csv::new(&["dx", "dt", "value"]);
        let y = SpacetimePoint { site: 0, time: 0.0 };
        for t in 0..p.dt_steps {
            let dt = p.dt_max * t as f64 / (p.dt_steps - 1) as f64;
            for j in 0..p.sites {
                let site = spec.site_index([j, 0, 0]);
                let v = kg_commutator(&spec, SpacetimePoint { site, time: dt }, y)?;
                csv.row(&[format_float(spec.position(site)[0]), format_float(dt), format_float(v)]);
            }
        }
        out.write("commutator.csv", &csv.text)?;
    }
    Ok(checks)
}
