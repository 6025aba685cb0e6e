//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use peierls::bracket::{bracket_bivector, bracket_omega, bracket_routes, jacobi_identity_residual, BracketContext};
use peierls::corpus::{random_functional, random_pairs};
use peierls::flow::{FlowOptions, LinearizedFlow};
use peierls::functional::{el_residual, PathFunctional, Window};
use peierls::green::{commutator_kernel, solve_basis};
use peierls::jacobi::{apply_operator, coefficients, covariant_comparison};
use peierls::kg::{
    kg_commutator, kg_commutator_time_derivative, kg_peierls_bracket, microcausality_profile, LatticeSpec, SpacetimeDensity, SpacetimePoint,
};
use peierls::model::ConfigurationModel;
use peierls::models::{great_circle, FreeParticle, HarmonicOscillator, SphereGeodesic};
use peierls::qm::{canonical_bivector_check, free_commutator_bracket, random_hermitian, HilbertModel, QmPipeline, QuadraticFunctional};
use peierls::solver::{solve_bvp, solve_ivp, BoundaryData};
use peierls::trajectory::{interior_max_norm, Grid, Trajectory};
use peierls::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One measured quantity of a criterion.
struct Measure {
    what: String,
    value: f64,
    pass: bool,
}

fn at_most(what: &str, value: f64, tol: f64) -> Measure {
    Measure { what: format!("{what} {value:.3e} <= {tol:.0e}"), value, pass: value <= tol }
}

fn at_least(what: &str, value: f64, bound: f64) -> Measure {
    Measure { what: format!("{what} {value:.3} >= {bound}"), value, pass: value >= bound }
}

fn holds(what: &str, pass: bool) -> Measure {
    Measure { what: what.to_string(), value: if pass { 1.0 } else { 0.0 }, pass }
}

struct Criterion {
    number: usize,
    title: &'static str,
    budget: Duration,
    run: fn() -> Result<Vec<Measure>, Error>,
}

fn free(n: usize) -> ConfigurationModel {
    ConfigurationModel::analytic(FreeParticle::new(n, 1.0)).unwrap()
}

fn harmonic(n: usize, omega: f64) -> ConfigurationModel {
    ConfigurationModel::analytic(HarmonicOscillator::new(n, 1.0, omega)).unwrap()
}

fn context(model: &ConfigurationModel, xm: &[f64], xp: &[f64], points: usize) -> Result<BracketContext, Error> {
    let traj = solve_bvp(model, &BoundaryData::new(1.0, points, xm, xp)?)?;
    BracketContext::new(model, &traj)
}

/// Largest `|G(s_i, s_j) - exact(s_i - s_j)|` over all grid pairs, n = 1.
fn kernel_error(model: &ConfigurationModel, points: usize, options: FlowOptions, exact: impl Fn(f64) -> f64) -> Result<f64, Error> {
    let traj = solve_bvp(model, &BoundaryData::new(1.0, points, &[0.0], &[1.0])?)?;
    let flow = LinearizedFlow::new(model, &traj, options)?;
    let kernel = commutator_kernel(&solve_basis(&flow)?);
    let g = traj.grid();
    let mut worst = 0.0f64;
    for i in 0..points {
        for j in 0..points {
            worst = worst.max((kernel.get(i, 0, j, 0) - exact(g.s(i) - g.s(j))).abs());
        }
    }
    Ok(worst)
}

fn flat_kernel() -> Result<Vec<Measure>, Error> {
    Ok(vec![at_most("max|G - (s - s')|", kernel_error(&free(1), 201, FlowOptions::default(), |d| d)?, 1e-8)])
}

fn corpus_contexts() -> Result<Vec<(&'static str, BracketContext)>, Error> {
    Ok(vec![
        ("free", context(&free(2), &[0.1, -0.3], &[0.7, 0.2], 201)?),
        ("harmonic", context(&harmonic(2, 1.0), &[0.1, -0.3], &[0.7, 0.2], 201)?),
    ])
}

fn conservation() -> Result<Vec<Measure>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for (name, ctx) in corpus_contexts()? {
        let mut worst = 0.0f64;
        for (a, b) in random_pairs(&mut rng, 50, 2, 1.0)? {
            worst = worst.max(bracket_routes(&ctx, &a, &b)?.omega_spread());
        }
        out.push(at_most(&format!("{name}: slice spread"), worst, 1e-6));
    }
    Ok(out)
}

fn three_routes() -> Result<Vec<Measure>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for (name, ctx) in corpus_contexts()? {
        let mut worst = 0.0f64;
        for (a, b) in random_pairs(&mut rng, 50, 2, 1.0)? {
            let r = bracket_routes(&ctx, &a, &b)?;
            if r.bivector.is_none() {
                return Ok(vec![holds(&format!("{name}: bivector route unavailable"), false)]);
            }
            worst = worst.max(r.route_deviation());
        }
        out.push(at_most(&format!("{name}: route deviation"), worst, 1e-6));
    }
    Ok(out)
}

fn qm_commutator() -> Result<Vec<Measure>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let q0 = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
    let p0 = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
    let model = HilbertModel::free(q0, p0)?;
    let pipeline = QmPipeline::new(&model, 1.0, 201, FlowOptions::default())?;
    let mut worst = 0.0f64;
    for k in 0..20 {
        let (a, b) = (random_hermitian(4, &mut rng), random_hermitian(4, &mut rng));
        let formula = free_commutator_bracket(&model, &a, &b)?;
        let fa = QuadraticFunctional::new(format!("A{k}"), a, Window::unit_gaussian(rng.gen_range(-0.3..0.3), 0.08))?;
        let fb = QuadraticFunctional::new(format!("B{k}"), b, Window::unit_gaussian(rng.gen_range(-0.3..0.3), 0.08))?;
        worst = worst.max((pipeline.bracket(&fa, &fb)? - formula).abs());
    }
    Ok(vec![
        at_most("pipeline - commutator formula", worst, 1e-8),
        at_most("canonical bivector deviation", canonical_bivector_check(&model, 1.0, 201)?, 1e-8),
    ])
}

fn kg_causality() -> Result<Vec<Measure>, Error> {
    let spec = LatticeSpec::new(1, 2.0 * PI, 64, 1.0)?;
    let pt = |site: usize, time: f64| SpacetimePoint { site, time };
    let mut equal_time = 0.0f64;
    let mut delta = 0.0f64;
    let mut bracket = 0.0f64;
    let cell = spec.cell_volume() * 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for x in 0..64 {
        for y in 0..64 {
            equal_time = equal_time.max(kg_commutator(&spec, pt(x, 0.7), pt(y, 0.7))?.abs());
            let want = if x == y { 1.0 / spec.cell_volume() } else { 0.0 };
            delta = delta.max((kg_commutator_time_derivative(&spec, pt(x, 0.7), pt(y, 0.7))? - want).abs());
        }
        let (a, b) = (pt(x, rng.gen_range(-2.0..2.0)), pt(rng.gen_range(0..64), rng.gen_range(-2.0..2.0)));
        let g = kg_commutator(&spec, a, b)?;
        bracket = bracket.max((kg_peierls_bracket(&spec, &SpacetimeDensity::point(a, cell), &SpacetimeDensity::point(b, cell))? - g).abs());
    }
    let length = 2.0 * PI;
    let profile = microcausality_profile(length, 1.0, length / 4.0, 1.0, &[32, 64, 128])?;
    let monotone = profile.windows(2).all(|w| w[1].1 < w[0].1);
    let shown: Vec<String> = profile.iter().map(|(m, g)| format!("M={m}: {g:.2e}")).collect();
    Ok(vec![
        holds(&format!("equal-time G max {equal_time:e} == 0"), equal_time == 0.0),
        at_most("equal-time dG/dt - lattice delta", delta, 1e-12),
        at_most("point bracket - G", bracket, 1e-12),
        holds(&format!("spacelike |G| decreasing ({})", shown.join(", ")), monotone),
    ])
}

fn curvature() -> Result<Vec<Measure>, Error> {
    let model = ConfigurationModel::analytic(SphereGeodesic { mass: 1.0 })?;
    let tilted = Trajectory::from_fn(Grid::new(1.0, 4001)?, |s| great_circle(0.7, s))?;
    let field: Vec<DVector<f64>> =
        tilted.grid().times().iter().map(|s| DVector::from_vec(vec![0.3 * (2.0 * s).sin() + 0.1, 0.5 * s.cos() - 0.2 * s])).collect();
    let generic = covariant_comparison(&model, &tilted, &field)?.max_deviation;

    let equator = Trajectory::from_fn(Grid::new(1.0, 4001)?, |s| great_circle(0.0, s))?;
    let normal: Vec<DVector<f64>> = equator.grid().times().iter().map(|s| DVector::from_vec(vec![s.sin(), 0.0])).collect();
    let lj = apply_operator(&coefficients(&model, &equator)?, &normal)?;
    Ok(vec![at_most("operator - covariant form", generic, 1e-3), at_most("L[sin(s) n]", interior_max_norm(&lj), 1e-3)])
}

/// Pairs of velocity densities with overlapping supports, the hardest case
/// for antisymmetry of the integral route.
fn overlapping_pairs<R: Rng>(rng: &mut R, count: usize) -> Result<Vec<(PathFunctional, PathFunctional)>, Error> {
    (0..count)
        .map(|k| {
            let c = rng.gen_range(-0.3..0.3);
            let v = |rng: &mut R| DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let a = PathFunctional::linear(format!("U{k}"), Window::bump(c, 0.3), v(rng), v(rng))?;
            let b = PathFunctional::linear(format!("V{k}"), Window::bump(c + rng.gen_range(-0.1..0.1), 0.3), v(rng), v(rng))?;
            Ok((a, b))
        })
        .collect()
}

fn properties() -> Result<Vec<Measure>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    let mut antisym = 0.0f64;
    let mut antisym_integral = 0.0f64;
    let mut bilinear = 0.0f64;
    let contexts = vec![
        ("free", context(&free(2), &[0.1, -0.3], &[0.7, 0.2], 401)?),
        ("harmonic", context(&harmonic(2, 1.0), &[0.1, -0.3], &[0.7, 0.2], 401)?),
    ];
    for (name, ctx) in contexts {
        for (a, b) in overlapping_pairs(&mut rng, 10)? {
            let r = bracket_routes(&ctx, &a, &b)?;
            antisym_integral = antisym_integral.max((r.integral + r.integral_reversed).abs() / r.integral.abs().max(1.0));
            antisym = antisym.max((bracket_omega(&ctx, &a, &b, 200)? + bracket_omega(&ctx, &b, &a, 200)?).abs());
        }
        for k in 0..10 {
            let a = random_functional(&mut rng, &format!("A{k}"), 2, 1.0)?;
            let b = random_functional(&mut rng, &format!("B{k}"), 2, 1.0)?;
            let c = random_functional(&mut rng, &format!("C{k}"), 2, 1.0)?;
            for i in [0, 200, 400] {
                antisym = antisym.max((bracket_omega(&ctx, &a, &b, i)? + bracket_omega(&ctx, &b, &a, i)?).abs());
            }
            antisym = antisym.max((bracket_bivector(&ctx, &a, &b)? + bracket_bivector(&ctx, &b, &a)?).abs());
            let r = bracket_routes(&ctx, &a, &b)?;
            antisym_integral = antisym_integral.max((r.integral + r.integral_reversed).abs() / r.integral.abs().max(1.0));
            let (al, be) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mix = PathFunctional::combine("mix", &[(al, &a), (be, &c)])?;
            let lhs = bracket_omega(&ctx, &mix, &b, 200)?;
            bilinear = bilinear.max((lhs - al * bracket_omega(&ctx, &a, &b, 200)? - be * bracket_omega(&ctx, &c, &b, 200)?).abs());
            let lhs = bracket_bivector(&ctx, &mix, &b)?;
            bilinear = bilinear.max((lhs - al * bracket_bivector(&ctx, &a, &b)? - be * bracket_bivector(&ctx, &c, &b)?).abs());
        }
        let q = |rng: &mut ChaCha8Rng, label: &str| -> Result<PathFunctional, Error> {
            let m = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            PathFunctional::quadratic(label, Window::gaussian(rng.gen_range(-0.3..0.3), rng.gen_range(0.06..0.1)), &m + m.transpose())
        };
        let (a, b, c) = (q(&mut rng, "P")?, q(&mut rng, "Q")?, q(&mut rng, "R")?);
        let r = jacobi_identity_residual(&ctx, &a, &b, &c)?;
        out.push(at_most(&format!("{name}: Jacobi identity residual"), r, 1e-4));
    }
    out.insert(0, at_most("antisymmetry (omega, bivector)", antisym, 1e-10));
    out.insert(1, at_most("antisymmetry (integral, relative)", antisym_integral, 1e-10));
    out.insert(2, at_most("bilinearity", bilinear, 1e-10));

    let oscillator = harmonic(1, 1.0);
    let bvp = solve_bvp(&oscillator, &BoundaryData::new(PI, 201, &[0.0], &[0.0])?);
    out.push(holds("conjugate point at T = pi", matches!(bvp, Err(Error::ConjugatePoint { .. }))));
    Ok(out)
}

/// `log2(e(N) / e(2N - 1))` for consecutive entries.
fn orders(errors: &[f64]) -> f64 {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min)
}

fn convergence() -> Result<Vec<Measure>, Error> {
    let mut out = Vec::new();
    let sizes = [51, 101, 201];

    // Residual of x = sin(s) under the free Lagrangian is x'' = -sin(s).
    let mut free_res = Vec::new();
    for &n in &sizes {
        let grid = Grid::new(1.0, n)?;
        let path = Trajectory::from_positions(grid, grid.times().iter().map(|s| DVector::from_element(1, s.sin())).collect())?;
        let r = el_residual(&free(1), &path)?;
        free_res.push(r[1..n - 1].iter().zip(&grid.times()[1..n - 1]).map(|(v, s)| (v[0] + s.sin()).abs()).fold(0.0, f64::max));
    }
    out.push(at_least("free el_residual order", orders(&free_res), 1.9));

    let osc = harmonic(1, 2.0);
    let mut harm_res = Vec::new();
    for &n in &sizes {
        harm_res.push(interior_max_norm(&el_residual(&osc, &solve_ivp(&osc, &[0.3], &[1.0], 1.0, n)?)?));
    }
    out.push(at_least("harmonic el_residual order", orders(&harm_res), 1.9));

    // The free kernel is linear in s and is reproduced exactly at every resolution.
    let coarse = FlowOptions { substeps: 1 };
    let mut free_kernel = 0.0f64;
    for n in [11, 21, 41] {
        free_kernel = free_kernel.max(kernel_error(&free(1), n, coarse, |d| d)?);
    }
    out.push(at_most("free kernel error at N = 11, 21, 41 (exact)", free_kernel, 1e-12));

    let osc = harmonic(1, 1.0);
    let mut harm_kernel = Vec::new();
    for n in [11, 21, 41] {
        harm_kernel.push(kernel_error(&osc, n, coarse, f64::sin)?);
    }
    out.push(at_least("harmonic kernel order", orders(&harm_kernel), 1.9));
    Ok(out)
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { number: 1, title: "flat causal kernel", budget: Duration::from_secs(1), run: flat_kernel },
        Criterion { number: 2, title: "conservation", budget: Duration::from_secs(10), run: conservation },
        Criterion { number: 3, title: "three-route equality", budget: Duration::from_secs(10), run: three_routes },
        Criterion { number: 4, title: "QM commutator formula", budget: Duration::from_secs(5), run: qm_commutator },
        Criterion { number: 5, title: "KG microcausality and delta", budget: Duration::from_secs(30), run: kg_causality },
        Criterion { number: 6, title: "sphere curvature check", budget: Duration::from_secs(5), run: curvature },
        Criterion { number: 7, title: "property suite", budget: Duration::from_secs(30), run: properties },
        Criterion { number: 8, title: "convergence orders", budget: Duration::from_secs(30), run: convergence },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(measures) => {
                let ok = measures.iter().all(|m| m.pass && m.value.is_finite());
                let text: Vec<String> = measures.iter().map(|m| format!("{}{}", if m.pass { "" } else { "[FAIL] " }, m.what)).collect();
                (ok, text.join("; "))
            }
            Err(e) => (false, format!("error in {}: {e}", e.module())),
        };
        let in_time = elapsed <= c.budget;
        let pass = pass && in_time;
        println!(
            "{} criterion {}: {}: {}; time {:.2}s (budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            c.number,
            c.title,
            detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
        if !pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
