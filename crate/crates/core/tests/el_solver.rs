use nalgebra::DVector;
use peierls::functional::el_residual;
use peierls::model::{ConfigurationModel, Lagrangian};
use peierls::models::{great_circle, FreeParticle, HarmonicOscillator, SphereGeodesic};
use peierls::solver::{solve_bvp, solve_ivp, BoundaryData};
use peierls::trajectory::interior_max_norm;
use peierls::Error;
use std::f64::consts::PI;

fn residual(model: &ConfigurationModel, x0: &[f64], v0: &[f64], points: usize) -> f64 {
    interior_max_norm(&el_residual(model, &solve_ivp(model, x0, v0, 1.0, points).unwrap()).unwrap())
}

#[test]
fn sphere_bvp_finds_the_great_circle_arc() {
    let model = ConfigurationModel::analytic(SphereGeodesic { mass: 1.0 }).unwrap();
    let (xm, _) = great_circle(0.5, -1.0);
    let (xp, _) = great_circle(0.5, 1.0);
    let bc = BoundaryData::new(1.0, 201, xm.as_slice(), xp.as_slice()).unwrap();
    let traj = solve_bvp(&model, &bc).unwrap();
    let end = traj.x(traj.len() - 1);
    assert!((end - &xp).norm() <= 1e-10 * (1.0 + xp.norm()));
    for i in 0..traj.len() {
        let (x, v) = great_circle(0.5, traj.grid().s(i));
        assert!((traj.x(i) - x).amax() < 1e-8);
        assert!((traj.v(i) - v).amax() < 1e-8);
    }
}

#[test]
fn residual_converges_at_second_order() {
    let free = ConfigurationModel::analytic(FreeParticle::new(2, 1.0)).unwrap();
    let harm = ConfigurationModel::analytic(HarmonicOscillator::new(1, 1.0, 2.0)).unwrap();
    let sphere = ConfigurationModel::analytic(SphereGeodesic { mass: 1.0 }).unwrap();
    // A straight line is resolved exactly at every resolution.
    assert!(residual(&free, &[0.1, 0.2], &[1.0, -0.5], 101) < 1e-12);
    for (model, x0, v0) in [(&harm, vec![0.3], vec![1.0]), (&sphere, vec![1.2, 0.0], vec![0.4, 0.9])] {
        let coarse = residual(model, &x0, &v0, 101);
        let fine = residual(model, &x0, &v0, 201);
        assert!(coarse / fine >= 3.6, "{}: {coarse:e} / {fine:e}", model.name());
    }
}

#[test]
fn bvp_and_ivp_agree() {
    let sphere = ConfigurationModel::analytic(SphereGeodesic { mass: 1.0 }).unwrap();
    let harm = ConfigurationModel::analytic(HarmonicOscillator::new(2, 1.0, 1.1)).unwrap();
    for (model, xm, xp) in [(&sphere, vec![1.0, 0.2], vec![1.6, 1.1]), (&harm, vec![0.5, -0.2], vec![-0.3, 0.8])] {
        let traj = solve_bvp(model, &BoundaryData::new(1.0, 401, &xm, &xp).unwrap()).unwrap();
        let rerun = solve_ivp(model, traj.x(0).as_slice(), traj.v(0).as_slice(), 1.0, 401).unwrap();
        assert!((rerun.x(400) - DVector::from_vec(xp.clone())).amax() < 1e-9, "{}", model.name());
    }
}

#[test]
fn conjugate_endpoints_are_detected() {
    let harm = ConfigurationModel::analytic(HarmonicOscillator::unit()).unwrap();
    for half in [PI / 2.0, PI] {
        let err = solve_bvp(&harm, &BoundaryData::new(half, 201, &[0.0], &[0.0]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ConjugatePoint { .. }), "{half}: {err:?}");
    }
    assert!(solve_bvp(&harm, &BoundaryData::new(1.4, 201, &[0.0], &[0.0]).unwrap()).is_ok());
}

#[test]
fn runaway_solution_is_reported() {
    #[derive(Debug)]
    struct Runaway;
    impl Lagrangian for Runaway {
        fn name(&self) -> &str {
            "runaway"
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _s: f64, x: &[f64], v: &[f64]) -> f64 {
            0.5 * v[0] * v[0] + 0.25 * x[0].powi(4)
        }
    }
    let model = ConfigurationModel::finite_difference(Runaway);
    let err = solve_ivp(&model, &[10.0], &[10.0], 1.0, 201).unwrap_err();
    assert!(matches!(err, Error::BlowUp { .. }), "{err:?}");
}

#[test]
fn degenerate_lagrangian_is_refused() {
    #[derive(Debug)]
    struct Linear;
    impl Lagrangian for Linear {
        fn name(&self) -> &str {
            "linear"
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _s: f64, x: &[f64], v: &[f64]) -> f64 {
            x[0] * v[0] - 0.5 * x[0] * x[0]
        }
    }
    let model = ConfigurationModel::finite_difference(Linear);
    assert!(matches!(solve_ivp(&model, &[1.0], &[0.0], 1.0, 21), Err(Error::SingularLvv { .. })));
}
