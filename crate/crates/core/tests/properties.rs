use nalgebra::{DMatrix, DVector};
use peierls::bracket::{bracket_bivector, bracket_integral, bracket_omega, BracketContext};
use peierls::flow::{FlowOptions, LinearizedFlow};
use peierls::functional::{PathFunctional, Window};
use peierls::green::{commutator_kernel, solve_basis};
use peierls::jacobi::{apply_operator, coefficients};
use peierls::kg::{kg_commutator, LatticeSpec, SpacetimePoint};
use peierls::model::ConfigurationModel;
use peierls::models::{HarmonicOscillator, MagneticPlane};
use peierls::solver::{solve_bvp, BoundaryData};
use peierls::trajectory::{Grid, Trajectory};
use proptest::prelude::*;
use std::sync::OnceLock;

fn magnetic() -> &'static BracketContext {
    static CTX: OnceLock<BracketContext> = OnceLock::new();
    CTX.get_or_init(|| {
        let model = ConfigurationModel::analytic(MagneticPlane { mass: 1.0, field: 0.6, spring: 0.8 }).unwrap();
        let traj = solve_bvp(&model, &BoundaryData::new(1.0, 201, &[0.2, -0.1], &[-0.3, 0.4]).unwrap()).unwrap();
        BracketContext::new(&model, &traj).unwrap()
    })
}

fn functional(label: &str, center: f64, width: f64, cx: [f64; 2], cv: [f64; 2]) -> PathFunctional {
    PathFunctional::linear(label, Window::bump(center, width), DVector::from_row_slice(&cx), DVector::from_row_slice(&cv)).unwrap()
}

fn coeffs() -> impl Strategy<Value = [f64; 2]> {
    prop::array::uniform2(-1.0f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn window_shift_moves_values(center in -0.5f64..0.5, width in 0.05f64..0.4, c in -0.3f64..0.3, s in -1.0f64..1.0) {
        for w in [Window::bump(center, width), Window::gaussian(center, width / 8.0)] {
            prop_assert!((w.shifted(c).value(s + c) - w.value(s)).abs() <= 1e-12);
        }
    }

    #[test]
    fn jacobi_operator_is_linear(omega in 0.2f64..2.0, a in -3.0f64..3.0, b in -3.0f64..3.0, p in coeffs(), q in coeffs()) {
        let model = ConfigurationModel::analytic(HarmonicOscillator::new(1, 1.0, omega)).unwrap();
        let traj = Trajectory::from_fn(Grid::new(1.0, 51).unwrap(), |_| (DVector::zeros(1), DVector::zeros(1))).unwrap();
        let c = coefficients(&model, &traj).unwrap();
        let times = traj.grid().times();
        let field = |k: [f64; 2]| -> Vec<DVector<f64>> { times.iter().map(|s| DVector::from_element(1, k[0] * s.sin() + k[1] * s * s)).collect() };
        let (f, g) = (field(p), field(q));
        let mix: Vec<_> = f.iter().zip(&g).map(|(x, y)| x * a + y * b).collect();
        let (lf, lg, lm) = (apply_operator(&c, &f).unwrap(), apply_operator(&c, &g).unwrap(), apply_operator(&c, &mix).unwrap());
        for i in 0..lm.len() {
            prop_assert!((&lm[i] - (&lf[i] * a + &lg[i] * b)).amax() <= 1e-9 * (1.0 + lf[i].amax() + lg[i].amax()));
        }
    }

    #[test]
    fn kernel_is_antisymmetric(omega in 0.1f64..2.5, n in 1usize..3) {
        let model = ConfigurationModel::analytic(HarmonicOscillator::new(n, 1.0, omega)).unwrap();
        let traj = Trajectory::from_fn(Grid::new(1.0, 101).unwrap(), move |_| (DVector::zeros(n), DVector::zeros(n))).unwrap();
        let basis = solve_basis(&LinearizedFlow::new(&model, &traj, FlowOptions::default()).unwrap()).unwrap();
        prop_assert!(commutator_kernel(&basis).antisymmetry_defect() <= 1e-10);
    }

    #[test]
    fn brackets_are_antisymmetric(ca in -0.4f64..0.4, cb in -0.4f64..0.4, xa in coeffs(), va in coeffs(), xb in coeffs(), vb in coeffs()) {
        let ctx = magnetic();
        let a = functional("A", ca, 0.3, xa, va);
        let b = functional("B", cb, 0.3, xb, vb);
        let ab = bracket_integral(ctx, &a, &b).unwrap();
        let ba = bracket_integral(ctx, &b, &a).unwrap();
        // The integral route pairs two time-stepped responses, so its defect is
        // discretization-bound at N = 201 and shrinks under refinement.
        prop_assert!((ab + ba).abs() <= 1e-6 * ab.abs().max(1.0));
        prop_assert!((bracket_omega(ctx, &a, &b, 3).unwrap() + bracket_omega(ctx, &b, &a, 3).unwrap()).abs() <= 1e-10);
        prop_assert!((bracket_bivector(ctx, &a, &b).unwrap() + bracket_bivector(ctx, &b, &a).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn brackets_are_bilinear(al in -2.0f64..2.0, be in -2.0f64..2.0, x1 in coeffs(), x2 in coeffs(), xb in coeffs()) {
        let ctx = magnetic();
        let a1 = functional("A1", -0.2, 0.3, x1, [0.0, 0.0]);
        let a2 = functional("A2", 0.1, 0.4, x2, [0.3, 0.0]);
        let b = functional("B", 0.3, 0.3, xb, [0.0, -0.2]);
        let mix = PathFunctional::combine("mix", &[(al, &a1), (be, &a2)]).unwrap();
        let lhs = bracket_omega(ctx, &mix, &b, 100).unwrap();
        let rhs = al * bracket_omega(ctx, &a1, &b, 100).unwrap() + be * bracket_omega(ctx, &a2, &b, 100).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10);
    }

    #[test]
    fn quadratic_self_bracket_vanishes(q in prop::array::uniform4(-1.0f64..1.0)) {
        let m = DMatrix::from_row_slice(2, 2, &q);
        let sym = &m + m.transpose();
        let f = PathFunctional::quadratic("Q", Window::bump(0.0, 0.5), sym).unwrap();
        let ctx = magnetic();
        prop_assert!(bracket_integral(ctx, &f, &f).unwrap().abs() <= 1e-9);
        prop_assert!(bracket_omega(ctx, &f, &f, 50).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn lattice_commutator_is_odd(d in 1usize..3, mass in 0.3f64..2.0, x in 0usize..16, y in 0usize..16, tx in -1.0f64..1.0, ty in -1.0f64..1.0) {
        let spec = LatticeSpec::new(d, 3.0, 4, mass).unwrap();
        let (x, y) = (x % spec.site_count(), y % spec.site_count());
        let (p, q) = (SpacetimePoint { site: x, time: tx }, SpacetimePoint { site: y, time: ty });
        let g = kg_commutator(&spec, p, q).unwrap();
        prop_assert!((g + kg_commutator(&spec, q, p).unwrap()).abs() <= 1e-12);
        prop_assert_eq!(kg_commutator(&spec, p, SpacetimePoint { site: y, time: tx }).unwrap(), 0.0);
    }
}
