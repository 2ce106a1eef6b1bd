use proptest::prelude::*;

use helmhj::helmholtz::{best_approximation_error, decompose, random_trig_probes};
use helmhj::kg::{self, PhysicalConstants};
use helmhj::report::{ConvergenceTable, Level};
use helmhj::{ops, Axis, Grid, ScalarField, SolverConfig, VectorField};

fn grid2(nx: usize, ny: usize, lx: f64, ly: f64) -> Grid {
    Grid::new(vec![Axis::new(-lx, lx, nx), Axis::new(0.0, ly, ny)]).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quadratics_are_differentiated_exactly(
        c in prop::array::uniform6(-3.0f64..3.0),
        nx in 5usize..12, ny in 5usize..12,
        lx in 0.5f64..3.0, ly in 0.5f64..3.0,
    ) {
        let g = grid2(nx, ny, lx, ly);
        let s = ScalarField::from_fn(&g, |p| {
            c[0] + c[1] * p[0] + c[2] * p[1] + c[3] * p[0] * p[0] + c[4] * p[0] * p[1] + c[5] * p[1] * p[1]
        });
        let grad = ops::gradient(&s).unwrap();
        let gx: Vec<f64> = (0..g.len()).map(|n| {
            let p = g.point(n);
            c[1] + 2.0 * c[3] * p[0] + c[4] * p[1]
        }).collect();
        prop_assert!(close(&grad.components[0], &gx, 1e-9));
        let lap = ops::laplacian(&s).unwrap();
        prop_assert!(lap.values.iter().all(|v| (v - 2.0 * (c[3] + c[5])).abs() <= 1e-8));
    }

    #[test]
    fn central_divergence_of_curl_vanishes_inside(seed in 0u64..1000) {
        let g = Grid::cube(3, -1.0, 1.0, 11).unwrap();
        let probes = random_trig_probes(&g, 3, seed);
        let v = VectorField::from_scalars(&probes).unwrap();
        let d = ops::divergence(&ops::curl(&v).unwrap()).unwrap();
        for n in 0..g.len() {
            let idx = g.multi_index(n);
            if idx[..3].iter().all(|&i| (2..9).contains(&i)) {
                prop_assert!(d.values[n].abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn decomposition_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
        let g = Grid::cube(2, -1.0, 1.0, 17).unwrap();
        let p = random_trig_probes(&g, 4, seed);
        let f1 = VectorField::from_scalars(&p[..2]).unwrap();
        let f2 = VectorField::from_scalars(&p[2..]).unwrap();
        let cfg = SolverConfig::with_tolerance(1e-12);
        let sum = f1.scale(a).add(&f2.scale(b)).unwrap();
        let (d1, d2, ds) = (decompose(&f1, &cfg).unwrap(), decompose(&f2, &cfg).unwrap(), decompose(&sum, &cfg).unwrap());
        let scale = 1.0 + a.abs() + b.abs();
        let combo: Vec<f64> = d1.t.components[0].iter().zip(&d2.t.components[0]).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(close(&ds.t.components[0], &combo, 1e-7 * scale));
        prop_assert!(ds.diagnostics.reconstruction_error <= 1e-12);
    }

    #[test]
    fn potential_minimises_the_misfit(seed in 0u64..1000, eps in prop_oneof![-1e-1f64..-1e-2, 1e-2f64..1e-1]) {
        let g = Grid::cube(2, -1.0, 1.0, 17).unwrap();
        let p = random_trig_probes(&g, 3, seed);
        let f = VectorField::from_scalars(&p[..2]).unwrap();
        let dec = decompose(&f, &SolverConfig::with_tolerance(1e-12)).unwrap();
        prop_assume!(ops::gradient(&p[2]).unwrap().max_abs() > 1e-3);
        let j0 = best_approximation_error(&f, &dec.phi).unwrap();
        let moved = dec.phi.zip_with(&p[2], |x, y| x + eps * y).unwrap();
        prop_assert!(best_approximation_error(&f, &moved).unwrap() > j0);
    }

    #[test]
    fn plane_waves_satisfy_every_residual(k in -2.0f64..2.0, m in 0.3f64..2.0, amp in 0.2f64..3.0) {
        let c = PhysicalConstants { m, ..Default::default() };
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 33), Axis::new(0.0, 2.0, 33)]).unwrap();
        let psi = kg::make_superposition(&[(amp, k)], &c, &g).unwrap();
        let mut st = kg::madelung(&psi, &c).unwrap();
        let sol = kg::solve_omega(&st).unwrap();
        st.set_omega(&sol).unwrap();
        prop_assert_eq!(st.mask_fraction(), 0.0);
        let tol = 1e-10 * amp * amp * (1.0 + m * m + k * k);
        prop_assert!(st.kg_residual().unwrap().max_abs() <= tol);
        prop_assert!(st.continuity_residual().unwrap().max_abs() <= tol);
        prop_assert!(st.normalization_residual().unwrap().max_abs() <= 1e-12 * (1.0 + m * m));
    }

    #[test]
    fn fitted_order_recovers_power_law(p in 0.5f64..4.0, c in 1e-3f64..1e3) {
        let levels = (0..4).map(|i| {
            let h = 0.5f64.powi(i);
            Level { h, error: c * h.powf(p) }
        }).collect();
        let t = ConvergenceTable::new("x", levels, 1e-300, Some([p - 0.01, p + 0.01]));
        prop_assert!((t.fitted_order.unwrap() - p).abs() <= 1e-9);
        prop_assert_eq!(t.pass, Some(true));
    }
}
