use dfalab::discrete_space::RandomKind;
use dfalab::geometry::{Point2, Rect, Tensor2};
use dfalab::mesh::{build_triangular_mesh, build_uniform_quad_mesh};
use dfalab::tpfa::{self, TpfaOptions};
use dfalab::{CellFunction, CrFunction, CrSpace, DiffusionProblem};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn h10_norm_is_a_norm(nx in 1usize..8, ny in 1usize..8, seed in any::<u64>(), alpha in -5.0f64..5.0) {
        let m = build_uniform_quad_mesh(nx, ny, Rect::new(0.0, 0.0, 1.0 + nx as f64 * 0.1, 1.0)).unwrap();
        let u = CellFunction::random_with(&m, seed, RandomKind::WhiteNoise);
        let v = CellFunction::random_with(&m, seed ^ 0x9e37, RandomKind::WhiteNoise);
        let n = u.norm_h10();
        prop_assert!((u.scaled(alpha).norm_h10() - alpha.abs() * n).abs() <= 1e-12 * (1.0 + n));
        prop_assert!(u.add(&v).norm_h10() <= n + v.norm_h10() + 1e-12);
        prop_assert!((u.norm_w1p(2.0).unwrap() - n).abs() <= 1e-12 * (1.0 + n));
    }

    #[test]
    fn gap_estimate_holds_for_any_cr_function(n in 1usize..10, seed in any::<u64>(), noise in any::<bool>()) {
        let m = build_triangular_mesh(n, n + 1, Rect::UNIT, false).unwrap();
        let s = CrSpace::new(&m).unwrap();
        let kind = if noise { RandomKind::WhiteNoise } else { RandomKind::Smooth };
        let u = CrFunction::random_with(&s, seed, kind);
        prop_assert!(u.lemma_estimates().gap_bound_holds());
        prop_assert!(u.edge_mean_defects().iter().all(|d| d.abs() < 1e-13));
    }

    #[test]
    fn transmissivities_respect_lower_bound(
        n in 2usize..10,
        a in proptest::collection::vec((0.5f64..50.0, 0.5f64..50.0), 100),
    ) {
        let m = build_uniform_quad_mesh(n, n, Rect::UNIT).unwrap();
        let tensors: Vec<Tensor2> = (0..m.num_cells()).map(|k| Tensor2::diag(a[k % 100].0, a[k % 100].1)).collect();
        let t = tpfa::transmissivities_from_cells(&m, &tensors, 0.5, 50.0, 1e-9).unwrap();
        prop_assert!(t.lower_bound_violations(&m).is_empty());
    }

    #[test]
    fn tpfa_energy_chain_on_random_sources(n in 2usize..12, seed in any::<u64>()) {
        let m = build_uniform_quad_mesh(n, n, Rect::UNIT).unwrap();
        let rhs = CellFunction::random_with(&m, seed, RandomKind::WhiteNoise);
        let sources: Vec<f64> = rhs.values().iter().zip(m.cell_measures()).map(|(f, a)| f * a).collect();
        let tensors = vec![Tensor2::diag(1.0, 3.0); m.num_cells()];
        let sol = tpfa::solve_cells(&m, &tensors, sources, 1.0, 3.0, &TpfaOptions::default()).unwrap();
        prop_assert!(sol.energy_chain().holds(1e-8));
        prop_assert!(sol.max_scaled_balance_residual() <= 1e-8);
        for (f, face) in m.faces().iter().enumerate() {
            if let Some(l) = face.neighbor {
                prop_assert_eq!(sol.flux(face.owner, f), -sol.flux(l, f));
            }
        }
    }
}

#[test]
fn cr_energy_chain_with_jump() {
    let m = build_triangular_mesh(12, 12, Rect::UNIT, false).unwrap();
    let s = CrSpace::new(&m).unwrap();
    let p = DiffusionProblem::new(
        "jump",
        Rect::UNIT,
        |p: Point2| if p.x < 0.5 { Tensor2::IDENTITY } else { Tensor2::scalar(100.0) },
        |p: Point2| 1.0 + p.y,
        1.0,
        100.0,
    );
    let sol = dfalab::cr_fem::solve_cr(&s, &p, &Default::default()).unwrap();
    assert!(sol.energy_chain().holds(1e-8));
}
