use membrane_homog::effective::Estimate;
use membrane_homog::fem::{assemble, pcg, BilinearFormSpec, Conductivity, Csr, DofMap, Load};
use membrane_homog::geometry::{Bump, DeformationMap, InterfaceSpec};
use membrane_homog::homogenize::{rate_fit, relative_variation};
use membrane_homog::mesh::{build_cell_mesh, read_mesh, tile_domain_mesh, write_mesh, MembraneRule};
use membrane_homog::verify::{backward_induction_bound, dense_solve, generate_instance};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn point() -> impl Strategy<Value = [f64; 2]> {
    [-3.0f64..3.0, -3.0f64..3.0]
}

proptest! {
    #[test]
    fn inverse_undoes_the_map(seed in any::<u64>(), a in 0.0f64..0.15, y in point()) {
        let map = DeformationMap::bernoulli(seed, a);
        let back = map.inverse(map.apply(y)).unwrap();
        prop_assert!((back[0] - y[0]).abs() < 1e-10 && (back[1] - y[1]).abs() < 1e-10);
    }

    #[test]
    fn lattice_shift_commutes_with_the_map(seed in any::<u64>(), k in [-50i64..50, -50i64..50], y in point()) {
        let map = DeformationMap::bernoulli(seed, 0.1);
        let lhs = map.shifted(k).apply(y);
        let moved = map.apply([y[0] + k[0] as f64, y[1] + k[1] as f64]);
        let rhs = [moved[0] - k[0] as f64, moved[1] - k[1] as f64];
        prop_assert!((lhs[0] - rhs[0]).abs() < 1e-12 && (lhs[1] - rhs[1]).abs() < 1e-12);
    }

    #[test]
    fn generated_induction_instances_satisfy_the_lemma(
        seed in any::<u64>(), n in 2usize..80, c in 0.2f64..10.0, c1 in 0.2f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = generate_instance(&mut rng, n, c, c1, 2);
        prop_assert!(inst.check_hypotheses().is_ok());
        let bound = backward_induction_bound(&inst).unwrap();
        prop_assert!(bound.worst_ratio <= bound.c_prime);
        prop_assert!(bound.c2 >= c * (1.0 - 1e-12));
    }

    #[test]
    fn rate_fit_recovers_power_laws(r in 0.1f64..3.0, a in 1e-3f64..10.0) {
        let eps: [f64; 4] = [0.25, 0.125, 0.0625, 0.03125];
        let err: Vec<f64> = eps.iter().map(|e| a * e.powf(r)).collect();
        let fit = rate_fit(&eps, &err).unwrap();
        prop_assert!((fit.exponent - r).abs() < 1e-9);
        prop_assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn estimate_is_affine_equivariant(
        xs in prop::collection::vec(-10.0f64..10.0, 2..40), c in -5.0f64..5.0, b in -5.0f64..5.0,
    ) {
        let e = Estimate::from_samples(&xs);
        let ys: Vec<f64> = xs.iter().map(|x| c * x + b).collect();
        let f = Estimate::from_samples(&ys);
        prop_assert!((f.mean - (c * e.mean + b)).abs() < 1e-9);
        prop_assert!((f.stderr - c.abs() * e.stderr).abs() < 1e-9);
    }

    #[test]
    fn variation_is_a_scale_free_fraction(xs in prop::collection::vec(1e-3f64..1e3, 1..10), s in 1e-3f64..1e3) {
        let v = relative_variation(&xs);
        prop_assert!((0.0..1.0).contains(&v));
        let scaled: Vec<f64> = xs.iter().map(|x| s * x).collect();
        prop_assert!((relative_variation(&scaled) - v).abs() < 1e-12);
    }

    #[test]
    fn dense_oracle_agrees_with_cg(n in 2usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trips = Vec::new();
        for i in 0..n {
            for j in 0..i {
                let v: f64 = rand::Rng::gen_range(&mut rng, -1.0..1.0);
                trips.push((i, j, v));
                trips.push((j, i, v));
            }
            trips.push((i, i, n as f64 + 1.0));
        }
        let a = Csr::from_triplets(n, &trips);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sin()).collect();
        let dense = dense_solve(&a, &b).unwrap();
        let cg = pcg(&a, &b, None, 1e-13).unwrap();
        let scale = dense.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff = dense.iter().zip(&cg.x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-8 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stiffness_is_symmetric_and_nonnegative(
        gamma in 0.0f64..100.0, delta in 0.0f64..1.0, d in [0.5f64..3.0, 0.5f64..3.0], off in -0.4f64..0.4,
        v in prop::collection::vec(-1.0f64..1.0, 1..2000),
    ) {
        let cell = build_cell_mesh(&InterfaceSpec::default(), 0.2).unwrap();
        let spec = BilinearFormSpec {
            conductivity: Conductivity::Constant([[d[0], off], [off, d[1]]]),
            gamma,
            delta,
        };
        let dofs = DofMap::identity(cell.mesh.num_nodes());
        let (k, _) = assemble(&cell.mesh, &spec, Load::corrector([0.0, 0.0]), &dofs).unwrap();
        prop_assert!(k.asymmetry() < 1e-12);
        let x: Vec<f64> = (0..k.n).map(|i| v[i % v.len()]).collect();
        prop_assert!(k.quad_form(&x) >= -1e-12);
    }

    #[test]
    fn mesh_files_round_trip(seed in any::<u64>(), a in 0.0f64..0.15, k in 1usize..4) {
        let cell = build_cell_mesh(&InterfaceSpec::default(), 0.2).unwrap();
        let map = DeformationMap::bernoulli(seed, a);
        let mesh = tile_domain_mesh(&cell, &map, k, MembraneRule::All).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        prop_assert_eq!(read_mesh(buf.as_slice()).unwrap(), mesh);
    }

    #[test]
    fn bump_keeps_cell_volume(a in 0.0f64..0.15) {
        let map = DeformationMap::Bump(Bump::standard(a));
        let v = membrane_homog::effective::cell_volume(&map, [0, 0]);
        prop_assert!((v - 1.0).abs() < 1e-9);
    }
}
