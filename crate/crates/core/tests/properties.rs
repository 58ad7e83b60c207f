use dgdual::extended::ExtReal;
use dgdual::fem;
use dgdual::functionals::{self, DiscreteProblem, JumpVariant, PenaltyParams, ProblemKind};
use dgdual::harness;
use dgdual::solvers::{self, ObstacleOptions, TvOptions};
use dgdual::vec2::Point;
use dgdual::{BoundaryTag, Mesh, Rect, SideSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(level: u32, neumann_right: bool) -> (Mesh, SideSet) {
    let mesh = Mesh::structured(Rect::centered_square(1.0), level).unwrap();
    let sides = if neumann_right {
        SideSet::build(&mesh, |x: Point, _| {
            if x[0] > 0.999 {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Dirichlet
            }
        })
        .unwrap()
    } else {
        SideSet::all_dirichlet(&mesh).unwrap()
    };
    (mesh, sides)
}

fn finite(e: ExtReal) -> f64 {
    e.finite().expect("finite energy")
}

fn kinds() -> impl Strategy<Value = ProblemKind> {
    prop_oneof![
        Just(ProblemKind::Poisson),
        Just(ProblemKind::Tv),
        Just(ProblemKind::Obstacle)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weak_duality_on_admissible_pairs(
        kind in kinds(),
        seed in any::<u64>(),
        level in 2u32..=3,
        neumann in any::<bool>(),
        gamma in 0.0f64..2.0,
        c_alpha in 0.2f64..2.0,
        full in any::<bool>(),
    ) {
        let (mesh, sides) = square(level, neumann);
        let mut params = PenaltyParams::quadratic(c_alpha, gamma);
        if full {
            params = params.with_jump(JumpVariant::Full);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (problem, u, z) = harness::random_admissible_pair(&mut rng, kind, &mesh, &sides, &params).unwrap();
        let i = finite(functionals::primal_energy(&problem, &u, &mesh, &sides, &params).unwrap());
        let d = finite(functionals::dual_energy(&problem, &z, &mesh, &sides, &params).unwrap());
        prop_assert!(i - d >= -1e-12 * (i.abs() + d.abs()), "I = {i}, D = {d}");
    }

    #[test]
    fn ibp_residual_vanishes(seed in any::<u64>(), level in 1u32..=4, neumann in any::<bool>()) {
        let (mesh, sides) = square(level, neumann);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = harness::random_dg(&mut rng, mesh.n_elements());
        let z = harness::random_rt(&mut rng, mesh.n_elements());
        let terms = fem::ibp_terms(&u, &z, &mesh, &sides).unwrap();
        prop_assert!(terms.residual().abs() <= 1e-12 * terms.scale().max(1.0));
    }

    #[test]
    fn conforming_fields_have_finite_side_penalty(seed in any::<u64>(), level in 1u32..=3, gamma in 0.0f64..2.0) {
        let (mesh, sides) = square(level, true);
        let params = PenaltyParams::quadratic(1.0, gamma);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = harness::random_conforming_rt(&mut rng, &mesh, &sides, false);
        prop_assert!(functionals::penalty_k(&z, &mesh, &sides, &params).unwrap().is_finite());

        // perturbing one element breaks normal continuity
        let t = rng.random_range(0..mesh.n_elements());
        z.constants[t][0] += 0.5;
        prop_assert_eq!(functionals::penalty_k(&z, &mesh, &sides, &params).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn poisson_matrix_is_symmetric(level in 1u32..=3, gamma in 0.0f64..2.0, c_alpha in 0.2f64..2.0, full in any::<bool>()) {
        let (mesh, sides) = square(level, true);
        let mut params = PenaltyParams::quadratic(c_alpha, gamma);
        if full {
            params = params.with_jump(JumpVariant::Full);
        }
        let a = solvers::poisson_matrix(&mesh, &sides, &params).unwrap();
        prop_assert!(a.asymmetry() <= 1e-14 * a.max_abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reconstruction_is_normal_continuous_and_tight(
        seed in any::<u64>(),
        level in 1u32..=3,
        neumann in any::<bool>(),
        gamma in 0.0f64..2.0,
        c_alpha in 0.25f64..2.0,
    ) {
        let (mesh, sides) = square(level, neumann);
        let params = PenaltyParams::quadratic(c_alpha, gamma).with_jump(JumpVariant::Mean);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f_h: Vec<f64> = (0..mesh.n_elements()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (u, _) = solvers::solve_poisson(&mesh, &sides, &params, &f_h).unwrap();
        let problem = DiscreteProblem::Poisson { f_h };
        let rec = functionals::reconstruct_dual(&problem, &u, &mesh, &sides, &params).unwrap();
        prop_assert!(rec.verify(1e-9).is_ok(), "residual {}", rec.max_residual());
        let i = finite(functionals::primal_energy(&problem, &u, &mesh, &sides, &params).unwrap());
        let d = finite(functionals::dual_energy(&problem, &rec.field, &mesh, &sides, &params).unwrap());
        prop_assert!((i - d).abs() <= 1e-9 * (1.0 + i.abs()), "I = {i}, D = {d}");
    }

    #[test]
    fn tv_flow_decreases_energy(
        seed in any::<u64>(),
        level in 2u32..=3,
        r in prop_oneof![Just(1.0), Just(1.5), Just(2.0)],
        gamma in 0.0f64..2.0,
        alpha in 1.0f64..20.0,
    ) {
        let (mesh, sides) = square(level, false);
        let params = PenaltyParams::quadratic(0.1, gamma).with_r(r);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g_h: Vec<f64> = (0..mesh.n_elements()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut opts = TvOptions::for_mesh(&mesh);
        opts.max_iters = 200;
        let (_, rep) = solvers::solve_tv(&mesh, &sides, &params, &g_h, alpha, &opts).unwrap();
        for w in rep.energy_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn obstacle_solution_is_complementary(
        seed in any::<u64>(),
        level in 2u32..=3,
        gamma in 0.5f64..2.0,
        lift in -0.2f64..0.2,
    ) {
        let (mesh, sides) = square(level, false);
        let params = PenaltyParams::quadratic(1.0, gamma);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = mesh.n_elements();
        let f_h: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..2.0)).collect();
        let obstacle: Vec<f64> = (0..n)
            .map(|t| {
                let x = mesh.barycenter(t);
                lift - 0.5 * (x[0] * x[0] + x[1] * x[1])
            })
            .collect();
        let shift = vec![[0.0, 0.0]; n];
        let (u, rep) = solvers::solve_obstacle(&mesh, &sides, &params, &f_h, &obstacle, &shift, &ObstacleOptions::for_mesh(&mesh)).unwrap();
        prop_assert!(rep.converged());
        let c = rep.complementarity.unwrap();
        prop_assert!(c.max_violation() <= 1e-8, "{c:?}");
        for t in 0..n {
            prop_assert!(u.values[t] >= obstacle[t] - 1e-10);
        }
    }
}
