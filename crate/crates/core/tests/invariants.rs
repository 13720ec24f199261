use proptest::prelude::*;
use ultracoral::growth::{run_level, simulate_level, GrowthConfig, LevelState, Model};
use ultracoral::integrator::{integrate, pack, CoupledSystem, SolverConfig};
use ultracoral::kinetics::{KineticParams, SpeciesState};
use ultracoral::vladimirov::{apply_fast, build_generator, OperatorRegistry, OperatorSpec};

fn totals(y: &[f64], n: usize) -> f64 {
    (0..n).map(|i| y[n + i] + y[2 * n + i]).sum()
}

#[test]
fn reaction_only_conservation_and_monotonicity() {
    let sol = simulate_level(&Model::default(), 0, &[SpeciesState::new(8.0, 10.0, 0.0)], 100.0).unwrap();
    let y = &sol.trajectory.y;
    for w in y.windows(2) {
        assert!((w[1][1] + w[1][2] - 10.0).abs() < 1e-8);
        assert!(w[1][2] >= w[0][2] - 1e-10);
        assert!(w[1][1] <= w[0][1] + 1e-10);
    }
    assert_eq!(sol.events.len(), 1);
}

#[test]
fn coupled_run_conserves_calcium_and_stays_positive() {
    let ic = [SpeciesState::new(10.0, 15.0, 0.0), SpeciesState::new(8.0, 13.0, 0.0)];
    let cfg = SolverConfig::default();
    let sol = simulate_level(&Model::default(), 1, &ic, 50.0).unwrap();
    let t0 = totals(&sol.trajectory.y[0], 2);
    for y in &sol.trajectory.y {
        let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((totals(y, 2) - t0).abs() <= 10.0 * (cfg.atol + cfg.rtol * norm));
        assert!(y.iter().all(|&x| x >= -1e-9));
    }
    let mut ids: Vec<usize> = sol.events.iter().map(|e| e.id).collect();
    ids.sort();
    assert_eq!(ids, vec![0, 1]);
}

#[test]
fn frozen_level_run_conserves_and_calcifies_monotonically() {
    let states: Vec<SpeciesState> = (0..8)
        .map(|i| SpeciesState::new(4.0 + i as f64 * 0.3, 5.0 + (i % 3) as f64, 0.0))
        .collect();
    let start = LevelState::new(0.0, 3, &states);
    let out = run_level(&Model::default(), &start, &[true; 8], &GrowthConfig::default()).unwrap();
    let y = &out.solution.trajectory.y;
    let t0 = totals(&y[0], 8);
    for pair in y.windows(2) {
        assert!((totals(&pair[1], 8) - t0).abs() < 1e-8 * t0);
        for i in 0..8 {
            assert!(pair[1][16 + i] >= pair[0][16 + i] - 1e-10);
        }
    }
    assert!(out.crossings.iter().all(Option::is_some));
}

#[test]
fn dense_and_fast_operators_give_the_same_trajectory() {
    let registry = OperatorRegistry::default();
    let spec = OperatorSpec { p: 2, m: 4, alpha: 2.0 };
    let y0 = pack(
        &(0..16).map(|i| 5.0 + (i as f64).sin()).collect::<Vec<_>>(),
        &(0..16).map(|i| 6.0 + (i as f64).cos()).collect::<Vec<_>>(),
        &[0.0; 16],
    );
    let run = |name: &str| {
        let sys = CoupledSystem::new(registry.build(name, &spec).unwrap(), KineticParams::default());
        integrate(&sys, &y0, 0.0, 5.0, &SolverConfig::default(), &[]).unwrap()
    };
    let (a, b) = (run("dense"), run("fast"));
    for (x, y) in a.final_state().iter().zip(b.final_state()) {
        assert!((x - y).abs() < 1e-7 * x.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_is_symmetric_and_conservative(
        p in prop::sample::select(vec![2u64, 3, 5]),
        m in 0u32..4,
        alpha in 0.2..6.0f64,
    ) {
        let g = build_generator(p, m, alpha).unwrap();
        prop_assert!(g.is_symmetric());
        let scale = g.get(0, 0).abs().max(1.0);
        prop_assert!(g.max_row_sum() <= 1e-12 * scale);
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                if i != j {
                    prop_assert!(g.get(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn fast_path_matches_dense(
        m in 1u32..8,
        alpha in 0.5..5.0f64,
        seed in any::<u64>(),
    ) {
        let g = build_generator(2, m, alpha).unwrap();
        let mut s = seed;
        let x: Vec<f64> = (0..g.dim()).map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }).collect();
        let want = g.apply_dense(&x).unwrap();
        let got = apply_fast(2, m, alpha, &x).unwrap();
        let num: f64 = want.iter().zip(&got).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = want.iter().map(|a| a * a).sum::<f64>().sqrt();
        prop_assert!(num <= 1e-12 * den.max(1e-300));
    }

    #[test]
    fn diffusion_is_dissipative(m in 1u32..6, alpha in 0.5..5.0f64, x in prop::collection::vec(-5.0..5.0f64, 32)) {
        let n = 1usize << m;
        let g = build_generator(2, m, alpha).unwrap();
        let ax = g.apply_dense(&x[..n]).unwrap();
        let q: f64 = x[..n].iter().zip(&ax).map(|(a, b)| a * b).sum();
        prop_assert!(q <= 1e-9 * ax.iter().map(|v| v.abs()).sum::<f64>().max(1.0));
    }
}
