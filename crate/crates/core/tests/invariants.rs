use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spinfilter::dynamics::{
    filter_step_with, gaussian_increments, lindblad_collective, lindblad_symmetric, Integrator, SymmetricCoefficients,
};
use spinfilter::oracle::{collective_ops, full_lindblad_adjoint, CoupledBasis, FullState};
use spinfilter::{run_trajectory, BlockLayout, GcsState, InitialState, ModelKind, Observable, TrajectoryConfig};

fn layout(n: u32) -> Arc<BlockLayout> {
    Arc::new(BlockLayout::new(n).unwrap())
}

fn model_strategy() -> impl Strategy<Value = ModelKind> {
    prop_oneof![Just(ModelKind::Collective), Just(ModelKind::Symmetric)]
}

fn integrator_strategy() -> impl Strategy<Value = Integrator> {
    prop_oneof![Just(Integrator::EulerMaruyama), Just(Integrator::Exponential)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn filtered_states_stay_physical(
        n in 1u32..=14,
        seed in any::<u64>(),
        model in model_strategy(),
        integrator in integrator_strategy(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = layout(n);
        let coeffs = SymmetricCoefficients::build(&layout);
        let mut state = GcsState::random(layout, &mut rng);
        let dt = 1e-3;
        for dw in gaussian_increments(seed, 1, dt).take(200) {
            state = filter_step_with(&state, model, integrator, Some(&coeffs), 1.0, dt, dw).unwrap().0;
            prop_assert!((state.trace() - 1.0).abs() < 1e-12);
            // Euler-Maruyama keeps positivity only up to discretization error,
            // which accumulates near pure states.
            if integrator == Integrator::Exponential {
                prop_assert!(state.purity() <= 1.0 + 1e-9, "purity {}", state.purity());
            }
            prop_assert!(state.variance(Observable::Jz) >= -1e-10);
            prop_assert!(state.hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn lift_and_project_round_trip(n in 1u32..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = CoupledBasis::new(n).unwrap();
        let state = GcsState::random(basis.layout().clone(), &mut rng);
        let full = FullState::from_gcs(&state, &basis).unwrap();
        prop_assert!((full.purity() - state.purity()).abs() < 1e-12);
        let (back, residual) = full.project(&basis).unwrap();
        prop_assert!(residual < 1e-12);
        prop_assert!(back.max_abs_diff(&state) < 1e-12);
    }

    #[test]
    fn drift_preserves_mean_jz(n in 1u32..=20, seed in any::<u64>(), model in model_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = layout(n);
        let coeffs = SymmetricCoefficients::build(&layout);
        let state = GcsState::random(layout, &mut rng);
        let d = match model {
            ModelKind::Collective => lindblad_collective(&state),
            ModelKind::Symmetric => lindblad_symmetric(&state, &coeffs).unwrap(),
        };
        prop_assert!(d.expectation(Observable::Jz).abs() < 1e-11 * (1.0 + n as f64));
        prop_assert!(d.trace().abs() < 1e-11);
    }
}

/// `tr[X L(ρ)] = tr[L†(X) ρ]` with the block dissipator on the left and the
/// dense per-site adjoint on the right.
#[test]
fn block_dissipators_dual_to_dense_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=5u32 {
        let basis = CoupledBasis::new(n).unwrap();
        let coeffs = SymmetricCoefficients::build(basis.layout());
        let ops = collective_ops(n);
        let observables = [
            (Observable::Jz, ops.jz.clone()),
            (Observable::Jz2, &ops.jz * &ops.jz),
            (Observable::Jy2, &ops.jy * &ops.jy),
        ];
        let mut states = vec![GcsState::coherent_x(n).unwrap()];
        states.extend((0..5).map(|_| GcsState::random(basis.layout().clone(), &mut rng)));
        for state in &states {
            let full = FullState::from_gcs(state, &basis).unwrap();
            for model in [ModelKind::Collective, ModelKind::Symmetric] {
                let d = match model {
                    ModelKind::Collective => lindblad_collective(state),
                    ModelKind::Symmetric => lindblad_symmetric(state, &coeffs).unwrap(),
                };
                for (obs, x) in &observables {
                    let lhs = d.expectation(*obs);
                    let rhs = full.expect(&full_lindblad_adjoint(model, n, x));
                    assert!((lhs - rhs).abs() < 1e-10, "N={n} {model} {obs:?}: {lhs} vs {rhs}");
                }
            }
        }
    }
}

#[test]
fn css_jy2_rates() {
    for n in [2u32, 5, 9, 30] {
        let css = GcsState::coherent_x(n).unwrap();
        let coeffs = SymmetricCoefficients::build(css.layout());
        let nf = n as f64;
        let c = lindblad_collective(&css).expectation(Observable::Jy2);
        let s = lindblad_symmetric(&css, &coeffs).unwrap().expectation(Observable::Jy2);
        assert!((c - (nf * nf / 4.0 - nf / 4.0)).abs() < 1e-10 * nf * nf);
        assert!(s.abs() < 1e-10 * nf * nf);
    }
}

#[test]
fn collective_filter_keeps_block_populations() {
    let config = TrajectoryConfig {
        n_spins: 11,
        kappa: 3.0,
        dt: 1e-4,
        t_final: 0.5,
        seed: 8,
        model: ModelKind::Collective,
        initial: InitialState::CoherentX,
        record_every: 100,
        ..Default::default()
    };
    let traj = run_trajectory(&config).unwrap();
    let first = &traj.records[0].block_traces;
    for r in &traj.records {
        for (a, b) in r.block_traces.iter().zip(first) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn symmetric_never_squeezes() {
    let config = TrajectoryConfig {
        n_spins: 24,
        kappa: 4.0,
        dt: 2.5e-4,
        t_final: 2.5,
        seed: 12,
        model: ModelKind::Symmetric,
        initial: InitialState::CoherentX,
        record_every: 20,
        ..Default::default()
    };
    let traj = run_trajectory(&config).unwrap();
    let quarter_n = 6.0;
    for r in &traj.records {
        if let Some(xi2) = r.xi2 {
            assert!(xi2 >= 0.98, "ξ² = {xi2} at κt = {}", r.kappa_t);
        }
        assert!((r.var_jy - quarter_n).abs() < 1e-9 * quarter_n);
    }
}

#[test]
fn reruns_are_identical_for_both_engines() {
    for engine in [spinfilter::EngineKind::Block, spinfilter::EngineKind::FullOracle] {
        let config = TrajectoryConfig {
            n_spins: 4,
            kappa: 1.0,
            dt: 1e-3,
            t_final: 0.5,
            seed: 21,
            engine,
            record_every: 7,
            ..Default::default()
        };
        let a = run_trajectory(&config).unwrap();
        let b = run_trajectory(&config).unwrap();
        assert_eq!(a.records, b.records);
    }
}
