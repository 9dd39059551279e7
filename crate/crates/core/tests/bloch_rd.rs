//! Nonlinear Bloch integration with radiation damping.

use ddsim::bloch_rd::{
    expand_schedule, integrate_ensemble, run_rd_experiment, EnsembleBlochState, RdCase, RdParameters, Segment,
    SegmentKind,
};
use ddsim::error_model::{realization, ErrorParameters, ErrorRealization, GAMMA_E};
use ddsim::sequence::{build_cdd, build_pdd, PulseAxis, Variant};
use ddsim::simulator::run_ensemble_states;
use ddsim::vector;
use ddsim::{EnsembleConfig, InitialState};

fn draws(n: u64, seed: u64) -> Vec<ErrorRealization> {
    (0..n).map(|i| realization(&ErrorParameters::reference(), seed, i)).collect()
}

fn level_schedule(level: u32, t_p: f64) -> Vec<Segment> {
    expand_schedule(&build_cdd(Variant::Xy, level, 11e-6, true).unwrap(), t_p).unwrap()
}

fn tipped(errors: Vec<ErrorRealization>) -> EnsembleBlochState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    EnsembleBlochState::uniform(errors, [s, 0.0, -s])
}

#[test]
fn uncoupled_ensemble_factorizes_into_single_spins() {
    let base = RdParameters::reference(GAMMA_E);
    let segs = level_schedule(2, base.t_p);
    // Case A takes the exact-rotation path; a huge τ_r keeps the
    // stepping integrator but makes the mean-field term negligible.
    let lawson = RdParameters { tau_r: 1e30, ..base.for_case(RdCase::C) };
    for rd in [base.for_case(RdCase::A), lawson] {
        let mut joint = tipped(draws(16, 5));
        integrate_ensemble(&mut joint, &segs, &rd, GAMMA_E, 1).unwrap();
        for (i, real) in draws(16, 5).into_iter().enumerate() {
            let mut one = tipped(vec![real]);
            integrate_ensemble(&mut one, &segs, &rd, GAMMA_E, 1).unwrap();
            let d = vector::norm(vector::sub(one.spins[0], joint.spins[i]));
            assert!(d < 1e-10, "spin {i}: {d}");
        }
    }
}

#[test]
fn stepping_path_matches_exact_rotations_without_damping() {
    let base = RdParameters::reference(GAMMA_E);
    let segs = level_schedule(1, base.t_p);
    let mut exact = tipped(draws(32, 9));
    let mut stepped = exact.clone();
    integrate_ensemble(&mut exact, &segs, &base.for_case(RdCase::A), GAMMA_E, 1).unwrap();
    let lawson = RdParameters { tau_r: 1e30, ..base.for_case(RdCase::C) };
    integrate_ensemble(&mut stepped, &segs, &lawson, GAMMA_E, 1).unwrap();
    for (a, b) in exact.spins.iter().zip(&stepped.spins) {
        assert!(vector::norm(vector::sub(*a, *b)) < 1e-10);
    }
}

#[test]
fn spin_norms_are_conserved_per_cycle() {
    let rd = RdParameters::reference(GAMMA_E).for_case(RdCase::C);
    let segs = level_schedule(1, rd.t_p);
    let mut st = tipped(draws(200, 3));
    let traj = integrate_ensemble(&mut st, &segs, &rd, GAMMA_E, 1).unwrap();
    assert!(traj.max_norm_drift < 1e-8, "{}", traj.max_norm_drift);
    for m in &st.spins {
        assert!((vector::norm(*m) - 1.0).abs() < 1e-8);
    }
}

#[test]
fn integration_is_independent_of_worker_count() {
    let rd = RdParameters::reference(GAMMA_E).for_case(RdCase::C);
    let segs = level_schedule(1, rd.t_p);
    let run = |w| {
        let mut st = tipped(draws(700, 4));
        let traj = integrate_ensemble(&mut st, &segs, &rd, GAMMA_E, w).unwrap();
        (st, traj)
    };
    let one = run(1);
    for w in [2, 8] {
        assert_eq!(one, run(w), "workers = {w}");
    }
}

#[test]
fn damping_free_case_tracks_instantaneous_pulses() {
    let params = ErrorParameters::reference();
    let ens = EnsembleConfig { size: 1000, seed: 1, workers: 4 };
    let rd = RdParameters::reference(GAMMA_E);
    for level in 1..=3 {
        let finite = run_rd_experiment(&params, &rd, level, RdCase::A, InitialState::MinusZ, &ens).unwrap();
        let prog = build_cdd(Variant::Xy, level, params.tau, true).unwrap();
        let inst = run_ensemble_states(&prog, &[InitialState::MinusZ], &params, &ens, 1).unwrap();
        assert!((finite.fidelity - inst[0].fidelity).abs() < 0.01, "level {level}: {} vs {}", finite.fidelity, inst[0].fidelity);
    }
}

#[test]
fn damping_relaxes_a_tipped_uniform_ensemble_toward_minus_z() {
    // A single spin under its own field: polar tip follows
    // tan(θ/2) ∝ exp(−t/τ_r), θ measured from −z.
    let rd = RdParameters { rd_during_delays: true, ..RdParameters::reference(GAMMA_E).for_case(RdCase::B) };
    let theta0: f64 = 2.0;
    let mut st = EnsembleBlochState::uniform(vec![ErrorRealization::ideal()], [theta0.sin(), 0.0, -theta0.cos()]);
    let t = 3e-6;
    integrate_ensemble(&mut st, &[Segment { kind: SegmentKind::Free, duration: t }], &rd, GAMMA_E, 1).unwrap();
    let theta = (-st.spins[0][2]).clamp(-1.0, 1.0).acos();
    let expected = 2.0 * ((theta0 / 2.0).tan() * (-t / rd.tau_r).exp()).atan();
    assert!((theta - expected).abs() < 1e-6, "{theta} vs {expected}");
}

#[test]
fn pulse_step_refinement_converges() {
    let params = ErrorParameters::reference();
    let ens = EnsembleConfig { size: 200, seed: 2, workers: 4 };
    let coarse = RdParameters::reference(GAMMA_E);
    let fine = RdParameters { dt: coarse.dt / 2.0, delay_dt: coarse.delay_dt / 2.0, ..coarse };
    for init in [InitialState::PlusZ, InitialState::MinusZ] {
        let a = run_rd_experiment(&params, &coarse, 1, RdCase::C, init, &ens).unwrap();
        let b = run_rd_experiment(&params, &fine, 1, RdCase::C, init, &ens).unwrap();
        assert!((a.fidelity - b.fidelity).abs() < 1e-4, "{init}: {} vs {}", a.fidelity, b.fidelity);
    }
}

#[test]
fn ensemble_size_convergence_at_level_two() {
    let params = ErrorParameters::reference();
    let rd = RdParameters::reference(GAMMA_E);
    let small = EnsembleConfig { size: 2000, seed: 1, workers: 8 };
    let large = EnsembleConfig { size: 10_000, ..small };
    for init in [InitialState::PlusZ, InitialState::MinusZ] {
        let a = run_rd_experiment(&params, &rd, 2, RdCase::C, init, &small).unwrap();
        let b = run_rd_experiment(&params, &rd, 2, RdCase::C, init, &large).unwrap();
        let band = 4.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt() + 0.01;
        assert!((a.fidelity - b.fidelity).abs() < band, "{init}: {} vs {}", a.fidelity, b.fidelity);
    }
}

#[test]
fn schedule_rejects_z_pulses_and_short_delays() {
    let xz = build_pdd(Variant::Xz, 11e-6).unwrap();
    assert!(expand_schedule(&xz, 0.18e-6).is_err());
    let xy = build_pdd(Variant::Xy, 0.1e-6).unwrap();
    assert!(expand_schedule(&xy, 0.18e-6).is_err());
    let segs = expand_schedule(&build_pdd(Variant::Xy, 11e-6).unwrap(), 0.18e-6).unwrap();
    let total: f64 = segs.iter().map(|s| s.duration).sum();
    assert!((total - 44e-6).abs() < 1e-15);
    assert!(segs.iter().any(|s| s.kind == SegmentKind::Drive(PulseAxis::Y)));
}
