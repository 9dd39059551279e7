//! Ensemble simulator properties and pinned reference curves.

use std::path::PathBuf;

use ddsim::error_model::{realization, ErrorParameters, ErrorRealization, GAMMA_E};
use ddsim::sequence::{build_cdd, build_pdd, build_sdd, Instruction, PulseAxis, PulseProgram, Variant};
use ddsim::simulator::{cycle_propagator, pulse_rotation, run_ensemble_states, run_fidelity, saturation_estimate};
use ddsim::{EnsembleConfig, InitialState, Rotation, SpinState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: f64 = 11e-6;

fn ensemble(size: usize, workers: usize) -> EnsembleConfig {
    EnsembleConfig { size, seed: 2024, workers }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let prog = build_cdd(Variant::Xy, 2, TAU, true).unwrap();
    let params = ErrorParameters::reference();
    let base = run_ensemble_states(&prog, &InitialState::XYZ, &params, &ensemble(3000, 1), 5).unwrap();
    for workers in [2, 8] {
        let other = run_ensemble_states(&prog, &InitialState::XYZ, &params, &ensemble(3000, workers), 5).unwrap();
        assert_eq!(base, other, "workers = {workers}");
    }
    let s1 = saturation_estimate(&prog, InitialState::X, &params, &ensemble(3000, 1)).unwrap();
    let s8 = saturation_estimate(&prog, InitialState::X, &params, &ensemble(3000, 8)).unwrap();
    assert_eq!(s1, s8);
}

#[test]
fn ideal_xy_and_xz_cycles_agree_for_random_detuning() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let real = ErrorRealization::ideal().with_detuning(rng.random_range(-0.3..0.3));
        for level in 1..=3 {
            let xy = cycle_propagator(&build_cdd(Variant::Xy, level, TAU, true).unwrap(), &real, GAMMA_E).unwrap();
            for zsub in [false, true] {
                let xz = cycle_propagator(&build_cdd(Variant::Xz, level, TAU, zsub).unwrap(), &real, GAMMA_E).unwrap();
                assert!(xy.distance(&xz) < 1e-9, "level {level} zsub {zsub}");
            }
        }
    }
}

#[test]
fn both_substitution_orders_are_pi_z_up_to_phase() {
    let ideal = ErrorRealization::ideal();
    let x = pulse_rotation(PulseAxis::X, std::f64::consts::PI, &ideal).unwrap();
    let y = pulse_rotation(PulseAxis::Y, std::f64::consts::PI, &ideal).unwrap();
    let z = Rotation::about_z(std::f64::consts::PI);
    assert!(x.then(&y).approx_eq(&z, 1e-15));
    assert!(y.then(&x).approx_eq(&z, 1e-15));
}

fn repeated(prog: &PulseProgram, n: usize) -> PulseProgram {
    let ins: Vec<Instruction> = (0..n).flat_map(|_| prog.instructions().iter().copied()).collect();
    PulseProgram::new("unrolled", ins)
}

#[test]
fn stroboscopic_readout_matches_unrolled_sequence() {
    let params = ErrorParameters::reference();
    let prog = build_pdd(Variant::Xy, TAU).unwrap();
    for i in 0..20 {
        let real = realization(&params, 3, i);
        for state in InitialState::XYZ {
            let f = run_fidelity(&prog, &state.spin_state(), &real, GAMMA_E, 12).unwrap();
            for n in [1usize, 5, 12] {
                let u = cycle_propagator(&repeated(&prog, n), &real, GAMMA_E).unwrap();
                let expected = u.apply(&state.spin_state()).overlap(&state.spin_state());
                assert!((f[n - 1] - expected).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn ensemble_size_one_equals_single_spin() {
    let params = ErrorParameters::reference();
    let prog = build_sdd(TAU, false).unwrap();
    let rec = run_ensemble_states(&prog, &[InitialState::Y], &params, &ensemble(1, 1), 4).unwrap();
    let single = run_fidelity(&prog, &SpinState::PLUS_Y, &realization(&params, 2024, 0), GAMMA_E, 4).unwrap();
    for (r, f) in rec.iter().zip(&single) {
        assert_eq!(r.fidelity, *f);
        assert_eq!(r.stderr, 0.0);
    }
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against a stored curve; set `DDSIM_BLESS=1` to rewrite it.
fn check_golden(name: &str, prog: &PulseProgram, cycles: usize) {
    let recs = run_ensemble_states(prog, &InitialState::XYZ, &ErrorParameters::reference(), &EnsembleConfig::default(), cycles).unwrap();
    let body: String = std::iter::once("initial_state,cycle,fidelity\n".to_string())
        .chain(recs.iter().map(|r| format!("{},{},{}\n", r.initial_state, r.index, r.fidelity)))
        .collect();
    let path = golden_path(name);
    if std::env::var_os("DDSIM_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &body).unwrap();
    }
    let stored = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let parse = |s: &str| -> Vec<f64> { s.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect() };
    let (a, b) = (parse(&body), parse(&stored));
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        assert!((x - y).abs() < 1e-12, "{name} row {i}: {x} vs {y}");
    }
}

#[test]
fn golden_xy_pdd() {
    check_golden("xy_pdd.csv", &build_pdd(Variant::Xy, TAU).unwrap(), 200);
}

#[test]
fn golden_xz_pdd() {
    check_golden("xz_pdd.csv", &build_pdd(Variant::Xz, TAU).unwrap().with_z_substitution(), 20);
}

#[test]
fn golden_xy_sdd() {
    check_golden("xy_sdd.csv", &build_sdd(TAU, false).unwrap(), 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn program_text_round_trips(level in 1u32..=4, xz in any::<bool>(), zsub in any::<bool>(), tau in 1e-7..1e-3f64) {
        let variant = if xz { Variant::Xz } else { Variant::Xy };
        let prog = build_cdd(variant, level, tau, zsub).unwrap();
        let back = PulseProgram::from_text(&prog.to_text()).unwrap();
        prop_assert_eq!(back, prog);
    }

    #[test]
    fn fidelity_stays_in_unit_interval(i in 0u64..10_000, cycles in 1usize..50) {
        let real = realization(&ErrorParameters::reference(), 8, i);
        let prog = build_pdd(Variant::Xz, TAU).unwrap();
        for state in InitialState::XYZ {
            for f in run_fidelity(&prog, &state.spin_state(), &real, GAMMA_E, cycles).unwrap() {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&f));
            }
        }
    }
}
