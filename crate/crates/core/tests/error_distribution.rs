//! Statistical checks of the error sampler over 10⁶ realizations.

use ddsim::error_model::{realization, EdgeErrorCoupling, ErrorParameters, ErrorRealization};
use statrs::distribution::{ContinuousCDF, Normal};

const N: u64 = 1_000_000;

fn draws(params: &ErrorParameters, seed: u64, n: u64) -> Vec<ErrorRealization> {
    (0..n).map(|i| realization(params, seed, i)).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// χ² of `x` against `bins` equal-probability bins given by `quantile`.
fn chi_square(x: &[f64], bins: usize, quantile: impl Fn(f64) -> f64) -> f64 {
    let edges: Vec<f64> = (1..bins).map(|k| quantile(k as f64 / bins as f64)).collect();
    let mut counts = vec![0usize; bins];
    for &v in x {
        counts[edges.partition_point(|&e| e < v)] += 1;
    }
    let expected = x.len() as f64 / bins as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

/// 99th percentile of χ² with 19 degrees of freedom.
const CHI2_19_P01: f64 = 36.19;

/// Quantile of `1 − 3u²`, u uniform on [−1, 1]: the CDF is
/// `F(x) = 1 − √((1 − x)/3)` on [−2, 1].
fn edge_quantile(p: f64) -> f64 {
    1.0 - 3.0 * (1.0 - p) * (1.0 - p)
}

#[test]
fn moments_and_ranges_match_the_latent_model() {
    let params = ErrorParameters::reference();
    let d = draws(&params, 11, N);
    let eps: Vec<f64> = d.iter().map(|r| r.epsilon_x).collect();
    let nz: Vec<f64> = d.iter().map(|r| r.n_z).collect();
    let b: Vec<f64> = d.iter().map(|r| r.detuning).collect();

    assert!(mean(&eps).abs() < 0.002, "mean eps {}", mean(&eps));
    assert!((variance(&eps) - 0.8 * 0.09).abs() < 0.002, "var eps {}", variance(&eps));
    assert!(mean(&b).abs() < 4.0 * 0.05 / 1000.0);
    assert!((variance(&b).sqrt() - 0.05).abs() < 0.001);

    let (lo, hi) = eps.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(lo >= -0.6 - 1e-12 && hi <= 0.3 + 1e-12, "eps range {lo} {hi}");
    let (lo, hi) = nz.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(lo >= -0.12 - 1e-12 && hi <= 0.24 + 1e-12, "n_z range {lo} {hi}");

    assert!(d.iter().all(|r| r.epsilon_x == r.epsilon_y && r.n_z == r.m_z));
}

#[test]
fn marginals_pass_chi_square() {
    let params = ErrorParameters::reference();
    let d = draws(&params, 5, 100_000);
    let eps: Vec<f64> = d.iter().map(|r| r.epsilon_x / params.epsilon0).collect();
    let nz: Vec<f64> = d.iter().map(|r| r.n_z / params.n0).collect();
    let normal = Normal::new(0.0, params.b).unwrap();
    let b: Vec<f64> = d.iter().map(|r| r.detuning).collect();
    for (name, chi) in [
        ("epsilon", chi_square(&eps, 20, edge_quantile)),
        ("n_z", chi_square(&nz, 20, edge_quantile)),
        ("detuning", chi_square(&b, 20, |p| normal.inverse_cdf(p))),
    ] {
        assert!(chi < CHI2_19_P01, "{name}: chi2 = {chi}");
    }
}

#[test]
fn detuning_is_uncorrelated_with_pulse_errors() {
    for coupling in [EdgeErrorCoupling::SharedPosition, EdgeErrorCoupling::Independent] {
        let params = ErrorParameters { coupling, ..ErrorParameters::reference() };
        let d = draws(&params, 3, N);
        let eps: Vec<f64> = d.iter().map(|r| r.epsilon_x).collect();
        let b: Vec<f64> = d.iter().map(|r| r.detuning).collect();
        assert!(corr(&eps, &b).abs() < 0.01);
    }
}

#[test]
fn independent_coupling_decorrelates_angle_and_tilt() {
    let params = ErrorParameters {
        coupling: EdgeErrorCoupling::Independent,
        ..ErrorParameters::reference()
    };
    let d = draws(&params, 9, N);
    let eps: Vec<f64> = d.iter().map(|r| r.epsilon_x).collect();
    let nz: Vec<f64> = d.iter().map(|r| r.n_z).collect();
    assert!(corr(&eps, &nz).abs() < 0.01);

    let shared = draws(&ErrorParameters::reference(), 9, 10_000);
    let eps: Vec<f64> = shared.iter().map(|r| r.epsilon_x).collect();
    let nz: Vec<f64> = shared.iter().map(|r| r.n_z).collect();
    assert!((corr(&eps, &nz) + 1.0).abs() < 1e-9, "negative n0 gives perfect anticorrelation");
}

#[test]
fn sampling_is_a_pure_function_of_seed_and_index() {
    let params = ErrorParameters::reference();
    let forward = draws(&params, 42, 1000);
    let backward: Vec<ErrorRealization> = (0..1000u64).rev().map(|i| realization(&params, 42, i)).collect();
    assert!(forward.iter().zip(backward.iter().rev()).all(|(a, b)| a == b));
    assert_ne!(realization(&params, 42, 0), realization(&params, 43, 0));
}

#[test]
fn zero_amplitudes_are_exact() {
    let d = draws(&ErrorParameters::ideal(), 1, 1000);
    assert!(d.iter().all(|r| *r == ErrorRealization::ideal()));
}
