//! Monte-Carlo coverage of the DKW band and of the union bound for the
//! averaged reference eCDF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use seedscope::bounds::{one_sample_radius, union_bound_epsilon};
use seedscope::ecdf::Ecdf;
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

/// Exact sup |F_n - F| for a continuous CDF `f`: the supremum is attained at
/// a jump, either just before it or at it.
fn ks_to_continuous(e: &Ecdf, f: impl Fn(f64) -> f64) -> f64 {
    e.support()
        .iter()
        .map(|&t| {
            let ft = f(t);
            (e.eval(t) - ft).abs().max((e.left_limit(t) - ft).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn one_sample_band_covers_uniform_samples() {
    let (n, eps, trials) = (500, 0.05, 2000);
    let radius = one_sample_radius(n, eps).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let violations = (0..trials)
        .filter(|_| {
            let sample: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let e = Ecdf::from_sample(&sample).unwrap();
            ks_to_continuous(&e, |t| t.clamp(0.0, 1.0)) > radius
        })
        .count();
    let rate = violations as f64 / trials as f64;
    assert!(rate <= eps, "violation rate {rate} > {eps}");
}

#[test]
fn one_sample_band_covers_gaussian_samples() {
    let (n, eps, trials) = (1000, 0.05, 500);
    let radius = one_sample_radius(n, eps).unwrap();
    let phi = StatNormal::new(0.0, 1.0).unwrap();
    let sampler = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let violations = (0..trials)
        .filter(|_| {
            let sample: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
            ks_to_continuous(&Ecdf::from_sample(&sample).unwrap(), |t| phi.cdf(t)) > radius
        })
        .count();
    assert!(violations as f64 / trials as f64 <= eps);
}

#[test]
fn averaged_reference_respects_union_bound() {
    // M uniform components U(a_k, a_k + w_k); the average of their eCDFs is
    // the eCDF of the pooled sample because every component has N points.
    let (m, n, trials, eps_b) = (20usize, 500usize, 500usize, 0.05);
    let delta_b = ((2.0 * m as f64 / eps_b).ln() / (2.0 * n as f64)).sqrt();
    let bound = union_bound_epsilon(m, n, delta_b).unwrap().raw;
    assert!((bound - eps_b).abs() < 1e-12);
    let comps: Vec<(f64, f64)> = (0..m).map(|k| (0.1 * k as f64, 1.0 + 0.05 * k as f64)).collect();
    let f_bar = |t: f64| comps.iter().map(|&(a, w)| ((t - a) / w).clamp(0.0, 1.0)).sum::<f64>() / m as f64;
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let mut violations = 0;
    for _ in 0..trials {
        let pooled: Vec<f64> = comps
            .iter()
            .flat_map(|&(a, w)| (0..n).map(|_| a + w * rng.random::<f64>()).collect::<Vec<_>>())
            .collect();
        let g_hat = Ecdf::from_sample(&pooled).unwrap();
        if ks_to_continuous(&g_hat, f_bar) > delta_b {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}
