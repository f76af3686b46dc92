//! Statistical properties of the bootstrap α̂ estimator.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use seedscope::alpha::{estimate_alpha, estimate_alpha_batch, pairwise_alpha, AlphaConfig};
use seedscope::pool::{ModelPool, ScoreVector};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

/// Models with gaps ~ Normal(μ_k, 1), μ_k ~ Normal(0, 0.1).
fn jittered_normals(n_models: usize, n_test: usize, seed: u64, prefix: &str) -> Vec<ScoreVector> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let hyper = Normal::new(0.0, 0.1).unwrap();
    (0..n_models)
        .map(|k| {
            let mu = hyper.sample(&mut rng);
            let d = Normal::new(mu, 1.0).unwrap();
            ScoreVector::new(
                format!("{prefix}{k}"),
                (0..n_test).map(|_| d.sample(&mut rng)).collect(),
            )
        })
        .collect()
}

#[test]
fn in_distribution_candidates_have_small_alpha() {
    let n_test = 2000;
    let mut models = jittered_normals(30, n_test, 1, "r");
    let candidates = jittered_normals(50, n_test, 2, "c");
    models.extend(candidates.iter().cloned());
    let pool = ModelPool::new(models, vec![1; n_test]).unwrap();
    let refs: Vec<String> = (0..30).map(|k| format!("r{k}")).collect();
    let cfg = AlphaConfig {
        rng_seed: 5,
        ..AlphaConfig::default()
    };
    let est = estimate_alpha_batch(&pool, &refs, &candidates, &cfg).unwrap();
    let small = est.iter().filter(|e| e.alpha_hat <= 0.05).count();
    assert!(small * 10 >= 9 * est.len(), "only {small}/50 candidates have α̂ <= 0.05");
}

#[test]
fn self_test_concentrates_at_first_level() {
    let n_test = 1000;
    let pool = ModelPool::new(jittered_normals(1, n_test, 3, "m"), vec![1; n_test]).unwrap();
    let cfg = AlphaConfig {
        allow_candidate_in_reference: true,
        rng_seed: 11,
        ..AlphaConfig::default()
    };
    let est = estimate_alpha(&pool, &["m0"], "m0", &cfg).unwrap();
    let at_first = est
        .per_replicate
        .iter()
        .filter(|r| r.alpha == cfg.alpha_grid[0])
        .count();
    assert!(at_first >= 95, "{at_first}/100 replicates at the first level");
    assert!(est.alpha_hat <= 0.005);
}

#[test]
fn grid_refinement_never_increases_alpha_on_random_cases() {
    let mut violations = 0;
    for case in 0..100u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(1000 + case);
        let shift = Normal::new(0.0, 0.4).unwrap().sample(&mut rng);
        let mut models = jittered_normals(3, 120, case, "r");
        let mut cand = jittered_normals(1, 120, 5000 + case, "c").remove(0);
        cand.gaps.iter_mut().for_each(|g| *g += shift);
        models.push(cand);
        let pool = ModelPool::new(models, vec![1; 120]).unwrap();
        let coarse = AlphaConfig {
            alpha_grid: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            n_bootstrap: 5,
            rng_seed: case,
            ..AlphaConfig::default()
        };
        let fine = AlphaConfig {
            alpha_grid: (0..=40).map(|t| t as f64 / 100.0).collect(),
            ..coarse.clone()
        };
        let refs = ["r0", "r1", "r2"];
        let a = estimate_alpha(&pool, &refs, "c0", &coarse).unwrap();
        let b = estimate_alpha(&pool, &refs, "c0", &fine).unwrap();
        violations += a
            .per_replicate
            .iter()
            .zip(&b.per_replicate)
            .filter(|(x, y)| y.alpha > x.alpha)
            .count();
    }
    assert_eq!(violations, 0);
}

/// Wilcoxon signed-rank test, normal approximation with tie correction;
/// returns the two-sided p-value.
fn signed_rank_p(diffs: &[f64]) -> f64 {
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nz.is_empty() {
        return 1.0;
    }
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = nz.len();
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        ranks[i..=j].iter_mut().for_each(|r| *r = avg);
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w_plus: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean) / var.sqrt();
    2.0 * (1.0 - StatNormal::new(0.0, 1.0).unwrap().cdf(z.abs()))
}

#[test]
fn pairwise_matrix_is_statistically_symmetric() {
    let n_test = 400;
    let models = jittered_normals(15, n_test, 17, "m");
    let pool = ModelPool::new(models, vec![1; n_test]).unwrap();
    let ids: Vec<String> = (0..15).map(|k| format!("m{k}")).collect();
    let cfg = AlphaConfig {
        n_bootstrap: 20,
        rng_seed: 23,
        ..AlphaConfig::default()
    };
    let m = pairwise_alpha(&pool, &ids, &cfg).unwrap();
    let mut diffs = Vec::new();
    for i in 0..15 {
        for j in i + 1..15 {
            diffs.push(m.alpha_hat[i][j] - m.alpha_hat[j][i]);
        }
    }
    diffs.truncate(100);
    let p = signed_rank_p(&diffs);
    assert!(p > 0.01, "p = {p}");
}
