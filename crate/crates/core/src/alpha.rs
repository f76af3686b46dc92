//! Bootstrap estimate of the smallest trimming level at which a candidate
//! passes the robust test against a reference pool.
//!
//! Each replicate `b` draws its resample indices from stream `b` of the
//! configured seed, builds the pooled reference eCDF on the first index set
//! and the candidate eCDF on the second, then walks the α grid upwards until
//! the test accepts. The estimate is the mean of the per-replicate levels.
//! Replicates where no level accepts record the top of the grid and are
//! counted in `saturated`.

use serde::{Deserialize, Serialize};

use crate::ecdf::{interpolate, pooled_ecdf, Ecdf, InterpolatedCdf};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pool::{ModelPool, ScoreVector, SplitMode, SplitPlan};
use crate::rng::replicate_stream;
use crate::trimming::RobustTester;

pub const DEFAULT_BOOTSTRAP: usize = 100;
pub const DEFAULT_EPSILON_A: f64 = 0.01;

/// `{0, 0.005, ..., 0.25}`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=50).map(|t| t as f64 / 200.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaConfig {
    pub alpha_grid: Vec<f64>,
    pub n_bootstrap: usize,
    pub epsilon_a: f64,
    pub rng_seed: u64,
    /// Per-side resample size in bootstrap mode; `None` means the test-set
    /// size. Ignored by the disjoint and shared split modes.
    pub resample_size: Option<usize>,
    pub split: SplitMode,
    /// Scheduling only; never changes results, so it is not serialized.
    #[serde(skip)]
    pub execution: Execution,
    pub allow_candidate_in_reference: bool,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig {
            alpha_grid: default_alpha_grid(),
            n_bootstrap: DEFAULT_BOOTSTRAP,
            epsilon_a: DEFAULT_EPSILON_A,
            rng_seed: 0,
            resample_size: None,
            split: SplitMode::Bootstrap,
            execution: Execution::default(),
            allow_candidate_in_reference: false,
        }
    }
}

impl AlphaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(Error::Empty("alpha grid"));
        }
        if let Some(&bad) = self.alpha_grid.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(Error::domain(format!("alpha grid level {bad} is outside [0, 1)")));
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("alpha grid must be strictly increasing"));
        }
        if self.n_bootstrap == 0 {
            return Err(Error::domain("number of bootstrap replicates must be positive"));
        }
        if !(self.epsilon_a > 0.0 && self.epsilon_a < 1.0) {
            return Err(Error::domain(format!(
                "epsilon_a = {} must lie in (0, 1)",
                self.epsilon_a
            )));
        }
        if self.resample_size == Some(0) {
            return Err(Error::domain("resample size must be positive"));
        }
        Ok(())
    }

    pub fn resample_size_for(&self, n_test: usize) -> usize {
        self.resample_size.unwrap_or(n_test)
    }

    pub fn plan(&self, n_test: usize, replicate: usize) -> Result<SplitPlan> {
        let mut rng = replicate_stream(self.rng_seed, replicate);
        SplitPlan::draw(
            n_test,
            self.resample_size_for(n_test),
            self.split,
            &mut rng,
            self.rng_seed,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub alpha: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub candidate: String,
    pub alpha_hat: f64,
    #[serde(rename = "B")]
    pub n_bootstrap: usize,
    pub grid: Vec<f64>,
    pub saturated: usize,
    pub per_replicate: Vec<ReplicateOutcome>,
}

impl AlphaEstimate {
    fn from_levels(candidate: String, grid: &[f64], levels: &[Option<usize>]) -> Self {
        let top = grid.len() - 1;
        let per_replicate: Vec<ReplicateOutcome> = levels
            .iter()
            .map(|l| ReplicateOutcome {
                alpha: grid[l.unwrap_or(top)],
                accepted: l.is_some(),
            })
            .collect();
        let saturated = levels.iter().filter(|l| l.is_none()).count();
        let alpha_hat = per_replicate.iter().map(|r| r.alpha).sum::<f64>() / per_replicate.len() as f64;
        AlphaEstimate {
            candidate,
            alpha_hat: alpha_hat.clamp(grid[0], grid[top]),
            n_bootstrap: levels.len(),
            grid: grid.to_vec(),
            saturated,
            per_replicate,
        }
    }
}

fn gather(gaps: &[f64], indices: &[usize]) -> Vec<f64> {
    indices.iter().map(|&i| gaps[i]).collect()
}

fn candidate_ecdf(gaps: &[f64], indices: &[usize]) -> Result<Ecdf> {
    Ecdf::from_unsorted_owned(&mut gather(gaps, indices))
}

fn first_level(candidate: &Ecdf, reference: &InterpolatedCdf, cfg: &AlphaConfig) -> Result<Option<usize>> {
    RobustTester::new(candidate, reference, cfg.epsilon_a, candidate.n_obs())?.first_accepting(&cfg.alpha_grid)
}

fn check_lengths(pool: &ModelPool, candidates: &[ScoreVector]) -> Result<()> {
    for c in candidates {
        if c.len() != pool.n_test() {
            return Err(Error::DimensionMismatch {
                what: format!("candidate {}", c.model_id),
                expected: pool.n_test(),
                found: c.len(),
            });
        }
    }
    Ok(())
}

/// α̂ of one pool member against a reference built from `reference_ids`.
pub fn estimate_alpha<S: AsRef<str>>(
    pool: &ModelPool,
    reference_ids: &[S],
    candidate_id: &str,
    cfg: &AlphaConfig,
) -> Result<AlphaEstimate> {
    let candidate = pool.get(candidate_id)?.clone();
    let mut out = estimate_alpha_batch(pool, reference_ids, std::slice::from_ref(&candidate), cfg)?;
    Ok(out.remove(0))
}

/// α̂ of several candidates against one reference. Replicate `b` uses the
/// same resample indices for every candidate, so the result for each
/// candidate equals what [`estimate_alpha`] returns for it alone.
pub fn estimate_alpha_batch<S: AsRef<str>>(
    pool: &ModelPool,
    reference_ids: &[S],
    candidates: &[ScoreVector],
    cfg: &AlphaConfig,
) -> Result<Vec<AlphaEstimate>> {
    cfg.validate()?;
    if reference_ids.is_empty() {
        return Err(Error::Empty("reference ids"));
    }
    check_lengths(pool, candidates)?;
    if !cfg.allow_candidate_in_reference {
        for c in candidates {
            if reference_ids.iter().any(|r| r.as_ref() == c.model_id) {
                return Err(Error::domain(format!(
                    "candidate {} is part of the reference; set allow_candidate_in_reference to test it anyway",
                    c.model_id
                )));
            }
        }
    }
    let members: Vec<&[f64]> = pool
        .select(reference_ids)?
        .into_iter()
        .map(|m| m.gaps.as_slice())
        .collect();
    let n_test = pool.n_test();
    let per_b = cfg
        .execution
        .try_map_indices(cfg.n_bootstrap, |b| -> Result<Vec<Option<usize>>> {
            let plan = cfg.plan(n_test, b)?;
            let reference = interpolate(&pooled_ecdf(&members, &plan.reference_indices)?);
            candidates
                .iter()
                .map(|c| first_level(&candidate_ecdf(&c.gaps, &plan.candidate_indices)?, &reference, cfg))
                .collect()
        })?;
    Ok(candidates
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let levels: Vec<Option<usize>> = per_b.iter().map(|row| row[j]).collect();
            AlphaEstimate::from_levels(c.model_id.clone(), &cfg.alpha_grid, &levels)
        })
        .collect())
}

/// Ordered pairwise α̂: entry `(i, j)` uses model `i` alone as the reference
/// and model `j` as the candidate. The diagonal is the self-test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaMatrix {
    pub ids: Vec<String>,
    pub alpha_hat: Vec<Vec<f64>>,
    pub saturated: Vec<Vec<usize>>,
    #[serde(rename = "B")]
    pub n_bootstrap: usize,
    pub grid: Vec<f64>,
}

pub fn pairwise_alpha<S: AsRef<str>>(pool: &ModelPool, ids: &[S], cfg: &AlphaConfig) -> Result<AlphaMatrix> {
    cfg.validate()?;
    if ids.len() < 2 {
        return Err(Error::domain("pairwise alpha needs at least two ids"));
    }
    let models = pool.select(ids)?;
    let k = models.len();
    let n_test = pool.n_test();
    let per_b = cfg
        .execution
        .try_map_indices(cfg.n_bootstrap, |b| -> Result<Vec<Option<usize>>> {
            let plan = cfg.plan(n_test, b)?;
            let references = models
                .iter()
                .map(|m| Ok(interpolate(&candidate_ecdf(&m.gaps, &plan.reference_indices)?)))
                .collect::<Result<Vec<_>>>()?;
            let candidates = models
                .iter()
                .map(|m| candidate_ecdf(&m.gaps, &plan.candidate_indices))
                .collect::<Result<Vec<_>>>()?;
            let mut cells = Vec::with_capacity(k * k);
            for reference in &references {
                for candidate in &candidates {
                    cells.push(first_level(candidate, reference, cfg)?);
                }
            }
            Ok(cells)
        })?;
    let mut alpha_hat = vec![vec![0.0; k]; k];
    let mut saturated = vec![vec![0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let levels: Vec<Option<usize>> = per_b.iter().map(|row| row[i * k + j]).collect();
            let est = AlphaEstimate::from_levels(String::new(), &cfg.alpha_grid, &levels);
            alpha_hat[i][j] = est.alpha_hat;
            saturated[i][j] = est.saturated;
        }
    }
    Ok(AlphaMatrix {
        ids: models.iter().map(|m| m.model_id.clone()).collect(),
        alpha_hat,
        saturated,
        n_bootstrap: cfg.n_bootstrap,
        grid: cfg.alpha_grid.clone(),
    })
}

/// For each id, α̂ against the reference formed by all the other ids.
pub fn leave_one_out_alpha<S: AsRef<str>>(
    pool: &ModelPool,
    ids: &[S],
    cfg: &AlphaConfig,
) -> Result<Vec<AlphaEstimate>> {
    if ids.len() < 2 {
        return Err(Error::domain("leave-one-out alpha needs at least two ids"));
    }
    let ids: Vec<&str> = ids.iter().map(|s| s.as_ref()).collect();
    (0..ids.len())
        .map(|j| {
            let rest: Vec<&str> = ids
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, s)| *s)
                .collect();
            estimate_alpha(pool, &rest, ids[j], cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn normal_pool(n_models: usize, n_test: usize, shift_last: f64, seed: u64) -> ModelPool {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let std = Normal::new(0.0, 1.0).unwrap();
        let models = (0..n_models)
            .map(|k| {
                let shift = if k + 1 == n_models { shift_last } else { 0.0 };
                let gaps = (0..n_test).map(|_| std.sample(&mut rng) + shift).collect();
                ScoreVector::new(format!("m{k}"), gaps)
            })
            .collect();
        ModelPool::new(models, vec![1; n_test]).unwrap()
    }

    fn small_cfg() -> AlphaConfig {
        AlphaConfig {
            n_bootstrap: 12,
            rng_seed: 7,
            ..AlphaConfig::default()
        }
    }

    #[test]
    fn default_grid_has_51_levels() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 51);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[50], 0.25);
        assert_eq!(g[1], 0.005);
    }

    #[test]
    fn config_validation() {
        let mut cfg = AlphaConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.alpha_grid = vec![];
        assert!(matches!(cfg.validate(), Err(Error::Empty(_))));
        cfg.alpha_grid = vec![0.1, 0.1];
        assert!(cfg.validate().is_err());
        cfg.alpha_grid = vec![0.0, 1.0];
        assert!(cfg.validate().is_err());
        cfg = AlphaConfig {
            epsilon_a: 1.0,
            ..AlphaConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg = AlphaConfig {
            n_bootstrap: 0,
            ..AlphaConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn identical_candidate_accepts_at_first_level() {
        let base = normal_pool(1, 500, 0.0, 1);
        let gaps = base.models()[0].gaps.clone();
        let pool = ModelPool::new(
            vec![ScoreVector::new("ref", gaps.clone()), ScoreVector::new("cand", gaps)],
            vec![1; 500],
        )
        .unwrap();
        let cfg = AlphaConfig {
            split: SplitMode::Shared,
            ..small_cfg()
        };
        let est = estimate_alpha(&pool, &["ref"], "cand", &cfg).unwrap();
        assert_eq!(est.alpha_hat, 0.0);
        assert_eq!(est.saturated, 0);
        assert!(est.per_replicate.iter().all(|r| r.accepted && r.alpha == 0.0));
        assert_eq!(est.per_replicate.len(), 12);
    }

    #[test]
    fn far_shift_saturates() {
        let mut pool = normal_pool(4, 400, 0.0, 2);
        let shifted: Vec<f64> = pool.models()[3].gaps.iter().map(|g| g + 1000.0).collect();
        let mut models = pool.models().to_vec();
        models[3] = ScoreVector::new("m3", shifted);
        pool = ModelPool::new(models, vec![1; 400]).unwrap();
        let cfg = AlphaConfig {
            alpha_grid: vec![0.0, 0.1, 0.25, 0.5],
            ..small_cfg()
        };
        let est = estimate_alpha(&pool, &["m0", "m1", "m2"], "m3", &cfg).unwrap();
        assert_eq!(est.alpha_hat, 0.5);
        assert_eq!(est.saturated, 12);
        assert!(est.per_replicate.iter().all(|r| !r.accepted));
    }

    #[test]
    fn deterministic_and_execution_independent() {
        let pool = normal_pool(5, 300, 0.3, 3);
        let cfg = small_cfg();
        let a = estimate_alpha(&pool, &["m0", "m1", "m2", "m3"], "m4", &cfg).unwrap();
        let b = estimate_alpha(&pool, &["m0", "m1", "m2", "m3"], "m4", &cfg).unwrap();
        let seq = estimate_alpha(
            &pool,
            &["m0", "m1", "m2", "m3"],
            "m4",
            &AlphaConfig {
                execution: Execution::Sequential,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a, seq);
        let other = estimate_alpha(
            &pool,
            &["m0", "m1", "m2", "m3"],
            "m4",
            &AlphaConfig { rng_seed: 8, ..cfg },
        )
        .unwrap();
        assert_ne!(a.per_replicate, other.per_replicate);
    }

    #[test]
    fn batch_matches_single_candidate_runs() {
        let pool = normal_pool(6, 300, 0.2, 4);
        let cfg = small_cfg();
        let refs = ["m0", "m1", "m2"];
        let cands: Vec<ScoreVector> = pool.models()[3..].to_vec();
        let batch = estimate_alpha_batch(&pool, &refs, &cands, &cfg).unwrap();
        for (est, c) in batch.iter().zip(&cands) {
            assert_eq!(est, &estimate_alpha(&pool, &refs, &c.model_id, &cfg).unwrap());
        }
    }

    #[test]
    fn grid_refinement_never_increases_replicate_levels() {
        let pool = normal_pool(4, 300, 0.4, 5);
        let coarse = AlphaConfig {
            alpha_grid: vec![0.0, 0.1, 0.2, 0.3],
            ..small_cfg()
        };
        let fine = AlphaConfig {
            alpha_grid: (0..=30).map(|t| t as f64 / 100.0).collect(),
            ..small_cfg()
        };
        let a = estimate_alpha(&pool, &["m0", "m1", "m2"], "m3", &coarse).unwrap();
        let b = estimate_alpha(&pool, &["m0", "m1", "m2"], "m3", &fine).unwrap();
        for (x, y) in a.per_replicate.iter().zip(&b.per_replicate) {
            assert!(y.alpha <= x.alpha);
        }
    }

    #[test]
    fn candidate_in_reference_is_rejected_by_default() {
        let pool = normal_pool(3, 100, 0.0, 6);
        let cfg = small_cfg();
        assert!(estimate_alpha(&pool, &["m0", "m1"], "m1", &cfg).is_err());
        let allowed = AlphaConfig {
            allow_candidate_in_reference: true,
            ..cfg
        };
        assert!(estimate_alpha(&pool, &["m0", "m1"], "m1", &allowed).is_ok());
        assert!(matches!(
            estimate_alpha(&pool, &["m0"], "zz", &allowed),
            Err(Error::UnknownModel(_))
        ));
    }

    #[test]
    fn pairwise_identical_models_sit_at_first_level() {
        let base = normal_pool(1, 400, 0.0, 9);
        let gaps = base.models()[0].gaps.clone();
        let pool = ModelPool::new(
            vec![ScoreVector::new("a", gaps.clone()), ScoreVector::new("b", gaps)],
            vec![1; 400],
        )
        .unwrap();
        let cfg = AlphaConfig {
            alpha_grid: vec![0.02, 0.1, 0.2],
            split: SplitMode::Shared,
            ..small_cfg()
        };
        let m = pairwise_alpha(&pool, &["a", "b"], &cfg).unwrap();
        assert_eq!(m.alpha_hat, vec![vec![0.02; 2]; 2]);
        assert_eq!(m.saturated, vec![vec![0; 2]; 2]);
    }

    #[test]
    fn pairwise_entries_stay_in_grid_range() {
        let pool = normal_pool(3, 200, 0.8, 10);
        let cfg = AlphaConfig {
            alpha_grid: vec![0.01, 0.05, 0.1],
            ..small_cfg()
        };
        let m = pairwise_alpha(&pool, &["m0", "m1", "m2"], &cfg).unwrap();
        for row in &m.alpha_hat {
            for &v in row {
                assert!((0.01..=0.1).contains(&v));
            }
        }
        assert!(pairwise_alpha(&pool, &["m0"], &cfg).is_err());
    }

    #[test]
    fn leave_one_out_returns_one_estimate_per_id() {
        let pool = normal_pool(4, 200, 0.0, 11);
        let out = leave_one_out_alpha(&pool, &["m0", "m1", "m2", "m3"], &small_cfg()).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out[2].candidate, "m2");
    }

    #[test]
    fn json_shape() {
        let est = AlphaEstimate::from_levels("c".into(), &[0.0, 0.5], &[Some(0), None]);
        let v = serde_json::to_value(&est).unwrap();
        assert_eq!(v["B"], 2);
        assert_eq!(v["saturated"], 1);
        assert_eq!(v["alpha_hat"], 0.25);
        assert_eq!(v["per_replicate"][1]["accepted"], false);
    }
}
