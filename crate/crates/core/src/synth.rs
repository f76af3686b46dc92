//! Synthetic model pools and the ensemble-size sweep.
//!
//! Every synthetic model sees the same test points. Point `j` carries a latent
//! class `y_j` and a latent margin shared by all models; model `k` perturbs
//! that margin with its own scale and shift jitter plus a little independent
//! noise. Seed-to-seed variability is thus mostly systematic, and averaging
//! the logits of several models moves the ensemble toward the pool consensus.
//!
//! The sweep splits the pool into a reference half and a candidate half,
//! draws ensembles of each requested size from the candidate half, and
//! records for each ensemble its sup distance to the reference eCDF, its α̂,
//! accuracy, churn against the ensemble of the whole pool, and ECE.

use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::alpha::{estimate_alpha_batch, AlphaConfig};
use crate::bounds::two_sample_threshold;
use crate::ecdf::{ecdf_of, pooled_ecdf, sup_distance};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::{accuracy, churn, ece, DEFAULT_BINS};
use crate::numfmt::format_f64;
use crate::pool::{ensemble_gaps, mean_gaps, ModelPool, ScoreVector};
use crate::rng::{member_stream, substream, SYNTH_BASE};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Latent margin `y_j·μ + σ·ξ_j`; model gap `s_k·(margin + b_k + τ·η_jk)`.
    #[default]
    GaussianMixture,
    /// Gaussian inputs in `dim` dimensions labelled by a noisy linear
    /// teacher; model gap `s_k·(w_k·x_j) + τ·η_jk` with `w_k` a jittered
    /// copy of the teacher weights.
    LogisticTeacher,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_models: usize,
    pub n_test: usize,
    pub family: Family,
    /// Class separation `μ` (gaussian mixture) or teacher weight norm.
    pub margin_mean: f64,
    /// Spread of the shared latent margin, or teacher label noise.
    pub latent_sd: f64,
    /// Per-model shift jitter `b_k` (gaussian mixture) or weight jitter.
    pub shift_jitter: f64,
    /// Per-model scale jitter: `s_k = exp(scale_jitter·ζ_k)`.
    pub scale_jitter: f64,
    /// Independent per-point, per-model noise `τ`.
    pub idiosyncratic_sd: f64,
    /// Probability that an observed label is flipped.
    pub label_noise: f64,
    /// Input dimension for the logistic teacher.
    pub dim: usize,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_models: 40,
            n_test: 1000,
            family: Family::GaussianMixture,
            margin_mean: 2.0,
            latent_sd: 1.5,
            shift_jitter: 0.4,
            scale_jitter: 0.15,
            idiosyncratic_sd: 0.1,
            label_noise: 0.0,
            dim: 8,
            rng_seed: 0,
        }
    }
}

pub const PRESETS: &[&str] = &["cnn-analogue", "small"];

impl SynthSpec {
    /// Named presets. `cnn-analogue` is the 200-model, 4000-point pool
    /// used for the ensemble-size study; `small` is a quick 40 x 1000 pool.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "cnn-analogue" => Ok(SynthSpec {
                n_models: 200,
                n_test: 4000,
                ..SynthSpec::default()
            }),
            "small" => Ok(SynthSpec::default()),
            other => Err(Error::domain(format!(
                "unknown preset {other:?}; available: {}",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_models == 0 || self.n_test == 0 {
            return Err(Error::domain(
                "synthetic pool needs at least one model and one test point",
            ));
        }
        let params = [
            ("margin_mean", self.margin_mean),
            ("latent_sd", self.latent_sd),
            ("shift_jitter", self.shift_jitter),
            ("scale_jitter", self.scale_jitter),
            ("idiosyncratic_sd", self.idiosyncratic_sd),
        ];
        for (name, v) in params {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::domain("label_noise must lie in [0, 1]"));
        }
        if self.family == Family::LogisticTeacher && self.dim == 0 {
            return Err(Error::domain("logistic teacher needs dim >= 1"));
        }
        Ok(())
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn flip_labels(labels: &mut [i8], p: f64, rng: &mut impl Rng) {
    if p > 0.0 {
        for y in labels.iter_mut() {
            if rng.random::<f64>() < p {
                *y = -*y;
            }
        }
    }
}

/// Generate a pool. Deterministic in `spec.rng_seed`; model `k` depends only
/// on the seed, the shared latents and `k`, so growing `n_models` keeps the
/// existing models unchanged.
pub fn generate_pool(spec: &SynthSpec) -> Result<ModelPool> {
    spec.validate()?;
    let mut latent_rng = substream(spec.rng_seed, SYNTH_BASE);
    let n = spec.n_test;
    let (models, labels) = match spec.family {
        Family::GaussianMixture => {
            let classes: Vec<i8> = (0..n)
                .map(|_| if latent_rng.random::<bool>() { 1 } else { -1 })
                .collect();
            let margin: Vec<f64> = classes
                .iter()
                .map(|&y| y as f64 * spec.margin_mean + spec.latent_sd * normal(&mut latent_rng))
                .collect();
            let mut labels = classes;
            flip_labels(&mut labels, spec.label_noise, &mut latent_rng);
            let models = (0..spec.n_models)
                .map(|k| {
                    let mut rng = substream(spec.rng_seed, SYNTH_BASE + 1 + k as u64);
                    let scale = (spec.scale_jitter * normal(&mut rng)).exp();
                    let shift = spec.shift_jitter * normal(&mut rng);
                    let gaps = margin
                        .iter()
                        .map(|&m| scale * (m + shift + spec.idiosyncratic_sd * normal(&mut rng)))
                        .collect();
                    ScoreVector::new(format!("m{k:03}"), gaps)
                })
                .collect();
            (models, labels)
        }
        Family::LogisticTeacher => {
            let d = spec.dim;
            let raw: Vec<f64> = (0..d).map(|_| normal(&mut latent_rng)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let teacher: Vec<f64> = raw.iter().map(|v| v / norm * spec.margin_mean).collect();
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| normal(&mut latent_rng)).collect())
                .collect();
            let mut labels: Vec<i8> = xs
                .iter()
                .map(|x| {
                    let s: f64 = x.iter().zip(&teacher).map(|(a, b)| a * b).sum::<f64>()
                        + spec.latent_sd * normal(&mut latent_rng);
                    if s >= 0.0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            flip_labels(&mut labels, spec.label_noise, &mut latent_rng);
            let models = (0..spec.n_models)
                .map(|k| {
                    let mut rng = substream(spec.rng_seed, SYNTH_BASE + 1 + k as u64);
                    let scale = (spec.scale_jitter * normal(&mut rng)).exp();
                    let w: Vec<f64> = teacher
                        .iter()
                        .map(|t| t + spec.shift_jitter * normal(&mut rng))
                        .collect();
                    let gaps = xs
                        .iter()
                        .map(|x| {
                            let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                            scale * s + spec.idiosyncratic_sd * normal(&mut rng)
                        })
                        .collect();
                    ScoreVector::new(format!("m{k:03}"), gaps)
                })
                .collect();
            (models, labels)
        }
    };
    let mut pool = ModelPool::new(models, labels)?;
    pool.provenance.insert("generator".into(), serde_json::to_string(spec)?);
    Ok(pool)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemberSampling {
    /// Distinct members within one ensemble.
    #[default]
    WithoutReplacement,
    WithReplacement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub alpha: AlphaConfig,
    pub member_sampling: MemberSampling,
    pub bins: usize,
    /// Seed for member selection; α̂ resampling uses `alpha.rng_seed`.
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sizes: vec![3, 5, 10, 30],
            repetitions: 100,
            alpha: AlphaConfig::default(),
            member_sampling: MemberSampling::default(),
            bins: DEFAULT_BINS,
            seed: 0,
        }
    }
}

/// One sampled ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepEnsemble {
    pub size: usize,
    pub rep: usize,
    pub member_ids: Vec<String>,
    pub gaps: ScoreVector,
}

/// Reference ids (first half) and candidate ids (second half) of a pool.
pub fn split_halves(pool: &ModelPool) -> Result<(Vec<String>, Vec<String>)> {
    if pool.n_models() < 2 {
        return Err(Error::domain("the sweep needs at least two models"));
    }
    let ids: Vec<String> = pool.ids().into_iter().map(String::from).collect();
    let half = ids.len() / 2;
    Ok((ids[..half].to_vec(), ids[half..].to_vec()))
}

/// Draw every ensemble of the sweep. Ensemble `(size index s, rep r)` uses
/// its own member stream, so the draw does not depend on the other sizes.
pub fn draw_ensembles(pool: &ModelPool, cfg: &SweepConfig) -> Result<Vec<SweepEnsemble>> {
    let (_, candidate_ids) = split_halves(pool)?;
    let available = candidate_ids.len();
    if cfg.sizes.is_empty() {
        return Err(Error::Empty("ensemble sizes"));
    }
    if cfg.repetitions == 0 {
        return Err(Error::domain("repetitions must be positive"));
    }
    for &size in &cfg.sizes {
        if size == 0 {
            return Err(Error::domain("ensemble size must be positive"));
        }
        if cfg.member_sampling == MemberSampling::WithoutReplacement && size > available {
            return Err(Error::domain(format!(
                "ensemble size {size} exceeds the {available} models of the candidate half"
            )));
        }
    }
    let offset = pool.n_models() - available;
    let mut out = Vec::with_capacity(cfg.sizes.len() * cfg.repetitions);
    for (s, &size) in cfg.sizes.iter().enumerate() {
        for rep in 0..cfg.repetitions {
            let mut rng = member_stream(cfg.seed, s, rep);
            let mut picks: Vec<usize> = match cfg.member_sampling {
                MemberSampling::WithoutReplacement => sample(&mut rng, available, size).into_vec(),
                MemberSampling::WithReplacement => (0..size).map(|_| rng.random_range(0..available)).collect(),
            };
            picks.sort_unstable();
            let members: Vec<&[f64]> = picks
                .iter()
                .map(|&i| pool.models()[offset + i].gaps.as_slice())
                .collect();
            let gaps = ScoreVector::new(format!("ensemble[{size}]#{rep}"), mean_gaps(&members));
            out.push(SweepEnsemble {
                size,
                rep,
                member_ids: picks.iter().map(|&i| candidate_ids[i].clone()).collect(),
                gaps,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub size: usize,
    pub rep: usize,
    pub sup_distance: f64,
    pub alpha_hat: f64,
    pub saturated: usize,
    pub accuracy: f64,
    pub churn: usize,
    pub churn_frac: f64,
    pub ece: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub member_sampling: MemberSampling,
    pub n_reference: usize,
    pub n_candidates: usize,
    pub n_test: usize,
    pub alpha: AlphaConfig,
    /// Acceptance threshold `δ_a + 1/N` of the robust test.
    pub threshold: f64,
    pub bins: usize,
    pub records: Vec<SweepRecord>,
}

pub fn ensemble_sweep(pool: &ModelPool, cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.bins == 0 {
        return Err(Error::domain("number of ECE bins must be at least 1"));
    }
    cfg.alpha.validate()?;
    let (reference_ids, candidate_ids) = split_halves(pool)?;
    let ensembles = draw_ensembles(pool, cfg)?;
    let all_ids = pool.ids();
    let full = ensemble_gaps(pool, &all_ids)?;

    let reference_members: Vec<&[f64]> = pool
        .select(&reference_ids)?
        .into_iter()
        .map(|m| m.gaps.as_slice())
        .collect();
    let every_point: Vec<usize> = (0..pool.n_test()).collect();
    let reference = pooled_ecdf(&reference_members, &every_point)?;

    let candidates: Vec<ScoreVector> = ensembles.iter().map(|e| e.gaps.clone()).collect();
    let alphas = estimate_alpha_batch(pool, &reference_ids, &candidates, &cfg.alpha)?;

    let per_ensemble = cfg
        .alpha
        .execution
        .try_map_indices(ensembles.len(), |i| -> Result<SweepRecord> {
            let e = &ensembles[i];
            let churn_count = churn(&e.gaps, &full)?;
            Ok(SweepRecord {
                size: e.size,
                rep: e.rep,
                sup_distance: sup_distance(&ecdf_of(&e.gaps)?, &reference),
                alpha_hat: alphas[i].alpha_hat,
                saturated: alphas[i].saturated,
                accuracy: accuracy(&e.gaps, pool.labels())?,
                churn: churn_count,
                churn_frac: churn_count as f64 / pool.n_test() as f64,
                ece: ece(&e.gaps, pool.labels(), cfg.bins)?,
            })
        })?;

    let n = cfg.alpha.resample_size_for(pool.n_test());
    Ok(SweepResult {
        sizes: cfg.sizes.clone(),
        repetitions: cfg.repetitions,
        member_sampling: cfg.member_sampling,
        n_reference: reference_ids.len(),
        n_candidates: candidate_ids.len(),
        n_test: pool.n_test(),
        alpha: cfg.alpha.clone(),
        threshold: two_sample_threshold(n, cfg.alpha.epsilon_a)? + 1.0 / n as f64,
        bins: cfg.bins,
        records: per_ensemble,
    })
}

/// Tidy long-form CSV: `size,rep,metric,value`.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    writeln!(out, "size,rep,metric,value")?;
    for r in &result.records {
        let rows: [(&str, f64); 7] = [
            ("sup_distance", r.sup_distance),
            ("alpha_hat", r.alpha_hat),
            ("saturated", r.saturated as f64),
            ("accuracy", r.accuracy),
            ("churn", r.churn as f64),
            ("churn_frac", r.churn_frac),
            ("ece", r.ece),
        ];
        for (metric, value) in rows {
            writeln!(out, "{},{},{},{}", r.size, r.rep, metric, format_f64(value))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (zero for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub size: usize,
    pub repetitions: usize,
    pub pct_alpha_le_cut: f64,
    pub median_alpha_hat: f64,
    pub median_sup_distance: f64,
    pub accuracy: MeanStd,
    pub churn: MeanStd,
    pub ece: MeanStd,
}

/// One row per ensemble size, in the order the sizes were requested.
pub fn size_summary(result: &SweepResult, alpha_cut: f64) -> Result<Vec<SummaryRow>> {
    if result.records.is_empty() {
        return Err(Error::Empty("sweep records"));
    }
    result
        .sizes
        .iter()
        .map(|&size| {
            let rows: Vec<&SweepRecord> = result.records.iter().filter(|r| r.size == size).collect();
            if rows.is_empty() {
                return Err(Error::Empty("records for an ensemble size"));
            }
            let col = |f: fn(&SweepRecord) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let alphas = col(|r| r.alpha_hat);
            let hits = alphas.iter().filter(|&&a| a <= alpha_cut).count();
            Ok(SummaryRow {
                size,
                repetitions: rows.len(),
                pct_alpha_le_cut: 100.0 * hits as f64 / rows.len() as f64,
                median_alpha_hat: median(&alphas),
                median_sup_distance: median(&col(|r| r.sup_distance)),
                accuracy: MeanStd::of(&col(|r| r.accuracy)),
                churn: MeanStd::of(&col(|r| r.churn as f64)),
                ece: MeanStd::of(&col(|r| r.ece)),
            })
        })
        .collect()
}

/// Convenience for tests and benches: run a sweep with a sequential or
/// parallel executor without touching the rest of the configuration.
pub fn with_execution(cfg: &SweepConfig, execution: Execution) -> SweepConfig {
    let mut c = cfg.clone();
    c.alpha.execution = execution;
    c
}
