use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use seedscope::alpha::{estimate_alpha, leave_one_out_alpha, pairwise_alpha, AlphaConfig};
use seedscope::bounds::{
    band_coverage_bound, l1_bound, one_sample_radius, two_sample_constant, two_sample_threshold, union_bound_epsilon,
    L1BoundInputs,
};
use seedscope::ecdf::{interpolate, pooled_ecdf, sup_distance, Ecdf};
use seedscope::exec::Execution;
use seedscope::metrics::metrics_report;
use seedscope::numfmt::format_f64;
use seedscope::pool::{clip_pool, load_pool, write_csv, write_jsonl, ModelPool, PoolFormat, SplitMode};
use seedscope::synth::{
    ensemble_sweep, generate_pool, size_summary, write_sweep_csv, Family, MemberSampling, SweepConfig, SynthSpec,
};
use seedscope::trimming::{build_envelope, robust_test, RobustTestResult};

use crate::args::*;
use crate::manifest::{emit, RunManifest};

/// Exit status of a successful run.
pub const ACCEPT: u8 = 0;
pub const REJECT: u8 = 3;

/// An invalid combination of arguments (exit status 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn split_mode(s: SplitArg) -> SplitMode {
    match s {
        SplitArg::Bootstrap => SplitMode::Bootstrap,
        SplitArg::Disjoint => SplitMode::Disjoint,
        SplitArg::Shared => SplitMode::Shared,
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn load(args: &PoolArgs, manifest: &mut RunManifest) -> Result<ModelPool> {
    load_path(&args.pool, args.labels.as_deref(), args.s_max, manifest)
}

fn load_path(path: &Path, labels: Option<&Path>, s_max: f64, manifest: &mut RunManifest) -> Result<ModelPool> {
    let format = PoolFormat::from_path(path).ok_or_else(|| {
        usage(format!(
            "cannot infer the pool format of {}; use .csv or .jsonl",
            path.display()
        ))
    })?;
    manifest.add_input("pool", path)?;
    if format == PoolFormat::Jsonl {
        let sidecar = labels
            .map(Path::to_path_buf)
            .unwrap_or_else(|| path.with_file_name("labels.json"));
        manifest.add_input("labels", &sidecar)?;
    }
    let pool = load_pool(path, format, labels).with_context(|| format!("loading {}", path.display()))?;
    Ok(clip_pool(&pool, s_max)?)
}

/// Reference ids from the flags, or every model except `exclude`.
fn resolve_reference(
    args: &ReferenceArgs,
    pool: &ModelPool,
    exclude: Option<&str>,
    manifest: &mut RunManifest,
) -> Result<Vec<String>> {
    let ids: Vec<String> = if let Some(ids) = &args.reference_ids {
        ids.iter()
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    } else if let Some(path) = &args.reference_file {
        manifest.add_input("reference_file", path)?;
        fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim().to_string())
            .filter(|l| !l.is_empty())
            .collect()
    } else {
        pool.ids()
            .into_iter()
            .filter(|id| Some(*id) != exclude)
            .map(String::from)
            .collect()
    };
    if ids.is_empty() {
        return Err(usage("the reference set is empty"));
    }
    pool.select(&ids)?;
    Ok(ids)
}

fn check_candidate(refs: &[String], candidate: &str, allow: bool) -> Result<()> {
    if refs.iter().any(|r| r == candidate) {
        if !allow {
            return Err(usage(format!(
                "candidate {candidate} is part of the reference; pass --allow-candidate-in-reference to test it anyway"
            )));
        }
        eprintln!("warning: candidate {candidate} is also a reference member");
    }
    Ok(())
}

/// Comma list `0,0.01,0.05` or inclusive range `start:stop:step`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || usage(format!("cannot parse alpha grid {text:?}"));
    if text.contains(':') {
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        // Integer multiples keep the levels free of accumulated rounding.
        let scale = (1.0 / step).round();
        let exact = (scale * step - 1.0).abs() < 1e-12;
        Ok((0..=count)
            .map(|i| {
                if exact {
                    start + i as f64 / scale
                } else {
                    start + i as f64 * step
                }
            })
            .collect())
    } else {
        text.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    }
}

fn alpha_config(opts: &AlphaOpts, allow: bool) -> Result<AlphaConfig> {
    let cfg = AlphaConfig {
        alpha_grid: parse_grid(&opts.alpha_grid)?,
        n_bootstrap: opts.bootstrap,
        epsilon_a: opts.eps_a,
        rng_seed: opts.seed,
        resample_size: opts.resample_size,
        split: split_mode(opts.split),
        execution: execution(opts.sequential),
        allow_candidate_in_reference: allow,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct KsReport<'a> {
    candidate: &'a str,
    n_reference: usize,
    n: usize,
    #[serde(flatten)]
    test: RobustTestResult,
    /// Classical two-sample distance between the step eCDFs.
    sup_distance: f64,
}

pub fn ks(args: &KsArgs) -> Result<u8> {
    let mut manifest = RunManifest::new("ks");
    let pool = load(&args.pool, &mut manifest)?;
    pool.get(&args.candidate)?;
    let refs = resolve_reference(&args.reference, &pool, Some(&args.candidate), &mut manifest)?;
    check_candidate(&refs, &args.candidate, args.allow_candidate_in_reference)?;
    let cfg = AlphaConfig {
        rng_seed: args.seed,
        split: split_mode(args.split),
        resample_size: args.resample_size,
        ..AlphaConfig::default()
    };
    let plan = cfg.plan(pool.n_test(), 0)?;
    let members: Vec<&[f64]> = pool.select(&refs)?.into_iter().map(|m| m.gaps.as_slice()).collect();
    let reference = pooled_ecdf(&members, &plan.reference_indices)?;
    let gaps = &pool.get(&args.candidate)?.gaps;
    let candidate = Ecdf::from_sample(&plan.candidate_indices.iter().map(|&i| gaps[i]).collect::<Vec<_>>())?;
    let n = candidate.n_obs();
    let test = robust_test(&candidate, &reference, args.alpha, args.eps_a, n)?;
    manifest.params = json!({
        "pool": args.pool.pool.display().to_string(),
        "s_max": args.pool.s_max,
        "reference_ids": refs,
        "candidate": args.candidate,
        "eps_a": args.eps_a,
        "alpha": args.alpha,
        "split": cfg.split,
        "seed": args.seed,
        "resample_size": cfg.resample_size_for(pool.n_test()),
    });
    let accept = test.accept;
    let report = KsReport {
        candidate: &args.candidate,
        n_reference: refs.len(),
        n,
        sup_distance: sup_distance(&candidate, &reference),
        test,
    };
    emit(&manifest, &report, args.out.as_deref(), "result.json")?;
    if let Some(dir) = &args.out {
        let interp = interpolate(&reference);
        build_envelope(&candidate, &interp, args.alpha)?
            .write_csv(BufWriter::new(File::create(dir.join("envelope.csv"))?))?;
        interp.write_csv(BufWriter::new(File::create(dir.join("reference.csv"))?))?;
    }
    Ok(if accept { ACCEPT } else { REJECT })
}

fn alpha_params(opts: &AlphaOpts, cfg: &AlphaConfig, pool_args: &PoolArgs) -> serde_json::Value {
    json!({
        "pool": pool_args.pool.display().to_string(),
        "s_max": pool_args.s_max,
        "eps_a": cfg.epsilon_a,
        "alpha_grid": cfg.alpha_grid,
        "bootstrap": cfg.n_bootstrap,
        "seed": cfg.rng_seed,
        "split": cfg.split,
        "resample_size": opts.resample_size,
        "allow_candidate_in_reference": cfg.allow_candidate_in_reference,
    })
}

pub fn alpha(args: &AlphaArgs) -> Result<u8> {
    let mut manifest = RunManifest::new("alpha");
    let pool = load(&args.pool, &mut manifest)?;
    let cfg = alpha_config(&args.opts, args.allow_candidate_in_reference)?;
    let mut params = alpha_params(&args.opts, &cfg, &args.pool);
    let out = args.out.as_deref();
    let resolve_ids = |ids: &Option<Vec<String>>| -> Result<Vec<String>> {
        let ids: Vec<String> = match ids {
            Some(ids) => ids.clone(),
            None => pool.ids().into_iter().map(String::from).collect(),
        };
        pool.select(&ids)?;
        Ok(ids)
    };
    match args.mode {
        AlphaMode::Single => {
            let candidate = args
                .candidate
                .as_deref()
                .ok_or_else(|| usage("--candidate is required in single mode"))?;
            pool.get(candidate)?;
            let refs = resolve_reference(&args.reference, &pool, Some(candidate), &mut manifest)?;
            check_candidate(&refs, candidate, args.allow_candidate_in_reference)?;
            params["mode"] = json!("single");
            params["candidate"] = json!(candidate);
            params["reference_ids"] = json!(refs);
            manifest.params = params;
            let est = estimate_alpha(&pool, &refs, candidate, &cfg)?;
            emit(&manifest, &est, out, "alpha.json")?;
            if let Some(dir) = out {
                let mut w = BufWriter::new(File::create(dir.join("replicates.csv"))?);
                writeln!(w, "replicate,alpha,accepted")?;
                for (b, r) in est.per_replicate.iter().enumerate() {
                    writeln!(w, "{b},{},{}", format_f64(r.alpha), r.accepted)?;
                }
            }
        }
        AlphaMode::Pairwise => {
            let ids = resolve_ids(&args.ids)?;
            params["mode"] = json!("pairwise");
            params["ids"] = json!(ids);
            manifest.params = params;
            let m = pairwise_alpha(&pool, &ids, &cfg)?;
            emit(&manifest, &m, out, "alpha.json")?;
            if let Some(dir) = out {
                let mut w = BufWriter::new(File::create(dir.join("matrix.csv"))?);
                writeln!(w, "reference,candidate,alpha_hat,saturated")?;
                for (i, row) in m.alpha_hat.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        writeln!(w, "{},{},{},{}", m.ids[i], m.ids[j], format_f64(*v), m.saturated[i][j])?;
                    }
                }
            }
        }
        AlphaMode::LeaveOneOut => {
            let ids = resolve_ids(&args.ids)?;
            params["mode"] = json!("leave-one-out");
            params["ids"] = json!(ids);
            manifest.params = params;
            let est = leave_one_out_alpha(&pool, &ids, &cfg)?;
            emit(&manifest, &est, out, "alpha.json")?;
            if let Some(dir) = out {
                let mut w = BufWriter::new(File::create(dir.join("leave_one_out.csv"))?);
                writeln!(w, "candidate,alpha_hat,saturated")?;
                for e in &est {
                    writeln!(w, "{},{},{}", e.candidate, format_f64(e.alpha_hat), e.saturated)?;
                }
            }
        }
    }
    Ok(ACCEPT)
}

#[derive(Serialize)]
struct SweepReport {
    n_test: usize,
    n_reference: usize,
    n_candidates: usize,
    threshold: f64,
    alpha_cut: f64,
    summary: Vec<seedscope::synth::SummaryRow>,
}

pub fn sweep(args: &SweepArgs) -> Result<u8> {
    let mut manifest = RunManifest::new("sweep");
    let (pool, source) = match &args.pool {
        Some(path) => (
            load_path(path, args.labels.as_deref(), args.s_max, &mut manifest)?,
            json!({ "pool": path.display().to_string() }),
        ),
        None => {
            let spec = SynthSpec {
                rng_seed: args.synth_seed,
                ..SynthSpec::preset(&args.preset)?
            };
            let pool = clip_pool(&generate_pool(&spec)?, args.s_max)?;
            (pool, json!({ "synthetic": spec }))
        }
    };
    let cfg = SweepConfig {
        sizes: args.sizes.clone(),
        repetitions: args.reps,
        alpha: alpha_config(&args.opts, false)?,
        member_sampling: match args.member_sampling {
            SamplingArg::WithoutReplacement => MemberSampling::WithoutReplacement,
            SamplingArg::WithReplacement => MemberSampling::WithReplacement,
        },
        bins: args.bins,
        seed: args.opts.seed,
    };
    manifest.params = json!({
        "source": source,
        "s_max": args.s_max,
        "sizes": cfg.sizes,
        "reps": cfg.repetitions,
        "member_sampling": cfg.member_sampling,
        "bins": cfg.bins,
        "alpha_cut": args.alpha_cut,
        "seed": cfg.seed,
        "alpha": cfg.alpha,
    });
    let result = ensemble_sweep(&pool, &cfg)?;
    let report = SweepReport {
        n_test: result.n_test,
        n_reference: result.n_reference,
        n_candidates: result.n_candidates,
        threshold: result.threshold,
        alpha_cut: args.alpha_cut,
        summary: size_summary(&result, args.alpha_cut)?,
    };
    emit(&manifest, &report, args.out.as_deref(), "summary.json")?;
    if let Some(dir) = &args.out {
        write_sweep_csv(&result, BufWriter::new(File::create(dir.join("sweep.csv"))?))?;
        let mut w = BufWriter::new(File::create(dir.join("records.csv"))?);
        writeln!(
            w,
            "size,rep,sup_distance,alpha_hat,saturated,accuracy,churn,churn_frac,ece"
        )?;
        for r in &result.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.size,
                r.rep,
                format_f64(r.sup_distance),
                format_f64(r.alpha_hat),
                r.saturated,
                format_f64(r.accuracy),
                r.churn,
                format_f64(r.churn_frac),
                format_f64(r.ece)
            )?;
        }
    }
    Ok(ACCEPT)
}

pub fn metrics(args: &MetricsArgs) -> Result<u8> {
    let mut manifest = RunManifest::new("metrics");
    let pool = load(&args.pool, &mut manifest)?;
    let ensemble: Vec<String> = match &args.ensemble_ids {
        Some(ids) => ids.clone(),
        None => pool.ids().into_iter().map(String::from).collect(),
    };
    manifest.params = json!({
        "pool": args.pool.pool.display().to_string(),
        "s_max": args.pool.s_max,
        "ensemble_ids": ensemble,
        "bins": args.bins,
    });
    let records = metrics_report(&pool, &ensemble, args.bins, Execution::Parallel)?;
    emit(&manifest, &records, args.out.as_deref(), "metrics.json")?;
    if let Some(dir) = &args.out {
        let mut w = BufWriter::new(File::create(dir.join("metrics.csv"))?);
        writeln!(
            w,
            "model_id,accuracy,churn_vs_ensemble,churn_vs_ensemble_frac,avg_pairwise_churn,avg_pairwise_churn_frac,ece"
        )?;
        for r in &records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.model_id,
                format_f64(r.accuracy),
                r.churn_vs_ensemble,
                format_f64(r.churn_vs_ensemble_frac),
                format_f64(r.avg_pairwise_churn),
                format_f64(r.avg_pairwise_churn_frac),
                format_f64(r.ece)
            )?;
        }
    }
    Ok(ACCEPT)
}

pub fn synth(args: &SynthArgs) -> Result<u8> {
    let mut manifest = RunManifest::new("synth");
    let mut spec = SynthSpec::preset(&args.preset)?;
    spec.rng_seed = args.seed;
    if let Some(v) = args.n_models {
        spec.n_models = v;
    }
    if let Some(v) = args.n_test {
        spec.n_test = v;
    }
    if let Some(f) = args.family {
        spec.family = match f {
            FamilyArg::GaussianMixture => Family::GaussianMixture,
            FamilyArg::LogisticTeacher => Family::LogisticTeacher,
        };
    }
    let overrides = [
        (&mut spec.margin_mean, args.margin_mean),
        (&mut spec.latent_sd, args.latent_sd),
        (&mut spec.shift_jitter, args.shift_jitter),
        (&mut spec.scale_jitter, args.scale_jitter),
        (&mut spec.idiosyncratic_sd, args.idiosyncratic_sd),
        (&mut spec.label_noise, args.label_noise),
    ];
    for (slot, value) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(d) = args.dim {
        spec.dim = d;
    }
    let pool = generate_pool(&spec)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let files: Vec<&str> = match args.format {
        FormatArg::Csv => {
            write_csv(&pool, BufWriter::new(File::create(args.out.join("pool.csv"))?))?;
            vec!["pool.csv"]
        }
        FormatArg::Jsonl => {
            write_jsonl(
                &pool,
                BufWriter::new(File::create(args.out.join("pool.jsonl"))?),
                BufWriter::new(File::create(args.out.join("labels.json"))?),
            )?;
            vec!["pool.jsonl", "labels.json"]
        }
    };
    fs::write(
        args.out.join("pool_manifest.json"),
        seedscope::numfmt::to_json_string(&pool.manifest())?,
    )?;
    manifest.params =
        json!({ "preset": args.preset, "spec": spec, "format": format!("{:?}", args.format).to_lowercase() });
    let result = json!({
        "files": files,
        "n_models": pool.n_models(),
        "n_test": pool.n_test(),
    });
    emit(&manifest, &result, Some(&args.out), "synth.json")?;
    Ok(ACCEPT)
}

fn need<T: Copy>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("{flag} is required for this bound")))
}

pub fn bounds(args: &BoundsArgs) -> Result<u8> {
    let mut manifest = RunManifest::new("bounds");
    let k = &args.kind;
    let result = if k.two_sample {
        let (n, eps) = (need(args.n, "-N")?, need(args.eps, "--eps")?);
        manifest.params = json!({ "kind": "two-sample", "N": n, "eps": eps });
        json!({ "delta_a": two_sample_threshold(n, eps)?, "C": two_sample_constant(n) })
    } else if k.one_sample {
        let (n, eps) = (need(args.n, "-N")?, need(args.eps, "--eps")?);
        manifest.params = json!({ "kind": "one-sample", "N": n, "eps": eps });
        json!({ "radius": one_sample_radius(n, eps)? })
    } else if k.union_bound {
        let (m, n, db) = (
            need(args.m, "-M")?,
            need(args.n, "-N")?,
            need(args.delta_b, "--delta-b")?,
        );
        manifest.params = json!({ "kind": "union-bound", "M": m, "N": n, "delta_b": db });
        json!({ "epsilon_b": union_bound_epsilon(m, n, db)? })
    } else if k.band_coverage {
        let (m, n) = (need(args.m, "-M")?, need(args.n, "-N")?);
        let (da, db) = (need(args.delta_a, "--delta-a")?, need(args.delta_b, "--delta-b")?);
        manifest.params = json!({ "kind": "band-coverage", "M": m, "N": n, "delta_a": da, "delta_b": db });
        json!({ "probability_lower_bound": band_coverage_bound(m, n, da, db)? })
    } else {
        let inputs = L1BoundInputs {
            alpha: need(args.alpha, "--alpha")?,
            gamma: need(args.gamma, "--gamma")?,
            delta_b: need(args.delta_b, "--delta-b")?,
            delta_c: need(args.delta_c, "--delta-c")?,
            support_len: args.support_len,
            n_samples: need(args.n, "-N")?,
            n_models: need(args.m, "-M")?,
        };
        manifest.params = json!({ "kind": "l1", "inputs": inputs });
        json!(l1_bound(&inputs)?)
    };
    emit(&manifest, &result, None, "bounds.json")?;
    Ok(ACCEPT)
}
