//! Pools of trained-model evaluations over one shared, index-aligned test set.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numfmt::format_f64;
use crate::rng::{replicate_stream, StreamRng};
use crate::{Error, Result};

/// Half-width of the clipping window when none is given.
pub const DEFAULT_S_MAX: f64 = 25.0;

/// Logit gaps of one model, one entry per test point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub model_id: String,
    pub gaps: Vec<f64>,
}

impl ScoreVector {
    pub fn new(model_id: impl Into<String>, gaps: Vec<f64>) -> Self {
        ScoreVector {
            model_id: model_id.into(),
            gaps,
        }
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }
}

/// A validated pool: unique ids, equal lengths, finite gaps, labels in {-1, +1}.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelPool {
    models: Vec<ScoreVector>,
    labels: Vec<i8>,
    s_max: Option<f64>,
    pub provenance: BTreeMap<String, String>,
}

impl ModelPool {
    pub fn new(models: Vec<ScoreVector>, labels: Vec<i8>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("pool has no test points"));
        }
        for (index, &y) in labels.iter().enumerate() {
            if y != 1 && y != -1 {
                return Err(Error::InvalidLabel {
                    index,
                    value: y.to_string(),
                });
            }
        }
        let mut seen = HashSet::new();
        for model in &models {
            if !seen.insert(model.model_id.as_str()) {
                return Err(Error::DuplicateModel(model.model_id.clone()));
            }
            if model.len() != labels.len() {
                return Err(Error::DimensionMismatch {
                    what: format!("gaps of model '{}'", model.model_id),
                    expected: labels.len(),
                    found: model.len(),
                });
            }
            if let Some((index, &value)) = model.gaps.iter().enumerate().find(|(_, g)| !g.is_finite()) {
                return Err(Error::NonFinite {
                    model_id: model.model_id.clone(),
                    index,
                    value,
                });
            }
        }
        Ok(ModelPool {
            models,
            labels,
            s_max: None,
            provenance: BTreeMap::new(),
        })
    }

    pub fn models(&self) -> &[ScoreVector] {
        &self.models
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn n_test(&self) -> usize {
        self.labels.len()
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.model_id.as_str()).collect()
    }

    /// Clipping half-width if the pool has been clipped.
    pub fn s_max(&self) -> Option<f64> {
        self.s_max
    }

    /// Length of the (clipped) support, `2 * s_max`.
    pub fn support_len(&self) -> f64 {
        2.0 * self.s_max.unwrap_or(DEFAULT_S_MAX)
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.models
            .iter()
            .position(|m| m.model_id == id)
            .ok_or_else(|| Error::UnknownModel(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Result<&ScoreVector> {
        self.index_of(id).map(|i| &self.models[i])
    }

    /// Resolve a list of ids to model references, in the given order.
    pub fn select<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<&ScoreVector>> {
        ids.iter().map(|id| self.get(id.as_ref())).collect()
    }

    pub fn manifest(&self) -> PoolManifest {
        let mut models: Vec<String> = self.models.iter().map(|m| m.model_id.clone()).collect();
        models.sort();
        PoolManifest {
            s_max: self.s_max.unwrap_or(DEFAULT_S_MAX),
            n_test: self.n_test(),
            models,
        }
    }
}

/// Sidecar description of a pool file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolManifest {
    pub s_max: f64,
    pub n_test: usize,
    pub models: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolFormat {
    Csv,
    Jsonl,
}

impl PoolFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(PoolFormat::Csv),
            "jsonl" | "ndjson" => Some(PoolFormat::Jsonl),
            _ => None,
        }
    }
}

/// Load a pool. For JSONL, labels come from `labels_path` or, when absent,
/// from `labels.json` next to the pool file.
pub fn load_pool(path: &Path, format: PoolFormat, labels_path: Option<&Path>) -> Result<ModelPool> {
    match format {
        PoolFormat::Csv => read_csv(File::open(path)?),
        PoolFormat::Jsonl => {
            let labels_path: PathBuf = match labels_path {
                Some(p) => p.to_path_buf(),
                None => path.with_file_name("labels.json"),
            };
            let labels = read_labels_json(File::open(labels_path)?)?;
            read_jsonl(BufReader::new(File::open(path)?), labels)
        }
    }
}

fn parse_gap(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("'{field}' is not a number"),
    })
}

fn parse_label(field: &str, index: usize) -> Result<i8> {
    match field.trim() {
        "1" | "+1" => Ok(1),
        "-1" => Ok(-1),
        other => Err(Error::InvalidLabel {
            index,
            value: other.to_string(),
        }),
    }
}

fn parse_index(field: &str, line: usize) -> Result<usize> {
    field.trim().parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("'{field}' is not a sample index"),
    })
}

/// Parse either CSV layout: long (`model_id,sample_index,label,gap`) or wide
/// (`sample_index,label,gap:<id>,...`).
pub fn read_csv<R: Read>(reader: R) -> Result<ModelPool> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header == ["model_id", "sample_index", "label", "gap"] {
        read_long(rdr)
    } else if header.len() >= 2 && header[0] == "sample_index" && header[1] == "label" {
        read_wide(rdr, &header)
    } else {
        Err(Error::Parse {
            line: 1,
            msg: format!("unrecognised header: {}", header.join(",")),
        })
    }
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn read_long<R: Read>(mut rdr: csv::Reader<R>) -> Result<ModelPool> {
    let mut order: Vec<String> = Vec::new();
    let mut per_model: HashMap<String, BTreeMap<usize, f64>> = HashMap::new();
    let mut labels: BTreeMap<usize, i8> = BTreeMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let id = record[0].trim().to_string();
        let index = parse_index(&record[1], line)?;
        let label = parse_label(&record[2], index)?;
        let gap = parse_gap(&record[3], line)?;

        match labels.insert(index, label) {
            Some(prev) if prev != label => {
                return Err(Error::Parse {
                    line,
                    msg: format!("conflicting labels for sample {index}"),
                })
            }
            _ => {}
        }
        let entry = per_model.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            BTreeMap::new()
        });
        if entry.insert(index, gap).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate row for model '{id}', sample {index}"),
            });
        }
    }

    let n = labels.len();
    if let Some((&last, _)) = labels.iter().next_back() {
        if last + 1 != n {
            return Err(Error::DimensionMismatch {
                what: "sample indices (must be 0..n without gaps)".to_string(),
                expected: n,
                found: last + 1,
            });
        }
    }
    let labels: Vec<i8> = labels.into_values().collect();
    let models = order
        .into_iter()
        .map(|id| {
            let gaps: Vec<f64> = per_model.remove(&id).unwrap_or_default().into_values().collect();
            ScoreVector::new(id, gaps)
        })
        .collect();
    ModelPool::new(models, labels)
}

fn read_wide<R: Read>(mut rdr: csv::Reader<R>, header: &[String]) -> Result<ModelPool> {
    let mut ids = Vec::new();
    for h in &header[2..] {
        let id = h.strip_prefix("gap:").ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("wide column '{h}' must be named gap:<model_id>"),
        })?;
        ids.push(id.to_string());
    }
    let mut gaps: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        if record.len() != header.len() {
            return Err(Error::DimensionMismatch {
                what: format!("fields on line {line}"),
                expected: header.len(),
                found: record.len(),
            });
        }
        let index = parse_index(&record[0], line)?;
        if index != labels.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected sample_index {}, found {index}", labels.len()),
            });
        }
        labels.push(parse_label(&record[1], index)?);
        for (k, column) in gaps.iter_mut().enumerate() {
            column.push(parse_gap(&record[k + 2], line)?);
        }
    }
    let models = ids
        .into_iter()
        .zip(gaps)
        .map(|(id, g)| ScoreVector::new(id, g))
        .collect();
    ModelPool::new(models, labels)
}

#[derive(Deserialize)]
struct LabelsFile {
    labels: Vec<i64>,
}

pub fn read_labels_json<R: Read>(reader: R) -> Result<Vec<i8>> {
    let file: LabelsFile = serde_json::from_reader(reader)?;
    file.labels
        .into_iter()
        .enumerate()
        .map(|(index, y)| match y {
            1 => Ok(1),
            -1 => Ok(-1),
            other => Err(Error::InvalidLabel {
                index,
                value: other.to_string(),
            }),
        })
        .collect()
}

/// JSONL: one `{"model_id": ..., "gaps": [...]}` object per line.
pub fn read_jsonl<R: BufRead>(reader: R, labels: Vec<i8>) -> Result<ModelPool> {
    let mut models = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // NaN/inf are not valid JSON numbers, so serde rejects them here.
        let model: ScoreVector = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        models.push(model);
    }
    ModelPool::new(models, labels)
}

/// Canonical long-form CSV: models sorted by id, samples in index order,
/// floats at 17 significant digits.
pub fn write_csv<W: Write>(pool: &ModelPool, mut out: W) -> Result<()> {
    writeln!(out, "model_id,sample_index,label,gap")?;
    let mut order: Vec<&ScoreVector> = pool.models.iter().collect();
    order.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    for model in order {
        for (j, (&gap, &y)) in model.gaps.iter().zip(&pool.labels).enumerate() {
            writeln!(out, "{},{},{},{}", model.model_id, j, y, format_f64(gap))?;
        }
    }
    Ok(())
}

/// JSONL models plus the labels sidecar, in pool order.
pub fn write_jsonl<W: Write, L: Write>(pool: &ModelPool, mut out: W, mut labels: L) -> Result<()> {
    for model in &pool.models {
        let gaps: Vec<String> = model.gaps.iter().map(|g| format_f64(*g)).collect();
        writeln!(
            out,
            "{{\"model_id\":{},\"gaps\":[{}]}}",
            serde_json::to_string(&model.model_id)?,
            gaps.join(",")
        )?;
    }
    let ys: Vec<String> = pool.labels.iter().map(|y| y.to_string()).collect();
    writeln!(labels, "{{\"labels\":[{}]}}", ys.join(","))?;
    Ok(())
}

/// Clamp every gap into `[-s_max, s_max]` and record `s_max`.
pub fn clip_pool(pool: &ModelPool, s_max: f64) -> Result<ModelPool> {
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::domain(format!("s_max must be positive, got {s_max}")));
    }
    let models = pool
        .models
        .iter()
        .map(|m| ScoreVector {
            model_id: m.model_id.clone(),
            gaps: m.gaps.iter().map(|g| g.clamp(-s_max, s_max)).collect(),
        })
        .collect();
    Ok(ModelPool {
        models,
        labels: pool.labels.clone(),
        s_max: Some(s_max),
        provenance: pool.provenance.clone(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Two independent with-replacement draws of size N.
    #[default]
    Bootstrap,
    /// A random partition of the test set into two halves.
    Disjoint,
    /// Both sides use every test point, in order.
    Shared,
}

/// Test-point indices used to build the reference and the candidate eCDFs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitPlan {
    pub reference_indices: Vec<usize>,
    pub candidate_indices: Vec<usize>,
    pub rng_seed: u64,
}

impl SplitPlan {
    /// Draw one plan from `rng`. `size` is the per-side sample count for
    /// bootstrap mode; disjoint mode always uses `n_test / 2`.
    pub fn draw(n_test: usize, size: usize, mode: SplitMode, rng: &mut StreamRng, rng_seed: u64) -> Result<Self> {
        let (reference_indices, candidate_indices) = match mode {
            SplitMode::Bootstrap => {
                if n_test < 1 || size < 1 {
                    return Err(Error::domain("bootstrap split needs n_test >= 1 and size >= 1"));
                }
                let reference = (0..size).map(|_| rng.random_range(0..n_test)).collect();
                let candidate = (0..size).map(|_| rng.random_range(0..n_test)).collect();
                (reference, candidate)
            }
            SplitMode::Disjoint => {
                if n_test < 2 {
                    return Err(Error::domain("disjoint split needs n_test >= 2"));
                }
                let half = n_test / 2;
                let mut all: Vec<usize> = (0..n_test).collect();
                all.shuffle(rng);
                let candidate = all[half..2 * half].to_vec();
                all.truncate(half);
                (all, candidate)
            }
            SplitMode::Shared => {
                if n_test < 1 {
                    return Err(Error::domain("shared split needs n_test >= 1"));
                }
                ((0..n_test).collect(), (0..n_test).collect())
            }
        };
        Ok(SplitPlan {
            reference_indices,
            candidate_indices,
            rng_seed,
        })
    }
}

/// Deterministic split of `[0, n_test)` drawn from stream 0 of `rng_seed`.
/// Bootstrap draws have size `n_test / 2` (at least 1).
pub fn make_split(n_test: usize, mode: SplitMode, rng_seed: u64) -> Result<SplitPlan> {
    let mut rng = replicate_stream(rng_seed, 0);
    SplitPlan::draw(n_test, (n_test / 2).max(1), mode, &mut rng, rng_seed)
}

/// Logit-averaged ensemble of the given members.
///
/// Members are accumulated in pool order with a running mean, which makes the
/// result independent of the order of `member_ids` and exact when all members
/// are identical.
pub fn ensemble_gaps<S: AsRef<str>>(pool: &ModelPool, member_ids: &[S]) -> Result<ScoreVector> {
    if member_ids.is_empty() {
        return Err(Error::Empty("ensemble has no members"));
    }
    let mut idx = member_ids
        .iter()
        .map(|id| pool.index_of(id.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    idx.sort_unstable();
    let members: Vec<&[f64]> = idx.iter().map(|&i| pool.models[i].gaps.as_slice()).collect();
    Ok(ScoreVector::new(
        format!("ensemble[{}]", members.len()),
        mean_gaps(&members),
    ))
}

pub(crate) fn mean_gaps(members: &[&[f64]]) -> Vec<f64> {
    let mut mean = members[0].to_vec();
    for (k, member) in members.iter().enumerate().skip(1) {
        let weight = 1.0 / (k as f64 + 1.0);
        for (m, &g) in mean.iter_mut().zip(member.iter()) {
            *m += (g - *m) * weight;
        }
    }
    mean
}
