//! Trained model files, the review queue and the deployed pool.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{inner_grid_search, CvPlan, MetricSummary};
use crate::features::{impute_and_encode, DataMatrix, FeatureSchema, ImputePolicy};
use crate::level::{serialize_level, GameLevel};
use crate::ml::{Classifier, Family, HyperParams, TrainedClassifier};
use crate::seed::derive_seed;
use crate::FORMAT_VERSION;

const TRAIN_STREAM: u64 = 0x7472;

fn short_hash(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

/// Replaces `path` by writing a sibling temp file and renaming it over.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub corpus: String,
    pub n_rows: usize,
    pub n_positive: usize,
    pub inner_folds: usize,
    pub grid_size: usize,
    pub best: HyperParams,
    /// Inner-fold metrics at the chosen point.
    pub inner: MetricSummary,
    /// Selected columns by Lasso magnitude, largest first.
    pub importance: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub registry_version: u32,
    pub schema: String,
    pub imputation: String,
    pub summary: TrainingSummary,
    pub classifier: TrainedClassifier<f64>,
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::version("model format", FORMAT_VERSION, m.format_version));
        }
        Ok(m)
    }

    /// Hash of the fitted classifier, stamped into queues and pools.
    pub fn fingerprint(&self) -> String {
        short_hash(serde_json::to_string(&self.classifier).expect("model serializes").as_bytes())
    }

    /// Fails closed unless `schema` is the one the model was trained on.
    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        if schema.registry_version != self.registry_version {
            return Err(Error::version(
                "model registry",
                self.registry_version,
                schema.registry_version,
            ));
        }
        if schema.fingerprint() != self.schema {
            return Err(Error::version("model schema", &self.schema, schema.fingerprint()));
        }
        Ok(())
    }

    /// Scores every level, in input order.
    pub fn score_levels(&self, levels: &[GameLevel], schema: &FeatureSchema) -> Result<Vec<f64>> {
        self.check_schema(schema)?;
        if levels.is_empty() {
            return Ok(Vec::new());
        }
        let m = DataMatrix::from_levels(levels, schema)?;
        let x = impute_and_encode(&m, ImputePolicy::ZeroFill).to_array::<f64>()?;
        self.classifier.score_rows(x.view())
    }

    pub fn threshold(&self) -> f64 {
        self.classifier.model.threshold()
    }
}

/// Inner grid search on every labeled row, then a refit of the winner on
/// all of them.
pub fn train_model(matrix: &DataMatrix, family: Family, plan: &CvPlan) -> Result<ModelFile> {
    plan.validate()?;
    let y = matrix.labels()?.to_vec();
    let pos = y.iter().filter(|&&b| b).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Data("training labels contain a single class".into()));
    }
    let x = impute_and_encode(matrix, ImputePolicy::ZeroFill).to_array::<f64>()?;
    let grid = plan.grids.points(family);
    let seed = derive_seed(plan.seed, TRAIN_STREAM);
    let search = inner_grid_search(x.view(), &y, &grid, plan.inner_folds, seed, &plan.selection)?;
    let classifier = TrainedClassifier::fit(
        x.view(),
        &y,
        &search.best,
        &plan.selection,
        derive_seed(seed, 1),
    )?;
    let names: Vec<&str> = matrix.schema.names().collect();
    let importance = classifier
        .preprocessor
        .importance
        .iter()
        .map(|&(j, b)| (names[j].to_string(), b))
        .collect();
    Ok(ModelFile {
        format_version: FORMAT_VERSION,
        registry_version: matrix.schema.registry_version,
        schema: matrix.schema.fingerprint(),
        imputation: ImputePolicy::ZeroFill.to_string(),
        summary: TrainingSummary {
            corpus: matrix.fingerprint(),
            n_rows: y.len(),
            n_positive: pos,
            inner_folds: plan.inner_folds,
            grid_size: grid.len(),
            best: search.best,
            inner: search.inner,
            importance,
        },
        classifier,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub level_id: String,
    pub score: f64,
    pub rank: usize,
    pub status: ReviewStatus,
    #[serde(default)]
    pub note: String,
}

/// How entries are picked for review.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenRule {
    /// Scores at or above the value go to review.
    Threshold(f64),
    /// The `n` best-ranked entries go to review.
    TopN(usize),
}

pub const BELOW_THRESHOLD: &str = "below-threshold";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewQueue {
    pub format_version: u32,
    pub queue_id: String,
    pub registry_version: u32,
    pub schema: String,
    pub model: String,
    pub created_at: String,
    pub rule: ScreenRule,
    pub entries: Vec<QueueEntry>,
}

impl ReviewQueue {
    /// Ranks `scored` by descending score (ties by level id) and marks
    /// entries passing `rule` pending, the rest rejected.
    pub fn build(
        scored: Vec<(String, f64)>,
        rule: ScreenRule,
        model: &ModelFile,
        created_at: String,
    ) -> Result<Self> {
        if scored.iter().any(|(_, s)| s.is_nan()) {
            return Err(Error::Data("NaN score".into()));
        }
        let mut seen = HashSet::new();
        if let Some((id, _)) = scored.iter().find(|(id, _)| !seen.insert(id.as_str())) {
            return Err(Error::Validation(format!("duplicate level id `{id}`")));
        }
        let mut scored = scored;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let entries: Vec<QueueEntry> = scored
            .into_iter()
            .enumerate()
            .map(|(i, (level_id, score))| {
                let pass = match rule {
                    ScreenRule::Threshold(t) => score >= t,
                    ScreenRule::TopN(n) => i < n,
                };
                QueueEntry {
                    level_id,
                    score,
                    rank: i + 1,
                    status: if pass {
                        ReviewStatus::Pending
                    } else {
                        ReviewStatus::Rejected
                    },
                    note: if pass { String::new() } else { BELOW_THRESHOLD.into() },
                }
            })
            .collect();
        let model_fp = model.fingerprint();
        let mut h = Sha256::new();
        h.update(model_fp.as_bytes());
        h.update(serde_json::to_string(&rule).expect("rule serializes").as_bytes());
        for e in &entries {
            h.update(e.level_id.as_bytes());
            h.update([0]);
            h.update(e.score.to_bits().to_le_bytes());
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            queue_id: hex::encode(&h.finalize()[..8]),
            registry_version: model.registry_version,
            schema: model.schema.clone(),
            model: model_fp,
            created_at,
            rule,
            entries,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("queue serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let q: Self = serde_json::from_str(text)?;
        if q.format_version != FORMAT_VERSION {
            return Err(Error::version("queue format", FORMAT_VERSION, q.format_version));
        }
        Ok(q)
    }

    pub fn count(&self, status: ReviewStatus) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    /// Applies every decision or none. Re-applying a decision an entry
    /// already carries is a no-op; any other change to a non-pending entry
    /// is a state error. Returns how many entries changed.
    pub fn apply(&mut self, decisions: &Decisions) -> Result<usize> {
        if decisions.format_version != FORMAT_VERSION {
            return Err(Error::version(
                "decisions format",
                FORMAT_VERSION,
                decisions.format_version,
            ));
        }
        let index: HashMap<&str, usize> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.level_id.as_str(), i))
            .collect();
        let mut updates = Vec::new();
        let mut touched = HashSet::new();
        for d in &decisions.decisions {
            if d.status == ReviewStatus::Pending {
                return Err(Error::Validation(format!(
                    "decision for `{}` must approve or reject",
                    d.level_id
                )));
            }
            let &i = index.get(d.level_id.as_str()).ok_or_else(|| Error::State {
                entry: d.level_id.clone(),
                message: "no such entry in the queue".into(),
            })?;
            if !touched.insert(i) {
                return Err(Error::State {
                    entry: d.level_id.clone(),
                    message: "more than one decision for this entry".into(),
                });
            }
            let e = &self.entries[i];
            let note = d.note.clone().unwrap_or_default();
            if e.status == d.status && e.note == note {
                continue;
            }
            if e.status != ReviewStatus::Pending {
                return Err(Error::State {
                    entry: d.level_id.clone(),
                    message: format!("entry is {:?}, only pending entries can change", e.status)
                        .to_lowercase(),
                });
            }
            updates.push((i, d.status, note));
        }
        let changed = updates.len();
        for (i, status, note) in updates {
            self.entries[i].status = status;
            self.entries[i].note = note;
        }
        Ok(changed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub level_id: String,
    pub status: ReviewStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub decisions: Vec<Decision>,
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

impl Decisions {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub level_id: String,
    pub score: f64,
    pub rank: usize,
    #[serde(default)]
    pub note: String,
    /// The level as it appears in corpus files.
    pub level: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployedPool {
    pub format_version: u32,
    pub queue_id: String,
    pub model: String,
    pub registry_version: u32,
    pub schema: String,
    pub levels: Vec<PoolEntry>,
}

impl DeployedPool {
    /// Approved entries of `queue`, in rank order, with their level payloads.
    pub fn export(queue: &ReviewQueue, levels: &[GameLevel]) -> Result<Self> {
        let by_id: HashMap<&str, &GameLevel> =
            levels.iter().map(|l| (l.level_id.as_str(), l)).collect();
        let mut out = Vec::new();
        for e in queue.entries.iter().filter(|e| e.status == ReviewStatus::Approved) {
            let level = by_id.get(e.level_id.as_str()).ok_or_else(|| {
                Error::Integrity(format!("approved level `{}` not found in corpus", e.level_id))
            })?;
            out.push(PoolEntry {
                level_id: e.level_id.clone(),
                score: e.score,
                rank: e.rank,
                note: e.note.clone(),
                level: serde_json::from_str(&serialize_level(level))?,
            });
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            queue_id: queue.queue_id.clone(),
            model: queue.model.clone(),
            registry_version: queue.registry_version,
            schema: queue.schema.clone(),
            levels: out,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pool serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        if p.format_version != FORMAT_VERSION {
            return Err(Error::version("pool format", FORMAT_VERSION, p.format_version));
        }
        Ok(p)
    }
}
