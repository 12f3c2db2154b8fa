//! Labeled synthetic corpora with a planted selection rule.
//!
//! Each level is drawn from its own random substream (derived from the
//! master seed and the level index), so output never depends on generation
//! order. Labels come from a weighted linear score over feature columns,
//! thresholded to hit the target positive rate, then flipped independently
//! with probability `label_noise`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureSchema};
use crate::level::{Author, ElementRegistry, GameLevel, Label, LevelElement, Position};
use crate::seed::{derive_seed, rng};
use crate::FORMAT_VERSION;

/// Inclusive range a feature column must fall in for every generated level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardConstraint {
    pub column: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleWeight {
    pub column: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    pub weights: Vec<RuleWeight>,
    /// Fixed threshold; when absent it is calibrated on the generated
    /// scores to match `positive_rate_target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub constraints: Vec<HardConstraint>,
}

impl Default for PlantedRule {
    fn default() -> Self {
        let w = |column: &str, weight| RuleWeight {
            column: column.into(),
            weight,
        };
        Self {
            weights: vec![
                w("player_character.count", 1.0),
                w("one_way_platform.count", 1.5),
                w("bubble.count", 1.1),
            ],
            threshold: None,
            constraints: vec![
                HardConstraint {
                    column: "goal.count".into(),
                    min: 1.0,
                    max: 1.0,
                },
                HardConstraint {
                    column: "player_character.count".into(),
                    min: 1.0,
                    max: f64::MAX,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_levels: usize,
    pub positive_rate_target: f64,
    pub rule: PlantedRule,
    pub label_noise: f64,
    pub seed: u64,
    /// Extra expert-authored levels, always labeled selected.
    pub n_expert_levels: usize,
    /// Rejection-sampling attempts per level before giving up.
    pub retry_budget: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_levels: 120,
            positive_rate_target: 44.0 / 120.0,
            rule: PlantedRule::default(),
            label_noise: 0.0,
            seed: 42,
            n_expert_levels: 0,
            retry_budget: 64,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        if !(self.positive_rate_target > 0.0 && self.positive_rate_target < 1.0) {
            return Err(Error::Config("positive_rate_target must be in (0, 1)".into()));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::Config("label_noise must be in [0, 0.5)".into()));
        }
        if self.n_levels == 0 {
            return Err(Error::Config("n_levels must be positive".into()));
        }
        for name in self
            .rule
            .weights
            .iter()
            .map(|w| &w.column)
            .chain(self.rule.constraints.iter().map(|c| &c.column))
        {
            if schema.column_index(name).is_none() {
                return Err(Error::Config(format!("rule references unknown column `{name}`")));
            }
        }
        Ok(())
    }
}

/// Per-kind generation profile.
struct KindProfile {
    presence: f64,
}

fn presence_of(id: &str) -> f64 {
    match id {
        "one_way_platform" | "bubble" => 0.35,
        "ice_block_x1" | "cloud" => 0.30,
        "lava_block_x1" | "door" | "spiky_platform" => 0.25,
        "slimy_platform" | "sticky_platform" | "breakable_wall" => 0.20,
        "ice_block_x10" => 0.15,
        "lava_block_x10" => 0.10,
        _ => 0.08,
    }
}

fn draw_level<R: Rng>(
    r: &mut R,
    registry: &ElementRegistry,
    level_id: String,
    author: Author,
) -> GameLevel {
    let mut elements = Vec::new();
    let mut push = |r: &mut R, kind: &str, value_bearing: bool| {
        let value = value_bearing.then(|| r.random_range(1..=10));
        let position = Some(Position {
            row: r.random_range(0..12),
            col: r.random_range(0..20),
        });
        elements.push(LevelElement {
            kind: kind.to_string(),
            value,
            position,
        });
    };
    for kind in registry.kinds() {
        let count = if kind.id == registry.goal_kind() {
            1
        } else if kind.id == registry.player_character_kind() {
            let u: f64 = r.random();
            if u < 0.55 {
                1
            } else if u < 0.85 {
                2
            } else {
                3
            }
        } else {
            let profile = KindProfile {
                presence: presence_of(&kind.id),
            };
            if r.random::<f64>() < profile.presence {
                let mut c = 1;
                while c < 5 && r.random::<f64>() < 0.4 {
                    c += 1;
                }
                c
            } else {
                0
            }
        };
        for _ in 0..count {
            push(r, &kind.id, kind.value_bearing);
        }
    }
    GameLevel {
        level_id,
        author,
        elements,
        label: None,
        registry_version: registry.version(),
        unknown_kinds: Vec::new(),
    }
}

/// Planted rule resolved against a schema.
#[derive(Debug, Clone)]
pub struct ResolvedRule {
    weights: Vec<(usize, f64)>,
    constraints: Vec<(usize, f64, f64)>,
}

impl ResolvedRule {
    pub fn new(rule: &PlantedRule, schema: &FeatureSchema) -> Result<Self> {
        let idx = |name: &str| {
            schema
                .column_index(name)
                .ok_or_else(|| Error::Config(format!("rule references unknown column `{name}`")))
        };
        Ok(Self {
            weights: rule
                .weights
                .iter()
                .map(|w| Ok((idx(&w.column)?, w.weight)))
                .collect::<Result<_>>()?,
            constraints: rule
                .constraints
                .iter()
                .map(|c| Ok((idx(&c.column)?, c.min, c.max)))
                .collect::<Result<_>>()?,
        })
    }

    /// Linear score over zero-filled feature values.
    pub fn score(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .map(|&(j, w)| {
                let v = values[j];
                w * if v.is_nan() { 0.0 } else { v }
            })
            .sum()
    }

    pub fn satisfies(&self, values: &[f64]) -> bool {
        self.constraints.iter().all(|&(j, lo, hi)| {
            let v = if values[j].is_nan() { 0.0 } else { values[j] };
            v >= lo && v <= hi
        })
    }

    pub fn columns(&self) -> Vec<usize> {
        self.weights.iter().map(|&(j, _)| j).collect()
    }
}

/// Threshold splitting `scores` so the count above it is as close to
/// `target` as the tie structure allows (fewer positives on equal distance).
fn calibrate_threshold(scores: &[f64], target: usize) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    sorted.dedup();
    let (Some(&hi), Some(&lo)) = (sorted.first(), sorted.last()) else {
        return 0.0;
    };
    // candidates from highest to lowest, so equal distance keeps fewer positives
    let candidates = std::iter::once(hi + 1.0)
        .chain(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0))
        .chain(std::iter::once(lo - 1.0));
    let mut best: Option<(usize, f64)> = None;
    for t in candidates {
        let above = scores.iter().filter(|&&s| s > t).count();
        let dist = above.abs_diff(target);
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, t));
        }
    }
    best.map_or(0.0, |(_, t)| t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleManifest {
    pub format_version: u32,
    pub registry_version: u32,
    pub schema: String,
    pub config: SynthConfig,
    /// Threshold actually applied (calibrated or fixed).
    pub threshold: f64,
    pub positives: usize,
    pub flipped: usize,
}

impl RuleManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub levels: Vec<GameLevel>,
    /// Labels before noise, aligned with `levels`.
    pub true_labels: Vec<bool>,
    pub manifest: RuleManifest,
}

pub fn generate_corpus(
    config: &SynthConfig,
    registry: &ElementRegistry,
    schema: &FeatureSchema,
) -> Result<SynthCorpus> {
    config.validate(schema)?;
    schema.check_registry(registry.version())?;
    let rule = ResolvedRule::new(&config.rule, schema)?;

    let total = config.n_levels + config.n_expert_levels;
    let mut levels = Vec::with_capacity(total);
    let mut scores = Vec::with_capacity(total);
    let mut noise_draws = Vec::with_capacity(total);
    for i in 0..total {
        let (author, id) = if i < config.n_levels {
            (Author::Player, format!("synth-{:05}", i))
        } else {
            (Author::Expert, format!("expert-{:05}", i - config.n_levels))
        };
        let mut r = rng(derive_seed(config.seed, i as u64));
        let mut accepted = None;
        for _ in 0..config.retry_budget.max(1) {
            let level = draw_level(&mut r, registry, id.clone(), author);
            let fv = extract_features(&level, schema)?;
            if rule.satisfies(&fv.values) {
                accepted = Some((level, rule.score(&fv.values)));
                break;
            }
        }
        let Some((level, score)) = accepted else {
            return Err(Error::Generation(format!(
                "level {i}: no draw satisfied the hard constraints within {} attempts",
                config.retry_budget
            )));
        };
        noise_draws.push(r.random::<f64>());
        levels.push(level);
        scores.push(score);
    }

    let player_scores = &scores[..config.n_levels];
    let target = (config.positive_rate_target * config.n_levels as f64).round() as usize;
    let threshold = config
        .rule
        .threshold
        .unwrap_or_else(|| calibrate_threshold(player_scores, target));

    let mut true_labels = Vec::with_capacity(total);
    let mut flipped = 0;
    for (i, level) in levels.iter_mut().enumerate() {
        let truth = i >= config.n_levels || scores[i] > threshold;
        let mut observed = truth;
        if i < config.n_levels && noise_draws[i] < config.label_noise {
            observed = !observed;
            flipped += 1;
        }
        level.label = Some(Label::from_positive(observed));
        true_labels.push(truth);
    }
    let positives = levels
        .iter()
        .filter(|l| l.label == Some(Label::Selected))
        .count();
    Ok(SynthCorpus {
        levels,
        true_labels,
        manifest: RuleManifest {
            format_version: FORMAT_VERSION,
            registry_version: registry.version(),
            schema: schema.fingerprint(),
            config: config.clone(),
            threshold,
            positives,
            flipped,
        },
    })
}
