//! `level-screen` command implementations.
//!
//! Every command reads files, does its work through `level_screen`, and
//! writes results with whole-file atomic replacement. Errors carry their
//! exit code via [`Error::exit_code`].

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use level_screen::eval::{nested_cv, render_text, CvPlan};
use level_screen::features::{
    format_group_summary, group_summary, parse_matrix_csv, write_mask_csv, write_matrix_csv,
    DataMatrix, FeatureSchema,
};
use level_screen::level::{
    parse_corpus, serialize_corpus, validate_labeled_corpus, validate_level, Author,
    ElementRegistry, GameLevel,
};
use level_screen::ml::Family;
use level_screen::screen::{
    train_model, write_atomic, Decision, Decisions, DeployedPool, ModelFile, ReviewQueue,
    ReviewStatus, ScreenRule,
};
use level_screen::synth::{generate_corpus, SynthConfig};
use level_screen::{Error, Result, FORMAT_VERSION};

pub const CONFIG_ENV: &str = "LEVEL_SCREEN_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "level-screen", version, about = "Screen player-made levels for review")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalOpts {
    /// TOML config with optional `registry`, `[synth]`, `[plan]` and `[screen]` entries.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Element registry JSON; the bundled registry when omitted.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    /// Cross-validation plan TOML; overrides the config's `[plan]`.
    #[arg(long, global = true)]
    pub plan: Option<PathBuf>,
    /// Overrides the synth and plan seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus with a planted rule.
    Synth(SynthArgs),
    /// Validate a corpus and write its feature matrix.
    Extract(ExtractArgs),
    /// Fit one model family on a labeled matrix.
    Train(TrainArgs),
    /// Nested cross-validation of every planned family.
    Evaluate(EvaluateArgs),
    /// Score a corpus and build a review queue.
    Screen(ScreenArgs),
    /// Apply reviewer decisions to a queue.
    Review(ReviewArgs),
    /// Write approved levels to a deployable pool.
    ExportPool(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Rule manifest; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub n_levels: Option<usize>,
    #[arg(long)]
    pub positive_rate: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub n_expert_levels: Option<usize>,
    /// Fixed rule threshold instead of calibrating to the positive rate.
    #[arg(long)]
    pub rule_threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Missingness mask; defaults to `<out>.mask.csv`.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Drop invalid levels with a warning instead of failing.
    #[arg(long)]
    pub skip_invalid: bool,
    /// Keep expert-authored levels (dropped by default).
    #[arg(long)]
    pub include_experts: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    pub matrix: PathBuf,
    /// knn, dt, svm or rf.
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    pub matrix: PathBuf,
    /// Machine-readable report.
    #[arg(long)]
    pub out: PathBuf,
    /// Text table; defaults to `<out>.txt`.
    #[arg(long)]
    pub text: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScreenArgs {
    pub model: PathBuf,
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Scores at or above this go to review. Defaults to the model's own cutoff.
    #[arg(long, conflicts_with = "top_n")]
    pub threshold: Option<f64>,
    /// Send only the best `n` levels to review.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Timestamp recorded in the queue; `SOURCE_DATE_EPOCH` or the clock otherwise.
    #[arg(long)]
    pub created_at: Option<String>,
    #[arg(long)]
    pub skip_invalid: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReviewArgs {
    pub queue: PathBuf,
    /// JSON decisions file.
    #[arg(long, required_unless_present = "interactive", conflicts_with = "interactive")]
    pub decisions: Option<PathBuf>,
    /// Prompt for each pending entry on the terminal.
    #[arg(long)]
    pub interactive: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    pub queue: PathBuf,
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Refuse the queue unless it was built by this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenConfig {
    pub threshold: Option<f64>,
    pub top_n: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub registry: Option<PathBuf>,
    pub synth: SynthConfig,
    pub plan: CvPlan,
    pub screen: ScreenConfig,
}

/// Resolved inputs shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub registry: ElementRegistry,
    pub schema: FeatureSchema,
    pub synth: SynthConfig,
    pub plan: CvPlan,
    pub screen: ScreenConfig,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?)
        .map_err(|_| Error::Data(format!("{} is not UTF-8", path.display())))
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

impl Context {
    pub fn load(opts: &GlobalOpts) -> Result<Self> {
        let mut cfg = Config::default();
        let mut base = PathBuf::new();
        if let Some(p) = &opts.config {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            cfg = toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            base = p.parent().map(Path::to_path_buf).unwrap_or_default();
        }
        let registry = match (&opts.registry, &cfg.registry) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(p)) => Some(base.join(p)),
            _ => None,
        };
        let registry = match registry {
            Some(p) => {
                let bytes = fs::read(&p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                ElementRegistry::from_json(&bytes)?
            }
            None => ElementRegistry::default_registry(),
        };
        if let Some(p) = &opts.plan {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            cfg.plan = CvPlan::from_toml(&text)?;
        }
        if let Some(seed) = opts.seed {
            cfg.synth.seed = seed;
            cfg.plan.seed = seed;
        }
        cfg.plan.validate()?;
        if let (Some(_), Some(_)) = (cfg.screen.threshold, cfg.screen.top_n) {
            return Err(Error::Config("[screen] sets both threshold and top_n".into()));
        }
        let schema = FeatureSchema::from_registry(&registry);
        Ok(Self {
            registry,
            schema,
            synth: cfg.synth,
            plan: cfg.plan,
            screen: cfg.screen,
        })
    }

    fn read_corpus(&self, path: &Path) -> Result<Vec<GameLevel>> {
        parse_corpus(&read(path)?, &self.registry)
    }

    fn read_matrix(&self, path: &Path) -> Result<DataMatrix> {
        parse_matrix_csv(&read_text(path)?, &self.schema)
    }

    fn read_model(&self, path: &Path) -> Result<ModelFile> {
        let model = ModelFile::from_json(&read_text(path)?)?;
        model.check_schema(&self.schema)?;
        Ok(model)
    }

    /// Fails closed when the queue was made under another registry or schema.
    fn check_queue(&self, q: &ReviewQueue) -> Result<()> {
        if q.registry_version != self.registry.version() {
            return Err(Error::Version {
                what: "queue registry".into(),
                expected: self.registry.version().to_string(),
                found: q.registry_version.to_string(),
            });
        }
        if q.schema != self.schema.fingerprint() {
            return Err(Error::Version {
                what: "queue schema".into(),
                expected: self.schema.fingerprint(),
                found: q.schema.clone(),
            });
        }
        Ok(())
    }
}

/// Levels kept after validation plus one line per dropped level.
struct Screened {
    levels: Vec<GameLevel>,
    rejected: Vec<String>,
}

/// Per-level and corpus checks. Labels are only required to be complete
/// when `labeled` and some level carries one.
fn validate_corpus(
    levels: Vec<GameLevel>,
    ctx: &Context,
    labeled: bool,
    skip_invalid: bool,
) -> Result<Screened> {
    let labeled = labeled && levels.iter().any(|l| l.label.is_some());
    let mut problems: Vec<(usize, String)> = Vec::new();
    for (i, l) in levels.iter().enumerate() {
        let res = validate_level(l, &ctx.registry);
        for v in res.violations {
            problems.push((i, format!("{}: {} ({})", l.level_id, v.invariant, v.message)));
        }
    }
    let mut seen = HashSet::new();
    let corpus_issues = validate_labeled_corpus(&levels);
    for (i, l) in levels.iter().enumerate() {
        let first = seen.insert(l.level_id.as_str());
        for (id, v) in &corpus_issues {
            if id != &l.level_id {
                continue;
            }
            let applies = match v.invariant {
                "label-missing" => labeled && l.label.is_none(),
                "duplicate-level-id" => !first,
                _ => true,
            };
            if applies && !problems.iter().any(|(j, m)| *j == i && m.contains(v.invariant)) {
                problems.push((i, format!("{}: {} ({})", l.level_id, v.invariant, v.message)));
            }
        }
    }
    if problems.is_empty() {
        return Ok(Screened {
            levels,
            rejected: Vec::new(),
        });
    }
    let lines: Vec<String> = problems.iter().map(|(_, m)| m.clone()).collect();
    if !skip_invalid {
        let bad: Vec<&str> = {
            let mut ids: Vec<&str> = problems
                .iter()
                .map(|&(i, _)| levels[i].level_id.as_str())
                .collect();
            ids.dedup();
            ids
        };
        return Err(Error::Validation(format!(
            "{} invalid level(s): {}\n  {}",
            bad.len(),
            bad.join(", "),
            lines.join("\n  ")
        )));
    }
    let drop: HashSet<usize> = problems.iter().map(|&(i, _)| i).collect();
    let kept = levels
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !drop.contains(i))
        .map(|(_, l)| l)
        .collect();
    Ok(Screened {
        levels: kept,
        rejected: lines,
    })
}

/// What a command did, for printing.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
}

pub fn cmd_synth(ctx: &Context, args: &SynthArgs) -> Result<Outcome> {
    let mut cfg = ctx.synth.clone();
    if let Some(n) = args.n_levels {
        cfg.n_levels = n;
    }
    if let Some(r) = args.positive_rate {
        cfg.positive_rate_target = r;
    }
    if let Some(p) = args.noise {
        cfg.label_noise = p;
    }
    if let Some(n) = args.n_expert_levels {
        cfg.n_expert_levels = n;
    }
    if let Some(t) = args.rule_threshold {
        cfg.rule.threshold = Some(t);
    }
    let corpus = generate_corpus(&cfg, &ctx.registry, &ctx.schema)?;
    write_atomic(&args.out, serialize_corpus(&corpus.levels).as_bytes())?;
    let manifest = args
        .manifest
        .clone()
        .unwrap_or_else(|| sidecar(&args.out, ".manifest.json"));
    write_atomic(&manifest, corpus.manifest.to_json().as_bytes())?;
    Ok(Outcome {
        stdout: format!(
            "{} levels, {} positive, {} labels flipped, threshold {}\n",
            corpus.levels.len(),
            corpus.manifest.positives,
            corpus.manifest.flipped,
            corpus.manifest.threshold
        ),
        warnings: Vec::new(),
    })
}

pub fn cmd_extract(ctx: &Context, args: &ExtractArgs) -> Result<Outcome> {
    let mut levels = ctx.read_corpus(&args.corpus)?;
    let mut warnings = Vec::new();
    if !args.include_experts {
        let before = levels.len();
        levels.retain(|l| l.author != Author::Expert);
        let n = before - levels.len();
        if n > 0 {
            warnings.push(format!("{n} expert-authored level(s) left out"));
        }
    }
    let screened = validate_corpus(levels, ctx, true, args.skip_invalid)?;
    warnings.extend(screened.rejected.iter().map(|m| format!("skipped {m}")));
    for l in &screened.levels {
        if !l.unknown_kinds.is_empty() {
            warnings.push(format!(
                "{}: unknown element kinds ignored: {}",
                l.level_id,
                l.unknown_kinds.join(", ")
            ));
        }
    }
    let matrix = DataMatrix::from_levels(&screened.levels, &ctx.schema)?;
    write_atomic(&args.out, write_matrix_csv(&matrix).as_bytes())?;
    let mask = args
        .mask
        .clone()
        .unwrap_or_else(|| sidecar(&args.out, ".mask.csv"));
    write_atomic(&mask, write_mask_csv(&matrix).as_bytes())?;
    let skipped = screened.rejected.len();
    let mut stdout = format!(
        "{} rows x {} columns{}, {} skipped\n",
        matrix.n_rows(),
        matrix.n_cols(),
        if matrix.labels.is_some() { " (labeled)" } else { "" },
        skipped
    );
    stdout.push_str(&format_group_summary(&group_summary(&matrix)));
    Ok(Outcome { stdout, warnings })
}

fn parse_family(s: &str) -> Result<Family> {
    Family::parse(s).ok_or_else(|| Error::Config(format!("unknown model family `{s}`")))
}

pub fn cmd_train(ctx: &Context, args: &TrainArgs) -> Result<Outcome> {
    let family = parse_family(&args.family)?;
    let matrix = ctx.read_matrix(&args.matrix)?;
    let model = train_model(&matrix, family, &ctx.plan)?;
    write_atomic(&args.out, model.to_json().as_bytes())?;
    let s = &model.summary;
    let mut stdout = format!(
        "{family} trained on {} rows ({} positive), best {} of {} grid points\n",
        s.n_rows, s.n_positive, s.best, s.grid_size
    );
    let (f1, auc) = (s.inner.f1.mean, s.inner.roc_auc.as_ref().map(|m| m.mean));
    stdout.push_str(&format!(
        "inner F1 {:.4}, ROC-AUC {}\n",
        f1,
        auc.map_or("n/a".to_string(), |a| format!("{a:.4}"))
    ));
    stdout.push_str(&format!(
        "{} selected column(s){}\n",
        s.importance.len(),
        if model.classifier.preprocessor.fallback { " (fallback: all)" } else { "" }
    ));
    for (name, b) in &s.importance {
        stdout.push_str(&format!("  {name:<32} {b:+.4}\n"));
    }
    stdout.push_str(&format!("model {}\n", model.fingerprint()));
    Ok(Outcome {
        stdout,
        warnings: Vec::new(),
    })
}

pub fn cmd_evaluate(ctx: &Context, args: &EvaluateArgs) -> Result<Outcome> {
    let matrix = ctx.read_matrix(&args.matrix)?;
    let report = nested_cv(&matrix, &ctx.plan)?;
    let text = render_text(&report);
    write_atomic(&args.out, report.to_json().as_bytes())?;
    let text_path = args.text.clone().unwrap_or_else(|| sidecar(&args.out, ".txt"));
    write_atomic(&text_path, text.as_bytes())?;
    Ok(Outcome {
        stdout: text,
        warnings: Vec::new(),
    })
}

/// `SOURCE_DATE_EPOCH` when set, else the current time, as RFC 3339.
pub fn default_created_at() -> Result<String> {
    let t = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(s) => {
            let secs: i64 = s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("SOURCE_DATE_EPOCH `{s}` is not an integer")))?;
            time::OffsetDateTime::from_unix_timestamp(secs)
                .map_err(|e| Error::Config(format!("SOURCE_DATE_EPOCH: {e}")))?
        }
        Err(_) => time::OffsetDateTime::now_utc(),
    };
    let t = t.replace_nanosecond(0).expect("zero is valid");
    Ok(t
        .format(&time::format_description::well_known::Rfc3339)
        .expect("timestamp formats"))
}

pub fn cmd_screen(ctx: &Context, args: &ScreenArgs) -> Result<Outcome> {
    let model = ctx.read_model(&args.model)?;
    let screened = validate_corpus(ctx.read_corpus(&args.corpus)?, ctx, false, args.skip_invalid)?;
    let levels = screened.levels;
    let scores = model.score_levels(&levels, &ctx.schema)?;
    let rule = match (args.threshold, args.top_n, ctx.screen.threshold, ctx.screen.top_n) {
        (Some(t), _, _, _) => ScreenRule::Threshold(t),
        (_, Some(n), _, _) => ScreenRule::TopN(n),
        (_, _, Some(t), _) => ScreenRule::Threshold(t),
        (_, _, _, Some(n)) => ScreenRule::TopN(n),
        _ => ScreenRule::Threshold(model.threshold()),
    };
    let created_at = match &args.created_at {
        Some(s) => s.clone(),
        None => default_created_at()?,
    };
    let scored = levels.iter().map(|l| l.level_id.clone()).zip(scores).collect();
    let queue = ReviewQueue::build(scored, rule, &model, created_at)?;
    write_atomic(&args.out, queue.to_json().as_bytes())?;
    Ok(Outcome {
        stdout: format!(
            "queue {}: {} pending, {} below cutoff\n",
            queue.queue_id,
            queue.count(ReviewStatus::Pending),
            queue.count(ReviewStatus::Rejected)
        ),
        warnings: screened.rejected.iter().map(|m| format!("skipped {m}")).collect(),
    })
}

/// Prompts for every pending entry: `a`/`r` with an optional note after a
/// space, blank to skip, `q` to stop.
pub fn prompt_decisions(
    queue: &ReviewQueue,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<Decisions> {
    let mut decisions = Vec::new();
    for e in queue.entries.iter().filter(|e| e.status == ReviewStatus::Pending) {
        loop {
            write!(
                output,
                "#{} {} score {:.4} [a]pprove/[r]eject/[s]kip/[q]uit: ",
                e.rank, e.level_id, e.score
            )?;
            output.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                return Ok(Decisions {
                    format_version: FORMAT_VERSION,
                    decisions,
                });
            }
            let line = line.trim();
            let (cmd, note) = line.split_once(' ').unwrap_or((line, ""));
            let note = (!note.trim().is_empty()).then(|| note.trim().to_string());
            let status = match cmd {
                "a" | "approve" => ReviewStatus::Approved,
                "r" | "reject" => ReviewStatus::Rejected,
                "" | "s" | "skip" => break,
                "q" | "quit" => {
                    return Ok(Decisions {
                        format_version: FORMAT_VERSION,
                        decisions,
                    })
                }
                _ => {
                    writeln!(output, "unrecognized answer `{cmd}`")?;
                    continue;
                }
            };
            decisions.push(Decision {
                level_id: e.level_id.clone(),
                status,
                note,
            });
            break;
        }
    }
    Ok(Decisions {
        format_version: FORMAT_VERSION,
        decisions,
    })
}

pub fn cmd_review(
    ctx: &Context,
    args: &ReviewArgs,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<Outcome> {
    let mut queue = ReviewQueue::from_json(&read_text(&args.queue)?)?;
    ctx.check_queue(&queue)?;
    let decisions = match &args.decisions {
        Some(p) => Decisions::from_json(&read_text(p)?)?,
        None => prompt_decisions(&queue, input, output)?,
    };
    let changed = queue.apply(&decisions)?;
    if changed > 0 {
        write_atomic(&args.queue, queue.to_json().as_bytes())?;
    }
    Ok(Outcome {
        stdout: format!(
            "{changed} entr{} changed; {} pending, {} approved, {} rejected\n",
            if changed == 1 { "y" } else { "ies" },
            queue.count(ReviewStatus::Pending),
            queue.count(ReviewStatus::Approved),
            queue.count(ReviewStatus::Rejected)
        ),
        warnings: Vec::new(),
    })
}

pub fn cmd_export_pool(ctx: &Context, args: &ExportArgs) -> Result<Outcome> {
    let queue = ReviewQueue::from_json(&read_text(&args.queue)?)?;
    ctx.check_queue(&queue)?;
    if let Some(p) = &args.model {
        let model = ctx.read_model(p)?;
        if model.fingerprint() != queue.model {
            return Err(Error::Version {
                what: "queue model".into(),
                expected: model.fingerprint(),
                found: queue.model.clone(),
            });
        }
    }
    let levels = ctx.read_corpus(&args.corpus)?;
    let pool = DeployedPool::export(&queue, &levels)?;
    write_atomic(&args.out, pool.to_json().as_bytes())?;
    Ok(Outcome {
        stdout: format!("{} level(s) in pool from queue {}\n", pool.levels.len(), queue.queue_id),
        warnings: Vec::new(),
    })
}

/// Runs a parsed command line. Interactive review reads `input`.
pub fn run(cli: &Cli, input: &mut dyn BufRead, output: &mut dyn Write) -> Result<Outcome> {
    let ctx = Context::load(&cli.global)?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Extract(a) => cmd_extract(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Screen(a) => cmd_screen(&ctx, a),
        Command::Review(a) => cmd_review(&ctx, a, input, output),
        Command::ExportPool(a) => cmd_export_pool(&ctx, a),
    }
}
