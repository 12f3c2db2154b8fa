use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use level_screen::level::{parse_corpus, ElementRegistry};
use level_screen::screen::{DeployedPool, ModelFile, ReviewQueue, ReviewStatus};

const BIN: &str = env!("CARGO_BIN_EXE_level-screen");

const SMALL_PLAN: &str = r#"
outer_folds = 3
inner_folds = 3
[grids.knn]
k = [3, 5]
[grids.dt]
max_depth = [3]
min_samples_leaf = [1]
[grids.svm]
c = [1.0]
gamma = ["1/d"]
[grids.rf]
n_trees = [30]
max_features = ["sqrt"]
max_depth = [6]
"#;

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        let d = Dir(tempfile::tempdir().unwrap());
        fs::write(d.p("plan.toml"), SMALL_PLAN).unwrap();
        d
    }

    fn p(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .args(args)
            .current_dir(self.0.path())
            .env_remove("LEVEL_SCREEN_CONFIG")
            .env_remove("SOURCE_DATE_EPOCH")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.p(name)).unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn level(id: &str, goals: usize, extra: &str) -> String {
    let mut els = vec![r#"{"kind":"player_character","value":3,"row":0,"col":0}"#.to_string()];
    for g in 0..goals {
        els.push(format!(r#"{{"kind":"goal","row":5,"col":{g}}}"#));
    }
    if !extra.is_empty() {
        els.push(extra.to_string());
    }
    format!(
        r#"{{"format_version":1,"level_id":"{id}","author":"player","elements":[{}]}}"#,
        els.join(",")
    )
}

fn data_rows(csv: &str) -> usize {
    csv.lines().count() - 2
}

/// Labeled corpus, matrix and RF model under `dir`.
fn trained(dir: &Dir, n: &str, noise: &str) {
    dir.ok(&["synth", "--out", "train.jsonl", "--n-levels", n, "--noise", noise, "--seed", "7"]);
    dir.ok(&["extract", "train.jsonl", "--out", "train.csv"]);
    dir.ok(&["--plan", "plan.toml", "train", "train.csv", "--family", "rf", "--out", "model.json"]);
}

fn queue(dir: &Dir) -> ReviewQueue {
    ReviewQueue::from_json(&dir.read("queue.json")).unwrap()
}

#[test]
fn extract_three_valid_levels() {
    let d = Dir::new();
    let corpus = [level("a", 1, ""), level("b", 1, r#"{"kind":"bubble","value":2}"#), level("c", 1, "")];
    fs::write(d.p("c.jsonl"), corpus.join("\n")).unwrap();
    let out = d.ok(&["extract", "c.jsonl", "--out", "m.csv"]);
    assert!(out.starts_with("3 rows x 61 columns"));
    assert_eq!(data_rows(&d.read("m.csv")), 3);
    assert_eq!(data_rows(&d.read("m.csv.mask.csv")), 3);
    assert!(out.contains("bubble.count"));
}

#[test]
fn extract_rejects_two_goals_unless_skipping() {
    let d = Dir::new();
    let corpus = [level("a", 1, ""), level("twogoal", 2, ""), level("c", 1, "")];
    fs::write(d.p("c.jsonl"), corpus.join("\n")).unwrap();
    let out = d.run(&["extract", "c.jsonl", "--out", "m.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("twogoal"));
    assert!(stderr(&out).contains("goal-count"));
    assert!(!d.p("m.csv").exists());

    let out = d.run(&["extract", "c.jsonl", "--out", "m.csv", "--skip-invalid"]);
    assert_eq!(code(&out), 0);
    assert_eq!(data_rows(&d.read("m.csv")), 2);
    assert_eq!(stderr(&out).matches("warning:").count(), 1);
}

#[test]
fn extract_leaves_out_experts_by_default() {
    let d = Dir::new();
    d.ok(&["synth", "--out", "c.jsonl", "--n-levels", "20", "--n-expert-levels", "4"]);
    d.ok(&["extract", "c.jsonl", "--out", "m.csv"]);
    assert_eq!(data_rows(&d.read("m.csv")), 20);
    d.ok(&["extract", "c.jsonl", "--out", "m.csv", "--include-experts"]);
    assert_eq!(data_rows(&d.read("m.csv")), 24);
}

#[test]
fn train_round_trips_and_is_deterministic() {
    let d = Dir::new();
    trained(&d, "60", "0");
    let model = ModelFile::from_json(&d.read("model.json")).unwrap();
    let reg = ElementRegistry::default_registry();
    let schema = level_screen::features::FeatureSchema::from_registry(&reg);
    let levels = parse_corpus(d.read("train.jsonl").as_bytes(), &reg).unwrap();
    let a = model.score_levels(&levels, &schema).unwrap();
    let reloaded = ModelFile::from_json(&model.to_json()).unwrap();
    let b = reloaded.score_levels(&levels, &schema).unwrap();
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());

    let first = d.read("model.json");
    d.ok(&["--plan", "plan.toml", "train", "train.csv", "--family", "rf", "--out", "model.json"]);
    assert_eq!(first, d.read("model.json"));
}

#[test]
fn train_knn_grid_beyond_rows_is_config_error() {
    let d = Dir::new();
    d.ok(&["synth", "--out", "c.jsonl", "--n-levels", "30"]);
    d.ok(&["extract", "c.jsonl", "--out", "m.csv"]);
    fs::write(d.p("big.toml"), "[grids.knn]\nk = [500]\n").unwrap();
    let out = d.run(&["--plan", "big.toml", "train", "m.csv", "--family", "knn", "--out", "k.json"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("config error"));
}

#[test]
fn train_single_class_is_data_error() {
    let d = Dir::new();
    let corpus: Vec<String> = (0..10)
        .map(|i| level(&format!("l{i}"), 1, "").replace(r#""author""#, r#""label":"selected","author""#))
        .collect();
    fs::write(d.p("c.jsonl"), corpus.join("\n")).unwrap();
    d.ok(&["extract", "c.jsonl", "--out", "m.csv"]);
    let out = d.run(&["train", "m.csv", "--family", "dt", "--out", "x.json"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("single class"));
}

#[test]
fn evaluate_writes_both_reports_reproducibly() {
    let d = Dir::new();
    d.ok(&["synth", "--out", "c.jsonl", "--n-levels", "60"]);
    d.ok(&["extract", "c.jsonl", "--out", "m.csv"]);
    let text = d.ok(&["--plan", "plan.toml", "evaluate", "m.csv", "--out", "r.json"]);
    assert_eq!(text, d.read("r.json.txt"));
    for f in ["KNN", "DT", "SVM", "RF"] {
        assert!(text.contains(f));
    }
    let json = d.read("r.json");
    d.ok(&["--plan", "plan.toml", "evaluate", "m.csv", "--out", "r.json"]);
    assert_eq!(json, d.read("r.json"));
    assert_eq!(text, d.read("r.json.txt"));
}

#[test]
fn screen_top_n_and_tie_order() {
    let d = Dir::new();
    trained(&d, "60", "0");
    d.ok(&["synth", "--out", "new.jsonl", "--n-levels", "8", "--seed", "99"]);
    // two identical levels under different ids score the same
    let mut text = d.read("new.jsonl");
    text.push_str(&level("zz-twin", 1, ""));
    text.push('\n');
    text.push_str(&level("aa-twin", 1, ""));
    text.push('\n');
    fs::write(d.p("new.jsonl"), text).unwrap();
    d.ok(&["screen", "model.json", "new.jsonl", "--out", "queue.json", "--top-n", "3", "--created-at", "t0"]);
    let q = queue(&d);
    assert_eq!(q.entries.len(), 10);
    assert_eq!(q.count(ReviewStatus::Pending), 3);
    assert_eq!(q.count(ReviewStatus::Rejected), 7);
    assert!(q.entries.iter().filter(|e| e.status == ReviewStatus::Rejected).all(|e| e.note == "below-threshold"));
    let a = q.entries.iter().position(|e| e.level_id == "aa-twin").unwrap();
    let z = q.entries.iter().position(|e| e.level_id == "zz-twin").unwrap();
    assert_eq!(q.entries[a].score, q.entries[z].score);
    assert_eq!(z, a + 1);
    for (i, w) in q.entries.windows(2).enumerate() {
        assert!(w[0].score >= w[1].score);
        assert_eq!(w[0].rank, i + 1);
    }
}

#[test]
fn screen_default_threshold_is_model_cutoff() {
    let d = Dir::new();
    trained(&d, "60", "0");
    d.ok(&["screen", "model.json", "train.jsonl", "--out", "queue.json", "--created-at", "t0"]);
    let q = queue(&d);
    assert!(q.entries.iter().all(|e| (e.score >= 0.5) == (e.status == ReviewStatus::Pending)));
}

#[test]
fn screen_precision_at_five_on_planted_corpus() {
    let d = Dir::new();
    d.ok(&["synth", "--out", "train.jsonl", "--n-levels", "120", "--noise", "0", "--seed", "3"]);
    d.ok(&["extract", "train.jsonl", "--out", "train.csv"]);
    d.ok(&["--plan", "plan.toml", "train", "train.csv", "--family", "rf", "--out", "model.json"]);
    // noise 0 under the training corpus's rule threshold: stored labels are
    // exactly "satisfies the planted rule"
    let manifest: serde_json::Value = serde_json::from_str(&d.read("train.jsonl.manifest.json")).unwrap();
    let t = manifest["threshold"].as_f64().unwrap().to_string();
    d.ok(&["synth", "--out", "new.jsonl", "--n-levels", "60", "--noise", "0", "--seed", "4", "--rule-threshold", &t]);
    d.ok(&["screen", "model.json", "new.jsonl", "--out", "queue.json", "--top-n", "5", "--created-at", "t0"]);
    let reg = ElementRegistry::default_registry();
    let levels = parse_corpus(d.read("new.jsonl").as_bytes(), &reg).unwrap();
    let q = queue(&d);
    let hits = q.entries[..5]
        .iter()
        .filter(|e| {
            levels.iter().find(|l| l.level_id == e.level_id).unwrap().label.unwrap().is_positive()
        })
        .count();
    assert!(hits >= 4, "precision@5 = {hits}/5");
}

fn decide(d: &Dir, name: &str, pairs: &[(&str, &str)]) {
    let body: Vec<String> = pairs
        .iter()
        .map(|(id, s)| format!(r#"{{"level_id":"{id}","status":"{s}"}}"#))
        .collect();
    fs::write(d.p(name), format!(r#"{{"format_version":1,"decisions":[{}]}}"#, body.join(","))).unwrap();
}

#[test]
fn review_transitions() {
    let d = Dir::new();
    trained(&d, "60", "0");
    d.ok(&["screen", "model.json", "train.jsonl", "--out", "queue.json", "--top-n", "5", "--created-at", "t0"]);
    let before = queue(&d);
    let first = before.entries[0].level_id.clone();
    decide(&d, "d.json", &[(&first, "approved")]);
    d.ok(&["review", "queue.json", "--decisions", "d.json"]);
    let after = queue(&d);
    assert_eq!(after.entries[0].status, ReviewStatus::Approved);
    for (a, b) in before.entries[1..].iter().zip(&after.entries[1..]) {
        assert_eq!(a, b);
    }

    let bytes = d.read("queue.json");
    d.ok(&["review", "queue.json", "--decisions", "d.json"]);
    assert_eq!(bytes, d.read("queue.json"));

    decide(&d, "bad.json", &[(&first, "rejected")]);
    let out = d.run(&["review", "queue.json", "--decisions", "bad.json"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("state error"));
    assert!(stderr(&out).contains(&first));
    assert_eq!(bytes, d.read("queue.json"));
}

#[test]
fn interactive_review_reads_prompts() {
    let d = Dir::new();
    trained(&d, "60", "0");
    d.ok(&["screen", "model.json", "train.jsonl", "--out", "queue.json", "--top-n", "3", "--created-at", "t0"]);
    let mut child = Command::new(BIN)
        .args(["review", "queue.json", "--interactive"])
        .current_dir(d.0.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"a looks good\nwhat\nr\n\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let q = queue(&d);
    assert_eq!(q.entries[0].status, ReviewStatus::Approved);
    assert_eq!(q.entries[0].note, "looks good");
    assert_eq!(q.entries[1].status, ReviewStatus::Rejected);
    assert_eq!(q.entries[2].status, ReviewStatus::Pending);
}

#[test]
fn export_pool_cases() {
    let d = Dir::new();
    trained(&d, "60", "0");
    d.ok(&["synth", "--out", "new.jsonl", "--n-levels", "5", "--seed", "11"]);
    d.ok(&["screen", "model.json", "new.jsonl", "--out", "queue.json", "--top-n", "5", "--created-at", "t0"]);

    d.ok(&["export-pool", "queue.json", "new.jsonl", "--out", "pool.json"]);
    let empty = DeployedPool::from_json(&d.read("pool.json")).unwrap();
    assert!(empty.levels.is_empty());

    let q = queue(&d);
    let (a, b) = (q.entries[1].level_id.clone(), q.entries[3].level_id.clone());
    decide(&d, "d.json", &[(&a, "approved"), (&b, "approved"), (&q.entries[0].level_id, "rejected")]);
    d.ok(&["review", "queue.json", "--decisions", "d.json"]);
    d.ok(&["export-pool", "queue.json", "new.jsonl", "--out", "pool.json", "--model", "model.json"]);
    let pool = DeployedPool::from_json(&d.read("pool.json")).unwrap();
    let ids: BTreeSet<_> = pool.levels.iter().map(|l| l.level_id.clone()).collect();
    assert_eq!(ids, BTreeSet::from([a.clone(), b.clone()]));
    assert_eq!(pool.queue_id, q.queue_id);
    assert_eq!(pool.model, q.model);

    let without: String = d.read("new.jsonl").lines().filter(|l| !l.contains(&format!("\"{a}\""))).map(|l| format!("{l}\n")).collect();
    fs::write(d.p("partial.jsonl"), without).unwrap();
    let out = d.run(&["export-pool", "queue.json", "partial.jsonl", "--out", "pool2.json"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("integrity error"));
    assert!(!d.p("pool2.json").exists());
}

fn registry_v2(d: &Dir) -> PathBuf {
    let json = ElementRegistry::default_registry().to_json();
    let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
    v["version"] = 2.into();
    let p = d.p("reg2.json");
    fs::write(&p, v.to_string()).unwrap();
    p
}

#[test]
fn version_mismatch_fails_closed() {
    let d = Dir::new();
    trained(&d, "60", "0");
    d.ok(&["screen", "model.json", "train.jsonl", "--out", "queue.json", "--top-n", "3", "--created-at", "t0"]);
    let reg = registry_v2(&d);
    let reg = reg.to_str().unwrap();
    for args in [
        vec!["--registry", reg, "screen", "model.json", "train.jsonl", "--out", "q2.json"],
        vec!["--registry", reg, "train", "train.csv", "--family", "dt", "--out", "m2.json"],
        vec!["--registry", reg, "evaluate", "train.csv", "--out", "r2.json"],
        vec!["--registry", reg, "export-pool", "queue.json", "train.jsonl", "--out", "p2.json"],
    ] {
        let out = d.run(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains("version mismatch"), "{}", stderr(&out));
    }

    let mut model: serde_json::Value = serde_json::from_str(&d.read("model.json")).unwrap();
    model["format_version"] = 9.into();
    fs::write(d.p("future.json"), model.to_string()).unwrap();
    let out = d.run(&["screen", "future.json", "train.jsonl", "--out", "q3.json"]);
    assert_eq!(code(&out), 2);

    // a queue from another model is refused at export when the model is named
    d.ok(&["--plan", "plan.toml", "train", "train.csv", "--family", "dt", "--out", "dt.json"]);
    let out = d.run(&["export-pool", "queue.json", "train.jsonl", "--out", "p.json", "--model", "dt.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_from_environment() {
    let d = Dir::new();
    fs::write(
        d.p("cfg.toml"),
        "[synth]\nn_levels = 25\nseed = 5\n[screen]\ntop_n = 2\n[plan]\nouter_folds = 3\ninner_folds = 3\n",
    )
    .unwrap();
    let out = Command::new(BIN)
        .args(["synth", "--out", "c.jsonl"])
        .current_dir(d.0.path())
        .env("LEVEL_SCREEN_CONFIG", d.p("cfg.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(d.read("c.jsonl").lines().count(), 25);

    fs::write(d.p("broken.toml"), "[synth]\nn_levels = \"many\"\n").unwrap();
    let out = d.run(&["--config", "broken.toml", "synth", "--out", "x.jsonl"]);
    assert_eq!(code(&out), 2);
    fs::write(d.p("broken.toml"), "[synth]\nlabel_noise = 0.7\n").unwrap();
    let out = d.run(&["--config", "broken.toml", "synth", "--out", "x.jsonl"]);
    assert_eq!(code(&out), 2);
    let out = d.run(&["--config", "missing.toml", "synth", "--out", "x.jsonl"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_and_screen_are_byte_identical_on_repeat() {
    let d = Dir::new();
    trained(&d, "60", "0.1");
    let corpus = d.read("train.jsonl");
    let manifest = d.read("train.jsonl.manifest.json");
    d.ok(&["synth", "--out", "train.jsonl", "--n-levels", "60", "--noise", "0.1", "--seed", "7"]);
    assert_eq!(corpus, d.read("train.jsonl"));
    assert_eq!(manifest, d.read("train.jsonl.manifest.json"));
    let q = |name: &str| {
        let out = Command::new(BIN)
            .args(["screen", "model.json", "train.jsonl", "--out", name])
            .current_dir(d.0.path())
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .output()
            .unwrap();
        assert!(out.status.success());
        d.read(name)
    };
    let a = q("q1.json");
    assert_eq!(a, q("q2.json"));
    assert!(a.contains("2023-11-14T22:13:20Z"));
}

#[test]
fn pipeline_pool_is_top_n_intersect_approvals() {
    let d = Dir::new();
    trained(&d, "120", "0.1");
    d.ok(&["synth", "--out", "new.jsonl", "--n-levels", "40", "--seed", "21"]);
    d.ok(&["screen", "model.json", "new.jsonl", "--out", "queue.json", "--top-n", "6", "--created-at", "t0"]);
    let q = queue(&d);
    let top: BTreeSet<String> = q.entries[..6].iter().map(|e| e.level_id.clone()).collect();
    // reviewer approves every other top entry and rejects the rest
    let mut pairs = Vec::new();
    let mut approved = BTreeSet::new();
    for (i, e) in q.entries[..6].iter().enumerate() {
        if i % 2 == 0 {
            pairs.push((e.level_id.as_str(), "approved"));
            approved.insert(e.level_id.clone());
        } else {
            pairs.push((e.level_id.as_str(), "rejected"));
        }
    }
    decide(&d, "d.json", &pairs);
    d.ok(&["review", "queue.json", "--decisions", "d.json"]);
    // approving an auto-rejected entry is refused
    decide(&d, "late.json", &[(&q.entries[10].level_id, "approved")]);
    assert_eq!(code(&d.run(&["review", "queue.json", "--decisions", "late.json"])), 1);
    d.ok(&["export-pool", "queue.json", "new.jsonl", "--out", "pool.json"]);
    let pool = DeployedPool::from_json(&d.read("pool.json")).unwrap();
    let ids: BTreeSet<String> = pool.levels.iter().map(|l| l.level_id.clone()).collect();
    let expect: BTreeSet<String> = top.intersection(&approved).cloned().collect();
    assert_eq!(ids, expect);
    assert!(!ids.is_empty());
}
