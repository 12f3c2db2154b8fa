use std::fmt::Write;

use super::metrics::{MeanStd, MetricSummary};
use super::nested::EvaluationReport;

const METRICS: [&str; 5] = ["Accuracy", "Precision", "Recall", "F1-Score", "ROC-AUC"];
const MODEL_W: usize = 6;
const CELL_W: usize = 17;

/// `xx.xx ± yy.yy%`
pub fn format_cell(v: Option<&MeanStd>) -> String {
    match v {
        Some(m) => format!("{:.2} ± {:.2}%", m.mean * 100.0, m.std * 100.0),
        None => "n/a".into(),
    }
}

fn cells(s: &MetricSummary) -> [String; 5] {
    [
        format_cell(Some(&s.accuracy)),
        format_cell(Some(&s.precision)),
        format_cell(Some(&s.recall)),
        format_cell(Some(&s.f1)),
        format_cell(s.roc_auc.as_ref()),
    ]
}

fn row(out: &mut String, first: &str, rest: &[String]) {
    let mut line = format!("{first:<MODEL_W$}");
    for c in rest {
        // pad by chars; `±` is one char but two bytes
        let pad = CELL_W.saturating_sub(c.chars().count());
        line.push_str("  ");
        line.push_str(c);
        line.extend(std::iter::repeat_n(' ', pad));
    }
    out.push_str(line.trim_end());
    out.push('\n');
}

/// Plain-text report: header, then model × metric table with inner and
/// outer blocks, then pooled confusion matrices and chosen parameters.
pub fn render_text(r: &EvaluationReport) -> String {
    let mut out = String::new();
    let p = &r.plan;
    let _ = writeln!(out, "level-screen evaluation report");
    let _ = writeln!(
        out,
        "format_version={} registry_version={} schema={} corpus={}",
        r.format_version, r.registry_version, r.schema, r.corpus
    );
    let _ = writeln!(out, "rows={} positives={}", r.n_rows, r.n_positive);
    let _ = writeln!(
        out,
        "plan: outer_folds={} inner_folds={} stratified={} seed={}",
        p.outer_folds, p.inner_folds, p.stratified, p.seed
    );
    let mode = serde_json::to_value(p.selection.mode).expect("mode serializes");
    let _ = writeln!(
        out,
        "selection: {} lambda_ratio={}",
        mode.as_str().unwrap_or("?"),
        p.selection.lambda_ratio
    );
    if r.selection_leaks {
        let _ = writeln!(out, "WARNING: column selection was fit on all rows; outer scores are optimistic");
    }
    let _ = writeln!(out, "imputation: {}", r.imputation);
    let _ = writeln!(out, "values: mean ± std over folds, percent; positive class = selected");
    let _ = writeln!(out, "note: {}", r.inner_std_convention);
    out.push('\n');

    let header: Vec<String> = METRICS.iter().map(|s| s.to_string()).collect();
    row(&mut out, "Model", &header);
    for (title, pick) in [
        ("Inner loop", (|m| &m.inner) as fn(&super::nested::ModelReport) -> &MetricSummary),
        ("Outer loop", |m| &m.outer),
    ] {
        out.push_str(title);
        out.push('\n');
        for m in &r.models {
            row(&mut out, m.family.label(), &cells(pick(m)));
        }
    }

    out.push('\n');
    out.push_str("Pooled outer confusion matrix\n");
    row(&mut out, "Model", &["TP", "FP", "FN", "TN"].map(String::from));
    for m in &r.models {
        let c = &m.confusion;
        row(&mut out, m.family.label(), &[c.tp, c.fp, c.fn_, c.tn].map(|v| v.to_string()));
    }

    out.push('\n');
    out.push_str("Chosen hyperparameters by outer fold\n");
    for m in &r.models {
        for f in &m.folds {
            let _ = writeln!(
                out,
                "{:<MODEL_W$}  fold {}  {}  ({} columns)",
                m.family.label(),
                f.fold,
                f.best,
                f.selected.len()
            );
        }
    }

    if !r.warnings.is_empty() {
        out.push('\n');
        for w in &r.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }
    out
}
