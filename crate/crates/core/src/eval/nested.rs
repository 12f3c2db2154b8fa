use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{roc_points, ConfusionMatrix, MetricSet, MetricSummary, RocPoint};
use super::plan::CvPlan;
use super::search::{make_folds, prepare_folds, search_prepared, PreparedSplit, SearchResult};
use crate::error::{Error, Result};
use crate::features::{impute_and_encode, DataMatrix, ImputePolicy};
use crate::ml::{Family, HyperParams, Preprocessor, SelectionMode, TrainedClassifier};
use crate::seed::{derive_path, derive_seed};
use crate::FORMAT_VERSION;

const OUTER_STREAM: u64 = 0x6f75;
const INNER_STREAM: u64 = 1;
const SEARCH_STREAM: u64 = 2;
const REFIT_STREAM: u64 = 3;

pub const INNER_STD_CONVENTION: &str =
    "inner std is taken across the per-outer-fold best inner results";

fn family_index(f: Family) -> u64 {
    Family::ALL.iter().position(|&g| g == f).expect("known family") as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub best: HyperParams,
    /// Inner-fold means at the chosen point.
    pub inner: MetricSet,
    pub outer: MetricSet,
    pub confusion: ConfusionMatrix,
    /// Columns the refit model saw, ascending.
    pub selected: Vec<usize>,
    /// Names of `selected`, filled in when a schema is known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected_columns: Vec<String>,
    pub selection_fallback: bool,
    /// Row indices of the outer-test split, with their labels and scores.
    pub test_rows: Vec<usize>,
    pub test_labels: Vec<bool>,
    pub test_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub family: Family,
    pub grid_size: usize,
    pub inner: MetricSummary,
    pub outer: MetricSummary,
    /// Sum of the outer-test confusion matrices.
    pub confusion: ConfusionMatrix,
    /// Curve over the pooled outer-test scores.
    pub roc: Vec<RocPoint>,
    pub folds: Vec<OuterFoldResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub registry_version: u32,
    pub schema: String,
    pub corpus: String,
    pub n_rows: usize,
    pub n_positive: usize,
    pub imputation: String,
    pub inner_std_convention: String,
    /// Set when column selection saw held-out rows.
    pub selection_leaks: bool,
    pub plan: CvPlan,
    pub warnings: Vec<String>,
    pub models: Vec<ModelReport>,
}

impl EvaluationReport {
    pub fn model(&self, family: Family) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.family == family)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.format_version != FORMAT_VERSION {
            return Err(Error::version("report format", FORMAT_VERSION, r.format_version));
        }
        Ok(r)
    }
}

/// Everything fitted for one outer fold, before evaluation.
struct OuterContext {
    train: Vec<usize>,
    test: Vec<usize>,
    inner: Vec<PreparedSplit>,
    outer: PreparedSplit,
    warnings: Vec<String>,
}

fn outer_folds(y: &[bool], plan: &CvPlan) -> Result<super::split::Folds> {
    make_folds(y, plan.outer_folds, plan.stratified, derive_seed(plan.seed, OUTER_STREAM))
}

/// Columns fixed before splitting, when the plan asks for global selection.
fn global_columns(x: ArrayView2<f64>, y: &[bool], plan: &CvPlan) -> Result<Option<Vec<usize>>> {
    if plan.selection.mode != SelectionMode::Global {
        return Ok(None);
    }
    Ok(Some(Preprocessor::fit(x, y, &plan.selection)?.selected))
}

fn outer_context(
    x: ArrayView2<f64>,
    y: &[bool],
    plan: &CvPlan,
    folds: &super::split::Folds,
    o: usize,
    columns: Option<&[usize]>,
) -> Result<OuterContext> {
    let (train, test) = folds.split(o);
    let x_train = x.select(Axis(0), &train);
    let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
    let inner_folds = make_folds(
        &y_train,
        plan.inner_folds,
        plan.stratified,
        derive_path(plan.seed, &[INNER_STREAM, o as u64]),
    )?;
    let mut warnings = Vec::new();
    if let Some(w) = &inner_folds.warning {
        warnings.push(format!("outer fold {o}: {w}"));
    }
    let inner = prepare_folds(x_train.view(), &y_train, &inner_folds, &plan.selection, columns)?;
    let outer = PreparedSplit::new(x, y, &train, &test, &plan.selection, columns)?;
    Ok(OuterContext {
        train,
        test,
        inner,
        outer,
        warnings,
    })
}

fn search_seed(plan: &CvPlan, o: usize, family: Family) -> u64 {
    derive_path(plan.seed, &[SEARCH_STREAM, o as u64, family_index(family)])
}

fn refit_seed(plan: &CvPlan, o: usize, family: Family) -> u64 {
    derive_path(plan.seed, &[REFIT_STREAM, o as u64, family_index(family)])
}

fn check_inputs(x: ArrayView2<f64>, y: &[bool], plan: &CvPlan) -> Result<()> {
    plan.validate()?;
    if y.len() != x.nrows() {
        return Err(Error::Data(format!("{} labels for {} rows", y.len(), x.nrows())));
    }
    let pos = y.iter().filter(|&&b| b).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Data("labels contain a single class".into()));
    }
    Ok(())
}

/// Runs the inner search for `family` on outer fold `fold` and refits the
/// winner on the whole outer-training split. Only training rows of that
/// fold reach any fitted parameter.
pub fn fit_outer_fold(
    x: ArrayView2<f64>,
    y: &[bool],
    plan: &CvPlan,
    family: Family,
    fold: usize,
) -> Result<(SearchResult, TrainedClassifier<f64>)> {
    check_inputs(x, y, plan)?;
    let folds = outer_folds(y, plan)?;
    if fold >= folds.k() {
        return Err(Error::Config(format!("outer fold {fold} out of range")));
    }
    let cols = global_columns(x, y, plan)?;
    let ctx = outer_context(x, y, plan, &folds, fold, cols.as_deref())?;
    let search = search_prepared(&ctx.inner, &plan.grids.points(family), search_seed(plan, fold, family))?;
    let seed = refit_seed(plan, fold, family);
    let model = ctx.outer.fit(&search.best, seed)?;
    let trained = TrainedClassifier {
        family,
        params: search.best,
        seed,
        preprocessor: ctx.outer.preprocessor,
        model,
    };
    Ok((search, trained))
}

/// Outer-fold row sets, as `nested_cv` uses them.
pub fn outer_test_rows(y: &[bool], plan: &CvPlan) -> Result<Vec<Vec<usize>>> {
    Ok(outer_folds(y, plan)?.folds)
}

pub struct NestedResult {
    pub models: Vec<ModelReport>,
    pub warnings: Vec<String>,
}

pub fn nested_cv_array(x: ArrayView2<f64>, y: &[bool], plan: &CvPlan) -> Result<NestedResult> {
    check_inputs(x, y, plan)?;
    let folds = outer_folds(y, plan)?;
    let cols = global_columns(x, y, plan)?;

    let per_fold: Vec<(Vec<OuterFoldResult>, Vec<String>)> = (0..folds.k())
        .into_par_iter()
        .map(|o| {
            let ctx = outer_context(x, y, plan, &folds, o, cols.as_deref())?;
            let results = plan
                .families
                .iter()
                .map(|&family| {
                    let search = search_prepared(
                        &ctx.inner,
                        &plan.grids.points(family),
                        search_seed(plan, o, family),
                    )?;
                    let ev = ctx.outer.evaluate(&search.best, refit_seed(plan, o, family))?;
                    Ok(OuterFoldResult {
                        fold: o,
                        n_train: ctx.train.len(),
                        best: search.best,
                        inner: search.inner.means(),
                        outer: ev.metrics,
                        confusion: ev.confusion,
                        selected: ctx.outer.preprocessor.selected.clone(),
                        selected_columns: Vec::new(),
                        selection_fallback: ctx.outer.preprocessor.fallback,
                        test_rows: ctx.test.clone(),
                        test_labels: ctx.outer.y_test.clone(),
                        test_scores: ev.scores,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((results, ctx.warnings))
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let mut models = Vec::new();
    for (fi, &family) in plan.families.iter().enumerate() {
        let folds_f: Vec<OuterFoldResult> = per_fold.iter().map(|(r, _)| r[fi].clone()).collect();
        let inner_sets: Vec<MetricSet> = folds_f.iter().map(|f| f.inner).collect();
        let outer_sets: Vec<MetricSet> = folds_f.iter().map(|f| f.outer).collect();
        let mut confusion = ConfusionMatrix::default();
        let (mut labels, mut scores) = (Vec::new(), Vec::new());
        for f in &folds_f {
            confusion.add(&f.confusion);
            labels.extend_from_slice(&f.test_labels);
            scores.extend_from_slice(&f.test_scores);
        }
        models.push(ModelReport {
            family,
            grid_size: plan.grids.points(family).len(),
            inner: MetricSummary::of(&inner_sets)?,
            outer: MetricSummary::of(&outer_sets)?,
            confusion,
            roc: roc_points(&labels, &scores)?,
            folds: folds_f,
        });
    }
    if let Some(w) = &folds.warning {
        warnings.push(format!("outer folds: {w}"));
    }
    for (_, w) in per_fold {
        warnings.extend(w);
    }
    Ok(NestedResult { models, warnings })
}

/// Nested cross-validation over a labeled matrix. Missing value statistics
/// are zero-filled first.
pub fn nested_cv(matrix: &DataMatrix, plan: &CvPlan) -> Result<EvaluationReport> {
    let y = matrix.labels()?.to_vec();
    let imputed = impute_and_encode(matrix, ImputePolicy::ZeroFill);
    let x: Array2<f64> = imputed.to_array()?;
    let mut result = nested_cv_array(x.view(), &y, plan)?;
    let names: Vec<&str> = matrix.schema.names().collect();
    for m in &mut result.models {
        for f in &mut m.folds {
            f.selected_columns = f.selected.iter().map(|&j| names[j].to_string()).collect();
        }
    }
    Ok(EvaluationReport {
        format_version: FORMAT_VERSION,
        registry_version: matrix.schema.registry_version,
        schema: matrix.schema.fingerprint(),
        corpus: matrix.fingerprint(),
        n_rows: y.len(),
        n_positive: y.iter().filter(|&&b| b).count(),
        imputation: ImputePolicy::ZeroFill.to_string(),
        inner_std_convention: INNER_STD_CONVENTION.into(),
        selection_leaks: plan.selection.mode == SelectionMode::Global,
        plan: plan.clone(),
        warnings: result.warnings,
        models: result.models,
    })
}
