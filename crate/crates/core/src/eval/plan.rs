use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml::{Depth, Family, Gamma, HyperParams, MaxFeatures, SelectionConfig};
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnGrid {
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeGrid {
    pub max_depth: Vec<Depth>,
    pub min_samples_leaf: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmGrid {
    pub c: Vec<f64>,
    pub gamma: Vec<Gamma>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
    pub max_depth: Vec<Depth>,
}

impl Default for KnnGrid {
    fn default() -> Self {
        Self {
            k: vec![1, 3, 5, 7, 9, 11],
        }
    }
}

impl Default for TreeGrid {
    fn default() -> Self {
        Self {
            max_depth: [2, 3, 4, 6, 8, 10].map(|d| Depth(Some(d))).to_vec(),
            min_samples_leaf: vec![1, 2, 5],
        }
    }
}

impl Default for SvmGrid {
    fn default() -> Self {
        Self {
            c: vec![0.1, 1.0, 10.0, 100.0],
            gamma: vec![
                Gamma::Fixed(0.01),
                Gamma::Fixed(0.1),
                Gamma::InverseDim,
                Gamma::Fixed(1.0),
            ],
        }
    }
}

impl Default for ForestGrid {
    fn default() -> Self {
        Self {
            n_trees: vec![100, 300],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Third],
            max_depth: vec![Depth(None), Depth(Some(8))],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grids {
    pub knn: KnnGrid,
    pub dt: TreeGrid,
    pub svm: SvmGrid,
    pub rf: ForestGrid,
}

impl Grids {
    /// Cartesian grid, first-listed parameter varying slowest.
    pub fn points(&self, family: Family) -> Vec<HyperParams> {
        let mut out = Vec::new();
        match family {
            Family::Knn => out.extend(self.knn.k.iter().map(|&k| HyperParams::Knn { k })),
            Family::Tree => {
                for &max_depth in &self.dt.max_depth {
                    for &min_samples_leaf in &self.dt.min_samples_leaf {
                        out.push(HyperParams::Tree {
                            max_depth,
                            min_samples_leaf,
                        });
                    }
                }
            }
            Family::Svm => {
                for &c in &self.svm.c {
                    for &gamma in &self.svm.gamma {
                        out.push(HyperParams::Svm { c, gamma });
                    }
                }
            }
            Family::Forest => {
                for &n_trees in &self.rf.n_trees {
                    for &max_features in &self.rf.max_features {
                        for &max_depth in &self.rf.max_depth {
                            out.push(HyperParams::Forest {
                                n_trees,
                                max_features,
                                max_depth,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Nested cross-validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvPlan {
    pub format_version: u32,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub stratified: bool,
    pub seed: u64,
    pub families: Vec<Family>,
    pub selection: SelectionConfig,
    pub grids: Grids,
}

impl Default for CvPlan {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            outer_folds: 5,
            inner_folds: 5,
            stratified: true,
            seed: 42,
            families: Family::ALL.to_vec(),
            selection: SelectionConfig::default(),
            grids: Grids::default(),
        }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::version(
                "plan format",
                FORMAT_VERSION,
                self.format_version,
            ));
        }
        if self.outer_folds < 2 || self.inner_folds < 2 {
            return Err(Error::Config("outer and inner fold counts must be at least 2".into()));
        }
        if self.families.is_empty() {
            return Err(Error::Config("plan lists no model families".into()));
        }
        if !(self.selection.lambda_ratio >= 0.0 && self.selection.lambda_ratio.is_finite()) {
            return Err(Error::Config("selection.lambda_ratio must be finite and non-negative".into()));
        }
        for &f in &self.families {
            let pts = self.grids.points(f);
            if pts.is_empty() {
                return Err(Error::Config(format!("{f} grid is empty")));
            }
            for p in pts {
                let bad = match p {
                    HyperParams::Knn { k } => k == 0,
                    HyperParams::Tree {
                        max_depth,
                        min_samples_leaf,
                    } => min_samples_leaf == 0 || max_depth.0 == Some(0),
                    HyperParams::Svm { c, gamma } => {
                        c.is_nan() || c <= 0.0 || matches!(gamma, Gamma::Fixed(g) if g.is_nan() || g <= 0.0)
                    }
                    HyperParams::Forest {
                        n_trees, max_depth, ..
                    } => n_trees == 0 || max_depth.0 == Some(0),
                };
                if bad {
                    return Err(Error::Config(format!("invalid {f} grid point: {p}")));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }
}
