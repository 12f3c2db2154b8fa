use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Knn,
    #[serde(rename = "dt")]
    Tree,
    Svm,
    #[serde(rename = "rf")]
    Forest,
}

impl Family {
    /// Report order.
    pub const ALL: [Family; 4] = [Family::Knn, Family::Tree, Family::Svm, Family::Forest];

    pub fn label(self) -> &'static str {
        match self {
            Family::Knn => "KNN",
            Family::Tree => "DT",
            Family::Svm => "SVM",
            Family::Forest => "RF",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Some(Family::Knn),
            "dt" | "tree" => Some(Family::Tree),
            "svm" => Some(Family::Svm),
            "rf" | "forest" => Some(Family::Forest),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum IntOrWord {
    Int(usize),
    Float(f64),
    Word(String),
}

/// Optional depth limit; serialized as an integer or `"none"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Depth(pub Option<usize>);

impl Serialize for Depth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(d) => s.serialize_u64(d as u64),
            None => s.serialize_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for Depth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match IntOrWord::deserialize(d)? {
            IntOrWord::Int(v) => Ok(Depth(Some(v))),
            IntOrWord::Word(w) if w == "none" => Ok(Depth(None)),
            _ => Err(serde::de::Error::custom("depth must be an integer or \"none\"")),
        }
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(d) => write!(f, "{d}"),
            None => f.write_str("none"),
        }
    }
}

/// RBF width: a fixed value or `1/d` over the selected feature count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Fixed(f64),
    InverseDim,
}

impl Gamma {
    pub fn resolve(self, d: usize) -> f64 {
        match self {
            Gamma::Fixed(g) => g,
            Gamma::InverseDim => 1.0 / d.max(1) as f64,
        }
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Gamma::Fixed(g) => s.serialize_f64(g),
            Gamma::InverseDim => s.serialize_str("1/d"),
        }
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match IntOrWord::deserialize(d)? {
            IntOrWord::Int(v) => Ok(Gamma::Fixed(v as f64)),
            IntOrWord::Float(v) => Ok(Gamma::Fixed(v)),
            IntOrWord::Word(w) if w == "1/d" => Ok(Gamma::InverseDim),
            _ => Err(serde::de::Error::custom("gamma must be a number or \"1/d\"")),
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Fixed(g) => write!(f, "{g}"),
            Gamma::InverseDim => f.write_str("1/d"),
        }
    }
}

/// Columns examined per forest split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    /// `floor(sqrt(d))`
    Sqrt,
    /// `floor(d / 3)`
    Third,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Third => d / 3,
            MaxFeatures::All => d,
            MaxFeatures::Count(c) => c.min(d),
        };
        m.max(1)
    }
}

impl Serialize for MaxFeatures {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            MaxFeatures::Sqrt => s.serialize_str("sqrt"),
            MaxFeatures::Third => s.serialize_str("third"),
            MaxFeatures::All => s.serialize_str("all"),
            MaxFeatures::Count(c) => s.serialize_u64(c as u64),
        }
    }
}

impl<'de> Deserialize<'de> for MaxFeatures {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match IntOrWord::deserialize(d)? {
            IntOrWord::Int(c) => Ok(MaxFeatures::Count(c)),
            IntOrWord::Word(w) => match w.as_str() {
                "sqrt" => Ok(MaxFeatures::Sqrt),
                "third" => Ok(MaxFeatures::Third),
                "all" => Ok(MaxFeatures::All),
                _ => Err(serde::de::Error::custom(format!("unknown max_features `{w}`"))),
            },
            IntOrWord::Float(_) => Err(serde::de::Error::custom("max_features must be an integer")),
        }
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFeatures::Sqrt => f.write_str("sqrt"),
            MaxFeatures::Third => f.write_str("third"),
            MaxFeatures::All => f.write_str("all"),
            MaxFeatures::Count(c) => write!(f, "{c}"),
        }
    }
}

/// One hyperparameter point of one model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HyperParams {
    Knn {
        k: usize,
    },
    #[serde(rename = "dt")]
    Tree {
        max_depth: Depth,
        min_samples_leaf: usize,
    },
    Svm {
        c: f64,
        gamma: Gamma,
    },
    #[serde(rename = "rf")]
    Forest {
        n_trees: usize,
        max_features: MaxFeatures,
        max_depth: Depth,
    },
}

impl HyperParams {
    pub fn family(&self) -> Family {
        match self {
            HyperParams::Knn { .. } => Family::Knn,
            HyperParams::Tree { .. } => Family::Tree,
            HyperParams::Svm { .. } => Family::Svm,
            HyperParams::Forest { .. } => Family::Forest,
        }
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperParams::Knn { k } => write!(f, "k={k}"),
            HyperParams::Tree {
                max_depth,
                min_samples_leaf,
            } => write!(f, "max_depth={max_depth} min_samples_leaf={min_samples_leaf}"),
            HyperParams::Svm { c, gamma } => write!(f, "C={c} gamma={gamma}"),
            HyperParams::Forest {
                n_trees,
                max_features,
                max_depth,
            } => write!(
                f,
                "n_trees={n_trees} max_features={max_features} max_depth={max_depth}"
            ),
        }
    }
}
