use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

const DEFAULT_REGISTRY: &str = include_str!("../../data/default_registry.json");

/// The four element groups a level is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    PlayerCharacter,
    Goal,
    PhysicsObject,
    Obstacle,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::PlayerCharacter,
        FeatureGroup::Goal,
        FeatureGroup::PhysicsObject,
        FeatureGroup::Obstacle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::PlayerCharacter => "player_character",
            FeatureGroup::Goal => "goal",
            FeatureGroup::PhysicsObject => "physics_object",
            FeatureGroup::Obstacle => "obstacle",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementKind {
    pub id: String,
    pub group: FeatureGroup,
    pub value_bearing: bool,
}

#[derive(Serialize, Deserialize)]
struct RegistryFile {
    format_version: u32,
    version: u32,
    kinds: Vec<ElementKind>,
}

/// Ordered, versioned vocabulary of element kinds.
///
/// Feature-column order is derived from `kinds` order, so reordering the
/// registry is a breaking change and must bump `version`.
#[derive(Debug, Clone)]
pub struct ElementRegistry {
    version: u32,
    kinds: Vec<ElementKind>,
    index: HashMap<String, usize>,
}

impl PartialEq for ElementRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.kinds == other.kinds
    }
}

impl ElementRegistry {
    pub fn new(version: u32, kinds: Vec<ElementKind>) -> Result<Self> {
        let mut index = HashMap::with_capacity(kinds.len());
        for (i, kind) in kinds.iter().enumerate() {
            if kind.id.is_empty() {
                return Err(Error::Config("registry kind with empty id".into()));
            }
            if index.insert(kind.id.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate registry kind `{}`", kind.id)));
            }
        }
        for group in [FeatureGroup::PlayerCharacter, FeatureGroup::Goal] {
            let n = kinds.iter().filter(|k| k.group == group).count();
            if n != 1 {
                return Err(Error::Config(format!(
                    "registry must define exactly one {group} kind, found {n}"
                )));
            }
        }
        Ok(Self { version, kinds, index })
    }

    /// The shipped registry: 14 named kinds plus 11 reserved placeholders.
    pub fn default_registry() -> Self {
        Self::from_json(DEFAULT_REGISTRY.as_bytes()).expect("bundled registry is valid")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let file: RegistryFile = serde_json::from_slice(bytes)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::version(
                "registry format",
                FORMAT_VERSION,
                file.format_version,
            ));
        }
        Self::new(file.version, file.kinds)
    }

    pub fn to_json(&self) -> String {
        let file = RegistryFile {
            format_version: FORMAT_VERSION,
            version: self.version,
            kinds: self.kinds.clone(),
        };
        serde_json::to_string_pretty(&file).expect("registry serializes")
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn kinds(&self) -> &[ElementKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ElementKind> {
        self.index.get(id).map(|&i| &self.kinds[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Group of `id`; unknown kinds are treated as obstacles.
    pub fn group_of(&self, id: &str) -> FeatureGroup {
        self.get(id).map_or(FeatureGroup::Obstacle, |k| k.group)
    }

    fn only_kind_of(&self, group: FeatureGroup) -> &ElementKind {
        self.kinds
            .iter()
            .find(|k| k.group == group)
            .expect("registry invariant: one kind per singleton group")
    }

    pub fn goal_kind(&self) -> &str {
        &self.only_kind_of(FeatureGroup::Goal).id
    }

    pub fn player_character_kind(&self) -> &str {
        &self.only_kind_of(FeatureGroup::PlayerCharacter).id
    }
}
