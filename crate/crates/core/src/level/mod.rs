//! Level data model: element vocabulary, level files and structural checks.
//!
//! A level file is a JSON object with `level_id`, `author`, `elements` and an
//! optional `label`. A corpus file holds one such object per line.

mod registry;

pub use registry::{ElementKind, ElementRegistry, FeatureGroup};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::FORMAT_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    Expert,
    Player,
}

/// Expert verdict on a level. `Selected` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Selected,
    Excluded,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Selected
    }

    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Label::Selected
        } else {
            Label::Excluded
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Position {
    pub row: i64,
    pub col: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelElement {
    pub kind: String,
    pub value: Option<i64>,
    pub position: Option<Position>,
}

impl LevelElement {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            value: None,
            position: None,
        }
    }

    pub fn with_value(kind: impl Into<String>, value: i64) -> Self {
        Self {
            kind: kind.into(),
            value: Some(value),
            position: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameLevel {
    pub level_id: String,
    pub author: Author,
    pub elements: Vec<LevelElement>,
    pub label: Option<Label>,
    /// Version of the registry the level was resolved against.
    pub registry_version: u32,
    /// Element kinds absent from the registry, in order of first appearance.
    pub unknown_kinds: Vec<String>,
}

impl GameLevel {
    pub fn count_of(&self, kind: &str) -> usize {
        self.elements.iter().filter(|e| e.kind == kind).count()
    }

    pub fn has_warnings(&self) -> bool {
        !self.unknown_kinds.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct WireElement {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    row: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    col: Option<i64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireLevel {
    #[serde(default = "default_format_version")]
    format_version: u32,
    level_id: String,
    author: Author,
    elements: Vec<WireElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

fn default_format_version() -> u32 {
    FORMAT_VERSION
}

/// Byte offset of a serde_json error position within `bytes`.
fn error_offset(bytes: &[u8], err: &serde_json::Error) -> usize {
    let (line, column) = (err.line(), err.column());
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

/// Parses a single level file against `registry`.
///
/// Unknown kinds are kept and reported in [`GameLevel::unknown_kinds`]. A
/// value on a known non-value-bearing kind is a schema error.
pub fn parse_level(bytes: &[u8], registry: &ElementRegistry) -> Result<GameLevel> {
    let wire: WireLevel = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        offset: error_offset(bytes, &e),
        message: e.to_string(),
    })?;
    if wire.format_version != FORMAT_VERSION {
        return Err(Error::version(
            "level format",
            FORMAT_VERSION,
            wire.format_version,
        ));
    }
    let mut unknown_kinds: Vec<String> = Vec::new();
    let mut elements = Vec::with_capacity(wire.elements.len());
    for el in wire.elements {
        match registry.get(&el.kind) {
            Some(kind) if el.value.is_some() && !kind.value_bearing => {
                return Err(Error::Schema { kind: el.kind });
            }
            Some(_) => {}
            None => {
                if !unknown_kinds.contains(&el.kind) {
                    unknown_kinds.push(el.kind.clone());
                }
            }
        }
        let position = match (el.row, el.col) {
            (Some(row), Some(col)) => Some(Position { row, col }),
            (None, None) => None,
            _ => {
                return Err(Error::Parse {
                    offset: 0,
                    message: format!("element `{}` has only one of row/col", el.kind),
                })
            }
        };
        elements.push(LevelElement {
            kind: el.kind,
            value: el.value,
            position,
        });
    }
    Ok(GameLevel {
        level_id: wire.level_id,
        author: wire.author,
        elements,
        label: wire.label,
        registry_version: registry.version(),
        unknown_kinds,
    })
}

/// Serializes a level as a single-line JSON object.
pub fn serialize_level(level: &GameLevel) -> String {
    let wire = WireLevel {
        format_version: FORMAT_VERSION,
        level_id: level.level_id.clone(),
        author: level.author,
        elements: level
            .elements
            .iter()
            .map(|e| WireElement {
                kind: e.kind.clone(),
                value: e.value,
                row: e.position.map(|p| p.row),
                col: e.position.map(|p| p.col),
            })
            .collect(),
        label: level.label,
    };
    serde_json::to_string(&wire).expect("level serializes")
}

/// Parses a corpus file: one level per non-blank line.
pub fn parse_corpus(bytes: &[u8], registry: &ElementRegistry) -> Result<Vec<GameLevel>> {
    let mut levels = Vec::new();
    let mut start = 0;
    for line in bytes.split(|&b| b == b'\n') {
        let line_start = start;
        start += line.len() + 1;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let level = parse_level(line, registry).map_err(|e| match e {
            Error::Parse { offset, message } => Error::Parse {
                offset: line_start + offset,
                message,
            },
            other => other,
        })?;
        levels.push(level);
    }
    Ok(levels)
}

pub fn serialize_corpus(levels: &[GameLevel]) -> String {
    let mut out = String::new();
    for level in levels {
        out.push_str(&serialize_level(level));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Short invariant tag, e.g. `goal-count`.
    pub invariant: &'static str,
    /// Indices into `GameLevel::elements` of the offending elements.
    pub elements: Vec<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, invariant: &str) -> bool {
        self.violations.iter().any(|v| v.invariant == invariant)
    }
}

pub fn validate_level(level: &GameLevel, registry: &ElementRegistry) -> ValidationResult {
    let mut violations = Vec::new();
    let indices_of = |kind: &str| -> Vec<usize> {
        level
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == kind)
            .map(|(i, _)| i)
            .collect()
    };

    let goals = indices_of(registry.goal_kind());
    if goals.len() != 1 {
        violations.push(Violation {
            invariant: "goal-count",
            message: format!("expected exactly one goal, found {}", goals.len()),
            elements: goals,
        });
    }
    if indices_of(registry.player_character_kind()).is_empty() {
        violations.push(Violation {
            invariant: "player-character-count",
            elements: Vec::new(),
            message: "level has no player character".into(),
        });
    }
    let bad_values: Vec<usize> = level
        .elements
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            e.value.is_some() && registry.get(&e.kind).is_some_and(|k| !k.value_bearing)
        })
        .map(|(i, _)| i)
        .collect();
    if !bad_values.is_empty() {
        violations.push(Violation {
            invariant: "value-on-non-value-bearing",
            message: format!("{} element(s) carry a value their kind does not take", bad_values.len()),
            elements: bad_values,
        });
    }
    if level.level_id.is_empty() {
        violations.push(Violation {
            invariant: "level-id",
            elements: Vec::new(),
            message: "empty level id".into(),
        });
    }
    ValidationResult { violations }
}

/// Checks corpus-level invariants of a labeled corpus: every level carries a
/// label and level ids are unique. Returns `(level_id, violation)` pairs.
pub fn validate_labeled_corpus(levels: &[GameLevel]) -> Vec<(String, Violation)> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for level in levels {
        if level.label.is_none() {
            out.push((
                level.level_id.clone(),
                Violation {
                    invariant: "label-missing",
                    elements: Vec::new(),
                    message: "labeled corpus entry without label".into(),
                },
            ));
        }
        if !seen.insert(level.level_id.as_str()) {
            out.push((
                level.level_id.clone(),
                Violation {
                    invariant: "duplicate-level-id",
                    elements: Vec::new(),
                    message: "level id appears more than once".into(),
                },
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reg() -> ElementRegistry {
        ElementRegistry::default_registry()
    }

    #[test]
    fn minimal_level_parses() {
        let src = br#"{"level_id":"a","author":"player","elements":[{"kind":"player_character","value":5},{"kind":"goal"}]}"#;
        let level = parse_level(src, &reg()).unwrap();
        assert_eq!(level.elements.len(), 2);
        assert_eq!(level.count_of("goal"), 1);
        assert_eq!(level.elements[0].value, Some(5));
        assert!(validate_level(&level, &reg()).is_ok());
    }

    #[test]
    fn two_goals_parse_but_fail_validation() {
        let src = br#"{"level_id":"a","author":"player","elements":[{"kind":"goal"},{"kind":"goal"},{"kind":"player_character"}]}"#;
        let level = parse_level(src, &reg()).unwrap();
        let res = validate_level(&level, &reg());
        assert!(res.has("goal-count"));
        assert_eq!(res.violations[0].elements, vec![0, 1]);
    }

    #[test]
    fn value_on_ice_block_is_schema_error() {
        let src = br#"{"level_id":"a","author":"player","elements":[{"kind":"ice_block_x1","value":3}]}"#;
        match parse_level(src, &reg()) {
            Err(Error::Schema { kind }) => assert_eq!(kind, "ice_block_x1"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_reports_offset() {
        let src = br#"{"level_id":"a","author":"player","elements":[}"#;
        match parse_level(src, &reg()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 46),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn corpus_offsets_are_file_relative() {
        let src = b"{\"level_id\":\"a\",\"author\":\"player\",\"elements\":[]}\n{\"level_id\":]\n";
        match parse_corpus(src, &reg()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 49 + 12),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn validation_cases() {
        let r = reg();
        let mk = |els: Vec<LevelElement>| GameLevel {
            level_id: "x".into(),
            author: Author::Player,
            elements: els,
            label: None,
            registry_version: 1,
            unknown_kinds: vec![],
        };
        let ok = mk(vec![LevelElement::new("goal"), LevelElement::new("player_character")]);
        assert!(validate_level(&ok, &r).is_ok());
        let no_goal = mk(vec![LevelElement::new("player_character")]);
        assert!(validate_level(&no_goal, &r).has("goal-count"));
        let two_pc = mk(vec![
            LevelElement::new("player_character"),
            LevelElement::new("player_character"),
            LevelElement::new("goal"),
        ]);
        assert!(validate_level(&two_pc, &r).is_ok());
        let no_pc = mk(vec![LevelElement::new("goal")]);
        assert!(validate_level(&no_pc, &r).has("player-character-count"));
    }

    #[test]
    fn unknown_kind_warns() {
        let src = br#"{"level_id":"a","author":"expert","elements":[{"kind":"goal"},{"kind":"player_character"},{"kind":"laser","value":2,"row":1,"col":4}]}"#;
        let level = parse_level(src, &reg()).unwrap();
        assert_eq!(level.unknown_kinds, vec!["laser".to_string()]);
        assert_eq!(level.elements[2].position, Some(Position { row: 1, col: 4 }));
        assert!(validate_level(&level, &reg()).is_ok());
    }

    #[test]
    fn wrong_format_version_fails_closed() {
        let src = br#"{"format_version":9,"level_id":"a","author":"player","elements":[]}"#;
        assert!(matches!(parse_level(src, &reg()), Err(Error::Version { .. })));
    }

    #[test]
    fn labeled_corpus_checks() {
        let src = "{\"level_id\":\"a\",\"author\":\"player\",\"elements\":[],\"label\":\"selected\"}\n\
                   {\"level_id\":\"a\",\"author\":\"player\",\"elements\":[]}\n";
        let levels = parse_corpus(src.as_bytes(), &reg()).unwrap();
        let v = validate_labeled_corpus(&levels);
        let tags: Vec<_> = v.iter().map(|(_, v)| v.invariant).collect();
        assert_eq!(tags, vec!["label-missing", "duplicate-level-id"]);
    }

    fn arb_element() -> impl Strategy<Value = LevelElement> {
        let kinds: Vec<ElementKind> = reg().kinds().to_vec();
        (0..kinds.len(), any::<i16>(), proptest::option::of((-50i64..50, -50i64..50))).prop_map(
            move |(k, v, pos)| {
                let kind = &kinds[k];
                LevelElement {
                    kind: kind.id.clone(),
                    value: kind.value_bearing.then_some(i64::from(v)),
                    position: pos.map(|(row, col)| Position { row, col }),
                }
            },
        )
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(
            id in "[a-z0-9_-]{1,12}",
            expert in any::<bool>(),
            label in proptest::option::of(any::<bool>()),
            elements in proptest::collection::vec(arb_element(), 0..20),
        ) {
            let level = GameLevel {
                level_id: id,
                author: if expert { Author::Expert } else { Author::Player },
                elements,
                label: label.map(Label::from_positive),
                registry_version: 1,
                unknown_kinds: vec![],
            };
            let back = parse_level(serialize_level(&level).as_bytes(), &reg()).unwrap();
            prop_assert_eq!(&back, &level);
            prop_assert_eq!(validate_level(&back, &reg()), validate_level(&level, &reg()));
        }
    }
}
