//! Column roles, the entity-type link between relational columns and text
//! annotations, and schema validation against a dataset header.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Role a column plays during anonymization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeKind {
    DirectIdentifier,
    QuasiNumeric,
    QuasiCategorical,
    QuasiDate,
    Textual,
    Insensitive,
}

impl AttributeKind {
    pub fn is_quasi(self) -> bool {
        matches!(
            self,
            AttributeKind::QuasiNumeric | AttributeKind::QuasiCategorical | AttributeKind::QuasiDate
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKind::DirectIdentifier => "direct-identifier",
            AttributeKind::QuasiNumeric => "quasi-numeric",
            AttributeKind::QuasiCategorical => "quasi-categorical",
            AttributeKind::QuasiDate => "quasi-date",
            AttributeKind::Textual => "textual",
            AttributeKind::Insensitive => "insensitive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    /// Entity type of text terms that carry the same information as this
    /// column. Only meaningful on quasi-identifiers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_type: Option<String>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, kind: AttributeKind) -> Self {
        Attribute {
            name: name.into(),
            kind,
            entity_type: None,
        }
    }

    pub fn with_entity_type(mut self, entity_type: impl Into<String>) -> Self {
        self.entity_type = Some(entity_type.into());
        self
    }
}

pub const DEFAULT_DATE_FORMAT: &str = "YYYY-MM-DD";

fn default_date_format() -> String {
    DEFAULT_DATE_FORMAT.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<Attribute>,
    #[serde(default = "default_date_format")]
    pub date_format: String,
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>) -> Self {
        Schema {
            attributes,
            date_format: default_date_format(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// Index of the first direct identifier.
    pub fn direct_identifier(&self) -> Option<usize> {
        self.attributes
            .iter()
            .position(|a| a.kind == AttributeKind::DirectIdentifier)
    }

    pub fn quasi_identifiers(&self) -> impl Iterator<Item = usize> + '_ {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind.is_quasi())
            .map(|(i, _)| i)
    }

    pub fn textual(&self) -> impl Iterator<Item = usize> + '_ {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind == AttributeKind::Textual)
            .map(|(i, _)| i)
    }

    /// Attribute linked to `entity_type`, if any quasi-identifier declares it.
    pub fn linked_attribute(&self, entity_type: &str) -> Option<usize> {
        self.attributes
            .iter()
            .position(|a| a.kind.is_quasi() && a.entity_type.as_deref() == Some(entity_type))
    }

    pub fn date_format(&self) -> Result<DateFormat> {
        DateFormat::parse(&self.date_format)
    }
}

/// A date pattern written either with `YYYY`/`MM`/`DD` tokens or as a raw
/// strftime string (anything containing `%`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateFormat {
    strftime: String,
}

impl DateFormat {
    pub fn parse(pattern: &str) -> Result<Self> {
        let strftime = if pattern.contains('%') {
            pattern.to_string()
        } else {
            let s = pattern.replace("YYYY", "%Y").replace("MM", "%m").replace("DD", "%d");
            if !(s.contains("%Y") && s.contains("%m") && s.contains("%d")) {
                return Err(Error::Schema(vec![Violation::InvalidDateFormat {
                    pattern: pattern.to_string(),
                }]));
            }
            s
        };
        let probe = NaiveDate::from_ymd_opt(2004, 5, 14).expect("valid date");
        let mut rendered = String::new();
        let formats = write!(rendered, "{}", probe.format(&strftime)).is_ok();
        if formats && NaiveDate::parse_from_str(&rendered, &strftime).ok() == Some(probe) {
            Ok(DateFormat { strftime })
        } else {
            Err(Error::Schema(vec![Violation::InvalidDateFormat {
                pattern: pattern.to_string(),
            }]))
        }
    }

    pub fn parse_date(&self, s: &str) -> Option<NaiveDate> {
        NaiveDate::parse_from_str(s, &self.strftime).ok()
    }
}

impl Default for DateFormat {
    fn default() -> Self {
        DateFormat {
            strftime: "%Y-%m-%d".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "kebab-case")]
pub enum Violation {
    MissingColumn {
        attribute: String,
    },
    DuplicateAttribute {
        attribute: String,
    },
    NoDirectIdentifier,
    MultipleDirectIdentifiers {
        attributes: Vec<String>,
    },
    NoTextualAttribute,
    EntityTypeOnNonQuasi {
        attribute: String,
    },
    DuplicateEntityType {
        entity_type: String,
        attributes: Vec<String>,
    },
    InvalidDateFormat {
        pattern: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingColumn { attribute } => {
                write!(f, "attribute {attribute:?} has no column in the header")
            }
            Violation::DuplicateAttribute { attribute } => {
                write!(f, "attribute {attribute:?} is declared more than once")
            }
            Violation::NoDirectIdentifier => write!(f, "no direct identifier"),
            Violation::MultipleDirectIdentifiers { attributes } => {
                write!(f, "multiple direct identifiers: {}", attributes.join(", "))
            }
            Violation::NoTextualAttribute => write!(f, "no textual attribute"),
            Violation::EntityTypeOnNonQuasi { attribute } => write!(
                f,
                "attribute {attribute:?} declares an entity type but is not a quasi-identifier"
            ),
            Violation::DuplicateEntityType {
                entity_type,
                attributes,
            } => write!(
                f,
                "entity type {entity_type:?} is linked to several attributes: {}",
                attributes.join(", ")
            ),
            Violation::InvalidDateFormat { pattern } => write!(f, "invalid date format {pattern:?}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Schema(self.violations))
        }
    }
}

/// Checks `schema` against its own invariants and against the dataset header.
pub fn validate_schema<S: AsRef<str>>(schema: &Schema, header: &[S]) -> ValidationReport {
    let mut violations = Vec::new();
    let columns: HashSet<&str> = header.iter().map(|h| h.as_ref()).collect();

    let mut seen = HashSet::new();
    for a in &schema.attributes {
        if !seen.insert(a.name.as_str()) {
            violations.push(Violation::DuplicateAttribute {
                attribute: a.name.clone(),
            });
        }
        if !columns.contains(a.name.as_str()) {
            violations.push(Violation::MissingColumn {
                attribute: a.name.clone(),
            });
        }
    }

    let direct: Vec<String> = schema
        .attributes
        .iter()
        .filter(|a| a.kind == AttributeKind::DirectIdentifier)
        .map(|a| a.name.clone())
        .collect();
    match direct.len() {
        0 => violations.push(Violation::NoDirectIdentifier),
        1 => {}
        _ => violations.push(Violation::MultipleDirectIdentifiers { attributes: direct }),
    }

    if schema.textual().next().is_none() {
        violations.push(Violation::NoTextualAttribute);
    }

    let mut by_entity: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for a in &schema.attributes {
        if let Some(et) = &a.entity_type {
            if !a.kind.is_quasi() {
                violations.push(Violation::EntityTypeOnNonQuasi {
                    attribute: a.name.clone(),
                });
            }
            by_entity.entry(et.as_str()).or_default().push(a.name.clone());
        }
    }
    for (et, names) in by_entity {
        if names.len() > 1 {
            violations.push(Violation::DuplicateEntityType {
                entity_type: et.to_string(),
                attributes: names,
            });
        }
    }

    if let Err(Error::Schema(v)) = DateFormat::parse(&schema.date_format) {
        violations.extend(v);
    }

    ValidationReport { violations }
}
