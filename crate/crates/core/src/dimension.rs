//! The six semantic dimensions a vase description is scored on.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Fabric,
    Technique,
    Shape,
    Dating,
    Decoration,
    Attribution,
}

impl Dimension {
    /// Canonical order, also the order of reward weights.
    pub const ALL: [Dimension; 6] = [
        Dimension::Fabric,
        Dimension::Technique,
        Dimension::Shape,
        Dimension::Dating,
        Dimension::Decoration,
        Dimension::Attribution,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Fabric => "fabric",
            Dimension::Technique => "technique",
            Dimension::Shape => "shape",
            Dimension::Dating => "dating",
            Dimension::Decoration => "decoration",
            Dimension::Attribution => "attribution",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL.into_iter().find(|d| d.as_str() == s).ok_or_else(|| format!("unknown dimension {s:?}"))
    }
}

/// Per-dimension content of a caption (generated side) or of ground-truth
/// metadata (target side). An absent slot is `None`, never `Some("")`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionSlots {
    pub fabric: Option<String>,
    pub technique: Option<String>,
    pub shape: Option<String>,
    pub dating: Option<String>,
    pub decoration: Option<String>,
    pub attribution: Option<String>,
}

impl DimensionSlots {
    pub fn get(&self, dim: Dimension) -> Option<&str> {
        self.slot(dim).as_deref()
    }

    /// Sets a slot; empty content clears it.
    pub fn set(&mut self, dim: Dimension, content: impl Into<String>) {
        let content = content.into();
        *self.slot_mut(dim) = if content.is_empty() { None } else { Some(content) };
    }

    pub fn clear(&mut self, dim: Dimension) {
        *self.slot_mut(dim) = None;
    }

    pub fn populated(&self) -> impl Iterator<Item = (Dimension, &str)> {
        Dimension::ALL.into_iter().filter_map(move |d| self.get(d).map(|s| (d, s)))
    }

    pub fn populated_count(&self) -> usize {
        self.populated().count()
    }

    pub fn is_empty(&self) -> bool {
        self.populated_count() == 0
    }

    fn slot(&self, dim: Dimension) -> &Option<String> {
        match dim {
            Dimension::Fabric => &self.fabric,
            Dimension::Technique => &self.technique,
            Dimension::Shape => &self.shape,
            Dimension::Dating => &self.dating,
            Dimension::Decoration => &self.decoration,
            Dimension::Attribution => &self.attribution,
        }
    }

    fn slot_mut(&mut self, dim: Dimension) -> &mut Option<String> {
        match dim {
            Dimension::Fabric => &mut self.fabric,
            Dimension::Technique => &mut self.technique,
            Dimension::Shape => &mut self.shape,
            Dimension::Dating => &mut self.dating,
            Dimension::Decoration => &mut self.decoration,
            Dimension::Attribution => &mut self.attribution,
        }
    }
}
