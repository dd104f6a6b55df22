//! Decorative element tag taxonomy (TTS timbre, avatar, music).
//!
//! Labels are data: the default taxonomy is loaded from
//! `data/decoration_tags.json`, a map of category → subcategory → labels.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_TAXONOMY: &str = include_str!("../data/decoration_tags.json");

/// Top-level decoration category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TagCategory {
    #[serde(rename = "TTS")]
    Tts,
    Avatar,
    Music,
}

impl TagCategory {
    pub const ALL: [TagCategory; 3] = [TagCategory::Tts, TagCategory::Avatar, TagCategory::Music];

    pub fn as_str(self) -> &'static str {
        match self {
            TagCategory::Tts => "TTS",
            TagCategory::Avatar => "Avatar",
            TagCategory::Music => "Music",
        }
    }

    /// Draft JSON key holding this category's tags.
    pub fn draft_key(self) -> &'static str {
        match self {
            TagCategory::Tts => "tts_tags",
            TagCategory::Avatar => "avatar_tags",
            TagCategory::Music => "music_tags",
        }
    }

    /// Name used in evaluation tables.
    pub fn report_name(self) -> &'static str {
        match self {
            TagCategory::Tts => "TTS Timbre",
            TagCategory::Avatar => "Avatar",
            TagCategory::Music => "Music",
        }
    }
}

impl fmt::Display for TagCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TagCategory {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "TTS" => Ok(TagCategory::Tts),
            "Avatar" => Ok(TagCategory::Avatar),
            "Music" => Ok(TagCategory::Music),
            other => Err(TaxonomyError::UnknownCategory(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("taxonomy JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading taxonomy: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown tag category `{0}`")]
    UnknownCategory(String),
    #[error("missing tag category `{0}`")]
    MissingCategory(TagCategory),
    #[error("duplicate label `{label}` in {category}/{subcategory}")]
    DuplicateLabel {
        category: TagCategory,
        subcategory: String,
        label: String,
    },
    #[error("empty label in {category}/{subcategory}")]
    EmptyLabel { category: TagCategory, subcategory: String },
}

/// Category → subcategory → labels, insertion order preserved.
///
/// Labels are unique within a subcategory. A label may repeat across
/// subcategories of one category (the avatar table lists "Black" and "White"
/// under both race and hair color); membership checks are per category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagTaxonomy {
    categories: IndexMap<TagCategory, IndexMap<String, Vec<String>>>,
}

impl TagTaxonomy {
    /// The shipped taxonomy: 3/14/2 subcategories, 98 labels.
    pub fn default_taxonomy() -> Self {
        Self::from_json(DEFAULT_TAXONOMY.as_bytes()).expect("bundled taxonomy is valid")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, TaxonomyError> {
        let raw: IndexMap<String, IndexMap<String, Vec<String>>> = serde_json::from_slice(bytes)?;
        let mut categories = IndexMap::new();
        for (name, subs) in raw {
            let category: TagCategory = name.parse()?;
            for (sub, labels) in &subs {
                let mut seen = std::collections::HashSet::new();
                for label in labels {
                    if label.trim().is_empty() {
                        return Err(TaxonomyError::EmptyLabel {
                            category,
                            subcategory: sub.clone(),
                        });
                    }
                    if !seen.insert(label.as_str()) {
                        return Err(TaxonomyError::DuplicateLabel {
                            category,
                            subcategory: sub.clone(),
                            label: label.clone(),
                        });
                    }
                }
            }
            categories.insert(category, subs);
        }
        for category in TagCategory::ALL {
            if !categories.contains_key(&category) {
                return Err(TaxonomyError::MissingCategory(category));
            }
        }
        Ok(Self { categories })
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        Self::from_json(&std::fs::read(path)?)
    }

    /// Pretty JSON with two-space indent and a trailing newline, the same
    /// layout as the shipped data file.
    pub fn to_json(&self) -> Vec<u8> {
        let raw: IndexMap<&str, &IndexMap<String, Vec<String>>> =
            self.categories.iter().map(|(c, subs)| (c.as_str(), subs)).collect();
        let mut out = serde_json::to_vec_pretty(&raw).expect("taxonomy serializes");
        out.push(b'\n');
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), TaxonomyError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn contains(&self, category: TagCategory, label: &str) -> bool {
        self.categories
            .get(&category)
            .is_some_and(|subs| subs.values().any(|labels| labels.iter().any(|l| l == label)))
    }

    pub fn subcategories(&self, category: TagCategory) -> impl Iterator<Item = (&str, &[String])> {
        self.categories
            .get(&category)
            .into_iter()
            .flat_map(|subs| subs.iter().map(|(k, v)| (k.as_str(), v.as_slice())))
    }

    pub fn subcategory_count(&self, category: TagCategory) -> usize {
        self.categories.get(&category).map_or(0, |s| s.len())
    }

    /// Number of (subcategory, label) entries in a category.
    pub fn label_count(&self, category: TagCategory) -> usize {
        self.subcategories(category).map(|(_, l)| l.len()).sum()
    }

    pub fn total_labels(&self) -> usize {
        TagCategory::ALL.iter().map(|c| self.label_count(*c)).sum()
    }
}

impl Default for TagTaxonomy {
    fn default() -> Self {
        Self::default_taxonomy()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let tax = TagTaxonomy::default_taxonomy();
        assert_eq!(tax.subcategory_count(TagCategory::Tts), 3);
        assert_eq!(tax.subcategory_count(TagCategory::Avatar), 14);
        assert_eq!(tax.subcategory_count(TagCategory::Music), 2);
        assert_eq!(tax.label_count(TagCategory::Tts), 12);
        assert_eq!(tax.label_count(TagCategory::Avatar), 62);
        assert_eq!(tax.label_count(TagCategory::Music), 24);
        assert_eq!(tax.total_labels(), 98);
    }

    #[test]
    fn save_reproduces_data_file() {
        let tax = TagTaxonomy::default_taxonomy();
        assert_eq!(tax.to_json(), DEFAULT_TAXONOMY.as_bytes());
        let again = TagTaxonomy::from_json(&tax.to_json()).unwrap();
        assert_eq!(again, tax);
    }

    #[test]
    fn membership_is_per_category() {
        let tax = TagTaxonomy::default_taxonomy();
        assert!(tax.contains(TagCategory::Avatar, "Young"));
        assert!(tax.contains(TagCategory::Avatar, "Female"));
        assert!(!tax.contains(TagCategory::Avatar, "Young female"));
        assert!(tax.contains(TagCategory::Music, "R&B/Soul"));
        assert!(!tax.contains(TagCategory::Music, "Young"));
        assert!(tax.contains(TagCategory::Tts, "British"));
    }

    #[test]
    fn rejects_duplicate_in_subcategory() {
        let bad = br#"{"TTS":{"Age":["Young","Young"]},"Avatar":{},"Music":{}}"#;
        assert!(matches!(
            TagTaxonomy::from_json(bad),
            Err(TaxonomyError::DuplicateLabel { .. })
        ));
    }

    #[test]
    fn rejects_unknown_and_missing_category() {
        let bad = br#"{"TTS":{},"Avatar":{},"Music":{},"Sticker":{}}"#;
        assert!(matches!(
            TagTaxonomy::from_json(bad),
            Err(TaxonomyError::UnknownCategory(_))
        ));
        let missing = br#"{"TTS":{},"Avatar":{}}"#;
        assert!(matches!(
            TagTaxonomy::from_json(missing),
            Err(TaxonomyError::MissingCategory(TagCategory::Music))
        ));
    }
}
