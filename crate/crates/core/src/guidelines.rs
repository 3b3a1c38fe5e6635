//! Labeling guidelines for the three nature dimensions.
//!
//! The texts are a static, versioned resource shared by the pre-labeling
//! prompt and the annotation API, and are served without modification.

use serde::{Deserialize, Serialize};

use crate::keywords::Dimension;

const GUIDELINES_V1: &str = include_str!("../resources/guidelines/guidelines.v1.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guideline {
    pub dimension: Dimension,
    pub title: String,
    pub definition: String,
    pub counter_title: String,
    pub counter_definition: String,
}

impl Guideline {
    /// Text substituted into the pre-labeling prompt: the positive definition
    /// followed by the counter definition.
    pub fn prompt_text(&self) -> String {
        format!(
            "{}: {} {}: {}",
            self.title, self.definition, self.counter_title, self.counter_definition
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guidelines {
    pub version: String,
    pub dimensions: Vec<Guideline>,
}

impl Guidelines {
    pub fn builtin() -> Guidelines {
        serde_json::from_str(GUIDELINES_V1).expect("bundled guideline resource")
    }

    /// The raw resource exactly as shipped.
    pub fn builtin_raw() -> &'static str {
        GUIDELINES_V1
    }

    pub fn get(&self, dimension: Dimension) -> &Guideline {
        self.dimensions
            .iter()
            .find(|g| g.dimension == dimension)
            .expect("guideline for every dimension")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_dimensions_present() {
        let g = Guidelines::builtin();
        assert_eq!(g.version, "v1");
        for d in Dimension::ALL {
            assert!(!g.get(d).definition.is_empty());
        }
        assert!(g
            .get(Dimension::Biodiversity)
            .prompt_text()
            .contains("Hot spots may be coral reefs"));
    }
}
