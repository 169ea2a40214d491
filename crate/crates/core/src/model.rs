use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Gene,
    Disease,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Gene, Task::Disease];

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Gene => "gene",
            Task::Disease => "disease",
        }
    }

    /// Marker line that opens the ranked list in model output.
    pub fn list_marker(&self) -> &'static str {
        match self {
            Task::Gene => "POTENTIAL_GENES:",
            Task::Disease => "POTENTIAL_DISEASES:",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gene" | "genes" => Ok(Task::Gene),
            "disease" | "diseases" => Ok(Task::Disease),
            other => Err(format!("unknown task `{other}` (expected gene or disease)")),
        }
    }
}

/// Inference strategy. Declaration order is report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "base")]
    Base,
    #[serde(rename = "cot")]
    Cot,
    #[serde(rename = "rag")]
    Rag,
    #[serde(rename = "rag-cot")]
    RagCot,
    #[serde(rename = "cot-rag")]
    CotRag,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Base,
        Strategy::Cot,
        Strategy::Rag,
        Strategy::RagCot,
        Strategy::CotRag,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Base => "base",
            Strategy::Cot => "cot",
            Strategy::Rag => "rag",
            Strategy::RagCot => "rag-cot",
            Strategy::CotRag => "cot-rag",
        }
    }

    pub fn uses_retrieval(&self) -> bool {
        matches!(self, Strategy::Rag | Strategy::RagCot | Strategy::CotRag)
    }

    pub fn uses_reasoning(&self) -> bool {
        matches!(self, Strategy::Cot | Strategy::RagCot | Strategy::CotRag)
    }

    pub fn expected_llm_calls(&self) -> usize {
        match self {
            Strategy::CotRag => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == norm)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected base, cot, rag, rag-cot or cot-rag)"))
    }
}

/// Evaluation dataset a note belongs to. Declaration order is report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Dataset {
    PhenopacketDerived,
    PubmedFreetext,
    Inhouse,
    Custom,
}

impl Dataset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dataset::PhenopacketDerived => "PHENOPACKET_DERIVED",
            Dataset::PubmedFreetext => "PUBMED_FREETEXT",
            Dataset::Inhouse => "INHOUSE",
            Dataset::Custom => "CUSTOM",
        }
    }

    /// Lenient name lookup; unrecognized names map to `Custom`.
    pub fn parse_lenient(s: &str) -> Dataset {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "phenopacketderived" | "phenopacket" => Dataset::PhenopacketDerived,
            "pubmedfreetext" | "pubmed" => Dataset::PubmedFreetext,
            "inhouse" => Dataset::Inhouse,
            _ => Dataset::Custom,
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One patient case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalNote {
    pub note_id: String,
    pub text: String,
    pub dataset: Dataset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_gene: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_disease: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<String>,
}

impl ClinicalNote {
    /// A note without truth labels, for inference only.
    pub fn unlabeled(note_id: impl Into<String>, text: impl Into<String>) -> Self {
        ClinicalNote {
            note_id: note_id.into(),
            text: text.into(),
            dataset: Dataset::Custom,
            truth_gene: None,
            truth_disease: None,
            demographics: None,
        }
    }

    pub fn truth_for(&self, task: Task) -> Option<&str> {
        match task {
            Task::Gene => self.truth_gene.as_deref(),
            Task::Disease => self.truth_disease.as_deref(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.as_str()));
        }
        assert_eq!("RAG_COT".parse::<Strategy>().unwrap(), Strategy::RagCot);
        assert!("rat".parse::<Strategy>().is_err());
    }

    #[test]
    fn call_counts() {
        let calls: Vec<_> = Strategy::ALL.iter().map(|s| s.expected_llm_calls()).collect();
        assert_eq!(calls, vec![1, 1, 1, 1, 2]);
    }

    #[test]
    fn dataset_lenient() {
        assert_eq!(Dataset::parse_lenient("phenopacket-derived"), Dataset::PhenopacketDerived);
        assert_eq!(Dataset::parse_lenient("PUBMED_FREETEXT"), Dataset::PubmedFreetext);
        assert_eq!(Dataset::parse_lenient("in-house"), Dataset::Inhouse);
        assert_eq!(Dataset::parse_lenient("mine"), Dataset::Custom);
    }
}
