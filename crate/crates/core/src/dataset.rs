//! Question datasets with gold answers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::GoldQuestion;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetQuestion {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Gold atomic representation, one atom per entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<String>>,
    /// Gold answers of intermediate natural-language questions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sub_answers: BTreeMap<String, Vec<String>>,
    /// Restricts text retrieval to these paragraph ids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paragraphs: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub questions: Vec<DatasetQuestion>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing dataset: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate question id {0:?}")]
    DuplicateId(String),
    #[error("question {0:?} has no gold answers")]
    NoGold(String),
}

impl Dataset {
    pub fn new(questions: Vec<DatasetQuestion>) -> Result<Self, DatasetError> {
        let mut seen = BTreeSet::new();
        for q in &questions {
            if !seen.insert(q.id.as_str()) {
                return Err(DatasetError::DuplicateId(q.id.clone()));
            }
            if q.answers.is_empty() {
                return Err(DatasetError::NoGold(q.id.clone()));
            }
        }
        Ok(Dataset { questions })
    }

    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let raw: Dataset = serde_json::from_str(text)?;
        Self::new(raw.questions)
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetQuestion> {
        self.questions.iter().filter(move |q| q.split == split)
    }

    /// Training questions and their annotated sub-questions, for the
    /// precision table.
    pub fn training_examples(&self) -> Vec<GoldQuestion> {
        let mut out = Vec::new();
        for q in self.split(Split::Train) {
            out.push(GoldQuestion { question: q.question.clone(), answers: q.answers.clone() });
            for (sub, answers) in &q.sub_answers {
                out.push(GoldQuestion { question: sub.clone(), answers: answers.clone() });
            }
        }
        out
    }
}
