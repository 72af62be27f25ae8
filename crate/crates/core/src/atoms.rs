//! Atomic representations: ordered atomic questions whose `#k` tokens
//! point at earlier list positions (1-based).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::question::{get_ref_tokens, parse_question, Question, QuestionError};

pub const SEP: &str = "<sep>";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtomsError {
    #[error("atomic representation is empty")]
    Empty,
    #[error("atom {atom} references #{target}, which is not an earlier atom")]
    ForwardRef { atom: usize, target: u32 },
    #[error("atom {atom}: {source}")]
    Question { atom: usize, source: QuestionError },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct AtomicRepresentation {
    atoms: Vec<Question>,
}

impl AtomicRepresentation {
    pub fn new(atoms: Vec<Question>) -> Result<Self, AtomsError> {
        if atoms.is_empty() {
            return Err(AtomsError::Empty);
        }
        for (i, atom) in atoms.iter().enumerate() {
            let position = i + 1;
            if let Some(&target) = get_ref_tokens(atom).iter().find(|&&k| k as usize >= position) {
                return Err(AtomsError::ForwardRef { atom: position, target });
            }
        }
        Ok(AtomicRepresentation { atoms })
    }

    pub fn parse_list<S: AsRef<str>>(texts: &[S]) -> Result<Self, AtomsError> {
        let atoms = texts
            .iter()
            .enumerate()
            .map(|(i, t)| parse_question(t.as_ref()).map_err(|source| AtomsError::Question { atom: i + 1, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Question] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The atom whose answer answers the whole question.
    pub fn last(&self) -> &Question {
        self.atoms.last().expect("non-empty by construction")
    }

    pub fn into_inner(self) -> Vec<Question> {
        self.atoms
    }
}

impl<'de> Deserialize<'de> for AtomicRepresentation {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let atoms = Vec::<Question>::deserialize(deserializer)?;
        AtomicRepresentation::new(atoms).map_err(serde::de::Error::custom)
    }
}

/// `a1 <sep> a2 <sep> ... <sep> an`
pub fn serialize_atoms(ar: &AtomicRepresentation) -> String {
    ar.atoms.iter().map(Question::render).collect::<Vec<_>>().join(&format!(" {SEP} "))
}

pub fn deserialize_atoms(text: &str) -> Result<AtomicRepresentation, AtomsError> {
    let parts: Vec<&str> = text.split(SEP).map(str::trim).collect();
    AtomicRepresentation::parse_list(&parts)
}
