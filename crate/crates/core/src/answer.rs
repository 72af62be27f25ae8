//! Answer values, scored answers and the ranked, deduplicated answer list.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnswerValue {
    Entity {
        name: String,
    },
    /// A measured value. `subject` names the entity it was measured on, if known.
    Quantity {
        amount: f64,
        unit: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subject: Option<String>,
    },
    Number {
        amount: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subject: Option<String>,
    },
    Boolean {
        value: bool,
    },
}

pub fn format_amount(amount: f64) -> String {
    if amount.fract() == 0.0 && amount.abs() < 1e15 {
        format!("{}", amount as i64)
    } else {
        format!("{amount}")
    }
}

fn number_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(-?\d+(?:\.\d+)?)\s*([A-Za-z]+)?$").unwrap())
}

impl AnswerValue {
    pub fn entity(name: impl Into<String>) -> Self {
        AnswerValue::Entity { name: name.into() }
    }

    pub fn quantity(amount: f64, unit: impl Into<String>) -> Self {
        AnswerValue::Quantity { amount, unit: unit.into(), subject: None }
    }

    pub fn number(amount: f64) -> Self {
        AnswerValue::Number { amount, subject: None }
    }

    /// Reads a surface string: `yes`/`no`, a number with an optional unit,
    /// otherwise an entity name.
    pub fn parse_surface(text: &str) -> Self {
        let text = text.trim();
        match text {
            "yes" => return AnswerValue::Boolean { value: true },
            "no" => return AnswerValue::Boolean { value: false },
            _ => {}
        }
        if let Some(caps) = number_pattern().captures(text) {
            let amount: f64 = caps[1].parse().expect("regex guarantees a number");
            return match caps.get(2) {
                Some(unit) => AnswerValue::quantity(amount, unit.as_str()),
                None => AnswerValue::number(amount),
            };
        }
        AnswerValue::entity(text)
    }

    pub fn surface(&self) -> String {
        match self {
            AnswerValue::Entity { name } => name.clone(),
            AnswerValue::Quantity { amount, unit, .. } => format!("{} {unit}", format_amount(*amount)),
            AnswerValue::Number { amount, .. } => format_amount(*amount),
            AnswerValue::Boolean { value } => if *value { "yes" } else { "no" }.to_string(),
        }
    }

    pub fn subject(&self) -> Option<&str> {
        match self {
            AnswerValue::Quantity { subject, .. } | AnswerValue::Number { subject, .. } => subject.as_deref(),
            _ => None,
        }
    }

    pub fn with_subject(self, name: impl Into<String>) -> Self {
        match self {
            AnswerValue::Quantity { amount, unit, .. } => AnswerValue::Quantity { amount, unit, subject: Some(name.into()) },
            AnswerValue::Number { amount, .. } => AnswerValue::Number { amount, subject: Some(name.into()) },
            other => other,
        }
    }

    pub fn key(&self) -> String {
        surface_key(&self.surface())
    }
}

impl fmt::Display for AnswerValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface())
    }
}

/// Normalized surface form used for deduplication: lowercased, trimmed,
/// inner whitespace collapsed.
pub fn surface_key(surface: &str) -> String {
    surface.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredAnswer {
    #[serde(flatten)]
    pub value: AnswerValue,
    pub score: f64,
}

impl ScoredAnswer {
    pub fn new(value: AnswerValue, score: f64) -> Self {
        ScoredAnswer { value, score }
    }

    pub fn surface(&self) -> String {
        self.value.surface()
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Which source produced a candidate; lower wins score ties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Kb,
    Text,
    Child,
}

/// Ranked answers with unique normalized surface forms, best first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerList(Vec<ScoredAnswer>);

impl AnswerList {
    pub fn empty() -> Self {
        AnswerList(Vec::new())
    }

    /// Merges candidates: one entry per surface form carrying the highest
    /// score, ordered by score, then source priority, then surface; at most
    /// `k` entries. A kept quantity without a subject borrows one from a
    /// dropped duplicate.
    pub fn select<I>(candidates: I, k: usize) -> Self
    where
        I: IntoIterator<Item = (ScoredAnswer, Source)>,
    {
        let mut best: HashMap<String, (ScoredAnswer, Source, usize)> = HashMap::new();
        for (seq, (answer, source)) in candidates.into_iter().enumerate() {
            let key = answer.value.key();
            match best.get_mut(&key) {
                None => {
                    best.insert(key, (answer, source, seq));
                }
                Some(slot) => {
                    let better = answer.score > slot.0.score || (answer.score == slot.0.score && source < slot.1);
                    if better {
                        let inherited = slot.0.value.subject().map(str::to_string);
                        *slot = (answer, source, slot.2.min(seq));
                        if slot.0.value.subject().is_none() {
                            if let Some(s) = inherited {
                                slot.0.value = slot.0.value.clone().with_subject(s);
                            }
                        }
                    } else if slot.0.value.subject().is_none() {
                        if let Some(s) = answer.value.subject() {
                            slot.0.value = slot.0.value.clone().with_subject(s);
                        }
                    }
                }
            }
        }
        let mut ranked: Vec<(ScoredAnswer, Source, String)> =
            best.into_values().map(|(a, s, _)| {
                let surface = a.surface();
                (a, s, surface)
            }).collect();
        ranked.sort_by(|a, b| {
            b.0.score
                .partial_cmp(&a.0.score)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then_with(|| a.2.cmp(&b.2))
        });
        ranked.truncate(k);
        AnswerList(ranked.into_iter().map(|(a, _, _)| a).collect())
    }

    pub fn from_answers(answers: impl IntoIterator<Item = ScoredAnswer>, k: usize) -> Self {
        Self::select(answers.into_iter().map(|a| (a, Source::Kb)), k)
    }

    pub fn answers(&self) -> &[ScoredAnswer] {
        &self.0
    }

    pub fn top(&self) -> Option<&ScoredAnswer> {
        self.0.first()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<ScoredAnswer> {
        self.0
    }
}

impl std::ops::Deref for AnswerList {
    type Target = [ScoredAnswer];

    fn deref(&self) -> &[ScoredAnswer] {
        &self.0
    }
}
