//! The six atomic operations over scored answer lists.
//!
//! Each output answer is scored with the mean of the node's generation
//! certainty and the scores of the input answers consumed to produce it.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{mean, AnswerList, AnswerValue, ScoredAnswer};
use crate::question::OpName;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpError {
    #[error("{op} expects {expected}, got {got}")]
    Arity { op: OpName, expected: &'static str, got: String },
    #[error("{op}: invalid argument {arg:?}")]
    BadArgument { op: OpName, arg: String },
    #[error("{op}: {value:?} is not a quantity")]
    NotComparable { op: OpName, value: String },
    #[error("cannot compare {left:?} with {right:?}")]
    IncompatibleUnits { left: String, right: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitDef {
    pub unit: String,
    pub base: String,
    pub factor: f64,
}

/// Unit conversions: each unit maps to a base unit and a multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitTable {
    units: BTreeMap<String, (String, f64)>,
}

impl Default for UnitTable {
    fn default() -> Self {
        let mut table = UnitTable { units: BTreeMap::new() };
        for (unit, base, factor) in
            [("m", "m", 1.0), ("km", "m", 1000.0), ("cm", "m", 0.01), ("ft", "m", 0.3048), ("mi", "m", 1609.344)]
        {
            table.insert(unit, base, factor);
        }
        table
    }
}

impl UnitTable {
    pub fn empty() -> Self {
        UnitTable { units: BTreeMap::new() }
    }

    pub fn insert(&mut self, unit: &str, base: &str, factor: f64) {
        self.units.insert(unit.to_string(), (base.to_string(), factor));
    }

    pub fn extend(&mut self, defs: &[UnitDef]) {
        for d in defs {
            self.insert(&d.unit, &d.base, d.factor);
        }
    }

    fn to_base(&self, amount: f64, unit: &str) -> (f64, String) {
        match self.units.get(unit) {
            Some((base, factor)) => (amount * factor, base.clone()),
            None => (amount, unit.to_string()),
        }
    }

    /// Orders two numeric values after unit normalization. Errors when either
    /// side is not numeric or the units do not share a base.
    pub fn compare(&self, left: &AnswerValue, right: &AnswerValue) -> Result<Ordering, (String, String)> {
        let incompatible = || (left.surface(), right.surface());
        let (a, b) = match (left, right) {
            (AnswerValue::Number { amount: a, .. }, AnswerValue::Number { amount: b, .. }) => (*a, *b),
            (AnswerValue::Quantity { amount: a, unit: ua, .. }, AnswerValue::Quantity { amount: b, unit: ub, .. }) => {
                let (a, base_a) = self.to_base(*a, ua);
                let (b, base_b) = self.to_base(*b, ub);
                if base_a != base_b {
                    return Err(incompatible());
                }
                (a, b)
            }
            _ => return Err(incompatible()),
        };
        if (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0) {
            Ok(Ordering::Equal)
        } else {
            Ok(a.partial_cmp(&b).unwrap_or(Ordering::Equal))
        }
    }
}

fn is_numeric(v: &AnswerValue) -> bool {
    matches!(v, AnswerValue::Quantity { .. } | AnswerValue::Number { .. })
}

fn check_shape(op: OpName, args: &[String], inputs: usize) -> Result<(), OpError> {
    let (want_args, want_inputs, expected) = match op {
        OpName::Verify => (2, 1, "a value, a comparator and 1 input"),
        OpName::SelectBetween => (1, 2, "greater/smaller and 2 inputs"),
        OpName::SelectAmong => (1, 1, "largest/smallest and 1 input"),
        OpName::Count => (0, 1, "no arguments and 1 input"),
        OpName::Intersection | OpName::Union => (0, 2, "no arguments and 2 inputs"),
    };
    if args.len() != want_args || inputs != want_inputs {
        return Err(OpError::Arity { op, expected, got: format!("{} arguments and {} inputs", args.len(), inputs) });
    }
    Ok(())
}

fn require_numeric(op: OpName, answers: &[ScoredAnswer]) -> Result<(), OpError> {
    match answers.iter().find(|a| !is_numeric(&a.value)) {
        Some(a) => Err(OpError::NotComparable { op, value: a.surface() }),
        None => Ok(()),
    }
}

fn compare(units: &UnitTable, a: &AnswerValue, b: &AnswerValue) -> Result<Ordering, OpError> {
    units.compare(a, b).map_err(|(left, right)| OpError::IncompatibleUnits { left, right })
}

/// Max-score representative per normalized surface form, in first-seen order.
fn dedup(answers: &[ScoredAnswer]) -> Vec<ScoredAnswer> {
    let mut order: Vec<String> = Vec::new();
    let mut best: HashMap<String, ScoredAnswer> = HashMap::new();
    for a in answers {
        let key = a.value.key();
        match best.get(&key) {
            Some(b) if b.score >= a.score => {}
            Some(_) => {
                best.insert(key, a.clone());
            }
            None => {
                order.push(key.clone());
                best.insert(key, a.clone());
            }
        }
    }
    order.into_iter().map(|k| best.remove(&k).expect("present")).collect()
}

/// Picks the better of two (value, entity) candidates for a comparison.
/// Equal values fall back to higher score, then the smaller entity name.
fn better<'a>(
    units: &UnitTable,
    a: &'a ScoredAnswer,
    b: &'a ScoredAnswer,
    want_greater: bool,
) -> Result<&'a ScoredAnswer, OpError> {
    let ord = compare(units, &a.value, &b.value)?;
    let pick_a = match ord {
        Ordering::Greater => want_greater,
        Ordering::Less => !want_greater,
        Ordering::Equal => match a.score.partial_cmp(&b.score).unwrap_or(Ordering::Equal) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a.value.subject() <= b.value.subject(),
        },
    };
    Ok(if pick_a { a } else { b })
}

fn direction(op: OpName, arg: &str, greater: &str, smaller: &str) -> Result<bool, OpError> {
    if arg == greater {
        Ok(true)
    } else if arg == smaller {
        Ok(false)
    } else {
        Err(OpError::BadArgument { op, arg: arg.to_string() })
    }
}

pub fn apply_operation(
    op: OpName,
    args: &[String],
    inputs: &[&[ScoredAnswer]],
    certainty: f64,
    units: &UnitTable,
) -> Result<AnswerList, OpError> {
    check_shape(op, args, inputs.len())?;
    let all = usize::MAX;
    let out: Vec<ScoredAnswer> = match op {
        OpName::Verify => {
            let threshold = AnswerValue::parse_surface(&args[0]);
            if !is_numeric(&threshold) {
                return Err(OpError::BadArgument { op, arg: args[0].clone() });
            }
            let cmp = args[1].as_str();
            if !matches!(cmp, ">" | "<" | "=" | "!=") {
                return Err(OpError::BadArgument { op, arg: args[1].clone() });
            }
            require_numeric(op, inputs[0])?;
            let mut out = Vec::new();
            for x in inputs[0] {
                let ord = compare(units, &x.value, &threshold)?;
                let holds = match cmp {
                    ">" => ord == Ordering::Greater,
                    "<" => ord == Ordering::Less,
                    "=" => ord == Ordering::Equal,
                    _ => ord != Ordering::Equal,
                };
                out.push(ScoredAnswer::new(AnswerValue::Boolean { value: holds }, mean(&[certainty, x.score])));
            }
            out
        }
        OpName::SelectBetween => {
            let greater = direction(op, &args[0], "greater", "smaller")?;
            require_numeric(op, inputs[0])?;
            require_numeric(op, inputs[1])?;
            let mut out = Vec::new();
            for x in inputs[0].iter().filter(|a| a.value.subject().is_some()) {
                for y in inputs[1].iter().filter(|a| a.value.subject().is_some()) {
                    let winner = better(units, x, y, greater)?;
                    let name = winner.value.subject().expect("filtered");
                    out.push(ScoredAnswer::new(AnswerValue::entity(name), mean(&[certainty, x.score, y.score])));
                }
            }
            out
        }
        OpName::SelectAmong => {
            let largest = direction(op, &args[0], "largest", "smallest")?;
            require_numeric(op, inputs[0])?;
            let mut winner: Option<&ScoredAnswer> = None;
            for x in inputs[0].iter().filter(|a| a.value.subject().is_some()) {
                winner = Some(match winner {
                    None => x,
                    Some(w) => better(units, w, x, largest)?,
                });
            }
            winner
                .map(|w| {
                    let name = w.value.subject().expect("filtered");
                    ScoredAnswer::new(AnswerValue::entity(name), mean(&[certainty, w.score]))
                })
                .into_iter()
                .collect()
        }
        OpName::Count => {
            let distinct = dedup(inputs[0]);
            if distinct.is_empty() {
                Vec::new()
            } else {
                let scores: Vec<f64> = distinct.iter().map(|a| a.score).collect();
                vec![ScoredAnswer::new(AnswerValue::number(distinct.len() as f64), mean(&[certainty, mean(&scores)]))]
            }
        }
        OpName::Intersection => {
            let left = dedup(inputs[0]);
            let right: HashMap<String, ScoredAnswer> =
                dedup(inputs[1]).into_iter().map(|a| (a.value.key(), a)).collect();
            left.into_iter()
                .filter_map(|a| {
                    let b = right.get(&a.value.key())?;
                    let score = mean(&[certainty, a.score, b.score]);
                    Some(ScoredAnswer::new(a.value, score))
                })
                .collect()
        }
        OpName::Union => {
            let mut merged: Vec<ScoredAnswer> = Vec::new();
            for a in dedup(inputs[0]).into_iter().chain(dedup(inputs[1])) {
                match merged.iter_mut().find(|m| m.value.key() == a.value.key()) {
                    Some(m) if a.score > m.score => *m = a,
                    Some(_) => {}
                    None => merged.push(a),
                }
            }
            merged.into_iter().map(|a| ScoredAnswer::new(a.value, mean(&[certainty, a.score]))).collect()
        }
    };
    Ok(AnswerList::from_answers(out, all))
}
