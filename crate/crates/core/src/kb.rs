//! In-memory knowledge base, a small program interpreter over it, semantic
//! parsers producing programs, and the per-skeleton precision table.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{AnswerList, AnswerValue, ScoredAnswer};
use crate::grammar::{parse_frame, Frame, Np};
use crate::metrics::exact_match;
use crate::ops::{UnitDef, UnitTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityDecl {
    pub id: String,
    pub name: String,
    pub concepts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptDecl {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationFact {
    pub s: String,
    pub p: String,
    pub o: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeFact {
    pub e: String,
    pub a: String,
    pub value: RawValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl AttributeFact {
    pub fn answer_value(&self) -> AnswerValue {
        match (&self.value, &self.unit) {
            (RawValue::Number(n), Some(u)) => AnswerValue::quantity(*n, u.clone()),
            (RawValue::Number(n), None) => AnswerValue::number(*n),
            (RawValue::Text(t), _) => AnswerValue::entity(t.clone()),
        }
    }
}

/// The on-disk form of a knowledge base.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KbData {
    pub entities: Vec<EntityDecl>,
    pub concepts: Vec<ConceptDecl>,
    pub relations: Vec<RelationFact>,
    pub attributes: Vec<AttributeFact>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub units: Vec<UnitDef>,
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing knowledge base: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{context} refers to unknown {kind} {id:?}")]
    Unknown { context: String, kind: &'static str, id: String },
    #[error("concept hierarchy has a cycle through {0:?}")]
    ConceptCycle(String),
}

/// Validated, indexed knowledge base. Immutable after construction.
#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    data: KbData,
    units: UnitTable,
    by_name: HashMap<String, Vec<usize>>,
    concept_by_name: HashMap<String, usize>,
    /// Transitive concept ancestors (including itself) per entity.
    memberships: Vec<BTreeSet<usize>>,
    forward: HashMap<(usize, String), Vec<usize>>,
    backward: HashMap<(usize, String), Vec<usize>>,
    attrs: HashMap<(usize, String), Vec<AnswerValue>>,
}

impl KnowledgeBase {
    pub fn new(data: KbData) -> Result<Self, KbError> {
        let mut concept_ids: HashMap<&str, usize> = HashMap::new();
        for (i, c) in data.concepts.iter().enumerate() {
            if concept_ids.insert(&c.id, i).is_some() {
                return Err(KbError::DuplicateId { kind: "concept", id: c.id.clone() });
            }
        }
        let mut parents: Vec<Option<usize>> = Vec::with_capacity(data.concepts.len());
        for c in &data.concepts {
            parents.push(match &c.parent {
                None => None,
                Some(p) => Some(*concept_ids.get(p.as_str()).ok_or_else(|| KbError::Unknown {
                    context: format!("concept {}", c.id),
                    kind: "concept",
                    id: p.clone(),
                })?),
            });
        }
        let mut ancestors: Vec<BTreeSet<usize>> = Vec::with_capacity(parents.len());
        for start in 0..parents.len() {
            let mut seen = BTreeSet::new();
            let mut cur = Some(start);
            while let Some(c) = cur {
                if !seen.insert(c) {
                    return Err(KbError::ConceptCycle(data.concepts[start].id.clone()));
                }
                cur = parents[c];
            }
            ancestors.push(seen);
        }

        let mut entity_ids: HashMap<&str, usize> = HashMap::new();
        let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
        let mut memberships = Vec::with_capacity(data.entities.len());
        for (i, e) in data.entities.iter().enumerate() {
            if entity_ids.insert(&e.id, i).is_some() {
                return Err(KbError::DuplicateId { kind: "entity", id: e.id.clone() });
            }
            by_name.entry(e.name.clone()).or_default().push(i);
            let mut m = BTreeSet::new();
            for c in &e.concepts {
                let ci = concept_ids.get(c.as_str()).ok_or_else(|| KbError::Unknown {
                    context: format!("entity {}", e.id),
                    kind: "concept",
                    id: c.clone(),
                })?;
                m.extend(ancestors[*ci].iter().copied());
            }
            memberships.push(m);
        }
        let entity = |id: &str, context: String| {
            entity_ids.get(id).copied().ok_or_else(|| KbError::Unknown { context, kind: "entity", id: id.to_string() })
        };

        let mut forward: HashMap<(usize, String), Vec<usize>> = HashMap::new();
        let mut backward: HashMap<(usize, String), Vec<usize>> = HashMap::new();
        for f in &data.relations {
            let s = entity(&f.s, format!("relation {} {} {}", f.s, f.p, f.o))?;
            let o = entity(&f.o, format!("relation {} {} {}", f.s, f.p, f.o))?;
            forward.entry((s, f.p.clone())).or_default().push(o);
            backward.entry((o, f.p.clone())).or_default().push(s);
        }
        let mut attrs: HashMap<(usize, String), Vec<AnswerValue>> = HashMap::new();
        for f in &data.attributes {
            let e = entity(&f.e, format!("attribute {} of {}", f.a, f.e))?;
            attrs.entry((e, f.a.clone())).or_default().push(f.answer_value());
        }
        let mut units = UnitTable::default();
        units.extend(&data.units);
        let concept_by_name = data.concepts.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
        Ok(KnowledgeBase { data, units, by_name, concept_by_name, memberships, forward, backward, attrs })
    }

    pub fn from_json(text: &str) -> Result<Self, KbError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| KbError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn data(&self) -> &KbData {
        &self.data
    }

    pub fn units(&self) -> &UnitTable {
        &self.units
    }

    pub fn entity_count(&self) -> usize {
        self.data.entities.len()
    }

    pub fn fact_count(&self) -> usize {
        self.data.relations.len() + self.data.attributes.len()
    }

    fn name(&self, e: usize) -> &str {
        &self.data.entities[e].name
    }
}

/// Removes `floor(fraction * facts)` relation and attribute facts chosen
/// uniformly at random; declarations are kept.
pub fn ablate_kb(kb: &KnowledgeBase, fraction: f64, seed: u64) -> KnowledgeBase {
    let fraction = fraction.clamp(0.0, 1.0);
    let total = kb.fact_count();
    let remove = ((fraction * total as f64).floor() as usize).min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dropped: BTreeSet<usize> = sample(&mut rng, total, remove).into_iter().collect();
    let n_rel = kb.data.relations.len();
    let mut data = kb.data.clone();
    data.relations =
        kb.data.relations.iter().enumerate().filter(|(i, _)| !dropped.contains(i)).map(|(_, f)| f.clone()).collect();
    data.attributes = kb
        .data
        .attributes
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped.contains(&(i + n_rel)))
        .map(|(_, f)| f.clone())
        .collect();
    KnowledgeBase::new(data).expect("subset of a valid knowledge base")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Function {
    Find,
    FilterConcept,
    Relate,
    FilterAttr,
    QueryAttr,
    QueryName,
    SelectAmong,
    Count,
}

impl Function {
    pub fn name(self) -> &'static str {
        match self {
            Function::Find => "Find",
            Function::FilterConcept => "FilterConcept",
            Function::Relate => "Relate",
            Function::FilterAttr => "FilterAttr",
            Function::QueryAttr => "QueryAttr",
            Function::QueryName => "QueryName",
            Function::SelectAmong => "SelectAmong",
            Function::Count => "Count",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Call {
    #[serde(rename = "fn")]
    pub func: Function,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub inputs: Vec<usize>,
}

impl Call {
    pub fn new(func: Function, args: &[&str], inputs: &[usize]) -> Self {
        Call { func, args: args.iter().map(|s| s.to_string()).collect(), inputs: inputs.to_vec() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Program {
    pub calls: Vec<Call>,
}

impl Program {
    pub fn new(calls: Vec<Call>) -> Self {
        Program { calls }
    }
}

pub fn function_skeleton(k: &Program) -> String {
    k.calls.iter().map(|c| c.func.name()).collect::<Vec<_>>().join("-")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("empty program")]
    Empty,
    #[error("call {call} ({func}): {reason}")]
    Malformed { call: usize, func: &'static str, reason: String },
    #[error("call {call}: cannot compare {left:?} with {right:?}")]
    TypeMismatch { call: usize, left: String, right: String },
}

#[derive(Clone, Debug)]
enum Slot {
    Entities(Vec<usize>),
    Values(Vec<AnswerValue>),
}

fn sorted_unique(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

fn holds(cmp: &str, ord: Ordering) -> Option<bool> {
    Some(match cmp {
        ">" => ord == Ordering::Greater,
        "<" => ord == Ordering::Less,
        "=" => ord == Ordering::Equal,
        "!=" => ord != Ordering::Equal,
        _ => return None,
    })
}

/// Evaluates a program. Unknown names, concepts, predicates or attributes
/// simply yield empty sets; entity sets at the end are reported by name.
pub fn execute_program(g: &KnowledgeBase, k: &Program) -> Result<Vec<AnswerValue>, ExecError> {
    if k.calls.is_empty() {
        return Err(ExecError::Empty);
    }
    let mut slots: Vec<Slot> = Vec::with_capacity(k.calls.len());
    for (i, call) in k.calls.iter().enumerate() {
        let bad = |reason: &str| ExecError::Malformed { call: i, func: call.func.name(), reason: reason.to_string() };
        let (want_args, want_inputs): (usize, &[usize]) = match call.func {
            Function::Find => (1, &[0]),
            Function::FilterConcept => (1, &[0, 1]),
            Function::Relate => (2, &[1]),
            Function::FilterAttr => (3, &[0, 1]),
            Function::QueryAttr => (1, &[1]),
            Function::QueryName | Function::Count => (0, &[1]),
            Function::SelectAmong => (2, &[1]),
        };
        if call.args.len() != want_args {
            return Err(bad(&format!("expected {want_args} arguments")));
        }
        if !want_inputs.contains(&call.inputs.len()) {
            return Err(bad("wrong number of inputs"));
        }
        if call.inputs.iter().any(|&j| j >= i) {
            return Err(bad("inputs must refer to earlier calls"));
        }
        let input_entities = || -> Result<Vec<usize>, ExecError> {
            match call.inputs.first() {
                None => Ok((0..g.entity_count()).collect()),
                Some(&j) => match &slots[j] {
                    Slot::Entities(es) => Ok(es.clone()),
                    Slot::Values(_) => Err(bad("input is not an entity set")),
                },
            }
        };
        let arg = |n: usize| call.args[n].as_str();
        let slot = match call.func {
            Function::Find => Slot::Entities(g.by_name.get(arg(0)).cloned().unwrap_or_default()),
            Function::FilterConcept => {
                let members = match g.concept_by_name.get(arg(0)) {
                    None => Vec::new(),
                    Some(c) => input_entities()?.into_iter().filter(|e| g.memberships[*e].contains(c)).collect(),
                };
                Slot::Entities(members)
            }
            Function::Relate => {
                let index = match arg(1) {
                    "forward" => &g.forward,
                    "backward" => &g.backward,
                    _ => return Err(bad("direction must be forward or backward")),
                };
                let mut out = Vec::new();
                for e in input_entities()? {
                    if let Some(ns) = index.get(&(e, arg(0).to_string())) {
                        out.extend(ns);
                    }
                }
                Slot::Entities(sorted_unique(out))
            }
            Function::FilterAttr => {
                let target = AnswerValue::parse_surface(arg(2));
                let mut out = Vec::new();
                for e in input_entities()? {
                    let values = g.attrs.get(&(e, arg(0).to_string())).map(Vec::as_slice).unwrap_or(&[]);
                    let mut keep = false;
                    for v in values {
                        let ord = g.units.compare(v, &target).map_err(|(left, right)| ExecError::TypeMismatch {
                            call: i,
                            left,
                            right,
                        })?;
                        keep |= holds(arg(1), ord).ok_or_else(|| bad("unknown comparator"))?;
                    }
                    if keep {
                        out.push(e);
                    }
                }
                Slot::Entities(out)
            }
            Function::QueryAttr => {
                let mut out = Vec::new();
                for e in input_entities()? {
                    if let Some(values) = g.attrs.get(&(e, arg(0).to_string())) {
                        out.extend(values.iter().map(|v| v.clone().with_subject(g.name(e))));
                    }
                }
                Slot::Values(out)
            }
            Function::QueryName => {
                Slot::Values(input_entities()?.into_iter().map(|e| AnswerValue::entity(g.name(e))).collect())
            }
            Function::SelectAmong => {
                let largest = match arg(1) {
                    "largest" => true,
                    "smallest" => false,
                    _ => return Err(bad("expected largest or smallest")),
                };
                let mut best: Option<(usize, &AnswerValue)> = None;
                for e in input_entities()? {
                    for v in g.attrs.get(&(e, arg(0).to_string())).map(Vec::as_slice).unwrap_or(&[]) {
                        best = Some(match best {
                            None => (e, v),
                            Some((be, bv)) => {
                                let ord = g.units.compare(v, bv).map_err(|(left, right)| ExecError::TypeMismatch {
                                    call: i,
                                    left,
                                    right,
                                })?;
                                let wins = match ord {
                                    Ordering::Greater => largest,
                                    Ordering::Less => !largest,
                                    Ordering::Equal => g.name(e) < g.name(be),
                                };
                                if wins {
                                    (e, v)
                                } else {
                                    (be, bv)
                                }
                            }
                        });
                    }
                }
                Slot::Entities(best.map(|(e, _)| vec![e]).unwrap_or_default())
            }
            Function::Count => {
                let n = match &slots[call.inputs[0]] {
                    Slot::Entities(es) => sorted_unique(es.clone()).len(),
                    Slot::Values(vs) => vs.iter().map(AnswerValue::key).collect::<BTreeSet<_>>().len(),
                };
                Slot::Values(vec![AnswerValue::number(n as f64)])
            }
        };
        slots.push(slot);
    }
    Ok(match slots.pop().expect("non-empty") {
        Slot::Entities(es) => es.into_iter().map(|e| AnswerValue::entity(g.name(e))).collect(),
        Slot::Values(vs) => vs,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot parse {question:?}: {reason}")]
pub struct ParseFailure {
    pub question: String,
    pub reason: String,
}

/// Maps a natural-language question to a program and a parse likelihood.
pub trait SemanticParser: Send + Sync {
    fn parse(&self, question: &str) -> Result<(Program, f64), ParseFailure>;
}

/// Rule-based parser for the synthetic question grammar. Comparisons,
/// verification and set operations are left to decomposition.
#[derive(Clone, Copy, Debug)]
pub struct TemplateParser {
    pub p_parse: f64,
}

impl Default for TemplateParser {
    fn default() -> Self {
        TemplateParser { p_parse: 1.0 }
    }
}

fn np_program(np: &Np, calls: &mut Vec<Call>) -> Result<usize, String> {
    let push = |calls: &mut Vec<Call>, c: Call| {
        calls.push(c);
        calls.len() - 1
    };
    Ok(match np {
        Np::Named(name) => push(calls, Call::new(Function::Find, &[name], &[])),
        Np::Ref(k) => return Err(format!("unresolved reference #{k}")),
        Np::Of { rel, subject } => {
            let s = np_program(subject, calls)?;
            push(calls, Call::new(Function::Relate, &[rel.predicate(), "forward"], &[s]))
        }
        Np::Having { rel, concept, object } => {
            let o = np_program(object, calls)?;
            let r = push(calls, Call::new(Function::Relate, &[rel.predicate(), "backward"], &[o]));
            push(calls, Call::new(Function::FilterConcept, &[concept.name()], &[r]))
        }
        Np::Extreme { rel, concept, object, attr, largest } => {
            let set = np_program(&Np::having(*rel, *concept, (**object).clone()), calls)?;
            let dir = if *largest { "largest" } else { "smallest" };
            push(calls, Call::new(Function::SelectAmong, &[attr.name(), dir], &[set]))
        }
        Np::Filtered { concept, attr, cmp, value } => {
            let c = push(calls, Call::new(Function::FilterConcept, &[concept.name()], &[]));
            push(calls, Call::new(Function::FilterAttr, &[attr.name(), cmp.symbol(), value], &[c]))
        }
    })
}

pub fn frame_program(frame: &Frame) -> Result<Program, String> {
    let mut calls = Vec::new();
    match frame {
        Frame::AskEntity(np) => {
            let last = np_program(np, &mut calls)?;
            if calls[last].func != Function::SelectAmong {
                calls.push(Call::new(Function::QueryName, &[], &[last]));
            }
        }
        Frame::AskAttr(attr, np) => {
            let s = np_program(np, &mut calls)?;
            calls.push(Call::new(Function::QueryAttr, &[attr.name()], &[s]));
        }
        Frame::Count(np) => {
            let s = np_program(np, &mut calls)?;
            calls.push(Call::new(Function::Count, &[], &[s]));
        }
        Frame::Verify { .. } | Frame::Compare { .. } | Frame::SetOp { .. } => {
            return Err("question shape has no program template".into())
        }
    }
    Ok(Program::new(calls))
}

impl SemanticParser for TemplateParser {
    fn parse(&self, question: &str) -> Result<(Program, f64), ParseFailure> {
        let fail = |reason: String| ParseFailure { question: question.to_string(), reason };
        let frame = parse_frame(question).map_err(|e| fail(e.to_string()))?;
        let program = frame_program(&frame).map_err(fail)?;
        Ok((program, self.p_parse))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseEntry {
    pub question: String,
    pub program: Program,
    #[serde(default = "default_p_parse")]
    pub p_parse: f64,
}

fn default_p_parse() -> f64 {
    1.0
}

/// Parser backed by stored (question → program) annotations.
#[derive(Clone, Debug, Default)]
pub struct FixtureParser {
    entries: HashMap<String, (Program, f64)>,
}

impl FixtureParser {
    pub fn new(entries: Vec<ParseEntry>) -> Self {
        FixtureParser {
            entries: entries
                .into_iter()
                .map(|e| (e.question.split_whitespace().collect::<Vec<_>>().join(" "), (e.program, e.p_parse)))
                .collect(),
        }
    }
}

impl SemanticParser for FixtureParser {
    fn parse(&self, question: &str) -> Result<(Program, f64), ParseFailure> {
        let key = question.split_whitespace().collect::<Vec<_>>().join(" ");
        self.entries.get(&key).cloned().ok_or_else(|| ParseFailure {
            question: question.to_string(),
            reason: "not in fixture".into(),
        })
    }
}

/// KB answers of one question, or why there are none.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KbAnswers {
    pub answers: AnswerList,
    pub reason: Option<String>,
}

/// Executes an already parsed program and scores every answer `p_g * p_parse`.
pub fn score_program(g: &KnowledgeBase, program: &Program, p_parse: f64, p_g: f64, k: usize) -> KbAnswers {
    match execute_program(g, program) {
        Ok(values) => {
            let score = p_g * p_parse;
            KbAnswers { answers: AnswerList::from_answers(values.into_iter().map(|v| ScoredAnswer::new(v, score)), k), reason: None }
        }
        Err(e) => KbAnswers { answers: AnswerList::empty(), reason: Some(e.to_string()) },
    }
}

pub fn kb_answers(q: &str, p_g: f64, g: &KnowledgeBase, parser: &dyn SemanticParser, k: usize) -> KbAnswers {
    match parser.parse(q) {
        Ok((program, p_parse)) => score_program(g, &program, p_parse, p_g, k),
        Err(e) => KbAnswers { answers: AnswerList::empty(), reason: Some(e.to_string()) },
    }
}

/// Training-set precision of KB execution per function skeleton.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrecisionTable(pub BTreeMap<String, f64>);

impl PrecisionTable {
    pub fn get(&self, skeleton: &str) -> Option<f64> {
        self.0.get(skeleton).copied()
    }

    /// Unseen and empty skeletons are never suitable.
    pub fn is_suitable(&self, skeleton: &str, gamma: f64) -> bool {
        !skeleton.is_empty() && self.get(skeleton).is_some_and(|p| p >= gamma)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A training question with its gold answers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldQuestion {
    pub question: String,
    pub answers: Vec<String>,
}

/// Fraction of each skeleton's training questions whose top KB answer
/// matches gold. Questions the parser rejects are skipped.
pub fn build_precision_table(train: &[GoldQuestion], g: &KnowledgeBase, parser: &dyn SemanticParser) -> PrecisionTable {
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for item in train {
        let Ok((program, p_parse)) = parser.parse(&item.question) else { continue };
        let result = score_program(g, &program, p_parse, 1.0, usize::MAX);
        let correct = result.answers.top().map(|a| exact_match(&a.surface(), &item.answers) == 1.0).unwrap_or(false);
        let entry = tally.entry(function_skeleton(&program)).or_default();
        entry.0 += usize::from(correct);
        entry.1 += 1;
    }
    PrecisionTable(tally.into_iter().map(|(s, (c, n))| (s, c as f64 / n as f64)).collect())
}
