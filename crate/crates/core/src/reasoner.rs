//! Recursive probabilistic reasoning over a decomposition tree.
//!
//! Every natural-language node collects answers from the knowledge base,
//! from text, and (for non-leaf nodes) from its children. The last child
//! of a node references its siblings and is resolved from their answers.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{mean, AnswerList, AnswerValue, ScoredAnswer, Source};
use crate::kb::{function_skeleton, score_program, KnowledgeBase, Program, SemanticParser, PrecisionTable};
use crate::ops::apply_operation;
use crate::question::{distinct_refs, Question, QuestionError, QuestionKind};
use crate::text::{bm25_recall, select_evidence, text_answers, Corpus, EvidenceSelector, SpanExtractor};
use crate::tree::Hqdt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Kb,
    Text,
    Mix,
    RoatMix,
    NoSchedulerMix,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Kb, Mode::Text, Mode::Mix, Mode::RoatMix, Mode::NoSchedulerMix];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Kb => "kb",
            Mode::Text => "text",
            Mode::Mix => "mix",
            Mode::RoatMix => "roat-mix",
            Mode::NoSchedulerMix => "no-scheduler-mix",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasonerConfig {
    /// Minimum training precision of a skeleton for the KB to be used.
    pub gamma: f64,
    /// Answer list cap.
    pub k: usize,
    /// Answers taken per referenced sibling when enumerating combinations.
    pub combination_cap: usize,
    /// Paragraphs recalled by BM25.
    pub recall_n: usize,
    pub use_kb: bool,
    pub use_text: bool,
    /// When false every suitability flag is forced on.
    pub schedule: bool,
    /// Answer atoms in order without consulting internal nodes.
    pub flat: bool,
}

impl Default for ReasonerConfig {
    fn default() -> Self {
        ReasonerConfig {
            gamma: 0.7,
            k: 5,
            combination_cap: 3,
            recall_n: 10,
            use_kb: true,
            use_text: true,
            schedule: true,
            flat: false,
        }
    }
}

impl ReasonerConfig {
    pub fn for_mode(mode: Mode) -> Self {
        let base = ReasonerConfig::default();
        match mode {
            Mode::Kb => ReasonerConfig { use_text: false, ..base },
            Mode::Text => ReasonerConfig { use_kb: false, ..base },
            Mode::Mix => base,
            Mode::RoatMix => ReasonerConfig { flat: true, ..base },
            Mode::NoSchedulerMix => ReasonerConfig { schedule: false, ..base },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if self.k == 0 || self.combination_cap == 0 {
            return Err("k and the combination cap must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suitability {
    pub kb: bool,
    pub text: bool,
    pub child: bool,
}

/// Scheduler output: the suitability flags plus the parse and evidence
/// computed on the way, reused by the executors.
#[derive(Clone, Debug, Default)]
pub struct Schedule {
    pub suitability: Suitability,
    pub parse: Option<(Program, f64)>,
    pub skeleton: Option<String>,
    pub evidence: Vec<usize>,
}

/// Read-only stores and models shared by every question.
#[derive(Clone, Copy)]
pub struct Knowledge<'a> {
    pub kb: &'a KnowledgeBase,
    pub parser: &'a dyn SemanticParser,
    pub table: &'a PrecisionTable,
    pub corpus: &'a Corpus,
    pub selector: &'a dyn EvidenceSelector,
    pub extractor: &'a dyn SpanExtractor,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubstitutionError {
    #[error("reference #{0} has no answer to substitute")]
    Uncovered(u32),
    #[error("substituted question is not natural language: {0}")]
    NotNatural(String),
    #[error(transparent)]
    Question(QuestionError),
}

/// Replaces every reference with the surface form of its answer.
pub fn substitute_refs(q: &Question, combination: &BTreeMap<u32, String>) -> Result<Question, SubstitutionError> {
    let filled = q.fill_refs(combination).map_err(|e| match e {
        QuestionError::Uncovered(k) => SubstitutionError::Uncovered(k),
        other => SubstitutionError::Question(other),
    })?;
    if filled.kind() != QuestionKind::NaturalLanguage {
        return Err(SubstitutionError::NotNatural(filled.render()));
    }
    Ok(filled)
}

/// Merges source answers: one entry per surface form with its best score,
/// ranked by score, then source (kb, text, child), then surface; top `k`.
pub fn aggregate(kb: &[ScoredAnswer], text: &[ScoredAnswer], child: &[ScoredAnswer], k: usize) -> AnswerList {
    let tagged = |list: &[ScoredAnswer], s: Source| list.iter().cloned().map(move |a| (a, s)).collect::<Vec<_>>();
    AnswerList::select(
        tagged(kb, Source::Kb).into_iter().chain(tagged(text, Source::Text)).chain(tagged(child, Source::Child)),
        k,
    )
}

/// One substituted question asked while resolving a bridge.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CombinationTrace {
    pub question: String,
    pub input_scores: Vec<f64>,
    pub answers: Vec<ScoredAnswer>,
}

/// Per-node explanation record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceNode {
    pub index: usize,
    pub question: String,
    pub kind: QuestionKind,
    pub certainty: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suitability: Option<Suitability>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<String>,
    pub kb: Vec<ScoredAnswer>,
    pub text: Vec<ScoredAnswer>,
    pub child: Vec<ScoredAnswer>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub combinations: Vec<CombinationTrace>,
    pub answers: AnswerList,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TraceNode {
    fn new(index: usize, question: &Question, certainty: f64) -> Self {
        TraceNode {
            index,
            question: question.render(),
            kind: question.kind(),
            certainty,
            suitability: None,
            skeleton: None,
            evidence: Vec::new(),
            kb: Vec::new(),
            text: Vec::new(),
            child: Vec::new(),
            combinations: Vec::new(),
            answers: AnswerList::empty(),
            notes: Vec::new(),
        }
    }
}

/// Explanation of one solved question, nodes ordered by index.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trace {
    pub mode: String,
    pub nodes: Vec<TraceNode>,
}

pub struct Reasoner<'a> {
    knowledge: Knowledge<'a>,
    cfg: ReasonerConfig,
}

/// Per-question solving state.
struct Run<'r, 'a> {
    reasoner: &'r Reasoner<'a>,
    tree: &'r Hqdt,
    pool: Option<&'r [usize]>,
    trace: BTreeMap<usize, TraceNode>,
}

impl<'a> Reasoner<'a> {
    pub fn new(knowledge: Knowledge<'a>, cfg: ReasonerConfig) -> Self {
        Reasoner { knowledge, cfg }
    }

    pub fn config(&self) -> &ReasonerConfig {
        &self.cfg
    }

    /// Decides which sources to consult for a natural-language question.
    /// `pool` restricts text recall to a fixed paragraph set.
    pub fn schedule(&self, q: &str, non_leaf: bool, pool: Option<&[usize]>) -> Schedule {
        let kn = &self.knowledge;
        let parse = if self.cfg.use_kb { kn.parser.parse(q).ok() } else { None };
        let skeleton = parse.as_ref().map(|(p, _)| function_skeleton(p));
        let candidates: Vec<usize> = if !self.cfg.use_text {
            Vec::new()
        } else {
            match pool {
                Some(p) => p.to_vec(),
                None => bm25_recall(q, kn.corpus, self.cfg.recall_n).into_iter().map(|(i, _)| i).collect(),
            }
        };
        if !self.cfg.schedule {
            return Schedule {
                suitability: Suitability { kb: self.cfg.use_kb, text: self.cfg.use_text, child: non_leaf },
                parse,
                skeleton,
                evidence: candidates,
            };
        }
        let evidence = select_evidence(q, kn.corpus, &candidates, kn.selector);
        let kb = self.cfg.use_kb && skeleton.as_deref().is_some_and(|s| kn.table.is_suitable(s, self.cfg.gamma));
        Schedule {
            suitability: Suitability { kb, text: self.cfg.use_text && !evidence.is_empty(), child: non_leaf },
            parse,
            skeleton,
            evidence,
        }
    }

    /// Answers a question directly from the KB and text (no children).
    fn answer_directly(&self, q: &Question, p_g: f64, pool: Option<&[usize]>, node: &mut TraceNode) -> AnswerList {
        let text = q.render();
        let sched = self.schedule(&text, false, pool);
        self.collect(&text, p_g, &sched, node);
        let answers = aggregate(&node.kb, &node.text, &[], self.cfg.k);
        node.answers = answers.clone();
        answers
    }

    fn collect(&self, text: &str, p_g: f64, sched: &Schedule, node: &mut TraceNode) {
        let kn = &self.knowledge;
        node.suitability = Some(sched.suitability);
        node.skeleton = sched.skeleton.clone();
        node.evidence = sched.evidence.iter().map(|&i| kn.corpus.paragraph(i).id.clone()).collect();
        if sched.suitability.kb {
            if let Some((program, p_parse)) = &sched.parse {
                let r = score_program(kn.kb, program, *p_parse, p_g, self.cfg.k);
                if let Some(reason) = r.reason {
                    node.notes.push(format!("kb: {reason}"));
                }
                node.kb = r.answers.into_vec();
            }
        }
        if sched.suitability.text {
            node.text = text_answers(text, p_g, kn.corpus, &sched.evidence, kn.extractor);
        }
    }

    /// Solves the whole tree; returns the root answers and the trace.
    pub fn solve_tree(&self, tree: &Hqdt, pool: Option<&[usize]>) -> (AnswerList, Trace) {
        let mut run = Run { reasoner: self, tree, pool, trace: BTreeMap::new() };
        let answers = if self.cfg.flat { run.solve_flat() } else { run.solve(0) };
        let mode = if self.cfg.flat { "flat" } else { "tree" };
        (answers, Trace { mode: mode.into(), nodes: run.trace.into_values().collect() })
    }

    /// Resolves a bridge or operation from the answers of the questions it
    /// references. `inputs` maps each reference to its answer list.
    pub fn solve_ref(
        &self,
        q: &Question,
        p_g: f64,
        inputs: &BTreeMap<u32, AnswerList>,
        pool: Option<&[usize]>,
        node: &mut TraceNode,
    ) -> AnswerList {
        let refs = distinct_refs(q);
        let mut lists: Vec<&[ScoredAnswer]> = Vec::with_capacity(refs.len());
        for r in &refs {
            match inputs.get(r) {
                Some(list) if !list.is_empty() => lists.push(list.answers()),
                _ => {
                    node.notes.push(format!("#{r} has no answers"));
                    return AnswerList::empty();
                }
            }
        }
        if let Some((op, args)) = q.operation() {
            return match apply_operation(op, &args, &lists, p_g, self.knowledge.kb.units()) {
                Ok(out) => {
                    let out = AnswerList::from_answers(out.into_vec(), self.cfg.k);
                    node.answers = out.clone();
                    out
                }
                Err(e) => {
                    node.notes.push(e.to_string());
                    AnswerList::empty()
                }
            };
        }

        let capped: Vec<&[ScoredAnswer]> = lists.iter().map(|l| &l[..l.len().min(self.cfg.combination_cap)]).collect();
        let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
        for l in &capped {
            combos = combos.into_iter().flat_map(|c| (0..l.len()).map(move |j| [c.clone(), vec![j]].concat())).collect();
        }
        let avg_v = |c: &[usize]| mean(&c.iter().enumerate().map(|(h, &j)| capped[h][j].score).collect::<Vec<_>>());
        combos.sort_by(|a, b| avg_v(b).total_cmp(&avg_v(a)).then_with(|| a.cmp(b)));

        let mut merged: Vec<(ScoredAnswer, Source)> = Vec::new();
        for combo in combos {
            let chosen: Vec<&ScoredAnswer> = combo.iter().enumerate().map(|(h, &j)| &capped[h][j]).collect();
            let mapping: BTreeMap<u32, String> = refs.iter().zip(&chosen).map(|(r, a)| (*r, a.surface())).collect();
            let q_nl = match substitute_refs(q, &mapping) {
                Ok(q) => q,
                Err(e) => {
                    node.notes.push(e.to_string());
                    continue;
                }
            };
            let mut inner = TraceNode::new(node.index, &q_nl, p_g);
            let answered = self.answer_directly(&q_nl, p_g, pool, &mut inner);
            let vs: Vec<f64> = chosen.iter().map(|a| a.score).collect();
            let subject = match chosen.as_slice() {
                [only] => match &only.value {
                    AnswerValue::Entity { name } => Some(name.clone()),
                    _ => None,
                },
                _ => None,
            };
            let mut rescored = Vec::with_capacity(answered.len());
            for a in answered.iter() {
                let mut value = a.value.clone();
                if value.subject().is_none() {
                    if let Some(s) = &subject {
                        value = value.with_subject(s.clone());
                    }
                }
                let mut parts = vec![a.score];
                parts.extend(&vs);
                rescored.push(ScoredAnswer::new(value, mean(&parts)));
            }
            merged.extend(rescored.iter().cloned().map(|a| (a, Source::Child)));
            node.combinations.push(CombinationTrace { question: q_nl.render(), input_scores: vs, answers: rescored });
        }
        let out = AnswerList::select(merged, self.cfg.k);
        node.answers = out.clone();
        out
    }
}

impl Run<'_, '_> {
    fn solve(&mut self, i: usize) -> AnswerList {
        let r = self.reasoner;
        let node = self.tree.node(i).expect("valid index");
        let text = node.question.render();
        let sched = r.schedule(&text, !node.is_leaf(), self.pool);
        let mut trace = TraceNode::new(i, &node.question, node.certainty);
        r.collect(&text, node.certainty, &sched, &mut trace);
        if sched.suitability.child {
            let (last, rest) = node.children.split_last().expect("non-leaf");
            let mut solved: BTreeMap<u32, AnswerList> = BTreeMap::new();
            for &c in rest {
                let answers = self.solve(c);
                solved.insert(c as u32, answers);
            }
            trace.child = self.solve_last(*last, &solved).into_vec();
        }
        let answers = aggregate(&trace.kb, &trace.text, &trace.child, r.cfg.k);
        trace.answers = answers.clone();
        self.trace.insert(i, trace);
        answers
    }

    fn solve_last(&mut self, i: usize, siblings: &BTreeMap<u32, AnswerList>) -> AnswerList {
        let node = self.tree.node(i).expect("valid index");
        let mut trace = TraceNode::new(i, &node.question, node.certainty);
        let out = self.reasoner.solve_ref(&node.question, node.certainty, siblings, self.pool, &mut trace);
        self.trace.insert(i, trace);
        out
    }

    /// Leaves in depth-first order, matching atom positions.
    fn leaves(&self, i: usize, out: &mut Vec<usize>) {
        let node = self.tree.node(i).expect("valid index");
        if node.is_leaf() {
            out.push(i);
        }
        for &c in &node.children {
            self.leaves(c, out);
        }
    }

    /// Answers the atoms strictly in order; internal nodes are never asked.
    fn solve_flat(&mut self) -> AnswerList {
        let atoms = match crate::tree::atoms_from_leaves(self.tree, 0) {
            Ok(a) => a,
            Err(_) => return AnswerList::empty(),
        };
        let mut leaves = Vec::new();
        self.leaves(0, &mut leaves);
        let mut results: BTreeMap<u32, AnswerList> = BTreeMap::new();
        let mut last = AnswerList::empty();
        for (pos, (atom, &leaf)) in atoms.atoms().iter().zip(&leaves).enumerate() {
            let certainty = self.tree.node(leaf).expect("leaf").certainty;
            let mut trace = TraceNode::new(leaf, atom, certainty);
            let answers = if atom.is_natural_language() {
                self.reasoner.answer_directly(atom, certainty, self.pool, &mut trace)
            } else {
                self.reasoner.solve_ref(atom, certainty, &results, self.pool, &mut trace)
            };
            results.insert(pos as u32 + 1, answers.clone());
            self.trace.insert(leaf, trace);
            last = answers;
        }
        last
    }
}

/// Count of answers per node that have scores outside (0, 1]; used by
/// score-law checks.
pub fn invalid_scores(trace: &Trace) -> usize {
    let bad = |list: &[ScoredAnswer]| list.iter().filter(|a| !(a.score > 0.0 && a.score <= 1.0)).count();
    trace
        .nodes
        .iter()
        .map(|n| {
            bad(&n.kb)
                + bad(&n.text)
                + bad(&n.child)
                + bad(&n.answers)
                + n.combinations.iter().map(|c| bad(&c.answers)).sum::<usize>()
        })
        .sum()
}

/// Answer-list lookup by node for quick inspection of traces.
pub fn answers_by_node(trace: &Trace) -> HashMap<usize, &AnswerList> {
    trace.nodes.iter().map(|n| (n.index, &n.answers)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{build_hqdt, TemplateDecomposer, TemplateGenerator};
    use crate::kb::{build_precision_table, GoldQuestion, TemplateParser};
    use crate::question::parse_question;
    use crate::text::{CorpusData, FixtureExtractor, LexicalSelector, Paragraph, PatternExtractor};

    fn corpus(paragraphs: &[(&str, &str)]) -> Corpus {
        Corpus::new(CorpusData {
            paragraphs: paragraphs
                .iter()
                .enumerate()
                .map(|(i, (title, text))| Paragraph { id: format!("p{i}"), title: title.to_string(), text: text.to_string() })
                .collect(),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn substitution() {
        let q = parse_question("How high is #1?").unwrap();
        let m: BTreeMap<u32, String> = [(1, "Everest".to_string())].into_iter().collect();
        assert_eq!(substitute_refs(&q, &m).unwrap().render(), "How high is Everest?");
        let q2 = parse_question("Is #1 taller than #2?").unwrap();
        let m2: BTreeMap<u32, String> = [(1, "K2".to_string()), (2, "Lhotse".to_string())].into_iter().collect();
        assert_eq!(substitute_refs(&q2, &m2).unwrap().render(), "Is K2 taller than Lhotse?");
        assert_eq!(substitute_refs(&q2, &m), Err(SubstitutionError::Uncovered(2)));
    }

    #[test]
    fn aggregation_examples() {
        let a = |s: &str, p: f64| ScoredAnswer::new(AnswerValue::entity(s), p);
        let out = aggregate(&[a("A", 0.9)], &[a("A", 0.5), a("B", 0.6)], &[], 5);
        let got: Vec<_> = out.iter().map(|x| (x.surface(), x.score)).collect();
        assert_eq!(got, vec![("A".into(), 0.9), ("B".into(), 0.6)]);
        assert!(aggregate(&[], &[], &[], 5).is_empty());
        let again = aggregate(&out, &[], &[], 5);
        assert_eq!(again, out);
    }

    #[test]
    fn scheduler_flags() {
        let kb = crate::kb::tests::mountain_kb();
        let c = corpus(&[("Everest", "The height of Everest is 8848 m.")]);
        let mut table = BTreeMap::new();
        table.insert("Find-QueryAttr".to_string(), 0.75);
        let table = PrecisionTable(table);
        let parser = TemplateParser::default();
        let kn = Knowledge { kb: &kb, parser: &parser, table: &table, corpus: &c, selector: &LexicalSelector::default(), extractor: &PatternExtractor::default() };
        let r = Reasoner::new(kn, ReasonerConfig::default());
        let s = r.schedule("What is the height of Everest?", false, None);
        assert_eq!(s.suitability, Suitability { kb: true, text: true, child: false });
        let s = r.schedule("What is the height of K2?", true, None);
        assert_eq!(s.suitability, Suitability { kb: true, text: false, child: true });
        let strict = Reasoner::new(kn, ReasonerConfig { gamma: 0.8, ..Default::default() });
        assert!(!strict.schedule("What is the height of K2?", false, None).suitability.kb);
        let forced = Reasoner::new(kn, ReasonerConfig::for_mode(Mode::NoSchedulerMix));
        let s = forced.schedule("What is the height of K2?", false, None);
        assert!(s.suitability.kb && s.suitability.text);
    }

    #[test]
    fn bridge_scores_average_inner_and_input() {
        let kb = crate::kb::KnowledgeBase::new(Default::default()).unwrap();
        let c = corpus(&[("Everest", "The height of Everest is 8848 m.")]);
        let mut ex = FixtureExtractor::default();
        ex.spans.insert("How high is Everest?".into(), vec![("8848 m".into(), 0.9)]);
        let table = PrecisionTable::default();
        let parser = TemplateParser::default();
        let sel = crate::text::FixtureSelector {
            evidence: [("How high is Everest?".to_string(), ["p0".to_string()].into_iter().collect())].into_iter().collect(),
        };
        let kn = Knowledge { kb: &kb, parser: &parser, table: &table, corpus: &c, selector: &sel, extractor: &ex };
        let r = Reasoner::new(kn, ReasonerConfig::default());
        let q = parse_question("How high is #1?").unwrap();
        let inputs: BTreeMap<u32, AnswerList> =
            [(1, AnswerList::from_answers(vec![ScoredAnswer::new(AnswerValue::entity("Everest"), 0.7)], 5))].into_iter().collect();
        let mut node = TraceNode::new(2, &q, 1.0);
        let out = r.solve_ref(&q, 1.0, &inputs, None, &mut node);
        assert_eq!(out.len(), 1);
        assert!((out[0].score - 0.8).abs() < 1e-12);
        assert_eq!(out[0].value.subject(), Some("Everest"));
        let empty: BTreeMap<u32, AnswerList> = BTreeMap::new();
        assert!(r.solve_ref(&q, 1.0, &empty, None, &mut node).is_empty());
    }

    #[test]
    fn mid_level_question_recovers_from_failed_atom() {
        // The painter's death place is only stated about the painting.
        let kb = crate::kb::KnowledgeBase::new(Default::default()).unwrap();
        let c = corpus(&[
            ("Dusk Harbor", "Dusk Harbor is a painting. Dusk Harbor was painted by Ilse Marr. The painter of Dusk Harbor died in Olm."),
            ("Ilse Marr", "Ilse Marr was born in Varo."),
            ("Olm", "Olm is a city located in Tessa. The population of Olm is 5400."),
            ("Varo", "Varo is a city located in Tessa. The population of Varo is 8100."),
        ]);
        let q0 = "What is the population of the city where the painter of Dusk Harbor died?";
        let tree = build_hqdt(q0, &TemplateDecomposer::default(), &TemplateGenerator::default()).unwrap();
        let table = PrecisionTable::default();
        let parser = TemplateParser::default();
        let kn = Knowledge {
            kb: &kb,
            parser: &parser,
            table: &table,
            corpus: &c,
            selector: &LexicalSelector::default(),
            extractor: &PatternExtractor::default(),
        };
        let (answers, trace) = Reasoner::new(kn, ReasonerConfig::default()).solve_tree(&tree, None);
        assert_eq!(answers.top().unwrap().surface(), "5400");
        let mid = trace.nodes.iter().find(|n| n.question == "Where did the painter of Dusk Harbor die?").unwrap();
        assert_eq!(mid.answers.top().unwrap().surface(), "Olm");
        assert_eq!(invalid_scores(&trace), 0);
        let (flat, _) = Reasoner::new(kn, ReasonerConfig::for_mode(Mode::RoatMix)).solve_tree(&tree, None);
        assert!(flat.is_empty());
    }

    #[test]
    fn comparison_through_kb() {
        let kb = crate::kb::tests::mountain_kb();
        let c = corpus(&[]);
        let parser = TemplateParser::default();
        let train = [GoldQuestion { question: "What is the height of K2?".into(), answers: vec!["8611 m".into()] }];
        let table = build_precision_table(&train, &kb, &parser);
        let kn = Knowledge {
            kb: &kb,
            parser: &parser,
            table: &table,
            corpus: &c,
            selector: &LexicalSelector::default(),
            extractor: &PatternExtractor::default(),
        };
        let q0 = "Which has the greater height, Everest or K2?";
        let tree = build_hqdt(q0, &TemplateDecomposer::default(), &TemplateGenerator::default()).unwrap();
        let (answers, trace) = Reasoner::new(kn, ReasonerConfig::for_mode(Mode::Kb)).solve_tree(&tree, None);
        assert_eq!(answers.top().unwrap().surface(), "Everest");
        assert_eq!(answers[0].score, 1.0);
        assert_eq!(trace.nodes.len(), tree.len());
    }
}
