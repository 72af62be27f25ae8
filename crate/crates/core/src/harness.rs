//! End-to-end evaluation: decompose, solve and score a question set.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{Dataset, DatasetQuestion, Split};
use crate::decompose::{build_hqdt, FixtureDecomposer, TemplateDecomposer, TemplateGenerator};
use crate::atoms::AtomicRepresentation;
use crate::kb::{ablate_kb, build_precision_table, KnowledgeBase, PrecisionTable, TemplateParser};
use crate::metrics::{exact_match, token_f1};
use crate::reasoner::{Knowledge, Mode, Reasoner, ReasonerConfig, Trace};
use crate::text::{Corpus, LexicalSelector, PatternExtractor};
use crate::tree::Hqdt;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub gamma: f64,
    pub k: usize,
    /// Fraction of KB facts removed before the run.
    pub ablate_kb: f64,
    pub seed: u64,
    pub split: Split,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { mode: Mode::Mix, gamma: 0.7, k: 5, ablate_kb: 0.0, seed: 42, split: Split::Dev }
    }
}

impl RunConfig {
    pub fn reasoner_config(&self) -> ReasonerConfig {
        ReasonerConfig { gamma: self.gamma, k: self.k, ..ReasonerConfig::for_mode(self.mode) }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.reasoner_config().validate().map_err(HarnessError::Config)?;
        if !(0.0..=1.0).contains(&self.ablate_kb) {
            return Err(HarnessError::Config(format!("ablation fraction {} outside [0, 1]", self.ablate_kb)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("serializing: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub id: String,
    pub question: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    pub gold: Vec<String>,
    pub prediction: Option<String>,
    pub score: Option<f64>,
    pub em: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Scores {
    pub questions: usize,
    pub em: f64,
    pub f1: f64,
}

impl Scores {
    fn of<'a>(rows: impl Iterator<Item = &'a Row>) -> Self {
        let (mut n, mut em, mut f1) = (0usize, 0.0, 0.0);
        for r in rows {
            n += 1;
            em += r.em;
            f1 += r.f1;
        }
        if n == 0 {
            return Scores::default();
        }
        Scores { questions: n, em: em / n as f64, f1: f1 / n as f64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub overall: Scores,
    pub families: BTreeMap<String, Scores>,
    /// Skeletons in the precision table, and how many fall below gamma.
    pub skeletons: usize,
    pub skeletons_below_gamma: usize,
    pub kb_facts: usize,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Per-family EM differences `self - other`, over families in both.
    pub fn em_deltas(&self, other: &Report) -> BTreeMap<String, f64> {
        self.families
            .iter()
            .filter_map(|(f, s)| other.families.get(f).map(|o| (f.clone(), s.em - o.em)))
            .collect()
    }
}

pub struct RunOutput {
    pub report: Report,
    /// (question id, trace) for every solved question.
    pub traces: Vec<(String, Trace)>,
}

impl RunOutput {
    pub fn write_traces(&self, dir: &Path) -> Result<(), HarnessError> {
        let io = |path: &Path, source| HarnessError::Io { path: path.display().to_string(), source };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for (id, trace) in &self.traces {
            let path = dir.join(format!("{id}.json"));
            std::fs::write(&path, serde_json::to_string_pretty(trace)? + "\n").map_err(|e| io(&path, e))?;
        }
        Ok(())
    }
}

/// Precision table of the template parser over the training split
/// (questions plus annotated sub-questions).
pub fn precision_table(train: &Dataset, kb: &KnowledgeBase) -> PrecisionTable {
    build_precision_table(&train.training_examples(), kb, &TemplateParser::default())
}

/// Decomposes with the grammar templates, falling back to annotated atoms.
pub fn decompose_question(q: &DatasetQuestion) -> Result<Hqdt, String> {
    let generator = TemplateGenerator::default();
    match build_hqdt(&q.question, &TemplateDecomposer::default(), &generator) {
        Ok(tree) => Ok(tree),
        Err(template_err) => {
            let Some(atoms) = &q.atoms else { return Err(template_err.to_string()) };
            let ar = AtomicRepresentation::parse_list(atoms).map_err(|e| e.to_string())?;
            let mut d = FixtureDecomposer::default();
            d.insert(&q.question, ar, 1.0);
            build_hqdt(&q.question, &d, &generator).map_err(|e| e.to_string())
        }
    }
}

fn pool(q: &DatasetQuestion, corpus: &Corpus) -> Option<Vec<usize>> {
    if let Some(ids) = &q.paragraphs {
        return Some(ids.iter().filter_map(|id| corpus.position(id)).collect());
    }
    corpus.question_set(&q.id)
}

/// Runs `cfg.split` of `eval`; the precision table comes from the train
/// split of `train`, scored on the (possibly ablated) KB.
pub fn run(
    kb: &KnowledgeBase,
    corpus: &Corpus,
    train: &Dataset,
    eval: &Dataset,
    cfg: &RunConfig,
) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let kb = if cfg.ablate_kb > 0.0 { ablate_kb(kb, cfg.ablate_kb, cfg.seed) } else { kb.clone() };
    let table = precision_table(train, &kb);
    let parser = TemplateParser::default();
    let selector = LexicalSelector::default();
    let extractor = PatternExtractor::default();
    let knowledge = Knowledge {
        kb: &kb,
        parser: &parser,
        table: &table,
        corpus,
        selector: &selector,
        extractor: &extractor,
    };
    let reasoner = Reasoner::new(knowledge, cfg.reasoner_config());
    let questions: Vec<&DatasetQuestion> = eval.split(cfg.split).collect();

    let solved: Vec<(Row, Option<Trace>)> = questions
        .par_iter()
        .map(|q| {
            let mut row = Row {
                id: q.id.clone(),
                question: q.question.clone(),
                family: q.family.clone(),
                gold: q.answers.clone(),
                prediction: None,
                score: None,
                em: 0.0,
                f1: 0.0,
                error: None,
            };
            let tree = match decompose_question(q) {
                Ok(t) => t,
                Err(e) => {
                    row.error = Some(e);
                    return (row, None);
                }
            };
            let (answers, trace) = reasoner.solve_tree(&tree, pool(q, corpus).as_deref());
            if let Some(top) = answers.top() {
                let surface = top.surface();
                row.em = exact_match(&surface, &q.answers);
                row.f1 = token_f1(&surface, &q.answers);
                row.prediction = Some(surface);
                row.score = Some(top.score);
            }
            (row, Some(trace))
        })
        .collect();

    let mut rows = Vec::with_capacity(solved.len());
    let mut traces = Vec::new();
    for (row, trace) in solved {
        if let Some(t) = trace {
            traces.push((row.id.clone(), t));
        }
        rows.push(row);
    }
    let mut by_family: BTreeMap<String, Vec<&Row>> = BTreeMap::new();
    for r in &rows {
        by_family.entry(r.family.clone().unwrap_or_else(|| "all".into())).or_default().push(r);
    }
    let families = by_family.into_iter().map(|(f, rs)| (f, Scores::of(rs.into_iter()))).collect();
    let report = Report {
        config: *cfg,
        overall: Scores::of(rows.iter()),
        families,
        skeletons: table.len(),
        skeletons_below_gamma: table.0.values().filter(|&&p| p < cfg.gamma).count(),
        kb_facts: kb.fact_count(),
        rows,
    };
    Ok(RunOutput { report, traces })
}
