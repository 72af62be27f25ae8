//! Paragraph corpus, BM25 recall, evidence selection and answer extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::{AnswerValue, ScoredAnswer};
use crate::grammar::{attribute_sentence_pattern, parse_frame, relation_sentence_pattern, sentences, Frame, Np};
use crate::metrics::tokenize;

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: String,
    pub title: String,
    pub text: String,
}

/// On-disk corpus: paragraphs plus optional per-question paragraph sets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusData {
    pub paragraphs: Vec<Paragraph>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub question_sets: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing corpus: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate paragraph id {0:?}")]
    DuplicateId(String),
    #[error("question set {question:?} lists unknown paragraph {id:?}")]
    UnknownParagraph { question: String, id: String },
}

/// Paragraph store with an inverted index over title and body tokens.
#[derive(Clone, Debug)]
pub struct Corpus {
    data: CorpusData,
    by_id: HashMap<String, usize>,
    postings: HashMap<String, Vec<(usize, u32)>>,
    doc_len: Vec<usize>,
    avgdl: f64,
}

pub fn paragraph_tokens(p: &Paragraph) -> Vec<String> {
    let mut t = tokenize(&p.title);
    t.extend(tokenize(&p.text));
    t
}

impl Corpus {
    pub fn new(data: CorpusData) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::new();
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(data.paragraphs.len());
        for (i, p) in data.paragraphs.iter().enumerate() {
            if by_id.insert(p.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
            let tokens = paragraph_tokens(p);
            doc_len.push(tokens.len());
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t).or_default().push((i, n));
            }
        }
        for (q, ids) in &data.question_sets {
            if let Some(id) = ids.iter().find(|id| !by_id.contains_key(*id)) {
                return Err(CorpusError::UnknownParagraph { question: q.clone(), id: id.clone() });
            }
        }
        let avgdl = if doc_len.is_empty() { 0.0 } else { doc_len.iter().sum::<usize>() as f64 / doc_len.len() as f64 };
        Ok(Corpus { data, by_id, postings, doc_len, avgdl })
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn data(&self) -> &CorpusData {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.paragraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.paragraphs.is_empty()
    }

    pub fn paragraph(&self, i: usize) -> &Paragraph {
        &self.data.paragraphs[i]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Paragraph positions annotated for a question id, if any.
    pub fn question_set(&self, question_id: &str) -> Option<Vec<usize>> {
        self.data.question_sets.get(question_id).map(|ids| ids.iter().map(|id| self.by_id[id]).collect())
    }

    /// BM25 score of every paragraph with at least one query term, keyed by
    /// position. Each distinct query term counts once.
    pub fn bm25_scores(&self, query: &str) -> BTreeMap<usize, f64> {
        let n = self.len() as f64;
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
        for t in terms {
            let Some(list) = self.postings.get(&t) else { continue };
            let df = list.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for &(doc, tf) in list {
                let tf = tf as f64;
                let norm = K1 * (1.0 - B + B * self.doc_len[doc] as f64 / self.avgdl);
                *scores.entry(doc).or_default() += idf * tf * (K1 + 1.0) / (tf + norm);
            }
        }
        scores
    }
}

/// Top-`n` paragraphs by BM25, ties broken by paragraph id. Paragraphs
/// sharing no term with the query are never returned.
pub fn bm25_recall(query: &str, c: &Corpus, n: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = c.bm25_scores(query).into_iter().filter(|(_, s)| *s > 0.0).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| c.paragraph(a.0).id.cmp(&c.paragraph(b.0).id)));
    ranked.truncate(n);
    ranked
}

/// Decides whether a paragraph is evidence for a question.
pub trait EvidenceSelector: Send + Sync {
    /// Returns (is evidence, confidence).
    fn judge(&self, question: &str, paragraph: &Paragraph) -> (bool, f64);
}

pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "what", "which", "who", "whom", "where", "when", "how", "many", "much", "is", "are", "was",
    "were", "be", "of", "in", "on", "at", "by", "to", "for", "from", "with", "that", "this", "there", "and", "or",
    "both", "either", "do", "does", "did", "has", "have", "had", "it", "its", "as",
];

/// Content words of a question: tokens minus stopwords, first occurrence order.
pub fn content_words(question: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    tokenize(question)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()) && seen.insert(t.clone()))
        .collect()
}

/// Words match when one is a prefix of the other and the shorter has at
/// least three characters ("die" / "died", "flow" / "flows").
fn words_match(a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    short.chars().count() >= 3 && long.starts_with(short)
}

/// Evidence iff the paragraph contains at least `threshold` of the
/// question's content words.
#[derive(Clone, Copy, Debug)]
pub struct LexicalSelector {
    pub threshold: f64,
}

impl Default for LexicalSelector {
    fn default() -> Self {
        LexicalSelector { threshold: 0.6 }
    }
}

impl EvidenceSelector for LexicalSelector {
    fn judge(&self, question: &str, paragraph: &Paragraph) -> (bool, f64) {
        let words = content_words(question);
        if words.is_empty() {
            return (false, 0.0);
        }
        let tokens: BTreeSet<String> = paragraph_tokens(paragraph).into_iter().collect();
        let hits = words.iter().filter(|w| tokens.iter().any(|t| words_match(w, t))).count();
        let frac = hits as f64 / words.len() as f64;
        (frac >= self.threshold, frac)
    }
}

/// Selector backed by annotated evidence paragraph ids per question.
#[derive(Clone, Debug, Default)]
pub struct FixtureSelector {
    pub evidence: HashMap<String, BTreeSet<String>>,
}

impl EvidenceSelector for FixtureSelector {
    fn judge(&self, question: &str, paragraph: &Paragraph) -> (bool, f64) {
        let hit = self.evidence.get(question.trim()).is_some_and(|ids| ids.contains(&paragraph.id));
        (hit, if hit { 1.0 } else { 0.0 })
    }
}

/// Paragraph positions among `candidates` that the selector accepts, in
/// candidate order.
pub fn select_evidence(q: &str, c: &Corpus, candidates: &[usize], selector: &dyn EvidenceSelector) -> Vec<usize> {
    candidates.iter().copied().filter(|&i| selector.judge(q, c.paragraph(i)).0).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub value: AnswerValue,
    pub p_ex: f64,
}

/// Reads answers out of evidence paragraphs.
pub trait SpanExtractor: Send + Sync {
    fn extract(&self, question: &str, evidence: &[&Paragraph]) -> Vec<Extraction>;
}

/// Extractor for the synthetic grammar: matches the sentence shapes used
/// to verbalize facts. Answers found in a paragraph about the question's
/// anchor (or about the answer itself) get `on_topic`, others `off_topic`.
#[derive(Clone, Copy, Debug)]
pub struct PatternExtractor {
    pub on_topic: f64,
    pub off_topic: f64,
}

impl Default for PatternExtractor {
    fn default() -> Self {
        PatternExtractor { on_topic: 0.9, off_topic: 0.72 }
    }
}

impl SpanExtractor for PatternExtractor {
    fn extract(&self, question: &str, evidence: &[&Paragraph]) -> Vec<Extraction> {
        let Ok(frame) = parse_frame(question) else { return Vec::new() };
        let (pattern, anchor, subject) = match &frame {
            Frame::AskEntity(Np::Of { rel, subject }) if !subject.has_refs() => {
                let s = subject.render();
                (relation_sentence_pattern(*rel, Some(&s), None, None), s, None)
            }
            Frame::AskEntity(Np::Having { rel, concept, object }) if !object.has_refs() => {
                let o = object.render();
                (relation_sentence_pattern(*rel, None, Some(&o), Some(*concept)), o, None)
            }
            Frame::AskAttr(attr, np) if !np.has_refs() => {
                let s = np.render();
                let subject = matches!(np, Np::Named(_)).then(|| s.clone());
                (attribute_sentence_pattern(*attr, &s), s, subject)
            }
            _ => return Vec::new(),
        };
        let mut out = Vec::new();
        for p in evidence {
            for sentence in sentences(&p.text) {
                let Some(caps) = pattern.captures(sentence) else { continue };
                let span = caps[1].trim();
                let on_topic = p.title.eq_ignore_ascii_case(&anchor) || p.title == span;
                let mut value = AnswerValue::parse_surface(span);
                if let Some(s) = &subject {
                    value = value.with_subject(s.clone());
                }
                out.push(Extraction { value, p_ex: if on_topic { self.on_topic } else { self.off_topic } });
            }
        }
        out
    }
}

/// Extractor backed by stored (question → spans) annotations.
#[derive(Clone, Debug, Default)]
pub struct FixtureExtractor {
    pub spans: HashMap<String, Vec<(String, f64)>>,
}

impl SpanExtractor for FixtureExtractor {
    fn extract(&self, question: &str, _evidence: &[&Paragraph]) -> Vec<Extraction> {
        self.spans
            .get(question.trim())
            .map(|spans| {
                spans.iter().map(|(s, p)| Extraction { value: AnswerValue::parse_surface(s), p_ex: *p }).collect()
            })
            .unwrap_or_default()
    }
}

/// Extracted answers scored `p_g * p_ex`; duplicates are left for the
/// aggregator.
pub fn text_answers(
    q: &str,
    p_g: f64,
    c: &Corpus,
    evidence: &[usize],
    extractor: &dyn SpanExtractor,
) -> Vec<ScoredAnswer> {
    if evidence.is_empty() {
        return Vec::new();
    }
    let paragraphs: Vec<&Paragraph> = evidence.iter().map(|&i| c.paragraph(i)).collect();
    extractor.extract(q, &paragraphs).into_iter().map(|e| ScoredAnswer::new(e.value, p_g * e.p_ex)).collect()
}
