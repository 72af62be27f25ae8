//! Questions as token sequences.
//!
//! A question mixes three vocabularies: plain words, reference tokens
//! (`#k`, pointing at the answer of another question) and bracketed
//! operation tokens (`[SelectBetween]`, `[greater]`). The token content
//! decides which of the three question kinds a question belongs to.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The six symbolic operations usable at the head of a question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpName {
    Verify,
    SelectBetween,
    SelectAmong,
    Count,
    Intersection,
    Union,
}

impl OpName {
    pub const ALL: [OpName; 6] = [
        OpName::Verify,
        OpName::SelectBetween,
        OpName::SelectAmong,
        OpName::Count,
        OpName::Intersection,
        OpName::Union,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpName::Verify => "Verify",
            OpName::SelectBetween => "SelectBetween",
            OpName::SelectAmong => "SelectAmong",
            OpName::Count => "Count",
            OpName::Intersection => "Intersection",
            OpName::Union => "Union",
        }
    }

    pub fn from_name(name: &str) -> Option<OpName> {
        OpName::ALL.iter().copied().find(|op| op.as_str() == name)
    }
}

impl fmt::Display for OpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word(String),
    /// `#k`, always `k >= 1`.
    Ref(u32),
    OpName(OpName),
    OpArg(String),
}

/// A token plus whether it was written directly against the previous one
/// (`#4?`, `[SelectBetween][greater]`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub kind: TokenKind,
    pub glued: bool,
}

impl Token {
    pub fn word(text: impl Into<String>) -> Self {
        Token { kind: TokenKind::Word(text.into()), glued: false }
    }

    pub fn reference(target: u32) -> Self {
        Token { kind: TokenKind::Ref(target), glued: false }
    }

    pub fn op(op: OpName) -> Self {
        Token { kind: TokenKind::OpName(op), glued: false }
    }

    pub fn arg(value: impl Into<String>) -> Self {
        Token { kind: TokenKind::OpArg(value.into()), glued: false }
    }

    pub fn glued(mut self) -> Self {
        self.glued = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    NaturalLanguage,
    Bridge,
    SymbolicOperation,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuestionError {
    #[error("parse error at byte {position}: {reason}")]
    Parse { position: usize, reason: String },
    #[error("empty question")]
    Empty,
    #[error("tokens do not form a natural-language, bridge or symbolic-operation question: {0}")]
    Unclassifiable(String),
    #[error("reference #{0} not found")]
    RefNotFound(u32),
    #[error("reference #{0} has no substitution")]
    Uncovered(u32),
}

/// A classified token sequence. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Question {
    tokens: Vec<Token>,
    kind: QuestionKind,
}

impl Question {
    pub fn from_tokens(tokens: Vec<Token>) -> Result<Self, QuestionError> {
        let kind = classify(&tokens)?;
        Ok(Question { tokens, kind })
    }

    pub fn parse(text: &str) -> Result<Self, QuestionError> {
        parse_question(text)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn kind(&self) -> QuestionKind {
        self.kind
    }

    pub fn is_natural_language(&self) -> bool {
        self.kind == QuestionKind::NaturalLanguage
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, token) in self.tokens.iter().enumerate() {
            if i > 0 && !token.glued {
                out.push(' ');
            }
            match &token.kind {
                TokenKind::Word(w) => out.push_str(w),
                TokenKind::Ref(k) => {
                    out.push('#');
                    out.push_str(&k.to_string());
                }
                TokenKind::OpName(op) => {
                    out.push('[');
                    out.push_str(op.as_str());
                    out.push(']');
                }
                TokenKind::OpArg(a) => {
                    out.push('[');
                    out.push_str(a);
                    out.push(']');
                }
            }
        }
        out
    }

    /// Operation name and arguments of a symbolic-operation question.
    pub fn operation(&self) -> Option<(OpName, Vec<String>)> {
        let TokenKind::OpName(op) = self.tokens.first()?.kind else {
            return None;
        };
        let args = self
            .tokens
            .iter()
            .filter_map(|t| match &t.kind {
                TokenKind::OpArg(a) => Some(a.clone()),
                _ => None,
            })
            .collect();
        Some((op, args))
    }

    /// Rewrites every reference through `map` at once, so a rewrite never
    /// feeds into another one. References the map leaves out stay as they are.
    pub fn remap_refs(&self, map: impl Fn(u32) -> Option<u32>) -> Question {
        let tokens = self
            .tokens
            .iter()
            .map(|t| match t.kind {
                TokenKind::Ref(k) => Token { kind: TokenKind::Ref(map(k).unwrap_or(k)), glued: t.glued },
                _ => t.clone(),
            })
            .collect();
        Question { tokens, kind: self.kind }
    }

    /// Replaces each reference with the words of its surface form. The
    /// result must be a natural-language question.
    pub fn fill_refs(&self, surfaces: &BTreeMap<u32, String>) -> Result<Question, QuestionError> {
        let mut tokens = Vec::with_capacity(self.tokens.len());
        for token in &self.tokens {
            match token.kind {
                TokenKind::Ref(k) => {
                    let surface = surfaces.get(&k).ok_or(QuestionError::Uncovered(k))?;
                    let cleaned: String =
                        surface.chars().filter(|c| !matches!(c, '#' | '[' | ']')).collect();
                    let mut first = true;
                    for w in cleaned.split_whitespace() {
                        tokens.push(Token { kind: TokenKind::Word(w.to_string()), glued: first && token.glued });
                        first = false;
                    }
                    if first {
                        return Err(QuestionError::Uncovered(k));
                    }
                }
                _ => tokens.push(token.clone()),
            }
        }
        Question::from_tokens(tokens)
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for Question {
    type Err = QuestionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_question(s)
    }
}

impl Serialize for Question {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for Question {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_question(&text).map_err(serde::de::Error::custom)
    }
}

fn classify(tokens: &[Token]) -> Result<QuestionKind, QuestionError> {
    if tokens.is_empty() {
        return Err(QuestionError::Empty);
    }
    let words = tokens.iter().filter(|t| matches!(t.kind, TokenKind::Word(_))).count();
    let refs = tokens.iter().filter(|t| matches!(t.kind, TokenKind::Ref(_))).count();
    let ops = tokens.iter().filter(|t| matches!(t.kind, TokenKind::OpName(_))).count();
    let args = tokens.iter().filter(|t| matches!(t.kind, TokenKind::OpArg(_))).count();

    if refs == 0 && ops == 0 && args == 0 {
        return Ok(QuestionKind::NaturalLanguage);
    }
    if ops == 0 && args == 0 && refs >= 1 && words >= 1 {
        return Ok(QuestionKind::Bridge);
    }
    if ops == 1 && matches!(tokens[0].kind, TokenKind::OpName(_)) && words == 0 && refs >= 1 {
        // [Op] [arg]* #r+
        let rest = &tokens[1..];
        let n_args = rest.iter().take_while(|t| matches!(t.kind, TokenKind::OpArg(_))).count();
        if rest[n_args..].iter().all(|t| matches!(t.kind, TokenKind::Ref(_))) {
            return Ok(QuestionKind::SymbolicOperation);
        }
    }
    let rendered = Question { tokens: tokens.to_vec(), kind: QuestionKind::NaturalLanguage }.render();
    Err(QuestionError::Unclassifiable(rendered))
}

fn is_reserved(c: char) -> bool {
    matches!(c, '#' | '[' | ']')
}

/// Tokenizes and classifies `text`. Runs of whitespace collapse to a single
/// separator, so `parse_question(t).render()` is `t` with normalized spacing.
pub fn parse_question(text: &str) -> Result<Question, QuestionError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut spaced = true;

    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            spaced = true;
            chars.next();
            continue;
        }
        let glued = !spaced && !tokens.is_empty();
        spaced = false;
        let kind = match c {
            '[' => {
                chars.next();
                let mut content = String::new();
                let mut closed = false;
                for (p, c) in chars.by_ref() {
                    match c {
                        ']' => {
                            closed = true;
                            break;
                        }
                        '[' => {
                            return Err(QuestionError::Parse { position: p, reason: "nested '['".into() })
                        }
                        _ => content.push(c),
                    }
                }
                if !closed {
                    return Err(QuestionError::Parse { position: pos, reason: "unclosed '['".into() });
                }
                let content = content.split_whitespace().collect::<Vec<_>>().join(" ");
                if content.is_empty() {
                    return Err(QuestionError::Parse { position: pos, reason: "empty brackets".into() });
                }
                match OpName::from_name(&content) {
                    Some(op) => TokenKind::OpName(op),
                    None => TokenKind::OpArg(content),
                }
            }
            ']' => return Err(QuestionError::Parse { position: pos, reason: "unbalanced ']'".into() }),
            '#' => {
                chars.next();
                let mut digits = String::new();
                while let Some(&(_, d)) = chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let target: u32 = digits.parse().map_err(|_| QuestionError::Parse {
                    position: pos,
                    reason: "'#' must be followed by an integer".into(),
                })?;
                if target == 0 {
                    return Err(QuestionError::Parse { position: pos, reason: "reference targets start at 1".into() });
                }
                TokenKind::Ref(target)
            }
            _ => {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || is_reserved(c) {
                        break;
                    }
                    word.push(c);
                    chars.next();
                }
                TokenKind::Word(word)
            }
        };
        tokens.push(Token { kind, glued });
    }
    Question::from_tokens(tokens)
}

/// Targets of all reference tokens, left to right, duplicates kept.
pub fn get_ref_tokens(q: &Question) -> Vec<u32> {
    q.tokens
        .iter()
        .filter_map(|t| match t.kind {
            TokenKind::Ref(k) => Some(k),
            _ => None,
        })
        .collect()
}

/// Distinct reference targets in order of first appearance.
pub fn distinct_refs(q: &Question) -> Vec<u32> {
    let mut seen = Vec::new();
    for k in get_ref_tokens(q) {
        if !seen.contains(&k) {
            seen.push(k);
        }
    }
    seen
}

pub fn modify_ref_token(q: &Question, old: u32, new: u32) -> Result<Question, QuestionError> {
    if !get_ref_tokens(q).contains(&old) {
        return Err(QuestionError::RefNotFound(old));
    }
    Ok(q.remap_refs(|k| (k == old).then_some(new)))
}
