//! A small controlled grammar for questions about a geographic/biographic
//! world: mountains, rivers, cities, countries, people and paintings.
//!
//! Every question of the grammar has a structured [`Frame`]. Frames render
//! to text and parse back, which lets the template decomposer, generator,
//! semantic parser and pattern reader share one definition of the language.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::question::OpName;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("not in the question grammar: {0}")]
pub struct GrammarError(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    LocatedIn,
    FlowsThrough,
    BornIn,
    DiedIn,
    PaintedBy,
}

impl Relation {
    pub const ALL: [Relation; 5] =
        [Relation::LocatedIn, Relation::FlowsThrough, Relation::BornIn, Relation::DiedIn, Relation::PaintedBy];

    /// Predicate name used in knowledge-base facts.
    pub fn predicate(self) -> &'static str {
        match self {
            Relation::LocatedIn => "located_in",
            Relation::FlowsThrough => "flows_through",
            Relation::BornIn => "born_in",
            Relation::DiedIn => "died_in",
            Relation::PaintedBy => "painted_by",
        }
    }

    pub fn from_predicate(p: &str) -> Option<Relation> {
        Relation::ALL.iter().copied().find(|r| r.predicate() == p)
    }

    /// Concept of the object side.
    pub fn object_concept(self) -> Concept {
        match self {
            Relation::LocatedIn | Relation::FlowsThrough => Concept::Country,
            Relation::BornIn | Relation::DiedIn => Concept::City,
            Relation::PaintedBy => Concept::Person,
        }
    }

    /// Concepts allowed on the subject side.
    pub fn subject_concepts(self) -> &'static [Concept] {
        match self {
            Relation::LocatedIn => &[Concept::Mountain, Concept::City],
            Relation::FlowsThrough => &[Concept::River],
            Relation::BornIn | Relation::DiedIn => &[Concept::Person],
            Relation::PaintedBy => &[Concept::Painting],
        }
    }

    /// Whether a subject has at most one object.
    pub fn is_functional(self) -> bool {
        self != Relation::FlowsThrough
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Concept {
    Feature,
    Place,
    Mountain,
    River,
    City,
    Country,
    Person,
    Painting,
}

impl Concept {
    pub const ALL: [Concept; 8] = [
        Concept::Feature,
        Concept::Place,
        Concept::Mountain,
        Concept::River,
        Concept::City,
        Concept::Country,
        Concept::Person,
        Concept::Painting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Concept::Feature => "feature",
            Concept::Place => "place",
            Concept::Mountain => "mountain",
            Concept::River => "river",
            Concept::City => "city",
            Concept::Country => "country",
            Concept::Person => "person",
            Concept::Painting => "painting",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            Concept::Feature => "features",
            Concept::Place => "places",
            Concept::Mountain => "mountains",
            Concept::River => "rivers",
            Concept::City => "cities",
            Concept::Country => "countries",
            Concept::Person => "people",
            Concept::Painting => "paintings",
        }
    }

    pub fn parent(self) -> Option<Concept> {
        match self {
            Concept::Mountain | Concept::River => Some(Concept::Feature),
            Concept::City | Concept::Country => Some(Concept::Place),
            _ => None,
        }
    }

    pub fn from_name(name: &str) -> Option<Concept> {
        Concept::ALL.iter().copied().find(|c| c.name() == name)
    }

    pub fn from_plural(name: &str) -> Option<Concept> {
        Concept::ALL.iter().copied().find(|c| c.plural() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attr {
    Height,
    Length,
    Population,
    Inception,
}

impl Attr {
    pub const ALL: [Attr; 4] = [Attr::Height, Attr::Length, Attr::Population, Attr::Inception];

    pub fn name(self) -> &'static str {
        match self {
            Attr::Height => "height",
            Attr::Length => "length",
            Attr::Population => "population",
            Attr::Inception => "inception",
        }
    }

    pub fn unit(self) -> Option<&'static str> {
        match self {
            Attr::Height => Some("m"),
            Attr::Length => Some("km"),
            Attr::Population | Attr::Inception => None,
        }
    }

    pub fn from_name(name: &str) -> Option<Attr> {
        Attr::ALL.iter().copied().find(|a| a.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Greater,
    Less,
    Equal,
    NotEqual,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Greater => ">",
            Cmp::Less => "<",
            Cmp::Equal => "=",
            Cmp::NotEqual => "!=",
        }
    }

    pub fn words(self) -> &'static str {
        match self {
            Cmp::Greater => "greater than",
            Cmp::Less => "less than",
            Cmp::Equal => "equal to",
            Cmp::NotEqual => "not equal to",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Cmp> {
        [Cmp::Greater, Cmp::Less, Cmp::Equal, Cmp::NotEqual].into_iter().find(|c| c.symbol() == s)
    }

    pub fn from_words(s: &str) -> Option<Cmp> {
        [Cmp::Greater, Cmp::Less, Cmp::Equal, Cmp::NotEqual].into_iter().find(|c| c.words() == s)
    }
}

/// Noun phrases denoting an entity or a set of entities.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Np {
    Named(String),
    Ref(u32),
    /// The object(s) of `rel` for `subject`: "the city where X was born".
    Of { rel: Relation, subject: Box<Np> },
    /// The subjects of `rel` pointing at `object`: "the people born in X".
    Having { rel: Relation, concept: Concept, object: Box<Np> },
    /// The member of a `Having` set with the extreme attribute value.
    Extreme { rel: Relation, concept: Concept, object: Box<Np>, attr: Attr, largest: bool },
    /// All members of a concept whose attribute satisfies a comparison.
    Filtered { concept: Concept, attr: Attr, cmp: Cmp, value: String },
}

impl Np {
    pub fn named(name: impl Into<String>) -> Self {
        Np::Named(name.into())
    }

    pub fn of(rel: Relation, subject: Np) -> Self {
        Np::Of { rel, subject: Box::new(subject) }
    }

    pub fn having(rel: Relation, concept: Concept, object: Np) -> Self {
        Np::Having { rel, concept, object: Box::new(object) }
    }

    pub fn extreme(rel: Relation, concept: Concept, object: Np, attr: Attr, largest: bool) -> Self {
        Np::Extreme { rel, concept, object: Box::new(object), attr, largest }
    }

    pub fn is_simple(&self) -> bool {
        matches!(self, Np::Named(_) | Np::Ref(_))
    }

    pub fn has_refs(&self) -> bool {
        match self {
            Np::Ref(_) => true,
            Np::Named(_) | Np::Filtered { .. } => false,
            Np::Of { subject, .. } => subject.has_refs(),
            Np::Having { object, .. } | Np::Extreme { object, .. } => object.has_refs(),
        }
    }

    /// Whether the phrase can denote more than one entity.
    pub fn is_set(&self) -> bool {
        match self {
            Np::Having { .. } | Np::Filtered { .. } => true,
            Np::Of { rel, subject } => !rel.is_functional() || subject.is_set(),
            _ => false,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Np::Named(n) => n.clone(),
            Np::Ref(k) => format!("#{k}"),
            Np::Of { rel, subject } => forward_phrase(*rel, &subject.render()),
            Np::Having { rel, concept, object } => format!("the {}", having_plural(*rel, *concept, &object.render())),
            Np::Extreme { rel, concept, object, attr, largest } => format!(
                "the {} with the {} {}",
                having_singular(*rel, *concept, &object.render()),
                if *largest { "largest" } else { "smallest" },
                attr.name()
            ),
            Np::Filtered { concept, attr, cmp, value } => {
                format!("the {} with {} {} {}", concept.plural(), attr.name(), cmp.words(), value)
            }
        }
    }
}

fn forward_phrase(rel: Relation, s: &str) -> String {
    match rel {
        Relation::LocatedIn => format!("the country where {s} is located"),
        Relation::FlowsThrough => format!("the countries that {s} flows through"),
        Relation::BornIn => format!("the city where {s} was born"),
        Relation::DiedIn => format!("the city where {s} died"),
        Relation::PaintedBy => format!("the painter of {s}"),
    }
}

fn having_plural(rel: Relation, concept: Concept, o: &str) -> String {
    match rel {
        Relation::LocatedIn => format!("{} located in {o}", concept.plural()),
        Relation::FlowsThrough => format!("rivers that flow through {o}"),
        Relation::BornIn => format!("people born in {o}"),
        Relation::DiedIn => format!("people who died in {o}"),
        Relation::PaintedBy => format!("paintings painted by {o}"),
    }
}

fn having_singular(rel: Relation, concept: Concept, o: &str) -> String {
    match rel {
        Relation::LocatedIn => format!("{} located in {o}", concept.name()),
        Relation::FlowsThrough => format!("river that flows through {o}"),
        Relation::BornIn => format!("person born in {o}"),
        Relation::DiedIn => format!("person who died in {o}"),
        Relation::PaintedBy => format!("painting painted by {o}"),
    }
}

/// A natural-language (or bridge) question of the grammar.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    AskEntity(Np),
    AskAttr(Attr, Np),
    Count(Np),
    Verify { attr: Attr, np: Np, cmp: Cmp, value: String },
    Compare { attr: Attr, left: Np, right: Np, greater: bool },
    SetOp { union: bool, left: Np, right: Np },
}

impl Frame {
    pub fn render(&self) -> String {
        match self {
            Frame::AskEntity(np) => match np {
                Np::Of { rel, subject } => {
                    let s = subject.render();
                    match rel {
                        Relation::LocatedIn => format!("Which country is {s} located in?"),
                        Relation::FlowsThrough => format!("Which countries does {s} flow through?"),
                        Relation::BornIn => format!("Where was {s} born?"),
                        Relation::DiedIn => format!("Where did {s} die?"),
                        Relation::PaintedBy => format!("Who painted {s}?"),
                    }
                }
                Np::Extreme { rel, concept, object, attr, largest } => format!(
                    "Which {} has the {} {}?",
                    having_singular(*rel, *concept, &object.render()),
                    if *largest { "largest" } else { "smallest" },
                    attr.name()
                ),
                other => format!("What are {}?", other.render()),
            },
            Frame::AskAttr(attr, np) => format!("What is the {} of {}?", attr.name(), np.render()),
            Frame::Count(np) => {
                let r = np.render();
                format!("How many {} are there?", r.strip_prefix("the ").unwrap_or(&r))
            }
            Frame::Verify { attr, np, cmp, value } => {
                format!("Is the {} of {} {} {}?", attr.name(), np.render(), cmp.words(), value)
            }
            Frame::Compare { attr, left, right, greater } => format!(
                "Which has the {} {}, {} or {}?",
                if *greater { "greater" } else { "smaller" },
                attr.name(),
                left.render(),
                right.render()
            ),
            Frame::SetOp { union, left, right } => {
                if *union {
                    format!("Which are either {} or {}?", left.render(), right.render())
                } else {
                    format!("Which are both {} and {}?", left.render(), right.render())
                }
            }
        }
    }

    pub fn has_refs(&self) -> bool {
        match self {
            Frame::AskEntity(np) | Frame::AskAttr(_, np) | Frame::Count(np) | Frame::Verify { np, .. } => np.has_refs(),
            Frame::Compare { left, right, .. } | Frame::SetOp { left, right, .. } => {
                left.has_refs() || right.has_refs()
            }
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// An atomic question: either a frame (possibly with `#k` references) or a
/// symbolic operation over referenced answers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Ask(Frame),
    Op { op: OpName, args: Vec<String>, refs: Vec<u32> },
}

impl Atom {
    pub fn render(&self) -> String {
        match self {
            Atom::Ask(f) => f.render(),
            Atom::Op { op, args, refs } => {
                let mut out = format!("[{op}]");
                for a in args {
                    out.push_str(&format!(" [{a}]"));
                }
                for r in refs {
                    out.push_str(&format!(" #{r}"));
                }
                out
            }
        }
    }
}

struct Patterns {
    q_located: Regex,
    q_flows: Regex,
    q_born: Regex,
    q_died: Regex,
    q_painted: Regex,
    q_extreme: Regex,
    q_list: Regex,
    q_attr: Regex,
    q_count: Regex,
    q_verify: Regex,
    q_compare: Regex,
    q_both: Regex,
    q_either: Regex,
    np_ref: Regex,
    np_of_located: Regex,
    np_of_flows: Regex,
    np_of_born: Regex,
    np_of_died: Regex,
    np_of_painter: Regex,
    np_extreme: Regex,
    np_filtered: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| {
        let re = |s: &str| Regex::new(s).expect("static pattern");
        Patterns {
            q_located: re(r"^Which country is (.+) located in\?$"),
            q_flows: re(r"^Which countries does (.+) flow through\?$"),
            q_born: re(r"^Where was (.+) born\?$"),
            q_died: re(r"^Where did (.+) die\?$"),
            q_painted: re(r"^Who painted (.+)\?$"),
            q_extreme: re(r"^Which (.+) has the (largest|smallest) (\w+)\?$"),
            q_list: re(r"^What are (.+)\?$"),
            q_attr: re(r"^What is the (\w+) of (.+)\?$"),
            q_count: re(r"^How many (.+) are there\?$"),
            q_verify: re(r"^Is the (\w+) of (.+?) (greater than|less than|not equal to|equal to) ([^ ].*)\?$"),
            q_compare: re(r"^Which has the (greater|smaller) (\w+), (.+) or (.+)\?$"),
            q_both: re(r"^Which are both (.+) and (.+)\?$"),
            q_either: re(r"^Which are either (.+) or (.+)\?$"),
            np_ref: re(r"^#(\d+)$"),
            np_of_located: re(r"^the country where (.+) is located$"),
            np_of_flows: re(r"^the countries that (.+) flows through$"),
            np_of_born: re(r"^the city where (.+) was born$"),
            np_of_died: re(r"^the city where (.+) died$"),
            np_of_painter: re(r"^the painter of (.+)$"),
            np_extreme: re(r"^the (.+) with the (largest|smallest) (\w+)$"),
            np_filtered: re(r"^the (\w+) with (\w+) (greater than|less than|not equal to|equal to) (.+)$"),
        }
    })
}

fn err(text: &str) -> GrammarError {
    GrammarError(text.to_string())
}

/// Parses "<having-phrase> <object>" in singular or plural form, without
/// the leading article.
fn parse_having(body: &str, plural: bool) -> Result<Np, GrammarError> {
    let forms: [(Relation, Option<Concept>, &str, &str); 6] = [
        (Relation::LocatedIn, None, " located in ", ""),
        (Relation::FlowsThrough, Some(Concept::River), "rivers that flow through ", "river that flows through "),
        (Relation::BornIn, Some(Concept::Person), "people born in ", "person born in "),
        (Relation::DiedIn, Some(Concept::Person), "people who died in ", "person who died in "),
        (Relation::PaintedBy, Some(Concept::Painting), "paintings painted by ", "painting painted by "),
        (Relation::LocatedIn, None, "", ""),
    ];
    for (rel, concept, plural_prefix, singular_prefix) in forms.iter().take(5) {
        match concept {
            None => {
                // "<concept> located in <object>"
                if let Some((head, object)) = body.split_once(plural_prefix) {
                    let concept = if plural { Concept::from_plural(head) } else { Concept::from_name(head) };
                    if let Some(c) = concept.filter(|c| rel.subject_concepts().contains(c)) {
                        if let Ok(o) = parse_np(object) {
                            return Ok(Np::having(*rel, c, o));
                        }
                    }
                }
            }
            Some(c) => {
                let prefix = if plural { plural_prefix } else { singular_prefix };
                if let Some(object) = body.strip_prefix(prefix) {
                    if let Ok(o) = parse_np(object) {
                        return Ok(Np::having(*rel, *c, o));
                    }
                }
            }
        }
    }
    Err(err(body))
}

pub fn parse_np(text: &str) -> Result<Np, GrammarError> {
    let p = patterns();
    let text = text.trim();
    if text.is_empty() {
        return Err(err(text));
    }
    if let Some(c) = p.np_ref.captures(text) {
        return c[1].parse().map(Np::Ref).map_err(|_| err(text));
    }
    if !text.starts_with("the ") {
        if text.contains('#') || text.contains('[') || text.contains('?') {
            return Err(err(text));
        }
        return Ok(Np::Named(text.to_string()));
    }
    let forward = [
        (&p.np_of_located, Relation::LocatedIn),
        (&p.np_of_flows, Relation::FlowsThrough),
        (&p.np_of_born, Relation::BornIn),
        (&p.np_of_died, Relation::DiedIn),
        (&p.np_of_painter, Relation::PaintedBy),
    ];
    for (re, rel) in forward {
        if let Some(c) = re.captures(text) {
            if let Ok(s) = parse_np(&c[1]) {
                return Ok(Np::of(rel, s));
            }
        }
    }
    if let Some(c) = p.np_extreme.captures(text) {
        if let (Ok(Np::Having { rel, concept, object }), Some(attr)) = (parse_having(&c[1], false), Attr::from_name(&c[3])) {
            return Ok(Np::Extreme { rel, concept, object, attr, largest: &c[2] == "largest" });
        }
    }
    if let Some(c) = p.np_filtered.captures(text) {
        if let (Some(concept), Some(attr), Some(cmp)) =
            (Concept::from_plural(&c[1]), Attr::from_name(&c[2]), Cmp::from_words(&c[3]))
        {
            return Ok(Np::Filtered { concept, attr, cmp, value: c[4].to_string() });
        }
    }
    parse_having(&text["the ".len()..], true)
}

pub fn parse_frame(text: &str) -> Result<Frame, GrammarError> {
    let p = patterns();
    let text = text.trim();
    let forward = [
        (&p.q_located, Relation::LocatedIn),
        (&p.q_flows, Relation::FlowsThrough),
        (&p.q_born, Relation::BornIn),
        (&p.q_died, Relation::DiedIn),
        (&p.q_painted, Relation::PaintedBy),
    ];
    for (re, rel) in forward {
        if let Some(c) = re.captures(text) {
            if let Ok(s) = parse_np(&c[1]) {
                return Ok(Frame::AskEntity(Np::of(rel, s)));
            }
        }
    }
    if let Some(c) = p.q_extreme.captures(text) {
        if let (Ok(Np::Having { rel, concept, object }), Some(attr)) = (parse_having(&c[1], false), Attr::from_name(&c[3])) {
            return Ok(Frame::AskEntity(Np::Extreme { rel, concept, object, attr, largest: &c[2] == "largest" }));
        }
    }
    if let Some(c) = p.q_attr.captures(text) {
        if let (Some(attr), Ok(np)) = (Attr::from_name(&c[1]), parse_np(&c[2])) {
            return Ok(Frame::AskAttr(attr, np));
        }
    }
    if let Some(c) = p.q_count.captures(text) {
        if let Ok(np) = parse_np(&format!("the {}", &c[1])) {
            if np.is_set() {
                return Ok(Frame::Count(np));
            }
        }
    }
    if let Some(c) = p.q_verify.captures(text) {
        if let (Some(attr), Ok(np), Some(cmp)) = (Attr::from_name(&c[1]), parse_np(&c[2]), Cmp::from_words(&c[3])) {
            return Ok(Frame::Verify { attr, np, cmp, value: c[4].to_string() });
        }
    }
    if let Some(c) = p.q_compare.captures(text) {
        if let (Some(attr), Ok(left), Ok(right)) = (Attr::from_name(&c[2]), parse_np(&c[3]), parse_np(&c[4])) {
            return Ok(Frame::Compare { attr, left, right, greater: &c[1] == "greater" });
        }
    }
    for (re, union) in [(&p.q_both, false), (&p.q_either, true)] {
        if let Some(c) = re.captures(text) {
            if let (Ok(left), Ok(right)) = (parse_np(&c[1]), parse_np(&c[2])) {
                return Ok(Frame::SetOp { union, left, right });
            }
        }
    }
    if let Some(c) = p.q_list.captures(text) {
        if let Ok(np) = parse_np(&c[1]) {
            if matches!(np, Np::Having { .. } | Np::Filtered { .. }) {
                return Ok(Frame::AskEntity(np));
            }
        }
    }
    Err(err(text))
}

pub fn parse_atom(text: &str) -> Result<Atom, GrammarError> {
    let text = text.trim();
    if text.starts_with('[') {
        let q = crate::question::parse_question(text).map_err(|e| GrammarError(e.to_string()))?;
        let (op, args) = q.operation().ok_or_else(|| err(text))?;
        let refs = crate::question::get_ref_tokens(&q);
        return Ok(Atom::Op { op, args, refs });
    }
    parse_frame(text).map(Atom::Ask)
}

/// Sentence stating a relation fact, as written in corpus paragraphs.
pub fn relation_sentence(rel: Relation, subject: &str, subject_concept: Concept, object: &str) -> String {
    match rel {
        Relation::LocatedIn => format!("{subject} is a {} located in {object}.", subject_concept.name()),
        Relation::FlowsThrough => format!("{subject} is a river that flows through {object}."),
        Relation::BornIn => format!("{subject} was born in {object}."),
        Relation::DiedIn => format!("{subject} died in {object}."),
        Relation::PaintedBy => format!("{subject} was painted by {object}."),
    }
}

pub fn attribute_sentence(attr: Attr, subject: &str, value: &str) -> String {
    format!("The {} of {subject} is {value}.", attr.name())
}

/// Anchored regex matching one relation sentence with one side fixed and the other
/// captured as group 1. Fixed sides match case-insensitively so that a
/// descriptive subject may open the sentence.
pub fn relation_sentence_pattern(
    rel: Relation,
    subject: Option<&str>,
    object: Option<&str>,
    subject_concept: Option<Concept>,
) -> Regex {
    let side = |s: Option<&str>| s.map(|s| format!("(?i:{})", regex::escape(s))).unwrap_or_else(|| "([^.]+?)".to_string());
    let (s, o) = (side(subject), side(object));
    let concept = subject_concept.map(|c| c.name().to_string()).unwrap_or_else(|| r"\w+".to_string());
    let body = match rel {
        Relation::LocatedIn => format!(r"{s} is an? {concept} located in {o}"),
        Relation::FlowsThrough => format!(r"{s} is a river that flows through {o}"),
        Relation::BornIn => format!(r"{s} was born in {o}"),
        Relation::DiedIn => format!(r"{s} died in {o}"),
        Relation::PaintedBy => format!(r"{s} was painted by {o}"),
    };
    Regex::new(&format!(r"^{body}\.$")).expect("escaped pattern")
}

/// Splits paragraph text into sentences, each keeping its final period.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    for i in 0..bytes.len() {
        if bytes[i] == b'.' && (i + 1 == bytes.len() || bytes[i + 1].is_ascii_whitespace()) {
            let s = text[start..=i].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

pub fn attribute_sentence_pattern(attr: Attr, subject: &str) -> Regex {
    Regex::new(&format!(r"^The {} of (?i:{}) is (.+?)\.$", attr.name(), regex::escape(subject)))
        .expect("escaped pattern")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip(f: Frame) {
        let text = f.render();
        assert_eq!(parse_frame(&text).unwrap(), f, "{text}");
    }

    #[test]
    fn renders_examples() {
        let f = Frame::AskEntity(Np::extreme(Relation::LocatedIn, Concept::Mountain, Np::named("Kharzan"), Attr::Height, true));
        assert_eq!(f.render(), "Which mountain located in Kharzan has the largest height?");
        let f = Frame::AskAttr(Attr::Population, Np::of(Relation::DiedIn, Np::of(Relation::PaintedBy, Np::named("Dusk Harbor"))));
        assert_eq!(f.render(), "What is the population of the city where the painter of Dusk Harbor died?");
        let f = Frame::Count(Np::having(Relation::BornIn, Concept::Person, Np::named("Varo")));
        assert_eq!(f.render(), "How many people born in Varo are there?");
        let f = Frame::AskAttr(Attr::Height, Np::Ref(1));
        assert_eq!(f.render(), "What is the height of #1?");
    }

    #[test]
    fn frames_round_trip() {
        let named = || Np::named("Tarn Vel");
        let people = Np::having(Relation::BornIn, Concept::Person, Np::named("Varo"));
        let dead = Np::having(Relation::DiedIn, Concept::Person, Np::of(Relation::BornIn, named()));
        let frames = vec![
            Frame::AskEntity(Np::of(Relation::LocatedIn, named())),
            Frame::AskEntity(Np::of(Relation::FlowsThrough, named())),
            Frame::AskEntity(Np::of(Relation::DiedIn, Np::of(Relation::PaintedBy, named()))),
            Frame::AskEntity(Np::of(Relation::BornIn, Np::Ref(2))),
            Frame::AskEntity(people.clone()),
            Frame::AskEntity(Np::having(Relation::LocatedIn, Concept::City, Np::of(Relation::LocatedIn, named()))),
            Frame::AskEntity(Np::extreme(Relation::FlowsThrough, Concept::River, named(), Attr::Length, false)),
            Frame::AskEntity(Np::Filtered { concept: Concept::Mountain, attr: Attr::Height, cmp: Cmp::Greater, value: "8000 m".into() }),
            Frame::AskAttr(
                Attr::Height,
                Np::extreme(Relation::LocatedIn, Concept::Mountain, Np::of(Relation::LocatedIn, named()), Attr::Height, true),
            ),
            Frame::Count(Np::having(Relation::LocatedIn, Concept::Mountain, Np::Ref(1))),
            Frame::Count(Np::Filtered { concept: Concept::City, attr: Attr::Population, cmp: Cmp::Less, value: "5000".into() }),
            Frame::Verify { attr: Attr::Inception, np: named(), cmp: Cmp::NotEqual, value: "2005".into() },
            Frame::Verify { attr: Attr::Inception, np: Np::of(Relation::BornIn, named()), cmp: Cmp::Equal, value: "2005".into() },
            Frame::Compare { attr: Attr::Height, left: named(), right: Np::named("K2"), greater: false },
            Frame::SetOp { union: false, left: people.clone(), right: dead.clone() },
            Frame::SetOp { union: true, left: people, right: dead },
        ];
        for f in frames {
            round_trip(f);
        }
    }

    #[test]
    fn rejects_text_outside_grammar() {
        assert!(parse_frame("Which mountain is the highest in North America?").is_err());
        assert!(parse_frame("What is the colour of Varo?").is_err());
        assert!(parse_frame("What are Varo?").is_err());
        assert!(parse_np("the moons located in Varo").is_err());
    }

    #[test]
    fn atoms_parse() {
        assert_eq!(
            parse_atom("[SelectBetween] [greater] #1 #2").unwrap(),
            Atom::Op { op: OpName::SelectBetween, args: vec!["greater".into()], refs: vec![1, 2] }
        );
        assert_eq!(parse_atom("[Verify] [8000 m] [>] #1").unwrap().render(), "[Verify] [8000 m] [>] #1");
    }

    #[test]
    fn sentence_patterns() {
        let text = "Everest is a mountain located in Kharzan. Lhotse is a mountain located in Kharzan. The height of Everest is 8.8 km. Varo is a city located in Kharzan.";
        let parts = sentences(text);
        assert_eq!(parts.len(), 4);
        let re = relation_sentence_pattern(Relation::LocatedIn, None, Some("Kharzan"), Some(Concept::Mountain));
        let found: Vec<_> = parts.iter().filter_map(|s| re.captures(s)).map(|c| c[1].to_string()).collect();
        assert_eq!(found, vec!["Everest", "Lhotse"]);
        let re = attribute_sentence_pattern(Attr::Height, "everest");
        assert_eq!(&re.captures(parts[2]).unwrap()[1], "8.8 km");
        let re = relation_sentence_pattern(Relation::DiedIn, Some("the painter of Dusk"), None, None);
        assert_eq!(&re.captures("The painter of Dusk died in Olm.").unwrap()[1], "Olm");
        assert_eq!(
            relation_sentence(Relation::LocatedIn, "Everest", Concept::Mountain, "Kharzan"),
            "Everest is a mountain located in Kharzan."
        );
    }
}
