#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use hqdt::atoms::AtomicRepresentation;
use hqdt::decompose::{DecomposeError, Decomposer, QuestionGenerator};
use hqdt::kb::{AttributeFact, Call, ConceptDecl, EntityDecl, Function, KbData, Program, RawValue, RelationFact};
use hqdt::metrics::tokenize;
use hqdt::question::{parse_question, Question};
use hqdt::text::{CorpusData, Paragraph};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- trees

/// Appends the atoms of one random group and returns the 1-based position
/// of its last atom.
fn random_group(rng: &mut ChaCha8Rng, depth: usize, force_internal: bool, atoms: &mut Vec<String>) -> usize {
    if depth == 0 || (!force_internal && rng.gen_bool(0.4)) {
        atoms.push(format!("What is fact {} of topic {}?", atoms.len() + 1, rng.gen_range(0..50)));
        return atoms.len();
    }
    let two = rng.gen_bool(0.5);
    let a = random_group(rng, depth - 1, false, atoms);
    let last = if two {
        let b = random_group(rng, depth - 1, false, atoms);
        match rng.gen_range(0..4) {
            0 => format!("[Intersection] #{a} #{b}"),
            1 => format!("[Union] #{a} #{b}"),
            2 => format!("[SelectBetween] [greater] #{a} #{b}"),
            _ => format!("Which river links #{a} and #{b}?"),
        }
    } else {
        match rng.gen_range(0..4) {
            0 => format!("[Count] #{a}"),
            1 => format!("[SelectAmong] [largest] #{a}"),
            2 => format!("[Verify] [2005] [<] #{a}"),
            _ => format!("How high is #{a}?"),
        }
    };
    atoms.push(last);
    atoms.len()
}

/// A random canonical atomic representation with at least two atoms.
pub fn random_atoms(rng: &mut ChaCha8Rng, max_depth: usize) -> Vec<String> {
    let mut atoms = Vec::new();
    random_group(rng, max_depth.max(1), true, &mut atoms);
    atoms
}

pub struct FixedDecomposer {
    pub atoms: AtomicRepresentation,
    pub likelihood: f64,
}

impl Decomposer for FixedDecomposer {
    fn decompose(&self, _question: &str) -> Result<(AtomicRepresentation, f64), DecomposeError> {
        Ok((self.atoms.clone(), self.likelihood))
    }
}

/// Answers every request with a fresh question and remembers the inputs.
pub struct RecordingGenerator {
    pub likelihood: f64,
    pub seen: Mutex<Vec<String>>,
}

impl RecordingGenerator {
    pub fn new(likelihood: f64) -> Self {
        RecordingGenerator { likelihood, seen: Mutex::new(Vec::new()) }
    }
}

impl QuestionGenerator for RecordingGenerator {
    fn generate(&self, serialized: &str) -> Result<(Question, f64), DecomposeError> {
        let mut seen = self.seen.lock().unwrap();
        seen.push(serialized.to_string());
        let q = parse_question(&format!("What answers group {}?", seen.len())).expect("plain question");
        Ok((q, self.likelihood))
    }
}

// ---------------------------------------------------------------- KB

pub const PREDICATES: [&str; 3] = ["near", "owns", "part_of"];
pub const ATTRS: [&str; 2] = ["size", "depth"];

/// A random KB with at most `max_entities` entities. Concepts form a small
/// hierarchy; attribute values mix metres and kilometres.
pub fn random_kb(rng: &mut ChaCha8Rng, max_entities: usize) -> KbData {
    let n = rng.gen_range(1..=max_entities);
    let concepts: Vec<ConceptDecl> = (0..5)
        .map(|i| ConceptDecl {
            id: format!("c{i}"),
            name: format!("kind{i}"),
            parent: (i > 0).then(|| format!("c{}", rng.gen_range(0..i))),
        })
        .collect();
    let names = (n * 4 / 5).max(1);
    let entities: Vec<EntityDecl> = (0..n)
        .map(|i| EntityDecl {
            id: format!("e{i}"),
            name: format!("name{}", rng.gen_range(0..names)),
            concepts: vec![format!("c{}", rng.gen_range(0..5))],
        })
        .collect();
    let relations: Vec<RelationFact> = (0..rng.gen_range(0..=3 * n))
        .map(|_| RelationFact {
            s: format!("e{}", rng.gen_range(0..n)),
            p: PREDICATES.choose(rng).unwrap().to_string(),
            o: format!("e{}", rng.gen_range(0..n)),
        })
        .collect();
    let mut attributes = Vec::new();
    for e in 0..n {
        for a in ATTRS {
            if rng.gen_bool(0.7) {
                let km = rng.gen_bool(0.3);
                attributes.push(AttributeFact {
                    e: format!("e{e}"),
                    a: a.to_string(),
                    value: RawValue::Number(rng.gen_range(0..20) as f64),
                    unit: Some(if km { "km" } else { "m" }.to_string()),
                });
            }
        }
    }
    KbData { entities, concepts, relations, attributes, units: Vec::new() }
}

/// A random well-formed program whose final call may yield entities or
/// values.
pub fn random_program(rng: &mut ChaCha8Rng, kb: &KbData) -> Program {
    let mut calls = Vec::new();
    let mut entity_slots: Vec<usize> = Vec::new();
    let start = if rng.gen_bool(0.6) {
        let name = if rng.gen_bool(0.9) { kb.entities.choose(rng).unwrap().name.clone() } else { "nobody".into() };
        Call::new(Function::Find, &[&name], &[])
    } else {
        Call::new(Function::FilterConcept, &[&format!("kind{}", rng.gen_range(0..6))], &[])
    };
    calls.push(start);
    entity_slots.push(0);
    for _ in 0..rng.gen_range(0..4) {
        let input = *entity_slots.choose(rng).unwrap();
        let call = match rng.gen_range(0..4) {
            0 => Call::new(
                Function::Relate,
                &[PREDICATES.choose(rng).unwrap(), if rng.gen_bool(0.5) { "forward" } else { "backward" }],
                &[input],
            ),
            1 => Call::new(Function::FilterConcept, &[&format!("kind{}", rng.gen_range(0..5))], &[input]),
            2 => {
                let unit = if rng.gen_bool(0.5) { "m" } else { "km" };
                let value = format!("{} {unit}", rng.gen_range(0..20));
                Call::new(
                    Function::FilterAttr,
                    &[ATTRS.choose(rng).unwrap(), ["<", ">", "=", "!="].choose(rng).unwrap(), &value],
                    &[input],
                )
            }
            _ => Call::new(
                Function::SelectAmong,
                &[ATTRS.choose(rng).unwrap(), if rng.gen_bool(0.5) { "largest" } else { "smallest" }],
                &[input],
            ),
        };
        calls.push(call);
        entity_slots.push(calls.len() - 1);
    }
    let last = calls.len() - 1;
    match rng.gen_range(0..4) {
        0 => calls.push(Call::new(Function::QueryAttr, &[ATTRS.choose(rng).unwrap()], &[last])),
        1 => calls.push(Call::new(Function::QueryName, &[], &[last])),
        2 => calls.push(Call::new(Function::Count, &[], &[last])),
        _ => {}
    }
    Program::new(calls)
}

fn metres(f: &AttributeFact) -> f64 {
    let RawValue::Number(n) = f.value else { panic!("numeric attributes only") };
    match f.unit.as_deref() {
        Some("km") => n * 1000.0,
        _ => n,
    }
}

fn target_metres(text: &str) -> f64 {
    let (n, unit) = text.split_once(' ').unwrap();
    let n: f64 = n.parse().unwrap();
    if unit == "km" {
        n * 1000.0
    } else {
        n
    }
}

fn concept_closure(kb: &KbData, entity: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for c in &kb.entities[entity].concepts {
        let mut cur = Some(c.clone());
        while let Some(id) = cur {
            let decl = kb.concepts.iter().find(|d| d.id == id).unwrap();
            out.insert(decl.name.clone());
            cur = decl.parent.clone();
        }
    }
    out
}

fn entity_index(kb: &KbData, id: &str) -> usize {
    kb.entities.iter().position(|e| e.id == id).unwrap()
}

fn format_number(x: f64) -> String {
    hqdt::answer::format_amount(x)
}

enum Slot {
    Entities(Vec<usize>),
    Values(Vec<String>),
}

/// Evaluates a program by linear scans over the raw facts. Returns sorted
/// `surface|subject` strings.
pub fn brute_force(kb: &KbData, program: &Program) -> Vec<String> {
    let all: Vec<usize> = (0..kb.entities.len()).collect();
    let mut slots: Vec<Slot> = Vec::new();
    for call in &program.calls {
        let input = || match call.inputs.first() {
            None => all.clone(),
            Some(&j) => match &slots[j] {
                Slot::Entities(es) => es.clone(),
                Slot::Values(_) => panic!("generator only feeds entity sets"),
            },
        };
        let values_of = |e: usize, a: &str| -> Vec<&AttributeFact> {
            kb.attributes.iter().filter(|f| entity_index(kb, &f.e) == e && f.a == a).collect()
        };
        let slot = match call.func {
            Function::Find => Slot::Entities(all.iter().copied().filter(|&e| kb.entities[e].name == call.args[0]).collect()),
            Function::FilterConcept => {
                Slot::Entities(input().into_iter().filter(|&e| concept_closure(kb, e).contains(&call.args[0])).collect())
            }
            Function::Relate => {
                let forward = call.args[1] == "forward";
                let from = input();
                let mut out = BTreeSet::new();
                for f in kb.relations.iter().filter(|f| f.p == call.args[0]) {
                    let (s, o) = (entity_index(kb, &f.s), entity_index(kb, &f.o));
                    let (a, b) = if forward { (s, o) } else { (o, s) };
                    if from.contains(&a) {
                        out.insert(b);
                    }
                }
                Slot::Entities(out.into_iter().collect())
            }
            Function::FilterAttr => {
                let t = target_metres(&call.args[2]);
                let keep = |v: f64| match call.args[1].as_str() {
                    ">" => v > t,
                    "<" => v < t,
                    "=" => v == t,
                    _ => v != t,
                };
                Slot::Entities(
                    input().into_iter().filter(|&e| values_of(e, &call.args[0]).iter().any(|f| keep(metres(f)))).collect(),
                )
            }
            Function::SelectAmong => {
                let largest = call.args[1] == "largest";
                let mut best: Option<(f64, usize)> = None;
                for e in input() {
                    for f in values_of(e, &call.args[0]) {
                        let v = metres(f);
                        let better = match best {
                            None => true,
                            Some((bv, be)) => {
                                if v == bv {
                                    kb.entities[e].name < kb.entities[be].name
                                } else {
                                    (v > bv) == largest
                                }
                            }
                        };
                        if better {
                            best = Some((v, e));
                        }
                    }
                }
                Slot::Entities(best.map(|(_, e)| vec![e]).unwrap_or_default())
            }
            Function::QueryAttr => {
                let mut out = Vec::new();
                for e in input() {
                    for f in values_of(e, &call.args[0]) {
                        let RawValue::Number(n) = f.value else { unreachable!() };
                        let unit = f.unit.clone().unwrap_or_default();
                        out.push(format!("{} {unit}|{}", format_number(n), kb.entities[e].name));
                    }
                }
                Slot::Values(out)
            }
            Function::QueryName => Slot::Values(input().into_iter().map(|e| format!("{}|", kb.entities[e].name)).collect()),
            Function::Count => {
                let distinct: BTreeSet<usize> = input().into_iter().collect();
                Slot::Values(vec![format!("{}|", distinct.len())])
            }
        };
        slots.push(slot);
    }
    let mut out = match slots.pop().unwrap() {
        Slot::Entities(es) => es.into_iter().map(|e| format!("{}|", kb.entities[e].name)).collect(),
        Slot::Values(vs) => vs,
    };
    out.sort();
    out
}

// ---------------------------------------------------------------- text

const WORDS: [&str; 16] = [
    "river", "mountain", "city", "height", "flows", "through", "born", "painter", "the", "of", "kharzan", "everest",
    "located", "population", "north", "valley",
];

pub fn random_corpus(rng: &mut ChaCha8Rng, paragraphs: usize) -> CorpusData {
    let mut out = Vec::new();
    for i in 0..paragraphs {
        let len = rng.gen_range(1..40);
        let text: Vec<&str> = (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect();
        out.push(Paragraph { id: format!("d{i:03}"), title: WORDS.choose(rng).unwrap().to_string(), text: text.join(" ") });
    }
    CorpusData { paragraphs: out, question_sets: BTreeMap::new() }
}

pub fn random_query(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(1..6);
    let mut words: Vec<String> = (0..len).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    if rng.gen_bool(0.2) {
        words.push("absent".into());
    }
    words.join(" ")
}

/// Okapi BM25 (k1 = 1.2, b = 0.75) computed without an index: every
/// document is rescanned for every term.
pub fn naive_bm25(data: &CorpusData, query: &str) -> BTreeMap<usize, f64> {
    let docs: Vec<Vec<String>> = data
        .paragraphs
        .iter()
        .map(|p| {
            let mut t = tokenize(&p.title);
            t.extend(tokenize(&p.text));
            t
        })
        .collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
    let mut out = BTreeMap::new();
    for t in &terms {
        let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
        if df == 0.0 {
            continue;
        }
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        for (i, d) in docs.iter().enumerate() {
            let tf = d.iter().filter(|w| *w == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let dl = d.len() as f64;
            *out.entry(i).or_insert(0.0) += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * dl / avgdl));
        }
    }
    out
}
