//! Question decomposition: decomposer/generator interfaces, their fixture
//! and template implementations, and bottom-up tree construction.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atoms::{deserialize_atoms, serialize_atoms, AtomicRepresentation, AtomsError};
use crate::grammar::{parse_atom, parse_frame, Atom, Frame, GrammarError, Np};
use crate::question::{distinct_refs, modify_ref_token, parse_question, OpName, Question, QuestionError};
use crate::tree::{atoms_from_leaves, reindex_bfs, Hqdt, ProvisionalNode, TreeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecomposeError {
    #[error("no decomposition known for {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Atoms(#[from] AtomsError),
    #[error("cannot compose atoms: {0}")]
    Compose(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("decomposer failed: {0}")]
    Decomposer(DecomposeError),
    #[error("generator failed on {atoms:?}: {source}")]
    Generator { atoms: String, source: DecomposeError },
    #[error("likelihood {0} outside (0, 1]")]
    Likelihood(f64),
    #[error("question {text:?}: {source}")]
    Question { text: String, source: QuestionError },
    #[error("root question {0:?} is not natural language")]
    RootNotNatural(String),
    #[error("generator produced a non natural-language question {0:?}")]
    GeneratedNotNatural(String),
    #[error("atom {atom} references more than two earlier atoms")]
    TooManyRefs { atom: usize },
    #[error("atom {target} is referenced by more than one atom")]
    ReferencedTwice { target: u32 },
    #[error("last atom must reference earlier atoms")]
    LastAtomNotReferential,
    #[error("atom {0} is not connected to the root")]
    Disconnected(usize),
    #[error("atom group refers to #{target} outside the group")]
    InvalidGroup { target: u32 },
    #[error("atoms are not in canonical depth-first order")]
    NonCanonical,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Maps a complex question to its atomic representation and likelihood.
pub trait Decomposer: Send + Sync {
    fn decompose(&self, question: &str) -> Result<(AtomicRepresentation, f64), DecomposeError>;
}

/// Maps serialized atoms back to one natural-language question.
pub trait QuestionGenerator: Send + Sync {
    fn generate(&self, serialized_atoms: &str) -> Result<(Question, f64), DecomposeError>;
}

fn check_likelihood(l: f64) -> Result<f64, BuildError> {
    if l > 0.0 && l <= 1.0 {
        Ok(l)
    } else {
        Err(BuildError::Likelihood(l))
    }
}

/// Renumbers the references of a group of atoms (given with their original
/// positions) to 1-based positions inside the group.
pub fn rearrange_ref_tokens(group: &[(usize, Question)]) -> Result<AtomicRepresentation, BuildError> {
    let ids: HashMap<u32, u32> = group.iter().enumerate().map(|(h, (orig, _))| (*orig as u32, h as u32 + 1)).collect();
    let mut out = Vec::with_capacity(group.len());
    for (_, atom) in group {
        if let Some(&target) = distinct_refs(atom).iter().find(|k| !ids.contains_key(k)) {
            return Err(BuildError::InvalidGroup { target });
        }
        out.push(atom.remap_refs(|k| ids.get(&k).copied()));
    }
    AtomicRepresentation::new(out).map_err(|_| BuildError::NonCanonical)
}

/// Builds the decomposition tree of `q0` bottom-up: every atom is a leaf,
/// every atom with references closes a node over the groups it references,
/// and the group closed by the last atom is the root.
pub fn build_hqdt(q0: &str, d: &dyn Decomposer, g: &dyn QuestionGenerator) -> Result<Hqdt, BuildError> {
    let root_q = parse_question(q0).map_err(|source| BuildError::Question { text: q0.to_string(), source })?;
    if !root_q.is_natural_language() {
        return Err(BuildError::RootNotNatural(q0.to_string()));
    }
    let (ar, l_d) = d.decompose(q0).map_err(BuildError::Decomposer)?;
    let l_d = check_likelihood(l_d)?;
    let atoms = ar.atoms();
    let n0 = atoms.len();
    if n0 == 1 {
        return if distinct_refs(&atoms[0]).is_empty() {
            Ok(Hqdt::single(root_q))
        } else {
            Err(BuildError::NonCanonical)
        };
    }

    let mut referenced = vec![false; n0 + 1];
    for atom in atoms {
        for r in distinct_refs(atom) {
            if std::mem::replace(&mut referenced[r as usize], true) {
                return Err(BuildError::ReferencedTwice { target: r });
            }
        }
    }
    if distinct_refs(&atoms[n0 - 1]).is_empty() {
        return Err(BuildError::LastAtomNotReferential);
    }

    let mut question: HashMap<usize, Question> = HashMap::new();
    let mut certainty: HashMap<usize, f64> = HashMap::new();
    let mut parent: HashMap<usize, usize> = HashMap::new();
    let mut covered: HashMap<usize, Vec<(usize, Question)>> = HashMap::new();
    let mut nodes: Vec<ProvisionalNode> = Vec::new();
    let mut next_id = n0;

    for i in 1..=n0 {
        let atom = atoms[i - 1].clone();
        let refs = distinct_refs(&atom);
        question.insert(i, atom.clone());
        certainty.insert(i, l_d);
        covered.insert(i, vec![(i, atom)]);
        if refs.is_empty() {
            continue;
        }
        if refs.len() > 2 {
            return Err(BuildError::TooManyRefs { atom: i });
        }
        next_id += 1;
        let n = next_id;
        let mut members: Vec<usize> = Vec::with_capacity(refs.len() + 1);
        for &r in &refs {
            let mut top = r as usize;
            while let Some(&f) = parent.get(&top) {
                top = f;
            }
            if top != r as usize {
                let q = question.remove(&i).expect("current atom");
                let q = modify_ref_token(&q, r, top as u32)
                    .map_err(|source| BuildError::Question { text: q.render(), source })?;
                question.insert(i, q);
            }
            members.push(top);
        }
        members.push(i);
        let mut group = Vec::new();
        for &j in &members {
            parent.insert(j, n);
            nodes.push(ProvisionalNode { id: j, question: question[&j].clone(), certainty: certainty[&j], parent: Some(n) });
            group.extend(covered[&j].iter().cloned());
        }
        covered.insert(n, group);

        if i == n0 {
            question.insert(n, root_q.clone());
            certainty.insert(n, 1.0);
        } else {
            let local = rearrange_ref_tokens(&covered[&n])?;
            let serialized = serialize_atoms(&local);
            let (q, l_g) = g
                .generate(&serialized)
                .map_err(|source| BuildError::Generator { atoms: serialized.clone(), source })?;
            if !q.is_natural_language() {
                return Err(BuildError::GeneratedNotNatural(q.render()));
            }
            let l_g = check_likelihood(l_g)?;
            question.insert(n, q);
            certainty.insert(n, l_d * l_g);
        }
    }

    if let Some(orphan) = (1..next_id).find(|id| !parent.contains_key(id)) {
        return Err(BuildError::Disconnected(orphan));
    }
    nodes.push(ProvisionalNode { id: next_id, question: root_q, certainty: 1.0, parent: None });
    let tree = reindex_bfs(nodes)?;
    if atoms_from_leaves(&tree, 0)? != ar {
        return Err(BuildError::NonCanonical);
    }
    Ok(tree)
}

fn key(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn one() -> f64 {
    1.0
}

/// One record of a decomposition fixture file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub question: String,
    pub atoms: Vec<String>,
    #[serde(default = "one")]
    pub l_d: f64,
    #[serde(default)]
    pub generated: BTreeMap<String, GeneratedEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedEntry {
    pub text: String,
    #[serde(default = "one")]
    pub l_g: f64,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing fixture: {0}")]
    Json(#[from] serde_json::Error),
    #[error("fixture entry {question:?}: {source}")]
    Atoms { question: String, source: AtomsError },
    #[error("fixture generated text {text:?}: {source}")]
    Question { text: String, source: QuestionError },
}

pub fn load_fixture(path: &Path) -> Result<Vec<FixtureEntry>, FixtureError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| FixtureError::Io { path: path.display().to_string(), source })?;
    Ok(serde_json::from_str(&text)?)
}

/// Decomposer backed by stored (question → atoms) annotations.
#[derive(Clone, Debug, Default)]
pub struct FixtureDecomposer {
    entries: HashMap<String, (AtomicRepresentation, f64)>,
}

impl FixtureDecomposer {
    pub fn from_entries(entries: &[FixtureEntry]) -> Result<Self, FixtureError> {
        let mut map = HashMap::new();
        for e in entries {
            let ar = AtomicRepresentation::parse_list(&e.atoms)
                .map_err(|source| FixtureError::Atoms { question: e.question.clone(), source })?;
            map.insert(key(&e.question), (ar, e.l_d));
        }
        Ok(FixtureDecomposer { entries: map })
    }

    pub fn insert(&mut self, question: &str, ar: AtomicRepresentation, l_d: f64) {
        self.entries.insert(key(question), (ar, l_d));
    }
}

impl Decomposer for FixtureDecomposer {
    fn decompose(&self, question: &str) -> Result<(AtomicRepresentation, f64), DecomposeError> {
        self.entries.get(&key(question)).cloned().ok_or_else(|| DecomposeError::Unknown(question.to_string()))
    }
}

/// Generator backed by stored (serialized atoms → question) annotations.
#[derive(Clone, Debug, Default)]
pub struct FixtureGenerator {
    entries: HashMap<String, (Question, f64)>,
}

impl FixtureGenerator {
    pub fn from_entries(entries: &[FixtureEntry]) -> Result<Self, FixtureError> {
        let mut map = HashMap::new();
        for e in entries {
            for (atoms, generated) in &e.generated {
                let q = parse_question(&generated.text)
                    .map_err(|source| FixtureError::Question { text: generated.text.clone(), source })?;
                map.insert(key(atoms), (q, generated.l_g));
            }
        }
        Ok(FixtureGenerator { entries: map })
    }

    pub fn insert(&mut self, serialized_atoms: &str, question: Question, l_g: f64) {
        self.entries.insert(key(serialized_atoms), (question, l_g));
    }
}

impl QuestionGenerator for FixtureGenerator {
    fn generate(&self, serialized_atoms: &str) -> Result<(Question, f64), DecomposeError> {
        self.entries
            .get(&key(serialized_atoms))
            .cloned()
            .ok_or_else(|| DecomposeError::Unknown(serialized_atoms.to_string()))
    }
}

/// Rule-based decomposer for the synthetic question grammar.
#[derive(Clone, Copy, Debug)]
pub struct TemplateDecomposer {
    pub likelihood: f64,
}

impl Default for TemplateDecomposer {
    fn default() -> Self {
        TemplateDecomposer { likelihood: 1.0 }
    }
}

fn push(atoms: &mut Vec<Atom>, atom: Atom) -> Np {
    atoms.push(atom);
    Np::Ref(atoms.len() as u32)
}

/// Reduces a noun phrase to a name or a reference, emitting the atoms that
/// compute it.
fn reduce_np(np: &Np, atoms: &mut Vec<Atom>) -> Np {
    match np {
        Np::Named(_) | Np::Ref(_) => np.clone(),
        Np::Of { rel, subject } => {
            let s = reduce_np(subject, atoms);
            push(atoms, Atom::Ask(Frame::AskEntity(Np::of(*rel, s))))
        }
        Np::Having { rel, concept, object } => {
            let o = reduce_np(object, atoms);
            push(atoms, Atom::Ask(Frame::AskEntity(Np::having(*rel, *concept, o))))
        }
        Np::Extreme { rel, concept, object, attr, largest } => {
            let o = reduce_np(object, atoms);
            let list = push(atoms, Atom::Ask(Frame::AskEntity(Np::having(*rel, *concept, o))));
            let Np::Ref(values) = push(atoms, Atom::Ask(Frame::AskAttr(*attr, list))) else { unreachable!() };
            let arg = if *largest { "largest" } else { "smallest" };
            push(atoms, Atom::Op { op: OpName::SelectAmong, args: vec![arg.into()], refs: vec![values] })
        }
        Np::Filtered { .. } => push(atoms, Atom::Ask(Frame::AskEntity(np.clone()))),
    }
}

fn ref_of(np: Np) -> u32 {
    match np {
        Np::Ref(k) => k,
        _ => unreachable!("set phrases always reduce to a reference"),
    }
}

/// Post-order decomposition of a frame into atoms.
pub fn decompose_frame(frame: &Frame) -> Vec<Atom> {
    let mut atoms = Vec::new();
    match frame {
        Frame::AskEntity(np) => {
            if np.is_simple() {
                atoms.push(Atom::Ask(frame.clone()));
            } else {
                reduce_np(np, &mut atoms);
            }
        }
        Frame::AskAttr(attr, np) => {
            let s = reduce_np(np, &mut atoms);
            atoms.push(Atom::Ask(Frame::AskAttr(*attr, s)));
        }
        Frame::Count(np) => {
            let set = ref_of(reduce_np(np, &mut atoms));
            atoms.push(Atom::Op { op: OpName::Count, args: vec![], refs: vec![set] });
        }
        Frame::Verify { attr, np, cmp, value } => {
            let s = reduce_np(np, &mut atoms);
            let v = ref_of(push(&mut atoms, Atom::Ask(Frame::AskAttr(*attr, s))));
            atoms.push(Atom::Op { op: OpName::Verify, args: vec![value.clone(), cmp.symbol().into()], refs: vec![v] });
        }
        Frame::Compare { attr, left, right, greater } => {
            let l = reduce_np(left, &mut atoms);
            let a = ref_of(push(&mut atoms, Atom::Ask(Frame::AskAttr(*attr, l))));
            let r = reduce_np(right, &mut atoms);
            let b = ref_of(push(&mut atoms, Atom::Ask(Frame::AskAttr(*attr, r))));
            let arg = if *greater { "greater" } else { "smaller" };
            atoms.push(Atom::Op { op: OpName::SelectBetween, args: vec![arg.into()], refs: vec![a, b] });
        }
        Frame::SetOp { union, left, right } => {
            let a = ref_of(reduce_np(left, &mut atoms));
            let b = ref_of(reduce_np(right, &mut atoms));
            let op = if *union { OpName::Union } else { OpName::Intersection };
            atoms.push(Atom::Op { op, args: vec![], refs: vec![a, b] });
        }
    }
    atoms
}

impl Decomposer for TemplateDecomposer {
    fn decompose(&self, question: &str) -> Result<(AtomicRepresentation, f64), DecomposeError> {
        let frame = parse_frame(question)?;
        if frame.has_refs() {
            return Err(DecomposeError::Compose(format!("{question:?} contains references")));
        }
        let texts: Vec<String> = decompose_frame(&frame).iter().map(Atom::render).collect();
        Ok((AtomicRepresentation::parse_list(&texts)?, self.likelihood))
    }
}

/// Rule-based generator: composes a group of atoms back into one question
/// of the synthetic grammar.
#[derive(Clone, Copy, Debug)]
pub struct TemplateGenerator {
    pub likelihood: f64,
}

impl Default for TemplateGenerator {
    fn default() -> Self {
        TemplateGenerator { likelihood: 1.0 }
    }
}

#[derive(Clone, Debug)]
enum Meaning {
    Np(Np),
    Attr(crate::grammar::Attr, Np),
    Frame(Frame),
}

fn substitute(np: &Np, meanings: &[Meaning]) -> Result<Np, DecomposeError> {
    Ok(match np {
        Np::Ref(k) => match meanings.get(*k as usize - 1) {
            Some(Meaning::Np(inner)) => inner.clone(),
            _ => return Err(DecomposeError::Compose(format!("#{k} is not a noun phrase"))),
        },
        Np::Named(_) | Np::Filtered { .. } => np.clone(),
        Np::Of { rel, subject } => Np::of(*rel, substitute(subject, meanings)?),
        Np::Having { rel, concept, object } => Np::having(*rel, *concept, substitute(object, meanings)?),
        Np::Extreme { rel, concept, object, attr, largest } => {
            Np::extreme(*rel, *concept, substitute(object, meanings)?, *attr, *largest)
        }
    })
}

/// Composes atoms (positional references) into a single frame.
pub fn compose_atoms(atoms: &[Atom]) -> Result<Frame, DecomposeError> {
    let bad = |msg: &str| DecomposeError::Compose(msg.to_string());
    let mut meanings: Vec<Meaning> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        let meaning = match atom {
            Atom::Ask(Frame::AskEntity(np)) => Meaning::Np(substitute(np, &meanings)?),
            Atom::Ask(Frame::AskAttr(attr, np)) => Meaning::Attr(*attr, substitute(np, &meanings)?),
            Atom::Ask(f) => {
                if f.has_refs() {
                    return Err(bad("only entity and attribute questions may hold references"));
                }
                Meaning::Frame(f.clone())
            }
            Atom::Op { op, args, refs } => {
                let get = |k: u32| meanings.get(k as usize - 1).cloned().ok_or_else(|| bad("dangling reference"));
                match (op, refs.as_slice()) {
                    (OpName::SelectAmong, [r]) => match get(*r)? {
                        Meaning::Attr(attr, Np::Having { rel, concept, object }) => Meaning::Np(Np::Extreme {
                            rel,
                            concept,
                            object,
                            attr,
                            largest: args.first().map(String::as_str) == Some("largest"),
                        }),
                        _ => return Err(bad("SelectAmong needs attribute values of a set")),
                    },
                    (OpName::Count, [r]) => match get(*r)? {
                        Meaning::Np(np) if np.is_set() => Meaning::Frame(Frame::Count(np)),
                        _ => return Err(bad("Count needs a set")),
                    },
                    (OpName::Verify, [r]) => match (get(*r)?, args.as_slice()) {
                        (Meaning::Attr(attr, np), [value, cmp]) => {
                            let cmp = crate::grammar::Cmp::from_symbol(cmp).ok_or_else(|| bad("unknown comparator"))?;
                            Meaning::Frame(Frame::Verify { attr, np, cmp, value: value.clone() })
                        }
                        _ => return Err(bad("Verify needs an attribute value")),
                    },
                    (OpName::SelectBetween, [a, b]) => match (get(*a)?, get(*b)?) {
                        (Meaning::Attr(x, left), Meaning::Attr(y, right)) if x == y => Meaning::Frame(Frame::Compare {
                            attr: x,
                            left,
                            right,
                            greater: args.first().map(String::as_str) == Some("greater"),
                        }),
                        _ => return Err(bad("SelectBetween needs two values of one attribute")),
                    },
                    (OpName::Intersection | OpName::Union, [a, b]) => match (get(*a)?, get(*b)?) {
                        (Meaning::Np(left), Meaning::Np(right)) => {
                            Meaning::Frame(Frame::SetOp { union: *op == OpName::Union, left, right })
                        }
                        _ => return Err(bad("set operations need two sets")),
                    },
                    _ => return Err(bad("unsupported operation shape")),
                }
            }
        };
        meanings.push(meaning);
    }
    match meanings.pop() {
        Some(Meaning::Np(np)) if !np.is_simple() => Ok(Frame::AskEntity(np)),
        Some(Meaning::Attr(attr, np)) => Ok(Frame::AskAttr(attr, np)),
        Some(Meaning::Frame(f)) => Ok(f),
        _ => Err(bad("atoms do not compose into a question")),
    }
}

impl QuestionGenerator for TemplateGenerator {
    fn generate(&self, serialized_atoms: &str) -> Result<(Question, f64), DecomposeError> {
        let ar = deserialize_atoms(serialized_atoms)?;
        let atoms = ar
            .atoms()
            .iter()
            .map(|q| parse_atom(&q.render()))
            .collect::<Result<Vec<_>, _>>()?;
        let text = compose_atoms(&atoms)?.render();
        let q = parse_question(&text).map_err(|e| DecomposeError::Compose(e.to_string()))?;
        Ok((q, self.likelihood))
    }
}
