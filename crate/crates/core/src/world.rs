//! Seeded generator of a small world: a knowledge base, a corpus that
//! verbalizes the same facts, and questions with gold answers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::format_amount;
use crate::dataset::{Dataset, DatasetQuestion, Split};
use crate::decompose::{build_hqdt, Decomposer, TemplateDecomposer, TemplateGenerator};
use crate::grammar::{attribute_sentence, parse_frame, relation_sentence, Attr, Cmp, Concept, Frame, Np, Relation};
use crate::kb::{AttributeFact, ConceptDecl, EntityDecl, KbData, RawValue, RelationFact};
use crate::text::{CorpusData, Paragraph};

pub const FAMILIES: [&str; 6] = ["multihop", "comparison", "logical", "count", "verify", "zero_shot"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub countries: usize,
    pub cities_per_country: usize,
    pub mountains_per_country: usize,
    pub rivers: usize,
    pub people_per_city: usize,
    pub painters: usize,
    pub paintings: usize,
    /// Questions per family except the zero-shot one.
    pub questions_per_family: usize,
    /// Zero-shot questions; they only appear in the dev split.
    pub zero_shot_questions: usize,
    pub dev_fraction: f64,
    /// Cases whose intermediate fact is only stated about the root entity.
    pub shortcut_cases: usize,
    pub families: Vec<String>,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            countries: 6,
            cities_per_country: 3,
            mountains_per_country: 3,
            rivers: 8,
            people_per_city: 3,
            painters: 36,
            paintings: 48,
            questions_per_family: 150,
            zero_shot_questions: 60,
            dev_fraction: 0.2,
            shortcut_cases: 24,
            families: FAMILIES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("unsatisfiable world spec: {0}")]
    Spec(String),
    #[error("could only generate {got} of {wanted} {family} questions")]
    Exhausted { family: String, wanted: usize, got: usize },
}

#[derive(Clone, Debug)]
pub struct Entity {
    pub name: String,
    pub concept: Concept,
}

#[derive(Clone, Debug)]
pub struct Fact {
    pub s: usize,
    pub rel: Relation,
    pub o: usize,
    /// Hidden facts are true in the world but absent from KB and corpus.
    pub hidden: bool,
}

#[derive(Clone, Debug)]
pub struct World {
    pub entities: Vec<Entity>,
    pub facts: Vec<Fact>,
    pub attrs: Vec<(usize, Attr, f64)>,
    /// (painting, city): "The painter of <painting> died in <city>."
    pub shortcuts: Vec<(usize, usize)>,
}

/// Everything `generate_synthetic_world` produces.
#[derive(Clone, Debug)]
pub struct GeneratedWorld {
    pub world: World,
    pub kb: KbData,
    pub corpus: CorpusData,
    pub dataset: Dataset,
    /// Questions whose middle hop is answerable only through the shortcut
    /// sentence of a mid-level question.
    pub shortcut: Dataset,
}

struct Namer {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
}

impl Namer {
    fn word(&mut self) -> String {
        const ONSETS: [&str; 20] =
            ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kr", "tr", "st", "sh"];
        const VOWELS: [&str; 8] = ["a", "e", "i", "o", "u", "ai", "ei", "ou"];
        const CODAS: [&str; 7] = ["", "", "n", "r", "l", "s", "m"];
        loop {
            let syllables = self.rng.gen_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(&mut self.rng).expect("non-empty"));
                w.push_str(VOWELS.choose(&mut self.rng).expect("non-empty"));
            }
            w.push_str(CODAS.choose(&mut self.rng).expect("non-empty"));
            let mut chars = w.chars();
            let first = chars.next().expect("non-empty").to_ascii_uppercase();
            let w = format!("{first}{}", chars.as_str());
            if !self.used.contains(&w) {
                return w;
            }
        }
    }

    fn name(&mut self, parts: usize, suffix: Option<&str>) -> String {
        loop {
            let mut n: Vec<String> = (0..parts).map(|_| self.word()).collect();
            if let Some(s) = suffix {
                n.push(s.to_string());
            }
            let n = n.join(" ");
            if self.used.insert(n.clone()) {
                return n;
            }
        }
    }

    fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }
}

/// Distinct integers drawn from `lo..hi`, avoiding `taken`.
fn distinct_values(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64, taken: &mut BTreeSet<i64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = rng.gen_range(lo..hi);
        if taken.insert(v) {
            out.push(v as f64);
        }
    }
    out
}

impl World {
    fn add(&mut self, name: String, concept: Concept) -> usize {
        self.entities.push(Entity { name, concept });
        self.entities.len() - 1
    }

    fn relate(&mut self, s: usize, rel: Relation, o: usize) {
        self.facts.push(Fact { s, rel, o, hidden: false });
    }

    pub fn by_name(&self, name: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.name == name)
    }

    fn of_concept(&self, c: Concept) -> Vec<usize> {
        (0..self.entities.len()).filter(|&e| self.entities[e].concept == c).collect()
    }

    fn objects(&self, s: usize, rel: Relation, with_hidden: bool) -> Vec<usize> {
        self.facts.iter().filter(|f| f.s == s && f.rel == rel && (with_hidden || !f.hidden)).map(|f| f.o).collect()
    }

    fn subjects(&self, o: usize, rel: Relation, with_hidden: bool) -> Vec<usize> {
        self.facts.iter().filter(|f| f.o == o && f.rel == rel && (with_hidden || !f.hidden)).map(|f| f.s).collect()
    }

    pub fn attr(&self, e: usize, attr: Attr) -> Option<f64> {
        self.attrs.iter().find(|(x, a, _)| *x == e && *a == attr).map(|(_, _, v)| *v)
    }

    pub fn value_surface(attr: Attr, v: f64) -> String {
        match attr.unit() {
            Some(u) => format!("{} {u}", format_amount(v)),
            None => format_amount(v),
        }
    }

    fn is_a(&self, e: usize, c: Concept) -> bool {
        let own = self.entities[e].concept;
        own == c || own.parent() == Some(c)
    }

    /// Entities denoted by a noun phrase, by direct scan of the facts.
    pub fn denote(&self, np: &Np, with_hidden: bool) -> Option<Vec<usize>> {
        let set = match np {
            Np::Named(n) => vec![self.by_name(n)?],
            Np::Ref(_) => return None,
            Np::Of { rel, subject } => {
                let mut out = BTreeSet::new();
                for s in self.denote(subject, with_hidden)? {
                    out.extend(self.objects(s, *rel, with_hidden));
                }
                out.into_iter().collect()
            }
            Np::Having { rel, concept, object } => {
                let objects = self.denote(object, with_hidden)?;
                let mut out = BTreeSet::new();
                for o in objects {
                    out.extend(self.subjects(o, *rel, with_hidden).into_iter().filter(|&s| self.is_a(s, *concept)));
                }
                out.into_iter().collect()
            }
            Np::Extreme { rel, concept, object, attr, largest } => {
                let members = self.denote(&Np::having(*rel, *concept, (**object).clone()), with_hidden)?;
                let mut scored = Vec::new();
                for m in members {
                    scored.push((self.attr(m, *attr)?, m));
                }
                let best = if *largest {
                    scored.iter().max_by(|a, b| a.0.total_cmp(&b.0))
                } else {
                    scored.iter().min_by(|a, b| a.0.total_cmp(&b.0))
                };
                vec![best?.1]
            }
            Np::Filtered { concept, attr, cmp, value } => {
                let target = crate::answer::AnswerValue::parse_surface(value);
                let t = match target {
                    crate::answer::AnswerValue::Quantity { amount, .. } | crate::answer::AnswerValue::Number { amount, .. } => amount,
                    _ => return None,
                };
                (0..self.entities.len())
                    .filter(|&e| self.is_a(e, *concept))
                    .filter(|&e| self.attr(e, *attr).is_some_and(|v| compare(v, *cmp, t)))
                    .collect()
            }
        };
        Some(set)
    }

    fn single(&self, np: &Np, with_hidden: bool) -> Option<usize> {
        match self.denote(np, with_hidden)?.as_slice() {
            [one] => Some(*one),
            _ => None,
        }
    }

    /// Gold answers of a question, or `None` when it has no well-defined
    /// answer in this world.
    pub fn gold(&self, frame: &Frame, with_hidden: bool) -> Option<Vec<String>> {
        let names = |es: Vec<usize>| es.into_iter().map(|e| self.entities[e].name.clone()).collect::<Vec<_>>();
        let out = match frame {
            Frame::AskEntity(np) => {
                let set = self.denote(np, with_hidden)?;
                if let Np::Of { rel, subject } = np {
                    if rel.is_functional() && !subject.is_set() && set.len() != 1 {
                        return None;
                    }
                }
                names(set)
            }
            Frame::AskAttr(attr, np) => {
                let e = self.single(np, with_hidden)?;
                vec![World::value_surface(*attr, self.attr(e, *attr)?)]
            }
            Frame::Count(np) => {
                let n = self.denote(np, with_hidden)?.len();
                vec![n.to_string()]
            }
            Frame::Verify { attr, np, cmp, value } => {
                let e = self.single(np, with_hidden)?;
                let v = self.attr(e, *attr)?;
                let t = match crate::answer::AnswerValue::parse_surface(value) {
                    crate::answer::AnswerValue::Quantity { amount, .. } | crate::answer::AnswerValue::Number { amount, .. } => amount,
                    _ => return None,
                };
                vec![if compare(v, *cmp, t) { "yes" } else { "no" }.to_string()]
            }
            Frame::Compare { attr, left, right, greater } => {
                let (a, b) = (self.single(left, with_hidden)?, self.single(right, with_hidden)?);
                let (va, vb) = (self.attr(a, *attr)?, self.attr(b, *attr)?);
                if a == b || va == vb {
                    return None;
                }
                let winner = if (va > vb) == *greater { a } else { b };
                vec![self.entities[winner].name.clone()]
            }
            Frame::SetOp { union, left, right } => {
                let l: BTreeSet<usize> = self.denote(left, with_hidden)?.into_iter().collect();
                let r: BTreeSet<usize> = self.denote(right, with_hidden)?.into_iter().collect();
                let set: Vec<usize> = if *union { l.union(&r).copied().collect() } else { l.intersection(&r).copied().collect() };
                names(set)
            }
        };
        if out.is_empty() || out.iter().any(|a| a == "0") {
            return None;
        }
        Some(out)
    }

    pub fn kb_data(&self) -> KbData {
        let concepts = Concept::ALL
            .iter()
            .map(|c| ConceptDecl { id: c.name().into(), name: c.name().into(), parent: c.parent().map(|p| p.name().into()) })
            .collect();
        let id = |e: usize| format!("Q{}", e + 1);
        KbData {
            entities: self
                .entities
                .iter()
                .enumerate()
                .map(|(i, e)| EntityDecl { id: id(i), name: e.name.clone(), concepts: vec![e.concept.name().into()] })
                .collect(),
            concepts,
            relations: self
                .facts
                .iter()
                .filter(|f| !f.hidden)
                .map(|f| RelationFact { s: id(f.s), p: f.rel.predicate().into(), o: id(f.o) })
                .collect(),
            attributes: self
                .attrs
                .iter()
                .map(|(e, a, v)| AttributeFact {
                    e: id(*e),
                    a: a.name().into(),
                    value: RawValue::Number(*v),
                    unit: a.unit().map(str::to_string),
                })
                .collect(),
            units: Vec::new(),
        }
    }

    pub fn corpus_data(&self) -> CorpusData {
        let mut paragraphs = Vec::with_capacity(self.entities.len());
        for (i, e) in self.entities.iter().enumerate() {
            let mut sentences = Vec::new();
            if e.concept == Concept::Country {
                sentences.push(format!("{} is a country.", e.name));
            }
            for f in self.facts.iter().filter(|f| f.s == i && !f.hidden) {
                sentences.push(relation_sentence(f.rel, &e.name, e.concept, &self.entities[f.o].name));
            }
            for (_, a, v) in self.attrs.iter().filter(|(x, _, _)| *x == i) {
                sentences.push(attribute_sentence(*a, &e.name, &World::value_surface(*a, *v)));
            }
            for (_, city) in self.shortcuts.iter().filter(|(p, _)| *p == i) {
                sentences.push(format!("The painter of {} died in {}.", e.name, self.entities[*city].name));
            }
            paragraphs.push(Paragraph { id: format!("p{:04}", i + 1), title: e.name.clone(), text: sentences.join(" ") });
        }
        CorpusData { paragraphs, question_sets: BTreeMap::new() }
    }
}

fn compare(v: f64, cmp: Cmp, t: f64) -> bool {
    match cmp {
        Cmp::Greater => v > t,
        Cmp::Less => v < t,
        Cmp::Equal => v == t,
        Cmp::NotEqual => v != t,
    }
}

fn check_spec(spec: &WorldSpec) -> Result<(), GenError> {
    let bad = |m: &str| Err(GenError::Spec(m.to_string()));
    if spec.countries == 0 || spec.cities_per_country == 0 {
        return bad("at least one country with one city is required");
    }
    if spec.cities_per_country > 3 || spec.mountains_per_country > 3 || spec.people_per_city > 3 {
        return bad("sets are limited to three members per container");
    }
    if spec.mountains_per_country * spec.countries < 3 {
        return bad("at least three mountains are required");
    }
    if spec.rivers < 2 || spec.rivers > 3 * spec.countries {
        return bad("between 2 and 3 rivers per country are supported");
    }
    let people = spec.countries * spec.cities_per_country * spec.people_per_city.max(1);
    if people < 3 || spec.painters > people {
        return bad("not enough people for the painters");
    }
    if spec.paintings < spec.painters || spec.paintings > 3 * spec.painters {
        return bad("each painter needs between one and three paintings");
    }
    if spec.shortcut_cases > spec.painters {
        return bad("each shortcut case needs its own painter");
    }
    if 3 * spec.countries * spec.cities_per_country < people {
        return bad("too many people for three deaths per city");
    }
    if !(0.0..1.0).contains(&spec.dev_fraction) {
        return bad("dev fraction must lie in [0, 1)");
    }
    if let Some(f) = spec.families.iter().find(|f| !FAMILIES.contains(&f.as_str())) {
        return Err(GenError::Spec(format!("unknown family {f:?}")));
    }
    Ok(())
}

fn build_world(spec: &WorldSpec, rng: &mut ChaCha8Rng) -> World {
    let mut namer = Namer { rng: ChaCha8Rng::seed_from_u64(rng.gen()), used: BTreeSet::new() };
    for n in ["Everest", "K2", "Makalu", "Nile River", "Amazon River", "Bronny James", "Bryce James", "Zhuri James"] {
        namer.reserve(n);
    }
    let mut w = World { entities: Vec::new(), facts: Vec::new(), attrs: Vec::new(), shortcuts: Vec::new() };

    let countries: Vec<usize> = (0..spec.countries).map(|_| {
        let n = namer.name(1, None);
        w.add(n, Concept::Country)
    }).collect();

    let mut cities = Vec::new();
    for &c in &countries {
        for _ in 0..spec.cities_per_country {
            let n = namer.name(1, None);
            let city = w.add(n, Concept::City);
            w.relate(city, Relation::LocatedIn, c);
            cities.push(city);
        }
    }
    let mut taken = BTreeSet::new();
    for (city, v) in cities.clone().into_iter().zip(distinct_values(rng, cities.len(), 1000, 99_000, &mut taken)) {
        w.attrs.push((city, Attr::Population, v));
    }

    let mut mountains = Vec::new();
    let fixture = [("Everest", 8848.0), ("K2", 8611.0), ("Makalu", 8516.0)];
    let mut taken: BTreeSet<i64> = fixture.iter().map(|(_, h)| *h as i64).collect();
    let total_mountains = spec.mountains_per_country * spec.countries;
    let mut heights = distinct_values(rng, total_mountains.saturating_sub(3), 3000, 8500, &mut taken).into_iter();
    for (ci, &c) in countries.iter().enumerate() {
        for mi in 0..spec.mountains_per_country {
            let slot = ci * spec.mountains_per_country + mi;
            let (name, h) = match fixture.get(slot) {
                Some((n, h)) => (n.to_string(), *h),
                None => (namer.name(1, None), heights.next().expect("enough heights")),
            };
            // The fixture mountains share the first country(ies) in order.
            let m = w.add(name, Concept::Mountain);
            w.relate(m, Relation::LocatedIn, c);
            w.attrs.push((m, Attr::Height, h));
            mountains.push(m);
        }
    }

    let mut through: HashMap<usize, usize> = HashMap::new();
    let mut taken: BTreeSet<i64> = [6670, 6440].into_iter().collect();
    let mut lengths = distinct_values(rng, spec.rivers.saturating_sub(2), 300, 6400, &mut taken).into_iter();
    for r in 0..spec.rivers {
        let (name, len) = match r {
            0 => ("Nile River".to_string(), 6670.0),
            1 => ("Amazon River".to_string(), 6440.0),
            _ => (namer.name(1, Some("River")), lengths.next().expect("enough lengths")),
        };
        let river = w.add(name, Concept::River);
        let hops = rng.gen_range(1..=2);
        let mut options: Vec<usize> = countries.iter().copied().filter(|c| through.get(c).copied().unwrap_or(0) < 3).collect();
        options.shuffle(rng);
        for &c in options.iter().take(hops) {
            *through.entry(c).or_default() += 1;
            w.relate(river, Relation::FlowsThrough, c);
        }
        w.attrs.push((river, Attr::Length, len));
    }

    let mut people = Vec::new();
    let fixture_people = ["Bronny James", "Bryce James", "Zhuri James"];
    for (ci, &city) in cities.iter().enumerate() {
        for pi in 0..spec.people_per_city {
            let name = if ci == 0 && pi < fixture_people.len() {
                fixture_people[pi].to_string()
            } else {
                namer.name(2, None)
            };
            let p = w.add(name, Concept::Person);
            w.relate(p, Relation::BornIn, city);
            people.push(p);
        }
    }
    if spec.people_per_city < 3 {
        // Keep the three fixture siblings together in the first city.
        for name in fixture_people.iter().skip(spec.people_per_city) {
            let p = w.add(name.to_string(), Concept::Person);
            w.relate(p, Relation::BornIn, cities[0]);
            people.push(p);
        }
    }
    let mut deaths: HashMap<usize, usize> = HashMap::new();
    for &p in &people {
        let mut options: Vec<usize> = cities.iter().copied().filter(|c| deaths.get(c).copied().unwrap_or(0) < 3).collect();
        options.shuffle(rng);
        if let Some(&c) = options.first() {
            *deaths.entry(c).or_default() += 1;
            w.relate(p, Relation::DiedIn, c);
        }
    }

    let mut painters = people.clone();
    painters.shuffle(rng);
    painters.truncate(spec.painters);
    painters.sort_unstable();
    let mut years = distinct_values(rng, spec.paintings, 1400, 2021, &mut BTreeSet::new()).into_iter();
    let mut works: Vec<(usize, usize)> = Vec::new();
    for i in 0..spec.paintings {
        let painter = if i < painters.len() {
            painters[i]
        } else {
            let open: Vec<usize> =
                painters.iter().copied().filter(|p| works.iter().filter(|(_, q)| q == p).count() < 3).collect();
            *open.choose(rng).expect("capacity checked")
        };
        let n = namer.name(2, None);
        let painting = w.add(n, Concept::Painting);
        w.relate(painting, Relation::PaintedBy, painter);
        w.attrs.push((painting, Attr::Inception, years.next().expect("enough years")));
        works.push((painting, painter));
    }

    // Shortcut cases: hide the painter's death place and state it only
    // about one of the paintings.
    for &painter in painters.iter().take(spec.shortcut_cases) {
        let Some(&(painting, _)) = works.iter().find(|(_, p)| *p == painter) else { continue };
        if let Some(f) = w.facts.iter_mut().find(|f| f.s == painter && f.rel == Relation::DiedIn) {
            f.hidden = true;
            w.shortcuts.push((painting, f.o));
        }
    }
    w
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    *items.choose(rng).expect("non-empty pool")
}

fn named(w: &World, e: usize) -> Np {
    Np::named(w.entities[e].name.clone())
}

/// A value near the entity's own value, formatted for a question.
fn nearby_value(rng: &mut ChaCha8Rng, attr: Attr, v: f64) -> (String, f64) {
    let t = match rng.gen_range(0..4) {
        0 => v,
        1 => v + (v * rng.gen_range(0.05..0.3)).round().max(1.0),
        _ => v - (v * rng.gen_range(0.05..0.3)).round().max(1.0),
    };
    (World::value_surface(attr, t), t)
}

struct Pools {
    countries: Vec<usize>,
    cities: Vec<usize>,
    mountains: Vec<usize>,
    rivers: Vec<usize>,
    people: Vec<usize>,
    painters: Vec<usize>,
    paintings: Vec<usize>,
}

impl Pools {
    fn new(w: &World) -> Self {
        let painters: BTreeSet<usize> =
            w.facts.iter().filter(|f| f.rel == Relation::PaintedBy).map(|f| f.o).collect();
        Pools {
            countries: w.of_concept(Concept::Country),
            cities: w.of_concept(Concept::City),
            mountains: w.of_concept(Concept::Mountain),
            rivers: w.of_concept(Concept::River),
            people: w.of_concept(Concept::Person),
            painters: painters.into_iter().collect(),
            paintings: w.of_concept(Concept::Painting),
        }
    }
}

fn sample_frame(family: &str, w: &World, p: &Pools, rng: &mut ChaCha8Rng) -> Frame {
    use Relation::*;
    match family {
        "multihop" => match rng.gen_range(0..7) {
            0 => Frame::AskAttr(Attr::Population, Np::of(BornIn, named(w, pick(rng, &p.people)))),
            1 => Frame::AskAttr(Attr::Population, Np::of(DiedIn, named(w, pick(rng, &p.people)))),
            2 => Frame::AskEntity(Np::of(LocatedIn, Np::of(BornIn, named(w, pick(rng, &p.people))))),
            3 => Frame::AskEntity(Np::of(DiedIn, Np::of(PaintedBy, named(w, pick(rng, &p.paintings))))),
            4 => Frame::AskEntity(Np::of(BornIn, Np::of(PaintedBy, named(w, pick(rng, &p.paintings))))),
            5 => Frame::AskEntity(Np::having(BornIn, Concept::Person, Np::of(DiedIn, named(w, pick(rng, &p.people))))),
            _ => Frame::AskEntity(Np::having(
                LocatedIn,
                Concept::Mountain,
                Np::of(LocatedIn, named(w, pick(rng, &p.mountains))),
            )),
        },
        "comparison" => {
            let greater = rng.gen_bool(0.5);
            let largest = rng.gen_bool(0.5);
            let two = |rng: &mut ChaCha8Rng, pool: &[usize]| {
                let v: Vec<usize> = pool.choose_multiple(rng, 2).copied().collect();
                (named(w, v[0]), named(w, v[1]))
            };
            match rng.gen_range(0..8) {
                0 => {
                    let (a, b) = two(rng, &p.mountains);
                    Frame::Compare { attr: Attr::Height, left: a, right: b, greater }
                }
                1 => {
                    let (a, b) = two(rng, &p.rivers);
                    Frame::Compare { attr: Attr::Length, left: a, right: b, greater }
                }
                2 => {
                    let (a, b) = two(rng, &p.cities);
                    Frame::Compare { attr: Attr::Population, left: a, right: b, greater }
                }
                3 => {
                    let (a, b) = two(rng, &p.paintings);
                    Frame::Compare { attr: Attr::Inception, left: a, right: b, greater }
                }
                4 => Frame::AskEntity(Np::extreme(LocatedIn, Concept::Mountain, named(w, pick(rng, &p.countries)), Attr::Height, largest)),
                5 => Frame::AskEntity(Np::extreme(LocatedIn, Concept::City, named(w, pick(rng, &p.countries)), Attr::Population, largest)),
                6 => Frame::AskEntity(Np::extreme(FlowsThrough, Concept::River, named(w, pick(rng, &p.countries)), Attr::Length, largest)),
                _ => Frame::AskEntity(Np::extreme(PaintedBy, Concept::Painting, named(w, pick(rng, &p.painters)), Attr::Inception, largest)),
            }
        }
        "logical" => match rng.gen_range(0..3) {
            0 => {
                let person = pick(rng, &p.people);
                let born = w.objects(person, BornIn, false);
                let died = w.objects(person, DiedIn, false);
                let (b, d) = (born.first().copied().unwrap_or(0), died.first().copied().unwrap_or(0));
                Frame::SetOp {
                    union: false,
                    left: Np::having(BornIn, Concept::Person, named(w, b)),
                    right: Np::having(DiedIn, Concept::Person, named(w, d)),
                }
            }
            1 => {
                let cs: Vec<usize> = p.cities.choose_multiple(rng, 2).copied().collect();
                Frame::SetOp {
                    union: true,
                    left: Np::having(BornIn, Concept::Person, named(w, cs[0])),
                    right: Np::having(BornIn, Concept::Person, named(w, cs[1])),
                }
            }
            _ => {
                let c = pick(rng, &p.countries);
                let c2 = pick(rng, &p.countries);
                Frame::SetOp {
                    union: rng.gen_bool(0.5),
                    left: Np::having(LocatedIn, Concept::City, named(w, c)),
                    right: Np::having(LocatedIn, Concept::City, named(w, c2)),
                }
            }
        },
        "count" => match rng.gen_range(0..9) {
            0 => Frame::Count(Np::having(BornIn, Concept::Person, named(w, pick(rng, &p.cities)))),
            1 => Frame::Count(Np::having(DiedIn, Concept::Person, named(w, pick(rng, &p.cities)))),
            2 => Frame::Count(Np::having(LocatedIn, Concept::Mountain, named(w, pick(rng, &p.countries)))),
            3 => Frame::Count(Np::having(FlowsThrough, Concept::River, named(w, pick(rng, &p.countries)))),
            4 => Frame::Count(Np::having(PaintedBy, Concept::Painting, named(w, pick(rng, &p.painters)))),
            5 => Frame::Count(Np::having(LocatedIn, Concept::City, named(w, pick(rng, &p.countries)))),
            6 => Frame::Count(Np::having(BornIn, Concept::Person, Np::of(DiedIn, named(w, pick(rng, &p.people))))),
            _ => {
                let (concept, attr, pool) = match rng.gen_range(0..4) {
                    0 => (Concept::Mountain, Attr::Height, &p.mountains),
                    1 => (Concept::City, Attr::Population, &p.cities),
                    2 => (Concept::River, Attr::Length, &p.rivers),
                    _ => (Concept::Painting, Attr::Inception, &p.paintings),
                };
                let v = w.attr(pick(rng, pool), attr).unwrap_or(0.0);
                let (cmp, t) = if rng.gen_bool(0.5) { (Cmp::Greater, v - 1.0) } else { (Cmp::Less, v + 1.0) };
                Frame::Count(Np::Filtered { concept, attr, cmp, value: World::value_surface(attr, t) })
            }
        },
        "verify" => {
            let cmp = [Cmp::Greater, Cmp::Less, Cmp::Equal, Cmp::NotEqual][rng.gen_range(0..4)];
            let (attr, np, e) = match rng.gen_range(0..4) {
                0 => {
                    let m = pick(rng, &p.mountains);
                    (Attr::Height, named(w, m), m)
                }
                1 => {
                    let c = pick(rng, &p.cities);
                    (Attr::Population, named(w, c), c)
                }
                2 => {
                    let x = pick(rng, &p.paintings);
                    (Attr::Inception, named(w, x), x)
                }
                _ => {
                    let person = pick(rng, &p.people);
                    let city = w.objects(person, BornIn, false).first().copied().unwrap_or(0);
                    (Attr::Population, Np::of(BornIn, named(w, person)), city)
                }
            };
            let (value, _) = nearby_value(rng, attr, w.attr(e, attr).unwrap_or(0.0));
            Frame::Verify { attr, np, cmp, value }
        }
        "zero_shot" => {
            let rel = if rng.gen_bool(0.5) { DiedIn } else { BornIn };
            Frame::AskAttr(Attr::Population, Np::of(rel, Np::of(PaintedBy, named(w, pick(rng, &p.paintings)))))
        }
        other => unreachable!("family {other} validated by the spec check"),
    }
}

/// Gold answers of every natural-language node below the root.
fn sub_answers(w: &World, question: &str) -> BTreeMap<String, Vec<String>> {
    let mut out = BTreeMap::new();
    let Ok(tree) = build_hqdt(question, &TemplateDecomposer::default(), &TemplateGenerator::default()) else {
        return out;
    };
    for node in tree.nodes().iter().skip(1) {
        if !node.question.is_natural_language() {
            continue;
        }
        let text = node.question.render();
        if let Some(gold) = parse_frame(&text).ok().and_then(|f| w.gold(&f, false)) {
            out.insert(text, gold);
        }
    }
    out
}

fn entry(id: String, question: String, answers: Vec<String>, split: Split, family: &str) -> DatasetQuestion {
    DatasetQuestion {
        id,
        question,
        answers,
        split,
        family: Some(family.to_string()),
        atoms: None,
        sub_answers: BTreeMap::new(),
        paragraphs: None,
    }
}

fn generate_family(
    family: &str,
    wanted: usize,
    w: &World,
    pools: &Pools,
    rng: &mut ChaCha8Rng,
    seen: &mut BTreeSet<String>,
) -> Result<Vec<(String, Vec<String>)>, GenError> {
    let mut out = Vec::with_capacity(wanted);
    let mut attempts = 0usize;
    while out.len() < wanted {
        attempts += 1;
        if attempts > 200 * wanted.max(1) {
            return Err(GenError::Exhausted { family: family.into(), wanted, got: out.len() });
        }
        let frame = sample_frame(family, w, pools, rng);
        let Some(gold) = w.gold(&frame, false) else { continue };
        let text = frame.render();
        if TemplateDecomposer::default().decompose(&text).is_err() || !seen.insert(text.clone()) {
            continue;
        }
        out.push((text, gold));
    }
    Ok(out)
}

pub fn generate_synthetic_world(spec: &WorldSpec, seed: u64) -> Result<GeneratedWorld, GenError> {
    check_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = build_world(spec, &mut rng);
    let pools = Pools::new(&world);
    let mut seen = BTreeSet::new();
    let mut questions = Vec::new();
    for family in FAMILIES.iter().filter(|f| spec.families.iter().any(|s| s == *f)) {
        let wanted = if *family == "zero_shot" { spec.zero_shot_questions } else { spec.questions_per_family };
        let mut items = generate_family(family, wanted, &world, &pools, &mut rng, &mut seen)?;
        items.shuffle(&mut rng);
        let dev_count = if *family == "zero_shot" { items.len() } else { (items.len() as f64 * spec.dev_fraction).round() as usize };
        for (i, (text, gold)) in items.into_iter().enumerate() {
            let split = if i < dev_count { Split::Dev } else { Split::Train };
            let mut q = entry(format!("{family}-{i:04}"), text, gold, split, family);
            if split == Split::Train {
                q.sub_answers = sub_answers(&world, &q.question);
            }
            questions.push(q);
        }
    }

    let mut shortcut = Vec::new();
    for (i, &(painting, city)) in world.shortcuts.iter().enumerate() {
        let frame = Frame::AskAttr(
            Attr::Population,
            Np::of(Relation::DiedIn, Np::of(Relation::PaintedBy, named(&world, painting))),
        );
        let gold = World::value_surface(Attr::Population, world.attr(city, Attr::Population).unwrap_or(0.0));
        shortcut.push(entry(format!("shortcut-{i:04}"), frame.render(), vec![gold], Split::Dev, "shortcut"));
    }

    let dataset = Dataset::new(questions).map_err(|e| GenError::Spec(e.to_string()))?;
    let shortcut = Dataset::new(shortcut).map_err(|e| GenError::Spec(e.to_string()))?;
    Ok(GeneratedWorld { kb: world.kb_data(), corpus: world.corpus_data(), world, dataset, shortcut })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> WorldSpec {
        WorldSpec { questions_per_family: 20, zero_shot_questions: 10, shortcut_cases: 4, ..Default::default() }
    }

    #[test]
    fn contains_the_fixture_values() {
        let g = generate_synthetic_world(&small_spec(), 42).unwrap();
        let w = &g.world;
        for (name, h) in [("Everest", 8848.0), ("K2", 8611.0), ("Makalu", 8516.0)] {
            assert_eq!(w.attr(w.by_name(name).unwrap(), Attr::Height), Some(h));
        }
        let first = Np::having(Relation::LocatedIn, Concept::Mountain, Np::of(Relation::LocatedIn, Np::named("Everest")));
        let names: Vec<String> = w.denote(&first, false).unwrap().into_iter().map(|e| w.entities[e].name.clone()).collect();
        assert_eq!(names, vec!["Everest", "K2", "Makalu"]);
        let city = w.objects(w.by_name("Bronny James").unwrap(), Relation::BornIn, false)[0];
        let count = Frame::Count(Np::having(Relation::BornIn, Concept::Person, named(w, city)));
        assert_eq!(w.gold(&count, false), Some(vec!["3".to_string()]));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic_world(&small_spec(), 7).unwrap();
        let b = generate_synthetic_world(&small_spec(), 7).unwrap();
        assert_eq!(serde_json::to_string(&a.kb).unwrap(), serde_json::to_string(&b.kb).unwrap());
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.dataset, b.dataset);
        let c = generate_synthetic_world(&small_spec(), 8).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn families_and_splits() {
        let g = generate_synthetic_world(&small_spec(), 3).unwrap();
        let mut per_family: BTreeMap<String, usize> = BTreeMap::new();
        for q in &g.dataset.questions {
            *per_family.entry(q.family.clone().unwrap()).or_default() += 1;
            if q.family.as_deref() == Some("zero_shot") {
                assert_eq!(q.split, Split::Dev);
            }
        }
        assert_eq!(per_family.len(), 6);
        assert_eq!(per_family["zero_shot"], 10);
        assert_eq!(g.dataset.split(Split::Dev).filter(|q| q.family.as_deref() == Some("count")).count(), 4);
        assert_eq!(g.shortcut.questions.len(), 4);
    }

    #[test]
    fn rejects_unsatisfiable_specs() {
        let bad = WorldSpec { countries: 0, ..Default::default() };
        assert!(matches!(generate_synthetic_world(&bad, 1), Err(GenError::Spec(_))));
        let bad = WorldSpec { shortcut_cases: 100, ..Default::default() };
        assert!(matches!(generate_synthetic_world(&bad, 1), Err(GenError::Spec(_))));
        let bad = WorldSpec { families: vec!["qualifier".into()], ..Default::default() };
        assert!(matches!(generate_synthetic_world(&bad, 1), Err(GenError::Spec(_))));
    }

    #[test]
    fn shortcut_facts_are_hidden_from_kb_and_corpus() {
        let g = generate_synthetic_world(&small_spec(), 5).unwrap();
        let hidden = g.world.facts.iter().filter(|f| f.hidden).count();
        assert_eq!(hidden, 4);
        let visible = g.world.facts.len() - hidden;
        assert_eq!(g.kb.relations.len(), visible);
        let text: String = g.corpus.paragraphs.iter().map(|p| p.text.clone()).collect::<Vec<_>>().join(" ");
        assert_eq!(text.matches("The painter of").count(), 4);
    }
}
