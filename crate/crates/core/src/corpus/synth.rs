//! Template-built corpus with complete sentence-level gold.
//!
//! Every premise sentence names one of a handful of document entities and
//! years. Hypothesis sentences paraphrase one premise sentence, or merge
//! two, by swapping words for synonyms that never occur in premises, so no
//! hypothesis sentence is a verbatim substring of its premise. A corrupted
//! sentence additionally swaps its year or entity for a value foreign to the
//! document.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AnnotatedSample, AnnotatedSentence, CorpusError, DocPair, Label};
use crate::retrieval::rouge1;
use crate::text::{normalize_for_substring, split_sentences, tokenize};

const ENTITIES: &[&str] = &[
    "Okafor",
    "Lindqvist",
    "Marchetti",
    "Haldane",
    "Vasquez",
    "Brennan",
    "Takahashi",
    "Olsen",
    "Petrov",
    "Achebe",
    "Moreau",
    "Castellano",
    "Whitfield",
    "Nakamura",
    "Ferreira",
    "Kowalski",
    "Abernathy",
    "Delacroix",
    "Osei",
    "Halvorsen",
    "Iverson",
    "Quintero",
    "Radcliffe",
    "Sorensen",
    "Trevino",
    "Underwood",
    "Valdivia",
    "Wexler",
    "Yamamoto",
    "Zielinski",
    "Armitage",
    "Bellamy",
    "Carrington",
    "Donnelly",
    "Eriksen",
    "Fairbanks",
    "Gallagher",
    "Hollis",
    "Ingram",
    "Jorgensen",
    "Kessler",
    "Lockhart",
    "Mbeki",
    "Northcott",
    "Ortega",
    "Pemberton",
    "Ravensworth",
    "Sandoval",
    "Thornbury",
    "Ulrich",
];

/// (premise word, synonym used only in hypotheses)
const VERBS: &[(&str, &str)] = &[
    ("acquired", "purchased"),
    ("repaired", "restored"),
    ("inspected", "examined"),
    ("delivered", "shipped"),
    ("designed", "drafted"),
    ("painted", "coated"),
    ("funded", "financed"),
    ("measured", "gauged"),
    ("assembled", "constructed"),
    ("catalogued", "indexed"),
    ("photographed", "filmed"),
    ("relocated", "moved"),
    ("insured", "covered"),
    ("donated", "gifted"),
    ("renovated", "refurbished"),
    ("auctioned", "sold"),
];

const ADJECTIVES: &[(&str, &str)] = &[
    ("large", "big"),
    ("small", "little"),
    ("ancient", "antique"),
    ("modern", "contemporary"),
    ("wooden", "timber"),
    ("bright", "vivid"),
    ("quiet", "silent"),
    ("heavy", "weighty"),
    ("narrow", "slim"),
    ("broad", "wide"),
    ("fragile", "delicate"),
    ("rare", "scarce"),
    ("famous", "renowned"),
    ("damaged", "broken"),
    ("elegant", "graceful"),
    ("rusty", "corroded"),
];

const NOUNS: &[(&str, &str)] = &[
    ("painting", "canvas"),
    ("bridge", "viaduct"),
    ("engine", "motor"),
    ("manuscript", "codex"),
    ("statue", "sculpture"),
    ("vessel", "ship"),
    ("clock", "timepiece"),
    ("carpet", "rug"),
    ("telescope", "spyglass"),
    ("cabinet", "cupboard"),
    ("lantern", "lamp"),
    ("tapestry", "hanging"),
    ("carriage", "coach"),
    ("organ", "harmonium"),
    ("archive", "repository"),
    ("fountain", "spring"),
];

const PLACES: &[(&str, &str)] = &[
    ("harbor", "port"),
    ("museum", "gallery"),
    ("warehouse", "depot"),
    ("cathedral", "minster"),
    ("library", "reading room"),
    ("factory", "plant"),
    ("garden", "park"),
    ("station", "terminal"),
    ("market", "bazaar"),
    ("university", "college"),
    ("castle", "fortress"),
    ("village", "hamlet"),
];

const PREPOSITIONS: &[&str] = &[
    "near", "behind", "inside", "beside", "outside", "above", "below", "across",
];

const FIRST_YEAR: u32 = 1901;
const LAST_YEAR: u32 = 2023;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    /// Probability that a document contains corrupted sentences.
    pub corruption_rate: f64,
    pub seed: u64,
    /// Inclusive range of premise sentence counts.
    pub premise_sentences: (usize, usize),
    /// Inclusive range of hypothesis sentence counts.
    pub hypothesis_sentences: (usize, usize),
    /// Probability that a hypothesis sentence merges two premise sentences.
    pub merge_rate: f64,
    /// Distinct entities used within one document.
    pub entity_pool: usize,
    /// Distinct years used within one document.
    pub number_pool: usize,
    /// Upper bound on corrupted sentences in a corrupted document.
    pub max_corrupted: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            train: 2000,
            dev: 500,
            test: 500,
            corruption_rate: 0.5,
            seed: 42,
            premise_sentences: (8, 40),
            hypothesis_sentences: (3, 8),
            merge_rate: 0.3,
            entity_pool: 2,
            number_pool: 1,
            max_corrupted: 2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.train == 0 || self.dev == 0 || self.test == 0 {
            return Err("split sizes must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.corruption_rate) || !(0.0..=1.0).contains(&self.merge_rate) {
            return Err("rates must lie in [0, 1]".into());
        }
        let (pl, ph) = self.premise_sentences;
        let (hl, hh) = self.hypothesis_sentences;
        if pl < 2 || pl > ph || hl < 1 || hl > hh {
            return Err("sentence count ranges must be non-empty, premises need at least 2".into());
        }
        if self.entity_pool == 0 || self.entity_pool >= ENTITIES.len() {
            return Err(format!("entity_pool must lie in 1..{}", ENTITIES.len()));
        }
        let years = (LAST_YEAR - FIRST_YEAR + 1) as usize;
        if self.number_pool == 0 || self.number_pool >= years {
            return Err(format!("number_pool must lie in 1..{years}"));
        }
        if self.max_corrupted == 0 {
            return Err("max_corrupted must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSplit {
    pub pairs: Vec<DocPair>,
    pub gold: Vec<AnnotatedSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub train: SyntheticSplit,
    pub dev: SyntheticSplit,
    pub test: SyntheticSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    /// `E verb the adj noun prep the place in YEAR`
    SubjectFirst,
    /// `In YEAR, E verb the adj noun prep the place`
    YearFirst,
    /// `The adj noun prep the place was verb by E in YEAR`
    Passive,
}

#[derive(Debug, Clone)]
struct Clause {
    layout: Layout,
    entity: String,
    year: u32,
    verb: usize,
    adj: usize,
    noun: usize,
    prep: usize,
    place: usize,
    /// Synonym flags for verb, adjective, noun, place.
    swapped: [bool; 4],
}

impl Clause {
    fn render(&self) -> String {
        let pick = |table: &[(&'static str, &'static str)], i: usize, k: usize| {
            if self.swapped[k] {
                table[i].1
            } else {
                table[i].0
            }
        };
        let (e, y) = (&self.entity, self.year);
        let v = pick(VERBS, self.verb, 0);
        let a = pick(ADJECTIVES, self.adj, 1);
        let n = pick(NOUNS, self.noun, 2);
        let pl = pick(PLACES, self.place, 3);
        let p = PREPOSITIONS[self.prep];
        match self.layout {
            Layout::SubjectFirst => format!("{e} {v} the {a} {n} {p} the {pl} in {y}"),
            Layout::YearFirst => format!("In {y}, {e} {v} the {a} {n} {p} the {pl}"),
            Layout::Passive => format!("The {a} {n} {p} the {pl} was {v} by {e} in {y}"),
        }
    }

    /// Rendering used after a comma, keeping proper nouns capitalized.
    fn render_continuation(&self) -> String {
        let s = self.render();
        match self.layout {
            Layout::SubjectFirst => s,
            Layout::YearFirst | Layout::Passive => {
                let mut c = s.chars();
                let first = c.next().expect("non-empty clause");
                first.to_lowercase().chain(c).collect()
            }
        }
    }
}

struct DocContext {
    entities: Vec<String>,
    years: Vec<u32>,
}

fn random_clause(rng: &mut ChaCha8Rng, doc: &DocContext) -> Clause {
    let layout = *[Layout::SubjectFirst, Layout::YearFirst, Layout::Passive]
        .choose(rng)
        .expect("layouts");
    Clause {
        layout,
        entity: doc.entities.choose(rng).expect("entity pool").clone(),
        year: *doc.years.choose(rng).expect("year pool"),
        verb: rng.gen_range(0..VERBS.len()),
        adj: rng.gen_range(0..ADJECTIVES.len()),
        noun: rng.gen_range(0..NOUNS.len()),
        prep: rng.gen_range(0..PREPOSITIONS.len()),
        place: rng.gen_range(0..PLACES.len()),
        swapped: [false; 4],
    }
}

/// Swaps one or two of the four substitutable words.
fn paraphrase(rng: &mut ChaCha8Rng, clause: &Clause) -> Clause {
    let mut out = clause.clone();
    let count = rng.gen_range(1..=2);
    for k in rand::seq::index::sample(rng, 4, count) {
        out.swapped[k] = true;
    }
    out
}

/// Replaces the year or the entity with a value absent from the document.
fn corrupt(rng: &mut ChaCha8Rng, clause: &mut Clause, doc: &DocContext) {
    if rng.gen_bool(0.5) {
        loop {
            let y = rng.gen_range(FIRST_YEAR..=LAST_YEAR);
            if !doc.years.contains(&y) {
                clause.year = y;
                break;
            }
        }
    } else {
        loop {
            let e = *ENTITIES.choose(rng).expect("entities");
            if !doc.entities.iter().any(|d| d == e) {
                clause.entity = e.to_string();
                break;
            }
        }
    }
}

fn sample_doc(rng: &mut ChaCha8Rng, config: &SynthConfig) -> DocContext {
    let entities = rand::seq::index::sample(rng, ENTITIES.len(), config.entity_pool)
        .into_iter()
        .map(|i| ENTITIES[i].to_string())
        .collect();
    let span = (LAST_YEAR - FIRST_YEAR + 1) as usize;
    let years = rand::seq::index::sample(rng, span, config.number_pool)
        .into_iter()
        .map(|i| FIRST_YEAR + i as u32)
        .collect();
    DocContext { entities, years }
}

struct Generated {
    pair: DocPair,
    gold: AnnotatedSample,
}

fn generate_one(rng: &mut ChaCha8Rng, config: &SynthConfig, id: String) -> Result<Generated, CorpusError> {
    let doc = sample_doc(rng, config);
    let n_premise = rng.gen_range(config.premise_sentences.0..=config.premise_sentences.1);
    let mut premise_clauses: Vec<Clause> = Vec::with_capacity(n_premise);
    let mut rendered: Vec<String> = Vec::with_capacity(n_premise);
    while premise_clauses.len() < n_premise {
        let c = random_clause(rng, &doc);
        let s = format!("{}.", c.render());
        if !rendered.contains(&s) {
            premise_clauses.push(c);
            rendered.push(s);
        }
    }
    let premise = rendered.join(" ");

    let n_hyp = rng.gen_range(config.hypothesis_sentences.0..=config.hypothesis_sentences.1);
    let corrupted_doc = rng.gen_bool(config.corruption_rate);
    let corrupted: Vec<usize> = if corrupted_doc {
        let k = rng.gen_range(1..=config.max_corrupted.min(n_hyp));
        rand::seq::index::sample(rng, n_hyp, k).into_vec()
    } else {
        Vec::new()
    };

    let premise_norm = normalize_for_substring(&premise);
    let mut sentences = Vec::with_capacity(n_hyp);
    for h in 0..n_hyp {
        let is_corrupted = corrupted.contains(&h);
        let merge = rng.gen_bool(config.merge_rate);
        let mut sources: Vec<usize> = if merge {
            rand::seq::index::sample(rng, n_premise, 2).into_vec()
        } else {
            vec![rng.gen_range(0..n_premise)]
        };
        sources.sort_unstable();
        let mut clauses: Vec<Clause> = sources.iter().map(|&i| paraphrase(rng, &premise_clauses[i])).collect();
        if is_corrupted {
            let target = rng.gen_range(0..clauses.len());
            corrupt(rng, &mut clauses[target], &doc);
        }
        let text = match clauses.as_slice() {
            [one] => format!("{}.", one.render()),
            [a, b] => format!("{}, and {}.", a.render(), b.render_continuation()),
            _ => unreachable!("one or two sources"),
        };

        if premise_norm.contains(&normalize_for_substring(&text)) {
            return Err(CorpusError::InvalidAnnotation {
                id,
                message: format!("hypothesis sentence {h} is a substring of the premise"),
            });
        }
        let source_tokens = tokenize(
            &sources
                .iter()
                .map(|&i| rendered[i].as_str())
                .collect::<Vec<_>>()
                .join(" "),
        );
        let overlap = rouge1(&source_tokens, &tokenize(&text)).recall;
        if overlap < 0.5 {
            return Err(CorpusError::InvalidAnnotation {
                id,
                message: format!("hypothesis sentence {h} keeps only {overlap:.2} of its tokens"),
            });
        }
        sentences.push(AnnotatedSentence {
            text,
            label: if is_corrupted {
                Label::NotEntailment
            } else {
                Label::Entailment
            },
            evidence_groups: vec![sources],
        });
    }

    let hypothesis = sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
    let label = if corrupted.is_empty() {
        Label::Entailment
    } else {
        Label::NotEntailment
    };
    let gold = AnnotatedSample {
        id: id.clone(),
        label,
        hypothesis_sentences: sentences,
    };

    // The generator is only useful if the pipeline sees the same sentences.
    let split_err = |what: &str| CorpusError::InvalidAnnotation {
        id: id.clone(),
        message: format!("{what} does not split back into its generated sentences"),
    };
    let p = split_sentences(&premise).map_err(|_| split_err("premise"))?;
    if p.sentences() != rendered.as_slice() {
        return Err(split_err("premise"));
    }
    let hs = split_sentences(&hypothesis).map_err(|_| split_err("hypothesis"))?;
    if hs.len() != gold.hypothesis_sentences.len()
        || hs.iter().zip(&gold.hypothesis_sentences).any(|(a, b)| a != b.text)
    {
        return Err(split_err("hypothesis"));
    }
    gold.validate(Some(n_premise))?;

    Ok(Generated {
        pair: DocPair {
            id,
            hypothesis,
            premise,
            label: Some(label),
        },
        gold,
    })
}

fn generate_split(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    name: &str,
    size: usize,
) -> Result<SyntheticSplit, CorpusError> {
    let width = size.to_string().len().max(4);
    let mut pairs = Vec::with_capacity(size);
    let mut gold = Vec::with_capacity(size);
    for i in 0..size {
        let g = generate_one(rng, config, format!("{name}-{i:0width$}"))?;
        pairs.push(g.pair);
        gold.push(g.gold);
    }
    Ok(SyntheticSplit { pairs, gold })
}

/// Builds train, dev and test splits from one seeded stream.
pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticCorpus, CorpusError> {
    config.validate().map_err(|message| CorpusError::InvalidAnnotation {
        id: "<config>".into(),
        message,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(SyntheticCorpus {
        train: generate_split(&mut rng, config, "train", config.train)?,
        dev: generate_split(&mut rng, config, "dev", config.dev)?,
        test: generate_split(&mut rng, config, "test", config.test)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(rate: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            train: 60,
            dev: 20,
            test: 20,
            corruption_rate: rate,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn corruption_rate_extremes() {
        let clean = generate_synthetic(&small(0.0, 1)).unwrap();
        assert!(clean.train.pairs.iter().all(|p| p.label == Some(Label::Entailment)));
        let dirty = generate_synthetic(&small(1.0, 1)).unwrap();
        for split in [&dirty.train, &dirty.dev, &dirty.test] {
            assert!(split.pairs.iter().all(|p| p.label == Some(Label::NotEntailment)));
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(
            generate_synthetic(&small(0.5, 9)).unwrap(),
            generate_synthetic(&small(0.5, 9)).unwrap()
        );
        assert_ne!(
            generate_synthetic(&small(0.5, 9)).unwrap(),
            generate_synthetic(&small(0.5, 10)).unwrap()
        );
    }

    #[test]
    fn shapes_follow_config() {
        let c = small(0.5, 3);
        let corpus = generate_synthetic(&c).unwrap();
        assert_eq!(corpus.train.pairs.len(), 60);
        assert_eq!(corpus.dev.gold.len(), 20);
        for (pair, gold) in corpus.test.pairs.iter().zip(&corpus.test.gold) {
            assert_eq!(pair.id, gold.id);
            assert_eq!(pair.label, Some(gold.label));
            let n = split_sentences(&pair.premise).unwrap().len();
            assert!((8..=40).contains(&n));
            assert!((3..=8).contains(&gold.hypothesis_sentences.len()));
            gold.validate(Some(n)).unwrap();
            for s in &gold.hypothesis_sentences {
                assert!(!s.evidence_groups[0].is_empty() && s.evidence_groups[0].len() <= 2);
            }
        }
    }

    #[test]
    fn corrupted_values_are_foreign_to_the_premise() {
        let corpus = generate_synthetic(&small(1.0, 5)).unwrap();
        for (pair, gold) in corpus.train.pairs.iter().zip(&corpus.train.gold) {
            let premise: std::collections::HashSet<String> = tokenize(&pair.premise).tokens().iter().cloned().collect();
            for s in gold
                .hypothesis_sentences
                .iter()
                .filter(|s| s.label == Label::NotEntailment)
            {
                let foreign = tokenize(&s.text)
                    .iter()
                    .filter(|t| !premise.contains(*t))
                    .any(|t| t.chars().all(|c| c.is_ascii_digit()) || ENTITIES.iter().any(|e| e.to_lowercase() == t));
                assert!(foreign, "{}", s.text);
            }
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let c = SynthConfig {
            dev: 0,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&c).is_err());
    }
}
