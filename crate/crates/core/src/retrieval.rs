//! Evidence retrieval: relevance scoring of premise sentences against one
//! hypothesis sentence and top-K selection in premise order.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::embeddings::{hypothesis_doc_id, premise_doc_id, EmbeddingStore};
use crate::fsio::Fnv1a;
use crate::text::{normalize_for_substring, tokenize, SentenceList, TokenSeq};

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("BM25 corpus is empty")]
    EmptyCorpus,
    #[error("premise has no sentences")]
    EmptyPremise,
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("no embedding stored for {doc_id} sentence {sentence}")]
    MissingEmbeddings { doc_id: String, sentence: usize },
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMethod {
    Rouge1,
    Bm25,
    EmbeddingCosine,
    Random,
}

impl RetrievalMethod {
    pub const ALL: [RetrievalMethod; 4] = [
        RetrievalMethod::Rouge1,
        RetrievalMethod::Bm25,
        RetrievalMethod::EmbeddingCosine,
        RetrievalMethod::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RetrievalMethod::Rouge1 => "rouge1",
            RetrievalMethod::Bm25 => "bm25",
            RetrievalMethod::EmbeddingCosine => "embedding_cosine",
            RetrievalMethod::Random => "random",
        }
    }
}

impl FromStr for RetrievalMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown retrieval method '{s}'"))
    }
}

impl std::fmt::Display for RetrievalMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which ROUGE-1 component ranks premise sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RougeVariant {
    /// Share of the premise sentence's tokens found in the hypothesis sentence.
    Precision,
    /// Share of the hypothesis sentence's tokens found in the premise sentence.
    Recall,
    #[default]
    F1,
}

impl FromStr for RougeVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "precision" => Ok(Self::Precision),
            "recall" => Ok(Self::Recall),
            "f1" => Ok(Self::F1),
            _ => Err(format!("unknown ROUGE variant '{s}'")),
        }
    }
}

impl RougeVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Precision => "precision",
            Self::Recall => "recall",
            Self::F1 => "f1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub method: RetrievalMethod,
    pub k: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub bm25_idf_epsilon: f64,
    pub random_seed: u64,
    #[serde(default)]
    pub rouge_variant: RougeVariant,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            method: RetrievalMethod::Rouge1,
            k: 5,
            bm25_k1: 1.5,
            bm25_b: 0.75,
            bm25_idf_epsilon: 0.25,
            random_seed: 42,
            rouge_variant: RougeVariant::F1,
        }
    }
}

impl RetrievalConfig {
    pub fn with_method(method: RetrievalMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let bad = |m: &str| Err(RetrievalError::InvalidConfig(m.to_string()));
        if self.k == 0 {
            return bad("K must be at least 1");
        }
        if !(self.bm25_k1.is_finite() && self.bm25_k1 >= 0.0) {
            return bad("bm25_k1 must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.bm25_b) {
            return bad("bm25_b must lie in [0, 1]");
        }
        if !(self.bm25_idf_epsilon.is_finite() && self.bm25_idf_epsilon > 0.0) {
            return bad("bm25_idf_epsilon must be > 0");
        }
        Ok(())
    }
}

/// Evidence chosen for one hypothesis sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSelection {
    pub hypothesis_index: usize,
    /// Strictly increasing premise sentence indices.
    pub evidence_indices: Vec<usize>,
    /// Relevance score of each selected index, aligned with `evidence_indices`.
    pub relevance_scores: Vec<f64>,
    pub is_substring: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScore {
    pub overlap: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn get(&self, variant: RougeVariant) -> f64 {
        match variant {
            RougeVariant::Precision => self.precision,
            RougeVariant::Recall => self.recall,
            RougeVariant::F1 => self.f1,
        }
    }
}

/// Clipped unigram overlap between `a` and `b`; precision is relative to `a`,
/// recall to `b`. All components are 0 when either side is empty.
pub fn rouge1(a: &TokenSeq, b: &TokenSeq) -> RougeScore {
    let counts_b = b.counts();
    let overlap: usize = a
        .counts()
        .iter()
        .map(|(t, &ca)| ca.min(counts_b.get(t).copied().unwrap_or(0)))
        .sum();
    if overlap == 0 {
        return RougeScore {
            overlap,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    // 2PR/(P+R) reduces to 2o/(|a|+|b|); one division keeps it correctly rounded.
    RougeScore {
        overlap,
        precision: overlap as f64 / a.len() as f64,
        recall: overlap as f64 / b.len() as f64,
        f1: (2 * overlap) as f64 / (a.len() + b.len()) as f64,
    }
}

pub fn rouge1_score(a: &TokenSeq, b: &TokenSeq) -> f64 {
    rouge1(a, b).f1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self {
            k1: 1.5,
            b: 0.75,
            epsilon: 0.25,
        }
    }
}

impl From<&RetrievalConfig> for Bm25Params {
    fn from(c: &RetrievalConfig) -> Self {
        Self {
            k1: c.bm25_k1,
            b: c.bm25_b,
            epsilon: c.bm25_idf_epsilon,
        }
    }
}

/// Okapi BM25 over a small in-memory corpus.
///
/// `idf(t) = ln((N - df + 0.5) / (df + 0.5))`; terms with negative idf get
/// `epsilon * mean idf` instead, the mean taken over every corpus term.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    term_freqs: Vec<HashMap<String, usize>>,
    doc_lens: Vec<usize>,
    avgdl: f64,
    idf: HashMap<String, f64>,
}

impl Bm25Index {
    pub fn new(corpus: &[TokenSeq], params: Bm25Params) -> Result<Self, RetrievalError> {
        if corpus.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let n = corpus.len() as f64;
        let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
        let mut term_freqs = Vec::with_capacity(corpus.len());
        for doc in corpus {
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in doc.iter() {
                *tf.entry(t.to_string()).or_insert(0) += 1;
            }
            for t in tf.keys() {
                *doc_freq.entry(t.clone()).or_insert(0) += 1;
            }
            term_freqs.push(tf);
        }
        let doc_lens: Vec<usize> = corpus.iter().map(TokenSeq::len).collect();
        let avgdl = doc_lens.iter().sum::<usize>() as f64 / n;

        let mut idf = HashMap::with_capacity(doc_freq.len());
        let mut idf_sum = 0.0;
        let mut negative = Vec::new();
        for (term, &df) in &doc_freq {
            let df = df as f64;
            let value = (n - df + 0.5).ln() - (df + 0.5).ln();
            idf_sum += value;
            if value < 0.0 {
                negative.push(term);
            }
            idf.insert(term.clone(), value);
        }
        if !doc_freq.is_empty() {
            let floor = params.epsilon * idf_sum / doc_freq.len() as f64;
            for term in negative {
                idf.insert(term.clone(), floor);
            }
        }
        Ok(Self {
            params,
            term_freqs,
            doc_lens,
            avgdl,
            idf,
        })
    }

    pub fn idf(&self, term: &str) -> f64 {
        self.idf.get(term).copied().unwrap_or(0.0)
    }

    pub fn scores(&self, query: &TokenSeq) -> Vec<f64> {
        let Bm25Params { k1, b, .. } = self.params;
        let mut scores = vec![0.0; self.doc_lens.len()];
        if self.avgdl == 0.0 {
            return scores;
        }
        for q in query.iter() {
            let idf = self.idf(q);
            for (score, (tf, &len)) in scores.iter_mut().zip(self.term_freqs.iter().zip(&self.doc_lens)) {
                let f = tf.get(q).copied().unwrap_or(0) as f64;
                *score += idf * (f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len as f64 / self.avgdl)));
            }
        }
        scores
    }
}

pub fn bm25_scores(query: &TokenSeq, corpus: &[TokenSeq], params: Bm25Params) -> Result<Vec<f64>, RetrievalError> {
    Ok(Bm25Index::new(corpus, params)?.scores(query))
}

pub fn cosine_score(u: &[f64], v: &[f64]) -> Result<f64, RetrievalError> {
    if u.len() != v.len() {
        return Err(RetrievalError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// True when the hypothesis sentence occurs verbatim in the premise, ignoring
/// case and whitespace differences.
pub fn substring_check(hyp_sentence: &str, premise_text: &str) -> bool {
    let needle = normalize_for_substring(hyp_sentence);
    !needle.is_empty() && normalize_for_substring(premise_text).contains(&needle)
}

/// Dense retrieval lookup for one pair.
#[derive(Debug, Clone, Copy)]
pub struct DenseContext<'a> {
    pub store: &'a EmbeddingStore,
    pub pair_id: &'a str,
}

/// Per-premise state reused across all hypothesis sentences of a sample.
#[derive(Debug, Clone)]
pub struct PremiseIndex<'a> {
    premise: &'a SentenceList,
    normalized: String,
    tokens: Vec<TokenSeq>,
    bm25: Option<Bm25Index>,
}

impl<'a> PremiseIndex<'a> {
    pub fn new(premise: &'a SentenceList, config: &RetrievalConfig) -> Result<Self, RetrievalError> {
        config.validate()?;
        if premise.is_empty() {
            return Err(RetrievalError::EmptyPremise);
        }
        let tokens: Vec<TokenSeq> = premise.iter().map(tokenize).collect();
        let bm25 = match config.method {
            RetrievalMethod::Bm25 => Some(Bm25Index::new(&tokens, config.into())?),
            _ => None,
        };
        Ok(Self {
            premise,
            normalized: normalize_for_substring(premise.source()),
            tokens,
            bm25,
        })
    }

    pub fn premise(&self) -> &SentenceList {
        self.premise
    }

    pub fn select(
        &self,
        hyp_index: usize,
        hyp_sentence: &str,
        config: &RetrievalConfig,
        dense: Option<DenseContext<'_>>,
    ) -> Result<EvidenceSelection, RetrievalError> {
        let needle = normalize_for_substring(hyp_sentence);
        if !needle.is_empty() && self.normalized.contains(&needle) {
            return Ok(EvidenceSelection {
                hypothesis_index: hyp_index,
                evidence_indices: Vec::new(),
                relevance_scores: Vec::new(),
                is_substring: true,
            });
        }
        let n = self.tokens.len();
        let k = config.k.min(n);
        if config.method == RetrievalMethod::Random {
            let mut rng = ChaCha8Rng::seed_from_u64(random_stream(
                config.random_seed,
                hyp_index,
                hyp_sentence,
                self.premise.source(),
            ));
            let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
            picked.sort_unstable();
            return Ok(EvidenceSelection {
                hypothesis_index: hyp_index,
                relevance_scores: vec![0.0; picked.len()],
                evidence_indices: picked,
                is_substring: false,
            });
        }
        let scores = self.relevance(hyp_index, hyp_sentence, config, dense)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        order.truncate(k);
        order.sort_unstable();
        Ok(EvidenceSelection {
            hypothesis_index: hyp_index,
            relevance_scores: order.iter().map(|&i| scores[i]).collect(),
            evidence_indices: order,
            is_substring: false,
        })
    }

    /// Relevance of every premise sentence to the hypothesis sentence.
    pub fn relevance(
        &self,
        hyp_index: usize,
        hyp_sentence: &str,
        config: &RetrievalConfig,
        dense: Option<DenseContext<'_>>,
    ) -> Result<Vec<f64>, RetrievalError> {
        let query = tokenize(hyp_sentence);
        match config.method {
            RetrievalMethod::Rouge1 => Ok(self
                .tokens
                .iter()
                .map(|p| rouge1(p, &query).get(config.rouge_variant))
                .collect()),
            RetrievalMethod::Bm25 => match &self.bm25 {
                Some(index) => Ok(index.scores(&query)),
                None => bm25_scores(&query, &self.tokens, config.into()),
            },
            RetrievalMethod::EmbeddingCosine => {
                let ctx = dense.ok_or_else(|| RetrievalError::MissingEmbeddings {
                    doc_id: "<no embedding store>".into(),
                    sentence: hyp_index,
                })?;
                let hyp_doc = hypothesis_doc_id(ctx.pair_id);
                let prem_doc = premise_doc_id(ctx.pair_id);
                let missing = |doc_id: &str, sentence| RetrievalError::MissingEmbeddings {
                    doc_id: doc_id.to_string(),
                    sentence,
                };
                let h = ctx
                    .store
                    .get(&hyp_doc, hyp_index)
                    .ok_or_else(|| missing(&hyp_doc, hyp_index))?;
                (0..self.tokens.len())
                    .map(|j| {
                        let p = ctx.store.get(&prem_doc, j).ok_or_else(|| missing(&prem_doc, j))?;
                        cosine_score(h, p)
                    })
                    .collect()
            }
            RetrievalMethod::Random => Ok(vec![0.0; self.tokens.len()]),
        }
    }
}

/// Scores the premise against one hypothesis sentence and keeps the top K,
/// ties going to the earlier premise sentence, returned in premise order.
pub fn select_evidence(
    hyp_index: usize,
    hyp_sentence: &str,
    premise: &SentenceList,
    config: &RetrievalConfig,
    dense: Option<DenseContext<'_>>,
) -> Result<EvidenceSelection, RetrievalError> {
    PremiseIndex::new(premise, config)?.select(hyp_index, hyp_sentence, config, dense)
}

fn random_stream(seed: u64, hyp_index: usize, hyp_sentence: &str, premise: &str) -> u64 {
    let mut h = Fnv1a::default();
    h.feed(&seed.to_le_bytes());
    h.feed(&(hyp_index as u64).to_le_bytes());
    h.feed(hyp_sentence.as_bytes());
    h.feed(&[0xff]);
    h.feed(premise.as_bytes());
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::split_sentences;
    use proptest::prelude::*;

    fn toks(s: &str) -> TokenSeq {
        tokenize(s)
    }

    #[test]
    fn rouge_examples() {
        let r = rouge1(&toks("x y z"), &toks("x y w"));
        assert_eq!(r.overlap, 2);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rouge1_score(&toks("a b"), &toks("b a")), 1.0);
        assert_eq!(rouge1_score(&toks("a b"), &toks("c d")), 0.0);
        assert_eq!(rouge1_score(&toks(""), &toks("c d")), 0.0);
    }

    #[test]
    fn rouge_clips_repeats() {
        let r = rouge1(&toks("a a a b"), &toks("a b b"));
        assert_eq!(r.overlap, 2);
        assert_eq!(r.precision, 0.5);
    }

    #[test]
    fn bm25_single_matching_doc() {
        let corpus = [toks("a b"), toks("a"), toks("c")];
        let s = bm25_scores(&toks("c"), &corpus, Bm25Params::default()).unwrap();
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 0.0);
        assert!(s[2] > 0.0);
    }

    #[test]
    fn bm25_absent_term_and_duplicates() {
        let corpus = [toks("a b"), toks("a b"), toks("c d e")];
        let base = bm25_scores(&toks("a c"), &corpus, Bm25Params::default()).unwrap();
        let more = bm25_scores(&toks("a c zzz"), &corpus, Bm25Params::default()).unwrap();
        assert_eq!(base, more);
        assert_eq!(base[0], base[1]);
        assert!(matches!(
            bm25_scores(&toks("a"), &[], Bm25Params::default()),
            Err(RetrievalError::EmptyCorpus)
        ));
    }

    #[test]
    fn bm25_negative_idf_is_floored() {
        // "a" is in 2 of 3 docs -> ln(1.5/2.5) < 0
        let corpus = [toks("a b"), toks("a"), toks("c")];
        let index = Bm25Index::new(&corpus, Bm25Params::default()).unwrap();
        let raw_b = (2.5f64 / 1.5).ln();
        let raw_a = (1.5f64 / 2.5).ln();
        let mean = (raw_a + 2.0 * raw_b) / 3.0;
        assert!((index.idf("a") - 0.25 * mean).abs() < 1e-15);
        assert_eq!(index.idf("b"), raw_b);
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_score(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_score(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_score(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            cosine_score(&[1.0], &[1.0, 2.0]),
            Err(RetrievalError::DimensionMismatch { left: 1, right: 2 })
        );
        assert_eq!(cosine_score(&[0.0, 0.0], &[1.0, 2.0]), Err(RetrievalError::ZeroVector));
    }

    #[test]
    fn substring_examples() {
        let premise = "The storm hit Miami. Winds reached 165mph.";
        assert!(substring_check("Winds reached 165mph.", premise));
        assert!(!substring_check("Winds reached 150mph.", premise));
        assert!(substring_check("winds   REACHED 165mph.", premise));
        assert!(!substring_check("Winds reached 165mph", "Winds reached 165 mph."));
    }

    #[test]
    fn fewer_sentences_than_k() {
        let premise = split_sentences("Alpha one. Beta two. Gamma three.").unwrap();
        let sel = select_evidence(0, "Delta four", &premise, &RetrievalConfig::default(), None).unwrap();
        assert_eq!(sel.evidence_indices, vec![0, 1, 2]);
        assert!(!sel.is_substring);
    }

    #[test]
    fn ties_prefer_earlier_sentences() {
        // sentences 1 and 3 tie for the second slot
        let premise = split_sentences("Red blue green. Red cat. Red dog. Red cat. Fish.").unwrap();
        let config = RetrievalConfig {
            k: 2,
            ..RetrievalConfig::default()
        };
        let sel = select_evidence(0, "red blue green cat", &premise, &config, None).unwrap();
        assert_eq!(sel.evidence_indices, vec![0, 1]);
        let s = &sel.relevance_scores;
        assert!(s[0] > s[1]);
    }

    #[test]
    fn verbatim_sentence_short_circuits_every_method() {
        let premise = split_sentences("Alpha one. Beta two.").unwrap();
        let store = EmbeddingStore::new();
        for method in RetrievalMethod::ALL {
            let config = RetrievalConfig::with_method(method);
            let dense = DenseContext {
                store: &store,
                pair_id: "p",
            };
            let sel = select_evidence(0, "Beta two.", &premise, &config, Some(dense)).unwrap();
            assert!(sel.is_substring);
            assert!(sel.evidence_indices.is_empty());
        }
    }

    #[test]
    fn dense_needs_vectors() {
        let premise = split_sentences("Alpha one. Beta two.").unwrap();
        let config = RetrievalConfig::with_method(RetrievalMethod::EmbeddingCosine);
        assert!(matches!(
            select_evidence(0, "Gamma", &premise, &config, None),
            Err(RetrievalError::MissingEmbeddings { .. })
        ));
        let mut store = EmbeddingStore::new();
        store.insert("p/hypothesis", 0, vec![1.0, 0.0]).unwrap();
        store.insert("p/premise", 0, vec![0.0, 1.0]).unwrap();
        let dense = DenseContext {
            store: &store,
            pair_id: "p",
        };
        assert_eq!(
            select_evidence(0, "Gamma", &premise, &config, Some(dense)),
            Err(RetrievalError::MissingEmbeddings {
                doc_id: "p/premise".into(),
                sentence: 1
            })
        );
        store.insert("p/premise", 1, vec![1.0, 0.1]).unwrap();
        let config = RetrievalConfig { k: 1, ..config };
        let sel = select_evidence(0, "Gamma", &premise, &config, Some(dense_of(&store))).unwrap();
        assert_eq!(sel.evidence_indices, vec![1]);
    }

    fn dense_of(store: &EmbeddingStore) -> DenseContext<'_> {
        DenseContext { store, pair_id: "p" }
    }

    #[test]
    fn config_validation() {
        let base = RetrievalConfig::default();
        assert!(base.validate().is_ok());
        for bad in [
            RetrievalConfig { k: 0, ..base.clone() },
            RetrievalConfig {
                bm25_b: 1.5,
                ..base.clone()
            },
            RetrievalConfig {
                bm25_k1: -1.0,
                ..base.clone()
            },
            RetrievalConfig {
                bm25_idf_epsilon: 0.0,
                ..base.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        assert_eq!(
            "embedding_cosine".parse::<RetrievalMethod>(),
            Ok(RetrievalMethod::EmbeddingCosine)
        );
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]).prop_map(str::to_string)
    }

    fn sentence() -> impl Strategy<Value = String> {
        prop::collection::vec(word(), 1..6).prop_map(|w| {
            let mut s = w.join(" ");
            s.push('.');
            let mut c = s.chars();
            let first = c.next().unwrap().to_uppercase().collect::<String>();
            first + c.as_str()
        })
    }

    proptest! {
        #[test]
        fn rouge_is_symmetric(a in prop::collection::vec(word(), 0..8), b in prop::collection::vec(word(), 0..8)) {
            let a = TokenSeq::new(a);
            let b = TokenSeq::new(b);
            prop_assert_eq!(rouge1_score(&a, &b), rouge1_score(&b, &a));
        }

        #[test]
        fn selection_is_ordered_and_deterministic(
            sentences in prop::collection::vec(sentence(), 1..12),
            hyp in prop::collection::vec(word(), 1..6),
            k in 1usize..7,
            seed in any::<u64>(),
            method in prop::sample::select(vec![RetrievalMethod::Rouge1, RetrievalMethod::Bm25, RetrievalMethod::Random]),
        ) {
            let premise = split_sentences(&sentences.join(" ")).unwrap();
            let hyp = hyp.join(" ") + " zz";
            let config = RetrievalConfig { method, k, random_seed: seed, ..RetrievalConfig::default() };
            let a = select_evidence(0, &hyp, &premise, &config, None).unwrap();
            let b = select_evidence(0, &hyp, &premise, &config, None).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.evidence_indices.len(), k.min(premise.len()));
            prop_assert!(a.evidence_indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(a.evidence_indices.iter().all(|&i| i < premise.len()));
        }
    }
}
