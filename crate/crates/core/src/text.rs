//! Sentence segmentation, tokenization and substring normalization.
//!
//! Every scorer in the crate goes through [`tokenize`], so ROUGE-1, BM25 and
//! the reader features all agree on what a token is: a maximal run of
//! alphanumeric characters, with apostrophes and hyphens kept when they sit
//! between two alphanumerics, lowercased.

use std::collections::{HashMap, HashSet};
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("failed to read abbreviation list {path}: {source}")]
    Abbreviations {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Sentences of one document together with their byte spans in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceList {
    text: String,
    sentences: Vec<String>,
    spans: Vec<Range<usize>>,
}

impl SentenceList {
    /// The document the sentences were cut from.
    pub fn source(&self) -> &str {
        &self.text
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    /// Byte ranges into [`SentenceList::source`], strictly increasing and
    /// separated only by whitespace.
    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&str> {
        self.sentences.get(index).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(String::as_str)
    }
}

/// Rule-based splitter: a sentence ends at `.`, `!` or `?` (plus any closing
/// quotes or brackets) when whitespace follows and the next visible character
/// opens a new sentence. Known abbreviations and single-letter initials never
/// end a sentence.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: HashSet<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Self::from_list(DEFAULT_ABBREVIATIONS)
    }
}

impl Segmenter {
    /// Builds a segmenter from a list with one abbreviation per line.
    /// Blank lines and `#` comments are skipped; a trailing period is optional.
    pub fn from_list(list: &str) -> Self {
        let abbreviations = list
            .lines()
            .map(str::trim)
            .filter(|line| !line.is_empty() && !line.starts_with('#'))
            .map(|line| line.trim_end_matches('.').to_lowercase())
            .collect();
        Self { abbreviations }
    }

    pub fn from_file(path: &Path) -> Result<Self, TextError> {
        let list = std::fs::read_to_string(path).map_err(|source| TextError::Abbreviations {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::from_list(&list))
    }

    pub fn abbreviation_count(&self) -> usize {
        self.abbreviations.len()
    }

    pub fn split(&self, text: &str) -> Result<SentenceList, TextError> {
        if text.trim().is_empty() {
            return Err(TextError::EmptyDocument);
        }
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut spans = Vec::new();
        let mut start: Option<usize> = None;
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if start.is_none() {
                if c.is_whitespace() {
                    i += 1;
                    continue;
                }
                start = Some(pos);
            }
            if !is_terminator(c) {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < chars.len() && is_terminator(chars[j].1) {
                j += 1;
            }
            while j < chars.len() && is_closer(chars[j].1) {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            if self.is_boundary(text, &chars, i, j) {
                spans.push(start.take().unwrap_or(pos)..end);
            }
            i = j;
        }
        if let Some(s) = start {
            let end = s + text[s..].trim_end().len();
            if end > s {
                spans.push(s..end);
            }
        }
        let sentences = spans.iter().map(|r| text[r.clone()].to_string()).collect();
        Ok(SentenceList {
            text: text.to_string(),
            sentences,
            spans,
        })
    }

    // `term` indexes the first terminator, `after` the first char past the
    // terminator run and closers.
    fn is_boundary(&self, text: &str, chars: &[(usize, char)], term: usize, after: usize) -> bool {
        let Some(&(_, next)) = chars.get(after) else {
            return false;
        };
        if !next.is_whitespace() {
            return false;
        }
        let Some(&(_, opener)) = chars[after..].iter().find(|(_, c)| !c.is_whitespace()) else {
            return false;
        };
        if !(opener.is_uppercase() || opener.is_ascii_digit() || is_opener(opener)) {
            return false;
        }
        let single_period = chars[term].1 == '.' && (after == term + 1 || !is_terminator(chars[term + 1].1));
        if !single_period {
            return true;
        }
        // decimal numbers: digit '.' digit
        if term > 0
            && chars[term - 1].1.is_ascii_digit()
            && chars.get(term + 1).is_some_and(|(_, c)| c.is_ascii_digit())
        {
            return false;
        }
        let dot = chars[term].0;
        let word_start = text[..dot]
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_whitespace())
            .map_or(0, |(p, c)| p + c.len_utf8());
        let word = text[word_start..dot].trim_start_matches(|c: char| is_opener(c) || c == '(');
        if word.chars().count() == 1 && word.chars().all(char::is_alphabetic) {
            return false;
        }
        !self.abbreviations.contains(&word.to_lowercase())
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201d}' | '\u{2019}' | ')' | ']')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201c}' | '\u{2018}' | '(' | '[')
}

fn default_segmenter() -> &'static Segmenter {
    static SEGMENTER: OnceLock<Segmenter> = OnceLock::new();
    SEGMENTER.get_or_init(Segmenter::default)
}

/// Splits with the bundled abbreviation list.
pub fn split_sentences(text: &str) -> Result<SentenceList, TextError> {
    default_segmenter().split(text)
}

/// Ordered lowercase tokens of one sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        Self { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Multiset view: token -> occurrence count.
    pub fn counts(&self) -> HashMap<&str, usize> {
        let mut counts = HashMap::with_capacity(self.tokens.len());
        for t in &self.tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        counts
    }

    /// Adjacent token pairs in order.
    pub fn bigrams(&self) -> impl Iterator<Item = (&str, &str)> {
        self.tokens.windows(2).map(|w| (w[0].as_str(), w[1].as_str()))
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            tokens: iter.into_iter().map(Into::into).collect(),
        }
    }
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

/// Byte ranges of word runs in `text`, case untouched.
fn word_spans(text: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut j = i + 1;
        while j < chars.len() {
            let c = chars[j].1;
            if c.is_alphanumeric() {
                j += 1;
            } else if is_joiner(c) && chars.get(j + 1).is_some_and(|(_, n)| n.is_alphanumeric()) {
                j += 2;
            } else {
                break;
            }
        }
        let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
        spans.push(start..end);
        i = j;
    }
    spans
}

pub fn tokenize(sentence: &str) -> TokenSeq {
    let lower = sentence.to_lowercase();
    word_spans(&lower).into_iter().map(|r| lower[r].to_string()).collect()
}

/// Lowercased tokens whose raw form starts with an uppercase letter.
pub fn capitalized_tokens(sentence: &str) -> Vec<String> {
    word_spans(sentence)
        .into_iter()
        .map(|r| &sentence[r])
        .filter(|w| w.chars().next().is_some_and(char::is_uppercase))
        .map(str::to_lowercase)
        .collect()
}

pub fn is_numeric_token(token: &str) -> bool {
    token.chars().any(|c| c.is_numeric())
}

/// Lowercases and collapses whitespace runs to one space.
pub fn normalize_for_substring(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn split(text: &str) -> Vec<String> {
        split_sentences(text).unwrap().sentences().to_vec()
    }

    #[test]
    fn two_plain_sentences() {
        assert_eq!(split("He left. She stayed."), vec!["He left.", "She stayed."]);
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(split("Mr. Smith arrived."), vec!["Mr. Smith arrived."]);
        assert_eq!(
            split("The U.S. Army left. Dr. Who stayed."),
            vec!["The U.S. Army left.", "Dr. Who stayed."]
        );
    }

    #[test]
    fn decimal_is_protected() {
        let s = split("Costs rose 3.5 percent. Then fell.");
        assert_eq!(s.len(), 2);
        assert!(s[0].contains("3.5"));
    }

    #[test]
    fn initials_and_lowercase_followers() {
        assert_eq!(
            split("J. Smith came. it was late."),
            vec!["J. Smith came. it was late."]
        );
        assert_eq!(
            split("Really?! Yes. \"Fine,\" he said."),
            vec!["Really?!", "Yes.", "\"Fine,\" he said."]
        );
    }

    #[test]
    fn closers_stay_with_their_sentence() {
        assert_eq!(
            split("He said \"go.\" Then left."),
            vec!["He said \"go.\"", "Then left."]
        );
    }

    #[test]
    fn no_terminator_is_one_sentence() {
        assert_eq!(split("  no punctuation here  "), vec!["no punctuation here"]);
    }

    #[test]
    fn empty_document_is_rejected() {
        assert!(matches!(split_sentences(" \n\t"), Err(TextError::EmptyDocument)));
    }

    #[test]
    fn custom_abbreviations() {
        let seg = Segmenter::from_list("# c\nabc.\n");
        assert_eq!(seg.abbreviation_count(), 1);
        assert_eq!(seg.split("See abc. Then go.").unwrap().len(), 1);
        assert!(Segmenter::default().abbreviation_count() >= 50);
    }

    #[test]
    fn tokenize_examples() {
        let toks = |s: &str| tokenize(s).tokens().to_vec();
        assert_eq!(
            toks("Hurricane Andrew headed west"),
            vec!["hurricane", "andrew", "headed", "west"]
        );
        assert_eq!(toks("165mph, gusting!"), vec!["165mph", "gusting"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("don't re-enter -- 'quoted'"), vec!["don't", "re-enter", "quoted"]);
    }

    #[test]
    fn capitalized_and_numeric() {
        assert_eq!(
            capitalized_tokens("In 1989 Andrew hit Miami"),
            vec!["in", "andrew", "miami"]
        );
        assert!(is_numeric_token("1989"));
        assert!(is_numeric_token("165mph"));
        assert!(!is_numeric_token("decades"));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_for_substring("Hello   World\n"), "hello world");
        assert_eq!(normalize_for_substring("A  B"), normalize_for_substring("a b"));
        assert_eq!(normalize_for_substring("A-B"), "a-b");
    }

    #[test]
    fn counts_match_tokens() {
        let t = tokenize("a b a c a");
        let c = t.counts();
        assert_eq!(c["a"], 3);
        assert_eq!(c.values().sum::<usize>(), t.len());
    }

    proptest! {
        #[test]
        fn spans_reconstruct_source(text in "[A-Za-z0-9 .!?\"'\n]{1,120}") {
            prop_assume!(!text.trim().is_empty());
            let list = split_sentences(&text).unwrap();
            prop_assert!(!list.is_empty());
            let mut prev_end = 0;
            let mut rebuilt = String::new();
            for (span, sentence) in list.spans().iter().zip(list.sentences()) {
                prop_assert!(span.start >= prev_end && span.end > span.start);
                prop_assert!(text[prev_end..span.start].trim().is_empty());
                prop_assert!(!sentence.trim().is_empty());
                rebuilt.push_str(&text[prev_end..span.end]);
                prev_end = span.end;
            }
            prop_assert!(text[prev_end..].trim().is_empty());
            rebuilt.push_str(&text[prev_end..]);
            prop_assert_eq!(rebuilt, text.clone());
            let total: usize = list.sentences().iter().map(String::len).sum();
            prop_assert!(total <= text.len());
        }

        #[test]
        fn resplitting_a_sentence_is_stable(text in "[A-Za-z0-9 .!?,]{1,120}") {
            prop_assume!(!text.trim().is_empty());
            for sentence in split_sentences(&text).unwrap().sentences() {
                prop_assert_eq!(split_sentences(sentence).unwrap().len(), 1);
            }
        }

        #[test]
        fn tokenize_ignores_case_and_spacing(text in "\\PC{0,60}") {
            prop_assert_eq!(tokenize(&text), tokenize(&normalize_for_substring(&text)));
        }

        #[test]
        fn tokens_are_clean(text in "\\PC{0,60}") {
            for t in tokenize(&text).iter() {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
                prop_assert_eq!(t.to_lowercase(), t);
            }
        }
    }
}
