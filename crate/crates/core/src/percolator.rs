//! Reverse search over stored queries.
//!
//! A [`CriterionIndex`] holds analyzed queries, each tagged with the registry
//! ids it evidences. Percolating an input string returns every stored query
//! the input satisfies together with the char spans of the input tokens that
//! satisfied it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalyzerSpec, Token};
use crate::error::{Error, Result};

/// How a stored query is satisfied.
///
/// `Bag` carries a signed percentage with search-engine semantics: `-p` lets
/// at most `floor(p% * n)` of the `n` unique terms be missing, a positive `p`
/// requires `floor(p% * n)` of them. At least one term is always required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QueryKind {
    #[serde(rename = "match_phrase")]
    Phrase,
    #[serde(rename = "match")]
    Bag { min_should_match: i32 },
}

impl QueryKind {
    pub const DEFAULT_MIN_SHOULD_MATCH: i32 = -20;

    pub fn bag() -> Self {
        QueryKind::Bag {
            min_should_match: Self::DEFAULT_MIN_SHOULD_MATCH,
        }
    }
}

/// Number of unique terms a bag query with `unique_terms` terms needs.
pub fn required_terms(unique_terms: usize, min_should_match: i32) -> usize {
    let pct = (min_should_match.unsigned_abs() as usize).min(100);
    let share = unique_terms * pct / 100;
    let required = if min_should_match < 0 {
        unique_terms - share
    } else {
        share
    };
    required.clamp(1, unique_terms.max(1))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoredQuery {
    #[serde(flatten)]
    pub kind: QueryKind,
    pub terms: Vec<String>,
    pub analyzer: String,
}

impl StoredQuery {
    /// Unique terms the input must contain; every term for a phrase.
    pub fn required(&self) -> usize {
        match self.kind {
            QueryKind::Phrase => self.terms.len(),
            QueryKind::Bag { min_should_match } => required_terms(self.terms.len(), min_should_match),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryDoc {
    pub criterion: String,
    pub query: StoredQuery,
    pub ids: BTreeSet<String>,
}

/// Char offsets `[start, end)` into a percolated input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl From<&Token> for Span {
    fn from(token: &Token) -> Self {
        Span {
            start: token.start_offset,
            end: token.end_offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PercolationHit<'a> {
    pub doc_index: usize,
    pub query_doc: &'a QueryDoc,
    pub matched_spans: BTreeSet<Span>,
}

#[derive(Serialize, Deserialize)]
struct IndexRepr {
    criterion: String,
    analyzer: AnalyzerSpec,
    docs: Vec<QueryDoc>,
}

/// One percolation index per criterion.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "IndexRepr", into = "IndexRepr")]
pub struct CriterionIndex {
    criterion: String,
    analyzer: AnalyzerSpec,
    docs: Vec<QueryDoc>,
    by_query: HashMap<(QueryKind, Vec<String>), usize>,
    // first term -> phrase docs
    phrase_heads: HashMap<String, Vec<usize>>,
    // any term -> bag docs
    bag_postings: HashMap<String, Vec<usize>>,
    percolations: AtomicU64,
}

impl CriterionIndex {
    pub fn new(criterion: impl Into<String>, analyzer: AnalyzerSpec) -> Self {
        Self {
            criterion: criterion.into(),
            analyzer,
            docs: Vec::new(),
            by_query: HashMap::new(),
            phrase_heads: HashMap::new(),
            bag_postings: HashMap::new(),
            percolations: AtomicU64::new(0),
        }
    }

    pub fn criterion(&self) -> &str {
        &self.criterion
    }

    pub fn analyzer(&self) -> &AnalyzerSpec {
        &self.analyzer
    }

    pub fn docs(&self) -> &[QueryDoc] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// How many times [`percolate`](Self::percolate) has run on this index.
    pub fn percolation_count(&self) -> u64 {
        self.percolations.load(Ordering::Relaxed)
    }

    /// Analyzes `value` with the index analyzer and stores it.
    pub fn add_value<I, S>(&mut self, value: &str, kind: QueryKind, ids: I) -> Result<usize>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let terms: Vec<String> = analyze(value, &self.analyzer).into_iter().map(|t| t.text).collect();
        if terms.is_empty() {
            return Err(Error::EmptyQuery {
                criterion: self.criterion.clone(),
                value: value.to_string(),
            });
        }
        self.store(QueryDoc {
            criterion: self.criterion.clone(),
            query: StoredQuery {
                kind,
                terms,
                analyzer: self.analyzer.name.clone(),
            },
            ids: ids.into_iter().map(Into::into).collect(),
        })
    }

    /// Stores an already analyzed query. Docs with the same kind and terms are
    /// merged by unioning their ids. Returns the doc's position.
    pub fn store(&mut self, mut doc: QueryDoc) -> Result<usize> {
        if doc.criterion != self.criterion {
            return Err(Error::CriterionMismatch {
                expected: self.criterion.clone(),
                found: doc.criterion,
            });
        }
        if doc.query.terms.is_empty() {
            return Err(Error::EmptyQuery {
                criterion: self.criterion.clone(),
                value: String::new(),
            });
        }
        if doc.ids.is_empty() {
            return Err(Error::EmptyIds {
                criterion: self.criterion.clone(),
            });
        }
        if matches!(doc.query.kind, QueryKind::Bag { .. }) {
            let mut seen = HashSet::new();
            doc.query.terms.retain(|t| seen.insert(t.clone()));
        }

        let key = (doc.query.kind, doc.query.terms.clone());
        if let Some(&existing) = self.by_query.get(&key) {
            self.docs[existing].ids.extend(doc.ids);
            return Ok(existing);
        }

        let slot = self.docs.len();
        match doc.query.kind {
            QueryKind::Phrase => self
                .phrase_heads
                .entry(doc.query.terms[0].clone())
                .or_default()
                .push(slot),
            QueryKind::Bag { .. } => {
                for term in &doc.query.terms {
                    self.bag_postings.entry(term.clone()).or_default().push(slot);
                }
            }
        }
        self.by_query.insert(key, slot);
        self.docs.push(doc);
        Ok(slot)
    }

    /// Every stored query `text` satisfies, ordered by doc position.
    pub fn percolate(&self, text: &str) -> Vec<PercolationHit<'_>> {
        self.percolations.fetch_add(1, Ordering::Relaxed);
        let tokens = analyze(text, &self.analyzer);

        let mut occurrences: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, token) in tokens.iter().enumerate() {
            occurrences.entry(token.text.as_str()).or_default().push(i);
        }

        let mut hits: BTreeMap<usize, BTreeSet<Span>> = BTreeMap::new();

        for (i, token) in tokens.iter().enumerate() {
            let Some(heads) = self.phrase_heads.get(&token.text) else {
                continue;
            };
            for &slot in heads {
                let terms = &self.docs[slot].query.terms;
                let window = tokens.get(i..i + terms.len());
                if window.is_some_and(|w| w.iter().zip(terms).all(|(t, q)| &t.text == q)) {
                    hits.entry(slot)
                        .or_default()
                        .extend(tokens[i..i + terms.len()].iter().map(Span::from));
                }
            }
        }

        let mut counts: HashMap<usize, usize> = HashMap::new();
        for term in occurrences.keys() {
            for &slot in self.bag_postings.get(*term).into_iter().flatten() {
                *counts.entry(slot).or_default() += 1;
            }
        }
        for (slot, count) in counts {
            let query = &self.docs[slot].query;
            if count >= query.required() {
                let spans = hits.entry(slot).or_default();
                for term in &query.terms {
                    for &i in occurrences.get(term.as_str()).into_iter().flatten() {
                        spans.insert(Span::from(&tokens[i]));
                    }
                }
            }
        }

        self.into_hits(hits)
    }

    /// Linear-scan reference for [`percolate`](Self::percolate): evaluates
    /// every stored query against the token stream independently.
    pub fn brute_force_percolate(&self, text: &str) -> Vec<PercolationHit<'_>> {
        let tokens = analyze(text, &self.analyzer);
        let mut hits = BTreeMap::new();
        for (slot, doc) in self.docs.iter().enumerate() {
            let terms = &doc.query.terms;
            let mut spans = BTreeSet::new();
            match doc.query.kind {
                QueryKind::Phrase => {
                    if tokens.len() >= terms.len() {
                        for start in 0..=tokens.len() - terms.len() {
                            if (0..terms.len()).all(|j| tokens[start + j].text == terms[j]) {
                                for token in &tokens[start..start + terms.len()] {
                                    spans.insert(Span::from(token));
                                }
                            }
                        }
                    }
                }
                QueryKind::Bag { min_should_match } => {
                    let unique: BTreeSet<&String> = terms.iter().collect();
                    let present = unique
                        .iter()
                        .filter(|term| tokens.iter().any(|t| &&t.text == *term))
                        .count();
                    if present >= required_terms(unique.len(), min_should_match) {
                        for token in &tokens {
                            if unique.contains(&token.text) {
                                spans.insert(Span::from(token));
                            }
                        }
                    }
                }
            }
            if !spans.is_empty() {
                hits.insert(slot, spans);
            }
        }
        self.into_hits(hits)
    }

    fn into_hits(&self, hits: BTreeMap<usize, BTreeSet<Span>>) -> Vec<PercolationHit<'_>> {
        hits.into_iter()
            .filter(|(_, spans)| !spans.is_empty())
            .map(|(doc_index, matched_spans)| PercolationHit {
                doc_index,
                query_doc: &self.docs[doc_index],
                matched_spans,
            })
            .collect()
    }
}

impl Clone for CriterionIndex {
    fn clone(&self) -> Self {
        let mut index = CriterionIndex::new(self.criterion.clone(), self.analyzer.clone());
        for doc in &self.docs {
            index.store(doc.clone()).expect("docs of a valid index re-store");
        }
        index
    }
}

impl TryFrom<IndexRepr> for CriterionIndex {
    type Error = Error;

    fn try_from(repr: IndexRepr) -> Result<Self> {
        let mut index = CriterionIndex::new(repr.criterion, repr.analyzer);
        for doc in repr.docs {
            index.store(doc)?;
        }
        Ok(index)
    }
}

impl From<CriterionIndex> for IndexRepr {
    fn from(index: CriterionIndex) -> Self {
        IndexRepr {
            criterion: index.criterion,
            analyzer: index.analyzer,
            docs: index.docs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn phrase_index(values: &[&str]) -> CriterionIndex {
        let mut index = CriterionIndex::new("grid_name", AnalyzerSpec::standard());
        for (i, v) in values.iter().enumerate() {
            index.add_value(v, QueryKind::Phrase, [format!("id{i}")]).unwrap();
        }
        index
    }

    #[test]
    fn required_counts() {
        // n - floor(0.2 n), by hand
        let expected = [1, 2, 3, 4, 4, 5, 6, 7, 8, 8, 9, 10, 11, 12, 12];
        for (n, want) in (1..=15).zip(expected) {
            assert_eq!(required_terms(n, -20), want, "n = {n}");
        }
        assert_eq!(required_terms(4, 100), 4);
        assert_eq!(required_terms(4, 50), 2);
        assert_eq!(required_terms(4, 0), 1);
        assert_eq!(required_terms(3, -100), 1);
    }

    #[test]
    fn shared_acronym_merges_ids() {
        let mut index = CriterionIndex::new("grid_acronym", AnalyzerSpec::acronym());
        index.add_value("IUN", QueryKind::Phrase, ["grid.257418.d"]).unwrap();
        index.add_value("IUN", QueryKind::Phrase, ["grid.489012.6"]).unwrap();
        assert_eq!(index.len(), 1);
        let ids: Vec<_> = index.docs()[0].ids.iter().map(String::as_str).collect();
        assert_eq!(ids, ["grid.257418.d", "grid.489012.6"]);

        let hits = index.percolate("Indiana University Northwest (iun), Gary");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].query_doc.ids.len(), 2);
    }

    #[test]
    fn bag_ministry_name_counts() {
        let mut index = CriterionIndex::new("grid_name", AnalyzerSpec::standard());
        index
            .add_value("Ministry of Higher Education and Research", QueryKind::bag(), ["grid.425729.f"])
            .unwrap();
        let query = &index.docs()[0].query;
        // ministry, of, higher, education, and, research
        assert_eq!(query.terms.len(), 6);
        assert_eq!(query.required(), 5);

        let input = "French Ministry of Higher Education, Research and Innovation, Paris, France";
        let hits = index.percolate(input);
        assert_eq!(hits.len(), 1);
        let matched: Vec<_> = hits[0]
            .matched_spans
            .iter()
            .map(|s| crate::analysis::slice_chars(input, s.start, s.end))
            .collect();
        assert_eq!(matched, ["Ministry", "of", "Higher", "Education", "Research", "and"]);
    }

    #[test]
    fn phrase_needs_adjacency() {
        let index = phrase_index(&["Hotel Dieu de France", "CHU Fort de France"]);
        let hits = index.percolate("Hotel Dieu de France Beirut Lebanon");
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].query_doc.query.terms, ["hotel", "dieu", "de", "france"]);
        assert!(index.percolate("Dieu Hotel de France").is_empty());
    }

    #[test]
    fn self_match_covers_every_token() {
        let text = "Columbia University Medical Center";
        let index = phrase_index(&[text]);
        let hits = index.percolate(text);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].matched_spans.len(), 4);
    }

    #[test]
    fn rejects_empty_values() {
        let mut index = CriterionIndex::new("grid_city", AnalyzerSpec::standard());
        let err = index.add_value(" - ", QueryKind::Phrase, ["x"]).unwrap_err();
        assert!(err.to_string().contains("grid_city"));
        assert!(err.to_string().contains("\" - \""));
        assert!(matches!(
            index.add_value("Paris", QueryKind::Phrase, Vec::<String>::new()),
            Err(Error::EmptyIds { .. })
        ));
    }

    #[test]
    fn empty_index_has_no_hits() {
        let index = CriterionIndex::new("grid_city", AnalyzerSpec::standard());
        assert!(index.percolate("Paris").is_empty());
        assert!(index.brute_force_percolate("Paris").is_empty());
    }

    #[test]
    fn bag_duplicate_terms_are_counted_once() {
        let mut index = CriterionIndex::new("rnsr_name", AnalyzerSpec::standard());
        index
            .add_value("Institut des Géosciences de l'Environnement", QueryKind::bag(), ["ige"])
            .unwrap();
        let q = &index.docs()[0].query;
        assert_eq!(q.terms, ["institut", "des", "geosciences", "de", "l", "environnement"]);
    }

    #[test]
    fn serde_roundtrip_rebuilds_postings() {
        let index = phrase_index(&["Paris", "New York"]);
        let json = serde_json::to_string(&index).unwrap();
        let back: CriterionIndex = serde_json::from_str(&json).unwrap();
        assert_eq!(back.docs(), index.docs());
        assert_eq!(back.percolate("in New York"), index.percolate("in New York"));
    }

    const VOCAB: &[&str] = &["a", "b", "c", "d", "e", "f"];

    fn arb_doc() -> impl Strategy<Value = (bool, i32, Vec<usize>)> {
        (any::<bool>(), -60i32..=100, prop::collection::vec(0..VOCAB.len(), 1..5))
    }

    proptest! {
        #[test]
        fn fast_path_equals_scan(
            docs in prop::collection::vec(arb_doc(), 0..20),
            input in prop::collection::vec(0..VOCAB.len(), 0..15),
        ) {
            let mut index = CriterionIndex::new("c", AnalyzerSpec::standard());
            for (i, (phrase, msm, words)) in docs.iter().enumerate() {
                let text: Vec<_> = words.iter().map(|&w| VOCAB[w]).collect();
                let kind = if *phrase { QueryKind::Phrase } else { QueryKind::Bag { min_should_match: *msm } };
                index.add_value(&text.join(" "), kind, [i.to_string()]).unwrap();
            }
            let text: Vec<_> = input.iter().map(|&w| VOCAB[w]).collect();
            let text = text.join(", ");
            prop_assert_eq!(index.percolate(&text), index.brute_force_percolate(&text));
        }

        #[test]
        fn phrase_hits_imply_full_bag_hits(
            words in prop::collection::vec(0..VOCAB.len(), 1..5),
            input in prop::collection::vec(0..VOCAB.len(), 0..15),
        ) {
            let query: Vec<_> = words.iter().map(|&w| VOCAB[w]).collect();
            let mut phrase = CriterionIndex::new("c", AnalyzerSpec::standard());
            phrase.add_value(&query.join(" "), QueryKind::Phrase, ["x"]).unwrap();
            let mut bag = CriterionIndex::new("c", AnalyzerSpec::standard());
            bag.add_value(&query.join(" "), QueryKind::Bag { min_should_match: 100 }, ["x"]).unwrap();
            let text: Vec<_> = input.iter().map(|&w| VOCAB[w]).collect();
            let text = text.join(" ");
            if !phrase.percolate(&text).is_empty() {
                prop_assert!(!bag.percolate(&text).is_empty());
            }
        }

        #[test]
        fn appending_never_destroys_hits(
            docs in prop::collection::vec(arb_doc(), 1..10),
            input in prop::collection::vec(0..VOCAB.len(), 0..10),
            suffix in prop::collection::vec(0..VOCAB.len(), 0..5),
        ) {
            let mut index = CriterionIndex::new("c", AnalyzerSpec::standard());
            for (i, (phrase, msm, words)) in docs.iter().enumerate() {
                let text: Vec<_> = words.iter().map(|&w| VOCAB[w]).collect();
                let kind = if *phrase { QueryKind::Phrase } else { QueryKind::Bag { min_should_match: *msm } };
                index.add_value(&text.join(" "), kind, [i.to_string()]).unwrap();
            }
            let base: Vec<_> = input.iter().map(|&w| VOCAB[w]).collect();
            let longer: Vec<_> = input.iter().chain(&suffix).map(|&w| VOCAB[w]).collect();
            let before: BTreeSet<usize> = index.percolate(&base.join(" ")).iter().map(|h| h.doc_index).collect();
            let after: BTreeSet<usize> = index.percolate(&longer.join(" ")).iter().map(|h| h.doc_index).collect();
            prop_assert!(before.is_subset(&after));
        }
    }
}
