//! Strategy-driven matching over a [`RegistryIndex`].
//!
//! A strategy is a conjunction of criteria: an entry matches when every
//! criterion index percolates the input to it. Strategy groups are tried in
//! order; all strategies of a group run, their results are merged and
//! sub-matches are dropped. The first group with a non-empty result wins.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{normalize, slice_chars, terms, AnalyzerSpec};
use crate::error::{Error, Result};
use crate::percolator::Span;
use crate::registry::{CriterionCatalog, RegistryIndex, RegistryKind};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Strategy {
    pub criteria: Vec<String>,
}

impl Strategy {
    pub fn new<I, S>(criteria: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            criteria: criteria.into_iter().map(Into::into).collect(),
        }
    }

    pub fn validate(&self, catalog: &CriterionCatalog) -> Result<()> {
        if self.criteria.is_empty() {
            return Err(Error::Config("empty strategy".to_string()));
        }
        let mut seen = BTreeSet::new();
        for criterion in &self.criteria {
            if !catalog.contains(criterion) {
                return Err(Error::UnknownCriterion(criterion.clone()));
            }
            if !seen.insert(criterion) {
                return Err(Error::Config(format!("criterion `{criterion}` repeated in one strategy")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrategyGroup {
    pub strategies: Vec<Strategy>,
}

impl StrategyGroup {
    pub fn new(strategies: impl IntoIterator<Item = Strategy>) -> Self {
        Self {
            strategies: strategies.into_iter().collect(),
        }
    }
}

/// Ordered strategy groups for one registry, safest group first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub registry: RegistryKind,
    pub groups: Vec<StrategyGroup>,
}

const DEFAULT_COUNTRY: &str = include_str!("../configs/country.json");
const DEFAULT_GRID: &str = include_str!("../configs/grid.json");
const DEFAULT_RNSR: &str = include_str!("../configs/rnsr.json");

impl MatchConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Shipped configuration for `registry`.
    pub fn default_for(registry: RegistryKind) -> Self {
        let json = match registry {
            RegistryKind::Country => DEFAULT_COUNTRY,
            RegistryKind::Grid => DEFAULT_GRID,
            RegistryKind::Rnsr => DEFAULT_RNSR,
        };
        Self::from_json(json).expect("shipped match configs parse")
    }

    pub fn validate(&self, catalog: &CriterionCatalog) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Config("no strategy groups".to_string()));
        }
        for group in &self.groups {
            if group.strategies.is_empty() {
                return Err(Error::Config("empty strategy group".to_string()));
            }
            for strategy in &group.strategies {
                strategy.validate(catalog)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub criterion: String,
    pub value: String,
}

impl Condition {
    pub fn new(criterion: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            criterion: criterion.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub registry_id: String,
    pub evidence: BTreeMap<String, BTreeSet<Span>>,
    pub matched_by: BTreeSet<Strategy>,
}

impl MatchResult {
    fn merge(&mut self, other: MatchResult) {
        for (criterion, spans) in other.evidence {
            self.evidence.entry(criterion).or_default().extend(spans);
        }
        self.matched_by.extend(other.matched_by);
    }
}

type CriterionHits = BTreeMap<String, BTreeSet<Span>>;

/// Per-call memo so a criterion shared by several strategies is percolated once.
#[derive(Default)]
struct Percolations {
    by_criterion: HashMap<String, CriterionHits>,
}

pub struct Matcher<'a> {
    index: &'a RegistryIndex,
    catalog: &'a CriterionCatalog,
}

impl<'a> Matcher<'a> {
    pub fn new(index: &'a RegistryIndex, catalog: &'a CriterionCatalog) -> Self {
        Self { index, catalog }
    }

    pub fn registry(&self) -> RegistryKind {
        self.index.registry
    }

    /// Entries matched on every criterion of `strategy`, sorted by id.
    pub fn run_strategy(&self, strategy: &Strategy, input: &str, conditions: &[Condition]) -> Result<Vec<MatchResult>> {
        strategy.validate(self.catalog)?;
        self.validate_conditions(conditions)?;
        let results = self.run_strategy_with(strategy, input, &mut Percolations::default());
        Ok(self.filter_by_conditions(results, conditions))
    }

    /// Tries the groups of `config` in order; see the module docs.
    pub fn match_affiliation(
        &self,
        input: &str,
        conditions: &[Condition],
        config: &MatchConfig,
    ) -> Result<Vec<MatchResult>> {
        if config.registry != self.index.registry {
            return Err(Error::Config(format!(
                "configuration targets `{}` but the index holds `{}`",
                config.registry, self.index.registry
            )));
        }
        config.validate(self.catalog)?;
        self.validate_conditions(conditions)?;

        let mut cache = Percolations::default();
        for group in &config.groups {
            let mut merged: BTreeMap<String, MatchResult> = BTreeMap::new();
            for strategy in &group.strategies {
                let found = self.run_strategy_with(strategy, input, &mut cache);
                for result in self.filter_by_conditions(found, conditions) {
                    match merged.get_mut(&result.registry_id) {
                        Some(existing) => existing.merge(result),
                        None => {
                            merged.insert(result.registry_id.clone(), result);
                        }
                    }
                }
            }
            let filtered = filter_submatches(merged.into_values().collect(), input);
            if !filtered.is_empty() {
                return Ok(filtered);
            }
        }
        Ok(Vec::new())
    }

    /// Keeps results whose entry satisfies every condition.
    pub fn apply_conditions(&self, results: Vec<MatchResult>, conditions: &[Condition]) -> Result<Vec<MatchResult>> {
        self.validate_conditions(conditions)?;
        Ok(self.filter_by_conditions(results, conditions))
    }

    fn validate_conditions(&self, conditions: &[Condition]) -> Result<()> {
        match conditions.iter().find(|c| !self.catalog.contains(&c.criterion)) {
            Some(c) => Err(Error::UnknownCriterion(c.criterion.clone())),
            None => Ok(()),
        }
    }

    fn filter_by_conditions(&self, results: Vec<MatchResult>, conditions: &[Condition]) -> Vec<MatchResult> {
        if conditions.is_empty() {
            return results;
        }
        let wanted: Vec<(&str, String)> = conditions
            .iter()
            .map(|c| (c.criterion.as_str(), normalize(&c.value)))
            .collect();
        results
            .into_iter()
            .filter(|result| {
                let Some(entry) = self.index.entry(&result.registry_id) else {
                    return false;
                };
                wanted
                    .iter()
                    .all(|(criterion, value)| entry.values(criterion).iter().any(|v| normalize(v) == *value))
            })
            .collect()
    }

    fn run_strategy_with(&self, strategy: &Strategy, input: &str, cache: &mut Percolations) -> Vec<MatchResult> {
        let mut candidates: Option<BTreeMap<String, BTreeMap<String, BTreeSet<Span>>>> = None;
        for criterion in &strategy.criteria {
            let hits = self.percolate(criterion, input, cache);
            candidates = Some(match candidates {
                None => hits
                    .iter()
                    .map(|(id, spans)| (id.clone(), BTreeMap::from([(criterion.clone(), spans.clone())])))
                    .collect(),
                Some(mut acc) => {
                    acc.retain(|id, _| hits.contains_key(id));
                    for (id, evidence) in acc.iter_mut() {
                        evidence.insert(criterion.clone(), hits[id].clone());
                    }
                    acc
                }
            });
            if candidates.as_ref().is_some_and(BTreeMap::is_empty) {
                break;
            }
        }
        candidates
            .unwrap_or_default()
            .into_iter()
            .map(|(registry_id, evidence)| MatchResult {
                registry_id,
                evidence,
                matched_by: BTreeSet::from([strategy.clone()]),
            })
            .collect()
    }

    fn percolate<'c>(&self, criterion: &str, input: &str, cache: &'c mut Percolations) -> &'c CriterionHits {
        cache.by_criterion.entry(criterion.to_string()).or_insert_with(|| {
            let mut by_id: CriterionHits = BTreeMap::new();
            if let Some(index) = self.index.index(criterion) {
                for hit in index.percolate(input) {
                    for id in &hit.query_doc.ids {
                        by_id.entry(id.clone()).or_default().extend(hit.matched_spans.iter().copied());
                    }
                }
            }
            by_id
        })
    }
}

/// A contiguous run of matched tokens, as standard-analyzed terms.
type Region = Vec<String>;

/// Groups a criterion's spans into runs not separated by any token, then
/// keeps only runs not contained in a longer run.
fn regions(spans: &BTreeSet<Span>, input: &str) -> BTreeSet<Region> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for span in spans {
        match runs.last_mut() {
            Some((_, end)) if span.start <= *end || slice_chars(input, *end, span.start).chars().all(|c| !c.is_alphanumeric()) => {
                *end = (*end).max(span.end);
            }
            _ => runs.push((span.start, span.end)),
        }
    }
    let all: BTreeSet<Region> = runs
        .into_iter()
        .map(|(s, e)| terms(&slice_chars(input, s, e), &AnalyzerSpec::standard()))
        .filter(|r| !r.is_empty())
        .collect();
    all.iter()
        .filter(|r| !all.iter().any(|other| other != *r && contains(other, r)))
        .cloned()
        .collect()
}

fn contains(outer: &[String], inner: &[String]) -> bool {
    inner.len() <= outer.len() && outer.windows(inner.len()).any(|w| w == inner)
}

type Evidence = BTreeMap<String, BTreeSet<Region>>;

/// `lower` is covered criterion by criterion by `upper`.
fn covered(lower: &Evidence, upper: &Evidence) -> bool {
    lower.iter().all(|(criterion, regions)| {
        upper
            .get(criterion)
            .is_some_and(|theirs| regions.iter().all(|r| theirs.iter().any(|t| contains(t, r))))
    })
}

/// Removes every result whose evidence is strictly contained in another
/// result's evidence. Results with identical evidence are all kept.
pub fn filter_submatches(results: Vec<MatchResult>, input: &str) -> Vec<MatchResult> {
    let evidence: Vec<Evidence> = results
        .iter()
        .map(|r| r.evidence.iter().map(|(c, spans)| (c.clone(), regions(spans, input))).collect())
        .collect();
    let dominated = |b: usize| {
        (0..results.len()).any(|a| a != b && covered(&evidence[b], &evidence[a]) && evidence[a] != evidence[b])
    };
    let keep: Vec<bool> = (0..results.len()).map(|i| !dominated(i)).collect();
    let mut out: Vec<MatchResult> = results.into_iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect();
    out.sort_by(|a, b| a.registry_id.cmp(&b.registry_id));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    pub evidence: BTreeMap<String, Vec<EvidenceSpan>>,
    pub strategies: Vec<Vec<String>>,
}

/// Serialized form of one match call, shared by the CLI and the HTTP service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOutput {
    pub input: String,
    pub registry: RegistryKind,
    pub results: Vec<ResultRecord>,
}

impl MatchOutput {
    pub fn new(input: &str, registry: RegistryKind, results: &[MatchResult]) -> Self {
        let results = results
            .iter()
            .map(|r| ResultRecord {
                id: r.registry_id.clone(),
                evidence: r
                    .evidence
                    .iter()
                    .map(|(criterion, spans)| {
                        let spans = spans
                            .iter()
                            .map(|s| EvidenceSpan {
                                start: s.start,
                                end: s.end,
                                text: slice_chars(input, s.start, s.end),
                            })
                            .collect();
                        (criterion.clone(), spans)
                    })
                    .collect(),
                strategies: r.matched_by.iter().map(|s| s.criteria.clone()).collect(),
            })
            .collect();
        Self {
            input: input.to_string(),
            registry,
            results,
        }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.results.iter().map(|r| r.id.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("match output serializes")
    }
}
