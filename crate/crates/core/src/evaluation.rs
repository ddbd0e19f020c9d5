//! Gold-standard loading and micro-averaged precision / recall.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::registry::RegistryKind;

/// Expectation columns of a gold record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldField {
    Rnsr,
    Siren,
    Grid,
    Country,
}

impl GoldField {
    pub const ALL: [GoldField; 4] = [GoldField::Rnsr, GoldField::Siren, GoldField::Grid, GoldField::Country];

    pub fn as_str(self) -> &'static str {
        match self {
            GoldField::Rnsr => "rnsr",
            GoldField::Siren => "siren",
            GoldField::Grid => "grid",
            GoldField::Country => "country",
        }
    }

    /// The registry whose matcher fills this column, if one exists.
    pub fn registry(self) -> Option<RegistryKind> {
        match self {
            GoldField::Rnsr => Some(RegistryKind::Rnsr),
            GoldField::Grid => Some(RegistryKind::Grid),
            GoldField::Country => Some(RegistryKind::Country),
            GoldField::Siren => None,
        }
    }
}

impl From<RegistryKind> for GoldField {
    fn from(kind: RegistryKind) -> Self {
        match kind {
            RegistryKind::Country => GoldField::Country,
            RegistryKind::Grid => GoldField::Grid,
            RegistryKind::Rnsr => GoldField::Rnsr,
        }
    }
}

impl fmt::Display for GoldField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GoldField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GoldField::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown gold field `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub affiliation: String,
    pub expected: BTreeMap<GoldField, BTreeSet<String>>,
}

impl GoldRecord {
    pub fn expected(&self, field: GoldField) -> BTreeSet<String> {
        self.expected.get(&field).cloned().unwrap_or_default()
    }
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<GoldRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    parse_gold(value)
}

/// Parses a JSON array of gold records. Id columns may be absent, null, a
/// single string or a list of strings.
pub fn parse_gold(value: Value) -> Result<Vec<GoldRecord>> {
    let Value::Array(items) = value else {
        return Err(Error::Gold {
            index: 0,
            message: "gold file must be a JSON array".to_string(),
        });
    };
    items
        .into_iter()
        .enumerate()
        .map(|(index, item)| parse_record(item).map_err(|message| Error::Gold { index, message }))
        .collect()
}

fn parse_record(item: Value) -> std::result::Result<GoldRecord, String> {
    let Value::Object(map) = item else {
        return Err("not a JSON object".to_string());
    };
    let affiliation = match map.get("affiliation") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(Value::String(_)) => return Err("empty affiliation".to_string()),
        Some(_) => return Err("affiliation is not a string".to_string()),
        None => return Err("missing affiliation".to_string()),
    };
    let mut expected = BTreeMap::new();
    for field in GoldField::ALL {
        let ids = match map.get(field.as_str()) {
            None | Some(Value::Null) => BTreeSet::new(),
            Some(Value::String(s)) => std::iter::once(s.trim()).filter(|s| !s.is_empty()).map(str::to_string).collect(),
            Some(Value::Array(values)) => values
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.trim().to_string()),
                    other => Err(format!("`{field}` holds a non-string id: {other}")),
                })
                .filter(|r| r.as_ref().map_or(true, |s| !s.is_empty()))
                .collect::<std::result::Result<_, _>>()?,
            Some(other) => return Err(format!("`{field}` must be a string or a list, got {other}")),
        };
        expected.insert(field, ids);
    }
    Ok(GoldRecord { affiliation, expected })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordDiff {
    pub index: usize,
    pub affiliation: String,
    pub expected: BTreeSet<String>,
    pub predicted: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub registry: GoldField,
    pub records: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub errors: Vec<RecordDiff>,
}

impl MetricsReport {
    pub fn empty(registry: GoldField) -> Self {
        Self::from_counts(registry, 0, 0, 0, 0, Vec::new())
    }

    fn from_counts(registry: GoldField, records: usize, tp: usize, fp: usize, fn_: usize, errors: Vec<RecordDiff>) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        Self {
            registry,
            records,
            tp,
            fp,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            errors,
        }
    }
}

fn canonical(field: GoldField, id: &str) -> String {
    match field {
        GoldField::Country => id.trim().to_uppercase(),
        _ => id.trim().to_string(),
    }
}

/// Runs `matcher` over every gold record and micro-averages the set
/// differences between expected and predicted ids for `field`.
pub fn evaluate<F>(mut matcher: F, gold: &[GoldRecord], field: GoldField) -> MetricsReport
where
    F: FnMut(&str) -> BTreeSet<String>,
{
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut errors = Vec::new();
    for (index, record) in gold.iter().enumerate() {
        let expected: BTreeSet<String> = record.expected(field).iter().map(|id| canonical(field, id)).collect();
        let predicted: BTreeSet<String> = matcher(&record.affiliation).iter().map(|id| canonical(field, id)).collect();
        tp += expected.intersection(&predicted).count();
        fp += predicted.difference(&expected).count();
        fn_ += expected.difference(&predicted).count();
        if expected != predicted {
            errors.push(RecordDiff {
                index,
                affiliation: record.affiliation.clone(),
                expected,
                predicted,
            });
        }
    }
    MetricsReport::from_counts(field, gold.len(), tp, fp, fn_, errors)
}

/// Renders reports as a `matcher precision recall` table.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>9} {:>7}", "matcher", "precision", "recall");
    for r in reports {
        if r.records == 0 {
            let _ = writeln!(out, "{:<10} {:>9} {:>7}", r.registry.as_str(), "-", "-");
        } else {
            let _ = writeln!(out, "{:<10} {:>9.3} {:>7.3}", r.registry.as_str(), r.precision, r.recall);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn record(affiliation: &str, grid: &[&str]) -> GoldRecord {
        GoldRecord {
            affiliation: affiliation.to_string(),
            expected: BTreeMap::from([(GoldField::Grid, grid.iter().map(|s| s.to_string()).collect())]),
        }
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_record_example() {
        let gold = vec![record("one", &["a"]), record("two", &["c"])];
        let report = evaluate(
            |aff| if aff == "one" { set(&["a", "b"]) } else { set(&[]) },
            &gold,
            GoldField::Grid,
        );
        assert_eq!((report.tp, report.fp, report.fn_), (1, 1, 1));
        assert_eq!(report.precision, 0.5);
        assert_eq!(report.recall, 0.5);
        assert_eq!(report.errors.len(), 2);
    }

    #[test]
    fn perfect_and_empty_matchers() {
        let gold = vec![record("one", &["a"]), record("two", &["b", "c"]), record("three", &[])];
        let lookup: BTreeMap<String, BTreeSet<String>> =
            gold.iter().map(|r| (r.affiliation.clone(), r.expected(GoldField::Grid))).collect();
        let perfect = evaluate(|aff| lookup[aff].clone(), &gold, GoldField::Grid);
        assert_eq!((perfect.precision, perfect.recall), (1.0, 1.0));
        assert!(perfect.errors.is_empty());

        let silent = evaluate(|_| BTreeSet::new(), &gold, GoldField::Grid);
        assert_eq!((silent.precision, silent.recall), (1.0, 0.0));
    }

    #[test]
    fn country_codes_compare_case_insensitively() {
        let gold = vec![GoldRecord {
            affiliation: "Paris".to_string(),
            expected: BTreeMap::from([(GoldField::Country, set(&["fr"]))]),
        }];
        let report = evaluate(|_| set(&["FR"]), &gold, GoldField::Country);
        assert_eq!(report.tp, 1);
    }

    #[test]
    fn parses_lists_strings_and_absent_keys() {
        let gold = parse_gold(json!([
            {"affiliation": "Columbia University Medical Center, New York, USA", "grid": ["grid.239585.0"]},
            {"affiliation": "Nowhere", "rnsr": null},
            {"affiliation": "Paris", "country": "fr", "siren": []}
        ]))
        .unwrap();
        assert_eq!(gold.len(), 3);
        assert_eq!(gold[0].expected(GoldField::Grid), set(&["grid.239585.0"]));
        assert!(gold[1].expected.values().all(BTreeSet::is_empty));
        assert_eq!(gold[2].expected(GoldField::Country), set(&["fr"]));
        assert_eq!(gold[2].affiliation, "Paris");
    }

    #[test]
    fn malformed_record_names_index() {
        let err = parse_gold(json!([{"affiliation": "ok"}, {"grid": ["x"]}])).unwrap_err();
        assert!(matches!(err, Error::Gold { index: 1, .. }), "{err}");
        let err = parse_gold(json!([{"affiliation": "ok", "grid": [3]}])).unwrap_err();
        assert!(matches!(err, Error::Gold { index: 0, .. }));
        assert!(parse_gold(json!({"affiliation": "x"})).is_err());
    }

    #[test]
    fn table_shape() {
        let table = format_table(&[MetricsReport::empty(GoldField::Country)]);
        assert_eq!(table.lines().next().unwrap().split_whitespace().collect::<Vec<_>>(), ["matcher", "precision", "recall"]);
        assert!(table.contains("country"));
    }

    fn arb_ids() -> impl Strategy<Value = BTreeSet<String>> {
        prop::collection::btree_set("[a-e]", 0..4)
    }

    proptest! {
        #[test]
        fn counts_are_consistent(cases in prop::collection::vec((arb_ids(), arb_ids()), 0..20)) {
            let gold: Vec<GoldRecord> = cases
                .iter()
                .enumerate()
                .map(|(i, (e, _))| GoldRecord {
                    affiliation: i.to_string(),
                    expected: BTreeMap::from([(GoldField::Rnsr, e.clone())]),
                })
                .collect();
            let report = evaluate(|aff| cases[aff.parse::<usize>().unwrap()].1.clone(), &gold, GoldField::Rnsr);
            let sum_e: usize = cases.iter().map(|(e, _)| e.len()).sum();
            let sum_p: usize = cases.iter().map(|(_, p)| p.len()).sum();
            prop_assert_eq!(report.tp + report.fn_, sum_e);
            prop_assert_eq!(report.tp + report.fp, sum_p);
            prop_assert!((0.0..=1.0).contains(&report.precision));
            prop_assert!((0.0..=1.0).contains(&report.recall));
        }

        #[test]
        fn false_positive_swapped_into_false_negative(expected in arb_ids(), predicted in arb_ids(), extra in "[f-h]") {
            let gold_for = |e: &BTreeSet<String>| vec![GoldRecord {
                affiliation: "x".into(),
                expected: BTreeMap::from([(GoldField::Grid, e.clone())]),
            }];
            // `extra` predicted but not expected ...
            let mut with_fp = predicted.clone();
            with_fp.insert(extra.clone());
            let a = evaluate(|_| with_fp.clone(), &gold_for(&expected), GoldField::Grid);
            // ... versus expected but not predicted
            let mut expected_b = expected.clone();
            expected_b.insert(extra);
            let b = evaluate(|_| predicted.clone(), &gold_for(&expected_b), GoldField::Grid);
            prop_assert_eq!(a.tp, b.tp);
            prop_assert_eq!(a.fp, b.fp + 1);
            prop_assert_eq!(a.fn_ + 1, b.fn_);
        }
    }
}
