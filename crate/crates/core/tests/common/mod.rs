#![allow(dead_code)]

use std::path::PathBuf;

use affmatch::{CriterionCatalog, RegistryKind, Snapshot, Sources};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn sources(registry: RegistryKind) -> Sources {
    Sources {
        registry,
        entries: fixture(&format!("{registry}.jsonl")),
        geo: (registry == RegistryKind::Rnsr).then(|| fixture("geo.json")),
        grid: None,
    }
}

pub fn build(registry: RegistryKind) -> Snapshot {
    Snapshot::build(&sources(registry), CriterionCatalog::default()).expect("fixture builds")
}

/// Every field value of every entry, used to assemble random inputs.
pub fn vocabulary(snapshot: &Snapshot) -> Vec<String> {
    let mut values: Vec<String> = snapshot
        .index
        .entries()
        .flat_map(|e| e.fields.values().flatten().cloned())
        .collect();
    values.extend(
        ["Grenoble", "France", "USA", "Department of Chemistry", "and", "Université", "CNRS", "Beirut", "de"]
            .map(String::from),
    );
    values.sort();
    values.dedup();
    values
}
