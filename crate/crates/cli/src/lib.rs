//! Command line and HTTP front-end for `affmatch`.

pub mod commands;
pub mod config;
pub mod http;

use std::collections::BTreeMap;
use std::path::Path;

use affmatch::{Condition, MatchConfig, MatchOutput, RegistryKind, Snapshot};
use anyhow::{Context, Result};

/// Snapshots and match configurations ready to serve queries.
pub struct Loaded {
    pub snapshots: BTreeMap<RegistryKind, Snapshot>,
    pub configs: BTreeMap<RegistryKind, MatchConfig>,
}

impl Loaded {
    /// Loads every `<registry>.snapshot.json` present in `build_dir`.
    pub fn from_dir(build_dir: &Path, configs: &BTreeMap<RegistryKind, MatchConfig>) -> Result<Self> {
        let mut snapshots = BTreeMap::new();
        for registry in RegistryKind::ALL {
            let path = Snapshot::path_in(build_dir, registry);
            if path.exists() {
                let snapshot = Snapshot::load(&path)?;
                snapshots.insert(registry, snapshot);
            }
        }
        let mut resolved = BTreeMap::new();
        for (registry, snapshot) in &snapshots {
            let config = configs
                .get(registry)
                .cloned()
                .unwrap_or_else(|| MatchConfig::default_for(*registry));
            config
                .validate(&snapshot.catalog)
                .with_context(|| format!("match configuration for {registry}"))?;
            resolved.insert(*registry, config);
        }
        Ok(Self {
            snapshots,
            configs: resolved,
        })
    }

    pub fn match_query(&self, registry: RegistryKind, query: &str, conditions: &[Condition]) -> Result<MatchOutput> {
        let snapshot = self
            .snapshots
            .get(&registry)
            .with_context(|| format!("no snapshot for registry `{registry}`"))?;
        let config = self
            .configs
            .get(&registry)
            .with_context(|| format!("no match configuration for registry `{registry}`"))?;
        match_one(snapshot, config, query, conditions)
    }
}

/// Runs one query; the CLI and the HTTP service both serialize this output.
pub fn match_one(snapshot: &Snapshot, config: &MatchConfig, query: &str, conditions: &[Condition]) -> Result<MatchOutput> {
    let results = snapshot.matcher().match_affiliation(query, conditions, config)?;
    Ok(MatchOutput::new(query, snapshot.registry(), &results))
}

/// Parses `criterion=value`.
pub fn parse_condition(raw: &str) -> Result<Condition, String> {
    match raw.split_once('=') {
        Some((criterion, value)) if !criterion.trim().is_empty() => Ok(Condition::new(criterion.trim(), value.trim())),
        _ => Err(format!("expected criterion=value, got `{raw}`")),
    }
}
