use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use affmatch::{MatchConfig, RegistryKind};
use anyhow::{bail, Context, Result};
use serde::Deserialize;

pub const CONFIG_ENV: &str = "AFFMATCH_CONFIG";

/// Application settings. Every field is optional; command line flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub registries: BTreeMap<RegistryKind, PathBuf>,
    pub geo_mapping: Option<PathBuf>,
    #[serde(default)]
    pub match_configs: BTreeMap<RegistryKind, PathBuf>,
    pub build_dir: Option<PathBuf>,
    pub bind: Option<String>,
    pub log: Option<String>,
}

impl AppConfig {
    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: AppConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        config.registries.values_mut().for_each(resolve);
        config.match_configs.values_mut().for_each(resolve);
        config.geo_mapping.iter_mut().for_each(resolve);
        config.build_dir.iter_mut().for_each(resolve);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let paths = self
            .registries
            .values()
            .chain(self.match_configs.values())
            .chain(self.geo_mapping.iter());
        for path in paths {
            if !path.exists() {
                bail!("configured path {} does not exist", path.display());
            }
        }
        Ok(())
    }

    pub fn build_dir(&self) -> PathBuf {
        self.build_dir.clone().unwrap_or_else(|| PathBuf::from("build"))
    }

    pub fn match_configs(&self) -> Result<BTreeMap<RegistryKind, MatchConfig>> {
        self.match_configs
            .iter()
            .map(|(registry, path)| {
                let config = MatchConfig::load(path)?;
                if config.registry != *registry {
                    bail!("{} targets `{}`, listed under `{registry}`", path.display(), config.registry);
                }
                Ok((*registry, config))
            })
            .collect()
    }
}
