//! Versioned on-disk form of a built registry index.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::Matcher;
use crate::registry::{
    derive_indirect, load_registry, project_grid_onto_countries, CriterionCatalog, GeoMapping, RegistryIndex,
    RegistryKind,
};

pub const SNAPSHOT_VERSION: u32 = 1;

/// Input files for one registry build.
#[derive(Debug, Clone)]
pub struct Sources {
    pub registry: RegistryKind,
    pub entries: PathBuf,
    /// City to employment zone / urban unit mapping.
    pub geo: Option<PathBuf>,
    /// GRID entries projected onto country entries before indexing.
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    version: u32,
    pub catalog: CriterionCatalog,
    pub index: RegistryIndex,
}

impl Snapshot {
    pub fn new(catalog: CriterionCatalog, index: RegistryIndex) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            catalog,
            index,
        }
    }

    /// Loads `sources`, derives indirect criteria and builds every index.
    pub fn build(sources: &Sources, catalog: CriterionCatalog) -> Result<Self> {
        let mut entries = load_registry(&sources.entries, sources.registry)?;
        let mapping = sources.geo.as_ref().map(GeoMapping::load).transpose()?;
        if let Some(mapping) = &mapping {
            derive_indirect(&mut entries, mapping);
        }
        if let Some(grid) = &sources.grid {
            let grid = load_registry(grid, RegistryKind::Grid)?;
            project_grid_onto_countries(&mut entries, &grid);
        }
        let index = RegistryIndex::build(sources.registry, entries, &catalog, mapping.as_ref())?;
        Ok(Self::new(catalog, index))
    }

    pub fn registry(&self) -> RegistryKind {
        self.index.registry
    }

    pub fn matcher(&self) -> Matcher<'_> {
        Matcher::new(&self.index, &self.catalog)
    }

    /// `<dir>/<registry>.snapshot.json`
    pub fn path_in(dir: impl AsRef<Path>, registry: RegistryKind) -> PathBuf {
        dir.as_ref().join(format!("{registry}.snapshot.json"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = BufWriter::new(file);
        serde_json::to_writer(&mut writer, self).map_err(|e| Error::Snapshot(e.to_string()))?;
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let snapshot: Snapshot = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "{}: version {} is not supported (expected {SNAPSHOT_VERSION})",
                path.display(),
                snapshot.version
            )));
        }
        Ok(snapshot)
    }
}
