#![allow(dead_code)]

use std::path::{Path, PathBuf};

use affmatch::RegistryKind;
use affmatch_cli::commands::{run_index, IndexArgs};
use affmatch_cli::config::AppConfig;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

/// Indexes the three fixture registries into `dir`.
pub fn build_all(dir: &Path) {
    for registry in RegistryKind::ALL {
        let args = IndexArgs {
            registry: Some(registry),
            input: Some(fixture(&format!("{registry}.jsonl"))),
            geo: (registry == RegistryKind::Rnsr).then(|| fixture("geo.json")),
            grid: None,
            build_dir: Some(dir.to_path_buf()),
        };
        run_index(&args, &AppConfig::default(), &mut Vec::new()).unwrap();
    }
}
