//! Affiliation matching against research-organization registries.
//!
//! Each registry field ("criterion") becomes a percolation index of stored
//! queries. An affiliation string is percolated through those indexes and
//! ordered strategy groups decide which registry entries it names.

pub mod analysis;
pub mod error;
pub mod evaluation;
pub mod matcher;
pub mod percolator;
pub mod registry;
pub mod snapshot;

pub use analysis::{analyze, AnalyzerMode, AnalyzerSpec, Token};
pub use error::{Error, Result};
pub use evaluation::{evaluate, format_table, load_gold, GoldField, GoldRecord, MetricsReport};
pub use matcher::{filter_submatches, Condition, MatchConfig, MatchOutput, MatchResult, Matcher, Strategy, StrategyGroup};
pub use percolator::{CriterionIndex, PercolationHit, QueryDoc, QueryKind, Span, StoredQuery};
pub use registry::{
    build_indexes, derive_indirect, load_registry, CriterionCatalog, GeoMapping, RegistryEntry, RegistryIndex,
    RegistryKind,
};
pub use snapshot::{Snapshot, Sources};
