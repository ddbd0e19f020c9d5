//! Registry loading, indirect criteria and index building.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::analysis::{normalize, AnalyzerSpec};
use crate::error::{Error, Result};
use crate::percolator::{CriterionIndex, QueryKind};

/// Field holding the city of an RNSR unit, the input of indirect criteria.
pub const CITY_FIELD: &str = "rnsr_city";
pub const ZONE_FIELD: &str = "rnsr_zone_emploi";
pub const URBAN_UNIT_FIELD: &str = "rnsr_urban_unit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegistryKind {
    Country,
    Grid,
    Rnsr,
}

impl RegistryKind {
    pub const ALL: [RegistryKind; 3] = [RegistryKind::Country, RegistryKind::Grid, RegistryKind::Rnsr];

    pub fn as_str(self) -> &'static str {
        match self {
            RegistryKind::Country => "country",
            RegistryKind::Grid => "grid",
            RegistryKind::Rnsr => "rnsr",
        }
    }
}

impl fmt::Display for RegistryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegistryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "country" => Ok(RegistryKind::Country),
            "grid" => Ok(RegistryKind::Grid),
            "rnsr" => Ok(RegistryKind::Rnsr),
            other => Err(Error::Config(format!("unknown registry kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub id: String,
    pub registry: RegistryKind,
    #[serde(default)]
    pub fields: BTreeMap<String, Vec<String>>,
}

impl RegistryEntry {
    pub fn values(&self, criterion: &str) -> &[String] {
        self.fields.get(criterion).map(Vec::as_slice).unwrap_or_default()
    }

    fn push_unique(&mut self, criterion: &str, value: &str) {
        let values = self.fields.entry(criterion.to_string()).or_default();
        if !values.iter().any(|v| v == value) {
            values.push(value.to_string());
        }
    }
}

#[derive(Deserialize)]
struct RawEntry {
    id: String,
    registry: String,
    #[serde(default)]
    fields: BTreeMap<String, Vec<String>>,
}

/// Reads a JSON-lines registry file. Every line must declare `kind`.
pub fn load_registry(path: impl AsRef<Path>, kind: RegistryKind) -> Result<Vec<RegistryEntry>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_registry(file, kind, path)
}

pub fn read_registry(reader: impl Read, kind: RegistryKind, path: &Path) -> Result<Vec<RegistryEntry>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawEntry = serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
        let registry: RegistryKind = raw.registry.parse().map_err(|e: Error| parse_err(line_no, e.to_string()))?;
        if registry != kind {
            return Err(parse_err(
                line_no,
                format!("entry `{}` belongs to registry `{registry}`, expected `{kind}`", raw.id),
            ));
        }
        let id = raw.id.trim().to_string();
        if id.is_empty() {
            return Err(parse_err(line_no, "empty id".to_string()));
        }
        if !seen.insert(id.clone()) {
            return Err(parse_err(line_no, Error::DuplicateId(id).to_string()));
        }
        let fields = raw
            .fields
            .into_iter()
            .filter_map(|(name, values)| {
                let values: Vec<String> = values
                    .into_iter()
                    .map(|v| v.trim().to_string())
                    .filter(|v| !v.is_empty())
                    .collect();
                (!values.is_empty()).then_some((name, values))
            })
            .collect();
        entries.push(RegistryEntry { id, registry, fields });
    }
    Ok(entries)
}

/// City to employment zone / urban unit mapping. City keys are compared after
/// standard analysis.
#[derive(Debug, Clone, Default)]
pub struct GeoMapping {
    zones: BTreeMap<String, String>,
    units: BTreeMap<String, String>,
    zone_cities: BTreeMap<String, BTreeSet<String>>,
    unit_cities: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Deserialize)]
struct RawGeoMapping {
    #[serde(default)]
    employment_zones: BTreeMap<String, String>,
    #[serde(default)]
    urban_units: BTreeMap<String, String>,
}

impl GeoMapping {
    pub fn new<Z, U>(employment_zones: Z, urban_units: U) -> Result<Self>
    where
        Z: IntoIterator<Item = (String, String)>,
        U: IntoIterator<Item = (String, String)>,
    {
        let mut mapping = GeoMapping::default();
        for (city, zone) in employment_zones {
            insert_unique(&mut mapping.zones, &mut mapping.zone_cities, &city, zone, "employment zone")?;
        }
        for (city, unit) in urban_units {
            insert_unique(&mut mapping.units, &mut mapping.unit_cities, &city, unit, "urban unit")?;
        }
        Ok(mapping)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let raw: RawGeoMapping = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::new(raw.employment_zones, raw.urban_units)
    }

    pub fn zone_of(&self, city: &str) -> Option<&str> {
        self.zones.get(&normalize(city)).map(String::as_str)
    }

    pub fn urban_unit_of(&self, city: &str) -> Option<&str> {
        self.units.get(&normalize(city)).map(String::as_str)
    }

    /// Normalized names of every city in `zone`.
    pub fn cities_in_zone(&self, zone: &str) -> impl Iterator<Item = &str> {
        self.zone_cities.get(zone).into_iter().flatten().map(String::as_str)
    }

    pub fn cities_in_urban_unit(&self, unit: &str) -> impl Iterator<Item = &str> {
        self.unit_cities.get(unit).into_iter().flatten().map(String::as_str)
    }
}

fn insert_unique(
    forward: &mut BTreeMap<String, String>,
    inverse: &mut BTreeMap<String, BTreeSet<String>>,
    city: &str,
    area: String,
    what: &str,
) -> Result<()> {
    let key = normalize(city);
    if key.is_empty() {
        return Ok(());
    }
    match forward.get(&key) {
        Some(existing) if *existing != area => {
            return Err(Error::Config(format!(
                "city `{city}` mapped to two {what}s: `{existing}` and `{area}`"
            )))
        }
        Some(_) => return Ok(()),
        None => {}
    }
    inverse.entry(area.clone()).or_default().insert(key.clone());
    forward.insert(key, area);
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeriveReport {
    pub augmented: usize,
    pub unmapped_cities: usize,
}

/// Adds employment-zone and urban-unit ids to every entry whose city is mapped.
pub fn derive_indirect(entries: &mut [RegistryEntry], mapping: &GeoMapping) -> DeriveReport {
    let mut report = DeriveReport::default();
    for entry in entries.iter_mut() {
        let cities = entry.values(CITY_FIELD).to_vec();
        let mut touched = false;
        for city in &cities {
            let zone = mapping.zone_of(city).map(str::to_string);
            let unit = mapping.urban_unit_of(city).map(str::to_string);
            if zone.is_none() && unit.is_none() {
                report.unmapped_cities += 1;
            }
            if let Some(zone) = zone {
                entry.push_unique(ZONE_FIELD, &zone);
                touched = true;
            }
            if let Some(unit) = unit {
                entry.push_unique(URBAN_UNIT_FIELD, &unit);
                touched = true;
            }
        }
        if touched {
            report.augmented += 1;
        }
    }
    if report.unmapped_cities > 0 {
        info!("{} cities without employment zone or urban unit", report.unmapped_cities);
    }
    report
}

/// Copies institution-level GRID fields onto the country entry named by each
/// institution's `grid_country_code`, so country matching can use them.
pub fn project_grid_onto_countries(countries: &mut [RegistryEntry], grid: &[RegistryEntry]) -> usize {
    const PROJECTED: [&str; 3] = ["grid_name", "grid_acronym", "grid_city"];
    let by_code: BTreeMap<String, usize> = countries
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.to_uppercase(), i))
        .collect();
    let mut projected = 0;
    for institution in grid {
        for code in institution.values("grid_country_code") {
            let Some(&slot) = by_code.get(&code.to_uppercase()) else {
                continue;
            };
            for field in PROJECTED {
                for value in institution.values(field) {
                    countries[slot].push_unique(field, value);
                }
            }
            projected += 1;
        }
    }
    projected
}

/// Where a criterion's stored queries come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionSource {
    /// The entry's field values are the query texts.
    Direct,
    /// Field values are employment-zone ids; each zone is indexed as the
    /// names of its cities.
    EmploymentZone,
    /// Same, for urban units.
    UrbanUnit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub name: String,
    pub kind: QueryKind,
    pub analyzer: AnalyzerSpec,
    pub source: CriterionSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionCatalog {
    criteria: BTreeMap<String, CriterionSpec>,
}

impl CriterionCatalog {
    pub fn new(specs: impl IntoIterator<Item = CriterionSpec>) -> Self {
        Self {
            criteria: specs.into_iter().map(|s| (s.name.clone(), s)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&CriterionSpec> {
        self.criteria.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.criteria.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.criteria.keys().map(String::as_str)
    }

    pub fn specs(&self) -> impl Iterator<Item = &CriterionSpec> {
        self.criteria.values()
    }

    pub fn len(&self) -> usize {
        self.criteria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.criteria.is_empty()
    }
}

impl Default for CriterionCatalog {
    /// Country, GRID and RNSR criteria. Short identity-like criteria are
    /// phrases, long names are bags at -20%.
    fn default() -> Self {
        use CriterionSource::*;
        let phrase = QueryKind::Phrase;
        let bag = QueryKind::bag();
        let std = AnalyzerSpec::standard;
        let acr = AnalyzerSpec::acronym;
        let rows = [
            ("country_alpha3", phrase, acr(), Direct),
            ("country_name", phrase, std(), Direct),
            ("country_subdivision_code", phrase, acr(), Direct),
            ("country_subdivision_name", phrase, std(), Direct),
            ("grid_acronym", phrase, acr(), Direct),
            ("grid_city", phrase, std(), Direct),
            ("grid_country", phrase, std(), Direct),
            ("grid_country_code", phrase, acr(), Direct),
            ("grid_name", bag, std(), Direct),
            ("rnsr_acronym", phrase, acr(), Direct),
            ("rnsr_city", phrase, std(), Direct),
            ("rnsr_code_number", phrase, acr(), Direct),
            ("rnsr_country_code", phrase, acr(), Direct),
            ("rnsr_name", bag, std(), Direct),
            ("rnsr_supervisor_acronym", phrase, acr(), Direct),
            ("rnsr_supervisor_name", bag, std(), Direct),
            ("rnsr_urban_unit", phrase, std(), UrbanUnit),
            ("rnsr_year", phrase, std(), Direct),
            ("rnsr_zone_emploi", phrase, std(), EmploymentZone),
        ];
        Self::new(rows.into_iter().map(|(name, kind, analyzer, source)| CriterionSpec {
            name: name.to_string(),
            kind,
            analyzer,
            source,
        }))
    }
}

/// Builds one index per catalog criterion from `entries`. Fields that are not
/// catalog criteria are ignored.
pub fn build_indexes(
    entries: &[RegistryEntry],
    catalog: &CriterionCatalog,
    mapping: Option<&GeoMapping>,
) -> Result<BTreeMap<String, CriterionIndex>> {
    let mut indexes: BTreeMap<String, CriterionIndex> = catalog
        .specs()
        .map(|spec| (spec.name.clone(), CriterionIndex::new(&spec.name, spec.analyzer.clone())))
        .collect();

    for entry in entries {
        for (field, values) in &entry.fields {
            let (Some(spec), Some(index)) = (catalog.get(field), indexes.get_mut(field)) else {
                debug!("entry {}: field `{field}` is not a criterion", entry.id);
                continue;
            };
            for value in values {
                let texts: Vec<&str> = match (spec.source, mapping) {
                    (CriterionSource::Direct, _) | (_, None) => vec![value.as_str()],
                    (CriterionSource::EmploymentZone, Some(m)) => m.cities_in_zone(value).collect(),
                    (CriterionSource::UrbanUnit, Some(m)) => m.cities_in_urban_unit(value).collect(),
                };
                // an area absent from the mapping is indexed under its own id
                let texts = if texts.is_empty() { vec![value.as_str()] } else { texts };
                for text in texts {
                    index
                        .add_value(text, spec.kind, [entry.id.as_str()])
                        .map_err(|e| Error::Entry {
                            id: entry.id.clone(),
                            source: Box::new(e),
                        })?;
                }
            }
        }
    }
    Ok(indexes)
}

/// All criterion indexes of one registry, plus its entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistryIndex {
    pub registry: RegistryKind,
    entries: BTreeMap<String, RegistryEntry>,
    indexes: BTreeMap<String, CriterionIndex>,
}

impl RegistryIndex {
    pub fn build(
        registry: RegistryKind,
        entries: Vec<RegistryEntry>,
        catalog: &CriterionCatalog,
        mapping: Option<&GeoMapping>,
    ) -> Result<Self> {
        let indexes = build_indexes(&entries, catalog, mapping)?;
        let mut by_id = BTreeMap::new();
        for entry in entries {
            if by_id.contains_key(&entry.id) {
                return Err(Error::DuplicateId(entry.id));
            }
            by_id.insert(entry.id.clone(), entry);
        }
        Ok(Self {
            registry,
            entries: by_id,
            indexes,
        })
    }

    pub fn entry(&self, id: &str) -> Option<&RegistryEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }

    pub fn index(&self, criterion: &str) -> Option<&CriterionIndex> {
        self.indexes.get(criterion)
    }

    pub fn indexes(&self) -> impl Iterator<Item = &CriterionIndex> {
        self.indexes.values()
    }

    /// Stored query count per criterion.
    pub fn sizes(&self) -> BTreeMap<&str, usize> {
        self.indexes.iter().map(|(k, v)| (k.as_str(), v.len())).collect()
    }
}
