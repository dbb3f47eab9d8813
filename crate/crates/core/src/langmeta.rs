//! Language identity: code shapes, the language registry and ISO code
//! normalization.
//!
//! The registry is a single CSV file:
//!
//! ```text
//! glottocode,iso639_3,name,latitude,longitude,lineage,macroarea
//! stan1295,deu,German,48.649,12.4676,indo1319>germ1287>stan1295,Eurasia
//! ```
//!
//! `lineage` lists ancestor glottocodes from the family root down to the
//! language itself, joined by `>`. Empty cells are absent values.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{csv_error, Error, Result};

/// File name looked up when [`Registry::load`] is handed a directory.
pub const REGISTRY_FILE: &str = "registry.csv";
/// File name looked up when [`CodeMap::load`] is handed a directory.
pub const CODEMAP_FILE: &str = "codemap.csv";

fn glottocode_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[a-z0-9]{4}[0-9]{4}$").unwrap())
}

fn iso_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[a-z]{3}$").unwrap())
}

pub fn is_glottocode(code: &str) -> bool {
    glottocode_re().is_match(code)
}

pub fn is_iso639_3(code: &str) -> bool {
    iso_re().is_match(code)
}

/// The two identifier shapes a language can be referred to by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeKind {
    Glottocode,
    Iso639_3,
}

/// Lowercases `code` and classifies it by shape.
pub fn classify(code: &str) -> Result<(String, CodeKind)> {
    let lower = code.trim().to_lowercase();
    if is_glottocode(&lower) {
        Ok((lower, CodeKind::Glottocode))
    } else if is_iso639_3(&lower) {
        Ok((lower, CodeKind::Iso639_3))
    } else {
        Err(Error::CodeShape(code.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub latitude: f64,
    pub longitude: f64,
}

impl Coordinates {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::data(format!("latitude {latitude} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::data(format!("longitude {longitude} outside [-180, 180]")));
        }
        Ok(Coordinates { latitude, longitude })
    }
}

/// Identity, location and genealogy of one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageRecord {
    pub glottocode: String,
    pub iso639_3: Option<String>,
    pub name: String,
    pub coordinates: Option<Coordinates>,
    /// Ancestor glottocodes from the family root to the language itself.
    pub lineage: Vec<String>,
    pub macroarea: Option<String>,
}

impl LanguageRecord {
    pub fn new(
        glottocode: &str,
        iso639_3: Option<&str>,
        name: &str,
        coordinates: Option<Coordinates>,
        lineage: Vec<String>,
        macroarea: Option<&str>,
    ) -> Result<Self> {
        let glottocode = glottocode.to_lowercase();
        if !is_glottocode(&glottocode) {
            return Err(Error::data(format!("malformed glottocode '{glottocode}'")));
        }
        let iso639_3 = iso639_3.map(str::to_lowercase);
        if let Some(iso) = &iso639_3 {
            if !is_iso639_3(iso) {
                return Err(Error::data(format!("malformed ISO 639-3 code '{iso}'")));
            }
        }
        let lineage: Vec<String> = lineage.into_iter().map(|g| g.to_lowercase()).collect();
        if lineage.last() != Some(&glottocode) {
            return Err(Error::data(format!(
                "lineage of {glottocode} must end with the language itself"
            )));
        }
        if let Some(bad) = lineage.iter().find(|g| !is_glottocode(g)) {
            return Err(Error::data(format!(
                "lineage of {glottocode} contains malformed glottocode '{bad}'"
            )));
        }
        Ok(LanguageRecord {
            glottocode,
            iso639_3,
            name: name.to_string(),
            coordinates,
            lineage,
            macroarea: macroarea.map(str::to_string),
        })
    }
}

/// Registry of language records, indexed by glottocode and ISO 639-3 code.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    records: Vec<LanguageRecord>,
    by_glottocode: HashMap<String, usize>,
    by_iso: HashMap<String, usize>,
}

impl Registry {
    pub fn from_records(records: Vec<LanguageRecord>) -> Result<Self> {
        let mut registry = Registry::default();
        for record in records {
            registry.insert(record)?;
        }
        Ok(registry)
    }

    fn insert(&mut self, record: LanguageRecord) -> Result<()> {
        let idx = self.records.len();
        if self.by_glottocode.contains_key(&record.glottocode) {
            return Err(Error::data(format!("duplicate glottocode '{}'", record.glottocode)));
        }
        if let Some(iso) = &record.iso639_3 {
            if self.by_iso.contains_key(iso) {
                return Err(Error::data(format!("duplicate ISO 639-3 code '{iso}'")));
            }
            self.by_iso.insert(iso.clone(), idx);
        }
        self.by_glottocode.insert(record.glottocode.clone(), idx);
        self.records.push(record);
        Ok(())
    }

    /// Loads the registry CSV. A directory path is resolved to
    /// [`REGISTRY_FILE`] inside it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let path = if path.is_dir() {
            path.join(REGISTRY_FILE)
        } else {
            path.to_path_buf()
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| csv_error(&path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(&path, e))?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::data(format!("{}: missing column '{name}'", path.display())))
        };
        let [glotto, iso, name, lat, lon, lineage, area] = [
            col("glottocode")?,
            col("iso639_3")?,
            col("name")?,
            col("latitude")?,
            col("longitude")?,
            col("lineage")?,
            col("macroarea")?,
        ];

        let mut registry = Registry::default();
        for row in reader.records() {
            let row = row.map_err(|e| csv_error(&path, e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let at_line = |e: Error| match e {
                Error::Data(msg) => Error::data(format!("{}:{line}: {msg}", path.display())),
                other => other,
            };
            let cell = |i: usize| row.get(i).filter(|s| !s.is_empty());
            let parse_deg = |i: usize, what: &str| -> Result<Option<f64>> {
                cell(i)
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| Error::data(format!("unparsable {what} '{s}'")))
                    })
                    .transpose()
            };
            let coordinates = match (
                parse_deg(lat, "latitude").map_err(at_line)?,
                parse_deg(lon, "longitude").map_err(at_line)?,
            ) {
                (Some(la), Some(lo)) => Some(Coordinates::new(la, lo).map_err(at_line)?),
                (None, None) => None,
                _ => {
                    return Err(at_line(Error::data(
                        "latitude and longitude must both be present or both be absent",
                    )))
                }
            };
            let lineage = cell(lineage)
                .ok_or_else(|| at_line(Error::data("empty lineage")))?
                .split('>')
                .map(|s| s.trim().to_string())
                .collect();
            let glottocode = cell(glotto).ok_or_else(|| at_line(Error::data("empty glottocode")))?;
            let record = LanguageRecord::new(
                glottocode,
                cell(iso),
                row.get(name).unwrap_or(""),
                coordinates,
                lineage,
                cell(area),
            )
            .map_err(at_line)?;
            registry.insert(record).map_err(at_line)?;
        }
        Ok(registry)
    }

    pub fn records(&self) -> &[LanguageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn by_glottocode(&self, code: &str) -> Option<&LanguageRecord> {
        self.by_glottocode.get(code).map(|&i| &self.records[i])
    }

    pub fn by_iso(&self, code: &str) -> Option<&LanguageRecord> {
        self.by_iso.get(code).map(|&i| &self.records[i])
    }

    /// Looks a language up by glottocode or ISO 639-3 code, distinguishing
    /// the two by shape. Matching is case-insensitive.
    pub fn resolve(&self, code: &str) -> Result<&LanguageRecord> {
        let (lower, kind) = classify(code)?;
        let found = match kind {
            CodeKind::Glottocode => self.by_glottocode(&lower),
            CodeKind::Iso639_3 => self.by_iso(&lower),
        };
        found.ok_or(Error::UnknownCode(code.to_string()))
    }

    /// Identifiers under which `code` may appear in a data source: the code
    /// itself followed by the glottocode and ISO code of its record.
    pub fn aliases(&self, code: &str) -> Vec<String> {
        let mut out = vec![code.to_string()];
        if let Ok(record) = self.resolve(code) {
            for alias in std::iter::once(&record.glottocode).chain(record.iso639_3.as_ref()) {
                if !out.contains(alias) {
                    out.push(alias.clone());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MapKind {
    Retired,
    Variant,
    Macro,
}

/// Mapping of retired or variant ISO codes to canonical ones, plus the
/// member lists of macrolanguage codes.
#[derive(Debug, Clone, Default)]
pub struct CodeMap {
    retired_to_current: BTreeMap<String, String>,
    macro_members: BTreeMap<String, BTreeSet<String>>,
}

/// Outcome of [`normalize_code`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedCode {
    pub code: String,
    /// Member languages when `code` is a macrolanguage with several members.
    pub ambiguous_members: Option<Vec<String>>,
}

impl NormalizedCode {
    pub fn is_ambiguous(&self) -> bool {
        self.ambiguous_members.is_some()
    }
}

impl CodeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_retired(&mut self, raw: &str, canonical: &str) -> Result<()> {
        self.add(raw, canonical, MapKind::Retired)
    }

    pub fn add_macro_member(&mut self, macro_code: &str, member: &str) -> Result<()> {
        self.add(macro_code, member, MapKind::Macro)
    }

    fn add(&mut self, raw: &str, canonical: &str, kind: MapKind) -> Result<()> {
        let raw = raw.trim().to_lowercase();
        let canonical = canonical.trim().to_lowercase();
        for code in [&raw, &canonical] {
            if !is_iso639_3(code) {
                return Err(Error::data(format!("codemap entry '{code}' is not an ISO 639-3 code")));
            }
        }
        match kind {
            MapKind::Retired | MapKind::Variant => {
                if raw == canonical {
                    return Err(Error::data(format!("codemap maps '{raw}' to itself")));
                }
                if let Some(prev) = self.retired_to_current.get(&raw) {
                    if *prev != canonical {
                        return Err(Error::data(format!(
                            "codemap maps '{raw}' to both '{prev}' and '{canonical}'"
                        )));
                    }
                }
                self.retired_to_current.insert(raw, canonical);
            }
            MapKind::Macro => {
                self.macro_members.entry(raw).or_default().insert(canonical);
            }
        }
        Ok(())
    }

    /// Rejects maps whose canonical codes are themselves remapped, so one
    /// application of the map is always enough.
    fn validate(&self) -> Result<()> {
        for (raw, canonical) in &self.retired_to_current {
            if self.retired_to_current.contains_key(canonical) {
                return Err(Error::data(format!(
                    "codemap is not idempotent: '{raw}' -> '{canonical}' which is remapped again"
                )));
            }
        }
        for (code, members) in &self.macro_members {
            if self.retired_to_current.contains_key(code) {
                return Err(Error::data(format!(
                    "'{code}' is both a macrolanguage and a remapped code"
                )));
            }
            if let Some(m) = members.iter().find(|m| self.retired_to_current.contains_key(*m)) {
                return Err(Error::data(format!(
                    "macrolanguage member '{m}' of '{code}' is itself remapped"
                )));
            }
        }
        Ok(())
    }

    /// Loads a `raw,canonical,kind` CSV where kind is `retired`, `variant`
    /// or `macro`. A directory path is resolved to [`CODEMAP_FILE`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let path = if path.is_dir() {
            path.join(CODEMAP_FILE)
        } else {
            path.to_path_buf()
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&path)
            .map_err(|e| csv_error(&path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(&path, e))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["raw", "canonical", "kind"] {
            return Err(Error::data(format!(
                "{}: expected header raw,canonical,kind",
                path.display()
            )));
        }
        let mut map = CodeMap::new();
        for row in reader.records() {
            let row = row.map_err(|e| csv_error(&path, e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let kind = match &row[2] {
                "retired" => MapKind::Retired,
                "variant" => MapKind::Variant,
                "macro" => MapKind::Macro,
                other => {
                    return Err(Error::data(format!(
                        "{}:{line}: unknown kind '{other}'",
                        path.display()
                    )))
                }
            };
            map.add(&row[0], &row[1], kind).map_err(|e| match e {
                Error::Data(msg) => Error::data(format!("{}:{line}: {msg}", path.display())),
                other => other,
            })?;
        }
        map.validate()?;
        Ok(map)
    }

    pub fn macro_members(&self, code: &str) -> Option<&BTreeSet<String>> {
        self.macro_members.get(code)
    }

    fn is_known_canonical(&self, code: &str) -> bool {
        self.retired_to_current.values().any(|c| c == code) || self.macro_members.values().any(|m| m.contains(code))
    }
}

/// Maps a raw ISO code to its canonical ISO 639-3 form.
///
/// Retired and variant codes are rewritten through `map`; macrolanguage
/// codes with more than one member are returned unchanged and flagged as
/// ambiguous. Codes known to neither the registry nor the map are rejected.
pub fn normalize_code(raw: &str, map: &CodeMap, registry: &Registry) -> Result<NormalizedCode> {
    let lower = raw.trim().to_lowercase();
    if !is_iso639_3(&lower) {
        return Err(Error::CodeShape(raw.to_string()));
    }
    let code = map.retired_to_current.get(&lower).cloned().unwrap_or(lower);
    if let Some(members) = map.macro_members(&code) {
        let ambiguous_members = (members.len() > 1).then(|| members.iter().cloned().collect::<Vec<_>>());
        return Ok(NormalizedCode {
            code,
            ambiguous_members,
        });
    }
    if registry.by_iso(&code).is_some() || map.is_known_canonical(&code) {
        Ok(NormalizedCode {
            code,
            ambiguous_members: None,
        })
    } else {
        Err(Error::UnknownCode(raw.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const HEADER: &str = "glottocode,iso639_3,name,latitude,longitude,lineage,macroarea\n";

    fn write_registry(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "{HEADER}{body}").unwrap();
        f
    }

    fn sample_map() -> CodeMap {
        let mut map = CodeMap::new();
        map.add_retired("ger", "deu").unwrap();
        map.add_retired("jap", "jpn").unwrap();
        map.add_macro_member("nor", "nob").unwrap();
        map.add_macro_member("nor", "nno").unwrap();
        map
    }

    fn german() -> LanguageRecord {
        LanguageRecord::new(
            "stan1295",
            Some("deu"),
            "German",
            Some(Coordinates::new(48.649, 12.4676).unwrap()),
            vec!["indo1319".into(), "germ1287".into(), "stan1295".into()],
            Some("Eurasia"),
        )
        .unwrap()
    }

    #[test]
    fn loads_registry_row() {
        let f = write_registry("stan1295,deu,German,48.649,12.4676,indo1319>clas1257>germ1287>stan1295,Eurasia\n");
        let reg = Registry::load(f.path()).unwrap();
        let rec = reg.resolve("stan1295").unwrap();
        assert_eq!(rec.name, "German");
        assert_eq!(rec.iso639_3.as_deref(), Some("deu"));
        assert_eq!(rec.lineage.len(), 4);
        assert_eq!(rec.lineage.last().unwrap(), "stan1295");
        assert_eq!(rec.coordinates.unwrap().latitude, 48.649);
    }

    #[test]
    fn half_coordinates_is_error_with_line() {
        let f = write_registry("stan1295,deu,German,48.649,,indo1319>stan1295,\n");
        let err = Registry::load(f.path()).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains(":2:")), "{err}");
    }

    #[test]
    fn duplicate_glottocode_rejected() {
        let f = write_registry("stan1295,deu,German,,,stan1295,\nstan1295,,German again,,,stan1295,\n");
        assert!(matches!(Registry::load(f.path()), Err(Error::Data(_))));
    }

    #[test]
    fn lineage_must_end_with_self() {
        let f = write_registry("stan1295,deu,German,,,indo1319>germ1287,\n");
        assert!(Registry::load(f.path()).is_err());
    }

    #[test]
    fn out_of_range_latitude_rejected() {
        let f = write_registry("stan1295,deu,German,91,0,stan1295,\n");
        assert!(Registry::load(f.path()).is_err());
    }

    #[test]
    fn normalizes_retired_code() {
        let reg = Registry::from_records(vec![german()]).unwrap();
        let n = normalize_code("ger", &sample_map(), &reg).unwrap();
        assert_eq!(n.code, "deu");
        assert!(!n.is_ambiguous());
        assert_eq!(normalize_code("GER", &sample_map(), &reg).unwrap().code, "deu");
    }

    #[test]
    fn canonical_code_is_fixed_point() {
        let reg = Registry::from_records(vec![german()]).unwrap();
        assert_eq!(normalize_code("deu", &sample_map(), &reg).unwrap().code, "deu");
        // known only through the map, not the registry
        assert_eq!(normalize_code("jpn", &sample_map(), &reg).unwrap().code, "jpn");
    }

    #[test]
    fn macrolanguage_flagged() {
        let n = normalize_code("nor", &sample_map(), &Registry::default()).unwrap();
        assert_eq!(n.code, "nor");
        assert_eq!(n.ambiguous_members, Some(vec!["nno".to_string(), "nob".to_string()]));
    }

    #[test]
    fn unknown_code_carries_raw() {
        let err = normalize_code("Qqq", &sample_map(), &Registry::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownCode(ref s) if s == "Qqq"));
    }

    #[test]
    fn resolve_by_shape() {
        let reg = Registry::from_records(vec![german()]).unwrap();
        assert_eq!(reg.resolve("STAN1295").unwrap().name, "German");
        assert_eq!(reg.resolve("deu").unwrap().name, "German");
        assert!(matches!(reg.resolve("xxx9"), Err(Error::CodeShape(_))));
        assert!(matches!(reg.resolve("qqq"), Err(Error::UnknownCode(_))));
    }

    #[test]
    fn chained_codemap_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "raw,canonical,kind\naaa,bbb,retired\nbbb,ccc,variant\n").unwrap();
        assert!(CodeMap::load(f.path()).is_err());
    }

    #[test]
    fn aliases_include_both_codes() {
        let reg = Registry::from_records(vec![german()]).unwrap();
        assert_eq!(reg.aliases("deu"), vec!["deu", "stan1295"]);
        assert_eq!(reg.aliases("zzz"), vec!["zzz"]);
    }

    proptest::proptest! {
        #[test]
        fn normalize_is_idempotent(code in "[a-zA-Z]{3}") {
            let reg = Registry::from_records(vec![german()]).unwrap();
            let map = sample_map();
            if let Ok(first) = normalize_code(&code, &map, &reg) {
                let second = normalize_code(&first.code, &map, &reg).unwrap();
                proptest::prop_assert_eq!(first, second);
            }
        }
    }
}
