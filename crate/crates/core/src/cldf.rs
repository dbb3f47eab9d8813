//! CLDF StructureDataset ingestion (Grambank, WALS) into a [`FeatureMatrix`].
//!
//! Two kinds of missing value are kept apart: `?` in `values.csv` is
//! [`Cell::MissingUnknown`], a language/feature pair with no row at all is
//! [`Cell::MissingNoCoverage`]. Languages are keyed by glottocode.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{csv_error, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub id: String,
    pub name: String,
    /// All possible non-missing value codes, in database order.
    pub value_domain: Vec<String>,
    /// Human-readable names of `value_domain`, index-aligned.
    pub value_labels: Vec<String>,
}

impl FeatureSpec {
    pub fn new(id: &str, name: &str, value_domain: Vec<String>) -> Result<Self> {
        let labels = value_domain.clone();
        Self::with_labels(id, name, value_domain, labels)
    }

    pub fn with_labels(id: &str, name: &str, value_domain: Vec<String>, value_labels: Vec<String>) -> Result<Self> {
        if value_domain.is_empty() {
            return Err(Error::data(format!("feature {id} has an empty value domain")));
        }
        if value_labels.len() != value_domain.len() {
            return Err(Error::data(format!("feature {id}: label count != domain size")));
        }
        if let Some(v) = value_domain.iter().find(|v| is_missing_marker(v)) {
            return Err(Error::data(format!(
                "feature {id}: missing marker '{v}' in value domain"
            )));
        }
        let unique: BTreeSet<_> = value_domain.iter().collect();
        if unique.len() != value_domain.len() {
            return Err(Error::data(format!("feature {id}: duplicate domain values")));
        }
        Ok(FeatureSpec {
            id: id.to_string(),
            name: name.to_string(),
            value_domain,
            value_labels,
        })
    }

    pub fn domain_size(&self) -> usize {
        self.value_domain.len()
    }

    pub fn value_index(&self, code: &str) -> Option<usize> {
        self.value_domain.iter().position(|v| v == code)
    }
}

fn is_missing_marker(v: &str) -> bool {
    matches!(v, "" | "?" | "no_cov")
}

/// One language/feature cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    /// Index into the feature's `value_domain`.
    Value(u32),
    /// Recorded as `?` in the database.
    MissingUnknown,
    /// No value recorded at all.
    MissingNoCoverage,
}

impl Cell {
    pub fn value(self) -> Option<usize> {
        match self {
            Cell::Value(v) => Some(v as usize),
            _ => None,
        }
    }

    pub fn is_missing(self) -> bool {
        !matches!(self, Cell::Value(_))
    }
}

/// Languages × categorical features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixCache", into = "MatrixCache")]
pub struct FeatureMatrix {
    languages: Vec<String>,
    features: Vec<FeatureSpec>,
    cells: Vec<Cell>,
    lang_index: HashMap<String, usize>,
}

impl FeatureMatrix {
    /// `cells` is row-major: one row of `features.len()` cells per language.
    pub fn new(languages: Vec<String>, features: Vec<FeatureSpec>, cells: Vec<Cell>) -> Result<Self> {
        if cells.len() != languages.len() * features.len() {
            return Err(Error::data(format!(
                "{} cells for {} languages x {} features",
                cells.len(),
                languages.len(),
                features.len()
            )));
        }
        let mut lang_index = HashMap::with_capacity(languages.len());
        for (i, l) in languages.iter().enumerate() {
            if lang_index.insert(l.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate language '{l}'")));
            }
        }
        let mut seen = BTreeSet::new();
        for f in &features {
            if !seen.insert(&f.id) {
                return Err(Error::data(format!("duplicate feature '{}'", f.id)));
            }
        }
        if !features.is_empty() {
            for (i, row) in cells.chunks(features.len()).enumerate() {
                for (cell, feature) in row.iter().zip(&features) {
                    if let Some(v) = cell.value() {
                        if v >= feature.domain_size() {
                            return Err(Error::data(format!(
                                "value index {v} outside domain of {} for {}",
                                feature.id, languages[i]
                            )));
                        }
                    }
                }
            }
        }
        Ok(FeatureMatrix {
            languages,
            features,
            cells,
            lang_index,
        })
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn n_languages(&self) -> usize {
        self.languages.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn language_index(&self, id: &str) -> Option<usize> {
        self.lang_index.get(id).copied()
    }

    pub fn contains_language(&self, id: &str) -> bool {
        self.lang_index.contains_key(id)
    }

    pub fn feature_index(&self, id: &str) -> Option<usize> {
        self.features.iter().position(|f| f.id == id)
    }

    pub fn row(&self, language: usize) -> &[Cell] {
        let n = self.features.len();
        &self.cells[language * n..(language + 1) * n]
    }

    pub fn cell(&self, language: usize, feature: usize) -> Cell {
        self.cells[language * self.features.len() + feature]
    }

    /// Value code of a cell, `None` for either missing kind.
    pub fn value_code(&self, language: usize, feature: usize) -> Option<&str> {
        self.cell(language, feature)
            .value()
            .map(|v| self.features[feature].value_domain[v].as_str())
    }

    /// Column slice keeping the given features in the given order.
    pub fn feature_subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<FeatureMatrix> {
        if ids.is_empty() {
            return Err(Error::data("empty feature selection"));
        }
        let mut cols = Vec::with_capacity(ids.len());
        for id in ids {
            let id = id.as_ref();
            let col = self
                .feature_index(id)
                .ok_or_else(|| Error::data(format!("unknown feature '{id}'")))?;
            if cols.contains(&col) {
                return Err(Error::data(format!("feature '{id}' selected twice")));
            }
            cols.push(col);
        }
        let features = cols.iter().map(|&c| self.features[c].clone()).collect();
        let cells = (0..self.n_languages())
            .flat_map(|l| cols.iter().map(move |&c| (l, c)))
            .map(|(l, c)| self.cell(l, c))
            .collect();
        FeatureMatrix::new(self.languages.clone(), features, cells)
    }

    /// Per-feature counts of (values, unknown, no coverage).
    pub fn missing_counts(&self, feature: usize) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for l in 0..self.n_languages() {
            match self.cell(l, feature) {
                Cell::Value(_) => counts.0 += 1,
                Cell::MissingUnknown => counts.1 += 1,
                Cell::MissingNoCoverage => counts.2 += 1,
            }
        }
        counts
    }

    pub fn save_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).map_err(|e| Error::data(e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_cache(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }
}

const CACHE_FORMAT: &str = "typdiv-feature-matrix";
const CACHE_UNKNOWN: i64 = -1;
const CACHE_NO_COVERAGE: i64 = -2;

/// On-disk cache layout. Cells are integers: a domain index, `-1` for `?`
/// and `-2` for no coverage.
#[derive(Serialize, Deserialize)]
struct MatrixCache {
    format: String,
    version: u32,
    languages: Vec<String>,
    features: Vec<FeatureSpec>,
    rows: Vec<Vec<i64>>,
}

impl From<FeatureMatrix> for MatrixCache {
    fn from(m: FeatureMatrix) -> Self {
        let rows = (0..m.n_languages())
            .map(|l| {
                m.row(l)
                    .iter()
                    .map(|c| match c {
                        Cell::Value(v) => *v as i64,
                        Cell::MissingUnknown => CACHE_UNKNOWN,
                        Cell::MissingNoCoverage => CACHE_NO_COVERAGE,
                    })
                    .collect()
            })
            .collect();
        MatrixCache {
            format: CACHE_FORMAT.to_string(),
            version: 1,
            languages: m.languages,
            features: m.features,
            rows,
        }
    }
}

impl TryFrom<MatrixCache> for FeatureMatrix {
    type Error = Error;

    fn try_from(c: MatrixCache) -> Result<Self> {
        if c.format != CACHE_FORMAT || c.version != 1 {
            return Err(Error::data(format!(
                "unsupported cache format {} v{}",
                c.format, c.version
            )));
        }
        let mut features = Vec::with_capacity(c.features.len());
        for f in c.features {
            features.push(FeatureSpec::with_labels(
                &f.id,
                &f.name,
                f.value_domain,
                f.value_labels,
            )?);
        }
        if c.rows.len() != c.languages.len() {
            return Err(Error::data("cache row count differs from language count"));
        }
        let mut cells = Vec::with_capacity(c.languages.len() * features.len());
        for row in &c.rows {
            if row.len() != features.len() {
                return Err(Error::data("ragged cache row"));
            }
            for &v in row {
                cells.push(match v {
                    CACHE_UNKNOWN => Cell::MissingUnknown,
                    CACHE_NO_COVERAGE => Cell::MissingNoCoverage,
                    v if v >= 0 && v <= u32::MAX as i64 => Cell::Value(v as u32),
                    v => return Err(Error::data(format!("invalid cache cell {v}"))),
                });
            }
        }
        FeatureMatrix::new(c.languages, features, cells)
    }
}

struct CsvTable {
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl CsvTable {
    fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .flexible(false)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_string())
            .collect();
        let mut rows = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, row));
        }
        Ok(CsvTable { headers, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str, path: &Path) -> Result<usize> {
        self.column(name)
            .ok_or_else(|| Error::data(format!("{}: missing column '{name}'", path.display())))
    }
}

fn required_file(dir: &Path, name: &str) -> Result<std::path::PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::data(format!(
            "{}: required CLDF file {name} not found",
            dir.display()
        )))
    }
}

/// Orders numeric codes numerically, everything else lexically after them.
fn code_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal).then(a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

struct DeclaredCode {
    canonical: String,
    label: String,
    aliases: Vec<String>,
}

/// Loads `languages.csv`, `parameters.csv`, `values.csv` and, when present,
/// `codes.csv` from a CLDF StructureDataset directory.
///
/// Without `codes.csv` each feature's domain is the set of distinct
/// non-missing values observed anywhere in the dataset.
pub fn load_structure_dataset(dir: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let dir = dir.as_ref();
    let lang_path = required_file(dir, "languages.csv")?;
    let param_path = required_file(dir, "parameters.csv")?;
    let value_path = required_file(dir, "values.csv")?;
    let code_path = dir.join("codes.csv");

    // languages: CLDF ID -> row in the matrix (keyed by glottocode)
    let langs = CsvTable::read(&lang_path)?;
    let (l_id, l_glotto) = (
        langs.require("ID", &lang_path)?,
        langs.require("Glottocode", &lang_path)?,
    );
    let mut languages = Vec::new();
    let mut glotto_rows: HashMap<String, usize> = HashMap::new();
    let mut cldf_to_row: HashMap<String, Option<usize>> = HashMap::new();
    for (line, row) in &langs.rows {
        let id = row[l_id].to_string();
        let glotto = row[l_glotto].trim().to_lowercase();
        let target = if glotto.is_empty() {
            warn!(
                "{}:{line}: language {id} has no glottocode, dropped",
                lang_path.display()
            );
            None
        } else if glotto_rows.contains_key(&glotto) {
            warn!(
                "{}:{line}: language {id} repeats glottocode {glotto}, dropped",
                lang_path.display()
            );
            None
        } else {
            glotto_rows.insert(glotto.clone(), languages.len());
            languages.push(glotto);
            Some(languages.len() - 1)
        };
        if cldf_to_row.insert(id.clone(), target).is_some() {
            return Err(Error::data(format!(
                "{}:{line}: duplicate language ID {id}",
                lang_path.display()
            )));
        }
    }

    let params = CsvTable::read(&param_path)?;
    let (p_id, p_name) = (params.require("ID", &param_path)?, params.require("Name", &param_path)?);
    let param_list: Vec<(String, String)> = params
        .rows
        .iter()
        .map(|(_, r)| (r[p_id].to_string(), r[p_name].to_string()))
        .collect();
    let param_pos: HashMap<&str, usize> = param_list
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (id.as_str(), i))
        .collect();
    if param_pos.len() != param_list.len() {
        return Err(Error::data(format!("{}: duplicate parameter ID", param_path.display())));
    }

    let mut declared: Vec<Vec<DeclaredCode>> = (0..param_list.len()).map(|_| Vec::new()).collect();
    let has_codes = code_path.is_file();
    if has_codes {
        let codes = CsvTable::read(&code_path)?;
        let c_param = codes.require("Parameter_ID", &code_path)?;
        let c_id = codes.column("ID");
        let c_name = codes.column("Name");
        if c_id.is_none() && c_name.is_none() {
            return Err(Error::data(format!(
                "{}: needs an ID or Name column",
                code_path.display()
            )));
        }
        for (line, row) in &codes.rows {
            let pid = &row[c_param];
            let Some(&p) = param_pos.get(pid) else {
                return Err(Error::data(format!(
                    "{}:{line}: unknown parameter {pid}",
                    code_path.display()
                )));
            };
            let name = c_name.map(|c| row[c].to_string());
            let id = c_id.map(|c| row[c].to_string());
            let canonical = match &id {
                Some(id) => id.strip_prefix(&format!("{pid}-")).unwrap_or(id).to_string(),
                None => name.clone().unwrap_or_default(),
            };
            if is_missing_marker(&canonical) {
                continue;
            }
            let mut aliases = vec![canonical.clone()];
            aliases.extend(id.iter().cloned());
            aliases.extend(name.iter().cloned());
            declared[p].push(DeclaredCode {
                label: name.filter(|n| !n.is_empty()).unwrap_or_else(|| canonical.clone()),
                canonical,
                aliases,
            });
        }
    }

    let vals = CsvTable::read(&value_path)?;
    let v_lang = vals.require("Language_ID", &value_path)?;
    let v_param = vals.require("Parameter_ID", &value_path)?;
    let v_value = vals.require("Value", &value_path)?;
    let v_code = vals.column("Code_ID");

    struct RawValue {
        row: usize,
        param: usize,
        value: Option<String>,
        code_id: Option<String>,
        line: u64,
    }
    let mut raw = Vec::with_capacity(vals.rows.len());
    for (line, row) in &vals.rows {
        let lid = &row[v_lang];
        let target = cldf_to_row
            .get(lid)
            .ok_or_else(|| Error::data(format!("{}:{line}: unknown language {lid}", value_path.display())))?;
        let Some(target) = *target else { continue };
        let pid = &row[v_param];
        let &param = param_pos
            .get(pid)
            .ok_or_else(|| Error::data(format!("{}:{line}: unknown parameter {pid}", value_path.display())))?;
        let value = row[v_value].trim();
        raw.push(RawValue {
            row: target,
            param,
            value: (!value.is_empty() && value != "no_cov").then(|| value.to_string()),
            code_id: v_code.map(|c| row[c].trim().to_string()).filter(|c| !c.is_empty()),
            line: *line,
        });
    }

    // Domains: declared codes, or observed values over the whole dataset.
    let mut features = Vec::with_capacity(param_list.len());
    let mut alias_maps: Vec<HashMap<String, u32>> = Vec::with_capacity(param_list.len());
    let mut keep = vec![true; param_list.len()];
    for (p, (id, name)) in param_list.iter().enumerate() {
        let mut alias_map = HashMap::new();
        let codes = std::mem::take(&mut declared[p]);
        let (domain, labels) = if !codes.is_empty() {
            for (i, code) in codes.iter().enumerate() {
                for a in &code.aliases {
                    alias_map.entry(a.clone()).or_insert(i as u32);
                }
            }
            codes.into_iter().map(|c| (c.canonical, c.label)).unzip()
        } else {
            if has_codes {
                warn!("feature {id} has no declared codes, using observed values");
            }
            let mut observed: Vec<String> = raw
                .iter()
                .filter(|r| r.param == p)
                .filter_map(|r| r.value.clone())
                .filter(|v| v != "?")
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            observed.sort_by(|a, b| code_order(a, b));
            for (i, v) in observed.iter().enumerate() {
                alias_map.insert(v.clone(), i as u32);
            }
            (observed.clone(), observed)
        };
        if domain.is_empty() {
            warn!("feature {id} has no values, dropped");
            keep[p] = false;
            features.push(None);
        } else {
            features.push(Some(FeatureSpec::with_labels(id, name, domain, labels)?));
        }
        alias_maps.push(alias_map);
    }

    let n_params = param_list.len();
    let mut cells = vec![Cell::MissingNoCoverage; languages.len() * n_params];
    for r in &raw {
        let cell = match (&r.value, &r.code_id) {
            (Some(v), _) if v == "?" => Cell::MissingUnknown,
            (None, None) => Cell::MissingNoCoverage,
            (value, code_id) => {
                let aliases = &alias_maps[r.param];
                let hit = code_id
                    .as_ref()
                    .and_then(|c| aliases.get(c))
                    .or_else(|| value.as_ref().and_then(|v| aliases.get(v)));
                match hit {
                    Some(&i) => Cell::Value(i),
                    None => {
                        return Err(Error::data(format!(
                            "{}:{}: value '{}' of feature {} for language {} is not in its code table",
                            value_path.display(),
                            r.line,
                            value.as_deref().or(code_id.as_deref()).unwrap_or(""),
                            param_list[r.param].0,
                            languages[r.row]
                        )))
                    }
                }
            }
        };
        let slot = &mut cells[r.row * n_params + r.param];
        if *slot != Cell::MissingNoCoverage && *slot != cell {
            warn!(
                "{}:{}: second value for {} / {}, keeping the first",
                value_path.display(),
                r.line,
                languages[r.row],
                param_list[r.param].0
            );
            continue;
        }
        *slot = cell;
    }

    let kept: Vec<usize> = (0..n_params).filter(|&p| keep[p]).collect();
    let features: Vec<FeatureSpec> = features.into_iter().flatten().collect();
    let cells = if kept.len() == n_params {
        cells
    } else {
        (0..languages.len())
            .flat_map(|l| kept.iter().map(move |&p| (l, p)))
            .map(|(l, p)| cells[l * n_params + p])
            .collect()
    };
    FeatureMatrix::new(languages, features, cells)
}
