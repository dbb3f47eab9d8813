//! Real-valued language vectors and their sources: one-hot syntactic
//! features, lineage indicators, external TSV tables, plus ingestion of
//! precomputed distance matrices.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cldf::FeatureMatrix;
use crate::distances::DistanceMatrix;
use crate::error::{csv_error, Error, Result};
use crate::langmeta::LanguageRecord;
use crate::metrics::{Exclusion, ExclusionReason, LanguageSample};

/// Marker for an undefined cell in vector tables.
pub const MISSING_CELL: &str = "--";

/// Languages × labelled dimensions, values in [0, 1] with a definedness mask.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dims: Vec<String>,
    languages: Vec<String>,
    values: Vec<f64>,
    defined: Vec<bool>,
    index: HashMap<String, usize>,
}

/// Borrowed row of a [`VectorSet`].
#[derive(Debug, Clone, Copy)]
pub struct VectorView<'a> {
    pub values: &'a [f64],
    pub defined: &'a [bool],
}

impl VectorView<'_> {
    pub fn get(&self, dim: usize) -> Option<f64> {
        self.defined[dim].then(|| self.values[dim])
    }
}

impl VectorSet {
    /// Row-major `values`/`defined`. Undefined entries are stored as 0.
    pub fn new(dims: Vec<String>, languages: Vec<String>, mut values: Vec<f64>, defined: Vec<bool>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::data("vector set without dimensions"));
        }
        let n = dims.len() * languages.len();
        if values.len() != n || defined.len() != n {
            return Err(Error::data(format!(
                "vector storage of {} / {} entries for {} languages x {} dims",
                values.len(),
                defined.len(),
                languages.len(),
                dims.len()
            )));
        }
        let unique: BTreeSet<_> = dims.iter().collect();
        if unique.len() != dims.len() {
            return Err(Error::data("duplicate dimension label"));
        }
        let mut index = HashMap::with_capacity(languages.len());
        for (i, l) in languages.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate language '{l}' in vector set")));
            }
        }
        for (i, (v, &d)) in values.iter_mut().zip(&defined).enumerate() {
            if !d {
                *v = 0.0;
            } else if !(0.0..=1.0).contains(v) {
                return Err(Error::data(format!(
                    "value {v} for {} / {} outside [0, 1]",
                    languages[i / dims.len()],
                    dims[i % dims.len()]
                )));
            }
        }
        Ok(VectorSet {
            dims,
            languages,
            values,
            defined,
            index,
        })
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn n_dims(&self) -> usize {
        self.dims.len()
    }

    pub fn n_languages(&self) -> usize {
        self.languages.len()
    }

    pub fn contains(&self, language: &str) -> bool {
        self.index.contains_key(language)
    }

    pub fn index_of(&self, language: &str) -> Option<usize> {
        self.index.get(language).copied()
    }

    pub fn row(&self, i: usize) -> VectorView<'_> {
        let d = self.dims.len();
        VectorView {
            values: &self.values[i * d..(i + 1) * d],
            defined: &self.defined[i * d..(i + 1) * d],
        }
    }

    pub fn vector(&self, language: &str) -> Option<VectorView<'_>> {
        self.index_of(language).map(|i| self.row(i))
    }

    pub fn coverage(&self, language: &str) -> Option<Coverage> {
        let v = self.vector(language)?;
        let defined_dims = v.defined.iter().filter(|&&d| d).count();
        Some(Coverage {
            language: language.to_string(),
            defined_dims,
            total_dims: self.n_dims(),
            ratio: defined_dims as f64 / self.n_dims() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub language: String,
    pub defined_dims: usize,
    pub total_dims: usize,
    pub ratio: f64,
}

/// One-hot encoding of a feature matrix: a `FEATURE=VALUE` dimension per
/// domain value. Missing cells (either kind) mask all of that feature's
/// dimensions.
pub fn binarize(matrix: &FeatureMatrix) -> Result<VectorSet> {
    if matrix.n_languages() == 0 || matrix.n_features() == 0 {
        return Err(Error::data("cannot binarize an empty feature matrix"));
    }
    let mut dims = Vec::new();
    let mut offsets = Vec::with_capacity(matrix.n_features());
    for f in matrix.features() {
        offsets.push(dims.len());
        dims.extend(f.value_domain.iter().map(|v| format!("{}={v}", f.id)));
    }
    let width = dims.len();
    let mut values = vec![0.0; width * matrix.n_languages()];
    let mut defined = vec![false; width * matrix.n_languages()];
    for l in 0..matrix.n_languages() {
        for (f, spec) in matrix.features().iter().enumerate() {
            if let Some(v) = matrix.cell(l, f).value() {
                let start = l * width + offsets[f];
                defined[start..start + spec.domain_size()].fill(true);
                values[start + v] = 1.0;
            }
        }
    }
    VectorSet::new(dims, matrix.languages().to_vec(), values, defined)
}

/// Indicator vectors over all ancestor nodes (the language itself included)
/// found in the records' lineages. Dimensions are sorted glottocodes.
pub fn lineage_vectors(records: &[&LanguageRecord]) -> Result<VectorSet> {
    let dims: Vec<String> = records
        .iter()
        .flat_map(|r| r.lineage.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pos: HashMap<&str, usize> = dims.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
    let mut values = vec![0.0; dims.len() * records.len()];
    for (r, record) in records.iter().enumerate() {
        if record.lineage.is_empty() {
            return Err(Error::data(format!("{} has an empty lineage", record.glottocode)));
        }
        for node in &record.lineage {
            values[r * dims.len() + pos[node.as_str()]] = 1.0;
        }
    }
    let defined = vec![true; values.len()];
    let languages = records.iter().map(|r| r.glottocode.clone()).collect();
    VectorSet::new(dims, languages, values, defined)
}

/// Reads a TSV with header `language<TAB>dim...`; cells are decimals in
/// [0, 1] or `--`.
pub fn load_vector_table(path: impl AsRef<Path>) -> Result<VectorSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 {
        return Err(Error::data(format!(
            "{}: expected header 'language<TAB>dim...'",
            path.display()
        )));
    }
    let dims: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut languages = Vec::new();
    let mut values = Vec::new();
    let mut defined = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != headers.len() {
            return Err(Error::data(format!(
                "{}:{line}: {} cells, expected {}",
                path.display(),
                row.len(),
                headers.len()
            )));
        }
        languages.push(row[0].to_string());
        for cell in row.iter().skip(1) {
            if cell == MISSING_CELL {
                values.push(0.0);
                defined.push(false);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::data(format!("{}:{line}: unparsable value '{cell}'", path.display())))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::data(format!(
                    "{}:{line}: value {v} outside [0, 1]",
                    path.display()
                )));
            }
            values.push(v);
            defined.push(true);
        }
    }
    if languages.is_empty() {
        return Err(Error::data(format!("{}: no vectors", path.display())));
    }
    VectorSet::new(dims, languages, values, defined).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Symmetry tolerance for ingested distance matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Reads a square distance CSV whose first row and first column carry the
/// same language ids in the same order. Empty cells are missing pairs.
pub fn load_distance_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for row in reader.records() {
        rows.push(row.map_err(|e| csv_error(path, e))?);
    }
    let err = |msg: String| Error::data(format!("{}: {msg}", path.display()));
    let Some(header) = rows.first() else {
        return Err(err("empty distance matrix".into()));
    };
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = ids.len();
    if n == 0 || rows.len() != n + 1 {
        return Err(err(format!(
            "expected {n} data rows for {n} header ids, found {}",
            rows.len().saturating_sub(1)
        )));
    }
    let mut cells: Vec<Option<f64>> = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().skip(1).enumerate() {
        if row.len() != n + 1 {
            return Err(err(format!(
                "row {} has {} cells, expected {}",
                i + 2,
                row.len(),
                n + 1
            )));
        }
        if row[0] != ids[i] {
            return Err(err(format!(
                "row {} is labelled '{}', header has '{}'",
                i + 2,
                &row[0],
                ids[i]
            )));
        }
        for (j, cell) in row.iter().skip(1).enumerate() {
            if cell.is_empty() {
                cells.push(None);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| err(format!("unparsable distance '{cell}' at ({}, {})", ids[i], ids[j])))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(err(format!("distance {v} at ({}, {}) outside [0, 1]", ids[i], ids[j])));
            }
            cells.push(Some(v));
        }
    }
    let mut dm = DistanceMatrix::empty(ids.clone())?;
    for i in 0..n {
        match cells[i * n + i] {
            None | Some(0.0) => {}
            Some(v) => return Err(err(format!("non-zero diagonal {v} for {}", ids[i]))),
        }
        for j in i + 1..n {
            match (cells[i * n + j], cells[j * n + i]) {
                (None, None) => {}
                (Some(a), Some(b)) if (a - b).abs() <= SYMMETRY_TOLERANCE => dm.set(i, j, a)?,
                (a, b) => {
                    return Err(err(format!(
                        "asymmetric entries for ({}, {}): {a:?} vs {b:?}",
                        ids[i], ids[j]
                    )))
                }
            }
        }
    }
    Ok(dm)
}

/// Outcome of [`coverage_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSplit {
    /// Sample members that passed, in sample order. May be empty.
    pub kept: Vec<String>,
    pub excluded: Vec<Exclusion>,
}

/// Keeps sample languages present in `vs` whose coverage ratio reaches
/// `threshold`.
pub fn coverage_filter(vs: &VectorSet, sample: &LanguageSample, threshold: f64) -> Result<CoverageSplit> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Usage(format!("coverage threshold {threshold} outside [0, 1]")));
    }
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for id in sample.ids() {
        match vs.coverage(id) {
            None => excluded.push(Exclusion::new(id, ExclusionReason::Absent)),
            Some(c) if c.ratio < threshold => excluded.push(Exclusion::new(
                id,
                ExclusionReason::LowCoverage {
                    ratio: c.ratio,
                    defined_dims: c.defined_dims,
                    total_dims: c.total_dims,
                    threshold,
                },
            )),
            Some(_) => kept.push(id.clone()),
        }
    }
    Ok(CoverageSplit { kept, excluded })
}
