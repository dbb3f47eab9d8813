//! Sample-level diversity measures: mean pairwise distance (MPD, and its
//! syntactic variant MPSD) and feature value inclusion (FVI).

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cldf::FeatureMatrix;
use crate::distances::{build_matrix, DistanceMatrix, DistanceSource, PairNormalization};
use crate::error::{Error, Result};
use crate::vectors::{coverage_filter, VectorSet};

/// Default minimum share of defined vector dimensions for MPSD.
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.05;

/// Ordered set of language ids, optionally labelled with where it came
/// from (a paper, a dataset).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageSample {
    ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl LanguageSample {
    pub fn new(ids: Vec<String>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::sample("empty language sample"));
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id) {
                return Err(Error::sample(format!("language '{id}' listed twice")));
            }
        }
        Ok(LanguageSample { ids, label: None })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Parses the sample file format: one code per line, `#` starts a
    /// comment, blank lines are ignored. Codes are lowercased.
    pub fn parse(text: &str) -> Result<Self> {
        let ids = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or("").trim())
            .filter(|code| !code.is_empty())
            .map(str::to_lowercase)
            .collect();
        Self::new(ids)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        let sample = Self::parse(&text).map_err(|e| match e {
            Error::Sample(msg) => Error::sample(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok(match label {
            Some(l) => sample.with_label(l),
            None => sample,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.iter().any(|i| i == id)
    }
}

/// Why a sample language did not enter a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Not present in the data source.
    Absent,
    /// Too few defined vector dimensions.
    LowCoverage {
        ratio: f64,
        defined_dims: usize,
        total_dims: usize,
        threshold: f64,
    },
    /// Every distance from this language to the rest of the sample is missing.
    NoDefinedPairs,
    /// The code could not be resolved to a known language.
    UnknownCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub language: String,
    #[serde(flatten)]
    pub reason: ExclusionReason,
}

impl Exclusion {
    pub fn new(language: impl Into<String>, reason: ExclusionReason) -> Self {
        Exclusion {
            language: language.into(),
            reason,
        }
    }
}

/// Value of a measure with the languages that went into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub value: f64,
    pub used: Vec<String>,
    pub excluded: Vec<Exclusion>,
    /// Defined language pairs for MPD, features for FVI.
    pub count: usize,
    /// Pairs skipped because their distance is missing (MPD only).
    #[serde(default)]
    pub missing_pairs: usize,
}

impl MetricResult {
    /// Renames languages through `names`; ids without an entry are kept.
    pub fn relabel(mut self, names: &HashMap<String, String>) -> Self {
        let rename = |id: &mut String| {
            if let Some(n) = names.get(id) {
                *id = n.clone();
            }
        };
        self.used.iter_mut().for_each(rename);
        self.excluded.iter_mut().for_each(|e| rename(&mut e.language));
        self
    }
}

fn describe_exclusions(excluded: &[Exclusion]) -> String {
    if excluded.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = excluded
        .iter()
        .map(|e| {
            let why = match &e.reason {
                ExclusionReason::Absent => "absent".to_string(),
                ExclusionReason::LowCoverage { ratio, .. } => format!("coverage {ratio:.3}"),
                ExclusionReason::NoDefinedPairs => "no defined distances".to_string(),
                ExclusionReason::UnknownCode => "unknown code".to_string(),
            };
            format!("{} ({why})", e.language)
        })
        .collect();
    format!("; excluded: {}", parts.join(", "))
}

/// Mean distance over all unordered pairs of sample languages with a
/// defined distance in `dm`.
///
/// Languages missing from `dm`, or with no defined distance to any other
/// sample language, are excluded. At least two languages must remain.
pub fn mpd(sample: &LanguageSample, dm: &DistanceMatrix) -> Result<MetricResult> {
    let mut excluded = Vec::new();
    let mut present: Vec<(&str, usize)> = Vec::with_capacity(sample.len());
    for id in sample.ids() {
        match dm.index_of(id) {
            Some(i) => present.push((id, i)),
            None => excluded.push(Exclusion::new(id, ExclusionReason::Absent)),
        }
    }
    let mut used = Vec::with_capacity(present.len());
    if present.len() >= 2 {
        for &(id, i) in &present {
            let connected = present.iter().any(|&(_, j)| j != i && dm.get(i, j).is_some());
            if connected {
                used.push((id, i));
            } else {
                excluded.push(Exclusion::new(id, ExclusionReason::NoDefinedPairs));
            }
        }
    } else {
        used = present;
    }
    if used.len() < 2 {
        return Err(Error::sample(format!(
            "need at least 2 usable languages, have {}{}",
            used.len(),
            describe_exclusions(&excluded)
        )));
    }

    // Sum in id order so the value does not depend on sample order.
    let mut order = used.clone();
    order.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut missing = 0usize;
    for (a, &(_, i)) in order.iter().enumerate() {
        for &(_, j) in &order[a + 1..] {
            match dm.get(i, j) {
                Some(d) => {
                    sum += d;
                    count += 1;
                }
                None => missing += 1,
            }
        }
    }
    Ok(MetricResult {
        value: sum / count as f64,
        used: used.iter().map(|(id, _)| id.to_string()).collect(),
        excluded,
        count,
        missing_pairs: missing,
    })
}

/// Mean pairwise distance over vector representations, after dropping
/// languages whose vectors cover less than `threshold` of the dimensions.
pub fn mpsd(
    sample: &LanguageSample,
    vs: &VectorSet,
    threshold: f64,
    normalization: PairNormalization,
) -> Result<MetricResult> {
    let split = coverage_filter(vs, sample, threshold)?;
    let kept = kept_sample(split.kept, &split.excluded)?;
    let built = build_matrix(&kept, DistanceSource::Vectors { set: vs, normalization }, false)?;
    finish_with(mpd(&kept, &built.matrix), split.excluded)
}

/// MPD over a precomputed matrix, with the coverage filter of [`mpsd`]
/// taken from `coverage`. Languages absent from `coverage` are excluded.
pub fn mpd_with_coverage(
    sample: &LanguageSample,
    dm: &DistanceMatrix,
    coverage: &VectorSet,
    threshold: f64,
) -> Result<MetricResult> {
    let split = coverage_filter(coverage, sample, threshold)?;
    let kept = kept_sample(split.kept, &split.excluded)?;
    finish_with(mpd(&kept, dm), split.excluded)
}

fn kept_sample(kept: Vec<String>, excluded: &[Exclusion]) -> Result<LanguageSample> {
    if kept.len() < 2 {
        return Err(Error::sample(format!(
            "need at least 2 usable languages, have {}{}",
            kept.len(),
            describe_exclusions(excluded)
        )));
    }
    LanguageSample::new(kept)
}

fn finish_with(result: Result<MetricResult>, mut earlier: Vec<Exclusion>) -> Result<MetricResult> {
    match result {
        Ok(mut r) => {
            earlier.append(&mut r.excluded);
            r.excluded = earlier;
            Ok(r)
        }
        Err(Error::Sample(msg)) => Err(Error::sample(format!("{msg}{}", describe_exclusions(&earlier)))),
        Err(e) => Err(e),
    }
}

/// Attested share of one feature's value domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInclusion {
    pub feature_id: String,
    /// Distinct attested value codes, in domain order.
    pub covered: Vec<String>,
    pub domain_size: usize,
    pub ratio: f64,
}

/// [`fvi`] together with its per-feature terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FviBreakdown {
    pub result: MetricResult,
    pub features: Vec<FeatureInclusion>,
}

/// Feature value inclusion with its per-feature decomposition.
pub fn fvi_breakdown(sample: &LanguageSample, matrix: &FeatureMatrix) -> Result<FviBreakdown> {
    if matrix.n_features() == 0 {
        return Err(Error::data("feature matrix has no features"));
    }
    let mut used = Vec::new();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for id in sample.ids() {
        match matrix.language_index(id) {
            Some(r) => {
                used.push(id.clone());
                rows.push(r);
            }
            None => excluded.push(Exclusion::new(id, ExclusionReason::Absent)),
        }
    }
    if used.is_empty() {
        return Err(Error::sample(format!(
            "no sample language is in the feature matrix{}",
            describe_exclusions(&excluded)
        )));
    }

    let mut features = Vec::with_capacity(matrix.n_features());
    for (f, spec) in matrix.features().iter().enumerate() {
        let mut seen = vec![false; spec.domain_size()];
        for &r in &rows {
            if let Some(v) = matrix.cell(r, f).value() {
                seen[v] = true;
            }
        }
        let covered: Vec<String> = seen
            .iter()
            .zip(&spec.value_domain)
            .filter(|(s, _)| **s)
            .map(|(_, v)| v.clone())
            .collect();
        features.push(FeatureInclusion {
            feature_id: spec.id.clone(),
            ratio: covered.len() as f64 / spec.domain_size() as f64,
            covered,
            domain_size: spec.domain_size(),
        });
    }
    let value = features.iter().map(|f| f.ratio).sum::<f64>() / features.len() as f64;
    Ok(FviBreakdown {
        result: MetricResult {
            value,
            used,
            excluded,
            count: features.len(),
            missing_pairs: 0,
        },
        features,
    })
}

/// Mean over features of the share of each feature's non-missing values
/// attested in the sample. Languages absent from `matrix` are excluded.
pub fn fvi(sample: &LanguageSample, matrix: &FeatureMatrix) -> Result<MetricResult> {
    fvi_breakdown(sample, matrix).map(|b| b.result)
}

pub fn fvi_per_feature(sample: &LanguageSample, matrix: &FeatureMatrix) -> Result<Vec<FeatureInclusion>> {
    fvi_breakdown(sample, matrix).map(|b| b.features)
}

/// Re-expresses a sample in the identifiers a data source uses.
///
/// Each sample id is replaced by the first of its aliases (see
/// [`crate::langmeta::Registry::aliases`]) for which `contains` holds. The
/// returned map translates source ids back to sample ids.
pub fn align_sample(
    sample: &LanguageSample,
    registry: Option<&crate::langmeta::Registry>,
    contains: impl Fn(&str) -> bool,
) -> Result<(LanguageSample, HashMap<String, String>)> {
    let mut ids = Vec::with_capacity(sample.len());
    let mut back = HashMap::new();
    for id in sample.ids() {
        let candidates = match registry {
            Some(r) => r.aliases(id),
            None => vec![id.clone()],
        };
        let chosen = candidates
            .into_iter()
            .find(|c| contains(c) && !back.contains_key(c))
            .unwrap_or_else(|| id.clone());
        if back.contains_key(&chosen) {
            return Err(Error::sample(format!(
                "'{id}' and '{}' refer to the same language",
                back[&chosen]
            )));
        }
        back.insert(chosen.clone(), id.clone());
        ids.push(chosen);
    }
    let mut aligned = LanguageSample::new(ids)?;
    aligned.label = sample.label.clone();
    Ok((aligned, back))
}
