//! Pairwise language distances and the symmetric [`DistanceMatrix`].

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::langmeta::{LanguageRecord, Registry};
use crate::metrics::{Exclusion, ExclusionReason, LanguageSample};
use crate::vectors::{VectorSet, VectorView};

/// IUGG mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Symmetric matrix of pairwise distances with missing pairs.
///
/// The diagonal is always zero. Values lie in [0, 1] unless the matrix was
/// created with [`DistanceMatrix::empty_unbounded`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    entries: Vec<Option<f64>>,
    bounded: bool,
}

impl DistanceMatrix {
    /// All off-diagonal pairs missing.
    pub fn empty(ids: Vec<String>) -> Result<Self> {
        Self::with_bound(ids, true)
    }

    /// Like [`DistanceMatrix::empty`] but accepts distances above 1, for raw
    /// Euclidean norms.
    pub fn empty_unbounded(ids: Vec<String>) -> Result<Self> {
        Self::with_bound(ids, false)
    }

    fn with_bound(ids: Vec<String>, bounded: bool) -> Result<Self> {
        let n = ids.len();
        let mut index = HashMap::with_capacity(n);
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate id '{id}' in distance matrix")));
            }
        }
        let mut entries = vec![None; n * n];
        for i in 0..n {
            entries[i * n + i] = Some(0.0);
        }
        Ok(DistanceMatrix {
            ids,
            index,
            entries,
            bounded,
        })
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i == j {
            return Err(Error::data("diagonal entries are fixed at 0"));
        }
        let upper = if self.bounded { 1.0 } else { f64::INFINITY };
        if !value.is_finite() || !(0.0..=upper).contains(&value) {
            return Err(Error::data(format!(
                "distance {value} between {} and {} out of range",
                self.ids[i], self.ids[j]
            )));
        }
        let n = self.ids.len();
        self.entries[i * n + j] = Some(value);
        self.entries[j * n + i] = Some(value);
        Ok(())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i * self.ids.len() + j]
    }

    pub fn get_by_id(&self, a: &str, b: &str) -> Option<f64> {
        self.get(self.index_of(a)?, self.index_of(b)?)
    }

    /// Sub-matrix over `ids` (all of which must be present), in that order.
    pub fn slice<S: AsRef<str>>(&self, ids: &[S]) -> Result<DistanceMatrix> {
        let pos: Vec<usize> = ids
            .iter()
            .map(|id| {
                self.index_of(id.as_ref())
                    .ok_or_else(|| Error::data(format!("'{}' not in distance matrix", id.as_ref())))
            })
            .collect::<Result<_>>()?;
        let mut out = Self::with_bound(ids.iter().map(|s| s.as_ref().to_string()).collect(), self.bounded)?;
        for (a, &i) in pos.iter().enumerate() {
            for (b, &j) in pos.iter().enumerate().skip(a + 1) {
                if let Some(v) = self.get(i, j) {
                    out.set(a, b, v)?;
                }
            }
        }
        Ok(out)
    }

    /// Writes the matrix in the CSV layout read by
    /// [`crate::vectors::load_distance_matrix`].
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("language");
        for id in &self.ids {
            let _ = write!(out, ",{id}");
        }
        out.push('\n');
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for j in 0..self.ids.len() {
                match self.get(i, j) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// How [`pair_distance`] scales the Euclidean norm over shared dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairNormalization {
    /// Root mean squared difference over the shared dimensions; in [0, 1].
    #[default]
    SharedMean,
    /// Plain Euclidean norm over the shared dimensions; unbounded.
    Raw,
}

/// Distance between two masked vectors over the dimensions defined in both.
/// `None` when they share no defined dimension.
///
/// # Panics
///
/// If the vectors have different lengths.
pub fn pair_distance(a: VectorView<'_>, b: VectorView<'_>, norm: PairNormalization) -> Option<f64> {
    assert_eq!(
        a.values.len(),
        b.values.len(),
        "pair_distance on vectors of different dimension"
    );
    let mut shared = 0usize;
    let mut sum = 0.0;
    for k in 0..a.values.len() {
        if a.defined[k] && b.defined[k] {
            let d = a.values[k] - b.values[k];
            sum += d * d;
            shared += 1;
        }
    }
    if shared == 0 {
        return None;
    }
    Some(match norm {
        PairNormalization::SharedMean => (sum / shared as f64).sqrt().min(1.0),
        PairNormalization::Raw => sum.sqrt(),
    })
}

/// Great-circle distance divided by half the Earth's circumference, so
/// antipodal points are at 1. `None` if either record lacks coordinates.
pub fn geo_distance(a: &LanguageRecord, b: &LanguageRecord) -> Option<f64> {
    let (mut p, mut q) = (a.coordinates?, b.coordinates?);
    // canonical argument order makes the result bit-for-bit symmetric
    if (q.latitude, q.longitude) < (p.latitude, p.longitude) {
        std::mem::swap(&mut p, &mut q);
    }
    let (phi1, phi2) = (p.latitude.to_radians(), q.latitude.to_radians());
    let dlambda = (q.longitude - p.longitude).to_radians();
    // atan2 form of the central angle stays accurate near antipodes, where
    // the arcsine of the haversine loses precision.
    let y = ((phi2.cos() * dlambda.sin()).powi(2)
        + (phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos()).powi(2))
    .sqrt();
    let x = phi1.sin() * phi2.sin() + phi1.cos() * phi2.cos() * dlambda.cos();
    let arc_km = EARTH_RADIUS_KM * y.atan2(x);
    Some((arc_km / (std::f64::consts::PI * EARTH_RADIUS_KM)).clamp(0.0, 1.0))
}

/// Jaccard distance between the ancestor sets of two lineages.
pub fn genetic_distance(a: &LanguageRecord, b: &LanguageRecord) -> f64 {
    let sa: BTreeSet<&str> = a.lineage.iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = b.lineage.iter().map(String::as_str).collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - sa.intersection(&sb).count() as f64 / union as f64
}

/// Where the pairwise distances of a sample come from.
#[derive(Debug, Clone, Copy)]
pub enum DistanceSource<'a> {
    Vectors {
        set: &'a VectorSet,
        normalization: PairNormalization,
    },
    Geographic(&'a Registry),
    Genetic(&'a Registry),
    Ingested(&'a DistanceMatrix),
}

impl DistanceSource<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceSource::Vectors { .. } => "vectors",
            DistanceSource::Geographic(_) => "geographic",
            DistanceSource::Genetic(_) => "genetic",
            DistanceSource::Ingested(_) => "ingested",
        }
    }

    fn contains(&self, id: &str) -> bool {
        match self {
            DistanceSource::Vectors { set, .. } => set.contains(id),
            DistanceSource::Geographic(r) | DistanceSource::Genetic(r) => r.resolve(id).is_ok(),
            DistanceSource::Ingested(m) => m.contains(id),
        }
    }
}

/// A sample's distance matrix plus the sample languages the source lacked.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub matrix: DistanceMatrix,
    pub excluded: Vec<Exclusion>,
}

/// Distance matrix over the sample languages present in `source`. Absent
/// languages are reported in `excluded`, or fail the call when `strict`.
pub fn build_matrix(sample: &LanguageSample, source: DistanceSource<'_>, strict: bool) -> Result<SampleMatrix> {
    let mut present = Vec::with_capacity(sample.len());
    let mut excluded = Vec::new();
    for id in sample.ids() {
        if source.contains(id) {
            present.push(id.clone());
        } else if strict {
            return Err(Error::sample(format!(
                "'{id}' is absent from the {} source",
                source.name()
            )));
        } else {
            excluded.push(Exclusion::new(id, ExclusionReason::Absent));
        }
    }

    let matrix = match source {
        DistanceSource::Ingested(m) => m.slice(&present)?,
        DistanceSource::Vectors { set, normalization } => {
            let rows: Vec<VectorView<'_>> = present.iter().map(|id| set.vector(id).unwrap()).collect();
            let mut m = match normalization {
                PairNormalization::SharedMean => DistanceMatrix::empty(present)?,
                PairNormalization::Raw => DistanceMatrix::empty_unbounded(present)?,
            };
            fill_pairs(&mut m, |i, j| pair_distance(rows[i], rows[j], normalization))?;
            m
        }
        DistanceSource::Geographic(registry) | DistanceSource::Genetic(registry) => {
            let records: Vec<&LanguageRecord> = present.iter().map(|id| registry.resolve(id).unwrap()).collect();
            let geographic = matches!(source, DistanceSource::Geographic(_));
            let mut m = DistanceMatrix::empty(present)?;
            fill_pairs(&mut m, |i, j| {
                if geographic {
                    geo_distance(records[i], records[j])
                } else {
                    Some(genetic_distance(records[i], records[j]))
                }
            })?;
            m
        }
    };
    Ok(SampleMatrix { matrix, excluded })
}

fn fill_pairs<F>(m: &mut DistanceMatrix, f: F) -> Result<()>
where
    F: Fn(usize, usize) -> Option<f64> + Sync,
{
    let n = m.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<Option<f64>> = pairs.par_iter().map(|&(i, j)| f(i, j)).collect();
    for ((i, j), v) in pairs.into_iter().zip(values) {
        if let Some(v) = v {
            m.set(i, j, v)?;
        }
    }
    Ok(())
}
