//! Per-sample diversity reports and the figures built from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audit::csv_field;
use crate::cldf::FeatureMatrix;
use crate::distances::{build_matrix, DistanceMatrix, DistanceSource, PairNormalization};
use crate::error::{Error, Result};
use crate::langmeta::{LanguageRecord, Registry};
use crate::metrics::{
    align_sample, fvi_breakdown, mpd, mpd_with_coverage, mpsd, ExclusionReason, FeatureInclusion, LanguageSample,
    MetricResult, DEFAULT_COVERAGE_THRESHOLD,
};
use crate::svg::{self, Axis, Svg, MARGIN_BOTTOM, MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP};
use crate::vectors::VectorSet;

pub use crate::svg::PlotOptions;

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Ends of the linear colour ramp used by [`render_map`] (lowest and
/// highest count).
pub const RAMP_LOW: [u8; 3] = [0xfe, 0xe0, 0x8b];
pub const RAMP_HIGH: [u8; 3] = [0xb3, 0x00, 0x00];
pub const MAP_RADIUS: f64 = 4.0;
pub const STRIP_COLOR: &str = "#1f78b4";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Distances computed from typological feature vectors.
    Syntactic,
    Genetic,
    Geographic,
    /// A precomputed distance matrix.
    Ingested,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Syntactic => "syntactic",
            SourceKind::Genetic => "genetic",
            SourceKind::Geographic => "geographic",
            SourceKind::Ingested => "ingested",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Computed {
        result: MetricResult,
    },
    Failed {
        error: String,
    },
    /// The source was not configured.
    Absent,
}

impl Outcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            Outcome::Computed { result } => Some(result.value),
            _ => None,
        }
    }

    pub fn result(&self) -> Option<&MetricResult> {
        match self {
            Outcome::Computed { result } => Some(result),
            _ => None,
        }
    }

    fn failure(&self) -> Option<&str> {
        match self {
            Outcome::Failed { error } => Some(error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEntry {
    pub source: SourceKind,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub schema_version: String,
    pub tool_version: String,
    pub dataset_versions: BTreeMap<String, String>,
    pub label: Option<String>,
    pub sample: Vec<String>,
    pub n_languages: usize,
    pub mpd: Vec<DistanceEntry>,
    pub fvi: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fvi_features: Option<Vec<FeatureInclusion>>,
}

/// Data the report draws on. Unset fields are skipped.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportSources<'a> {
    /// Feature vectors for native syntactic distances; also supplies the
    /// coverage filter for `distances`.
    pub vectors: Option<&'a VectorSet>,
    /// Precomputed (syntactic) distances.
    pub distances: Option<&'a DistanceMatrix>,
    /// Enables geographic and genetic distances, and lets sample codes be
    /// matched to the identifiers each source uses.
    pub registry: Option<&'a Registry>,
    pub features: Option<&'a FeatureMatrix>,
}

impl ReportSources<'_> {
    fn is_empty(&self) -> bool {
        self.vectors.is_none() && self.distances.is_none() && self.registry.is_none() && self.features.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub coverage_threshold: f64,
    pub normalization: PairNormalization,
    /// Fail instead of excluding languages a source does not know.
    pub strict: bool,
    pub per_feature: bool,
    pub dataset_versions: BTreeMap<String, String>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            coverage_threshold: DEFAULT_COVERAGE_THRESHOLD,
            normalization: PairNormalization::default(),
            strict: false,
            per_feature: false,
            dataset_versions: BTreeMap::new(),
        }
    }
}

/// Runs `f` on the sample re-expressed in the ids of a source and maps the
/// result back to the sample's own ids.
fn aligned<F>(
    sample: &LanguageSample,
    registry: Option<&Registry>,
    contains: impl Fn(&str) -> bool,
    f: F,
) -> Result<MetricResult>
where
    F: FnOnce(&LanguageSample) -> Result<MetricResult>,
{
    let (local, back) = align_sample(sample, registry, contains)?;
    f(&local).map(|r| r.relabel(&back))
}

fn outcome(result: Result<MetricResult>, strict: bool, source: &str) -> Result<Outcome> {
    match result {
        Ok(r) => {
            if strict {
                if let Some(e) = r.excluded.iter().find(|e| e.reason == ExclusionReason::Absent) {
                    return Err(Error::sample(format!(
                        "'{}' is absent from the {source} source",
                        e.language
                    )));
                }
            }
            Ok(Outcome::Computed { result: r })
        }
        Err(Error::Sample(msg)) => Ok(Outcome::Failed { error: msg }),
        Err(e) => Err(e),
    }
}

fn registry_mpd(sample: &LanguageSample, source: DistanceSource<'_>) -> Result<MetricResult> {
    // The matrix only holds languages the registry knows; mpd reports the
    // rest as absent.
    let built = build_matrix(sample, source, false)?;
    mpd(sample, &built.matrix)
}

/// Computes every measure the configured sources allow.
///
/// Sources that cannot produce a value for this sample (for example, fewer
/// than two of its languages are covered) are recorded as failed; the call
/// itself fails only when no source produces a value.
pub fn build_report(
    sample: &LanguageSample,
    sources: &ReportSources<'_>,
    options: &ReportOptions,
) -> Result<SampleReport> {
    if sources.is_empty() {
        return Err(Error::Usage("no data source configured".into()));
    }
    if !(0.0..=1.0).contains(&options.coverage_threshold) {
        return Err(Error::Usage(format!(
            "coverage threshold {} outside [0, 1]",
            options.coverage_threshold
        )));
    }
    let reg = sources.registry;
    let strict = options.strict;
    let mut entries = Vec::new();

    if let Some(vs) = sources.vectors {
        let r = aligned(
            sample,
            reg,
            |c| vs.contains(c),
            |s| mpsd(s, vs, options.coverage_threshold, options.normalization),
        );
        entries.push(DistanceEntry {
            source: SourceKind::Syntactic,
            outcome: outcome(r, strict, "syntactic")?,
        });
    }
    if let Some(dm) = sources.distances {
        let r = aligned(
            sample,
            reg,
            |c| dm.contains(c),
            |s| match sources.vectors {
                // The coverage filter needs the vectors under the same ids as
                // the matrix; both usually come from the same resource.
                Some(vs) => mpd_with_coverage(s, dm, vs, options.coverage_threshold),
                None => mpd(s, dm),
            },
        );
        entries.push(DistanceEntry {
            source: SourceKind::Ingested,
            outcome: outcome(r, strict, "ingested")?,
        });
    }
    if let Some(registry) = reg {
        entries.push(DistanceEntry {
            source: SourceKind::Genetic,
            outcome: outcome(
                registry_mpd(sample, DistanceSource::Genetic(registry)),
                strict,
                "genetic",
            )?,
        });
        entries.push(DistanceEntry {
            source: SourceKind::Geographic,
            outcome: outcome(
                registry_mpd(sample, DistanceSource::Geographic(registry)),
                strict,
                "geographic",
            )?,
        });
    }
    entries.sort_by_key(|e| e.source);

    let (fvi, fvi_features) = match sources.features {
        None => (Outcome::Absent, None),
        Some(fm) => {
            let mut features = None;
            let r = aligned(
                sample,
                reg,
                |c| fm.contains_language(c),
                |s| {
                    fvi_breakdown(s, fm).map(|b| {
                        features = Some(b.features);
                        b.result
                    })
                },
            );
            let o = outcome(r, strict, "feature")?;
            (o, if options.per_feature { features } else { None })
        }
    };

    let computed = entries.iter().any(|e| e.outcome.value().is_some()) || fvi.value().is_some();
    if !computed {
        let causes: Vec<String> = entries
            .iter()
            .filter_map(|e| e.outcome.failure().map(|m| format!("{}: {m}", e.source.as_str())))
            .chain(fvi.failure().map(|m| format!("fvi: {m}")))
            .collect();
        return Err(Error::sample(format!(
            "no measure could be computed ({})",
            causes.join("; ")
        )));
    }

    Ok(SampleReport {
        schema_version: SCHEMA_VERSION.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        dataset_versions: options.dataset_versions.clone(),
        label: sample.label().map(str::to_string),
        sample: sample.ids().to_vec(),
        n_languages: sample.len(),
        mpd: entries,
        fvi,
        fvi_features,
    })
}

impl SampleReport {
    pub fn entry(&self, source: SourceKind) -> Option<&DistanceEntry> {
        self.mpd.iter().find(|e| e.source == source)
    }

    fn value_of(&self, source: SourceKind) -> Option<f64> {
        self.entry(source).and_then(|e| e.outcome.value())
    }

    fn mpsd_result(&self) -> Option<&MetricResult> {
        [SourceKind::Ingested, SourceKind::Syntactic]
            .into_iter()
            .find_map(|s| self.entry(s).and_then(|e| e.outcome.result()))
    }

    /// Syntactic MPD, taken from precomputed distances when present.
    pub fn mpsd(&self) -> Option<f64> {
        self.mpsd_result().map(|r| r.value)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::data(format!("cannot encode report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(format!("invalid report: {e}")))
    }

    fn display_label(&self) -> &str {
        self.label.as_deref().unwrap_or("sample")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One line per report: `sample,n_languages,mpsd,fvi,genetic,geographic`.
/// Unavailable measures are left empty.
pub fn to_csv(reports: &[SampleReport]) -> String {
    let mut out = String::from("sample,n_languages,mpsd,fvi,genetic,geographic\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(r.display_label()),
            r.n_languages,
            opt(r.mpsd()),
            opt(r.fvi.value()),
            opt(r.value_of(SourceKind::Genetic)),
            opt(r.value_of(SourceKind::Geographic)),
        );
    }
    out
}

/// Marks MPSD values computed after dropping low-coverage languages.
pub const LOW_COVERAGE_MARK: &str = "†";
/// Marks FVI values computed without some sample languages.
pub const MISSING_MARK: &str = "‡";

/// Dataset-overview table, largest samples first.
pub fn to_markdown(reports: &[SampleReport]) -> String {
    let mut sorted: Vec<&SampleReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        b.n_languages
            .cmp(&a.n_languages)
            .then_with(|| a.display_label().cmp(b.display_label()))
    });
    let mut out = String::from("| Sample | \\|L\\| | MPSD | FVI |\n|---|---:|---:|---:|\n");
    for r in sorted {
        let mpsd = match r.mpsd_result() {
            Some(m) => {
                let low = m
                    .excluded
                    .iter()
                    .any(|e| matches!(e.reason, ExclusionReason::LowCoverage { .. }));
                format!("{:.2}{}", m.value, if low { LOW_COVERAGE_MARK } else { "" })
            }
            None => "–".to_string(),
        };
        let fvi = match r.fvi.result() {
            Some(m) => format!(
                "{:.2}{}",
                m.value,
                if m.excluded.is_empty() { "" } else { MISSING_MARK }
            ),
            None => "–".to_string(),
        };
        let _ = writeln!(
            out,
            "| {} | {} | {mpsd} | {fvi} |",
            r.display_label().replace('|', "\\|"),
            r.n_languages
        );
    }
    let _ = write!(
        out,
        "\n{LOW_COVERAGE_MARK} languages below the coverage threshold were dropped. \
         {MISSING_MARK} some languages are missing from the feature database.\n"
    );
    out
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn plot_area(opts: &PlotOptions) -> (f64, f64, f64, f64) {
    let (w, h) = (opts.width as f64, opts.height as f64);
    (MARGIN_LEFT, w - MARGIN_RIGHT, MARGIN_TOP, h - MARGIN_BOTTOM)
}

/// One tick per value on a fixed [0, 1] axis, annotated with μ and σ.
pub fn render_distribution_strip(values: &[f64], opts: &PlotOptions) -> Result<String> {
    if values.is_empty() {
        return Err(Error::data("no values to plot"));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::data(format!("value {v} outside [0, 1]")));
    }
    let (left, right, top, bottom) = plot_area(opts);
    let xs = Axis::fixed(0.0, 1.0, left, right);
    let ys = Axis::fixed(0.0, 1.0, bottom, top);
    let mut doc = Svg::new(opts.width, opts.height);
    let unlabelled_y = PlotOptions {
        y_label: String::new(),
        ..opts.clone()
    };
    svg::frame(&mut doc, &unlabelled_y, xs, ys);
    let (mu, sigma) = mean_std(values);
    let mid = (top + bottom) / 2.0;
    let half = (bottom - top) / 4.0;
    doc.open_group("ticks", "series", STRIP_COLOR);
    for v in values {
        let x = xs.map(*v);
        doc.line(x, mid - half, x, mid + half, STRIP_COLOR, 1.5);
    }
    doc.close_group();
    doc.line(xs.map(mu), top, xs.map(mu), bottom, "#e31a1c", 1.0);
    doc.text(right, top - 8.0, 12, "end", &format!("μ = {mu:.2}, σ = {sigma:.2}"));
    Ok(doc.finish())
}

/// Scatter of (sample size, value) points.
pub fn render_scatter_xy(points: &[(i64, f64)], opts: &PlotOptions) -> Result<String> {
    if points.is_empty() {
        return Err(Error::data("no points to plot"));
    }
    if let Some((c, _)) = points.iter().find(|(c, _)| *c < 0) {
        return Err(Error::data(format!("negative language count {c}")));
    }
    if let Some((_, v)) = points.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::data(format!("non-finite value {v}")));
    }
    let (left, right, top, bottom) = plot_area(opts);
    let xs = Axis::fit(points.iter().map(|p| p.0 as f64), left, right);
    let ys = Axis::fit(points.iter().map(|p| p.1), bottom, top);
    let mut doc = Svg::new(opts.width, opts.height);
    svg::frame(&mut doc, opts, xs, ys);
    doc.open_group("points", "series", STRIP_COLOR);
    for (c, v) in points {
        doc.marker(xs.map(*c as f64), ys.map(*v), 3.5, None, &format!("{c}: {v:.3}"));
    }
    doc.close_group();
    Ok(doc.finish())
}

/// Linear interpolation between [`RAMP_LOW`] and [`RAMP_HIGH`].
pub fn ramp_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let c: Vec<u8> = RAMP_LOW
        .iter()
        .zip(RAMP_HIGH)
        .map(|(&lo, hi)| (lo as f64 + (hi as f64 - lo as f64) * t).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Equirectangular map of languages coloured by how often each is used.
/// Languages without coordinates are listed in a note.
pub fn render_map(records: &[(&LanguageRecord, usize)], opts: &PlotOptions) -> String {
    let (w, h) = (opts.width as f64, opts.height as f64);
    let xs = Axis::fixed(-180.0, 180.0, 0.0, w);
    let ys = Axis::fixed(-90.0, 90.0, h, 0.0);
    let mut doc = Svg::new(opts.width, opts.height);
    doc.rect(0.0, 0.0, w, h, "#f4f8fb", "#333333");
    doc.line(0.0, ys.map(0.0), w, ys.map(0.0), "#c8d3dc", 0.5);
    doc.line(xs.map(0.0), 0.0, xs.map(0.0), h, "#c8d3dc", 0.5);

    let mut placed: Vec<(&LanguageRecord, usize)> = records.to_vec();
    // Frequent languages are drawn last so they stay visible.
    placed.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.glottocode.cmp(&b.0.glottocode)));
    let max = placed.iter().map(|r| r.1).max().unwrap_or(0).max(1) as f64;
    let mut unplaced = Vec::new();
    doc.open_group("languages", "series", "none");
    for (rec, count) in &placed {
        match rec.coordinates {
            Some(c) => doc.marker(
                xs.map(c.longitude),
                ys.map(c.latitude),
                MAP_RADIUS,
                Some(&ramp_color(*count as f64 / max)),
                &format!("{} ({count})", rec.name),
            ),
            None => unplaced.push(rec.name.as_str()),
        }
    }
    doc.close_group();
    if !unplaced.is_empty() {
        unplaced.sort_unstable();
        doc.text(
            6.0,
            h - 8.0,
            10,
            "start",
            &format!("No coordinates: {}", unplaced.join(", ")),
        );
    }
    if let Some(title) = &opts.title {
        doc.text(w / 2.0, 16.0, 14, "middle", title);
    }
    doc.finish()
}

pub fn write_svg(path: impl AsRef<Path>, svg_text: &str) -> Result<()> {
    svg::write(path.as_ref(), svg_text)
}
