//! Command-line interface. The `typdiv` binary is a thin wrapper around
//! [`run`].

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde::Serialize;

use crate::audit::{self, FeatureGrouping, NaPolicy, ScoreTable};
use crate::cldf::{self, FeatureMatrix};
use crate::distances::{build_matrix, DistanceSource, PairNormalization};
use crate::error::{Error, Result};
use crate::langmeta::{classify, normalize_code, CodeKind, CodeMap, Registry, CODEMAP_FILE, REGISTRY_FILE};
use crate::metrics::{self, align_sample, LanguageSample, MetricResult, DEFAULT_COVERAGE_THRESHOLD};
use crate::pca;
use crate::report::{self, PlotOptions, ReportOptions, ReportSources, SampleReport};
use crate::survey;
use crate::vectors::{self, VectorSet};

pub const DATA_DIR_ENV: &str = "TYPDIV_DATA_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "typdiv",
    version,
    about = "Typological diversity measures for language samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Debug, Args)]
struct Common {
    /// Default root for data files; relative paths are also looked up here.
    #[arg(long, env = DATA_DIR_ENV, global = true)]
    data_dir: Option<PathBuf>,
    /// Language registry CSV (defaults to registry.csv in the data dir).
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// ISO code map CSV (defaults to codemap.csv in the data dir).
    #[arg(long, global = true)]
    codemap: Option<PathBuf>,
    /// Treat unknown, ambiguous or absent languages as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Output format (default json; md for audit).
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VectorInput {
    /// Tab-separated language vectors (`--` marks missing entries).
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// CLDF StructureDataset directory or feature-matrix cache (.json).
    #[arg(long)]
    grambank: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Figure width in pixels.
    #[arg(long, default_value_t = 640)]
    width: u32,
    /// Figure height in pixels.
    #[arg(long, default_value_t = 480)]
    height: u32,
    /// Figure title.
    #[arg(long)]
    title: Option<String>,
}

impl PlotArgs {
    fn options(&self, x_label: &str, y_label: &str) -> PlotOptions {
        PlotOptions {
            width: self.width,
            height: self.height,
            title: self.title.clone(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean pairwise syntactic distance with the coverage filter.
    Mpsd {
        /// Language codes, one per line; `#` starts a comment.
        #[arg(long)]
        sample: PathBuf,
        #[command(flatten)]
        input: VectorInput,
        /// Precomputed distances; coverage still comes from the vectors.
        #[arg(long)]
        distances: Option<PathBuf>,
        /// Minimum share of vector dimensions a language must cover.
        #[arg(long, default_value_t = DEFAULT_COVERAGE_THRESHOLD)]
        threshold: f64,
        /// Unnormalized Euclidean distance over shared dimensions.
        #[arg(long)]
        raw: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Mean pairwise distance from a matrix, genealogy or geography.
    Mpd {
        /// Language codes, one per line; `#` starts a comment.
        #[arg(long)]
        sample: PathBuf,
        /// Precomputed distance matrix CSV.
        #[arg(long, required_unless_present_any = ["genetic", "geographic"])]
        distances: Option<PathBuf>,
        /// Lineage (Jaccard) distances from the registry.
        #[arg(long, conflicts_with_all = ["distances", "geographic"])]
        genetic: bool,
        /// Great-circle distances from registry coordinates.
        #[arg(long, conflicts_with = "distances")]
        geographic: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Feature value inclusion.
    Fvi {
        /// Language codes, one per line; `#` starts a comment.
        #[arg(long)]
        sample: PathBuf,
        /// CLDF StructureDataset directory or feature-matrix cache (.json).
        #[arg(long)]
        grambank: PathBuf,
        /// Report the inclusion of every feature.
        #[arg(long)]
        per_feature: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Full report for one sample, or for every paper in a papers CSV.
    Summary {
        /// Language codes, one per line; `#` starts a comment.
        #[arg(long, required_unless_present = "papers", conflicts_with = "papers")]
        sample: Option<PathBuf>,
        /// CSV with id, title, abstract and space-separated languages.
        #[arg(long)]
        papers: Option<PathBuf>,
        #[command(flatten)]
        input: VectorInput,
        /// Precomputed distance matrix CSV.
        #[arg(long)]
        distances: Option<PathBuf>,
        /// Minimum share of vector dimensions a language must cover.
        #[arg(long, default_value_t = DEFAULT_COVERAGE_THRESHOLD)]
        threshold: f64,
        /// Unnormalized Euclidean distance over shared dimensions.
        #[arg(long)]
        raw: bool,
        /// Report the inclusion of every feature.
        #[arg(long)]
        per_feature: bool,
        /// Dataset version recorded in the report, as NAME=VERSION.
        #[arg(long = "dataset-version", value_parser = parse_key_value)]
        dataset_versions: Vec<(String, String)>,
        /// Directory for distribution and size plots (batch mode).
        #[arg(long, requires = "papers")]
        figures: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Principal component projection with an optional highlighted sample.
    Pca {
        #[command(flatten)]
        input: VectorInput,
        /// Number of components.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Sample file whose languages are marked in the plot.
        #[arg(long)]
        highlight: Option<PathBuf>,
        /// Scatter plot of the first two components.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        plot: PlotArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Overall versus by-feature averages of benchmark scores.
    Audit {
        /// CSV of language,score.
        #[arg(long)]
        scores: PathBuf,
        /// CSV of language,value; NA or empty means no value.
        #[arg(long, required_unless_present = "feature", conflicts_with = "feature")]
        grouping: Option<PathBuf>,
        /// Group by this feature of --grambank instead of a grouping file.
        #[arg(long, requires = "grambank")]
        feature: Option<String>,
        /// CLDF StructureDataset directory supplying --feature.
        #[arg(long)]
        grambank: Option<PathBuf>,
        /// How languages without a value count: group or exclude.
        #[arg(long, default_value = "group")]
        na_policy: String,
        /// Row label (defaults to the scores file name).
        #[arg(long)]
        label: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Find diversity claims in paper titles and abstracts.
    Scan {
        /// CSV with id, title, abstract and space-separated languages.
        #[arg(long)]
        papers: PathBuf,
        /// Only list matching papers.
        #[arg(long)]
        matched_only: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Sample-size statistics and language usage, or annotator agreement.
    Stats {
        /// CSV with id, title, abstract and space-separated languages.
        #[arg(long, required_unless_present = "kappa")]
        papers: Option<PathBuf>,
        /// Two files with one label per line.
        #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "papers")]
        kappa: Option<Vec<PathBuf>>,
        /// Number of most used languages to list.
        #[arg(long, default_value_t = 10)]
        top: usize,
        #[command(flatten)]
        common: Common,
    },
    /// World map of languages coloured by how many papers use them.
    Map {
        /// CSV with id, title, abstract and space-separated languages.
        #[arg(long)]
        papers: PathBuf,
        #[command(flatten)]
        plot: PlotArgs,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_key_value(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected NAME=VERSION, got '{s}'"))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("typdiv: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    data_dir: Option<PathBuf>,
    registry: Option<Registry>,
    codemap: Option<CodeMap>,
    strict: bool,
    output: Option<PathBuf>,
}

impl Context {
    fn new(common: &Common) -> Result<Self> {
        let data_dir = common.data_dir.clone();
        let locate = |given: &Option<PathBuf>, default: &str| -> Option<PathBuf> {
            match given {
                Some(p) => Some(resolve_in(data_dir.as_deref(), p)),
                None => data_dir.as_ref().map(|d| d.join(default)).filter(|p| p.is_file()),
            }
        };
        let registry = locate(&common.registry, REGISTRY_FILE)
            .map(Registry::load)
            .transpose()?;
        let codemap = locate(&common.codemap, CODEMAP_FILE).map(CodeMap::load).transpose()?;
        Ok(Context {
            registry,
            codemap,
            strict: common.strict,
            output: common.output.clone(),
            data_dir,
        })
    }

    fn path(&self, p: &Path) -> PathBuf {
        resolve_in(self.data_dir.as_deref(), p)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| Error::io("<stdout>", e))
            }
        }
    }

    /// Rewrites ISO codes to their canonical form through the code map.
    /// Unknown and macrolanguage codes are kept with a warning, or rejected
    /// in strict mode. Without a registry the sample is used as given.
    fn normalize(&self, sample: LanguageSample) -> Result<LanguageSample> {
        let Some(registry) = &self.registry else {
            return Ok(sample);
        };
        let empty = CodeMap::new();
        let map = self.codemap.as_ref().unwrap_or(&empty);
        let mut ids = Vec::with_capacity(sample.len());
        for id in sample.ids() {
            let code = match classify(id) {
                Ok((_, CodeKind::Glottocode)) => id.clone(),
                Ok((_, CodeKind::Iso639_3)) => match normalize_code(id, map, registry) {
                    Ok(n) => {
                        if let Some(members) = &n.ambiguous_members {
                            let msg = format!("'{id}' is a macrolanguage code covering {}", members.join(", "));
                            if self.strict {
                                return Err(Error::sample(msg));
                            }
                            warn!("{msg}");
                        }
                        n.code
                    }
                    Err(e) if self.strict => return Err(e),
                    Err(e) => {
                        warn!("{e}; kept as given");
                        id.clone()
                    }
                },
                Err(e) if self.strict => return Err(e),
                Err(_) => id.clone(),
            };
            ids.push(code);
        }
        let normalized = LanguageSample::new(ids)?;
        Ok(match sample.label() {
            Some(l) => normalized.with_label(l),
            None => normalized,
        })
    }

    fn sample(&self, path: &Path) -> Result<LanguageSample> {
        self.normalize(LanguageSample::read(self.path(path))?)
    }

    fn features(&self, path: &Path) -> Result<FeatureMatrix> {
        let path = self.path(path);
        if path.is_file() {
            FeatureMatrix::load_cache(&path)
        } else {
            cldf::load_structure_dataset(&path)
        }
    }

    fn vectors(&self, input: &VectorInput) -> Result<Option<VectorSet>> {
        match (&input.vectors, &input.grambank) {
            (Some(_), Some(_)) => Err(Error::Usage("give either --vectors or --grambank, not both".into())),
            (Some(v), None) => vectors::load_vector_table(self.path(v)).map(Some),
            (None, Some(g)) => vectors::binarize(&self.features(g)?).map(Some),
            (None, None) => Ok(None),
        }
    }

    fn require_registry(&self, what: &str) -> Result<&Registry> {
        self.registry.as_ref().ok_or_else(|| {
            Error::Usage(format!(
                "{what} needs a language registry (--registry or {DATA_DIR_ENV})"
            ))
        })
    }

    fn align(
        &self,
        sample: &LanguageSample,
        contains: impl Fn(&str) -> bool,
    ) -> Result<(LanguageSample, HashMap<String, String>)> {
        align_sample(sample, self.registry.as_ref(), contains)
    }

    fn check_strict(&self, result: &MetricResult) -> Result<()> {
        if self.strict {
            if let Some(e) = result
                .excluded
                .iter()
                .find(|e| e.reason == metrics::ExclusionReason::Absent)
            {
                return Err(Error::sample(format!(
                    "'{}' is absent from the data source",
                    e.language
                )));
            }
        }
        Ok(())
    }
}

fn resolve_in(data_dir: Option<&Path>, p: &Path) -> PathBuf {
    match data_dir {
        Some(d) if p.is_relative() && !p.exists() && d.join(p).exists() => d.join(p),
        _ => p.to_path_buf(),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::data(format!("cannot encode output: {e}")))
}

fn metric_output(label: &str, measure: &str, r: &MetricResult, format: Format) -> Result<String> {
    let excluded: Vec<String> = r.excluded.iter().map(|e| e.language.clone()).collect();
    Ok(match format {
        Format::Json => to_json(r)?,
        Format::Csv => format!(
            "sample,measure,value,n_used,n_excluded,used,excluded\n{},{measure},{},{},{},{},{}\n",
            audit::csv_field(label),
            r.value,
            r.used.len(),
            excluded.len(),
            r.used.join(" "),
            excluded.join(" ")
        ),
        Format::Md => format!(
            "| Sample | Measure | Value | Used | Excluded |\n|---|---|---:|---|---|\n| {label} | {measure} | {:.4} | {} | {} |\n",
            r.value,
            r.used.join(", "),
            if excluded.is_empty() { "–".to_string() } else { excluded.join(", ") }
        ),
    })
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Mpsd {
            sample,
            input,
            distances,
            threshold,
            raw,
            common,
        } => {
            let ctx = Context::new(&common)?;
            let sample = ctx.sample(&sample)?;
            let vs = ctx
                .vectors(&input)?
                .ok_or_else(|| Error::Usage("mpsd needs --vectors or --grambank".into()))?;
            let normalization = if raw {
                PairNormalization::Raw
            } else {
                PairNormalization::SharedMean
            };
            let result = match distances {
                Some(d) => {
                    let dm = vectors::load_distance_matrix(ctx.path(&d))?;
                    let (local, back) = ctx.align(&sample, |c| dm.contains(c))?;
                    metrics::mpd_with_coverage(&local, &dm, &vs, threshold)?.relabel(&back)
                }
                None => {
                    let (local, back) = ctx.align(&sample, |c| vs.contains(c))?;
                    metrics::mpsd(&local, &vs, threshold, normalization)?.relabel(&back)
                }
            };
            ctx.check_strict(&result)?;
            let label = sample.label().unwrap_or("sample");
            ctx.emit(&metric_output(
                label,
                "mpsd",
                &result,
                common.format.unwrap_or(Format::Json),
            )?)
        }
        Command::Mpd {
            sample,
            distances,
            genetic,
            geographic: _,
            common,
        } => {
            let ctx = Context::new(&common)?;
            let sample = ctx.sample(&sample)?;
            let (measure, result) = if let Some(d) = distances {
                let dm = vectors::load_distance_matrix(ctx.path(&d))?;
                let (local, back) = ctx.align(&sample, |c| dm.contains(c))?;
                ("mpd", metrics::mpd(&local, &dm)?.relabel(&back))
            } else {
                let registry = ctx.require_registry("mpd --genetic/--geographic")?;
                let (name, source) = if genetic {
                    ("genetic", DistanceSource::Genetic(registry))
                } else {
                    ("geographic", DistanceSource::Geographic(registry))
                };
                // Languages the registry lacks are absent from the matrix and
                // reported as such by mpd.
                let built = build_matrix(&sample, source, ctx.strict)?;
                (name, metrics::mpd(&sample, &built.matrix)?)
            };
            ctx.check_strict(&result)?;
            let label = sample.label().unwrap_or("sample");
            ctx.emit(&metric_output(
                label,
                measure,
                &result,
                common.format.unwrap_or(Format::Json),
            )?)
        }
        Command::Fvi {
            sample,
            grambank,
            per_feature,
            common,
        } => {
            let ctx = Context::new(&common)?;
            let sample = ctx.sample(&sample)?;
            let fm = ctx.features(&grambank)?;
            let (local, back) = ctx.align(&sample, |c| fm.contains_language(c))?;
            let mut b = metrics::fvi_breakdown(&local, &fm)?;
            b.result = b.result.relabel(&back);
            ctx.check_strict(&b.result)?;
            let label = sample.label().unwrap_or("sample");
            let format = common.format.unwrap_or(Format::Json);
            let text = match (per_feature, format) {
                (false, f) => metric_output(label, "fvi", &b.result, f)?,
                (true, Format::Json) => to_json(&b)?,
                (true, Format::Csv) => {
                    let mut s = String::from("feature,covered,domain_size,ratio\n");
                    for f in &b.features {
                        let _ = writeln!(
                            s,
                            "{},{},{},{}",
                            f.feature_id,
                            f.covered.join(" "),
                            f.domain_size,
                            f.ratio
                        );
                    }
                    s
                }
                (true, Format::Md) => {
                    let mut s = format!(
                        "FVI of {label}: {:.4}\n\n| Feature | Attested | Domain | Inclusion |\n|---|---|---:|---:|\n",
                        b.result.value
                    );
                    for f in &b.features {
                        let _ = writeln!(
                            s,
                            "| {} | {} | {} | {:.2} |",
                            f.feature_id,
                            f.covered.join(", "),
                            f.domain_size,
                            f.ratio
                        );
                    }
                    s
                }
            };
            ctx.emit(&text)
        }
        Command::Summary {
            sample,
            papers,
            input,
            distances,
            threshold,
            raw,
            per_feature,
            dataset_versions,
            figures,
            common,
        } => {
            let ctx = Context::new(&common)?;
            let vs = ctx.vectors(&VectorInput {
                vectors: input.vectors.clone(),
                grambank: None,
            })?;
            let fm = input.grambank.as_ref().map(|g| ctx.features(g)).transpose()?;
            let dm = distances
                .map(|d| vectors::load_distance_matrix(ctx.path(&d)))
                .transpose()?;
            let sources = ReportSources {
                vectors: vs.as_ref(),
                distances: dm.as_ref(),
                registry: ctx.registry.as_ref(),
                features: fm.as_ref(),
            };
            let options = ReportOptions {
                coverage_threshold: threshold,
                normalization: if raw {
                    PairNormalization::Raw
                } else {
                    PairNormalization::SharedMean
                },
                strict: ctx.strict,
                per_feature,
                dataset_versions: dataset_versions.into_iter().collect::<BTreeMap<_, _>>(),
            };
            let format = common.format.unwrap_or(Format::Json);
            match (sample, papers) {
                (Some(s), _) => {
                    let report = report::build_report(&ctx.sample(&s)?, &sources, &options)?;
                    ctx.emit(&match format {
                        Format::Json => to_json(&report)?,
                        Format::Csv => report::to_csv(std::slice::from_ref(&report)),
                        Format::Md => report::to_markdown(std::slice::from_ref(&report)),
                    })
                }
                (None, Some(p)) => {
                    let papers = survey::load_papers(ctx.path(&p))?;
                    let mut reports = Vec::new();
                    for paper in papers {
                        let Some(sample) = paper.sample else {
                            warn!("paper {} lists no languages; skipped", paper.id);
                            continue;
                        };
                        let built = ctx
                            .normalize(sample)
                            .and_then(|s| report::build_report(&s, &sources, &options));
                        match built {
                            Ok(r) => reports.push(r),
                            Err(e @ Error::Sample(_)) if !ctx.strict => warn!("paper {}: {e}", paper.id),
                            Err(e) => return Err(e),
                        }
                    }
                    if let Some(dir) = figures {
                        write_batch_figures(&dir, &reports)?;
                    }
                    ctx.emit(&match format {
                        Format::Json => to_json(&reports)?,
                        Format::Csv => report::to_csv(&reports),
                        Format::Md => report::to_markdown(&reports),
                    })
                }
                (None, None) => Err(Error::Usage("summary needs --sample or --papers".into())),
            }
        }
        Command::Pca {
            input,
            k,
            highlight,
            svg,
            plot,
            common,
        } => {
            let ctx = Context::new(&common)?;
            let vs = ctx
                .vectors(&input)?
                .ok_or_else(|| Error::Usage("pca needs --vectors or --grambank".into()))?;
            let projection = pca::fit(&vs, k)?;
            if let Some(out) = svg {
                if projection.k() < 2 {
                    return Err(Error::Usage("a scatter plot needs --k 2 or more".into()));
                }
                let highlighted = match highlight {
                    Some(h) => {
                        let s = ctx.sample(&h)?;
                        let (local, _) = ctx.align(&s, |c| vs.contains(c))?;
                        let (inside, missing): (Vec<String>, Vec<String>) =
                            local.ids().iter().cloned().partition(|id| vs.contains(id));
                        if !missing.is_empty() {
                            let msg = format!("not in the vector set: {}", missing.join(", "));
                            if ctx.strict {
                                return Err(Error::sample(msg));
                            }
                            warn!("{msg}");
                        }
                        inside
                    }
                    None => Vec::new(),
                };
                pca::write_scatter(&projection, &highlighted, &plot.options("", ""), out)?;
            }
            ctx.emit(&match common.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&projection)?,
                Format::Csv | Format::Md => {
                    let md = common.format == Some(Format::Md);
                    let pcs: Vec<String> = (1..=projection.k()).map(|i| format!("pc{i}")).collect();
                    let mut s = if md {
                        format!(
                            "| language | {} |\n|---|{}\n",
                            pcs.join(" | "),
                            "---:|".repeat(pcs.len())
                        )
                    } else {
                        format!("language,{}\n", pcs.join(","))
                    };
                    for (lang, p) in projection.languages.iter().zip(&projection.points) {
                        let cells: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                        if md {
                            let _ = writeln!(s, "| {lang} | {} |", cells.join(" | "));
                        } else {
                            let _ = writeln!(s, "{lang},{}", cells.join(","));
                        }
                    }
                    s
                }
            })
        }
        Command::Audit {
            scores,
            grouping,
            feature,
            grambank,
            na_policy,
            label,
            common,
        } => {
            let ctx = Context::new(&common)?;
            let policy: NaPolicy = na_policy.parse()?;
            let scores_path = ctx.path(&scores);
            let table = ScoreTable::load(&scores_path)?;
            let grouping = match (grouping, feature, grambank) {
                (Some(g), _, _) => FeatureGrouping::load(ctx.path(&g))?,
                (None, Some(f), Some(gb)) => {
                    let fm = ctx.features(&gb)?;
                    let langs: Vec<String> = table.entries().iter().map(|(l, _)| l.clone()).collect();
                    let sample = LanguageSample::new(langs.clone())?;
                    let (local, back) = ctx.align(&sample, |c| fm.contains_language(c))?;
                    let g = audit::grouping_from_feature(&fm, &f, local.ids())?;
                    FeatureGrouping::new(
                        local
                            .ids()
                            .iter()
                            .map(|id| (back[id].clone(), g.get(id).unwrap().clone())),
                    )?
                }
                _ => {
                    return Err(Error::Usage(
                        "audit needs --grouping or --feature with --grambank".into(),
                    ))
                }
            };
            let result = audit::run_audit(&table, &grouping, policy)?;
            let label = label.unwrap_or_else(|| {
                scores_path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "scores".into())
            });
            ctx.emit(&match common.format.unwrap_or(Format::Md) {
                Format::Json => to_json(&result)?,
                Format::Csv => result.to_csv(&label),
                Format::Md => result.to_markdown(&label),
            })
        }
        Command::Scan {
            papers,
            matched_only,
            common,
        } => {
            let ctx = Context::new(&common)?;
            let papers = survey::load_papers(ctx.path(&papers))?;
            #[derive(Serialize)]
            struct Row {
                id: String,
                matched: bool,
                #[serde(flatten)]
                claim: Option<survey::ClaimMatch>,
            }
            let rows: Vec<Row> = survey::scan_all(&papers)
                .into_iter()
                .filter(|(_, m)| !matched_only || m.is_some())
                .map(|(id, claim)| Row {
                    id,
                    matched: claim.is_some(),
                    claim,
                })
                .collect();
            ctx.emit(&match common.format.unwrap_or(Format::Json) {
                Format::Json => to_json(&rows)?,
                Format::Csv => {
                    let mut s = String::from("id,matched,field,start,end,text\n");
                    for r in &rows {
                        match &r.claim {
                            Some(c) => {
                                let field = if c.field == survey::ClaimField::Title {
                                    "title"
                                } else {
                                    "abstract"
                                };
                                let _ = writeln!(
                                    s,
                                    "{},true,{field},{},{},{}",
                                    audit::csv_field(&r.id),
                                    c.start,
                                    c.end,
                                    audit::csv_field(&c.text)
                                );
                            }
                            None => {
                                let _ = writeln!(s, "{},false,,,,", audit::csv_field(&r.id));
                            }
                        }
                    }
                    s
                }
                Format::Md => {
                    let n = rows.iter().filter(|r| r.matched).count();
                    let mut s = format!("{n} of {} papers match\n\n| Paper | Match |\n|---|---|\n", rows.len());
                    for r in &rows {
                        let _ = writeln!(
                            s,
                            "| {} | {} |",
                            r.id,
                            r.claim.as_ref().map(|c| c.text.as_str()).unwrap_or("–")
                        );
                    }
                    s
                }
            })
        }
        Command::Stats {
            papers,
            kappa,
            top,
            common,
        } => {
            let ctx = Context::new(&common)?;
            let format = common.format.unwrap_or(Format::Json);
            if let Some(files) = kappa {
                let read = |p: &PathBuf| -> Result<Vec<String>> {
                    let p = ctx.path(p);
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    Ok(text
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(str::to_string)
                        .collect())
                };
                let (a, b) = (read(&files[0])?, read(&files[1])?);
                let k = survey::cohen_kappa(&a, &b)?;
                return ctx.emit(&match format {
                    Format::Json => to_json(&serde_json::json!({ "items": a.len(), "kappa": k }))?,
                    Format::Csv => format!("items,kappa\n{},{k}\n", a.len()),
                    Format::Md => format!("| Items | κ |\n|---:|---:|\n| {} | {k:.3} |\n", a.len()),
                });
            }
            let path = papers.ok_or_else(|| Error::Usage("stats needs --papers or --kappa".into()))?;
            let papers = survey::load_papers(ctx.path(&path))?;
            let mut normalized = Vec::with_capacity(papers.len());
            for mut p in papers {
                p.sample = p.sample.map(|s| ctx.normalize(s)).transpose()?;
                normalized.push(p);
            }
            let sizes: Vec<usize> = normalized
                .iter()
                .filter_map(|p| p.sample.as_ref().map(|s| s.len()))
                .collect();
            let stats = survey::sample_size_stats(&sizes)?;
            let usage = survey::usage_counts(&normalized);
            let top_usage: Vec<(String, usize)> = usage.into_iter().take(top).collect();
            ctx.emit(&match format {
                Format::Json => to_json(&serde_json::json!({
                    "sample_sizes": stats,
                    "usage": top_usage.iter().map(|(l, c)| serde_json::json!({"language": l, "papers": c})).collect::<Vec<_>>(),
                }))?,
                Format::Csv => {
                    let mut s = format!(
                        "statistic,value\nn,{}\nmin,{}\nq1,{}\nmedian,{}\nq3,{}\nmax,{}\n\nlanguage,papers\n",
                        stats.n, stats.min, stats.q1, stats.median, stats.q3, stats.max
                    );
                    for (l, c) in &top_usage {
                        let _ = writeln!(s, "{l},{c}");
                    }
                    s
                }
                Format::Md => {
                    let mut s = format!(
                        "| Papers | Min | Q1 | Median | Q3 | Max |\n|---:|---:|---:|---:|---:|---:|\n| {} | {} | {} | {} | {} | {} |\n\n| Language | Papers |\n|---|---:|\n",
                        stats.n, stats.min, stats.q1, stats.median, stats.q3, stats.max
                    );
                    for (l, c) in &top_usage {
                        let _ = writeln!(s, "| {l} | {c} |");
                    }
                    s
                }
            })
        }
        Command::Map { papers, plot, common } => {
            let ctx = Context::new(&common)?;
            let registry = ctx.require_registry("map")?;
            let mut records = Vec::new();
            for mut p in survey::load_papers(ctx.path(&papers))? {
                p.sample = p.sample.map(|s| ctx.normalize(s)).transpose()?;
                records.push(p);
            }
            let mut located = Vec::new();
            let mut unknown = Vec::new();
            for (lang, count) in survey::usage_counts(&records) {
                match registry.resolve(&lang) {
                    Ok(r) => located.push((r, count)),
                    Err(_) => unknown.push(lang),
                }
            }
            if !unknown.is_empty() {
                let msg = format!("not in the registry: {}", unknown.join(", "));
                if ctx.strict {
                    return Err(Error::sample(msg));
                }
                warn!("{msg}");
            }
            ctx.emit(&report::render_map(&located, &plot.options("", "")))
        }
    }
}

fn write_batch_figures(dir: &Path, reports: &[SampleReport]) -> Result<()> {
    type SizePoints = Vec<(usize, f64)>;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let series: [(&str, &str, SizePoints); 2] = [
        (
            "mpsd",
            "MPSD",
            reports
                .iter()
                .filter_map(|r| r.mpsd().map(|v| (r.n_languages, v)))
                .collect(),
        ),
        (
            "fvi",
            "FVI",
            reports
                .iter()
                .filter_map(|r| r.fvi.value().map(|v| (r.n_languages, v)))
                .collect(),
        ),
    ];
    for (stem, name, points) in series {
        if points.is_empty() {
            continue;
        }
        let values: Vec<f64> = points.iter().map(|p| p.1).collect();
        let strip_opts = PlotOptions {
            x_label: name.to_string(),
            ..PlotOptions::default()
        };
        // Raw-mode distances can exceed 1 and have no strip plot.
        if values.iter().all(|v| (0.0..=1.0).contains(v)) {
            let strip = report::render_distribution_strip(&values, &strip_opts)?;
            report::write_svg(dir.join(format!("{stem}_distribution.svg")), &strip)?;
        }
        let xy: Vec<(i64, f64)> = points.iter().map(|&(n, v)| (n as i64, v)).collect();
        let scatter_opts = PlotOptions {
            x_label: "Number of languages".into(),
            y_label: name.to_string(),
            ..PlotOptions::default()
        };
        let scatter = report::render_scatter_xy(&xy, &scatter_opts)?;
        report::write_svg(dir.join(format!("{stem}_by_size.svg")), &scatter)?;
    }
    Ok(())
}
