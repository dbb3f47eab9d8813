//! Skew audit of benchmark score averages.
//!
//! Compares the plain macro average over languages ("overall") with the
//! unweighted mean of per-group averages, where languages are grouped by
//! the value they take for one typological feature ("by feature").

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cldf::FeatureMatrix;
use crate::error::{csv_error, Error, Result};

/// Literal used for languages without a value in grouping files.
pub const NA_LITERAL: &str = "NA";

/// Per-language scores in the task's own units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    entries: Vec<(String, f64)>,
}

impl ScoreTable {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (lang, score) in &entries {
            if !score.is_finite() {
                return Err(Error::data(format!("score of {lang} is not finite")));
            }
            if seen.insert(lang.as_str(), ()).is_some() {
                return Err(Error::data(format!("language {lang} scored twice")));
            }
        }
        Ok(ScoreTable { entries })
    }

    /// Reads a `language,score` CSV.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rows = read_two_columns(path, "score")?;
        let mut entries = Vec::with_capacity(rows.len());
        for (line, lang, raw) in rows {
            let score = raw
                .parse::<f64>()
                .map_err(|_| Error::data(format!("{}:{line}: unparsable score '{raw}'", path.display())))?;
            entries.push((lang, score));
        }
        Self::new(entries).map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn read_two_columns(path: &Path, second: &str) -> Result<Vec<(u64, String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["language", second] {
        return Err(Error::data(format!(
            "{}: expected header language,{second}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, row[0].to_lowercase(), row[1].to_string()));
    }
    Ok(rows)
}

/// Group a language falls into. `NotAvailable` sorts after every value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupValue {
    Value(String),
    NotAvailable,
}

impl GroupValue {
    pub fn label(&self) -> &str {
        match self {
            GroupValue::Value(v) => v,
            GroupValue::NotAvailable => NA_LITERAL,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureGrouping {
    groups: BTreeMap<String, GroupValue>,
}

impl FeatureGrouping {
    pub fn new(groups: impl IntoIterator<Item = (String, GroupValue)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lang, value) in groups {
            if map.insert(lang.clone(), value).is_some() {
                return Err(Error::data(format!("language {lang} grouped twice")));
            }
        }
        Ok(FeatureGrouping { groups: map })
    }

    /// Reads a `language,value` CSV; the literal `NA` marks languages
    /// without a value.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rows = read_two_columns(path, "value")?;
        Self::new(rows.into_iter().map(|(_, lang, value)| {
            let v = if value == NA_LITERAL || value.is_empty() {
                GroupValue::NotAvailable
            } else {
                GroupValue::Value(value)
            };
            (lang, v)
        }))
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }

    pub fn get(&self, language: &str) -> Option<&GroupValue> {
        self.groups.get(language)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Groups `languages` by their value for `feature_id`, using the feature's
/// value labels as group names. Missing cells and languages absent from the
/// matrix become [`GroupValue::NotAvailable`].
pub fn grouping_from_feature<S: AsRef<str>>(
    matrix: &FeatureMatrix,
    feature_id: &str,
    languages: &[S],
) -> Result<FeatureGrouping> {
    let f = matrix
        .feature_index(feature_id)
        .ok_or_else(|| Error::data(format!("unknown feature '{feature_id}'")))?;
    let spec = &matrix.features()[f];
    FeatureGrouping::new(languages.iter().map(|lang| {
        let lang = lang.as_ref();
        let value = matrix
            .language_index(lang)
            .and_then(|l| matrix.cell(l, f).value())
            .map(|v| GroupValue::Value(spec.value_labels[v].clone()))
            .unwrap_or(GroupValue::NotAvailable);
        (lang.to_string(), value)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub value: GroupValue,
    pub mean: f64,
    pub count: usize,
}

/// Whether languages without a feature value form a group of their own in
/// the by-feature average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaPolicy {
    Exclude,
    #[default]
    Group,
}

impl std::str::FromStr for NaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclude" => Ok(NaPolicy::Exclude),
            "group" => Ok(NaPolicy::Group),
            other => Err(Error::Usage(format!("unknown NA policy '{other}' (exclude|group)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    /// Ordered by group value, NA last.
    pub groups: Vec<GroupStat>,
    pub overall_mean: f64,
    pub overall_count: usize,
    pub by_feature_mean: f64,
    /// Languages carrying a feature value (NA not counted).
    pub by_feature_count: usize,
    pub delta: f64,
    pub na_policy: NaPolicy,
}

/// Sums in language-id order so results do not depend on row order.
fn sorted_mean(mut scores: Vec<(&str, f64)>) -> f64 {
    scores.sort_unstable_by(|a, b| a.0.cmp(b.0));
    scores.iter().map(|(_, s)| s).sum::<f64>() / scores.len() as f64
}

pub fn group_stats(scores: &ScoreTable, grouping: &FeatureGrouping) -> Result<Vec<GroupStat>> {
    let mut groups: BTreeMap<&GroupValue, Vec<(&str, f64)>> = BTreeMap::new();
    for (lang, score) in scores.entries() {
        let value = grouping
            .get(lang)
            .ok_or_else(|| Error::data(format!("scored language {lang} has no grouping entry")))?;
        groups.entry(value).or_default().push((lang, *score));
    }
    Ok(groups
        .into_iter()
        .map(|(value, members)| GroupStat {
            value: value.clone(),
            count: members.len(),
            mean: sorted_mean(members),
        })
        .collect())
}

pub fn run_audit(scores: &ScoreTable, grouping: &FeatureGrouping, na_policy: NaPolicy) -> Result<AuditResult> {
    if scores.is_empty() {
        return Err(Error::sample("no scores to audit"));
    }
    let groups = group_stats(scores, grouping)?;
    let overall_mean = sorted_mean(scores.entries().iter().map(|(l, s)| (l.as_str(), *s)).collect());
    let counted: Vec<&GroupStat> = groups
        .iter()
        .filter(|g| na_policy == NaPolicy::Group || g.value != GroupValue::NotAvailable)
        .collect();
    if counted.is_empty() {
        return Err(Error::sample("every scored language lacks a feature value"));
    }
    let by_feature_mean = counted.iter().map(|g| g.mean).sum::<f64>() / counted.len() as f64;
    let by_feature_count = groups
        .iter()
        .filter(|g| g.value != GroupValue::NotAvailable)
        .map(|g| g.count)
        .sum();
    Ok(AuditResult {
        overall_count: scores.len(),
        overall_mean,
        by_feature_mean,
        by_feature_count,
        delta: by_feature_mean - overall_mean,
        na_policy,
        groups,
    })
}

impl AuditResult {
    /// Markdown table with Overall, By F, delta and one column per group.
    pub fn to_markdown(&self, label: &str) -> String {
        let mut out = String::from("| Subtask | Overall | By F | Δ |");
        for g in &self.groups {
            let _ = write!(out, " {} |", g.value.label());
        }
        out.push_str("\n|---|---|---|---|");
        out.push_str(&"---|".repeat(self.groups.len()));
        let _ = write!(
            out,
            "\n| {label} | {:.2} ({}) | {:.2} ({}) | {:+.2} |",
            self.overall_mean, self.overall_count, self.by_feature_mean, self.by_feature_count, self.delta
        );
        for g in &self.groups {
            let _ = write!(out, " {:.2} ({}) |", g.mean, g.count);
        }
        let _ = write!(out, "\n\nNA policy: {}\n", self.policy_name());
        out
    }

    /// One CSV header line and one data line.
    pub fn to_csv(&self, label: &str) -> String {
        let mut head = String::from("subtask,na_policy,overall,overall_n,by_feature,by_feature_n,delta");
        let mut row = format!(
            "{},{},{},{},{},{},{}",
            csv_field(label),
            self.policy_name(),
            self.overall_mean,
            self.overall_count,
            self.by_feature_mean,
            self.by_feature_count,
            self.delta
        );
        for g in &self.groups {
            let name = g.value.label();
            let _ = write!(head, ",{},{}", csv_field(name), csv_field(&format!("{name} n")));
            let _ = write!(row, ",{},{}", g.mean, g.count);
        }
        format!("{head}\n{row}\n")
    }

    fn policy_name(&self) -> &'static str {
        match self.na_policy {
            NaPolicy::Exclude => "exclude",
            NaPolicy::Group => "group",
        }
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cldf::{Cell, FeatureSpec};
    use proptest::prelude::*;

    fn v(s: &str) -> GroupValue {
        GroupValue::Value(s.to_string())
    }

    /// Languages with identical scores per group, as in a published table
    /// that only reports group means.
    fn expand(groups: &[(f64, usize, GroupValue)]) -> (ScoreTable, FeatureGrouping) {
        let mut scores = Vec::new();
        let mut grouping = Vec::new();
        for (gi, (mean, count, value)) in groups.iter().enumerate() {
            for i in 0..*count {
                let lang = format!("g{gi}l{i:02}");
                scores.push((lang.clone(), *mean));
                grouping.push((lang, value.clone()));
            }
        }
        (
            ScoreTable::new(scores).unwrap(),
            FeatureGrouping::new(grouping).unwrap(),
        )
    }

    fn xnli() -> (ScoreTable, FeatureGrouping) {
        expand(&[
            (71.20, 1, v("Weak prefixing")),
            (80.06, 12, v("Strongly suffixing")),
            (78.35, 2, v("Little affixation")),
        ])
    }

    #[test]
    fn xnli_group_stats() {
        let (s, g) = xnli();
        let stats = group_stats(&s, &g).unwrap();
        let find = |name: &str| stats.iter().find(|x| x.value == v(name)).unwrap();
        assert_eq!(find("Weak prefixing").count, 1);
        assert!((find("Weak prefixing").mean - 71.20).abs() < 1e-9);
        assert_eq!(find("Strongly suffixing").count, 12);
        assert!((find("Strongly suffixing").mean - 80.06).abs() < 1e-9);
        assert_eq!(find("Little affixation").count, 2);
    }

    #[test]
    fn xnli_row() {
        let (s, g) = xnli();
        for policy in [NaPolicy::Group, NaPolicy::Exclude] {
            let r = run_audit(&s, &g, policy).unwrap();
            assert!((r.overall_mean - 79.24).abs() <= 0.01);
            assert!((r.by_feature_mean - 76.54).abs() <= 0.01);
            assert!((r.delta - -2.70).abs() <= 0.01);
            assert_eq!(r.overall_count, 15);
        }
    }

    #[test]
    fn udpos_na_policies() {
        let (s, g) = expand(&[
            (74.30, 1, v("Equal prefixing and suffixing")),
            (79.75, 28, v("Strongly suffixing")),
            (71.05, 2, v("Weakly suffixing")),
            (45.98, 5, v("Little affixation")),
            (84.50, 2, GroupValue::NotAvailable),
        ]);
        let grouped = run_audit(&s, &g, NaPolicy::Group).unwrap();
        assert!((grouped.by_feature_mean - 71.12).abs() <= 0.01);
        assert_eq!(grouped.by_feature_count, 36);
        assert_eq!(grouped.groups.last().unwrap().value, GroupValue::NotAvailable);
        let excluded = run_audit(&s, &g, NaPolicy::Exclude).unwrap();
        assert!((excluded.by_feature_mean - 67.77).abs() <= 0.01);
        assert_eq!(grouped.overall_mean, excluded.overall_mean);
    }

    #[test]
    fn single_group_zero_delta() {
        let (s, g) = expand(&[(50.0, 3, v("a"))]);
        let r = run_audit(&s, &g, NaPolicy::Group).unwrap();
        assert_eq!(r.delta, 0.0);
    }

    #[test]
    fn one_language_per_group() {
        let (s, g) = expand(&[(10.0, 1, v("a")), (20.0, 1, v("b"))]);
        let stats = group_stats(&s, &g).unwrap();
        assert_eq!(stats.iter().map(|x| x.mean).collect::<Vec<_>>(), [10.0, 20.0]);
    }

    #[test]
    fn ungrouped_language_is_error() {
        let s = ScoreTable::new(vec![("xx".into(), 1.0)]).unwrap();
        let err = group_stats(&s, &FeatureGrouping::default()).unwrap_err();
        assert!(err.to_string().contains("xx"));
    }

    #[test]
    fn empty_scores_is_sample_error() {
        let s = ScoreTable::new(vec![]).unwrap();
        assert!(matches!(
            run_audit(&s, &FeatureGrouping::default(), NaPolicy::Group),
            Err(Error::Sample(_))
        ));
    }

    #[test]
    fn score_table_rejects_bad_rows() {
        assert!(ScoreTable::new(vec![("a".into(), f64::NAN)]).is_err());
        assert!(ScoreTable::new(vec![("a".into(), 1.0), ("a".into(), 2.0)]).is_err());
    }

    #[test]
    fn grouping_from_wals_style_feature() {
        let spec = FeatureSpec::with_labels(
            "26A",
            "Prefixing vs. Suffixing",
            vec!["1".into(), "2".into()],
            vec!["Little affixation".into(), "Strongly suffixing".into()],
        )
        .unwrap();
        let m = FeatureMatrix::new(
            vec!["aaaa1111".into(), "bbbb1111".into()],
            vec![spec],
            vec![Cell::Value(1), Cell::MissingUnknown],
        )
        .unwrap();
        let g = grouping_from_feature(&m, "26A", &["aaaa1111", "bbbb1111", "cccc1111"]).unwrap();
        assert_eq!(g.get("aaaa1111"), Some(&v("Strongly suffixing")));
        assert_eq!(g.get("bbbb1111"), Some(&GroupValue::NotAvailable));
        assert_eq!(g.get("cccc1111"), Some(&GroupValue::NotAvailable));
        assert!(grouping_from_feature(&m, "81A", &["aaaa1111"]).is_err());
    }

    #[test]
    fn markdown_row_shape() {
        let (s, g) = xnli();
        let md = run_audit(&s, &g, NaPolicy::Group).unwrap().to_markdown("XNLI");
        assert!(md.contains("| XNLI | 79.24 (15) | 76.54 (15) | -2.70 |"), "{md}");
    }

    fn arb_audit() -> impl Strategy<Value = Vec<(f64, u8)>> {
        prop::collection::vec((0.0f64..100.0, 0u8..4), 1..30)
    }

    fn build(rows: &[(f64, u8)]) -> (ScoreTable, FeatureGrouping) {
        let scores = rows
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (format!("l{i:03}"), *s))
            .collect();
        let groups = rows.iter().enumerate().map(|(i, (_, g))| {
            let value = if *g == 3 {
                GroupValue::NotAvailable
            } else {
                v(&g.to_string())
            };
            (format!("l{i:03}"), value)
        });
        (ScoreTable::new(scores).unwrap(), FeatureGrouping::new(groups).unwrap())
    }

    proptest! {
        #[test]
        fn weighted_group_means_give_overall(rows in arb_audit()) {
            let (s, g) = build(&rows);
            let r = run_audit(&s, &g, NaPolicy::Group).unwrap();
            let total: usize = r.groups.iter().map(|g| g.count).sum();
            prop_assert_eq!(total, r.overall_count);
            let weighted = r.groups.iter().map(|g| g.mean * g.count as f64).sum::<f64>() / total as f64;
            prop_assert!((weighted - r.overall_mean).abs() < 1e-9);
        }

        #[test]
        fn policies_agree_without_na(rows in prop::collection::vec((0.0f64..100.0, 0u8..3), 1..30)) {
            let (s, g) = build(&rows);
            prop_assert_eq!(
                run_audit(&s, &g, NaPolicy::Group).unwrap().by_feature_mean,
                run_audit(&s, &g, NaPolicy::Exclude).unwrap().by_feature_mean
            );
        }

        #[test]
        fn row_order_irrelevant(rows in arb_audit(), seed in any::<u64>()) {
            let (s, g) = build(&rows);
            let mut shuffled = s.entries().to_vec();
            let mut state = seed;
            for i in (1..shuffled.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (state >> 33) as usize % (i + 1));
            }
            let s2 = ScoreTable::new(shuffled).unwrap();
            prop_assert_eq!(run_audit(&s, &g, NaPolicy::Group).unwrap(), run_audit(&s2, &g, NaPolicy::Group).unwrap());
        }
    }
}
