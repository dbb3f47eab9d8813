//! Helpers for meta-studies over papers: claim detection, inter-annotator
//! agreement, sample-size statistics and language usage counts.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{csv_error, Error, Result};
use crate::metrics::LanguageSample;

/// Search string for diversity claims, applied case-insensitively.
pub const CLAIM_PATTERN: &str = "typolog.+?div.+?|div.+?typolog.+?";

fn claim_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!("(?i){CLAIM_PATTERN}")).expect("claim pattern compiles"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaperRecord {
    pub id: String,
    pub title: String,
    pub abstract_text: String,
    pub sample: Option<LanguageSample>,
}

impl PaperRecord {
    pub fn new(id: impl Into<String>, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        PaperRecord {
            id: id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            sample: None,
        }
    }

    pub fn with_sample(mut self, sample: LanguageSample) -> Self {
        self.sample = Some(sample);
        self
    }
}

/// Reads a papers CSV with header `id,title,abstract,languages`, where
/// languages are space-separated codes and may be empty. A language listed
/// twice within one paper is kept once.
pub fn load_papers(path: impl AsRef<Path>) -> Result<Vec<PaperRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["id", "title", "abstract", "languages"] {
        return Err(Error::data(format!(
            "{}: expected header id,title,abstract,languages",
            path.display()
        )));
    }
    let mut seen = HashSet::new();
    let mut papers = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let id = row[0].trim().to_string();
        if id.is_empty() {
            return Err(Error::data(format!("{}:{line}: empty paper id", path.display())));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::data(format!(
                "{}:{line}: duplicate paper id '{id}'",
                path.display()
            )));
        }
        let mut langs = Vec::new();
        let mut distinct = HashSet::new();
        for code in row[3].split_whitespace() {
            let code = code.to_lowercase();
            if distinct.insert(code.clone()) {
                langs.push(code);
            }
        }
        let mut paper = PaperRecord::new(id.clone(), &row[1], &row[2]);
        if !langs.is_empty() {
            paper = paper.with_sample(LanguageSample::new(langs)?.with_label(id));
        }
        papers.push(paper);
    }
    Ok(papers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimField {
    Title,
    Abstract,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimMatch {
    pub field: ClaimField,
    /// Byte offsets into the matched field.
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// First claim match, looking at the title before the abstract.
pub fn scan_claims(record: &PaperRecord) -> Option<ClaimMatch> {
    [
        (ClaimField::Title, &record.title),
        (ClaimField::Abstract, &record.abstract_text),
    ]
    .into_iter()
    .find_map(|(field, text)| {
        claim_regex().find(text).map(|m| ClaimMatch {
            field,
            start: m.start(),
            end: m.end(),
            text: m.as_str().to_string(),
        })
    })
}

/// Scans every record in parallel; output follows input order.
pub fn scan_all(records: &[PaperRecord]) -> Vec<(String, Option<ClaimMatch>)> {
    records.par_iter().map(|r| (r.id.clone(), scan_claims(r))).collect()
}

/// Cohen's kappa for two annotators labelling the same items.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::data(format!(
            "annotation sequences differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::sample("no annotated items"));
    }
    let n = a.len() as f64;
    let mut left: BTreeMap<&T, usize> = BTreeMap::new();
    let mut right: BTreeMap<&T, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        *left.entry(x).or_default() += 1;
        *right.entry(y).or_default() += 1;
        if x == y {
            agree += 1;
        }
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = left
        .iter()
        .map(|(label, &ca)| ca as f64 * right.get(label).copied().unwrap_or(0) as f64)
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::DegenerateAgreement);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Expands a square confusion matrix (rows: annotator A, columns: B) into
/// paired label sequences.
pub fn confusion_to_labels(counts: &[Vec<usize>]) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = counts.len();
    if k == 0 || counts.iter().any(|r| r.len() != k) {
        return Err(Error::data("confusion matrix must be square and non-empty"));
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            a.extend(std::iter::repeat_n(i, c));
            b.extend(std::iter::repeat_n(j, c));
        }
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolation quantile at position `p·(n−1)` of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn sample_size_stats(sizes: &[usize]) -> Result<SizeStats> {
    if sizes.is_empty() {
        return Err(Error::sample("no sample sizes given"));
    }
    let mut sorted: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(SizeStats {
        n: sorted.len(),
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Papers per language, most used first; ties broken by language id.
pub fn usage_counts(records: &[PaperRecord]) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        if let Some(sample) = &r.sample {
            let distinct: BTreeSet<&str> = sample.ids().iter().map(String::as_str).collect();
            for lang in distinct {
                *counts.entry(lang).or_default() += 1;
            }
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(l, c)| (l.to_string(), c)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn title(t: &str) -> PaperRecord {
        PaperRecord::new("p", t, "")
    }

    #[test]
    fn quoted_formulations_match() {
        for text in [
            "typologically and genetically diverse languages",
            "languages of diverse typologies",
            "diverse languages in terms of language family and morphological typology",
            "A Typologically Diverse Benchmark",
        ] {
            assert!(scan_claims(&title(text)).is_some(), "{text}");
        }
        assert!(scan_claims(&title("Topological diversity of networks")).is_none());
    }

    #[test]
    fn title_checked_before_abstract() {
        let r = PaperRecord::new("p", "typologically diverse", "diverse typology");
        assert_eq!(scan_claims(&r).unwrap().field, ClaimField::Title);
        let r = PaperRecord::new("p", "nothing here", "we use diverse typology");
        let m = scan_claims(&r).unwrap();
        assert_eq!(m.field, ClaimField::Abstract);
        assert_eq!(&r.abstract_text[m.start..m.end], m.text);
    }

    #[test]
    fn kappa_fixtures() {
        let (a, b) = confusion_to_labels(&[vec![20, 5], vec![10, 15]]).unwrap();
        assert!((cohen_kappa(&a, &b).unwrap() - 0.4).abs() < 1e-12);
        let same = ["x", "y", "x", "z"];
        assert_eq!(cohen_kappa(&same, &same).unwrap(), 1.0);
    }

    #[test]
    fn kappa_independent_labels_near_zero() {
        // Perfectly balanced crossing: every pairing occurs equally often.
        let (a, b) = confusion_to_labels(&[vec![25, 25], vec![25, 25]]).unwrap();
        assert!(cohen_kappa(&a, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kappa_errors() {
        assert!(matches!(
            cohen_kappa(&["a", "a"], &["a", "a"]),
            Err(Error::DegenerateAgreement)
        ));
        assert!(cohen_kappa::<&str>(&[], &[]).is_err());
        assert!(cohen_kappa(&["a"], &["a", "b"]).is_err());
    }

    #[test]
    fn size_stats_examples() {
        let s = sample_size_stats(&[90, 2, 18, 11, 8]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (2.0, 8.0, 11.0, 18.0, 90.0));
        let one = sample_size_stats(&[5]).unwrap();
        assert_eq!(
            (one.min, one.q1, one.median, one.q3, one.max),
            (5.0, 5.0, 5.0, 5.0, 5.0)
        );
        let even = sample_size_stats(&[1, 2, 3, 4]).unwrap();
        assert_eq!((even.q1, even.median, even.q3), (1.75, 2.5, 3.25));
        assert!(matches!(sample_size_stats(&[]), Err(Error::Sample(_))));
    }

    fn paper(id: &str, langs: &[&str]) -> PaperRecord {
        let s = LanguageSample::new(langs.iter().map(|l| l.to_string()).collect()).unwrap();
        PaperRecord::new(id, "", "").with_sample(s)
    }

    #[test]
    fn usage_examples() {
        assert!(usage_counts(&[]).is_empty());
        let counts = usage_counts(&[
            paper("a", &["deu", "eng"]),
            paper("b", &["deu"]),
            PaperRecord::new("c", "", ""),
        ]);
        assert_eq!(counts, vec![("deu".to_string(), 2), ("eng".to_string(), 1)]);
    }

    #[test]
    fn papers_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("papers.csv");
        std::fs::write(
            &path,
            "id,title,abstract,languages\np1,\"A Typologically Diverse, Benchmark\",x,deu ENG deu\np2,t,a,\n",
        )
        .unwrap();
        let papers = load_papers(&path).unwrap();
        assert_eq!(papers[0].sample.as_ref().unwrap().ids(), ["deu", "eng"]);
        assert!(papers[1].sample.is_none());
        assert_eq!(usage_counts(&papers).iter().map(|x| x.1).sum::<usize>(), 2);

        std::fs::write(&path, "id,title,abstract,languages\np1,t,a,\np1,t,a,\n").unwrap();
        assert!(load_papers(&path).unwrap_err().to_string().contains("duplicate"));
    }

    fn brute_quantile(values: &[f64], p: f64) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = (v.len() as f64 - 1.0) * p;
        let i = h as usize;
        if i + 1 >= v.len() {
            v[i]
        } else {
            v[i] * (1.0 - (h - i as f64)) + v[i + 1] * (h - i as f64)
        }
    }

    proptest! {
        #[test]
        fn scan_case_invariant(text in "[a-zA-Z ]{0,40}(typolog|TYPOLOG|div)?[a-zA-Z ]{0,20}") {
            let lower = scan_claims(&title(&text.to_lowercase())).is_some();
            prop_assert_eq!(lower, scan_claims(&title(&text.to_uppercase())).is_some());
            prop_assert_eq!(lower, scan_claims(&title(&text)).is_some());
        }

        #[test]
        fn kappa_symmetric(pairs in prop::collection::vec((0u8..3, 0u8..3), 1..60)) {
            let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            match (cohen_kappa(&a, &b), cohen_kappa(&b, &a)) {
                (Ok(x), Ok(y)) => {
                    prop_assert!((x - y).abs() < 1e-12);
                    prop_assert!((-1.0..=1.0 + 1e-12).contains(&x));
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric failure"),
            }
        }

        #[test]
        fn quartiles_match_oracle(sizes in prop::collection::vec(0usize..200, 1..50)) {
            let s = sample_size_stats(&sizes).unwrap();
            let v: Vec<f64> = sizes.iter().map(|&x| x as f64).collect();
            prop_assert!((s.q1 - brute_quantile(&v, 0.25)).abs() < 1e-12);
            prop_assert!((s.median - brute_quantile(&v, 0.5)).abs() < 1e-12);
            prop_assert!((s.q3 - brute_quantile(&v, 0.75)).abs() < 1e-12);
        }

        #[test]
        fn usage_total(samples in prop::collection::vec(prop::collection::btree_set("[a-e]{3}", 1..5), 0..10)) {
            let papers: Vec<PaperRecord> = samples
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let ids: Vec<String> = s.iter().cloned().collect();
                    PaperRecord::new(i.to_string(), "", "").with_sample(LanguageSample::new(ids).unwrap())
                })
                .collect();
            let total: usize = usage_counts(&papers).iter().map(|x| x.1).sum();
            prop_assert_eq!(total, samples.iter().map(|s| s.len()).sum::<usize>());
        }
    }
}
