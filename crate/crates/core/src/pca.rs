//! Principal component projection of language vectors and sample-highlight
//! scatter plots of the resulting design space.
//!
//! Missing entries are imputed with the per-dimension mean, data is centered
//! but not scaled, and components are the leading eigenvectors of the sample
//! covariance. Each component is oriented so its largest-magnitude entry is
//! positive.

use std::collections::BTreeSet;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::svg::{self, Axis, PlotOptions, Svg};
use crate::vectors::VectorSet;

/// Fill colour of background languages.
pub const BACKGROUND_COLOR: &str = "#9e9e9e";
/// Fill colour of highlighted sample languages.
pub const HIGHLIGHT_COLOR: &str = "#d95f02";
pub const BACKGROUND_RADIUS: f64 = 2.5;
pub const HIGHLIGHT_RADIUS: f64 = 4.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub languages: Vec<String>,
    /// Dimension labels of the fitted vector set, dropped ones included.
    pub input_dims: Vec<String>,
    /// Indices into `input_dims` that entered the fit.
    pub kept_dims: Vec<usize>,
    /// Mean of each kept dimension over its defined entries; used both for
    /// imputation and centering.
    pub means: Vec<f64>,
    /// `k` unit vectors over the kept dimensions.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// One `k`-vector per language.
    pub points: Vec<Vec<f64>>,
    pub requested_k: usize,
}

impl Projection {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    fn centered_row(&self, values: &[f64], defined: &[bool]) -> Vec<f64> {
        self.kept_dims
            .iter()
            .zip(&self.means)
            .map(|(&d, &m)| if defined[d] { values[d] - m } else { 0.0 })
            .collect()
    }

    fn scores(&self, centered: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(centered).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maps projected points back to centered, imputed data space.
    pub fn reconstruct(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|p| {
                let mut row = vec![0.0; self.kept_dims.len()];
                for (score, comp) in p.iter().zip(&self.components) {
                    for (r, c) in row.iter_mut().zip(comp) {
                        *r += score * c;
                    }
                }
                row
            })
            .collect()
    }

    /// Centered, imputed rows of `vs` over the kept dimensions.
    pub fn centered_data(&self, vs: &VectorSet) -> Result<Vec<Vec<f64>>> {
        self.check_dims(vs)?;
        Ok((0..vs.n_languages())
            .map(|i| {
                let r = vs.row(i);
                self.centered_row(r.values, r.defined)
            })
            .collect())
    }

    fn check_dims(&self, vs: &VectorSet) -> Result<()> {
        if vs.dims() != self.input_dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "projection was fitted on {} dims, vector set has {} different ones",
                self.input_dims.len(),
                vs.n_dims()
            )));
        }
        Ok(())
    }
}

/// Fits a `k`-component projection.
///
/// Dimensions without any defined entry are dropped, and `k` is lowered to
/// the numerical rank of the covariance when it exceeds it; both produce a
/// warning.
pub fn fit(vs: &VectorSet, k: usize) -> Result<Projection> {
    if k == 0 || k > vs.n_dims() {
        return Err(Error::Usage(format!(
            "k = {k} must lie in 1..={} (number of dimensions)",
            vs.n_dims()
        )));
    }
    let n = vs.n_languages();
    if n < k + 1 {
        return Err(Error::sample(format!(
            "PCA with k = {k} needs at least {} languages, have {n}",
            k + 1
        )));
    }

    let mut kept_dims = Vec::with_capacity(vs.n_dims());
    let mut means = Vec::with_capacity(vs.n_dims());
    for d in 0..vs.n_dims() {
        let (sum, count) = (0..n)
            .filter_map(|i| vs.row(i).get(d))
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            warn!("dimension {} has no defined entries, dropped", vs.dims()[d]);
        } else {
            kept_dims.push(d);
            means.push(sum / count as f64);
        }
    }
    if kept_dims.is_empty() {
        return Err(Error::data("no dimension has a defined entry"));
    }
    let width = kept_dims.len();
    let mut x = DMatrix::<f64>::zeros(n, width);
    for i in 0..n {
        let r = vs.row(i);
        for (j, (&d, &m)) in kept_dims.iter().zip(&means).enumerate() {
            if r.defined[d] {
                x[(i, j)] = r.values[d] - m;
            }
        }
    }
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let total = cov.trace();
    if total <= 0.0 {
        return Err(Error::data("data has zero variance"));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let tol = total * 1e-10;
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > tol).count();
    let k_eff = k.min(rank).min(width);
    if k_eff < k {
        warn!("k = {k} exceeds the effective rank {rank}, reduced to {k_eff}");
    }

    let mut components = Vec::with_capacity(k_eff);
    let mut explained_variance = Vec::with_capacity(k_eff);
    for &i in order.iter().take(k_eff) {
        let mut c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.iter_mut().for_each(|v| *v /= norm);
        let pivot = c
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if v.abs() > c[best].abs() { j } else { best });
        if c[pivot] < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(c);
        explained_variance.push(eig.eigenvalues[i].max(0.0));
    }
    let explained_variance_ratio = explained_variance.iter().map(|v| v / total).collect();

    let mut projection = Projection {
        languages: vs.languages().to_vec(),
        input_dims: vs.dims().to_vec(),
        kept_dims,
        means,
        components,
        explained_variance,
        explained_variance_ratio,
        points: Vec::new(),
        requested_k: k,
    };
    projection.points = (0..n)
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            projection.scores(&row)
        })
        .collect();
    Ok(projection)
}

/// Projects the languages of `vs` with the imputation means and centering
/// of the fit.
pub fn project(p: &Projection, vs: &VectorSet) -> Result<Vec<Vec<f64>>> {
    Ok(p.centered_data(vs)?.iter().map(|row| p.scores(row)).collect())
}

/// Scatter of the first two components with the `highlight` languages drawn
/// as a second series on top of the rest.
pub fn render_scatter(p: &Projection, highlight: &[String], opts: &PlotOptions) -> Result<String> {
    if p.points.is_empty() {
        return Err(Error::data("nothing to plot"));
    }
    let mut seen = BTreeSet::new();
    for id in highlight {
        if !seen.insert(id.as_str()) {
            return Err(Error::sample(format!("'{id}' highlighted twice")));
        }
    }
    for id in highlight {
        if !p.languages.contains(id) {
            warn!("highlighted language {id} is not in the projection");
        }
    }
    let xy = |pt: &Vec<f64>| (pt[0], pt.get(1).copied().unwrap_or(0.0));
    let (w, h) = (opts.width as f64, opts.height as f64);
    let xs = Axis::fit(
        p.points.iter().map(|pt| xy(pt).0),
        svg::MARGIN_LEFT,
        w - svg::MARGIN_RIGHT,
    );
    let ys = Axis::fit(
        p.points.iter().map(|pt| xy(pt).1),
        h - svg::MARGIN_BOTTOM,
        svg::MARGIN_TOP,
    );

    let pct = |i: usize| {
        p.explained_variance_ratio
            .get(i)
            .map(|r| format!("PC{} ({:.1}%)", i + 1, r * 100.0))
            .unwrap_or_else(|| format!("PC{}", i + 1))
    };
    let mut labelled = opts.clone();
    labelled.x_label = pct(0);
    labelled.y_label = pct(1);

    let mut doc = Svg::new(opts.width, opts.height);
    svg::frame(&mut doc, &labelled, xs, ys);
    doc.open_group("background", "series", BACKGROUND_COLOR);
    for (id, pt) in p.languages.iter().zip(&p.points) {
        if !seen.contains(id.as_str()) {
            let (x, y) = xy(pt);
            doc.marker(xs.map(x), ys.map(y), BACKGROUND_RADIUS, None, id);
        }
    }
    doc.close_group();
    if !highlight.is_empty() {
        doc.open_group("highlight", "series", HIGHLIGHT_COLOR);
        for (id, pt) in p.languages.iter().zip(&p.points) {
            if seen.contains(id.as_str()) {
                let (x, y) = xy(pt);
                doc.marker(xs.map(x), ys.map(y), HIGHLIGHT_RADIUS, None, id);
            }
        }
        doc.close_group();
    }
    Ok(doc.finish())
}

pub fn write_scatter(p: &Projection, highlight: &[String], opts: &PlotOptions, out: impl AsRef<Path>) -> Result<()> {
    let doc = render_scatter(p, highlight, opts)?;
    svg::write(out.as_ref(), &doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs(rows: &[&[f64]]) -> VectorSet {
        let d = rows[0].len();
        let dims = (0..d).map(|i| format!("d{i}")).collect();
        let langs = (0..rows.len()).map(|i| format!("l{i}")).collect();
        let values: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let n = values.len();
        VectorSet::new(dims, langs, values, vec![true; n]).unwrap()
    }

    #[test]
    fn collinear_points() {
        let p = fit(&vs(&[&[0.1, 0.1], &[0.4, 0.4], &[0.5, 0.5], &[0.9, 0.9]]), 2).unwrap();
        assert_eq!(p.k(), 1, "rank-1 data reduces k");
        let c = &p.components[0];
        let s = 0.5f64.sqrt();
        assert!((c[0] - s).abs() < 1e-12 && (c[1] - s).abs() < 1e-12);
        assert!(p.explained_variance_ratio[0] >= 1.0 - 1e-9);
    }

    #[test]
    fn axis_aligned_four_to_one() {
        // deviations (+-0.4, 0) and (0, +-0.2): variances in ratio 4:1
        let p = fit(&vs(&[&[0.9, 0.5], &[0.1, 0.5], &[0.5, 0.7], &[0.5, 0.3]]), 2).unwrap();
        assert!((p.explained_variance_ratio[0] - 0.8).abs() < 1e-12);
        assert!((p.explained_variance_ratio[1] - 0.2).abs() < 1e-12);
        assert!((p.components[0][0] - 1.0).abs() < 1e-12);
        assert!((p.components[1][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_sums_to_one() {
        let p = fit(
            &vs(&[&[0.1, 0.3, 0.0], &[0.7, 0.2, 1.0], &[0.4, 0.9, 0.5], &[0.2, 0.2, 0.8]]),
            3,
        )
        .unwrap();
        let total: f64 = p.explained_variance_ratio.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projecting_training_data_reproduces_points() {
        let data = vs(&[&[0.1, 0.3, 0.0], &[0.7, 0.2, 1.0], &[0.4, 0.9, 0.5], &[0.2, 0.2, 0.8]]);
        let p = fit(&data, 2).unwrap();
        let again = project(&p, &data).unwrap();
        for (a, b) in again.iter().zip(&p.points) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        let twin = project(&p, &vs(&[&[0.7, 0.2, 1.0]])).unwrap();
        assert_eq!(twin[0], again[1]);
    }

    #[test]
    fn all_missing_language_projects_to_origin() {
        let data = vs(&[&[0.1, 0.3], &[0.7, 0.2], &[0.4, 0.9]]);
        let p = fit(&data, 2).unwrap();
        let blank = VectorSet::new(
            data.dims().to_vec(),
            vec!["x".into()],
            vec![0.0, 0.0],
            vec![false, false],
        )
        .unwrap();
        let pts = project(&p, &blank).unwrap();
        assert!(pts[0].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let data = vs(&[&[0.1, 0.3], &[0.7, 0.2], &[0.4, 0.9]]);
        let p = fit(&data, 1).unwrap();
        let other = vs(&[&[0.1, 0.3, 0.2]]);
        assert!(matches!(project(&p, &other), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn empty_dimension_dropped() {
        let data = VectorSet::new(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into(), "z".into()],
            vec![0.1, 0.0, 0.9, 0.0, 0.5, 0.0],
            vec![true, false, true, false, true, false],
        )
        .unwrap();
        let p = fit(&data, 1).unwrap();
        assert_eq!(p.kept_dims, vec![0]);
    }

    #[test]
    fn fit_preconditions() {
        let data = vs(&[&[0.1, 0.3], &[0.7, 0.2]]);
        assert!(matches!(fit(&data, 0), Err(Error::Usage(_))));
        assert!(matches!(fit(&data, 3), Err(Error::Usage(_))));
        assert!(matches!(fit(&data, 2), Err(Error::Sample(_))));
    }

    fn five_points() -> Projection {
        fit(
            &vs(&[&[0.1, 0.3], &[0.7, 0.2], &[0.4, 0.9], &[0.3, 0.3], &[0.8, 0.6]]),
            2,
        )
        .unwrap()
    }

    #[test]
    fn scatter_series_structure() {
        let p = five_points();
        let doc = render_scatter(&p, &["l1".into(), "l3".into()], &PlotOptions::default()).unwrap();
        assert_eq!(doc.matches("class=\"marker\"").count(), 5);
        assert_eq!(doc.matches("class=\"series\"").count(), 2);
        let bg = doc.find("id=\"background\"").unwrap();
        let hl = doc.find("id=\"highlight\"").unwrap();
        assert!(bg < hl, "highlight series drawn last");
        assert!(doc.contains("PC1 (") && doc.contains("PC2 ("));
    }

    #[test]
    fn scatter_without_highlight_single_series() {
        let doc = render_scatter(&five_points(), &[], &PlotOptions::default()).unwrap();
        assert_eq!(doc.matches("class=\"series\"").count(), 1);
    }

    #[test]
    fn scatter_duplicate_highlight_rejected() {
        let err = render_scatter(&five_points(), &["l1".into(), "l1".into()], &PlotOptions::default());
        assert!(matches!(err, Err(Error::Sample(_))));
    }

    #[test]
    fn scatter_deterministic() {
        let a = render_scatter(&five_points(), &["l2".into()], &PlotOptions::default()).unwrap();
        let b = render_scatter(&five_points(), &["l2".into()], &PlotOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
