//! C ABI over the `typdiv` diversity measures.
//!
//! Data sets are loaded into opaque handles that the caller releases with the
//! matching `*_free` function. Every fallible call returns a [`TypdivStatus`];
//! on failure the message is available from [`typdiv_last_error_message`]
//! on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use typdiv::audit::{run_audit, FeatureGrouping, GroupValue, NaPolicy, ScoreTable};
use typdiv::cldf::{load_structure_dataset, FeatureMatrix};
use typdiv::distances::{build_matrix, DistanceMatrix, DistanceSource, PairNormalization};
use typdiv::langmeta::Registry;
use typdiv::metrics::{fvi, mpd, mpsd, LanguageSample, MetricResult};
use typdiv::survey::{cohen_kappa, scan_claims, ClaimField, PaperRecord};
use typdiv::vectors::{load_distance_matrix, load_vector_table, VectorSet};
use typdiv::Error;

/// Result of a call; the nonzero values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypdivStatus {
    Ok = 0,
    /// Bad arguments: null pointers, invalid UTF-8, unknown options.
    Usage = 1,
    /// Unreadable or malformed input data.
    Data = 2,
    /// The sample cannot be measured, e.g. fewer than two usable languages.
    Sample = 3,
    /// A panic was caught at the boundary.
    Internal = 4,
}

/// Pairwise distance matrix over language ids.
pub struct TypdivDistanceMatrix(DistanceMatrix);

/// Per-language vectors with missing dimensions.
pub struct TypdivVectorSet(VectorSet);

/// Categorical feature values from a CLDF structure dataset.
pub struct TypdivFeatureMatrix(FeatureMatrix);

/// Language metadata: coordinates and genealogical lineages.
pub struct TypdivRegistry(Registry);

/// Measure value plus how many languages were used and left out.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TypdivMetric {
    pub value: f64,
    pub used: usize,
    pub excluded: usize,
    /// Language pairs for distance measures, features for FVI.
    pub count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypdivRegistryDistance {
    Geographic = 0,
    Genetic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypdivNaPolicy {
    /// Languages without a feature value form their own group.
    Group = 0,
    /// Languages without a feature value are left out of the grouped mean.
    Exclude = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TypdivAudit {
    pub overall_mean: f64,
    pub overall_count: usize,
    pub by_feature_mean: f64,
    pub by_feature_count: usize,
    pub delta: f64,
    pub n_groups: usize,
}

/// Where a claim matched: 0 nowhere, 1 title, 2 abstract.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TypdivClaim {
    pub field: u32,
    /// Byte offsets into the matched field.
    pub start: usize,
    pub end: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> TypdivStatus {
    match err.exit_code() {
        1 => TypdivStatus::Usage,
        3 => TypdivStatus::Sample,
        _ => TypdivStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> TypdivStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_last_error();
            TypdivStatus::Ok
        }
        Ok(Err(err)) => {
            set_last_error(err.to_string());
            status_of(&err)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("internal error: {msg}"));
            TypdivStatus::Internal
        }
    }
}

fn usage(msg: &str) -> Error {
    Error::Usage(msg.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(usage(&format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| usage(&format!("{name} is not valid UTF-8")))
}

unsafe fn str_array(p: *const *const c_char, n: usize, name: &str) -> Result<Vec<String>, Error> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(usage(&format!("{name} is null")));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .enumerate()
        .map(|(i, &s)| str_arg(s, &format!("{name}[{i}]")).map(str::to_string))
        .collect()
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Error> {
    p.as_ref().ok_or_else(|| usage(&format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Error> {
    p.as_mut().ok_or_else(|| usage(&format!("{name} is null")))
}

unsafe fn sample_arg(ids: *const *const c_char, n: usize) -> Result<LanguageSample, Error> {
    let ids = str_array(ids, n, "ids")?;
    LanguageSample::new(ids.iter().map(|s| s.trim().to_ascii_lowercase()).collect())
}

fn metric(r: &MetricResult) -> TypdivMetric {
    TypdivMetric {
        value: r.value,
        used: r.used.len(),
        excluded: r.excluded.len(),
        count: r.count,
    }
}

unsafe fn load_into<T>(
    path: *const c_char,
    out_handle: *mut *mut T,
    load: impl FnOnce(&str) -> Result<T, Error>,
) -> TypdivStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        *slot = ptr::null_mut();
        let path = str_arg(path, "path")?;
        *slot = Box::into_raw(Box::new(load(path)?));
        Ok(())
    })
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn typdiv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a
/// successful one. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn typdiv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a square distance matrix from a CSV file with a header row of ids.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn typdiv_distance_matrix_load(
    path: *const c_char,
    out: *mut *mut TypdivDistanceMatrix,
) -> TypdivStatus {
    load_into(path, out, |p| load_distance_matrix(p).map(TypdivDistanceMatrix))
}

/// Creates a matrix over `n` ids with every off-diagonal distance unset.
///
/// # Safety
/// `ids` must point to `n` NUL-terminated strings and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn typdiv_distance_matrix_new(
    ids: *const *const c_char,
    n: usize,
    out_handle: *mut *mut TypdivDistanceMatrix,
) -> TypdivStatus {
    guard(|| {
        let slot = out(out_handle, "out")?;
        *slot = ptr::null_mut();
        let ids = str_array(ids, n, "ids")?;
        *slot = Box::into_raw(Box::new(TypdivDistanceMatrix(DistanceMatrix::empty(ids)?)));
        Ok(())
    })
}

/// Sets the symmetric distance between languages `i` and `j`, in [0, 1].
///
/// # Safety
/// `matrix` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn typdiv_distance_matrix_set(
    matrix: *mut TypdivDistanceMatrix,
    i: usize,
    j: usize,
    value: f64,
) -> TypdivStatus {
    guard(|| {
        let m = matrix.as_mut().ok_or_else(|| usage("matrix is null"))?;
        m.0.set(i, j, value)
    })
}

/// Number of languages in the matrix; 0 for NULL.
///
/// # Safety
/// `matrix` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn typdiv_distance_matrix_len(matrix: *const TypdivDistanceMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.len())
}

/// # Safety
/// `matrix` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn typdiv_distance_matrix_free(matrix: *mut TypdivDistanceMatrix) {
    free(matrix)
}

/// Loads per-language vectors from a tab-separated table.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn typdiv_vector_set_load(path: *const c_char, out: *mut *mut TypdivVectorSet) -> TypdivStatus {
    load_into(path, out, |p| load_vector_table(p).map(TypdivVectorSet))
}

/// # Safety
/// `vectors` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn typdiv_vector_set_free(vectors: *mut TypdivVectorSet) {
    free(vectors)
}

/// Loads a CLDF structure dataset directory, or a feature cache file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn typdiv_feature_matrix_load(
    path: *const c_char,
    out: *mut *mut TypdivFeatureMatrix,
) -> TypdivStatus {
    load_into(path, out, |p| {
        let m = if std::path::Path::new(p).is_file() {
            FeatureMatrix::load_cache(p)?
        } else {
            load_structure_dataset(p)?
        };
        Ok(TypdivFeatureMatrix(m))
    })
}

/// # Safety
/// `features` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn typdiv_feature_matrix_free(features: *mut TypdivFeatureMatrix) {
    free(features)
}

/// Loads a language registry CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn typdiv_registry_load(path: *const c_char, out: *mut *mut TypdivRegistry) -> TypdivStatus {
    load_into(path, out, |p| Registry::load(p).map(TypdivRegistry))
}

/// # Safety
/// `registry` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn typdiv_registry_free(registry: *mut TypdivRegistry) {
    free(registry)
}

/// Mean pairwise distance of the sample over a precomputed matrix.
///
/// # Safety
/// `ids` must point to `n` NUL-terminated strings; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn typdiv_mpd(
    matrix: *const TypdivDistanceMatrix,
    ids: *const *const c_char,
    n: usize,
    result: *mut TypdivMetric,
) -> TypdivStatus {
    guard(|| {
        let m = handle(matrix, "matrix")?;
        let result = out(result, "result")?;
        let sample = sample_arg(ids, n)?;
        *result = metric(&mpd(&sample, &m.0)?);
        Ok(())
    })
}

/// Mean pairwise syntactic distance after dropping languages whose vectors
/// cover less than `threshold` of the dimensions. With `raw`, pair
/// distances are plain Euclidean norms instead of normalized ones.
///
/// # Safety
/// `ids` must point to `n` NUL-terminated strings; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn typdiv_mpsd(
    vectors: *const TypdivVectorSet,
    ids: *const *const c_char,
    n: usize,
    threshold: f64,
    raw: bool,
    result: *mut TypdivMetric,
) -> TypdivStatus {
    guard(|| {
        let vs = handle(vectors, "vectors")?;
        let result = out(result, "result")?;
        let sample = sample_arg(ids, n)?;
        let norm = if raw {
            PairNormalization::Raw
        } else {
            PairNormalization::SharedMean
        };
        *result = metric(&mpsd(&sample, &vs.0, threshold, norm)?);
        Ok(())
    })
}

/// Mean pairwise geographic or genetic distance from registry metadata.
///
/// # Safety
/// `ids` must point to `n` NUL-terminated strings; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn typdiv_registry_mpd(
    registry: *const TypdivRegistry,
    kind: TypdivRegistryDistance,
    ids: *const *const c_char,
    n: usize,
    result: *mut TypdivMetric,
) -> TypdivStatus {
    guard(|| {
        let reg = handle(registry, "registry")?;
        let result = out(result, "result")?;
        let sample = sample_arg(ids, n)?;
        let source = match kind {
            TypdivRegistryDistance::Geographic => DistanceSource::Geographic(&reg.0),
            TypdivRegistryDistance::Genetic => DistanceSource::Genetic(&reg.0),
        };
        let built = build_matrix(&sample, source, false)?;
        *result = metric(&mpd(&sample, &built.matrix)?);
        Ok(())
    })
}

/// Feature value inclusion: the share of attested feature values that the
/// sample covers, averaged over features.
///
/// # Safety
/// `ids` must point to `n` NUL-terminated strings; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn typdiv_fvi(
    features: *const TypdivFeatureMatrix,
    ids: *const *const c_char,
    n: usize,
    result: *mut TypdivMetric,
) -> TypdivStatus {
    guard(|| {
        let fm = handle(features, "features")?;
        let result = out(result, "result")?;
        let sample = sample_arg(ids, n)?;
        *result = metric(&fvi(&sample, &fm.0)?);
        Ok(())
    })
}

/// Compares the plain mean of `n` benchmark scores with the mean of the
/// per-group means, grouping languages by `groups[i]`. A NULL entry (or a
/// NULL `groups`) marks the language as having no feature value.
///
/// # Safety
/// `languages` and `scores` must hold `n` entries; `groups` NULL or `n`.
#[no_mangle]
pub unsafe extern "C" fn typdiv_audit(
    languages: *const *const c_char,
    scores: *const f64,
    groups: *const *const c_char,
    n: usize,
    policy: TypdivNaPolicy,
    result: *mut TypdivAudit,
) -> TypdivStatus {
    guard(|| {
        let result = out(result, "result")?;
        let langs = str_array(languages, n, "languages")?;
        if n > 0 && scores.is_null() {
            return Err(usage("scores is null"));
        }
        let values: &[f64] = if n == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(scores, n)
        };
        let mut grouping = Vec::with_capacity(n);
        for (i, lang) in langs.iter().enumerate() {
            let raw = if groups.is_null() { ptr::null() } else { *groups.add(i) };
            let value = if raw.is_null() {
                GroupValue::NotAvailable
            } else {
                match str_arg(raw, "groups")?.trim() {
                    "" | "NA" => GroupValue::NotAvailable,
                    v => GroupValue::Value(v.to_string()),
                }
            };
            grouping.push((lang.clone(), value));
        }
        let table = ScoreTable::new(langs.into_iter().zip(values.iter().copied()).collect())?;
        let grouping = FeatureGrouping::new(grouping)?;
        let policy = match policy {
            TypdivNaPolicy::Group => NaPolicy::Group,
            TypdivNaPolicy::Exclude => NaPolicy::Exclude,
        };
        let r = run_audit(&table, &grouping, policy)?;
        *result = TypdivAudit {
            overall_mean: r.overall_mean,
            overall_count: r.overall_count,
            by_feature_mean: r.by_feature_mean,
            by_feature_count: r.by_feature_count,
            delta: r.delta,
            n_groups: r.groups.len(),
        };
        Ok(())
    })
}

/// Cohen's kappa between two annotators' labels for `n` items.
///
/// # Safety
/// `a` and `b` must each point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn typdiv_kappa(
    a: *const *const c_char,
    b: *const *const c_char,
    n: usize,
    result: *mut f64,
) -> TypdivStatus {
    guard(|| {
        let result = out(result, "result")?;
        let a = str_array(a, n, "a")?;
        let b = str_array(b, n, "b")?;
        *result = cohen_kappa(&a, &b)?;
        Ok(())
    })
}

/// Looks for a typological diversity claim in the title, then the abstract.
///
/// # Safety
/// `title` and `abstract_text` must be NUL-terminated; `result` valid.
#[no_mangle]
pub unsafe extern "C" fn typdiv_scan_claim(
    title: *const c_char,
    abstract_text: *const c_char,
    result: *mut TypdivClaim,
) -> TypdivStatus {
    guard(|| {
        let result = out(result, "result")?;
        let record = PaperRecord::new("", str_arg(title, "title")?, str_arg(abstract_text, "abstract_text")?);
        *result = match scan_claims(&record) {
            None => TypdivClaim::default(),
            Some(m) => TypdivClaim {
                field: match m.field {
                    ClaimField::Title => 1,
                    ClaimField::Abstract => 2,
                },
                start: m.start,
                end: m.end,
            },
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_exit_codes() {
        assert_eq!(status_of(&Error::Usage("x".into())), TypdivStatus::Usage);
        assert_eq!(status_of(&Error::Data("x".into())), TypdivStatus::Data);
        assert_eq!(status_of(&Error::Sample("x".into())), TypdivStatus::Sample);
        assert_eq!(status_of(&Error::UnknownCode("x".into())), TypdivStatus::Sample);
    }

    #[test]
    fn panics_are_caught() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, TypdivStatus::Internal);
        let msg = unsafe { CStr::from_ptr(typdiv_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "internal error: boom");
        assert_eq!(guard(|| Ok(())), TypdivStatus::Ok);
        assert!(typdiv_last_error_message().is_null());
    }
}
