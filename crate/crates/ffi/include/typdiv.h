#ifndef TYPDIV_H
#define TYPDIV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TypdivNaPolicy {
  // Languages without a feature value form their own group.
  TYPDIV_NA_POLICY_GROUP = 0,
  // Languages without a feature value are left out of the grouped mean.
  TYPDIV_NA_POLICY_EXCLUDE = 1,
} TypdivNaPolicy;

typedef enum TypdivRegistryDistance {
  TYPDIV_REGISTRY_DISTANCE_GEOGRAPHIC = 0,
  TYPDIV_REGISTRY_DISTANCE_GENETIC = 1,
} TypdivRegistryDistance;

// Result of a call; the nonzero values match the command-line exit codes.
typedef enum TypdivStatus {
  TYPDIV_STATUS_OK = 0,
  // Bad arguments: null pointers, invalid UTF-8, unknown options.
  TYPDIV_STATUS_USAGE = 1,
  // Unreadable or malformed input data.
  TYPDIV_STATUS_DATA = 2,
  // The sample cannot be measured, e.g. fewer than two usable languages.
  TYPDIV_STATUS_SAMPLE = 3,
  // A panic was caught at the boundary.
  TYPDIV_STATUS_INTERNAL = 4,
} TypdivStatus;

// Pairwise distance matrix over language ids.
typedef struct TypdivDistanceMatrix TypdivDistanceMatrix;

// Categorical feature values from a CLDF structure dataset.
typedef struct TypdivFeatureMatrix TypdivFeatureMatrix;

// Language metadata: coordinates and genealogical lineages.
typedef struct TypdivRegistry TypdivRegistry;

// Per-language vectors with missing dimensions.
typedef struct TypdivVectorSet TypdivVectorSet;

// Measure value plus how many languages were used and left out.
typedef struct TypdivMetric {
  double value;
  size_t used;
  size_t excluded;
  // Language pairs for distance measures, features for FVI.
  size_t count;
} TypdivMetric;

typedef struct TypdivAudit {
  double overall_mean;
  size_t overall_count;
  double by_feature_mean;
  size_t by_feature_count;
  double delta;
  size_t n_groups;
} TypdivAudit;

// Where a claim matched: 0 nowhere, 1 title, 2 abstract.
typedef struct TypdivClaim {
  uint32_t field;
  // Byte offsets into the matched field.
  size_t start;
  size_t end;
} TypdivClaim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *typdiv_version(void);

// Message of the last failed call on this thread, or NULL after a
// successful one. Valid until the next call on the same thread.
const char *typdiv_last_error_message(void);

// Loads a square distance matrix from a CSV file with a header row of ids.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TypdivStatus typdiv_distance_matrix_load(const char *path, struct TypdivDistanceMatrix **out);

// Creates a matrix over `n` ids with every off-diagonal distance unset.
//
// # Safety
// `ids` must point to `n` NUL-terminated strings and `out` be valid.
enum TypdivStatus typdiv_distance_matrix_new(const char *const *ids,
                                             size_t n,
                                             struct TypdivDistanceMatrix **out_handle);

// Sets the symmetric distance between languages `i` and `j`, in [0, 1].
//
// # Safety
// `matrix` must be a live handle.
enum TypdivStatus typdiv_distance_matrix_set(struct TypdivDistanceMatrix *matrix,
                                             size_t i,
                                             size_t j,
                                             double value);

// Number of languages in the matrix; 0 for NULL.
//
// # Safety
// `matrix` must be NULL or a live handle.
size_t typdiv_distance_matrix_len(const struct TypdivDistanceMatrix *matrix);

// # Safety
// `matrix` must be NULL or a handle not yet freed.
void typdiv_distance_matrix_free(struct TypdivDistanceMatrix *matrix);

// Loads per-language vectors from a tab-separated table.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TypdivStatus typdiv_vector_set_load(const char *path, struct TypdivVectorSet **out);

// # Safety
// `vectors` must be NULL or a handle not yet freed.
void typdiv_vector_set_free(struct TypdivVectorSet *vectors);

// Loads a CLDF structure dataset directory, or a feature cache file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TypdivStatus typdiv_feature_matrix_load(const char *path, struct TypdivFeatureMatrix **out);

// # Safety
// `features` must be NULL or a handle not yet freed.
void typdiv_feature_matrix_free(struct TypdivFeatureMatrix *features);

// Loads a language registry CSV.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TypdivStatus typdiv_registry_load(const char *path, struct TypdivRegistry **out);

// # Safety
// `registry` must be NULL or a handle not yet freed.
void typdiv_registry_free(struct TypdivRegistry *registry);

// Mean pairwise distance of the sample over a precomputed matrix.
//
// # Safety
// `ids` must point to `n` NUL-terminated strings; other pointers valid.
enum TypdivStatus typdiv_mpd(const struct TypdivDistanceMatrix *matrix,
                             const char *const *ids,
                             size_t n,
                             struct TypdivMetric *result);

// Mean pairwise syntactic distance after dropping languages whose vectors
// cover less than `threshold` of the dimensions. With `raw`, pair
// distances are plain Euclidean norms instead of normalized ones.
//
// # Safety
// `ids` must point to `n` NUL-terminated strings; other pointers valid.
enum TypdivStatus typdiv_mpsd(const struct TypdivVectorSet *vectors,
                              const char *const *ids,
                              size_t n,
                              double threshold,
                              bool raw,
                              struct TypdivMetric *result);

// Mean pairwise geographic or genetic distance from registry metadata.
//
// # Safety
// `ids` must point to `n` NUL-terminated strings; other pointers valid.
enum TypdivStatus typdiv_registry_mpd(const struct TypdivRegistry *registry,
                                      enum TypdivRegistryDistance kind,
                                      const char *const *ids,
                                      size_t n,
                                      struct TypdivMetric *result);

// Feature value inclusion: the share of attested feature values that the
// sample covers, averaged over features.
//
// # Safety
// `ids` must point to `n` NUL-terminated strings; other pointers valid.
enum TypdivStatus typdiv_fvi(const struct TypdivFeatureMatrix *features,
                             const char *const *ids,
                             size_t n,
                             struct TypdivMetric *result);

// Compares the plain mean of `n` benchmark scores with the mean of the
// per-group means, grouping languages by `groups[i]`. A NULL entry (or a
// NULL `groups`) marks the language as having no feature value.
//
// # Safety
// `languages` and `scores` must hold `n` entries; `groups` NULL or `n`.
enum TypdivStatus typdiv_audit(const char *const *languages,
                               const double *scores,
                               const char *const *groups,
                               size_t n,
                               enum TypdivNaPolicy policy,
                               struct TypdivAudit *result);

// Cohen's kappa between two annotators' labels for `n` items.
//
// # Safety
// `a` and `b` must each point to `n` NUL-terminated strings.
enum TypdivStatus typdiv_kappa(const char *const *a,
                               const char *const *b,
                               size_t n,
                               double *result);

// Looks for a typological diversity claim in the title, then the abstract.
//
// # Safety
// `title` and `abstract_text` must be NUL-terminated; `result` valid.
enum TypdivStatus typdiv_scan_claim(const char *title,
                                    const char *abstract_text,
                                    struct TypdivClaim *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TYPDIV_H */
