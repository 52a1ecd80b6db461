#ifndef MPS_H
#define MPS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MpsOutcomeKind {
  MPS_OUTCOME_KIND_SOLVED = 0,
  MPS_OUTCOME_KIND_UNVERIFIED = 1,
  MPS_OUTCOME_KIND_EXHAUSTED = 2,
  MPS_OUTCOME_KIND_ITERATION_CAP = 3,
  MPS_OUTCOME_KIND_TIMEOUT = 4,
  // No pass produced an outcome.
  MPS_OUTCOME_KIND_NONE = 5,
} MpsOutcomeKind;

typedef enum MpsStatus {
  MPS_STATUS_OK = 0,
  MPS_STATUS_NULL_POINTER = 1,
  MPS_STATUS_INVALID_UTF8 = 2,
  MPS_STATUS_INVALID_ARGUMENT = 3,
  MPS_STATUS_IO = 4,
  MPS_STATUS_BACKEND = 5,
  MPS_STATUS_PANIC = 6,
} MpsStatus;

typedef enum MpsTrapKind {
  MPS_TRAP_KIND_TACTIC_SCORE = 0,
  MPS_TRAP_KIND_CASE_COUNT = 1,
  MPS_TRAP_KIND_STATE_LENGTH = 2,
} MpsTrapKind;

// Opaque pass@k result for one theorem.
typedef struct MpsReport MpsReport;

// Opaque simulated proof world.
typedef struct MpsWorld MpsWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next library call on the same thread.
const char *mps_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void mps_string_free(char *s);

// Total explored-candidate budget of the four factors.
//
// # Safety
// `out_total` must be a valid pointer.
enum MpsStatus mps_compute_budget(uint64_t n_pass,
                                  uint64_t n_perspectives,
                                  uint64_t n_max_iter,
                                  uint64_t n_samples,
                                  uint64_t *out_total);

// Parses budget notation such as `64x4x800x8` and writes its total.
//
// # Safety
// `spec` must be a NUL-terminated string and `out_total` a valid pointer.
enum MpsStatus mps_parse_budget(const char *spec, uint64_t *out_total);

// Effectiveness score (0 to 6) of a tactic under the default table.
//
// # Safety
// `tactic` must be a NUL-terminated string and `out_score` a valid pointer.
enum MpsStatus mps_tactic_score(const char *tactic, uint8_t *out_score);

// Parses a world from its JSON file format.
//
// # Safety
// `json` must be a NUL-terminated string and `out_world` a valid pointer.
enum MpsStatus mps_world_from_json(const char *json, struct MpsWorld **out_world);

// Loads a world file.
//
// # Safety
// `path` must be a NUL-terminated string and `out_world` a valid pointer.
enum MpsStatus mps_world_load(const char *path, struct MpsWorld **out_world);

// Generates a random world.
//
// # Safety
// `out_world` must be a valid pointer.
enum MpsStatus mps_world_generate(size_t n_states,
                                  size_t branching,
                                  size_t solve_depth,
                                  double trap_fraction,
                                  double noop_fraction,
                                  uint64_t seed,
                                  struct MpsWorld **out_world);

// Builds a trap world where only one heuristic can follow the proof.
//
// # Safety
// `out_world` must be a valid pointer.
enum MpsStatus mps_world_trap(enum MpsTrapKind kind, uint64_t seed, struct MpsWorld **out_world);

// Length of the shortest proof, or -1 when the root cannot be solved.
//
// # Safety
// `world` must be a live handle and `out_depth` a valid pointer.
enum MpsStatus mps_world_shortest_proof(const struct MpsWorld *world, int64_t *out_depth);

// Releases a world. Null is ignored.
//
// # Safety
// `world` must come from this library and not be freed twice.
void mps_world_free(struct MpsWorld *world);

// Runs pass@k search on a simulated world.
//
// `critic` is `oracle`, `trap` or `noisy:<amplitude>`; null means oracle.
// `config_json` is a search configuration object; null or empty means
// defaults. Searches that end unsolved still return `MPS_STATUS_OK`.
//
// # Safety
// String arguments must be null or NUL-terminated; `world` must be a live
// handle and `out_report` a valid pointer.
enum MpsStatus mps_search_world(const struct MpsWorld *world,
                                const char *critic,
                                const char *config_json,
                                struct MpsReport **out_report);

// Whether any pass solved the theorem.
//
// # Safety
// `report` must be a live handle.
bool mps_report_solved(const struct MpsReport *report);

// Kind of the last pass's outcome.
//
// # Safety
// `report` must be a live handle.
enum MpsOutcomeKind mps_report_kind(const struct MpsReport *report);

// Candidates explored over all passes.
//
// # Safety
// `report` must be a live handle.
uint64_t mps_report_candidates(const struct MpsReport *report);

// Number of steps in the verified proof, 0 when unsolved.
//
// # Safety
// `report` must be a live handle.
size_t mps_report_proof_len(const struct MpsReport *report);

// Tactic of proof step `index` as a new string, or null when out of range.
//
// # Safety
// `report` must be a live handle. Free the result with `mps_string_free`.
char *mps_report_tactic(const struct MpsReport *report, size_t index);

// The full report as JSON.
//
// # Safety
// `report` must be a live handle and `out_json` a valid pointer. Free the
// result with `mps_string_free`.
enum MpsStatus mps_report_to_json(const struct MpsReport *report, char **out_json);

// Releases a report. Null is ignored.
//
// # Safety
// `report` must come from this library and not be freed twice.
void mps_report_free(struct MpsReport *report);

// Curates a ProofRecord JSONL corpus held in memory.
//
// Writes the (state, step) pairs as JSONL and the curation report as JSON.
// `config_json` may be null for defaults.
//
// # Safety
// String arguments must be null or NUL-terminated; out-pointers must be
// valid. Free both results with `mps_string_free`.
enum MpsStatus mps_curate_jsonl(const char *corpus_jsonl,
                                const char *config_json,
                                char **out_pairs_jsonl,
                                char **out_report_json);

// Length and diversity report of an in-memory proof corpus as JSON.
//
// `normalization` is `head_token` or `full_text`, `step_counting` is
// `lines` or `expand_chains`; null selects the first of each.
//
// # Safety
// String arguments must be null or NUL-terminated; `out_json` must be
// valid. Free the result with `mps_string_free`.
enum MpsStatus mps_analyze_jsonl(const char *corpus_jsonl,
                                 const char *normalization,
                                 const char *step_counting,
                                 char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPS_H */
