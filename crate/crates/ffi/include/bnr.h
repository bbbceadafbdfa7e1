/* C interface for the bnr broaden-and-refine retrieval pipeline.
 *
 * Hand-maintained to match crates/ffi/src/lib.rs; the Rust test
 * `header_lists_every_exported_symbol` keeps the two in lockstep.
 *
 * Usage sketch:
 *
 *   BnrPipeline *p = bnr_pipeline_open("path/to/corpus", NULL);
 *   if (!p) { fprintf(stderr, "%s\n", bnr_last_error_message()); return 1; }
 *   char *json = NULL;
 *   if (bnr_run_session_json(p, "cat:apparel | soft:linen", NULL, &json)
 *       == BNR_STATUS_OK) {
 *     puts(json);
 *     bnr_string_free(json);
 *   }
 *   bnr_pipeline_free(p);
 *
 * Memory rules:
 *   - Every char* written to an out-parameter must be released with
 *     bnr_string_free exactly once.
 *   - The pointer from bnr_last_error_message is borrowed; it stays valid
 *     until the next failing call on the same thread. Do not free it.
 *
 * Thread safety: a pipeline is immutable after open, so concurrent reads
 * through one handle are safe; open/free must not race with use.
 */

#ifndef BNR_H
#define BNR_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Result of every call. Non-zero values are failures; the detail is
 * available from bnr_last_error_message(). */
typedef enum BnrStatus {
  BNR_STATUS_OK = 0,
  /* A required pointer argument was null. */
  BNR_STATUS_NULL_ARGUMENT = 1,
  /* A string argument was not valid UTF-8. */
  BNR_STATUS_INVALID_UTF8 = 2,
  /* Malformed query text. */
  BNR_STATUS_PARSE_ERROR = 3,
  /* A configuration document or value was rejected. */
  BNR_STATUS_CONFIG_ERROR = 4,
  /* Missing or inconsistent data (corpus, parameters, ids). */
  BNR_STATUS_DATA_ERROR = 5,
  /* A non-finite number surfaced in the math. */
  BNR_STATUS_NUMERIC_ERROR = 6,
  /* Filesystem failure. */
  BNR_STATUS_IO_ERROR = 7,
  /* The library caught an internal panic at the boundary. */
  BNR_STATUS_PANIC = 8,
} BnrStatus;

/* Opaque pipeline handle: an opened corpus, its search index, and the
 * serving configuration. */
typedef struct BnrPipeline BnrPipeline;

/* Opens a pipeline over a corpus directory written by `bnr gen-corpus`.
 *
 * config_json may be NULL for the default serving configuration, or a JSON
 * document in the PipelineConfig shape, e.g.
 *   {"n_rewrites": 4, "page_size": 20, "verifier": {"mode": "oracle"}}.
 *
 * Returns NULL on failure; see bnr_last_error_message(). */
BnrPipeline *bnr_pipeline_open(const char *corpus_dir,
                               const char *config_json);

/* Releases a pipeline. NULL is a no-op. */
void bnr_pipeline_free(BnrPipeline *pipeline);

/* Runs one engine search (no expansion, no verification) over the query
 * grammar `cat:... | attr:k=v | range:k=lo..hi | neg:k=v | soft:token`.
 *
 * On success writes a JSON object {"query", "item_ids", "total_matches"}
 * to *out_json (release with bnr_string_free). */
BnrStatus bnr_search_json(const BnrPipeline *pipeline,
                          const char *query,
                          size_t limit,
                          size_t offset,
                          char **out_json);

/* Runs a full broaden -> refine session: expand the query into rewrites,
 * search each, merge and deduplicate, verify against the original query,
 * and assemble the first display page.
 *
 * expander_json may be NULL (enumerative expansion with the default
 * rewrite count) or a JSON document in the ExpanderSpec shape:
 *   {"kind":"identity"}
 *   {"kind":"enumerative","n":4}
 *   {"kind":"policy","params_path":"path/to/params.json","seed":0}
 *
 * On success writes the session report JSON to *out_json (release with
 * bnr_string_free). */
BnrStatus bnr_run_session_json(const BnrPipeline *pipeline,
                               const char *query,
                               const char *expander_json,
                               char **out_json);

/* Releases a string produced by this library. NULL is a no-op. */
void bnr_string_free(char *s);

/* The message of the most recent failure on this thread, or NULL if no
 * call has failed yet. Borrowed; do not free. */
const char *bnr_last_error_message(void);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BNR_H */
