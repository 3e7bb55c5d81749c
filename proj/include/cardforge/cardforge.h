/* C interface to the cardforge corpus pipeline.
 *
 * Every call returns a cf_status. On failure the message of the most recent
 * error on the calling thread is available from cf_last_error(). Strings
 * returned through char** out-parameters are owned by the caller and must be
 * released with cf_string_free().
 */
#ifndef CARDFORGE_CARDFORGE_H
#define CARDFORGE_CARDFORGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(CARDFORGE_BUILDING_LIBRARY)
#define CF_API __attribute__((visibility("default")))
#else
#define CF_API
#endif

/* The first four values double as process exit codes of the CLI. */
typedef enum cf_status {
  CF_OK = 0,
  CF_ERR_INTERNAL = 1,
  CF_ERR_CONFIG = 2,
  CF_ERR_PROVIDER = 3,
  CF_ERR_SCHEMA = 4,
  CF_ERR_IO = 5,
  CF_ERR_INVALID_ARGUMENT = 6,
  CF_ERR_PRECONDITION = 7
} cf_status;

typedef struct cf_context cf_context;

CF_API const char* cf_version(void);

/* Message and offending field (possibly empty) of the last error raised on
 * this thread. Valid until the next failing call on the same thread. */
CF_API const char* cf_last_error(void);
CF_API const char* cf_last_error_field(void);

CF_API void cf_string_free(char* s);

/* config_json: a JSON object of run settings, or NULL for the defaults. */
CF_API cf_status cf_context_create(const char* config_json, cf_context** out);
CF_API void cf_context_destroy(cf_context* ctx);

/* Effective configuration (defaults applied) as pretty JSON. */
CF_API cf_status cf_config_resolve(const char* config_json, char** resolved_json);

/* Number of provider transport calls issued through this context. */
CF_API uint64_t cf_context_transport_calls(const cf_context* ctx);

/* Pipeline commands. Each writes into the configured run directory and
 * returns a JSON summary. */
CF_API cf_status cf_synthesize(cf_context* ctx, char** summary_json);
CF_API cf_status cf_select(cf_context* ctx, char** summary_json);
/* format: "sft", "dpo" or "all". */
CF_API cf_status cf_export(cf_context* ctx, const char* format, char** report_json);
/* options_json keys: suites (array of "opinion", "binary", "open"),
 * data_dir, culture, raw_divergence, model and judge ("provider[:model]"),
 * report_path. NULL selects every suite with the configured models. */
CF_API cf_status cf_evaluate(cf_context* ctx, const char* options_json, char** report_json);
/* source: "selection" or "scored". */
CF_API cf_status cf_analyze(cf_context* ctx, int top_terms, const char* source, char** report_json);

/* source: "builtin" or a JSONL path. */
CF_API cf_status cf_taxonomy_dump(const char* source, int strict_count, char** jsonl);

/* Numeric helpers. Vectors must be unit-norm where noted. */
CF_API cf_status cf_cosine(const double* a, const double* b, size_t dim, double* out);
/* peers: n_peers rows of dim values each. */
CF_API cf_status cf_distinctiveness(const double* target, const double* peers, size_t n_peers, size_t dim,
                                    double* out);
CF_API cf_status cf_js_similarity(const double* p, const double* q, size_t n, int raw_divergence, double* out);

/* 64-hex-char SHA-256 of the canonical serialization of a JSON value. */
CF_API cf_status cf_content_hash(const char* json, char** hex);

/* kind: "question", "response", "scored_sample" or "manifest". Returns
 * CF_OK for a valid record and CF_ERR_SCHEMA otherwise; report_json (may be
 * NULL) receives {"ok", "error_kind", "field", "message"}. */
CF_API cf_status cf_validate_record(const char* line, const char* kind, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
