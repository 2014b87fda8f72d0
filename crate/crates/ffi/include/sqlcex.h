#ifndef SQLCEX_H
#define SQLCEX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SqlcexReason {
  SQLCEX_REASON_NONE = 0,
  SQLCEX_REASON_TIMEOUT = 1,
  SQLCEX_REASON_UNSUPPORTED = 2,
  SQLCEX_REASON_BOUND_OVERFLOW = 3,
  SQLCEX_REASON_SPURIOUS_ONLY = 4,
  SQLCEX_REASON_SOLVER_ERROR = 5,
} SqlcexReason;

typedef enum SqlcexStatus {
  SQLCEX_STATUS_OK = 0,
  SQLCEX_STATUS_NULL_ARGUMENT = 1,
  SQLCEX_STATUS_INVALID_UTF8 = 2,
  SQLCEX_STATUS_SCHEMA = 3,
  SQLCEX_STATUS_PARSE = 4,
  SQLCEX_STATUS_DUMP = 5,
  SQLCEX_STATUS_EVALUATION = 6,
  SQLCEX_STATUS_PANIC = 7,
} SqlcexStatus;

typedef enum SqlcexVerdict {
  SQLCEX_VERDICT_EQUIVALENT_UP_TO = 0,
  SQLCEX_VERDICT_NOT_EQUIVALENT = 1,
  SQLCEX_VERDICT_INCONCLUSIVE = 2,
} SqlcexVerdict;

// The outcome of one check.
typedef struct SqlcexResult SqlcexResult;

// A parsed database schema.
typedef struct SqlcexSchema SqlcexSchema;

// Settings for `sqlcex_check`. Fill with `sqlcex_config_default` first.
typedef struct SqlcexConfig {
  uint32_t max_bound;
  double timeout_secs;
  bool exclude_degenerate;
  // A `SqlcexBackend` value; unknown values mean the reference evaluator.
  uint32_t validation_backend;
  // Let the solver order ties freely instead of by input order.
  bool arbitrary_ties;
} SqlcexConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library; static, do not free.
const char *sqlcex_version(void);

// Message of the last failure on this thread, or NULL. Free with
// `sqlcex_string_free`.
char *sqlcex_last_error(void);

// # Safety
// `s` must be NULL or a string returned by this library.
void sqlcex_string_free(char *s);

// # Safety
// `out` must be NULL or writable.
void sqlcex_config_default(struct SqlcexConfig *out);

// Parses a JSON schema.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum SqlcexStatus sqlcex_schema_from_json(const char *json, struct SqlcexSchema **out);

// # Safety
// `schema` must be NULL or a handle from `sqlcex_schema_from_json`.
void sqlcex_schema_free(struct SqlcexSchema *schema);

// Checks `gold` against `gen` up to the configured bound. `config` may
// be NULL for defaults. A query that does not parse yields
// `SQLCEX_STATUS_PARSE`; one outside the supported subset yields an
// inconclusive result.
//
// # Safety
// Pointers must be valid; `out` writable.
enum SqlcexStatus sqlcex_check(const struct SqlcexSchema *schema,
                               const char *gold,
                               const char *gen,
                               const struct SqlcexConfig *config,
                               struct SqlcexResult **out);

// # Safety
// `r` must be NULL or a handle from `sqlcex_check`.
void sqlcex_result_free(struct SqlcexResult *r);

// # Safety
// `r` must be a valid result handle.
enum SqlcexVerdict sqlcex_result_verdict(const struct SqlcexResult *r);

// The bound checked up to, or the bound of the counterexample; 0 when
// inconclusive.
//
// # Safety
// `r` must be a valid result handle.
uint32_t sqlcex_result_bound(const struct SqlcexResult *r);

// # Safety
// `r` must be a valid result handle.
enum SqlcexReason sqlcex_result_reason(const struct SqlcexResult *r);

// Explanation of an inconclusive result, or NULL.
//
// # Safety
// `r` must be a valid result handle.
char *sqlcex_result_detail(const struct SqlcexResult *r);

// # Safety
// `r` must be a valid result handle.
double sqlcex_result_elapsed_secs(const struct SqlcexResult *r);

// The counterexample as a JSON dump, or NULL when there is none.
//
// # Safety
// `r` must be a valid result handle.
char *sqlcex_result_counterexample_json(const struct SqlcexResult *r);

// The counterexample as INSERT statements, or NULL when there is none.
//
// # Safety
// `r` must be a valid result handle.
char *sqlcex_result_counterexample_sql(const struct SqlcexResult *r);

// Runs both queries on a dump (JSON or INSERT script) and stores EX
// (1 when the row sets match) in `ex`.
//
// # Safety
// Pointers must be valid; `ex` writable.
enum SqlcexStatus sqlcex_replay(const struct SqlcexSchema *schema,
                                const char *dump,
                                const char *gold,
                                const char *gen,
                                int *ex);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQLCEX_H */
