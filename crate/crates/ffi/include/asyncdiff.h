/* C ABI for the asyncdiff analysis and simulation engine.
 *
 * The interface is JSON-in / JSON-out: a model handle is created from the
 * same JSON experiment config accepted by the asyncdiff CLI, and the
 * analysis and simulation entry points return JSON documents matching the
 * CLI's theory.json and sim.json artifacts. Every string returned through an
 * output pointer is owned by the library and must be released with
 * asyncdiff_string_free().
 */

#ifndef ASYNCDIFF_H
#define ASYNCDIFF_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Return codes. */
#define ASYNCDIFF_OK 0
/* Null pointer, invalid UTF-8, or a config that failed to parse/validate. */
#define ASYNCDIFF_ERR_INVALID 1
/* A step-size stability gate failed. */
#define ASYNCDIFF_ERR_GATE 2
/* The mean combination model is not primitive. */
#define ASYNCDIFF_ERR_PRIMITIVITY 3
/* A numeric routine failed (singular solve, non-convergence, guard). */
#define ASYNCDIFF_ERR_NUMERIC 4
/* A simulation run diverged. */
#define ASYNCDIFF_ERR_DIVERGED 5

/* Opaque experiment handle. */
typedef struct AsyncdiffModel AsyncdiffModel;

/* Builds a model handle from a JSON experiment config. Returns NULL on
 * failure; if err_out is non-NULL it then receives an error message. */
AsyncdiffModel *asyncdiff_model_new(const char *config_json, char **err_out);

/* Releases a model handle. NULL is accepted and ignored. */
void asyncdiff_model_free(AsyncdiffModel *handle);

/* Runs the closed-form analysis. On success writes the report JSON to
 * *out_json and returns ASYNCDIFF_OK; on failure writes an error message and
 * returns a nonzero code. dump_matrices != 0 includes aggregate matrices. */
int asyncdiff_analyze(const AsyncdiffModel *handle, int dump_matrices,
                      char **out_json);

/* Runs the Monte-Carlo ensemble. seed >= 0 overrides the config's master
 * seed. Same output contract as asyncdiff_analyze(). */
int asyncdiff_simulate(const AsyncdiffModel *handle, int64_t seed,
                       char **out_json);

/* Releases a string returned by this library. NULL is accepted. */
void asyncdiff_string_free(char *s);

#ifdef __cplusplus
}
#endif

#endif /* ASYNCDIFF_H */
