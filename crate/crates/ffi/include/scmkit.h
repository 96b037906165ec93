#ifndef SCMKIT_H
#define SCMKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SCM_OK 0

/**
 * A required pointer argument was null.
 */
#define SCM_ERR_NULL 100

/**
 * A string argument was not valid UTF-8.
 */
#define SCM_ERR_UTF8 101

/**
 * A panic was caught at the boundary.
 */
#define SCM_ERR_PANIC 102

/**
 * Joint distribution of a model's nodes.
 */
typedef struct ScmJoint ScmJoint;

/**
 * Discrete structural causal model.
 */
typedef struct ScmModel ScmModel;

/**
 * Seeded source of uniform draws.
 */
typedef struct ScmStream ScmStream;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next failing call.
 */
const char *scm_last_error(void);

/**
 * Library version as a static string.
 */
const char *scm_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void scm_string_free(char *s);

/**
 * Parses a model document (JSON text) with probability tables.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
int32_t scm_model_from_json(const char *json, struct ScmModel **out);

/**
 * Builds a discrete catalog example. `params` is `key=value,...` or null.
 *
 * # Safety
 * String arguments must be nul-terminated or null where allowed; `out` must be writable.
 */
int32_t scm_example(const char *name, const char *params, uint64_t seed, struct ScmModel **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not used afterwards.
 */
void scm_model_free(struct ScmModel *m);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t scm_model_node_count(const struct ScmModel *m);

/**
 * Canonical JSON of the model.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
int32_t scm_model_to_json(const struct ScmModel *m, char **out);

/**
 * New model with `node` forced to `value`.
 *
 * # Safety
 * `m` must be a live handle; strings nul-terminated; `out` writable.
 */
int32_t scm_model_intervene(const struct ScmModel *m,
                            const char *node,
                            const char *value,
                            struct ScmModel **out);

/**
 * Exact joint distribution of all nodes.
 *
 * # Safety
 * `m` must be a live handle; `out` writable.
 */
int32_t scm_joint(const struct ScmModel *m, struct ScmJoint **out);

/**
 * # Safety
 * `j` must be null or a handle from this library, not used afterwards.
 */
void scm_joint_free(struct ScmJoint *j);

/**
 * Number of cells, or 0 for a null handle.
 *
 * # Safety
 * `j` must be null or a live handle.
 */
size_t scm_joint_len(const struct ScmJoint *j);

/**
 * Probability of the configuration `labels`, values separated by `|` in node order.
 *
 * # Safety
 * `j` must be a live handle; `labels` nul-terminated; `out` writable.
 */
int32_t scm_joint_prob(const struct ScmJoint *j, const char *labels, double *out);

/**
 * Probability of `node = value` after marginalizing the rest.
 *
 * # Safety
 * `j` must be a live handle; strings nul-terminated; `out` writable.
 */
int32_t scm_joint_marginal(const struct ScmJoint *j,
                           const char *node,
                           const char *value,
                           double *out);

/**
 * Seeded stream of uniform draws.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t scm_stream_new(uint64_t seed, struct ScmStream **out);

/**
 * # Safety
 * `s` must be null or a handle from this library, not used afterwards.
 */
void scm_stream_free(struct ScmStream *s);

/**
 * Draws `n` rows and returns them as CSV with a header line.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
int32_t scm_sample_csv(const struct ScmModel *m, const struct ScmStream *s, size_t n, char **out);

/**
 * Back-door verdict for adjustment set `z` (comma-separated, may be empty or null).
 * Writes 1 for valid, 0 for invalid.
 *
 * # Safety
 * `m` must be a live handle; strings nul-terminated; `out` writable.
 */
int32_t scm_backdoor(const struct ScmModel *m,
                     const char *t,
                     const char *r,
                     const char *z,
                     int32_t *out);

/**
 * Adjusted mean response under `t = t1` minus under `t = t0`, adjusting for `z`.
 *
 * # Safety
 * `m` must be a live handle; strings nul-terminated (`z` may be null); `out` writable.
 */
int32_t scm_effect_ate(const struct ScmModel *m,
                       const char *t,
                       const char *t0,
                       const char *t1,
                       const char *r,
                       const char *z,
                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCMKIT_H */
