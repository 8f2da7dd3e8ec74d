#ifndef EELCACHE_H
#define EELCACHE_H

/* Collaborative edge-cache simulator and stacked counting filter, exposed as
 * a C API over opaque handles. Every fallible call returns an eel_status;
 * eel_last_error() carries the human-readable detail for the most recent
 * failure on the calling thread. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eel_status {
  EEL_OK = 0,
  EEL_ERR_INVALID_ARG = 1,      /* bad parameter, option, or config value */
  EEL_ERR_IO = 2,               /* file missing, unreadable, or unwritable */
  EEL_ERR_MALFORMED = 3,        /* file or buffer does not parse */
  EEL_ERR_PARAM_MISMATCH = 4,   /* filters built with different parameters */
  EEL_ERR_DID_NOT_CONVERGE = 5, /* run stopped at the horizon, not by its rule */
  EEL_ERR_INTERNAL = 6
} eel_status;

const char* eel_version(void);

/* Detail for the most recent failing call on this thread; never NULL.
 * Valid until the next failing call on the same thread. */
const char* eel_last_error(void);

/* ---------- scenario configuration ---------- */

typedef struct eel_config eel_config;

/* Built-in defaults: the bundled three-scheme comparison scenario. */
eel_status eel_config_default(eel_config** out);

/* JSON text or file; absent keys keep defaults, unknown keys and bad values
 * fail with the offending key path in eel_last_error(). */
eel_status eel_config_from_json(const char* json_text, eel_config** out);
eel_status eel_config_from_file(const char* path, eel_config** out);

/* The master seed drives every stream in the run: workload, hashing, model
 * draws. Two runs with equal config and seed are byte-identical. */
eel_status eel_config_set_seed(eel_config* cfg, uint64_t master_seed);

void eel_config_free(eel_config* cfg);

/* ---------- scenario runs ---------- */

typedef struct eel_run_summary {
  int converged;           /* 1 when the scheme reached its own stop rule */
  double latency_s;        /* simulated seconds until convergence */
  double end_time_s;       /* simulated seconds the run actually covered */
  double accuracy;         /* terminal ensemble accuracy */
  double glr_final;        /* final distinct-items / total-copies ratio */
  double r_final;          /* final background-copies / total-copies ratio */
  uint64_t overhead_bytes; /* cumulative backhaul traffic */
} eel_run_summary;

/* scheme: "ccache", "pcache", or "centralized". csv_path may be NULL to skip
 * writing the per-snapshot series. On EEL_ERR_DID_NOT_CONVERGE the CSV and
 * summary are still produced; any other error leaves them untouched. */
eel_status eel_run_scheme(const eel_config* cfg, const char* scheme,
                          const char* csv_path, eel_run_summary* out);

/* ---------- counting-filter tools ---------- */

typedef struct eel_ccbf eel_ccbf;

/* m: bits per array, g: stacked arrays, k: probe positions per key,
 * n: item capacity. Seeds must match across filters meant to be combined. */
eel_status eel_ccbf_create(uint32_t m, uint8_t g, uint8_t k, uint32_t n,
                           uint64_t hash_seed, uint64_t matrix_seed,
                           eel_ccbf** out);

/* Files hold the filter's wire encoding. */
eel_status eel_ccbf_load(const char* path, eel_ccbf** out);
eel_status eel_ccbf_save(const eel_ccbf* f, const char* path);

/* outcome (may be NULL): 0 inserted, 1 duplicate, 2 at capacity,
 * 3 position overflow. The latter two also return EEL_ERR_INVALID_ARG. */
eel_status eel_ccbf_insert(eel_ccbf* f, const char* key, int* outcome);

eel_status eel_ccbf_query(const eel_ccbf* f, const char* key, int* present);

/* Fold two filters built with identical parameters into a fresh handle. */
eel_status eel_ccbf_combine(const eel_ccbf* a, const eel_ccbf* b,
                            eel_ccbf** out);

/* JSON object: parameters, item_count, fill_ratio, and a per-column count
 * histogram. Free the string with eel_string_free. */
eel_status eel_ccbf_inspect(const eel_ccbf* f, char** json_out);

void eel_ccbf_free(eel_ccbf* f);
void eel_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* EELCACHE_H */
