/*
 * C interface to the zakai filtering library.
 *
 * All functions return zk_status; on failure zk_last_error() carries a
 * thread-local diagnostic message. Objects are opaque handles released with
 * the matching *_free function. The configuration format and CSV schemas are
 * documented in the README.
 */
#ifndef ZAKAI_H
#define ZAKAI_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum zk_status {
  ZK_OK = 0,
  ZK_ERR_INVALID = 1,  /* bad arguments or configuration */
  ZK_ERR_DIVERGED = 2, /* numerical divergence or degenerate state */
  ZK_ERR_IO = 3,       /* file or parse problem */
  ZK_ERR_INTERNAL = 4
} zk_status;

typedef struct zk_config zk_config; /* validated run configuration */
typedef struct zk_bundle zk_bundle; /* simulated signal + observations */
typedef struct zk_table zk_table;   /* tabular result (estimates, reports) */

const char* zk_version(void);
const char* zk_last_error(void);

/* Configuration: INI-style [section] key=value files plus dotted overrides
 * such as zk_config_set(cfg, "filter.n", "12"). Unknown keys are rejected. */
zk_status zk_config_create(zk_config** out);
zk_status zk_config_load(const char* path, zk_config** out);
zk_status zk_config_set(zk_config* cfg, const char* key, const char* value);
void zk_config_free(zk_config* cfg);

/* Simulation and bundle I/O (CSV columns t,x_*,dz_*,dn; lossless numbers). */
zk_status zk_simulate(const zk_config* cfg, zk_bundle** out);
zk_status zk_bundle_read_csv(const char* path, zk_bundle** out);
zk_status zk_bundle_write_csv(const zk_bundle* bundle, const char* path);
int zk_bundle_steps(const zk_bundle* bundle);
int zk_bundle_dim(const zk_bundle* bundle);
void zk_bundle_free(zk_bundle* bundle);

/* Filtering run over a bundle: one table row per grid point. */
zk_status zk_filter(const zk_config* cfg, const zk_bundle* bundle,
                    zk_table** out);

/* Benchmark harness and the basis-size / step-size sweeps. */
zk_status zk_benchmark(const zk_config* cfg, zk_table** out);
zk_status zk_convergence(const zk_config* cfg, zk_table** out);
zk_status zk_stability(const zk_config* cfg, zk_table** out);

/* Table access. Numeric cells are doubles; report rows carry a text label
 * (method name) and status retrievable via zk_table_row_label/_row_status. */
size_t zk_table_rows(const zk_table* table);
size_t zk_table_cols(const zk_table* table);
const char* zk_table_col_name(const zk_table* table, size_t col);
double zk_table_value(const zk_table* table, size_t row, size_t col);
const char* zk_table_row_label(const zk_table* table, size_t row);
const char* zk_table_row_status(const zk_table* table, size_t row);
zk_status zk_table_write_csv(const zk_table* table, const char* path);
zk_status zk_table_format(const zk_table* table, char** out);
void zk_string_free(char* s);
void zk_table_free(zk_table* table);

#ifdef __cplusplus
}
#endif

#endif /* ZAKAI_H */
