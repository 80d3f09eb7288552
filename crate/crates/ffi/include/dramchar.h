#ifndef DRAMCHAR_H
#define DRAMCHAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_POINTER = 1,
  DC_STATUS_INVALID_UTF8 = 2,
  DC_STATUS_CONFIG = 3,
  DC_STATUS_TRACE = 4,
  DC_STATUS_OUT_OF_RANGE = 5,
  DC_STATUS_PANIC = 6,
} DcStatus;

/**
 * Experiment configuration under construction.
 */
typedef struct DcConfig DcConfig;

/**
 * Finished simulation report.
 */
typedef struct DcReport DcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *dc_last_error(void);

/**
 * Parses an experiment file's contents.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum DcStatus dc_config_from_toml(const char *toml, struct DcConfig **out);

/**
 * A single-trace configuration for a named DRAM type with no traces yet.
 * Names resolve through the spec directory environment variable first.
 *
 * # Safety
 * `dram` must be a NUL-terminated string and `out` a writable pointer.
 */
enum DcStatus dc_config_new(const char *dram, struct DcConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void dc_config_free(struct DcConfig *cfg);

/**
 * `mode` is one of `single`, `bundle`, `network` or `multithreaded`.
 *
 * # Safety
 * `cfg` must be a live handle and `mode` a NUL-terminated string.
 */
enum DcStatus dc_config_set_mode(struct DcConfig *cfg, const char *mode);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum DcStatus dc_config_set_seed(struct DcConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum DcStatus dc_config_set_warmup(struct DcConfig *cfg, uint64_t instructions);

/**
 * # Safety
 * `cfg` must be a live handle.
 */
enum DcStatus dc_config_set_max_inflight(struct DcConfig *cfg, uintptr_t max_inflight);

/**
 * Appends a trace file as the next core's (or injector's) input.
 *
 * # Safety
 * `cfg` must be a live handle and `path` a NUL-terminated string.
 */
enum DcStatus dc_config_add_trace_file(struct DcConfig *cfg, const char *path);

/**
 * Appends a synthetic trace, e.g. `random:footprint=64MiB,rpki=20,seed=1`.
 *
 * # Safety
 * `cfg` must be a live handle and `pattern` a NUL-terminated string.
 */
enum DcStatus dc_config_add_synthetic(struct DcConfig *cfg,
                                      const char *pattern,
                                      uint64_t instructions);

/**
 * Runs the experiment. On success `*out` receives a report the caller
 * frees with [`dc_report_free`].
 *
 * # Safety
 * `cfg` must be a live handle and `out` a writable pointer.
 */
enum DcStatus dc_run(const struct DcConfig *cfg, struct DcReport **out);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void dc_report_free(struct DcReport *report);

/**
 * The full report as JSON, owned by the report handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
const char *dc_report_json(const struct DcReport *report);

/**
 * Number of per-core entries in the report.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
uintptr_t dc_report_cores(const struct DcReport *report);

/**
 * # Safety
 * `report` must be a live handle and `out` a writable pointer.
 */
enum DcStatus dc_report_ipc(const struct DcReport *report, uintptr_t core, double *out);

/**
 * Average busy banks per cycle over the measured window.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double dc_report_bpu(const struct DcReport *report);

/**
 * Row-buffer hit fraction over the measured window.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double dc_report_hit_fraction(const struct DcReport *report);

/**
 * Total DRAM energy in joules, or NaN when the type has no energy model.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double dc_report_energy_j(const struct DcReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRAMCHAR_H */
