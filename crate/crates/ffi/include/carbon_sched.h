#ifndef CARBON_SCHED_H
#define CARBON_SCHED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum cs_status {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_ARGUMENT = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_PARSE = 3,
  CS_STATUS_INFEASIBLE = 4,
  CS_STATUS_SIMULATION = 5,
  CS_STATUS_INDEX_OUT_OF_RANGE = 6,
  CS_STATUS_PANIC = 7,
} cs_status;

/**
 * Horizon problem under construction.
 */
typedef struct cs_problem cs_problem;

/**
 * Solved power schedule.
 */
typedef struct cs_schedule cs_schedule;

/**
 * Validated carbon-intensity series.
 */
typedef struct cs_series cs_series;

typedef struct cs_battery {
  double capacity_kwh;
  double max_power_kw;
  double soc_min;
  double soc_max;
} cs_battery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread (empty if none). The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cs_last_error(void);

/**
 * Library version, a static string.
 */
const char *cs_version(void);

struct cs_battery cs_battery_default(void);

/**
 * Parses canonical CSV (`timestamp,actual_gco2_per_kwh[,forecast_gco2_per_kwh]`) of `len` bytes.
 *
 * # Safety
 * `csv` must point to `len` readable bytes and `out` to writable storage
 * for one pointer.
 */
enum cs_status cs_series_from_csv(const uint8_t *csv, size_t len, struct cs_series **out);

/**
 * Number of intervals, or 0 for a null handle.
 *
 * # Safety
 * `series` must be null or a live handle from [`cs_series_from_csv`].
 */
size_t cs_series_len(const struct cs_series *series);

/**
 * # Safety
 * `series` must be null or a handle not yet freed.
 */
void cs_series_free(struct cs_series *series);

/**
 * Starts an empty problem.
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
enum cs_status cs_problem_new(struct cs_battery battery,
                              double soc0,
                              double delta_t_hours,
                              struct cs_problem **out);

/**
 * Appends a session of `n` intervals starting at horizon interval
 * `first_interval`. `demand_after_kwh` is the driving energy before the
 * next session; it is ignored for the last one.
 *
 * # Safety
 * `problem` must be a live handle and `intensities` must point to `n`
 * readable doubles.
 */
enum cs_status cs_problem_add_session(struct cs_problem *problem,
                                      size_t first_interval,
                                      const double *intensities,
                                      size_t n,
                                      double morning_floor,
                                      double demand_after_kwh);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void cs_problem_free(struct cs_problem *problem);

/**
 * Solves for the minimum-carbon schedule. Infeasible problems return
 * [`CsStatus::Infeasible`] with the first failing session in the message.
 *
 * # Safety
 * `problem` must be a live handle; `out` must point to writable storage
 * for one pointer.
 */
enum cs_status cs_solve(const struct cs_problem *problem, struct cs_schedule **out);

/**
 * Predicted gCO2 of the schedule, NaN for a null handle.
 *
 * # Safety
 * `schedule` must be null or a live handle.
 */
double cs_schedule_cost(const struct cs_schedule *schedule);

/**
 * # Safety
 * `schedule` must be null or a live handle.
 */
size_t cs_schedule_session_count(const struct cs_schedule *schedule);

/**
 * Copies the powers (kW) of `session` into `out`. `*written` receives the
 * session length; when `capacity` is too small nothing is copied and
 * [`CsStatus::InvalidArgument`] is returned.
 *
 * # Safety
 * `schedule` must be a live handle, `out` must point to `capacity`
 * writable doubles and `written` to one writable `size_t`.
 */
enum cs_status cs_schedule_powers(const struct cs_schedule *schedule,
                                  size_t session,
                                  double *out,
                                  size_t capacity,
                                  size_t *written);

/**
 * # Safety
 * `schedule` must be null or a handle not yet freed.
 */
void cs_schedule_free(struct cs_schedule *schedule);

/**
 * Runs one scenario described by `config_json` (a scenario config object)
 * and writes a JSON summary with totals, per-session breakdown and events
 * to `*out_json`. Release it with [`cs_string_free`].
 *
 * # Safety
 * `series` must be a live handle, `config_json` a NUL-terminated string,
 * `out_json` writable storage for one pointer.
 */
enum cs_status cs_simulate_json(const struct cs_series *series,
                                const char *config_json,
                                char **out_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void cs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CARBON_SCHED_H */
