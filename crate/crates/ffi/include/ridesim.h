#ifndef RIDESIM_H
#define RIDESIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum RidesimStatus {
  RIDESIM_STATUS_OK = 0,
  // A required pointer argument was null.
  RIDESIM_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  RIDESIM_STATUS_INVALID_UTF8 = 2,
  // The scenario or its input files are invalid.
  RIDESIM_STATUS_CONFIG_ERROR = 3,
  // The simulation failed while running.
  RIDESIM_STATUS_RUNTIME_ERROR = 4,
  // Reading or writing files failed.
  RIDESIM_STATUS_IO_ERROR = 5,
  // A node id or index was out of range.
  RIDESIM_STATUS_OUT_OF_RANGE = 6,
  // An internal bug; the message holds the panic text.
  RIDESIM_STATUS_PANIC = 7,
} RidesimStatus;

// One simulated day with its event log and KPIs.
typedef struct RidesimDay RidesimDay;

// A loaded scenario: configuration, road network and skim matrix.
typedef struct RidesimScenario RidesimScenario;

// System-level KPIs of one day. Undefined means are NaN.
typedef struct RidesimSystemKpi {
  uint32_t day;
  uint64_t n_travellers;
  uint64_t n_served;
  uint64_t n_unserved;
  uint64_t n_opted_out;
  uint64_t n_rejected;
  uint64_t fleet_participating;
  double mean_wait_s;
  double median_wait_s;
  double p90_wait_s;
  double mean_driver_idle_s;
  double empty_vkm;
  double occupied_vkm;
} RidesimSystemKpi;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *ridesim_last_error(void);

// Library version as a static NUL-terminated string.
const char *ridesim_version(void);

// Loads a scenario JSON file; relative paths inside it resolve against the
// file's directory.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum RidesimStatus ridesim_scenario_load(const char *path, struct RidesimScenario **out);

// Parses a scenario from a JSON document; relative paths resolve against
// `base_dir` (may be null for the working directory).
//
// # Safety
// `json` must be a valid NUL-terminated string, `base_dir` null or one, and
// `out` a valid pointer.
enum RidesimStatus ridesim_scenario_from_json(const char *json,
                                              const char *base_dir,
                                              struct RidesimScenario **out);

// Releases a scenario. Null is ignored.
//
// # Safety
// `scenario` must be null or a handle from this library not yet freed.
void ridesim_scenario_free(struct RidesimScenario *scenario);

// Number of nodes in the scenario's road network.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum RidesimStatus ridesim_scenario_n_nodes(const struct RidesimScenario *scenario, uint32_t *out);

// Shortest-path travel time (s) and distance (m) between two nodes.
//
// # Safety
// `scenario` must be a live handle; `time_s` and `distance_m` valid pointers.
enum RidesimStatus ridesim_scenario_skim(const struct RidesimScenario *scenario,
                                         uint32_t from,
                                         uint32_t to,
                                         double *time_s,
                                         double *distance_m);

// Simulates day 0 of the scenario under `seed` with the built-in decision
// modules named in the scenario.
//
// # Safety
// `scenario` must be a live handle and `out` a valid pointer.
enum RidesimStatus ridesim_run_day(const struct RidesimScenario *scenario,
                                   uint64_t seed,
                                   struct RidesimDay **out);

// Releases a simulated day. Null is ignored.
//
// # Safety
// `day` must be null or a handle from this library not yet freed.
void ridesim_day_free(struct RidesimDay *day);

// Number of records in the day's event log.
//
// # Safety
// `day` must be a live handle and `out` a valid pointer.
enum RidesimStatus ridesim_day_event_count(const struct RidesimDay *day, uint64_t *out);

// System KPIs of the day.
//
// # Safety
// `day` must be a live handle and `out` a valid pointer.
enum RidesimStatus ridesim_day_system_kpi(const struct RidesimDay *day,
                                          struct RidesimSystemKpi *out);

// The event log as CSV. Release the string with [`ridesim_string_free`].
//
// # Safety
// `day` must be a live handle and `out` a valid pointer.
enum RidesimStatus ridesim_day_events_csv(const struct RidesimDay *day, char **out);

// Writes `events.csv` and the four KPI CSVs into `dir`, creating it if needed.
//
// # Safety
// `day` must be a live handle and `dir` a valid NUL-terminated string.
enum RidesimStatus ridesim_day_write(const struct RidesimDay *day, const char *dir);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void ridesim_string_free(char *s);

// Minimum-cost assignment on a row-major `rows × cols` cost matrix; NaN
// marks a forbidden pair. Writes the matched column of each row to
// `row_to_col` (`-1` when unmatched) and the number of pairs to `n_pairs`.
// Ties resolve to the lexicographically smallest (row, column) pair list.
//
// # Safety
// `cost` must point to `rows * cols` doubles, `row_to_col` to `rows`
// writable `int64_t`, and `n_pairs` must be valid.
enum RidesimStatus ridesim_assign(const double *cost,
                                  size_t rows,
                                  size_t cols,
                                  int64_t *row_to_col,
                                  size_t *n_pairs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIDESIM_H */
