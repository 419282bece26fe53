#ifndef LANEGAME_H
#define LANEGAME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum LgStatus {
  LG_STATUS_OK = 0,
  LG_STATUS_NULL_ARGUMENT = 1,
  LG_STATUS_INVALID_UTF8 = 2,
  // Scenario missing, unparsable or invalid.
  LG_STATUS_SCENARIO = 3,
  // The best-response iteration did not reach an equilibrium; the run
  // handle still carries the trace up to the failing round.
  LG_STATUS_NO_EQUILIBRIUM = 4,
  // Solver or compiler failure.
  LG_STATUS_SOLVER = 5,
  LG_STATUS_OUT_OF_RANGE = 6,
  LG_STATUS_IO = 7,
  LG_STATUS_PANIC = 8,
} LgStatus;

// Opaque simulation result.
typedef struct LgRun LgRun;

// Opaque scenario handle.
typedef struct LgScenario LgScenario;

// Options for [`lg_simulate`]. `steps == 0` keeps the scenario's count.
typedef struct LgSimOptions {
  bool free_space;
  bool lateral;
  bool per_window;
  bool certify;
  uint32_t steps;
} LgSimOptions;

typedef struct LgVehicleState {
  double pos;
  double v;
  int64_t z;
  bool a_l;
  bool a_r;
} LgVehicleState;

typedef struct LgRoundInfo {
  size_t iterations;
  double potential;
  double wall_ms;
} LgRoundInfo;

typedef struct LgSafety {
  bool longitudinal_safe;
  bool lateral_safe;
  // Smallest same-lane gap minus safety distance; infinite if lanes were never shared.
  double min_margin;
} LgSafety;

// Message of the last failure on this thread; empty if none. The pointer
// stays valid until the next failing call on the same thread.
const char *lg_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *lg_version(void);

// Defaults: every rule on, replanning each step, certification on.
struct LgSimOptions lg_sim_options_default(void);

// Loads and validates a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum LgStatus lg_scenario_load(const char *path, struct LgScenario **out);

// # Safety
// `scenario` must be null or a handle from [`lg_scenario_load`] not yet freed.
void lg_scenario_free(struct LgScenario *scenario);

// Number of vehicles; 0 for a null handle.
//
// # Safety
// `scenario` must be null or a live handle.
size_t lg_scenario_vehicle_count(const struct LgScenario *scenario);

// Runs the receding-horizon simulation. `options` may be null for the
// defaults. On [`LgStatus::NoEquilibrium`] `*out` still receives the partial run.
//
// # Safety
// `scenario` must be a live handle, `options` null or valid, `out` valid.
enum LgStatus lg_simulate(const struct LgScenario *scenario,
                          const struct LgSimOptions *options,
                          struct LgRun **out);

// # Safety
// `run` must be null or a handle from [`lg_simulate`] not yet freed.
void lg_run_free(struct LgRun *run);

// Number of recorded steps including the initial state; 0 for null.
//
// # Safety
// `run` must be null or a live handle.
size_t lg_run_step_count(const struct LgRun *run);

// Number of planning rounds; 0 for null.
//
// # Safety
// `run` must be null or a live handle.
size_t lg_run_round_count(const struct LgRun *run);

// State of vehicle `vehicle` (scenario order) at `step`.
//
// # Safety
// `run` must be a live handle and `out` valid.
enum LgStatus lg_run_state(const struct LgRun *run,
                           size_t step,
                           size_t vehicle,
                           struct LgVehicleState *out);

// Metadata of planning round `round`.
//
// # Safety
// `run` must be a live handle and `out` valid.
enum LgStatus lg_run_round(const struct LgRun *run, size_t round, struct LgRoundInfo *out);

// Runs both safety monitors on the run against its scenario.
//
// # Safety
// `run` and `scenario` must be live handles and `out` valid.
enum LgStatus lg_run_safety(const struct LgRun *run,
                            const struct LgScenario *scenario,
                            struct LgSafety *out);

// Writes the trace CSV to `path` and round metadata next to it with the
// `.game` extension.
//
// # Safety
// `run` must be a live handle and `path` a NUL-terminated string.
enum LgStatus lg_run_write_trace(const struct LgRun *run, const char *path);

#endif  /* LANEGAME_H */
