/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef CINECAM_H
#define CINECAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. Values 1 to 4 match the command-line exit codes.
 */
typedef enum CinecamStatus {
  CINECAM_STATUS_OK = 0,
  CINECAM_STATUS_IO = 1,
  CINECAM_STATUS_CONFIG = 2,
  CINECAM_STATUS_NUMERIC = 3,
  CINECAM_STATUS_SIZE_LIMIT = 4,
  CINECAM_STATUS_NULL_POINTER = 5,
  CINECAM_STATUS_INVALID_UTF8 = 6,
  CINECAM_STATUS_PANIC = 7,
} CinecamStatus;

/*
 Lattice, voxel world and cost tables built from a scenario, ready to plan.
 */
typedef struct CinecamPlanner CinecamPlanner;

/*
 Result of a full simulation run.
 */
typedef struct CinecamReport CinecamReport;

/*
 Parsed and validated scenario.
 */
typedef struct CinecamScenario CinecamScenario;

/*
 Stateful live-stream selector.
 */
typedef struct CinecamSelector CinecamSelector;

/*
 One trajectory sample: time in seconds, position in metres, yaw in radians.
 */
typedef struct CinecamSample {
  double t;
  double x;
  double y;
  double z;
  double yaw;
} CinecamSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL if none. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *cinecam_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *cinecam_version(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and must not be used afterwards.
 */
void cinecam_string_free(char *s);

/*
 Parses a scenario document. `origin` names the document in diagnostics
 and may be NULL.

 # Safety
 `json` and `origin` must be NUL-terminated strings; `out` must be writable.
 */
enum CinecamStatus cinecam_scenario_from_json(const char *json,
                                              const char *origin,
                                              struct CinecamScenario **out);

/*
 Loads a scenario file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CinecamStatus cinecam_scenario_load(const char *path, struct CinecamScenario **out);

/*
 Serializes the scenario with every default filled in.

 # Safety
 `scenario` must be a live handle; `out_json` must be writable.
 */
enum CinecamStatus cinecam_scenario_to_json(const struct CinecamScenario *scenario,
                                            char **out_json);

/*
 Number of cameras in the scenario, 0 for NULL.

 # Safety
 `scenario` must be NULL or a live handle.
 */
size_t cinecam_scenario_num_uavs(const struct CinecamScenario *scenario);

/*
 # Safety
 `scenario` must be NULL or a handle not yet freed.
 */
void cinecam_scenario_free(struct CinecamScenario *scenario);

/*
 Builds the planning world for a scenario. The scenario handle may be
 freed afterwards.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum CinecamStatus cinecam_planner_new(const struct CinecamScenario *scenario,
                                       struct CinecamPlanner **out);

/*
 Number of lattice states, 0 for NULL.

 # Safety
 `planner` must be NULL or a live handle.
 */
size_t cinecam_planner_num_states(const struct CinecamPlanner *planner);

/*
 Plans greedily for `n` cameras at `positions` (`3 * n` doubles, x y z per
 camera) at time `t0`, and returns the plan dump as JSON.

 # Safety
 `planner` must be a live handle, `positions` must point to `3 * n`
 doubles, and `out_json` must be writable.
 */
enum CinecamStatus cinecam_planner_plan(const struct CinecamPlanner *planner,
                                        const double *positions,
                                        size_t n,
                                        double t0,
                                        char **out_json);

/*
 # Safety
 `planner` must be NULL or a handle not yet freed.
 */
void cinecam_planner_free(struct CinecamPlanner *planner);

/*
 Runs the full receding-horizon simulation.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum CinecamStatus cinecam_run(const struct CinecamScenario *scenario, struct CinecamReport **out);

/*
 Borrows camera `uav`'s trajectory. The samples stay valid until the report
 is freed.

 # Safety
 `report` must be a live handle; `out_samples` and `out_len` must be writable.
 */
enum CinecamStatus cinecam_report_trajectory(const struct CinecamReport *report,
                                             size_t uav,
                                             const struct CinecamSample **out_samples,
                                             size_t *out_len);

/*
 Minimum obstacle clearance and camera separation over the run, metres.

 # Safety
 `report` must be a live handle; both outputs must be writable.
 */
enum CinecamStatus cinecam_report_audit(const struct CinecamReport *report,
                                        double *out_min_clearance,
                                        double *out_min_separation);

/*
 Full report as JSON.

 # Safety
 `report` must be a live handle; `out_json` must be writable.
 */
enum CinecamStatus cinecam_report_to_json(const struct CinecamReport *report, char **out_json);

/*
 # Safety
 `report` must be NULL or a handle not yet freed.
 */
void cinecam_report_free(struct CinecamReport *report);

/*
 Creates a selector. `config_json` holds selector settings (any subset of
 the scenario's `selector` section) or is NULL for the defaults.

 # Safety
 `config_json` must be NULL or a NUL-terminated string; `out` must be writable.
 */
enum CinecamStatus cinecam_selector_new(size_t num_cameras,
                                        const char *config_json,
                                        struct CinecamSelector **out);

/*
 Advances the selector by `dt` seconds from time `t` given each camera's
 visibility and prior costs (`n` entries each, `n` equal to the camera
 count), and writes the camera on air.

 # Safety
 `selector` must be a live handle, `vis_costs` and `cine_costs` must point
 to `n` doubles, and `out_camera` must be writable.
 */
enum CinecamStatus cinecam_selector_step(struct CinecamSelector *selector,
                                         double t,
                                         const double *vis_costs,
                                         const double *cine_costs,
                                         size_t n,
                                         double dt,
                                         size_t *out_camera);

/*
 Selection timeline so far as JSON records `{t_start, t_end, camera}`.

 # Safety
 `selector` must be a live handle; `out_json` must be writable.
 */
enum CinecamStatus cinecam_selector_timeline(const struct CinecamSelector *selector,
                                             char **out_json);

/*
 # Safety
 `selector` must be NULL or a handle not yet freed.
 */
void cinecam_selector_free(struct CinecamSelector *selector);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CINECAM_H */
