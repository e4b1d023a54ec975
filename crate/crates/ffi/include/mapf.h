#ifndef MAPF_H
#define MAPF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MapfPlanner {
  MAPF_PLANNER_THETA = 0,
  MAPF_PLANNER_LIAN = 1,
} MapfPlanner;

typedef enum MapfStatus {
  MAPF_STATUS_OK = 0,
  MAPF_STATUS_NULL_ARGUMENT = 1,
  MAPF_STATUS_INVALID_ARGUMENT = 2,
  MAPF_STATUS_PARSE = 3,
  MAPF_STATUS_IO = 4,
  // Some agents have no path; the solution covers the others.
  MAPF_STATUS_PLAN_FAILED = 5,
  MAPF_STATUS_RESOLVE_ABORTED = 6,
  MAPF_STATUS_OUT_OF_BOUNDS = 7,
  MAPF_STATUS_PANIC = 8,
} MapfStatus;

typedef enum MapfAllocation {
  MAPF_ALLOCATION_TYPE1 = 0,
  MAPF_ALLOCATION_TYPE2 = 1,
} MapfAllocation;

// Opaque grid handle.
typedef struct MapfGrid MapfGrid;

// Opaque solution handle.
typedef struct MapfSolution MapfSolution;

typedef struct MapfParams {
  enum MapfPlanner planner;
  int32_t delta;
  double alpha_max;
  double wait;
  double radius;
  size_t max_refinement_steps;
} MapfParams;

typedef struct MapfQuery {
  int32_t start_i;
  int32_t start_j;
  int32_t goal_i;
  int32_t goal_j;
} MapfQuery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *mapf_last_error_message(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void mapf_string_free(char *s);

// Defaults: Theta*, delta 5, alpha_max 25, wait 5, radius 1, 100000 refinement steps.
struct MapfParams mapf_params_default(void);

// Parses a map from text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum MapfStatus mapf_grid_from_text(const char *text, struct MapfGrid **out);

// Reads and parses a map file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MapfStatus mapf_grid_load(const char *path, struct MapfGrid **out);

// Generates a city-like map with roughly `density` blocked cells.
//
// # Safety
// `out` must be writable.
enum MapfStatus mapf_grid_generate(size_t height,
                                   size_t width,
                                   double density,
                                   uint64_t seed,
                                   struct MapfGrid **out);

// # Safety
// `grid` must come from this library and not have been freed. NULL is ignored.
void mapf_grid_free(struct MapfGrid *grid);

// # Safety
// `grid` must be a live handle; `height` and `width` must be writable.
enum MapfStatus mapf_grid_dims(const struct MapfGrid *grid, size_t *height, size_t *width);

// Cells outside the grid report `false`.
//
// # Safety
// `grid` must be a live handle; `out` must be writable.
enum MapfStatus mapf_grid_is_traversable(const struct MapfGrid *grid,
                                         int32_t i,
                                         int32_t j,
                                         bool *out);

// # Safety
// `grid` must be a live handle; `out` must be writable.
enum MapfStatus mapf_line_of_sight(const struct MapfGrid *grid,
                                   int32_t ai,
                                   int32_t aj,
                                   int32_t bi,
                                   int32_t bj,
                                   bool *out);

// Plans and resolves one agent per query (agent id = query index).
//
// On `Ok` and on `PlanFailed` a solution is written to `out`; with
// `PlanFailed` it omits the agents that could not be planned. `params` may
// be NULL for defaults.
//
// # Safety
// `grid` must be a live handle, `queries` must point to `n_queries`
// elements (may be NULL when `n_queries` is 0), `out` must be writable.
enum MapfStatus mapf_solve(const struct MapfGrid *grid,
                           const struct MapfQuery *queries,
                           size_t n_queries,
                           const struct MapfParams *params,
                           struct MapfSolution **out);

// Generates a scenario and solves it like [`mapf_solve`].
//
// # Safety
// `grid` must be a live handle, `out` must be writable, `params` may be NULL.
enum MapfStatus mapf_solve_generated(const struct MapfGrid *grid,
                                     enum MapfAllocation allocation,
                                     size_t n_agents,
                                     size_t border_margin,
                                     size_t cluster_size,
                                     uint64_t seed,
                                     const struct MapfParams *params,
                                     struct MapfSolution **out);

// # Safety
// `solution` must come from this library and not have been freed. NULL is ignored.
void mapf_solution_free(struct MapfSolution *solution);

// # Safety
// `solution` must be a live handle; `out` must be writable.
enum MapfStatus mapf_solution_agent_count(const struct MapfSolution *solution, size_t *out);

// Agent id, take-off offset and waypoint count of the `index`-th agent
// in solution order. Any output pointer may be NULL.
//
// # Safety
// `solution` must be a live handle; non-NULL outputs must be writable.
enum MapfStatus mapf_solution_agent(const struct MapfSolution *solution,
                                    size_t index,
                                    size_t *agent_id,
                                    double *offset,
                                    size_t *n_waypoints);

// Copies up to `capacity` waypoints of the `index`-th agent into `buf` as
// `i, j` pairs (`buf` holds `2 * capacity` integers). `written` receives
// the number of waypoints copied; if `capacity` is too small nothing is
// copied, `written` receives the required count and `OutOfBounds` is
// returned.
//
// # Safety
// `solution` must be a live handle, `buf` must hold `2 * capacity`
// integers, `written` must be writable.
enum MapfStatus mapf_solution_waypoints(const struct MapfSolution *solution,
                                        size_t index,
                                        int32_t *buf,
                                        size_t capacity,
                                        size_t *written);

// Sum over agents of offset plus path length.
//
// # Safety
// `solution` must be a live handle; `out` must be writable.
enum MapfStatus mapf_solution_cost(const struct MapfSolution *solution, double *out);

// Solution file JSON (`[{id, offset, waypoints}]`).
//
// # Safety
// `solution` must be a live handle; `out` must be writable.
enum MapfStatus mapf_solution_to_json(const struct MapfSolution *solution, char **out);

// Parses a solution file. The result carries no metrics.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum MapfStatus mapf_solution_from_json(const char *json, struct MapfSolution **out);

// Run report JSON for a solution produced by a solve call.
//
// # Safety
// `solution` must be a live handle; `out` must be writable.
enum MapfStatus mapf_solution_report_json(const struct MapfSolution *solution, char **out);

// Counts sections crossing obstacles, conflicting section pairs and
// sampled-oracle violations. Any output pointer may be NULL.
//
// # Safety
// `grid` and `solution` must be live handles; non-NULL outputs must be writable.
enum MapfStatus mapf_verify(const struct MapfGrid *grid,
                            const struct MapfSolution *solution,
                            double radius,
                            double ds,
                            size_t *blocked_sections,
                            size_t *section_conflicts,
                            size_t *oracle_violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAPF_H */
