/* C interface of the lakes solver.
 *
 * Two opaque handles: a scenario (parsed + validated configuration) and
 * a simulation. Functions return LakesStatus or plain values; the last
 * failure message on the calling thread is available through
 * lakes_last_error(). Field buffers are row-major f64 arrays of size
 * nx * ny with inactive cells set to zero.
 *
 * Handles are not thread safe: use each handle from one thread at a time.
 */

#ifndef LAKES_H
#define LAKES_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum LakesStatus {
  LAKES_OK = 0,
  LAKES_NULL_POINTER = 1,
  LAKES_INVALID_ARGUMENT = 2,
  LAKES_CONFIG = 3,
  LAKES_GEOMETRY = 4,
  LAKES_SOLVER = 5,
  LAKES_UNSTABLE = 6,
  LAKES_IO = 7,
  LAKES_PANIC = 8,
} LakesStatus;

typedef struct LakesScenario LakesScenario;
typedef struct LakesSim LakesSim;

/* Message of the most recent failure on this thread; valid until the
 * next failing call on the same thread. */
const char *lakes_last_error(void);

/* Library version as a static string. */
const char *lakes_version(void);

/* Scenario lifecycle. Constructors return NULL on failure. */
LakesScenario *lakes_scenario_load(const char *path);
LakesScenario *lakes_scenario_from_string(const char *text);
void lakes_scenario_free(LakesScenario *scenario);

/* Simulation lifecycle. */
LakesSim *lakes_sim_new(const LakesScenario *scenario);
void lakes_sim_free(LakesSim *sim);

/* Time stepping. */
LakesStatus lakes_sim_step(LakesSim *sim);
LakesStatus lakes_sim_advance_to(LakesSim *sim, double t);

/* State queries. */
double lakes_sim_time(const LakesSim *sim);
uint64_t lakes_sim_step_count(const LakesSim *sim);
double lakes_sim_mass(const LakesSim *sim);
double lakes_sim_sup_vorticity(const LakesSim *sim);
size_t lakes_sim_island_count(const LakesSim *sim);
LakesStatus lakes_sim_circulation(const LakesSim *sim, size_t k, double *out);
LakesStatus lakes_sim_grid_dims(const LakesSim *sim, size_t *nx, size_t *ny,
                                double *h, double *ox, double *oy);

/* Field extraction; buf must hold at least nx * ny doubles. */
LakesStatus lakes_sim_vorticity(const LakesSim *sim, double *buf, size_t len);
LakesStatus lakes_sim_stream_function(const LakesSim *sim, double *buf,
                                      size_t len);

#ifdef __cplusplus
}
#endif

#endif /* LAKES_H */
