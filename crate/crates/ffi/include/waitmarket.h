#ifndef WAITMARKET_H
#define WAITMARKET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum WmStatus {
  WM_STATUS_OK = 0,
  WM_STATUS_NULL_POINTER = 1,
  // Malformed JSON, schema violation, or an environment failing validation.
  WM_STATUS_CONFIG = 2,
  // Non-finite values, failed bracketing or exhausted iterations.
  WM_STATUS_NUMERIC = 3,
  // Argument outside the domain of the operation.
  WM_STATUS_DOMAIN = 4,
  // Environment does not satisfy the operation's preconditions.
  WM_STATUS_PRECONDITION = 5,
  // Output buffer shorter than required.
  WM_STATUS_BUFFER_TOO_SMALL = 6,
  // Internal panic caught at the boundary.
  WM_STATUS_PANIC = 7,
} WmStatus;

// Commitment exit profile and value.
typedef struct WmCommitment WmCommitment;

// Market environment.
typedef struct WmEnvironment WmEnvironment;

// Equilibrium outcome.
typedef struct WmEquilibrium WmEquilibrium;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last non-OK status on this thread; valid until the next failing call.
const char *wm_last_error(void);

// Builds and validates an environment from JSON. `grid_nodes` = 0 selects the default grid.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum WmStatus wm_environment_from_json(const char *json,
                                       size_t grid_nodes,
                                       struct WmEnvironment **out);

// # Safety
// `env` must come from [`wm_environment_from_json`] and not be used afterwards.
void wm_environment_free(struct WmEnvironment *env);

// Number of type-grid nodes.
//
// # Safety
// Pointers must be valid.
enum WmStatus wm_environment_grid_len(const struct WmEnvironment *env, size_t *out);

// Copies the type-grid nodes into `buf` (capacity `len`).
//
// # Safety
// `buf` must hold `len` doubles.
enum WmStatus wm_environment_grid_nodes(const struct WmEnvironment *env, double *buf, size_t len);

// Solves for the commitment exit profile.
//
// # Safety
// Pointers must be valid.
enum WmStatus wm_commitment_solve(const struct WmEnvironment *env, struct WmCommitment **out);

// # Safety
// `sol` must come from [`wm_commitment_solve`] and not be used afterwards.
void wm_commitment_free(struct WmCommitment *sol);

// Commitment value.
//
// # Safety
// Pointers must be valid.
enum WmStatus wm_commitment_value(const struct WmCommitment *sol, double *out);

// Number of exit times (one per grid node).
//
// # Safety
// Pointers must be valid.
enum WmStatus wm_commitment_len(const struct WmCommitment *sol, size_t *out);

// Copies the exit times into `buf` (capacity `len`).
//
// # Safety
// `buf` must hold `len` doubles.
enum WmStatus wm_commitment_exit_times(const struct WmCommitment *sol, double *buf, size_t len);

// Price when time `t` and type `y` are revealed to the buyer.
//
// # Safety
// Pointers must be valid.
enum WmStatus wm_price_revealed(const struct WmEnvironment *env, double t, double y, double *out);

// Price when only time `t` is revealed, pooled over types still in the market.
//
// # Safety
// Pointers must be valid; `sol` must be solved for `env`.
enum WmStatus wm_price_pooled(const struct WmEnvironment *env,
                              const struct WmCommitment *sol,
                              double t,
                              double *out);

// Solves for the opaque-market equilibrium.
//
// # Safety
// Pointers must be valid.
enum WmStatus wm_equilibrium_solve(const struct WmEnvironment *env, struct WmEquilibrium **out);

// # Safety
// `eq` must come from [`wm_equilibrium_solve`] and not be used afterwards.
void wm_equilibrium_free(struct WmEquilibrium *eq);

// Equilibrium price; `ad_infinitum` is set when the seller never exits.
//
// # Safety
// Pointers must be valid.
enum WmStatus wm_equilibrium_price(const struct WmEquilibrium *eq,
                                   double *price,
                                   bool *ad_infinitum);

// Copies the equilibrium exit times into `buf` (capacity `len`); infinite when the seller never exits.
//
// # Safety
// `buf` must hold `len` doubles.
enum WmStatus wm_equilibrium_exit_times(const struct WmEquilibrium *eq,
                                        double *buf,
                                        size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAITMARKET_H */
