#ifndef PARENTHAM_H
#define PARENTHAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum PhStatus {
  PH_STATUS_OK = 0,
  PH_STATUS_NULL_POINTER = 1,
  PH_STATUS_INVALID_ARGUMENT = 2,
  PH_STATUS_DIMENSION_MISMATCH = 3,
  PH_STATUS_RESOURCE_LIMIT = 4,
  PH_STATUS_DEGENERATE = 5,
  PH_STATUS_NUMERICAL = 6,
  PH_STATUS_IO = 7,
  PH_STATUS_PANIC = 8,
} PhStatus;

/*
 Opaque operator basis.
 */
typedef struct PhBasis PhBasis;

/*
 Opaque state path.
 */
typedef struct PhPath PhPath;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer stays
 valid until the next call into this library from the same thread.
 */
const char *ph_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ph_version(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not be freed twice.
 */
void ph_string_free(char *s);

/*
 Single-site and nearest-neighbour Pauli products on a periodic chain of `l` sites.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum PhStatus ph_basis_nearest_neighbor(size_t l, struct PhBasis **out);

/*
 All Pauli strings on `l` sites, with or without the identity.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum PhStatus ph_basis_pauli(size_t l, bool include_identity, struct PhBasis **out);

/*
 Collective interactions up to `weight` on the symmetric sector of `n` spins.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum PhStatus ph_basis_collective(size_t n, size_t weight, struct PhBasis **out);

/*
 # Safety
 `basis` must be a live handle and `out_len` writable.
 */
enum PhStatus ph_basis_len(const struct PhBasis *basis, size_t *out_len);

/*
 Hilbert-space dimension of the basis operators.

 # Safety
 `basis` must be a live handle and `out_dim` writable.
 */
enum PhStatus ph_basis_dim(const struct PhBasis *basis, size_t *out_dim);

/*
 Label of element `index` as a new string (free with `ph_string_free`).

 # Safety
 `basis` must be a live handle and `out` writable.
 */
enum PhStatus ph_basis_label(const struct PhBasis *basis, size_t index, char **out);

/*
 # Safety
 `basis` must be NULL or a handle not yet freed.
 */
void ph_basis_free(struct PhBasis *basis);

/*
 Ground states of the transverse-field Ising chain with `l` (even) sites.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum PhStatus ph_path_ising(size_t l, struct PhPath **out);

/*
 Ground states of the p-spin model with `n` spins (symmetric sector).

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum PhStatus ph_path_pspin(size_t n, uint32_t p, struct PhPath **out);

/*
 The rotating spin-1/2; the path parameter is time.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum PhStatus ph_path_single_spin(double omega, struct PhPath **out);

/*
 Interpolation between the p = 3 endpoint ground states of `n` spins.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum PhStatus ph_path_interpolate(size_t n, bool quarter, struct PhPath **out);

/*
 # Safety
 `path` must be a live handle and `out_dim` writable.
 */
enum PhStatus ph_path_dim(const struct PhPath *path, size_t *out_dim);

/*
 # Safety
 `path` must be NULL or a handle not yet freed.
 */
void ph_path_free(struct PhPath *path);

/*
 Minimal-norm optimal couplings at `lambda` for the rate `dlambda`.
 `out_values` must hold exactly `out_len` = basis length doubles;
 `out_local_cost` may be NULL.

 # Safety
 Handles must be live; `out_values` must point to `out_len` writable doubles.
 */
enum PhStatus ph_optimal_couplings(const struct PhPath *path,
                                   const struct PhBasis *basis,
                                   double lambda,
                                   double dlambda,
                                   double tol_rel,
                                   double *out_values,
                                   size_t out_len,
                                   double *out_local_cost);

/*
 Closed-form nearest-neighbour XY coupling of the Ising chain.

 # Safety
 `out` must be writable.
 */
enum PhStatus ph_ising_h_analytic(size_t l, double lambda, double dlambda, double *out);

/*
 Runs an experiment described by a JSON configuration and returns the
 manifest as a new JSON string (free with `ph_string_free`).

 # Safety
 `config_json` must be a NUL-terminated string; `out_manifest_json` writable.
 */
enum PhStatus ph_run_experiment_json(const char *config_json, char **out_manifest_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARENTHAM_H */
