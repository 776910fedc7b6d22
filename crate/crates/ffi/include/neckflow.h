#ifndef NECKFLOW_H
#define NECKFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NfStatus {
  NF_STATUS_OK = 0,
  NF_STATUS_NULL_POINTER = 1,
  NF_STATUS_INVALID_ARGUMENT = 2,
  NF_STATUS_NUMERIC = 3,
  NF_STATUS_CAPACITY = 4,
  NF_STATUS_IO = 5,
  NF_STATUS_BUFFER_TOO_SMALL = 6,
  NF_STATUS_PANIC = 7,
} NfStatus;

typedef struct NfGeometry NfGeometry;

typedef struct NfMesh NfMesh;

typedef struct NfSolution NfSolution;

/**
 * `u1`, `u2`, `flux1`, `flux2` are NaN for inclusions absent from the geometry.
 */
typedef struct NfSolutionSummary {
  double p;
  double eta_final;
  double u1;
  double u2;
  double energy;
  double kkt_residual;
  double flux1;
  double flux2;
  size_t newton_iterations;
  size_t n_vertices;
} NfSolutionSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *nf_last_error(void);

/**
 * The symmetric two-disc benchmark at scale `scale` and gap `eps`.
 */
NfStatus nf_geometry_discs(double scale, double eps, NfGeometry **out);

/**
 * Builds a geometry from a TOML document.
 */
NfStatus nf_geometry_from_toml(const char *toml, NfGeometry **out);

void nf_geometry_free(NfGeometry *g);

NfStatus nf_geometry_eps(const NfGeometry *g, double *out);

NfStatus nf_mesh_generate(const NfGeometry *g, double target_h, size_t neck_layers, NfMesh **out);

void nf_mesh_free(NfMesh *m);

NfStatus nf_mesh_counts(const NfMesh *m, size_t *n_vertices, size_t *n_triangles);

/**
 * Solves with the default continuation schedule for `p`.
 */
NfStatus nf_solve(const NfGeometry *g, const NfMesh *m, double p, NfSolution **out);

void nf_solution_free(NfSolution *s);

NfStatus nf_solution_summary(const NfSolution *s, NfSolutionSummary *out);

/**
 * Copies the nodal values into `buf`. `len_out` always receives the number of
 * vertices; pass a null `buf` to query it. Returns `BufferTooSmall` when
 * `cap` is short.
 */
NfStatus nf_solution_nodal_values(const NfSolution *s, double *buf, size_t cap, size_t *len_out);

/**
 * Blow-up factor for dimension `n`.
 */
NfStatus nf_theta(double eps, double p, size_t n, double *out);

/**
 * Leading-order constant for the `(n-1)x(n-1)` row-major gap Hessian `hess`.
 */
NfStatus nf_k_const(double p, size_t n, const double *hess, double *out);

NfStatus nf_gamma(double z, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NECKFLOW_H */
