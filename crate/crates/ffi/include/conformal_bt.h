#ifndef CONFORMAL_BT_H
#define CONFORMAL_BT_H

#include <stdbool.h>
#include <stddef.h>

typedef enum CbtBenchmark {
  CBT_BENCHMARK_HEAT = 0,
  CBT_BENCHMARK_SCHRODINGER = 1,
  CBT_BENCHMARK_WAVE = 2,
} CbtBenchmark;

typedef enum CbtMatrix {
  CBT_MATRIX_A = 0,
  CBT_MATRIX_B = 1,
  CBT_MATRIX_C = 2,
} CbtMatrix;

typedef enum CbtMethod {
  // Lyapunov for Möbius maps, quadrature otherwise.
  CBT_METHOD_AUTO = 0,
  CBT_METHOD_LYAPUNOV = 1,
  CBT_METHOD_QUADRATURE = 2,
} CbtMethod;

// Status codes. Nonzero values agree with the command-line exit codes.
typedef enum CbtStatus {
  CBT_STATUS_OK = 0,
  CBT_STATUS_NULL_POINTER = 1,
  CBT_STATUS_VALIDATION = 2,
  CBT_STATUS_DIMENSION = 3,
  CBT_STATUS_NUMERICAL = 4,
  CBT_STATUS_CONVERGENCE = 5,
  CBT_STATUS_IO = 6,
  CBT_STATUS_FORMAT = 7,
  CBT_STATUS_PANIC = 8,
} CbtStatus;

typedef struct CbtMap CbtMap;

typedef struct CbtReduction CbtReduction;

typedef struct CbtSystem CbtSystem;

// Quadrature tolerances; see [`cbt_quadrature_defaults`].
typedef struct CbtQuadrature {
  double abs_tol;
  double rel_tol;
  size_t max_subdivisions;
} CbtQuadrature;

typedef struct CbtComplex {
  double re;
  double im;
} CbtComplex;

// Scalar summary of an error report.
typedef struct CbtErrorSummary {
  double h2abar_error;
  double h2abar_fom_norm;
  double bound;
  double epsilon;
  bool poles_inside;
  double min_pole_margin;
} CbtErrorSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cbt_version(void);

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *cbt_last_error_message(void);

struct CbtQuadrature cbt_quadrature_defaults(void);

// Builds a system from row-major `a` (n×n), `b` (n×m) and `c` (q×n).
//
// # Safety
// Each array must hold the stated number of entries; `out_sys` must be
// valid.
enum CbtStatus cbt_system_new(size_t n,
                              size_t m,
                              size_t q,
                              const struct CbtComplex *a,
                              const struct CbtComplex *b,
                              const struct CbtComplex *c,
                              struct CbtSystem **out_sys);

// Finite-difference benchmark of order `n`.
//
// # Safety
// `out_sys` must be valid.
enum CbtStatus cbt_system_benchmark(enum CbtBenchmark kind, size_t n, struct CbtSystem **out_sys);

// Reads a model file as written by the command-line tool.
//
// # Safety
// `path` must be a NUL-terminated string; `out_sys` must be valid.
enum CbtStatus cbt_system_load(const char *path, struct CbtSystem **out_sys);

// # Safety
// `sys` must be a live handle and `path` a NUL-terminated string.
enum CbtStatus cbt_system_save(const struct CbtSystem *sys, const char *path);

// # Safety
// `sys` must be a live handle; null output pointers are skipped.
enum CbtStatus cbt_system_dims(const struct CbtSystem *sys, size_t *n, size_t *m, size_t *q);

// Copies one system matrix row-major into `buf` (capacity `cap`
// entries). `len` receives the entry count; pass a null `buf` to query it.
//
// # Safety
// `sys` must be a live handle, `buf` null or valid for `cap` entries.
enum CbtStatus cbt_system_matrix(const struct CbtSystem *sys,
                                 enum CbtMatrix which,
                                 struct CbtComplex *buf,
                                 size_t cap,
                                 size_t *len);

// Evaluates `G(z)` (q×m, row-major).
//
// # Safety
// As for [`cbt_system_matrix`].
enum CbtStatus cbt_system_transfer(const struct CbtSystem *sys,
                                   struct CbtComplex z,
                                   struct CbtComplex *buf,
                                   size_t cap,
                                   size_t *len);

// Eigenvalues of `A`; `len` receives `n`.
//
// # Safety
// As for [`cbt_system_matrix`].
enum CbtStatus cbt_system_poles(const struct CbtSystem *sys,
                                struct CbtComplex *buf,
                                size_t cap,
                                size_t *len);

// # Safety
// `sys` must be null or a handle not yet freed.
void cbt_system_free(struct CbtSystem *sys);

// `m(s) = (αs + β)/(γs + δ)`.
//
// # Safety
// `out_map` must be valid.
enum CbtStatus cbt_map_mobius(struct CbtComplex alpha,
                              struct CbtComplex beta,
                              struct CbtComplex gamma,
                              struct CbtComplex delta,
                              struct CbtMap **out_map);

// The identity map, giving classical balanced truncation.
//
// # Safety
// `out_map` must be valid.
enum CbtStatus cbt_map_identity(struct CbtMap **out_map);

// `s ↦ −is`, onto the upper half-plane.
//
// # Safety
// `out_map` must be valid.
enum CbtStatus cbt_map_rotation(struct CbtMap **out_map);

// Onto the open disk of the given center and radius.
//
// # Safety
// `out_map` must be valid.
enum CbtStatus cbt_map_disk(struct CbtComplex center, double radius, struct CbtMap **out_map);

// Onto the Bernstein ellipse with parameter `r > 1`, scaled and rotated
// by `m` and centered at `c`.
//
// # Safety
// `out_map` must be valid.
enum CbtStatus cbt_map_joukowski(struct CbtComplex c,
                                 struct CbtComplex m,
                                 double r,
                                 struct CbtMap **out_map);

// # Safety
// `map` must be a live handle and `out` valid.
enum CbtStatus cbt_map_eval(const struct CbtMap *map,
                            struct CbtComplex s,
                            struct CbtComplex *out_value);

// # Safety
// `map` must be null or a handle not yet freed.
void cbt_map_free(struct CbtMap *map);

// Conformal balanced truncation of `sys` to order `r`. `quad` may be null
// for default tolerances. Near-equal singular values at the cut fail
// unless `allow_ties` is set.
//
// # Safety
// Handles must be live; `out_red` must be valid.
enum CbtStatus cbt_reduce(const struct CbtSystem *sys,
                          const struct CbtMap *map,
                          size_t r,
                          enum CbtMethod method,
                          const struct CbtQuadrature *quad,
                          bool allow_ties,
                          struct CbtReduction **out_red);

// New system handle holding the reduced model.
//
// # Safety
// `red` must be a live handle and `out_sys` valid.
enum CbtStatus cbt_reduction_rom(const struct CbtReduction *red, struct CbtSystem **out_sys);

// Hankel singular values, descending. `len` receives their count; pass a
// null `buf` to query it.
//
// # Safety
// `red` must be a live handle, `buf` null or valid for `cap` values.
enum CbtStatus cbt_reduction_hsv(const struct CbtReduction *red,
                                 double *buf,
                                 size_t cap,
                                 size_t *len);

// # Safety
// `red` must be null or a handle not yet freed.
void cbt_reduction_free(struct CbtReduction *red);

// `‖G‖` in the norm pulled back through `map`.
//
// # Safety
// Handles must be live; `out_norm` must be valid.
enum CbtStatus cbt_h2abar_norm(const struct CbtSystem *sys,
                               const struct CbtMap *map,
                               const struct CbtQuadrature *quad,
                               double *out_norm);

// Error norm, a-priori bound and pole placement of `rom` against `fom`.
//
// # Safety
// Handles must be live; `out_summary` must be valid.
enum CbtStatus cbt_error_summary(const struct CbtSystem *fom,
                                 const struct CbtSystem *rom,
                                 const struct CbtMap *map,
                                 enum CbtMethod method,
                                 const struct CbtQuadrature *quad,
                                 struct CbtErrorSummary *out_summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONFORMAL_BT_H */
