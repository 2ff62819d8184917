#ifndef KEPLER_AVERAGING_H
#define KEPLER_AVERAGING_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  KA_STATUS_OK = 0,
  KA_STATUS_NULL_POINTER = 1,
  KA_STATUS_INVALID_INPUT = 2,
  KA_STATUS_NO_CONVERGENCE = 3,
  KA_STATUS_OFF_MANIFOLD = 4,
  KA_STATUS_DEGENERATE_EQUATOR = 5,
  KA_STATUS_NUMERICAL = 6,
  KA_STATUS_OUT_OF_RANGE = 7,
  KA_STATUS_PANIC = 8,
} KaStatus;

typedef enum {
  KA_PREDICTED_CLASS_ELLIPTIC = 0,
  KA_PREDICTED_CLASS_UNSTABLE = 1,
  KA_PREDICTED_CLASS_INCONCLUSIVE = 2,
} KaPredictedClass;

typedef enum {
  KA_STABILITY_CLASS_ELLIPTIC = 0,
  KA_STABILITY_CLASS_HYPERBOLIC = 1,
  KA_STABILITY_CLASS_MIXED_ELLIPTIC_HYPERBOLIC = 2,
  KA_STABILITY_CLASS_DEGENERATE = 3,
  KA_STABILITY_CLASS_OUTSIDE_LOCAL_CHART = 4,
} KaStabilityClass;

// Opaque branch handle.
typedef struct KaBranch KaBranch;

// Opaque circular-analysis handle.
typedef struct KaCircularReport KaCircularReport;

// Opaque forcing handle.
typedef struct KaForcing KaForcing;

// Spectral data of a 4×4 symplectic matrix.
typedef struct {
  double trace;
  double det_s_minus_i;
  // Real and imaginary parts of `μ₁ + μ₃` and `μ₂ + μ₄`.
  double delta[2][2];
  // Eigenvalues `[re, im]`, ordered so that `μ₁μ₃ = μ₂μ₄ = 1`.
  double eigenvalues[4][2];
  KaStabilityClass stability;
} KaSpectrum;

// One continued periodic orbit.
typedef struct {
  double eps;
  // Initial state `(x1, x2, y1, y2)`.
  double s0[4];
  double residual;
  int64_t winding;
  KaSpectrum spectrum;
} KaBranchPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *ka_last_error(void);

// Library version as a static NUL-terminated string.
const char *ka_version(void);

// Linear forcing `p(t) = Σ cₙ e^{int}` from `len` triples `(n, re, im)`.
KaStatus ka_forcing_new_fourier(const int64_t *n,
                                const double *re,
                                const double *im,
                                size_t len,
                                KaForcing **out);

// `p(t) = e^{iNt} + a e^{−iNt}`.
KaStatus ka_forcing_new_two_wave(int64_t n, double a_re, double a_im, KaForcing **out);

void ka_forcing_free(KaForcing *f);

// Closed-form analysis on circular orbits with winding `n ≥ 1`.
KaStatus ka_circular_analyze(const KaForcing *f, int64_t n, KaCircularReport **out);

void ka_circular_report_free(KaCircularReport *r);

// `λ*`, `det M(p)` and `M(p)` in row-major order.
KaStatus ka_circular_values(const KaCircularReport *r,
                            double *lambda_star,
                            double *det_m,
                            double *m);

// Predicted class of family 0 (`+e^{i(λ*+Nt)}`) or 1 (`−e^{i(λ*+Nt)}`).
KaStatus ka_circular_family_class(const KaCircularReport *r, size_t family, KaPredictedClass *out);

// Find a critical point of `γ_N` from the seed `(λ, η, ξ)` and continue the
// periodic orbit through it over `eps[0..len]` (positive, increasing).
KaStatus ka_branch_continue(const KaForcing *f,
                            int64_t n,
                            double seed_lambda,
                            double seed_eta,
                            double seed_xi,
                            const double *eps,
                            size_t len,
                            KaBranch **out);

void ka_branch_free(KaBranch *b);

// Number of converged points; 0 for a null handle.
size_t ka_branch_len(const KaBranch *b);

// Prediction from the critical point and whether the branch stopped early.
KaStatus ka_branch_info(const KaBranch *b,
                        KaPredictedClass *predicted,
                        double *critical_point,
                        bool *truncated);

KaStatus ka_branch_point(const KaBranch *b, size_t index, KaBranchPoint *out);

// Classify a row-major 4×4 symplectic matrix.
KaStatus ka_classify_monodromy(const double *m, KaSpectrum *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KEPLER_AVERAGING_H */
