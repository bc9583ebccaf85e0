#pragma once

#include "fsclb/linalg.hpp"

namespace fsclb {

struct SvdResult {
  Matrix u;                // n x k
  Vector singular_values;  // length k = min(n, d), nonincreasing
  Matrix vt;               // k x d
};

// Economy-size SVD. Throws InvalidMatrix on empty or non-finite input.
SvdResult thin_svd(const Matrix& a);

// Singular values only (no factors); same validation as thin_svd.
Vector singular_values(const Matrix& a);

// Largest violation of A - B >= 0, normalized by 1 + ||A||_2.
// Negative when A - B is strictly positive definite.
double psd_residual(const Matrix& a, const Matrix& b);

// True iff the smallest eigenvalue of (A - B) is >= -tol * (1 + ||A||_2).
bool psd_dominates(const Matrix& a, const Matrix& b, double tol);

// Index convention for the spectral tail. BeyondTopK sums the eigenvalues
// strictly below the top k (vanishes once rank <= l-1); SmallestKPlusOne sums
// the k+1 smallest.
enum class TailConvention { BeyondTopK, SmallestKPlusOne };

// min over k = 0..l-1 of tail_k / (lambda * (l - k)) for a nonincreasing
// nonnegative spectrum. Small negative entries (roundoff) are clipped at
// -1e-10 * max |eig|; anything below that throws InvalidSpectrum.
double spectral_error(const Vector& eigs, double lambda, int l,
                      TailConvention convention = TailConvention::BeyondTopK);

// log det of a symmetric positive definite matrix via Cholesky.
double spd_log_det(const Matrix& a);

}  // namespace fsclb
