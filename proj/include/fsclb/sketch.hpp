#pragma once

#include <utility>

#include "fsclb/linalg.hpp"

namespace fsclb {

// Scfd accumulates the truncated singular mass into rho so that
// S^T S + rho I over-estimates the streamed gram; Fd discards it.
enum class SketchMode { Scfd, Fd };

// Which squared singular value of the stacked matrix is truncated.
// SigmaL is the update rule used throughout; SigmaLPlusOne is the milder
// variant kept to quantify the difference.
enum class TruncationRule { SigmaL, SigmaLPlusOne };

struct SketchState {
  int l = 0;
  int d = 0;
  Matrix s;  // l x d
  double rho = 0.0;
  SketchMode mode = SketchMode::Scfd;
  TruncationRule rule = TruncationRule::SigmaL;
};

SketchState make_sketch(int l, int d, SketchMode mode = SketchMode::Scfd,
                        TruncationRule rule = TruncationRule::SigmaL);

// Stack a row, shrink back to l rows. In Scfd mode the truncated mass is
// added to rho.
SketchState scfd_append(const SketchState& state, const Vector& x);

// Merge an incoming l x d sketch into the server sketch through a 2l x d
// stack. Returns the merged sketch (rho untouched) and the truncated mass;
// the caller owns adding it to its rho tally.
std::pair<SketchState, double> scfd_merge(const SketchState& server,
                                          const Matrix& incoming_s);

struct LogDet {
  double log_value = 0.0;
  double value() const;
};

// det(c I_d + B^T B) from the singular values of B, carried in log space.
LogDet det_from_singvals(const Vector& sv, double c, int d);

// (c I + S^T S)^{-1} v without materializing anything d x d. hdiag must hold
// (sigma_i^2 + c)^{-1} for the singular values of S.
Vector woodbury_inverse_apply(const Matrix& s, const Vector& hdiag, double c,
                              const Vector& v);

// v^T (c I + S^T S)^{-1} v, same contract as woodbury_inverse_apply.
double woodbury_quadratic_form(const Matrix& s, const Vector& hdiag, double c,
                               const Vector& v);

// S^T S + rho I. Theory-suite and direct-determinant use only.
Matrix approx_gram(const SketchState& state);

}  // namespace fsclb
