#include "fsclb/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fsclb/errors.hpp"
#include "fsclb/spectral.hpp"

namespace fsclb {

namespace {

struct Shrunk {
  Matrix s;      // l x d
  double delta;  // truncated squared singular value
};

// SVD the stack, truncate at the configured singular value, shrink the rest
// and keep the top l rows. Singular values at or below the numerical-rank
// threshold count as exact zeros so rank-deficient streams keep rho at 0.
Shrunk shrink_stack(const Matrix& stack, int l, TruncationRule rule) {
  const SvdResult svd = thin_svd(stack);
  const Vector& sv = svd.singular_values;
  const int k = static_cast<int>(sv.size());

  const int trunc_index = rule == TruncationRule::SigmaL ? l : l + 1;  // 1-based
  double delta = 0.0;
  if (trunc_index <= k) {
    const double sigma = sv[trunc_index - 1];
    const double snap = static_cast<double>(std::max(stack.rows(), stack.cols())) *
                        std::numeric_limits<double>::epsilon() * sv[0];
    if (sigma > snap) delta = sigma * sigma;
  }

  Matrix out = Matrix::Zero(l, stack.cols());
  const int keep = std::min(l, k);
  for (int i = 0; i < keep; ++i) {
    const double shrunk = std::sqrt(std::max(sv[i] * sv[i] - delta, 0.0));
    out.row(i) = shrunk * svd.vt.row(i);
  }
  return Shrunk{std::move(out), delta};
}

}  // namespace

SketchState make_sketch(int l, int d, SketchMode mode, TruncationRule rule) {
  if (l < 1 || d < 1) throw InvalidState("make_sketch: l and d must be >= 1");
  SketchState state;
  state.l = l;
  state.d = d;
  state.s = Matrix::Zero(l, d);
  state.rho = 0.0;
  state.mode = mode;
  state.rule = rule;
  return state;
}

SketchState scfd_append(const SketchState& state, const Vector& x) {
  if (x.size() != state.d) {
    throw InvalidVector("scfd_append: vector dimension mismatch");
  }
  if (!x.allFinite()) throw InvalidVector("scfd_append: non-finite vector");

  Matrix stack(state.l + 1, state.d);
  stack.topRows(state.l) = state.s;
  stack.row(state.l) = x.transpose();

  Shrunk shrunk = shrink_stack(stack, state.l, state.rule);
  SketchState out = state;
  out.s = std::move(shrunk.s);
  if (state.mode == SketchMode::Scfd) out.rho += shrunk.delta;
  return out;
}

std::pair<SketchState, double> scfd_merge(const SketchState& server,
                                          const Matrix& incoming_s) {
  if (incoming_s.rows() != server.l || incoming_s.cols() != server.d) {
    throw InvalidMatrix("scfd_merge: sketch shape mismatch");
  }
  Matrix stack(2 * server.l, server.d);
  stack.topRows(server.l) = server.s;
  stack.bottomRows(server.l) = incoming_s;

  Shrunk shrunk = shrink_stack(stack, server.l, server.rule);
  SketchState out = server;
  out.s = std::move(shrunk.s);
  return {std::move(out), shrunk.delta};
}

double LogDet::value() const { return std::exp(log_value); }

LogDet det_from_singvals(const Vector& sv, double c, int d) {
  if (c <= 0.0) throw InvalidRegularizer("det_from_singvals: c must be > 0");
  const int n = static_cast<int>(sv.size());
  if (n > d) throw InvalidSpectrum("det_from_singvals: more values than dims");
  double log_det = (d - n) * std::log(c);
  for (int i = 0; i < n; ++i) {
    if (sv[i] < 0.0) {
      throw InvalidSpectrum("det_from_singvals: negative singular value");
    }
    log_det += std::log(sv[i] * sv[i] + c);
  }
  return LogDet{log_det};
}

Vector woodbury_inverse_apply(const Matrix& s, const Vector& hdiag, double c,
                              const Vector& v) {
  if (hdiag.size() != s.rows()) {
    throw InvalidState("woodbury: hdiag length does not match sketch rows");
  }
  if (c <= 0.0) throw InvalidRegularizer("woodbury: c must be > 0");
  if (v.size() != s.cols()) {
    throw InvalidVector("woodbury: vector dimension mismatch");
  }
  const Vector sv = s * v;
  return (v - s.transpose() * hdiag.cwiseProduct(sv)) / c;
}

double woodbury_quadratic_form(const Matrix& s, const Vector& hdiag, double c,
                               const Vector& v) {
  if (hdiag.size() != s.rows()) {
    throw InvalidState("woodbury: hdiag length does not match sketch rows");
  }
  if (c <= 0.0) throw InvalidRegularizer("woodbury: c must be > 0");
  if (v.size() != s.cols()) {
    throw InvalidVector("woodbury: vector dimension mismatch");
  }
  const Vector sv = s * v;
  return (v.squaredNorm() - sv.dot(hdiag.cwiseProduct(sv))) / c;
}

Matrix approx_gram(const SketchState& state) {
  Matrix g = state.s.transpose() * state.s;
  g.diagonal().array() += state.rho;
  return g;
}

}  // namespace fsclb
