#include "fsclb/spectral.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "fsclb/errors.hpp"

namespace fsclb {

namespace {

void check_svd_input(const Matrix& a) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw InvalidMatrix("svd: matrix must be non-empty");
  }
  if (!a.allFinite()) {
    throw InvalidMatrix("svd: matrix has non-finite entries");
  }
}

void check_symmetric(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) throw InvalidMatrix(std::string(what) + ": not square");
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw InvalidMatrix(std::string(what) + ": not symmetric");
  }
}

}  // namespace

SvdResult thin_svd(const Matrix& a) {
  check_svd_input(a);
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.matrixU().allFinite() && svd.singularValues().allFinite() &&
      svd.matrixV().allFinite()) {
    return SvdResult{svd.matrixU(), svd.singularValues(),
                     svd.matrixV().transpose()};
  }
  // BDCSVD (Eigen 3.4.0) can emit non-finite factors on heavily
  // rank-deficient inputs; Jacobi is slower but dependable.
  Eigen::JacobiSVD<Matrix> jac(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SvdResult{jac.matrixU(), jac.singularValues(),
                   jac.matrixV().transpose()};
}

Vector singular_values(const Matrix& a) {
  check_svd_input(a);
  Eigen::BDCSVD<Matrix> svd(a);
  if (svd.singularValues().allFinite()) return svd.singularValues();
  Eigen::JacobiSVD<Matrix> jac(a);
  return jac.singularValues();
}

double psd_residual(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidMatrix("psd_dominates: shape mismatch");
  }
  check_symmetric(a, "psd_dominates A");
  check_symmetric(b, "psd_dominates B");
  Eigen::SelfAdjointEigenSolver<Matrix> diff(a - b, Eigen::EigenvaluesOnly);
  const double lambda_min = diff.eigenvalues().minCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> ea(a, Eigen::EigenvaluesOnly);
  const double a_norm = ea.eigenvalues().cwiseAbs().maxCoeff();
  return -lambda_min / (1.0 + a_norm);
}

bool psd_dominates(const Matrix& a, const Matrix& b, double tol) {
  return psd_residual(a, b) <= tol;
}

double spectral_error(const Vector& eigs, double lambda, int l,
                      TailConvention convention) {
  const int d = static_cast<int>(eigs.size());
  if (lambda <= 0.0) throw InvalidRegularizer("spectral_error: lambda <= 0");
  if (l < 1 || l > d) throw InvalidSpectrum("spectral_error: l out of range");

  const double top = d > 0 ? eigs.cwiseAbs().maxCoeff() : 0.0;
  const double neg_tol = 1e-10 * top;
  Vector e = eigs;
  for (int i = 0; i < d; ++i) {
    if (e[i] < -neg_tol) {
      throw InvalidSpectrum("spectral_error: negative eigenvalue");
    }
    if (e[i] < 0.0) e[i] = 0.0;
    if (i > 0 && e[i] > e[i - 1] + neg_tol) {
      throw InvalidSpectrum("spectral_error: spectrum not nonincreasing");
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < l; ++k) {
    double tail = 0.0;
    if (convention == TailConvention::BeyondTopK) {
      for (int i = k; i < d; ++i) tail += e[i];
    } else {
      for (int i = d - 1 - k; i < d; ++i) tail += e[i];
    }
    best = std::min(best, tail / (lambda * (l - k)));
  }
  return best;
}

double spd_log_det(const Matrix& a) {
  check_symmetric(a, "spd_log_det");
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw InvalidMatrix("spd_log_det: matrix not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace fsclb
