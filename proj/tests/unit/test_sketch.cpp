#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "fsclb/errors.hpp"
#include "fsclb/rng.hpp"
#include "fsclb/sketch.hpp"
#include "fsclb/spectral.hpp"

using namespace fsclb;

namespace {

Vector unit(int d, int i) {
  Vector v = Vector::Zero(d);
  v[i] = 1.0;
  return v;
}

Vector random_vector(int d, Rng& rng) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.gaussian();
  return v;
}

}  // namespace

TEST_CASE("scfd_append on an empty sketch keeps the row") {
  SketchState s = make_sketch(2, 3);
  const SketchState out = scfd_append(s, unit(3, 0));
  CHECK(out.rho == 0.0);
  Matrix expected = Matrix::Zero(2, 3);
  expected(0, 0) = 1.0;
  CHECK((out.s.cwiseAbs() - expected).norm() <= 1e-12);
}

TEST_CASE("scfd_append truncation compensates into rho") {
  // S = diag(2, 1), append e2: sigma = (2, sqrt(2)), delta = 2
  SketchState s = make_sketch(2, 2);
  s.s << 2, 0, 0, 1;
  const SketchState out = scfd_append(s, unit(2, 1));
  CHECK(out.rho == doctest::Approx(2.0).epsilon(1e-12));
  const Matrix gram = approx_gram(out);
  CHECK(gram(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(gram(1, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::abs(gram(0, 1)) <= 1e-12);
  // the sketch itself is [[sqrt 2, 0], [0, 0]] up to sign
  CHECK(out.s.row(0).norm() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(out.s.row(1).norm() <= 1e-12);
}

TEST_CASE("scfd_append with l=1 moves all mass to rho") {
  SketchState s = make_sketch(1, 2);
  const SketchState out = scfd_append(s, unit(2, 0));
  CHECK(out.rho == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.s.norm() <= 1e-12);
  // over-approximation: rho I = I dominates diag(1, 0)
  Matrix exact = Matrix::Zero(2, 2);
  exact(0, 0) = 1.0;
  CHECK(psd_dominates(approx_gram(out), exact, 1e-9));
}

TEST_CASE("fd mode leaves rho untouched") {
  SketchState s = make_sketch(1, 2, SketchMode::Fd);
  const SketchState out = scfd_append(s, unit(2, 0));
  CHECK(out.rho == 0.0);
}

TEST_CASE("sigma_{l+1} truncation variant is milder") {
  SketchState s = make_sketch(1, 2, SketchMode::Scfd, TruncationRule::SigmaLPlusOne);
  const SketchState out = scfd_append(s, unit(2, 0));
  // stack has singular values (1, 0); sigma_2 = 0, nothing truncated
  CHECK(out.rho == 0.0);
  CHECK(out.s.row(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scfd_append rejects wrong dimension") {
  SketchState s = make_sketch(2, 3);
  CHECK_THROWS_AS(scfd_append(s, Vector::Zero(4)), InvalidVector);
}

TEST_CASE("scfd_merge worked examples") {
  SUBCASE("zero into zero") {
    SketchState server = make_sketch(1, 2);
    auto [merged, delta] = scfd_merge(server, Matrix::Zero(1, 2));
    CHECK(delta == 0.0);
    CHECK(merged.s.norm() == 0.0);
  }
  SUBCASE("single row into empty server truncates fully") {
    SketchState server = make_sketch(1, 2);
    Matrix incoming(1, 2);
    incoming << 1, 0;
    auto [merged, delta] = scfd_merge(server, incoming);
    CHECK(delta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(merged.s.norm() <= 1e-12);
  }
  SUBCASE("orthogonal rows truncate the shared scale") {
    SketchState server = make_sketch(2, 3);
    server.s(0, 0) = 1.0;
    Matrix incoming = Matrix::Zero(2, 3);
    incoming(0, 1) = 1.0;
    auto [merged, delta] = scfd_merge(server, incoming);
    CHECK(delta == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(merged.s.norm() <= 1e-12);
  }
  SUBCASE("shape mismatch") {
    SketchState server = make_sketch(2, 3);
    CHECK_THROWS_AS(scfd_merge(server, Matrix::Zero(1, 3)), InvalidMatrix);
  }
}

TEST_CASE("det_from_singvals worked values") {
  const double lambda = 1.7;
  CHECK(det_from_singvals(Vector(), lambda, 3).value() ==
        doctest::Approx(lambda * lambda * lambda).epsilon(1e-12));

  Vector sv(2);
  sv << 2, 1;
  CHECK(det_from_singvals(sv, 1.0, 3).value() == doctest::Approx(10.0).epsilon(1e-12));

  CHECK_THROWS_AS(det_from_singvals(sv, 0.0, 3), InvalidRegularizer);
  CHECK_THROWS_AS(det_from_singvals(sv, -1.0, 3), InvalidRegularizer);
  CHECK_THROWS_AS(det_from_singvals(sv, 1.0, 1), InvalidSpectrum);
}

TEST_CASE("det_from_singvals agrees with the dense determinant") {
  Rng rng(8101);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 2 + rng.uniform_int(8);
    const int n = 1 + rng.uniform_int(d);
    Matrix b(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) b(i, j) = rng.gaussian();
    const double c = 0.3 + 2.5 * rng.uniform();
    Matrix dense = b.transpose() * b;
    dense.diagonal().array() += c;
    const double oracle = dense.determinant();
    const double got = det_from_singvals(singular_values(b), c, d).value();
    CHECK(std::abs(got - oracle) <= 1e-8 * std::abs(oracle));
  }
}

TEST_CASE("woodbury worked values") {
  SUBCASE("pure ridge") {
    const Matrix s = Matrix::Zero(1, 2);
    const Vector h = Vector::Constant(1, 0.5);
    const Vector v = woodbury_inverse_apply(s, h, 2.0, unit(2, 0));
    CHECK(v[0] == doctest::Approx(0.5));
    CHECK(v[1] == 0.0);
  }
  SUBCASE("rank-one sketch") {
    Matrix s(1, 2);
    s << 1, 0;
    const Vector h = Vector::Constant(1, 0.5);
    Vector x(2);
    x << 1, 1;
    const Vector v = woodbury_inverse_apply(s, h, 1.0, x);
    CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(woodbury_quadratic_form(s, h, 1.0, x) ==
          doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("errors") {
    const Matrix s = Matrix::Zero(2, 3);
    CHECK_THROWS_AS(woodbury_inverse_apply(s, Vector::Zero(1), 1.0, Vector::Zero(3)),
                    InvalidState);
    CHECK_THROWS_AS(woodbury_inverse_apply(s, Vector::Zero(2), 0.0, Vector::Zero(3)),
                    InvalidRegularizer);
    CHECK_THROWS_AS(woodbury_inverse_apply(s, Vector::Zero(2), 1.0, Vector::Zero(2)),
                    InvalidVector);
  }
}

TEST_CASE("woodbury agrees with dense solves on sketch-form matrices") {
  Rng rng(8102);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 3 + rng.uniform_int(7);
    const int l = 1 + rng.uniform_int(d - 1);
    Matrix g(l, d);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < d; ++j) g(i, j) = rng.gaussian();
    const SvdResult svd = thin_svd(g);
    const Matrix s = svd.singular_values.asDiagonal() * svd.vt;
    const double c = 0.2 + 2.0 * rng.uniform();
    const Vector h = (svd.singular_values.array().square() + c).inverse().matrix();
    const Vector v = random_vector(d, rng);

    Matrix dense = s.transpose() * s;
    dense.diagonal().array() += c;
    const Vector oracle = dense.ldlt().solve(v);
    const Vector got = woodbury_inverse_apply(s, h, c, v);
    CHECK((got - oracle).norm() <= 1e-8 * oracle.norm());
    CHECK(std::abs(woodbury_quadratic_form(s, h, c, v) - v.dot(oracle)) <=
          1e-8 * std::abs(v.dot(oracle)));
  }
}

TEST_CASE("approx_gram worked values") {
  SketchState zero = make_sketch(2, 2);
  CHECK(approx_gram(zero).norm() == 0.0);

  SketchState s = make_sketch(2, 2);
  s.s(0, 0) = std::sqrt(2.0);
  s.rho = 2.0;
  const Matrix g = approx_gram(s);
  CHECK(g(0, 0) == doctest::Approx(4.0));
  CHECK(g(1, 1) == doctest::Approx(2.0));

  SketchState ridge = make_sketch(1, 2);
  ridge.rho = 1.0;
  CHECK((approx_gram(ridge) - Matrix::Identity(2, 2)).norm() <= 1e-15);
}

TEST_CASE("scfd stream keeps the two-sided sandwich at every step") {
  Rng rng(8103);
  for (int trial = 0; trial < 4; ++trial) {
    const int d = 4 + rng.uniform_int(13);  // <= 16
    const int l = 1 + rng.uniform_int(d - 1);
    const int n = 20 + rng.uniform_int(181);  // <= 200
    SketchState sk = make_sketch(l, d);
    Matrix exact = Matrix::Zero(d, d);
    Matrix prev_over = approx_gram(sk);
    for (int i = 0; i < n; ++i) {
      const Vector x = random_vector(d, rng);
      sk = scfd_append(sk, x);
      exact += x * x.transpose();
      const Matrix over = approx_gram(sk);
      CHECK(psd_residual(over, exact) <= 1e-7);
      CHECK(psd_residual(exact, sk.s.transpose() * sk.s) <= 1e-7);
      // monotone growth of the compensated gram
      CHECK(psd_residual(over, prev_over) <= 1e-7);
      prev_over = over;
    }
  }
}

TEST_CASE("scfd merge grows the compensated gram monotonically") {
  Rng rng(8104);
  const int d = 10;
  const int l = 3;
  SketchState server = make_sketch(l, d);
  Matrix prev = approx_gram(server);
  for (int step = 0; step < 20; ++step) {
    SketchState local = make_sketch(l, d);
    for (int i = 0; i < 6; ++i) local = scfd_append(local, random_vector(d, rng));
    auto [merged, delta] = scfd_merge(server, local.s);
    server = std::move(merged);
    server.rho += delta;
    const Matrix over = approx_gram(server);
    // the double sketch never loses uncompensated mass
    CHECK(psd_residual(over, prev) <= 1e-7);
    Matrix absorbed = prev + local.s.transpose() * local.s;
    CHECK(psd_residual(over, absorbed) <= 1e-7);
    prev = over;
  }
}

TEST_CASE("fd mode satisfies the spectral-tail bound") {
  Rng rng(8105);
  for (int trial = 0; trial < 4; ++trial) {
    const int d = 6 + rng.uniform_int(9);
    const int l = 2 + rng.uniform_int(d - 2);
    const int n = 40 + rng.uniform_int(120);
    SketchState sk = make_sketch(l, d, SketchMode::Fd);
    Matrix exact = Matrix::Zero(d, d);
    for (int i = 0; i < n; ++i) {
      const Vector x = random_vector(d, rng);
      sk = scfd_append(sk, x);
      exact += x * x.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(exact, Eigen::EigenvaluesOnly);
    Vector desc(d);
    for (int i = 0; i < d; ++i) desc[i] = eig.eigenvalues()[d - 1 - i];
    const double lambda = 1.0;
    const double bound = lambda * spectral_error(desc, lambda, l);
    const Matrix diff = exact - sk.s.transpose() * sk.s;
    Eigen::SelfAdjointEigenSolver<Matrix> deig(diff, Eigen::EigenvaluesOnly);
    const double err = deig.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(err <= bound * (1.0 + 1e-9) + 1e-9);
  }
}
