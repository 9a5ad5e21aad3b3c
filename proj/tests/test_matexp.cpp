#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cthmm/matexp.hpp"
#include "oracles.hpp"

#include <random>

using namespace cthmm;

namespace {

// Random valid generator with unit-scale rates.
Matrix random_rate_matrix(Index n, std::mt19937_64& rng) {
  Matrix q(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) q(i, j) = uniform01(rng);
  q.diagonal().setZero();
  q.diagonal() = -q.rowwise().sum();
  return q;
}

}  // namespace

TEST_CASE("expm of the zero matrix is the identity") {
  const Matrix z = Matrix::Zero(4, 4);
  CHECK((expm(z) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("expm of a diagonal matrix exponentiates the diagonal") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = -1.3;
  d(1, 1) = 0.4;
  const Matrix e = expm(d);
  CHECK(e(0, 0) == doctest::Approx(std::exp(-1.3)).epsilon(1e-14));
  CHECK(e(1, 1) == doctest::Approx(std::exp(0.4)).epsilon(1e-14));
  CHECK(std::abs(e(0, 1)) < 1e-15);
  CHECK(std::abs(e(1, 0)) < 1e-15);
}

TEST_CASE("expm matches the Taylor oracle and keeps rows stochastic") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix q = random_rate_matrix(5, rng);
    const double t = 0.2 + 0.05 * trial;

    const Matrix p = expm(q * t);
    for (Index i = 0; i < 5; ++i) {
      CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-10);
      for (Index j = 0; j < 5; ++j) {
        CHECK(p(i, j) > -1e-12);
        CHECK(p(i, j) < 1.0 + 1e-12);
      }
    }

    const Matrix scaled = q * (1.0 / std::max(1.0, (q * t).cwiseAbs().colwise().sum().maxCoeff())) * t;
    CHECK((expm(scaled) - oracle::taylor_expm(scaled)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("expm rejects non-finite input") {
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(expm(bad), NonFinite);
}

TEST_CASE("expm inverse identity") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix a(4, 4);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j) a(i, j) = 2.0 * uniform01(rng) - 1.0;
    a *= 2.0;  // ||A||_1 up to ~8
    CHECK((expm(a) * expm(-a) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("eig of a diagonal matrix") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = -1.0;
  d(1, 1) = -2.0;
  const EigenDecomposition dec = eig(d);
  std::vector<double> lam{dec.eigenvalues(0).real(), dec.eigenvalues(1).real()};
  std::sort(lam.begin(), lam.end());
  CHECK(lam[0] == doctest::Approx(-2.0));
  CHECK(lam[1] == doctest::Approx(-1.0));
  CHECK(dec.condition == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(dec.eigenvalues.imag().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rate matrices have a zero eigenvalue and reconstruct") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix q = random_rate_matrix(5, rng);
    const EigenDecomposition dec = eig(q);
    REQUIRE(dec.condition < 1e8);

    double closest_to_zero = 1e300;
    std::complex<double> trace_sum = 0.0;
    for (Index p = 0; p < 5; ++p) {
      closest_to_zero = std::min(closest_to_zero, std::abs(dec.eigenvalues(p)));
      trace_sum += dec.eigenvalues(p);
    }
    CHECK(closest_to_zero < 1e-9);
    CHECK(std::abs(trace_sum.real() - q.trace()) < 1e-8);
    CHECK(std::abs(trace_sum.imag()) < 1e-8);

    const ComplexMatrix recon =
        dec.right_vectors * dec.eigenvalues.asDiagonal() * dec.inverse_vectors;
    CHECK((recon.real() - q).cwiseAbs().maxCoeff() / q.cwiseAbs().maxCoeff() < 1e-8);
    CHECK((dec.right_vectors * dec.inverse_vectors - ComplexMatrix::Identity(5, 5))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
  }
}

TEST_CASE("balancing flag is recorded") {
  Matrix q(2, 2);
  q << -1.0, 1.0, 0.5, -0.5;
  CHECK(eig(q, true).balanced);
  CHECK_FALSE(eig(q, false).balanced);
}

TEST_CASE("vanloan_integral at t = 0 vanishes") {
  Matrix q(3, 3);
  q << -1, 1, 0, 0, -2, 2, 1, 1, -2;
  CHECK(vanloan_integral(q, Matrix::Identity(3, 3), 0.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("vanloan_integral with zero generator is t B") {
  Matrix b(2, 2);
  b << 0.3, -0.7, 1.1, 0.2;
  const Matrix got = vanloan_integral(Matrix::Zero(2, 2), b, 1.7);
  CHECK((got - 1.7 * b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("vanloan_integral matches 64-node quadrature") {
  std::mt19937_64 rng(14);
  const oracle::GaussLegendre quad(64);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix q = random_rate_matrix(3, rng);
    Matrix b = Matrix::Zero(3, 3);
    b(0, 1) = 1.0;
    const double t = 0.7;

    const Matrix got = vanloan_integral(q, b, t);
    for (Index k = 0; k < 3; ++k) {
      for (Index l = 0; l < 3; ++l) {
        const double expected = quad.integrate(
            [&](double x) {
              return (expm(q * x) * b * expm(q * (t - x)))(k, l);
            },
            0.0, t);
        CHECK(std::abs(got(k, l) - expected) < 1e-9);
      }
    }
  }
}

TEST_CASE("vanloan_integral is linear in B") {
  std::mt19937_64 rng(15);
  const Matrix q = random_rate_matrix(4, rng);
  Matrix b1(4, 4), b2(4, 4);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) {
      b1(i, j) = uniform01(rng);
      b2(i, j) = uniform01(rng);
    }
  const Matrix sum = vanloan_integral(q, b1 + b2, 1.3);
  const Matrix parts = vanloan_integral(q, b1, 1.3) + vanloan_integral(q, b2, 1.3);
  CHECK((sum - parts).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("vanloan_integral rejects mismatched shapes") {
  CHECK_THROWS_AS(vanloan_integral(Matrix::Zero(2, 2), Matrix::Zero(3, 3), 1.0),
                  DimensionMismatch);
}
