#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cthmm/esce.hpp"
#include "oracles.hpp"

#include <random>

using namespace cthmm;

namespace {

RateMatrix random_rate_matrix(Index n, std::mt19937_64& rng, double scale = 1.0) {
  Matrix q(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) q(i, j) = scale * uniform01(rng);
  q.diagonal().setZero();
  return RateMatrix::validate(std::move(q));
}

struct PairValues {
  Matrix transitions;
  Vector durations;
};

// Expectations conditioned on one end-state pair, via the chosen method.
PairValues per_pair(const RateMatrix& q, Index k, Index l, double t, ESCEMethod method) {
  ESCEAccumulator acc(q.dim());
  const PairWeights w = hard_pair(q.dim(), k, l, t);
  switch (method) {
    case ESCEMethod::expm:
      esce_expm(q, w, acc);
      break;
    case ESCEMethod::unif:
      esce_unif(q, w, acc, make_unif_table(q, t));
      break;
    case ESCEMethod::eigen:
      esce_eigen(eig(q.entries()), q, w, acc);
      break;
  }
  return PairValues{acc.expected_transitions, acc.expected_durations};
}

}  // namespace

TEST_CASE("truncation point formula") {
  CHECK(truncation_point(1.0, 1.0) == 11);
  CHECK(truncation_point(0.0, 123.0) == 4);
  CHECK(truncation_point(4.0, 9.0) == 76);
}

TEST_CASE("symmetric two-state durations partition the interval") {
  Matrix q(2, 2);
  q << -1.0, 1.0, 1.0, -1.0;
  const RateMatrix rm = RateMatrix::validate(std::move(q));
  const PairValues values = per_pair(rm, 0, 0, 1.0, ESCEMethod::expm);
  CHECK(values.durations.sum() == doctest::Approx(1.0).epsilon(1e-8));
  // frozen from the independent uniformization oracle (M = 50) and confirmed
  // by direct quadrature of the defining integral
  CHECK(values.durations(0) == doctest::Approx(0.880797078).epsilon(1e-6));
}

TEST_CASE("vanishing interval leaves all time in the conditioning state") {
  std::mt19937_64 rng(31);
  const RateMatrix q = random_rate_matrix(3, rng);
  const double t = 1e-6;
  const PairValues values = per_pair(q, 1, 1, t, ESCEMethod::expm);
  CHECK(std::abs(values.durations(1) - t) < 1e-5 * t + 1e-12);
  CHECK(values.transitions.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("uniformization series reproduces P(t)") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 10; ++trial) {
    const RateMatrix q = random_rate_matrix(5, rng, 2.0);
    const double t = 0.3 + 0.5 * trial;
    const double q_hat = holding_params(q).maxCoeff();
    const long m = truncation_point(q_hat, t);

    const oracle::UnifESCE series(q.entries(), t, static_cast<int>(m));
    const Matrix pade = expm(q.entries() * t);
    CHECK((series.p - pade).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("esce_unif matches the independent series oracle") {
  std::mt19937_64 rng(33);
  const RateMatrix q = random_rate_matrix(3, rng);
  const double t = 1.4;
  const oracle::UnifESCE series(q.entries(), t, 80);
  for (Index k = 0; k < 3; ++k) {
    for (Index l = 0; l < 3; ++l) {
      const PairValues values = per_pair(q, k, l, t, ESCEMethod::unif);
      for (Index i = 0; i < 3; ++i) {
        CHECK(values.durations(i) == doctest::Approx(series.duration(i, k, l)).epsilon(1e-7));
        for (Index j = 0; j < 3; ++j) {
          if (i == j) continue;
          const double expected = q(i, j) > 0.0
                                      ? series.transitions(q.entries(), i, j, k, l)
                                      : 0.0;
          CHECK(values.transitions(i, j) == doctest::Approx(expected).epsilon(1e-7));
        }
      }
    }
  }
}

TEST_CASE("cross-method agreement on random generators") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 6; ++trial) {
    const RateMatrix q = random_rate_matrix(4, rng);
    for (const double t : {0.1, 1.0, 5.0}) {
      for (Index k = 0; k < 4; ++k) {
        for (Index l = 0; l < 4; ++l) {
          const PairValues a = per_pair(q, k, l, t, ESCEMethod::expm);
          const PairValues b = per_pair(q, k, l, t, ESCEMethod::unif);
          const PairValues c = per_pair(q, k, l, t, ESCEMethod::eigen);
          CHECK((a.durations - b.durations).cwiseAbs().maxCoeff() < 1e-6);
          CHECK((a.durations - c.durations).cwiseAbs().maxCoeff() < 1e-6);
          CHECK((a.transitions - b.transitions).cwiseAbs().maxCoeff() < 1e-6);
          CHECK((a.transitions - c.transitions).cwiseAbs().maxCoeff() < 1e-6);
          CHECK(a.durations.sum() == doctest::Approx(t).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("soft weights aggregate linearly over pairs") {
  std::mt19937_64 rng(35);
  const RateMatrix q = random_rate_matrix(3, rng);
  const double t = 0.8;

  Matrix weights(3, 3);
  for (Index k = 0; k < 3; ++k)
    for (Index l = 0; l < 3; ++l) weights(k, l) = uniform01(rng);
  weights /= weights.sum();

  ESCEAccumulator soft(3);
  esce_expm(q, PairWeights{weights, t}, soft);

  ESCEAccumulator manual(3);
  for (Index k = 0; k < 3; ++k) {
    for (Index l = 0; l < 3; ++l) {
      const PairValues values = per_pair(q, k, l, t, ESCEMethod::expm);
      manual.expected_durations += weights(k, l) * values.durations;
      manual.expected_transitions += weights(k, l) * values.transitions;
    }
  }
  CHECK((soft.expected_durations - manual.expected_durations).cwiseAbs().maxCoeff() <
        1e-10);
  CHECK((soft.expected_transitions - manual.expected_transitions)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("psi continuity across the equal-eigenvalue branch") {
  const double t = 1.7;
  ComplexVector lam(2);
  lam(0) = std::complex<double>(-0.5, 0.0);
  lam(1) = lam(0) + std::complex<double>(1e-10, 0.0);
  const ComplexMatrix psi = eigen_psi(lam, t);
  const std::complex<double> equal_branch = t * std::exp(t * lam(0));
  CHECK(std::abs(psi(0, 1) - equal_branch) < 1e-6 * std::abs(equal_branch));
  CHECK(std::abs(psi(0, 0) - equal_branch) == 0.0);
}

TEST_CASE("trace identity behind the eigen aggregation") {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 10; ++trial) {
    const RateMatrix q = random_rate_matrix(5, rng);
    const EigenDecomposition dec = eig(q.entries());
    ComplexMatrix a(5, 5);
    Matrix f(5, 5);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 5; ++j) {
        a(i, j) = std::complex<double>(uniform01(rng), uniform01(rng));
        f(i, j) = uniform01(rng);
      }
    const ComplexMatrix fc = f.cast<std::complex<double>>();
    const std::complex<double> lhs =
        ((dec.right_vectors * a * dec.inverse_vectors).cwiseProduct(fc)).sum();
    const ComplexMatrix reuse =
        dec.right_vectors.transpose() * fc * dec.inverse_vectors.transpose();
    const std::complex<double> rhs = a.cwiseProduct(reuse).sum();
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("monte carlo consistency of all three methods") {
  std::mt19937_64 rng(37);
  const RateMatrix q = random_rate_matrix(3, rng);
  const double t = 1.0;
  const Index k = 0;
  const Index l = 1;

  Matrix jump_sum = Matrix::Zero(3, 3);
  Matrix jump_sq = Matrix::Zero(3, 3);
  Vector dur_sum = Vector::Zero(3);
  Vector dur_sq = Vector::Zero(3);
  long accepted = 0;
  std::mt19937_64 seeder(1234);
  while (accepted < 10000) {
    const Trajectory traj = sample_trajectory(q, k, t, seeder());
    if (traj.states.back() != l) continue;
    accepted += 1;
    const TransitionCounts counts = count_transitions(q, traj);
    jump_sum += counts.jumps;
    jump_sq += counts.jumps.cwiseProduct(counts.jumps);
    dur_sum += counts.durations;
    dur_sq += counts.durations.cwiseProduct(counts.durations);
  }

  for (const ESCEMethod method :
       {ESCEMethod::expm, ESCEMethod::unif, ESCEMethod::eigen}) {
    const PairValues values = per_pair(q, k, l, t, method);
    for (Index i = 0; i < 3; ++i) {
      const double mean = dur_sum(i) / double(accepted);
      const double var = dur_sq(i) / double(accepted) - mean * mean;
      const double se = std::sqrt(std::max(var, 1e-300) / double(accepted));
      CHECK(std::abs(values.durations(i) - mean) < 3.0 * se + 1e-9);
      for (Index j = 0; j < 3; ++j) {
        if (i == j || q(i, j) <= 0.0) continue;
        const double jmean = jump_sum(i, j) / double(accepted);
        const double jvar = jump_sq(i, j) / double(accepted) - jmean * jmean;
        const double jse = std::sqrt(std::max(jvar, 1e-300) / double(accepted));
        CHECK(std::abs(values.transitions(i, j) - jmean) < 3.0 * jse + 1e-9);
      }
    }
  }
}

TEST_CASE("weight on an unreachable pair raises DegenerateTransition") {
  Matrix q = Matrix::Zero(2, 2);
  q(0, 1) = 1.0;  // state 1 is absorbing, so (1 -> 0) has zero probability
  const RateMatrix rm = RateMatrix::validate(std::move(q));
  ESCEAccumulator acc(2);
  CHECK_THROWS_AS(esce_expm(rm, hard_pair(2, 1, 0, 1.0), acc), DegenerateTransition);
  const UnifTable table = make_unif_table(rm, 1.0);
  CHECK_THROWS_AS(esce_unif(rm, hard_pair(2, 1, 0, 1.0), acc, table),
                  DegenerateTransition);
}

TEST_CASE("eigen method rejects a defective chain") {
  // bidiagonal with repeated rates: a Jordan block, not diagonalizable
  Matrix q = Matrix::Zero(3, 3);
  q(0, 0) = -1.0;
  q(0, 1) = 1.0;
  q(1, 1) = -1.0;
  q(1, 2) = 1.0;
  const RateMatrix rm = RateMatrix::validate(std::move(q));
  ESCEAccumulator acc(3);
  CHECK_THROWS_AS(esce_eigen(eig(rm.entries()), rm, hard_pair(3, 0, 2, 1.0), acc),
                  EigenUnstable);
}

TEST_CASE("accumulator merge is commutative") {
  std::mt19937_64 rng(38);
  const RateMatrix q = random_rate_matrix(3, rng);
  ESCEAccumulator a(3), b(3), ab(3), ba(3);
  esce_expm(q, hard_pair(3, 0, 1, 0.7), a);
  esce_expm(q, hard_pair(3, 1, 2, 1.3), b);
  ab.merge(a);
  ab.merge(b);
  ba.merge(b);
  ba.merge(a);
  CHECK((ab.expected_durations - ba.expected_durations).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ab.expected_transitions - ba.expected_transitions).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("unif falls back to per-pair propagation above the memory cap") {
  std::mt19937_64 rng(39);
  const RateMatrix q = random_rate_matrix(4, rng);
  const double t = 2.0;
  const UnifTable full = make_unif_table(q, t);
  const UnifTable lean = make_unif_table(q, t, 1000000, /*memory_cap_doubles=*/8);
  CHECK(full.powers.size() > 0);
  CHECK(lean.powers.empty());

  ESCEAccumulator with_table(4), without_table(4);
  esce_unif(q, hard_pair(4, 0, 2, t), with_table, full);
  esce_unif(q, hard_pair(4, 0, 2, t), without_table, lean);
  CHECK((with_table.expected_durations - without_table.expected_durations)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((with_table.expected_transitions - without_table.expected_transitions)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("truncation cap overflow raises") {
  std::mt19937_64 rng(40);
  const RateMatrix q = random_rate_matrix(3, rng, 10.0);
  CHECK_THROWS_AS(make_unif_table(q, 1e9), TruncationOverflow);
  // table sized for a short interval, then queried far beyond its cap
  const UnifTable table = make_unif_table(q, 1e-3, /*truncation_cap=*/20);
  ESCEAccumulator acc(3);
  CHECK_THROWS_AS(esce_unif(q, hard_pair(3, 0, 1, 50.0), acc, table),
                  TruncationOverflow);
}
