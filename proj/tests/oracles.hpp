// Independent reference computations for the test suite. Everything here is
// deliberately written from first principles (series, quadrature, brute-force
// enumeration) and must not call into the implementation paths it checks.
#pragma once

#include "cthmm/ctmc.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

using cthmm::Index;
using cthmm::Matrix;
using cthmm::Vector;

// Truncated Taylor series for e^A; adequate for ||A||_1 <= ~1 with 200 terms.
inline Matrix taylor_expm(const Matrix& a, int terms = 200) {
  Matrix sum = Matrix::Identity(a.rows(), a.cols());
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  for (int k = 1; k <= terms; ++k) {
    term = term * a / double(k);
    sum += term;
  }
  return sum;
}

// 64-node Gauss-Legendre nodes/weights on [0, 1], generated by Newton
// iteration on the Legendre polynomial.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n = 64) {
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double p0 = 0.0, p1 = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        p0 = 1.0;
        p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
        }
        const double dp = n * (x * p0 - p1) / (x * x - 1.0);
        const double dx = p0 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      const double dp = n * (x * p0 - p1) / (x * x - 1.0);
      nodes[i] = 0.5 * (1.0 + x);
      weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
  }

  double integrate(const std::function<double(double)>& f, double lo, double hi) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      acc += weights[i] * f(lo + (hi - lo) * nodes[i]);
    return acc * (hi - lo);
  }
};

// End-state conditioned expectations through the uniformization series with
// an explicit truncation point, straight from the double-sum definitions.
struct UnifESCE {
  Matrix p;                    // P(t)
  std::vector<Matrix> powers;  // R^0..R^M
  double q_hat;
  double t;
  int m_max;
  std::vector<double> pois;

  UnifESCE(const Matrix& q, double time, int truncation) : q_hat(0.0), t(time), m_max(truncation) {
    const Index n = q.rows();
    for (Index i = 0; i < n; ++i) q_hat = std::max(q_hat, -q(i, i));
    const Matrix r = q / q_hat + Matrix::Identity(n, n);
    powers.push_back(Matrix::Identity(n, n));
    for (int m = 1; m <= m_max; ++m) powers.push_back(powers.back() * r);
    pois.resize(m_max + 1);
    const double lambda = q_hat * t;
    for (int m = 0; m <= m_max; ++m)
      pois[m] = std::exp(-lambda + m * std::log(lambda) - std::lgamma(m + 1.0));
    p = Matrix::Zero(n, n);
    for (int m = 0; m <= m_max; ++m) p += pois[m] * powers[m];
  }

  double duration(Index i, Index k, Index l) const {
    double acc = 0.0;
    for (int m = 0; m <= m_max; ++m) {
      double inner = 0.0;
      for (int s = 0; s <= m; ++s) inner += powers[s](k, i) * powers[m - s](i, l);
      acc += t / (m + 1.0) * inner * pois[m];
    }
    return acc / p(k, l);
  }

  double transitions(const Matrix& q, Index i, Index j, Index k, Index l) const {
    const double r_ij = q(i, j) / q_hat;
    double acc = 0.0;
    for (int m = 1; m <= m_max; ++m) {
      double inner = 0.0;
      for (int s = 1; s <= m; ++s) inner += powers[s - 1](k, i) * powers[m - s](j, l);
      acc += r_ij * inner * pois[m];
    }
    return acc / p(k, l);
  }
};

// All state sequences from `start` with at most `max_jumps` jumps along
// positive-rate edges.
inline std::vector<std::vector<Index>> enumerate_paths(const Matrix& q, Index start,
                                                       int max_jumps) {
  std::vector<std::vector<Index>> all;
  std::vector<std::vector<Index>> frontier{{start}};
  all.push_back({start});
  for (int jump = 0; jump < max_jumps; ++jump) {
    std::vector<std::vector<Index>> next;
    for (const auto& path : frontier) {
      for (Index s = 0; s < q.rows(); ++s) {
        if (s == path.back() || q(path.back(), s) <= 0.0) continue;
        auto extended = path;
        extended.push_back(s);
        all.push_back(extended);
        next.push_back(std::move(extended));
      }
    }
    frontier = std::move(next);
  }
  return all;
}

// Erlang(k, rate) cumulative distribution via the regularized gamma series.
inline double erlang_cdf(int k, double rate, double t) {
  double acc = 0.0;
  double term = 1.0;
  for (int m = 0; m < k; ++m) {
    if (m > 0) term *= rate * t / m;
    acc += term;
  }
  return 1.0 - std::exp(-rate * t) * acc;
}

}  // namespace oracle
