#include "cthmm/esce.hpp"

#include <cmath>
#include <complex>
#include <sstream>

namespace cthmm {

namespace {

constexpr double kTinyProbability = 1e-300;
constexpr double kNegativeClamp = -1e-9;

double clamp_expectation(double value, bool eigen_path) {
  if (value >= 0.0) return value;
  if (value >= kNegativeClamp) return 0.0;
  std::ostringstream msg;
  msg << "expectation increment " << value << " below round-off clamp";
  if (eigen_path) throw EigenUnstable(msg.str());
  throw Error(msg.str());
}

// Poisson pmf over m = 0..m_max, evaluated in log space.
std::vector<double> poisson_weights(double lambda, long m_max) {
  std::vector<double> w(static_cast<std::size_t>(m_max) + 1, 0.0);
  if (lambda <= 0.0) {
    w[0] = 1.0;
    return w;
  }
  const double log_lambda = std::log(lambda);
  for (long m = 0; m <= m_max; ++m)
    w[static_cast<std::size_t>(m)] =
        std::exp(-lambda + m * log_lambda - std::lgamma(double(m) + 1.0));
  return w;
}

}  // namespace

PairWeights hard_pair(Index dim, Index start, Index end, double interval) {
  PairWeights w{Matrix::Zero(dim, dim), interval};
  w.weights(start, end) = 1.0;
  return w;
}

void ESCEAccumulator::merge(const ESCEAccumulator& other) {
  if (other.dim() != dim())
    throw DimensionMismatch("ESCEAccumulator::merge: dimension mismatch");
  expected_transitions += other.expected_transitions;
  expected_durations += other.expected_durations;
}

long truncation_point(double q_hat, double t) {
  if (q_hat < 0.0 || t < 0.0)
    throw Error("truncation_point: arguments must be nonnegative");
  const double qt = q_hat * t;
  return static_cast<long>(std::ceil(4.0 + 6.0 * std::sqrt(qt) + qt));
}

void esce_expm(const RateMatrix& q, const PairWeights& weights, ESCEAccumulator& acc) {
  const Index n = q.dim();
  const double t = weights.interval;
  if (!(t > 0.0)) throw Error("esce_expm: interval must be positive");
  if (weights.weights.rows() != n || weights.weights.cols() != n)
    throw DimensionMismatch("esce_expm: weight matrix dimension mismatch");

  const Matrix p = expm(q.entries() * t);
  Matrix ratio = Matrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) {
    for (Index l = 0; l < n; ++l) {
      const double w = weights.weights(k, l);
      if (w == 0.0) continue;  // zero-probability pairs contribute nothing
      if (w < 0.0) throw Error("esce_expm: negative pair weight");
      if (p(k, l) < kTinyProbability) {
        std::ostringstream msg;
        msg << "esce_expm: weight on vanishing transition (" << k << ", " << l << ")";
        throw DegenerateTransition(msg.str());
      }
      ratio(k, l) = w / p(k, l);
    }
  }

  Matrix b = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    b(i, i) = 1.0;
    const Matrix integral = vanloan_integral(q.entries(), b, t);
    b(i, i) = 0.0;
    acc.expected_durations(i) +=
        clamp_expectation((integral.array() * ratio.array()).sum(), false);
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j || !q.edge_mask()(i, j) || q(i, j) <= 0.0) continue;
      b(i, j) = 1.0;
      const Matrix integral = vanloan_integral(q.entries(), b, t);
      b(i, j) = 0.0;
      acc.expected_transitions(i, j) +=
          clamp_expectation(q(i, j) * (integral.array() * ratio.array()).sum(), false);
    }
  }
}

UnifTable make_unif_table(const RateMatrix& q, double max_interval,
                          long truncation_cap, std::size_t memory_cap_doubles) {
  UnifTable table;
  table.truncation_cap = truncation_cap;
  const Vector holding = holding_params(q);
  table.q_hat = holding.maxCoeff();
  if (table.q_hat <= 0.0) return table;  // all-absorbing chain, series unused

  const Index n = q.dim();
  table.r = q.entries() / table.q_hat + Matrix::Identity(n, n);

  const long m_max = truncation_point(table.q_hat, max_interval);
  if (m_max > truncation_cap) {
    std::ostringstream msg;
    msg << "make_unif_table: truncation point " << m_max << " exceeds cap " << truncation_cap;
    throw TruncationOverflow(msg.str());
  }
  const std::size_t needed =
      (static_cast<std::size_t>(m_max) + 1) * static_cast<std::size_t>(n * n);
  if (needed > memory_cap_doubles) return table;  // fall back to per-pair propagation

  table.powers.reserve(static_cast<std::size_t>(m_max) + 1);
  table.powers.push_back(Matrix::Identity(n, n));
  for (long m = 1; m <= m_max; ++m)
    table.powers.push_back(table.powers.back() * table.r);
  return table;
}

namespace {

// Accumulates one end-state pair's series contributions. `rows[m]` is row k
// of R^m and `cols[m]` is column l of R^m.
void unif_accumulate_pair(const RateMatrix& q, double weight, double t, double q_hat,
                          const std::vector<Eigen::RowVectorXd>& rows,
                          const std::vector<Vector>& cols, long m_max,
                          const std::vector<double>& pois, Index k, Index l,
                          const Matrix& r, ESCEAccumulator& acc) {
  const Index n = q.dim();

  double p_kl = 0.0;
  for (long m = 0; m <= m_max; ++m)
    p_kl += pois[static_cast<std::size_t>(m)] * rows[static_cast<std::size_t>(m)](l);
  if (p_kl < kTinyProbability) {
    std::ostringstream msg;
    msg << "esce_unif: weight on vanishing transition (" << k << ", " << l << ")";
    throw DegenerateTransition(msg.str());
  }
  const double scale = weight / p_kl;

  Vector durations = Vector::Zero(n);
  for (long m = 0; m <= m_max; ++m) {
    Eigen::ArrayXd inner = Eigen::ArrayXd::Zero(n);
    for (long s = 0; s <= m; ++s)
      inner += rows[static_cast<std::size_t>(s)].transpose().array() *
               cols[static_cast<std::size_t>(m - s)].array();
    durations.array() +=
        pois[static_cast<std::size_t>(m)] * (t / double(m + 1)) * inner;
  }
  for (Index i = 0; i < n; ++i)
    acc.expected_durations(i) += clamp_expectation(scale * durations(i), false);

  // sum over a = jumps before the (i, j) transition, b = jumps after it
  Matrix transitions = Matrix::Zero(n, n);
  for (long a = 0; a + 1 <= m_max; ++a) {
    Vector tail = Vector::Zero(n);
    for (long b = 0; a + b + 1 <= m_max; ++b)
      tail += pois[static_cast<std::size_t>(a + b + 1)] * cols[static_cast<std::size_t>(b)];
    transitions += rows[static_cast<std::size_t>(a)].transpose() * tail.transpose();
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j || !q.edge_mask()(i, j) || q(i, j) <= 0.0) continue;
      acc.expected_transitions(i, j) +=
          clamp_expectation(scale * r(i, j) * transitions(i, j), false);
    }
  }
}

}  // namespace

void esce_unif(const RateMatrix& q, const PairWeights& weights, ESCEAccumulator& acc,
               const UnifTable& table) {
  const Index n = q.dim();
  const double t = weights.interval;
  if (!(t > 0.0)) throw Error("esce_unif: interval must be positive");
  if (weights.weights.rows() != n || weights.weights.cols() != n)
    throw DimensionMismatch("esce_unif: weight matrix dimension mismatch");

  if (table.q_hat <= 0.0) {
    // Zero generator: the chain never moves, all time sits in the start state.
    for (Index k = 0; k < n; ++k)
      for (Index l = 0; l < n; ++l) {
        const double w = weights.weights(k, l);
        if (w == 0.0) continue;
        if (k != l) throw DegenerateTransition("esce_unif: weight on impossible pair");
        acc.expected_durations(k) += w * t;
      }
    return;
  }

  const long m_max = truncation_point(table.q_hat, t);
  if (m_max > table.truncation_cap) {
    std::ostringstream msg;
    msg << "esce_unif: truncation point " << m_max << " exceeds cap " << table.truncation_cap;
    throw TruncationOverflow(msg.str());
  }
  const std::vector<double> pois = poisson_weights(table.q_hat * t, m_max);
  const bool have_powers =
      !table.powers.empty() && static_cast<long>(table.powers.size()) > m_max;

  for (Index k = 0; k < n; ++k) {
    for (Index l = 0; l < n; ++l) {
      const double w = weights.weights(k, l);
      if (w == 0.0) continue;
      if (w < 0.0) throw Error("esce_unif: negative pair weight");

      std::vector<Eigen::RowVectorXd> rows(static_cast<std::size_t>(m_max) + 1);
      std::vector<Vector> cols(static_cast<std::size_t>(m_max) + 1);
      if (have_powers) {
        for (long m = 0; m <= m_max; ++m) {
          rows[static_cast<std::size_t>(m)] = table.powers[static_cast<std::size_t>(m)].row(k);
          cols[static_cast<std::size_t>(m)] = table.powers[static_cast<std::size_t>(m)].col(l);
        }
      } else {
        rows[0] = Eigen::RowVectorXd::Zero(n);
        rows[0](k) = 1.0;
        cols[0] = Vector::Zero(n);
        cols[0](l) = 1.0;
        for (long m = 1; m <= m_max; ++m) {
          rows[static_cast<std::size_t>(m)] = rows[static_cast<std::size_t>(m - 1)] * table.r;
          cols[static_cast<std::size_t>(m)] = table.r * cols[static_cast<std::size_t>(m - 1)];
        }
      }
      unif_accumulate_pair(q, w, t, table.q_hat, rows, cols, m_max, pois, k, l,
                           table.r, acc);
    }
  }
}

ComplexMatrix eigen_psi(const ComplexVector& eigenvalues, double t) {
  const Index n = eigenvalues.size();
  ComplexMatrix psi(n, n);
  for (Index p = 0; p < n; ++p) {
    const std::complex<double> lp = eigenvalues(p);
    const std::complex<double> ep = std::exp(t * lp);
    for (Index r = 0; r < n; ++r) {
      const std::complex<double> lr = eigenvalues(r);
      if (std::abs(lp - lr) < 1e-9 * std::max(1.0, std::abs(lp))) {
        psi(p, r) = t * ep;
      } else {
        psi(p, r) = (ep - std::exp(t * lr)) / (lp - lr);
      }
    }
  }
  return psi;
}

void esce_eigen(const EigenDecomposition& decomp, const RateMatrix& q,
                const PairWeights& weights, ESCEAccumulator& acc) {
  const Index n = q.dim();
  const double t = weights.interval;
  if (!(t > 0.0)) throw Error("esce_eigen: interval must be positive");
  if (decomp.eigenvalues.size() != n)
    throw DimensionMismatch("esce_eigen: decomposition dimension mismatch");
  if (!(decomp.condition < kIllConditionedThreshold)) {
    std::ostringstream msg;
    msg << "esce_eigen: condition number " << decomp.condition << " above threshold";
    throw EigenUnstable(msg.str());
  }

  const ComplexMatrix& u = decomp.right_vectors;
  const ComplexMatrix& v = decomp.inverse_vectors;

  ComplexVector exp_lambda(n);
  for (Index p = 0; p < n; ++p) exp_lambda(p) = std::exp(t * decomp.eigenvalues(p));
  const Matrix p_mat = (u * exp_lambda.asDiagonal() * v).real();

  double mass = 0.0;
  Matrix f = Matrix::Zero(n, n);
  for (Index k = 0; k < n; ++k) {
    for (Index l = 0; l < n; ++l) {
      const double w = weights.weights(k, l);
      if (w == 0.0) continue;
      if (w < 0.0) throw Error("esce_eigen: negative pair weight");
      if (p_mat(k, l) < kTinyProbability)
        throw EigenUnstable("esce_eigen: reconstructed transition probability vanished");
      f(k, l) = w / p_mat(k, l);
      mass += w;
    }
  }

  const ComplexMatrix psi = eigen_psi(decomp.eigenvalues, t);
  const ComplexMatrix b =
      u.transpose() * f.cast<std::complex<double>>() * v.transpose();
  const ComplexMatrix g = v.transpose() * psi.cwiseProduct(b) * u.transpose();

  // Imaginary parts must cancel; compare the residue per unit of weight mass
  // so that pooled intervals behave like their unpooled equivalents.
  const double residue_scale = std::max(1.0, mass);
  for (Index i = 0; i < n; ++i) {
    const std::complex<double> di = g(i, i);
    if (std::abs(di.imag()) > 1e-8 * residue_scale)
      throw EigenUnstable("esce_eigen: imaginary residue in duration aggregate");
    acc.expected_durations(i) += clamp_expectation(di.real(), true);
  }
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j || !q.edge_mask()(i, j) || q(i, j) <= 0.0) continue;
      const std::complex<double> nij = q(i, j) * g(i, j);
      if (std::abs(nij.imag()) > 1e-8 * residue_scale)
        throw EigenUnstable("esce_eigen: imaginary residue in transition aggregate");
      acc.expected_transitions(i, j) += clamp_expectation(nij.real(), true);
    }
  }
}

}  // namespace cthmm
