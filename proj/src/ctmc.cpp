#include "cthmm/ctmc.hpp"

#include "cthmm/matexp.hpp"

#include <cmath>
#include <sstream>

namespace cthmm {

RateMatrix RateMatrix::validate(Matrix rates, BoolMatrix edge_mask) {
  if (rates.rows() != rates.cols())
    throw DimensionMismatch("RateMatrix: matrix must be square");
  const Index n = rates.rows();
  if (edge_mask.rows() != n || edge_mask.cols() != n)
    throw DimensionMismatch("RateMatrix: edge mask dimension mismatch");
  if (!rates.allFinite())
    throw NonFinite("RateMatrix: non-finite entries");

  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (rates(i, j) < 0.0) {
        std::ostringstream msg;
        msg << "RateMatrix: negative rate at (" << i << ", " << j << ")";
        throw NegativeRate(msg.str());
      }
      if (!edge_mask(i, j) && rates(i, j) != 0.0) {
        std::ostringstream msg;
        msg << "RateMatrix: nonzero rate on masked edge (" << i << ", " << j << ")";
        throw EdgeViolation(msg.str());
      }
    }
  }

  const bool zero_diagonal = (rates.diagonal().array() == 0.0).all();
  if (zero_diagonal) {
    for (Index i = 0; i < n; ++i)
      rates(i, i) = -(rates.row(i).sum() - rates(i, i));
  } else {
    const double tol = 1e-12 * rates.cwiseAbs().maxCoeff();
    for (Index i = 0; i < n; ++i) {
      if (std::abs(rates.row(i).sum()) > tol) {
        std::ostringstream msg;
        msg << "RateMatrix: row " << i << " does not sum to zero";
        throw RowSumViolation(msg.str());
      }
    }
  }

  for (Index i = 0; i < n; ++i) edge_mask(i, i) = false;
  return RateMatrix(std::move(rates), std::move(edge_mask));
}

RateMatrix RateMatrix::validate(Matrix rates) {
  const Index n = rates.rows();
  BoolMatrix mask = BoolMatrix::Constant(n, n, true);
  return validate(std::move(rates), std::move(mask));
}

Vector holding_params(const RateMatrix& q) { return -q.entries().diagonal(); }

Matrix jump_probs(const RateMatrix& q) {
  const Index n = q.dim();
  Matrix v = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const double qi = -q(i, i);
    if (qi <= 0.0) continue;  // absorbing row stays zero
    for (Index j = 0; j < n; ++j)
      if (j != i) v(i, j) = q(i, j) / qi;
  }
  return v;
}

double standard_normal(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 == 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Trajectory sample_trajectory(const RateMatrix& q, Index start, double total_time,
                             std::uint64_t seed) {
  if (start < 0 || start >= q.dim())
    throw Error("sample_trajectory: start state out of range");
  if (!(total_time > 0.0))
    throw Error("sample_trajectory: total_time must be positive");

  std::mt19937_64 rng(seed);
  Trajectory traj;
  traj.total_time = total_time;

  Index state = start;
  double elapsed = 0.0;
  while (true) {
    const double rate = -q(state, state);
    if (rate <= 0.0) {  // absorbing: terminal residual
      traj.states.push_back(state);
      traj.dwell_times.push_back(total_time - elapsed);
      break;
    }
    const double u = uniform01(rng);
    const double dwell = -std::log1p(-u) / rate;
    if (elapsed + dwell >= total_time) {
      traj.states.push_back(state);
      traj.dwell_times.push_back(total_time - elapsed);
      break;
    }
    traj.states.push_back(state);
    traj.dwell_times.push_back(dwell);
    elapsed += dwell;

    const double draw = uniform01(rng) * rate;
    double cumulative = 0.0;
    Index next = -1;
    for (Index j = 0; j < q.dim(); ++j) {
      if (j == state || q(state, j) <= 0.0) continue;
      cumulative += q(state, j);
      next = j;
      if (draw < cumulative) break;
    }
    state = next;
  }
  return traj;
}

Matrix transition_matrix(const RateMatrix& q, double t) {
  if (t < 0.0) throw NegativeTime("transition_matrix: t must be nonnegative");
  return expm(q.entries() * t);
}

TransitionCounts count_transitions(const RateMatrix& q, const Trajectory& traj) {
  const Index n = q.dim();
  TransitionCounts counts{Matrix::Zero(n, n), Vector::Zero(n)};
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    counts.durations(traj.states[k]) += traj.dwell_times[k];
    if (k + 1 < traj.states.size())
      counts.jumps(traj.states[k], traj.states[k + 1]) += 1.0;
  }
  return counts;
}

double complete_log_likelihood(const RateMatrix& q, const Trajectory& traj) {
  const TransitionCounts counts = count_transitions(q, traj);
  double value = 0.0;
  for (Index i = 0; i < q.dim(); ++i) {
    for (Index j = 0; j < q.dim(); ++j) {
      if (i == j || counts.jumps(i, j) == 0.0) continue;
      if (q(i, j) <= 0.0) {
        std::ostringstream msg;
        msg << "complete_log_likelihood: trajectory uses zero-rate edge ("
            << i << ", " << j << ")";
        throw ZeroRateTransition(msg.str());
      }
      value += counts.jumps(i, j) * std::log(q(i, j));
    }
    value -= (-q(i, i)) * counts.durations(i);
  }
  return value;
}

Index state_at(const Trajectory& traj, double t) {
  double elapsed = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    elapsed += traj.dwell_times[k];
    if (t < elapsed) return traj.states[k];
  }
  return traj.states.back();
}

}  // namespace cthmm
