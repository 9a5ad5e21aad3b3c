#pragma once

#include "cthmm/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace cthmm {

/// Validated CTMC generator. Off-diagonal entries are transition rates in
/// 1/time, zero outside the allowed-edge mask; each diagonal entry is the
/// negated holding parameter so every row sums to zero.
class RateMatrix {
 public:
  RateMatrix() = default;  // empty 0x0 chain; assign a validated one before use

  /// Checks the generator invariants and returns the validated matrix. A
  /// supplied all-zero diagonal is filled in with the negated row sums.
  static RateMatrix validate(Matrix rates, BoolMatrix edge_mask);

  /// Same, with every off-diagonal transition allowed.
  static RateMatrix validate(Matrix rates);

  Index dim() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  const BoolMatrix& edge_mask() const { return edge_mask_; }
  double operator()(Index i, Index j) const { return entries_(i, j); }

 private:
  RateMatrix(Matrix entries, BoolMatrix edge_mask)
      : entries_(std::move(entries)), edge_mask_(std::move(edge_mask)) {}

  Matrix entries_;
  BoolMatrix edge_mask_;
};

/// Fully observed CTMC realization. `dwell_times[i]` is the time spent in
/// `states[i]`; the final entry is the residual dwell in the last state, so
/// the dwell times sum to `total_time`.
struct Trajectory {
  std::vector<Index> states;
  std::vector<double> dwell_times;
  double total_time = 0.0;
};

/// Exponential-sojourn sufficient statistics of a trajectory.
struct TransitionCounts {
  Matrix jumps;      // n_ij
  Vector durations;  // tau_i, final residual included
};

/// Holding parameters q_i = -Q_ii.
Vector holding_params(const RateMatrix& q);

/// Embedded jump probabilities v_ij = q_ij / q_i; rows of absorbing states
/// are all zero.
Matrix jump_probs(const RateMatrix& q);

/// Gillespie simulation of one realization, truncated at `total_time` with a
/// residual dwell in the final state. Deterministic for a fixed seed.
Trajectory sample_trajectory(const RateMatrix& q, Index start, double total_time,
                             std::uint64_t seed);

/// P(t) = e^{Qt}.
Matrix transition_matrix(const RateMatrix& q, double t);

TransitionCounts count_transitions(const RateMatrix& q, const Trajectory& traj);

/// log CL = sum_ij n_ij log q_ij - sum_i q_i tau_i.
double complete_log_likelihood(const RateMatrix& q, const Trajectory& traj);

/// State occupied at absolute time `t` within [0, total_time].
Index state_at(const Trajectory& traj, double t);

/// 53-bit uniform draw in [0, 1); the library-wide variate source, kept
/// explicit so seeded runs replay identically across platforms.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on uniform01 draws.
double standard_normal(std::mt19937_64& rng);

}  // namespace cthmm
