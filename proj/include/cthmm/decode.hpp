#pragma once

#include "cthmm/esce.hpp"
#include "cthmm/hmm.hpp"

#include <utility>
#include <vector>

namespace cthmm {

/// A state sequence with its time-dependent probability P_t(G) sampled on a
/// uniform grid over [0, T].
struct PathCandidate {
  std::vector<Index> states;
  Vector prob_grid;
  double log_v_product = 0.0;
};

/// Bidiagonal generator encoding a fixed state sequence: position i can only
/// move to position i+1, at the holding rate of the i-th path state; the last
/// row is zero.
struct AuxiliaryChain {
  Vector q_path;
  Matrix matrix;  // (n+1) x (n+1)
};

struct SSAConfig {
  int grid_points = 101;
  int max_path_length = 64;
  std::size_t max_frontier = 100000;
};

struct DecodedTrajectory {
  std::vector<Index> states;
  std::vector<double> dwell_times;
};

struct WellDefinedness {
  bool well_defined = true;
  std::vector<Index> witness_cycle;  // closed walk, empty when well-defined
};

/// True when every rate is positive and pairwise gaps exceed
/// 1e-6 * max(q); below that the partial-fraction closed forms lose
/// precision and callers must take the matrix-exponential route.
bool rates_usable_for_closed_form(const Vector& q_path);

/// Probability that a chain walking the fixed rate sequence q_path has
/// completed exactly n-1 jumps by time t, via partial fractions of the
/// Laplace transform. O(n^2). Requires distinct positive rates.
double closed_form_first_passage(const Vector& q_path, double t);

AuxiliaryChain auxiliary_matrix(const std::vector<Index>& path, const RateMatrix& q);

/// Same first-passage probability as the (1, n) entry of exp(chain * t);
/// works for repeated rates.
double first_passage_expm(const AuxiliaryChain& chain, double t);

/// P_t(G): jump-probability product times the first-passage term.
double path_probability(const std::vector<Index>& path, const RateMatrix& q, double t);

/// P_t(G) evaluated at every grid time; grid must start at 0 and increase.
Vector path_prob_grid(const std::vector<Index>& path, const RateMatrix& q,
                      const Vector& grid);

/// Dominance-pruned search for the most probable state sequence between two
/// end states within total_time, marginalizing dwell times. A candidate is
/// pruned when another candidate with the same endpoint beats it strictly at
/// every interior grid point. Ties at the final time break toward the
/// lexicographically smallest sequence.
PathCandidate ssa_search(const RateMatrix& q, Index start, Index end,
                         double total_time, const SSAConfig& config = {});

/// Expected dwell time per path position given that the full path spans
/// exactly time t, via the a/b coefficient recursions. O(n^3) for all
/// positions. Requires distinct positive rates.
Vector expected_dwell_closed_form(const Vector& q_path, double t);

/// Same expectations through the selected end-state method on the auxiliary
/// chain. The eigen method rejects repeated-rate chains and falls back to
/// expm; `eigen_fell_back` reports that when non-null.
Vector expected_dwell_esce(const std::vector<Index>& path, const RateMatrix& q,
                           double t, ESCEMethod method,
                           bool* eigen_fell_back = nullptr);

Vector expected_dwell_on_chain(const AuxiliaryChain& chain, double t,
                               ESCEMethod method, bool* eigen_fell_back = nullptr);

/// Full trajectory decoder: Viterbi states at the observation times, one SSA
/// search per interval, expected dwell times per inner path, concatenated
/// with identical junction states merged.
DecodedTrajectory viterbi_ssae(const CTHMMModel& model, const ObservationSequence& seq,
                               const SSAConfig& config = {});

/// Maximum-likelihood trajectories exist iff no cycle has a jump-rate product
/// >= 1; detected as a nonnegative-weight cycle on edge weights log q_ij.
WellDefinedness perkins_well_defined(const RateMatrix& q);

/// Maximum-likelihood dwell assignment: all of t on the first slowest state.
Vector perkins_ml_dwell(const std::vector<Index>& path, const RateMatrix& q, double t);

/// Maximum-likelihood state sequence of at most max_jumps jumps, by dynamic
/// programming over (jumps, end state, path minimum rate). Returns the
/// sequence and its log-likelihood.
std::pair<std::vector<Index>, double> perkins_ml_path(const RateMatrix& q, Index start,
                                                      Index end, double t,
                                                      int max_jumps);

}  // namespace cthmm
