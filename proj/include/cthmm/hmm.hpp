#pragma once

#include "cthmm/ctmc.hpp"

#include <map>
#include <string>
#include <vector>

namespace cthmm {

/// Per-state Gaussian with diagonal covariance.
struct GaussianEmission {
  Vector mean;
  Vector stddev;
};

struct CTHMMModel {
  RateMatrix rates;
  std::vector<GaussianEmission> emissions;
  Vector initial;  // pi
};

/// Validates emission shapes, positive standard deviations and that pi is a
/// probability vector.
CTHMMModel make_model(RateMatrix rates, std::vector<GaussianEmission> emissions,
                      Vector initial);

/// Noisy measurements at strictly increasing times; one row of `values` per
/// observation.
struct ObservationSequence {
  std::vector<double> times;
  Matrix values;
  std::string subject_id;
};

void validate_sequence(const CTHMMModel& model, const ObservationSequence& seq);

/// P(tau) for every distinct observation interval, pooled by exact value so
/// repeated intervals cost a single matrix exponential.
std::map<double, Matrix> interval_transitions(
    const CTHMMModel& model, const std::vector<ObservationSequence>& seqs);

struct ForwardBackwardResult {
  std::vector<Matrix> pair_weights;  // one per interval: p(s_v = k, s_{v+1} = l | O)
  Matrix unary;                      // posterior state marginals, one row per observation
  double log_likelihood = 0.0;
};

ForwardBackwardResult forward_backward(const CTHMMModel& model,
                                       const ObservationSequence& seq);
ForwardBackwardResult forward_backward(const CTHMMModel& model,
                                       const ObservationSequence& seq,
                                       const std::map<double, Matrix>& ptau);

struct ViterbiResult {
  std::vector<Index> states;
  double log_score = 0.0;
};

/// MAP state sequence at the observation times; ties break toward the lowest
/// state index.
ViterbiResult viterbi(const CTHMMModel& model, const ObservationSequence& seq);
ViterbiResult viterbi(const CTHMMModel& model, const ObservationSequence& seq,
                      const std::map<double, Matrix>& ptau);

/// argmax_j P_{current,j}(horizon), lowest index on ties.
Index predict_state(const CTHMMModel& model, Index current, double horizon);

double emission_log_density(const GaussianEmission& emission,
                            const Eigen::Ref<const Vector>& value);

}  // namespace cthmm
