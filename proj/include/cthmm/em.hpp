#pragma once

#include "cthmm/esce.hpp"
#include "cthmm/hmm.hpp"

#include <cstdint>
#include <utility>

namespace cthmm {

struct EMConfig {
  ESCEMethod method = ESCEMethod::eigen;
  WeightMode mode = WeightMode::soft;
  int max_iters = 500;
  double rel_tol = 1e-6;  // relative log-likelihood change
  // uniform_perturbed initialization: q_ij = 1 + init_noise * U(0,1) on every
  // allowed edge; set init_from_model to keep the supplied rates instead.
  double init_noise = 0.1;
  bool init_from_model = false;
  std::uint64_t seed = 0;
  double rate_floor = 1e-10;
  bool eigen_fallback = true;
  bool freeze_emissions = false;
  bool freeze_initial = false;
};

struct EMReport {
  std::vector<double> log_likelihood_trace;
  int iterations = 0;
  std::vector<std::pair<int, std::string>> method_switches;
  CTHMMModel final_model;
};

/// One E+M sweep. Returns the updated model and the data log-likelihood of
/// the *input* model (soft: total; hard: Viterbi path score).
std::pair<CTHMMModel, double> em_step(const CTHMMModel& model,
                                      const std::vector<ObservationSequence>& seqs,
                                      const EMConfig& config);

/// Full EM loop: initializes the rates, iterates em_step until the relative
/// log-likelihood change drops below rel_tol or max_iters is reached.
EMReport fit(const CTHMMModel& init_model, const std::vector<ObservationSequence>& seqs,
             const EMConfig& config);

}  // namespace cthmm
