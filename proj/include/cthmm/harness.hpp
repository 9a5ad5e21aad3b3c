#pragma once

#include "cthmm/decode.hpp"
#include "cthmm/em.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cthmm {

/// Mean and spread of a per-run metric.
struct MetricReport {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over runs
  std::vector<double> per_run;
  std::string metric_name;
};

MetricReport summarize(std::vector<double> per_run, std::string metric_name);

/// Complete-digraph generator used by the simulation experiments: q_i drawn
/// uniformly from [1, 5], off-diagonal rates drawn from [0, 1] and
/// renormalized so each row's off-diagonal sum equals q_i. State i emits
/// around value i+1.
struct FiveStateModel {
  RateMatrix rates;
  Vector state_values;
};
FiveStateModel gen_5state(std::uint64_t seed);

struct LearnSpec {
  double sigma = 0.25;
  WeightMode mode = WeightMode::soft;
  ESCEMethod method = ESCEMethod::eigen;
  int runs = 5;
  std::uint64_t seed = 42;
  long total_obs = 10000;  // desk scale; the full-scale protocol uses 1e5
  bool interval_literal = false;
  double rel_tol = 1e-6;
  int max_iters = 500;
};

/// Samples chains from a fresh 5-state model per run, observes them on the
/// protocol's grid, fits with frozen emissions, and reports the relative
/// 2-norm error of the learned free rates.
MetricReport run_learning_experiment(const LearnSpec& spec);

struct DecodeSpec {
  double sigma = 0.25;
  double tau_s = 0.5;
  int runs = 5;
  std::uint64_t seed = 42;
  long total_obs = 1000;  // desk scale; the full-scale protocol uses 1e4
  bool interval_literal = false;
};

struct DecodeExperimentResult {
  MetricReport continuous_error;   // time-weighted state mismatch fraction
  MetricReport observation_error;  // mismatch fraction at observation times
};

/// Decodes simulated sequences with the generating model via viterbi_ssae
/// and compares against the true chains.
DecodeExperimentResult run_decoding_experiment(const DecodeSpec& spec);

struct ToyReport {
  std::vector<Index> path;
  Vector dwell;
  bool path_matches = false;   // SSA found (1,2,1,2,1,2,1,2)
  bool dwell_matches = false;  // dwells equal (1,2,...) within 1e-4 per entry
  bool matches_expected = false;
};

/// 2-state digraph with q = (1, 0.5): SSA from state 0 to 1 over T = 12 and
/// the expected dwell times of the winning path, checked against the
/// reference answer (path (1,2,1,2,1,2,1,2), dwells (1,2,...)).
ToyReport run_toy(std::uint64_t seed = 0);

struct DwellRuntimeRow {
  int path_length = 0;
  double total_time = 0.0;
  double closed_form_seconds = 0.0;
  double expm_seconds = 0.0;
  double unif_seconds = 0.0;
  double eigen_seconds = 0.0;
  int eigen_failures = 0;
  double max_disagreement = 0.0;  // across successful methods
  double sum_error = 0.0;         // |sum(dwell) - t| worst case
};

struct DwellRuntimeSpec {
  std::vector<int> path_lengths = {20, 30, 40};
  int repeats = 10;
  std::uint64_t seed = 42;
};

/// Times the four dwell-time computations on random distinct-rate chains
/// with t equal to the summed mean holding times.
std::vector<DwellRuntimeRow> run_dwell_runtime(const DwellRuntimeSpec& spec);

/// Simulation helpers shared by the experiments and the CLI.
std::vector<ObservationSequence> simulate_observations(const RateMatrix& rates,
                                                       const Vector& state_values,
                                                       double sigma, double horizon,
                                                       double obs_interval,
                                                       long total_obs,
                                                       std::uint64_t seed);

/// Time-weighted fraction of [0, horizon] where the two trajectories occupy
/// different states.
double continuous_mismatch(const Trajectory& truth, const DecodedTrajectory& decoded,
                           double horizon);

/// FNV-1a hash of an experiment description, recorded in result rows.
std::uint64_t spec_hash(const std::string& description);

}  // namespace cthmm
