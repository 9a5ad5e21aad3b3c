#include "cthmm/em.hpp"

#include <cmath>
#include <random>

namespace cthmm {

namespace {

struct StepOutcome {
  CTHMMModel model;
  double log_likelihood = 0.0;
  std::string method_switch;  // empty unless a fallback happened
};

constexpr double kStddevFloor = 1e-6;

// Weighted Gaussian moment accumulators for the emission update.
struct EmissionStats {
  Vector mass;
  Matrix first;   // sum of w * o
  Matrix second;  // sum of w * o^2, elementwise
  Vector start_mass;

  EmissionStats(Index states, Index dims)
      : mass(Vector::Zero(states)),
        first(Matrix::Zero(states, dims)),
        second(Matrix::Zero(states, dims)),
        start_mass(Vector::Zero(states)) {}
};

void run_esce(const CTHMMModel& model, const std::map<double, Matrix>& pooled,
              ESCEMethod method, ESCEAccumulator& acc) {
  switch (method) {
    case ESCEMethod::expm:
      for (const auto& [tau, w] : pooled)
        esce_expm(model.rates, PairWeights{w, tau}, acc);
      return;
    case ESCEMethod::unif: {
      const double max_tau = pooled.empty() ? 0.0 : pooled.rbegin()->first;
      const UnifTable table = make_unif_table(model.rates, max_tau);
      for (const auto& [tau, w] : pooled)
        esce_unif(model.rates, PairWeights{w, tau}, acc, table);
      return;
    }
    case ESCEMethod::eigen: {
      const EigenDecomposition decomp = eig(model.rates.entries());
      for (const auto& [tau, w] : pooled)
        esce_eigen(decomp, model.rates, PairWeights{w, tau}, acc);
      return;
    }
  }
}

StepOutcome em_step_impl(const CTHMMModel& model,
                         const std::vector<ObservationSequence>& seqs,
                         const EMConfig& config) {
  const Index n = model.rates.dim();
  const Index dims = model.emissions.front().mean.size();
  const auto ptau = interval_transitions(model, seqs);

  double total_ll = 0.0;
  std::map<double, Matrix> pooled;  // interval -> summed pair weights
  EmissionStats stats(n, dims);

  for (const auto& seq : seqs) {
    const std::size_t v_count = seq.times.size();
    if (config.mode == WeightMode::soft) {
      const ForwardBackwardResult fb = forward_backward(model, seq, ptau);
      total_ll += fb.log_likelihood;
      for (std::size_t v = 0; v + 1 < v_count; ++v) {
        const double tau = seq.times[v + 1] - seq.times[v];
        auto [it, fresh] = pooled.emplace(tau, fb.pair_weights[v]);
        if (!fresh) it->second += fb.pair_weights[v];
      }
      stats.start_mass += fb.unary.row(0).transpose();
      for (std::size_t v = 0; v < v_count; ++v) {
        const Vector obs = seq.values.row(static_cast<Index>(v)).transpose();
        for (Index s = 0; s < n; ++s) {
          const double w = fb.unary(static_cast<Index>(v), s);
          stats.mass(s) += w;
          stats.first.row(s) += w * obs.transpose();
          stats.second.row(s) += w * obs.array().square().matrix().transpose();
        }
      }
    } else {
      const ViterbiResult vit = viterbi(model, seq, ptau);
      total_ll += vit.log_score;
      for (std::size_t v = 0; v + 1 < v_count; ++v) {
        const double tau = seq.times[v + 1] - seq.times[v];
        auto [it, fresh] = pooled.emplace(tau, Matrix::Zero(n, n));
        if (fresh) it->second = Matrix::Zero(n, n);
        it->second(vit.states[v], vit.states[v + 1]) += 1.0;
      }
      stats.start_mass(vit.states.front()) += 1.0;
      for (std::size_t v = 0; v < v_count; ++v) {
        const Index s = vit.states[v];
        const Vector obs = seq.values.row(static_cast<Index>(v)).transpose();
        stats.mass(s) += 1.0;
        stats.first.row(s) += obs.transpose();
        stats.second.row(s) += obs.array().square().matrix().transpose();
      }
    }
  }

  ESCEAccumulator acc(n);
  std::string switched;
  if (config.method == ESCEMethod::eigen && config.eigen_fallback) {
    try {
      run_esce(model, pooled, ESCEMethod::eigen, acc);
    } catch (const EigenUnstable& err) {
      acc = ESCEAccumulator(n);
      run_esce(model, pooled, ESCEMethod::expm, acc);
      switched = err.what();
    }
  } else {
    run_esce(model, pooled, config.method, acc);
  }

  // M-step: rates.
  Matrix rates = model.rates.entries();
  for (Index i = 0; i < n; ++i) {
    if (acc.expected_durations(i) <= 0.0) continue;  // unvisited: keep previous row
    for (Index j = 0; j < n; ++j) {
      if (i == j || !model.rates.edge_mask()(i, j)) continue;
      rates(i, j) = std::max(acc.expected_transitions(i, j) / acc.expected_durations(i),
                             config.rate_floor);
    }
  }
  rates.diagonal().setZero();
  RateMatrix new_rates = RateMatrix::validate(std::move(rates), model.rates.edge_mask());

  // M-step: emissions and initial distribution.
  std::vector<GaussianEmission> emissions = model.emissions;
  if (!config.freeze_emissions) {
    for (Index s = 0; s < n; ++s) {
      if (stats.mass(s) <= 0.0) continue;
      Vector mean = stats.first.row(s).transpose() / stats.mass(s);
      Vector var = stats.second.row(s).transpose() / stats.mass(s) -
                   mean.array().square().matrix();
      GaussianEmission& e = emissions[static_cast<std::size_t>(s)];
      e.mean = mean;
      e.stddev = var.array().max(0.0).sqrt().max(kStddevFloor);
    }
  }
  Vector initial = model.initial;
  if (!config.freeze_initial && stats.start_mass.sum() > 0.0)
    initial = stats.start_mass / stats.start_mass.sum();

  return StepOutcome{make_model(std::move(new_rates), std::move(emissions),
                                std::move(initial)),
                     total_ll, switched};
}

}  // namespace

std::pair<CTHMMModel, double> em_step(const CTHMMModel& model,
                                      const std::vector<ObservationSequence>& seqs,
                                      const EMConfig& config) {
  StepOutcome outcome = em_step_impl(model, seqs, config);
  return {std::move(outcome.model), outcome.log_likelihood};
}

EMReport fit(const CTHMMModel& init_model, const std::vector<ObservationSequence>& seqs,
             const EMConfig& config) {
  if (seqs.empty()) throw NoData("fit: no observation sequences");
  for (const auto& seq : seqs) {
    validate_sequence(init_model, seq);
    if (seq.times.size() < 2)
      throw NoData("fit: every sequence needs at least 2 observations");
  }

  CTHMMModel model = init_model;
  if (!config.init_from_model) {
    std::mt19937_64 rng(config.seed);
    const Index n = model.rates.dim();
    Matrix rates = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (i != j && model.rates.edge_mask()(i, j))
          rates(i, j) = 1.0 + config.init_noise * uniform01(rng);
    model.rates = RateMatrix::validate(std::move(rates), model.rates.edge_mask());
  }

  EMReport report;
  report.final_model = model;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    StepOutcome outcome = em_step_impl(model, seqs, config);
    if (!outcome.method_switch.empty())
      report.method_switches.emplace_back(iter, outcome.method_switch);
    report.log_likelihood_trace.push_back(outcome.log_likelihood);
    report.iterations = iter + 1;

    if (report.log_likelihood_trace.size() >= 2) {
      const double prev = report.log_likelihood_trace[report.log_likelihood_trace.size() - 2];
      const double curr = outcome.log_likelihood;
      if (config.mode == WeightMode::soft && curr < prev - 1e-6)
        throw NonIncreasingLikelihood("fit: soft EM log-likelihood decreased");
      model = std::move(outcome.model);
      report.final_model = model;
      if (std::abs(curr - prev) < config.rel_tol * std::abs(prev)) break;
    } else {
      model = std::move(outcome.model);
      report.final_model = model;
    }
  }
  return report;
}

}  // namespace cthmm
