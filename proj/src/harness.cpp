#include "cthmm/harness.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace cthmm {

namespace {

CTHMMModel protocol_model(const RateMatrix& rates, const Vector& state_values,
                          double sigma) {
  std::vector<GaussianEmission> emissions;
  for (Index s = 0; s < rates.dim(); ++s)
    emissions.push_back(GaussianEmission{Vector::Constant(1, state_values(s)),
                                         Vector::Constant(1, sigma)});
  const Vector pi = Vector::Constant(rates.dim(), 1.0 / double(rates.dim()));
  return make_model(rates, std::move(emissions), pi);
}

Vector free_rates(const RateMatrix& q) {
  std::vector<double> out;
  for (Index i = 0; i < q.dim(); ++i)
    for (Index j = 0; j < q.dim(); ++j)
      if (i != j && q.edge_mask()(i, j)) out.push_back(q(i, j));
  return Eigen::Map<Vector>(out.data(), static_cast<Index>(out.size()));
}

double elapsed_seconds(const std::function<void()>& body, int min_reps = 1) {
  using clock = std::chrono::steady_clock;
  int reps = min_reps;
  while (true) {
    const auto begin = clock::now();
    for (int r = 0; r < reps; ++r) body();
    const double secs = std::chrono::duration<double>(clock::now() - begin).count();
    if (secs > 5e-3 || reps >= 4096) return secs / reps;
    reps *= 8;
  }
}

}  // namespace

MetricReport summarize(std::vector<double> per_run, std::string metric_name) {
  MetricReport report;
  report.metric_name = std::move(metric_name);
  report.per_run = std::move(per_run);
  const double n = double(report.per_run.size());
  report.mean = std::accumulate(report.per_run.begin(), report.per_run.end(), 0.0) / n;
  if (report.per_run.size() > 1) {
    double ss = 0.0;
    for (double v : report.per_run) ss += (v - report.mean) * (v - report.mean);
    report.std = std::sqrt(ss / (n - 1.0));
  }
  return report;
}

FiveStateModel gen_5state(std::uint64_t seed) {
  constexpr Index n = 5;
  std::mt19937_64 rng(seed);
  Vector q(n);
  for (Index i = 0; i < n; ++i) q(i) = 1.0 + 4.0 * uniform01(rng);

  Matrix rates = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    Vector raw(n);
    double sum = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      raw(j) = uniform01(rng);
      sum += raw(j);
    }
    for (Index j = 0; j < n; ++j)
      if (j != i) rates(i, j) = raw(j) / sum * q(i);
  }

  FiveStateModel out{RateMatrix::validate(std::move(rates)), Vector(n)};
  for (Index s = 0; s < n; ++s) out.state_values(s) = double(s + 1);
  return out;
}

std::vector<ObservationSequence> simulate_observations(const RateMatrix& rates,
                                                       const Vector& state_values,
                                                       double sigma, double horizon,
                                                       double obs_interval,
                                                       long total_obs,
                                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<ObservationSequence> seqs;
  long produced = 0;
  int subject = 0;
  while (produced < total_obs) {
    const Index start = static_cast<Index>(uniform01(rng) * double(rates.dim()));
    const Trajectory traj =
        sample_trajectory(rates, std::min(start, rates.dim() - 1), horizon, rng());

    std::vector<double> times;
    for (double t = 0.0; t <= horizon; t += obs_interval) {
      times.push_back(t);
      if (produced + static_cast<long>(times.size()) >= total_obs &&
          times.size() >= 2)
        break;
    }
    if (times.size() < 2) continue;

    ObservationSequence seq;
    std::ostringstream name;
    name << "sim" << subject++;
    seq.subject_id = name.str();
    seq.times = times;
    seq.values.resize(static_cast<Index>(times.size()), 1);
    for (std::size_t v = 0; v < times.size(); ++v) {
      const Index s = state_at(traj, times[v]);
      seq.values(static_cast<Index>(v), 0) =
          state_values(s) + sigma * standard_normal(rng);
    }
    produced += static_cast<long>(times.size());
    seqs.push_back(std::move(seq));
  }
  return seqs;
}

MetricReport run_learning_experiment(const LearnSpec& spec) {
  std::vector<double> errors;
  for (int run = 0; run < spec.runs; ++run) {
    const std::uint64_t run_seed = spec.seed + static_cast<std::uint64_t>(run);
    const FiveStateModel truth = gen_5state(run_seed);
    const Vector holding = holding_params(truth.rates);
    const double horizon = 100.0 / holding.minCoeff();
    const double interval = spec.interval_literal ? 0.5 * holding.maxCoeff()
                                                  : 0.5 / holding.maxCoeff();

    const auto seqs = simulate_observations(truth.rates, truth.state_values,
                                            spec.sigma, horizon, interval,
                                            spec.total_obs, run_seed);

    const CTHMMModel init = protocol_model(truth.rates, truth.state_values, spec.sigma);
    EMConfig config;
    config.method = spec.method;
    config.mode = spec.mode;
    config.rel_tol = spec.rel_tol;
    config.max_iters = spec.max_iters;
    config.seed = run_seed;
    config.freeze_emissions = true;
    const EMReport report = fit(init, seqs, config);

    const Vector learned = free_rates(report.final_model.rates);
    const Vector target = free_rates(truth.rates);
    errors.push_back((learned - target).norm() / target.norm());
  }
  return summarize(std::move(errors), "relative 2-norm rate error");
}

DecodeExperimentResult run_decoding_experiment(const DecodeSpec& spec) {
  std::vector<double> continuous_errors;
  std::vector<double> observation_errors;

  for (int run = 0; run < spec.runs; ++run) {
    const std::uint64_t run_seed = spec.seed + static_cast<std::uint64_t>(run);
    const FiveStateModel truth = gen_5state(run_seed);
    const Vector holding = holding_params(truth.rates);
    const double horizon = 100.0 / holding.minCoeff();
    const double interval = spec.interval_literal ? spec.tau_s * holding.maxCoeff()
                                                  : spec.tau_s / holding.maxCoeff();
    const CTHMMModel model = protocol_model(truth.rates, truth.state_values, spec.sigma);

    double mismatched_time = 0.0;
    double total_time = 0.0;
    long obs_mismatches = 0;
    long obs_total = 0;

    std::mt19937_64 rng(run_seed ^ 0x5bf03635ull);
    long produced = 0;
    while (produced < spec.total_obs) {
      const Index start = std::min(
          static_cast<Index>(uniform01(rng) * double(truth.rates.dim())),
          truth.rates.dim() - 1);
      const Trajectory traj = sample_trajectory(truth.rates, start, horizon, rng());

      std::vector<double> times;
      for (double t = 0.0; t <= horizon; t += interval) {
        times.push_back(t);
        if (produced + static_cast<long>(times.size()) >= spec.total_obs &&
            times.size() >= 2)
          break;
      }
      if (times.size() < 2) continue;

      ObservationSequence seq;
      seq.subject_id = "decode";
      seq.times = times;
      seq.values.resize(static_cast<Index>(times.size()), 1);
      for (std::size_t v = 0; v < times.size(); ++v) {
        const Index s = state_at(traj, times[v]);
        seq.values(static_cast<Index>(v), 0) =
            truth.state_values(s) + spec.sigma * standard_normal(rng);
      }
      produced += static_cast<long>(times.size());

      const ViterbiResult outer = viterbi(model, seq);
      for (std::size_t v = 0; v < times.size(); ++v) {
        obs_total += 1;
        if (outer.states[v] != state_at(traj, times[v])) obs_mismatches += 1;
      }

      const DecodedTrajectory decoded = viterbi_ssae(model, seq);
      const double span = times.back() - times.front();
      mismatched_time += continuous_mismatch(traj, decoded, span) * span;
      total_time += span;
    }
    continuous_errors.push_back(mismatched_time / total_time);
    observation_errors.push_back(double(obs_mismatches) / double(obs_total));
  }

  return DecodeExperimentResult{
      summarize(std::move(continuous_errors), "continuous-time decoding error"),
      summarize(std::move(observation_errors), "observation-time decoding error")};
}

double continuous_mismatch(const Trajectory& truth, const DecodedTrajectory& decoded,
                           double horizon) {
  double mismatched = 0.0;
  double cursor = 0.0;
  std::size_t ti = 0;
  std::size_t di = 0;
  double t_end = truth.dwell_times.empty() ? 0.0 : truth.dwell_times[0];
  double d_end = decoded.dwell_times.empty() ? 0.0 : decoded.dwell_times[0];

  while (cursor < horizon) {
    while (ti + 1 < truth.states.size() && t_end <= cursor)
      t_end += truth.dwell_times[++ti];
    while (di + 1 < decoded.states.size() && d_end <= cursor)
      d_end += decoded.dwell_times[++di];
    double next = horizon;
    if (ti + 1 < truth.states.size()) next = std::min(next, t_end);
    if (di + 1 < decoded.states.size()) next = std::min(next, d_end);
    if (next <= cursor) next = std::min(horizon, std::nextafter(cursor, horizon));
    if (truth.states[ti] != decoded.states[di]) mismatched += next - cursor;
    cursor = next;
  }
  return horizon > 0.0 ? mismatched / horizon : 0.0;
}

ToyReport run_toy(std::uint64_t) {
  Matrix rates(2, 2);
  rates << -1.0, 1.0, 0.5, -0.5;
  const RateMatrix q = RateMatrix::validate(std::move(rates));

  ToyReport report;
  const PathCandidate best = ssa_search(q, 0, 1, 12.0);
  report.path = best.states;
  report.dwell = expected_dwell_esce(best.states, q, 12.0, ESCEMethod::expm);

  const std::vector<Index> expected{0, 1, 0, 1, 0, 1, 0, 1};
  report.path_matches = report.path == expected;
  report.dwell_matches = report.dwell.size() == 8;
  if (report.dwell_matches)
    for (Index i = 0; i < report.dwell.size(); ++i)
      if (std::abs(report.dwell(i) - double(1 + (i % 2))) > 1e-4)
        report.dwell_matches = false;
  report.matches_expected = report.path_matches && report.dwell_matches;
  return report;
}

std::vector<DwellRuntimeRow> run_dwell_runtime(const DwellRuntimeSpec& spec) {
  std::vector<DwellRuntimeRow> rows;
  std::mt19937_64 rng(spec.seed);

  for (int n : spec.path_lengths) {
    DwellRuntimeRow row;
    row.path_length = n;

    for (int rep = 0; rep < spec.repeats; ++rep) {
      Vector q_path(n);
      do {
        for (int i = 0; i < n; ++i) q_path(i) = std::max(uniform01(rng), 1e-6);
      } while (!rates_usable_for_closed_form(q_path));
      const double t = (1.0 / q_path.array()).sum();
      row.total_time += t / spec.repeats;

      AuxiliaryChain chain;
      chain.q_path = q_path;
      chain.matrix = Matrix::Zero(n + 1, n + 1);
      for (int i = 0; i < n; ++i) {
        chain.matrix(i, i) = -q_path(i);
        chain.matrix(i, i + 1) = q_path(i);
      }

      Vector closed, via_expm, via_unif, via_eigen;
      row.closed_form_seconds +=
          elapsed_seconds([&] { closed = expected_dwell_closed_form(q_path, t); });
      row.expm_seconds += elapsed_seconds(
          [&] { via_expm = expected_dwell_on_chain(chain, t, ESCEMethod::expm); });
      row.unif_seconds += elapsed_seconds(
          [&] { via_unif = expected_dwell_on_chain(chain, t, ESCEMethod::unif); });
      bool fell_back = false;
      row.eigen_seconds += elapsed_seconds([&] {
        via_eigen = expected_dwell_on_chain(chain, t, ESCEMethod::eigen, &fell_back);
      });
      if (fell_back) row.eigen_failures += 1;

      std::vector<const Vector*> successful{&closed, &via_expm, &via_unif};
      if (!fell_back) successful.push_back(&via_eigen);
      for (const Vector* lhs : successful) {
        row.sum_error = std::max(row.sum_error, std::abs(lhs->sum() - t));
        for (const Vector* rhs : successful)
          row.max_disagreement =
              std::max(row.max_disagreement, (*lhs - *rhs).cwiseAbs().maxCoeff());
      }
    }
    row.closed_form_seconds /= spec.repeats;
    row.expm_seconds /= spec.repeats;
    row.unif_seconds /= spec.repeats;
    row.eigen_seconds /= spec.repeats;
    rows.push_back(row);
  }
  return rows;
}

std::uint64_t spec_hash(const std::string& description) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : description) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace cthmm
