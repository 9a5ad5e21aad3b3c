#include <CLI11.hpp>
#include <json.hpp>

#include "cthmm/harness.hpp"
#include "cthmm/io.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace cthmm;

ESCEMethod parse_method(const std::string& name) {
  if (name == "expm") return ESCEMethod::expm;
  if (name == "unif") return ESCEMethod::unif;
  if (name == "eigen") return ESCEMethod::eigen;
  throw CLI::ValidationError("--method must be expm, unif or eigen");
}

WeightMode parse_mode(const std::string& name) {
  if (name == "soft") return WeightMode::soft;
  if (name == "hard") return WeightMode::hard;
  throw CLI::ValidationError("--mode must be soft or hard");
}

// CLI state labels are 1-based; the library indexes from 0.
std::vector<Index> parse_path(const std::string& text) {
  std::vector<Index> path;
  std::stringstream stream(text);
  std::string field;
  while (std::getline(stream, field, ','))
    path.push_back(std::stol(field) - 1);
  return path;
}

CTHMMModel default_model(int states, double sigma) {
  Matrix rates = Matrix::Zero(states, states);
  RateMatrix q = RateMatrix::validate(std::move(rates));
  std::vector<GaussianEmission> emissions;
  for (int s = 0; s < states; ++s)
    emissions.push_back(GaussianEmission{Vector::Constant(1, double(s + 1)),
                                         Vector::Constant(1, sigma)});
  return make_model(std::move(q), std::move(emissions),
                    Vector::Constant(states, 1.0 / double(states)));
}

int cmd_learn(const std::string& data, const std::string& model_out,
              const std::string& model_init, int states, double sigma,
              const std::string& method, const std::string& mode, std::uint64_t seed,
              double tol, int max_iters, bool freeze_emissions, double noise) {
  const auto seqs = load_observations(data);
  CTHMMModel init = model_init.empty() ? default_model(states, sigma)
                                       : load_model(model_init);
  EMConfig config;
  config.method = parse_method(method);
  config.mode = parse_mode(mode);
  config.seed = seed;
  config.rel_tol = tol;
  config.max_iters = max_iters;
  config.freeze_emissions = freeze_emissions;
  config.init_noise = noise;

  const EMReport report = fit(init, seqs, config);
  save_model(report.final_model, model_out);
  std::cout << "iterations: " << report.iterations << "\n"
            << "log-likelihood: " << report.log_likelihood_trace.back() << "\n";
  for (const auto& [iter, reason] : report.method_switches)
    std::cout << "method switch at iteration " << iter << ": " << reason << "\n";
  std::cout << "model written to " << model_out << "\n";
  return 0;
}

int cmd_decode(const std::string& model_path, const std::string& data,
               const std::string& out_path, int grid_points) {
  const CTHMMModel model = load_model(model_path);
  const auto seqs = load_observations(data);
  SSAConfig config;
  config.grid_points = grid_points;

  std::vector<std::pair<std::string, DecodedTrajectory>> rows;
  for (const auto& seq : seqs)
    rows.emplace_back(seq.subject_id, viterbi_ssae(model, seq, config));

  std::ofstream out(out_path);
  if (!out) throw Error("decode: cannot open " + out_path);
  write_decoded_csv(rows, out);
  std::cout << "decoded " << rows.size() << " sequences to " << out_path << "\n";
  return 0;
}

int cmd_path_prob(const std::string& model_path, const std::string& path_text,
                  double t) {
  const CTHMMModel model = load_model(model_path);
  const auto path = parse_path(path_text);
  std::cout << path_probability(path, model.rates, t) << "\n";
  return 0;
}

int cmd_dwell(const std::string& model_path, const std::string& path_text, double t,
              const std::string& method) {
  const CTHMMModel model = load_model(model_path);
  const auto path = parse_path(path_text);
  const Vector dwell = expected_dwell_esce(path, model.rates, t, parse_method(method));
  for (Index i = 0; i < dwell.size(); ++i)
    std::cout << (i ? "," : "") << dwell(i);
  std::cout << "\n";
  return 0;
}

int cmd_simulate(const std::string& model_path, int subjects, double horizon,
                 double obs_interval, const std::string& out_path,
                 std::uint64_t seed) {
  const CTHMMModel model = load_model(model_path);
  std::mt19937_64 rng(seed);
  std::vector<ObservationSequence> seqs;
  for (int subject = 0; subject < subjects; ++subject) {
    Index start = 0;
    double draw = uniform01(rng);
    for (Index s = 0; s < model.rates.dim(); ++s) {
      draw -= model.initial(s);
      if (draw < 0.0) { start = s; break; }
      start = s;
    }
    const Trajectory traj = sample_trajectory(model.rates, start, horizon, rng());
    ObservationSequence seq;
    std::ostringstream name;
    name << "subject" << subject;
    seq.subject_id = name.str();
    const Index dims = model.emissions.front().mean.size();
    std::vector<Vector> values;
    for (double t = 0.0; t <= horizon; t += obs_interval) {
      seq.times.push_back(t);
      const auto& e = model.emissions[static_cast<std::size_t>(state_at(traj, t))];
      Vector v(dims);
      for (Index d = 0; d < dims; ++d)
        v(d) = e.mean(d) + e.stddev(d) * standard_normal(rng);
      values.push_back(std::move(v));
    }
    seq.values.resize(static_cast<Index>(values.size()), dims);
    for (std::size_t v = 0; v < values.size(); ++v)
      seq.values.row(static_cast<Index>(v)) = values[v].transpose();
    seqs.push_back(std::move(seq));
  }
  save_observations(seqs, out_path);
  std::cout << "wrote " << seqs.size() << " subjects to " << out_path << "\n";
  return 0;
}

int cmd_bench(const std::string& experiment, double sigma, double tau_s,
              const std::string& mode, const std::string& method, int runs,
              std::uint64_t seed, const std::string& out_path, bool full_scale,
              bool check, bool interval_literal, long obs_override) {
  std::ostringstream desc;
  desc << experiment << ":sigma=" << sigma << ":tau_s=" << tau_s << ":mode=" << mode
       << ":method=" << method << ":runs=" << runs << ":full=" << full_scale;
  const std::uint64_t hash = spec_hash(desc.str());

  nlohmann::json summary;
  summary["experiment"] = experiment;
  summary["seed"] = seed;
  summary["spec_hash"] = hash;
  summary["version"] = CTHMM_VERSION;

  std::ostringstream csv;
  csv << std::setprecision(10);
  bool threshold_ok = true;

  if (experiment == "learn5") {
    LearnSpec spec;
    spec.sigma = sigma;
    spec.mode = parse_mode(mode);
    spec.method = parse_method(method);
    spec.runs = runs;
    spec.seed = seed;
    spec.total_obs = obs_override > 0 ? obs_override : (full_scale ? 100000 : 10000);
    spec.interval_literal = interval_literal;
    const MetricReport report = run_learning_experiment(spec);
    summary["mean"] = report.mean;
    summary["std"] = report.std;
    csv << "experiment,sigma,mode,method,run,seed,spec_hash,version,error\n";
    for (std::size_t r = 0; r < report.per_run.size(); ++r)
      csv << "learn5," << sigma << "," << mode << "," << method << "," << r << ","
          << (seed + r) << "," << hash << "," << CTHMM_VERSION << ","
          << report.per_run[r] << "\n";
    if (check && sigma <= 0.25 && spec.mode == WeightMode::soft)
      threshold_ok = report.mean < 0.10;
  } else if (experiment == "decode5") {
    DecodeSpec spec;
    spec.sigma = sigma;
    spec.tau_s = tau_s;
    spec.runs = runs;
    spec.seed = seed;
    spec.total_obs = obs_override > 0 ? obs_override : (full_scale ? 10000 : 1000);
    spec.interval_literal = interval_literal;
    const DecodeExperimentResult result = run_decoding_experiment(spec);
    summary["continuous_mean"] = result.continuous_error.mean;
    summary["continuous_std"] = result.continuous_error.std;
    summary["observation_mean"] = result.observation_error.mean;
    summary["observation_std"] = result.observation_error.std;
    csv << "experiment,sigma,tau_s,run,seed,spec_hash,version,continuous_error,"
           "observation_error\n";
    for (std::size_t r = 0; r < result.continuous_error.per_run.size(); ++r)
      csv << "decode5," << sigma << "," << tau_s << "," << r << "," << (seed + r)
          << "," << hash << "," << CTHMM_VERSION << ","
          << result.continuous_error.per_run[r] << ","
          << result.observation_error.per_run[r] << "\n";
    if (check)
      threshold_ok = result.observation_error.mean < result.continuous_error.mean &&
                     result.continuous_error.mean < 0.8;
  } else if (experiment == "toy") {
    const ToyReport report = run_toy(seed);
    summary["matches_expected"] = report.matches_expected;
    csv << "experiment,seed,spec_hash,version,state,dwell\n";
    for (std::size_t i = 0; i < report.path.size(); ++i)
      csv << "toy," << seed << "," << hash << "," << CTHMM_VERSION << ","
          << (report.path[i] + 1) << "," << report.dwell(static_cast<Index>(i))
          << "\n";
    if (check) threshold_ok = report.matches_expected;
  } else if (experiment == "dwell-runtime") {
    DwellRuntimeSpec spec;
    spec.seed = seed;
    spec.repeats = runs;
    const auto rows = run_dwell_runtime(spec);
    csv << "experiment,seed,spec_hash,version,path_length,total_time,closed_s,"
           "expm_s,unif_s,eigen_s,eigen_failures,max_disagreement\n";
    for (const auto& row : rows) {
      csv << "dwell-runtime," << seed << "," << hash << "," << CTHMM_VERSION << ","
          << row.path_length << "," << row.total_time << ","
          << row.closed_form_seconds << "," << row.expm_seconds << ","
          << row.unif_seconds << "," << row.eigen_seconds << ","
          << row.eigen_failures << "," << row.max_disagreement << "\n";
      if (check)
        threshold_ok = threshold_ok &&
                       row.closed_form_seconds < row.expm_seconds &&
                       row.max_disagreement < 1e-5;
    }
    summary["rows"] = rows.size();
  } else {
    throw CLI::ValidationError(
        "--experiment must be learn5, decode5, toy or dwell-runtime");
  }

  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw Error("bench: cannot open " + out_path);
    out << csv.str();
    std::ofstream json_out(out_path + ".json");
    json_out << summary.dump(2) << "\n";
  } else {
    std::cout << csv.str();
  }
  std::cout << summary.dump(2) << "\n";
  if (check && !threshold_ok) {
    std::cerr << "acceptance threshold violated\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous-time hidden Markov model learning and decoding"};
  app.require_subcommand(1);

  // learn
  std::string data, model_out, model_init, method = "eigen", mode = "soft";
  int states = 5, max_iters = 500, grid_points = 101;
  double sigma = 0.25, tol = 1e-6, noise = 0.1;
  std::uint64_t seed = 7;
  bool freeze_emissions = false;
  auto* learn = app.add_subcommand("learn", "fit a model with EM");
  learn->add_option("--data", data, "observations csv")->required();
  learn->add_option("--model-out", model_out, "output model json")->required();
  learn->add_option("--model-init", model_init, "initial model json");
  learn->add_option("--states", states, "state count when no initial model given");
  learn->add_option("--sigma", sigma, "emission stddev when no initial model given");
  learn->add_option("--method", method, "expm | unif | eigen");
  learn->add_option("--mode", mode, "soft | hard");
  learn->add_option("--seed", seed, "rng seed");
  learn->add_option("--tol", tol, "relative log-likelihood tolerance");
  learn->add_option("--max-iters", max_iters, "iteration cap");
  learn->add_option("--noise", noise, "perturbation scale of the uniform init");
  learn->add_flag("--freeze-emissions", freeze_emissions,
                  "keep the initial emission parameters");

  // decode
  std::string model_path, out_path;
  auto* decode = app.add_subcommand("decode", "decode state trajectories");
  decode->add_option("--model", model_path, "model json")->required();
  decode->add_option("--data", data, "observations csv")->required();
  decode->add_option("--out", out_path, "output trajectory csv")->required();
  decode->add_option("--grid-points", grid_points, "dominance grid resolution");

  // path-prob
  std::string path_text;
  double t_arg = 1.0;
  auto* path_prob = app.add_subcommand("path-prob",
                                       "probability of a state sequence over time t");
  path_prob->add_option("--model", model_path, "model json")->required();
  path_prob->add_option("--path", path_text, "comma-separated 1-based states")->required();
  path_prob->add_option("--t", t_arg, "total time")->required();

  // dwell
  auto* dwell = app.add_subcommand("dwell", "expected dwell times along a path");
  dwell->add_option("--model", model_path, "model json")->required();
  dwell->add_option("--path", path_text, "comma-separated 1-based states")->required();
  dwell->add_option("--t", t_arg, "total time")->required();
  dwell->add_option("--method", method, "expm | unif | eigen");

  // simulate
  int subjects = 50;
  double horizon = 20.0, obs_interval = 0.5;
  auto* simulate = app.add_subcommand("simulate", "sample observation sequences");
  simulate->add_option("--model", model_path, "model json")->required();
  simulate->add_option("--subjects", subjects, "number of sequences");
  simulate->add_option("--horizon", horizon, "duration per sequence");
  simulate->add_option("--obs-interval", obs_interval, "observation spacing");
  simulate->add_option("--out", out_path, "output csv")->required();
  simulate->add_option("--seed", seed, "rng seed");

  // bench
  std::string experiment;
  double tau_s = 0.5;
  int runs = 5;
  long obs_override = 0;
  bool full_scale = false, check = false, interval_literal = false;
  auto* bench = app.add_subcommand("bench", "run a simulation experiment");
  bench->add_option("--experiment", experiment,
                    "learn5 | decode5 | toy | dwell-runtime")->required();
  bench->add_option("--sigma", sigma, "observation noise");
  bench->add_option("--tau-s", tau_s, "decoding sampling factor");
  bench->add_option("--mode", mode, "soft | hard");
  bench->add_option("--method", method, "expm | unif | eigen");
  bench->add_option("--runs", runs, "number of random runs");
  bench->add_option("--seed", seed, "base rng seed");
  bench->add_option("--out", out_path, "csv output path (json summary alongside)");
  bench->add_option("--obs", obs_override, "override the observation budget");
  bench->add_flag("--full-scale", full_scale, "paper-scale observation budget");
  bench->add_flag("--check", check, "exit 2 on acceptance-threshold violation");
  bench->add_flag("--interval-literal", interval_literal,
                  "use the literal tau_s * max(q) observation interval");

  CLI11_PARSE(app, argc, argv);

  try {
    if (learn->parsed())
      return cmd_learn(data, model_out, model_init, states, sigma, method, mode, seed,
                       tol, max_iters, freeze_emissions, noise);
    if (decode->parsed()) return cmd_decode(model_path, data, out_path, grid_points);
    if (path_prob->parsed()) return cmd_path_prob(model_path, path_text, t_arg);
    if (dwell->parsed()) return cmd_dwell(model_path, path_text, t_arg, method);
    if (simulate->parsed())
      return cmd_simulate(model_path, subjects, horizon, obs_interval, out_path, seed);
    if (bench->parsed())
      return cmd_bench(experiment, sigma, tau_s, mode, method, runs, seed, out_path,
                       full_scale, check, interval_literal, obs_override);
  } catch (const cthmm::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
