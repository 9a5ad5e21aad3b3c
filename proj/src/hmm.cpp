#include "cthmm/hmm.hpp"

#include "cthmm/matexp.hpp"

#include <cmath>
#include <limits>

namespace cthmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) acc += std::exp(v(i) - m);
  return m + std::log(acc);
}

Matrix log_clamped(const Matrix& p) {
  Matrix out(p.rows(), p.cols());
  for (Index i = 0; i < p.rows(); ++i)
    for (Index j = 0; j < p.cols(); ++j)
      out(i, j) = p(i, j) > 0.0 ? std::log(p(i, j)) : kNegInf;
  return out;
}

// Log emission densities, one row per observation, one column per state.
Matrix emission_table(const CTHMMModel& model, const ObservationSequence& seq) {
  const Index v_count = static_cast<Index>(seq.times.size());
  const Index n = model.rates.dim();
  Matrix table(v_count, n);
  for (Index v = 0; v < v_count; ++v)
    for (Index s = 0; s < n; ++s)
      table(v, s) = emission_log_density(model.emissions[static_cast<std::size_t>(s)],
                                         seq.values.row(v).transpose());
  return table;
}

}  // namespace

double emission_log_density(const GaussianEmission& emission,
                            const Eigen::Ref<const Vector>& value) {
  constexpr double kLogTwoPi = 1.8378770664093454836;
  double acc = 0.0;
  for (Index d = 0; d < emission.mean.size(); ++d) {
    const double z = (value(d) - emission.mean(d)) / emission.stddev(d);
    acc += -0.5 * kLogTwoPi - std::log(emission.stddev(d)) - 0.5 * z * z;
  }
  return acc;
}

CTHMMModel make_model(RateMatrix rates, std::vector<GaussianEmission> emissions,
                      Vector initial) {
  const Index n = rates.dim();
  if (static_cast<Index>(emissions.size()) != n)
    throw DimensionMismatch("make_model: one emission distribution per state required");
  const Index dims = emissions.empty() ? 0 : emissions.front().mean.size();
  for (const auto& e : emissions) {
    if (e.mean.size() != dims || e.stddev.size() != dims)
      throw DimensionMismatch("make_model: inconsistent emission dimensions");
    if ((e.stddev.array() <= 0.0).any())
      throw Error("make_model: emission stddev must be positive");
  }
  if (initial.size() != n)
    throw DimensionMismatch("make_model: initial distribution dimension mismatch");
  if ((initial.array() < 0.0).any() || std::abs(initial.sum() - 1.0) > 1e-12)
    throw Error("make_model: initial distribution must be a probability vector");
  return CTHMMModel{std::move(rates), std::move(emissions), std::move(initial)};
}

void validate_sequence(const CTHMMModel& model, const ObservationSequence& seq) {
  if (seq.times.empty()) throw NoData("sequence has no observations");
  if (static_cast<Index>(seq.times.size()) != seq.values.rows())
    throw DimensionMismatch("sequence times/values length mismatch");
  if (seq.values.cols() != model.emissions.front().mean.size())
    throw DimensionMismatch("sequence value dimension does not match emission model");
  if (!seq.values.allFinite()) throw NonFinite("sequence has non-finite values");
  for (std::size_t v = 1; v < seq.times.size(); ++v)
    if (!(seq.times[v] > seq.times[v - 1]))
      throw Error("sequence times must be strictly increasing");
}

std::map<double, Matrix> interval_transitions(
    const CTHMMModel& model, const std::vector<ObservationSequence>& seqs) {
  std::map<double, Matrix> table;
  for (const auto& seq : seqs)
    for (std::size_t v = 1; v < seq.times.size(); ++v)
      table.emplace(seq.times[v] - seq.times[v - 1], Matrix());
  for (auto& [tau, p] : table) p = transition_matrix(model.rates, tau);
  return table;
}

ForwardBackwardResult forward_backward(const CTHMMModel& model,
                                       const ObservationSequence& seq) {
  return forward_backward(model, seq, interval_transitions(model, {seq}));
}

ForwardBackwardResult forward_backward(const CTHMMModel& model,
                                       const ObservationSequence& seq,
                                       const std::map<double, Matrix>& ptau) {
  validate_sequence(model, seq);
  const Index n = model.rates.dim();
  const Index v_count = static_cast<Index>(seq.times.size());
  const Index intervals = v_count - 1;

  const Matrix logem = emission_table(model, seq);
  std::vector<Matrix> logp(static_cast<std::size_t>(intervals));
  for (Index v = 0; v < intervals; ++v) {
    const double tau = seq.times[static_cast<std::size_t>(v + 1)] -
                       seq.times[static_cast<std::size_t>(v)];
    auto found = ptau.find(tau);
    logp[static_cast<std::size_t>(v)] =
        log_clamped(found != ptau.end() ? found->second
                                        : transition_matrix(model.rates, tau));
  }

  Matrix alpha(v_count, n);
  Matrix beta(v_count, n);
  for (Index s = 0; s < n; ++s)
    alpha(0, s) = (model.initial(s) > 0.0 ? std::log(model.initial(s)) : kNegInf) +
                  logem(0, s);
  Vector scratch(n);
  for (Index v = 1; v < v_count; ++v) {
    const Matrix& lp = logp[static_cast<std::size_t>(v - 1)];
    for (Index l = 0; l < n; ++l) {
      for (Index k = 0; k < n; ++k) scratch(k) = alpha(v - 1, k) + lp(k, l);
      alpha(v, l) = logsumexp(scratch) + logem(v, l);
    }
  }
  const double log_likelihood = logsumexp(alpha.row(v_count - 1).transpose());
  if (!std::isfinite(log_likelihood))
    throw ZeroLikelihood("forward_backward: all state paths have zero probability");

  beta.row(v_count - 1).setZero();
  for (Index v = v_count - 2; v >= 0; --v) {
    const Matrix& lp = logp[static_cast<std::size_t>(v)];
    for (Index k = 0; k < n; ++k) {
      for (Index l = 0; l < n; ++l)
        scratch(l) = lp(k, l) + logem(v + 1, l) + beta(v + 1, l);
      beta(v, k) = logsumexp(scratch);
    }
  }

  ForwardBackwardResult out;
  out.log_likelihood = log_likelihood;
  out.unary.resize(v_count, n);
  for (Index v = 0; v < v_count; ++v)
    for (Index s = 0; s < n; ++s)
      out.unary(v, s) = std::exp(alpha(v, s) + beta(v, s) - log_likelihood);

  out.pair_weights.reserve(static_cast<std::size_t>(intervals));
  for (Index v = 0; v < intervals; ++v) {
    const Matrix& lp = logp[static_cast<std::size_t>(v)];
    Matrix w(n, n);
    for (Index k = 0; k < n; ++k)
      for (Index l = 0; l < n; ++l)
        w(k, l) = std::exp(alpha(v, k) + lp(k, l) + logem(v + 1, l) +
                           beta(v + 1, l) - log_likelihood);
    out.pair_weights.push_back(std::move(w));
  }
  return out;
}

ViterbiResult viterbi(const CTHMMModel& model, const ObservationSequence& seq) {
  return viterbi(model, seq, interval_transitions(model, {seq}));
}

ViterbiResult viterbi(const CTHMMModel& model, const ObservationSequence& seq,
                      const std::map<double, Matrix>& ptau) {
  validate_sequence(model, seq);
  const Index n = model.rates.dim();
  const Index v_count = static_cast<Index>(seq.times.size());

  const Matrix logem = emission_table(model, seq);
  Matrix score(v_count, n);
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> back(v_count, n);
  for (Index s = 0; s < n; ++s)
    score(0, s) = (model.initial(s) > 0.0 ? std::log(model.initial(s)) : kNegInf) +
                  logem(0, s);

  for (Index v = 1; v < v_count; ++v) {
    const double tau = seq.times[static_cast<std::size_t>(v)] -
                       seq.times[static_cast<std::size_t>(v - 1)];
    auto found = ptau.find(tau);
    const Matrix lp = log_clamped(found != ptau.end()
                                      ? found->second
                                      : transition_matrix(model.rates, tau));
    for (Index l = 0; l < n; ++l) {
      double best = kNegInf;
      Index arg = 0;
      for (Index k = 0; k < n; ++k) {
        const double cand = score(v - 1, k) + lp(k, l);
        if (cand > best) {
          best = cand;
          arg = k;
        }
      }
      score(v, l) = best + logem(v, l);
      back(v, l) = arg;
    }
  }

  double best = kNegInf;
  Index arg = 0;
  for (Index s = 0; s < n; ++s) {
    if (score(v_count - 1, s) > best) {
      best = score(v_count - 1, s);
      arg = s;
    }
  }
  if (!std::isfinite(best))
    throw ZeroLikelihood("viterbi: all state paths have zero probability");

  ViterbiResult out;
  out.log_score = best;
  out.states.resize(static_cast<std::size_t>(v_count));
  out.states.back() = arg;
  for (Index v = v_count - 1; v > 0; --v)
    out.states[static_cast<std::size_t>(v - 1)] =
        back(v, out.states[static_cast<std::size_t>(v)]);
  return out;
}

Index predict_state(const CTHMMModel& model, Index current, double horizon) {
  if (horizon < 0.0) throw NegativeTime("predict_state: horizon must be nonnegative");
  if (current < 0 || current >= model.rates.dim())
    throw Error("predict_state: state out of range");
  const Matrix p = transition_matrix(model.rates, horizon);
  Index best = 0;
  for (Index j = 1; j < p.cols(); ++j)
    if (p(current, j) > p(current, best)) best = j;
  return best;
}

}  // namespace cthmm
