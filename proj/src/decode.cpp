#include "cthmm/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cthmm {

namespace {

constexpr double kDistinctTolerance = 1e-6;

double clamp_probability(double p) { return std::min(1.0, std::max(0.0, p)); }

void check_path_feasible(const std::vector<Index>& path, const RateMatrix& q) {
  if (path.empty()) throw Error("path must be non-empty");
  for (Index s : path)
    if (s < 0 || s >= q.dim()) throw Error("path state out of range");
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (path[i] == path[i - 1])
      throw Error("path has repeated consecutive states");
    if (!q.edge_mask()(path[i - 1], path[i])) {
      std::ostringstream msg;
      msg << "path uses disallowed edge (" << path[i - 1] << ", " << path[i] << ")";
      throw EdgeViolation(msg.str());
    }
  }
}

double log_jump_product(const std::vector<Index>& path, const RateMatrix& q) {
  const Vector holding = holding_params(q);
  double acc = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double rate = q(path[i - 1], path[i]);
    const double qi = holding(path[i - 1]);
    if (rate <= 0.0 || qi <= 0.0)
      return -std::numeric_limits<double>::infinity();
    acc += std::log(rate / qi);
  }
  return acc;
}

// First-passage values on a uniform grid through repeated multiplication of
// the first unit row by exp(chain * step); entries stay nonnegative so the
// propagation does not cancel.
Vector first_passage_grid_expm(const AuxiliaryChain& chain, const Vector& grid) {
  const Index dim = chain.matrix.rows();
  const Index target = dim - 2;  // position n of the n+1-dim chain, 0-based
  const double step = grid(1) - grid(0);
  const Matrix stepper = expm(chain.matrix * step);
  Vector out(grid.size());
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(dim);
  row(0) = 1.0;
  out(0) = row(target);
  for (Index g = 1; g < grid.size(); ++g) {
    row = row * stepper;
    out(g) = clamp_probability(row(target));
  }
  return out;
}

bool grid_is_uniform(const Vector& grid) {
  if (grid.size() < 2) return true;
  const double step = grid(1) - grid(0);
  for (Index g = 1; g < grid.size(); ++g) {
    const double expected = grid(0) + step * double(g);
    if (std::abs(grid(g) - expected) > 1e-12 * std::max(1.0, std::abs(grid(g))))
      return false;
  }
  return true;
}

Vector first_passage_grid(const std::vector<Index>& path, const RateMatrix& q,
                          const Vector& grid) {
  const Vector holding = holding_params(q);
  Vector q_path(static_cast<Index>(path.size()));
  for (std::size_t i = 0; i < path.size(); ++i)
    q_path(static_cast<Index>(i)) = holding(path[i]);

  Vector out(grid.size());
  if (path.size() == 1) {
    for (Index g = 0; g < grid.size(); ++g)
      out(g) = std::exp(-q_path(0) * grid(g));
    return out;
  }
  if (rates_usable_for_closed_form(q_path)) {
    try {
      for (Index g = 0; g < grid.size(); ++g)
        out(g) = closed_form_first_passage(q_path, grid(g));
      return out;
    } catch (const RatesNotDistinct&) {
      // precision loss detected mid-grid: redo everything on the expm route
    }
  }
  const AuxiliaryChain chain = auxiliary_matrix(path, q);
  if (grid_is_uniform(grid)) return first_passage_grid_expm(chain, grid);
  for (Index g = 0; g < grid.size(); ++g)
    out(g) = first_passage_expm(chain, grid(g));
  return out;
}

}  // namespace

bool rates_usable_for_closed_form(const Vector& q_path) {
  if (q_path.size() == 0) return false;
  if ((q_path.array() <= 0.0).any()) return false;
  const double scale = q_path.maxCoeff();
  for (Index i = 0; i < q_path.size(); ++i)
    for (Index j = i + 1; j < q_path.size(); ++j)
      if (std::abs(q_path(i) - q_path(j)) <= kDistinctTolerance * scale)
        return false;
  return true;
}

double closed_form_first_passage(const Vector& q_path, double t) {
  if (t < 0.0) throw NegativeTime("closed_form_first_passage: t must be nonnegative");
  const Index n = q_path.size();
  if (n == 1) {
    if (!(q_path(0) > 0.0))
      throw RatesNotDistinct("closed_form_first_passage: rates must be positive");
    return std::exp(-q_path(0) * t);
  }
  if (!rates_usable_for_closed_form(q_path))
    throw RatesNotDistinct("closed_form_first_passage: rates not distinct enough");

  double sum = 0.0;
  double magnitude = 0.0;  // cancellation gauge: absolute sum of the terms
  for (Index i = 0; i < n; ++i) {
    double coeff = q_path(i) / q_path(n - 1);
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      coeff *= q_path(j) / (q_path(j) - q_path(i));
    }
    const double term = coeff * std::exp(-q_path(i) * t);
    sum += term;
    magnitude += std::abs(term);
  }
  if (magnitude * 2.2e-16 > 1e-10)
    throw RatesNotDistinct(
        "closed_form_first_passage: partial fractions lost precision");
  return clamp_probability(sum);
}

AuxiliaryChain auxiliary_matrix(const std::vector<Index>& path, const RateMatrix& q) {
  check_path_feasible(path, q);
  const Vector holding = holding_params(q);
  const Index n = static_cast<Index>(path.size());

  AuxiliaryChain chain;
  chain.q_path.resize(n);
  for (Index i = 0; i < n; ++i) chain.q_path(i) = holding(path[static_cast<std::size_t>(i)]);

  chain.matrix = Matrix::Zero(n + 1, n + 1);
  for (Index i = 0; i < n; ++i) {
    chain.matrix(i, i) = -chain.q_path(i);
    chain.matrix(i, i + 1) = chain.q_path(i);
  }
  return chain;
}

double first_passage_expm(const AuxiliaryChain& chain, double t) {
  if (t < 0.0) throw NegativeTime("first_passage_expm: t must be nonnegative");
  const Index n = chain.q_path.size();
  return clamp_probability(expm(chain.matrix * t)(0, n - 1));
}

double path_probability(const std::vector<Index>& path, const RateMatrix& q, double t) {
  check_path_feasible(path, q);
  if (t < 0.0) throw NegativeTime("path_probability: t must be nonnegative");

  const Vector holding = holding_params(q);
  if (path.size() == 1) return std::exp(-holding(path[0]) * t);

  const double log_v = log_jump_product(path, q);
  if (!std::isfinite(log_v)) return 0.0;

  Vector q_path(static_cast<Index>(path.size()));
  for (std::size_t i = 0; i < path.size(); ++i)
    q_path(static_cast<Index>(i)) = holding(path[i]);

  const double passage = rates_usable_for_closed_form(q_path)
                             ? closed_form_first_passage(q_path, t)
                             : first_passage_expm(auxiliary_matrix(path, q), t);
  return std::exp(log_v) * passage;
}

Vector path_prob_grid(const std::vector<Index>& path, const RateMatrix& q,
                      const Vector& grid) {
  check_path_feasible(path, q);
  if (grid.size() < 1 || grid(0) != 0.0)
    throw Error("path_prob_grid: grid must start at 0");
  for (Index g = 1; g < grid.size(); ++g)
    if (!(grid(g) > grid(g - 1)))
      throw Error("path_prob_grid: grid must be strictly increasing");

  const double log_v = log_jump_product(path, q);
  if (!std::isfinite(log_v)) return Vector::Zero(grid.size());
  return std::exp(log_v) * first_passage_grid(path, q, grid);
}

namespace {

struct SSACandidate {
  std::vector<Index> states;
  Vector prob_grid;
  double log_v_product = 0.0;
  bool dominated = false;
};

// Strict dominance at every interior grid point.
bool dominates(const Vector& a, const Vector& b) {
  for (Index g = 1; g + 1 < a.size(); ++g)
    if (!(a(g) > b(g))) return false;
  return true;
}

}  // namespace

PathCandidate ssa_search(const RateMatrix& q, Index start, Index end,
                         double total_time, const SSAConfig& config) {
  const Index n = q.dim();
  if (start < 0 || start >= n || end < 0 || end >= n)
    throw Error("ssa_search: state out of range");
  if (!(total_time > 0.0)) throw Error("ssa_search: total_time must be positive");
  if (config.grid_points < 3) throw Error("ssa_search: need at least 3 grid points");

  Vector grid(config.grid_points);
  for (int g = 0; g < config.grid_points; ++g)
    grid(g) = total_time * double(g) / double(config.grid_points - 1);

  const Vector holding = holding_params(q);
  std::vector<SSACandidate> candidates;
  std::vector<std::vector<std::size_t>> by_endpoint(static_cast<std::size_t>(n));

  candidates.push_back(SSACandidate{{start},
                                    path_prob_grid({start}, q, grid),
                                    0.0,
                                    false});
  by_endpoint[static_cast<std::size_t>(start)].push_back(0);

  std::vector<std::size_t> level{0};
  while (!level.empty()) {
    std::vector<std::size_t> next_level;
    for (const std::size_t parent_id : level) {
      if (candidates[parent_id].dominated) continue;
      const Index tail = candidates[parent_id].states.back();
      if (holding(tail) <= 0.0) continue;  // absorbing endpoint cannot extend

      for (Index s = 0; s < n; ++s) {
        if (s == tail || !q.edge_mask()(tail, s) || q(tail, s) <= 0.0) continue;
        if (static_cast<int>(candidates[parent_id].states.size()) + 1 >
            config.max_path_length)
          throw BudgetExceeded("ssa_search: max path length exceeded");

        SSACandidate child;
        child.states = candidates[parent_id].states;
        child.states.push_back(s);
        child.log_v_product =
            candidates[parent_id].log_v_product + std::log(q(tail, s) / holding(tail));
        child.prob_grid =
            std::exp(child.log_v_product) * first_passage_grid(child.states, q, grid);

        auto& peers = by_endpoint[static_cast<std::size_t>(s)];
        bool child_dominated = false;
        for (const std::size_t peer_id : peers) {
          if (candidates[peer_id].dominated) continue;
          if (dominates(candidates[peer_id].prob_grid, child.prob_grid)) {
            child_dominated = true;
            break;
          }
        }
        if (child_dominated) continue;

        for (const std::size_t peer_id : peers) {
          if (candidates[peer_id].dominated) continue;
          if (dominates(child.prob_grid, candidates[peer_id].prob_grid))
            candidates[peer_id].dominated = true;
        }

        if (candidates.size() >= config.max_frontier)
          throw BudgetExceeded("ssa_search: frontier size exceeded");
        candidates.push_back(std::move(child));
        peers.push_back(candidates.size() - 1);
        next_level.push_back(candidates.size() - 1);
      }
    }
    level = std::move(next_level);
  }

  // Final selection recomputes P_T directly so that ties compare the same
  // doubles an exhaustive enumeration would.
  const std::size_t no_winner = std::numeric_limits<std::size_t>::max();
  std::size_t winner = no_winner;
  double winner_prob = -1.0;
  for (const std::size_t id : by_endpoint[static_cast<std::size_t>(end)]) {
    if (candidates[id].dominated) continue;
    const double p = path_probability(candidates[id].states, q, total_time);
    if (p > winner_prob ||
        (p == winner_prob &&
         std::lexicographical_compare(candidates[id].states.begin(),
                                      candidates[id].states.end(),
                                      candidates[winner].states.begin(),
                                      candidates[winner].states.end()))) {
      winner = id;
      winner_prob = p;
    }
  }
  if (winner == no_winner)
    throw Unreachable("ssa_search: no surviving path reaches the end state");

  return PathCandidate{candidates[winner].states, candidates[winner].prob_grid,
                       candidates[winner].log_v_product};
}

Vector expected_dwell_closed_form(const Vector& q_path, double t) {
  const Index n = q_path.size();
  if (n < 1) throw Error("expected_dwell_closed_form: empty path");
  if (!(t > 0.0)) throw Error("expected_dwell_closed_form: t must be positive");
  if (n == 1) return Vector::Constant(1, t);
  if (!rates_usable_for_closed_form(q_path))
    throw RatesNotDistinct("expected_dwell_closed_form: rates not distinct enough");

  // a(k, i): expansion coefficients of the first-passage density of the
  // prefix chain (q_1..q_k); filled along k by the recursion
  // a_{k,i} = a_{k-1,i} q_{k-1} / (q_k - q_i), with a_{k,k} computed directly.
  Matrix a = Matrix::Zero(n, n);
  a(0, 0) = 1.0;
  for (Index k = 1; k < n; ++k) {
    for (Index i = 0; i < k; ++i)
      a(k, i) = a(k - 1, i) * q_path(k - 1) / (q_path(k) - q_path(i));
    double direct = 1.0;
    for (Index m = 0; m < k; ++m) direct *= q_path(m) / (q_path(m) - q_path(k));
    a(k, k) = direct;
  }

  // b(k, j): coefficients of the suffix chain (q_k..q_n), filled downward by
  // b_{k,j} = b_{k+1,j} q_k / (q_k - q_j), with b_{k,k} computed directly.
  Matrix b = Matrix::Zero(n, n);
  b(n - 1, n - 1) = 1.0;
  for (Index k = n - 2; k >= 0; --k) {
    for (Index j = k + 1; j < n; ++j)
      b(k, j) = b(k + 1, j) * q_path(k) / (q_path(k) - q_path(j));
    double direct = q_path(k) / q_path(n - 1);
    for (Index m = k + 1; m < n; ++m) direct *= q_path(m) / (q_path(m) - q_path(k));
    b(k, k) = direct;
  }

  double denom = 0.0;
  for (Index i = 0; i < n; ++i) {
    double coeff = q_path(i) / q_path(n - 1);
    for (Index j = 0; j < n; ++j)
      if (j != i) coeff *= q_path(j) / (q_path(j) - q_path(i));
    denom += coeff * std::exp(-q_path(i) * t);
  }

  Vector dwell(n);
  for (Index k = 0; k < n; ++k) {
    double numer = t * a(k, k) * b(k, k) * std::exp(-q_path(k) * t);
    for (Index i = 0; i <= k; ++i) {
      for (Index j = k; j < n; ++j) {
        if (i == j) continue;
        numer += a(k, i) * b(k, j) *
                 (std::exp(-q_path(i) * t) - std::exp(-q_path(j) * t)) /
                 (q_path(j) - q_path(i));
      }
    }
    dwell(k) = numer / denom;
  }
  return dwell;
}

Vector expected_dwell_on_chain(const AuxiliaryChain& chain, double t,
                               ESCEMethod method, bool* eigen_fell_back) {
  const Index n = chain.q_path.size();
  if (eigen_fell_back) *eigen_fell_back = false;
  const RateMatrix aux = RateMatrix::validate(chain.matrix);
  const PairWeights weights = hard_pair(n + 1, 0, n - 1, t);

  ESCEAccumulator acc(n + 1);
  switch (method) {
    case ESCEMethod::expm:
      esce_expm(aux, weights, acc);
      break;
    case ESCEMethod::unif:
      esce_unif(aux, weights, acc, make_unif_table(aux, t));
      break;
    case ESCEMethod::eigen:
      try {
        esce_eigen(eig(aux.entries()), aux, weights, acc);
      } catch (const EigenUnstable&) {
        if (eigen_fell_back) *eigen_fell_back = true;
        acc = ESCEAccumulator(n + 1);
        esce_expm(aux, weights, acc);
      }
      break;
  }
  return acc.expected_durations.head(n);
}

Vector expected_dwell_esce(const std::vector<Index>& path, const RateMatrix& q,
                           double t, ESCEMethod method, bool* eigen_fell_back) {
  if (!(t > 0.0)) throw Error("expected_dwell_esce: t must be positive");
  return expected_dwell_on_chain(auxiliary_matrix(path, q), t, method, eigen_fell_back);
}

DecodedTrajectory viterbi_ssae(const CTHMMModel& model, const ObservationSequence& seq,
                               const SSAConfig& config) {
  const ViterbiResult outer = viterbi(model, seq);
  DecodedTrajectory out;

  for (std::size_t v = 0; v + 1 < seq.times.size(); ++v) {
    const double tau = seq.times[v + 1] - seq.times[v];
    const Index a = outer.states[v];
    const Index b = outer.states[v + 1];

    std::vector<Index> inner;
    if (a == b && tau <= 0.0) continue;
    try {
      inner = ssa_search(model.rates, a, b, tau, config).states;
    } catch (const Unreachable&) {
      std::ostringstream msg;
      msg << "viterbi_ssae: no feasible path between decoded states " << a << " and "
          << b;
      throw IntervalUnreachable(msg.str());
    }

    Vector q_inner(static_cast<Index>(inner.size()));
    const Vector holding = holding_params(model.rates);
    for (std::size_t i = 0; i < inner.size(); ++i)
      q_inner(static_cast<Index>(i)) = holding(inner[i]);
    const Vector dwell = (inner.size() > 1 && rates_usable_for_closed_form(q_inner))
                             ? expected_dwell_closed_form(q_inner, tau)
                             : (inner.size() == 1
                                    ? Vector::Constant(1, tau)
                                    : expected_dwell_esce(inner, model.rates, tau,
                                                          ESCEMethod::expm));

    std::size_t begin = 0;
    if (!out.states.empty() && out.states.back() == inner.front()) {
      out.dwell_times.back() += dwell(0);
      begin = 1;
    }
    for (std::size_t i = begin; i < inner.size(); ++i) {
      out.states.push_back(inner[i]);
      out.dwell_times.push_back(dwell(static_cast<Index>(i)));
    }
  }
  return out;
}

WellDefinedness perkins_well_defined(const RateMatrix& q) {
  const Index n = q.dim();
  const Vector holding = holding_params(q);

  struct Edge {
    Index from, to;
    double weight;  // negated log q_ij, shifted so zero-product cycles count
  };
  std::vector<Edge> edges;
  constexpr double kZeroCycleShift = 1e-9;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && q.edge_mask()(i, j) && q(i, j) > 0.0 && holding(i) > 0.0)
        edges.push_back({i, j, -(std::log(q(i, j)) + kZeroCycleShift)});

  // Bellman-Ford from a virtual source: a relaxation that still succeeds on
  // the n-th pass sits on a negative cycle of the shifted weights, i.e. a
  // cycle with jump-rate product >= 1.
  Vector dist = Vector::Zero(n);
  std::vector<Index> pred(static_cast<std::size_t>(n), -1);
  Index touched = -1;
  for (Index pass = 0; pass < n; ++pass) {
    touched = -1;
    for (const Edge& e : edges) {
      if (dist(e.from) + e.weight < dist(e.to) - 1e-15) {
        dist(e.to) = dist(e.from) + e.weight;
        pred[static_cast<std::size_t>(e.to)] = e.from;
        touched = e.to;
      }
    }
    if (touched < 0) break;
  }
  if (touched < 0) return WellDefinedness{true, {}};

  // Walk predecessors n steps to land inside the cycle, then collect it.
  Index cursor = touched;
  for (Index i = 0; i < n; ++i) cursor = pred[static_cast<std::size_t>(cursor)];
  std::vector<Index> cycle{cursor};
  for (Index walk = pred[static_cast<std::size_t>(cursor)]; walk != cursor;
       walk = pred[static_cast<std::size_t>(walk)])
    cycle.push_back(walk);
  std::reverse(cycle.begin(), cycle.end());
  cycle.push_back(cycle.front());
  return WellDefinedness{false, std::move(cycle)};
}

Vector perkins_ml_dwell(const std::vector<Index>& path, const RateMatrix& q, double t) {
  check_path_feasible(path, q);
  const Vector holding = holding_params(q);
  std::size_t slowest = 0;
  for (std::size_t i = 1; i < path.size(); ++i)
    if (holding(path[i]) < holding(path[slowest])) slowest = i;
  Vector dwell = Vector::Zero(static_cast<Index>(path.size()));
  dwell(static_cast<Index>(slowest)) = t;
  return dwell;
}

std::pair<std::vector<Index>, double> perkins_ml_path(const RateMatrix& q, Index start,
                                                      Index end, double t,
                                                      int max_jumps) {
  const Index n = q.dim();
  if (start < 0 || start >= n || end < 0 || end >= n)
    throw Error("perkins_ml_path: state out of range");
  if (max_jumps < 0) throw Error("perkins_ml_path: max_jumps must be nonnegative");
  const WellDefinedness wd = perkins_well_defined(q);
  if (!wd.well_defined)
    throw IllDefined("perkins_ml_path: maximum-likelihood trajectories do not exist");

  const Vector holding = holding_params(q);
  // The minimum holding rate along a path is always one of the state rates,
  // so the DP tracks it by state index of the minimizer's value.
  std::vector<double> qvals(holding.data(), holding.data() + n);
  std::sort(qvals.begin(), qvals.end());
  qvals.erase(std::unique(qvals.begin(), qvals.end()), qvals.end());
  const auto q_index = [&](double value) {
    return static_cast<Index>(std::lower_bound(qvals.begin(), qvals.end(), value) -
                              qvals.begin());
  };
  const Index m = static_cast<Index>(qvals.size());

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  // score[j][s * m + v] = best log jump-rate product over paths of j jumps
  // ending at s whose minimum holding rate is qvals[v].
  std::vector<Matrix> score(static_cast<std::size_t>(max_jumps) + 1,
                            Matrix::Constant(n, m, kNegInf));
  std::vector<Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>> prev_state, prev_min;
  for (int j = 0; j <= max_jumps; ++j) {
    prev_state.emplace_back(
        Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, m, -1));
    prev_min.emplace_back(
        Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, m, -1));
  }
  score[0](start, q_index(holding(start))) = 0.0;

  for (int j = 0; j < max_jumps; ++j) {
    for (Index s = 0; s < n; ++s) {
      for (Index v = 0; v < m; ++v) {
        const double base = score[static_cast<std::size_t>(j)](s, v);
        if (base == kNegInf) continue;
        for (Index next = 0; next < n; ++next) {
          if (next == s || !q.edge_mask()(s, next) || q(s, next) <= 0.0) continue;
          const Index vnext = std::min(v, q_index(holding(next)));
          const double cand = base + std::log(q(s, next));
          Matrix& tier = score[static_cast<std::size_t>(j) + 1];
          if (cand > tier(next, vnext)) {
            tier(next, vnext) = cand;
            prev_state[static_cast<std::size_t>(j) + 1](next, vnext) = s;
            prev_min[static_cast<std::size_t>(j) + 1](next, vnext) = v;
          }
        }
      }
    }
  }

  double best = kNegInf;
  int best_jumps = -1;
  Index best_min = -1;
  for (int j = 0; j <= max_jumps; ++j) {
    for (Index v = 0; v < m; ++v) {
      const double s = score[static_cast<std::size_t>(j)](end, v);
      if (s == kNegInf) continue;
      const double value = s - qvals[static_cast<std::size_t>(v)] * t;
      if (value > best) {
        best = value;
        best_jumps = j;
        best_min = v;
      }
    }
  }
  if (best_jumps < 0)
    throw Unreachable("perkins_ml_path: end state not reachable within max_jumps");

  std::vector<Index> path(static_cast<std::size_t>(best_jumps) + 1);
  Index s = end;
  Index v = best_min;
  for (int j = best_jumps; j > 0; --j) {
    path[static_cast<std::size_t>(j)] = s;
    const Index ps = prev_state[static_cast<std::size_t>(j)](s, v);
    const Index pv = prev_min[static_cast<std::size_t>(j)](s, v);
    s = ps;
    v = pv;
  }
  path[0] = s;
  return {std::move(path), best};
}

}  // namespace cthmm
