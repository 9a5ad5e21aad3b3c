#pragma once

#include "cthmm/ctmc.hpp"
#include "cthmm/matexp.hpp"

#include <vector>

namespace cthmm {

enum class ESCEMethod { expm, unif, eigen };
enum class WeightMode { soft, hard };

/// Posterior mass of end-state pairs over one observation interval. Entry
/// (k, l) weights the expectations conditioned on starting the interval in k
/// and ending it in l. Weights from a single interval sum to 1 (soft) or put
/// all mass on one pair (hard); pooled weights carry the pooled mass.
struct PairWeights {
  Matrix weights;
  double interval = 0.0;
};

PairWeights hard_pair(Index dim, Index start, Index end, double interval);

/// Running totals of E[n_ij | O, T, Q0] and E[tau_i | O, T, Q0]. Merging is
/// associative and commutative, so per-interval accumulators computed
/// independently can be summed afterward.
struct ESCEAccumulator {
  Matrix expected_transitions;
  Vector expected_durations;

  explicit ESCEAccumulator(Index dim)
      : expected_transitions(Matrix::Zero(dim, dim)),
        expected_durations(Vector::Zero(dim)) {}

  Index dim() const { return expected_durations.size(); }
  void merge(const ESCEAccumulator& other);
};

/// Truncation point M = ceil(4 + 6 sqrt(q_hat t) + q_hat t) of the
/// uniformization series.
long truncation_point(double q_hat, double t);

/// Expm method: one convolution integral per state and per edge, evaluated
/// through the block-matrix exponential, then aggregated with the weights.
void esce_expm(const RateMatrix& q, const PairWeights& weights, ESCEAccumulator& acc);

/// Shared uniformization inputs: R = Q / q_hat + I and its powers up to the
/// truncation point of the largest interval. Powers are left empty when the
/// table would exceed `memory_cap_doubles`; computations then rebuild the
/// needed row/column propagations per end-state pair.
struct UnifTable {
  double q_hat = 0.0;
  Matrix r;
  std::vector<Matrix> powers;
  long truncation_cap = 1000000;
};

UnifTable make_unif_table(const RateMatrix& q, double max_interval,
                          long truncation_cap = 1000000,
                          std::size_t memory_cap_doubles = std::size_t(1) << 27);

/// Uniformization method: double-sum series per end-state pair, truncated at
/// M for the interval. Hard weights touch a single pair in O(M^2) per
/// quantity; soft weights loop over every pair with nonzero mass.
void esce_unif(const RateMatrix& q, const PairWeights& weights, ESCEAccumulator& acc,
               const UnifTable& table);

/// Difference-quotient matrix of the eigendecomposition method. Entries with
/// eigenvalue gap below 1e-9 * max(1, |lambda_p|) take the equal-eigenvalue
/// branch t e^{t lambda_p}.
ComplexMatrix eigen_psi(const ComplexVector& eigenvalues, double t);

/// Eigendecomposition method: builds Psi and the weight ratio matrix F, then
/// reduces every per-state and per-edge aggregate to Hadamard sums around the
/// two matrix products U^T F V^T and V^T (Psi o B) U^T. Throws EigenUnstable
/// when the decomposition is too ill-conditioned or the imaginary residue of
/// an aggregate exceeds 1e-8, signalling the caller to fall back.
void esce_eigen(const EigenDecomposition& decomp, const RateMatrix& q,
                const PairWeights& weights, ESCEAccumulator& acc);

}  // namespace cthmm
