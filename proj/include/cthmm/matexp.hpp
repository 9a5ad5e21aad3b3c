#pragma once

#include "cthmm/types.hpp"

namespace cthmm {

/// Condition-number threshold above which an eigendecomposition is reported
/// as unusable for downstream expectation computations.
inline constexpr double kIllConditionedThreshold = 1e8;

/// Full complex eigendecomposition of a real square matrix,
/// A = right_vectors * diag(eigenvalues) * inverse_vectors.
struct EigenDecomposition {
  ComplexVector eigenvalues;
  ComplexMatrix right_vectors;    // U, columns are right eigenvectors
  ComplexMatrix inverse_vectors;  // V = U^{-1}
  double condition = 0.0;         // kappa_1(U) = ||U||_1 ||U^{-1}||_1
  bool balanced = false;
};

/// Matrix exponential by degree-13 Pade approximation with scaling and
/// squaring; the scaling power is chosen so the scaled 1-norm is <= 5.4.
Matrix expm(const Matrix& a);

/// Eigendecomposition with optional Osborne diagonal balancing. An
/// ill-conditioned result is not an error; callers inspect `condition`.
EigenDecomposition eig(const Matrix& a, bool balance = true);

/// Evaluates the convolution integral of e^{Qx} B e^{Q(t-x)} over [0, t] as
/// the upper-right block of the exponential of [[Q, B], [0, Q]] * t.
Matrix vanloan_integral(const Matrix& q, const Matrix& b, double t);

}  // namespace cthmm
