#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace cthmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

/// Base class of all errors thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rate-matrix validation.
struct NegativeRate final : Error { using Error::Error; };
struct RowSumViolation final : Error { using Error::Error; };
struct EdgeViolation final : Error { using Error::Error; };

// Kernel-level failures.
struct NonFinite final : Error { using Error::Error; };
struct NegativeTime final : Error { using Error::Error; };
struct DimensionMismatch final : Error { using Error::Error; };
struct DecompositionFailed final : Error { using Error::Error; };

// Expectation computations.
struct DegenerateTransition final : Error { using Error::Error; };
struct TruncationOverflow final : Error { using Error::Error; };
struct EigenUnstable final : Error { using Error::Error; };

// Likelihood evaluation and EM.
struct ZeroRateTransition final : Error { using Error::Error; };
struct ZeroLikelihood final : Error { using Error::Error; };
struct NoData final : Error { using Error::Error; };
struct NonIncreasingLikelihood final : Error { using Error::Error; };

// Decoding.
struct RatesNotDistinct final : Error { using Error::Error; };
struct Unreachable final : Error { using Error::Error; };
struct BudgetExceeded final : Error { using Error::Error; };
struct IllDefined final : Error { using Error::Error; };
struct IntervalUnreachable final : Error { using Error::Error; };

}  // namespace cthmm
