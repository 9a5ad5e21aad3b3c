#include "cthmm/matexp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace cthmm {

namespace {

constexpr double kPade13[] = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0,  129060195264000.0,   10559470521600.0,
    670442572800.0,      33522128640.0,       1323241920.0,
    40840800.0,          960960.0,            16380.0,
    182.0,               1.0};

constexpr double kTheta13 = 5.4;

double one_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

double one_norm(const ComplexMatrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Osborne-style diagonal balancing with radix-2 scale factors. Rewrites `a`
// in place as D^{-1} A D and returns the diagonal of D.
Vector balance_in_place(Matrix& a) {
  const Index n = a.rows();
  Vector d = Vector::Ones(n);
  constexpr double radix = 2.0;
  constexpr double radix_sq = radix * radix;
  bool converged = false;
  while (!converged) {
    converged = true;
    for (Index i = 0; i < n; ++i) {
      double col = 0.0;
      double row = 0.0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        col += std::abs(a(j, i));
        row += std::abs(a(i, j));
      }
      if (col == 0.0 || row == 0.0) continue;
      const double total = col + row;
      double factor = 1.0;
      double target = row / radix;
      while (col < target) {
        factor *= radix;
        col *= radix_sq;
      }
      target = row * radix;
      while (col >= target) {
        factor /= radix;
        col /= radix_sq;
      }
      if ((col + row) / factor < 0.95 * total) {
        converged = false;
        d(i) *= factor;
        a.row(i) /= factor;
        a.col(i) *= factor;
      }
    }
  }
  return d;
}

}  // namespace

Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols())
    throw DimensionMismatch("expm: matrix must be square");
  if (!a.allFinite()) throw NonFinite("expm: matrix has non-finite entries");

  const Index n = a.rows();
  const double norm = one_norm(a);
  int squarings = 0;
  if (norm > kTheta13)
    squarings = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  const Matrix scaled = a / std::ldexp(1.0, squarings);

  const Matrix a2 = scaled * scaled;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a2 * a4;
  const Matrix ident = Matrix::Identity(n, n);

  const Matrix u = scaled * (a6 * (kPade13[13] * a6 + kPade13[11] * a4 + kPade13[9] * a2) +
                             kPade13[7] * a6 + kPade13[5] * a4 + kPade13[3] * a2 +
                             kPade13[1] * ident);
  const Matrix v = a6 * (kPade13[12] * a6 + kPade13[10] * a4 + kPade13[8] * a2) +
                   kPade13[6] * a6 + kPade13[4] * a4 + kPade13[2] * a2 +
                   kPade13[0] * ident;

  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

EigenDecomposition eig(const Matrix& a, bool balance) {
  if (a.rows() != a.cols())
    throw DimensionMismatch("eig: matrix must be square");
  if (!a.allFinite()) throw NonFinite("eig: matrix has non-finite entries");

  Matrix work = a;
  Vector scales;
  if (balance) scales = balance_in_place(work);

  Eigen::EigenSolver<Matrix> solver(work, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success)
    throw DecompositionFailed("eig: QR iteration did not converge");

  EigenDecomposition out;
  out.balanced = balance;
  out.eigenvalues = solver.eigenvalues();
  out.right_vectors = solver.eigenvectors();
  if (balance)
    out.right_vectors = scales.asDiagonal() * out.right_vectors;
  for (Index j = 0; j < out.right_vectors.cols(); ++j) {
    const double len = out.right_vectors.col(j).norm();
    if (len > 0.0) out.right_vectors.col(j) /= len;
  }

  Eigen::PartialPivLU<ComplexMatrix> lu(out.right_vectors);
  out.inverse_vectors = lu.inverse();
  if (out.inverse_vectors.allFinite()) {
    out.condition = one_norm(out.right_vectors) * one_norm(out.inverse_vectors);
  } else {
    out.condition = std::numeric_limits<double>::infinity();
  }
  return out;
}

Matrix vanloan_integral(const Matrix& q, const Matrix& b, double t) {
  if (q.rows() != q.cols() || b.rows() != b.cols() || q.rows() != b.rows())
    throw DimensionMismatch("vanloan_integral: Q and B must be square with equal dimensions");
  if (t < 0.0) throw NegativeTime("vanloan_integral: t must be nonnegative");

  const Index n = q.rows();
  Matrix block = Matrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = q;
  block.topRightCorner(n, n) = b;
  block.bottomRightCorner(n, n) = q;
  return expm(block * t).topRightCorner(n, n);
}

}  // namespace cthmm
