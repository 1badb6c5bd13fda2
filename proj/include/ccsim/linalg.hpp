#pragma once

#include "ccsim/common.hpp"

#include <Eigen/SparseCholesky>

#include <span>
#include <vector>

namespace ccsim {

/// Reusable sparse LDL^T factor of an SPD (or SPD-projected) symmetric matrix.
/// Solve residual is ~machine precision for the system sizes this library
/// targets (a few thousand DOFs); the contract checked by the tests is
/// ||A y - b|| <= 1e-8 ||b||. Immutable after construction, safe to share
/// across threads for concurrent solves.
class Factorization {
 public:
  explicit Factorization(const SpMat& A) : n_(A.rows()) {
    if (A.rows() != A.cols()) throw SolveError("factorize: matrix not square");
    ldlt_.compute(A);
    if (ldlt_.info() != Eigen::Success)
      throw SolveError("factorize: decomposition failed (matrix not SPD after projection?)");
    if (n_ > 0 && ldlt_.vectorD().minCoeff() <= 0.0)
      throw SolveError("factorize: non-positive pivot (matrix not SPD after projection?)");
  }

  Vec solve(const Vec& b) const { return ldlt_.solve(b); }
  Mat solve(const Mat& B) const { return ldlt_.solve(B); }
  Eigen::Index rows() const { return n_; }

 private:
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  Eigen::Index n_;
};

inline Factorization factorize(const SpMat& A) { return Factorization(A); }

/// Principal submatrix of A with the given rows/columns removed, plus the
/// old-index -> new-index map (-1 for removed indices).
struct Submatrix {
  SpMat matrix;
  std::vector<Eigen::Index> old_to_new;  // size A.rows(), -1 where removed
  std::vector<Eigen::Index> new_to_old;  // size A.rows() - removed.size()
};

inline Submatrix delete_rowcol(const SpMat& A, std::span<const Eigen::Index> removed) {
  const Eigen::Index n = A.rows();
  Submatrix out;
  out.old_to_new.assign(static_cast<std::size_t>(n), -1);
  std::vector<char> drop(static_cast<std::size_t>(n), 0);
  for (Eigen::Index r : removed) {
    if (r < 0 || r >= n) throw ConfigError("delete_rowcol: index out of range");
    drop[static_cast<std::size_t>(r)] = 1;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!drop[static_cast<std::size_t>(i)]) {
      out.old_to_new[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(out.new_to_old.size());
      out.new_to_old.push_back(i);
    }
  }
  const Eigen::Index m = static_cast<Eigen::Index>(out.new_to_old.size());
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(A.nonZeros()));
  for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      const Eigen::Index r = out.old_to_new[static_cast<std::size_t>(it.row())];
      const Eigen::Index c = out.old_to_new[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0) trips.emplace_back(r, c, it.value());
    }
  }
  out.matrix.resize(m, m);
  out.matrix.setFromTriplets(trips.begin(), trips.end());
  return out;
}

/// Direct solve of a small (d <= 3) dense system A X = B via full pivoting.
/// Throws SolveError with a condition estimate when A is numerically singular.
inline Mat small_solve(const Mat& A, const Mat& B) {
  if (A.rows() != A.cols() || A.rows() > 3 || A.rows() < 1)
    throw ConfigError("small_solve: expected square A with dimension 1..3");
  if (A.rows() != B.rows()) throw ConfigError("small_solve: dimension mismatch");
  Eigen::FullPivLU<Mat> lu(A);
  const Mat& U = lu.matrixLU();
  const double pmax = std::abs(U(0, 0));  // pivots are sorted by magnitude
  const double pmin = std::abs(U(A.rows() - 1, A.cols() - 1));
  if (pmax <= 0.0 || pmin <= pmax * 1e-14) {
    throw SolveError("small_solve: singular block (rcond ~ " +
                     format_double(pmax > 0 ? pmin / pmax : 0.0) + ")");
  }
  return lu.solve(B);
}

inline bool is_symmetric(const SpMat& A, double tol = 0.0) {
  SpMat D = SpMat(A.transpose()) - A;
  for (Eigen::Index k = 0; k < D.outerSize(); ++k)
    for (SpMat::InnerIterator it(D, k); it; ++it)
      if (std::abs(it.value()) > tol) return false;
  return true;
}

inline SpMat to_sparse(const Mat& A) {
  std::vector<Triplet> t;
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      if (A(i, j) != 0.0) t.emplace_back(i, j, A(i, j));
  SpMat S(A.rows(), A.cols());
  S.setFromTriplets(t.begin(), t.end());
  return S;
}

}  // namespace ccsim
