#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace aeal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixRef = Eigen::Ref<const Matrix>;
using VectorRef = Eigen::Ref<const Vector>;

/// Copy of the given rows, in the given order; works for vectors and matrices.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> select_rows(
    const Eigen::DenseBase<Derived>& m, std::span<const int> rows) {
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> out(
      static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

/// Numerical rank by column-pivoted QR, relative tolerance on |R_jj| / |R_00|.
inline Eigen::Index numerical_rank(const MatrixRef& m, double rel_tol = 1e-10) {
  if (m.cols() == 0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(rel_tol);
  return qr.rank();
}

inline std::vector<double> to_std(const VectorRef& v) { return {v.data(), v.data() + v.size()}; }

inline Vector from_std(std::span<const double> v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace aeal
