#pragma once

// Nuclear norm and Euclidean projection onto the nuclear-norm ball.
// Singular value decompositions go through LAPACK's divide-and-conquer driver.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "rlsdp/error.hpp"

namespace rlsdp {

/// Relative slack accepted on the ball boundary to absorb SVD round-off.
inline constexpr double kBallTolerance = 1e-10;

inline bool inside_ball(double norm, double tau) { return norm <= tau * (1.0 + kBallTolerance); }

namespace linalg {

struct Svd {
  Eigen::MatrixXd U;  ///< rows x k
  Eigen::VectorXd s;  ///< k, descending
  Eigen::MatrixXd V;  ///< cols x k
};

namespace detail {

inline void check_finite(const Eigen::MatrixXd& M) {
  if (!M.allFinite()) throw Error(Errc::numerical, "matrix has non-finite entries");
}

inline void check_info(lapack_int info) {
  if (info != 0) {
    throw Error(Errc::numerical, "dgesdd failed to converge (info=" + std::to_string(info) + ")");
  }
}

}  // namespace detail

inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& M) {
  detail::check_finite(M);
  const auto k = std::min(M.rows(), M.cols());
  Eigen::VectorXd s(k);
  if (k == 0) return s;
  if (k == 1) {
    s(0) = M.norm();
    return s;
  }
  Eigen::MatrixXd work = M;
  const auto info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', static_cast<lapack_int>(M.rows()),
                                   static_cast<lapack_int>(M.cols()), work.data(),
                                   static_cast<lapack_int>(M.rows()), s.data(), nullptr, 1,
                                   nullptr, 1);
  detail::check_info(info);
  return s;
}

inline Svd thin_svd(const Eigen::MatrixXd& M) {
  detail::check_finite(M);
  const auto rows = M.rows();
  const auto cols = M.cols();
  const auto k = std::min(rows, cols);
  Svd out{Eigen::MatrixXd(rows, k), Eigen::VectorXd(k), Eigen::MatrixXd(cols, k)};
  if (k == 0) return out;
  Eigen::MatrixXd work = M;
  Eigen::MatrixXd vt(k, cols);
  const auto info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'S', static_cast<lapack_int>(rows),
                                   static_cast<lapack_int>(cols), work.data(),
                                   static_cast<lapack_int>(rows), out.s.data(), out.U.data(),
                                   static_cast<lapack_int>(rows), vt.data(),
                                   static_cast<lapack_int>(k));
  detail::check_info(info);
  out.V = vt.transpose();
  return out;
}

}  // namespace linalg

/// Sum of singular values.
inline double nuclear_norm(const Eigen::MatrixXd& M) { return linalg::singular_values(M).sum(); }

/// Euclidean projection of a nonnegative, descending vector onto
/// {x >= 0 : sum(x) <= radius}. Returns the water-filling threshold through `threshold`.
inline Eigen::VectorXd project_sorted_l1_ball(const Eigen::VectorXd& s, double radius,
                                              double* threshold = nullptr) {
  if (threshold) *threshold = 0.0;
  if (s.sum() <= radius) return s;
  double cumulative = 0.0;
  double lambda = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    cumulative += s(k);
    const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
    if (s(k) - candidate > 0.0) lambda = candidate;
  }
  if (threshold) *threshold = lambda;
  return (s.array() - lambda).cwiseMax(0.0).matrix();
}

/// Frobenius-nearest matrix with nuclear norm at most `tau`.
inline Eigen::MatrixXd project_nuclear_ball(const Eigen::MatrixXd& M, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::invalid_argument, "tau must be > 0");
  if (M.size() == 0) return M;
  if (std::min(M.rows(), M.cols()) == 1) {
    linalg::detail::check_finite(M);
    const double norm = M.norm();
    return norm <= tau ? M : Eigen::MatrixXd(M * (tau / norm));
  }
  const auto svd = linalg::thin_svd(M);
  if (svd.s.sum() <= tau) return M;
  const Eigen::VectorXd shrunk = project_sorted_l1_ball(svd.s, tau);
  return svd.U * shrunk.asDiagonal() * svd.V.transpose();
}

}  // namespace rlsdp
