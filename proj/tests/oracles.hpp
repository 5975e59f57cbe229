#pragma once

// Reference computations written independently of the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rlsdp/model.hpp"

namespace oracle {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Log-likelihood straight from the product formula.
inline double log_likelihood(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                             const std::vector<rlsdp::ExerciseEvent>& events) {
  double total = 0.0;
  for (const auto& e : events) {
    const auto i = static_cast<Eigen::Index>(e.participant);
    const auto j = static_cast<Eigen::Index>(e.first);
    if (e.kind == rlsdp::EventKind::Agreement) {
      const double p = logistic(M(i, j) + b(i));
      total += std::log(e.agreed ? p : 1.0 - p);
    } else {
      total += std::log(logistic(M(i, j) - M(i, static_cast<Eigen::Index>(e.second))));
    }
  }
  return total;
}

struct FdGradient {
  Eigen::MatrixXd dM;
  Eigen::VectorXd db;
};

/// Central differences of the formula above.
inline FdGradient finite_difference(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                                    const std::vector<rlsdp::ExerciseEvent>& events, double h = 1e-5) {
  FdGradient g{Eigen::MatrixXd::Zero(M.rows(), M.cols()), Eigen::VectorXd::Zero(b.size())};
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      auto up = M, down = M;
      up(r, c) += h;
      down(r, c) -= h;
      g.dM(r, c) = (log_likelihood(up, b, events) - log_likelihood(down, b, events)) / (2 * h);
    }
  }
  for (Eigen::Index r = 0; r < b.size(); ++r) {
    auto up = b, down = b;
    up(r) += h;
    down(r) -= h;
    g.db(r) = (log_likelihood(M, up, events) - log_likelihood(M, down, events)) / (2 * h);
  }
  return g;
}

/// Projection of a 2x2 matrix onto the nuclear ball by searching singular-value
/// pairs on the segment s1 + s2 = tau. Singular vectors come from Eigen's Jacobi SVD.
inline Eigen::Matrix2d project_2x2(const Eigen::Matrix2d& M, double tau) {
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector2d s = svd.singularValues();
  if (s.sum() <= tau) return M;
  // Bisection on the sign of the derivative of |s - (a, tau - a)|^2 over a in [0, tau].
  auto slope = [&](double a) { return (a - s(0)) + (s(1) - (tau - a)); };
  double lo = 0.0, hi = tau;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) > 0.0 ? hi : lo) = mid;
  }
  const double a = 0.5 * (lo + hi);
  return svd.matrixU() * Eigen::Vector2d(a, tau - a).asDiagonal() * svd.matrixV().transpose();
}

inline double beta_std(double a, double b) {
  return std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
}

/// Posterior mean of sigmoid(m) for one participant and one response with
/// `agrees`/`disagrees` votes, m uniform on [-tau, tau], b ~ N(0, bias_std^2),
/// by composite Simpson's rule over m in [-tau, tau] and b in [-6, 6] (bias_std = 1).
inline double quadrature_agreement(int agrees, int disagrees, double tau, double bias_std = 1.0,
                                   int grid = 1200) {
  const double b_lim = 6.0 * bias_std;
  auto weight = [](int k, int n) { return (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0); };
  double num = 0.0, den = 0.0;
  for (int u = 0; u <= grid; ++u) {
    const double m = -tau + 2.0 * tau * u / grid;
    for (int v = 0; v <= grid; ++v) {
      const double b = -b_lim + 2.0 * b_lim * v / grid;
      const double p = logistic(m + b);
      const double w = weight(u, grid) * weight(v, grid) * std::pow(p, agrees) *
                       std::pow(1.0 - p, disagrees) * std::exp(-0.5 * b * b / (bias_std * bias_std));
      num += w * logistic(m);
      den += w;
    }
  }
  return num / den;
}

/// Random events on an n x m grid.
inline std::vector<rlsdp::ExerciseEvent> random_events(std::size_t n, std::size_t m, std::size_t count,
                                                       std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pi(0, n - 1), rj(0, m - 1);
  std::bernoulli_distribution coin(0.5);
  std::vector<rlsdp::ExerciseEvent> out;
  while (out.size() < count) {
    const auto i = pi(rng), j = rj(rng);
    if (m > 1 && coin(rng)) {
      const auto k = rj(rng);
      if (k == j) continue;
      out.push_back(rlsdp::ExerciseEvent::pair_choice(i, j, k));
    } else {
      out.push_back(rlsdp::ExerciseEvent::agreement(i, j, coin(rng)));
    }
  }
  return out;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index k = 0; k < M.size(); ++k) M(k) = normal(rng);
  return M;
}

}  // namespace oracle
