#pragma once

// Posterior inference for the low-rank choice model:
//   fit_map        projected minibatch gradient ascent, best iterate returned
//   swa_sample     constant-rate projected SGD iterates used as posterior draws
//   hmc_sample     Hamiltonian Monte Carlo on (M, b) inside the nuclear ball
//   binomial_*     per-response Beta(1/2, 1/2) conjugate baseline

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rlsdp/error.hpp"
#include "rlsdp/model.hpp"
#include "rlsdp/nuclear.hpp"

namespace rlsdp {

enum class Method { SWA, HMC, Binomial };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::SWA: return "SWA";
    case Method::HMC: return "HMC";
    case Method::Binomial: return "Binomial";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "SWA" || s == "swa") return Method::SWA;
  if (s == "HMC" || s == "hmc") return Method::HMC;
  if (s == "Binomial" || s == "binomial") return Method::Binomial;
  throw Error(Errc::invalid_argument, "unknown method '" + s + "'");
}

/// Minibatch size meaning "every event".
inline constexpr std::size_t kFullBatch = std::numeric_limits<std::size_t>::max();

struct MapConfig {
  double step_size = 0.05;
  std::size_t max_iters = 2000;
  std::size_t minibatch_size = 64;
  double convergence_tol = 1e-6;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(step_size > 0.0)) throw Error(Errc::invalid_argument, "map step_size must be > 0");
    if (max_iters < 1) throw Error(Errc::invalid_argument, "map max_iters must be >= 1");
    if (minibatch_size < 1) throw Error(Errc::invalid_argument, "map minibatch_size must be >= 1");
  }
};

struct SwaConfig {
  double learning_rate = 1.0;
  std::size_t n_samples = 30;
  std::size_t steps_between_samples = 0;  ///< 0 means one pass over the data
  std::size_t minibatch_size = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error(Errc::invalid_argument, "swa learning_rate must be > 0");
    if (n_samples < 2) throw Error(Errc::invalid_argument, "swa n_samples must be >= 2");
    if (minibatch_size < 1) throw Error(Errc::invalid_argument, "swa minibatch_size must be >= 1");
  }
};

/// How leapfrog trajectories treat the nuclear-norm wall.
enum class BoundaryMode {
  Reflect,  ///< specular reflection of the momentum where the trajectory meets the wall
  Reject,   ///< unconstrained trajectory; endpoints outside the ball are rejected
};

struct HmcConfig {
  double step_size = 0.01;
  std::size_t n_leapfrog = 20;
  std::size_t n_samples = 500;
  std::size_t n_burnin = 200;
  std::uint64_t seed = 0;
  BoundaryMode boundary = BoundaryMode::Reflect;

  void validate() const {
    if (!(step_size > 0.0)) throw Error(Errc::invalid_argument, "hmc step_size must be > 0");
    if (n_leapfrog == 0) throw Error(Errc::invalid_argument, "hmc n_leapfrog must be >= 1");
    if (n_samples < 2) throw Error(Errc::invalid_argument, "hmc n_samples must be >= 2");
  }
};

struct PosteriorSamples {
  std::vector<UtilityState> samples;
  Method method_tag = Method::SWA;
  double wall_clock_seconds = 0.0;
  std::uint64_t seed = 0;
  /// Fraction of accepted HMC proposals; 1 for SWA.
  double acceptance_rate = 1.0;
};

struct BinomialPosterior {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;

  std::size_t n_responses() const { return static_cast<std::size_t>(alpha.size()); }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Log posterior for a state already known to lie in the ball.
inline double log_posterior_feasible(const UtilityState& s, const Dataset& data,
                                     const ModelConfig& cfg) {
  double total = 0.0;
  for (const auto& e : data.events) total += event_log_likelihood(s, e);
  return total + log_bias_prior(s.b, cfg.bias_prior_std);
}

inline void check_feasible_init(const UtilityState& init, const Dataset& data,
                                const ModelConfig& cfg) {
  check_shape(init, data);
  if (!init.all_finite()) throw Error(Errc::infeasible, "initial state has non-finite entries");
  if (!inside_ball(nuclear_norm(init.M), cfg.tau)) {
    throw Error(Errc::infeasible, "initial state lies outside the nuclear-norm ball");
  }
}

/// Cycles through shuffled minibatches; reshuffles at every pass.
class MinibatchStream {
 public:
  MinibatchStream(std::size_t n_events, std::size_t batch, std::mt19937_64& rng)
      : order_(n_events), batch_(std::min(batch, n_events)), rng_(rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::span<const std::size_t> next() {
    if (cursor_ + batch_ > order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    std::span<const std::size_t> out(order_.data() + cursor_, batch_);
    cursor_ += batch_;
    return out;
  }

  std::size_t batch_size() const { return batch_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t cursor_ = 0;
  std::mt19937_64& rng_;
};

/// One projected ascent step using a minibatch estimate of the full-data gradient.
inline void projected_step(UtilityState& s, const Dataset& data, const ModelConfig& cfg,
                           std::span<const std::size_t> batch, double rate, Gradient& g) {
  g.dM.setZero();
  g.db.setZero();
  const double scale = static_cast<double>(data.size()) / static_cast<double>(batch.size());
  for (const auto idx : batch) {
    accumulate_likelihood_grad(s, std::span<const ExerciseEvent>(&data.events[idx], 1), scale, g);
  }
  g.db -= s.b / (cfg.bias_prior_std * cfg.bias_prior_std);
  if (!g.dM.allFinite() || !g.db.allFinite()) {
    throw Error(Errc::numerical, "non-finite gradient");
  }
  s.M += rate * g.dM;
  s.b += rate * g.db;
  s.M = project_nuclear_ball(s.M, cfg.tau);
}

}  // namespace detail

/// Maximum a posteriori estimate by projected stochastic gradient ascent.
inline UtilityState fit_map(const Dataset& data, const ModelConfig& model, const MapConfig& cfg) {
  model.validate();
  cfg.validate();
  data.validate();
  if (data.empty()) throw Error(Errc::empty_dataset, "fit_map needs at least one event");

  std::mt19937_64 rng(cfg.seed);
  auto state = UtilityState::zeros(data.n_participants, data.n_responses);
  auto best = state;
  double best_lp = detail::log_posterior_feasible(state, data, model);
  double previous = best_lp;
  detail::MinibatchStream stream(data.size(), cfg.minibatch_size, rng);
  auto g = Gradient::zeros_like(state);

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    detail::projected_step(state, data, model, stream.next(), cfg.step_size, g);
    const double lp = detail::log_posterior_feasible(state, data, model);
    if (!std::isfinite(lp)) throw Error(Errc::numerical, "non-finite log posterior");
    if (lp > best_lp) {
      best_lp = lp;
      best = state;
    }
    if (std::abs(lp - previous) < cfg.convergence_tol) break;
    previous = lp;
  }
  return best;
}

/// Constant-learning-rate projected SGD; one recorded iterate per block of steps.
inline PosteriorSamples swa_sample(const Dataset& data, const UtilityState& init,
                                   const ModelConfig& model, const SwaConfig& cfg) {
  model.validate();
  cfg.validate();
  data.validate();
  detail::check_feasible_init(init, data, model);

  const auto start = detail::Clock::now();
  PosteriorSamples out;
  out.method_tag = Method::SWA;
  out.seed = cfg.seed;
  out.samples.reserve(cfg.n_samples);

  auto state = init;
  if (data.empty()) {
    // No likelihood term: the bias prior gradient alone drives the iterates.
    for (std::size_t s = 0; s < cfg.n_samples; ++s) out.samples.push_back(state);
    out.wall_clock_seconds = detail::seconds_since(start);
    return out;
  }

  std::mt19937_64 rng(cfg.seed);
  detail::MinibatchStream stream(data.size(), cfg.minibatch_size, rng);
  const std::size_t block =
      cfg.steps_between_samples > 0
          ? cfg.steps_between_samples
          : (data.size() + stream.batch_size() - 1) / stream.batch_size();
  auto g = Gradient::zeros_like(state);

  for (std::size_t s = 0; s < cfg.n_samples; ++s) {
    for (std::size_t step = 0; step < block; ++step) {
      detail::projected_step(state, data, model, stream.next(), cfg.learning_rate, g);
    }
    out.samples.push_back(state);
  }
  out.wall_clock_seconds = detail::seconds_since(start);
  return out;
}

namespace detail {

/// Target density and its gradient for HMC. Potential energy is -log posterior.
class HmcTarget {
 public:
  HmcTarget(const Dataset& data, const ModelConfig& cfg) : data_(data), cfg_(cfg) {}

  double log_density(const UtilityState& s) const {
    if (!inside_ball(nuclear_norm(s.M), cfg_.tau)) return -std::numeric_limits<double>::infinity();
    return log_posterior_feasible(s, data_, cfg_);
  }

  void gradient(const UtilityState& s, Gradient& g) const {
    g.dM.setZero();
    g.db.setZero();
    accumulate_likelihood_grad(s, data_.events, 1.0, g);
    g.db -= s.b / (cfg_.bias_prior_std * cfg_.bias_prior_std);
  }

  double tau() const { return cfg_.tau; }

 private:
  const Dataset& data_;
  const ModelConfig& cfg_;
};

/// Moves M along momentum P for time `duration`, reflecting P off the
/// nuclear-norm sphere whenever the straight path would leave the ball.
/// Returns false if the wall could not be resolved numerically.
inline bool reflective_drift(Eigen::MatrixXd& M, Eigen::MatrixXd& P, double duration, double tau) {
  constexpr int kMaxReflections = 256;
  constexpr int kMaxRootIters = 60;
  double remaining = duration;
  for (int bounce = 0; bounce <= kMaxReflections; ++bounce) {
    const Eigen::MatrixXd end = M + remaining * P;
    if (nuclear_norm(end) <= tau) {
      M = end;
      return true;
    }
    // ||M + tP||_* is convex in t; Newton from the far side approaches the
    // crossing monotonically, with bisection as the fallback.
    double lo = 0.0;
    double hi = remaining;
    linalg::Svd at_hi = linalg::thin_svd(end);
    double f_hi = at_hi.s.sum() - tau;
    for (int it = 0; it < kMaxRootIters && f_hi > tau * 1e-13 && hi - lo > 1e-15 * remaining;
         ++it) {
      const double slope = (at_hi.U.transpose() * P * at_hi.V).trace();
      double t = slope > 0.0 ? hi - f_hi / slope : 0.5 * (lo + hi);
      if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
      auto svd = linalg::thin_svd(M + t * P);
      const double f = svd.s.sum() - tau;
      if (f > 0.0) {
        hi = t;
        at_hi = std::move(svd);
        f_hi = f;
      } else {
        lo = t;
      }
    }
    M += hi * P;
    remaining -= hi;
    // Outward normal of the sphere at the crossing is U V^T.
    const Eigen::MatrixXd normal = at_hi.U * at_hi.V.transpose();
    const double nn = normal.squaredNorm();
    if (!(nn > 0.0)) return false;
    P -= (2.0 * (P.cwiseProduct(normal).sum()) / nn) * normal;
    if (remaining <= 0.0) return true;
  }
  return false;
}

}  // namespace detail

inline constexpr double kHmcStartFraction = 0.99;

/// Hamiltonian Monte Carlo with unit mass on (M, b).
/// An init with ||M||_* above 99% of tau is scaled back to that radius first.
inline PosteriorSamples hmc_sample(const Dataset& data, const UtilityState& init,
                                   const ModelConfig& model, const HmcConfig& cfg) {
  model.validate();
  cfg.validate();
  data.validate();
  detail::check_feasible_init(init, data, model);

  const auto start = detail::Clock::now();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const detail::HmcTarget target(data, model);

  PosteriorSamples out;
  out.method_tag = Method::HMC;
  out.seed = cfg.seed;
  out.samples.reserve(cfg.n_samples);

  // Chains start strictly inside the ball.
  UtilityState current = init;
  const double start_norm = nuclear_norm(current.M);
  if (start_norm > kHmcStartFraction * model.tau) current.M *= kHmcStartFraction * model.tau / start_norm;
  double current_lp = target.log_density(current);
  auto g = Gradient::zeros_like(current);
  const double eps = cfg.step_size;
  std::size_t accepted = 0;
  std::size_t proposals = 0;

  const std::size_t total = cfg.n_burnin + cfg.n_samples;
  for (std::size_t iter = 0; iter < total; ++iter) {
    Eigen::MatrixXd PM(current.M.rows(), current.M.cols());
    Eigen::VectorXd pb(current.b.size());
    for (Eigen::Index c = 0; c < PM.cols(); ++c)
      for (Eigen::Index r = 0; r < PM.rows(); ++r) PM(r, c) = normal(rng);
    for (Eigen::Index r = 0; r < pb.size(); ++r) pb(r) = normal(rng);
    const double kinetic0 = 0.5 * (PM.squaredNorm() + pb.squaredNorm());

    UtilityState q = current;
    bool ok = true;
    target.gradient(q, g);
    PM += 0.5 * eps * g.dM;
    pb += 0.5 * eps * g.db;
    for (std::size_t l = 0; l < cfg.n_leapfrog && ok; ++l) {
      if (cfg.boundary == BoundaryMode::Reflect) {
        ok = detail::reflective_drift(q.M, PM, eps, model.tau);
      } else {
        q.M += eps * PM;
      }
      q.b += eps * pb;
      if (!q.all_finite()) ok = false;
      if (!ok) break;
      target.gradient(q, g);
      const double w = (l + 1 == cfg.n_leapfrog) ? 0.5 * eps : eps;
      PM += w * g.dM;
      pb += w * g.db;
    }

    ++proposals;
    if (ok) {
      const double proposed_lp = target.log_density(q);
      const double kinetic1 = 0.5 * (PM.squaredNorm() + pb.squaredNorm());
      const double log_ratio = (proposed_lp - kinetic1) - (current_lp - kinetic0);
      if (std::isfinite(proposed_lp) && std::isfinite(log_ratio) &&
          (log_ratio >= 0.0 || std::log(uniform(rng)) < log_ratio)) {
        current = std::move(q);
        current_lp = proposed_lp;
        ++accepted;
      }
    }
    if (iter >= cfg.n_burnin) out.samples.push_back(current);
  }
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposals);
  out.wall_clock_seconds = detail::seconds_since(start);
  return out;
}

/// Beta(1/2 + agrees, 1/2 + disagrees) for every response; pair choices are ignored.
inline BinomialPosterior binomial_posterior(const Dataset& data) {
  const auto m = static_cast<Eigen::Index>(data.n_responses);
  BinomialPosterior post{Eigen::VectorXd::Constant(m, 0.5), Eigen::VectorXd::Constant(m, 0.5)};
  for (const auto& e : data.events) {
    if (!e.is_agreement()) continue;
    if (e.response() >= data.n_responses) {
      throw Error(Errc::dimension_mismatch, "agreement references response out of range");
    }
    const auto j = static_cast<Eigen::Index>(e.response());
    (e.agreed ? post.alpha(j) : post.beta(j)) += 1.0;
  }
  return post;
}

inline double beta_mean(double a, double b) { return a / (a + b); }

inline double beta_std(double a, double b) {
  const double s = a + b;
  return std::sqrt(a * b / (s * s * (s + 1.0)));
}

inline double binomial_mean(const BinomialPosterior& post, std::size_t response) {
  if (response >= post.n_responses()) throw Error(Errc::index_out_of_range, "response index");
  const auto j = static_cast<Eigen::Index>(response);
  return beta_mean(post.alpha(j), post.beta(j));
}

inline double binomial_std(const BinomialPosterior& post, std::size_t response) {
  if (response >= post.n_responses()) throw Error(Errc::index_out_of_range, "response index");
  const auto j = static_cast<Eigen::Index>(response);
  return beta_std(post.alpha(j), post.beta(j));
}

}  // namespace rlsdp
