#pragma once

// Low-rank logistic choice model over agreement and pair-choice votes.
//
//   agreement     p(agree_ij)        = sigmoid(m_ij + b_i)
//   pair choice   p(j preferred to k) = sigmoid(m_ij - m_ik)
//
// with a uniform prior on the nuclear-norm ball ||M||_* <= tau and a
// zero-mean Gaussian prior on the participant biases b.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rlsdp/error.hpp"
#include "rlsdp/nuclear.hpp"

namespace rlsdp {

/// Logits are clamped to this magnitude before exponentiation.
inline constexpr double kLogitClamp = 500.0;

inline double sigmoid(double x) {
  x = std::clamp(x, -kLogitClamp, kLogitClamp);
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
  x = std::clamp(x, -kLogitClamp, kLogitClamp);
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double log_sigmoid(double x) { return -softplus(-x); }

enum class EventKind : std::uint8_t { Agreement, PairChoice };

/// One vote. For agreements `first` is the response and `agreed` the answer;
/// for pair choices `first` is the preferred response and `second` the other.
struct ExerciseEvent {
  EventKind kind = EventKind::Agreement;
  std::size_t participant = 0;
  std::size_t first = 0;
  std::size_t second = 0;
  bool agreed = false;

  static ExerciseEvent agreement(std::size_t participant, std::size_t response, bool agreed) {
    return {EventKind::Agreement, participant, response, 0, agreed};
  }
  static ExerciseEvent pair_choice(std::size_t participant, std::size_t winner, std::size_t loser) {
    return {EventKind::PairChoice, participant, winner, loser, false};
  }

  bool is_agreement() const { return kind == EventKind::Agreement; }
  std::size_t response() const { return first; }
  std::size_t winner() const { return first; }
  std::size_t loser() const { return second; }

  friend bool operator==(const ExerciseEvent& a, const ExerciseEvent& b) {
    if (a.kind != b.kind || a.participant != b.participant || a.first != b.first) return false;
    return a.is_agreement() ? a.agreed == b.agreed : a.second == b.second;
  }
};

struct Dataset {
  std::size_t n_participants = 0;
  std::size_t n_responses = 0;
  std::vector<ExerciseEvent> events;

  Dataset() = default;
  Dataset(std::size_t participants, std::size_t responses, std::vector<ExerciseEvent> evs = {})
      : n_participants(participants), n_responses(responses), events(std::move(evs)) {}

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }

  /// Throws dimension_mismatch if any event indexes outside the declared shape,
  /// invalid_argument for a pair choice with winner == loser.
  void validate() const {
    for (std::size_t k = 0; k < events.size(); ++k) {
      const auto& e = events[k];
      const bool in_range = e.participant < n_participants && e.first < n_responses &&
                            (e.is_agreement() || e.second < n_responses);
      if (!in_range) {
        throw Error(Errc::dimension_mismatch,
                    "event " + std::to_string(k) + " indexes outside " +
                        std::to_string(n_participants) + "x" + std::to_string(n_responses));
      }
      if (!e.is_agreement() && e.first == e.second) {
        throw Error(Errc::invalid_argument,
                    "event " + std::to_string(k) + " is a pair choice with winner == loser");
      }
    }
  }

  std::size_t count(EventKind kind) const {
    return static_cast<std::size_t>(std::count_if(
        events.begin(), events.end(), [kind](const ExerciseEvent& e) { return e.kind == kind; }));
  }
};

struct UtilityState {
  Eigen::MatrixXd M;  ///< participants x responses, logit units
  Eigen::VectorXd b;  ///< per-participant bias, logit units

  static UtilityState zeros(std::size_t participants, std::size_t responses) {
    return {Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(participants),
                                  static_cast<Eigen::Index>(responses)),
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(participants))};
  }

  std::size_t n_participants() const { return static_cast<std::size_t>(M.rows()); }
  std::size_t n_responses() const { return static_cast<std::size_t>(M.cols()); }

  bool all_finite() const { return M.allFinite() && b.allFinite(); }

  friend bool operator==(const UtilityState& a, const UtilityState& b) {
    return a.M.rows() == b.M.rows() && a.M.cols() == b.M.cols() && a.b.size() == b.b.size() &&
           a.M == b.M && a.b == b.b;
  }
};

struct ModelConfig {
  double tau = 1.0;
  double bias_prior_std = 1.0;

  /// Radius admitting a rank-1 matrix with entrywise logits of magnitude 2.
  static double default_tau(std::size_t participants, std::size_t responses) {
    return 2.0 * std::sqrt(static_cast<double>(participants) * static_cast<double>(responses));
  }

  void validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(Errc::invalid_argument, "tau must be > 0");
    if (!(bias_prior_std > 0.0) || !std::isfinite(bias_prior_std)) {
      throw Error(Errc::invalid_argument, "bias_prior_std must be > 0");
    }
  }
};

struct Gradient {
  Eigen::MatrixXd dM;
  Eigen::VectorXd db;

  static Gradient zeros_like(const UtilityState& s) {
    return {Eigen::MatrixXd::Zero(s.M.rows(), s.M.cols()), Eigen::VectorXd::Zero(s.b.size())};
  }
};

namespace detail {

inline void check_shape(const UtilityState& state, const Dataset& data) {
  if (state.n_participants() != data.n_participants || state.n_responses() != data.n_responses ||
      static_cast<std::size_t>(state.b.size()) != data.n_participants) {
    throw Error(Errc::dimension_mismatch, "state shape does not match dataset shape");
  }
}

inline double event_log_likelihood(const UtilityState& s, const ExerciseEvent& e) {
  const auto i = static_cast<Eigen::Index>(e.participant);
  const auto j = static_cast<Eigen::Index>(e.first);
  if (e.is_agreement()) {
    const double logit = s.M(i, j) + s.b(i);
    return e.agreed ? log_sigmoid(logit) : log_sigmoid(-logit);
  }
  const auto k = static_cast<Eigen::Index>(e.second);
  return log_sigmoid(s.M(i, j) - s.M(i, k));
}

}  // namespace detail

/// Adds `scale` times the likelihood gradient of `events` into `out`.
/// Indices are trusted; callers validate the dataset once.
inline void accumulate_likelihood_grad(const UtilityState& s, std::span<const ExerciseEvent> events,
                                       double scale, Gradient& out) {
  for (const auto& e : events) {
    const auto i = static_cast<Eigen::Index>(e.participant);
    const auto j = static_cast<Eigen::Index>(e.first);
    if (e.is_agreement()) {
      const double p = sigmoid(s.M(i, j) + s.b(i));
      const double g = e.agreed ? 1.0 - p : -p;
      out.dM(i, j) += scale * g;
      out.db(i) += scale * g;
    } else {
      const auto k = static_cast<Eigen::Index>(e.second);
      const double g = 1.0 - sigmoid(s.M(i, j) - s.M(i, k));
      out.dM(i, j) += scale * g;
      out.dM(i, k) -= scale * g;
    }
  }
}

inline double log_likelihood(const UtilityState& state, const Dataset& data) {
  detail::check_shape(state, data);
  data.validate();
  double total = 0.0;
  for (const auto& e : data.events) total += detail::event_log_likelihood(state, e);
  return total;
}

inline Gradient log_likelihood_grad(const UtilityState& state, const Dataset& data) {
  detail::check_shape(state, data);
  data.validate();
  auto g = Gradient::zeros_like(state);
  accumulate_likelihood_grad(state, data.events, 1.0, g);
  return g;
}

/// Unnormalized log Gaussian density of the biases.
inline double log_bias_prior(const Eigen::VectorXd& b, double bias_prior_std) {
  return -0.5 * b.squaredNorm() / (bias_prior_std * bias_prior_std);
}

/// Log likelihood plus log bias prior inside the closed nuclear-norm ball,
/// -infinity outside. The normalizer is never computed.
inline double log_posterior_unnorm(const UtilityState& state, const Dataset& data,
                                   const ModelConfig& config) {
  config.validate();
  const double ll = log_likelihood(state, data);
  if (!inside_ball(nuclear_norm(state.M), config.tau)) {
    return -std::numeric_limits<double>::infinity();
  }
  return ll + log_bias_prior(state.b, config.bias_prior_std);
}

/// Gradient of the smooth part of the log posterior (likelihood + bias prior).
inline Gradient log_posterior_grad(const UtilityState& state, const Dataset& data,
                                   const ModelConfig& config) {
  auto g = log_likelihood_grad(state, data);
  g.db -= state.b / (config.bias_prior_std * config.bias_prior_std);
  return g;
}

}  // namespace rlsdp
