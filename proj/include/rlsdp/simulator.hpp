#pragma once

// Synthetic participant populations with known low-rank ground truth,
// balanced exercise scheduling, and vote simulation from the model likelihood.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rlsdp/aggregation.hpp"
#include "rlsdp/error.hpp"
#include "rlsdp/model.hpp"

namespace rlsdp {

struct SyntheticPopulation {
  Eigen::MatrixXd M_true;
  Eigen::VectorXd b_true;
  std::size_t rank = 0;
  double logit_scale = 0.0;
  double bias_std = 1.0;
  std::uint64_t seed = 0;

  std::size_t n_participants() const { return static_cast<std::size_t>(M_true.rows()); }
  std::size_t n_responses() const { return static_cast<std::size_t>(M_true.cols()); }
  UtilityState state() const { return {M_true, b_true}; }
};

/// Rank-r product of standard normal factors, rescaled so the entries have
/// standard deviation `logit_scale`; biases drawn from N(0, bias_std^2).
inline SyntheticPopulation generate_population(std::size_t n, std::size_t m, std::size_t rank,
                                               double logit_scale, std::uint64_t seed,
                                               double bias_std = 1.0) {
  if (rank > std::min(n, m)) {
    throw Error(Errc::invalid_argument, "rank " + std::to_string(rank) + " exceeds min(n, m)");
  }
  if (!(logit_scale >= 0.0)) throw Error(Errc::invalid_argument, "logit_scale must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto N = static_cast<Eigen::Index>(n);
  const auto R = static_cast<Eigen::Index>(rank);
  const auto Mc = static_cast<Eigen::Index>(m);

  Eigen::MatrixXd left(N, R);
  Eigen::MatrixXd right(R, Mc);
  for (Eigen::Index c = 0; c < R; ++c)
    for (Eigen::Index r = 0; r < N; ++r) left(r, c) = normal(rng);
  for (Eigen::Index c = 0; c < Mc; ++c)
    for (Eigen::Index r = 0; r < R; ++r) right(r, c) = normal(rng);

  SyntheticPopulation pop;
  pop.rank = rank;
  pop.logit_scale = logit_scale;
  pop.bias_std = bias_std;
  pop.seed = seed;
  pop.M_true = left * right;
  if (pop.M_true.size() > 0) {
    const double mean = pop.M_true.mean();
    const double sd =
        std::sqrt((pop.M_true.array() - mean).square().sum() / static_cast<double>(pop.M_true.size()));
    pop.M_true *= (sd > 0.0 ? logit_scale / sd : 0.0);
  }
  pop.b_true.resize(N);
  for (Eigen::Index r = 0; r < N; ++r) pop.b_true(r) = bias_std * normal(rng);
  return pop;
}

/// Bias excluded, matching the population-agreement estimator.
inline Eigen::VectorXd ground_truth_agreement(const SyntheticPopulation& pop) {
  return population_agreement(pop.state());
}

struct ScheduleConfig {
  std::size_t exercises_per_participant = 10;
  double agree_ratio = 0.5;
  bool allow_self_votes = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(agree_ratio >= 0.0 && agree_ratio <= 1.0)) {
      throw Error(Errc::invalid_argument, "agree_ratio must lie in [0, 1]");
    }
  }

  std::size_t agreement_count() const {
    return static_cast<std::size_t>(
        std::llround(agree_ratio * static_cast<double>(exercises_per_participant)));
  }
};

/// A prompt handed to one participant. For agreements `second` is unused.
struct Assignment {
  EventKind kind = EventKind::Agreement;
  std::size_t participant = 0;
  std::size_t first = 0;
  std::size_t second = 0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Owner of response j is participant j mod n.
inline std::vector<std::size_t> round_robin_owners(std::size_t n_responses,
                                                   std::size_t n_participants) {
  std::vector<std::size_t> owners(n_responses);
  for (std::size_t j = 0; j < n_responses; ++j) owners[j] = n_participants ? j % n_participants : 0;
  return owners;
}

/// Which slot indices (out of `total`) carry agreement prompts, spread evenly.
inline bool is_agreement_slot(std::size_t slot, std::size_t n_agree, std::size_t total) {
  return (slot + 1) * n_agree / total > slot * n_agree / total;
}

namespace detail {

/// Index of a minimum of `counts` over `candidates`, ties broken uniformly at random.
template <typename Pred>
std::size_t least_covered(const std::vector<std::size_t>& counts, Pred eligible,
                          std::mt19937_64& rng) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::size_t best_count = std::numeric_limits<std::size_t>::max();
  std::size_t ties = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (!eligible(j)) continue;
    if (counts[j] < best_count) {
      best_count = counts[j];
      best = j;
      ties = 1;
    } else if (counts[j] == best_count) {
      ++ties;
      if (std::uniform_int_distribution<std::size_t>(0, ties - 1)(rng) == 0) best = j;
    }
  }
  return best;
}

}  // namespace detail

/// Balanced schedule: every participant receives exactly
/// `exercises_per_participant` distinct prompts, the agreement share set by
/// `agree_ratio`, each prompt drawn from the least-covered eligible responses.
inline std::vector<Assignment> schedule_exercises(const SyntheticPopulation& pop,
                                                  const std::vector<std::size_t>& response_owner,
                                                  const ScheduleConfig& cfg) {
  cfg.validate();
  const std::size_t n = pop.n_participants();
  const std::size_t m = pop.n_responses();
  if (response_owner.size() != m) {
    throw Error(Errc::dimension_mismatch, "owner map length must equal the response count");
  }
  const std::size_t total = cfg.exercises_per_participant;
  const std::size_t n_agree = cfg.agreement_count();
  const std::size_t n_pair = total - n_agree;
  if (n_pair > 0 && m < 2) throw Error(Errc::infeasible, "pair choices need at least 2 responses");

  std::vector<std::vector<char>> eligible(n, std::vector<char>(m, 1));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t available = m;
    if (!cfg.allow_self_votes) {
      for (std::size_t j = 0; j < m; ++j) {
        if (response_owner[j] == i) {
          eligible[i][j] = 0;
          --available;
        }
      }
    }
    if (total > 0 && available == 0) {
      throw Error(Errc::infeasible, "participant " + std::to_string(i) + " has no eligible response");
    }
    if (n_agree > available || (n_pair > 0 && n_pair > available * (available - 1) / 2)) {
      throw Error(Errc::infeasible,
                  "participant " + std::to_string(i) + " has too few eligible responses");
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> coverage(m, 0);
  std::vector<std::vector<char>> agreed_on(n, std::vector<char>(m, 0));
  std::vector<std::set<std::pair<std::size_t, std::size_t>>> pairs_seen(n);
  std::vector<Assignment> out;
  out.reserve(n * total);

  for (std::size_t slot = 0; slot < total; ++slot) {
    const bool agreement = is_agreement_slot(slot, n_agree, total);
    for (const std::size_t i : order) {
      if (agreement) {
        const auto j = detail::least_covered(
            coverage, [&](std::size_t r) { return eligible[i][r] && !agreed_on[i][r]; }, rng);
        agreed_on[i][j] = 1;
        ++coverage[j];
        out.push_back({EventKind::Agreement, i, j, 0});
        continue;
      }
      // Pair: least-covered first element, then least-covered partner not yet paired with it.
      std::vector<char> tried(m, 0);
      bool placed = false;
      while (!placed) {
        const auto j = detail::least_covered(
            coverage, [&](std::size_t r) { return eligible[i][r] && !tried[r]; }, rng);
        if (j == std::numeric_limits<std::size_t>::max()) break;
        tried[j] = 1;
        const auto k = detail::least_covered(
            coverage,
            [&](std::size_t r) {
              return r != j && eligible[i][r] &&
                     !pairs_seen[i].count({std::min(j, r), std::max(j, r)});
            },
            rng);
        if (k == std::numeric_limits<std::size_t>::max()) continue;
        pairs_seen[i].insert({std::min(j, k), std::max(j, k)});
        ++coverage[j];
        ++coverage[k];
        out.push_back({EventKind::PairChoice, i, j, k});
        placed = true;
      }
      if (!placed) throw Error(Errc::infeasible, "ran out of distinct response pairs");
    }
  }
  return out;
}

/// Draws one vote per assignment from the ground-truth likelihood.
inline Dataset simulate_votes(const SyntheticPopulation& pop,
                              const std::vector<Assignment>& assignments, std::uint64_t seed) {
  const std::size_t n = pop.n_participants();
  const std::size_t m = pop.n_responses();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Dataset data(n, m);
  data.events.reserve(assignments.size());
  for (std::size_t k = 0; k < assignments.size(); ++k) {
    const auto& a = assignments[k];
    const bool valid = a.participant < n && a.first < m &&
                       (a.kind == EventKind::Agreement || (a.second < m && a.second != a.first));
    if (!valid) throw Error(Errc::invalid_argument, "assignment " + std::to_string(k) + " invalid");
    const auto i = static_cast<Eigen::Index>(a.participant);
    const auto j = static_cast<Eigen::Index>(a.first);
    const double u = uniform(rng);
    if (a.kind == EventKind::Agreement) {
      const double p = sigmoid(pop.M_true(i, j) + pop.b_true(i));
      data.events.push_back(ExerciseEvent::agreement(a.participant, a.first, u < p));
    } else {
      const auto l = static_cast<Eigen::Index>(a.second);
      const double p = sigmoid(pop.M_true(i, j) - pop.M_true(i, l));
      data.events.push_back(u < p ? ExerciseEvent::pair_choice(a.participant, a.first, a.second)
                                  : ExerciseEvent::pair_choice(a.participant, a.second, a.first));
    }
  }
  return data;
}

}  // namespace rlsdp
