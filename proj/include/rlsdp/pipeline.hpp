#pragma once

// One inference run from a dataset to an agreement estimate: MAP, then the
// chosen sampler, then the posterior summary. Binomial skips the model.

#include <chrono>
#include <cstdint>
#include <optional>

#include "rlsdp/aggregation.hpp"
#include "rlsdp/config.hpp"
#include "rlsdp/inference.hpp"
#include "rlsdp/model.hpp"

namespace rlsdp {

struct InferenceOutcome {
  AgreementEstimate estimate;
  /// Posterior predictive agreement probability per cell; empty for the binomial baseline.
  std::optional<Eigen::MatrixXd> predictive;
  std::optional<BinomialPosterior> binomial;
  double wall_clock_seconds = 0.0;  ///< MAP plus sampling
  double acceptance_rate = 1.0;
};

/// Seeds of the three stages derived from one run seed.
inline void seed_configs(InferenceSettings& s, std::uint64_t seed) {
  s.map.seed = seed;
  s.swa.seed = seed + 1;
  s.hmc.seed = seed + 2;
}

inline InferenceOutcome run_inference(const Dataset& data, Method method,
                                      const InferenceSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  InferenceOutcome out;
  if (method == Method::Binomial) {
    out.binomial = binomial_posterior(data);
    out.estimate = binomial_estimate(*out.binomial);
  } else {
    const auto model = settings.model_for(data.n_participants, data.n_responses);
    // With no votes the zero state is the MAP of the prior.
    const auto init = data.empty() ? UtilityState::zeros(data.n_participants, data.n_responses)
                                   : fit_map(data, model, settings.map);
    const auto samples = method == Method::SWA ? swa_sample(data, init, model, settings.swa)
                                               : hmc_sample(data, init, model, settings.hmc);
    out.estimate = posterior_summary(samples);
    out.predictive = predictive_agreement(samples);
    out.acceptance_rate = samples.acceptance_rate;
  }
  out.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline double holdout_accuracy(const InferenceOutcome& outcome, const Dataset& holdout) {
  return outcome.predictive ? predictive_accuracy(*outcome.predictive, holdout)
                            : holdout_accuracy(*outcome.binomial, holdout);
}

}  // namespace rlsdp
