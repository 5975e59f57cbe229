#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rlsdp/error.hpp"
#include "rlsdp/inference.hpp"
#include "rlsdp/model.hpp"

namespace rlsdp {

/// Predicted population agreement per response with its posterior spread.
struct AgreementEstimate {
  Eigen::VectorXd mean_agreement;
  Eigen::VectorXd std_agreement;
  Method method_tag = Method::SWA;

  std::size_t n_responses() const { return static_cast<std::size_t>(mean_agreement.size()); }
};

/// Mean over participants of sigmoid(m_ij). The bias is left out unless asked for.
inline Eigen::VectorXd population_agreement(const UtilityState& state, bool include_bias = false) {
  const auto n = state.M.rows();
  const auto m = state.M.cols();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(m);
  if (n == 0) return q;
  for (Eigen::Index j = 0; j < m; ++j) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += sigmoid(state.M(i, j) + (include_bias ? state.b(i) : 0.0));
    }
    q(j) = acc / static_cast<double>(n);
  }
  return q;
}

/// Per-response sample mean and sample standard deviation (n - 1 divisor)
/// of the population agreement across posterior draws.
inline AgreementEstimate posterior_summary(const PosteriorSamples& samples,
                                           bool include_bias = false) {
  const auto count = samples.samples.size();
  if (count < 2) throw Error(Errc::too_few_samples, "posterior_summary needs at least 2 samples");
  const auto m = samples.samples.front().M.cols();
  Eigen::MatrixXd q(m, static_cast<Eigen::Index>(count));
  for (std::size_t s = 0; s < count; ++s) {
    q.col(static_cast<Eigen::Index>(s)) = population_agreement(samples.samples[s], include_bias);
  }
  AgreementEstimate est;
  est.method_tag = samples.method_tag;
  est.mean_agreement = q.rowwise().mean();
  const Eigen::MatrixXd centered = q.colwise() - est.mean_agreement;
  est.std_agreement =
      (centered.array().square().rowwise().sum() / static_cast<double>(count - 1)).sqrt().matrix();
  return est;
}

/// Beta posterior moments of the binomial baseline as an estimate.
inline AgreementEstimate binomial_estimate(const BinomialPosterior& post) {
  AgreementEstimate est;
  est.method_tag = Method::Binomial;
  const auto m = static_cast<Eigen::Index>(post.n_responses());
  est.mean_agreement.resize(m);
  est.std_agreement.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    est.mean_agreement(j) = beta_mean(post.alpha(j), post.beta(j));
    est.std_agreement(j) = beta_std(post.alpha(j), post.beta(j));
  }
  return est;
}

/// Elementwise average of the sampled states.
inline UtilityState mean_state(const PosteriorSamples& samples) {
  if (samples.samples.empty()) throw Error(Errc::too_few_samples, "no samples to average");
  UtilityState avg = samples.samples.front();
  for (std::size_t s = 1; s < samples.samples.size(); ++s) {
    avg.M += samples.samples[s].M;
    avg.b += samples.samples[s].b;
  }
  const double inv = 1.0 / static_cast<double>(samples.samples.size());
  avg.M *= inv;
  avg.b *= inv;
  return avg;
}

/// Predicts "agree" when sigmoid(m_ij + b_i) >= 1/2 and scores against the votes.
inline double holdout_accuracy(const UtilityState& state, const Dataset& holdout) {
  detail::check_shape(state, holdout);
  holdout.validate();
  if (holdout.empty()) throw Error(Errc::empty_dataset, "empty holdout");
  std::size_t correct = 0;
  for (const auto& e : holdout.events) {
    if (!e.is_agreement()) {
      throw Error(Errc::invalid_argument, "holdout must contain agreement events only");
    }
    const auto i = static_cast<Eigen::Index>(e.participant);
    const auto j = static_cast<Eigen::Index>(e.response());
    const bool predicted = state.M(i, j) + state.b(i) >= 0.0;
    if (predicted == e.agreed) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(holdout.size());
}

/// Binomial-baseline accuracy: every participant is predicted to side with the response's posterior mean.
inline double holdout_accuracy(const BinomialPosterior& post, const Dataset& holdout) {
  if (holdout.empty()) throw Error(Errc::empty_dataset, "empty holdout");
  std::size_t correct = 0;
  for (const auto& e : holdout.events) {
    if (!e.is_agreement()) {
      throw Error(Errc::invalid_argument, "holdout must contain agreement events only");
    }
    const bool predicted = binomial_mean(post, e.response()) >= 0.5;
    if (predicted == e.agreed) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(holdout.size());
}

/// Posterior predictive agreement probability per cell: the mean over draws of
/// sigmoid(m_ij + b_i).
inline Eigen::MatrixXd predictive_agreement(const PosteriorSamples& samples) {
  if (samples.samples.empty()) throw Error(Errc::too_few_samples, "no samples to average");
  const auto& first = samples.samples.front();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(first.M.rows(), first.M.cols());
  for (const auto& s : samples.samples) {
    p += (s.M.colwise() + s.b).unaryExpr([](double x) { return sigmoid(x); });
  }
  return p / static_cast<double>(samples.samples.size());
}

/// Accuracy of predicting "agree" when the predictive probability is >= 1/2.
inline double predictive_accuracy(const Eigen::MatrixXd& agree_prob, const Dataset& holdout) {
  if (holdout.empty()) throw Error(Errc::empty_dataset, "empty holdout");
  if (holdout.n_participants != static_cast<std::size_t>(agree_prob.rows()) ||
      holdout.n_responses != static_cast<std::size_t>(agree_prob.cols())) {
    throw Error(Errc::dimension_mismatch, "holdout shape differs from the probability matrix");
  }
  holdout.validate();
  std::size_t correct = 0;
  for (const auto& e : holdout.events) {
    if (!e.is_agreement()) {
      throw Error(Errc::invalid_argument, "holdout must contain agreement events only");
    }
    const bool predicted = agree_prob(static_cast<Eigen::Index>(e.participant),
                                      static_cast<Eigen::Index>(e.response())) >= 0.5;
    if (predicted == e.agreed) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(holdout.size());
}

/// Mean absolute difference of the two confidence vectors.
inline double mae_between(const AgreementEstimate& a, const AgreementEstimate& b) {
  if (a.n_responses() != b.n_responses()) {
    throw Error(Errc::dimension_mismatch, "estimates cover different response counts");
  }
  if (a.n_responses() == 0) return 0.0;
  return (a.std_agreement - b.std_agreement).cwiseAbs().mean();
}

/// CSV with header response_id,mean_agreement,std_agreement,method.
inline void write_estimate_csv(std::ostream& os, const AgreementEstimate& est) {
  os << "response_id,mean_agreement,std_agreement,method\n";
  os << std::setprecision(17);
  for (Eigen::Index j = 0; j < est.mean_agreement.size(); ++j) {
    os << j << ',' << est.mean_agreement(j) << ',' << est.std_agreement(j) << ','
       << to_string(est.method_tag) << '\n';
  }
}

}  // namespace rlsdp
