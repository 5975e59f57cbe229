#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rlsdp/aggregation.hpp"

using namespace rlsdp;

namespace {

PosteriorSamples samples_of(std::vector<UtilityState> states) {
  PosteriorSamples p;
  p.samples = std::move(states);
  return p;
}

}  // namespace

TEST(PopulationAgreement, Examples) {
  auto s = UtilityState::zeros(3, 2);
  EXPECT_EQ(population_agreement(s), Eigen::VectorXd::Constant(2, 0.5));
  s.M.col(1).setConstant(10.0);
  EXPECT_NEAR(population_agreement(s)(1), 1.0, 1e-4);
  auto two = UtilityState::zeros(2, 1);
  two.M << 2.0, -2.0;
  EXPECT_NEAR(population_agreement(two)(0), 0.5, 1e-15);
}

TEST(PopulationAgreement, IgnoresBiasUnlessAsked) {
  std::mt19937_64 rng(1);
  UtilityState s{oracle::random_matrix(4, 3, rng), oracle::random_matrix(4, 1, rng)};
  const auto q = population_agreement(s);
  s.b *= 5.0;
  EXPECT_EQ(population_agreement(s), q);
  EXPECT_NE(population_agreement(s, true), q);
}

TEST(PosteriorSummary, Examples) {
  auto a = UtilityState::zeros(1, 2);
  EXPECT_EQ(posterior_summary(samples_of({a, a, a})).std_agreement, Eigen::VectorXd::Zero(2));

  auto lo = UtilityState::zeros(1, 1), hi = UtilityState::zeros(1, 1);
  lo.M(0, 0) = std::log(0.4 / 0.6);
  hi.M(0, 0) = std::log(0.6 / 0.4);
  const auto est = posterior_summary(samples_of({lo, hi}));
  EXPECT_NEAR(est.mean_agreement(0), 0.5, 1e-12);
  EXPECT_NEAR(est.std_agreement(0), 0.141421, 1e-6);

  try {
    posterior_summary(samples_of({a}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_few_samples);
  }
}

TEST(PosteriorSummary, OrderInvariantAndInsideHull) {
  std::mt19937_64 rng(5);
  std::vector<UtilityState> states;
  for (int k = 0; k < 7; ++k) states.push_back({oracle::random_matrix(5, 4, rng, 2.0), Eigen::VectorXd::Zero(5)});
  const auto est = posterior_summary(samples_of(states));
  std::reverse(states.begin(), states.end());
  const auto rev = posterior_summary(samples_of(states));
  EXPECT_LT((est.std_agreement - rev.std_agreement).cwiseAbs().maxCoeff(), 1e-14);
  for (Eigen::Index j = 0; j < 4; ++j) {
    double lo = 1.0, hi = 0.0;
    for (const auto& s : states) {
      const double q = population_agreement(s)(j);
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    EXPECT_GE(est.mean_agreement(j), lo - 1e-15);
    EXPECT_LE(est.mean_agreement(j), hi + 1e-15);
    EXPECT_LE(est.std_agreement(j), 0.5);
  }
}

TEST(BinomialEstimate, MatchesBetaMoments) {
  BinomialPosterior post{Eigen::Vector3d(10.5, 0.5, 3.5), Eigen::Vector3d(5.5, 0.5, 7.5)};
  const auto est = binomial_estimate(post);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double a = post.alpha(j), b = post.beta(j);
    EXPECT_NEAR(est.mean_agreement(j), a / (a + b), 1e-12);
    EXPECT_NEAR(est.std_agreement(j), oracle::beta_std(a, b), 1e-12);
  }
  EXPECT_EQ(est.method_tag, Method::Binomial);
}

TEST(HoldoutAccuracy, Examples) {
  Dataset all_true(2, 2, {ExerciseEvent::agreement(0, 0, true), ExerciseEvent::agreement(1, 1, true)});
  UtilityState big{Eigen::MatrixXd::Constant(2, 2, 5.0), Eigen::VectorXd::Zero(2)};
  EXPECT_EQ(holdout_accuracy(big, all_true), 1.0);

  Dataset mixed(2, 2, {ExerciseEvent::agreement(0, 0, true), ExerciseEvent::agreement(1, 1, false),
                       ExerciseEvent::agreement(1, 0, false), ExerciseEvent::agreement(0, 1, true)});
  EXPECT_EQ(holdout_accuracy(UtilityState::zeros(2, 2), mixed), 0.5);

  std::mt19937_64 rng(3);
  const UtilityState s{oracle::random_matrix(2, 2, rng), oracle::random_matrix(2, 1, rng)};
  auto flipped = mixed;
  for (auto& e : flipped.events) e.agreed = !e.agreed;
  EXPECT_NEAR(holdout_accuracy(s, flipped), 1.0 - holdout_accuracy(s, mixed), 1e-15);

  Dataset with_pair(2, 2, {ExerciseEvent::pair_choice(0, 0, 1)});
  EXPECT_THROW(holdout_accuracy(s, with_pair), Error);
  EXPECT_THROW(holdout_accuracy(s, Dataset(2, 2)), Error);
}

TEST(PredictiveAccuracy, AveragesProbabilitiesAcrossDraws) {
  auto a = UtilityState::zeros(1, 1), b = UtilityState::zeros(1, 1);
  a.M(0, 0) = 3.0;   // sigmoid 0.95
  b.M(0, 0) = -0.5;  // sigmoid 0.38
  const auto p = predictive_agreement(samples_of({a, b}));
  EXPECT_NEAR(p(0, 0), 0.5 * (oracle::logistic(3.0) + oracle::logistic(-0.5)), 1e-15);
  const Dataset yes(1, 1, {ExerciseEvent::agreement(0, 0, true)});
  EXPECT_EQ(predictive_accuracy(p, yes), 1.0);
  EXPECT_THROW(predictive_accuracy(p, Dataset(2, 1, {ExerciseEvent::agreement(1, 0, true)})), Error);
}

TEST(MaeBetween, Examples) {
  AgreementEstimate a{Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.1, 0.2)};
  AgreementEstimate b{Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.2, 0.4)};
  EXPECT_EQ(mae_between(a, a), 0.0);
  EXPECT_NEAR(mae_between(a, b), 0.15, 1e-15);
  EXPECT_EQ(mae_between(a, b), mae_between(b, a));
  AgreementEstimate c{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  try {
    mae_between(a, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::dimension_mismatch);
  }
}

TEST(EstimateCsv, Format) {
  AgreementEstimate a{Eigen::Vector2d(0.25, 0.5), Eigen::Vector2d(0.125, 0.0), Method::HMC};
  std::ostringstream os;
  write_estimate_csv(os, a);
  EXPECT_EQ(os.str(), "response_id,mean_agreement,std_agreement,method\n0,0.25,0.125,HMC\n1,0.5,0,HMC\n");
}
