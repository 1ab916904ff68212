#include "hdpan/objective.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace hdpan {
namespace {

struct Batch {
  std::vector<double> d_pos, d_unl, c_unl;
  double lambda = 0.1;
  double alpha = 2.0;
  Reduction reduction = Reduction::kMean;

  BatchView view() const { return {d_pos, d_unl, c_unl, lambda, HolderExponents(alpha), reduction}; }
};

Batch random_batch(std::mt19937_64& rng, std::size_t np, std::size_t nu) {
  std::uniform_real_distribution<double> prob(0.05, 0.95);
  std::uniform_real_distribution<double> alpha(1.2, 3.5);
  std::uniform_real_distribution<double> lam(0.0, 2.0);
  Batch b;
  for (std::size_t i = 0; i < np; ++i) b.d_pos.push_back(prob(rng));
  for (std::size_t i = 0; i < nu; ++i) {
    b.d_unl.push_back(prob(rng));
    b.c_unl.push_back(prob(rng));
  }
  b.alpha = alpha(rng);
  b.lambda = lam(rng);
  return b;
}

// Finite difference of `value` with respect to one entry of `vec`.
double fd(Batch& b, std::vector<double>& vec, std::size_t i, const std::function<double(const BatchView&)>& value) {
  const double orig = vec[i];
  vec[i] = orig + 1e-6;
  const double up = value(b.view());
  vec[i] = orig - 1e-6;
  const double down = value(b.view());
  vec[i] = orig;
  return (up - down) / 2e-6;
}

const auto kHolderValue = [](const BatchView& v) { return hdpan_value(v); };
const auto kKlValue = [](const BatchView& v) { return pan_kl_value(v); };

TEST(HdpanValue, ZeroWhenDiscriminatorMatchesTargets) {
  Batch b;
  b.d_pos = {1.0, 1.0, 1.0};
  b.d_unl = {0.0, 0.0};
  b.c_unl = {0.3, 0.8};
  b.lambda = 0.0;
  const double v = hdpan_value(b.view());
  EXPECT_LE(std::abs(v), 1e-5 * 5);
}

TEST(HdpanValue, LambdaZeroKeepsOnlyFitTerm) {
  std::mt19937_64 rng(1);
  Batch b = random_batch(rng, 3, 4);
  b.lambda = 0.0;
  const HolderExponents e(b.alpha);
  double fit = 0.0;
  for (double d : b.d_pos) fit += holder_div_bernoulli(BernoulliDist(1.0), BernoulliDist(d), e) / 3.0;
  for (double d : b.d_unl) fit += holder_div_bernoulli(BernoulliDist(0.0), BernoulliDist(d), e) / 4.0;
  EXPECT_NEAR(hdpan_value(b.view()), -fit, 1e-12);
  b.c_unl = {0.99, 0.01, 0.5, 0.5};
  EXPECT_NEAR(hdpan_value(b.view()), -fit, 1e-12);
}

TEST(HdpanValue, AdversarialTermVanishesBySymmetryAtOneHalf) {
  // d = 0.5: the Cauchy-Schwarz divergence is symmetric under c <-> 1 - c.
  const double toward = oracle::holder_divergence({0.5, 0.5}, {0.9, 0.1}, 2.0);
  const double away = oracle::holder_divergence({0.5, 0.5}, {0.1, 0.9}, 2.0);
  EXPECT_NEAR(toward - away, 0.0, 1e-15);
  Batch with, without;
  with.d_unl = without.d_unl = {0.5};
  with.c_unl = without.c_unl = {0.9};
  with.lambda = 1.0;
  without.lambda = 0.0;
  EXPECT_NEAR(hdpan_value(with.view()), hdpan_value(without.view()), 1e-15);
}

TEST(HdpanValue, SumReductionMatchesExplicitSums) {
  Batch b;
  b.d_pos = {0.7, 0.7};
  b.d_unl = {0.2, 0.2, 0.2, 0.2};
  b.c_unl = {0.6, 0.6, 0.6, 0.6};
  const HolderExponents e(2.0);
  const double pos = holder_div_bernoulli(BernoulliDist(1.0), BernoulliDist(0.7), e);
  const double unl = holder_div_bernoulli(BernoulliDist(0.0), BernoulliDist(0.2), e);
  const double adv = holder_div_bernoulli(BernoulliDist(0.2), BernoulliDist(0.6), e) -
                     holder_div_bernoulli(BernoulliDist(0.2), BernoulliDist(0.4), e);
  EXPECT_NEAR(hdpan_value(b.view()), -(pos + unl) + 0.1 * adv, 1e-12);
  b.reduction = Reduction::kSum;
  EXPECT_NEAR(hdpan_value(b.view()), -(2 * pos + 4 * unl) + 0.1 * 4 * adv, 1e-12);
  EXPECT_THROW(hdpan_value(BatchView{}), ShapeError);
}

TEST(DOutputGrads, ZeroAtTargetsWithoutLambda) {
  Batch b;
  b.d_pos = {1.0 - kProbEpsilon};
  b.d_unl = {kProbEpsilon};
  b.c_unl = {0.4};
  b.lambda = 0.0;
  for (double g : d_output_grads(b.view())) EXPECT_NEAR(g, 0.0, 1e-6);
}

TEST(DOutputGrads, MatchFiniteDifferencesOfNegativeValue) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    Batch b = random_batch(rng, 1 + t % 4, 1 + t % 5);
    b.reduction = t % 2 ? Reduction::kMean : Reduction::kSum;
    const auto g = d_output_grads(b.view());
    for (std::size_t i = 0; i < b.d_pos.size(); ++i) {
      EXPECT_LE(oracle::rel_err(g[i], -fd(b, b.d_pos, i, kHolderValue)), 1e-4);
    }
    for (std::size_t j = 0; j < b.d_unl.size(); ++j) {
      EXPECT_LE(oracle::rel_err(g[b.d_pos.size() + j], -fd(b, b.d_unl, j, kHolderValue)), 1e-4);
    }
  }
}

TEST(DOutputGrads, DescentRaisesPositiveBelowTarget) {
  Batch b;
  b.d_pos = {0.3};
  b.lambda = 0.0;
  const auto g = d_output_grads(b.view());
  EXPECT_LT(g[0], 0.0);  // descending on -V increases d
  EXPECT_GT(fd(b, b.d_pos, 0, kHolderValue), 0.0);
}

TEST(DOutputGrads, LambdaTermsCanBeExcluded) {
  std::mt19937_64 rng(3);
  Batch b = random_batch(rng, 2, 3);
  const auto with = d_output_grads(b.view(), true);
  const auto without = d_output_grads(b.view(), false);
  Batch no_lambda = b;
  no_lambda.lambda = 0.0;
  EXPECT_EQ(without, d_output_grads(no_lambda.view()));
  EXPECT_NE(with, without);
}

TEST(COutputGrads, ZeroWithoutLambda) {
  std::mt19937_64 rng(4);
  Batch b = random_batch(rng, 2, 5);
  b.lambda = 0.0;
  for (double g : c_output_grads(b.view())) EXPECT_EQ(g, 0.0);
}

TEST(COutputGrads, MatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    Batch b = random_batch(rng, t % 3, 1 + t % 6);
    b.lambda = std::max(b.lambda, 0.05);
    const auto g = c_output_grads(b.view());
    for (std::size_t j = 0; j < b.c_unl.size(); ++j) {
      EXPECT_LE(oracle::rel_err(g[j], fd(b, b.c_unl, j, kHolderValue)), 1e-4);
    }
  }
}

TEST(COutputGrads, AttractiveTermVanishesAtCEqualsD) {
  for (double d : {0.2, 0.45, 0.8}) {
    const HolderExponents e(2.0);
    const auto toward = [&](double c) { return holder_div_bernoulli(BernoulliDist(d), BernoulliDist(c), e); };
    const auto away = [&](double c) { return -holder_div_bernoulli(BernoulliDist(d), BernoulliDist(1 - c), e); };
    EXPECT_NEAR(oracle::central_diff(toward, d), 0.0, 1e-8);
    Batch b;
    b.d_unl = {d};
    b.c_unl = {d};
    b.lambda = 1.0;
    EXPECT_NEAR(c_output_grads(b.view())[0], oracle::central_diff(away, d), 1e-6);
  }
}

TEST(Detachment, CGradsIgnoreFitTermAndDGradsIgnoreC) {
  std::mt19937_64 rng(6);
  Batch b = random_batch(rng, 3, 4);
  const auto gc = c_output_grads(b.view());
  Batch other = b;
  other.d_pos = {0.11, 0.99};
  EXPECT_EQ(c_output_grads(other.view()), gc);

  b.lambda = 0.0;
  const auto gd = d_output_grads(b.view());
  b.c_unl = {0.9, 0.1, 0.5, 0.3};
  EXPECT_EQ(d_output_grads(b.view()), gd);
}

TEST(PanKlValue, ZeroAtTargetsAndNeutralPoints) {
  Batch b;
  b.d_pos = {1.0};
  b.d_unl = {0.0};
  b.c_unl = {0.7};
  b.lambda = 0.0;
  EXPECT_LE(std::abs(pan_kl_value(b.view())), 2e-6);

  b.d_unl = {0.3};
  b.c_unl = {0.5};
  b.lambda = 1.0;
  Batch base = b;
  base.lambda = 0.0;
  EXPECT_NEAR(pan_kl_value(b.view()), pan_kl_value(base.view()), 1e-15);

  b.d_unl = {0.5};
  b.c_unl = {0.83};
  base.d_unl = {0.5};
  EXPECT_NEAR(pan_kl_value(b.view()), pan_kl_value(base.view()), 1e-15);
}

TEST(PanKlGrads, MatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    Batch b = random_batch(rng, 1 + t % 3, 1 + t % 4);
    const auto gd = pan_kl_d_grads(b.view());
    const auto gc = pan_kl_c_grads(b.view());
    for (std::size_t i = 0; i < b.d_pos.size(); ++i) {
      EXPECT_LE(oracle::rel_err(gd[i], -fd(b, b.d_pos, i, kKlValue)), 1e-4);
    }
    for (std::size_t j = 0; j < b.d_unl.size(); ++j) {
      EXPECT_LE(oracle::rel_err(gd[b.d_pos.size() + j], -fd(b, b.d_unl, j, kKlValue)), 1e-4);
      EXPECT_LE(oracle::rel_err(gc[j], fd(b, b.c_unl, j, kKlValue)), 1e-4);
    }
  }
}

TEST(KlFamily, HolderFormWithKlAgreesInDirectionWithLogForm) {
  // With KL in place of the Hölder divergence the fit terms become -log d and
  // -log(1 - d) and the adversarial bracket becomes (2d - 1) log((1 - c)/c),
  // so single-sample gradients must agree in sign.
  std::mt19937_64 rng(8);
  const auto kl_form = [](const BatchView& v) { return hdpan_value(v, DivergenceFamily::kKl); };
  for (int t = 0; t < 500; ++t) {
    Batch b = random_batch(rng, t % 2, 1 - t % 2);
    if (b.d_unl.empty()) b.c_unl.clear();
    auto& vec = b.d_pos.empty() ? b.d_unl : b.d_pos;
    const double a = fd(b, vec, 0, kl_form);
    const double k = fd(b, vec, 0, kKlValue);
    EXPECT_EQ(a > 0, k > 0);
    if (!b.c_unl.empty()) {
      EXPECT_EQ(fd(b, b.c_unl, 0, kl_form) > 0, fd(b, b.c_unl, 0, kKlValue) > 0);
    }
  }
}

}  // namespace
}  // namespace hdpan
