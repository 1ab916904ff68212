#pragma once

// Closed-form Hölder pseudo-divergences and KL divergence over discrete and
// Bernoulli distributions.
//
// For conjugate exponents 1/alpha + 1/beta = 1 the Hölder inequality reads
//
//   sum_i p_i q_i <= (sum_i p_i^alpha)^(1/alpha) (sum_i q_i^beta)^(1/beta)
//
// and the pseudo-divergence is the negative log of lhs/rhs. It is >= 0,
// vanishes iff p^alpha is proportional to q^beta, and is asymmetric except at
// alpha = beta = 2 (Cauchy-Schwarz).
//
// Everything here is evaluated in double precision regardless of the network
// scalar type.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hdpan/errors.hpp"

namespace hdpan {

// Clamp applied to every Bernoulli probability before evaluation.
inline constexpr double kProbEpsilon = 1e-7;

inline double clamp_prob(double p) {
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

// Returns beta = alpha / (alpha - 1). Only the alpha > 1 branch is supported.
inline double conjugate(double alpha) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw DomainError("Hölder exponent alpha must be a finite value > 1, got " +
                      std::to_string(alpha));
  }
  return alpha / (alpha - 1.0);
}

class HolderExponents {
 public:
  explicit HolderExponents(double alpha) : alpha_(alpha), beta_(conjugate(alpha)) {}

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  double alpha_;
  double beta_;
};

// Probability of the positive outcome. Construction clamps into
// [kProbEpsilon, 1 - kProbEpsilon].
class BernoulliDist {
 public:
  explicit BernoulliDist(double p) : p_(clamp_prob(p)) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError("Bernoulli probability outside [0,1]: " + std::to_string(p));
    }
  }

  double p() const { return p_; }
  BernoulliDist inverse() const { return BernoulliDist(1.0 - p_); }

 private:
  double p_;
};

class DiscreteDist {
 public:
  explicit DiscreteDist(std::vector<double> weights) : weights_(std::move(weights)) {
    bool any_positive = false;
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw DomainError("discrete distribution weights must be finite and >= 0");
      }
      any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) {
      throw DomainError("discrete distribution needs at least one positive weight");
    }
  }

  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }

 private:
  std::vector<double> weights_;
};

struct HolderSides {
  double lhs;
  double rhs;
};

// Both sides of the Hölder inequality for non-negative vectors.
inline HolderSides holder_inequality_sides(std::span<const double> f, std::span<const double> g,
                                           const HolderExponents& exps) {
  if (f.size() != g.size()) {
    throw ShapeError("holder_inequality_sides: length mismatch");
  }
  double inner = 0.0;
  double f_pow = 0.0;
  double g_pow = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    inner += f[i] * g[i];
    f_pow += std::pow(f[i], exps.alpha());
    g_pow += std::pow(g[i], exps.beta());
  }
  return {inner, std::pow(f_pow, 1.0 / exps.alpha()) * std::pow(g_pow, 1.0 / exps.beta())};
}

inline double holder_div_discrete(const DiscreteDist& p, const DiscreteDist& q,
                                  const HolderExponents& exps) {
  if (p.size() != q.size()) {
    throw ShapeError("holder_div_discrete: distributions differ in length");
  }
  double inner = 0.0;
  double p_pow = 0.0;
  double q_pow = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inner += p.weights()[i] * q.weights()[i];
    p_pow += std::pow(p.weights()[i], exps.alpha());
    q_pow += std::pow(q.weights()[i], exps.beta());
  }
  if (!(inner > 0.0)) {
    throw InfiniteDivergence("Hölder divergence is infinite: distributions have disjoint support");
  }
  // log space: -log(inner) + log(||p||_alpha) + log(||q||_beta)
  return -std::log(inner) + std::log(p_pow) / exps.alpha() + std::log(q_pow) / exps.beta();
}

inline double holder_div_bernoulli(BernoulliDist p, BernoulliDist q, const HolderExponents& exps) {
  const double a = exps.alpha();
  const double b = exps.beta();
  const double pp = p.p();
  const double qq = q.p();
  const double inner = pp * qq + (1.0 - pp) * (1.0 - qq);
  return -std::log(inner) + std::log(std::pow(pp, a) + std::pow(1.0 - pp, a)) / a +
         std::log(std::pow(qq, b) + std::pow(1.0 - qq, b)) / b;
}

struct DivergenceGrad {
  double d_p;
  double d_q;
};

// Partial derivatives of holder_div_bernoulli with respect to p and q.
inline DivergenceGrad holder_div_bernoulli_grad(BernoulliDist p, BernoulliDist q,
                                                const HolderExponents& exps) {
  const double a = exps.alpha();
  const double b = exps.beta();
  const double pp = p.p();
  const double qq = q.p();
  const double inner = pp * qq + (1.0 - pp) * (1.0 - qq);
  const double p_norm = std::pow(pp, a) + std::pow(1.0 - pp, a);
  const double q_norm = std::pow(qq, b) + std::pow(1.0 - qq, b);
  const double dp = -(2.0 * qq - 1.0) / inner +
                    (std::pow(pp, a - 1.0) - std::pow(1.0 - pp, a - 1.0)) / p_norm;
  const double dq = -(2.0 * pp - 1.0) / inner +
                    (std::pow(qq, b - 1.0) - std::pow(1.0 - qq, b - 1.0)) / q_norm;
  return {dp, dq};
}

inline double kl_bernoulli(BernoulliDist p, BernoulliDist q) {
  const double pp = p.p();
  const double qq = q.p();
  return pp * std::log(pp / qq) + (1.0 - pp) * std::log((1.0 - pp) / (1.0 - qq));
}

inline DivergenceGrad kl_bernoulli_grad(BernoulliDist p, BernoulliDist q) {
  const double pp = p.p();
  const double qq = q.p();
  return {std::log(pp / qq) - std::log((1.0 - pp) / (1.0 - qq)),
          -pp / qq + (1.0 - pp) / (1.0 - qq)};
}

}  // namespace hdpan
