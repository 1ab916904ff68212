#pragma once

// The adversarial value function shared by classifier C and discriminator D.
//
// Hölder form (canonical):
//   V = -[ agg_pos D(1 || d) + agg_unl D(0 || d) ]
//       + lambda * agg_unl [ D(d || c) - D(d || 1 - c) ]
//
// KL log form (baseline):
//   V = agg_pos log d + agg_unl log(1 - d)
//       + lambda * agg_unl (log(1 - c) - log c)(2d - 1)
//
// where agg is a per-set mean (default) or a plain sum. D maximizes V and C
// minimizes it; both are trained by descent, on loss_D = -V and loss_C = +V.

#include <cmath>
#include <span>
#include <vector>

#include "hdpan/divergence.hpp"

namespace hdpan {

enum class Reduction { kMean, kSum };
enum class DivergenceFamily { kHolder, kKl };

struct BatchView {
  std::span<const double> d_pos;  // D on labeled positives
  std::span<const double> d_unl;  // D on unlabeled
  std::span<const double> c_unl;  // C on the same unlabeled samples
  double lambda = 0.1;
  HolderExponents exps{2.0};
  Reduction reduction = Reduction::kMean;
};

namespace detail {

inline double set_weight(std::size_t n, Reduction r) {
  if (n == 0) return 0.0;
  return r == Reduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;
}

inline double divergence(DivergenceFamily fam, double p, double q, const HolderExponents& exps) {
  return fam == DivergenceFamily::kHolder ? holder_div_bernoulli(BernoulliDist(p), BernoulliDist(q), exps)
                                          : kl_bernoulli(BernoulliDist(p), BernoulliDist(q));
}

inline DivergenceGrad divergence_grad(DivergenceFamily fam, double p, double q,
                                      const HolderExponents& exps) {
  return fam == DivergenceFamily::kHolder
             ? holder_div_bernoulli_grad(BernoulliDist(p), BernoulliDist(q), exps)
             : kl_bernoulli_grad(BernoulliDist(p), BernoulliDist(q));
}

inline void require_paired(const BatchView& b) {
  if (b.lambda != 0.0 && b.c_unl.size() != b.d_unl.size()) {
    throw ShapeError("objective: D and C outputs on the unlabeled batch differ in length");
  }
  if (!std::isfinite(b.lambda) || b.lambda < 0.0) {
    throw DomainError("objective: lambda must be finite and >= 0");
  }
}

inline double checked(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite");
  return v;
}

}  // namespace detail

inline double hdpan_value(const BatchView& b, DivergenceFamily fam = DivergenceFamily::kHolder) {
  if (b.d_pos.empty() && b.d_unl.empty()) throw ShapeError("hdpan_value: empty batch");
  detail::require_paired(b);
  const double wp = detail::set_weight(b.d_pos.size(), b.reduction);
  const double wu = detail::set_weight(b.d_unl.size(), b.reduction);
  double fit = 0.0;
  for (double d : b.d_pos) fit += wp * detail::divergence(fam, 1.0, d, b.exps);
  for (double d : b.d_unl) fit += wu * detail::divergence(fam, 0.0, d, b.exps);
  double adversarial = 0.0;
  if (b.lambda != 0.0) {
    for (std::size_t j = 0; j < b.d_unl.size(); ++j) {
      const double d = b.d_unl[j], c = b.c_unl[j];
      adversarial += wu * (detail::divergence(fam, d, c, b.exps) -
                           detail::divergence(fam, d, 1.0 - c, b.exps));
    }
  }
  return detail::checked(-fit + b.lambda * adversarial, "objective value");
}

// d(-V)/d(d_i) for d_pos ++ d_unl. C outputs are constants here.
inline std::vector<double> d_output_grads(const BatchView& b, bool include_lambda_terms = true,
                                          DivergenceFamily fam = DivergenceFamily::kHolder) {
  detail::require_paired(b);
  const double wp = detail::set_weight(b.d_pos.size(), b.reduction);
  const double wu = detail::set_weight(b.d_unl.size(), b.reduction);
  std::vector<double> g;
  g.reserve(b.d_pos.size() + b.d_unl.size());
  for (double d : b.d_pos) g.push_back(wp * detail::divergence_grad(fam, 1.0, d, b.exps).d_q);
  for (std::size_t j = 0; j < b.d_unl.size(); ++j) {
    const double d = b.d_unl[j];
    double gj = wu * detail::divergence_grad(fam, 0.0, d, b.exps).d_q;
    if (include_lambda_terms && b.lambda != 0.0) {
      const double c = b.c_unl[j];
      const double toward = detail::divergence_grad(fam, d, c, b.exps).d_p;
      const double away = detail::divergence_grad(fam, d, 1.0 - c, b.exps).d_p;
      gj -= b.lambda * wu * (toward - away);
    }
    g.push_back(detail::checked(gj, "discriminator gradient"));
  }
  return g;
}

// dV/d(c_j). Only the lambda terms depend on C; D outputs are constants.
inline std::vector<double> c_output_grads(const BatchView& b,
                                          DivergenceFamily fam = DivergenceFamily::kHolder) {
  detail::require_paired(b);
  const double wu = detail::set_weight(b.d_unl.size(), b.reduction);
  std::vector<double> g(b.c_unl.size(), 0.0);
  if (b.lambda == 0.0) return g;
  for (std::size_t j = 0; j < b.c_unl.size(); ++j) {
    const double d = b.d_unl[j], c = b.c_unl[j];
    // d/dc D(d || 1 - c) = -D_q(d, 1 - c), so the repulsive term adds.
    const double toward = detail::divergence_grad(fam, d, c, b.exps).d_q;
    const double away = detail::divergence_grad(fam, d, 1.0 - c, b.exps).d_q;
    g[j] = detail::checked(b.lambda * wu * (toward + away), "classifier gradient");
  }
  return g;
}

inline double pan_kl_value(const BatchView& b) {
  if (b.d_pos.empty() && b.d_unl.empty()) throw ShapeError("pan_kl_value: empty batch");
  detail::require_paired(b);
  const double wp = detail::set_weight(b.d_pos.size(), b.reduction);
  const double wu = detail::set_weight(b.d_unl.size(), b.reduction);
  double v = 0.0;
  for (double d : b.d_pos) v += wp * std::log(clamp_prob(d));
  for (double d : b.d_unl) v += wu * std::log(1.0 - clamp_prob(d));
  if (b.lambda != 0.0) {
    double adv = 0.0;
    for (std::size_t j = 0; j < b.d_unl.size(); ++j) {
      const double d = clamp_prob(b.d_unl[j]), c = clamp_prob(b.c_unl[j]);
      adv += wu * (std::log(1.0 - c) - std::log(c)) * (2.0 * d - 1.0);
    }
    v += b.lambda * adv;
  }
  return detail::checked(v, "objective value");
}

// d(-V_kl)/d(d_i) for d_pos ++ d_unl.
inline std::vector<double> pan_kl_d_grads(const BatchView& b, bool include_lambda_terms = true) {
  detail::require_paired(b);
  const double wp = detail::set_weight(b.d_pos.size(), b.reduction);
  const double wu = detail::set_weight(b.d_unl.size(), b.reduction);
  std::vector<double> g;
  g.reserve(b.d_pos.size() + b.d_unl.size());
  for (double d : b.d_pos) g.push_back(-wp / clamp_prob(d));
  for (std::size_t j = 0; j < b.d_unl.size(); ++j) {
    const double d = clamp_prob(b.d_unl[j]);
    double gj = wu / (1.0 - d);
    if (include_lambda_terms && b.lambda != 0.0) {
      const double c = clamp_prob(b.c_unl[j]);
      gj -= b.lambda * wu * 2.0 * (std::log(1.0 - c) - std::log(c));
    }
    g.push_back(gj);
  }
  return g;
}

// dV_kl/d(c_j).
inline std::vector<double> pan_kl_c_grads(const BatchView& b) {
  detail::require_paired(b);
  const double wu = detail::set_weight(b.d_unl.size(), b.reduction);
  std::vector<double> g(b.c_unl.size(), 0.0);
  if (b.lambda == 0.0) return g;
  for (std::size_t j = 0; j < b.c_unl.size(); ++j) {
    const double d = clamp_prob(b.d_unl[j]), c = clamp_prob(b.c_unl[j]);
    g[j] = b.lambda * wu * (2.0 * d - 1.0) * (-1.0 / (1.0 - c) - 1.0 / c);
  }
  return g;
}

}  // namespace hdpan
