#pragma once

// Test-only reference implementations. Nothing here calls into the library's
// numeric code paths.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace hdpan::oracle {

using Big = boost::multiprecision::cpp_bin_float_50;

// Direct evaluation of -log( <p,q> / (||p||_alpha ||q||_beta) ) in 50 digits.
inline double holder_divergence(const std::vector<double>& p, const std::vector<double>& q, double alpha) {
  const Big a(alpha);
  const Big b = a / (a - 1);
  Big inner = 0, pa = 0, qb = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    inner += Big(p[i]) * Big(q[i]);
    pa += pow(Big(p[i]), a);
    qb += pow(Big(q[i]), b);
  }
  return static_cast<double>(-log(inner / (pow(pa, 1 / a) * pow(qb, 1 / b))));
}

inline double kl_bernoulli(double p, double q) {
  const Big bp(p), bq(q);
  return static_cast<double>(bp * log(bp / bq) + (1 - bp) * log((1 - bp) / (1 - bq)));
}

// Central difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero gradients from
// dominating the relative measure.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Per-sample loop over predictions.
inline Confusion naive_confusion(std::span<const double> probs, std::span<const std::uint8_t> truth,
                                 double threshold = 0.5) {
  Confusion c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int pred = probs[i] >= threshold ? 1 : 0;
    const int t = truth[i] ? 1 : 0;
    c.tp += (pred == 1 && t == 1);
    c.fp += (pred == 1 && t == 0);
    c.tn += (pred == 0 && t == 0);
    c.fn += (pred == 0 && t == 1);
  }
  return c;
}

struct NaiveMetrics {
  double acc = 0, prec = 0, rec = 0, f1 = 0;
};

inline NaiveMetrics naive_metrics(const Confusion& c) {
  NaiveMetrics m;
  const double total = static_cast<double>(c.tp + c.fp + c.tn + c.fn);
  if (total > 0) m.acc = static_cast<double>(c.tp + c.tn) / total;
  if (c.tp + c.fp > 0) m.prec = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.rec = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tp + c.fp > 0 && c.tp + c.fn > 0 && m.prec + m.rec > 0) m.f1 = 2 * m.prec * m.rec / (m.prec + m.rec);
  return m;
}

}  // namespace hdpan::oracle
