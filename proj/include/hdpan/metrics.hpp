#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "hdpan/errors.hpp"

namespace hdpan {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// A ratio whose denominator may be zero. Degenerate ratios report 0.
struct Metric {
  double value = 0.0;
  bool degenerate = false;
};

inline constexpr double kDefaultThreshold = 0.5;

// Predicted positive iff prob >= threshold.
template <typename Truth>
ConfusionMatrix confusion(std::span<const double> probs, std::span<const Truth> truths,
                          double threshold = kDefaultThreshold) {
  if (probs.size() != truths.size()) {
    throw ShapeError("confusion: " + std::to_string(probs.size()) + " predictions vs " +
                     std::to_string(truths.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    const bool truth = truths[i] != Truth{0};
    if (pred && truth) ++cm.tp;
    else if (pred) ++cm.fp;
    else if (truth) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

namespace detail {
inline Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}
}  // namespace detail

inline Metric accuracy(const ConfusionMatrix& cm) { return detail::ratio(cm.tp + cm.tn, cm.total()); }
inline Metric precision(const ConfusionMatrix& cm) { return detail::ratio(cm.tp, cm.tp + cm.fp); }
inline Metric recall(const ConfusionMatrix& cm) { return detail::ratio(cm.tp, cm.tp + cm.fn); }

// F1 = 2PR / (P + R). Degenerate when either P or R is, or when both are 0.
inline Metric f1(const ConfusionMatrix& cm) {
  const Metric p = precision(cm);
  const Metric r = recall(cm);
  if (p.degenerate || r.degenerate || p.value + r.value == 0.0) return {0.0, true};
  return {2.0 * p.value * r.value / (p.value + r.value), false};
}

struct MetricReport {
  ConfusionMatrix cm;
  Metric accuracy;
  Metric precision;
  Metric recall;
  Metric f1;
};

inline MetricReport report(const ConfusionMatrix& cm) {
  return {cm, hdpan::accuracy(cm), hdpan::precision(cm), hdpan::recall(cm), hdpan::f1(cm)};
}

}  // namespace hdpan
