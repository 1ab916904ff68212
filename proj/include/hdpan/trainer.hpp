#pragma once

// Alternating discriminator/classifier optimization with mini-batching,
// best-F1 model selection, early stopping and (alpha, lr) grid search.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "hdpan/metrics.hpp"
#include "hdpan/models.hpp"
#include "hdpan/objective.hpp"
#include "hdpan/pudata.hpp"

namespace hdpan {

enum class Objective { kHolder, kKl };

inline Objective parse_objective(const std::string& s) {
  if (s == "holder") return Objective::kHolder;
  if (s == "kl") return Objective::kKl;
  throw ConfigError("objective must be 'holder' or 'kl', got '" + s + "'");
}

inline std::string to_string(Objective o) { return o == Objective::kHolder ? "holder" : "kl"; }

struct TrainConfig {
  double alpha = 1.8;
  double lambda = 0.1;
  double lr = 0.7;
  std::size_t batch = 64;
  std::size_t k = 1;  // discriminator updates per classifier update
  std::size_t max_epochs = 200;
  std::size_t patience_window = 15;
  double min_delta = 0.01;
  bool early_stopping = true;
  std::uint64_t seed = 0;
  Objective objective = Objective::kHolder;
  Reduction reduction = Reduction::kMean;
  bool d_lambda_terms = true;  // false: D ignores the lambda terms

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (!(alpha > 1.0) || !std::isfinite(alpha)) out.push_back("alpha must be finite and > 1");
    if (batch < 1) out.push_back("batch must be >= 1");
    if (k < 1) out.push_back("k must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) out.push_back("lr must be > 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) out.push_back("lambda must be finite and >= 0");
    if (max_epochs < 1) out.push_back("max_epochs must be >= 1");
    if (patience_window < 1) out.push_back("patience window must be >= 1");
    return out;
  }

  void validate() const {
    conjugate(alpha);
    const auto p = problems();
    if (!p.empty()) throw ConfigError(p.front());
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double value = 0.0;  // mean V over the epoch's discriminator updates
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

// Instrumentation callbacks; all optional.
struct TrainHooks {
  std::function<void()> on_d_update;
  std::function<void()> on_c_update;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Independent generator seed for a named purpose ("split", "init-D", ...).
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// True iff the best F1 in the last `window` epochs improves on the best
// before them by less than `min_delta`. Needs more than `window` epochs.
inline bool early_stop(std::span<const double> f1_history, std::size_t window = 15, double min_delta = 0.01) {
  if (f1_history.size() <= window) return false;
  const auto split = f1_history.end() - static_cast<std::ptrdiff_t>(window);
  const double before = *std::max_element(f1_history.begin(), split);
  const double recent = *std::max_element(split, f1_history.end());
  // Absorbs representation error so a gain of exactly min_delta counts as enough.
  constexpr double kSlack = 1e-12;
  return recent - before < min_delta - kSlack;
}

inline bool early_stop(std::span<const EpochRecord> history, std::size_t window = 15,
                       double min_delta = 0.01) {
  std::vector<double> f1s;
  for (const auto& r : history) f1s.push_back(r.f1);
  return early_stop(std::span<const double>(f1s), window, min_delta);
}

// Classifier probabilities in fixed-size chunks; each row is independent of
// the chunking.
template <typename T>
std::vector<double> predict(Model<T>& model, const BasicTensor<T>& x, std::size_t chunk = 256) {
  std::vector<double> probs;
  probs.reserve(x.dim(0));
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < x.dim(0); start += chunk) {
    rows.clear();
    for (std::size_t i = start; i < std::min(x.dim(0), start + chunk); ++i) rows.push_back(i);
    const auto p = model.forward(gather_rows(x, std::span<const std::size_t>(rows)));
    probs.insert(probs.end(), p.begin(), p.end());
  }
  return probs;
}

template <typename T>
MetricReport evaluate(Model<T>& model, const LabeledImageSet& ds, double threshold = kDefaultThreshold) {
  const auto probs = predict(model, normalize<T>(ds.images));
  return report(confusion(std::span<const double>(probs), std::span<const std::uint8_t>(ds.labels), threshold));
}

namespace detail {

// Draws batches from a per-pass shuffle; a pass is reshuffled once fewer than
// `m` unseen indices remain, so no index repeats inside a batch.
class CyclicSampler {
 public:
  CyclicSampler(std::size_t n, std::mt19937_64& rng) : perm_(n), rng_(rng) {
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    reshuffle();
  }

  std::vector<std::size_t> next(std::size_t m) {
    m = std::min(m, perm_.size());
    if (pos_ + m > perm_.size()) reshuffle();
    std::vector<std::size_t> out(perm_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 perm_.begin() + static_cast<std::ptrdiff_t>(pos_ + m));
    pos_ += m;
    return out;
  }

 private:
  void reshuffle() {
    std::shuffle(perm_.begin(), perm_.end(), rng_);
    pos_ = 0;
  }

  std::vector<std::size_t> perm_;
  std::mt19937_64& rng_;
  std::size_t pos_ = 0;
};

inline std::string index_list(std::span<const std::size_t> idx) {
  std::ostringstream os;
  for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? "," : "") << idx[i];
  return os.str();
}

}  // namespace detail

template <typename T = float>
struct BasicTrainResult {
  Model<T> classifier;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double wall_seconds = 0.0;
};

using TrainResult = BasicTrainResult<float>;

// One epoch is ceil(|unlabeled| / batch) steps. Each step runs `k`
// discriminator updates on fresh (positive, unlabeled) batches, then one
// classifier update on the next batch of the epoch's unlabeled partition.
// The returned classifier is the epoch with the best validation F1 (first
// occurrence on ties).
template <typename T = float>
BasicTrainResult<T> train_model(const TrainConfig& cfg, const PUTrainView& data, const ModelSpec& arch,
                                const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.positives.n == 0 || data.unlabeled.n == 0 || data.val.size() == 0) {
    throw DataError("training needs non-empty positive, unlabeled and validation sets");
  }
  const auto started = std::chrono::steady_clock::now();
  const HolderExponents exps(cfg.alpha);
  Model<T> disc = build_model<T>(arch, substream_seed(cfg.seed, "init-D"));
  Model<T> clf = build_model<T>(arch, substream_seed(cfg.seed, "init-C"));
  auto disc_params = disc.params();
  auto clf_params = clf.params();

  const BasicTensor<T> x_pos = normalize<T>(data.positives);
  const BasicTensor<T> x_unl = normalize<T>(data.unlabeled);
  const BasicTensor<T> x_val = normalize<T>(data.val.images);

  std::mt19937_64 rng(substream_seed(cfg.seed, "shuffle"));
  detail::CyclicSampler pos_sampler(data.positives.n, rng);
  detail::CyclicSampler unl_sampler(data.unlabeled.n, rng);
  std::vector<std::size_t> epoch_perm(data.unlabeled.n);

  const bool holder = cfg.objective == Objective::kHolder;

  BasicTrainResult<T> result{clf, {}, 0, 0.0};
  std::vector<T> best_params;
  double best_f1 = -1.0;
  std::vector<double> f1s;
  const std::size_t steps = (data.unlabeled.n + cfg.batch - 1) / cfg.batch;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(epoch_perm.begin(), epoch_perm.end(), std::size_t{0});
    std::shuffle(epoch_perm.begin(), epoch_perm.end(), rng);
    double value_sum = 0.0;
    std::size_t value_count = 0;

    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<std::size_t> pb, ub;
      try {
        for (std::size_t j = 0; j < cfg.k; ++j) {
          pb = pos_sampler.next(cfg.batch);
          ub = unl_sampler.next(cfg.batch);
          const auto xu = gather_rows(x_unl, std::span<const std::size_t>(ub));
          const auto d = disc.forward(concat_rows(gather_rows(x_pos, std::span<const std::size_t>(pb)), xu));
          const auto c = clf.forward(xu);
          const BatchView view{std::span<const double>(d).first(pb.size()),
                               std::span<const double>(d).subspan(pb.size()), c, cfg.lambda, exps,
                               cfg.reduction};
          value_sum += holder ? hdpan_value(view) : pan_kl_value(view);
          ++value_count;
          const auto g = holder ? d_output_grads(view, cfg.d_lambda_terms)
                                : pan_kl_d_grads(view, cfg.d_lambda_terms);
          disc.backward(g);
          sgd_step<T>(disc_params, cfg.lr);
          if (!disc.parameters_finite()) throw NumericError("discriminator parameters became non-finite");
          if (hooks.on_d_update) hooks.on_d_update();
        }

        pb.clear();
        const std::size_t lo = step * cfg.batch;
        const std::size_t hi = std::min(data.unlabeled.n, lo + cfg.batch);
        ub.assign(epoch_perm.begin() + static_cast<std::ptrdiff_t>(lo),
                  epoch_perm.begin() + static_cast<std::ptrdiff_t>(hi));
        const auto xu = gather_rows(x_unl, std::span<const std::size_t>(ub));
        const auto d = disc.forward(xu);
        const auto c = clf.forward(xu);
        const BatchView view{{}, d, c, cfg.lambda, exps, cfg.reduction};
        const auto g = holder ? c_output_grads(view) : pan_kl_c_grads(view);
        clf.backward(g);
        sgd_step<T>(clf_params, cfg.lr);
        if (!clf.parameters_finite()) throw NumericError("classifier parameters became non-finite");
        if (hooks.on_c_update) hooks.on_c_update();
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " step " + std::to_string(step) + ": " +
                           e.what() + " [positive batch: " + detail::index_list(pb) +
                           "] [unlabeled batch: " + detail::index_list(ub) + "]");
      }
    }

    const auto probs = predict(clf, x_val);
    const auto rep = report(confusion(std::span<const double>(probs),
                                      std::span<const std::uint8_t>(data.val.labels)));
    EpochRecord rec{epoch, value_count ? value_sum / static_cast<double>(value_count) : 0.0,
                    rep.accuracy.value, rep.precision.value, rep.recall.value, rep.f1.value};
    result.history.push_back(rec);
    f1s.push_back(rec.f1);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (rec.f1 > best_f1) {
      best_f1 = rec.f1;
      best_params = clf.snapshot();
      result.best_epoch = epoch;
    }
    if (cfg.early_stopping && early_stop(std::span<const double>(f1s), cfg.patience_window, cfg.min_delta)) {
      break;
    }
  }

  clf.restore(best_params);
  result.classifier = std::move(clf);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

inline TrainResult train(const TrainConfig& cfg, const PUTrainView& data, const ModelSpec& arch,
                         const TrainHooks& hooks = {}) {
  return train_model<float>(cfg, data, arch, hooks);
}

// ---------------------------------------------------------------------------
// Output formats

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline constexpr const char* kHistoryHeader = "epoch,V,acc,prec,rec,f1";

inline std::string history_csv(std::span<const EpochRecord> history) {
  std::string out = std::string(kHistoryHeader) + "\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_real(r.value) + "," + format_real(r.accuracy) + "," +
           format_real(r.precision) + "," + format_real(r.recall) + "," + format_real(r.f1) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid search

struct GridCell {
  double alpha = 0.0;
  double lr = 0.0;
  bool ok = false;
  std::string error{};
  EpochRecord best{};     // validation metrics at the selected epoch
  MetricReport test{};   // selected classifier on the test split
  bool best_for_alpha = false;
};

struct GridResult {
  std::vector<GridCell> cells;  // alpha-major, in request order

  // Index of the best cell for each alpha, in request order of alphas.
  std::vector<std::size_t> best_per_alpha() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].best_for_alpha) out.push_back(i);
    }
    return out;
  }
};

struct GridOptions {
  std::size_t jobs = 1;
  // Returns a previously completed cell to skip retraining (resume).
  std::function<std::optional<GridCell>(double alpha, double lr)> lookup;
  // Called once per freshly trained cell; serialized across workers.
  std::function<void(const GridCell&)> on_cell_done;
};

// True when `a` beats `b`: higher F1, then higher accuracy, then lower lr.
inline bool better_cell(const GridCell& a, const GridCell& b) {
  if (a.best.f1 != b.best.f1) return a.best.f1 > b.best.f1;
  if (a.best.accuracy != b.best.accuracy) return a.best.accuracy > b.best.accuracy;
  return a.lr < b.lr;
}

inline void mark_best_per_alpha(GridResult& grid) {
  for (auto& c : grid.cells) c.best_for_alpha = false;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    if (!grid.cells[i].ok) continue;
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < grid.cells.size(); ++j) {
      const auto& c = grid.cells[j];
      if (!c.ok || c.alpha != grid.cells[i].alpha) continue;
      if (!best || better_cell(c, grid.cells[*best])) best = j;
    }
    if (best) grid.cells[*best].best_for_alpha = true;
  }
}

inline GridResult grid_search(std::span<const double> alphas, std::span<const double> lrs,
                              const TrainConfig& base, const PUSplit& data, const ModelSpec& arch,
                              const GridOptions& opts = {}) {
  if (alphas.empty() || lrs.empty()) throw ConfigError("grid search needs non-empty alpha and lr lists");
  GridResult grid;
  for (double a : alphas) {
    for (double lr : lrs) grid.cells.push_back(GridCell{.alpha = a, .lr = lr});
  }

  std::mutex done_mutex;
  auto run_cell = [&](GridCell& cell) {
    if (opts.lookup) {
      if (auto prev = opts.lookup(cell.alpha, cell.lr)) {
        cell = *prev;
        return;
      }
    }
    TrainConfig cfg = base;
    cfg.alpha = cell.alpha;
    cfg.lr = cell.lr;
    try {
      auto r = train(cfg, data.train_view(), arch);
      cell.best = r.history.at(r.best_epoch - 1);
      cell.test = evaluate(r.classifier, data.test());
      cell.ok = true;
    } catch (const Error& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    if (opts.on_cell_done) {
      std::lock_guard lock(done_mutex);
      opts.on_cell_done(cell);
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, grid.cells.size()));
  if (jobs == 1) {
    for (auto& cell : grid.cells) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < grid.cells.size(); i = next++) run_cell(grid.cells[i]);
      });
    }
    for (auto& t : workers) t.join();
  }
  mark_best_per_alpha(grid);
  return grid;
}

inline constexpr const char* kGridHeader =
    "alpha,lr,status,best_epoch,val_acc,val_f1,test_acc,test_f1,best_for_alpha";

inline std::string grid_row(const GridCell& c) {
  std::string row = format_real(c.alpha) + "," + format_real(c.lr) + ",";
  if (!c.ok) return row + "failed,,,,,,0";
  return row + "ok," + std::to_string(c.best.epoch) + "," + format_real(c.best.accuracy) + "," +
         format_real(c.best.f1) + "," + format_real(c.test.accuracy.value) + "," +
         format_real(c.test.f1.value) + "," + (c.best_for_alpha ? "1" : "0");
}

inline std::string grid_csv(const GridResult& grid) {
  std::string out = std::string(kGridHeader) + "\n";
  for (const auto& c : grid.cells) out += grid_row(c) + "\n";
  return out;
}

}  // namespace hdpan
