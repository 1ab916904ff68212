#pragma once

// Dataset container, on-disk format, PU split construction and synthetic data.
//
// Dataset directory layout (one directory per benchmark split):
//   meta        key=value lines: name, n, h, w, c, label_offset (in that order)
//   images.bin  n*h*w*c unsigned bytes, row-major N x H x W x C
//   labels.bin  n unsigned bytes
//
// A dataset root holds train/, val/ and test/ directories in this format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hdpan/errors.hpp"
#include "hdpan/metrics.hpp"
#include "hdpan/tensor.hpp"

namespace hdpan {

namespace fs = std::filesystem;

// N images of H x W x C 8-bit intensities.
struct ImageSet {
  std::size_t n = 0, h = 0, w = 0, c = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t image_size() const { return h * w * c; }

  ImageSet subset(std::span<const std::size_t> rows) const {
    ImageSet out{rows.size(), h, w, c, {}};
    out.pixels.reserve(rows.size() * image_size());
    for (std::size_t r : rows) {
      const auto* src = pixels.data() + r * image_size();
      out.pixels.insert(out.pixels.end(), src, src + image_size());
    }
    return out;
  }
};

struct LabeledImageSet {
  std::string name;
  ImageSet images;
  std::vector<std::uint8_t> labels;
  // What to add to the stored labels to obtain 1-indexed class numbers.
  int label_offset = 0;

  std::size_t size() const { return labels.size(); }
};

// Even class number -> positive (1), odd -> negative (0). `offset` is added to
// each stored label first, so 0-indexed storage uses offset 1.
inline std::vector<std::uint8_t> binarize_by_parity(std::span<const std::uint8_t> labels, int offset = 0) {
  std::vector<std::uint8_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = ((static_cast<int>(labels[i]) + offset) % 2 == 0) ? 1 : 0;
  }
  return out;
}

enum class LabelMode { kAuto, kBinary, kParity };

inline LabelMode parse_label_mode(const std::string& s) {
  if (s == "auto") return LabelMode::kAuto;
  if (s == "binary") return LabelMode::kBinary;
  if (s == "parity") return LabelMode::kParity;
  throw ConfigError("label_mode must be auto, binary or parity, got '" + s + "'");
}

inline std::string to_string(LabelMode m) {
  switch (m) {
    case LabelMode::kBinary: return "binary";
    case LabelMode::kParity: return "parity";
    default: return "auto";
  }
}

// Maps benchmark labels to PU positive (1) / negative (0). Binary sets keep
// their benchmark-positive class 1; multi-class sets go through parity.
// kAuto picks binary when every label is 0 or 1.
inline LabeledImageSet binarize(const LabeledImageSet& ds, LabelMode mode) {
  const bool is_binary = std::all_of(ds.labels.begin(), ds.labels.end(), [](auto l) { return l <= 1; });
  if (mode == LabelMode::kAuto) mode = is_binary ? LabelMode::kBinary : LabelMode::kParity;
  LabeledImageSet out = ds;
  if (mode == LabelMode::kBinary) {
    if (!is_binary) throw DataError("dataset '" + ds.name + "' has labels outside {0,1}; use parity");
  } else {
    out.labels = binarize_by_parity(ds.labels, ds.label_offset);
  }
  return out;
}

// Bytes to reals in [0,1]: x / 255. Output shape N x H x W x C.
template <typename T = float>
BasicTensor<T> normalize(const ImageSet& images) {
  std::vector<T> data(images.pixels.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<T>(static_cast<double>(images.pixels[i]) / 255.0);
  }
  return BasicTensor<T>(Shape{images.n, images.h, images.w, images.c}, std::move(data));
}

// ---------------------------------------------------------------------------
// Disk format

inline std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed line in " + path.string() + ": " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline void save_dataset(const LabeledImageSet& ds, const fs::path& dir) {
  const auto& im = ds.images;
  if (im.pixels.size() != im.n * im.image_size() || ds.labels.size() != im.n) {
    throw DataError("save_dataset: inconsistent dataset '" + ds.name + "'");
  }
  fs::create_directories(dir);
  {
    std::ofstream meta(dir / "meta", std::ios::trunc);
    meta << "name=" << ds.name << '\n'
         << "n=" << im.n << '\n'
         << "h=" << im.h << '\n'
         << "w=" << im.w << '\n'
         << "c=" << im.c << '\n'
         << "label_offset=" << ds.label_offset << '\n';
    if (!meta) throw DataError("cannot write " + (dir / "meta").string());
  }
  auto write_bytes = [](const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("cannot write " + p.string());
  };
  write_bytes(dir / "images.bin", im.pixels);
  write_bytes(dir / "labels.bin", ds.labels);
}

inline LabeledImageSet load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  const auto kv = read_key_values(dir / "meta");
  auto field = [&](const char* key) -> std::size_t {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError(dir.string() + "/meta: missing '" + key + "'");
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(it->second, &pos);
      if (pos != it->second.size() || v < 0) throw std::invalid_argument(key);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw DataError(dir.string() + "/meta: bad value for '" + key + "': " + it->second);
    }
  };
  LabeledImageSet ds;
  ds.name = kv.count("name") ? kv.at("name") : dir.filename().string();
  ds.images.n = field("n");
  ds.images.h = field("h");
  ds.images.w = field("w");
  ds.images.c = field("c");
  if (kv.count("label_offset")) {
    try {
      ds.label_offset = std::stoi(kv.at("label_offset"));
    } catch (const std::exception&) {
      throw DataError(dir.string() + "/meta: bad label_offset");
    }
  }
  if (ds.images.c != 1 && ds.images.c != 3) {
    throw DataError(dir.string() + ": channel count must be 1 or 3, got " + std::to_string(ds.images.c));
  }
  if (ds.images.h == 0 || ds.images.w == 0) throw DataError(dir.string() + ": zero image dimension");

  auto read_exact = [](const fs::path& p, std::size_t expected) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open " + p.string());
    const auto actual = static_cast<std::size_t>(fs::file_size(p));
    if (actual != expected) {
      throw DataError(p.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                      std::to_string(actual));
    }
    std::vector<std::uint8_t> bytes(expected);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(expected));
    if (!in) throw DataError("short read on " + p.string());
    return bytes;
  };
  ds.images.pixels = read_exact(dir / "images.bin", ds.images.n * ds.images.image_size());
  ds.labels = read_exact(dir / "labels.bin", ds.images.n);
  return ds;
}

struct DatasetBundle {
  LabeledImageSet train;
  LabeledImageSet val;
  LabeledImageSet test;
};

inline DatasetBundle load_dataset_root(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());
  return {load_dataset(root / "train"), load_dataset(root / "val"), load_dataset(root / "test")};
}

inline void save_dataset_root(const DatasetBundle& b, const fs::path& root) {
  save_dataset(b.train, root / "train");
  save_dataset(b.val, root / "val");
  save_dataset(b.test, root / "test");
}

// ---------------------------------------------------------------------------
// PU split

// What the trainer may see: labeled positives, unlabeled images (no truth),
// and the labeled validation set used for model selection.
struct PUTrainView {
  const ImageSet& positives;
  const ImageSet& unlabeled;
  const LabeledImageSet& val;
};

class PUSplit {
 public:
  // `train`, `val`, `test` must already be binarized. Positive and unlabeled
  // index lists must partition the training set.
  PUSplit(const LabeledImageSet& train, LabeledImageSet val, LabeledImageSet test,
          std::vector<std::size_t> positive_idx, std::vector<std::size_t> unlabeled_idx,
          std::uint64_t seed)
      : val_(std::move(val)), test_(std::move(test)), positive_idx_(std::move(positive_idx)),
        unlabeled_idx_(std::move(unlabeled_idx)), seed_(seed) {
    const std::size_t n = train.size();
    std::vector<bool> seen(n, false);
    for (const auto* list : {&positive_idx_, &unlabeled_idx_}) {
      for (std::size_t i : *list) {
        if (i >= n) throw DataError("split index " + std::to_string(i) + " out of range");
        if (seen[i]) throw DataError("split index " + std::to_string(i) + " used twice");
        seen[i] = true;
      }
    }
    if (positive_idx_.size() + unlabeled_idx_.size() != n) {
      throw DataError("split does not cover the training set");
    }
    for (std::size_t i : positive_idx_) {
      if (train.labels[i] != 1) throw DataError("split marks negative sample " + std::to_string(i) + " as positive");
    }
    positives_ = train.images.subset(positive_idx_);
    unlabeled_ = train.images.subset(unlabeled_idx_);
    unlabeled_truth_.reserve(unlabeled_idx_.size());
    for (std::size_t i : unlabeled_idx_) unlabeled_truth_.push_back(train.labels[i]);
  }

  PUTrainView train_view() const { return {positives_, unlabeled_, val_}; }

  const ImageSet& positives() const { return positives_; }
  const ImageSet& unlabeled() const { return unlabeled_; }
  const LabeledImageSet& val() const { return val_; }
  const LabeledImageSet& test() const { return test_; }
  const std::vector<std::size_t>& positive_indices() const { return positive_idx_; }
  const std::vector<std::size_t>& unlabeled_indices() const { return unlabeled_idx_; }
  std::uint64_t seed() const { return seed_; }

  // The only route to the hidden unlabeled labels.
  friend MetricReport evaluate_unlabeled(const PUSplit& split, std::span<const double> probs,
                                         double threshold);

 private:
  ImageSet positives_;
  ImageSet unlabeled_;
  std::vector<std::uint8_t> unlabeled_truth_;
  LabeledImageSet val_;
  LabeledImageSet test_;
  std::vector<std::size_t> positive_idx_;
  std::vector<std::size_t> unlabeled_idx_;
  std::uint64_t seed_;
};

inline MetricReport evaluate_unlabeled(const PUSplit& split, std::span<const double> probs,
                                       double threshold = kDefaultThreshold) {
  return report(confusion(probs, std::span<const std::uint8_t>(split.unlabeled_truth_), threshold));
}

// Draws `n_positive` positives uniformly without replacement; every other
// training image becomes unlabeled.
inline PUSplit make_pu_split(const LabeledImageSet& train, LabeledImageSet val, LabeledImageSet test,
                             std::size_t n_positive, std::uint64_t seed) {
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.labels[i] == 1) pos.push_back(i);
  }
  if (n_positive > pos.size()) {
    throw DataError("requested " + std::to_string(n_positive) + " labeled positives but '" + train.name +
                    "' has only " + std::to_string(pos.size()));
  }
  if (n_positive == 0) throw ConfigError("n_positive must be at least 1");
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  pos.resize(n_positive);
  std::sort(pos.begin(), pos.end());
  std::vector<std::size_t> unl;
  std::size_t next = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (next < pos.size() && pos[next] == i) {
      ++next;
    } else {
      unl.push_back(i);
    }
  }
  return PUSplit(train, std::move(val), std::move(test), std::move(pos), std::move(unl), seed);
}

inline void write_index_file(const fs::path& path, std::span<const std::size_t> idx) {
  std::ofstream out(path, std::ios::trunc);
  for (std::size_t i : idx) out << i << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

inline std::vector<std::size_t> read_index_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::size_t> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stoul(line, &pos));
      if (pos != line.size()) throw std::invalid_argument(line);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad index line '" + line + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

// Byte quantization used by synth_gaussians: 127.5 + x * scale, rounded and
// clamped, so x = 0 falls exactly between bytes 127 and 128.
inline double synth_scale(double separation) { return 127.5 / (separation / 2.0 + 4.0); }

// Two unit-variance isotropic Gaussians centred at +/-(separation/2) e1.
// Label 1 for the +e1 class. Stored as n x 1 x dim x 1 images, shuffled.
inline LabeledImageSet synth_gaussians(std::size_t n_per_class, std::size_t dim, double separation,
                                       std::uint64_t seed) {
  if (dim == 0) throw ConfigError("synth_gaussians: dim must be >= 1");
  if (!(separation >= 0.0)) throw ConfigError("synth_gaussians: separation must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = synth_scale(separation);
  const std::size_t n = 2 * n_per_class;

  std::vector<std::uint8_t> order_labels(n);
  for (std::size_t i = 0; i < n; ++i) order_labels[i] = i < n_per_class ? 1 : 0;
  std::shuffle(order_labels.begin(), order_labels.end(), rng);

  LabeledImageSet ds;
  ds.name = "synthetic";
  ds.images = ImageSet{n, 1, dim, 1, std::vector<std::uint8_t>(n * dim)};
  ds.labels = order_labels;
  for (std::size_t i = 0; i < n; ++i) {
    const double centre = (order_labels[i] ? 0.5 : -0.5) * separation;
    for (std::size_t d = 0; d < dim; ++d) {
      const double x = normal(rng) + (d == 0 ? centre : 0.0);
      const double q = std::round(127.5 + x * scale);
      ds.images.pixels[i * dim + d] = static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
    }
  }
  return ds;
}

}  // namespace hdpan
