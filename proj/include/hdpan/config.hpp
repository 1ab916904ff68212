#pragma once

// Run configuration: a flat `key = value` text file. Blank lines and lines
// starting with '#' are ignored. Unknown keys and bad values are collected
// and reported together.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hdpan/models.hpp"
#include "hdpan/pudata.hpp"
#include "hdpan/trainer.hpp"

namespace hdpan {

struct RunConfig {
  fs::path dataset;    // dataset root with train/ val/ test/
  fs::path split_dir;  // optional: index files written by make-pu
  fs::path out_dir = "run";
  std::string arch = "mlp";
  std::vector<std::size_t> hidden = {300, 300};
  std::size_t n_positive = 100;
  LabelMode label_mode = LabelMode::kAuto;
  TrainConfig train;

  ModelSpec model_spec(std::size_t input_dim) const {
    if (arch == "cnn") return CnnSpec{};
    return MlpSpec{input_dim, hidden};
  }

  // Canonical "key=value" lines, sorted by key; the basis of config_hash().
  std::string canonical() const;
  std::string hash() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

inline std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv{
      {"dataset", dataset.string()},
      {"split_dir", split_dir.string()},
      {"out_dir", out_dir.string()},
      {"arch", arch},
      {"hidden", detail::join_sizes(hidden)},
      {"n_positive", std::to_string(n_positive)},
      {"label_mode", to_string(label_mode)},
      {"objective", to_string(train.objective)},
      {"alpha", format_real(train.alpha)},
      {"lambda", format_real(train.lambda)},
      {"lr", format_real(train.lr)},
      {"batch", std::to_string(train.batch)},
      {"k", std::to_string(train.k)},
      {"max_epochs", std::to_string(train.max_epochs)},
      {"patience", std::to_string(train.patience_window)},
      {"min_delta", format_real(train.min_delta)},
      {"early_stop", train.early_stopping ? "true" : "false"},
      {"seed", std::to_string(train.seed)},
      {"reduction", train.reduction == Reduction::kMean ? "mean" : "sum"},
      {"d_lambda_terms", train.d_lambda_terms ? "true" : "false"},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

inline std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(canonical())));
  return buf;
}

// Parses config text. Relative paths are resolved against `base_dir`.
inline RunConfig parse_run_config(const std::string& text, const fs::path& base_dir = {}) {
  RunConfig cfg;
  std::vector<std::string> problems;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = detail::trim(t.substr(0, eq));
    if (kv.count(key)) problems.push_back(key + ": given more than once");
    kv[key] = detail::trim(t.substr(eq + 1));
  }

  auto resolve = [&](const std::string& v) {
    fs::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  auto as_real = [](const std::string& v) {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  };
  auto as_count = [](const std::string& v) {
    std::size_t pos = 0;
    const long long n = std::stoll(v, &pos);
    if (pos != v.size() || n < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  };
  auto as_bool = [](const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument(v);
  };

  for (const auto& [key, value] : kv) {
    try {
      if (key == "dataset") cfg.dataset = resolve(value);
      else if (key == "split_dir") cfg.split_dir = value.empty() ? fs::path{} : resolve(value);
      else if (key == "out_dir") cfg.out_dir = resolve(value);
      else if (key == "arch") {
        if (value != "mlp" && value != "cnn") throw std::invalid_argument(value);
        cfg.arch = value;
      } else if (key == "hidden") {
        cfg.hidden.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.hidden.push_back(as_count(detail::trim(tok)));
        if (cfg.hidden.size() != 2) throw std::invalid_argument(value);
      } else if (key == "n_positive") cfg.n_positive = as_count(value);
      else if (key == "label_mode") cfg.label_mode = parse_label_mode(value);
      else if (key == "objective") cfg.train.objective = parse_objective(value);
      else if (key == "alpha") cfg.train.alpha = as_real(value);
      else if (key == "lambda") cfg.train.lambda = as_real(value);
      else if (key == "lr") cfg.train.lr = as_real(value);
      else if (key == "batch") cfg.train.batch = as_count(value);
      else if (key == "k") cfg.train.k = as_count(value);
      else if (key == "max_epochs") cfg.train.max_epochs = as_count(value);
      else if (key == "patience") cfg.train.patience_window = as_count(value);
      else if (key == "min_delta") cfg.train.min_delta = as_real(value);
      else if (key == "early_stop") cfg.train.early_stopping = as_bool(value);
      else if (key == "seed") cfg.train.seed = as_count(value);
      else if (key == "reduction") {
        if (value == "mean") cfg.train.reduction = Reduction::kMean;
        else if (value == "sum") cfg.train.reduction = Reduction::kSum;
        else throw std::invalid_argument(value);
      } else if (key == "d_lambda_terms") cfg.train.d_lambda_terms = as_bool(value);
      else problems.push_back(key + ": unknown key");
    } catch (const std::exception&) {
      problems.push_back(key + ": invalid value '" + value + "'");
    }
  }
  if (!kv.count("dataset")) problems.push_back("dataset: required key missing");
  if (!kv.count("out_dir")) cfg.out_dir = resolve(cfg.out_dir.string());
  for (const auto& p : cfg.train.problems()) problems.push_back(p);
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return cfg;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

}  // namespace hdpan
