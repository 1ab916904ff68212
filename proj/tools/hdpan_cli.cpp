// hdpan: experiment command line (make-pu, train, grid, eval, saliency, synth).

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hdpan/hdpan.hpp"

namespace hdpan {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

DatasetBundle load_binarized(const fs::path& root, LabelMode mode) {
  if (!fs::is_directory(root)) {
    throw DataError("dataset directory " + root.string() +
                    " does not exist; expected train/, val/ and test/ subdirectories (see `hdpan synth`)");
  }
  auto b = load_dataset_root(root);
  return {binarize(b.train, mode), binarize(b.val, mode), binarize(b.test, mode)};
}

std::string metrics_block(const std::string& prefix, const MetricReport& r) {
  auto line = [&](const std::string& name, const Metric& m) {
    return prefix + name + "=" + format_real(m.value) + (m.degenerate ? " (degenerate)" : "") + "\n";
  };
  return prefix + "tp=" + std::to_string(r.cm.tp) + "\n" + prefix + "fp=" + std::to_string(r.cm.fp) + "\n" +
         prefix + "tn=" + std::to_string(r.cm.tn) + "\n" + prefix + "fn=" + std::to_string(r.cm.fn) + "\n" +
         line("accuracy", r.accuracy) + line("precision", r.precision) + line("recall", r.recall) +
         line("f1", r.f1);
}

// ---- make-pu

struct MakePuArgs {
  std::string dataset;
  std::size_t n_positive = 100;
  std::uint64_t seed = 0;
  std::string out;
  std::string label_mode = "auto";
};

int cmd_make_pu(const MakePuArgs& a) {
  const auto data = load_binarized(a.dataset, parse_label_mode(a.label_mode));
  const auto split = make_pu_split(data.train, data.val, data.test, a.n_positive, substream_seed(a.seed, "split"));
  const fs::path out(a.out);
  fs::create_directories(out);
  write_index_file(out / "positives.idx", split.positive_indices());
  write_index_file(out / "unlabeled.idx", split.unlabeled_indices());
  std::ostringstream m;
  m << "dataset=" << data.train.name << "\n"
    << "label_mode=" << a.label_mode << "\n"
    << "seed=" << a.seed << "\n"
    << "train=" << data.train.size() << "\n"
    << "positives=" << split.positive_indices().size() << "\n"
    << "unlabeled=" << split.unlabeled_indices().size() << "\n"
    << "val=" << data.val.size() << "\n"
    << "test=" << data.test.size() << "\n";
  write_text(out / "manifest", m.str());
  std::cout << m.str();
  return kExitOk;
}

// ---- shared run setup

struct Prepared {
  RunConfig cfg;
  DatasetBundle data;
  PUSplit split;
  ModelSpec arch;
};

Prepared prepare(const std::string& config_path) {
  RunConfig cfg = load_run_config(config_path);
  auto data = load_binarized(cfg.dataset, cfg.label_mode);
  auto split = [&] {
    if (cfg.split_dir.empty()) {
      return make_pu_split(data.train, data.val, data.test, cfg.n_positive, substream_seed(cfg.train.seed, "split"));
    }
    return PUSplit(data.train, data.val, data.test, read_index_file(cfg.split_dir / "positives.idx"),
                   read_index_file(cfg.split_dir / "unlabeled.idx"), cfg.train.seed);
  }();
  const auto& im = data.train.images;
  ModelSpec arch = cfg.model_spec(im.h * im.w * im.c);
  return {std::move(cfg), std::move(data), std::move(split), std::move(arch)};
}

std::map<std::string, std::string> checkpoint_meta(const Prepared& p) {
  const auto& im = p.data.train.images;
  return {{"config_hash", p.cfg.hash()},
          {"label_mode", to_string(p.cfg.label_mode)},
          {"h", std::to_string(im.h)},
          {"w", std::to_string(im.w)},
          {"c", std::to_string(im.c)}};
}

// ---- train

int cmd_train(const std::string& config_path) {
  auto p = prepare(config_path);
  const auto t0 = std::chrono::steady_clock::now();
  auto r = train(p.cfg.train, p.split.train_view(), p.arch);
  const auto test = evaluate(r.classifier, p.split.test());
  const auto val = evaluate(r.classifier, p.split.val());
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out = p.cfg.out_dir;
  fs::create_directories(out);
  save_checkpoint(r.classifier, checkpoint_meta(p), (out / "checkpoint.bin").string());
  write_text(out / "history.csv", history_csv(r.history));

  std::ostringstream s;
  s << "config_hash=" << p.cfg.hash() << "\n"
    << "best_epoch=" << r.best_epoch << "\n"
    << "epochs_run=" << r.history.size() << "\n"
    << "positives=" << p.split.positives().n << "\n"
    << "unlabeled=" << p.split.unlabeled().n << "\n"
    << metrics_block("val.", val) << metrics_block("test.", test);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", wall);
  s << "wall_seconds=" << buf << "\n";
  s << "[config]\n" << p.cfg.canonical();
  write_text(out / "summary.txt", s.str());

  std::cout << "best epoch " << r.best_epoch << ": val f1 " << format_real(val.f1.value) << ", test acc "
            << format_real(test.accuracy.value) << ", test f1 " << format_real(test.f1.value) << "\n";
  return kExitOk;
}

// ---- grid

std::string cell_name(double alpha, double lr) { return "a" + format_real(alpha) + "_lr" + format_real(lr) + ".csv"; }

std::optional<GridCell> read_cell(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) return std::nullopt;
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) f.push_back(tok);
  if (f.size() != 9 || f[2] != "ok") return std::nullopt;
  try {
    GridCell c{.alpha = std::stod(f[0]), .lr = std::stod(f[1])};
    c.ok = true;
    c.best.epoch = std::stoul(f[3]);
    c.best.accuracy = std::stod(f[4]);
    c.best.f1 = std::stod(f[5]);
    c.test.accuracy.value = std::stod(f[6]);
    c.test.f1.value = std::stod(f[7]);
    return c;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

struct GridArgs {
  std::string config;
  std::vector<double> alphas{1.5, 1.6, 1.7, 1.8, 1.9, 2.0};
  std::vector<double> lrs{0.4, 0.5, 0.6, 0.7, 0.8};
  std::size_t jobs = 1;
  std::string out;
};

int cmd_grid(const GridArgs& a) {
  auto p = prepare(a.config);
  const fs::path out = a.out.empty() ? p.cfg.out_dir : fs::path(a.out);
  const fs::path cells = out / "cells";
  fs::create_directories(cells);

  GridOptions opts;
  opts.jobs = a.jobs;
  opts.lookup = [&](double alpha, double lr) -> std::optional<GridCell> {
    auto c = read_cell(cells / cell_name(alpha, lr));
    // Cells are stored with 9 significant digits; keep the requested values.
    if (c) {
      c->alpha = alpha;
      c->lr = lr;
    }
    return c;
  };
  opts.on_cell_done = [&](const GridCell& c) {
    if (c.ok) {
      write_text(cells / cell_name(c.alpha, c.lr), grid_row(c) + "\n");
    } else {
      std::cerr << "cell alpha=" << format_real(c.alpha) << " lr=" << format_real(c.lr) << " failed: " << c.error
                << "\n";
    }
  };
  const auto grid = grid_search(a.alphas, a.lrs, p.cfg.train, p.split, p.arch, opts);
  write_text(out / "grid.csv", grid_csv(grid));
  std::cout << grid_csv(grid);
  for (const auto& c : grid.cells) {
    if (!c.ok) return kExitNumeric;
  }
  return kExitOk;
}

// ---- eval / saliency

const LabeledImageSet& pick_split(const DatasetBundle& d, const std::string& split) {
  if (split == "val") return d.val;
  if (split == "test") return d.test;
  throw ConfigError("split must be val or test, got '" + split + "'");
}

LabelMode checkpoint_label_mode(const Checkpoint& ck) {
  const auto it = ck.meta.find("label_mode");
  return it == ck.meta.end() ? LabelMode::kAuto : parse_label_mode(it->second);
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& split) {
  if (split != "val" && split != "test") throw ConfigError("split must be val or test, got '" + split + "'");
  auto ck = load_checkpoint(checkpoint);
  const auto data = load_binarized(dataset, checkpoint_label_mode(ck));
  const auto& ds = pick_split(data, split);
  const auto r = evaluate(ck.model, ds);
  const auto it = ck.meta.find("config_hash");
  std::cout << "config_hash=" << (it == ck.meta.end() ? "unknown" : it->second) << "\n"
            << "split=" << split << "\n"
            << "n=" << ds.size() << "\n"
            << metrics_block("", r);
  return kExitOk;
}

int cmd_saliency(const std::string& checkpoint, const std::string& dataset, const std::string& split,
                 std::size_t index, const std::string& out_path) {
  auto ck = load_checkpoint(checkpoint);
  const auto data = load_binarized(dataset, checkpoint_label_mode(ck));
  const auto& ds = pick_split(data, split);
  if (index >= ds.size()) {
    throw DataError("image index " + std::to_string(index) + " out of range for " + split + " split of size " +
                    std::to_string(ds.size()));
  }
  const std::size_t row = index;
  const auto image = normalize(ds.images.subset(std::span<const std::size_t>(&row, 1)));
  const auto heat = saliency(ck.model, image);
  const std::size_t h = heat.dim(0), w = heat.dim(1);
  std::string pgm = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (double v : heat.values()) pgm.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  write_text(out_path, pgm);
  return kExitOk;
}

// ---- synth

struct SynthArgs {
  std::string out;
  std::size_t n_per_class = 1000;
  std::size_t n_eval_per_class = 250;
  std::size_t dim = 2;
  double separation = 6.0;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  DatasetBundle b{synth_gaussians(a.n_per_class, a.dim, a.separation, a.seed),
                  synth_gaussians(a.n_eval_per_class, a.dim, a.separation, a.seed + 1),
                  synth_gaussians(a.n_eval_per_class, a.dim, a.separation, a.seed + 2)};
  save_dataset_root(b, a.out);
  std::cout << "wrote " << b.train.size() << "/" << b.val.size() << "/" << b.test.size()
            << " train/val/test samples to " << a.out << "\n";
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Positive-unlabeled learning with Hölder-divergence adversarial networks"};
  app.require_subcommand(1);

  MakePuArgs mp;
  auto* make_pu = app.add_subcommand("make-pu", "Draw a seeded positive/unlabeled split and write index files");
  make_pu->add_option("dataset", mp.dataset, "Dataset root (train/ val/ test/)")->required();
  make_pu->add_option("--n-positive", mp.n_positive, "Number of labeled positives")->capture_default_str();
  make_pu->add_option("--seed", mp.seed, "Split seed")->capture_default_str();
  make_pu->add_option("--out", mp.out, "Output directory for the index files")->required();
  make_pu->add_option("--label-mode", mp.label_mode, "auto, binary or parity")->capture_default_str();

  std::string train_config;
  auto* train_cmd = app.add_subcommand("train", "Train one classifier from a config file");
  train_cmd->add_option("config", train_config, "Run configuration file")->required();

  GridArgs ga;
  auto* grid = app.add_subcommand("grid", "Sweep alpha x lr and write a results table");
  grid->add_option("config", ga.config, "Run configuration file")->required();
  grid->add_option("--alphas", ga.alphas, "Alpha values")->delimiter(',')->capture_default_str();
  grid->add_option("--lrs", ga.lrs, "Learning rates")->delimiter(',')->capture_default_str();
  grid->add_option("--jobs", ga.jobs, "Cells trained in parallel")->capture_default_str();
  grid->add_option("--out", ga.out, "Output directory (default: config out_dir)");

  std::string ck, dataset, split = "test", out_path;
  std::size_t index = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the val or test split");
  eval->add_option("checkpoint", ck, "Checkpoint file")->required();
  eval->add_option("dataset", dataset, "Dataset root")->required();
  eval->add_option("--split", split, "val or test")->capture_default_str();

  auto* sal = app.add_subcommand("saliency", "Export a gradient saliency map as a PGM image");
  sal->add_option("checkpoint", ck, "Checkpoint file")->required();
  sal->add_option("dataset", dataset, "Dataset root")->required();
  sal->add_option("--split", split, "val or test")->capture_default_str();
  sal->add_option("--index", index, "Image index within the split")->capture_default_str();
  sal->add_option("--out", out_path, "Output .pgm path")->required();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write a two-Gaussian dataset root");
  synth->add_option("--out", sa.out, "Output dataset root")->required();
  synth->add_option("--n-per-class", sa.n_per_class, "Training samples per class")->capture_default_str();
  synth->add_option("--n-eval-per-class", sa.n_eval_per_class, "Val/test samples per class")->capture_default_str();
  synth->add_option("--dim", sa.dim, "Feature dimension")->capture_default_str();
  synth->add_option("--separation", sa.separation, "Distance between class means")->capture_default_str();
  synth->add_option("--seed", sa.seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*make_pu) return cmd_make_pu(mp);
    if (*train_cmd) return cmd_train(train_config);
    if (*grid) return cmd_grid(ga);
    if (*eval) return cmd_eval(ck, dataset, split);
    if (*sal) return cmd_saliency(ck, dataset, split, index, out_path);
    if (*synth) return cmd_synth(sa);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace
}  // namespace hdpan

int main(int argc, char** argv) { return hdpan::run(argc, argv); }
