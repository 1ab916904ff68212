#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hdpan/divergence.hpp"
#include "hdpan/layers.hpp"

namespace hdpan {

// Fully connected network: input -> hidden[0] -> hidden[1] -> 1, ReLU between
// layers, sigmoid on the output.
struct MlpSpec {
  std::size_t input_dim = 784;
  std::vector<std::size_t> hidden = {300, 300};
};

// (28x28x3) - C(3x3,84) - C(3x3,84,stride 2) - C(1x1,168) - C(1x1,8) - 1000 - 1000 - 1
struct CnnSpec {
  static constexpr std::size_t kSide = 28;
  static constexpr std::size_t kChannels = 3;
};

using ModelSpec = std::variant<MlpSpec, CnnSpec>;

template <typename T>
using Layer = std::variant<Affine<T>, Conv2d<T>, Relu<T>, Sigmoid<T>, Flatten<T>>;

inline std::string arch_name(const ModelSpec& spec) {
  return std::holds_alternative<MlpSpec>(spec) ? "mlp" : "cnn";
}

// A fixed layer sequence whose last layer emits one probability per sample.
template <typename T>
class Model {
 public:
  Model(ModelSpec spec, std::vector<Layer<T>> layers)
      : spec_(std::move(spec)), layers_(std::move(layers)) {}

  const ModelSpec& spec() const { return spec_; }
  std::vector<Layer<T>>& layers() { return layers_; }

  // Raw network output, shape N x 1.
  BasicTensor<T> forward_raw(const BasicTensor<T>& batch) {
    BasicTensor<T> x = batch;
    for (auto& layer : layers_) {
      x = std::visit([&](auto& l) { return l.forward(x); }, layer);
    }
    if (x.rank() != 2 || x.dim(1) != 1) {
      throw ShapeError("model output must be N x 1, got " + shape_str(x.shape()));
    }
    return x;
  }

  // Probabilities clamped to [eps, 1 - eps], one per sample.
  std::vector<double> forward(const BasicTensor<T>& batch) {
    const BasicTensor<T> out = forward_raw(batch);
    std::vector<double> probs(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) probs[i] = clamp_prob(out[i]);
    return probs;
  }

  // Propagates d(loss)/d(prob) through the most recent forward pass,
  // accumulating parameter gradients. The clamp is passed straight through.
  // Returns the gradient with respect to the input batch.
  BasicTensor<T> backward(std::span<const double> outgrad) {
    BasicTensor<T> g(Shape{outgrad.size(), 1});
    for (std::size_t i = 0; i < outgrad.size(); ++i) g[i] = static_cast<T>(outgrad[i]);
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      g = std::visit([&](auto& l) { return l.backward(g); }, *it);
    }
    return g;
  }

  std::vector<BasicParam<T>*> params() {
    std::vector<BasicParam<T>*> out;
    for (auto& layer : layers_) {
      auto ps = std::visit([](auto& l) { return l.params(); }, layer);
      out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  bool parameters_finite() {
    for (auto* p : params()) {
      if (!p->value.all_finite()) return false;
    }
    return true;
  }

  // Flat copy of all parameter values, in params() order.
  std::vector<T> snapshot() {
    std::vector<T> out;
    for (auto* p : params()) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
    return out;
  }

  void restore(std::span<const T> flat) {
    std::size_t off = 0;
    for (auto* p : params()) {
      if (off + p->value.size() > flat.size()) throw ShapeError("restore: snapshot too short");
      std::copy_n(flat.data() + off, p->value.size(), p->value.data());
      off += p->value.size();
    }
    if (off != flat.size()) throw ShapeError("restore: snapshot length mismatch");
  }

 private:
  ModelSpec spec_;
  std::vector<Layer<T>> layers_;
};

namespace detail {

// Glorot-uniform: U(-sqrt(6 / (fan_in + fan_out)), +sqrt(...)).
template <typename T>
void glorot_fill(BasicTensor<T>& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (T& v : t.values()) v = static_cast<T>(dist(rng));
}

}  // namespace detail

template <typename T = float>
Model<T> build_mlp(const MlpSpec& spec, std::uint64_t seed) {
  if (spec.input_dim == 0) throw ConfigError("mlp input_dim must be positive");
  if (spec.hidden.size() != 2) {
    throw ConfigError("mlp needs exactly two hidden layers, got " + std::to_string(spec.hidden.size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<Layer<T>> layers;
  layers.emplace_back(Flatten<T>{});
  std::size_t in = spec.input_dim;
  for (std::size_t width : spec.hidden) {
    if (width == 0) throw ConfigError("mlp hidden widths must be positive");
    Affine<T> fc(in, width);
    detail::glorot_fill(fc.weight().value, in, width, rng);
    layers.emplace_back(std::move(fc));
    layers.emplace_back(Relu<T>{});
    in = width;
  }
  Affine<T> head(in, 1);
  detail::glorot_fill(head.weight().value, in, 1, rng);
  layers.emplace_back(std::move(head));
  layers.emplace_back(Sigmoid<T>{});
  return Model<T>(spec, std::move(layers));
}

template <typename T = float>
Model<T> build_cnn(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Layer<T>> layers;
  auto conv = [&](std::size_t k, std::size_t c, std::size_t f, std::size_t stride) {
    Conv2d<T> layer(k, k, c, f, stride, k == 3 ? 1 : 0);
    detail::glorot_fill(layer.kernel().value, k * k * c, k * k * f, rng);
    layers.emplace_back(std::move(layer));
    layers.emplace_back(Relu<T>{});
  };
  auto dense = [&](std::size_t in, std::size_t out) {
    Affine<T> layer(in, out);
    detail::glorot_fill(layer.weight().value, in, out, rng);
    layers.emplace_back(std::move(layer));
  };
  conv(3, CnnSpec::kChannels, 84, 1);
  conv(3, 84, 84, 2);
  conv(1, 84, 168, 1);
  conv(1, 168, 8, 1);
  layers.emplace_back(Flatten<T>{});
  dense(14 * 14 * 8, 1000);
  layers.emplace_back(Relu<T>{});
  dense(1000, 1000);
  layers.emplace_back(Relu<T>{});
  dense(1000, 1);
  layers.emplace_back(Sigmoid<T>{});
  return Model<T>(CnnSpec{}, std::move(layers));
}

template <typename T = float>
Model<T> build_model(const ModelSpec& spec, std::uint64_t seed) {
  if (const auto* mlp = std::get_if<MlpSpec>(&spec)) return build_mlp<T>(*mlp, seed);
  return build_cnn<T>(seed);
}

// Attention map: |d prob / d input|, max over channels, min-max scaled to
// [0,1]. A constant gradient map yields all zeros. `image` is H x W x C or
// 1 x H x W x C.
template <typename T>
BasicTensor<double> saliency(Model<T>& model, const BasicTensor<T>& image) {
  BasicTensor<T> batch = image.rank() == 3
                             ? image.reshaped(Shape{1, image.dim(0), image.dim(1), image.dim(2)})
                             : image;
  if (batch.rank() != 4 || batch.dim(0) != 1) {
    throw ShapeError("saliency expects a single H x W x C image, got " + shape_str(image.shape()));
  }
  const std::size_t h = batch.dim(1), w = batch.dim(2), c = batch.dim(3);
  model.forward_raw(batch);
  const double one = 1.0;
  const BasicTensor<T> gx = model.backward(std::span<const double>(&one, 1));
  model.zero_grad();

  BasicTensor<double> heat(Shape{h, w});
  for (std::size_t i = 0; i < h * w; ++i) {
    double m = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) m = std::max(m, std::abs(static_cast<double>(gx[i * c + ch])));
    heat[i] = m;
  }
  const auto [lo, hi] = std::minmax_element(heat.values().begin(), heat.values().end());
  const double lo_v = *lo, range = *hi - *lo;
  for (double& v : heat.values()) v = range > 0.0 ? (v - lo_v) / range : 0.0;
  return heat;
}

// ---------------------------------------------------------------------------
// Checkpoint: a text header (one key=value per line, then "end"), followed by
// every parameter tensor as raw little-endian float32 in params() order.
//
//   hdpan-checkpoint 1
//   arch=mlp
//   input_dim=784
//   hidden=300,300
//   meta.<key>=<value>     (free-form metadata, e.g. config hash)
//   param=784x300
//   ...
//   end

struct Checkpoint {
  Model<float> model;
  std::map<std::string, std::string> meta;
};

inline constexpr const char* kCheckpointMagic = "hdpan-checkpoint 1";

inline void save_checkpoint(Model<float>& model, const std::map<std::string, std::string>& meta,
                            const std::string& path) {
  std::ostringstream header;
  header << kCheckpointMagic << '\n';
  header << "arch=" << arch_name(model.spec()) << '\n';
  if (const auto* mlp = std::get_if<MlpSpec>(&model.spec())) {
    header << "input_dim=" << mlp->input_dim << '\n';
    header << "hidden=";
    for (std::size_t i = 0; i < mlp->hidden.size(); ++i) header << (i ? "," : "") << mlp->hidden[i];
    header << '\n';
  }
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ConfigError("checkpoint metadata may not contain '=' in keys or newlines: " + k);
    }
    header << "meta." << k << '=' << v << '\n';
  }
  for (auto* p : model.params()) header << "param=" << shape_str(p->value.shape()) << '\n';
  header << "end\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path);
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  static_assert(sizeof(float) == 4);
  for (auto* p : model.params()) {
    for (float v : p->value.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                             static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
      out.write(bytes, 4);
    }
  }
  if (!out) throw DataError("failed writing checkpoint " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) {
    throw DataError("not a checkpoint file: " + path);
  }
  std::map<std::string, std::string> fields;
  std::map<std::string, std::string> meta;
  std::vector<std::string> shapes;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("malformed checkpoint header line: " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "param") {
      shapes.push_back(value);
    } else if (key.rfind("meta.", 0) == 0) {
      meta[key.substr(5)] = value;
    } else {
      fields[key] = value;
    }
  }
  if (!ended) throw DataError("checkpoint header not terminated: " + path);

  ModelSpec spec;
  if (fields["arch"] == "mlp") {
    MlpSpec mlp;
    try {
      mlp.input_dim = std::stoul(fields.at("input_dim"));
      mlp.hidden.clear();
      std::stringstream ss(fields.at("hidden"));
      std::string tok;
      while (std::getline(ss, tok, ',')) mlp.hidden.push_back(std::stoul(tok));
    } catch (const std::exception&) {
      throw DataError("checkpoint has malformed mlp spec: " + path);
    }
    spec = mlp;
  } else if (fields["arch"] == "cnn") {
    spec = CnnSpec{};
  } else {
    throw DataError("checkpoint has unknown arch '" + fields["arch"] + "'");
  }

  Model<float> model = build_model<float>(spec, 0);
  auto params = model.params();
  if (params.size() != shapes.size()) throw DataError("checkpoint parameter count mismatch: " + path);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (shape_str(params[i]->value.shape()) != shapes[i]) {
      throw DataError("checkpoint parameter " + std::to_string(i) + " has shape " + shapes[i] +
                      ", expected " + shape_str(params[i]->value.shape()));
    }
    for (float& v : params[i]->value.values()) {
      unsigned char b[4];
      if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint truncated: " + path);
      const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
      std::memcpy(&v, &bits, 4);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint has trailing bytes: " + path);
  return {std::move(model), std::move(meta)};
}

}  // namespace hdpan
