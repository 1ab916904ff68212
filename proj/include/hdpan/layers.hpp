#pragma once

// Fixed-sequence layers with hand-written reverse passes. Each layer caches
// what its backward pass needs from the most recent forward call, so a
// backward must follow the forward whose gradient it propagates.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hdpan/tensor.hpp"

namespace hdpan {

template <typename T>
class Affine {
 public:
  Affine(std::size_t in, std::size_t out) : w_(Shape{in, out}), b_(Shape{out}) {}

  std::size_t in_features() const { return w_.value.dim(0); }
  std::size_t out_features() const { return w_.value.dim(1); }

  // y = x * w + b for x of shape N x I.
  BasicTensor<T> forward(const BasicTensor<T>& x) {
    const std::size_t in = in_features();
    const std::size_t out = out_features();
    if (x.rank() != 2 || x.dim(1) != in) {
      throw ShapeError("affine: expected N x " + std::to_string(in) + " input, got " +
                       shape_str(x.shape()));
    }
    input_ = x;
    const std::size_t n = x.dim(0);
    BasicTensor<T> y(Shape{n, out});
    std::vector<double> acc(out);
    const T* w = w_.value.data();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t o = 0; o < out; ++o) acc[o] = b_.value[o];
      const T* xr = x.data() + r * in;
      for (std::size_t i = 0; i < in; ++i) {
        const double xi = xr[i];
        if (xi == 0.0) continue;
        const T* wi = w + i * out;
        for (std::size_t o = 0; o < out; ++o) acc[o] += xi * static_cast<double>(wi[o]);
      }
      T* yr = y.data() + r * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] = static_cast<T>(acc[o]);
    }
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& gy) {
    const std::size_t in = in_features();
    const std::size_t out = out_features();
    const std::size_t n = input_.dim(0);
    if (gy.rank() != 2 || gy.dim(0) != n || gy.dim(1) != out) {
      throw ShapeError("affine backward: upstream gradient shape " + shape_str(gy.shape()));
    }
    BasicTensor<T> gx(Shape{n, in});
    std::vector<double> gw(in * out, 0.0);
    std::vector<double> gb(out, 0.0);
    const T* w = w_.value.data();
    for (std::size_t r = 0; r < n; ++r) {
      const T* g = gy.data() + r * out;
      const T* xr = input_.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) gb[o] += g[o];
      for (std::size_t i = 0; i < in; ++i) {
        const T* wi = w + i * out;
        double s = 0.0;
        for (std::size_t o = 0; o < out; ++o) s += static_cast<double>(g[o]) * wi[o];
        gx[r * in + i] = static_cast<T>(s);
        const double xi = xr[i];
        if (xi == 0.0) continue;
        double* gwi = gw.data() + i * out;
        for (std::size_t o = 0; o < out; ++o) gwi[o] += xi * static_cast<double>(g[o]);
      }
    }
    for (std::size_t k = 0; k < gw.size(); ++k) w_.grad[k] += static_cast<T>(gw[k]);
    for (std::size_t o = 0; o < out; ++o) b_.grad[o] += static_cast<T>(gb[o]);
    return gx;
  }

  BasicParam<T>& weight() { return w_; }
  BasicParam<T>& bias() { return b_; }
  std::vector<BasicParam<T>*> params() { return {&w_, &b_}; }

 private:
  BasicParam<T> w_;
  BasicParam<T> b_;
  BasicTensor<T> input_;
};

// 2-D cross-correlation over NHWC input with a kh x kw x C x F kernel.
template <typename T>
class Conv2d {
 public:
  Conv2d(std::size_t kh, std::size_t kw, std::size_t channels, std::size_t filters,
         std::size_t stride, std::size_t pad)
      : k_(Shape{kh, kw, channels, filters}), b_(Shape{filters}), stride_(stride), pad_(pad) {
    if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  }

  std::size_t kernel_h() const { return k_.value.dim(0); }
  std::size_t kernel_w() const { return k_.value.dim(1); }
  std::size_t channels() const { return k_.value.dim(2); }
  std::size_t filters() const { return k_.value.dim(3); }
  std::size_t stride() const { return stride_; }
  std::size_t pad() const { return pad_; }

  // floor((size + 2 pad - k) / stride) + 1, or an error when non-positive.
  std::size_t out_dim(std::size_t size, std::size_t k) const {
    const long long span = static_cast<long long>(size + 2 * pad_) - static_cast<long long>(k);
    if (span < 0) {
      throw ShapeError("conv2d: kernel larger than padded input (" + std::to_string(size) + ")");
    }
    return static_cast<std::size_t>(span) / stride_ + 1;
  }

  BasicTensor<T> forward(const BasicTensor<T>& x) {
    if (x.rank() != 4 || x.dim(3) != channels()) {
      throw ShapeError("conv2d: expected N x H x W x " + std::to_string(channels()) +
                       " input, got " + shape_str(x.shape()));
    }
    input_ = x;
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = channels(), f = filters();
    const std::size_t oh = out_dim(h, kernel_h()), ow = out_dim(w, kernel_w());
    BasicTensor<T> y(Shape{n, oh, ow, f});
    std::vector<double> acc(f);
    const T* k = k_.value.data();
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          for (std::size_t o = 0; o < f; ++o) acc[o] = b_.value[o];
          for (std::size_t ky = 0; ky < kernel_h(); ++ky) {
            const long long iy = static_cast<long long>(oy * stride_ + ky) - static_cast<long long>(pad_);
            if (iy < 0 || iy >= static_cast<long long>(h)) continue;
            for (std::size_t kx = 0; kx < kernel_w(); ++kx) {
              const long long ix = static_cast<long long>(ox * stride_ + kx) - static_cast<long long>(pad_);
              if (ix < 0 || ix >= static_cast<long long>(w)) continue;
              const T* xp = x.data() + ((b * h + iy) * w + ix) * c;
              const T* kp = k + (ky * kernel_w() + kx) * c * f;
              for (std::size_t ci = 0; ci < c; ++ci) {
                const double xv = xp[ci];
                if (xv == 0.0) continue;
                const T* kc = kp + ci * f;
                for (std::size_t o = 0; o < f; ++o) acc[o] += xv * static_cast<double>(kc[o]);
              }
            }
          }
          T* yp = y.data() + ((b * oh + oy) * ow + ox) * f;
          for (std::size_t o = 0; o < f; ++o) yp[o] = static_cast<T>(acc[o]);
        }
      }
    }
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& gy) {
    const std::size_t n = input_.dim(0), h = input_.dim(1), w = input_.dim(2);
    const std::size_t c = channels(), f = filters();
    const std::size_t oh = out_dim(h, kernel_h()), ow = out_dim(w, kernel_w());
    if (gy.shape() != Shape{n, oh, ow, f}) {
      throw ShapeError("conv2d backward: upstream gradient shape " + shape_str(gy.shape()));
    }
    std::vector<double> gx(input_.size(), 0.0);
    std::vector<double> gk(k_.value.size(), 0.0);
    std::vector<double> gb(f, 0.0);
    const T* k = k_.value.data();
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T* g = gy.data() + ((b * oh + oy) * ow + ox) * f;
          for (std::size_t o = 0; o < f; ++o) gb[o] += g[o];
          for (std::size_t ky = 0; ky < kernel_h(); ++ky) {
            const long long iy = static_cast<long long>(oy * stride_ + ky) - static_cast<long long>(pad_);
            if (iy < 0 || iy >= static_cast<long long>(h)) continue;
            for (std::size_t kx = 0; kx < kernel_w(); ++kx) {
              const long long ix = static_cast<long long>(ox * stride_ + kx) - static_cast<long long>(pad_);
              if (ix < 0 || ix >= static_cast<long long>(w)) continue;
              const std::size_t xoff = ((b * h + iy) * w + ix) * c;
              const std::size_t koff = (ky * kernel_w() + kx) * c * f;
              for (std::size_t ci = 0; ci < c; ++ci) {
                const T* kc = k + koff + ci * f;
                const double xv = input_[xoff + ci];
                double* gkc = gk.data() + koff + ci * f;
                double s = 0.0;
                for (std::size_t o = 0; o < f; ++o) {
                  s += static_cast<double>(g[o]) * kc[o];
                  gkc[o] += xv * static_cast<double>(g[o]);
                }
                gx[xoff + ci] += s;
              }
            }
          }
        }
      }
    }
    for (std::size_t i = 0; i < gk.size(); ++i) k_.grad[i] += static_cast<T>(gk[i]);
    for (std::size_t o = 0; o < f; ++o) b_.grad[o] += static_cast<T>(gb[o]);
    return BasicTensor<T>(input_.shape(), std::vector<T>(gx.begin(), gx.end()));
  }

  BasicParam<T>& kernel() { return k_; }
  BasicParam<T>& bias() { return b_; }
  std::vector<BasicParam<T>*> params() { return {&k_, &b_}; }

 private:
  BasicParam<T> k_;
  BasicParam<T> b_;
  std::size_t stride_;
  std::size_t pad_;
  BasicTensor<T> input_;
};

template <typename T>
class Relu {
 public:
  BasicTensor<T> forward(const BasicTensor<T>& x) {
    input_ = x;
    BasicTensor<T> y = x;
    for (T& v : y.values()) v = v > T{0} ? v : T{0};
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& gy) {
    BasicTensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (!(input_[i] > T{0})) gx[i] = T{0};
    }
    return gx;
  }

  std::vector<BasicParam<T>*> params() { return {}; }

 private:
  BasicTensor<T> input_;
};

template <typename T>
T sigmoid(T x) {
  return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

template <typename T>
class Sigmoid {
 public:
  BasicTensor<T> forward(const BasicTensor<T>& x) {
    BasicTensor<T> y = x;
    for (T& v : y.values()) v = sigmoid(v);
    output_ = y;
    return y;
  }

  BasicTensor<T> backward(const BasicTensor<T>& gy) {
    BasicTensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= output_[i] * (T{1} - output_[i]);
    return gx;
  }

  std::vector<BasicParam<T>*> params() { return {}; }

 private:
  BasicTensor<T> output_;
};

// Collapses everything after the batch dimension.
template <typename T>
class Flatten {
 public:
  BasicTensor<T> forward(const BasicTensor<T>& x) {
    input_shape_ = x.shape();
    return x.reshaped(Shape{x.dim(0), x.row_size()});
  }

  BasicTensor<T> backward(const BasicTensor<T>& gy) { return gy.reshaped(input_shape_); }

  std::vector<BasicParam<T>*> params() { return {}; }

 private:
  Shape input_shape_;
};

// Plain SGD descent step, then zeroes the gradients.
template <typename T>
void sgd_step(std::span<BasicParam<T>* const> params, double lr) {
  for (BasicParam<T>* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->value[i] = static_cast<T>(p->value[i] - lr * p->grad[i]);
    }
    p->zero_grad();
  }
}

}  // namespace hdpan
