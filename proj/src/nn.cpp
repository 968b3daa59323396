#include "ceunet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ceunet/error.hpp"
#include "ceunet/simd/kernels.hpp"

namespace ceunet::nn {

using simd::Trans;

namespace {

// Uniform double in [0,1) from the top 53 bits; stable across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows()) fail(ErrorKind::Dimension, "concat: spatial/batch mismatch");
  Tensor<T> out(a.batch, a.h, a.w, a.c + b.c);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy_n(a.row(r), a.c, out.row(r));
    std::copy_n(b.row(r), b.c, out.row(r) + a.c);
  }
  return out;
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::size_t first) {
  Tensor<T> a(x.batch, x.h, x.w, first);
  Tensor<T> b(x.batch, x.h, x.w, x.c - first);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy_n(x.row(r), first, a.row(r));
    std::copy_n(x.row(r) + first, x.c - first, b.row(r));
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------- Conv2d

template <class T>
Conv2d<T>::Conv2d(std::string name, const ConvShape& shape) : shape_(shape) {
  weight_.name = name + "/kernel";
  const std::size_t n = shape.kernel_h * shape.kernel_w * shape.in_channels * shape.out_channels;
  weight_.value.assign(n, T(0));
  weight_.grad.assign(n, T(0));
  if (shape.bias) {
    bias_.name = name + "/bias";
    bias_.value.assign(shape.out_channels, T(0));
    bias_.grad.assign(shape.out_channels, T(0));
  }
}

template <class T>
void Conv2d<T>::initialize(Rng& rng) {
  const double taps = static_cast<double>(shape_.kernel_h * shape_.kernel_w);
  const double fan_in = taps * static_cast<double>(shape_.in_channels);
  const double fan_out = taps * static_cast<double>(shape_.out_channels);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& w : weight_.value) w = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
  std::fill(bias_.value.begin(), bias_.value.end(), T(0));
}

template <class T>
std::vector<Param<T>*> Conv2d<T>::params() {
  if (shape_.bias) return {&weight_, &bias_};
  return {&weight_};
}

template <class T>
std::size_t Conv2d<T>::out_h(std::size_t in_h) const {
  return shape_.transposed ? in_h + shape_.kernel_h - 1 - 2 * shape_.pad_h
                           : in_h + 2 * shape_.pad_h - shape_.kernel_h + 1;
}

template <class T>
std::size_t Conv2d<T>::out_w(std::size_t in_w) const {
  return shape_.transposed ? in_w + shape_.kernel_w - 1 - 2 * shape_.pad_w
                           : in_w + 2 * shape_.pad_w - shape_.kernel_w + 1;
}

template <class T>
long Conv2d<T>::offset_h(std::size_t ky) const {
  const long d = static_cast<long>(ky) - static_cast<long>(shape_.pad_h);
  return shape_.transposed ? -d : d;
}

template <class T>
long Conv2d<T>::offset_w(std::size_t kx) const {
  const long d = static_cast<long>(kx) - static_cast<long>(shape_.pad_w);
  return shape_.transposed ? -d : d;
}

namespace {

struct Range {
  long lo, hi;
  bool empty() const { return lo >= hi; }
};

// Output coordinates o with 0 <= o + d < in and 0 <= o < out.
inline Range valid_range(long d, std::size_t in, std::size_t out) {
  return {std::max(0L, -d), std::min(static_cast<long>(out), static_cast<long>(in) - d)};
}

}  // namespace

template <class T>
bool Conv2d<T>::gather(const Tensor<T>& x, std::size_t oh, std::size_t ow, long dy, long dx,
                       std::vector<T>& out) const {
  const Range ry = valid_range(dy, x.h, oh);
  const Range rx = valid_range(dx, x.w, ow);
  if (ry.empty() || rx.empty()) return false;
  const std::size_t cin = x.c;
  out.assign(x.batch * oh * ow * cin, T(0));
  const std::size_t span = static_cast<std::size_t>(rx.hi - rx.lo) * cin;
  for (std::size_t b = 0; b < x.batch; ++b) {
    for (long oy = ry.lo; oy < ry.hi; ++oy) {
      const std::size_t src_row = (b * x.h + static_cast<std::size_t>(oy + dy)) * x.w +
                                  static_cast<std::size_t>(rx.lo + dx);
      const std::size_t dst_row = (b * oh + static_cast<std::size_t>(oy)) * ow + static_cast<std::size_t>(rx.lo);
      std::copy_n(x.data.data() + src_row * cin, span, out.data() + dst_row * cin);
    }
  }
  return true;
}

template <class T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, bool, Rng&) {
  Tensor<T> y = apply(x);
  oh_ = y.h;
  ow_ = y.w;
  input_ = x;
  return y;
}

template <class T>
Tensor<T> Conv2d<T>::infer(const Tensor<T>& x) const {
  return apply(x);
}

template <class T>
Tensor<T> Conv2d<T>::apply(const Tensor<T>& x) const {
  if (x.c != shape_.in_channels) {
    fail(ErrorKind::Dimension, weight_.name + ": expected " + std::to_string(shape_.in_channels) +
                                   " input channels, got " + std::to_string(x.c));
  }
  const std::size_t oh = out_h(x.h);
  const std::size_t ow = out_w(x.w);
  const std::size_t cin = shape_.in_channels;
  const std::size_t cout = shape_.out_channels;
  Tensor<T> y(x.batch, oh, ow, cout);
  const std::size_t m = y.rows();
  if (shape_.bias) {
    for (std::size_t r = 0; r < m; ++r) std::copy_n(bias_.value.data(), cout, y.row(r));
  }
  std::vector<T> shifted;
  for (std::size_t ky = 0; ky < shape_.kernel_h; ++ky) {
    for (std::size_t kx = 0; kx < shape_.kernel_w; ++kx) {
      const long dy = offset_h(ky);
      const long dx = offset_w(kx);
      const T* w = weight_.value.data() + (ky * shape_.kernel_w + kx) * cin * cout;
      const T* a = nullptr;
      if (dy == 0 && dx == 0 && oh == x.h && ow == x.w) {
        a = x.data.data();
      } else if (gather(x, oh, ow, dy, dx, shifted)) {
        a = shifted.data();
      } else {
        continue;
      }
      simd::gemm<T>(Trans::No, Trans::No, m, cout, cin, a, cin, w, cout, y.data.data(), cout, true);
    }
  }
  return y;
}

template <class T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy_t, bool need_input_grad) {
  const Tensor<T>& x = input_;
  const std::size_t cin = shape_.in_channels;
  const std::size_t cout = shape_.out_channels;
  const std::size_t m = dy_t.rows();
  Tensor<T> dx_t;
  if (need_input_grad) dx_t = Tensor<T>(x.batch, x.h, x.w, cin);

  if (shape_.bias) {
    for (std::size_t r = 0; r < m; ++r) {
      const T* g = dy_t.row(r);
      for (std::size_t c = 0; c < cout; ++c) bias_.grad[c] += g[c];
    }
  }

  std::vector<T> shifted;
  std::vector<T> dshift;
  for (std::size_t ky = 0; ky < shape_.kernel_h; ++ky) {
    for (std::size_t kx = 0; kx < shape_.kernel_w; ++kx) {
      const long dy = offset_h(ky);
      const long dx = offset_w(kx);
      const std::size_t tap = ky * shape_.kernel_w + kx;
      const T* w = weight_.value.data() + tap * cin * cout;
      T* gw = weight_.grad.data() + tap * cin * cout;
      if (dy == 0 && dx == 0 && oh_ == x.h && ow_ == x.w) {
        simd::gemm<T>(Trans::Yes, Trans::No, cin, cout, m, x.data.data(), cin, dy_t.data.data(), cout, gw,
                      cout, true);
        if (need_input_grad) {
          simd::gemm<T>(Trans::No, Trans::Yes, m, cin, cout, dy_t.data.data(), cout, w, cout,
                        dx_t.data.data(), cin, true);
        }
        continue;
      }
      if (!gather(x, oh_, ow_, dy, dx, shifted)) continue;
      simd::gemm<T>(Trans::Yes, Trans::No, cin, cout, m, shifted.data(), cin, dy_t.data.data(), cout, gw,
                    cout, true);
      if (!need_input_grad) continue;
      dshift.resize(m * cin);
      simd::gemm<T>(Trans::No, Trans::Yes, m, cin, cout, dy_t.data.data(), cout, w, cout, dshift.data(), cin,
                    false);
      const Range ry = valid_range(dy, x.h, oh_);
      const Range rxr = valid_range(dx, x.w, ow_);
      for (std::size_t b = 0; b < x.batch; ++b) {
        for (long oy = ry.lo; oy < ry.hi; ++oy) {
          for (long ox = rxr.lo; ox < rxr.hi; ++ox) {
            const std::size_t src = (b * oh_ + static_cast<std::size_t>(oy)) * ow_ + static_cast<std::size_t>(ox);
            const std::size_t dst = (b * x.h + static_cast<std::size_t>(oy + dy)) * x.w +
                                    static_cast<std::size_t>(ox + dx);
            const T* s = dshift.data() + src * cin;
            T* d = dx_t.row(dst);
            for (std::size_t c = 0; c < cin; ++c) d[c] += s[c];
          }
        }
      }
    }
  }
  return dx_t;
}

// ------------------------------------------------------------- BatchNorm

template <class T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels, double momentum, double epsilon)
    : channels_(channels), momentum_(momentum), epsilon_(epsilon), name_(std::move(name)) {
  gamma_.name = name_ + "/gamma";
  gamma_.value.assign(channels, T(1));
  gamma_.grad.assign(channels, T(0));
  beta_.name = name_ + "/beta";
  beta_.value.assign(channels, T(0));
  beta_.grad.assign(channels, T(0));
  moving_mean_.assign(channels, T(0));
  moving_var_.assign(channels, T(1));
}

template <class T>
std::vector<std::pair<std::string, std::vector<T>*>> BatchNorm<T>::buffers() {
  return {{name_ + "/moving_mean", &moving_mean_}, {name_ + "/moving_variance", &moving_var_}};
}

template <class T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, bool training, Rng&) {
  const std::size_t c = channels_;
  if (x.c != c) fail(ErrorKind::Dimension, name_ + ": channel mismatch");
  const std::size_t m = x.rows();
  Tensor<T> y(x.batch, x.h, x.w, c);
  xhat_.resize(x.size());
  inv_std_.assign(c, 0.0);
  used_batch_stats_ = training;

  if (training) {
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const T* in = x.row(r);
      for (std::size_t k = 0; k < c; ++k) mean[k] += in[k];
    }
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      const T* in = x.row(r);
      for (std::size_t k = 0; k < c; ++k) {
        const double d = in[k] - mean[k];
        var[k] += d * d;
      }
    }
    for (auto& v : var) v /= static_cast<double>(m);
    for (std::size_t k = 0; k < c; ++k) {
      inv_std_[k] = 1.0 / std::sqrt(var[k] + epsilon_);
      const double unbiased = m > 1 ? var[k] * static_cast<double>(m) / static_cast<double>(m - 1) : var[k];
      moving_mean_[k] = static_cast<T>(momentum_ * moving_mean_[k] + (1.0 - momentum_) * mean[k]);
      moving_var_[k] = static_cast<T>(momentum_ * moving_var_[k] + (1.0 - momentum_) * unbiased);
    }
    std::vector<T> shift(c), scale(c);
    for (std::size_t k = 0; k < c; ++k) {
      shift[k] = static_cast<T>(mean[k]);
      scale[k] = static_cast<T>(inv_std_[k]);
    }
    for (std::size_t r = 0; r < m; ++r) {
      const T* in = x.row(r);
      T* xh = xhat_.data() + r * c;
      T* out = y.row(r);
      for (std::size_t k = 0; k < c; ++k) {
        xh[k] = (in[k] - shift[k]) * scale[k];
        out[k] = gamma_.value[k] * xh[k] + beta_.value[k];
      }
    }
  } else {
    std::vector<T> shift(c), scale(c);
    for (std::size_t k = 0; k < c; ++k) {
      inv_std_[k] = 1.0 / std::sqrt(static_cast<double>(moving_var_[k]) + epsilon_);
      shift[k] = moving_mean_[k];
      scale[k] = static_cast<T>(inv_std_[k]);
    }
    for (std::size_t r = 0; r < m; ++r) {
      const T* in = x.row(r);
      T* xh = xhat_.data() + r * c;
      T* out = y.row(r);
      for (std::size_t k = 0; k < c; ++k) {
        xh[k] = (in[k] - shift[k]) * scale[k];
        out[k] = gamma_.value[k] * xh[k] + beta_.value[k];
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> BatchNorm<T>::infer(const Tensor<T>& x) const {
  const std::size_t c = channels_;
  if (x.c != c) fail(ErrorKind::Dimension, name_ + ": channel mismatch");
  std::vector<T> a(c), b(c);
  for (std::size_t k = 0; k < c; ++k) {
    const double scale = gamma_.value[k] / std::sqrt(static_cast<double>(moving_var_[k]) + epsilon_);
    a[k] = static_cast<T>(scale);
    b[k] = static_cast<T>(beta_.value[k] - scale * moving_mean_[k]);
  }
  Tensor<T> y(x.batch, x.h, x.w, c);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const T* in = x.row(r);
    T* out = y.row(r);
    for (std::size_t k = 0; k < c; ++k) out[k] = a[k] * in[k] + b[k];
  }
  return y;
}

template <class T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& dy, bool need_input_grad) {
  const std::size_t c = channels_;
  const std::size_t m = dy.rows();
  std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const T* g = dy.row(r);
    const T* xh = xhat_.data() + r * c;
    for (std::size_t k = 0; k < c; ++k) {
      sum_dy[k] += g[k];
      sum_dy_xhat[k] += static_cast<double>(g[k]) * xh[k];
    }
  }
  for (std::size_t k = 0; k < c; ++k) {
    gamma_.grad[k] += static_cast<T>(sum_dy_xhat[k]);
    beta_.grad[k] += static_cast<T>(sum_dy[k]);
  }
  Tensor<T> dx;
  if (!need_input_grad) return dx;
  dx = Tensor<T>(dy.batch, dy.h, dy.w, c);
  if (used_batch_stats_) {
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<T> a(c), b(c), s(c);
    for (std::size_t k = 0; k < c; ++k) {
      const double coef = gamma_.value[k] * inv_std_[k];
      a[k] = static_cast<T>(coef);
      b[k] = static_cast<T>(coef * sum_dy[k] * inv_m);
      s[k] = static_cast<T>(coef * sum_dy_xhat[k] * inv_m);
    }
    for (std::size_t r = 0; r < m; ++r) {
      const T* g = dy.row(r);
      const T* xh = xhat_.data() + r * c;
      T* out = dx.row(r);
      for (std::size_t k = 0; k < c; ++k) out[k] = a[k] * g[k] - b[k] - xh[k] * s[k];
    }
  } else {
    for (std::size_t r = 0; r < m; ++r) {
      const T* g = dy.row(r);
      T* out = dx.row(r);
      for (std::size_t k = 0; k < c; ++k) out[k] = g[k] * gamma_.value[k] * static_cast<T>(inv_std_[k]);
    }
  }
  return dx;
}

// ------------------------------------------------------------- LeakyRelu

template <class T>
Tensor<T> LeakyRelu<T>::forward(const Tensor<T>& x, bool, Rng&) {
  Tensor<T> y = x;
  positive_.resize(x.size());
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const bool pos = y.data[i] > T(0);
    positive_[i] = pos;
    if (!pos) y.data[i] *= slope_;
  }
  return y;
}

template <class T>
Tensor<T> LeakyRelu<T>::infer(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (auto& v : y.data) {
    if (!(v > T(0))) v *= slope_;
  }
  return y;
}

template <class T>
Tensor<T> LeakyRelu<T>::backward(const Tensor<T>& dy, bool) {
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.data.size(); ++i) {
    if (!positive_[i]) dx.data[i] *= slope_;
  }
  return dx;
}

// --------------------------------------------------------------- Dropout

template <class T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, bool training, Rng& rng) {
  if (!training || rate_ <= 0.0) {
    mask_.clear();
    return x;
  }
  Tensor<T> y = x;
  mask_.resize(x.size());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    mask_[i] = uniform01(rng) >= rate_ ? keep_scale : T(0);
    y.data[i] *= mask_[i];
  }
  return y;
}

template <class T>
Tensor<T> Dropout<T>::infer(const Tensor<T>& x) const {
  return x;
}

template <class T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& dy, bool) {
  if (mask_.empty()) return dy;
  Tensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= mask_[i];
  return dx;
}

// --------------------------------------------------------------- MaxPool

template <class T>
Tensor<T> MaxPool<T>::forward(const Tensor<T>& x, bool, Rng&) {
  in_h_ = x.h;
  in_w_ = x.w;
  batch_ = x.batch;
  c_ = x.c;
  return pool(x, &argmax_);
}

template <class T>
Tensor<T> MaxPool<T>::infer(const Tensor<T>& x) const {
  return pool(x, nullptr);
}

template <class T>
Tensor<T> MaxPool<T>::pool(const Tensor<T>& x, std::vector<std::size_t>* argmax) const {
  const std::size_t oh = (x.h + ph_ - 1) / ph_;
  const std::size_t ow = (x.w + pw_ - 1) / pw_;
  Tensor<T> y(x.batch, oh, ow, x.c);
  if (argmax) argmax->assign(y.size(), 0);
  for (std::size_t b = 0; b < x.batch; ++b) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t orow = (b * oh + oy) * ow + ox;
        for (std::size_t k = 0; k < x.c; ++k) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t arg = 0;
          for (std::size_t iy = oy * ph_; iy < std::min(x.h, oy * ph_ + ph_); ++iy) {
            for (std::size_t ix = ox * pw_; ix < std::min(x.w, ox * pw_ + pw_); ++ix) {
              const std::size_t idx = ((b * x.h + iy) * x.w + ix) * x.c + k;
              if (x.data[idx] > best) {
                best = x.data[idx];
                arg = idx;
              }
            }
          }
          y.data[orow * x.c + k] = best;
          if (argmax) (*argmax)[orow * x.c + k] = arg;
        }
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> MaxPool<T>::backward(const Tensor<T>& dy, bool) {
  Tensor<T> dx(batch_, in_h_, in_w_, c_);
  for (std::size_t i = 0; i < dy.data.size(); ++i) dx.data[argmax_[i]] += dy.data[i];
  return dx;
}

// -------------------------------------------------------------- Upsample

template <class T>
Tensor<T> Upsample<T>::forward(const Tensor<T>& x, bool, Rng&) {
  in_h_ = x.h;
  in_w_ = x.w;
  return infer(x);
}

template <class T>
Tensor<T> Upsample<T>::infer(const Tensor<T>& x) const {
  Tensor<T> y(x.batch, out_h_, out_w_, x.c);
  for (std::size_t b = 0; b < x.batch; ++b) {
    for (std::size_t oy = 0; oy < out_h_; ++oy) {
      const std::size_t iy = std::min(oy / sh_, x.h - 1);
      for (std::size_t ox = 0; ox < out_w_; ++ox) {
        const std::size_t ix = std::min(ox / sw_, x.w - 1);
        std::copy_n(x.row((b * x.h + iy) * x.w + ix), x.c, y.row((b * out_h_ + oy) * out_w_ + ox));
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> Upsample<T>::backward(const Tensor<T>& dy, bool) {
  Tensor<T> dx(dy.batch, in_h_, in_w_, dy.c);
  for (std::size_t b = 0; b < dy.batch; ++b) {
    for (std::size_t oy = 0; oy < out_h_; ++oy) {
      const std::size_t iy = std::min(oy / sh_, in_h_ - 1);
      for (std::size_t ox = 0; ox < out_w_; ++ox) {
        const std::size_t ix = std::min(ox / sw_, in_w_ - 1);
        const T* g = dy.row((b * out_h_ + oy) * out_w_ + ox);
        T* d = dx.row((b * in_h_ + iy) * in_w_ + ix);
        for (std::size_t k = 0; k < dy.c; ++k) d[k] += g[k];
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ Sequential

template <class T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, bool training, Rng& rng) {
  Tensor<T> h = x;
  for (auto& layer : layers_) h = layer->forward(h, training, rng);
  return h;
}

template <class T>
Tensor<T> Sequential<T>::infer(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& layer : layers_) h = layer->infer(h);
  return h;
}

template <class T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& dy, bool need_input_grad) {
  Tensor<T> g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g, i > 0 || need_input_grad);
  }
  return g;
}

template <class T>
std::vector<Param<T>*> Sequential<T>::params() {
  std::vector<Param<T>*> out;
  for (auto& layer : layers_) {
    for (auto* p : layer->params()) out.push_back(p);
  }
  return out;
}

template <class T>
std::vector<std::pair<std::string, std::vector<T>*>> Sequential<T>::buffers() {
  std::vector<std::pair<std::string, std::vector<T>*>> out;
  for (auto& layer : layers_) {
    for (auto& b : layer->buffers()) out.push_back(b);
  }
  return out;
}

// ------------------------------------------------------------------ Adam

template <class T>
void Adam<T>::step(const std::vector<Param<T>*>& params) {
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (const auto* p : params) {
      m_.emplace_back(p->value.size(), T(0));
      v_.emplace_back(p->value.size(), T(0));
    }
  }
  ++t_;
  const double lr_t = lr_ * std::sqrt(1.0 - std::pow(beta2_, static_cast<double>(t_))) /
                      (1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
  const T c1 = static_cast<T>(1.0 - beta1_), c2 = static_cast<T>(1.0 - beta2_);
  const T lr = static_cast<T>(lr_t), eps = static_cast<T>(epsilon_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* w = params[i]->value.data();
    const T* g = params[i]->grad.data();
    T* m = m_[i].data();
    T* v = v_[i].data();
    const std::size_t n = params[i]->value.size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + c1 * g[j];
      v[j] = b2 * v[j] + c2 * g[j] * g[j];
      w[j] -= lr * m[j] / (std::sqrt(v[j]) + eps);
    }
  }
}

template <class T>
void zero_grad(const std::vector<Param<T>*>& params) {
  for (auto* p : params) std::fill(p->grad.begin(), p->grad.end(), T(0));
}

template <class T>
std::size_t count_parameters(const std::vector<Param<T>*>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

#define CEUNET_INSTANTIATE(T)                                                        \
  template struct Tensor<T>;                                                         \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);         \
  template std::pair<Tensor<T>, Tensor<T>> split_channels<T>(const Tensor<T>&, std::size_t); \
  template class Conv2d<T>;                                                          \
  template class BatchNorm<T>;                                                       \
  template class LeakyRelu<T>;                                                       \
  template class Dropout<T>;                                                         \
  template class MaxPool<T>;                                                         \
  template class Upsample<T>;                                                        \
  template class Sequential<T>;                                                      \
  template class Adam<T>;                                                            \
  template void zero_grad<T>(const std::vector<Param<T>*>&);                         \
  template std::size_t count_parameters<T>(const std::vector<Param<T>*>&);

CEUNET_INSTANTIATE(float)
CEUNET_INSTANTIATE(double)

#undef CEUNET_INSTANTIATE

}  // namespace ceunet::nn
