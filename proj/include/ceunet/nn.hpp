#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ceunet/rng.hpp"

namespace ceunet::nn {

// NHWC activations; row r = (b*h + y)*w + x holds c channels.
template <class T>
struct Tensor {
  std::size_t batch = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t b, std::size_t hh, std::size_t ww, std::size_t cc)
      : batch(b), h(hh), w(ww), c(cc), data(b * hh * ww * cc, T(0)) {}

  std::size_t rows() const { return batch * h * w; }
  std::size_t size() const { return data.size(); }
  T* row(std::size_t r) { return data.data() + r * c; }
  const T* row(std::size_t r) const { return data.data() + r * c; }
};

// Channel-wise concatenation [a | b].
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
// Inverse of concat_channels for gradients.
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, std::size_t first);

template <class T>
struct Param {
  std::string name;
  std::vector<T> value;
  std::vector<T> grad;
};

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string type() const = 0;
  // Caches whatever backward() needs.
  virtual Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) = 0;
  // Inference-mode forward; touches no layer state.
  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  // Accumulates parameter gradients; returns dL/dx unless need_input_grad is false.
  virtual Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  // Non-trainable persistent state (running statistics).
  virtual std::vector<std::pair<std::string, std::vector<T>*>> buffers() { return {}; }
};

struct ConvShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t pad_h = 1;
  std::size_t pad_w = 1;
  bool transposed = false;
  bool bias = false;
};

// Stride-1 convolution or transposed convolution. Weights are stored
// [tap][in][out]; a transposed layer mirrors the tap offsets, which is the
// stride-1 form of the gradient-of-convolution operator.
template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, const ConvShape& shape);

  std::string type() const override { return shape_.transposed ? "Conv2DTranspose" : "Conv2D"; }
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) override;
  std::vector<Param<T>*> params() override;

  // Glorot-uniform weights, zero bias.
  void initialize(Rng& rng);
  const ConvShape& shape() const { return shape_; }
  std::size_t out_h(std::size_t in_h) const;
  std::size_t out_w(std::size_t in_w) const;
  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  long offset_h(std::size_t ky) const;
  long offset_w(std::size_t kx) const;
  // Gathers the tap-shifted input into `out` (rows of the output grid).
  // Returns false when the tap touches no valid input cell.
  bool gather(const Tensor<T>& x, std::size_t oh, std::size_t ow, long dy, long dx,
              std::vector<T>& out) const;
  Tensor<T> apply(const Tensor<T>& x) const;

  ConvShape shape_;
  Param<T> weight_;
  Param<T> bias_;
  Tensor<T> input_;
  std::size_t oh_ = 0, ow_ = 0;
};

template <class T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(std::string name, std::size_t channels, double momentum = 0.99, double epsilon = 1e-3);

  std::string type() const override { return "BatchNormalization"; }
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) override;
  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, std::vector<T>*>> buffers() override;

 private:
  std::size_t channels_;
  double momentum_;
  double epsilon_;
  Param<T> gamma_;
  Param<T> beta_;
  std::string name_;
  std::vector<T> moving_mean_;
  std::vector<T> moving_var_;
  std::vector<T> xhat_;
  std::vector<double> inv_std_;
  bool used_batch_stats_ = false;
};

template <class T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(double slope = 0.01) : slope_(static_cast<T>(slope)) {}
  std::string type() const override { return "LeakyReLU"; }
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) override;

 private:
  T slope_;
  std::vector<unsigned char> positive_;
};

// Inverted dropout: kept activations are scaled by 1/(1-rate) during training.
template <class T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  std::string type() const override { return "Dropout"; }
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) override;

 private:
  double rate_;
  std::vector<T> mask_;
};

// Max pooling with ceil-mode output size.
template <class T>
class MaxPool final : public Layer<T> {
 public:
  MaxPool(std::size_t ph, std::size_t pw) : ph_(ph), pw_(pw) {}
  std::string type() const override { return "MaxPooling"; }
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) override;

 private:
  std::size_t ph_, pw_;
  std::size_t in_h_ = 0, in_w_ = 0, batch_ = 0, c_ = 0;
  std::vector<std::size_t> argmax_;

  Tensor<T> pool(const Tensor<T>& x, std::vector<std::size_t>* argmax) const;
};

// Nearest-neighbour upsampling to an explicit output size.
template <class T>
class Upsample final : public Layer<T> {
 public:
  Upsample(std::size_t sh, std::size_t sw, std::size_t out_h, std::size_t out_w)
      : sh_(sh), sw_(sw), out_h_(out_h), out_w_(out_w) {}
  std::string type() const override { return "UpSampling"; }
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) override;
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) override;

 private:
  std::size_t sh_, sw_, out_h_, out_w_;
  std::size_t in_h_ = 0, in_w_ = 0;
};

template <class T>
class Sequential {
 public:
  void add(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng);
  Tensor<T> infer(const Tensor<T>& x) const;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true);
  std::vector<Param<T>*> params();
  std::vector<std::pair<std::string, std::vector<T>*>> buffers();
  std::size_t size() const { return layers_.size(); }
  Layer<T>& at(std::size_t i) { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Adaptive-moment optimizer; moments are allocated on first step.
template <class T>
class Adam {
 public:
  explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-7)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}
  void step(const std::vector<Param<T>*>& params);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  long t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

template <class T>
void zero_grad(const std::vector<Param<T>*>& params);

template <class T>
std::size_t count_parameters(const std::vector<Param<T>*>& params);

}  // namespace ceunet::nn
