#include "ceunet/unet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ceunet/checkpoint.hpp"
#include "ceunet/error.hpp"

namespace ceunet {

SampleView SampleView::of(const LabeledPixelSet& ds) {
  return {1, ds.dim, ds.num_classes, ds.samples, ds.labels};
}

SampleView SampleView::of(const PatchDataset& ds) {
  return {ds.n, ds.dim, ds.num_classes, ds.patches, ds.labels};
}

std::size_t default_batch_size(std::size_t patch) { return patch <= 1 ? 256 : 32; }

// ------------------------------------------------------------------ UNet

template <class T>
nn::Tensor<T> UNet<T>::Block::forward(const nn::Tensor<T>& x, bool training, Rng& rng) {
  return drop->forward(act->forward(norm->forward(conv->forward(x, training, rng), training, rng), training, rng),
                       training, rng);
}

template <class T>
nn::Tensor<T> UNet<T>::Block::infer(const nn::Tensor<T>& x) const {
  return drop->infer(act->infer(norm->infer(conv->infer(x))));
}

template <class T>
nn::Tensor<T> UNet<T>::Block::backward(const nn::Tensor<T>& dy, bool need_input_grad) {
  return conv->backward(norm->backward(act->backward(drop->backward(dy))), need_input_grad);
}

template <class T>
typename UNet<T>::Block UNet<T>::make_block(const std::string& name, std::size_t in, std::size_t out,
                                            bool transposed) {
  nn::ConvShape shape;
  shape.in_channels = in;
  shape.out_channels = out;
  shape.transposed = transposed;
  shape.bias = false;
  Block b;
  b.conv = std::make_unique<nn::Conv2d<T>>(name, shape);
  b.norm = std::make_unique<nn::BatchNorm<T>>(name + "_bn", out);
  b.act = std::make_unique<nn::LeakyRelu<T>>(spec_.leaky_slope);
  b.drop = std::make_unique<nn::Dropout<T>>(spec_.dropout);
  return b;
}

template <class T>
UNet<T>::UNet(const UNetSpec& spec, std::uint64_t init_seed) : spec_(spec), init_seed_(init_seed) {
  if (spec.num_classes < 2) fail(ErrorKind::Spec, "a U-Net needs at least 2 classes");
  if (spec.patch < 1 || spec.in_features < 1) fail(ErrorKind::Spec, "patch size and features must be >= 1");
  if (spec.dropout < 0.0 || spec.dropout >= 1.0) fail(ErrorKind::Spec, "dropout rate must lie in [0,1)");
  const auto [w1, w2, w3] = spec.widths;
  blocks_[0] = make_block("conv1", spec.in_features, w1, false);
  blocks_[1] = make_block("conv2", w1, w2, false);
  blocks_[2] = make_block("conv3", w2, w3, false);
  blocks_[3] = make_block("deconv3", w3, w3, true);
  blocks_[4] = make_block("deconv2", w3 + w2, w2, true);
  nn::ConvShape head;
  head.in_channels = w2 + w1;
  head.out_channels = static_cast<std::size_t>(spec.num_classes);
  head.transposed = true;
  head.bias = true;
  head_ = std::make_unique<nn::Conv2d<T>>("deconv1", head);

  Rng rng(init_seed);
  for (auto& b : blocks_) b.conv->initialize(rng);
  head_->initialize(rng);
}

template <class T>
nn::Tensor<T> UNet<T>::forward(const nn::Tensor<T>& x, bool training, Rng& rng) {
  const auto a1 = blocks_[0].forward(x, training, rng);
  const auto a2 = blocks_[1].forward(a1, training, rng);
  const auto a3 = blocks_[2].forward(a2, training, rng);
  const auto u3 = blocks_[3].forward(a3, training, rng);
  const auto u2 = blocks_[4].forward(nn::concat_channels(u3, a2), training, rng);
  return head_->forward(nn::concat_channels(u2, a1), training, rng);
}

template <class T>
nn::Tensor<T> UNet<T>::infer(const nn::Tensor<T>& x) const {
  const auto a1 = blocks_[0].infer(x);
  const auto a2 = blocks_[1].infer(a1);
  const auto a3 = blocks_[2].infer(a2);
  const auto u3 = blocks_[3].infer(a3);
  const auto u2 = blocks_[4].infer(nn::concat_channels(u3, a2));
  return head_->infer(nn::concat_channels(u2, a1));
}

namespace {
template <class T>
void add_into(nn::Tensor<T>& dst, const nn::Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}
}  // namespace

template <class T>
void UNet<T>::backward(const nn::Tensor<T>& dlogits) {
  const auto [w1, w2, w3] = spec_.widths;
  auto [du2, da1_skip] = nn::split_channels(head_->backward(dlogits, true), w2);
  auto [du3, da2_skip] = nn::split_channels(blocks_[4].backward(du2, true), w3);
  auto da3 = blocks_[3].backward(du3, true);
  auto da2 = blocks_[2].backward(da3, true);
  add_into(da2, da2_skip);
  auto da1 = blocks_[1].backward(da2, true);
  add_into(da1, da1_skip);
  blocks_[0].backward(da1, false);
}

template <class T>
std::vector<nn::Param<T>*> UNet<T>::params() {
  std::vector<nn::Param<T>*> out;
  for (auto& b : blocks_) {
    for (auto* p : b.conv->params()) out.push_back(p);
    for (auto* p : b.norm->params()) out.push_back(p);
  }
  for (auto* p : head_->params()) out.push_back(p);
  return out;
}

template <class T>
std::vector<std::pair<std::string, std::vector<T>*>> UNet<T>::buffers() {
  std::vector<std::pair<std::string, std::vector<T>*>> out;
  for (auto& b : blocks_) {
    for (auto& buf : b.norm->buffers()) out.push_back(buf);
  }
  return out;
}

template <class T>
std::size_t UNet<T>::trainable_parameter_count() {
  return nn::count_parameters(params());
}

template <class T>
std::vector<LayerSummary> UNet<T>::summary() {
  const std::size_t n = spec_.patch;
  auto shape = [n](std::size_t c) {
    return "(" + std::to_string(n) + "," + std::to_string(n) + "," + std::to_string(c) + ")";
  };
  std::vector<LayerSummary> rows;
  rows.push_back({"input", "InputLayer", shape(spec_.in_features), 0});
  const std::array<const char*, 5> names{"conv1", "conv2", "conv3", "deconv3", "deconv2"};
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const std::size_t c = b.conv->shape().out_channels;
    rows.push_back({names[i], b.conv->type(), shape(c), b.conv->weight().value.size()});
    rows.push_back({std::string(names[i]) + "_bn", "BatchNormalization", shape(c), 4 * c});
    rows.push_back({std::string(names[i]) + "_act", "LeakyReLU", shape(c), 0});
    rows.push_back({std::string(names[i]) + "_drop", "Dropout", shape(c), 0});
    if (i == 3) rows.push_back({"concatenate", "Concatenate", shape(c + spec_.widths[1]), 0});
    if (i == 4) rows.push_back({"concatenate_1", "Concatenate", shape(c + spec_.widths[0]), 0});
  }
  const std::size_t m = static_cast<std::size_t>(spec_.num_classes);
  rows.push_back({"deconv1", head_->type(), shape(m), head_->weight().value.size() + head_->bias().value.size()});
  rows.push_back({"reshape", "Reshape", "(" + std::to_string(n * n) + "," + std::to_string(m) + ")", 0});
  rows.push_back({"pixel_softmax", "PixelSoftmax", "(" + std::to_string(n * n) + "," + std::to_string(m) + ")", 0});
  return rows;
}

template <class T>
double UNet<T>::compute_gradients(const nn::Tensor<T>& x, std::span<const int> labels, double loss_weight,
                                  Rng& rng) {
  const std::size_t batch = x.batch;
  if (labels.size() != batch) fail(ErrorKind::Dimension, "label count does not match batch size");
  const std::size_t m = static_cast<std::size_t>(spec_.num_classes);
  for (int y : labels) {
    if (y < 1 || y > spec_.num_classes) {
      fail(ErrorKind::Label, "label " + std::to_string(y) + " outside 1.." + std::to_string(spec_.num_classes));
    }
  }
  nn::zero_grad(params());
  const nn::Tensor<T> logits = forward(x, true, rng);
  nn::Tensor<T> dlogits(logits.batch, logits.h, logits.w, logits.c);
  const std::size_t cells = logits.h * logits.w;
  const std::size_t centre = (logits.h / 2) * logits.w + logits.w / 2;
  const double scale = loss_weight / static_cast<double>(batch);
  double loss = 0.0;
  std::vector<double> p(m);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t r = b * cells + centre;
    const T* z = logits.row(r);
    double zmax = z[0];
    for (std::size_t k = 1; k < m; ++k) zmax = std::max(zmax, static_cast<double>(z[k]));
    double denom = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      p[k] = std::exp(static_cast<double>(z[k]) - zmax);
      denom += p[k];
    }
    const std::size_t y = static_cast<std::size_t>(labels[b] - 1);
    loss += std::log(denom) - (static_cast<double>(z[y]) - zmax);
    T* g = dlogits.row(r);
    for (std::size_t k = 0; k < m; ++k) {
      const double prob = p[k] / denom;
      g[k] = static_cast<T>(scale * (prob - (k == y ? 1.0 : 0.0)));
    }
  }
  backward(dlogits);
  return loss_weight * loss / static_cast<double>(batch);
}

template <class T>
std::vector<T> UNet<T>::probabilities(const nn::Tensor<T>& x) const {
  const nn::Tensor<T> logits = infer(x);
  const std::size_t m = logits.c;
  const std::size_t cells = logits.h * logits.w;
  const std::size_t centre = (logits.h / 2) * logits.w + logits.w / 2;
  std::vector<T> out(x.batch * m);
  std::vector<double> e(m);
  for (std::size_t b = 0; b < x.batch; ++b) {
    const T* z = logits.row(b * cells + centre);
    double zmax = z[0];
    for (std::size_t k = 1; k < m; ++k) zmax = std::max(zmax, static_cast<double>(z[k]));
    double denom = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      e[k] = std::exp(static_cast<double>(z[k]) - zmax);
      denom += e[k];
    }
    for (std::size_t k = 0; k < m; ++k) out[b * m + k] = static_cast<T>(e[k] / denom);
  }
  return out;
}

template class UNet<float>;
template class UNet<double>;

// -------------------------------------------------------------- training

UNet<float> build_unet(const UNetSpec& spec, std::uint64_t seed) {
  return UNet<float>(spec, derive_seed(seed, Stream::Network, 0));
}

namespace {

void check_view(const UNetSpec& spec, const SampleView& data) {
  if (data.dim != spec.in_features || data.n != spec.patch) {
    fail(ErrorKind::Dimension, "data is " + std::to_string(data.n) + "x" + std::to_string(data.n) + "x" +
                                   std::to_string(data.dim) + " but the network expects " +
                                   std::to_string(spec.patch) + "x" + std::to_string(spec.patch) + "x" +
                                   std::to_string(spec.in_features));
  }
  if (data.features.size() % data.stride() != 0) fail(ErrorKind::Dimension, "ragged feature buffer");
}

nn::Tensor<float> gather_batch(const SampleView& data, std::span<const std::size_t> idx) {
  nn::Tensor<float> x(idx.size(), data.n, data.n, data.dim);
  const std::size_t stride = data.stride();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(data.features.data() + idx[i] * stride, stride, x.data.data() + i * stride);
  }
  return x;
}

}  // namespace

void train_unet(UNet<float>& net, const SampleView& data, const TrainConfig& cfg) {
  check_view(net.spec(), data);
  if (cfg.epochs < 1) fail(ErrorKind::Config, "epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) fail(ErrorKind::Config, "learning rate must be positive");
  if (!(cfg.loss_weight > 0.0)) fail(ErrorKind::Config, "loss weight must be positive");
  const std::size_t n = data.size();
  if (n == 0) fail(ErrorKind::EmptyDataset, "no training samples");
  if (data.labels.size() != n) fail(ErrorKind::Dimension, "label count does not match sample count");
  for (int y : data.labels) {
    if (y < 1 || y > net.spec().num_classes) {
      fail(ErrorKind::Label, "label " + std::to_string(y) + " outside 1.." + std::to_string(net.spec().num_classes));
    }
  }

  const std::size_t batch = cfg.batch_size ? cfg.batch_size : default_batch_size(data.n);
  Rng rng(derive_seed(cfg.seed, Stream::Network, 1));
  nn::Adam<float> opt(cfg.learning_rate);
  const auto params = net.params();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> labels;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng() % (i + 1))]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      const nn::Tensor<float> x = gather_batch(data, idx);
      labels.resize(len);
      for (std::size_t i = 0; i < len; ++i) labels[i] = data.labels[idx[i]];
      const double loss = net.compute_gradients(x, labels, cfg.loss_weight, rng);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::Divergence, "non-finite loss at epoch " + std::to_string(epoch));
      }
      opt.step(params);
      total += loss * static_cast<double>(len);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double mean = total / static_cast<double>(n);
    net.loss_history.push_back(mean);
    net.epoch_seconds.push_back(seconds);
    if (cfg.on_epoch) cfg.on_epoch(epoch, mean, seconds);
  }
}

int argmax_class(std::span<const float> probs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return static_cast<int>(best) + 1;
}

Prediction predict(const UNet<float>& net, const SampleView& data) {
  check_view(net.spec(), data);
  const std::size_t n = data.size();
  const std::size_t m = static_cast<std::size_t>(net.spec().num_classes);
  const std::size_t chunk = data.n <= 1 ? 1024 : 64;
  Prediction out;
  out.num_classes = net.spec().num_classes;
  out.labels.resize(n);
  out.probabilities.resize(n * m);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t len = std::min(chunk, n - start);
    idx.resize(len);
    std::iota(idx.begin(), idx.end(), start);
    const auto probs = net.probabilities(gather_batch(data, idx));
    std::copy(probs.begin(), probs.end(), out.probabilities.begin() + static_cast<std::ptrdiff_t>(start * m));
    for (std::size_t i = 0; i < len; ++i) {
      out.labels[start + i] = argmax_class(std::span<const float>(probs.data() + i * m, m));
    }
  }
  return out;
}

double overall_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) fail(ErrorKind::Metric, "prediction and truth lengths differ");
  if (predicted.empty()) fail(ErrorKind::Metric, "accuracy of an empty set is undefined");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

// ---------------------------------------------------------- checkpoints

void save_unet(const std::filesystem::path& path, UNet<float>& net, const std::string& extra_meta_json) {
  const auto& s = net.spec();
  Checkpoint c;
  c.kind = "unet";
  c.meta = {{"patch", s.patch},
            {"in_features", s.in_features},
            {"num_classes", s.num_classes},
            {"dropout", s.dropout},
            {"leaky_slope", s.leaky_slope},
            {"widths", s.widths},
            {"init_seed", net.init_seed()},
            {"epochs", net.loss_history.size()},
            {"loss_history", net.loss_history},
            {"extra", io::Json::parse(extra_meta_json)}};
  for (auto* p : net.params()) c.add(p->name, p->value);
  for (auto& [name, buf] : net.buffers()) c.add(name, *buf);
  save_checkpoint(path, c);
}

UNet<float> load_unet(const std::filesystem::path& path) {
  const Checkpoint c = load_checkpoint(path, "unet");
  UNetSpec s;
  s.patch = c.meta.at("patch").get<std::size_t>();
  s.in_features = c.meta.at("in_features").get<std::size_t>();
  s.num_classes = c.meta.at("num_classes").get<int>();
  s.dropout = c.meta.at("dropout").get<double>();
  s.leaky_slope = c.meta.at("leaky_slope").get<double>();
  s.widths = c.meta.at("widths").get<std::array<std::size_t, 3>>();
  UNet<float> net(s, c.meta.at("init_seed").get<std::uint64_t>());
  for (auto* p : net.params()) {
    const auto& v = c.f32(p->name);
    if (v.size() != p->value.size()) fail(ErrorKind::Integrity, "tensor size mismatch for " + p->name);
    p->value = v;
  }
  for (auto& [name, buf] : net.buffers()) {
    const auto& v = c.f32(name);
    if (v.size() != buf->size()) fail(ErrorKind::Integrity, "tensor size mismatch for " + name);
    *buf = v;
  }
  net.loss_history = c.meta.at("loss_history").get<std::vector<double>>();
  return net;
}

}  // namespace ceunet
