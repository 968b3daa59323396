#include "ceunet/cae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ceunet/checkpoint.hpp"
#include "ceunet/error.hpp"
#include "ceunet/io.hpp"
#include "ceunet/rng.hpp"

namespace ceunet {

using nn::Conv2d;
using nn::ConvShape;
using nn::Tensor;

CaeVariant parse_cae_variant(std::string_view s) {
  if (s == "cae2d") return CaeVariant::Cae2d;
  if (s == "cae3d") return CaeVariant::Cae3d;
  fail(ErrorKind::Config, "unknown autoencoder variant: " + std::string(s));
}

std::string_view to_string(CaeVariant v) { return v == CaeVariant::Cae2d ? "cae2d" : "cae3d"; }

CaeConfig CaeConfig::resolved() const {
  CaeConfig c = *this;
  const bool flat = variant == CaeVariant::Cae2d;
  if (c.latent_dim == 0) c.latent_dim = flat ? 32 : 30;
  if (c.epochs == 0) c.epochs = flat ? 100 : 150;
  if (c.widths.empty()) c.widths = flat ? std::vector<std::size_t>{128, 64} : std::vector<std::size_t>{8, 16, 32};
  if (c.input_dim == 0) fail(ErrorKind::Dimension, "autoencoder input dimension is zero");
  if (flat && c.widths.size() != 2) fail(ErrorKind::Config, "cae2d takes two hidden widths");
  if (!flat && c.widths.size() != 3) fail(ErrorKind::Config, "cae3d takes three hidden widths");
  if (c.epochs < 1) fail(ErrorKind::Config, "autoencoder epochs must be >= 1");
  if (!(c.learning_rate > 0.0)) fail(ErrorKind::Config, "learning rate must be positive");
  if (c.batch_size == 0) fail(ErrorKind::Config, "batch size must be positive");
  return c;
}

namespace {

constexpr double kSlope = 0.01;

std::size_t half_up(std::size_t v) { return (v + 1) / 2; }

void add_conv(nn::Sequential<float>& seq, Rng& rng, const std::string& name, const ConvShape& s, bool activate) {
  auto conv = std::make_unique<Conv2d<float>>(name, s);
  conv->initialize(rng);
  seq.add(std::move(conv));
  if (activate) seq.add(std::make_unique<nn::LeakyRelu<float>>(kSlope));
}

ConvShape square(std::size_t in, std::size_t out, bool transposed) {
  return {in, out, 3, 3, 1, 1, transposed, true};
}

ConvShape row(std::size_t in, std::size_t out, std::size_t k, std::size_t pad, bool transposed) {
  return {in, out, 1, k, 0, pad, transposed, true};
}

}  // namespace

CaeModel::CaeModel(const CaeConfig& cfg) : cfg_(cfg.resolved()) {
  Rng rng(derive_seed(cfg_.seed, Stream::Reducer, 0));
  const auto& w = cfg_.widths;
  const std::size_t b = cfg_.input_dim;
  const std::size_t z = cfg_.latent_dim;
  if (cfg_.variant == CaeVariant::Cae2d) {
    add_conv(encoder_, rng, "enc1", square(b, w[0], false), true);
    add_conv(encoder_, rng, "enc2", square(w[0], w[1], false), true);
    add_conv(encoder_, rng, "enc3", square(w[1], z, false), false);
    add_conv(decoder_, rng, "dec3", square(z, w[1], true), true);
    add_conv(decoder_, rng, "dec2", square(w[1], w[0], true), true);
    add_conv(decoder_, rng, "dec1", square(w[0], b, true), false);
    return;
  }
  const std::size_t l1 = half_up(b), l2 = half_up(l1), l3 = half_up(l2);
  add_conv(encoder_, rng, "enc1", row(1, w[0], 3, 1, false), true);
  encoder_.add(std::make_unique<nn::MaxPool<float>>(1, 2));
  add_conv(encoder_, rng, "enc2", row(w[0], w[1], 3, 1, false), true);
  encoder_.add(std::make_unique<nn::MaxPool<float>>(1, 2));
  add_conv(encoder_, rng, "enc3", row(w[1], w[2], 3, 1, false), true);
  encoder_.add(std::make_unique<nn::MaxPool<float>>(1, 2));
  add_conv(encoder_, rng, "bottleneck", row(w[2], z, l3, 0, false), false);

  add_conv(decoder_, rng, "unbottleneck", row(z, w[2], l3, 0, true), true);
  decoder_.add(std::make_unique<nn::Upsample<float>>(1, 2, 1, l2));
  add_conv(decoder_, rng, "dec3", row(w[2], w[1], 3, 1, true), true);
  decoder_.add(std::make_unique<nn::Upsample<float>>(1, 2, 1, l1));
  add_conv(decoder_, rng, "dec2", row(w[1], w[0], 3, 1, true), true);
  decoder_.add(std::make_unique<nn::Upsample<float>>(1, 2, 1, b));
  add_conv(decoder_, rng, "dec1", row(w[0], 1, 3, 1, true), false);
}

Tensor<float> CaeModel::as_input(std::span<const float> samples) const {
  const std::size_t b = cfg_.input_dim;
  if (samples.size() % b != 0) fail(ErrorKind::Dimension, "sample length is not a multiple of the input dimension");
  const std::size_t n = samples.size() / b;
  Tensor<float> x = cfg_.variant == CaeVariant::Cae2d ? Tensor<float>(n, 1, 1, b) : Tensor<float>(n, 1, b, 1);
  std::copy(samples.begin(), samples.end(), x.data.begin());
  return x;
}

std::vector<float> CaeModel::encode(std::span<const float> samples) const {
  return encoder_.infer(as_input(samples)).data;
}

std::vector<float> CaeModel::reconstruct(std::span<const float> samples) const {
  return decoder_.infer(encoder_.infer(as_input(samples))).data;
}

double CaeModel::reconstruction_mse(std::span<const float> samples) const {
  const std::vector<float> y = reconstruct(samples);
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = static_cast<double>(y[i]) - samples[i];
    ss += d * d;
  }
  return y.empty() ? 0.0 : ss / static_cast<double>(y.size());
}

double CaeModel::compute_gradients(std::span<const float> batch, Rng& rng) {
  const auto ps = params();
  nn::zero_grad(ps);
  const Tensor<float> x = as_input(batch);
  Tensor<float> y = decoder_.forward(encoder_.forward(x, true, rng), true, rng);
  const double scale = 2.0 / static_cast<double>(y.size());
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = static_cast<double>(y.data[i]) - x.data[i];
    ss += d * d;
    y.data[i] = static_cast<float>(scale * d);
  }
  encoder_.backward(decoder_.backward(y, true), false);
  return ss / static_cast<double>(y.size());
}

std::vector<nn::Param<float>*> CaeModel::params() {
  auto ps = encoder_.params();
  const auto dec = decoder_.params();
  ps.insert(ps.end(), dec.begin(), dec.end());
  return ps;
}

CaeModel cae_fit(std::span<const float> samples, const CaeConfig& cfg) {
  CaeModel model(cfg);
  const CaeConfig& c = model.config();
  const std::size_t b = c.input_dim;
  if (samples.size() % b != 0) fail(ErrorKind::Dimension, "sample length is not a multiple of the input dimension");
  const std::size_t n = samples.size() / b;
  if (n == 0) fail(ErrorKind::EmptyDataset, "no samples to fit the autoencoder on");

  Rng rng(derive_seed(c.seed, Stream::Reducer, 1));
  nn::Adam<float> opt(c.learning_rate);
  const auto ps = model.params();
  std::vector<std::size_t> order(n);
  std::vector<float> batch;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += c.batch_size) {
      const std::size_t count = std::min(c.batch_size, n - start);
      batch.resize(count * b);
      for (std::size_t i = 0; i < count; ++i) {
        std::copy_n(samples.data() + order[start + i] * b, b, batch.data() + i * b);
      }
      const double loss = model.compute_gradients(batch, rng);
      if (!std::isfinite(loss)) {
        fail(ErrorKind::Divergence, "autoencoder loss became non-finite at epoch " + std::to_string(epoch));
      }
      opt.step(ps);
      total += loss * static_cast<double>(count);
    }
    model.loss_history.push_back(total / static_cast<double>(n));
    if (c.on_epoch) c.on_epoch(epoch, model.loss_history.back());
  }
  return model;
}

void save_cae(const std::filesystem::path& path, CaeModel& model) {
  const CaeConfig& c = model.config();
  Checkpoint ck;
  ck.kind = "cae";
  ck.meta = io::Json{{"variant", std::string(to_string(c.variant))},
                 {"input_dim", c.input_dim},
                 {"latent_dim", c.latent_dim},
                 {"widths", c.widths},
                 {"epochs", c.epochs},
                 {"learning_rate", c.learning_rate},
                 {"seed", c.seed},
                 {"loss_history", model.loss_history}};
  for (auto* p : model.params()) ck.add(p->name, p->value);
  save_checkpoint(path, ck);
}

CaeModel load_cae(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path, "cae");
  CaeConfig c;
  try {
    c.variant = parse_cae_variant(ck.meta.at("variant").get<std::string>());
    c.input_dim = ck.meta.at("input_dim").get<std::size_t>();
    c.latent_dim = ck.meta.at("latent_dim").get<std::size_t>();
    c.widths = ck.meta.at("widths").get<std::vector<std::size_t>>();
    c.epochs = ck.meta.at("epochs").get<int>();
    c.learning_rate = ck.meta.at("learning_rate").get<double>();
    c.seed = ck.meta.at("seed").get<std::uint64_t>();
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::Integrity, std::string("autoencoder checkpoint metadata: ") + e.what());
  }
  CaeModel model(c);
  for (auto* p : model.params()) {
    const auto& v = ck.f32(p->name);
    if (v.size() != p->value.size()) fail(ErrorKind::Integrity, "autoencoder tensor size mismatch: " + p->name);
    p->value = v;
  }
  model.loss_history = ck.meta.value("loss_history", std::vector<double>{});
  return model;
}

}  // namespace ceunet
