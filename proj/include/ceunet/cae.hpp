#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "ceunet/nn.hpp"

namespace ceunet {

enum class CaeVariant { Cae2d, Cae3d };

CaeVariant parse_cae_variant(std::string_view s);
std::string_view to_string(CaeVariant v);

// Pixel-wise autoencoders.
// cae2d: the spectrum is the channel axis of a 1x1 image; three 3x3 conv blocks
//        (widths[0], widths[1], latent) and a mirrored transposed-conv decoder.
// cae3d: the spectrum is a 1 x B single-channel signal; three 1x3 conv blocks
//        (widths) each followed by 1x2 max pooling, then a valid 1xL conv to
//        the latent vector. The decoder mirrors it with upsampling.
struct CaeConfig {
  CaeVariant variant = CaeVariant::Cae2d;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;  // 0: 32 for cae2d, 30 for cae3d
  int epochs = 0;              // 0: 100 for cae2d, 150 for cae3d
  double learning_rate = 1e-4;
  std::size_t batch_size = 256;
  std::vector<std::size_t> widths;  // empty: {128, 64} for cae2d, {8, 16, 32} for cae3d
  std::uint64_t seed = 0;
  std::function<void(int, double)> on_epoch;

  CaeConfig resolved() const;
};

class CaeModel {
 public:
  explicit CaeModel(const CaeConfig& cfg);

  const CaeConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return cfg_.input_dim; }
  std::size_t latent_dim() const { return cfg_.latent_dim; }

  // N x input_dim -> N x latent_dim.
  std::vector<float> encode(std::span<const float> samples) const;
  std::vector<float> reconstruct(std::span<const float> samples) const;
  double reconstruction_mse(std::span<const float> samples) const;

  // One optimisation step's forward/backward; returns the batch MSE.
  double compute_gradients(std::span<const float> batch, Rng& rng);
  std::vector<nn::Param<float>*> params();

  std::vector<double> loss_history;

 private:
  nn::Tensor<float> as_input(std::span<const float> samples) const;

  CaeConfig cfg_;
  nn::Sequential<float> encoder_;
  nn::Sequential<float> decoder_;
};

CaeModel cae_fit(std::span<const float> samples, const CaeConfig& cfg);

void save_cae(const std::filesystem::path& path, CaeModel& model);
CaeModel load_cae(const std::filesystem::path& path);

}  // namespace ceunet
