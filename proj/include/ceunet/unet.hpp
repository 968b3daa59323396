#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ceunet/hsi_data.hpp"
#include "ceunet/nn.hpp"
#include "ceunet/patching.hpp"

namespace ceunet {

// Flat feature rows for training or prediction: N samples of n x n x dim.
// The class of a patch is the class of its centre cell.
struct SampleView {
  std::size_t n = 1;
  std::size_t dim = 0;
  int num_classes = 0;
  std::span<const float> features;
  std::span<const int> labels;

  std::size_t size() const { return features.size() / (n * n * dim); }
  std::size_t stride() const { return n * n * dim; }

  static SampleView of(const LabeledPixelSet& ds);
  static SampleView of(const PatchDataset& ds);
};

struct UNetSpec {
  std::size_t patch = 1;  // input spatial size n x n
  std::size_t in_features = 30;
  int num_classes = 9;
  double dropout = 0.2;
  double leaky_slope = 0.01;
  std::array<std::size_t, 3> widths{64, 128, 256};
};

struct TrainConfig {
  int epochs = 150;
  double learning_rate = 1e-4;
  double loss_weight = 1.0;
  // 0 picks 256 for single pixels and 32 for patches.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  // Called after each epoch with (epoch index, mean loss, seconds).
  std::function<void(int, double, double)> on_epoch;
};

std::size_t default_batch_size(std::size_t patch);

struct LayerSummary {
  std::string name;
  std::string type;
  std::string output_shape;
  std::size_t parameters = 0;  // including non-trainable running statistics
};

struct Prediction {
  std::vector<int> labels;           // 1..m
  std::vector<float> probabilities;  // N x m
  int num_classes = 0;
};

// Contracting path: three conv -> batch-norm -> leaky-ReLU -> dropout blocks
// (64, 128, 256 channels). Expansive path: two transposed-conv blocks whose
// outputs are concatenated with contracting blocks 2 and 1, then a biased
// transposed conv to num_classes logits and a per-cell softmax.
template <class T>
class UNet {
 public:
  UNet(const UNetSpec& spec, std::uint64_t init_seed);

  UNet(UNet&&) noexcept = default;
  UNet& operator=(UNet&&) noexcept = default;

  const UNetSpec& spec() const { return spec_; }
  std::uint64_t init_seed() const { return init_seed_; }

  nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training, Rng& rng);
  nn::Tensor<T> infer(const nn::Tensor<T>& x) const;
  void backward(const nn::Tensor<T>& dlogits);

  std::vector<nn::Param<T>*> params();
  std::vector<std::pair<std::string, std::vector<T>*>> buffers();
  std::size_t trainable_parameter_count();
  std::vector<LayerSummary> summary();

  // Zeroes gradients, runs a training-mode pass on the batch and back-propagates
  // loss_weight * mean centre-cell cross-entropy. Returns that loss.
  double compute_gradients(const nn::Tensor<T>& x, std::span<const int> labels, double loss_weight, Rng& rng);

  // Centre-cell class probabilities for a batch (inference mode).
  std::vector<T> probabilities(const nn::Tensor<T>& x) const;

  std::vector<double> loss_history;
  std::vector<double> epoch_seconds;

 private:
  struct Block {
    std::unique_ptr<nn::Conv2d<T>> conv;
    std::unique_ptr<nn::BatchNorm<T>> norm;
    std::unique_ptr<nn::LeakyRelu<T>> act;
    std::unique_ptr<nn::Dropout<T>> drop;

    nn::Tensor<T> forward(const nn::Tensor<T>& x, bool training, Rng& rng);
    nn::Tensor<T> infer(const nn::Tensor<T>& x) const;
    nn::Tensor<T> backward(const nn::Tensor<T>& dy, bool need_input_grad);
  };

  Block make_block(const std::string& name, std::size_t in, std::size_t out, bool transposed);

  UNetSpec spec_;
  std::uint64_t init_seed_ = 0;
  std::array<Block, 5> blocks_;  // conv1..conv3, deconv3, deconv2
  std::unique_ptr<nn::Conv2d<T>> head_;  // deconv1
};

UNet<float> build_unet(const UNetSpec& spec, std::uint64_t seed);

// Mini-batch Adam on loss_weight * cross-entropy. Appends to loss_history.
void train_unet(UNet<float>& net, const SampleView& data, const TrainConfig& cfg);

Prediction predict(const UNet<float>& net, const SampleView& data);

// Index of the largest probability (ties -> smallest index), as a 1-based class.
int argmax_class(std::span<const float> probs);

double overall_accuracy(std::span<const int> predicted, std::span<const int> truth);

void save_unet(const std::filesystem::path& path, UNet<float>& net, const std::string& extra_meta_json = "{}");
UNet<float> load_unet(const std::filesystem::path& path);

}  // namespace ceunet
