#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace ceunet {

struct PcaModel {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<double> mean;                // input_dim
  std::vector<double> components;          // output_dim x input_dim, orthonormal rows
  std::vector<double> explained_variance;  // output_dim, non-increasing
  double total_variance = 0.0;

  std::span<const double> component(std::size_t i) const {
    return {components.data() + i * input_dim, input_dim};
  }
};

// Principal directions of the centred rows of `samples` (n x dim). Each
// component is sign-normalised so its largest-magnitude entry is positive.
PcaModel pca_fit(std::span<const float> samples, std::size_t dim, std::size_t out_dim);

// (n x input_dim) -> (n x output_dim): components * (x - mean)
std::vector<float> pca_transform(const PcaModel& model, std::span<const float> samples);
// (n x output_dim) -> (n x input_dim)
std::vector<float> pca_inverse_transform(const PcaModel& model, std::span<const float> reduced);

void save_pca(const std::filesystem::path& path, const PcaModel& model);
PcaModel load_pca(const std::filesystem::path& path);

}  // namespace ceunet
