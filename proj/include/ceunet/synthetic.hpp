#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "ceunet/hsi_data.hpp"

namespace ceunet {

// A labelled scene of Voronoi regions; every class owns a smooth random
// spectrum and pixels add Gaussian noise. A share of cells stays background.
struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t bands = 48;
  int classes = 4;
  std::size_t regions = 12;
  double noise = 0.05;
  double background = 0.2;
  std::uint64_t seed = 0;
};

Dataset make_synthetic(const SyntheticSpec& spec);

}  // namespace ceunet
