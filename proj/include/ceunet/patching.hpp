#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "ceunet/hsi_data.hpp"

namespace ceunet {

enum class PatchMode { Exclusive, Majority, Cpc };
enum class PadPolicy { Zero, None };

PatchMode parse_patch_mode(std::string_view s);
std::string_view to_string(PatchMode m);

struct PatchConfig {
  std::size_t n = 10;
  PatchMode mode = PatchMode::Cpc;
  PadPolicy pad = PadPolicy::Zero;
};

// N patches of n x n x dim, row-major cells, features innermost.
struct PatchDataset {
  std::size_t n = 0;
  std::size_t dim = 0;
  int num_classes = 0;
  std::vector<float> patches;
  std::vector<int> labels;
  std::vector<PixelCoord> coords;

  std::size_t size() const { return labels.size(); }
  std::size_t patch_size() const { return n * n * dim; }
  std::span<const float> patch(std::size_t i) const {
    return {patches.data() + i * patch_size(), patch_size()};
  }
  PatchDataset subset(std::span<const std::size_t> indices) const;
};

// One patch per labeled pixel; the pixel sits at cell (n/2, n/2).
PatchDataset extract_cpc(const HsiCube& cube, const GroundTruth& truth, const PatchConfig& cfg);

// Patches centred on arbitrary coordinates with the given labels.
PatchDataset extract_cpc_at(const HsiCube& cube, std::span<const PixelCoord> coords,
                            std::span<const int> labels, int num_classes, const PatchConfig& cfg);

// Non-overlapping n x n tiling; ragged margins are dropped. Surviving blocks
// become one pixel holding the block-mean spectrum.
Dataset downsample_exclusive(const HsiCube& cube, const GroundTruth& truth, const PatchConfig& cfg);
Dataset downsample_majority(const HsiCube& cube, const GroundTruth& truth, const PatchConfig& cfg);

void save_patches(const std::filesystem::path& dir, const PatchDataset& ds);
PatchDataset load_patches(const std::filesystem::path& dir);

}  // namespace ceunet
