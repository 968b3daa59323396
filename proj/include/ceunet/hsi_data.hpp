#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ceunet {

// Reflectance cube, band-interleaved-by-pixel, row-major: data[(r*W + c)*B + b].
struct HsiCube {
  std::string name;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::vector<float> data;

  HsiCube() = default;
  HsiCube(std::string name, std::size_t height, std::size_t width, std::size_t bands);

  std::size_t pixels() const { return height * width; }
  std::span<const float> pixel(std::size_t row, std::size_t col) const {
    return {data.data() + (row * width + col) * bands, bands};
  }
  std::span<float> pixel(std::size_t row, std::size_t col) {
    return {data.data() + (row * width + col) * bands, bands};
  }
};

// 0 is background; classes are 1..num_classes.
struct GroundTruth {
  std::size_t height = 0;
  std::size_t width = 0;
  int num_classes = 0;
  std::vector<std::uint16_t> labels;

  GroundTruth() = default;
  GroundTruth(std::size_t height, std::size_t width, int num_classes);

  std::uint16_t at(std::size_t row, std::size_t col) const { return labels[row * width + col]; }
  std::size_t labeled_count() const;
};

struct PixelCoord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

// Flat N x dim samples with labels in 1..m and their grid origin.
struct LabeledPixelSet {
  std::size_t dim = 0;
  int num_classes = 0;
  std::vector<float> samples;
  std::vector<int> labels;
  std::vector<PixelCoord> coords;

  std::size_t size() const { return labels.size(); }
  std::span<const float> sample(std::size_t i) const { return {samples.data() + i * dim, dim}; }
  LabeledPixelSet subset(std::span<const std::size_t> indices) const;
};

struct Dataset {
  HsiCube cube;
  GroundTruth truth;
};

struct SplitSpec {
  double test_fraction = 0.25;
  int trials = 5;
  std::uint64_t seed = 0;
};

// Index sets into a LabeledPixelSet, each sorted ascending.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct DatasetSummary {
  std::string name;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  int classes = 0;
  std::size_t pixels = 0;
  std::size_t labeled = 0;
  double labeled_percent = 0.0;
  std::vector<std::size_t> class_counts;  // index c-1 for class c
};

// Reads the directory format: `header` (JSON), `cube.bin`, `labels.bin`.
// Bands are min-max scaled to [0,1] unless normalize is false.
Dataset load_dataset(const std::filesystem::path& dir, bool normalize = true);
void save_dataset(const std::filesystem::path& dir, const HsiCube& cube, const GroundTruth& truth);

// Per-band min-max scaling to [0,1]; constant bands map to 0.
void normalize_bands(HsiCube& cube);

void validate(const HsiCube& cube, const GroundTruth& truth);

LabeledPixelSet remove_background(const HsiCube& cube, const GroundTruth& truth);

// round(test_fraction * n), halves rounded up.
std::size_t test_count(std::size_t n, double test_fraction);

// Pure function of (spec.seed, trial_index).
SplitIndices split_indices(std::size_t n, const SplitSpec& spec, int trial_index);

std::pair<LabeledPixelSet, LabeledPixelSet> random_split(const LabeledPixelSet& ds,
                                                         const SplitSpec& spec,
                                                         int trial_index);

DatasetSummary summarize(const HsiCube& cube, const GroundTruth& truth);
std::string format_summary(const DatasetSummary& s);

}  // namespace ceunet
