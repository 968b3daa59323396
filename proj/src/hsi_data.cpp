#include "ceunet/hsi_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ceunet/error.hpp"
#include "ceunet/io.hpp"
#include "ceunet/rng.hpp"

namespace ceunet {

HsiCube::HsiCube(std::string n, std::size_t h, std::size_t w, std::size_t b)
    : name(std::move(n)), height(h), width(w), bands(b), data(h * w * b, 0.0f) {}

GroundTruth::GroundTruth(std::size_t h, std::size_t w, int m)
    : height(h), width(w), num_classes(m), labels(h * w, 0) {}

std::size_t GroundTruth::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](std::uint16_t v) { return v != 0; }));
}

LabeledPixelSet LabeledPixelSet::subset(std::span<const std::size_t> indices) const {
  LabeledPixelSet out;
  out.dim = dim;
  out.num_classes = num_classes;
  out.samples.reserve(indices.size() * dim);
  out.labels.reserve(indices.size());
  out.coords.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto s = sample(i);
    out.samples.insert(out.samples.end(), s.begin(), s.end());
    out.labels.push_back(labels[i]);
    out.coords.push_back(coords[i]);
  }
  return out;
}

void validate(const HsiCube& cube, const GroundTruth& truth) {
  if (cube.height == 0 || cube.width == 0 || cube.bands == 0) {
    fail(ErrorKind::Integrity, "cube dimensions must be positive");
  }
  if (cube.data.size() != cube.height * cube.width * cube.bands) {
    fail(ErrorKind::Integrity, "cube data size does not match its dimensions");
  }
  if (truth.height != cube.height || truth.width != cube.width) {
    fail(ErrorKind::Integrity, "ground truth is " + std::to_string(truth.height) + "x" +
                                   std::to_string(truth.width) + " but cube is " +
                                   std::to_string(cube.height) + "x" +
                                   std::to_string(cube.width));
  }
  if (truth.labels.size() != truth.height * truth.width) {
    fail(ErrorKind::Integrity, "label grid size does not match its dimensions");
  }
  for (std::uint16_t v : truth.labels) {
    if (v > truth.num_classes) {
      fail(ErrorKind::Integrity, "label " + std::to_string(v) + " exceeds class count " +
                                     std::to_string(truth.num_classes));
    }
  }
  for (float v : cube.data) {
    if (!std::isfinite(v)) fail(ErrorKind::Data, "cube contains non-finite values");
  }
}

void normalize_bands(HsiCube& cube) {
  const std::size_t b = cube.bands;
  std::vector<float> lo(b, std::numeric_limits<float>::infinity());
  std::vector<float> hi(b, -std::numeric_limits<float>::infinity());
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    const float* px = cube.data.data() + p * b;
    for (std::size_t k = 0; k < b; ++k) {
      lo[k] = std::min(lo[k], px[k]);
      hi[k] = std::max(hi[k], px[k]);
    }
  }
  for (std::size_t p = 0; p < cube.pixels(); ++p) {
    float* px = cube.data.data() + p * b;
    for (std::size_t k = 0; k < b; ++k) {
      const float range = hi[k] - lo[k];
      px[k] = range > 0.0f ? (px[k] - lo[k]) / range : 0.0f;
    }
  }
}

Dataset load_dataset(const std::filesystem::path& dir, bool normalize) {
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorKind::Load, "dataset directory not found: " + dir.string());
  }
  const io::Json header = io::read_json(dir / "header");
  Dataset ds;
  try {
    const auto dtype = header.value("dtype", std::string("float32"));
    const auto endian = header.value("endianness", std::string("little"));
    if (dtype != "float32" || endian != "little") {
      fail(ErrorKind::Load, "unsupported cube encoding " + dtype + "/" + endian);
    }
    ds.cube = HsiCube(header.value("name", dir.filename().string()),
                      header.at("height").get<std::size_t>(), header.at("width").get<std::size_t>(),
                      header.at("bands").get<std::size_t>());
    ds.truth = GroundTruth(ds.cube.height, ds.cube.width, header.at("classes").get<int>());
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::Load, (dir / "header").string() + ": " + e.what());
  }
  if (ds.cube.height == 0 || ds.cube.width == 0 || ds.cube.bands == 0) {
    fail(ErrorKind::Integrity, "header declares an empty cube");
  }
  ds.cube.data = io::read_le<float>(dir / "cube.bin", ds.cube.height * ds.cube.width * ds.cube.bands);
  ds.truth.labels = io::read_le<std::uint16_t>(dir / "labels.bin", ds.truth.height * ds.truth.width);
  validate(ds.cube, ds.truth);
  if (normalize) normalize_bands(ds.cube);
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const HsiCube& cube, const GroundTruth& truth) {
  validate(cube, truth);
  std::filesystem::create_directories(dir);
  io::Json header = {
      {"format", "ceunet-hsi"}, {"version", 1},          {"name", cube.name},
      {"height", cube.height},  {"width", cube.width},   {"bands", cube.bands},
      {"classes", truth.num_classes}, {"dtype", "float32"}, {"label_dtype", "uint16"},
      {"endianness", "little"}, {"interleave", "bip"},
  };
  io::write_json(dir / "header", header);
  io::write_le<float>(dir / "cube.bin", cube.data);
  io::write_le<std::uint16_t>(dir / "labels.bin", truth.labels);
}

LabeledPixelSet remove_background(const HsiCube& cube, const GroundTruth& truth) {
  validate(cube, truth);
  LabeledPixelSet out;
  out.dim = cube.bands;
  out.num_classes = truth.num_classes;
  const std::size_t n = truth.labeled_count();
  if (n == 0) fail(ErrorKind::EmptyDataset, "ground truth has no labeled pixels");
  out.samples.reserve(n * cube.bands);
  out.labels.reserve(n);
  out.coords.reserve(n);
  for (std::size_t r = 0; r < cube.height; ++r) {
    for (std::size_t c = 0; c < cube.width; ++c) {
      const std::uint16_t label = truth.at(r, c);
      if (label == 0) continue;
      const auto px = cube.pixel(r, c);
      out.samples.insert(out.samples.end(), px.begin(), px.end());
      out.labels.push_back(label);
      out.coords.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});
    }
  }
  return out;
}

std::size_t test_count(std::size_t n, double test_fraction) {
  return static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec, int trial_index) {
  if (n < 2) fail(ErrorKind::Split, "need at least 2 samples to split, got " + std::to_string(n));
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    fail(ErrorKind::Split, "test fraction must lie in (0,1)");
  }
  if (trial_index < 0 || trial_index >= spec.trials) {
    fail(ErrorKind::Split, "trial index " + std::to_string(trial_index) + " outside [0," +
                               std::to_string(spec.trials) + ")");
  }
  const std::size_t n_test = std::clamp<std::size_t>(test_count(n, spec.test_fraction), 1, n - 1);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, Stream::Split, static_cast<std::uint64_t>(trial_index)));
  // Explicit Fisher-Yates so membership does not depend on the library's shuffle.
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(perm[i], perm[j]);
  }
  SplitIndices out;
  out.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

std::pair<LabeledPixelSet, LabeledPixelSet> random_split(const LabeledPixelSet& ds,
                                                         const SplitSpec& spec,
                                                         int trial_index) {
  const SplitIndices idx = split_indices(ds.size(), spec, trial_index);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

DatasetSummary summarize(const HsiCube& cube, const GroundTruth& truth) {
  DatasetSummary s;
  s.name = cube.name;
  s.height = cube.height;
  s.width = cube.width;
  s.bands = cube.bands;
  s.classes = truth.num_classes;
  s.pixels = cube.pixels();
  s.labeled = truth.labeled_count();
  s.labeled_percent = s.pixels ? 100.0 * static_cast<double>(s.labeled) / static_cast<double>(s.pixels) : 0.0;
  s.class_counts.assign(static_cast<std::size_t>(std::max(truth.num_classes, 0)), 0);
  for (std::uint16_t v : truth.labels) {
    if (v != 0 && v <= truth.num_classes) ++s.class_counts[v - 1];
  }
  return s;
}

std::string format_summary(const DatasetSummary& s) {
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf,
                "Dataset            %s\n"
                "Grid               %zu x %zu\n"
                "Spectral bands     %zu\n"
                "Classes            %d\n"
                "Pixels             %zu\n"
                "Labeled pixels     %zu\n"
                "Labeled percent    %.2f%%\n",
                s.name.c_str(), s.height, s.width, s.bands, s.classes, s.pixels, s.labeled,
                s.labeled_percent);
  out += buf;
  for (std::size_t c = 0; c < s.class_counts.size(); ++c) {
    std::snprintf(buf, sizeof buf, "  class %-3zu        %zu\n", c + 1, s.class_counts[c]);
    out += buf;
  }
  return out;
}

}  // namespace ceunet
