#include "ceunet/patching.hpp"

#include <algorithm>
#include <string>

#include "ceunet/error.hpp"
#include "ceunet/io.hpp"

namespace ceunet {

PatchMode parse_patch_mode(std::string_view s) {
  if (s == "cpc") return PatchMode::Cpc;
  if (s == "exclusive") return PatchMode::Exclusive;
  if (s == "majority") return PatchMode::Majority;
  fail(ErrorKind::Config, "unknown patch mode: " + std::string(s));
}

std::string_view to_string(PatchMode m) {
  switch (m) {
    case PatchMode::Cpc: return "cpc";
    case PatchMode::Exclusive: return "exclusive";
    case PatchMode::Majority: return "majority";
  }
  return "?";
}

PatchDataset PatchDataset::subset(std::span<const std::size_t> indices) const {
  PatchDataset out;
  out.n = n;
  out.dim = dim;
  out.num_classes = num_classes;
  out.patches.reserve(indices.size() * patch_size());
  for (std::size_t i : indices) {
    const auto p = patch(i);
    out.patches.insert(out.patches.end(), p.begin(), p.end());
    out.labels.push_back(labels[i]);
    out.coords.push_back(coords[i]);
  }
  return out;
}

PatchDataset extract_cpc_at(const HsiCube& cube, std::span<const PixelCoord> coords,
                            std::span<const int> labels, int num_classes, const PatchConfig& cfg) {
  if (cfg.n == 0) fail(ErrorKind::Config, "patch size must be >= 1");
  if (coords.size() != labels.size()) fail(ErrorKind::Dimension, "coords/labels length mismatch");
  const std::size_t n = cfg.n;
  const std::size_t d = cube.bands;
  const auto half = static_cast<std::ptrdiff_t>(n / 2);
  const auto h = static_cast<std::ptrdiff_t>(cube.height);
  const auto w = static_cast<std::ptrdiff_t>(cube.width);

  PatchDataset out;
  out.n = n;
  out.dim = d;
  out.num_classes = num_classes;
  out.patches.assign(coords.size() * n * n * d, 0.0f);
  out.labels.assign(labels.begin(), labels.end());
  out.coords.assign(coords.begin(), coords.end());

  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto r0 = static_cast<std::ptrdiff_t>(coords[i].row) - half;
    const auto c0 = static_cast<std::ptrdiff_t>(coords[i].col) - half;
    const auto span = static_cast<std::ptrdiff_t>(n);
    if (cfg.pad == PadPolicy::None && (r0 < 0 || c0 < 0 || r0 + span > h || c0 + span > w)) {
      fail(ErrorKind::Boundary, "pixel (" + std::to_string(coords[i].row) + "," +
                                    std::to_string(coords[i].col) +
                                    ") is too close to the border for an unpadded " +
                                    std::to_string(n) + "x" + std::to_string(n) + " patch");
    }
    float* dst = out.patches.data() + i * n * n * d;
    // Copy contiguous row segments; cells outside the grid stay zero.
    const std::ptrdiff_t c_lo = std::max<std::ptrdiff_t>(c0, 0);
    const std::ptrdiff_t c_hi = std::min<std::ptrdiff_t>(c0 + span, w);
    if (c_lo >= c_hi) continue;
    for (std::ptrdiff_t dr = 0; dr < span; ++dr) {
      const std::ptrdiff_t r = r0 + dr;
      if (r < 0 || r >= h) continue;
      const float* src = cube.data.data() + (static_cast<std::size_t>(r * w + c_lo)) * d;
      float* row = dst + (static_cast<std::size_t>(dr) * n + static_cast<std::size_t>(c_lo - c0)) * d;
      std::copy_n(src, static_cast<std::size_t>(c_hi - c_lo) * d, row);
    }
  }
  return out;
}

PatchDataset extract_cpc(const HsiCube& cube, const GroundTruth& truth, const PatchConfig& cfg) {
  if (cfg.mode != PatchMode::Cpc) fail(ErrorKind::Config, "extract_cpc requires mode cpc");
  const LabeledPixelSet px = remove_background(cube, truth);
  return extract_cpc_at(cube, px.coords, px.labels, truth.num_classes, cfg);
}

namespace {

template <class LabelRule>
Dataset downsample(const HsiCube& cube, const GroundTruth& truth, const PatchConfig& cfg,
                   LabelRule rule) {
  validate(cube, truth);
  if (cfg.n == 0) fail(ErrorKind::Config, "patch size must be >= 1");
  const std::size_t n = cfg.n;
  const std::size_t bh = cube.height / n;
  const std::size_t bw = cube.width / n;
  const std::size_t d = cube.bands;

  Dataset out;
  out.cube = HsiCube(cube.name, std::max<std::size_t>(bh, 1), std::max<std::size_t>(bw, 1), d);
  out.truth = GroundTruth(out.cube.height, out.cube.width, truth.num_classes);
  if (bh == 0 || bw == 0) {
    fail(ErrorKind::EmptyDataset, "grid smaller than one " + std::to_string(n) + "x" +
                                      std::to_string(n) + " block");
  }

  std::vector<std::uint16_t> block(n * n);
  std::size_t survivors = 0;
  const double inv = 1.0 / static_cast<double>(n * n);
  std::vector<double> mean(d);
  for (std::size_t br = 0; br < bh; ++br) {
    for (std::size_t bc = 0; bc < bw; ++bc) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) block[i * n + j] = truth.at(br * n + i, bc * n + j);
      }
      const std::uint16_t label = rule(block, truth.num_classes);
      out.truth.labels[br * bw + bc] = label;
      std::fill(mean.begin(), mean.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const auto px = cube.pixel(br * n + i, bc * n + j);
          for (std::size_t k = 0; k < d; ++k) mean[k] += px[k];
        }
      }
      auto dst = out.cube.pixel(br, bc);
      for (std::size_t k = 0; k < d; ++k) dst[k] = static_cast<float>(mean[k] * inv);
      if (label != 0) ++survivors;
    }
  }
  if (survivors == 0) fail(ErrorKind::EmptyDataset, "no block survived downsampling");
  return out;
}

}  // namespace

Dataset downsample_exclusive(const HsiCube& cube, const GroundTruth& truth, const PatchConfig& cfg) {
  return downsample(cube, truth, cfg, [](const std::vector<std::uint16_t>& b, int) -> std::uint16_t {
    const std::uint16_t first = b.front();
    if (first == 0) return 0;
    return std::all_of(b.begin(), b.end(), [&](std::uint16_t v) { return v == first; }) ? first : 0;
  });
}

Dataset downsample_majority(const HsiCube& cube, const GroundTruth& truth, const PatchConfig& cfg) {
  return downsample(cube, truth, cfg, [](const std::vector<std::uint16_t>& b, int m) -> std::uint16_t {
    std::vector<std::size_t> counts(static_cast<std::size_t>(m) + 1, 0);
    for (std::uint16_t v : b) ++counts[v];
    std::uint16_t best = 0;
    std::size_t best_count = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
      if (counts[c] > best_count) {
        best = static_cast<std::uint16_t>(c);
        best_count = counts[c];
      }
    }
    return best;
  });
}

void save_patches(const std::filesystem::path& dir, const PatchDataset& ds) {
  std::filesystem::create_directories(dir);
  io::Json header = {
      {"format", "ceunet-patches"}, {"version", 1},       {"count", ds.size()},
      {"n", ds.n},                  {"features", ds.dim}, {"classes", ds.num_classes},
      {"dtype", "float32"},         {"label_dtype", "uint16"}, {"coord_dtype", "uint32"},
      {"endianness", "little"},
  };
  io::write_json(dir / "header", header);
  io::write_le<float>(dir / "patches.bin", ds.patches);
  std::vector<std::uint16_t> labels(ds.labels.begin(), ds.labels.end());
  io::write_le<std::uint16_t>(dir / "labels.bin", labels);
  std::vector<std::uint32_t> coords;
  coords.reserve(2 * ds.size());
  for (const auto& c : ds.coords) {
    coords.push_back(c.row);
    coords.push_back(c.col);
  }
  io::write_le<std::uint32_t>(dir / "coords.bin", coords);
}

PatchDataset load_patches(const std::filesystem::path& dir) {
  const io::Json header = io::read_json(dir / "header");
  PatchDataset ds;
  std::size_t count = 0;
  try {
    if (header.at("format").get<std::string>() != "ceunet-patches") {
      fail(ErrorKind::Load, "not a patch dataset: " + dir.string());
    }
    count = header.at("count").get<std::size_t>();
    ds.n = header.at("n").get<std::size_t>();
    ds.dim = header.at("features").get<std::size_t>();
    ds.num_classes = header.at("classes").get<int>();
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::Load, e.what());
  }
  ds.patches = io::read_le<float>(dir / "patches.bin", count * ds.n * ds.n * ds.dim);
  const auto labels = io::read_le<std::uint16_t>(dir / "labels.bin", count);
  ds.labels.assign(labels.begin(), labels.end());
  const auto coords = io::read_le<std::uint32_t>(dir / "coords.bin", 2 * count);
  for (std::size_t i = 0; i < count; ++i) ds.coords.push_back({coords[2 * i], coords[2 * i + 1]});
  return ds;
}

}  // namespace ceunet
