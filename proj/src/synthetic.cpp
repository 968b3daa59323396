#include "ceunet/synthetic.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "ceunet/error.hpp"
#include "ceunet/rng.hpp"

namespace ceunet {

Dataset make_synthetic(const SyntheticSpec& s) {
  if (s.height == 0 || s.width == 0 || s.bands == 0) fail(ErrorKind::Config, "synthetic scene needs a non-empty shape");
  if (s.classes < 1 || s.regions < 1) fail(ErrorKind::Config, "synthetic scene needs classes and regions");
  Rng rng(derive_seed(s.seed, Stream::Trial, 0xC0FFEE));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<double>> spectra(static_cast<std::size_t>(s.classes), std::vector<double>(s.bands));
  for (auto& sp : spectra) {
    const double a = unit(rng), b = unit(rng) * 3.0 + 0.5, phase = unit(rng) * 6.283185307179586;
    for (std::size_t k = 0; k < s.bands; ++k) {
      const double x = static_cast<double>(k) / static_cast<double>(s.bands);
      sp[k] = 0.5 + 0.3 * std::sin(b * 6.283185307179586 * x + phase) + 0.2 * (a - 0.5);
    }
  }

  struct Seed {
    double r, c;
    int label;
  };
  std::vector<Seed> seeds;
  for (std::size_t i = 0; i < s.regions; ++i) {
    const bool bg = unit(rng) < s.background;
    const int label = bg ? 0 : 1 + static_cast<int>(i % static_cast<std::size_t>(s.classes));
    seeds.push_back({unit(rng) * static_cast<double>(s.height), unit(rng) * static_cast<double>(s.width), label});
  }

  Dataset d;
  d.cube = HsiCube(s.name, s.height, s.width, s.bands);
  d.truth = GroundTruth(s.height, s.width, s.classes);
  for (std::size_t r = 0; r < s.height; ++r) {
    for (std::size_t c = 0; c < s.width; ++c) {
      double best = std::numeric_limits<double>::infinity();
      int label = 0;
      for (const auto& sd : seeds) {
        const double dr = sd.r - static_cast<double>(r), dc = sd.c - static_cast<double>(c);
        const double dist = dr * dr + dc * dc;
        if (dist < best) {
          best = dist;
          label = sd.label;
        }
      }
      d.truth.labels[r * s.width + c] = static_cast<std::uint16_t>(label);
      const auto& base = spectra[static_cast<std::size_t>(label == 0 ? 0 : label - 1)];
      auto px = d.cube.pixel(r, c);
      const double level = label == 0 ? 0.3 : 1.0;
      for (std::size_t k = 0; k < s.bands; ++k) {
        px[k] = static_cast<float>(level * base[k] + s.noise * gauss(rng));
      }
    }
  }
  return d;
}

}  // namespace ceunet
