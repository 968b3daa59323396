#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ceunet/hsi_data.hpp"
#include "ceunet/rng.hpp"

namespace testing {

inline std::vector<float> uniform(ceunet::Rng& rng, std::size_t n, float lo = 0.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline std::vector<double> uniform_d(ceunet::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Uniform spectra in [-1, 1]; each cell is background with probability bg.
inline ceunet::Dataset random_scene(ceunet::Rng& rng, std::size_t h, std::size_t w, std::size_t b, int m,
                                    double bg) {
  ceunet::Dataset d;
  d.cube = ceunet::HsiCube("r", h, w, b);
  d.cube.data = uniform(rng, h * w * b, -1.0f, 1.0f);
  d.truth = ceunet::GroundTruth(h, w, m);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> lab(1, m);
  for (auto& v : d.truth.labels) v = static_cast<std::uint16_t>(u(rng) < bg ? 0 : lab(rng));
  return d;
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ceunet-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
