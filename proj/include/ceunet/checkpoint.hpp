#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "ceunet/io.hpp"

namespace ceunet {

// Versioned model file: a magic line, one line of JSON metadata naming every
// tensor, then the tensors back to back as little-endian raw values.
struct Checkpoint {
  static constexpr int kVersion = 1;

  struct Tensor {
    std::string name;
    std::variant<std::vector<float>, std::vector<double>> values;
  };

  std::string kind;
  io::Json meta = io::Json::object();
  std::vector<Tensor> tensors;

  void add(std::string name, std::vector<float> v) { tensors.push_back({std::move(name), std::move(v)}); }
  void add(std::string name, std::vector<double> v) { tensors.push_back({std::move(name), std::move(v)}); }

  const std::vector<float>& f32(const std::string& name) const;
  const std::vector<double>& f64(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws when the magic line, version or expected kind do not match.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind);

}  // namespace ceunet
