#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ceunet {

enum class ErrorKind {
  Load,
  Integrity,
  Data,
  EmptyDataset,
  Split,
  Boundary,
  Dimension,
  Divergence,
  Label,
  Spec,
  Metric,
  Cluster,
  SmallCluster,
  Weight,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by clustering when a cluster falls under the configured minimum.
class SmallClusterError : public Error {
 public:
  SmallClusterError(std::vector<std::size_t> sizes, std::size_t min_size);

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  std::size_t min_size() const noexcept { return min_size_; }

 private:
  std::vector<std::size_t> sizes_;
  std::size_t min_size_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace ceunet
