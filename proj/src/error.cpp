#include "ceunet/error.hpp"

namespace ceunet {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Load: return "load";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Data: return "data";
    case ErrorKind::EmptyDataset: return "empty-dataset";
    case ErrorKind::Split: return "split";
    case ErrorKind::Boundary: return "boundary";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Label: return "label";
    case ErrorKind::Spec: return "spec";
    case ErrorKind::Metric: return "metric";
    case ErrorKind::Cluster: return "cluster";
    case ErrorKind::SmallCluster: return "small-cluster";
    case ErrorKind::Weight: return "weight";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

namespace {
std::string describe(const std::vector<std::size_t>& sizes, std::size_t min_size) {
  std::string s = "cluster below minimum size " + std::to_string(min_size) + "; sizes [";
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(sizes[i]);
  }
  return s + "]";
}
}  // namespace

SmallClusterError::SmallClusterError(std::vector<std::size_t> sizes, std::size_t min_size)
    : Error(ErrorKind::SmallCluster, describe(sizes, min_size)),
      sizes_(std::move(sizes)),
      min_size_(min_size) {}

}  // namespace ceunet
