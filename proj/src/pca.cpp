#include "ceunet/pca.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "ceunet/checkpoint.hpp"
#include "ceunet/error.hpp"

namespace ceunet {

namespace {
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
}

PcaModel pca_fit(std::span<const float> samples, std::size_t dim, std::size_t out_dim) {
  if (dim == 0 || samples.size() % dim != 0) {
    fail(ErrorKind::Dimension, "sample buffer is not a multiple of the feature dimension");
  }
  const std::size_t n = samples.size() / dim;
  if (n < 2) fail(ErrorKind::Dimension, "PCA needs at least 2 samples");
  if (out_dim == 0 || out_dim > dim) {
    fail(ErrorKind::Dimension, "cannot keep " + std::to_string(out_dim) + " components of " +
                                   std::to_string(dim) + " features");
  }

  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) x(i, j) = samples[i * dim + j];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) fail(ErrorKind::Data, "covariance eigendecomposition failed");

  PcaModel model;
  model.input_dim = dim;
  model.output_dim = out_dim;
  model.mean.assign(mean.data(), mean.data() + dim);
  model.total_variance = cov.trace();
  model.components.resize(out_dim * dim);
  model.explained_variance.resize(out_dim);
  for (std::size_t i = 0; i < out_dim; ++i) {
    // Eigen sorts ascending.
    const auto col = static_cast<Eigen::Index>(dim - 1 - i);
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (std::size_t j = 0; j < dim; ++j) model.components[i * dim + j] = v(static_cast<Eigen::Index>(j));
    model.explained_variance[i] = std::max(eig.eigenvalues()(col), 0.0);
  }
  return model;
}

std::vector<float> pca_transform(const PcaModel& model, std::span<const float> samples) {
  const std::size_t b = model.input_dim;
  const std::size_t d = model.output_dim;
  if (b == 0 || samples.size() % b != 0) {
    fail(ErrorKind::Dimension, "pixel dimension does not match the PCA input dimension " + std::to_string(b));
  }
  const std::size_t n = samples.size() / b;
  std::vector<float> out(n * d);
  std::vector<double> centred(b);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b; ++j) centred[j] = samples[i * b + j] - model.mean[j];
    for (std::size_t k = 0; k < d; ++k) {
      const double* comp = model.components.data() + k * b;
      double s = 0.0;
      for (std::size_t j = 0; j < b; ++j) s += comp[j] * centred[j];
      out[i * d + k] = static_cast<float>(s);
    }
  }
  return out;
}

std::vector<float> pca_inverse_transform(const PcaModel& model, std::span<const float> reduced) {
  const std::size_t b = model.input_dim;
  const std::size_t d = model.output_dim;
  if (d == 0 || reduced.size() % d != 0) {
    fail(ErrorKind::Dimension, "reduced dimension does not match the PCA output dimension");
  }
  const std::size_t n = reduced.size() / d;
  std::vector<float> out(n * b);
  std::vector<double> acc(b);
  for (std::size_t i = 0; i < n; ++i) {
    acc.assign(model.mean.begin(), model.mean.end());
    for (std::size_t k = 0; k < d; ++k) {
      const double z = reduced[i * d + k];
      const double* comp = model.components.data() + k * b;
      for (std::size_t j = 0; j < b; ++j) acc[j] += z * comp[j];
    }
    for (std::size_t j = 0; j < b; ++j) out[i * b + j] = static_cast<float>(acc[j]);
  }
  return out;
}

void save_pca(const std::filesystem::path& path, const PcaModel& model) {
  Checkpoint c;
  c.kind = "pca";
  c.meta = {{"input_dim", model.input_dim}, {"output_dim", model.output_dim},
            {"total_variance", model.total_variance}};
  c.add("mean", model.mean);
  c.add("components", model.components);
  c.add("explained_variance", model.explained_variance);
  save_checkpoint(path, c);
}

PcaModel load_pca(const std::filesystem::path& path) {
  const Checkpoint c = load_checkpoint(path, "pca");
  PcaModel m;
  m.input_dim = c.meta.at("input_dim").get<std::size_t>();
  m.output_dim = c.meta.at("output_dim").get<std::size_t>();
  m.total_variance = c.meta.at("total_variance").get<double>();
  m.mean = c.f64("mean");
  m.components = c.f64("components");
  m.explained_variance = c.f64("explained_variance");
  if (m.mean.size() != m.input_dim || m.components.size() != m.input_dim * m.output_dim) {
    fail(ErrorKind::Integrity, path.string() + ": PCA tensor sizes disagree with header");
  }
  return m;
}

}  // namespace ceunet
