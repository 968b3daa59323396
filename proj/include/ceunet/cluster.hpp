#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ceunet {

enum class ClusterMethod { KMeans, Gmm };

ClusterMethod parse_cluster_method(std::string_view s);
std::string_view to_string(ClusterMethod m);

struct ClusterOptions {
  int restarts = 10;          // k-means++ restarts; the lowest inertia wins
  int max_iterations = 300;   // Lloyd iterations per restart
  int em_iterations = 100;
  double em_tolerance = 1e-6; // relative change in mean log-likelihood
  double covariance_reg = 1e-6;
  std::size_t min_cluster_size = 0;
};

struct ClusterModel {
  ClusterMethod method = ClusterMethod::KMeans;
  std::size_t k = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::vector<double> centroids;  // k x dim (GMM: component means)

  // GMM only.
  std::vector<double> covariances;  // k x dim x dim
  std::vector<double> weights;      // k mixing weights
  std::vector<double> cholesky;     // k x dim x dim lower factors of the covariances
  std::vector<double> log_det;      // k

  // Diagnostics of the winning fit.
  std::vector<double> inertia_history;         // after every assignment step
  std::vector<double> log_likelihood_history;  // mean per-sample, every E-step
  std::vector<std::size_t> train_sizes;

  std::span<const double> centroid(std::size_t j) const { return {centroids.data() + j * dim, dim}; }
};

// Spectra only; labels never reach the clusterer.
ClusterModel fit_cluster(std::span<const float> samples, std::size_t dim, ClusterMethod method, std::size_t k,
                         std::uint64_t seed, const ClusterOptions& opts = {});

std::vector<int> assign(const ClusterModel& model, std::span<const float> samples);

// Per-component log(weight) + log N(x | mean, cov) for one sample.
std::vector<double> gmm_log_joint(const ClusterModel& model, std::span<const double> x);

std::vector<std::size_t> cluster_sizes(std::span<const int> ids, std::size_t k);

double kmeans_inertia(const ClusterModel& model, std::span<const float> samples);
double gmm_mean_log_likelihood(const ClusterModel& model, std::span<const float> samples);

}  // namespace ceunet
