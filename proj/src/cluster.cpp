#include "ceunet/cluster.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ceunet/error.hpp"
#include "ceunet/rng.hpp"
#include "ceunet/simd/kernels.hpp"

namespace ceunet {

ClusterMethod parse_cluster_method(std::string_view s) {
  if (s == "kmeans") return ClusterMethod::KMeans;
  if (s == "gmm") return ClusterMethod::Gmm;
  fail(ErrorKind::Config, "unknown cluster method: " + std::string(s));
}

std::string_view to_string(ClusterMethod m) { return m == ClusterMethod::Gmm ? "gmm" : "kmeans"; }

std::vector<std::size_t> cluster_sizes(std::span<const int> ids, std::size_t k) {
  std::vector<std::size_t> sizes(k, 0);
  for (int id : ids) ++sizes[static_cast<std::size_t>(id)];
  return sizes;
}

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<double> to_double(std::span<const float> samples) { return {samples.begin(), samples.end()}; }

struct KMeansRun {
  std::vector<double> centroids;
  std::vector<int> labels;
  std::vector<double> inertia;
};

int nearest(const double* x, const std::vector<double>& centroids, std::size_t k, std::size_t d, double* dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    const double dj = simd::squared_distance(x, centroids.data() + j * d, d);
    if (dj < best_d) {
      best_d = dj;
      best = static_cast<int>(j);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

// k-means++ seeding: first centre uniform, then proportional to squared
// distance from the nearest chosen centre.
std::vector<double> seed_plus_plus(const std::vector<double>& x, std::size_t n, std::size_t d, std::size_t k,
                                   Rng& rng) {
  std::vector<double> centres;
  centres.reserve(k * d);
  std::size_t first = static_cast<std::size_t>(rng() % n);
  centres.insert(centres.end(), x.begin() + static_cast<std::ptrdiff_t>(first * d),
                 x.begin() + static_cast<std::ptrdiff_t>((first + 1) * d));
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = simd::squared_distance(x.data() + i * d, centres.data(), d);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : dist) total += v;
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng() % n);
    } else {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    }
    const double* p = x.data() + pick * d;
    centres.insert(centres.end(), p, p + d);
    const double* cnew = centres.data() + c * d;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], simd::squared_distance(x.data() + i * d, cnew, d));
    }
  }
  return centres;
}

KMeansRun lloyd(const std::vector<double>& x, std::size_t n, std::size_t d, std::size_t k,
                std::vector<double> centroids, int max_iterations) {
  KMeansRun run;
  run.labels.assign(n, -1);
  std::vector<int> next(n);
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);
  for (int it = 0; it < max_iterations; ++it) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double dist = 0.0;
      next[i] = nearest(x.data() + i * d, centroids, k, d, &dist);
      inertia += dist;
    }
    run.inertia.push_back(inertia);
    if (next == run.labels) break;
    run.labels = next;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(run.labels[i]);
      ++counts[j];
      const double* xi = x.data() + i * d;
      double* s = sums.data() + j * d;
      for (std::size_t t = 0; t < d; ++t) s[t] += xi[t];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] == 0) continue;  // empty cluster keeps its centre
      for (std::size_t t = 0; t < d; ++t) centroids[j * d + t] = sums[j * d + t] / static_cast<double>(counts[j]);
    }
  }
  run.centroids = std::move(centroids);
  return run;
}

KMeansRun kmeans(const std::vector<double>& x, std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed,
                 const ClusterOptions& opts) {
  Rng rng(derive_seed(seed, Stream::Cluster, 0));
  KMeansRun best;
  double best_inertia = std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, opts.restarts);
  for (int r = 0; r < restarts; ++r) {
    KMeansRun run = lloyd(x, n, d, k, seed_plus_plus(x, n, d, k, rng), opts.max_iterations);
    if (run.inertia.back() < best_inertia) {
      best_inertia = run.inertia.back();
      best = std::move(run);
    }
  }
  return best;
}

// Cholesky factor of cov (+ growing ridge if needed) and its log-determinant.
void factor(const double* cov, std::size_t d, double reg, double* chol, double* log_det) {
  Eigen::Map<const Matrix> c(cov, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  double ridge = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Matrix a = c;
    if (ridge > 0.0) a.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
      Eigen::Map<Matrix> out(chol, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      out = llt.matrixL();
      *log_det = 2.0 * out.diagonal().array().log().sum();
      return;
    }
    ridge = ridge == 0.0 ? std::max(reg, 1e-10) : ridge * 10.0;
  }
  fail(ErrorKind::Cluster, "GMM covariance is not positive definite");
}

void refresh_factors(ClusterModel& m, double reg) {
  const std::size_t dd = m.dim * m.dim;
  m.cholesky.assign(m.k * dd, 0.0);
  m.log_det.assign(m.k, 0.0);
  for (std::size_t j = 0; j < m.k; ++j) {
    factor(m.covariances.data() + j * dd, m.dim, reg, m.cholesky.data() + j * dd, &m.log_det[j]);
  }
}

// log(weight_j) + log N(x | mean_j, cov_j) for every j.
void log_joint(const ClusterModel& m, const double* x, double* out, std::vector<double>& scratch) {
  const std::size_t d = m.dim;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  scratch.resize(d);
  for (std::size_t j = 0; j < m.k; ++j) {
    const double* mu = m.centroids.data() + j * d;
    const double* l = m.cholesky.data() + j * d * d;
    // Forward substitution: L z = x - mu.
    double quad = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      double s = x[r] - mu[r];
      for (std::size_t c = 0; c < r; ++c) s -= l[r * d + c] * scratch[c];
      scratch[r] = s / l[r * d + r];
      quad += scratch[r] * scratch[r];
    }
    out[j] = std::log(m.weights[j]) - 0.5 * (static_cast<double>(d) * log2pi + m.log_det[j] + quad);
  }
}

double log_sum_exp(const double* v, std::size_t k) {
  const double mx = *std::max_element(v, v + k);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += std::exp(v[j] - mx);
  return mx + std::log(s);
}

void covariance_of(const std::vector<double>& x, std::size_t d, const std::vector<std::size_t>& members,
                   const double* mean, double reg, double* cov) {
  std::fill(cov, cov + d * d, 0.0);
  for (std::size_t i : members) {
    const double* xi = x.data() + i * d;
    for (std::size_t r = 0; r < d; ++r) {
      const double dr = xi[r] - mean[r];
      for (std::size_t c = 0; c <= r; ++c) cov[r * d + c] += dr * (xi[c] - mean[c]);
    }
  }
  const double denom = static_cast<double>(std::max<std::size_t>(members.size(), 1));
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c <= r; ++c) {
      cov[r * d + c] /= denom;
      cov[c * d + r] = cov[r * d + c];
    }
    cov[r * d + r] += reg;
  }
}

void fit_gmm(ClusterModel& m, const std::vector<double>& x, std::size_t n, const std::vector<int>& init_labels,
             const ClusterOptions& opts) {
  const std::size_t k = m.k, d = m.dim, dd = d * d;
  const double reg = opts.covariance_reg;
  m.covariances.assign(k * dd, 0.0);
  m.weights.assign(k, 0.0);

  std::vector<std::size_t> everyone(n);
  for (std::size_t i = 0; i < n; ++i) everyone[i] = i;
  std::vector<double> global_mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < d; ++t) global_mean[t] += x[i * d + t] / static_cast<double>(n);
  }
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (init_labels[i] == static_cast<int>(j)) members.push_back(i);
    }
    if (members.size() >= 2) {
      covariance_of(x, d, members, m.centroids.data() + j * d, reg, m.covariances.data() + j * dd);
    } else {
      covariance_of(x, d, everyone, global_mean.data(), reg, m.covariances.data() + j * dd);
    }
    m.weights[j] = std::max<double>(static_cast<double>(members.size()), 1.0);
  }
  double wsum = 0.0;
  for (double w : m.weights) wsum += w;
  for (double& w : m.weights) w /= wsum;
  refresh_factors(m, reg);

  std::vector<double> resp(n * k);
  std::vector<double> scratch;
  m.log_likelihood_history.clear();
  for (int it = 0; it < std::max(1, opts.em_iterations); ++it) {
    // E-step
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double* r = resp.data() + i * k;
      log_joint(m, x.data() + i * d, r, scratch);
      const double lse = log_sum_exp(r, k);
      ll += lse;
      for (std::size_t j = 0; j < k; ++j) r[j] = std::exp(r[j] - lse);
    }
    ll /= static_cast<double>(n);
    const bool converged =
        !m.log_likelihood_history.empty() &&
        std::abs(ll - m.log_likelihood_history.back()) <= opts.em_tolerance * std::max(1.0, std::abs(ll));
    m.log_likelihood_history.push_back(ll);
    if (converged) break;

    // M-step
    for (std::size_t j = 0; j < k; ++j) {
      double nk = 0.0;
      std::vector<double> mean(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * k + j];
        nk += r;
        for (std::size_t t = 0; t < d; ++t) mean[t] += r * x[i * d + t];
      }
      nk = std::max(nk, 10.0 * std::numeric_limits<double>::epsilon());
      for (double& v : mean) v /= nk;
      double* cov = m.covariances.data() + j * dd;
      std::fill(cov, cov + dd, 0.0);
      std::vector<double> diff(d);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * k + j];
        if (r == 0.0) continue;
        for (std::size_t t = 0; t < d; ++t) diff[t] = x[i * d + t] - mean[t];
        for (std::size_t a = 0; a < d; ++a) {
          const double ra = r * diff[a];
          for (std::size_t b = 0; b <= a; ++b) cov[a * d + b] += ra * diff[b];
        }
      }
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b <= a; ++b) {
          cov[a * d + b] /= nk;
          cov[b * d + a] = cov[a * d + b];
        }
        cov[a * d + a] += reg;
      }
      std::copy(mean.begin(), mean.end(), m.centroids.begin() + static_cast<std::ptrdiff_t>(j * d));
      m.weights[j] = nk / static_cast<double>(n);
    }
    refresh_factors(m, reg);
  }
}

}  // namespace

ClusterModel fit_cluster(std::span<const float> samples, std::size_t dim, ClusterMethod method, std::size_t k,
                         std::uint64_t seed, const ClusterOptions& opts) {
  if (dim == 0 || samples.size() % dim != 0) fail(ErrorKind::Dimension, "sample buffer is not a multiple of dim");
  const std::size_t n = samples.size() / dim;
  if (k < 1) fail(ErrorKind::Cluster, "k must be >= 1");
  if (k > n) {
    fail(ErrorKind::Cluster, "cannot form " + std::to_string(k) + " clusters from " + std::to_string(n) + " samples");
  }
  const std::vector<double> x = to_double(samples);

  ClusterModel m;
  m.method = method;
  m.k = k;
  m.dim = dim;
  m.seed = seed;
  KMeansRun run = kmeans(x, n, dim, k, seed, opts);
  m.centroids = std::move(run.centroids);
  m.inertia_history = std::move(run.inertia);
  if (method == ClusterMethod::Gmm) fit_gmm(m, x, n, run.labels, opts);

  const std::vector<int> ids = assign(m, samples);
  m.train_sizes = cluster_sizes(ids, k);
  if (opts.min_cluster_size > 0) {
    for (std::size_t s : m.train_sizes) {
      if (s < opts.min_cluster_size) throw SmallClusterError(m.train_sizes, opts.min_cluster_size);
    }
  }
  return m;
}

std::vector<double> gmm_log_joint(const ClusterModel& model, std::span<const double> x) {
  std::vector<double> out(model.k);
  std::vector<double> scratch;
  log_joint(model, x.data(), out.data(), scratch);
  return out;
}

std::vector<int> assign(const ClusterModel& model, std::span<const float> samples) {
  const std::size_t d = model.dim;
  if (d == 0 || samples.size() % d != 0) {
    fail(ErrorKind::Dimension, "samples do not have the clusterer's dimension " + std::to_string(d));
  }
  const std::size_t n = samples.size() / d;
  std::vector<int> ids(n);
  std::vector<double> xi(d), lj(model.k), scratch;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < d; ++t) xi[t] = samples[i * d + t];
    if (model.method == ClusterMethod::KMeans) {
      ids[i] = nearest(xi.data(), model.centroids, model.k, d, nullptr);
    } else {
      log_joint(model, xi.data(), lj.data(), scratch);
      ids[i] = static_cast<int>(std::max_element(lj.begin(), lj.end()) - lj.begin());
    }
  }
  return ids;
}

double kmeans_inertia(const ClusterModel& model, std::span<const float> samples) {
  const std::size_t d = model.dim;
  const std::size_t n = samples.size() / d;
  std::vector<double> xi(d);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < d; ++t) xi[t] = samples[i * d + t];
    double dist = 0.0;
    nearest(xi.data(), model.centroids, model.k, d, &dist);
    total += dist;
  }
  return total;
}

double gmm_mean_log_likelihood(const ClusterModel& model, std::span<const float> samples) {
  const std::size_t d = model.dim;
  const std::size_t n = samples.size() / d;
  std::vector<double> xi(d), lj(model.k), scratch;
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < d; ++t) xi[t] = samples[i * d + t];
    log_joint(model, xi.data(), lj.data(), scratch);
    ll += log_sum_exp(lj.data(), model.k);
  }
  return ll / static_cast<double>(n);
}

}  // namespace ceunet
