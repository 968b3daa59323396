#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ceunet/cluster.hpp"
#include "ceunet/error.hpp"
#include "support.hpp"

using namespace ceunet;

namespace {

struct Blobs {
  std::vector<float> x;
  std::vector<int> truth;
};

Blobs blobs(std::size_t per, std::size_t k, std::size_t d, float spread, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> g(0.0f, spread);
  Blobs b;
  for (std::size_t i = 0; i < per * k; ++i) {
    const std::size_t c = i % k;
    b.truth.push_back(static_cast<int>(c));
    for (std::size_t t = 0; t < d; ++t) b.x.push_back(g(rng) + (t % k == c ? 5.0f : 0.0f));
  }
  return b;
}

// Fraction of agreement under the best relabelling.
double agreement(const std::vector<int>& a, const std::vector<int>& b, std::size_t k) {
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same += perm[a[i]] == b[i];
    best = std::max(best, static_cast<double>(same) / a.size());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("well separated blobs are recovered") {
  const auto b = blobs(60, 3, 6, 0.5f, 1);
  for (auto method : {ClusterMethod::KMeans, ClusterMethod::Gmm}) {
    const auto m = fit_cluster(b.x, 6, method, 3, 9);
    INFO(to_string(method));
    CHECK(agreement(assign(m, b.x), b.truth, 3) >= 0.99);
    const auto sizes = cluster_sizes(assign(m, b.x), 3);
    CHECK(sizes == m.train_sizes);
  }
}

TEST_CASE("k-means assignment is the brute-force nearest centroid") {
  Rng rng(2);
  const auto x = testing::uniform(rng, 300 * 5);
  const auto m = fit_cluster(x, 5, ClusterMethod::KMeans, 4, 3);
  const auto ids = assign(m, x);
  for (std::size_t i = 0; i < 300; ++i) {
    int best = 0;
    double best_d = INFINITY;
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < 5; ++t) {
        const double diff = static_cast<double>(x[i * 5 + t]) - m.centroid(j)[t];
        s += diff * diff;
      }
      if (s < best_d) {
        best_d = s;
        best = static_cast<int>(j);
      }
    }
    CHECK(ids[i] == best);
  }
}

TEST_CASE("converged centroids are the means of their members") {
  const auto b = blobs(40, 3, 4, 1.0f, 4);
  const auto m = fit_cluster(b.x, 4, ClusterMethod::KMeans, 3, 5);
  const auto ids = assign(m, b.x);
  for (std::size_t j = 0; j < 3; ++j) {
    std::vector<double> mean(4, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] != static_cast<int>(j)) continue;
      ++count;
      for (std::size_t t = 0; t < 4; ++t) mean[t] += b.x[i * 4 + t];
    }
    REQUIRE(count > 0);
    for (std::size_t t = 0; t < 4; ++t) CHECK(m.centroid(j)[t] == doctest::Approx(mean[t] / count).epsilon(1e-9));
  }
}

TEST_CASE("objective histories are monotone") {
  Rng rng(6);
  const auto x = testing::uniform(rng, 400 * 3);
  const auto km = fit_cluster(x, 3, ClusterMethod::KMeans, 5, 7);
  REQUIRE(km.inertia_history.size() >= 2);
  for (std::size_t i = 1; i < km.inertia_history.size(); ++i) {
    CHECK(km.inertia_history[i] <= km.inertia_history[i - 1] * (1 + 1e-12));
  }
  CHECK(kmeans_inertia(km, x) == doctest::Approx(km.inertia_history.back()).epsilon(1e-9));

  const auto gm = fit_cluster(x, 3, ClusterMethod::Gmm, 3, 7);
  REQUIRE(gm.log_likelihood_history.size() >= 2);
  for (std::size_t i = 1; i < gm.log_likelihood_history.size(); ++i) {
    CHECK(gm.log_likelihood_history[i] >= gm.log_likelihood_history[i - 1] - 1e-8);
  }
}

TEST_CASE("mixture parameters are valid") {
  const auto b = blobs(50, 2, 3, 1.0f, 8);
  const auto m = fit_cluster(b.x, 3, ClusterMethod::Gmm, 2, 1);
  CHECK(std::accumulate(m.weights.begin(), m.weights.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t j = 0; j < 2; ++j) {
    const double* c = m.covariances.data() + j * 9;
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t bb = 0; bb < 3; ++bb) CHECK(c[a * 3 + bb] == c[bb * 3 + a]);
    }
    // Sylvester: leading minors positive.
    const double m1 = c[0];
    const double m2 = c[0] * c[4] - c[1] * c[3];
    const double m3 = c[0] * (c[4] * c[8] - c[5] * c[7]) - c[1] * (c[3] * c[8] - c[5] * c[6]) +
                      c[2] * (c[3] * c[7] - c[4] * c[6]);
    CHECK(m1 > 0);
    CHECK(m2 > 0);
    CHECK(m3 > 0);
  }
  const std::vector<double> x0{b.x[0], b.x[1], b.x[2]};
  CHECK(gmm_log_joint(m, x0).size() == 2);
}

TEST_CASE("degenerate k and bad requests") {
  Rng rng(10);
  const auto x = testing::uniform(rng, 20 * 2);
  for (auto method : {ClusterMethod::KMeans, ClusterMethod::Gmm}) {
    const auto m = fit_cluster(x, 2, method, 1, 0);
    const auto ids = assign(m, x);
    CHECK(std::all_of(ids.begin(), ids.end(), [](int v) { return v == 0; }));
  }
  auto kind = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind([&] { fit_cluster(x, 2, ClusterMethod::KMeans, 21, 0); }) == ErrorKind::Cluster);
  CHECK(kind([&] { fit_cluster(x, 2, ClusterMethod::KMeans, 0, 0); }) == ErrorKind::Cluster);
  CHECK(kind([&] { fit_cluster(x, 3, ClusterMethod::KMeans, 2, 0); }) == ErrorKind::Dimension);
  CHECK(parse_cluster_method("gmm") == ClusterMethod::Gmm);
  CHECK(kind([] { parse_cluster_method("dbscan"); }) == ErrorKind::Config);
}

TEST_CASE("small clusters are reported with their sizes") {
  auto b = blobs(30, 2, 2, 0.3f, 12);
  b.x.insert(b.x.end(), {40.0f, 40.0f, 40.5f, 40.0f});
  ClusterOptions o;
  o.min_cluster_size = 5;
  try {
    fit_cluster(b.x, 2, ClusterMethod::KMeans, 3, 2, o);
    FAIL("expected a small-cluster error");
  } catch (const SmallClusterError& e) {
    CHECK(e.kind() == ErrorKind::SmallCluster);
    CHECK(e.min_size() == 5);
    auto sizes = e.sizes();
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{2, 30, 30});
  }
}

TEST_CASE("fits are deterministic per seed") {
  Rng rng(14);
  const auto x = testing::uniform(rng, 100 * 4);
  for (auto method : {ClusterMethod::KMeans, ClusterMethod::Gmm}) {
    const auto a = fit_cluster(x, 4, method, 3, 33);
    const auto b = fit_cluster(x, 4, method, 3, 33);
    CHECK(a.centroids == b.centroids);
    CHECK(assign(a, x) == assign(b, x));
  }
}

TEST_CASE("centroids and duplicates route consistently") {
  const auto b = blobs(30, 3, 3, 0.5f, 16);
  for (auto method : {ClusterMethod::KMeans, ClusterMethod::Gmm}) {
    const auto m = fit_cluster(b.x, 3, method, 3, 4);
    for (std::size_t j = 0; j < 3; ++j) {
      const auto c = m.centroid(j);
      const std::vector<float> at{static_cast<float>(c[0]), static_cast<float>(c[1]), static_cast<float>(c[2])};
      CHECK(assign(m, at)[0] == static_cast<int>(j));
    }
    std::vector<float> twice(b.x.begin(), b.x.begin() + 3);
    twice.insert(twice.end(), b.x.begin(), b.x.begin() + 3);
    const auto ids = assign(m, twice);
    CHECK(ids[0] == ids[1]);
  }
}
