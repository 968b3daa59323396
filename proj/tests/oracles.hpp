#pragma once

// Hand-written reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "ceunet/hsi_data.hpp"
#include "ceunet/patching.hpp"

namespace oracle {

// One n x n window per labelled pixel, scanned row by row.
inline ceunet::PatchDataset naive_cpc(const ceunet::HsiCube& cube, const ceunet::GroundTruth& gt, std::size_t n) {
  ceunet::PatchDataset out;
  out.n = n;
  out.dim = cube.bands;
  out.num_classes = gt.num_classes;
  const long half = static_cast<long>(n / 2);
  for (std::size_t r = 0; r < cube.height; ++r) {
    for (std::size_t c = 0; c < cube.width; ++c) {
      if (gt.at(r, c) == 0) continue;
      for (long dy = 0; dy < static_cast<long>(n); ++dy) {
        for (long dx = 0; dx < static_cast<long>(n); ++dx) {
          const long y = static_cast<long>(r) + dy - half;
          const long x = static_cast<long>(c) + dx - half;
          for (std::size_t b = 0; b < cube.bands; ++b) {
            const bool inside = y >= 0 && x >= 0 && y < static_cast<long>(cube.height) &&
                                x < static_cast<long>(cube.width);
            out.patches.push_back(inside ? cube.data[(static_cast<std::size_t>(y) * cube.width +
                                                      static_cast<std::size_t>(x)) * cube.bands + b]
                                         : 0.0f);
          }
        }
      }
      out.labels.push_back(gt.at(r, c));
      out.coords.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});
    }
  }
  return out;
}

struct Block {
  std::size_t row, col;  // block grid position
  int label;
  std::vector<double> mean;
};

// Enumerates every full n x n block and applies the exclusive or majority rule.
inline std::vector<Block> blocks(const ceunet::HsiCube& cube, const ceunet::GroundTruth& gt, std::size_t n,
                                 bool majority) {
  std::vector<Block> out;
  for (std::size_t br = 0; br < gt.height / n; ++br) {
    for (std::size_t bc = 0; bc < gt.width / n; ++bc) {
      std::map<int, int> votes;
      std::vector<int> cells;
      for (std::size_t y = br * n; y < br * n + n; ++y) {
        for (std::size_t x = bc * n; x < bc * n + n; ++x) cells.push_back(gt.at(y, x));
      }
      int label = 0;
      if (majority) {
        for (int v : cells) {
          if (v != 0) ++votes[v];
        }
        int best = 0;
        for (const auto& [cls, count] : votes) {
          if (count > best) {
            best = count;
            label = cls;
          }
        }
      } else {
        const bool same = std::all_of(cells.begin(), cells.end(), [&](int v) { return v == cells[0]; });
        label = same ? cells[0] : 0;
      }
      if (label == 0) continue;
      Block b{br, bc, label, std::vector<double>(cube.bands, 0.0)};
      for (std::size_t y = br * n; y < br * n + n; ++y) {
        for (std::size_t x = bc * n; x < bc * n + n; ++x) {
          for (std::size_t k = 0; k < cube.bands; ++k) b.mean[k] += cube.data[(y * cube.width + x) * cube.bands + k];
        }
      }
      for (double& v : b.mean) v /= static_cast<double>(n * n);
      out.push_back(std::move(b));
    }
  }
  return out;
}

// Cyclic Jacobi eigen-decomposition of a symmetric matrix; eigenvalues are
// returned in descending order with eigenvectors as rows.
inline std::pair<std::vector<double>, std::vector<std::vector<double>>> jacobi_eigen(std::vector<double> a,
                                                                                     std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p * n + q]) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * a[p * n + q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x * n + x] > a[y * n + y]; });
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  for (std::size_t i : order) {
    values.push_back(a[i * n + i]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k * n + i];
    vectors.push_back(col);
  }
  return {values, vectors};
}

// Sample covariance (divided by N - 1) of row-major n x d data.
inline std::vector<double> covariance(const std::vector<float>& x, std::size_t n, std::size_t d) {
  std::vector<double> mean(d, 0.0), cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += x[i * d + k];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += (x[i * d + a] - mean[a]) * (x[i * d + b] - mean[b]);
    }
  }
  for (double& c : cov) c /= static_cast<double>(n - 1);
  return cov;
}

}  // namespace oracle
