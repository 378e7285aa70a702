#pragma once

// Evaluation tools: PCA over flattened RGB-D images (fit via the Gram-matrix
// eigendecomposition of the centered data, accumulated in double regardless
// of training precision), centroid distance between projected sample sets,
// per-channel histograms, and colored point-cloud export to ASCII PLY.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "vologan/data.hpp"

namespace vologan {

struct PcaModel {
  std::vector<double> mean;                     // d
  std::vector<std::vector<double>> components;  // k rows, each of length d, orthonormal
  std::vector<double> explained_variance;       // fraction per component, non-increasing
};

namespace detail {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major n x n).
// Returns eigenvalues descending with matching eigenvector columns.
inline void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& eigenvalues,
                         std::vector<double>& eigenvectors) {
  std::vector<double> v(std::size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[std::size_t(i) * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[std::size_t(p) * n + q] * a[std::size_t(p) * n + q];
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[std::size_t(p) * n + q];
        if (std::abs(apq) < 1e-30) continue;
        const double app = a[std::size_t(p) * n + p];
        const double aqq = a[std::size_t(q) * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a[std::size_t(i) * n + p];
          const double aiq = a[std::size_t(i) * n + q];
          a[std::size_t(i) * n + p] = c * aip - s * aiq;
          a[std::size_t(i) * n + q] = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a[std::size_t(p) * n + i];
          const double aqi = a[std::size_t(q) * n + i];
          a[std::size_t(p) * n + i] = c * api - s * aqi;
          a[std::size_t(q) * n + i] = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v[std::size_t(i) * n + p];
          const double viq = v[std::size_t(i) * n + q];
          v[std::size_t(i) * n + p] = c * vip - s * viq;
          v[std::size_t(i) * n + q] = s * vip + c * viq;
        }
      }
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[std::size_t(i)] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return a[std::size_t(x) * n + x] > a[std::size_t(y) * n + y];
  });
  eigenvalues.resize(std::size_t(n));
  eigenvectors.assign(std::size_t(n) * n, 0.0);
  for (int k = 0; k < n; ++k) {
    eigenvalues[std::size_t(k)] = a[std::size_t(order[std::size_t(k)]) * n + order[std::size_t(k)]];
    for (int i = 0; i < n; ++i)
      eigenvectors[std::size_t(k) * n + i] = v[std::size_t(i) * n + order[std::size_t(k)]];
  }
}

}  // namespace detail

// Flattens a (1, 4, h, w) sample to a double feature vector.
inline std::vector<double> flatten_sample(const Tensor<float>& t) {
  std::vector<double> out(t.values().begin(), t.values().end());
  return out;
}

// Fit on n >= k samples of equal dimension. Works through the n x n Gram
// matrix of the centered data, so the image dimension never materializes as
// a dense covariance. Component signs are fixed by making each component's
// largest-magnitude entry positive.
inline PcaModel pca_fit(const std::vector<std::vector<double>>& samples, int k = 5) {
  const int n = int(samples.size());
  if (n < k) fail("pca_fit: need at least k=" + std::to_string(k) + " samples, got " +
                  std::to_string(n));
  const std::size_t d = samples[0].size();
  for (const auto& s : samples)
    if (s.size() != d) fail("pca_fit: samples have differing dimensions");

  PcaModel model;
  model.mean.assign(d, 0.0);
  for (const auto& s : samples)
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += s[j];
  for (auto& m : model.mean) m /= double(n);

  std::vector<std::vector<double>> centered(static_cast<std::size_t>(n), std::vector<double>(d));
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered[std::size_t(i)][j] = samples[std::size_t(i)][j] - model.mean[j];

  std::vector<double> gram(std::size_t(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < d; ++l) acc += centered[std::size_t(i)][l] * centered[std::size_t(j)][l];
      gram[std::size_t(i) * n + j] = acc;
      gram[std::size_t(j) * n + i] = acc;
    }

  std::vector<double> eigenvalues, eigenvectors;
  detail::jacobi_eigen(gram, n, eigenvalues, eigenvectors);

  double total_variance = 0.0;
  for (double ev : eigenvalues) total_variance += std::max(ev, 0.0);

  for (int comp = 0; comp < k; ++comp) {
    const double ev = std::max(eigenvalues[std::size_t(comp)], 0.0);
    std::vector<double> direction(d, 0.0);
    if (ev > 1e-12) {
      const double inv = 1.0 / std::sqrt(ev);
      for (int i = 0; i < n; ++i) {
        const double w = eigenvectors[std::size_t(comp) * n + i] * inv;
        if (w == 0.0) continue;
        const auto& row = centered[std::size_t(i)];
        for (std::size_t j = 0; j < d; ++j) direction[j] += w * row[j];
      }
    }
    std::size_t largest = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(direction[j]) > std::abs(direction[largest])) largest = j;
    if (direction[largest] < 0.0)
      for (auto& x : direction) x = -x;
    model.components.push_back(std::move(direction));
    model.explained_variance.push_back(total_variance > 0.0 ? ev / total_variance : 0.0);
  }
  return model;
}

// coordinates = (x - mean) . components
inline std::vector<std::vector<double>> pca_project(const PcaModel& model,
                                                    const std::vector<std::vector<double>>& samples) {
  std::vector<std::vector<double>> coords;
  coords.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.size() != model.mean.size()) fail("pca_project: dimension mismatch");
    std::vector<double> c(model.components.size());
    for (std::size_t k = 0; k < model.components.size(); ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j)
        acc += (s[j] - model.mean[j]) * model.components[k][j];
      c[k] = acc;
    }
    coords.push_back(std::move(c));
  }
  return coords;
}

// Euclidean distance between the centroids of two projected sets.
inline double domain_distance(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) fail("domain_distance: empty coordinate set");
  const std::size_t k = a[0].size();
  if (b[0].size() != k) fail("domain_distance: dimension mismatch");
  std::vector<double> ca(k, 0.0), cb(k, 0.0);
  for (const auto& p : a)
    for (std::size_t i = 0; i < k; ++i) ca[i] += p[i];
  for (const auto& p : b)
    for (std::size_t i = 0; i < k; ++i) cb[i] += p[i];
  double dist_sq = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double diff = ca[i] / double(a.size()) - cb[i] / double(b.size());
    dist_sq += diff * diff;
  }
  return std::sqrt(dist_sq);
}

// Scatter CSV with one row per sample: sample_id, domain, c1..ck.
inline void write_scatter_csv(const std::filesystem::path& path,
                              const std::vector<std::vector<double>>& real_coords,
                              const std::vector<std::vector<double>>& gen_coords,
                              const std::string& metadata = "") {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail("cannot write scatter CSV: " + path.string());
  if (!metadata.empty()) os << "# " << metadata << "\n";
  os << "sample_id,domain";
  const std::size_t k = real_coords.empty() ? (gen_coords.empty() ? 0 : gen_coords[0].size())
                                            : real_coords[0].size();
  for (std::size_t i = 1; i <= k; ++i) os << ",c" << i;
  os << "\n";
  os << std::setprecision(17);
  int id = 0;
  for (const auto& c : real_coords) {
    os << id++ << ",real";
    for (double v : c) os << "," << v;
    os << "\n";
  }
  for (const auto& c : gen_coords) {
    os << id++ << ",generated";
    for (double v : c) os << "," << v;
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// Per-channel histograms over [0, 1]; values at 1.0 land in the last bin.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<std::int64_t>> channel_histogram(const Tensor<float>& sample,
                                                                int bins) {
  if (bins < 2) fail("channel_histogram: need at least 2 bins");
  const Shape s = sample.shape();
  std::vector<std::vector<std::int64_t>> counts(std::size_t(s.c),
                                                std::vector<std::int64_t>(std::size_t(bins), 0));
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const float v = sample.at(n, c, y, x);
          int bin = int(v * float(bins));
          bin = std::min(std::max(bin, 0), bins - 1);
          counts[std::size_t(c)][std::size_t(bin)] += 1;
        }
  return counts;
}

// ---------------------------------------------------------------------------
// ASCII PLY export: x = column, y = row, z = unscaled depth. Background
// pixels (all four scaled channels zero) are skipped, both axes are
// subsampled by the stride.
// ---------------------------------------------------------------------------

inline std::int64_t pointcloud_export(const Tensor<float>& sample,
                                      const std::filesystem::path& path, int stride = 2) {
  const Shape s = sample.shape();
  if (s.n != 1 || s.c != 4) fail("pointcloud_export: expected (1, 4, h, w), got " + s.str());
  if (stride < 1) fail("pointcloud_export: stride must be >= 1");

  auto is_background = [&](int y, int x) {
    for (int c = 0; c < 4; ++c)
      if (sample.at(0, c, y, x) != 0.0f) return false;
    return true;
  };

  std::int64_t count = 0;
  for (int y = 0; y < s.h; y += stride)
    for (int x = 0; x < s.w; x += stride)
      if (!is_background(y, x)) ++count;

  std::ofstream os(path, std::ios::trunc);
  if (!os) fail("cannot write point cloud: " + path.string());
  os << "ply\nformat ascii 1.0\n";
  os << "element vertex " << count << "\n";
  os << "property float x\nproperty float y\nproperty float z\n";
  os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  os << "end_header\n";
  os << std::setprecision(9);
  for (int y = 0; y < s.h; y += stride)
    for (int x = 0; x < s.w; x += stride) {
      if (is_background(y, x)) continue;
      os << x << " " << y << " " << unscale_depth(sample.at(0, 3, y, x)) << " "
         << int(unscale_rgb(sample.at(0, 0, y, x))) << " "
         << int(unscale_rgb(sample.at(0, 1, y, x))) << " "
         << int(unscale_rgb(sample.at(0, 2, y, x))) << "\n";
    }
  if (!os) fail("write failed: " + path.string());
  return count;
}

}  // namespace vologan
