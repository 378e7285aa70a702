#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "vologan/eval.hpp"

using namespace vologan;

namespace {

std::vector<std::vector<double>> random_samples(int n, int d, Rng& rng, double lo = -1,
                                                double hi = 1) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(d)));
  for (auto& row : out)
    for (auto& v : row) v = rng.uniform(lo, hi);
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

TEST(Pca, RankOneDataExplainedByFirstComponent) {
  Rng rng(1);
  std::vector<std::vector<double>> samples;
  const std::vector<double> direction{1.0, 2.0, -0.5};
  for (int i = 0; i < 20; ++i) {
    const double t = rng.uniform(-3, 3);
    samples.push_back({direction[0] * t, direction[1] * t, direction[2] * t});
  }
  PcaModel model = pca_fit(samples, 2);
  EXPECT_GE(model.explained_variance[0], 0.999);
}

TEST(Pca, ComponentsOrthonormal) {
  Rng rng(2);
  auto samples = random_samples(12, 7, rng);
  PcaModel model = pca_fit(samples, 5);
  for (std::size_t i = 0; i < model.components.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double expected = i == j ? 1.0 : 0.0;
      ASSERT_NEAR(dot(model.components[i], model.components[j]), expected, 1e-6);
    }
}

TEST(Pca, ProjectionsMatchDeflationOracleOnToyMatrix) {
  // 4 samples in 3 dimensions
  std::vector<std::vector<double>> samples{
      {1.0, 0.5, -0.2}, {0.2, -1.0, 0.4}, {-0.7, 0.3, 1.0}, {0.1, 0.2, -1.2}};
  const int n = 4, d = 3;
  PcaModel model = pca_fit(samples, 2);
  auto coords = pca_project(model, samples);

  // oracle route: dense covariance eigendecomposition by power iteration
  std::vector<double> mean(d, 0);
  for (const auto& s : samples)
    for (int j = 0; j < d; ++j) mean[std::size_t(j)] += s[std::size_t(j)] / n;
  std::vector<double> cov(std::size_t(d) * d, 0);
  for (const auto& s : samples)
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        cov[std::size_t(a) * d + b] += (s[std::size_t(a)] - mean[std::size_t(a)]) *
                                       (s[std::size_t(b)] - mean[std::size_t(b)]);
  auto pairs = oracle::top_eigenpairs(cov, d, 2);

  for (int k = 0; k < 2; ++k) {
    // fix the oracle eigenvector sign the same way the library does
    std::vector<double> v = pairs[std::size_t(k)].vector;
    std::size_t largest = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
      if (std::abs(v[j]) > std::abs(v[largest])) largest = j;
    if (v[largest] < 0)
      for (auto& x : v) x = -x;
    for (int i = 0; i < n; ++i) {
      double expected = 0;
      for (int j = 0; j < d; ++j)
        expected += (samples[std::size_t(i)][std::size_t(j)] - mean[std::size_t(j)]) * v[std::size_t(j)];
      ASSERT_NEAR(coords[std::size_t(i)][std::size_t(k)], expected, 1e-6)
          << "sample " << i << " component " << k;
    }
  }
}

TEST(Pca, ProjectingTheMeanGivesZeros) {
  Rng rng(3);
  auto samples = random_samples(10, 6, rng);
  PcaModel model = pca_fit(samples, 3);
  auto coords = pca_project(model, {model.mean});
  for (double c : coords[0]) EXPECT_NEAR(c, 0.0, 1e-9);
}

TEST(Pca, ReconstructionErrorNonIncreasingInK) {
  Rng rng(4);
  auto samples = random_samples(15, 8, rng);
  double prev = std::numeric_limits<double>::max();
  for (int k = 1; k <= 5; ++k) {
    PcaModel model = pca_fit(samples, k);
    auto coords = pca_project(model, samples);
    double err = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      std::vector<double> rec = model.mean;
      for (int c = 0; c < k; ++c)
        for (std::size_t j = 0; j < rec.size(); ++j)
          rec[j] += coords[i][std::size_t(c)] * model.components[std::size_t(c)][j];
      for (std::size_t j = 0; j < rec.size(); ++j)
        err += (rec[j] - samples[i][j]) * (rec[j] - samples[i][j]);
    }
    ASSERT_LE(err, prev + 1e-9);
    prev = err;
  }
}

TEST(Pca, ExplainedVarianceSumsToTotal) {
  Rng rng(5);
  auto samples = random_samples(9, 6, rng);
  // all min(n-1, d) informative components
  PcaModel model = pca_fit(samples, 8);
  double fraction_sum = 0;
  for (double f : model.explained_variance) fraction_sum += f;
  EXPECT_NEAR(fraction_sum, 1.0, 1e-5);
}

TEST(Pca, InvariantToSampleOrderingUpToSign) {
  Rng rng(6);
  auto samples = random_samples(10, 5, rng);
  PcaModel a = pca_fit(samples, 3);
  std::vector<std::vector<double>> reversed(samples.rbegin(), samples.rend());
  PcaModel b = pca_fit(reversed, 3);
  for (int k = 0; k < 3; ++k) {
    const double alignment = std::abs(dot(a.components[std::size_t(k)], b.components[std::size_t(k)]));
    ASSERT_NEAR(alignment, 1.0, 1e-5);
  }
}

TEST(Pca, TooFewSamplesThrows) {
  Rng rng(7);
  EXPECT_THROW(pca_fit(random_samples(3, 4, rng), 5), std::runtime_error);
}

// ---------------------------------------------------------------------------
// domain distance
// ---------------------------------------------------------------------------

TEST(DomainDistance, IdenticalSetsGiveZero) {
  Rng rng(8);
  auto a = random_samples(6, 5, rng);
  EXPECT_DOUBLE_EQ(domain_distance(a, a), 0.0);
}

TEST(DomainDistance, PureOffsetGivesItsNorm) {
  Rng rng(9);
  auto a = random_samples(6, 3, rng);
  std::vector<double> offset{0.3, -0.4, 1.2};
  auto b = a;
  for (auto& row : b)
    for (std::size_t i = 0; i < 3; ++i) row[i] += offset[i];
  const double norm = std::sqrt(dot(offset, offset));
  EXPECT_NEAR(domain_distance(a, b), norm, 1e-12);
}

TEST(DomainDistance, SymmetricAndTriangle) {
  Rng rng(10);
  auto a = random_samples(5, 4, rng);
  auto b = random_samples(7, 4, rng);
  auto c = random_samples(6, 4, rng);
  EXPECT_DOUBLE_EQ(domain_distance(a, b), domain_distance(b, a));
  EXPECT_LE(domain_distance(a, c), domain_distance(a, b) + domain_distance(b, c) + 1e-12);
}

// ---------------------------------------------------------------------------
// histograms
// ---------------------------------------------------------------------------

TEST(Histogram, ConstantChannelFillsOneBin) {
  Tensor<float> sample(Shape{1, 4, 4, 4}, 0.5f);
  auto counts = channel_histogram(sample, 10);
  for (int c = 0; c < 4; ++c) {
    EXPECT_EQ(counts[std::size_t(c)][5], 16);
    std::int64_t total = 0;
    for (auto v : counts[std::size_t(c)]) total += v;
    EXPECT_EQ(total, 16);
  }
}

TEST(Histogram, CountsSumToPixelCount) {
  Rng rng(11);
  Tensor<float> sample(Shape{1, 4, 8, 8});
  for (auto& v : sample.values()) v = float(rng.uniform());
  auto counts = channel_histogram(sample, 7);
  for (int c = 0; c < 4; ++c) {
    std::int64_t total = 0;
    for (auto v : counts[std::size_t(c)]) total += v;
    EXPECT_EQ(total, 64);
  }
}

TEST(Histogram, ValueOneLandsInLastBin) {
  Tensor<float> sample(Shape{1, 4, 1, 1}, 1.0f);
  auto counts = channel_histogram(sample, 10);
  EXPECT_EQ(counts[0][9], 1);
}

TEST(Histogram, UniformChannelPassesChiSquare) {
  Rng rng(12);
  const int bins = 64, pixels = 64 * 64;
  Tensor<float> sample(Shape{1, 4, 64, 64});
  for (auto& v : sample.values()) v = float(rng.uniform());
  auto counts = channel_histogram(sample, bins);
  const double expected = double(pixels) / bins;
  for (int c = 0; c < 4; ++c) {
    double chi2 = 0;
    for (auto v : counts[std::size_t(c)])
      chi2 += (double(v) - expected) * (double(v) - expected) / expected;
    // 1% critical value for 63 degrees of freedom
    EXPECT_LT(chi2, 92.01);
  }
}

TEST(Histogram, InvariantUnderLeftRightFlip) {
  Rng rng(13);
  Tensor<float> sample(Shape{1, 4, 6, 6});
  for (auto& v : sample.values()) v = float(rng.uniform());
  Tensor<float> flipped = augment_apply(sample, true, 0, 0);
  EXPECT_EQ(channel_histogram(sample, 16), channel_histogram(flipped, 16));
}

// ---------------------------------------------------------------------------
// point-cloud export
// ---------------------------------------------------------------------------

TEST(PointCloud, AllBackgroundExportsNoVertices) {
  Tensor<float> sample(Shape{1, 4, 8, 8}, 0.0f);
  const auto path = std::filesystem::temp_directory_path() / "empty.ply";
  EXPECT_EQ(pointcloud_export(sample, path, 2), 0);
  std::ifstream is(path);
  std::string line;
  bool found = false;
  while (std::getline(is, line))
    if (line == "element vertex 0") found = true;
  EXPECT_TRUE(found);
}

TEST(PointCloud, StrideCountsForFullForeground) {
  for (int h : {8, 9})
    for (int w : {8, 11}) {
      Tensor<float> sample(Shape{1, 4, h, w}, 0.5f);
      const auto path = std::filesystem::temp_directory_path() / "full.ply";
      const std::int64_t count = pointcloud_export(sample, path, 2);
      EXPECT_EQ(count, std::int64_t((h + 1) / 2) * ((w + 1) / 2));
    }
}

TEST(PointCloud, RoundTripThroughPlyParser) {
  Rng rng(14);
  Tensor<float> sample(Shape{1, 4, 4, 4}, 0.0f);
  // a few foreground pixels with known values
  sample.at(0, 0, 1, 2) = scale_rgb(200);
  sample.at(0, 1, 1, 2) = scale_rgb(100);
  sample.at(0, 2, 1, 2) = scale_rgb(50);
  sample.at(0, 3, 1, 2) = scale_depth(0.25f);
  sample.at(0, 0, 3, 0) = scale_rgb(10);
  sample.at(0, 3, 3, 0) = scale_depth(-0.5f);
  const auto path = std::filesystem::temp_directory_path() / "roundtrip.ply";
  pointcloud_export(sample, path, 1);

  std::ifstream is(path);
  std::string line;
  int vertex_count = -1;
  while (std::getline(is, line)) {
    if (line.rfind("element vertex", 0) == 0) vertex_count = std::stoi(line.substr(15));
    if (line == "end_header") break;
  }
  ASSERT_EQ(vertex_count, 2);
  struct V {
    double x, y, z;
    int r, g, b;
  };
  std::vector<V> vertices;
  while (std::getline(is, line)) {
    std::istringstream ss(line);
    V v;
    ss >> v.x >> v.y >> v.z >> v.r >> v.g >> v.b;
    vertices.push_back(v);
  }
  ASSERT_EQ(vertices.size(), 2u);
  EXPECT_EQ(vertices[0].x, 2);
  EXPECT_EQ(vertices[0].y, 1);
  EXPECT_NEAR(vertices[0].z, 0.25, 1e-6);
  EXPECT_EQ(vertices[0].r, 200);
  EXPECT_EQ(vertices[0].g, 100);
  EXPECT_EQ(vertices[0].b, 50);
  EXPECT_EQ(vertices[1].x, 0);
  EXPECT_EQ(vertices[1].y, 3);
  EXPECT_NEAR(vertices[1].z, -0.5, 1e-6);
}

TEST(ScatterCsv, WritesSampleRowsWithDomains) {
  Rng rng(15);
  auto real = random_samples(2, 3, rng);
  auto gen = random_samples(3, 3, rng);
  const auto path = std::filesystem::temp_directory_path() / "scatter.csv";
  write_scatter_csv(path, real, gen, "fit=union k=3");
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "# fit=union k=3");
  std::getline(is, line);
  EXPECT_EQ(line, "sample_id,domain,c1,c2,c3");
  int rows = 0, real_rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    real_rows += line.find(",real") != std::string::npos;
  }
  EXPECT_EQ(rows, 5);
  EXPECT_EQ(real_rows, 2);
}
