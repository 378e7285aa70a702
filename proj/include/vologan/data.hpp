#pragma once

// RGB-D sample I/O and preparation. Raw samples carry 8-bit RGB plus a
// float32 centered depth in [-1, 1] with background exactly -1; scaling maps
// both onto [0, 1] with fixed domain bounds so background pixels land on
// exactly zero in all four channels. A procedural two-domain toy dataset
// stands in for real captures: the synthetic domain renders clean figures,
// the target domain adds distance-dependent depth noise, scattered edge
// tails, a tilted depth plane and eroded extremities.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vologan/rng.hpp"
#include "vologan/tensor.hpp"

namespace vologan {

struct IoError : std::runtime_error {
  enum class Kind { BadMagic, Truncated, SizeMismatch, Open };
  Kind kind;
  IoError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// ---------------------------------------------------------------------------
// Raw and scaled samples
// ---------------------------------------------------------------------------

struct RawSample {
  int height = 0, width = 0;
  std::vector<std::uint8_t> rgb;  // h*w*3, interleaved row-major
  std::vector<float> depth;       // h*w, row-major, in [-1, 1], background -1
};

inline float scale_rgb(std::uint8_t v) { return float(v) / 255.0f; }
inline std::uint8_t unscale_rgb(float v) {
  const float clamped = std::min(std::max(v, 0.0f), 1.0f);
  return std::uint8_t(std::lround(clamped * 255.0f));
}

// (d + 1) / 2 with the fixed domain bounds [-1, 1], not per-image statistics.
inline float scale_depth(float d) {
  if (!(d >= -1.0f && d <= 1.0f))
    fail("depth value " + std::to_string(d) + " outside [-1, 1]: corrupt sample");
  return (d + 1.0f) / 2.0f;
}
inline float unscale_depth(float v) { return v * 2.0f - 1.0f; }

// 4-channel tensor (1, 4, h, w), channel order r, g, b, d, values in [0, 1].
template <typename T = float>
Tensor<T> to_scaled(const RawSample& raw) {
  Tensor<T> t(Shape{1, 4, raw.height, raw.width});
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x) {
      const std::size_t p = std::size_t(y) * raw.width + x;
      for (int ch = 0; ch < 3; ++ch) t.at(0, ch, y, x) = T(scale_rgb(raw.rgb[p * 3 + ch]));
      t.at(0, 3, y, x) = T(scale_depth(raw.depth[p]));
    }
  return t;
}

template <typename T = float>
RawSample from_scaled(const Tensor<T>& t) {
  const Shape s = t.shape();
  if (s.n != 1 || s.c != 4) fail("from_scaled: expected (1, 4, h, w), got " + s.str());
  RawSample raw;
  raw.height = s.h;
  raw.width = s.w;
  raw.rgb.resize(std::size_t(s.h) * s.w * 3);
  raw.depth.resize(std::size_t(s.h) * s.w);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) {
      const std::size_t p = std::size_t(y) * s.w + x;
      for (int ch = 0; ch < 3; ++ch) raw.rgb[p * 3 + ch] = unscale_rgb(float(t.at(0, ch, y, x)));
      raw.depth[p] = unscale_depth(float(t.at(0, 3, y, x)));
    }
  return raw;
}

// ---------------------------------------------------------------------------
// VRGD container, little-endian: magic "VRGD", u32 version=1, u32 height,
// u32 width, h*w*3 RGB bytes, h*w f32 depth.
// ---------------------------------------------------------------------------

inline void save_sample(const std::filesystem::path& path, const RawSample& raw) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::Open, "cannot open for writing: " + path.string());
  os.write("VRGD", 4);
  detail::put_u32(os, 1);
  detail::put_u32(os, std::uint32_t(raw.height));
  detail::put_u32(os, std::uint32_t(raw.width));
  os.write(reinterpret_cast<const char*>(raw.rgb.data()), std::streamsize(raw.rgb.size()));
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(raw.depth.data()),
           std::streamsize(raw.depth.size() * sizeof(float)));
  if (!os) throw IoError(IoError::Kind::Open, "write failed: " + path.string());
}

inline RawSample load_sample(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoError::Kind::Open, "cannot open: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "VRGD", 4) != 0)
    throw IoError(IoError::Kind::BadMagic, "bad magic in " + path.string());
  std::uint32_t version, height, width;
  if (!detail::get_u32(is, version) || !detail::get_u32(is, height) ||
      !detail::get_u32(is, width))
    throw IoError(IoError::Kind::Truncated, "truncated header in " + path.string());
  if (version != 1)
    throw IoError(IoError::Kind::SizeMismatch,
                  "unsupported version " + std::to_string(version) + " in " + path.string());
  if (height == 0 || width == 0 || height > 1 << 16 || width > 1 << 16)
    throw IoError(IoError::Kind::SizeMismatch, "implausible size in " + path.string());
  RawSample raw;
  raw.height = int(height);
  raw.width = int(width);
  raw.rgb.resize(std::size_t(height) * width * 3);
  raw.depth.resize(std::size_t(height) * width);
  if (!is.read(reinterpret_cast<char*>(raw.rgb.data()), std::streamsize(raw.rgb.size())))
    throw IoError(IoError::Kind::Truncated, "truncated RGB payload in " + path.string());
  if (!is.read(reinterpret_cast<char*>(raw.depth.data()),
               std::streamsize(raw.depth.size() * sizeof(float))))
    throw IoError(IoError::Kind::Truncated, "truncated depth payload in " + path.string());
  for (float d : raw.depth)
    if (!(d >= -1.0f && d <= 1.0f))
      throw IoError(IoError::Kind::SizeMismatch, "depth outside [-1, 1] in " + path.string());
  return raw;
}

// ---------------------------------------------------------------------------
// Manifest: header "domain=<synthetic|target> size=<h>x<w>", then one
// relative sample path per line.
// ---------------------------------------------------------------------------

struct DatasetManifest {
  std::string domain;  // "synthetic" or "target"
  int height = 0, width = 0;
  std::vector<std::string> paths;  // relative to the manifest's directory
  std::filesystem::path base_dir;

  std::filesystem::path resolve(std::size_t i) const { return base_dir / paths[i]; }
};

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError(IoError::Kind::Open, "cannot write manifest: " + path.string());
  os << "domain=" << m.domain << " size=" << m.height << "x" << m.width << "\n";
  for (const auto& p : m.paths) os << p << "\n";
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(IoError::Kind::Open, "cannot open manifest: " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::string header;
  if (!std::getline(is, header)) throw IoError(IoError::Kind::Truncated, "empty manifest");
  char domain[32] = {0};
  int h = 0, w = 0;
  if (std::sscanf(header.c_str(), "domain=%31s size=%dx%d", domain, &h, &w) != 3)
    throw IoError(IoError::Kind::BadMagic, "malformed manifest header: " + header);
  m.domain = domain;
  m.height = h;
  m.width = w;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) m.paths.push_back(line);
  return m;
}

// Deterministic disjoint 80/20 split of manifest indices.
inline std::pair<std::vector<int>, std::vector<int>> split_train_test(std::size_t count,
                                                                      double train_fraction,
                                                                      std::uint64_t seed) {
  std::vector<int> indices(count);
  for (std::size_t i = 0; i < count; ++i) indices[i] = int(i);
  Rng rng = Rng::derived(seed, kStreamSplit);
  rng.shuffle(indices.begin(), indices.end());
  const std::size_t n_train = std::size_t(double(count) * train_fraction);
  return {std::vector<int>(indices.begin(), indices.begin() + n_train),
          std::vector<int>(indices.begin() + n_train, indices.end())};
}

// ---------------------------------------------------------------------------
// Augmentation: random left-right mirror, then a uniform integer translation
// applied identically to all four channels; vacated pixels become background
// (zero in scaled space).
// ---------------------------------------------------------------------------

// out = shift(flip(sample)); vacated pixels keep the zero background.
template <typename T>
Tensor<T> augment_apply(const Tensor<T>& sample, bool flip, int dx, int dy) {
  const Shape s = sample.shape();
  Tensor<T> out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
          const int sy = y - dy;
          int sx = x - dx;
          if (sy < 0 || sy >= s.h || sx < 0 || sx >= s.w) continue;
          if (flip) sx = s.w - 1 - sx;
          out.at(n, c, y, x) = sample.at(n, c, sy, sx);
        }
  return out;
}

template <typename T>
Tensor<T> augment(const Tensor<T>& sample, Rng& rng, int max_shift) {
  const Shape s = sample.shape();
  if (max_shift >= s.w || max_shift >= s.h) fail("augment: max_shift exceeds image extent");
  const bool flip = rng.bernoulli(0.5);
  const int dx = rng.uniform_int(-max_shift, max_shift);
  const int dy = rng.uniform_int(-max_shift, max_shift);
  return augment_apply(sample, flip, dx, dy);
}

// ---------------------------------------------------------------------------
// Toy dataset synthesizer
// ---------------------------------------------------------------------------

namespace detail {

struct Figure {
  double cx, cy;            // torso center
  double torso_rx, torso_ry;
  double head_r;
  double arm_angle[2], arm_len;
  double leg_spread, leg_len;
  double limb_r;
  double base_depth;
  std::uint8_t shirt[3], pants[3], skin[3];
};

inline Figure random_figure(int size, Rng& rng) {
  Figure f;
  const double s = size;
  f.cx = s * 0.5 + rng.uniform(-s * 0.02, s * 0.02);
  f.cy = s * 0.48 + rng.uniform(-s * 0.02, s * 0.02);
  f.torso_rx = s * rng.uniform(0.10, 0.15);
  f.torso_ry = s * rng.uniform(0.16, 0.22);
  f.head_r = s * rng.uniform(0.06, 0.085);
  f.arm_angle[0] = rng.uniform(0.35, 1.1);
  f.arm_angle[1] = rng.uniform(0.35, 1.1);
  f.arm_len = s * rng.uniform(0.14, 0.2);
  f.leg_spread = rng.uniform(0.12, 0.3);
  f.leg_len = s * rng.uniform(0.18, 0.26);
  f.limb_r = s * rng.uniform(0.022, 0.034);
  f.base_depth = rng.uniform(-0.15, 0.15);
  auto color = [&](std::uint8_t* c, int lo, int hi) {
    for (int i = 0; i < 3; ++i) c[i] = std::uint8_t(rng.uniform_int(lo, hi));
  };
  color(f.shirt, 60, 230);
  color(f.pants, 40, 180);
  f.skin[0] = std::uint8_t(rng.uniform_int(170, 235));
  f.skin[1] = std::uint8_t(rng.uniform_int(120, 190));
  f.skin[2] = std::uint8_t(rng.uniform_int(90, 160));
  return f;
}

inline double point_segment_dist(double px, double py, double ax, double ay, double bx,
                                 double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len_sq = vx * vx + vy * vy;
  double t = len_sq > 0 ? ((px - ax) * vx + (py - ay) * vy) / len_sq : 0.0;
  t = std::min(1.0, std::max(0.0, t));
  const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// body part id at a pixel: 0 none, 1 torso, 2 head, 3 arm, 4 leg
inline int figure_part(const Figure& f, double x, double y, double* roundness) {
  const double tx = (x - f.cx) / f.torso_rx, ty = (y - f.cy) / f.torso_ry;
  const double torso = tx * tx + ty * ty;
  if (torso <= 1.0) {
    *roundness = std::sqrt(1.0 - torso);
    return 1;
  }
  const double hy = f.cy - f.torso_ry - f.head_r * 0.9;
  const double hd = std::sqrt((x - f.cx) * (x - f.cx) + (y - hy) * (y - hy));
  if (hd <= f.head_r) {
    *roundness = std::sqrt(1.0 - (hd / f.head_r) * (hd / f.head_r));
    return 2;
  }
  for (int side = 0; side < 2; ++side) {
    const double sgn = side == 0 ? -1.0 : 1.0;
    const double ax = f.cx + sgn * f.torso_rx * 0.9;
    const double ay = f.cy - f.torso_ry * 0.55;
    const double bx = ax + sgn * f.arm_len * std::sin(f.arm_angle[side]);
    const double by = ay + f.arm_len * std::cos(f.arm_angle[side]);
    if (point_segment_dist(x, y, ax, ay, bx, by) <= f.limb_r) {
      *roundness = 0.5;
      return 3;
    }
  }
  for (int side = 0; side < 2; ++side) {
    const double sgn = side == 0 ? -1.0 : 1.0;
    const double ax = f.cx + sgn * f.torso_rx * 0.45;
    const double ay = f.cy + f.torso_ry * 0.9;
    const double bx = ax + sgn * f.leg_spread * f.leg_len;
    const double by = ay + f.leg_len;
    if (point_segment_dist(x, y, ax, ay, bx, by) <= f.limb_r * 1.2) {
      *roundness = 0.5;
      return 4;
    }
  }
  return 0;
}

inline bool is_background(const RawSample& raw, int y, int x) {
  return raw.depth[std::size_t(y) * raw.width + x] == -1.0f;
}

}  // namespace detail

// One clean figure render: colored body parts over a black background, depth
// centered around the figure's base depth with a gentle bulge toward the
// viewer at the body center.
inline RawSample synth_clean_sample(int size, Rng& rng) {
  const detail::Figure f = detail::random_figure(size, rng);
  RawSample raw;
  raw.height = raw.width = size;
  raw.rgb.assign(std::size_t(size) * size * 3, 0);
  raw.depth.assign(std::size_t(size) * size, -1.0f);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double roundness = 0.0;
      const int part = detail::figure_part(f, x + 0.5, y + 0.5, &roundness);
      if (part == 0) continue;
      const std::uint8_t* base = part == 1 ? f.shirt : part == 2 ? f.skin
                                 : part == 3 ? f.shirt : f.pants;
      const double shade = 0.82 + 0.18 * roundness;
      const std::size_t p = std::size_t(y) * size + x;
      for (int ch = 0; ch < 3; ++ch) {
        const int v = int(base[ch] * shade);
        raw.rgb[p * 3 + ch] = std::uint8_t(std::max(8, std::min(255, v)));
      }
      const double d = f.base_depth + 0.12 * roundness;
      raw.depth[p] = float(std::min(1.0, std::max(-0.999, d)));
    }
  return raw;
}

// Target-domain corruption: distance-dependent depth noise, scattered depth
// tails along silhouette edges, a small random tilt of the depth plane, and
// eroded extremities imitating non-ideal segmentation masks.
inline void apply_target_artifacts(RawSample& raw, Rng& rng) {
  const int size = raw.width;

  const double gx = rng.uniform(-0.25, 0.25) / size;
  const double gy = rng.uniform(-0.25, 0.25) / size;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const std::size_t p = std::size_t(y) * size + x;
      if (raw.depth[p] == -1.0f) continue;
      double d = raw.depth[p];
      d += gx * (x - size / 2.0) + gy * (y - size / 2.0);  // tilt
      const double distance = 1.0 - (d + 1.0) / 2.0;       // farther -> smaller centered depth
      d += rng.normal(0.0, 0.01 + 0.05 * distance);
      raw.depth[p] = float(std::min(1.0, std::max(-0.999, d)));
    }

  // tails: walk outward from silhouette pixels, receding in depth
  std::vector<std::pair<int, int>> edges;
  for (int y = 1; y + 1 < size; ++y)
    for (int x = 1; x + 1 < size; ++x) {
      if (detail::is_background(raw, y, x)) continue;
      if (detail::is_background(raw, y, x - 1) || detail::is_background(raw, y, x + 1) ||
          detail::is_background(raw, y - 1, x) || detail::is_background(raw, y + 1, x))
        edges.push_back({y, x});
    }
  for (auto [ey, ex] : edges) {
    if (!rng.bernoulli(0.35)) continue;
    const double angle = rng.uniform(0.0, 6.283185307179586);
    const double dir_x = std::cos(angle), dir_y = std::sin(angle);
    const int len = rng.uniform_int(1, std::max(2, size / 16));
    const std::size_t pe = std::size_t(ey) * size + ex;
    const float edge_depth = raw.depth[pe];
    for (int t = 1; t <= len; ++t) {
      const int x = ex + int(std::lround(dir_x * t));
      const int y = ey + int(std::lround(dir_y * t));
      if (x < 0 || x >= size || y < 0 || y >= size) break;
      const std::size_t p = std::size_t(y) * size + x;
      if (!detail::is_background(raw, y, x)) continue;
      const double recede = rng.uniform(0.05, 0.5) * t / len;
      raw.depth[p] = float(std::max(-0.999, edge_depth - recede));
      for (int ch = 0; ch < 3; ++ch)
        raw.rgb[p * 3 + ch] = std::uint8_t(std::max(6, raw.rgb[pe * 3 + ch] / 4));
    }
  }

  // eroded extremities: cut small discs at silhouette positions
  const int cuts = rng.uniform_int(1, 3);
  for (int i = 0; i < cuts && !edges.empty(); ++i) {
    auto [cy, cx] = edges[std::size_t(rng.uniform_int(0, int(edges.size()) - 1))];
    const int r = rng.uniform_int(1, std::max(2, size / 24));
    for (int y = std::max(0, cy - r); y <= std::min(size - 1, cy + r); ++y)
      for (int x = std::max(0, cx - r); x <= std::min(size - 1, cx + r); ++x)
        if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) {
          const std::size_t p = std::size_t(y) * size + x;
          raw.depth[p] = -1.0f;
          raw.rgb[p * 3] = raw.rgb[p * 3 + 1] = raw.rgb[p * 3 + 2] = 0;
        }
  }
}

// Writes n_per_domain samples for each domain under out_dir/synthetic and
// out_dir/target plus the two manifests; returns them.
inline std::pair<DatasetManifest, DatasetManifest> synth_toy_dataset(
    const std::filesystem::path& out_dir, int n_per_domain, int size, Rng& rng) {
  std::filesystem::create_directories(out_dir / "synthetic");
  std::filesystem::create_directories(out_dir / "target");
  DatasetManifest synthetic{"synthetic", size, size, {}, out_dir};
  DatasetManifest target{"target", size, size, {}, out_dir};
  char name[64];
  for (int i = 0; i < n_per_domain; ++i) {
    RawSample raw = synth_clean_sample(size, rng);
    std::snprintf(name, sizeof name, "synthetic/sample_%04d.vrgd", i);
    save_sample(out_dir / name, raw);
    synthetic.paths.push_back(name);
  }
  for (int i = 0; i < n_per_domain; ++i) {
    RawSample raw = synth_clean_sample(size, rng);
    apply_target_artifacts(raw, rng);
    std::snprintf(name, sizeof name, "target/sample_%04d.vrgd", i);
    save_sample(out_dir / name, raw);
    target.paths.push_back(name);
  }
  save_manifest(out_dir / "synthetic.manifest", synthetic);
  save_manifest(out_dir / "target.manifest", target);
  return {synthetic, target};
}

// Mean depth variance over pixels adjacent to the silhouette; the target
// domain's tails and noise push this up relative to the synthetic domain.
inline double edge_depth_variance(const RawSample& raw) {
  std::vector<double> values;
  for (int y = 1; y + 1 < raw.height; ++y)
    for (int x = 1; x + 1 < raw.width; ++x) {
      if (detail::is_background(raw, y, x)) continue;
      if (detail::is_background(raw, y, x - 1) || detail::is_background(raw, y, x + 1) ||
          detail::is_background(raw, y - 1, x) || detail::is_background(raw, y + 1, x))
        values.push_back(raw.depth[std::size_t(y) * raw.width + x]);
    }
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return var / double(values.size());
}

// Loads every sample in a manifest as a scaled (1, 4, h, w) tensor.
inline std::vector<Tensor<float>> load_scaled_dataset(const DatasetManifest& m) {
  std::vector<Tensor<float>> out;
  out.reserve(m.paths.size());
  for (std::size_t i = 0; i < m.paths.size(); ++i) {
    RawSample raw = load_sample(m.resolve(i));
    if (raw.height != m.height || raw.width != m.width)
      throw IoError(IoError::Kind::SizeMismatch, "sample size differs from manifest: " +
                                                     m.paths[i]);
    out.push_back(to_scaled(raw));
  }
  return out;
}

// Stacks (1, 4, h, w) samples into one (k, 4, h, w) batch.
inline Tensor<float> make_batch(const std::vector<Tensor<float>>& samples,
                                const std::vector<int>& indices) {
  if (indices.empty()) fail("make_batch: empty index list");
  const Shape s = samples[std::size_t(indices[0])].shape();
  Tensor<float> batch(Shape{int(indices.size()), s.c, s.h, s.w});
  const std::int64_t chw = std::int64_t(s.c) * s.h * s.w;
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy_n(samples[std::size_t(indices[i])].values().data(), chw,
                batch.values().data() + std::int64_t(i) * chw);
  return batch;
}

}  // namespace vologan
