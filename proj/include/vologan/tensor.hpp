#pragma once

// Dense 4-d tensors laid out as (batch, channel, height, width) with
// reverse-mode differentiation. Ops record backward closures on an explicit
// Tape; calling Tape::backward replays them in reverse execution order and
// accumulates (+=) into per-tensor gradient buffers.
//
// Training runs in float; gradient checking instantiates the same templates
// with double, where central differences are trustworthy.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vologan {

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  std::int64_t size() const {
    return std::int64_t(n) * c * h * w;
  }
  bool operator==(const Shape& o) const = default;

  std::string str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Worker threads. Parallel regions split disjoint output ranges statically,
// so results are bitwise reproducible for a fixed thread count.
// ---------------------------------------------------------------------------

inline int& thread_count() {
  static int count = [] {
    const char* env = std::getenv("VOLO_THREADS");
    if (env == nullptr) return 1;
    int v = std::atoi(env);
    return v >= 1 ? v : 1;
  }();
  return count;
}

template <class Body>
void parallel_for(std::int64_t count, Body&& body) {
  const int threads = thread_count();
  if (threads <= 1 || count < 2) {
    body(std::int64_t(0), count);
    return;
  }
  const int used = int(std::min<std::int64_t>(threads, count));
  const std::int64_t chunk = (count + used - 1) / used;
  std::vector<std::thread> pool;
  pool.reserve(used - 1);
  for (int t = 1; t < used; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min<std::int64_t>(lo + chunk, count);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  body(std::int64_t(0), std::min<std::int64_t>(chunk, count));
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

template <typename T>
class Tensor {
  struct Payload {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;  // allocated lazily on first backward touch
    bool requires_grad = false;
  };

 public:
  Tensor() = default;

  explicit Tensor(const Shape& s, T fill = T(0)) : p_(std::make_shared<Payload>()) {
    if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0)
      fail("tensor shape must be positive, got " + s.str());
    p_->shape = s;
    p_->values.assign(std::size_t(s.size()), fill);
  }

  static Tensor from_values(const Shape& s, std::vector<T> values) {
    Tensor t(s);
    if (std::int64_t(values.size()) != s.size())
      fail("value count " + std::to_string(values.size()) + " does not match shape " + s.str());
    t.p_->values = std::move(values);
    return t;
  }

  static Tensor scalar(T v) {
    Tensor t(Shape{1, 1, 1, 1});
    t.p_->values[0] = v;
    return t;
  }

  bool valid() const { return p_ != nullptr; }
  const Shape& shape() const { return p_->shape; }
  std::int64_t size() const { return p_->shape.size(); }

  const std::vector<T>& values() const { return p_->values; }
  std::vector<T>& values() { return p_->values; }

  T at(int n, int c, int h, int w) const { return p_->values[index(n, c, h, w)]; }
  T& at(int n, int c, int h, int w) { return p_->values[index(n, c, h, w)]; }

  std::size_t index(int n, int c, int h, int w) const {
    const Shape& s = p_->shape;
    return ((std::size_t(n) * s.c + c) * s.h + h) * s.w + w;
  }

  bool requires_grad() const { return p_ && p_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    p_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return p_ && !p_->grad.empty(); }
  const std::vector<T>& grad() const { return p_->grad; }

  std::vector<T>& ensure_grad() {
    if (p_->grad.empty()) p_->grad.assign(p_->values.size(), T(0));
    return p_->grad;
  }
  void clear_grad() {
    if (p_) p_->grad.clear();
  }

  // Same values, no gradient tracking and no link to the recorded graph.
  Tensor detach() const {
    Tensor t(p_->shape);
    t.p_->values = p_->values;
    return t;
  }

  Tensor clone() const {
    Tensor t = detach();
    t.p_->requires_grad = p_->requires_grad;
    return t;
  }

  bool all_finite() const {
    for (T v : p_->values)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  bool same_payload(const Tensor& o) const { return p_ == o.p_; }

 private:
  std::shared_ptr<Payload> p_;
};

// ---------------------------------------------------------------------------
// Tape: the ordered record of executed ops. Constructing a Tape makes it the
// active recorder for the current thread; destruction restores the previous
// one, so scopes nest naturally.
// ---------------------------------------------------------------------------

template <typename T>
class Tape {
 public:
  Tape() : prev_(current()) { current() = this; }
  ~Tape() { current() = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape*& current() {
    thread_local Tape* active = nullptr;
    return active;
  }
  static bool recording() { return current() != nullptr; }

  void record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
  }

  std::size_t step_count() const { return steps_.size(); }

  // Seeds d(root)/d(root) = 1 and replays the record backwards. A tape can
  // be consumed once; grads accumulate, so callers clear them between tapes.
  void backward(Tensor<T>& root) {
    if (spent_) fail("tape already consumed by a previous backward pass");
    if (root.size() != 1) fail("backward root must be a scalar, got " + root.shape().str());
    if (!std::isfinite(double(root.values()[0]))) fail("backward root is not finite");
    spent_ = true;
    root.ensure_grad()[0] = T(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> steps_;
  bool spent_ = false;
  Tape* prev_ = nullptr;
};

// True when an op executed now should be recorded for these inputs.
template <typename T>
bool track(std::initializer_list<const Tensor<T>*> inputs) {
  if (!Tape<T>::recording()) return false;
  for (const Tensor<T>* t : inputs)
    if ((*t).requires_grad()) return true;
  return false;
}

// ---------------------------------------------------------------------------
// VTEN serialization: magic "VTEN", four u32 little-endian shape fields,
// then raw little-endian f32 data. Used for every checkpointed tensor.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
      (std::uint32_t(b[3]) << 24);
  return true;
}

}  // namespace detail

inline void write_vten(const std::string& path, const Tensor<float>& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail("cannot open for writing: " + path);
  os.write("VTEN", 4);
  const Shape& s = t.shape();
  detail::put_u32(os, std::uint32_t(s.n));
  detail::put_u32(os, std::uint32_t(s.c));
  detail::put_u32(os, std::uint32_t(s.h));
  detail::put_u32(os, std::uint32_t(s.w));
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(t.values().data()),
           std::streamsize(t.values().size() * sizeof(float)));
  if (!os) fail("write failed: " + path);
}

inline Tensor<float> read_vten(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "VTEN", 4) != 0)
    fail("bad magic in tensor file: " + path);
  std::uint32_t n, c, h, w;
  if (!detail::get_u32(is, n) || !detail::get_u32(is, c) || !detail::get_u32(is, h) ||
      !detail::get_u32(is, w))
    fail("truncated tensor header: " + path);
  Shape s{int(n), int(c), int(h), int(w)};
  Tensor<float> t(s);
  if (!is.read(reinterpret_cast<char*>(t.values().data()),
               std::streamsize(t.values().size() * sizeof(float))))
    fail("truncated tensor payload: " + path);
  return t;
}

}  // namespace vologan
