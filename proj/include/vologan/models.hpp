#pragma once

// Configuration-driven model construction: the U-Net generator with
// depth-to-space upsampling, skip concatenations, spatial dropout and gated
// self-attention, and the three-headed (low-level / layout / content)
// discriminator. Both scale from toy size to full size through their
// configs. Every parameter lives in an ordered, uniquely named store that
// the optimizers, checkpoints and parameter counting work from.

#include <filesystem>

#include "vologan/nn.hpp"
#include "vologan/optim.hpp"

namespace vologan {

// ---------------------------------------------------------------------------
// Configs
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  int input_h = 512, input_w = 512;
  int in_channels = 4;
  int levels = 6;
  int base_channels = 16;
  int channel_cap = 512;
  int stem_kernel = 7;
  int body_kernel = 3;
  int attention_width = 32;          // decoder stage spatial width carrying attention
  std::int64_t attention_max_hw = 4096;
  int dropout_stages = 3;            // first decoder stages with spatial dropout
  double dropout_rate = 0.2;
  int block_size = 2;                // depth-to-space r
  double leaky_slope = 0.2;
  double in_eps = 1e-5;

  int channels_at(int level) const {
    const std::int64_t ch = std::int64_t(base_channels) << level;
    return int(std::min<std::int64_t>(ch, channel_cap));
  }

  void validate() const {
    if (levels < 1) fail("generator: levels must be >= 1");
    if (input_h % (1 << levels) != 0 || input_w % (1 << levels) != 0)
      fail("generator: input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
           " not divisible by 2^" + std::to_string(levels));
    if (base_channels < 1 || channel_cap < base_channels) fail("generator: bad channel plan");
    if (dropout_rate < 0 || dropout_rate >= 1) fail("generator: dropout rate outside [0, 1)");
    if (block_size != 2) fail("generator: depth-to-space block size must be 2");
    bool found = false;
    for (int k = 0; k < levels; ++k)
      if (input_w >> k == attention_width) found = true;
    if (!found)
      fail("generator: attention width " + std::to_string(attention_width) +
           " is not among the decoder stage widths");
  }
};

struct DiscriminatorConfig {
  int input_h = 512, input_w = 512;
  int in_channels = 4;
  int encoder_stages = 3;
  int base_channels = 16;
  int channel_cap = 512;
  int stem_kernel = 7;
  int body_kernel = 3;
  int layout_extra_stages = 1;       // extra downsampling in the layout branch
  double dropout_rate = 0.2;
  double leaky_slope = 0.2;
  double in_eps = 1e-5;
  std::int64_t attention_max_hw = 4096;

  int channels_at(int stage) const {
    const std::int64_t ch = std::int64_t(base_channels) << stage;
    return int(std::min<std::int64_t>(ch, channel_cap));
  }

  void validate() const {
    if (encoder_stages < 1) fail("discriminator: encoder stages must be >= 1");
    const int div = 1 << encoder_stages;
    if (input_h % div != 0 || input_w % div != 0)
      fail("discriminator: input size not divisible by 2^encoder_stages");
    if (dropout_rate < 0 || dropout_rate >= 1) fail("discriminator: dropout rate outside [0, 1)");
    const int enc_w = input_w >> encoder_stages;
    if (enc_w >> layout_extra_stages < 1) fail("discriminator: layout branch too deep");
  }
};

// ---------------------------------------------------------------------------
// Parameter store
// ---------------------------------------------------------------------------

struct ParamCounts {
  std::int64_t total = 0, trainable = 0, non_trainable = 0;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool trainable = true;
};

template <typename T>
class ParamStore {
 public:
  Tensor<T> add(const std::string& name, Tensor<T> value, bool trainable = true) {
    for (const auto& p : items_)
      if (p.name == name) fail("duplicate parameter name: " + name);
    value.set_requires_grad(trainable);
    items_.push_back({name, value, trainable});
    return value;
  }

  const std::vector<Parameter<T>>& items() const { return items_; }
  std::vector<Parameter<T>>& items() { return items_; }

  std::vector<Tensor<T>> trainable_tensors() const {
    std::vector<Tensor<T>> out;
    for (const auto& p : items_)
      if (p.trainable) out.push_back(p.value);
    return out;
  }

  std::vector<std::string> trainable_names() const {
    std::vector<std::string> out;
    for (const auto& p : items_)
      if (p.trainable) out.push_back(p.name);
    return out;
  }

  const Tensor<T>* find(const std::string& name) const {
    for (const auto& p : items_)
      if (p.name == name) return &p.value;
    return nullptr;
  }

  void clear_grads() {
    for (auto& p : items_) p.value.clear_grad();
  }

 private:
  std::vector<Parameter<T>> items_;
};

template <typename T>
ParamCounts count_parameters(const ParamStore<T>& store) {
  ParamCounts counts;
  for (const auto& p : store.items()) {
    counts.total += p.value.size();
    (p.trainable ? counts.trainable : counts.non_trainable) += p.value.size();
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Layer factory helpers. Weights draw from the fan-based uniform initializer,
// biases and instance-norm shifts start at zero, gains at one, and the
// spectral-norm u estimate registers as a non-trainable parameter.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
NormConv<T> make_norm_conv(ParamStore<T>& store, const std::string& name, int ci, int co,
                           int kernel, int stride, bool use_in, bool use_act, double slope,
                           double in_eps, InitKind init, Rng& rng) {
  NormConv<T> layer;
  layer.weight = store.add(name + ".weight",
                           init_conv_weight<T>(co, ci, kernel, kernel, init, slope, rng));
  layer.bias = store.add(name + ".bias", Tensor<T>(Shape{1, co, 1, 1}));
  layer.sn = make_spectral_state<T>(co, rng);
  layer.sn.u = store.add(name + ".sn_u", layer.sn.u, /*trainable=*/false);
  layer.stride = stride;
  layer.use_instance_norm = use_in;
  layer.use_activation = use_act;
  layer.slope = T(slope);
  layer.in_eps = T(in_eps);
  if (use_in) {
    layer.in_gain = store.add(name + ".in_gain", Tensor<T>(Shape{1, co, 1, 1}, T(1)));
    layer.in_bias = store.add(name + ".in_bias", Tensor<T>(Shape{1, co, 1, 1}));
  }
  return layer;
}

template <typename T>
struct PlainConv {
  Tensor<T> weight, bias;
};

template <typename T>
PlainConv<T> make_plain_conv(ParamStore<T>& store, const std::string& name, int ci, int co,
                             int kernel, InitKind init, double slope, Rng& rng) {
  PlainConv<T> layer;
  layer.weight = store.add(name + ".weight",
                           init_conv_weight<T>(co, ci, kernel, kernel, init, slope, rng));
  layer.bias = store.add(name + ".bias", Tensor<T>(Shape{1, co, 1, 1}));
  return layer;
}

template <typename T>
struct AttentionBlock {
  AttentionWeights<T> weights;
  AttentionGate<T> gate;
};

template <typename T>
AttentionBlock<T> make_attention(ParamStore<T>& store, const std::string& name, int channels,
                                 InitKind init, double slope, Rng& rng) {
  const int reduced = std::max(1, channels / 8);
  AttentionBlock<T> block;
  auto f = make_plain_conv(store, name + ".f", channels, reduced, 1, init, slope, rng);
  auto g = make_plain_conv(store, name + ".g", channels, reduced, 1, init, slope, rng);
  auto h = make_plain_conv(store, name + ".h", channels, channels, 1, init, slope, rng);
  block.weights = {f.weight, f.bias, g.weight, g.bias, h.weight, h.bias};
  block.gate.gamma = store.add(name + ".gamma", Tensor<T>(Shape{1, 1, 1, 1}));
  return block;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

template <typename T>
struct Generator {
  GeneratorConfig cfg;
  ParamStore<T> params;

  std::vector<NormConv<T>> enc_first, enc_second;  // per level
  std::vector<NormConv<T>> downs;                  // per level, stride 2
  std::vector<NormConv<T>> ups;                    // per decoder stage
  std::vector<NormConv<T>> dec_first, dec_second;  // per decoder stage
  detail::AttentionBlock<T> attention;
  int attention_stage = -1;  // decoder stage index whose output carries attention
  detail::PlainConv<T> head;

  Tensor<T> forward(const Tensor<T>& input, const Mode& mode) {
    const Shape s = input.shape();
    if (s.c != cfg.in_channels || s.h != cfg.input_h || s.w != cfg.input_w)
      fail("generator: input " + s.str() + " does not match configured " +
           std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w));

    std::vector<Tensor<T>> skips;
    Tensor<T> x = input;
    for (int level = 0; level < cfg.levels; ++level) {
      x = conv_block_gen(x, enc_first[level], enc_second[level], mode);
      skips.push_back(x);
      x = norm_conv_forward(x, downs[level], mode);
    }
    for (int stage = 0; stage < cfg.levels; ++stage) {
      const int level = cfg.levels - 1 - stage;
      x = norm_conv_forward(x, ups[stage], mode);
      x = depth_to_space(x, cfg.block_size);
      x = concat_channels(x, skips[level]);
      x = conv_block_gen(x, dec_first[stage], dec_second[stage], mode);
      if (stage < cfg.dropout_stages) x = spatial_dropout(x, T(cfg.dropout_rate), mode);
      if (stage == attention_stage)
        x = gated_self_attention(x, attention.weights, attention.gate, cfg.attention_max_hw);
    }
    x = conv2d(x, head.weight, head.bias, 1);
    return hard_sigmoid(x);
  }
};

template <typename T>
Generator<T> build_generator(const GeneratorConfig& cfg, InitKind init, Rng& rng) {
  cfg.validate();
  Generator<T> gen;
  gen.cfg = cfg;
  auto& store = gen.params;
  const double slope = cfg.leaky_slope, eps = cfg.in_eps;

  for (int level = 0; level < cfg.levels; ++level) {
    const int ci = level == 0 ? cfg.in_channels : cfg.channels_at(level);
    const int ch = cfg.channels_at(level);
    const int k_first = level == 0 ? cfg.stem_kernel : cfg.body_kernel;
    gen.enc_first.push_back(detail::make_norm_conv(store, "enc" + std::to_string(level) + ".a",
                                                   ci, ch, k_first, 1, true, true, slope, eps,
                                                   init, rng));
    gen.enc_second.push_back(detail::make_norm_conv(store, "enc" + std::to_string(level) + ".b",
                                                    ch, ch, cfg.body_kernel, 1, true, true, slope,
                                                    eps, init, rng));
    gen.downs.push_back(detail::make_norm_conv(store, "down" + std::to_string(level),
                                               ch, cfg.channels_at(level + 1), cfg.body_kernel, 2,
                                               false, false, slope, eps, init, rng));
  }
  const int r2 = cfg.block_size * cfg.block_size;
  for (int stage = 0; stage < cfg.levels; ++stage) {
    const int level = cfg.levels - 1 - stage;
    const int ci = stage == 0 ? cfg.channels_at(cfg.levels) : cfg.channels_at(level + 1);
    const int ch = cfg.channels_at(level);
    gen.ups.push_back(detail::make_norm_conv(store, "up" + std::to_string(stage), ci, ch * r2,
                                             cfg.body_kernel, 1, false, false, slope, eps, init,
                                             rng));
    gen.dec_first.push_back(detail::make_norm_conv(store, "dec" + std::to_string(stage) + ".a",
                                                   ch * 2, ch, cfg.body_kernel, 1, true, true,
                                                   slope, eps, init, rng));
    gen.dec_second.push_back(detail::make_norm_conv(store, "dec" + std::to_string(stage) + ".b",
                                                    ch, ch, cfg.body_kernel, 1, true, true, slope,
                                                    eps, init, rng));
    if (cfg.input_w >> level == cfg.attention_width) {
      gen.attention_stage = stage;
      gen.attention = detail::make_attention(store, "attention", ch, init, slope, rng);
    }
  }
  gen.head = detail::make_plain_conv(store, "head", cfg.channels_at(0), cfg.in_channels, 1, init,
                                     slope, rng);
  return gen;
}

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

template <typename T>
struct DiscriminatorOutputs {
  Tensor<T> lowlevel;  // (n, 1, h/2^stages, w/2^stages)
  Tensor<T> layout;    // (n, 1, ., .) spatial map
  Tensor<T> content;   // (n, 1, 1, 1) per-sample scalar
};

template <typename T>
struct Discriminator {
  DiscriminatorConfig cfg;
  ParamStore<T> params;

  NormConv<T> stem;
  std::vector<NormConv<T>> blocks, downs;
  detail::AttentionBlock<T> attention;
  detail::PlainConv<T> low_head;
  detail::PlainConv<T> layout_entry;       // collapses to one channel
  std::vector<NormConv<T>> layout_downs;   // 1 -> 1 channel, stride 2
  std::vector<NormConv<T>> content_downs;  // doubling channels until 1x1
  detail::PlainConv<T> content_head;

  DiscriminatorOutputs<T> forward(const Tensor<T>& input, const Mode& mode) {
    const Shape s = input.shape();
    if (s.c != cfg.in_channels || s.h != cfg.input_h || s.w != cfg.input_w)
      fail("discriminator: input " + s.str() + " does not match config");

    Tensor<T> x = norm_conv_forward(input, stem, mode);
    for (int stage = 0; stage < cfg.encoder_stages; ++stage) {
      x = conv_block_disc(x, blocks[stage], mode);
      x = norm_conv_forward(x, downs[stage], mode);
    }
    x = gated_self_attention(x, attention.weights, attention.gate, cfg.attention_max_hw);

    DiscriminatorOutputs<T> out;
    out.lowlevel = conv2d(x, low_head.weight, low_head.bias, 1);

    Tensor<T> layout = conv2d(x, layout_entry.weight, layout_entry.bias, 1);
    for (auto& down : layout_downs) {
      layout = standard_dropout(layout, T(cfg.dropout_rate), mode);
      layout = norm_conv_forward(layout, down, mode);
    }
    out.layout = layout;

    Tensor<T> content = x;
    for (auto& down : content_downs) {
      content = spatial_dropout(content, T(cfg.dropout_rate), mode);
      content = norm_conv_forward(content, down, mode);
    }
    content = mean_hw(content);  // global average pool to a per-sample vector
    out.content = conv2d(content, content_head.weight, content_head.bias, 1);
    return out;
  }
};

template <typename T>
Discriminator<T> build_discriminator(const DiscriminatorConfig& cfg, InitKind init, Rng& rng) {
  cfg.validate();
  Discriminator<T> disc;
  disc.cfg = cfg;
  auto& store = disc.params;
  const double slope = cfg.leaky_slope, eps = cfg.in_eps;

  disc.stem = detail::make_norm_conv(store, "stem", cfg.in_channels, cfg.channels_at(0),
                                     cfg.stem_kernel, 1, true, true, slope, eps, init, rng);
  for (int stage = 0; stage < cfg.encoder_stages; ++stage) {
    const int ch = cfg.channels_at(stage);
    disc.blocks.push_back(detail::make_norm_conv(store, "block" + std::to_string(stage), ch, ch,
                                                 cfg.body_kernel, 1, true, true, slope, eps, init,
                                                 rng));
    disc.downs.push_back(detail::make_norm_conv(store, "down" + std::to_string(stage), ch,
                                                cfg.channels_at(stage + 1), cfg.body_kernel, 2,
                                                false, false, slope, eps, init, rng));
  }
  const int enc_ch = cfg.channels_at(cfg.encoder_stages);
  disc.attention = detail::make_attention(store, "attention", enc_ch, init, slope, rng);
  disc.low_head = detail::make_plain_conv(store, "low_head", enc_ch, 1, 1, init, slope, rng);

  disc.layout_entry = detail::make_plain_conv(store, "layout_entry", enc_ch, 1, 1, init, slope,
                                              rng);
  for (int i = 0; i < cfg.layout_extra_stages; ++i)
    disc.layout_downs.push_back(detail::make_norm_conv(store, "layout_down" + std::to_string(i),
                                                       1, 1, cfg.body_kernel, 2, false, true,
                                                       slope, eps, init, rng));

  int width = cfg.input_w >> cfg.encoder_stages;
  int stage = cfg.encoder_stages;
  int ch = enc_ch;
  while (width > 1) {
    const int next = cfg.channels_at(stage + 1);
    disc.content_downs.push_back(
        detail::make_norm_conv(store, "content_down" + std::to_string(stage - cfg.encoder_stages),
                               ch, next, cfg.body_kernel, 2, false, true, slope, eps, init, rng));
    ch = next;
    width = (width + 1) / 2;
    ++stage;
  }
  disc.content_head = detail::make_plain_conv(store, "content_head", ch, 1, 1, init, slope, rng);
  return disc;
}

// ---------------------------------------------------------------------------
// Parameter-store checkpointing: a plain-text manifest plus one VTEN file
// per parameter. Round-trips are bit-exact.
// ---------------------------------------------------------------------------

inline void save_store(const ParamStore<float>& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) fail("cannot write manifest in " + dir.string());
  for (const auto& p : store.items()) {
    const Shape& s = p.value.shape();
    manifest << p.name << " " << s.n << " " << s.c << " " << s.h << " " << s.w << " "
             << (p.trainable ? 1 : 0) << "\n";
    write_vten((dir / (p.name + ".vten")).string(), p.value);
  }
}

inline void load_store(ParamStore<float>& store, const std::filesystem::path& dir) {
  for (auto& p : store.items()) {
    Tensor<float> loaded = read_vten((dir / (p.name + ".vten")).string());
    if (!(loaded.shape() == p.value.shape()))
      fail("checkpoint shape mismatch for " + p.name + ": " + loaded.shape().str() + " vs " +
           p.value.shape().str());
    p.value.values() = loaded.values();
  }
}

}  // namespace vologan
