#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "vologan/gradcheck.hpp"
#include "vologan/losses.hpp"
#include "vologan/models.hpp"

using namespace vologan;

namespace {

GeneratorConfig toy_gen_cfg(int size = 64, int levels = 4, int base = 8) {
  GeneratorConfig cfg;
  cfg.input_h = cfg.input_w = size;
  cfg.levels = levels;
  cfg.base_channels = base;
  cfg.attention_width = size / 2;
  return cfg;
}

DiscriminatorConfig toy_disc_cfg(int size = 64, int base = 8) {
  DiscriminatorConfig cfg;
  cfg.input_h = cfg.input_w = size;
  cfg.base_channels = base;
  return cfg;
}

Tensor<float> random_input(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t(s);
  for (auto& v : t.values()) v = float(rng.uniform());
  return t;
}

}  // namespace

TEST(Generator, ToyForwardPreservesShapeAndRange) {
  Rng rng(1);
  Generator<float> gen = build_generator<float>(toy_gen_cfg(), InitKind::GlorotUniform, rng);
  Tensor<float> x = random_input(Shape{1, 4, 64, 64}, 2);
  Tensor<float> y = gen.forward(x, Mode::eval());
  EXPECT_EQ(y.shape(), x.shape());
  for (float v : y.values()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

TEST(Generator, BottleneckWidthFollowsLevels) {
  // six levels halve 512 down to a bottleneck spatial width of 8
  GeneratorConfig cfg = toy_gen_cfg(512, 6, 4);
  cfg.attention_width = 32;
  EXPECT_EQ(cfg.input_w >> cfg.levels, 8);
  cfg.validate();
}

TEST(Generator, AttentionWidthMustExistAmongDecoderStages) {
  GeneratorConfig cfg = toy_gen_cfg(64, 3, 8);
  cfg.attention_width = 7;
  EXPECT_THROW(cfg.validate(), std::runtime_error);
  cfg.attention_width = 16;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Generator, InputSizeMustBeDivisible) {
  GeneratorConfig cfg = toy_gen_cfg(60, 3, 8);
  cfg.attention_width = 30;
  EXPECT_THROW(cfg.validate(), std::runtime_error);
}

TEST(Generator, SameSeedBitwiseIdenticalForward) {
  Rng rng_a(3), rng_b(3);
  Generator<float> a = build_generator<float>(toy_gen_cfg(32, 3, 4), InitKind::GlorotUniform,
                                              rng_a);
  Generator<float> b = build_generator<float>(toy_gen_cfg(32, 3, 4), InitKind::GlorotUniform,
                                              rng_b);
  Tensor<float> x = random_input(Shape{2, 4, 32, 32}, 4);
  Rng drop_a(5), drop_b(5);
  Tensor<float> ya = a.forward(x, Mode::train(drop_a));
  Tensor<float> yb = b.forward(x, Mode::train(drop_b));
  EXPECT_EQ(std::memcmp(ya.values().data(), yb.values().data(),
                        ya.values().size() * sizeof(float)),
            0);
}

TEST(Generator, EvalOutputIndependentOfRng) {
  Rng rng(7);
  Generator<float> gen = build_generator<float>(toy_gen_cfg(32, 3, 4), InitKind::GlorotUniform,
                                                rng);
  Tensor<float> x = random_input(Shape{1, 4, 32, 32}, 8);
  Tensor<float> first = gen.forward(x, Mode::eval());
  Tensor<float> second = gen.forward(x, Mode::eval());
  EXPECT_EQ(std::memcmp(first.values().data(), second.values().data(),
                        first.values().size() * sizeof(float)),
            0);
}

TEST(Generator, SkipConnectionsCarryEncoderInformation) {
  // zeroing all skip inputs (decoder-side concat halves) changes the output:
  // information flows through the skips, not only the bottleneck
  Rng rng(9);
  GeneratorConfig cfg = toy_gen_cfg(16, 2, 4);
  cfg.attention_width = 8;
  cfg.dropout_stages = 0;
  Generator<float> gen = build_generator<float>(cfg, InitKind::GlorotUniform, rng);
  Tensor<float> x = random_input(Shape{1, 4, 16, 16}, 10);
  Tensor<float> baseline = gen.forward(x, Mode::eval());

  // rebuild with dec_first weights zeroed on the skip half of the input
  // channels; equivalent to severing the concatenated encoder features
  for (int stage = 0; stage < cfg.levels; ++stage) {
    auto& w = gen.dec_first[std::size_t(stage)].weight;
    const Shape s = w.shape();
    for (int co = 0; co < s.n; ++co)
      for (int ci = s.c / 2; ci < s.c; ++ci)
        for (int kh = 0; kh < s.h; ++kh)
          for (int kw = 0; kw < s.w; ++kw) w.at(co, ci, kh, kw) = 0.0f;
  }
  Tensor<float> severed = gen.forward(x, Mode::eval());
  double diff = 0;
  for (std::size_t i = 0; i < baseline.values().size(); ++i)
    diff += std::abs(double(baseline.values()[i]) - double(severed.values()[i]));
  EXPECT_GT(diff, 1e-3);
}

TEST(Discriminator, ToyHeadShapes) {
  Rng rng(11);
  Discriminator<float> disc = build_discriminator<float>(toy_disc_cfg(), InitKind::GlorotUniform,
                                                         rng);
  Tensor<float> x = random_input(Shape{2, 4, 64, 64}, 12);
  DiscriminatorOutputs<float> out = disc.forward(x, Mode::eval());
  EXPECT_EQ(out.lowlevel.shape(), (Shape{2, 1, 8, 8}));
  EXPECT_EQ(out.layout.shape(), (Shape{2, 1, 4, 4}));
  EXPECT_EQ(out.content.shape(), (Shape{2, 1, 1, 1}));
}

TEST(Discriminator, AllHeadsDifferentiable) {
  Rng rng(13);
  DiscriminatorConfig cfg = toy_disc_cfg(16, 2);
  cfg.encoder_stages = 2;
  cfg.stem_kernel = 3;
  Discriminator<double> disc = build_discriminator<double>(cfg, InitKind::GlorotUniform, rng);
  Tensor<double> real(Shape{1, 4, 16, 16});
  Tensor<double> fake(Shape{1, 4, 16, 16});
  Rng data_rng(14);
  for (auto& v : real.values()) v = data_rng.uniform();
  for (auto& v : fake.values()) v = data_rng.uniform();

  auto f = [&] {
    auto r = disc.forward(real, Mode::eval());
    auto k = disc.forward(fake, Mode::eval());
    return total_discriminator_loss(adv_loss_discriminator(r.lowlevel, k.lowlevel),
                                    adv_loss_discriminator(r.layout, k.layout),
                                    adv_loss_discriminator(r.content, k.content));
  };
  std::vector<Tensor<double>> params;
  for (auto& p : disc.params.items())
    if (p.trainable) params.push_back(p.value);
  auto result = finite_diff_check<double>(f, params);
  EXPECT_LT(result.max_rel_error, 1e-3);
}

TEST(CountParameters, SpectralNormContributesU) {
  Rng rng(15);
  ParamStore<float> store;
  detail::make_norm_conv<float>(store, "conv", 3, 16, 3, 1, false, false, 0.2, 1e-5,
                                InitKind::GlorotUniform, rng);
  ParamCounts counts = count_parameters(store);
  EXPECT_EQ(counts.non_trainable, 16);  // u has length co
  EXPECT_EQ(counts.trainable, 16 * 3 * 3 * 3 + 16);
  EXPECT_EQ(counts.total, counts.trainable + counts.non_trainable);
}

TEST(CountParameters, MatchesShapeEnumerationOracle) {
  Rng seed_rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const int levels = seed_rng.uniform_int(2, 4);
    const int size = 16 << seed_rng.uniform_int(0, 2);
    GeneratorConfig gcfg = toy_gen_cfg(size, levels, 2 << seed_rng.uniform_int(0, 2));
    gcfg.attention_width = size >> seed_rng.uniform_int(0, levels - 1);
    gcfg.channel_cap = 8 << seed_rng.uniform_int(0, 3);
    gcfg.channel_cap = std::max(gcfg.channel_cap, gcfg.base_channels);
    Rng rng(seed_rng.next_u64());
    Generator<float> gen = build_generator<float>(gcfg, InitKind::GlorotUniform, rng);
    ParamCounts counts = count_parameters(gen.params);
    oracle::CountedModel expected = oracle::generator_count(gcfg);
    ASSERT_EQ(counts.total, expected.total) << "generator rep " << rep;
    ASSERT_EQ(counts.trainable, expected.trainable);
    ASSERT_EQ(counts.non_trainable, expected.non_trainable);

    DiscriminatorConfig dcfg = toy_disc_cfg(size, 2 << seed_rng.uniform_int(0, 2));
    dcfg.encoder_stages = std::min(3, levels);
    Discriminator<float> disc = build_discriminator<float>(dcfg, InitKind::GlorotUniform, rng);
    ParamCounts disc_counts = count_parameters(disc.params);
    oracle::CountedModel disc_expected = oracle::discriminator_count(dcfg);
    ASSERT_EQ(disc_counts.total, disc_expected.total) << "discriminator rep " << rep;
    ASSERT_EQ(disc_counts.non_trainable, disc_expected.non_trainable);
  }
}

TEST(CountParameters, ZeroSpectralNormLayersMeansZeroNonTrainable) {
  Rng rng(19);
  ParamStore<float> store;
  detail::make_plain_conv<float>(store, "head", 8, 4, 1, InitKind::GlorotUniform, 0.2, rng);
  EXPECT_EQ(count_parameters(store).non_trainable, 0);
}

TEST(CountParameters, DoublingBaseChannelsIncreasesCount) {
  Rng rng(21);
  GeneratorConfig small = toy_gen_cfg(32, 3, 4);
  GeneratorConfig big = toy_gen_cfg(32, 3, 8);
  Generator<float> a = build_generator<float>(small, InitKind::GlorotUniform, rng);
  Generator<float> b = build_generator<float>(big, InitKind::GlorotUniform, rng);
  EXPECT_GT(count_parameters(b.params).total, count_parameters(a.params).total);
}

TEST(ParamStore, RejectsDuplicateNames) {
  ParamStore<float> store;
  store.add("w", Tensor<float>(Shape{1, 1, 1, 1}));
  EXPECT_THROW(store.add("w", Tensor<float>(Shape{1, 1, 1, 1})), std::runtime_error);
}

TEST(Checkpoint, StoreRoundTripIsBitExact) {
  Rng rng(23);
  GeneratorConfig cfg = toy_gen_cfg(16, 2, 4);
  cfg.attention_width = 8;
  Generator<float> gen = build_generator<float>(cfg, InitKind::GlorotUniform, rng);
  const auto dir = std::filesystem::temp_directory_path() / "vologan_store_test";
  std::filesystem::remove_all(dir);
  save_store(gen.params, dir);

  Rng rng2(99);  // different init, then restored from disk
  Generator<float> other = build_generator<float>(cfg, InitKind::GlorotUniform, rng2);
  load_store(other.params, dir);
  for (std::size_t i = 0; i < gen.params.items().size(); ++i) {
    const auto& a = gen.params.items()[i].value;
    const auto& b = other.params.items()[i].value;
    ASSERT_EQ(std::memcmp(a.values().data(), b.values().data(),
                          a.values().size() * sizeof(float)),
              0)
        << gen.params.items()[i].name;
  }
  Tensor<float> x = random_input(Shape{1, 4, 16, 16}, 24);
  Tensor<float> ya = gen.forward(x, Mode::eval());
  Tensor<float> yb = other.forward(x, Mode::eval());
  EXPECT_EQ(std::memcmp(ya.values().data(), yb.values().data(),
                        ya.values().size() * sizeof(float)),
            0);
  std::filesystem::remove_all(dir);
}

TEST(Generator, OutputChannelCountIsFour) {
  Rng rng(25);
  GeneratorConfig cfg = toy_gen_cfg(16, 2, 4);
  cfg.attention_width = 8;
  Generator<float> gen = build_generator<float>(cfg, InitKind::GlorotUniform, rng);
  EXPECT_EQ(gen.forward(random_input(Shape{3, 4, 16, 16}, 26), Mode::eval()).shape().c, 4);
}
