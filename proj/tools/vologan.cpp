// Command-line entry point. Subcommands: dataset-synth, train, translate,
// eval {pca|hist|pointcloud}, gradcheck, inspect. Runs are driven by a JSON
// config; flags override file values and the fully resolved config is echoed
// into the run directory. Exit codes: 0 ok, 1 usage, 2 I/O, 3 numerical
// failure.

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "vologan/config.hpp"
#include "vologan/eval.hpp"
#include "vologan/gradcheck.hpp"
#include "vologan/losses.hpp"
#include "vologan/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;

using namespace vologan;

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) fail("missing --config");
  return load_config(path);
}

// ---------------------------------------------------------------------------
// dataset-synth
// ---------------------------------------------------------------------------

int cmd_dataset_synth(const std::string& out_dir, int n, int size, std::uint64_t seed,
                      int levels) {
  if (n < 1) {
    std::cerr << "dataset-synth: --n must be >= 1\n";
    return kExitUsage;
  }
  if (size < 8 || size % (1 << levels) != 0) {
    std::cerr << "dataset-synth: --size " << size << " must be divisible by 2^" << levels
              << " = " << (1 << levels) << " for the intended model\n";
    return kExitUsage;
  }
  Rng rng = Rng::derived(seed, kStreamSynth);
  auto [synthetic, target] = synth_toy_dataset(out_dir, n, size, rng);
  std::cout << "wrote " << synthetic.paths.size() << " synthetic + " << target.paths.size()
            << " target samples of " << size << "x" << size << " under " << out_dir << "\n";
  std::cout << "manifests: " << out_dir << "/synthetic.manifest, " << out_dir
            << "/target.manifest\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(RunConfig cfg, const std::string& resume_from) {
  auto synthetic = load_scaled_dataset(load_manifest(cfg.synthetic_manifest));
  auto target = load_scaled_dataset(load_manifest(cfg.target_manifest));

  TrainState<float> state =
      resume_from.empty()
          ? make_train_state<float>(cfg.generator_config(), cfg.discriminator_config(),
                                    cfg.train_settings())
          : load_checkpoint(resume_from, cfg.generator_config(), cfg.discriminator_config(),
                            cfg.train_settings());
  save_config(cfg, std::filesystem::path(cfg.checkpoint_dir) / "config.json");

  std::cout << "training " << cfg.epochs << " epochs, batch " << cfg.batch_size << ", seed "
            << cfg.seed;
  if (!resume_from.empty()) std::cout << ", resumed at epoch " << state.epoch;
  std::cout << "\n";

  TrainRun run = train(state, synthetic, target, cfg.checkpoint_dir, cfg.metrics_path);
  if (!run.train_rows.empty()) {
    const StepMetrics& last = run.train_rows.back();
    std::cout << "final: total_g=" << last.total_g << " total_d=" << last.total_d << "\n";
  }
  std::cout << "metrics: " << cfg.metrics_path << "\ncheckpoints: " << cfg.checkpoint_dir
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// translate
// ---------------------------------------------------------------------------

int cmd_translate(const RunConfig& cfg, const std::string& checkpoint,
                  const std::string& manifest_path, const std::string& out_dir,
                  const std::string& direction) {
  if (direction != "st" && direction != "ts") {
    std::cerr << "translate: --direction must be st or ts\n";
    return kExitUsage;
  }
  TrainState<float> state = load_checkpoint(checkpoint, cfg.generator_config(),
                                            cfg.discriminator_config(), cfg.train_settings());
  Generator<float>& generator = direction == "st" ? state.g_st : state.g_ts;

  DatasetManifest manifest = load_manifest(manifest_path);
  std::filesystem::create_directories(out_dir);
  DatasetManifest out_manifest{direction == "st" ? "target" : "synthetic", manifest.height,
                               manifest.width, {}, out_dir};
  // per-channel mean absolute difference to the input; on same-domain input
  // this is the identity-mapping inspection statistic
  std::array<double, 4> mad{};
  for (std::size_t i = 0; i < manifest.paths.size(); ++i) {
    Tensor<float> sample = to_scaled(load_sample(manifest.resolve(i)));
    Tensor<float> translated = translate(generator, sample);
    const Shape s = sample.shape();
    for (int c = 0; c < 4; ++c) {
      double acc = 0;
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
          acc += std::abs(double(translated.at(0, c, y, x)) - double(sample.at(0, c, y, x)));
      mad[std::size_t(c)] += acc / (double(s.h) * s.w * double(manifest.paths.size()));
    }
    char name[64];
    std::snprintf(name, sizeof name, "translated_%04zu.vrgd", i);
    save_sample(std::filesystem::path(out_dir) / name, from_scaled(translated));
    out_manifest.paths.push_back(name);
  }
  save_manifest(std::filesystem::path(out_dir) / "translated.manifest", out_manifest);
  std::cout << "translated " << manifest.paths.size() << " samples -> " << out_dir << "\n";
  std::cout << "mean |out - in| per channel: r " << mad[0] << ", g " << mad[1] << ", b "
            << mad[2] << ", d " << mad[3] << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval pca / hist / pointcloud
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> translate_flattened(Generator<float>& generator,
                                                     const std::vector<Tensor<float>>& samples,
                                                     int count) {
  std::vector<std::vector<double>> out;
  for (int i = 0; i < count && i < int(samples.size()); ++i)
    out.push_back(flatten_sample(translate(generator, samples[std::size_t(i)])));
  return out;
}

int cmd_eval_pca(const RunConfig& cfg, const std::string& checkpoint, int count, bool before,
                 bool after, const std::string& out_dir) {
  auto synthetic = load_scaled_dataset(load_manifest(cfg.synthetic_manifest));
  auto target = load_scaled_dataset(load_manifest(cfg.target_manifest));
  const int k = std::min<int>({count, int(synthetic.size()), int(target.size())});

  std::vector<std::vector<double>> real_vecs;
  for (int i = 0; i < k; ++i) real_vecs.push_back(flatten_sample(target[std::size_t(i)]));

  std::filesystem::create_directories(out_dir);
  // PCA basis is fit on the union of the real and generated sets
  auto report = [&](std::vector<std::vector<double>> gen_vecs, const std::string& tag) {
    std::vector<std::vector<double>> all = real_vecs;
    all.insert(all.end(), gen_vecs.begin(), gen_vecs.end());
    PcaModel model = pca_fit(all, 5);
    auto real_coords = pca_project(model, real_vecs);
    auto gen_coords = pca_project(model, gen_vecs);
    const double distance = domain_distance(real_coords, gen_coords);
    std::ostringstream meta;
    meta << "fit=union k=5 samples=" << k << "+" << k << " tag=" << tag
         << " explained_variance=";
    for (std::size_t i = 0; i < model.explained_variance.size(); ++i)
      meta << (i ? "/" : "") << model.explained_variance[i];
    write_scatter_csv(std::filesystem::path(out_dir) / ("pca_" + tag + ".csv"), real_coords,
                      gen_coords, meta.str());
    std::cout << "pca[" << tag << "] centroid distance = " << distance << "\n";
    return distance;
  };

  double dist_before = 0, dist_after = 0;
  if (before) {
    TrainState<float> fresh = make_train_state<float>(
        cfg.generator_config(), cfg.discriminator_config(), cfg.train_settings());
    dist_before = report(translate_flattened(fresh.g_st, synthetic, k), "before");
  }
  if (after) {
    TrainState<float> trained = load_checkpoint(checkpoint, cfg.generator_config(),
                                                cfg.discriminator_config(), cfg.train_settings());
    dist_after = report(translate_flattened(trained.g_st, synthetic, k), "after");
  }
  if (before && after)
    std::cout << "distance " << (dist_after < dist_before ? "decreased" : "did not decrease")
              << " after training\n";
  return kExitOk;
}

int cmd_eval_hist(const std::string& input, int bins, const std::string& out_csv) {
  Tensor<float> sample = to_scaled(load_sample(input));
  auto counts = channel_histogram(sample, bins);
  std::ofstream os(out_csv, std::ios::trunc);
  if (!os) fail("cannot write " + out_csv);
  os << "bin,r,g,b,d\n";
  for (int b = 0; b < bins; ++b) {
    os << b;
    for (int c = 0; c < 4; ++c) os << "," << counts[std::size_t(c)][std::size_t(b)];
    os << "\n";
  }
  std::cout << "histogram (" << bins << " bins) -> " << out_csv << "\n";
  return kExitOk;
}

int cmd_eval_pointcloud(const std::string& input, const std::string& out_ply, int stride) {
  Tensor<float> sample = to_scaled(load_sample(input));
  const std::int64_t vertices = pointcloud_export(sample, out_ply, stride);
  std::cout << vertices << " vertices -> " << out_ply << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck: finite-difference oracle over every layer and loss term
// ---------------------------------------------------------------------------

int cmd_gradcheck(int bits, double tolerance) {
  if (bits != 64 && bits != 32) {
    std::cerr << "gradcheck: --bits must be 32 or 64\n";
    return kExitUsage;
  }
  if (bits == 32) {
    std::cout << "note: 32-bit central differences are noisy; tolerance raised to 2e-2\n";
    tolerance = std::max(tolerance, 2e-2);
  }

  Rng rng(99);
  double worst = 0;
  std::string worst_name;
  auto check = [&](const std::string& name, const std::function<Tensor<double>()>& f,
                   std::vector<Tensor<double>> params) {
    auto result = finite_diff_check<double>(f, params, {}, 1e-4);
    std::cout << "  " << name << ": max rel err " << result.max_rel_error << "\n";
    if (result.max_rel_error > worst) {
      worst = result.max_rel_error;
      worst_name = name;
    }
  };

  auto random_tensor = [&](const Shape& s, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(s);
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
  };

  std::cout << "layer and loss gradient checks (64-bit, eps=1e-4):\n";
  {
    Tensor<double> x = random_tensor(Shape{2, 3, 5, 5});
    Tensor<double> w = random_tensor(Shape{4, 3, 3, 3});
    Tensor<double> b = random_tensor(Shape{1, 4, 1, 1});
    check("conv2d", [&] { return mean_all(square(conv2d(x, w, b, 1, ConvPad{1, 1, 1, 1}))); },
          {x, w, b});
  }
  {
    Tensor<double> x = random_tensor(Shape{1, 8, 3, 3});
    check("depth_to_space", [&] { return mean_all(square(depth_to_space(x, 2))); }, {x});
  }
  {
    Tensor<double> a = random_tensor(Shape{2, 2, 3, 4});
    Tensor<double> b = random_tensor(Shape{2, 2, 4, 2});
    check("matmul_batched", [&] { return mean_all(square(matmul_batched(a, b))); }, {a, b});
  }
  {
    Tensor<double> x = random_tensor(Shape{1, 2, 3, 5});
    check("softmax_rows", [&] { return mean_all(square(softmax_rows(x))); }, {x});
  }
  {
    Tensor<double> x = random_tensor(Shape{1, 3, 4, 4});
    check("reflection_pad",
          [&] { return mean_all(square(reflection_pad(x, PadSpec{1, 2, 2, 1}))); }, {x});
  }
  {
    Tensor<double> x = random_tensor(Shape{2, 3, 4, 4});
    Tensor<double> gain = random_tensor(Shape{1, 3, 1, 1}, 0.5, 1.5);
    Tensor<double> bias = random_tensor(Shape{1, 3, 1, 1});
    check("instance_norm", [&] { return mean_all(square(instance_norm(x, gain, bias))); },
          {x, gain, bias});
  }
  {
    Tensor<double> w = random_tensor(Shape{4, 2, 3, 3});
    SpectralNormState<double> sn = make_spectral_state<double>(4, rng);
    check("spectral_norm", [&] { return mean_all(square(spectral_norm_apply(w, sn, false))); },
          {w});
  }
  {
    // kink-free inputs for the piecewise-linear activations
    Tensor<double> x = random_tensor(Shape{2, 2, 3, 3});
    for (auto& v : x.values()) v += v >= 0 ? 0.1 : -0.1;
    check("leaky_relu", [&] { return mean_all(square(leaky_relu(x, 0.2))); }, {x});
    Tensor<double> h = random_tensor(Shape{2, 2, 3, 3}, -2.0, 2.0);
    for (auto& v : h.values())
      if (std::abs(std::abs(v) - 2.5) < 0.2) v *= 0.8;
    check("hard_sigmoid", [&] { return mean_all(square(hard_sigmoid(h))); }, {h});
  }
  {
    Shape s{1, 4, 4, 4};
    Tensor<double> x = random_tensor(s);
    AttentionWeights<double> w;
    w.f_weight = random_tensor(Shape{1, 4, 1, 1});
    w.f_bias = random_tensor(Shape{1, 1, 1, 1});
    w.g_weight = random_tensor(Shape{1, 4, 1, 1});
    w.g_bias = random_tensor(Shape{1, 1, 1, 1});
    w.h_weight = random_tensor(Shape{4, 4, 1, 1});
    w.h_bias = random_tensor(Shape{1, 4, 1, 1});
    AttentionGate<double> gate;
    gate.gamma = Tensor<double>::scalar(0.7);
    check("gated_self_attention",
          [&] { return mean_all(square(gated_self_attention(x, w, gate, 4096))); },
          {x, w.f_weight, w.f_bias, w.g_weight, w.g_bias, w.h_weight, w.h_bias, gate.gamma});
  }
  {
    Tensor<double> real = random_tensor(Shape{2, 1, 3, 3});
    Tensor<double> fake = random_tensor(Shape{2, 1, 3, 3});
    check("adv_loss_discriminator", [&] { return adv_loss_discriminator(real, fake); },
          {real, fake});
    check("adv_loss_generator", [&] { return adv_loss_generator(fake); }, {fake});
  }
  {
    Tensor<double> xp = random_tensor(Shape{1, 4, 3, 3});
    Tensor<double> yp = random_tensor(Shape{1, 4, 3, 3});
    Tensor<double> x0 = random_tensor(Shape{1, 4, 3, 3});
    Tensor<double> y0 = random_tensor(Shape{1, 4, 3, 3});
    check("pixel_loss_mae", [&] { return pixel_loss(xp, yp, x0, y0, 0, 10); }, {xp, yp});
    check("pixel_loss_mse", [&] { return pixel_loss(xp, yp, x0, y0, 11, 10); }, {xp, yp});
    check("channelwise_pixel",
          [&] {
            return channelwise_pixel(xp, yp, x0, y0, 0, 10, {1.0, 1.0, 1.0, 3.0});
          },
          {xp, yp});
  }
  {
    Tensor<double> x = random_tensor(Shape{1, 1, 4, 4}, 0.1, 0.9);
    Tensor<double> y = random_tensor(Shape{1, 1, 4, 4}, 0.1, 0.9);
    check("ssim", [&] { return ssim(x, y); }, {x, y});
    Tensor<double> s = random_tensor(Shape{1, 4, 4, 4}, 0.1, 0.9);
    Tensor<double> t = random_tensor(Shape{1, 4, 4, 4}, 0.1, 0.9);
    Tensor<double> cs = random_tensor(Shape{1, 4, 4, 4}, 0.1, 0.9);
    Tensor<double> ct = random_tensor(Shape{1, 4, 4, 4}, 0.1, 0.9);
    check("channelwise_ssim",
          [&] { return channelwise_ssim(s, t, cs, ct, {1.0, 1.0, 1.0, 3.0}); }, {cs, ct});
  }
  {
    Tensor<double> low = random_tensor(Shape{1, 1, 2, 2});
    Tensor<double> layout = random_tensor(Shape{1, 1, 2, 2});
    Tensor<double> content = random_tensor(Shape{1, 1, 1, 1});
    check("total_discriminator_loss",
          [&] {
            return total_discriminator_loss(mean_all(square(low)), mean_all(square(layout)),
                                            mean_all(square(content)));
          },
          {low, layout, content});
  }
  {
    // whole toy generator driven by the combined weighted objective
    GeneratorConfig gcfg;
    gcfg.input_h = gcfg.input_w = 8;
    gcfg.levels = 2;
    gcfg.base_channels = 2;
    gcfg.attention_width = 4;
    Generator<double> gen = build_generator<double>(gcfg, InitKind::GlorotUniform, rng);
    Tensor<double> x = random_tensor(Shape{1, 4, 8, 8}, 0.05, 0.95);
    LossWeights weights;
    auto f = [&] {
      Tensor<double> y = gen.forward(x, Mode::eval());
      GeneratorLossParts<double> parts;
      parts.adv = adv_loss_generator(y);
      parts.cyc = channelwise_pixel(y, y, x, x, 0, 10, weights.lambda_channel);
      parts.ide = channelwise_pixel(y, y, x, x, 11, 10, weights.lambda_channel);
      parts.ssim = channelwise_ssim(x, x, y, y, weights.lambda_channel);
      return total_generator_loss(parts, weights).total_tensor;
    };
    std::vector<Tensor<double>> params;
    for (auto& p : gen.params.items())
      if (p.trainable) params.push_back(p.value);
    check("generator_total_loss", f, params);
  }

  std::cout << "worst: " << worst_name << " at " << worst << " (tolerance " << tolerance
            << ")\n";
  if (!(worst < tolerance)) {
    std::cerr << "gradcheck FAILED\n";
    return kExitNumerical;
  }
  std::cout << "gradcheck OK\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// inspect: parameter table and totals next to the full-scale reference counts
// ---------------------------------------------------------------------------

int cmd_inspect(const RunConfig& cfg, bool show_layers) {
  TrainState<float> state = make_train_state<float>(cfg.generator_config(),
                                                    cfg.discriminator_config(),
                                                    cfg.train_settings());
  auto print_model = [&](const char* name, const ParamStore<float>& store,
                         std::int64_t ref_total, std::int64_t ref_non_trainable) {
    if (show_layers) {
      std::cout << name << " layers:\n";
      for (const auto& p : store.items())
        std::cout << "  " << p.name << "  " << p.value.shape().str() << "  " << p.value.size()
                  << (p.trainable ? "" : "  (non-trainable)") << "\n";
    }
    ParamCounts counts = count_parameters(store);
    std::cout << name << ": total " << counts.total << " (trainable " << counts.trainable
              << ", non-trainable " << counts.non_trainable << ")\n";
    std::cout << "  full-scale reference: total " << ref_total << " (non-trainable "
              << ref_non_trainable << "), delta " << counts.total - ref_total << "\n";
  };
  print_model("generator", state.g_st.params, 39390917, 14276);
  print_model("discriminator", state.d_t.params, 9385686, 5640);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VoloGAN: RGB-D domain adaptation with a CycleGAN framework"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "data/toy", checkpoint, manifest_path, direction = "st";
  std::string input_path, out_csv = "hist.csv", out_ply = "cloud.ply", resume_from;
  std::uint64_t seed = 1;
  int n = 64, size = 64, levels = 4, bins = 64, stride = 2, count = 50, bits = 64;
  int epochs = -1, batch_size = -1;
  double tolerance = 1e-3;
  bool before = false, after = false, show_layers = false;

  auto* synth = app.add_subcommand("dataset-synth", "synthesize the two-domain toy dataset");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--n", n, "samples per domain");
  synth->add_option("--size", size, "image height and width");
  synth->add_option("--seed", seed, "random seed");
  synth->add_option("--levels", levels, "model levels the size must support");

  auto* train_cmd = app.add_subcommand("train", "run the training loop");
  train_cmd->add_option("--config", config_path, "JSON run config")->required();
  train_cmd->add_option("--resume", resume_from, "checkpoint directory to resume from");
  train_cmd->add_option("--seed", seed, "override config seed");
  train_cmd->add_option("--epochs", epochs, "override config epochs");
  train_cmd->add_option("--batch-size", batch_size, "override config batch size");

  auto* translate_cmd = app.add_subcommand("translate", "translate a manifest of samples");
  translate_cmd->add_option("--config", config_path)->required();
  translate_cmd->add_option("--checkpoint", checkpoint)->required();
  translate_cmd->add_option("--manifest", manifest_path)->required();
  translate_cmd->add_option("--out", out_dir)->required();
  translate_cmd->add_option("--direction", direction, "st (synthetic->target) or ts");

  auto* eval_cmd = app.add_subcommand("eval", "evaluation tools");
  eval_cmd->require_subcommand(1);
  auto* pca_cmd = eval_cmd->add_subcommand("pca", "PCA domain comparison");
  pca_cmd->add_option("--config", config_path)->required();
  pca_cmd->add_option("--checkpoint", checkpoint);
  pca_cmd->add_option("--count", count, "samples per set");
  pca_cmd->add_option("--out", out_dir, "scatter CSV directory");
  pca_cmd->add_flag("--before", before, "evaluate the untrained generator");
  pca_cmd->add_flag("--after", after, "evaluate the checkpointed generator");
  auto* hist_cmd = eval_cmd->add_subcommand("hist", "per-channel histograms");
  hist_cmd->add_option("--input", input_path)->required();
  hist_cmd->add_option("--bins", bins);
  hist_cmd->add_option("--out", out_csv);
  auto* cloud_cmd = eval_cmd->add_subcommand("pointcloud", "export a colored PLY point cloud");
  cloud_cmd->add_option("--input", input_path)->required();
  cloud_cmd->add_option("--out", out_ply);
  cloud_cmd->add_option("--stride", stride);

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference oracle suite");
  gradcheck_cmd->add_option("--bits", bits, "32 or 64");
  gradcheck_cmd->add_option("--tolerance", tolerance);

  auto* inspect_cmd = app.add_subcommand("inspect", "parameter counts and layer table");
  inspect_cmd->add_option("--config", config_path)->required();
  inspect_cmd->add_flag("--layers", show_layers, "print the per-parameter table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_dataset_synth(out_dir, n, size, seed, levels);
    if (train_cmd->parsed()) {
      RunConfig cfg = load_run_config(config_path);
      if (train_cmd->count("--seed")) cfg.seed = seed;
      if (epochs >= 0) cfg.epochs = epochs;
      if (batch_size > 0) cfg.batch_size = batch_size;
      cfg.validate();
      return cmd_train(cfg, resume_from);
    }
    if (translate_cmd->parsed())
      return cmd_translate(load_run_config(config_path), checkpoint, manifest_path, out_dir,
                           direction);
    if (pca_cmd->parsed()) {
      if (!before && !after) before = after = true;
      if (after && checkpoint.empty()) {
        std::cerr << "eval pca: --after requires --checkpoint\n";
        return kExitUsage;
      }
      return cmd_eval_pca(load_run_config(config_path), checkpoint, count, before, after,
                          out_dir);
    }
    if (hist_cmd->parsed()) return cmd_eval_hist(input_path, bins, out_csv);
    if (cloud_cmd->parsed()) return cmd_eval_pointcloud(input_path, out_ply, stride);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(bits, tolerance);
    if (inspect_cmd->parsed()) return cmd_inspect(load_run_config(config_path), show_layers);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    if (what.find("non-finite") != std::string::npos) return kExitNumerical;
    if (what.find("cannot open") != std::string::npos ||
        what.find("cannot write") != std::string::npos ||
        what.find("truncated") != std::string::npos ||
        what.find("bad magic") != std::string::npos)
      return kExitIo;
    return kExitUsage;
  }
  return kExitUsage;
}
