#pragma once

// Run configuration: a strict JSON schema covering model shapes, loss
// weights, schedules, optimizer constants and run parameters. Unknown keys
// are rejected; defaults match the published full-scale training recipe
// (lambda_cyc=10, lambda_ide=0.5, lambda_ssim=1, depth weight 3, NADAM
// beta1=0.5/beta2=0.99, SGD momentum 0.9, lr 2e-4/1e-4, warmup 10 of 80
// epochs, dropout 0.2, depth-to-space block size 2, batch size 8).

#include <fstream>
#include <set>

#include <json.hpp>

#include "vologan/train.hpp"

namespace vologan {

struct RunConfig {
  std::uint64_t seed = 1;
  int epochs = 80;
  int batch_size = 8;
  int image_size = 512;
  int checkpoint_every = 5;
  int max_shift = 0;  // 0 -> 10% of width
  std::string synthetic_manifest = "data/synthetic.manifest";
  std::string target_manifest = "data/target.manifest";
  std::string checkpoint_dir = "runs/default";
  std::string metrics_path = "runs/default/metrics.csv";
  std::string init = "glorot_uniform";  // or "he_uniform"
  std::string update_order = "generators_first";

  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  LossWeights loss;
  ScheduleSpec schedule_g{2e-4, 10, 80};
  ScheduleSpec schedule_d{1e-4, 10, 80};
  OptimizerHyper optim;

  InitKind init_kind() const {
    if (init == "glorot_uniform") return InitKind::GlorotUniform;
    if (init == "he_uniform") return InitKind::HeUniform;
    fail("config: unknown init '" + init + "'");
  }

  void validate() const {
    if (epochs < 0) fail("config: epochs must be >= 0");
    if (batch_size < 1) fail("config: batch size must be >= 1");
    if (image_size < 8) fail("config: image size too small");
    if (update_order != "generators_first") fail("config: unsupported update order");
    GeneratorConfig g = generator;
    g.input_h = g.input_w = image_size;
    g.validate();
    DiscriminatorConfig d = discriminator;
    d.input_h = d.input_w = image_size;
    d.validate();
    if (epochs > 0) {
      if (epochs > schedule_g.total_epochs || epochs > schedule_d.total_epochs)
        fail("config: epochs exceed the schedule total");
      schedule_g.validate();
      schedule_d.validate();
    }
    loss.validate();
    init_kind();
  }

  GeneratorConfig generator_config() const {
    GeneratorConfig g = generator;
    g.input_h = g.input_w = image_size;
    return g;
  }
  DiscriminatorConfig discriminator_config() const {
    DiscriminatorConfig d = discriminator;
    d.input_h = d.input_w = image_size;
    return d;
  }
  TrainSettings train_settings() const {
    TrainSettings s;
    s.seed = seed;
    s.epochs = epochs;
    s.batch_size = batch_size;
    s.checkpoint_every = checkpoint_every;
    s.max_shift = max_shift;
    s.weights = loss;
    s.sched_g = schedule_g;
    s.sched_d = schedule_d;
    s.hyper = optim;
    s.init = init_kind();
    return s;
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) fail("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  detail::reject_unknown(
      j,
      {"seed", "epochs", "batch_size", "image_size", "checkpoint_every", "max_shift",
       "synthetic_manifest", "target_manifest", "checkpoint_dir", "metrics_path", "init",
       "update_order", "generator", "discriminator", "loss", "schedule_g", "schedule_d", "optim"},
      "top level");
  detail::maybe(j, "seed", cfg.seed);
  detail::maybe(j, "epochs", cfg.epochs);
  detail::maybe(j, "batch_size", cfg.batch_size);
  detail::maybe(j, "image_size", cfg.image_size);
  detail::maybe(j, "checkpoint_every", cfg.checkpoint_every);
  detail::maybe(j, "max_shift", cfg.max_shift);
  detail::maybe(j, "synthetic_manifest", cfg.synthetic_manifest);
  detail::maybe(j, "target_manifest", cfg.target_manifest);
  detail::maybe(j, "checkpoint_dir", cfg.checkpoint_dir);
  detail::maybe(j, "metrics_path", cfg.metrics_path);
  detail::maybe(j, "init", cfg.init);
  detail::maybe(j, "update_order", cfg.update_order);

  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    detail::reject_unknown(g,
                           {"levels", "base_channels", "channel_cap", "stem_kernel",
                            "body_kernel", "attention_width", "attention_max_hw",
                            "dropout_stages", "dropout_rate", "block_size", "leaky_slope"},
                           "generator");
    detail::maybe(g, "levels", cfg.generator.levels);
    detail::maybe(g, "base_channels", cfg.generator.base_channels);
    detail::maybe(g, "channel_cap", cfg.generator.channel_cap);
    detail::maybe(g, "stem_kernel", cfg.generator.stem_kernel);
    detail::maybe(g, "body_kernel", cfg.generator.body_kernel);
    detail::maybe(g, "attention_width", cfg.generator.attention_width);
    detail::maybe(g, "attention_max_hw", cfg.generator.attention_max_hw);
    detail::maybe(g, "dropout_stages", cfg.generator.dropout_stages);
    detail::maybe(g, "dropout_rate", cfg.generator.dropout_rate);
    detail::maybe(g, "block_size", cfg.generator.block_size);
    detail::maybe(g, "leaky_slope", cfg.generator.leaky_slope);
  }
  if (j.contains("discriminator")) {
    const auto& d = j.at("discriminator");
    detail::reject_unknown(d,
                           {"encoder_stages", "base_channels", "channel_cap", "stem_kernel",
                            "body_kernel", "layout_extra_stages", "dropout_rate", "leaky_slope",
                            "attention_max_hw"},
                           "discriminator");
    detail::maybe(d, "encoder_stages", cfg.discriminator.encoder_stages);
    detail::maybe(d, "base_channels", cfg.discriminator.base_channels);
    detail::maybe(d, "channel_cap", cfg.discriminator.channel_cap);
    detail::maybe(d, "stem_kernel", cfg.discriminator.stem_kernel);
    detail::maybe(d, "body_kernel", cfg.discriminator.body_kernel);
    detail::maybe(d, "layout_extra_stages", cfg.discriminator.layout_extra_stages);
    detail::maybe(d, "dropout_rate", cfg.discriminator.dropout_rate);
    detail::maybe(d, "leaky_slope", cfg.discriminator.leaky_slope);
    detail::maybe(d, "attention_max_hw", cfg.discriminator.attention_max_hw);
  }
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    detail::reject_unknown(l,
                           {"lambda_cyc", "lambda_ide", "lambda_ssim", "lambda_r", "lambda_g",
                            "lambda_b", "lambda_d", "epoch_sw", "ssim_c1", "ssim_c2", "ssim_c3",
                            "ssim_alpha", "ssim_beta", "ssim_gamma"},
                           "loss");
    detail::maybe(l, "lambda_cyc", cfg.loss.lambda_cyc);
    detail::maybe(l, "lambda_ide", cfg.loss.lambda_ide);
    detail::maybe(l, "lambda_ssim", cfg.loss.lambda_ssim);
    detail::maybe(l, "lambda_r", cfg.loss.lambda_channel[0]);
    detail::maybe(l, "lambda_g", cfg.loss.lambda_channel[1]);
    detail::maybe(l, "lambda_b", cfg.loss.lambda_channel[2]);
    detail::maybe(l, "lambda_d", cfg.loss.lambda_channel[3]);
    detail::maybe(l, "epoch_sw", cfg.loss.epoch_sw);
    detail::maybe(l, "ssim_c1", cfg.loss.ssim_constants.c1);
    detail::maybe(l, "ssim_c2", cfg.loss.ssim_constants.c2);
    detail::maybe(l, "ssim_c3", cfg.loss.ssim_constants.c3);
    detail::maybe(l, "ssim_alpha", cfg.loss.ssim_exponents.alpha);
    detail::maybe(l, "ssim_beta", cfg.loss.ssim_exponents.beta);
    detail::maybe(l, "ssim_gamma", cfg.loss.ssim_exponents.gamma);
  }
  auto schedule = [](const nlohmann::json& s, ScheduleSpec& spec, const char* where) {
    detail::reject_unknown(s, {"target_lr", "warmup_epochs", "total_epochs"}, where);
    detail::maybe(s, "target_lr", spec.target_lr);
    detail::maybe(s, "warmup_epochs", spec.warmup_epochs);
    detail::maybe(s, "total_epochs", spec.total_epochs);
  };
  if (j.contains("schedule_g")) schedule(j.at("schedule_g"), cfg.schedule_g, "schedule_g");
  if (j.contains("schedule_d")) schedule(j.at("schedule_d"), cfg.schedule_d, "schedule_d");
  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    detail::reject_unknown(o, {"beta1", "beta2", "momentum", "eps"}, "optim");
    detail::maybe(o, "beta1", cfg.optim.beta1);
    detail::maybe(o, "beta2", cfg.optim.beta2);
    detail::maybe(o, "momentum", cfg.optim.momentum);
    detail::maybe(o, "eps", cfg.optim.eps);
  }
  cfg.validate();
  return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["image_size"] = cfg.image_size;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["max_shift"] = cfg.max_shift;
  j["synthetic_manifest"] = cfg.synthetic_manifest;
  j["target_manifest"] = cfg.target_manifest;
  j["checkpoint_dir"] = cfg.checkpoint_dir;
  j["metrics_path"] = cfg.metrics_path;
  j["init"] = cfg.init;
  j["update_order"] = cfg.update_order;
  j["generator"] = {{"levels", cfg.generator.levels},
                    {"base_channels", cfg.generator.base_channels},
                    {"channel_cap", cfg.generator.channel_cap},
                    {"stem_kernel", cfg.generator.stem_kernel},
                    {"body_kernel", cfg.generator.body_kernel},
                    {"attention_width", cfg.generator.attention_width},
                    {"attention_max_hw", cfg.generator.attention_max_hw},
                    {"dropout_stages", cfg.generator.dropout_stages},
                    {"dropout_rate", cfg.generator.dropout_rate},
                    {"block_size", cfg.generator.block_size},
                    {"leaky_slope", cfg.generator.leaky_slope}};
  j["discriminator"] = {{"encoder_stages", cfg.discriminator.encoder_stages},
                        {"base_channels", cfg.discriminator.base_channels},
                        {"channel_cap", cfg.discriminator.channel_cap},
                        {"stem_kernel", cfg.discriminator.stem_kernel},
                        {"body_kernel", cfg.discriminator.body_kernel},
                        {"layout_extra_stages", cfg.discriminator.layout_extra_stages},
                        {"dropout_rate", cfg.discriminator.dropout_rate},
                        {"leaky_slope", cfg.discriminator.leaky_slope},
                        {"attention_max_hw", cfg.discriminator.attention_max_hw}};
  j["loss"] = {{"lambda_cyc", cfg.loss.lambda_cyc},
               {"lambda_ide", cfg.loss.lambda_ide},
               {"lambda_ssim", cfg.loss.lambda_ssim},
               {"lambda_r", cfg.loss.lambda_channel[0]},
               {"lambda_g", cfg.loss.lambda_channel[1]},
               {"lambda_b", cfg.loss.lambda_channel[2]},
               {"lambda_d", cfg.loss.lambda_channel[3]},
               {"epoch_sw", cfg.loss.epoch_sw},
               {"ssim_c1", cfg.loss.ssim_constants.c1},
               {"ssim_c2", cfg.loss.ssim_constants.c2},
               {"ssim_c3", cfg.loss.ssim_constants.c3},
               {"ssim_alpha", cfg.loss.ssim_exponents.alpha},
               {"ssim_beta", cfg.loss.ssim_exponents.beta},
               {"ssim_gamma", cfg.loss.ssim_exponents.gamma}};
  j["schedule_g"] = {{"target_lr", cfg.schedule_g.target_lr},
                     {"warmup_epochs", cfg.schedule_g.warmup_epochs},
                     {"total_epochs", cfg.schedule_g.total_epochs}};
  j["schedule_d"] = {{"target_lr", cfg.schedule_d.target_lr},
                     {"warmup_epochs", cfg.schedule_d.warmup_epochs},
                     {"total_epochs", cfg.schedule_d.total_epochs}};
  j["optim"] = {{"beta1", cfg.optim.beta1},
                {"beta2", cfg.optim.beta2},
                {"momentum", cfg.optim.momentum},
                {"eps", cfg.optim.eps}};
  return j;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail("cannot open config: " + path.string());
  nlohmann::json j;
  is >> j;
  return config_from_json(j);
}

inline void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail("cannot write config: " + path.string());
  os << config_to_json(cfg).dump(2) << "\n";
}

}  // namespace vologan
