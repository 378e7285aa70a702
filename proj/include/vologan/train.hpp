#pragma once

// CycleGAN training loop: two generators translate between the synthetic and
// target domains, two three-headed discriminators judge each domain. Every
// step runs a generator phase (combined weighted objective, one NADAM step
// per generator) followed by a discriminator phase on detached fakes (one
// SGD-momentum step per discriminator). All stochasticity derives from
// per-epoch engines, so checkpoint resume reproduces an uninterrupted run.

#include <iomanip>

#include "vologan/data.hpp"
#include "vologan/losses.hpp"
#include "vologan/models.hpp"

namespace vologan {

struct TrainSettings {
  std::uint64_t seed = 1;
  int epochs = 80;
  int batch_size = 8;
  int checkpoint_every = 5;
  int max_shift = 0;  // 0 -> 10% of width
  LossWeights weights;
  ScheduleSpec sched_g{2e-4, 10, 80};
  ScheduleSpec sched_d{1e-4, 10, 80};
  OptimizerHyper hyper;
  InitKind init = InitKind::GlorotUniform;
};

template <typename T>
struct TrainState {
  Generator<T> g_st, g_ts;      // synthetic->target, target->synthetic
  Discriminator<T> d_s, d_t;
  NadamState<T> opt_g_st, opt_g_ts;
  SgdState<T> opt_d_s, opt_d_t;
  int epoch = 0;  // next epoch to run
  std::int64_t global_step = 0;
  TrainSettings settings;
  GeneratorConfig gen_cfg;
  DiscriminatorConfig disc_cfg;
};

struct StepMetrics {
  int epoch = 0;
  std::int64_t step = 0;
  double adv_g = 0, cyc = 0, ide = 0, ssim = 0, total_g = 0;
  double d_lowlevel = 0, d_layout = 0, d_content = 0, total_d = 0;
  double lr_g = 0, lr_d = 0;
  // per-generator breakdown (not part of the CSV schema): the s-side terms
  // follow the synthetic->target generator, the t-side terms the other
  double adv_st = 0, adv_ts = 0;
  double cyc_s = 0, cyc_t = 0, ide_s = 0, ide_t = 0, ssim_s = 0, ssim_t = 0;
  std::array<double, 4> cyc_per_channel{}, ide_per_channel{}, ssim_per_channel{};
};

inline std::string metrics_csv_row(const StepMetrics& m) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << m.epoch << "," << m.step << "," << m.adv_g << "," << m.cyc << "," << m.ide << ","
     << m.ssim << "," << m.total_g << "," << m.d_lowlevel << "," << m.d_layout << ","
     << m.d_content << "," << m.total_d << "," << m.lr_g << "," << m.lr_d;
  return os.str();
}

template <typename T>
TrainState<T> make_train_state(const GeneratorConfig& gen_cfg,
                               const DiscriminatorConfig& disc_cfg,
                               const TrainSettings& settings) {
  settings.sched_g.validate();
  settings.sched_d.validate();
  settings.weights.validate();
  TrainState<T> state;
  state.settings = settings;
  state.gen_cfg = gen_cfg;
  state.disc_cfg = disc_cfg;
  Rng rng = Rng::derived(settings.seed, kStreamInit);
  state.g_st = build_generator<T>(gen_cfg, settings.init, rng);
  state.g_ts = build_generator<T>(gen_cfg, settings.init, rng);
  state.d_s = build_discriminator<T>(disc_cfg, settings.init, rng);
  state.d_t = build_discriminator<T>(disc_cfg, settings.init, rng);
  return state;
}

namespace detail {

template <typename T>
void check_finite_loss(const Tensor<T>& value, const char* term) {
  if (!value.all_finite()) fail(std::string("non-finite loss term: ") + term);
}

// Generator-side adversarial objective of one discriminator, with the same
// 2/1/1 head weighting as the discriminator total.
template <typename T>
Tensor<T> generator_adv(const DiscriminatorOutputs<T>& d_out) {
  return total_discriminator_loss(adv_loss_generator(d_out.lowlevel),
                                  adv_loss_generator(d_out.layout),
                                  adv_loss_generator(d_out.content));
}

template <typename T>
void clear_all_grads(TrainState<T>& state) {
  state.g_st.params.clear_grads();
  state.g_ts.params.clear_grads();
  state.d_s.params.clear_grads();
  state.d_t.params.clear_grads();
}

}  // namespace detail

// Loss evaluation shared by training steps and test-set evaluation. When
// update is false nothing is recorded or stepped.
template <typename T>
StepMetrics run_cycle(TrainState<T>& state, const Tensor<T>& batch_s, const Tensor<T>& batch_t,
                      const Mode& mode, bool update) {
  const TrainSettings& cfg = state.settings;
  StepMetrics metrics;
  metrics.epoch = state.epoch;
  metrics.step = state.global_step;
  metrics.lr_g = lr_at(cfg.sched_g, std::min(state.epoch, cfg.sched_g.total_epochs - 1));
  metrics.lr_d = lr_at(cfg.sched_d, std::min(state.epoch, cfg.sched_d.total_epochs - 1));

  Tensor<T> fake_t_frozen, fake_s_frozen;

  {  // generator phase
    std::unique_ptr<Tape<T>> tape = update ? std::make_unique<Tape<T>>() : nullptr;
    Tensor<T> fake_t = state.g_st.forward(batch_s, mode);
    Tensor<T> fake_s = state.g_ts.forward(batch_t, mode);
    Tensor<T> cyc_s = state.g_ts.forward(fake_t, mode);
    Tensor<T> cyc_t = state.g_st.forward(fake_s, mode);
    Tensor<T> ide_s = state.g_ts.forward(batch_s, mode);
    Tensor<T> ide_t = state.g_st.forward(batch_t, mode);

    Tensor<T> adv_st = detail::generator_adv(state.d_t.forward(fake_t, mode));
    Tensor<T> adv_ts = detail::generator_adv(state.d_s.forward(fake_s, mode));
    ChannelwiseDetail<T> cyc = channelwise_pixel_detail(
        cyc_s, cyc_t, batch_s, batch_t, state.epoch, cfg.weights.epoch_sw,
        cfg.weights.lambda_channel);
    ChannelwiseDetail<T> ide = channelwise_pixel_detail(
        ide_s, ide_t, batch_s, batch_t, state.epoch, cfg.weights.epoch_sw,
        cfg.weights.lambda_channel);
    ChannelwiseDetail<T> ssim_part = channelwise_ssim_detail(
        batch_s, batch_t, cyc_s, cyc_t, cfg.weights.lambda_channel,
        cfg.weights.ssim_constants, cfg.weights.ssim_exponents);

    GeneratorLossParts<T> parts;
    parts.adv = add(adv_st, adv_ts);
    parts.cyc = cyc.total;
    parts.ide = ide.total;
    parts.ssim = ssim_part.total;
    detail::check_finite_loss(parts.adv, "adversarial");
    detail::check_finite_loss(parts.cyc, "cycle");
    detail::check_finite_loss(parts.ide, "identity");
    detail::check_finite_loss(parts.ssim, "ssim");

    LossReport<T> report = total_generator_loss(parts, cfg.weights);
    report.cyc_per_channel = cyc.per_channel;
    report.ide_per_channel = ide.per_channel;
    report.ssim_per_channel = ssim_part.per_channel;
    metrics.adv_g = double(report.adv);
    metrics.cyc = double(report.cyc);
    metrics.ide = double(report.ide);
    metrics.ssim = double(report.ssim);
    metrics.total_g = double(report.total);
    metrics.adv_st = double(adv_st.values()[0]);
    metrics.adv_ts = double(adv_ts.values()[0]);
    metrics.cyc_s = double(cyc.first_half);
    metrics.cyc_t = double(cyc.second_half);
    metrics.ide_s = double(ide.first_half);
    metrics.ide_t = double(ide.second_half);
    metrics.ssim_s = double(ssim_part.first_half);
    metrics.ssim_t = double(ssim_part.second_half);
    for (int ch = 0; ch < 4; ++ch) {
      metrics.cyc_per_channel[std::size_t(ch)] = double(cyc.per_channel[std::size_t(ch)]);
      metrics.ide_per_channel[std::size_t(ch)] = double(ide.per_channel[std::size_t(ch)]);
      metrics.ssim_per_channel[std::size_t(ch)] = double(ssim_part.per_channel[std::size_t(ch)]);
    }

    if (update) {
      tape->backward(report.total_tensor);
      auto params_st = state.g_st.params.trainable_tensors();
      auto params_ts = state.g_ts.params.trainable_tensors();
      nadam_step(params_st, state.g_st.params.trainable_names(), state.opt_g_st, metrics.lr_g,
                 cfg.hyper);
      nadam_step(params_ts, state.g_ts.params.trainable_names(), state.opt_g_ts, metrics.lr_g,
                 cfg.hyper);
    }
    fake_t_frozen = fake_t.detach();
    fake_s_frozen = fake_s.detach();
  }
  detail::clear_all_grads(state);

  {  // discriminator phase, fakes detached
    std::unique_ptr<Tape<T>> tape = update ? std::make_unique<Tape<T>>() : nullptr;
    auto dt_real = state.d_t.forward(batch_t, mode);
    auto dt_fake = state.d_t.forward(fake_t_frozen, mode);
    auto ds_real = state.d_s.forward(batch_s, mode);
    auto ds_fake = state.d_s.forward(fake_s_frozen, mode);

    Tensor<T> low = add(adv_loss_discriminator(dt_real.lowlevel, dt_fake.lowlevel),
                        adv_loss_discriminator(ds_real.lowlevel, ds_fake.lowlevel));
    Tensor<T> layout = add(adv_loss_discriminator(dt_real.layout, dt_fake.layout),
                           adv_loss_discriminator(ds_real.layout, ds_fake.layout));
    Tensor<T> content = add(adv_loss_discriminator(dt_real.content, dt_fake.content),
                            adv_loss_discriminator(ds_real.content, ds_fake.content));
    detail::check_finite_loss(low, "discriminator low-level");
    detail::check_finite_loss(layout, "discriminator layout");
    detail::check_finite_loss(content, "discriminator content");
    Tensor<T> total_d = total_discriminator_loss(low, layout, content);

    metrics.d_lowlevel = double(low.values()[0]);
    metrics.d_layout = double(layout.values()[0]);
    metrics.d_content = double(content.values()[0]);
    metrics.total_d = double(total_d.values()[0]);

    if (update) {
      tape->backward(total_d);
      auto params_dt = state.d_t.params.trainable_tensors();
      auto params_ds = state.d_s.params.trainable_tensors();
      sgd_momentum_step(params_dt, state.d_t.params.trainable_names(), state.opt_d_t,
                        metrics.lr_d, cfg.hyper);
      sgd_momentum_step(params_ds, state.d_s.params.trainable_names(), state.opt_d_s,
                        metrics.lr_d, cfg.hyper);
    }
  }
  detail::clear_all_grads(state);
  return metrics;
}

template <typename T>
StepMetrics train_step(TrainState<T>& state, const Tensor<T>& batch_s, const Tensor<T>& batch_t,
                       Rng& rng) {
  if (!(batch_s.shape() == batch_t.shape()))
    fail("train_step: batch shapes differ, " + batch_s.shape().str() + " vs " +
         batch_t.shape().str());
  StepMetrics m = run_cycle(state, batch_s, batch_t, Mode::train(rng), /*update=*/true);
  state.global_step += 1;
  return m;
}

// Batched eval-mode inference; outputs stay in [0, 1].
template <typename T>
Tensor<T> translate(Generator<T>& generator, const Tensor<T>& samples) {
  return generator.forward(samples, Mode::eval());
}

// ---------------------------------------------------------------------------
// Checkpoints: directory with the four parameter stores, optimizer slots and
// a plain-text state manifest. Writes go to a temp directory first and are
// renamed into place.
// ---------------------------------------------------------------------------

namespace detail {

inline void save_optimizer_slots(const std::vector<std::vector<float>>& slots,
                                 const std::vector<Tensor<float>>& params,
                                 const std::vector<std::string>& names,
                                 const std::filesystem::path& dir, const std::string& tag) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    // slots are allocated on the first optimizer step; an untouched state
    // checkpoints as zeros
    Tensor<float> t = i < slots.size() && !slots[i].empty()
                          ? Tensor<float>::from_values(params[i].shape(), slots[i])
                          : Tensor<float>(params[i].shape());
    write_vten((dir / (tag + "." + names[i] + ".vten")).string(), t);
  }
}

inline void load_optimizer_slots(std::vector<std::vector<float>>& slots,
                                 const std::vector<Tensor<float>>& params,
                                 const std::vector<std::string>& names,
                                 const std::filesystem::path& dir, const std::string& tag) {
  slots.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    slots[i] = read_vten((dir / (tag + "." + names[i] + ".vten")).string()).values();
}

}  // namespace detail

inline void save_checkpoint(const TrainState<float>& state, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  save_store(state.g_st.params, tmp / "g_st");
  save_store(state.g_ts.params, tmp / "g_ts");
  save_store(state.d_s.params, tmp / "d_s");
  save_store(state.d_t.params, tmp / "d_t");

  const fs::path opt = tmp / "optim";
  fs::create_directories(opt);
  detail::save_optimizer_slots(state.opt_g_st.m, state.g_st.params.trainable_tensors(),
                               state.g_st.params.trainable_names(), opt, "g_st.m");
  detail::save_optimizer_slots(state.opt_g_st.v, state.g_st.params.trainable_tensors(),
                               state.g_st.params.trainable_names(), opt, "g_st.v");
  detail::save_optimizer_slots(state.opt_g_ts.m, state.g_ts.params.trainable_tensors(),
                               state.g_ts.params.trainable_names(), opt, "g_ts.m");
  detail::save_optimizer_slots(state.opt_g_ts.v, state.g_ts.params.trainable_tensors(),
                               state.g_ts.params.trainable_names(), opt, "g_ts.v");
  detail::save_optimizer_slots(state.opt_d_s.velocity, state.d_s.params.trainable_tensors(),
                               state.d_s.params.trainable_names(), opt, "d_s.vel");
  detail::save_optimizer_slots(state.opt_d_t.velocity, state.d_t.params.trainable_tensors(),
                               state.d_t.params.trainable_names(), opt, "d_t.vel");

  std::ofstream meta(tmp / "state.txt", std::ios::trunc);
  meta << "epoch_next " << state.epoch << "\n";
  meta << "global_step " << state.global_step << "\n";
  meta << "seed " << state.settings.seed << "\n";
  meta << "opt_steps " << state.opt_g_st.step << " " << state.opt_g_ts.step << " "
       << state.opt_d_s.step << " " << state.opt_d_t.step << "\n";
  meta << "generator levels=" << state.gen_cfg.levels << " base=" << state.gen_cfg.base_channels
       << " cap=" << state.gen_cfg.channel_cap << " input=" << state.gen_cfg.input_h << "x"
       << state.gen_cfg.input_w << " attention_width=" << state.gen_cfg.attention_width << "\n";
  meta << "discriminator stages=" << state.disc_cfg.encoder_stages
       << " base=" << state.disc_cfg.base_channels << " input=" << state.disc_cfg.input_h << "x"
       << state.disc_cfg.input_w << "\n";
  meta.close();

  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

// Rebuilds the models from the given configs, then restores parameters and
// optimizer slots bit-exactly.
inline TrainState<float> load_checkpoint(const std::filesystem::path& dir,
                                         const GeneratorConfig& gen_cfg,
                                         const DiscriminatorConfig& disc_cfg,
                                         const TrainSettings& settings) {
  TrainState<float> state = make_train_state<float>(gen_cfg, disc_cfg, settings);
  load_store(state.g_st.params, dir / "g_st");
  load_store(state.g_ts.params, dir / "g_ts");
  load_store(state.d_s.params, dir / "d_s");
  load_store(state.d_t.params, dir / "d_t");

  const std::filesystem::path opt = dir / "optim";
  detail::load_optimizer_slots(state.opt_g_st.m, state.g_st.params.trainable_tensors(),
                               state.g_st.params.trainable_names(), opt, "g_st.m");
  detail::load_optimizer_slots(state.opt_g_st.v, state.g_st.params.trainable_tensors(),
                               state.g_st.params.trainable_names(), opt, "g_st.v");
  detail::load_optimizer_slots(state.opt_g_ts.m, state.g_ts.params.trainable_tensors(),
                               state.g_ts.params.trainable_names(), opt, "g_ts.m");
  detail::load_optimizer_slots(state.opt_g_ts.v, state.g_ts.params.trainable_tensors(),
                               state.g_ts.params.trainable_names(), opt, "g_ts.v");
  detail::load_optimizer_slots(state.opt_d_s.velocity, state.d_s.params.trainable_tensors(),
                               state.d_s.params.trainable_names(), opt, "d_s.vel");
  detail::load_optimizer_slots(state.opt_d_t.velocity, state.d_t.params.trainable_tensors(),
                               state.d_t.params.trainable_names(), opt, "d_t.vel");

  std::ifstream meta(dir / "state.txt");
  if (!meta) fail("checkpoint missing state.txt: " + dir.string());
  std::string key;
  while (meta >> key) {
    if (key == "epoch_next") meta >> state.epoch;
    else if (key == "global_step") meta >> state.global_step;
    else if (key == "seed") meta >> state.settings.seed;
    else if (key == "opt_steps")
      meta >> state.opt_g_st.step >> state.opt_g_ts.step >> state.opt_d_s.step >>
          state.opt_d_t.step;
    else {
      std::string skip;
      std::getline(meta, skip);
    }
  }
  return state;
}

// ---------------------------------------------------------------------------
// Epoch loop
// ---------------------------------------------------------------------------

struct TrainRun {
  std::vector<StepMetrics> train_rows;
  std::vector<StepMetrics> test_rows;  // recorded with step = -1
};

// Runs state.epoch .. epochs-1 over the two datasets, appending one CSV row
// per step to metrics_csv (header written when starting from epoch 0) plus a
// test-split row (step = -1) after every epoch divisible by 5. Checkpoints
// land in checkpoint_dir/epoch_NNNN every checkpoint_every epochs and in
// checkpoint_dir/final at the end.
inline TrainRun train(TrainState<float>& state, const std::vector<Tensor<float>>& synthetic,
                      const std::vector<Tensor<float>>& target,
                      const std::filesystem::path& checkpoint_dir,
                      const std::filesystem::path& metrics_csv) {
  const TrainSettings& cfg = state.settings;
  TrainRun run;
  std::filesystem::create_directories(checkpoint_dir);
  if (metrics_csv.has_parent_path()) std::filesystem::create_directories(metrics_csv.parent_path());

  const auto [train_s, test_s] = split_train_test(synthetic.size(), 0.8, cfg.seed);
  const auto [train_t, test_t] = split_train_test(target.size(), 0.8, cfg.seed + 1);
  if (cfg.epochs == 0) {
    save_checkpoint(state, checkpoint_dir / "final");
    return run;
  }

  std::ofstream csv(metrics_csv, state.epoch == 0 ? std::ios::trunc : std::ios::app);
  if (!csv) fail("cannot open metrics CSV: " + metrics_csv.string());
  if (state.epoch == 0) csv << metrics_csv_header() << "\n";

  const Shape sample_shape = synthetic.at(0).shape();
  const int max_shift = cfg.max_shift > 0 ? cfg.max_shift : std::max(1, sample_shape.w / 10);

  for (; state.epoch < cfg.epochs; ++state.epoch) {
    Rng epoch_rng = Rng::derived(cfg.seed, kStreamEpoch, std::uint64_t(state.epoch));
    std::vector<int> order_s = train_s, order_t = train_t;
    epoch_rng.shuffle(order_s.begin(), order_s.end());
    epoch_rng.shuffle(order_t.begin(), order_t.end());
    const int steps = int(std::min(order_s.size(), order_t.size())) / cfg.batch_size;

    for (int step = 0; step < steps; ++step) {
      std::vector<Tensor<float>> batch_s_samples, batch_t_samples;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const int is = order_s[std::size_t(step * cfg.batch_size + b)];
        const int it = order_t[std::size_t(step * cfg.batch_size + b)];
        batch_s_samples.push_back(augment(synthetic[std::size_t(is)], epoch_rng, max_shift));
        batch_t_samples.push_back(augment(target[std::size_t(it)], epoch_rng, max_shift));
      }
      std::vector<int> all(std::size_t(cfg.batch_size));
      for (int b = 0; b < cfg.batch_size; ++b) all[std::size_t(b)] = b;
      StepMetrics m = train_step(state, make_batch(batch_s_samples, all),
                                 make_batch(batch_t_samples, all), epoch_rng);
      csv << metrics_csv_row(m) << "\n";
      run.train_rows.push_back(m);
    }

    if (state.epoch % 5 == 0 && !test_s.empty() && !test_t.empty()) {
      const int k = int(std::min({test_s.size(), test_t.size(), std::size_t(cfg.batch_size)}));
      std::vector<int> idx_s(test_s.begin(), test_s.begin() + k);
      std::vector<int> idx_t(test_t.begin(), test_t.begin() + k);
      StepMetrics m = run_cycle(state, make_batch(synthetic, idx_s), make_batch(target, idx_t),
                                Mode::eval(), /*update=*/false);
      m.step = -1;
      csv << metrics_csv_row(m) << "\n";
      run.test_rows.push_back(m);
    }

    if (cfg.checkpoint_every > 0 && (state.epoch + 1) % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d", state.epoch);
      state.epoch += 1;  // checkpoint records the next epoch to run
      save_checkpoint(state, checkpoint_dir / name);
      state.epoch -= 1;
    }
    csv.flush();
  }
  save_checkpoint(state, checkpoint_dir / "final");
  return run;
}

}  // namespace vologan
