#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evident/config.hpp"
#include "evident/errors.hpp"
#include "evident/model.hpp"
#include "evident/training.hpp"

using namespace evident;

namespace {

synth::GenConfig tiny_gen(std::size_t n = 8) {
  synth::GenConfig g;
  g.n_samples = n;
  g.n_test = 0;
  g.T = 16;
  g.D_v = 5;
  g.D_a = 3;
  g.latent_dim = 2;
  g.seed = 3;
  return g;
}

ModelConfig tiny_model(AblationFlags flags = {}) {
  ModelConfig m;
  m.visual_dim = 5;
  m.audio_dim = 3;
  m.hidden_dim = 6;
  m.levels = 2;
  m.flags = flags;
  return m;
}

std::vector<const synth::LabeledSample*> pointers(const synth::Dataset& d) {
  std::vector<const synth::LabeledSample*> out;
  for (const auto& s : d) out.push_back(&s);
  return out;
}

LossBreakdown loss_on(const Model& model, const synth::Dataset& data, const LossWeights& w,
                      std::size_t epoch) {
  Tape tape;
  const auto batch = pointers(data);
  return total_loss(tape, model, batch, w, epoch).breakdown;
}

}  // namespace

TEST(Curriculum, RampEndpointsAndSaturation) {
  EXPECT_DOUBLE_EQ(curriculum(0, 20), 0.0);
  EXPECT_DOUBLE_EQ(curriculum(5, 20), 0.25);
  EXPECT_DOUBLE_EQ(curriculum(20, 20), 1.0);
  EXPECT_DOUBLE_EQ(curriculum(45, 20), 1.0);
  EXPECT_THROW(curriculum(1, 0), ConfigError);
}

TEST(TotalLoss, BreakdownIdentityAcrossEpochs) {
  const auto data = synth::generate(tiny_gen(4));
  Model model(tiny_model(), 1);
  LossWeights w;
  w.burn_in = 4;
  for (std::size_t e : {0u, 1u, 2u, 4u, 9u}) {
    const auto b = loss_on(model, data, w, e);
    EXPECT_TRUE(b.all_finite());
    EXPECT_LT(b.identity_residual(w.lambda_aux), 1e-10) << b.to_string();
    EXPECT_DOUBLE_EQ(b.eta_t, curriculum(e, 4));
    EXPECT_NEAR(b.struct_total, b.dis + w.lambda_aln * b.aln + w.lambda_rec * b.rec, 1e-12);
  }
}

TEST(TotalLoss, PastBurnInWithZeroWeightsIsFusedEvidence) {
  const auto data = synth::generate(tiny_gen(4));
  Model model(tiny_model(), 2);
  LossWeights w;
  w.lambda_aln = w.lambda_rec = w.lambda_orth = w.lambda_aux = 0.0;
  w.burn_in = 3;
  const auto b = loss_on(model, data, w, 3);
  EXPECT_DOUBLE_EQ(b.eta_t, 1.0);
  EXPECT_NEAR(b.total, b.evid_fused, 1e-12);
  const auto b0 = loss_on(model, data, w, 0);
  EXPECT_NEAR(b0.total, b0.mse_guide, 1e-12);
}

TEST(TotalLoss, AuxiliaryTermsFollowBranchLayout) {
  const auto data = synth::generate(tiny_gen(4));
  LossWeights w;
  Model full(tiny_model(), 3);
  const auto b = loss_on(full, data, w, 0);
  for (double a : b.evid_aux) EXPECT_GT(std::abs(a), 0.0);

  Model shared(tiny_model(AblationFlags::from_name("shared-only")), 3);
  const auto s = loss_on(shared, data, w, 0);
  for (double a : s.evid_aux) EXPECT_EQ(a, 0.0);
}

TEST(TotalLoss, ZeroStructuralWeightsGiveZeroDecoderGradients) {
  const auto data = synth::generate(tiny_gen(4));
  Model model(tiny_model(), 4);
  LossWeights w;
  w.lambda_rec = 0.0;
  Tape tape;
  const auto batch = pointers(data);
  auto loss = total_loss(tape, model, batch, w, 5);
  tape.backward(loss.total);
  GradientSet g = zero_gradients(model.params());
  tape.accumulate_param_grads(g);
  bool saw_decoder = false;
  for (const auto& p : model.params()) {
    if (p.name.find("decoder") == std::string::npos) continue;
    saw_decoder = true;
    const Matrix& gi = g[p.index];
    if (gi.empty()) continue;
    for (double v : gi.data()) EXPECT_EQ(v, 0.0) << p.name;
  }
  EXPECT_TRUE(saw_decoder);
}

TEST(TotalLoss, EmptyBatchThrows) {
  Model model(tiny_model(), 5);
  Tape tape;
  std::vector<const synth::LabeledSample*> none;
  EXPECT_THROW(total_loss(tape, model, none, LossWeights{}, 0), ConfigError);
}

TEST(Adam, ClipsToGlobalNormAndReportsPreClipNorm) {
  ParameterSet ps;
  ps.add("w", Matrix(1, 2));
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.clip_norm = 1.0;
  Adam adam(ps, cfg);
  GradientSet g = zero_gradients(ps);
  g[0](0, 0) = 30.0;
  g[0](0, 1) = 40.0;
  EXPECT_DOUBLE_EQ(adam.step(ps, g), 50.0);
  // The first bias-corrected Adam step moves each coordinate by lr * sign.
  EXPECT_NEAR(ps[0].value(0, 0), -0.1, 1e-6);
  EXPECT_NEAR(ps[0].value(0, 1), -0.1, 1e-6);
  EXPECT_EQ(adam.steps(), 1u);
}

TEST(Adam, NonFiniteGradientThrows) {
  ParameterSet ps;
  ps.add("w", Matrix(1, 1));
  Adam adam(ps, AdamConfig{});
  GradientSet g = zero_gradients(ps);
  g[0](0, 0) = std::nan("");
  EXPECT_THROW(adam.step(ps, g), NumericalError);
}

TEST(Train, SmokeRunKeepsIdentityEveryStepAndIsDeterministic) {
  const auto data = synth::generate(tiny_gen(8));
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 4;
  LossWeights w;
  w.burn_in = 2;
  double worst = 0.0;
  std::size_t steps = 0;
  Model a(tiny_model(), 6), b(tiny_model(), 6);
  const auto ra = train(a, data, tc, w, [&](std::size_t, std::size_t, const LossBreakdown& br) {
    worst = std::max(worst, br.identity_residual(w.lambda_aux));
    ++steps;
  });
  const auto rb = train(b, data, tc, w);
  EXPECT_LT(worst, 1e-10);
  EXPECT_GT(steps, 0u);
  ASSERT_EQ(ra.epochs.size(), 5u);
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(a.params()[i].value, b.params()[i].value) << a.params()[i].name;
  }
  EXPECT_EQ(ra.epochs.back().mean.total, rb.epochs.back().mean.total);
}

TEST(Train, LossDecreasesOnTinySet) {
  const auto data = synth::generate(tiny_gen(4));
  Model model(tiny_model(), 7);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 4;
  tc.oversample = false;
  tc.adam.lr = 3e-3;
  LossWeights w;
  w.burn_in = 1000;
  const auto r = train(model, data, tc, w);
  EXPECT_LT(r.epochs.back().mean.mse_guide, r.epochs.front().mean.mse_guide);
}

TEST(Train, OneEpochOnFourSamplesLowersTotalLoss) {
  const auto data = synth::generate(tiny_gen(4));
  Model model(tiny_model(), 11);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  tc.oversample = false;
  tc.adam.lr = 1e-3;
  const LossWeights w;
  const double initial = loss_on(model, data, w, 0).total;
  train(model, data, tc, w);
  EXPECT_LT(loss_on(model, data, w, 0).total, initial);
}

TEST(Train, DivergenceLimitRaisesWithLastFiniteBreakdown) {
  const auto data = synth::generate(tiny_gen(4));
  Model model(tiny_model(), 8);
  TrainConfig tc;
  tc.epochs = 1;
  tc.divergence_limit = 1e-12;
  try {
    train(model, data, tc, LossWeights{});
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.failing.total, 1e-12);
  }
}

TEST(Train, EveryAblationPresetTrainsAndPredicts) {
  const auto data = synth::generate(tiny_gen(6));
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 3;
  LossWeights w;
  w.burn_in = 1;
  for (const auto& name : AblationFlags::names()) {
    Model model(tiny_model(AblationFlags::from_name(name)), 9);
    const auto r = train(model, data, tc, w);
    EXPECT_TRUE(r.epochs.back().mean.all_finite()) << name;
    const auto rep = model.predict(data[0].visual, data[0].audio, 0.9);
    EXPECT_TRUE(std::isfinite(rep.score)) << name;
    EXPECT_LE(rep.interval_low, rep.score) << name;
    EXPECT_GE(rep.interval_high, rep.score) << name;
    if (name == "deterministic") {
      EXPECT_EQ(rep.au, 0.0);
      EXPECT_EQ(rep.interval_low, rep.interval_high);
    } else {
      EXPECT_GT(rep.au, 0.0) << name;
      EXPECT_GT(rep.eu, 0.0) << name;
    }
  }
}

TEST(Ablation, PresetValidation) {
  EXPECT_THROW(AblationFlags::from_name("nope"), ConfigError);
  AblationFlags f;
  f.all_cnn = f.all_transformer = true;
  EXPECT_THROW(f.validate(), ConfigError);
  f = AblationFlags{};
  f.nig = false;
  EXPECT_THROW(f.validate(), ConfigError);
  f.fusion = false;
  EXPECT_NO_THROW(f.validate());
  f = AblationFlags{};
  f.shared_only = f.private_only = true;
  EXPECT_THROW(f.validate(), ConfigError);
}

TEST(Predict, ScalesBackToScoreUnits) {
  const auto data = synth::generate(tiny_gen(4));
  Model model(tiny_model(), 10);
  const auto r0 = model.predict(data[0].visual, data[0].audio, 0.9);
  model.set_target_scaling(10.0, 2.0);
  const auto r1 = model.predict(data[0].visual, data[0].audio, 0.9);
  EXPECT_NEAR(r1.score, 10.0 + 2.0 * r0.score, 1e-9);
  EXPECT_NEAR(r1.au, 4.0 * r0.au, 1e-9);
  EXPECT_NEAR(r1.interval_high - r1.interval_low, 2.0 * (r0.interval_high - r0.interval_low), 1e-9);
}

TEST(Checkpoint, RoundTripReproducesPredictions) {
  const auto data = synth::generate(tiny_gen(4));
  AblationFlags flags = AblationFlags::from_name("no-gating");
  Model model(tiny_model(flags), 11);
  model.set_target_scaling(12.5, 3.25);
  const auto dir = std::filesystem::temp_directory_path() / "evident_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "model.ckpt";
  save_checkpoint(model, file);
  const auto back = load_checkpoint(file);
  EXPECT_FALSE(back->config().flags.gating);
  EXPECT_EQ(back->target_mean(), 12.5);
  EXPECT_EQ(back->target_scale(), 3.25);
  const auto a = model.predict(data[1].visual, data[1].audio, 0.9);
  const auto b = back->predict(data[1].visual, data[1].audio, 0.9);
  EXPECT_EQ(a.score, b.score);
  EXPECT_EQ(a.eu, b.eu);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, GarbageFileThrows) {
  const auto file = std::filesystem::temp_directory_path() / "evident_bad.ckpt";
  {
    std::ofstream os(file);
    os << "not a checkpoint\n";
  }
  EXPECT_THROW(load_checkpoint(file), ConfigError);
  std::filesystem::remove(file);
}

TEST(Config, ParsesCommentsAndRoundTrips) {
  std::istringstream is("# run\nepochs = 3\n\nlr=0.0005\nablation = single-head\nD_v = 7\n");
  RunConfig cfg;
  apply_settings(cfg, parse_key_values(is));
  EXPECT_EQ(cfg.train.epochs, 3u);
  EXPECT_DOUBLE_EQ(cfg.train.adam.lr, 5e-4);
  EXPECT_TRUE(cfg.model.flags.single_head);
  EXPECT_EQ(cfg.model.visual_dim, 7u);
  EXPECT_EQ(cfg.gen.D_v, 7u);

  std::ostringstream os;
  write_key_values(to_key_values(cfg), os);
  std::istringstream again(os.str());
  RunConfig copy;
  apply_settings(copy, parse_key_values(again));
  EXPECT_EQ(to_key_values(copy), to_key_values(cfg));
}

TEST(Config, SeedPropagates) {
  RunConfig cfg;
  apply_setting(cfg, "seed", "99");
  EXPECT_EQ(cfg.seed, 99u);
  EXPECT_EQ(cfg.gen.seed, 99u);
  EXPECT_EQ(cfg.train.seed, 99u);
}

TEST(Config, ErrorsAreConfigErrors) {
  RunConfig cfg;
  EXPECT_THROW(apply_setting(cfg, "no_such_key", "1"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "epochs", "many"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "ablation", "unknown"), ConfigError);
  std::istringstream bad("epochs 3\n");
  EXPECT_THROW(parse_key_values(bad), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/evident.cfg"), ConfigError);
  cfg.coverage = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
