#include <gtest/gtest.h>

#include <cstdlib>
#include <vector>

#include "mixforge/harness.hpp"

using namespace mixforge;

namespace {

TrainConfig small_config(Policy p, std::size_t epochs = 3) {
  TrainConfig cfg;
  cfg.data.synth.n = 128;
  cfg.data.synth_test_n = 64;
  cfg.policy.policy = p;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.hidden = 32;
  cfg.seed = 5;
  return cfg;
}

struct ScopedEnv {
  explicit ScopedEnv(const char* value) { ::setenv("MIXFORGE_SEED", value, 1); }
  ~ScopedEnv() { ::unsetenv("MIXFORGE_SEED"); }
};

/// Largest entrywise |a - n| / max(|a| + |n|, 1e-8) between the analytic
/// gradient and central differences.
double gradient_check(TinyModel& model, std::span<const ModelSample> batch, double eps) {
  std::vector<double> grad;
  model.loss_and_grad(batch, &grad);
  double worst = 0.0;
  for (std::size_t k = 0; k < model.num_params(); ++k) {
    const double keep = model.params()[k];
    model.params()[k] = keep + eps;
    const double up = model.loss_and_grad(batch, nullptr);
    model.params()[k] = keep - eps;
    const double down = model.loss_and_grad(batch, nullptr);
    model.params()[k] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(grad[k] - numeric) / std::max(std::abs(grad[k]) + std::abs(numeric), 1e-8));
  }
  return worst;
}

}  // namespace

TEST(TinyModel, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 3 + rng.below(5), hid = 2 + rng.below(6), k = 2 + rng.below(4);
    TinyModel model(in, hid, k, 100 + trial);
    std::vector<std::vector<double>> xs(8, std::vector<double>(in));
    for (auto& x : xs) {
      for (auto& v : x) v = rng.uniform();
    }
    std::vector<LabelVector> ys;
    for (int s = 0; s < 8; ++s) ys.push_back(LabelVector::one_hot(k, rng.below(k)));
    std::vector<ModelSample> batch;
    for (std::size_t s = 0; s < 4; ++s) {
      const double lam = rng.uniform();
      if (s % 2) {
        batch.push_back(ModelSample{xs[s], xs[s + 4], lam, &ys[s], &ys[s + 4], lam});
      } else {
        batch.push_back(ModelSample{xs[s], {}, 1.0, &ys[s], &ys[s + 4], lam});
      }
    }
    worst = std::max(worst, gradient_check(model, batch, 1e-4));
  }
  EXPECT_LE(worst, 1e-3);
}

TEST(TinyModel, ShapeErrors) {
  EXPECT_THROW(TinyModel(0, 4, 2, 1), ParameterError);
  TinyModel m(4, 3, 2, 1);
  const std::vector<double> x(5, 0.0);
  EXPECT_THROW(m.predict(x), ShapeError);
  EXPECT_THROW(m.loss_and_grad({}, nullptr), EmptyInputError);
}

TEST(Train, VanillaHistogramIsPointMassAtOne) {
  const auto r = train(small_config(Policy::vanilla, 2));
  for (std::size_t b = 0; b + 1 < kLambdaHistogramBins; ++b) EXPECT_EQ(r.lambda_hist[b], 0u);
  EXPECT_EQ(r.lambda_hist.back(), 2u * 128u);
  EXPECT_EQ(r.lambda_min, 1.0);
  EXPECT_EQ(r.lambda_max, 1.0);
}

TEST(Train, SynthSanityRun) {
  TrainConfig cfg;
  cfg.data.synth.n = 512;
  cfg.data.synth.num_classes = 2;
  cfg.epochs = 30;
  cfg.seed = 3;
  const auto r = train(cfg);
  EXPECT_GE(r.test_top1, 0.95);
  EXPECT_EQ(r.epoch_loss.size(), 30u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(Train, Reproducible) {
  for (Policy p : {Policy::mixup, Policy::cutmix, Policy::manifoldmix, Policy::puzzlemix}) {
    const auto cfg = small_config(p);
    const auto a = train(cfg), b = train(cfg);
    EXPECT_TRUE(a.same_metrics(b)) << policy_name(p);
    auto other = cfg;
    other.seed = 6;
    EXPECT_FALSE(train(other).same_metrics(a)) << policy_name(p);
  }
}

TEST(Train, HiddenManifoldMixDiffersFromInputMix) {
  auto hidden = small_config(Policy::manifoldmix);
  auto input = hidden;
  input.policy.layer = 0;
  const auto a = train(hidden), b = train(input);
  EXPECT_EQ(a.lambda_hist, b.lambda_hist);  // same pairs and lambdas
  EXPECT_NE(a.epoch_loss, b.epoch_loss);
}

TEST(Train, MedianOfLastEvaluations) {
  auto cfg = small_config(Policy::vanilla, 5);
  cfg.eval_every = 1;
  cfg.median_last = 3;
  const auto r = train(cfg);
  ASSERT_EQ(r.test_history.size(), 5u);
  std::vector<double> tail(r.test_history.end() - 3, r.test_history.end());
  std::sort(tail.begin(), tail.end());
  EXPECT_EQ(r.test_top1, tail[1]);
  cfg.eval_every = 0;
  EXPECT_THROW(train(cfg), ConfigError);
}

TEST(Train, DivergenceIsReported) {
  auto cfg = small_config(Policy::mixup, 2);
  cfg.lr = 1e300;
  try {
    train(cfg);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Bench, SeedPairGetsMeanRow) {
  auto a = small_config(Policy::mixup, 1);
  auto b = a;
  b.seed = 9;
  const auto rows = bench({a, b});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_FALSE(rows[0].is_mean);
  EXPECT_FALSE(rows[1].is_mean);
  EXPECT_TRUE(rows[2].is_mean);
  EXPECT_DOUBLE_EQ(rows[2].report->test_top1, 0.5 * (rows[0].report->test_top1 + rows[1].report->test_top1));
  EXPECT_EQ(bench({a, b}, false).size(), 2u);
}

TEST(Bench, AlphaSweepMarksOneBest) {
  std::vector<TrainConfig> cfgs;
  for (double alpha : {0.1, 0.2, 0.5, 1.0, 2.0, 4.0}) {
    auto c = small_config(Policy::mixup, 1);
    c.policy.alpha = alpha;
    cfgs.push_back(c);
  }
  cfgs.push_back(small_config(Policy::vanilla, 1));
  const auto rows = bench(cfgs);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0].policy, "vanilla");  // sorted by policy
  std::size_t best = 0;
  double top = -1.0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    best += rows[k].best;
    top = std::max(top, rows[k].report->test_top1);
  }
  EXPECT_EQ(best, 1u);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k].best) EXPECT_EQ(rows[k].report->test_top1, top);
  }
  const auto csv = bench_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
}

TEST(Bench, ErrorsAreRecordedPerRow) {
  auto bad = small_config(Policy::mixup, 1);
  bad.data.kind = DatasetKind::cifar10;
  bad.data.path = "/nonexistent/cifar";
  const auto rows = bench({bad, small_config(Policy::mixup, 1)});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].report.has_value());
  EXPECT_NE(rows[0].error.find("/nonexistent/cifar"), std::string::npos);
  EXPECT_TRUE(rows[1].report.has_value());
  EXPECT_THROW(bench({}), ConfigError);
}

TEST(Config, HashIgnoresLayout) {
  const auto a = KeyValues::parse("policy = mixup\nalpha=1\n# comment\n\nseed = 4\n");
  const auto b = KeyValues::parse("seed=4   # trailing\n  alpha =1\npolicy=mixup");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.canonical(), "alpha=1\npolicy=mixup\nseed=4\n");
  EXPECT_NE(a.hash(), KeyValues::parse("policy=mixup\nalpha=2\nseed=4").hash());
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, Errors) {
  EXPECT_THROW(KeyValues::parse("a=1\na=2"), ConfigError);
  EXPECT_THROW(KeyValues::parse("just text"), ConfigError);
  EXPECT_THROW(parse_train_config(KeyValues::parse("epoch=3")), ConfigError);
  EXPECT_THROW(parse_train_config(KeyValues::parse("policy=cutmix\nparam.decay=2")), ConfigError);
  EXPECT_THROW(parse_train_config(KeyValues::parse("lr=fast")), ConfigError);
  EXPECT_THROW(parse_train_config(KeyValues::parse("epochs=0")), ConfigError);
  EXPECT_THROW(parse_bench_config(KeyValues::parse("policies=mixup,fmix\nparam.decay=2")), ConfigError);
}

TEST(Config, TrainKeys) {
  const auto cfg = parse_train_config(KeyValues::parse(
      "policy=fmix\nalpha=0.5\nparam.decay=2.5\nepochs=7\nsynth.classes=4\nsynth.label_noise=0.2\nseed=11"));
  EXPECT_EQ(cfg.policy.policy, Policy::fmix);
  EXPECT_EQ(cfg.policy.decay, 2.5);
  EXPECT_EQ(cfg.epochs, 7u);
  EXPECT_EQ(cfg.data.synth.num_classes, 4u);
  EXPECT_EQ(cfg.seed, 11u);
}

TEST(Config, EnvironmentSeedOverrides) {
  ScopedEnv env("77");
  EXPECT_EQ(parse_train_config(KeyValues::parse("seed=3")).seed, 77u);
  const auto runs = parse_bench_config(KeyValues::parse("seed=3\ntrials=2"));
  ASSERT_EQ(runs.size(), 2u);
  EXPECT_EQ(runs[0].seed, 77u);
  EXPECT_EQ(runs[1].seed, 78u);
}

TEST(Config, BenchExpansion) {
  const auto runs = parse_bench_config(KeyValues::parse(
      "policies = mixup, gridmix\nalpha_grid = 0.2, 1\ntrials = 3\nparam.gridmix.n_cells = 2\nseed = 10"));
  ASSERT_EQ(runs.size(), 12u);
  EXPECT_EQ(runs[0].policy.policy, Policy::mixup);
  EXPECT_EQ(runs[2].seed, 12u);
  EXPECT_EQ(runs[3].policy.alpha, 1.0);
  EXPECT_EQ(runs[6].policy.policy, Policy::gridmix);
  EXPECT_EQ(runs[6].policy.n_cells, 2u);
}
