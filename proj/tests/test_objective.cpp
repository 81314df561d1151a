#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mixforge/objective.hpp"
#include "mixforge/rng.hpp"

using namespace mixforge;

namespace {

Prediction random_prediction(Rng& rng, std::size_t k) {
  std::vector<double> z(k);
  for (auto& v : z) v = rng.uniform(-4, 4);
  return Prediction::softmax(z);
}

LabelVector random_label(Rng& rng, std::size_t k) {
  std::vector<double> p(k);
  double t = 0;
  for (auto& v : p) t += (v = rng.uniform());
  for (auto& v : p) v /= t;
  return LabelVector(p);
}

/// Prediction with the given top probability on class `top`, rest spread evenly.
Prediction with_confidence(std::size_t k, std::size_t top, double conf) {
  std::vector<double> p(k, (1.0 - conf) / double(k - 1));
  p[top] = conf;
  return Prediction(p);
}

}  // namespace

TEST(CrossEntropy, PerfectPrediction) {
  EXPECT_NEAR(cross_entropy(Prediction({0.0, 1.0, 0.0}), LabelVector::one_hot(3, 1)), 0.0, 1e-15);
  // The floor keeps a confidently wrong prediction finite.
  EXPECT_NEAR(cross_entropy(Prediction({0.0, 1.0}), LabelVector::one_hot(2, 0)), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, UniformOverTen) {
  const Prediction p(std::vector<double>(10, 0.1));
  EXPECT_NEAR(cross_entropy(p, LabelVector::one_hot(10, 4)), 2.302585, 1e-6);
}

TEST(CrossEntropy, SoftLabelLoop) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_prediction(rng, 7);
    const auto y = random_label(rng, 7);
    double ref = 0;
    for (std::size_t k = 0; k < 7; ++k) ref += -y[k] * std::log(p[k]);
    EXPECT_NEAR(cross_entropy(p, y), ref, 1e-12);
  }
  EXPECT_THROW(cross_entropy(random_prediction(rng, 3), LabelVector::one_hot(4, 0)), ShapeError);
}

TEST(MixupCrossEntropy, BoundaryAndCollapse) {
  Rng rng(2);
  const auto p = random_prediction(rng, 5);
  const auto a = LabelVector::one_hot(5, 1), b = LabelVector::one_hot(5, 3);
  EXPECT_EQ(mixup_cross_entropy(p, a, b, 1.0), cross_entropy(p, a));
  EXPECT_NEAR(mixup_cross_entropy(p, a, a, 0.3), cross_entropy(p, a), 1e-12);
}

TEST(MixupCrossEntropy, SoftLabelIdentity) {
  Rng rng(3);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t k = 2 + rng.below(9);
    const auto p = random_prediction(rng, k);
    const auto a = LabelVector::one_hot(k, rng.below(k));
    const auto b = LabelVector::one_hot(k, rng.below(k));
    const double lam = rng.uniform();
    ASSERT_NEAR(mixup_cross_entropy(p, a, b, lam), cross_entropy(p, mix_labels_linear(a, b, lam)), 1e-12);
  }
}

TEST(MixupCrossEntropy, LinearInLambda) {
  Rng rng(4);
  const auto p = random_prediction(rng, 6);
  const auto a = random_label(rng, 6), b = random_label(rng, 6);
  const double l0 = mixup_cross_entropy(p, a, b, 0.2);
  const double l1 = mixup_cross_entropy(p, a, b, 0.5);
  const double l2 = mixup_cross_entropy(p, a, b, 0.8);
  EXPECT_NEAR(l1 - l0, l2 - l1, 1e-12);
  EXPECT_GE(l0, 0.0);
}

TEST(Top1, Counting) {
  std::vector<Prediction> preds;
  std::vector<std::size_t> targets;
  for (std::size_t k = 0; k < 7; ++k) {
    preds.push_back(with_confidence(3, k % 3, 0.6));
    targets.push_back(k < 3 ? k % 3 : (k + 1) % 3);
  }
  EXPECT_NEAR(top1_accuracy(preds, targets), 3.0 / 7.0, 1e-12);
  std::vector<std::size_t> right(7), wrong(7);
  for (std::size_t k = 0; k < 7; ++k) right[k] = k % 3, wrong[k] = (k + 2) % 3;
  EXPECT_EQ(top1_accuracy(preds, right), 1.0);
  EXPECT_EQ(top1_accuracy(preds, wrong), 0.0);
  EXPECT_THROW(top1_accuracy({}, {}), EmptyInputError);
}

TEST(Top1, TiesGoToLowestIndex) {
  const std::vector<Prediction> preds{Prediction({0.4, 0.4, 0.2})};
  EXPECT_EQ(top1_accuracy(preds, std::vector<std::size_t>{0}), 1.0);
}

TEST(Ece, ConfidentAndCorrect) {
  const std::vector<Prediction> preds(5, Prediction({1.0, 0.0}));
  EXPECT_EQ(ece(preds, std::vector<std::size_t>(5, 0)), 0.0);
}

TEST(Ece, SingleWrongSample) {
  const std::vector<Prediction> preds{with_confidence(2, 0, 0.9)};
  EXPECT_NEAR(ece(preds, std::vector<std::size_t>{1}), 0.9, 1e-12);
}

TEST(Ece, BinEdgesClosedOnRight) {
  EXPECT_EQ(ece_bin(0.0, 10), 0u);
  EXPECT_EQ(ece_bin(0.1, 10), 0u);
  EXPECT_EQ(ece_bin(0.1000001, 10), 1u);
  EXPECT_EQ(ece_bin(1.0, 10), 9u);
}

TEST(Ece, CalibratedSamplerIsSmall) {
  // Each confidence is drawn uniformly within a bin and the sample is
  // correct with exactly that probability.
  const std::size_t bins = 15;
  Rng rng(5);
  std::vector<Prediction> preds;
  std::vector<std::size_t> targets;
  for (int t = 0; t < 200000; ++t) {
    const std::size_t b = 8 + rng.below(7);  // confidences above 1/2
    const double conf = (double(b) + rng.uniform()) / double(bins);
    preds.push_back(with_confidence(2, 0, conf));
    targets.push_back(rng.uniform() < conf ? 0 : 1);
  }
  // Direct formula oracle.
  std::vector<double> n(bins, 0), hit(bins, 0), cs(bins, 0);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const double c = preds[k].confidence();
    std::size_t b = 0;
    while (b + 1 < bins && c > double(b + 1) / double(bins)) ++b;
    n[b] += 1, cs[b] += c, hit[b] += targets[k] == 0;
  }
  double ref = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (n[b] > 0) ref += n[b] / double(preds.size()) * std::abs(hit[b] / n[b] - cs[b] / n[b]);
  }
  const double e = ece(preds, targets, bins);
  EXPECT_NEAR(e, ref, 1e-12);
  EXPECT_LE(e, 1.0 / (2.0 * bins));
}

TEST(Ece, Errors) {
  EXPECT_THROW(ece({}, {}), EmptyInputError);
  const std::vector<Prediction> preds{Prediction({0.5, 0.5})};
  EXPECT_THROW(ece(preds, std::vector<std::size_t>{0}, 0), ParameterError);
}

TEST(Prediction, Validation) {
  EXPECT_THROW(Prediction({0.5, 0.6}), ParameterError);
  EXPECT_THROW(Prediction(std::vector<double>{}), ShapeError);
  const double big[] = {1000.0, 0.0, -1000.0};
  const auto p = Prediction::softmax(big);
  EXPECT_NEAR(p[0], 1.0, 1e-12);
}
