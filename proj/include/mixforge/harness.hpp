#pragma once

// Training harness: config files, the SGD training loop over mixed batches,
// and the benchmark runner.
//
// Config files are flat `key = value` text; `#` starts a comment. Keys:
//
//   dataset        synth | cifar10 | cifar100 | folder     (default synth)
//   data_path      CIFAR directory or training image folder
//   test_path      test image folder (dataset=folder)
//   subset         use only the first N training samples (0 = all)
//   test_subset    same for the test split
//   synth.n, synth.n_test, synth.height, synth.width, synth.channels,
//   synth.classes, synth.pattern (stripes|constant), synth.noise,
//   synth.label_noise                                    (training split only)
//   policy, alpha, param.<key>                            see PolicyConfig
//   epochs, batch_size, lr, seed, hidden, eval_every, ece_bins, median_last
//
// Benchmark files additionally accept
//   policies = p1,p2,...      alpha_grid = a1,a2,...      trials = N
// and policy-scoped parameters `param.<policy>.<key>`.
//
// The config hash is the 64-bit FNV-1a of the canonical form: one
// `key=value` line per entry, keys sorted, whitespace around keys and
// values removed, comments and blank lines dropped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/data.hpp"
#include "mixforge/error.hpp"
#include "mixforge/model.hpp"
#include "mixforge/objective.hpp"
#include "mixforge/policies.hpp"
#include "mixforge/rng.hpp"

namespace mixforge {

inline constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace detail

/// Parsed key=value file.
struct KeyValues {
  std::map<std::string, std::string> entries;

  static KeyValues parse(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      std::string key = detail::trim(t.substr(0, eq));
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
      if (kv.entries.count(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
      kv.entries[key] = detail::trim(t.substr(eq + 1));
    }
    return kv;
  }

  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : entries) out += k + "=" + v + "\n";
    return out;
  }

  std::uint64_t hash() const { return fnv1a64(canonical()); }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    return it->second;
  }
};

enum class DatasetKind { synth, cifar10, cifar100, folder };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synth;
  std::string path;
  std::string test_path;
  std::size_t subset = 0;
  std::size_t test_subset = 0;
  SynthSpec synth{};
  std::size_t synth_test_n = 512;
};

struct TrainConfig {
  DatasetSpec data;
  PolicyConfig policy;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double lr = 0.05;
  std::uint64_t seed = 0;
  std::size_t hidden = 256;
  std::size_t eval_every = 0;   // 0: evaluate only after the last epoch
  std::size_t ece_bins = kDefaultEceBins;
  std::size_t median_last = 0;  // >0: final test top-1 is the median of the last k evaluations

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
    if (hidden == 0) throw ConfigError("hidden must be positive");
    if (ece_bins == 0) throw ConfigError("ece_bins must be positive");
    if (median_last > 0 && eval_every != 1) throw ConfigError("median_last needs eval_every = 1");
    policy.validate();
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(value, &used));
    } else {
      if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(value, &used));
    }
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': malformed number '" + value + "'");
  }
}

/// Applies the shared (non-policy) keys; returns the keys it did not know.
inline std::map<std::string, std::string> apply_common_keys(const KeyValues& kv, TrainConfig& cfg) {
  std::map<std::string, std::string> rest;
  for (const auto& [key, value] : kv.entries) {
    if (key == "dataset") {
      if (value == "synth") cfg.data.kind = DatasetKind::synth;
      else if (value == "cifar10") cfg.data.kind = DatasetKind::cifar10;
      else if (value == "cifar100") cfg.data.kind = DatasetKind::cifar100;
      else if (value == "folder") cfg.data.kind = DatasetKind::folder;
      else throw ConfigError("unknown dataset '" + value + "'");
    } else if (key == "data_path") cfg.data.path = value;
    else if (key == "test_path") cfg.data.test_path = value;
    else if (key == "subset") cfg.data.subset = parse_number<std::size_t>(key, value);
    else if (key == "test_subset") cfg.data.test_subset = parse_number<std::size_t>(key, value);
    else if (key == "synth.n") cfg.data.synth.n = parse_number<std::size_t>(key, value);
    else if (key == "synth.n_test") cfg.data.synth_test_n = parse_number<std::size_t>(key, value);
    else if (key == "synth.height") cfg.data.synth.height = parse_number<std::size_t>(key, value);
    else if (key == "synth.width") cfg.data.synth.width = parse_number<std::size_t>(key, value);
    else if (key == "synth.channels") cfg.data.synth.channels = parse_number<std::size_t>(key, value);
    else if (key == "synth.classes") cfg.data.synth.num_classes = parse_number<std::size_t>(key, value);
    else if (key == "synth.noise") cfg.data.synth.noise = parse_number<double>(key, value);
    else if (key == "synth.label_noise") cfg.data.synth.label_noise = parse_number<double>(key, value);
    else if (key == "synth.pattern") {
      if (value == "stripes") cfg.data.synth.pattern = SynthPattern::stripes;
      else if (value == "constant") cfg.data.synth.pattern = SynthPattern::constant;
      else throw ConfigError("unknown synth.pattern '" + value + "'");
    } else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(key, value);
    else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "lr") cfg.lr = parse_number<double>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "hidden") cfg.hidden = parse_number<std::size_t>(key, value);
    else if (key == "eval_every") cfg.eval_every = parse_number<std::size_t>(key, value);
    else if (key == "ece_bins") cfg.ece_bins = parse_number<std::size_t>(key, value);
    else if (key == "median_last") cfg.median_last = parse_number<std::size_t>(key, value);
    else rest[key] = value;
  }
  return rest;
}

}  // namespace detail

/// Reads MIXFORGE_SEED, if set.
inline std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("MIXFORGE_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  return detail::parse_number<std::uint64_t>("MIXFORGE_SEED", s);
}

inline TrainConfig parse_train_config(const KeyValues& kv) {
  TrainConfig cfg;
  auto rest = detail::apply_common_keys(kv, cfg);
  std::string policy = "vanilla";
  double alpha = 1.0;
  std::map<std::string, std::string> params;
  for (const auto& [key, value] : rest) {
    if (key == "policy") policy = value;
    else if (key == "alpha") alpha = detail::parse_number<double>(key, value);
    else if (key.rfind("param.", 0) == 0) params[key.substr(6)] = value;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  cfg.policy = PolicyConfig::from_params(parse_policy(policy), alpha, params);
  if (const auto env = seed_from_env()) cfg.seed = *env;
  cfg.validate();
  return cfg;
}

/// Expands a benchmark file into policies x alpha_grid x trials configs,
/// in that nesting order. Trial t uses seed + t.
inline std::vector<TrainConfig> parse_bench_config(const KeyValues& kv) {
  TrainConfig base;
  auto rest = detail::apply_common_keys(kv, base);
  if (const auto env = seed_from_env()) base.seed = *env;
  std::vector<std::string> policies{"vanilla"};
  std::vector<double> alphas{1.0};
  std::size_t trials = 1;
  std::map<std::string, std::map<std::string, std::string>> scoped;
  std::map<std::string, std::string> unscoped;
  for (const auto& [key, value] : rest) {
    if (key == "policy" || key == "policies") {
      policies = detail::split_list(value);
    } else if (key == "alpha" || key == "alpha_grid") {
      alphas.clear();
      for (const auto& a : detail::split_list(value)) alphas.push_back(detail::parse_number<double>(key, a));
    } else if (key == "trials") {
      trials = detail::parse_number<std::size_t>(key, value);
    } else if (key.rfind("param.", 0) == 0) {
      const std::string sub = key.substr(6);
      const auto dot = sub.find('.');
      if (dot == std::string::npos) unscoped[sub] = value;
      else scoped[sub.substr(0, dot)][sub.substr(dot + 1)] = value;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (policies.empty() || alphas.empty() || trials == 0) throw ConfigError("benchmark expands to no runs");
  if (!unscoped.empty() && policies.size() > 1) {
    throw ConfigError("unscoped param.<key> needs a single policy; use param.<policy>.<key>");
  }
  for (const auto& [name, _] : scoped) {
    if (std::find(policies.begin(), policies.end(), name) == policies.end()) {
      throw ConfigError("parameters given for policy '" + name + "' which is not benchmarked");
    }
  }

  std::vector<TrainConfig> out;
  for (const auto& name : policies) {
    const Policy p = parse_policy(name);
    auto params = scoped.count(name) ? scoped.at(name) : std::map<std::string, std::string>{};
    for (const auto& [k, v] : unscoped) params[k] = v;
    for (double a : alphas) {
      for (std::size_t t = 0; t < trials; ++t) {
        TrainConfig cfg = base;
        cfg.policy = PolicyConfig::from_params(p, a, params);
        cfg.seed = base.seed + t;
        cfg.validate();
        out.push_back(cfg);
      }
    }
  }
  return out;
}

struct DataSplits {
  Dataset train;
  Dataset test;
};

namespace detail {

inline void take_prefix(Dataset& ds, std::size_t n) {
  if (n == 0 || n >= ds.size()) return;
  ds.images.resize(n);
  ds.labels.resize(n);
}

}  // namespace detail

/// Loads (or synthesizes) the train and test splits of a config. Synthetic
/// data depends on the config seed; its test split carries no label noise.
inline DataSplits load_data(const TrainConfig& cfg) {
  DataSplits d;
  const DatasetSpec& s = cfg.data;
  switch (s.kind) {
    case DatasetKind::synth: {
      d.train = synth_dataset(s.synth, stream_key(cfg.seed, 11));
      SynthSpec test_spec = s.synth;
      test_spec.n = s.synth_test_n;
      test_spec.label_noise = 0.0;
      d.test = synth_dataset(test_spec, stream_key(cfg.seed, 12));
      d.test.split = Split::test;
      break;
    }
    case DatasetKind::cifar10:
    case DatasetKind::cifar100: {
      const auto v = s.kind == DatasetKind::cifar10 ? CifarVariant::cifar10 : CifarVariant::cifar100;
      d.train = read_cifar(s.path, v, Split::train);
      d.test = read_cifar(s.path, v, Split::test);
      break;
    }
    case DatasetKind::folder:
      if (s.path.empty() || s.test_path.empty()) throw ConfigError("dataset=folder needs data_path and test_path");
      d.train = read_image_dir(s.path);
      d.test = read_image_dir(s.test_path);
      d.test.split = Split::test;
      if (d.train.num_classes != d.test.num_classes) throw ShapeError("train and test folders differ in class count");
      break;
  }
  detail::take_prefix(d.train, s.subset);
  detail::take_prefix(d.test, s.test_subset);
  if (d.train.size() == 0 || d.test.size() == 0) throw EmptyInputError("dataset split is empty");
  if (!d.train.images[0].same_shape(d.test.images[0])) throw ShapeError("train and test images differ in shape");
  return d;
}

inline constexpr std::size_t kLambdaHistogramBins = 10;

struct RunReport {
  std::vector<double> epoch_loss;    // mean training MCE per epoch
  std::vector<double> test_history;  // test top-1 at each evaluation
  double train_top1 = 0.0;           // on the unmixed training split (its own labels)
  double test_top1 = 0.0;
  double test_ece = 0.0;
  double wall_seconds = 0.0;
  std::vector<std::size_t> lambda_hist = std::vector<std::size_t>(kLambdaHistogramBins, 0);
  double lambda_min = 1.0;
  double lambda_max = 0.0;
  double lambda_mean = 0.0;
  std::size_t steps = 0;

  double gap() const noexcept { return train_top1 - test_top1; }

  /// Every metric except wall time.
  bool same_metrics(const RunReport& o) const {
    return epoch_loss == o.epoch_loss && test_history == o.test_history && train_top1 == o.train_top1 &&
           test_top1 == o.test_top1 && test_ece == o.test_ece && lambda_hist == o.lambda_hist &&
           lambda_min == o.lambda_min && lambda_max == o.lambda_max && lambda_mean == o.lambda_mean &&
           steps == o.steps;
  }
};

/// Bin of lambda_effective in the histogram; 1.0 falls in the last bin.
inline std::size_t lambda_bin(double lam) noexcept {
  const auto b = static_cast<std::size_t>(lam * static_cast<double>(kLambdaHistogramBins));
  return std::min(b, kLambdaHistogramBins - 1);
}

struct Evaluation {
  double top1 = 0.0;
  double ece = 0.0;
};

inline Evaluation evaluate(const TinyModel& model, const Dataset& ds, std::size_t ece_bins) {
  std::vector<Prediction> preds;
  preds.reserve(ds.size());
  for (const auto& img : ds.images) preds.push_back(model.predict(img.data()));
  return Evaluation{top1_accuracy(preds, ds.labels), ece(preds, ds.labels, ece_bins)};
}

inline ImageTensor flip_horizontal(const ImageTensor& x) {
  ImageTensor out = x;
  for (std::size_t y = 0; y < x.height(); ++y) {
    for (std::size_t c = 0; c < x.width(); ++c) {
      for (std::size_t ch = 0; ch < x.channels(); ++ch) out.at(y, c, ch) = x.at(y, x.width() - 1 - c, ch);
    }
  }
  return out;
}

/// Mini-batch SGD on the mixup cross-entropy. Each step: horizontal flip
/// (p = 0.5) per sample, then the configured policy on the batch. Hidden
/// layer manifold mixing blends hidden activations with the pairs and
/// lambdas that apply_policy would use. Deterministic given the config.
inline RunReport train(const TrainConfig& cfg, const DataSplits& data) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset& tr = data.train;
  const std::size_t n = tr.size();
  const std::size_t dim = tr.images[0].size();
  TinyModel model(dim, cfg.hidden, tr.num_classes, cfg.seed);

  std::vector<LabelVector> onehots;
  onehots.reserve(n);
  for (std::size_t k = 0; k < n; ++k) onehots.push_back(tr.label_vector(k));

  const bool hidden_mix = cfg.policy.policy == Policy::manifoldmix && cfg.policy.layer == 1;
  const std::uint64_t shuffle_key = stream_key(cfg.seed, 1);
  const std::uint64_t flip_key = stream_key(cfg.seed, 2);
  const std::uint64_t mix_key = stream_key(cfg.seed, 3);

  RunReport report;
  double lambda_total = 0.0;
  std::size_t lambda_count = 0;
  std::vector<std::size_t> order(n);
  std::vector<double> grad;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = Rng::stream(shuffle_key, epoch);
    for (std::size_t k = n - 1; k > 0; --k) std::swap(order[k], order[shuffle.below(k + 1)]);

    double epoch_loss = 0.0;
    std::size_t epoch_samples = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::size_t bsz = end - start;
      Rng flip = Rng::stream(flip_key, step);
      std::vector<ImageTensor> images;
      std::vector<LabelVector> labels;
      images.reserve(bsz);
      labels.reserve(bsz);
      for (std::size_t k = start; k < end; ++k) {
        const auto& img = tr.images[order[k]];
        images.push_back(flip.uniform() < 0.5 ? flip_horizontal(img) : img);
        labels.push_back(onehots[order[k]]);
      }

      const std::uint64_t step_seed = stream_key(mix_key, step);
      std::vector<ModelSample> samples(bsz);
      std::vector<MixResult> mixed;
      if (hidden_mix) {
        const auto plans = plan_pairs(cfg.policy, bsz, step_seed);
        for (std::size_t k = 0; k < bsz; ++k) {
          const auto& p = plans[k];
          samples[k] = ModelSample{images[p.pair.i].data(), images[p.pair.j].data(), p.lambda,
                                   &labels[p.pair.i], &labels[p.pair.j], p.lambda};
          report.lambda_hist[lambda_bin(p.lambda)]++;
          report.lambda_min = std::min(report.lambda_min, p.lambda);
          report.lambda_max = std::max(report.lambda_max, p.lambda);
          lambda_total += p.lambda;
          ++lambda_count;
        }
      } else {
        mixed = apply_policy(cfg.policy, images, labels, step_seed);
        const auto plans = plan_pairs(cfg.policy, bsz, step_seed);
        for (std::size_t k = 0; k < bsz; ++k) {
          const auto& r = mixed[k];
          const auto& p = plans[k].pair;
          samples[k] = ModelSample{r.image.data(), {}, 1.0, &labels[p.i], &labels[p.j], r.lambda_effective};
          report.lambda_hist[lambda_bin(r.lambda_effective)]++;
          report.lambda_min = std::min(report.lambda_min, r.lambda_effective);
          report.lambda_max = std::max(report.lambda_max, r.lambda_effective);
          lambda_total += r.lambda_effective;
          ++lambda_count;
        }
      }

      const double loss = model.loss_and_grad(samples, &grad);
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite training loss at step " + std::to_string(step) + " (epoch " +
                              std::to_string(epoch) + ")");
      }
      model.sgd_step(grad, cfg.lr);
      epoch_loss += loss * static_cast<double>(bsz);
      epoch_samples += bsz;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_samples));
    const bool last = epoch + 1 == cfg.epochs;
    if ((cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) || (cfg.eval_every == 0 && last)) {
      report.test_history.push_back(evaluate(model, data.test, cfg.ece_bins).top1);
    }
  }

  const Evaluation test = evaluate(model, data.test, cfg.ece_bins);
  report.train_top1 = evaluate(model, tr, cfg.ece_bins).top1;
  report.test_top1 = test.top1;
  report.test_ece = test.ece;
  if (cfg.median_last > 0 && !report.test_history.empty()) {
    const std::size_t k = std::min(cfg.median_last, report.test_history.size());
    std::vector<double> tail(report.test_history.end() - static_cast<std::ptrdiff_t>(k), report.test_history.end());
    std::sort(tail.begin(), tail.end());
    report.test_top1 = k % 2 ? tail[k / 2] : 0.5 * (tail[k / 2 - 1] + tail[k / 2]);
  }
  report.steps = step;
  report.lambda_mean = lambda_count ? lambda_total / static_cast<double>(lambda_count) : 0.0;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline RunReport train(const TrainConfig& cfg) { return train(cfg, load_data(cfg)); }

/// One row of a benchmark table: a single run, or the mean over the trials
/// of a configuration.
struct BenchRow {
  std::string policy;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  bool is_mean = false;
  std::size_t trials = 1;
  std::optional<RunReport> report;
  std::string error;
  bool best = false;
};

namespace detail {

/// Configs equal up to the seed share a group.
inline std::string group_key(const TrainConfig& c) {
  std::string k = std::string(policy_name(c.policy.policy)) + "|" + format_double(c.policy.alpha);
  for (const auto& [key, v] : c.policy.params()) k += "|" + key + "=" + v;
  const auto& d = c.data;
  const auto& sy = d.synth;
  k += "|" + std::to_string(static_cast<int>(d.kind)) + "|" + d.path + "|" + d.test_path + "|" +
       std::to_string(d.subset) + "|" + std::to_string(d.test_subset) + "|" + std::to_string(sy.n) + "|" +
       std::to_string(d.synth_test_n) + "|" + std::to_string(sy.height) + "x" + std::to_string(sy.width) + "x" +
       std::to_string(sy.channels) + "|" + std::to_string(sy.num_classes) + "|" +
       std::to_string(static_cast<int>(sy.pattern)) + "|" + format_double(sy.noise) + "|" +
       format_double(sy.label_noise);
  k += "|" + std::to_string(c.epochs) + "|" + std::to_string(c.batch_size) + "|" + format_double(c.lr) + "|" +
       std::to_string(c.hidden) + "|" + std::to_string(c.eval_every) + "|" + std::to_string(c.ece_bins) + "|" +
       std::to_string(c.median_last);
  return k;
}

inline RunReport mean_report(const std::vector<const RunReport*>& reps) {
  RunReport m;
  const auto n = static_cast<double>(reps.size());
  m.lambda_min = 1.0;
  m.lambda_max = 0.0;
  for (const RunReport* r : reps) {
    m.train_top1 += r->train_top1 / n;
    m.test_top1 += r->test_top1 / n;
    m.test_ece += r->test_ece / n;
    m.wall_seconds += r->wall_seconds / n;
    m.lambda_mean += r->lambda_mean / n;
    m.lambda_min = std::min(m.lambda_min, r->lambda_min);
    m.lambda_max = std::max(m.lambda_max, r->lambda_max);
    for (std::size_t b = 0; b < kLambdaHistogramBins; ++b) m.lambda_hist[b] += r->lambda_hist[b];
    if (!r->epoch_loss.empty()) {
      m.epoch_loss.resize(std::max(m.epoch_loss.size(), r->epoch_loss.size()), 0.0);
      for (std::size_t e = 0; e < r->epoch_loss.size(); ++e) m.epoch_loss[e] += r->epoch_loss[e] / n;
    }
  }
  return m;
}

inline std::size_t policy_rank(const std::string& name) {
  for (std::size_t k = 0; k < kPolicyNames.size(); ++k) {
    if (kPolicyNames[k].second == name) return k;
  }
  return kPolicyNames.size();
}

}  // namespace detail

/// Runs every config (errors are recorded per row), appends a mean row after
/// each group of configs that differ only in seed when `aggregate` is set,
/// marks the best alpha per policy by test top-1 (mean rows when
/// aggregating), and orders rows by policy, keeping input order otherwise.
inline std::vector<BenchRow> bench(const std::vector<TrainConfig>& cfgs, bool aggregate = true) {
  if (cfgs.empty()) throw ConfigError("bench needs at least one configuration");
  std::vector<BenchRow> rows;
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<std::string> group_order;
  for (const auto& cfg : cfgs) {
    BenchRow row;
    row.policy = std::string(policy_name(cfg.policy.policy));
    row.alpha = cfg.policy.alpha;
    row.seed = cfg.seed;
    try {
      row.report = train(cfg);
    } catch (const Error& e) {
      row.error = e.what();
    }
    const auto key = detail::group_key(cfg);
    if (!groups.count(key)) group_order.push_back(key);
    groups[key].push_back(rows.size());
    rows.push_back(std::move(row));
  }

  std::vector<BenchRow> out;
  for (const auto& key : group_order) {
    const auto& members = groups[key];
    for (std::size_t idx : members) out.push_back(rows[idx]);
    if (aggregate && members.size() > 1) {
      BenchRow mean;
      mean.policy = rows[members.front()].policy;
      mean.alpha = rows[members.front()].alpha;
      mean.seed = rows[members.front()].seed;
      mean.is_mean = true;
      std::vector<const RunReport*> reps;
      for (std::size_t idx : members) {
        if (rows[idx].report) reps.push_back(&*rows[idx].report);
      }
      mean.trials = reps.size();
      if (reps.empty()) mean.error = "all trials failed";
      else mean.report = detail::mean_report(reps);
      out.push_back(std::move(mean));
    }
  }

  // Candidates for best-alpha: mean rows plus runs not covered by a mean row.
  std::map<std::string, std::size_t> best;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& r = out[k];
    if (!r.report) continue;
    const bool covered = !r.is_mean && aggregate && k + 1 < out.size() &&
                         std::any_of(out.begin() + static_cast<std::ptrdiff_t>(k) + 1, out.end(), [&](const BenchRow& m) {
                           return m.is_mean && m.policy == r.policy && m.alpha == r.alpha;
                         });
    if (covered) continue;
    auto it = best.find(r.policy);
    if (it == best.end() || r.report->test_top1 > out[it->second].report->test_top1) best[r.policy] = k;
  }
  for (const auto& [_, k] : best) out[k].best = true;

  std::stable_sort(out.begin(), out.end(), [](const BenchRow& a, const BenchRow& b) {
    return detail::policy_rank(a.policy) < detail::policy_rank(b.policy);
  });
  return out;
}

/// CSV with a header row. Wall time is left out so that the file is a pure
/// function of the configs.
inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "policy,alpha,seed,kind,trials,train_top1,test_top1,gap,ece,final_loss,best,error\n";
  for (const auto& r : rows) {
    out += r.policy + "," + format_double(r.alpha) + "," + std::to_string(r.seed) + "," +
           (r.is_mean ? "mean" : "run") + "," + std::to_string(r.trials) + ",";
    if (r.report) {
      const auto& p = *r.report;
      out += format_double(p.train_top1) + "," + format_double(p.test_top1) + "," + format_double(p.gap()) + "," +
             format_double(p.test_ece) + "," + (p.epoch_loss.empty() ? "" : format_double(p.epoch_loss.back()));
    } else {
      out += ",,,,";
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += std::string(",") + (r.best ? "1" : "0") + "," + err + "\n";
  }
  return out;
}

/// Aligned plain-text rendering of the same rows.
inline std::string bench_table(const std::vector<BenchRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"policy", "alpha", "seed", "kind", "train_top1", "test_top1", "gap", "ece", "best"});
  const auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    char alpha[32];
    std::snprintf(alpha, sizeof alpha, "%g", r.alpha);
    std::vector<std::string> line{r.policy, alpha, r.is_mean ? "-" : std::to_string(r.seed),
                                  r.is_mean ? "mean(" + std::to_string(r.trials) + ")" : "run"};
    if (r.report) {
      char e[32];
      std::snprintf(e, sizeof e, "%.4f", r.report->test_ece);
      line.insert(line.end(), {pct(r.report->train_top1), pct(r.report->test_top1), pct(r.report->gap()), e});
    } else {
      line.insert(line.end(), {"error", "", "", ""});
    }
    line.push_back(r.best ? "*" : "");
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  std::string out;
  for (const auto& line : cells) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      std::string cell = line[c];
      cell.resize(width[c], ' ');
      text += (c ? "  " : "") + cell;
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out += text + "\n";
  }
  return out;
}

}  // namespace mixforge
