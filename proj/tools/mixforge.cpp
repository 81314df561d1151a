// mixforge command line: mix, grid, stats, train, bench.
//
// Exit codes: 0 success, 1 runtime/I-O failure, 2 usage or configuration
// error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mixforge/mixforge.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mixforge;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : Error {
  using Error::Error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  detail::write_file(path, text);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const auto env = seed_from_env()) return *env;
  return 0;
}

std::map<std::string, std::string> parse_params(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--param expects key=value, got '" + item + "'");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

SaliencyMap read_weight_map(const fs::path& path) {
  const ImageTensor img = read_pnm(path);
  return SaliencyMap(img.height(), img.width(), luminance(img));
}

std::string mask_file_bytes(const MixMask& m) { return encode_pgm(m); }

// ---------------------------------------------------------------- mix

/// Everything that determines a mix run, as flat text. Hashing and sidecar
/// replay both go through this map.
using RunSpec = std::map<std::string, std::string>;

std::uint64_t spec_hash(const RunSpec& spec) {
  KeyValues kv;
  kv.entries = spec;
  return kv.hash();
}

PolicyConfig policy_from_spec(const RunSpec& spec) {
  std::map<std::string, std::string> params;
  for (const auto& [k, v] : spec) {
    if (k.rfind("param.", 0) == 0) params[k.substr(6)] = v;
  }
  return PolicyConfig::from_params(parse_policy(spec.at("policy")), detail::parse_number<double>("alpha", spec.at("alpha")),
                                   params);
}

json result_json(const MixResult& r) {
  json j;
  j["lambda_nominal"] = r.lambda_nominal;
  j["lambda_effective"] = r.lambda_effective;
  return j;
}

void run_mix(const RunSpec& spec, const fs::path& out_dir) {
  const PolicyConfig cfg = policy_from_spec(spec);
  const std::uint64_t seed = detail::parse_number<std::uint64_t>("seed", spec.at("seed"));
  std::optional<double> fixed_lambda;
  if (spec.count("lambda")) {
    fixed_lambda = detail::parse_number<double>("lambda", spec.at("lambda"));
    if (!(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) throw UsageError("--lambda must lie in [0,1]");
  }
  ensure_dir(out_dir);

  json sidecar;
  sidecar["tool"] = "mixforge mix";
  sidecar["config_hash"] = hex64(spec_hash(spec));
  sidecar["seed"] = seed;
  json config = json::object();
  for (const auto& [k, v] : spec) config[k] = v;
  sidecar["config"] = config;
  json items = json::array();

  const std::string caption = "mixforge mix policy=" + spec.at("policy") + " seed=" + spec.at("seed");

  if (spec.count("pair.a")) {
    const ImageTensor a = read_pnm(spec.at("pair.a"));
    const ImageTensor b = read_pnm(spec.at("pair.b"));
    if (!a.same_shape(b)) throw ShapeError("pair images differ in shape: " + spec.at("pair.a") + ", " + spec.at("pair.b"));
    std::optional<SaliencyMap> weights;
    if (spec.count("weights")) weights = read_weight_map(spec.at("weights"));
    if (cfg.policy == Policy::guidedcut && !weights) throw UsageError("guidedcut needs --weights <donor map.pgm>");
    // Same convention as pair 0 of a batch: lambda first, then the policy,
    // on substream 1.
    Rng rng = Rng::stream(seed, 1);
    double lambda = 1.0;
    if (cfg.policy != Policy::vanilla) lambda = sample_lambda(cfg.alpha, rng).lambda;
    if (fixed_lambda) lambda = *fixed_lambda;
    const auto y_a = LabelVector::one_hot(2, 0), y_b = LabelVector::one_hot(2, 1);
    const MixResult r = mix_pair(cfg, a, b, y_a, y_b, lambda, rng, weights ? &*weights : nullptr);
    json item = result_json(r);
    item["image"] = "mixed.ppm";
    write_pnm(out_dir / "mixed.ppm", r.image, caption);
    if (r.mask) {
      item["mask"] = "mask.pgm";
      detail::write_file(out_dir / "mask.pgm", mask_file_bytes(*r.mask));
    }
    item["label"] = std::vector<double>(r.label.probs().begin(), r.label.probs().end());
    items.push_back(item);
  } else {
    Dataset ds;
    if (spec.count("folder")) {
      ds = read_image_dir(spec.at("folder"));
    } else {
      const auto variant = spec.at("variant") == "cifar100" ? CifarVariant::cifar100 : CifarVariant::cifar10;
      ds = read_cifar(spec.at("cifar"), variant, spec.at("split") == "test" ? Split::test : Split::train);
    }
    const std::size_t count = std::min(ds.size(), detail::parse_number<std::size_t>("count", spec.at("count")));
    if (count == 0) throw EmptyInputError("no samples selected");
    if (cfg.policy == Policy::guidedcut) throw UsageError("guidedcut is only available with --pair and --weights");
    std::vector<ImageTensor> images(ds.images.begin(), ds.images.begin() + static_cast<std::ptrdiff_t>(count));
    std::vector<LabelVector> labels;
    for (std::size_t k = 0; k < count; ++k) labels.push_back(ds.label_vector(k));
    std::vector<MixResult> results;
    const auto plans = plan_pairs(cfg, count, seed);
    if (fixed_lambda) {
      for (std::size_t k = 0; k < count; ++k) {
        Rng rng = plans[k].rng;
        const auto& p = plans[k].pair;
        results.push_back(mix_pair(cfg, images[p.i], images[p.j], labels[p.i], labels[p.j], *fixed_lambda, rng));
      }
    } else {
      results = apply_policy(cfg, images, labels, seed);
    }
    for (std::size_t k = 0; k < count; ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "mixed_%05zu.ppm", k);
      json item = result_json(results[k]);
      item["i"] = plans[k].pair.i;
      item["j"] = plans[k].pair.j;
      item["image"] = name;
      write_pnm(out_dir / name, results[k].image, caption);
      if (results[k].mask) {
        std::snprintf(name, sizeof name, "mask_%05zu.pgm", k);
        item["mask"] = name;
        detail::write_file(out_dir / name, mask_file_bytes(*results[k].mask));
      }
      const auto probs = results[k].label.probs();
      item["label"] = std::vector<double>(probs.begin(), probs.end());
      items.push_back(item);
    }
  }
  sidecar["items"] = items;
  write_text(out_dir / "mix.json", sidecar.dump(2) + "\n");
}

RunSpec spec_from_sidecar(const fs::path& path) {
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!j.contains("config") || !j["config"].is_object() || !j.contains("config_hash")) {
    throw FormatError(path.string() + ": not a mix sidecar");
  }
  RunSpec spec;
  for (const auto& [k, v] : j["config"].items()) {
    if (!v.is_string()) throw FormatError(path.string() + ": config value for '" + k + "' is not a string");
    spec[k] = v.get<std::string>();
  }
  if (hex64(spec_hash(spec)) != j["config_hash"].get<std::string>()) {
    throw UsageError(path.string() + ": config does not match its recorded hash");
  }
  return spec;
}

// ---------------------------------------------------------------- grid

/// Two deterministic demo images: a warm radial blob and a cool diagonal
/// stripe pattern with a bright square, both of side `size`.
std::pair<ImageTensor, ImageTensor> demo_pair(std::size_t size) {
  ImageTensor a(size, size, 3, 0.0), b(size, size, 3, 0.0);
  const double s = static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = (static_cast<double>(y) + 0.5) / s - 0.4, dx = (static_cast<double>(x) + 0.5) / s - 0.4;
      const double blob = std::exp(-(dx * dx + dy * dy) / 0.05);
      a.at(y, x, 0) = 0.2 + 0.8 * blob;
      a.at(y, x, 1) = 0.1 + 0.5 * blob;
      a.at(y, x, 2) = 0.1;
      const bool stripe = ((x + y) / std::max<std::size_t>(1, size / 8)) % 2 == 0;
      const bool square = y > size * 5 / 8 && y < size * 7 / 8 && x > size * 5 / 8 && x < size * 7 / 8;
      b.at(y, x, 0) = square ? 0.95 : 0.1;
      b.at(y, x, 1) = square ? 0.95 : (stripe ? 0.45 : 0.25);
      b.at(y, x, 2) = square ? 0.95 : (stripe ? 0.85 : 0.55);
    }
  }
  return {a, b};
}

ImageTensor gray_to_rgb(const MixMask& m) {
  ImageTensor out(m.height(), m.width(), 3, 0.0);
  for (std::size_t y = 0; y < m.height(); ++y) {
    for (std::size_t x = 0; x < m.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = m.at(y, x);
    }
  }
  return out;
}

ImageTensor as_rgb(const ImageTensor& x) {
  if (x.channels() == 3) return x;
  ImageTensor out(x.height(), x.width(), 3, 0.0);
  for (std::size_t y = 0; y < x.height(); ++y) {
    for (std::size_t c = 0; c < x.width(); ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) out.at(y, c, ch) = x.at(y, c, 0);
    }
  }
  return out;
}

void blit(ImageTensor& sheet, const ImageTensor& tile, std::size_t row0, std::size_t col0) {
  for (std::size_t y = 0; y < tile.height(); ++y) {
    for (std::size_t x = 0; x < tile.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) sheet.at(row0 + y, col0 + x, c) = tile.at(y, x, c);
    }
  }
}

void run_grid(double lambda, std::uint64_t seed, std::size_t size, const std::vector<std::string>& pair,
              const std::map<std::string, std::string>& params, const fs::path& out) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("--lambda must lie in [0,1]");
  ImageTensor a, b;
  if (pair.empty()) {
    if (size < 4) throw UsageError("--size must be at least 4");
    std::tie(a, b) = demo_pair(size);
  } else {
    a = as_rgb(read_pnm(pair[0]));
    b = as_rgb(read_pnm(pair[1]));
    if (!a.same_shape(b)) throw ShapeError("pair images differ in shape: " + pair[0] + ", " + pair[1]);
  }
  const std::size_t h = a.height(), w = a.width(), gap = 2;
  const std::size_t cols = 4;  // x_i, x_j, mixed, mask
  ImageTensor sheet(kPolicyNames.size() * (h + gap) + gap, cols * (w + gap) + gap, 3, 1.0);
  const auto y_a = LabelVector::one_hot(2, 0), y_b = LabelVector::one_hot(2, 1);
  // guidedcut stands in the donor's Sobel map for an external weight map.
  const SaliencyMap donor_weights = sobel_saliency(b);

  std::string caption = "mixforge grid lambda=" + format_double(lambda) + " seed=" + std::to_string(seed) +
                        "\ncolumns: x_i x_j mixed mask\nrows (lambda_effective):";
  for (std::size_t row = 0; row < kPolicyNames.size(); ++row) {
    const auto [policy, name] = kPolicyNames[row];
    std::map<std::string, std::string> own;
    for (auto key : PolicyConfig::allowed_keys(policy)) {
      if (const auto it = params.find(std::string(key)); it != params.end()) own[it->first] = it->second;
    }
    const PolicyConfig cfg = PolicyConfig::from_params(policy, 1.0, own);
    Rng rng = Rng::stream(seed, row + 1);
    const MixResult r = mix_pair(cfg, a, b, y_a, y_b, lambda, rng, &donor_weights);
    const std::size_t top = gap + row * (h + gap);
    blit(sheet, a, top, gap);
    blit(sheet, b, top, gap + (w + gap));
    blit(sheet, r.image, top, gap + 2 * (w + gap));
    blit(sheet, r.mask ? gray_to_rgb(*r.mask) : ImageTensor(h, w, 3, std::clamp(r.lambda_effective, 0.0, 1.0)), top,
         gap + 3 * (w + gap));
    caption += "\n" + std::string(name) + " " + format_double(r.lambda_effective);
  }
  write_text(out, encode_pnm(sheet, caption));
}

// ---------------------------------------------------------------- stats

struct Summary {
  double mean = 0.0, stddev = 0.0, q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
};

Summary summarize(std::vector<double> xs) {
  Summary s;
  const auto n = static_cast<double>(xs.size());
  for (double x : xs) s.mean += x;
  s.mean /= n;
  for (double x : xs) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = xs.size() > 1 ? std::sqrt(s.stddev / (n - 1.0)) : 0.0;
  std::sort(xs.begin(), xs.end());
  // Linear interpolation between order statistics.
  const auto q = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
  };
  s.q05 = q(0.05), s.q25 = q(0.25), s.q50 = q(0.5), s.q75 = q(0.75), s.q95 = q(0.95);
  return s;
}

std::string run_stats(const std::vector<std::string>& policies, double alpha, std::optional<double> fixed_lambda,
                      std::size_t draws, std::size_t size, std::uint64_t seed,
                      const std::map<std::string, std::string>& params) {
  if (draws == 0) throw UsageError("--draws must be positive");
  if (size == 0) throw UsageError("--size must be positive");
  if (fixed_lambda && !(*fixed_lambda >= 0.0 && *fixed_lambda <= 1.0)) throw UsageError("--lambda must lie in [0,1]");
  std::string csv =
      "policy,alpha,lambda_mode,draws,size,nominal_mean,effective_mean,effective_std,effective_q05,effective_q25,"
      "effective_q50,effective_q75,effective_q95,mean_abs_shift,beta_mean,beta_var,beta_var_expected,beta_check\n";
  const auto y_a = LabelVector::one_hot(2, 0), y_b = LabelVector::one_hot(2, 1);
  for (std::size_t pi = 0; pi < policies.size(); ++pi) {
    const Policy policy = parse_policy(policies[pi]);
    std::map<std::string, std::string> own;
    for (auto key : PolicyConfig::allowed_keys(policy)) {
      if (const auto it = params.find(std::string(key)); it != params.end()) own[it->first] = it->second;
    }
    const PolicyConfig cfg = PolicyConfig::from_params(policy, alpha, own);
    std::vector<double> nominal, effective;
    nominal.reserve(draws);
    effective.reserve(draws);
    double shift = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
      Rng rng = Rng::stream(stream_key(seed, pi), d);
      const double lam = fixed_lambda ? *fixed_lambda
                                      : (policy == Policy::vanilla ? 1.0 : sample_lambda(alpha, rng).lambda);
      // Random content so saliency-driven policies see varied images.
      std::vector<double> da(size * size * 3), db(size * size * 3);
      for (auto& v : da) v = rng.uniform();
      for (auto& v : db) v = rng.uniform();
      const ImageTensor a(size, size, 3, std::move(da)), b(size, size, 3, std::move(db));
      const SaliencyMap weights = sobel_saliency(b);
      const MixResult r = mix_pair(cfg, a, b, y_a, y_b, lam, rng, &weights);
      nominal.push_back(lam);
      effective.push_back(r.lambda_effective);
      shift += std::abs(r.lambda_effective - lam);
    }
    const Summary eff = summarize(effective);
    double nominal_mean = 0.0;
    for (double x : nominal) nominal_mean += x;
    nominal_mean /= static_cast<double>(draws);

    csv += policies[pi] + "," + format_double(alpha) + "," + (fixed_lambda ? "fixed" : "beta") + "," +
           std::to_string(draws) + "," + std::to_string(size) + "," + format_double(nominal_mean) + "," +
           format_double(eff.mean) + "," + format_double(eff.stddev) + "," + format_double(eff.q05) + "," +
           format_double(eff.q25) + "," + format_double(eff.q50) + "," + format_double(eff.q75) + "," +
           format_double(eff.q95) + "," + format_double(shift / static_cast<double>(draws)) + ",";
    if (!fixed_lambda && policy != Policy::vanilla) {
      const Summary nom = summarize(nominal);
      const double var = nom.stddev * nom.stddev;
      const double expected = 1.0 / (4.0 * (2.0 * alpha + 1.0));
      const bool ok = std::abs(nom.mean - 0.5) <= 0.01 && std::abs(var - expected) <= 0.05 * expected;
      csv += format_double(nom.mean) + "," + format_double(var) + "," + format_double(expected) + "," +
             (ok ? "pass" : "fail") + "\n";
    } else {
      csv += ",,,\n";
    }
  }
  return csv;
}

// ---------------------------------------------------------------- train

json report_json(const RunReport& r) {
  json j;
  j["epoch_loss"] = r.epoch_loss;
  j["test_history"] = r.test_history;
  j["train_top1"] = r.train_top1;
  j["test_top1"] = r.test_top1;
  j["gap"] = r.gap();
  j["test_ece"] = r.test_ece;
  j["steps"] = r.steps;
  j["lambda_hist"] = r.lambda_hist;
  j["lambda_min"] = r.lambda_min;
  j["lambda_max"] = r.lambda_max;
  j["lambda_mean"] = r.lambda_mean;
  return j;
}

KeyValues read_config(const fs::path& path) { return KeyValues::parse(detail::read_file(path)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixforge: deterministic mixup augmentation engine"};
  app.require_subcommand(1);

  // mix
  auto* mix = app.add_subcommand("mix", "Mix an image pair or the first samples of a dataset");
  std::string mix_policy = "mixup";
  double mix_alpha = 1.0;
  std::optional<std::uint64_t> mix_seed;
  std::optional<double> mix_lambda;
  std::vector<std::string> mix_pair_paths, mix_params;
  std::string mix_weights, mix_folder, mix_cifar, mix_variant = "cifar10", mix_split = "train", mix_out,
                           mix_sidecar;
  std::size_t mix_count = 8;
  mix->add_option("--policy", mix_policy, "Policy name")->capture_default_str();
  mix->add_option("--alpha", mix_alpha, "Beta(alpha, alpha) concentration")->capture_default_str();
  mix->add_option("--seed", mix_seed, "Seed (default: MIXFORGE_SEED or 0)");
  mix->add_option("--lambda", mix_lambda, "Use this lambda instead of a Beta draw");
  mix->add_option("--pair", mix_pair_paths, "Two PPM/PGM images: x_i x_j")->expected(2);
  mix->add_option("--weights", mix_weights, "Donor weight map (PGM) for guidedcut");
  mix->add_option("--folder", mix_folder, "Image folder dataset (class/*.ppm)");
  mix->add_option("--cifar", mix_cifar, "CIFAR binary directory");
  mix->add_option("--variant", mix_variant, "cifar10 | cifar100")->check(CLI::IsMember({"cifar10", "cifar100"}));
  mix->add_option("--split", mix_split, "train | test")->check(CLI::IsMember({"train", "test"}));
  mix->add_option("--count", mix_count, "Number of dataset samples to mix")->capture_default_str();
  mix->add_option("--param", mix_params, "Policy parameter key=value (repeatable)");
  mix->add_option("--from-sidecar", mix_sidecar, "Re-run the configuration recorded in a mix.json");
  mix->add_option("--out", mix_out, "Output directory")->required();

  // grid
  auto* grid = app.add_subcommand("grid", "Comparison sheet: one row per policy at a fixed lambda");
  double grid_lambda = 0.5;
  std::optional<std::uint64_t> grid_seed;
  std::size_t grid_size = 64;
  std::vector<std::string> grid_pair, grid_params;
  std::string grid_out = "grid.ppm";
  grid->add_option("--lambda", grid_lambda, "Mixing ratio")->capture_default_str();
  grid->add_option("--seed", grid_seed, "Seed (default: MIXFORGE_SEED or 0)");
  grid->add_option("--size", grid_size, "Side of the built-in demo images")->capture_default_str();
  grid->add_option("--pair", grid_pair, "Use these two images instead of the demo pair")->expected(2);
  grid->add_option("--param", grid_params, "Policy parameter key=value, applied where accepted");
  grid->add_option("--out", grid_out, "Output PPM")->capture_default_str();

  // stats
  auto* stats = app.add_subcommand("stats", "Monte-Carlo statistics of lambda_effective vs lambda_nominal");
  std::string stats_policy = "all";
  double stats_alpha = 1.0;
  std::optional<double> stats_lambda;
  std::size_t stats_draws = 1000, stats_size = 32;
  std::optional<std::uint64_t> stats_seed;
  std::vector<std::string> stats_params;
  std::string stats_out;
  stats->add_option("--policy", stats_policy, "Policy name, comma list, or 'all'")->capture_default_str();
  stats->add_option("--alpha", stats_alpha, "Beta concentration when lambda is drawn")->capture_default_str();
  stats->add_option("--lambda", stats_lambda, "Fixed nominal lambda");
  stats->add_option("--draws", stats_draws, "Draws per policy")->capture_default_str();
  stats->add_option("--size", stats_size, "Square image side")->capture_default_str();
  stats->add_option("--seed", stats_seed, "Seed (default: MIXFORGE_SEED or 0)");
  stats->add_option("--param", stats_params, "Policy parameter key=value, applied where accepted");
  stats->add_option("--out", stats_out, "CSV output file (default: stdout)");

  // train
  auto* trn = app.add_subcommand("train", "Train the small classifier from a config file");
  std::string train_config, train_out;
  trn->add_option("--config", train_config, "key=value config file")->required();
  trn->add_option("--out", train_out, "JSON report file");

  // bench
  auto* bch = app.add_subcommand("bench", "Run a policy x alpha x trial sweep from a config file");
  std::string bench_config, bench_out, bench_table_out;
  bool bench_no_aggregate = false;
  bch->add_option("--config", bench_config, "key=value benchmark file")->required();
  bch->add_option("--out", bench_out, "CSV output file");
  bch->add_option("--table", bench_table_out, "Aligned text table output file");
  bch->add_flag("--no-aggregate", bench_no_aggregate, "Do not append mean rows per configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*mix) {
      RunSpec spec;
      if (!mix_sidecar.empty()) {
        spec = spec_from_sidecar(mix_sidecar);
      } else {
        const int sources = !mix_pair_paths.empty() + !mix_folder.empty() + !mix_cifar.empty();
        if (sources != 1) throw UsageError("give exactly one of --pair, --folder, --cifar");
        spec["policy"] = mix_policy;
        spec["alpha"] = format_double(mix_alpha);
        spec["seed"] = std::to_string(resolve_seed(mix_seed));
        if (mix_lambda) spec["lambda"] = format_double(*mix_lambda);
        for (const auto& [k, v] : parse_params(mix_params)) spec["param." + k] = v;
        if (!mix_pair_paths.empty()) {
          spec["pair.a"] = mix_pair_paths[0];
          spec["pair.b"] = mix_pair_paths[1];
          if (!mix_weights.empty()) spec["weights"] = mix_weights;
        } else {
          if (!mix_weights.empty()) throw UsageError("--weights needs --pair");
          if (!mix_folder.empty()) {
            spec["folder"] = mix_folder;
          } else {
            spec["cifar"] = mix_cifar;
            spec["variant"] = mix_variant;
            spec["split"] = mix_split;
          }
          spec["count"] = std::to_string(mix_count);
        }
      }
      run_mix(spec, mix_out);
      std::cout << "wrote " << (fs::path(mix_out) / "mix.json").string() << " (config " << hex64(spec_hash(spec))
                << ")\n";
    } else if (*grid) {
      run_grid(grid_lambda, resolve_seed(grid_seed), grid_size, grid_pair, parse_params(grid_params), grid_out);
      std::cout << "wrote " << grid_out << "\n";
    } else if (*stats) {
      std::vector<std::string> names;
      if (stats_policy == "all") {
        for (const auto& [p, name] : kPolicyNames) names.emplace_back(name);
      } else {
        names = detail::split_list(stats_policy);
      }
      if (names.empty()) throw UsageError("--policy is empty");
      const auto csv =
          run_stats(names, stats_alpha, stats_lambda, stats_draws, stats_size, resolve_seed(stats_seed),
                    parse_params(stats_params));
      if (stats_out.empty()) {
        std::cout << csv;
      } else {
        write_text(stats_out, csv);
      }
    } else if (*trn) {
      const KeyValues kv = read_config(train_config);
      const TrainConfig cfg = parse_train_config(kv);
      const RunReport r = train(cfg);
      json j;
      j["config_hash"] = hex64(kv.hash());
      j["seed"] = cfg.seed;
      j["policy"] = std::string(policy_name(cfg.policy.policy));
      j["alpha"] = cfg.policy.alpha;
      j["report"] = report_json(r);
      if (!train_out.empty()) write_text(train_out, j.dump(2) + "\n");
      std::printf("policy=%s alpha=%g seed=%llu train_top1=%.4f test_top1=%.4f gap=%.4f ece=%.4f\n",
                  std::string(policy_name(cfg.policy.policy)).c_str(), cfg.policy.alpha,
                  static_cast<unsigned long long>(cfg.seed), r.train_top1, r.test_top1, r.gap(), r.test_ece);
      std::fprintf(stderr, "wall time %.2f s\n", r.wall_seconds);
    } else if (*bch) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto cfgs = parse_bench_config(read_config(bench_config));
      const auto rows = bench(cfgs, !bench_no_aggregate);
      const auto table = bench_table(rows);
      if (!bench_out.empty()) write_text(bench_out, bench_csv(rows));
      if (!bench_table_out.empty()) write_text(bench_table_out, table);
      std::cout << table;
      std::fprintf(stderr, "wall time %.2f s\n",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
  } catch (const UsageError& e) {
    std::cerr << "mixforge: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "mixforge: config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    std::cerr << "mixforge: invalid parameter: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "mixforge: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "mixforge: unexpected failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
