#pragma once

// The policy catalog: one dispatch point that turns a PolicyConfig, an image
// pair and a mixing ratio into a MixResult, plus batch application.
//
// Every policy labels its output with mix_labels_linear(y_i, y_j,
// lambda_effective). Interpolation policies use lambda_effective = lambda;
// mask policies use the mean of the emitted mask.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/error.hpp"
#include "mixforge/masks.hpp"
#include "mixforge/puzzlemix.hpp"
#include "mixforge/rng.hpp"
#include "mixforge/saliency.hpp"
#include "mixforge/tensor.hpp"

namespace mixforge {

enum class Policy {
  vanilla,
  mixup,
  cutmix,
  manifoldmix,
  smoothmix,
  gridmix,
  resizemix,
  fmix,
  saliencymix,
  guidedcut,
  puzzlemix,
};

inline constexpr std::array<std::pair<Policy, std::string_view>, 11> kPolicyNames{{
    {Policy::vanilla, "vanilla"},
    {Policy::mixup, "mixup"},
    {Policy::cutmix, "cutmix"},
    {Policy::manifoldmix, "manifoldmix"},
    {Policy::smoothmix, "smoothmix"},
    {Policy::gridmix, "gridmix"},
    {Policy::resizemix, "resizemix"},
    {Policy::fmix, "fmix"},
    {Policy::saliencymix, "saliencymix"},
    {Policy::guidedcut, "guidedcut"},
    {Policy::puzzlemix, "puzzlemix"},
}};

inline std::string_view policy_name(Policy p) {
  for (const auto& [policy, name] : kPolicyNames) {
    if (policy == p) return name;
  }
  return "unknown";
}

inline Policy parse_policy(std::string_view name) {
  for (const auto& [policy, n] : kPolicyNames) {
    if (n == name) return policy;
  }
  throw ConfigError("unknown policy '" + std::string(name) + "'");
}

/// True for policies whose output is a mask blend of the pair.
inline bool is_mask_policy(Policy p) noexcept {
  return p != Policy::vanilla && p != Policy::mixup && p != Policy::manifoldmix;
}

inline SaliencyDetector parse_detector(std::string_view name) {
  if (name == "sobel") return SaliencyDetector::sobel;
  if (name == "spectral") return SaliencyDetector::spectral_residual;
  throw ConfigError("unknown saliency detector '" + std::string(name) + "' (sobel|spectral)");
}

inline std::string_view detector_name(SaliencyDetector d) {
  return d == SaliencyDetector::sobel ? "sobel" : "spectral";
}

/// Policy identifier, Beta concentration and the policy-specific parameters.
/// Parameters not used by the selected policy are rejected by from_params.
struct PolicyConfig {
  Policy policy = Policy::vanilla;
  double alpha = 1.0;
  double decay = 3.0;              // fmix
  std::size_t n_cells = 4;         // gridmix
  double tau_min = 0.1;            // resizemix
  double tau_max = 0.8;
  std::size_t blocks = 4;          // puzzlemix
  std::size_t max_shift = 1;       // puzzlemix
  SaliencyDetector detector = SaliencyDetector::sobel;  // saliencymix, puzzlemix
  std::size_t layer = 1;           // manifoldmix: 0 = input, 1 = hidden

  /// Keys accepted for `p`.
  static std::vector<std::string_view> allowed_keys(Policy p) {
    switch (p) {
      case Policy::fmix: return {"decay"};
      case Policy::gridmix: return {"n_cells"};
      case Policy::resizemix: return {"tau_min", "tau_max"};
      case Policy::puzzlemix: return {"blocks", "max_shift", "detector"};
      case Policy::saliencymix: return {"detector"};
      case Policy::manifoldmix: return {"layer"};
      default: return {};
    }
  }

  static PolicyConfig from_params(Policy p, double alpha, const std::map<std::string, std::string>& params) {
    PolicyConfig cfg;
    cfg.policy = p;
    cfg.alpha = alpha;
    const auto allowed = allowed_keys(p);
    for (const auto& [key, value] : params) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        throw ConfigError("parameter '" + key + "' is not accepted by policy '" +
                          std::string(policy_name(p)) + "'");
      }
      try {
        if (key == "decay") cfg.decay = std::stod(value);
        else if (key == "n_cells") cfg.n_cells = std::stoul(value);
        else if (key == "tau_min") cfg.tau_min = std::stod(value);
        else if (key == "tau_max") cfg.tau_max = std::stod(value);
        else if (key == "blocks") cfg.blocks = std::stoul(value);
        else if (key == "max_shift") cfg.max_shift = std::stoul(value);
        else if (key == "layer") cfg.layer = std::stoul(value);
        else if (key == "detector") cfg.detector = parse_detector(value);
      } catch (const std::logic_error&) {
        throw ConfigError("parameter '" + key + "' has malformed value '" + value + "'");
      }
    }
    cfg.validate();
    return cfg;
  }

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
    if (!(decay > 0.0)) throw ConfigError("decay must be positive");
    if (n_cells == 0) throw ConfigError("n_cells must be >= 1");
    if (!(tau_min > 0.0 && tau_min <= tau_max && tau_max < 1.0)) {
      throw ConfigError("tau bounds must satisfy 0 < tau_min <= tau_max < 1");
    }
    if (blocks == 0) throw ConfigError("blocks must be >= 1");
    if (layer > 1) throw ConfigError("layer must be 0 (input) or 1 (hidden)");
  }

  /// Every parameter the policy reads, as key/value text (sidecars, hashing).
  std::map<std::string, std::string> params() const {
    std::map<std::string, std::string> out;
    const auto num = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    for (auto key : allowed_keys(policy)) {
      if (key == "decay") out["decay"] = num(decay);
      if (key == "n_cells") out["n_cells"] = std::to_string(n_cells);
      if (key == "tau_min") out["tau_min"] = num(tau_min);
      if (key == "tau_max") out["tau_max"] = num(tau_max);
      if (key == "blocks") out["blocks"] = std::to_string(blocks);
      if (key == "max_shift") out["max_shift"] = std::to_string(max_shift);
      if (key == "detector") out["detector"] = std::string(detector_name(detector));
      if (key == "layer") out["layer"] = std::to_string(layer);
    }
    return out;
  }
};

/// Real array of arbitrary rank; the first axis is the batch axis.
struct FeatureTensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  FeatureTensor() = default;
  FeatureTensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    if (shape.empty() || n != data.size()) throw ShapeError("feature tensor shape does not match data");
    for (double v : data) {
      if (!std::isfinite(v)) throw ParameterError("feature tensor entries must be finite");
    }
  }
};

namespace detail {

inline void require_pair(const ImageTensor& x_i, const ImageTensor& x_j) {
  if (!x_i.same_shape(x_j)) throw ShapeError("image pair differs in shape");
}

}  // namespace detail

/// lambda x_i + (1 - lambda) x_j.
inline ImageTensor mixup_pair(const ImageTensor& x_i, const ImageTensor& x_j, double lambda) {
  detail::require_pair(x_i, x_j);
  detail::check_lambda(lambda);
  std::vector<double> out(x_i.size());
  const auto a = x_i.data();
  const auto b = x_j.data();
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::clamp(lambda * a[k] + (1.0 - lambda) * b[k], 0.0, 1.0);
  }
  return ImageTensor(x_i.height(), x_i.width(), x_i.channels(), std::move(out));
}

inline FeatureTensor manifold_mix(const FeatureTensor& f_i, const FeatureTensor& f_j, double lambda) {
  if (f_i.shape != f_j.shape) throw ShapeError("feature tensors differ in shape");
  detail::check_lambda(lambda);
  std::vector<double> out(f_i.data.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = lambda * f_i.data[k] + (1.0 - lambda) * f_j.data[k];
  return FeatureTensor(f_i.shape, std::move(out));
}

/// Bilinear resize with half-pixel centers and clamped borders.
inline ImageTensor resize_bilinear(const ImageTensor& src, std::size_t out_h, std::size_t out_w) {
  const std::size_t c = src.channels();
  const double sy = static_cast<double>(src.height()) / static_cast<double>(out_h);
  const double sx = static_cast<double>(src.width()) / static_cast<double>(out_w);
  const auto hmax = static_cast<double>(src.height() - 1);
  const auto wmax = static_cast<double>(src.width() - 1);
  std::vector<double> out(out_h * out_w * c);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, hmax);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, src.height() - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, wmax);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, src.width() - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = (1.0 - tx) * src.at(y0, x0, ch) + tx * src.at(y0, x1, ch);
        const double bot = (1.0 - tx) * src.at(y1, x0, ch) + tx * src.at(y1, x1, ch);
        out[(y * out_w + x) * c + ch] = std::clamp((1.0 - ty) * top + ty * bot, 0.0, 1.0);
      }
    }
  }
  return ImageTensor(out_h, out_w, c, std::move(out));
}

/// Saliency/attention-guided cutting. A CutMix-sized rectangle centered on
/// the first maximum of `weight_j` (the donor's weight map) is taken from
/// x_j and pasted at the same location into x_i.
inline MixResult guided_cut(const ImageTensor& x_i, const ImageTensor& x_j, const LabelVector& y_i,
                            const LabelVector& y_j, const SaliencyMap& weight_j, double lambda) {
  detail::require_pair(x_i, x_j);
  detail::check_lambda(lambda);
  const std::size_t h = x_i.height();
  const std::size_t w = x_i.width();
  if (weight_j.height() != h || weight_j.width() != w) throw ShapeError("weight map does not match image");
  const double side = std::sqrt(1.0 - lambda);
  const std::size_t peak = weight_j.argmax();
  RectSpec r{static_cast<std::int64_t>(peak % w), static_cast<std::int64_t>(peak / w),
             std::llround(static_cast<double>(w) * side), std::llround(static_cast<double>(h) * side)};
  MixMask mask = detail::rect_hole(h, w, r);
  const double lam_eff = corrected_lambda(mask);
  return MixResult{apply_mask(x_i, x_j, mask), mix_labels_linear(y_i, y_j, lam_eff), lambda, lam_eff,
                   std::move(mask)};
}

/// ResizeMix: x_j shrunk to a random tau-scaled rectangle and pasted into
/// x_i. The area comes from tau, not from a Beta draw; lambda_nominal is
/// left for the caller to record.
inline MixResult resizemix_pair(const ImageTensor& x_i, const ImageTensor& x_j, const LabelVector& y_i,
                                const LabelVector& y_j, double tau_min, double tau_max, Rng& rng) {
  detail::require_pair(x_i, x_j);
  if (!(tau_min > 0.0 && tau_min <= tau_max && tau_max < 1.0)) {
    throw ParameterError("tau bounds must satisfy 0 < tau_min <= tau_max < 1");
  }
  const double tau = tau_min == tau_max ? tau_min : rng.uniform(tau_min, tau_max);
  auto [mask, rect] = resize_paste_mask(x_i.height(), x_i.width(), tau, rng);
  const RectBounds b = clip_rect(rect, x_i.height(), x_i.width());
  ImageTensor out = x_i;
  if (b.area() > 0) {
    const ImageTensor patch = resize_bilinear(x_j, b.rows(), b.cols());
    for (std::size_t y = 0; y < b.rows(); ++y) {
      for (std::size_t x = 0; x < b.cols(); ++x) {
        for (std::size_t ch = 0; ch < x_i.channels(); ++ch) {
          out.at(b.row0 + y, b.col0 + x, ch) = patch.at(y, x, ch);
        }
      }
    }
  }
  const double lam_eff = corrected_lambda(mask);
  return MixResult{std::move(out), mix_labels_linear(y_i, y_j, lam_eff), tau, lam_eff, std::move(mask)};
}

/// Applies one policy to one pair at a given lambda. `rng` supplies any
/// policy-specific randomness. `weight_j` is the externally supplied weight
/// map for guidedcut and is ignored otherwise.
inline MixResult mix_pair(const PolicyConfig& cfg, const ImageTensor& x_i, const ImageTensor& x_j,
                          const LabelVector& y_i, const LabelVector& y_j, double lambda, Rng& rng,
                          const SaliencyMap* weight_j = nullptr) {
  detail::require_pair(x_i, x_j);
  detail::check_lambda(lambda);
  const std::size_t h = x_i.height();
  const std::size_t w = x_i.width();

  const auto from_mask = [&](MixMask mask) {
    const double lam_eff = corrected_lambda(mask);
    return MixResult{apply_mask(x_i, x_j, mask), mix_labels_linear(y_i, y_j, lam_eff), lambda, lam_eff,
                     std::move(mask)};
  };

  switch (cfg.policy) {
    case Policy::vanilla:
      return MixResult{x_i, y_i, 1.0, 1.0, std::nullopt};
    case Policy::mixup:
    case Policy::manifoldmix:
      // Image-level manifold mixing is mixing at the input layer; hidden
      // layer mixing is done by the model with the same pairs and lambdas.
      return MixResult{mixup_pair(x_i, x_j, lambda), mix_labels_linear(y_i, y_j, lambda), lambda, lambda,
                       std::nullopt};
    case Policy::cutmix:
      return from_mask(rect_mask(h, w, lambda, rng).first);
    case Policy::smoothmix:
      return from_mask(smooth_mask(h, w, lambda, rng));
    case Policy::gridmix:
      return from_mask(grid_mask(h, w, cfg.n_cells, lambda, rng));
    case Policy::fmix:
      return from_mask(fourier_mask(h, w, lambda, cfg.decay, rng));
    case Policy::resizemix: {
      MixResult r = resizemix_pair(x_i, x_j, y_i, y_j, cfg.tau_min, cfg.tau_max, rng);
      r.lambda_nominal = lambda;
      return r;
    }
    case Policy::saliencymix:
      return guided_cut(x_i, x_j, y_i, y_j, compute_saliency(x_j, cfg.detector), lambda);
    case Policy::guidedcut:
      if (weight_j == nullptr) throw ConfigError("guidedcut needs an external weight map per sample");
      return guided_cut(x_i, x_j, y_i, y_j, *weight_j, lambda);
    case Policy::puzzlemix:
      return puzzle_mix(x_i, x_j, y_i, y_j, lambda, PuzzleParams{cfg.blocks, cfg.max_shift, cfg.detector});
  }
  throw ConfigError("unhandled policy");
}

/// Pairing and mixing ratio of every sample of a batch. Pairing uses
/// substream 0 of `seed`; pair k draws its lambda first from substream k + 1
/// and then hands the same generator to the policy.
struct PairPlan {
  PairIndex pair;
  double lambda = 1.0;
  Rng rng{0};
};

inline std::vector<PairPlan> plan_pairs(const PolicyConfig& cfg, std::size_t batch_size, std::uint64_t seed) {
  Rng pairing = Rng::stream(seed, 0);
  const auto pairs = make_pairs(batch_size, pairing);
  std::vector<PairPlan> plans;
  plans.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    Rng rng = Rng::stream(seed, k + 1);
    const double lambda = cfg.policy == Policy::vanilla ? 1.0 : sample_lambda(cfg.alpha, rng).lambda;
    plans.push_back(PairPlan{pairs[k], lambda, rng});
  }
  return plans;
}

/// Mixes a whole batch. Result k belongs to sample k. Output is identical
/// for every worker count.
inline std::vector<MixResult> apply_policy(const PolicyConfig& cfg, std::span<const ImageTensor> batch,
                                           std::span<const LabelVector> labels, std::uint64_t seed,
                                           std::span<const SaliencyMap> weights = {},
                                           unsigned workers = 1) {
  cfg.validate();
  if (batch.empty()) throw EmptyInputError("apply_policy: empty batch");
  if (batch.size() != labels.size()) throw ShapeError("apply_policy: batch and labels differ in length");
  for (std::size_t k = 1; k < batch.size(); ++k) {
    if (!batch[k].same_shape(batch[0])) throw ShapeError("apply_policy: heterogeneous image shapes in batch");
    if (labels[k].size() != labels[0].size()) throw ShapeError("apply_policy: label lengths differ");
  }
  if (cfg.policy == Policy::guidedcut && weights.size() != batch.size()) {
    throw ConfigError("guidedcut needs one weight map per sample");
  }

  auto plans = plan_pairs(cfg, batch.size(), seed);
  std::vector<std::optional<MixResult>> slots(batch.size());
  const auto run = [&](std::size_t k) {
    auto& p = plans[k];
    const SaliencyMap* wj = weights.empty() ? nullptr : &weights[p.pair.j];
    slots[k] = mix_pair(cfg, batch[p.pair.i], batch[p.pair.j], labels[p.pair.i], labels[p.pair.j], p.lambda,
                        p.rng, wj);
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(batch.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < batch.size(); ++k) run(k);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
          try {
            for (std::size_t k = t; k < batch.size(); k += workers) run(k);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<MixResult> results;
  results.reserve(batch.size());
  for (auto& s : slots) results.push_back(std::move(*s));
  return results;
}

}  // namespace mixforge
