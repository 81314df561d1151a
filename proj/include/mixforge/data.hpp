#pragma once

// Dataset ingestion: CIFAR binary batches, folders of PPM/PGM (optionally
// PNG) images, and a deterministic synthetic generator. Also the PNM
// writers used by the CLI.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifdef MIXFORGE_WITH_PNG
#include <png.h>
#endif

#include "mixforge/error.hpp"
#include "mixforge/rng.hpp"
#include "mixforge/tensor.hpp"

namespace mixforge {

enum class Split { train, test };

struct Dataset {
  std::vector<ImageTensor> images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  Split split = Split::train;

  std::size_t size() const noexcept { return images.size(); }

  void validate() const {
    if (images.size() != labels.size()) throw ShapeError("dataset images and labels differ in length");
    for (std::size_t k = 0; k < images.size(); ++k) {
      if (labels[k] >= num_classes) throw CorruptionError("label out of range at index " + std::to_string(k));
      if (!images[k].same_shape(images[0])) throw ShapeError("dataset images differ in shape");
    }
  }

  /// One-hot label of sample k.
  LabelVector label_vector(std::size_t k) const { return LabelVector::one_hot(num_classes, labels[k]); }
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// Decodes a binary PGM (P5) or PPM (P6) with maxval 255. Header comments
/// are skipped.
inline ImageTensor decode_pnm(const std::string& bytes, const std::string& name = "<memory>") {
  std::size_t pos = 0;
  const auto fail = [&](const std::string& what) -> FormatError {
    return FormatError(name + ": " + what + " at byte " + std::to_string(pos));
  };
  const auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto read_uint = [&] {
    skip_space();
    std::size_t v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
    }
    if (pos == start) throw fail("expected an integer");
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw fail("not a binary PGM/PPM (P5/P6)");
  }
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const std::size_t width = read_uint();
  const std::size_t height = read_uint();
  const std::size_t maxval = read_uint();
  if (maxval != 255) throw fail("maxval must be 255, got " + std::to_string(maxval));
  if (width == 0 || height == 0) throw fail("zero image dimension");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw fail("missing whitespace after header");
  }
  ++pos;
  const std::size_t need = width * height * channels;
  if (bytes.size() - pos < need) throw fail("truncated pixel data (need " + std::to_string(need) + " bytes)");
  std::vector<double> data(need);
  for (std::size_t k = 0; k < need; ++k) {
    data[k] = static_cast<double>(static_cast<std::uint8_t>(bytes[pos + k])) / 255.0;
  }
  return ImageTensor(height, width, channels, std::move(data));
}

/// P5 for one channel, P6 for three. `comment` lines go into the header.
inline std::string encode_pnm(const ImageTensor& img, const std::string& comment = {}) {
  std::ostringstream out;
  out << (img.channels() == 1 ? "P5" : "P6") << '\n';
  if (!comment.empty()) {
    std::istringstream lines(comment);
    for (std::string line; std::getline(lines, line);) out << "# " << line << '\n';
  }
  out << img.width() << ' ' << img.height() << "\n255\n";
  std::string header = out.str();
  header.reserve(header.size() + img.size());
  for (double v : img.data()) header.push_back(static_cast<char>(detail::to_byte(v)));
  return header;
}

inline std::string encode_pgm(const MixMask& mask) {
  return encode_pnm(ImageTensor(mask.height(), mask.width(), 1,
                                std::vector<double>(mask.weights().begin(), mask.weights().end())));
}

inline ImageTensor read_pnm(const std::filesystem::path& path) {
  return decode_pnm(detail::read_file(path), path.string());
}

inline void write_pnm(const std::filesystem::path& path, const ImageTensor& img, const std::string& comment = {}) {
  detail::write_file(path, encode_pnm(img, comment));
}

#ifdef MIXFORGE_WITH_PNG
inline ImageTensor read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw FormatError(path.string() + ": " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError(path.string() + ": " + image.message);
  }
  std::vector<double> data(buf.size());
  for (std::size_t k = 0; k < buf.size(); ++k) data[k] = buf[k] / 255.0;
  return ImageTensor(image.height, image.width, gray ? 1 : 3, std::move(data));
}
#endif

enum class CifarVariant { cifar10, cifar100 };

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPlane = kCifarSide * kCifarSide;

inline std::size_t cifar_record_size(CifarVariant v) noexcept {
  return (v == CifarVariant::cifar10 ? 1 : 2) + 3 * kCifarPlane;
}

/// Parses one CIFAR binary batch held in memory. Channel planes are stored
/// R, G, B; pixels are converted to interleaved H x W x 3 in [0, 1].
inline void parse_cifar(const std::string& bytes, CifarVariant variant, Dataset& out, const std::string& name) {
  const std::size_t rec = cifar_record_size(variant);
  const std::size_t classes = variant == CifarVariant::cifar10 ? 10 : 100;
  const std::size_t label_bytes = variant == CifarVariant::cifar10 ? 1 : 2;
  if (bytes.size() % rec != 0) {
    throw FormatError(name + ": truncated record at byte offset " + std::to_string(bytes.size() - bytes.size() % rec) +
                      " (file size " + std::to_string(bytes.size()) + " is not a multiple of " +
                      std::to_string(rec) + ")");
  }
  out.num_classes = classes;
  const std::size_t count = bytes.size() / rec;
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t base = r * rec;
    // cifar100: coarse label first, fine label second; only fine is kept.
    const auto label = static_cast<std::uint8_t>(bytes[base + label_bytes - 1]);
    if (label >= classes) {
      throw CorruptionError(name + ": label " + std::to_string(label) + " >= " + std::to_string(classes) +
                            " in record " + std::to_string(r) + " (byte offset " + std::to_string(base) + ")");
    }
    std::vector<double> data(3 * kCifarPlane);
    const std::size_t px = base + label_bytes;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t p = 0; p < kCifarPlane; ++p) {
        data[p * 3 + ch] = static_cast<std::uint8_t>(bytes[px + ch * kCifarPlane + p]) / 255.0;
      }
    }
    out.images.emplace_back(kCifarSide, kCifarSide, 3, std::move(data));
    out.labels.push_back(label);
  }
}

inline Dataset read_cifar_file(const std::filesystem::path& file, CifarVariant variant, Split split = Split::train) {
  Dataset ds;
  ds.split = split;
  parse_cifar(detail::read_file(file), variant, ds, file.string());
  return ds;
}

/// Reads the standard batch files of a CIFAR binary distribution directory:
/// data_batch_1..5.bin / test_batch.bin (CIFAR-10), train.bin / test.bin
/// (CIFAR-100).
inline Dataset read_cifar(const std::filesystem::path& dir, CifarVariant variant, Split split) {
  std::vector<std::string> files;
  if (variant == CifarVariant::cifar10) {
    if (split == Split::train) {
      for (int k = 1; k <= 5; ++k) files.push_back("data_batch_" + std::to_string(k) + ".bin");
    } else {
      files.push_back("test_batch.bin");
    }
  } else {
    files.push_back(split == Split::train ? "train.bin" : "test.bin");
  }
  Dataset ds;
  ds.split = split;
  for (const auto& f : files) {
    const auto path = dir / f;
    if (!std::filesystem::exists(path)) throw IoError("missing CIFAR batch file " + path.string());
    parse_cifar(detail::read_file(path), variant, ds, path.string());
  }
  return ds;
}

/// Folder-per-class image dataset. Class indices follow the sorted class
/// directory names; files are read in sorted order.
inline Dataset read_image_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  Dataset ds;
  ds.num_classes = class_dirs.size();
  std::vector<fs::path> sources;
  for (std::size_t cls = 0; cls < class_dirs.size(); ++cls) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[cls])) {
      if (!e.is_regular_file()) continue;
      const auto ext = e.path().extension().string();
      if (ext == ".ppm" || ext == ".pgm" || ext == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      if (f.extension() == ".png") {
#ifdef MIXFORGE_WITH_PNG
        ds.images.push_back(read_png(f));
#else
        throw FormatError(f.string() + ": PNG support not compiled in (build with MIXFORGE_WITH_PNG=ON)");
#endif
      } else {
        ds.images.push_back(read_pnm(f));
      }
      ds.labels.push_back(cls);
      sources.push_back(f);
    }
  }
  if (ds.images.empty()) throw EmptyInputError("no images found under " + root.string());

  const auto shape_of = [](const ImageTensor& x) {
    return std::to_string(x.height()) + "x" + std::to_string(x.width()) + "x" + std::to_string(x.channels());
  };
  std::string offenders;
  for (std::size_t k = 1; k < ds.images.size(); ++k) {
    if (!ds.images[k].same_shape(ds.images[0])) {
      offenders += " " + sources[k].string() + " (" + shape_of(ds.images[k]) + ")";
    }
  }
  if (!offenders.empty()) {
    throw ShapeError("image shapes differ from " + sources[0].string() + " (" + shape_of(ds.images[0]) +
                     "):" + offenders);
  }
  return ds;
}

enum class SynthPattern { stripes, constant };

struct SynthSpec {
  std::size_t n = 256;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 3;
  std::size_t num_classes = 2;
  SynthPattern pattern = SynthPattern::stripes;
  double noise = 0.1;        // per-pixel Gaussian noise
  double label_noise = 0.0;  // fraction of labels flipped to another class
};

/// Deterministic class-conditional images. Class k has a constant color
/// (each channel 0.25 or 0.75 by the parity of k + channel) plus, for the
/// stripes pattern, a horizontal sinusoid of k + 1 cycles. Labels are
/// assigned round-robin; with label_noise > 0 a seeded subset of labels is
/// replaced by a different class while the images keep their true class.
inline Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n == 0 || spec.height == 0 || spec.width == 0 || spec.num_classes == 0) {
    throw ParameterError("synthetic dataset dimensions must be positive");
  }
  if (spec.channels != 1 && spec.channels != 3) throw ParameterError("channels must be 1 or 3");
  if (!(spec.label_noise >= 0.0 && spec.label_noise <= 1.0)) throw ParameterError("label_noise must lie in [0,1]");

  Dataset ds;
  ds.num_classes = spec.num_classes;
  ds.images.reserve(spec.n);
  Rng rng = Rng::stream(seed, 0);
  for (std::size_t s = 0; s < spec.n; ++s) {
    const std::size_t cls = s % spec.num_classes;
    std::vector<double> data(spec.height * spec.width * spec.channels);
    for (std::size_t y = 0; y < spec.height; ++y) {
      for (std::size_t x = 0; x < spec.width; ++x) {
        const double phase = 2.0 * M_PI * static_cast<double>(cls + 1) * (static_cast<double>(x) + 0.5) /
                             static_cast<double>(spec.width);
        const double stripe = spec.pattern == SynthPattern::stripes ? 0.15 * std::sin(phase) : 0.0;
        for (std::size_t c = 0; c < spec.channels; ++c) {
          const double base = ((cls + c) % 2 == 0) ? 0.25 : 0.75;
          const double v = base + stripe + spec.noise * rng.normal();
          data[(y * spec.width + x) * spec.channels + c] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    ds.images.emplace_back(spec.height, spec.width, spec.channels, std::move(data));
    ds.labels.push_back(cls);
  }

  if (spec.label_noise > 0.0 && spec.num_classes > 1) {
    Rng flip = Rng::stream(seed, 1);
    for (auto& label : ds.labels) {
      if (flip.uniform() < spec.label_noise) {
        const auto shift = 1 + flip.below(spec.num_classes - 1);
        label = (label + shift) % spec.num_classes;
      }
    }
  }
  return ds;
}

}  // namespace mixforge
