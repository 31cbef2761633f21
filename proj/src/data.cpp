#include "sgboost/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>

#include "sgboost/error.hpp"

namespace sgboost {

namespace {

constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPixels = 3 * kCifarSide * kCifarSide;
constexpr std::size_t kCifarRecord = kCifarPixels + 1;
constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) throw FormatError("IDX header truncated");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

unsigned char quantize(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw FormatError("pixel value outside [0, 1] cannot be written as a byte");
  return static_cast<unsigned char>(std::lround(x * 255.0));
}

}  // namespace

LabeledBatch load_cifar10_binary(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
    throw FormatError("CIFAR-10 file " + path.string() + " is truncated (length " + std::to_string(bytes.size()) +
                      " is not a multiple of 3073)");
  }
  const std::size_t n = bytes.size() / kCifarRecord;
  LabeledBatch batch;
  batch.classes = 10;
  batch.labels.reserve(n);
  std::vector<double> pixels(n * kCifarPixels);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = bytes.data() + i * kCifarRecord;
    if (rec[0] > 9) throw FormatError("CIFAR-10 record " + std::to_string(i) + " has label byte " + std::to_string(rec[0]));
    batch.labels.push_back(rec[0] + 1);
    for (std::size_t p = 0; p < kCifarPixels; ++p) pixels[i * kCifarPixels + p] = rec[1 + p] / 255.0;
  }
  batch.inputs = Tensor({n, 3, kCifarSide, kCifarSide}, std::move(pixels));
  return batch;
}

void write_cifar10_binary(const LabeledBatch& batch, const std::filesystem::path& path) {
  batch.validate();
  if (batch.sample_shape() != Shape{3, kCifarSide, kCifarSide}) throw GeometryError("CIFAR-10 samples must be 3x32x32");
  if (batch.classes > 10) throw LabelError("CIFAR-10 supports at most 10 classes");
  std::vector<unsigned char> out;
  out.reserve(batch.size() * kCifarRecord);
  auto px = batch.inputs.data();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.push_back(static_cast<unsigned char>(batch.labels[i] - 1));
    for (std::size_t p = 0; p < kCifarPixels; ++p) out.push_back(quantize(px[i * kCifarPixels + p]));
  }
  write_file(path, out);
}

LabeledBatch load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t classes) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  if (read_be32(img, 0) != kIdxImages) throw FormatError("bad IDX image magic in " + images.string());
  if (read_be32(lab, 0) != kIdxLabels) throw FormatError("bad IDX label magic in " + labels.string());
  const std::size_t n = read_be32(img, 4), rows = read_be32(img, 8), cols = read_be32(img, 12);
  const std::size_t nl = read_be32(lab, 4);
  if (n != nl) throw FormatError("IDX count mismatch: " + std::to_string(n) + " images vs " + std::to_string(nl) + " labels");
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("IDX file declares an empty dimension");
  if (img.size() != 16 + n * rows * cols) throw FormatError("IDX image payload truncated or oversized");
  if (lab.size() != 8 + n) throw FormatError("IDX label payload truncated or oversized");

  LabeledBatch batch;
  std::vector<double> pixels(n * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = img[16 + i] / 255.0;
  batch.inputs = Tensor({n, 1, rows, cols}, std::move(pixels));
  int top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    batch.labels.push_back(lab[8 + i] + 1);
    top = std::max(top, batch.labels.back());
  }
  batch.classes = classes ? classes : static_cast<std::size_t>(top);
  batch.validate();
  return batch;
}

void write_idx(const LabeledBatch& batch, const std::filesystem::path& images, const std::filesystem::path& labels) {
  batch.validate();
  if (batch.channels() != 1) throw GeometryError("IDX images must have one channel");
  std::vector<unsigned char> img;
  put_be32(img, kIdxImages);
  put_be32(img, static_cast<std::uint32_t>(batch.size()));
  put_be32(img, static_cast<std::uint32_t>(batch.height()));
  put_be32(img, static_cast<std::uint32_t>(batch.width()));
  for (double v : batch.inputs.data()) img.push_back(quantize(v));
  std::vector<unsigned char> lab;
  put_be32(lab, kIdxLabels);
  put_be32(lab, static_cast<std::uint32_t>(batch.size()));
  for (int z : batch.labels) {
    if (z - 1 > 255) throw LabelError("IDX labels must fit in a byte");
    lab.push_back(static_cast<unsigned char>(z - 1));
  }
  write_file(images, img);
  write_file(labels, lab);
}

LabeledBatch make_synthetic(std::uint64_t seed, std::size_t n, const Shape& geometry, std::size_t classes,
                            double difficulty, DatasetMeta* meta) {
  if (geometry.size() != 3) throw GeometryError("synthetic geometry must be C x H x W");
  const std::size_t c = geometry[0], h = geometry[1], w = geometry[2];
  if (classes < 2) throw ConfigError("synthetic data needs at least two classes");
  if (n < classes) throw ConfigError("synthetic data needs n >= number of classes");
  if (h < 8 || w < 8 || c == 0) throw GeometryError("synthetic images need at least 8 x 8 pixels for blob placement");
  if (difficulty < 0.0) throw ConfigError("difficulty must be non-negative");

  // Class k sits on a ring around the centre, radius a fifth of the short side.
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double radius = std::min(h, w) / 5.0;
  const double sigma = std::max(1.0, std::min(h, w) / 10.0);
  const std::size_t border = std::max<std::size_t>(1, std::min(h, w) / 8);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes) + 1;
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<double> pixels(n * c * h * w, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(labels[i] - 1);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(classes);
    const double by = cy + radius * std::sin(angle) + difficulty * unit(rng);
    const double bx = cx + radius * std::cos(angle) + difficulty * unit(rng);
    const double amplitude = 1.0 + 0.5 * difficulty * unit(rng);
    for (std::size_t ch = 0; ch < c; ++ch) {
      // Channels share the blob but with a class-dependent intensity tilt.
      const double tilt = 1.0 - 0.25 * static_cast<double>((k + ch) % 2);
      for (std::size_t r = 0; r < h; ++r) {
        const bool edge_r = r < border || r + border >= h;
        for (std::size_t col = 0; col < w; ++col) {
          const bool edge = edge_r || col < border || col + border >= w;
          const double dy = static_cast<double>(r) - by, dx = static_cast<double>(col) - bx;
          double v = edge ? 0.0 : amplitude * tilt * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
          v += difficulty * (edge ? 1.5 : 0.5) * gauss(rng);
          pixels[((i * c + ch) * h + r) * w + col] = v;
        }
      }
    }
  }
  LabeledBatch batch;
  batch.inputs = Tensor({n, c, h, w}, std::move(pixels));
  batch.labels = std::move(labels);
  batch.classes = classes;
  if (meta) {
    meta->name = "synthetic";
    meta->train_count = n;
    meta->test_count = 0;
    meta->geometry = geometry;
    meta->classes = classes;
  }
  return batch;
}

void compute_normalization(const LabeledBatch& train, DatasetMeta& meta) {
  train.validate();
  if (train.normalized) throw StateError("normalization statistics must come from raw training data");
  const std::size_t n = train.size(), c = train.channels(), plane = train.height() * train.width();
  meta.channel_mean.assign(c, 0.0);
  meta.channel_std.assign(c, 0.0);
  auto x = train.inputs.data();
  const double count = static_cast<double>(n * plane);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = x.data() + (i * c + ch) * plane;
      for (std::size_t j = 0; j < plane; ++j) sum += p[j];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = x.data() + (i * c + ch) * plane;
      for (std::size_t j = 0; j < plane; ++j) sq += (p[j] - mean) * (p[j] - mean);
    }
    meta.channel_mean[ch] = mean;
    meta.channel_std[ch] = std::sqrt(sq / count);
  }
  meta.geometry = train.sample_shape();
  meta.classes = train.classes;
  meta.train_count = n;
}

void normalize(LabeledBatch& batch, const DatasetMeta& meta) {
  if (batch.normalized) throw StateError("batch is already normalized");
  const std::size_t c = batch.channels(), plane = batch.height() * batch.width();
  if (meta.channel_mean.size() != c || meta.channel_std.size() != c) {
    throw StateError("normalization statistics missing or sized for another channel count");
  }
  auto x = batch.inputs.data();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double mean = meta.channel_mean[ch];
      const double sd = std::max(meta.channel_std[ch], 1e-8);
      double* p = x.data() + (i * c + ch) * plane;
      for (std::size_t j = 0; j < plane; ++j) p[j] = (p[j] - mean) / sd;
    }
  }
  batch.normalized = true;
}

Split split_batch(const LabeledBatch& batch, std::size_t train_count, std::uint64_t seed) {
  batch.validate();
  if (train_count == 0 || train_count >= batch.size()) throw ConfigError("split needs 0 < train count < total");
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::span<const std::size_t> all(order);
  return Split{batch.subset(all.first(train_count)), batch.subset(all.subspan(train_count))};
}

std::vector<std::size_t> class_counts(const LabeledBatch& batch) {
  std::vector<std::size_t> counts(batch.classes, 0);
  for (int z : batch.labels) ++counts.at(static_cast<std::size_t>(z - 1));
  return counts;
}

}  // namespace sgboost
