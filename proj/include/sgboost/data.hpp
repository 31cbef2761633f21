#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgboost/batch.hpp"

namespace sgboost {

struct DatasetMeta {
  std::string name;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  Shape geometry;  // C, H, W
  std::size_t classes = 0;
  std::vector<double> channel_mean;
  std::vector<double> channel_std;
};

/// CIFAR-10 binary batch: 3073-byte records, label byte 0..9 then 3072 pixel
/// bytes (R, G, B planes, each 32x32 row-major). Pixels map to [0, 1].
LabeledBatch load_cifar10_binary(const std::filesystem::path& path);
/// Inverse of the loader; pixels are quantized with round(x * 255).
void write_cifar10_binary(const LabeledBatch& batch, const std::filesystem::path& path);

/// IDX pair: images magic 0x00000803 (count, rows, cols), labels magic
/// 0x00000801 (count), big-endian dimensions, one byte per value. Labels are
/// stored 0-based in the file and 1-based in memory.
LabeledBatch load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                      std::size_t classes = 0);
void write_idx(const LabeledBatch& batch, const std::filesystem::path& images, const std::filesystem::path& labels);

/// Class-conditional localized blobs on a noisy background. Each class owns a
/// blob position near the image centre; `difficulty` scales pixel noise,
/// amplitude jitter and positional jitter (0 gives noise-free prototypes).
/// Border rows and columns carry extra noise and no signal.
LabeledBatch make_synthetic(std::uint64_t seed, std::size_t n, const Shape& geometry, std::size_t classes,
                            double difficulty, DatasetMeta* meta = nullptr);

/// Per-channel mean and population standard deviation of `train`.
void compute_normalization(const LabeledBatch& train, DatasetMeta& meta);
/// (x - mean) / max(std, 1e-8) per channel; refuses an already normalized batch.
void normalize(LabeledBatch& batch, const DatasetMeta& meta);

struct Split {
  LabeledBatch train;
  LabeledBatch test;
};

/// Seeded shuffle, the first `train_count` samples go to train.
Split split_batch(const LabeledBatch& batch, std::size_t train_count, std::uint64_t seed);

/// Per-class sample counts (index 0 is class 1).
std::vector<std::size_t> class_counts(const LabeledBatch& batch);

}  // namespace sgboost
