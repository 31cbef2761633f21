#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "sgboost/batch.hpp"
#include "sgboost/layers.hpp"

namespace sgboost {

/// Cartesian product of kept rows and kept columns, both strictly increasing.
struct SubgridMask {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> cols;

  static SubgridMask full(std::size_t height, std::size_t width);

  std::size_t pixel_count() const noexcept { return rows.size() * cols.size(); }
  bool is_full(std::size_t height, std::size_t width) const;
  /// Throws GeometryError unless nonempty, sorted, unique and inside H x W.
  void validate(std::size_t height, std::size_t width) const;

  bool operator==(const SubgridMask&) const = default;
};

/// Persistent per-pixel importance I[j, k] >= 0 over the full image grid.
class ImportanceMap {
 public:
  ImportanceMap() = default;
  ImportanceMap(std::size_t height, std::size_t width, double fill = 0.0);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  double& at(std::size_t row, std::size_t col) { return values_.at(row * width_ + col); }
  double at(std::size_t row, std::size_t col) const { return values_.at(row * width_ + col); }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const ImportanceMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// Recomputes importance for the pixels of `active` using full-size inputs:
/// the mean over samples of the channel-summed |d L / d x| where
/// L = sum_i ||probe(x_i) - w_i||^2. Pixels outside `active` keep their value.
void update_importance(ImportanceMap& map, const Network& probe, const Tensor& inputs, const BoostWeights& weights,
                       const SubgridMask& active, std::size_t chunk = 256);

struct RowColScores {
  std::vector<double> rows;  // mean importance along each row
  std::vector<double> cols;  // mean importance along each column
};

RowColScores row_col_scores(const ImportanceMap& map);

/// Number of entries kept out of `extent` for a keep fraction in (0, 1].
/// ceil(frac * extent), with products within 1e-9 of an integer snapped first.
std::size_t kept_count(double fraction, std::size_t extent);

/// Keeps the highest-scoring rows and columns (ties to the lower index) and
/// returns them in ascending order.
SubgridMask select_subgrid(const ImportanceMap& map, double keep_row_frac, double keep_col_frac);

/// [N, C, H, W] -> [N, C, |rows|, |cols|].
Tensor slice_inputs(const Tensor& inputs, const SubgridMask& mask);
LabeledBatch slice_batch(const LabeledBatch& batch, const SubgridMask& mask);

/// Row-major CSV with 17 significant digits per value.
void write_importance_csv(const ImportanceMap& map, const std::filesystem::path& path);
ImportanceMap read_importance_csv(const std::filesystem::path& path);
/// Binary 8-bit PGM, min-max normalized to 0..255 (a constant map writes zeros).
void write_importance_pgm(const ImportanceMap& map, const std::filesystem::path& path);

}  // namespace sgboost
