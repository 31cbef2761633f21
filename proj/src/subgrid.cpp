#include "sgboost/subgrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sgboost/error.hpp"
#include "sgboost/loss.hpp"

namespace sgboost {

SubgridMask SubgridMask::full(std::size_t height, std::size_t width) {
  SubgridMask mask;
  mask.rows.resize(height);
  mask.cols.resize(width);
  std::iota(mask.rows.begin(), mask.rows.end(), std::size_t{0});
  std::iota(mask.cols.begin(), mask.cols.end(), std::size_t{0});
  return mask;
}

bool SubgridMask::is_full(std::size_t height, std::size_t width) const {
  return *this == full(height, width);
}

void SubgridMask::validate(std::size_t height, std::size_t width) const {
  auto check = [](const std::vector<std::size_t>& idx, std::size_t extent, const char* what) {
    if (idx.empty()) throw GeometryError(std::string("subgrid keeps no ") + what);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= extent) throw GeometryError(std::string("subgrid ") + what + " index out of range");
      if (i && idx[i] <= idx[i - 1]) throw GeometryError(std::string("subgrid ") + what + " must be strictly increasing");
    }
  };
  check(rows, height, "rows");
  check(cols, width, "columns");
}

ImportanceMap::ImportanceMap(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(height * width, fill) {
  if (height == 0 || width == 0) throw GeometryError("importance map extents must be positive");
}

void update_importance(ImportanceMap& map, const Network& probe, const Tensor& inputs, const BoostWeights& weights,
                       const SubgridMask& active, std::size_t chunk) {
  if (inputs.rank() != 4) throw GeometryError("importance update needs [N, C, H, W] inputs");
  const std::size_t n = inputs.dim(0), c = inputs.dim(1), h = inputs.dim(2), w = inputs.dim(3);
  if (h != map.height() || w != map.width()) throw GeometryError("inputs do not match the importance map extents");
  if (weights.size() != n) throw GeometryError("importance update has mismatched weight count");
  active.validate(h, w);
  const Shape out = probe.output_shape({c, h, w});  // throws on probe geometry mismatch
  if (out.size() != 1 || out[0] != weights.classes()) {
    throw GeometryError("probe output width " + shape_to_string(out) + " does not match the weight width");
  }

  Network net = probe;
  std::vector<double> accum(h * w, 0.0);
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    Tensor x = inputs.slice_leading(begin, end);
    Tensor target = weights.values.slice_leading(begin, end);
    Tensor g = net.forward(x);
    auto loss = mse_loss(g, target);
    Tensor dx = *net.backward(loss.grad, true);
    auto d = dx.data();
    for (std::size_t i = 0; i < end - begin; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* plane = d.data() + ((i * c + ch) * h) * w;
        for (std::size_t p = 0; p < h * w; ++p) accum[p] += std::abs(plane[p]);
      }
    }
  }
  const double scale = 1.0 / static_cast<double>(n);
  for (auto r : active.rows) {
    for (auto col : active.cols) map.at(r, col) = accum[r * w + col] * scale;
  }
}

RowColScores row_col_scores(const ImportanceMap& map) {
  const std::size_t h = map.height(), w = map.width();
  RowColScores s{std::vector<double>(h, 0.0), std::vector<double>(w, 0.0)};
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      s.rows[r] += map.at(r, c);
      s.cols[c] += map.at(r, c);
    }
  }
  for (auto& v : s.rows) v /= static_cast<double>(w);
  for (auto& v : s.cols) v /= static_cast<double>(h);
  return s;
}

std::size_t kept_count(double fraction, std::size_t extent) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("keep fraction must lie in (0, 1]");
  const double product = fraction * static_cast<double>(extent);
  const double nearest = std::round(product);
  const double snapped = std::abs(product - nearest) < 1e-9 ? nearest : std::ceil(product);
  return std::clamp<std::size_t>(static_cast<std::size_t>(snapped), 1, extent);
}

namespace {

std::vector<std::size_t> top_indices(const std::vector<double>& scores, std::size_t keep) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

SubgridMask select_subgrid(const ImportanceMap& map, double keep_row_frac, double keep_col_frac) {
  const auto scores = row_col_scores(map);
  SubgridMask mask;
  mask.rows = top_indices(scores.rows, kept_count(keep_row_frac, map.height()));
  mask.cols = top_indices(scores.cols, kept_count(keep_col_frac, map.width()));
  return mask;
}

Tensor slice_inputs(const Tensor& inputs, const SubgridMask& mask) {
  if (inputs.rank() != 4) throw GeometryError("slice_inputs needs [N, C, H, W] inputs");
  const std::size_t n = inputs.dim(0), c = inputs.dim(1), h = inputs.dim(2), w = inputs.dim(3);
  mask.validate(h, w);
  const std::size_t rh = mask.rows.size(), rw = mask.cols.size();
  Tensor out({n, c, rh, rw});
  auto src = inputs.data();
  auto dst = out.data();
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* base = src.data() + plane * h * w;
    for (auto r : mask.rows) {
      for (auto col : mask.cols) dst[o++] = base[r * w + col];
    }
  }
  return out;
}

LabeledBatch slice_batch(const LabeledBatch& batch, const SubgridMask& mask) {
  LabeledBatch out;
  out.inputs = slice_inputs(batch.inputs, mask);
  out.labels = batch.labels;
  out.classes = batch.classes;
  out.normalized = batch.normalized;
  return out;
}

void write_importance_csv(const ImportanceMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  char buf[32];
  for (std::size_t r = 0; r < map.height(); ++r) {
    for (std::size_t c = 0; c < map.width(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", map.at(r, c));
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

ImportanceMap read_importance_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (!rows.empty() && row.size() != rows.front().size()) throw FormatError("ragged importance CSV");
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty()) throw FormatError("empty importance CSV");
  ImportanceMap map(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) map.at(r, c) = rows[r][c];
  }
  return map;
}

void write_importance_pgm(const ImportanceMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  const auto& v = map.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  out << "P5\n" << map.width() << ' ' << map.height() << "\n255\n";
  for (double x : v) {
    const double scaled = range > 0.0 ? (x - *lo) / range * 255.0 : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
}

}  // namespace sgboost
