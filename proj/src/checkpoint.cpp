#include "sgboost/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "sgboost/error.hpp"

namespace sgboost {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t{data_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw FormatError("checkpoint truncated");
  }

  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const unsigned char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, data, static_cast<uInt>(n)));
}

void write_indices(Writer& w, const std::vector<std::size_t>& idx) {
  w.u32(static_cast<std::uint32_t>(idx.size()));
  for (auto i : idx) w.u32(static_cast<std::uint32_t>(i));
}

std::vector<std::size_t> read_indices(Reader& r) {
  const std::uint32_t n = r.u32();
  std::vector<std::size_t> idx;
  idx.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) idx.push_back(r.u32());
  return idx;
}

void write_learner(Writer& w, const WeakLearner& learner, double alpha, const SubgridMask& mask) {
  w.f64(alpha);
  write_indices(w, mask.rows);
  write_indices(w, mask.cols);
  w.u32(learner.profile_id);
  const auto params = learner.net.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Tensor* p : params) {
    w.u32(static_cast<std::uint32_t>(p->rank()));
    for (auto d : p->shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p->data()) w.f64(v);
  }
}

struct LearnerBlock {
  double alpha;
  SubgridMask mask;
  WeakLearner learner;
};

LearnerBlock read_learner(Reader& r, std::size_t channels, std::size_t height, std::size_t width, std::size_t classes,
                          LearnerRole role) {
  LearnerBlock block;
  block.alpha = r.f64();
  block.mask.rows = read_indices(r);
  block.mask.cols = read_indices(r);
  try {
    block.mask.validate(height, width);
  } catch (const GeometryError& e) {
    throw FormatError(std::string("checkpoint mask invalid: ") + e.what());
  }
  const auto& profile = find_profile(r.u32());
  const Shape geometry{channels, block.mask.rows.size(), block.mask.cols.size()};
  block.learner = WeakLearner{build_architecture(profile, geometry, classes), geometry, role, profile.id};
  auto params = block.learner.net.parameters();
  if (r.u32() != params.size()) throw FormatError("checkpoint tensor count does not match the architecture");
  for (Tensor* p : params) {
    const std::uint32_t rank = r.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32());
    if (shape != p->shape()) {
      throw FormatError("checkpoint tensor shape " + shape_to_string(shape) + " does not match expected " +
                        shape_to_string(p->shape()));
    }
    for (auto& v : p->data()) v = r.f64();
  }
  return block;
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const BoostEnsemble& ensemble) {
  const Shape& g = ensemble.geometry();
  if (g.size() != 3) throw GeometryError("ensemble has no input geometry");
  Writer w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ensemble.classes));
  w.f64(ensemble.shrinkage);
  w.u32(static_cast<std::uint32_t>(ensemble.stages.size()));
  for (auto d : g) w.u32(static_cast<std::uint32_t>(d));
  write_learner(w, ensemble.basic, 1.0, SubgridMask::full(g[1], g[2]));
  for (const auto& stage : ensemble.stages) write_learner(w, stage.learner, stage.alpha, stage.mask);
  auto& bytes = w.bytes();
  const std::uint32_t crc = crc_of(bytes.data(), bytes.size());
  w.u32(crc);
  return std::move(bytes);
}

BoostEnsemble decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 + 4 + 4) throw FormatError("checkpoint truncated");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32() != crc_of(bytes.data(), body)) throw FormatError("checkpoint checksum mismatch");

  Reader r(bytes.data(), body);
  char magic[4];
  r.raw(magic, 4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  BoostEnsemble ensemble;
  ensemble.classes = r.u32();
  ensemble.shrinkage = r.f64();
  const std::uint32_t stages = r.u32();
  const std::size_t c = r.u32(), h = r.u32(), w = r.u32();
  if (ensemble.classes < 2 || c == 0 || h == 0 || w == 0) throw FormatError("checkpoint header has invalid extents");
  ensemble.basic = read_learner(r, c, h, w, ensemble.classes, LearnerRole::basic).learner;
  for (std::uint32_t t = 0; t < stages; ++t) {
    auto block = read_learner(r, c, h, w, ensemble.classes, LearnerRole::additive);
    ensemble.stages.push_back(BoostStage{std::move(block.learner), block.alpha, std::move(block.mask)});
  }
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  return ensemble;
}

void save_checkpoint(const BoostEnsemble& ensemble, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ensemble);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

BoostEnsemble load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

}  // namespace sgboost
