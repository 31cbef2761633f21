#include <gtest/gtest.h>
#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "sgboost/checkpoint.hpp"
#include "sgboost/error.hpp"

using namespace sgboost;

namespace {

BoostEnsemble sample_ensemble(std::size_t stages, const std::string& profile = "tiny-cnn-2conv") {
  const auto& p = find_profile(profile);
  BoostEnsemble e;
  e.classes = 4;
  e.shrinkage = 0.02;
  e.basic = build_basic_learner(p, {3, 12, 12}, 4, 11);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t t = 0; t < stages; ++t) {
    ImportanceMap m(12, 12);
    for (std::size_t r = 0; r < 12; ++r)
      for (std::size_t c = 0; c < 12; ++c) m.at(r, c) = u(rng);
    const SubgridMask mask = select_subgrid(m, 0.8, 0.7);
    e.stages.push_back({warm_start_learner(e.last_learner(), mask, 4, 20 + t), 0.1 + u(rng), mask});
  }
  return e;
}

Tensor random_inputs(std::size_t n) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  Tensor x({n, 3, 12, 12});
  for (auto& v : x.data()) v = nd(rng);
  return x;
}

void refresh_crc(std::vector<unsigned char>& bytes) {
  const std::size_t body = bytes.size() - 4;
  const auto crc = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
  for (int i = 0; i < 4; ++i) bytes[body + i] = static_cast<unsigned char>(crc >> (8 * i));
}

}  // namespace

TEST(Checkpoint, RoundTripBitIdenticalPredictions) {
  const BoostEnsemble e = sample_ensemble(3);
  const BoostEnsemble back = decode_checkpoint(encode_checkpoint(e));
  EXPECT_EQ(back.stages.size(), 3u);
  EXPECT_EQ(back.shrinkage, e.shrinkage);
  EXPECT_EQ(back.classes, 4u);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(back.stages[t].mask, e.stages[t].mask);
    EXPECT_EQ(back.stages[t].alpha, e.stages[t].alpha);
    EXPECT_EQ(back.stages[t].learner.role, LearnerRole::additive);
  }
  const Tensor x = random_inputs(100);
  EXPECT_EQ(ensemble_predict(back, x), ensemble_predict(e, x));
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(e));
}

TEST(Checkpoint, BasicOnlyRoundTrip) {
  for (const auto& p : architecture_profiles()) {
    const BoostEnsemble e = sample_ensemble(0, p.name);
    const BoostEnsemble back = decode_checkpoint(encode_checkpoint(e));
    EXPECT_TRUE(back.stages.empty());
    EXPECT_EQ(back.basic.profile_id, p.id);
    const Tensor x = random_inputs(10);
    EXPECT_EQ(ensemble_predict(back, x), ensemble_predict(e, x));
  }
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "sgboost_ckpt_test.sgbc";
  const BoostEnsemble e = sample_ensemble(2);
  save_checkpoint(e, path);
  const BoostEnsemble back = load_checkpoint(path);
  const Tensor x = random_inputs(20);
  EXPECT_EQ(ensemble_predict(back, x), ensemble_predict(e, x));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), FormatError);
}

TEST(Checkpoint, HeaderLayout) {
  const auto bytes = encode_checkpoint(sample_ensemble(1));
  EXPECT_EQ(std::memcmp(bytes.data(), "SGBC", 4), 0);
  EXPECT_EQ(bytes[4], 1);  // version, little-endian u32
  EXPECT_EQ(bytes[8], 4);  // M
  double nu;
  std::memcpy(&nu, bytes.data() + 12, 8);
  EXPECT_EQ(nu, 0.02);
  EXPECT_EQ(bytes[20], 1);  // stage count
}

TEST(Checkpoint, CorruptedPayloadFailsChecksum) {
  auto bytes = encode_checkpoint(sample_ensemble(2));
  for (std::size_t pos : {std::size_t{30}, bytes.size() / 2, bytes.size() - 5}) {
    auto bad = bytes;
    bad[pos] ^= 0x40;
    try {
      decode_checkpoint(bad);
      FAIL() << "corruption at " << pos << " not detected";
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
    }
  }
}

TEST(Checkpoint, MagicVersionAndTruncation) {
  auto bytes = encode_checkpoint(sample_ensemble(1));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  refresh_crc(bad);
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad.assign(bytes.begin(), bytes.begin() + 40);
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad.assign(bytes.begin(), bytes.end() - 12);
  refresh_crc(bad);
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad.insert(bad.end() - 4, 0);
  refresh_crc(bad);
  EXPECT_THROW(decode_checkpoint(bad), FormatError);
}
