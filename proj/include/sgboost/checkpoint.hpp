#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sgboost/boosting.hpp"

namespace sgboost {

inline constexpr char kCheckpointMagic[4] = {'S', 'G', 'B', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serializes an ensemble. All integers are u32 LE, floats f64 LE:
///
///   "SGBC" version M nu stage_count C H W
///   learner block for g0, then one per stage:
///     alpha, n_rows rows..., n_cols cols..., profile_id,
///     n_tensors, per tensor: rank dims... values...
///   CRC32 of every preceding byte
///
/// g0's block stores alpha = 1 and the full-grid mask.
std::vector<unsigned char> encode_checkpoint(const BoostEnsemble& ensemble);
BoostEnsemble decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const BoostEnsemble& ensemble, const std::filesystem::path& path);
BoostEnsemble load_checkpoint(const std::filesystem::path& path);

}  // namespace sgboost
