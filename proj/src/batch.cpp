#include "sgboost/batch.hpp"

#include "sgboost/error.hpp"

namespace sgboost {

LabeledBatch LabeledBatch::subset(std::span<const std::size_t> indices) const {
  LabeledBatch out;
  out.inputs = inputs.gather_leading(indices);
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(labels.at(i));
  out.classes = classes;
  out.normalized = normalized;
  return out;
}

void LabeledBatch::validate() const {
  if (labels.empty()) throw GeometryError("batch is empty");
  if (inputs.rank() != 4) throw GeometryError("batch inputs must be [N, C, H, W], got " + shape_to_string(inputs.shape()));
  if (inputs.dim(0) != labels.size()) throw GeometryError("batch has mismatched input and label counts");
  if (classes == 0) throw GeometryError("batch declares zero classes");
  for (int z : labels) {
    if (z < 1 || static_cast<std::size_t>(z) > classes) {
      throw LabelError("label " + std::to_string(z) + " outside 1.." + std::to_string(classes));
    }
  }
}

}  // namespace sgboost
