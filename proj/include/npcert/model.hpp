#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "npcert/types.hpp"
#include "npcert/vec.hpp"

namespace npcert {

inline void PrototypeModel::validate() const {
  if (dim == 0) throw InvariantViolation("model dimension must be positive");
  if (num_classes == 0) throw InvariantViolation("model needs at least one class");
  if (labels.empty()) throw InvariantViolation("model has no prototypes");
  if (prototypes.size() != labels.size() * dim)
    throw InvariantViolation("prototype matrix shape does not match dim and label count");
  if (!all_finite(prototypes))
    throw InvariantViolation("prototype entries must be finite");

  std::vector<char> seen(num_classes, 0);
  for (std::uint32_t c : labels) {
    if (c >= num_classes)
      throw InvariantViolation("prototype label " + std::to_string(c) + " out of range");
    seen[c] = 1;
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (!seen[c])
      throw InvariantViolation("class " + std::to_string(c) + " has no prototypes");
  }

  if (metric == Norm::EmbeddedL2) {
    if (!embedding) throw InvariantViolation("embedded metric requires an embedding descriptor");
    if (embedding->total_dim() != dim)
      throw InvariantViolation("embedding blocks imply dimension " +
                               std::to_string(embedding->total_dim()) + ", model has " +
                               std::to_string(dim));
    for (const auto& b : embedding->blocks) {
      if (b.radius <= 0 || b.channels == 0 || b.positions == 0)
        throw InvariantViolation("embedding block fields must be positive");
    }
  } else if (embedding) {
    throw InvariantViolation("embedding descriptor only valid with the embedded metric");
  }
  if (domain.kind == DomainKind::SphereProduct && metric != Norm::EmbeddedL2)
    throw InvariantViolation("sphere-product domain only valid with the embedded metric");
}

// Nearest prototype decision. Class ties break toward the smaller class index.
inline ClassifyResult classify(const PrototypeModel& model, std::span<const double> z) {
  if (z.size() != model.dim)
    throw DimensionMismatch("query has " + std::to_string(z.size()) + " entries, model dim is " +
                            std::to_string(model.dim));
  if (!all_finite(z)) throw DimensionMismatch("query entries must be finite");

  const Norm dist_norm = model.metric == Norm::EmbeddedL2 ? Norm::L2 : model.metric;
  std::vector<double> per_class(model.num_classes, kInfinity);
  for (std::size_t i = 0; i < model.num_prototypes(); ++i) {
    const double d = distance(z, model.prototype(i), dist_norm);
    double& best = per_class[model.labels[i]];
    if (d < best) best = d;
  }

  std::uint32_t arg = 0;
  for (std::uint32_t c = 1; c < model.num_classes; ++c) {
    if (per_class[c] < per_class[arg]) arg = c;
  }
  double other = kInfinity;
  for (std::uint32_t c = 0; c < model.num_classes; ++c) {
    if (c != arg) other = std::min(other, per_class[c]);
  }
  return {arg, per_class[arg], other};
}

// Distance from z to the nearest prototype of class y and to the nearest
// prototype outside class y; index of the nearest own-class prototype
// (smallest index on ties).
struct ClassMargins {
  double dist_own = kInfinity;
  double dist_other = kInfinity;
  std::size_t nearest_own = 0;
  std::size_t nearest_other = 0;
};

inline ClassMargins class_margins(const PrototypeModel& model, std::span<const double> z,
                                  std::uint32_t y) {
  if (y >= model.num_classes) throw InvariantViolation("label out of range");
  const Norm dist_norm = model.metric == Norm::EmbeddedL2 ? Norm::L2 : model.metric;
  ClassMargins m;
  for (std::size_t i = 0; i < model.num_prototypes(); ++i) {
    const double d = distance(z, model.prototype(i), dist_norm);
    if (model.labels[i] == y) {
      if (d < m.dist_own) {
        m.dist_own = d;
        m.nearest_own = i;
      }
    } else if (d < m.dist_other) {
      m.dist_other = d;
      m.nearest_other = i;
    }
  }
  return m;
}

}  // namespace npcert
