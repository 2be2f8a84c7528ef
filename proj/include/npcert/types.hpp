#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace npcert {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};
struct InvariantViolation : Error {
  using Error::Error;
};
struct SchemaVersionMismatch : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct UnsupportedCombination : Error {
  using Error::Error;
};
struct DegenerateBoundary : Error {
  using Error::Error;
};
struct DomainViolation : Error {
  using Error::Error;
};
struct InfeasibleRegion : Error {
  using Error::Error;
};
struct DimensionTooLarge : Error {
  using Error::Error;
};
struct NotOnSphere : Error {
  using Error::Error;
};
struct NegativeEntry : Error {
  using Error::Error;
};
struct ClassTooSmall : Error {
  using Error::Error;
};
struct UnsupportedBlockShape : Error {
  using Error::Error;
};
struct PreconditionViolated : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Norms, domains, threat models
// ---------------------------------------------------------------------------

// Used both for the classifier metric (p) and the perturbation norm (q).
enum class Norm : std::uint8_t { L1, L2, Linf, EmbeddedL2 };

inline const char* to_string(Norm n) {
  switch (n) {
    case Norm::L1: return "l1";
    case Norm::L2: return "l2";
    case Norm::Linf: return "linf";
    case Norm::EmbeddedL2: return "embedded_l2";
  }
  return "?";
}

enum class DomainKind : std::uint8_t { Unbounded, UnitBox, SphereProduct };

inline const char* to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Unbounded: return "unbounded";
    case DomainKind::UnitBox: return "unit_box";
    case DomainKind::SphereProduct: return "sphere_product";
  }
  return "?";
}

struct DomainSpec {
  DomainKind kind = DomainKind::Unbounded;
};

// One block of the sphere-product embedding: `positions` spheres of
// dimension `channels`, each with radius `radius`. The slices are laid out
// contiguously: block by block, position by position, channels innermost.
struct SphereBlock {
  double radius = 1.0;
  std::uint32_t channels = 0;
  std::uint32_t positions = 0;
};

struct SphereEmbedding {
  std::vector<SphereBlock> blocks;

  std::size_t total_dim() const {
    std::size_t d = 0;
    for (const auto& b : blocks) d += std::size_t(b.channels) * b.positions;
    return d;
  }
  std::size_t num_spheres() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.positions;
    return n;
  }
  // Sum of n_l * r_l^2 over blocks; equals the layer count under the
  // 1/sqrt(n_l) normalization and generalizes the dual-bound constant.
  double radius_norm_sq() const {
    double s = 0;
    for (const auto& b : blocks) s += double(b.positions) * b.radius * b.radius;
    return s;
  }
};

struct ThreatSpec {
  Norm q = Norm::L2;
  std::optional<double> radius_cap;  // stop refining once the bound exceeds this
};

// ---------------------------------------------------------------------------
// The classifier
// ---------------------------------------------------------------------------

struct PrototypeModel {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  Norm metric = Norm::L2;
  DomainSpec domain;
  std::vector<std::uint32_t> labels;    // one class index per prototype
  std::vector<double> prototypes;       // row-major, labels.size() x dim
  std::optional<SphereEmbedding> embedding;  // present iff metric == EmbeddedL2

  std::size_t num_prototypes() const { return labels.size(); }

  std::span<const double> prototype(std::size_t i) const {
    return {prototypes.data() + i * dim, dim};
  }
  std::span<double> prototype(std::size_t i) {
    return {prototypes.data() + i * dim, dim};
  }

  void validate() const;
};

struct ClassifyResult {
  std::uint32_t label = 0;
  double dist_own = 0;    // distance to nearest prototype of the predicted class
  double dist_other = 0;  // distance to nearest prototype of any other class
};

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

struct Diagnostics {
  bool shortcut_hit = false;       // pairwise minimizer settled the exact value
  std::size_t subproblems_solved = 0;
  std::size_t pruned = 0;
  double wall_time = 0;            // seconds
};

struct Certificate {
  std::uint32_t label_predicted = 0;
  bool correct = false;
  double lower_bound = 0;
  std::optional<double> exact;
  std::optional<double> upper_bound;
  Diagnostics diagnostics;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace npcert
