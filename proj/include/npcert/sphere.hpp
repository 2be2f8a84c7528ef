#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "npcert/certify.hpp"
#include "npcert/geometry.hpp"
#include "npcert/model.hpp"
#include "npcert/types.hpp"
#include "npcert/vec.hpp"

namespace npcert {

// A query vector checked against the sphere-product invariants: every
// (position, block) slice has the block radius and non-negative entries.
struct EmbeddedQuery {
  std::vector<double> z;
};

struct ValidateOptions {
  double radius_tol = 1e-6;      // accepted without touching the data
  double renorm_tol = 1e-4;      // larger deviations up to this are rescaled
  double negativity_tol = 1e-9;  // entries above -tol are clamped to zero
};

// Walks the block layout: calls fn(block_index, radius, first, channels) for
// every sphere slice.
template <class Fn>
void for_each_slice(const SphereEmbedding& emb, Fn&& fn) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < emb.blocks.size(); ++l) {
    const auto& blk = emb.blocks[l];
    for (std::uint32_t h = 0; h < blk.positions; ++h) {
      fn(l, blk.radius, offset, std::size_t(blk.channels));
      offset += blk.channels;
    }
  }
}

inline EmbeddedQuery validate_embedding(std::span<const double> z, const SphereEmbedding& emb,
                                        const ValidateOptions& opt = {}) {
  if (z.size() != emb.total_dim())
    throw DimensionMismatch("embedding expects dimension " + std::to_string(emb.total_dim()) +
                            ", got " + std::to_string(z.size()));
  EmbeddedQuery out;
  out.z.assign(z.begin(), z.end());
  for (std::size_t i = 0; i < out.z.size(); ++i) {
    if (out.z[i] < -opt.negativity_tol)
      throw NegativeEntry("entry " + std::to_string(i) + " is negative (" +
                          std::to_string(out.z[i]) + ")");
    if (out.z[i] < 0) out.z[i] = 0;
  }
  for_each_slice(emb, [&](std::size_t l, double r, std::size_t first, std::size_t c) {
    std::span<double> slice(out.z.data() + first, c);
    const double nrm = norm2(slice);
    const double dev = std::abs(nrm - r);
    if (dev <= opt.radius_tol) return;
    if (dev <= opt.renorm_tol && nrm > 0) {
      const double scale = r / nrm;
      for (double& v : slice) v *= scale;
      return;
    }
    throw NotOnSphere("block " + std::to_string(l) + " slice at offset " +
                      std::to_string(first) + " has radius " + std::to_string(nrm) +
                      ", expected " + std::to_string(r) + " (deviation " + std::to_string(dev) +
                      ")");
  });
  return out;
}

// ---------------------------------------------------------------------------
// Dual lower bound on the sphere-product-constrained pairwise distance.
//
// With v = w_j - w_i and b = (||w_i||^2 - ||w_j||^2)/2, the dual function
//   g(lambda) = -sum_slices ||(z + lambda v)^+||_2 r_l - lambda b,  lambda >= 0
// is concave; weak duality turns its maximum into the bound
//   sqrt(max(0, 2 sum_l n_l r_l^2 + 2 g*)).
// ---------------------------------------------------------------------------

struct SphereDualBound {
  double bound = 0;
  double lambda = 0;
};

inline SphereDualBound sphere_dual_bound(const EmbeddedQuery& query, const SphereEmbedding& emb,
                                         std::span<const double> wi, std::span<const double> wj) {
  const std::size_t d = query.z.size();
  if (wi.size() != d || wj.size() != d)
    throw DimensionMismatch("sphere dual bound: prototype sizes differ from query");
  const std::span<const double> z(query.z);
  if (distance(z, wi, Norm::L2) >= distance(z, wj, Norm::L2))
    throw PreconditionViolated(
        "sphere dual bound requires z strictly closer to the own prototype");

  const std::vector<double> v = sub(wj, wi);
  const double b = (norm2_sq(wi) - norm2_sq(wj)) / 2.0;

  auto dual = [&](double lambda) {
    double s = 0;
    for_each_slice(emb, [&](std::size_t, double r, std::size_t first, std::size_t c) {
      double nrm_sq = 0;
      for (std::size_t t = first; t < first + c; ++t) {
        const double val = z[t] + lambda * v[t];
        if (val > 0) nrm_sq += val * val;
      }
      s += std::sqrt(nrm_sq) * r;
    });
    return -s - lambda * b;
  };

  // Bracket the concave maximum by doubling, then golden-section search.
  double hi = 1.0;
  const double cap = 1e6;
  while (hi < cap && dual(2.0 * hi) > dual(hi)) hi *= 2.0;
  hi = std::min(2.0 * hi, cap);

  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, bnd = hi;
  double c1 = bnd - gr * (bnd - a), c2 = a + gr * (bnd - a);
  double f1 = dual(c1), f2 = dual(c2);
  while (bnd - a > 1e-10) {
    if (f1 >= f2) {
      bnd = c2;
      c2 = c1;
      f2 = f1;
      c1 = bnd - gr * (bnd - a);
      f1 = dual(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + gr * (bnd - a);
      f2 = dual(c2);
    }
  }
  SphereDualBound out;
  out.lambda = (a + bnd) / 2.0;
  const double g_star = std::max(dual(out.lambda), dual(0.0));
  out.bound = std::sqrt(std::max(0.0, 2.0 * emb.radius_norm_sq() + 2.0 * g_star));
  return out;
}

// Lower bound for an embedded-metric model: per opposing prototype, the better
// of the plain Euclidean hyperplane distance and the sphere-product dual.
inline Certificate certify_embedded(const PrototypeModel& model, const EmbeddedQuery& query,
                                    std::uint32_t y, const ThreatSpec& threat = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (model.metric != Norm::EmbeddedL2 || !model.embedding)
    throw UnsupportedCombination("certify_embedded requires an embedded-metric model");
  if (threat.q != Norm::EmbeddedL2 && threat.q != Norm::L2)
    throw UnsupportedCombination("embedded models certify Euclidean threat in embedding space");

  const std::span<const double> z(query.z);
  Certificate cert;
  const ClassifyResult pred = classify(model, z);
  cert.label_predicted = pred.label;
  cert.correct = pred.label == y;

  const ClassMargins margins = class_margins(model, z, y);
  if (margins.dist_own - margins.dist_other >= 0) {
    cert.lower_bound = 0;
    cert.exact = 0;
    cert.upper_bound = 0;
  } else {
    const auto wi = model.prototype(margins.nearest_own);
    const bool use_dual = model.domain.kind == DomainKind::SphereProduct;
    double lower = kInfinity;
    for (std::size_t j = 0; j < model.num_prototypes(); ++j) {
      if (model.labels[j] == y) continue;
      const auto wj = model.prototype(j);
      double bound = pairwise_l2(z, wi, wj, Norm::L2).value;
      if (use_dual && distance(z, wi, Norm::L2) < distance(z, wj, Norm::L2)) {
        bound = std::max(bound, sphere_dual_bound(query, *model.embedding, wi, wj).bound);
        ++cert.diagnostics.subproblems_solved;
      }
      lower = std::min(lower, bound);
    }
    cert.lower_bound = lower;  // never exact: the constraint set is an over-approximation
  }
  cert.diagnostics.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return cert;
}

}  // namespace npcert
