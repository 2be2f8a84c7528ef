#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "npcert/geometry.hpp"
#include "npcert/lp.hpp"
#include "npcert/model.hpp"
#include "npcert/qp.hpp"
#include "npcert/support.hpp"
#include "npcert/types.hpp"

namespace npcert {

enum class CertifyMode : std::uint8_t { LowerBoundOnly, Exact };

// ---------------------------------------------------------------------------
// Subproblems: distance from z to the region where prototype j wins against
// every own-class prototype.
// ---------------------------------------------------------------------------

struct ConvexSubproblem {
  Norm objective_norm = Norm::L2;
  std::vector<double> anchor;                 // z
  std::vector<std::vector<double>> normals;   // <normal_i, x> >= rhs_i
  std::vector<double> rhs;
  bool unit_box = false;
};

inline ConvexSubproblem build_subproblem(const PrototypeModel& model, std::span<const double> z,
                                         std::uint32_t y, std::size_t j, Norm q) {
  ConvexSubproblem out;
  out.objective_norm = q;
  out.anchor.assign(z.begin(), z.end());
  out.unit_box = model.domain.kind == DomainKind::UnitBox;
  const auto wj = model.prototype(j);
  for (std::size_t i = 0; i < model.num_prototypes(); ++i) {
    if (model.labels[i] != y) continue;
    const auto wi = model.prototype(i);
    std::vector<double> normal = sub(wj, wi);
    bool zero = true;
    for (double v : normal)
      if (v != 0) zero = false;
    if (zero) throw DegenerateBoundary("prototypes of different classes coincide");
    out.normals.push_back(std::move(normal));
    out.rhs.push_back((norm2_sq(wj) - norm2_sq(wi)) / 2.0);
  }
  return out;
}

inline SolveOutcome solve_subproblem_qp(const ConvexSubproblem& sub,
                                        std::optional<double> incumbent,
                                        std::size_t max_sweeps = 100000) {
  DualAscentQp qp(sub.anchor, sub.normals, sub.rhs, sub.unit_box);
  return qp.solve(incumbent, max_sweeps);
}

// Epigraph LP for q in {1, inf}; solved to optimality, dual reported.
inline SolveOutcome solve_subproblem_lp(const ConvexSubproblem& sub) {
  const std::size_t d = sub.anchor.size();
  const auto& z = sub.anchor;
  const bool linf = sub.objective_norm == Norm::Linf;
  const std::size_t nt = linf ? 1 : d;

  LpProblem lp;
  lp.num_vars = 2 * d + nt;  // x = z + u - v, epigraph variables t
  lp.c.assign(lp.num_vars, 0.0);
  for (std::size_t t = 0; t < nt; ++t) lp.c[2 * d + t] = 1.0;

  auto add_row = [&](std::vector<double> a, double b) {
    lp.rows.push_back(std::move(a));
    lp.rhs.push_back(b);
  };
  for (std::size_t s = 0; s < d; ++s) {
    const std::size_t t_idx = 2 * d + (linf ? 0 : s);
    std::vector<double> r1(lp.num_vars, 0.0), r2(lp.num_vars, 0.0);
    r1[s] = 1.0;
    r1[d + s] = -1.0;
    r1[t_idx] = -1.0;
    add_row(std::move(r1), 0.0);
    r2[s] = -1.0;
    r2[d + s] = 1.0;
    r2[t_idx] = -1.0;
    add_row(std::move(r2), 0.0);
    if (sub.unit_box) {
      std::vector<double> b1(lp.num_vars, 0.0), b2(lp.num_vars, 0.0);
      b1[s] = 1.0;
      b1[d + s] = -1.0;
      add_row(std::move(b1), 1.0 - z[s]);
      b2[s] = -1.0;
      b2[d + s] = 1.0;
      add_row(std::move(b2), z[s]);
    }
  }
  for (std::size_t i = 0; i < sub.normals.size(); ++i) {
    std::vector<double> a(lp.num_vars, 0.0);
    for (std::size_t s = 0; s < d; ++s) {
      a[s] = -sub.normals[i][s];
      a[d + s] = sub.normals[i][s];
    }
    add_row(std::move(a), dot(sub.normals[i], z) - sub.rhs[i]);
  }

  LpSolution sol = solve_lp(lp);
  SolveOutcome out;
  out.iterations = sol.iterations;
  if (sol.status == LpStatus::Infeasible) {
    out.status = SolveStatus::Infeasible;
    return out;
  }
  if (sol.status == LpStatus::IterationLimit) {
    out.status = SolveStatus::IterationLimit;
    out.dual_lower = 0;
    return out;
  }
  if (sol.status != LpStatus::Optimal) throw Error("subproblem LP reported unbounded");
  out.status = SolveStatus::Optimal;
  out.primal_value = sol.objective;
  out.dual_lower = sol.dual_objective;
  out.x.resize(d);
  for (std::size_t s = 0; s < d; ++s) {
    out.x[s] = z[s] + sol.y[s] - sol.y[d + s];
    if (sub.unit_box) out.x[s] = clamp01(out.x[s]);
  }
  return out;
}

inline SolveOutcome solve_subproblem(const ConvexSubproblem& sub,
                                     std::optional<double> incumbent = std::nullopt) {
  if (sub.objective_norm == Norm::L2 || sub.objective_norm == Norm::EmbeddedL2)
    return solve_subproblem_qp(sub, incumbent);
  return solve_subproblem_lp(sub);
}

// r for p=1, q=inf: the pairwise maximizer is shared across own-class
// prototypes, so the region distance is the maximum of the pairwise values.
inline double exact_region_distance_l1_linf(const PrototypeModel& model,
                                            std::span<const double> z, std::uint32_t y,
                                            std::size_t j) {
  double value = 0;
  const auto wj = model.prototype(j);
  for (std::size_t i = 0; i < model.num_prototypes(); ++i) {
    if (model.labels[i] != y) continue;
    const PairwiseResult r = pairwise_l1_linf(z, model.prototype(i), wj, model.domain);
    value = std::max(value, r.value);
    if (!std::isfinite(value)) break;
  }
  return value;
}

// ---------------------------------------------------------------------------
// Min-max lower bound with the nearest-own-prototype shortcut.
// ---------------------------------------------------------------------------

struct MinMaxBound {
  double value = 0;
  std::size_t j_star = 0;
  std::optional<std::vector<double>> minimizer;
  bool tight = false;
};

namespace detail {

// Does x settle the whole region subproblem for j (all own-class constraints
// plus the domain)? If so the pairwise value is the exact region distance.
inline bool settles_region(const PrototypeModel& model, std::uint32_t y, std::size_t j,
                           std::span<const double> x, const DomainSpec& domain,
                           double tol = 1e-9) {
  if (domain.kind == DomainKind::UnitBox && !in_unit_box(x, tol)) return false;
  if (domain.kind == DomainKind::SphereProduct) return false;
  const Norm p = model.metric == Norm::EmbeddedL2 ? Norm::L2 : model.metric;
  const auto wj = model.prototype(j);
  const double dj = distance(x, wj, p);
  for (std::size_t i = 0; i < model.num_prototypes(); ++i) {
    if (model.labels[i] != y) continue;
    if (distance(x, model.prototype(i), p) - dj < -tol) return false;
  }
  return true;
}

}  // namespace detail

inline MinMaxBound minmax_lower_bound(const PrototypeModel& model, std::span<const double> z,
                                      std::uint32_t y, Norm q, const DomainSpec& domain) {
  const ClassMargins margins = class_margins(model, z, y);
  MinMaxBound out;
  out.j_star = margins.nearest_other;
  if (margins.dist_own - margins.dist_other >= 0) {
    out.tight = true;  // on or past the boundary: zero is exact
    return out;
  }
  const Norm p = model.metric == Norm::EmbeddedL2 ? Norm::L2 : model.metric;
  const auto wi = model.prototype(margins.nearest_own);

  double best = kInfinity;
  std::optional<std::vector<double>> best_x;
  std::size_t best_j = margins.nearest_other;
  for (std::size_t j = 0; j < model.num_prototypes(); ++j) {
    if (model.labels[j] == y) continue;
    PairwiseResult r = pairwise_distance({z, wi, model.prototype(j), p, q, domain});
    if (r.value < best) {
      best = r.value;
      best_j = j;
      best_x = std::move(r.minimizer);
    }
  }
  out.value = best;
  out.j_star = best_j;
  out.minimizer = std::move(best_x);
  out.tight = out.minimizer && detail::settles_region(model, y, best_j, *out.minimizer, domain);
  return out;
}

// ---------------------------------------------------------------------------
// Full certification (staged lower bounds, optional exact computation).
// ---------------------------------------------------------------------------

namespace detail {

inline void require_mode_supported(Norm p, Norm q, CertifyMode mode, const DomainSpec& domain) {
  if (mode == CertifyMode::Exact) {
    require_supported(p, q, Exactness::Exact, domain);
  } else {
    // Lower bounds need a polynomial pairwise cell in the unbounded relaxation.
    require_supported(p, q, Exactness::Pairwise, DomainSpec{DomainKind::Unbounded});
  }
}

inline bool box_pairwise_available(Norm p, Norm q) {
  if (p == Norm::L2 || p == Norm::EmbeddedL2) return true;
  if (q == Norm::Linf) return true;  // p in {1, inf} via breakpoint / bisection search
  return false;
}

}  // namespace detail

inline Certificate certify(const PrototypeModel& model, std::span<const double> z,
                           std::uint32_t y, const ThreatSpec& threat,
                           CertifyMode mode = CertifyMode::LowerBoundOnly) {
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&](Certificate c) {
    c.diagnostics.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return c;
  };

  if (model.metric == Norm::EmbeddedL2 || threat.q == Norm::EmbeddedL2)
    throw UnsupportedCombination(
        "embedded-metric models are certified through the embedding interface");
  const Norm p = model.metric;
  const Norm q = threat.q;
  detail::require_mode_supported(p, q, mode, model.domain);

  const bool box = model.domain.kind == DomainKind::UnitBox;
  if (box && !in_unit_box(z, 1e-12))
    throw DomainViolation("query lies outside the unit box domain");

  Certificate cert;
  const ClassifyResult pred = classify(model, z);
  cert.label_predicted = pred.label;
  cert.correct = pred.label == y;

  const ClassMargins margins = class_margins(model, z, y);
  if (margins.dist_own - margins.dist_other >= 0) {
    cert.lower_bound = 0;
    cert.exact = 0;
    cert.upper_bound = 0;
    return finish(cert);
  }

  const std::size_t nearest_own = margins.nearest_own;
  const auto wi = model.prototype(nearest_own);

  // Stage 1: unbounded pairwise bounds (cheap closed forms).
  std::vector<std::size_t> js;
  std::vector<double> bound_j;
  for (std::size_t j = 0; j < model.num_prototypes(); ++j) {
    if (model.labels[j] == y) continue;
    js.push_back(j);
    bound_j.push_back(
        pairwise_distance({z, wi, model.prototype(j), p, q, DomainSpec{DomainKind::Unbounded}})
            .value);
  }
  if (js.empty()) {
    // Single-class model: nothing to perturb toward.
    cert.lower_bound = kInfinity;
    cert.exact = kInfinity;
    return finish(cert);
  }
  std::size_t best_idx = std::size_t(
      std::min_element(bound_j.begin(), bound_j.end()) - bound_j.begin());
  cert.lower_bound = bound_j[best_idx];

  {
    PairwiseResult best = pairwise_distance(
        {z, wi, model.prototype(js[best_idx]), p, q, DomainSpec{DomainKind::Unbounded}});
    if (best.minimizer &&
        detail::settles_region(model, y, js[best_idx], *best.minimizer, model.domain)) {
      cert.exact = cert.lower_bound;
      cert.upper_bound = cert.lower_bound;
      cert.diagnostics.shortcut_hit = true;
      return finish(cert);
    }
  }
  if (threat.radius_cap && cert.lower_bound >= *threat.radius_cap) return finish(cert);

  // Stage 2 (unit box): recompute with box constraints, cheapest first, and
  // skip any j whose relaxed bound already exceeds the running minimum.
  if (box && detail::box_pairwise_available(p, q)) {
    std::vector<std::size_t> order(js.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return bound_j[a] < bound_j[b]; });
    double best_box = kInfinity;
    std::optional<std::vector<double>> best_box_x;
    std::size_t best_box_j = js[order[0]];
    for (std::size_t t = 0; t < order.size(); ++t) {
      const std::size_t idx = order[t];
      if (bound_j[idx] >= best_box) {
        cert.diagnostics.pruned += order.size() - t;
        break;
      }
      PairwiseResult r = pairwise_distance(
          {z, wi, model.prototype(js[idx]), p, q, DomainSpec{DomainKind::UnitBox}});
      bound_j[idx] = std::max(bound_j[idx], r.value);
      if (r.value < best_box) {
        best_box = r.value;
        best_box_j = js[idx];
        best_box_x = std::move(r.minimizer);
      }
    }
    cert.lower_bound = best_box;
    if (best_box_x &&
        detail::settles_region(model, y, best_box_j, *best_box_x, model.domain)) {
      cert.exact = best_box;
      cert.upper_bound = best_box;
      cert.diagnostics.shortcut_hit = true;
      return finish(cert);
    }
    if (threat.radius_cap && cert.lower_bound >= *threat.radius_cap) return finish(cert);
  }

  if (mode == CertifyMode::LowerBoundOnly) return finish(cert);

  // Stage 3: exact region distances with incumbent-driven early termination.
  std::vector<std::size_t> order(js.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return bound_j[a] < bound_j[b]; });

  double mu = kInfinity;         // incumbent: best exact region distance so far
  double unresolved = kInfinity; // lower bounds of subproblems that hit limits
  for (std::size_t t = 0; t < order.size(); ++t) {
    const std::size_t idx = order[t];
    if (bound_j[idx] >= mu) {
      cert.diagnostics.pruned += order.size() - t;
      break;
    }
    ++cert.diagnostics.subproblems_solved;
    if (p == Norm::L1) {
      mu = std::min(mu, exact_region_distance_l1_linf(model, z, y, js[idx]));
      continue;
    }
    const ConvexSubproblem sub = build_subproblem(model, z, y, js[idx], q);
    const SolveOutcome sol = solve_subproblem(
        sub, std::isfinite(mu) ? std::optional<double>(mu) : std::nullopt);
    switch (sol.status) {
      case SolveStatus::Optimal:
        mu = std::min(mu, sol.primal_value);
        break;
      case SolveStatus::EarlyTerminated:
        break;  // dual already above the incumbent, j cannot win
      case SolveStatus::Infeasible:
        break;  // region unreachable inside the domain: contributes +infinity
      case SolveStatus::IterationLimit:
        unresolved = std::min(unresolved, sol.dual_lower);
        break;
    }
  }

  if (unresolved < mu) {
    // Could not finish a subproblem: downgrade to a certified lower bound.
    cert.lower_bound = std::max(cert.lower_bound, std::min(mu, unresolved));
    if (std::isfinite(mu)) cert.upper_bound = mu;
    return finish(cert);
  }
  cert.exact = mu;
  cert.upper_bound = mu;
  return finish(cert);
}

// Generic semi-metric certification from a caller-supplied distance.
template <class DistanceFn>
Certificate certify_semimetric(DistanceFn&& dist, const std::vector<std::vector<double>>& prototypes,
                               const std::vector<std::uint32_t>& labels, std::size_t num_classes,
                               std::span<const double> z, std::uint32_t y) {
  if (labels.size() != prototypes.size())
    throw DimensionMismatch("one label per prototype required");
  if (y >= num_classes) throw InvariantViolation("label out of range");
#ifndef NDEBUG
  if (!prototypes.empty()) {
    const auto& w = prototypes.front();
    const double ab = dist(z, std::span<const double>(w));
    const double ba = dist(std::span<const double>(w), z);
    if (std::abs(ab - ba) > 1e-6 * (1.0 + std::abs(ab)))
      throw InvariantViolation("semi-metric callback is not symmetric");
  }
#endif
  std::vector<double> per_class(num_classes, kInfinity);
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    const double d = dist(z, std::span<const double>(prototypes[i]));
    per_class[labels[i]] = std::min(per_class[labels[i]], d);
  }
  std::uint32_t arg = 0;
  for (std::uint32_t c = 1; c < num_classes; ++c)
    if (per_class[c] < per_class[arg]) arg = c;

  double d_other = kInfinity;
  for (std::uint32_t c = 0; c < num_classes; ++c)
    if (c != y) d_other = std::min(d_other, per_class[c]);

  Certificate cert;
  cert.label_predicted = arg;
  cert.correct = arg == y;
  cert.lower_bound = semimetric_bound(per_class[y], d_other);
  return cert;
}

}  // namespace npcert
