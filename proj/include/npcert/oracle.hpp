#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <optional>
#include <vector>

#include "npcert/geometry.hpp"
#include "npcert/model.hpp"
#include "npcert/sphere.hpp"
#include "npcert/types.hpp"
#include "npcert/vec.hpp"

// Verification oracles: slow, simple, and independent of the production
// solvers. Test and CLI verification surface only.
namespace npcert::oracle {

struct SearchBox {
  std::vector<double> lo, hi;
};

inline SearchBox default_search_box(std::span<const double> z, double radius, bool unit_box) {
  SearchBox b;
  b.lo.resize(z.size());
  b.hi.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    b.lo[i] = z[i] - radius;
    b.hi[i] = z[i] + radius;
    if (unit_box) {
      b.lo[i] = std::max(b.lo[i], 0.0);
      b.hi[i] = std::min(b.hi[i], 1.0);
    }
  }
  return b;
}

namespace detail {

// Dense scan of `box` at `resolution` cells per axis; keeps the feasible grid
// point closest to z in the q-norm.
inline bool grid_scan(const SearchBox& box, std::size_t resolution, Norm q,
                      std::span<const double> z,
                      const std::function<bool(std::span<const double>)>& feasible,
                      double& best, std::vector<double>& best_x) {
  const std::size_t d = box.lo.size();
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  bool found = false;
  for (;;) {
    for (std::size_t s = 0; s < d; ++s) {
      const double t = double(idx[s]) / double(resolution);
      x[s] = box.lo[s] + t * (box.hi[s] - box.lo[s]);
    }
    const double cost = distance(x, z, q);
    if (cost < best && feasible(x)) {
      best = cost;
      best_x = x;
      found = true;
    }
    std::size_t s = 0;
    while (s < d && ++idx[s] > resolution) idx[s++] = 0;
    if (s == d) break;
  }
  return found;
}

// Closest feasible point on the ray from z through `anchor`: coarse scan for
// the earliest feasible parameter, then bisection. The cost is proportional
// to the parameter along a ray, so this resolves the boundary position to
// full precision in the radial direction. The anchor itself (t = 1) is always
// probed exactly, which matters when the feasible set has zero thickness
// along the ray (optima on a box face).
inline bool ray_min(std::span<const double> z, std::span<const double> anchor, Norm q,
                    const std::function<bool(std::span<const double>)>& feasible,
                    double& best, std::vector<double>& best_x) {
  const std::size_t d = z.size();
  std::vector<double> x(d);
  auto at = [&](double t) {
    for (std::size_t s = 0; s < d; ++s) x[s] = z[s] + t * (anchor[s] - z[s]);
  };
  bool improved = false;
  if (feasible(anchor)) {
    const double cost = distance(anchor, z, q);
    if (cost < best) {
      best = cost;
      best_x.assign(anchor.begin(), anchor.end());
      improved = true;
    }
  }
  const std::size_t steps = 48;
  double lo = 0, hi = -1;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = 1.25 * double(k) / double(steps);
    at(t);
    if (feasible(x)) {
      hi = t;
      break;
    }
    lo = t;
  }
  if (hi < 0) return improved;
  for (int it = 0; it < 60; ++it) {
    const double mid = (lo + hi) / 2;
    at(mid);
    if (feasible(x))
      hi = mid;
    else
      lo = mid;
  }
  at(hi);
  const double cost = distance(x, z, q);
  if (cost < best) {
    best = cost;
    best_x = x;
    improved = true;
  }
  return improved;
}

// Dense base scan followed by local refinement from a handful of separated
// starting cells. Around each incumbent, anchors on an axis pattern plus a
// few random directions are polished by radial bisection toward z; improving
// rounds extrapolate along the movement direction so the search slides fast
// along constraint boundaries and box faces.
inline double refine(const SearchBox& start, std::size_t resolution, Norm q,
                     std::span<const double> z,
                     const std::function<bool(std::span<const double>)>& feasible,
                     bool unit_box, std::size_t rounds = 60,
                     const std::vector<std::vector<double>>& seed_anchors = {}) {
  const std::size_t d = start.lo.size();
  double cell = 0, scale = 0;
  for (std::size_t s = 0; s < d; ++s) {
    cell = std::max(cell, (start.hi[s] - start.lo[s]) / double(resolution));
    scale = std::max(scale, start.hi[s] - start.lo[s]);
  }

  // Base scan, keeping a few well-separated candidates as extra starts.
  struct Candidate {
    double cost;
    std::vector<double> x;
  };
  std::vector<Candidate> starts;
  {
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d);
    const double sep = 4.0 * cell;
    for (;;) {
      for (std::size_t s = 0; s < d; ++s) {
        const double t = double(idx[s]) / double(resolution);
        x[s] = start.lo[s] + t * (start.hi[s] - start.lo[s]);
      }
      const double cost = distance(x, z, q);
      const bool worth = starts.size() < 4 || cost < starts.back().cost;
      if (worth && feasible(x)) {
        bool merged = false;
        for (auto& c : starts) {
          double dist = 0;
          for (std::size_t s = 0; s < d; ++s) dist = std::max(dist, std::abs(c.x[s] - x[s]));
          if (dist < sep) {
            if (cost < c.cost) {
              c.cost = cost;
              c.x = x;
            }
            merged = true;
            break;
          }
        }
        if (!merged) starts.push_back({cost, x});
        std::sort(starts.begin(), starts.end(),
                  [](const Candidate& a, const Candidate& b) { return a.cost < b.cost; });
        if (starts.size() > 4) starts.pop_back();
      }
      std::size_t s = 0;
      while (s < d && ++idx[s] > resolution) idx[s++] = 0;
      if (s == d) break;
    }
  }

  double best = kInfinity;
  std::vector<double> best_x;

  // Axis rays catch feasible regions that are thin in every other coordinate
  // (single-coordinate optima of the inf-norm cells); seed anchors (e.g. the
  // opposing prototype) are always-feasible endpoints.
  {
    std::vector<double> anchor0(d);
    for (std::size_t s = 0; s < d; ++s) {
      for (double dir : {1.0, -1.0}) {
        anchor0.assign(z.begin(), z.end());
        anchor0[s] = z[s] + dir * (start.hi[s] - start.lo[s]);
        if (unit_box)
          for (double& v : anchor0) v = clamp01(v);
        ray_min(z, anchor0, q, feasible, best, best_x);
      }
    }
    for (const auto& a : seed_anchors) ray_min(z, a, q, feasible, best, best_x);
  }
  if (best_x.empty() && starts.empty()) return kInfinity;
  if (!best_x.empty()) starts.push_back({best, best_x});

  std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> gauss(0.0, 1.0);

  double overall = kInfinity;
  for (const auto& s0 : starts) {
    double cur = s0.cost;
    std::vector<double> cur_x = s0.x;
    ray_min(z, s0.x, q, feasible, cur, cur_x);
    double width = cell;
    std::vector<double> anchor(d), prev_x(d);

    for (std::size_t round = 0; round < rounds; ++round) {
      prev_x = cur_x;
      const double prev = cur;
      bool improved = false;
      auto try_anchor = [&]() {
        if (unit_box)
          for (double& v : anchor) v = clamp01(v);
        if (ray_min(z, anchor, q, feasible, cur, cur_x)) improved = true;
      };
      std::vector<int> offs(d, -1);
      for (;;) {
        bool all_zero = true;
        for (std::size_t s = 0; s < d; ++s) {
          anchor[s] = cur_x[s] + offs[s] * width;
          if (offs[s] != 0) all_zero = false;
        }
        if (!all_zero) try_anchor();
        std::size_t s = 0;
        while (s < d && ++offs[s] > 1) offs[s++] = -1;
        if (s == d) break;
      }
      for (int k = 0; k < 6; ++k) {
        double nrm = 0;
        for (std::size_t s = 0; s < d; ++s) {
          anchor[s] = gauss(rng);
          nrm += anchor[s] * anchor[s];
        }
        nrm = std::sqrt(std::max(nrm, 1e-300));
        for (std::size_t s = 0; s < d; ++s) anchor[s] = cur_x[s] + anchor[s] / nrm * width;
        try_anchor();
      }
      if (improved && prev - cur > 0) {
        // Extrapolate along the direction the incumbent just moved.
        for (double step : {2.0, 4.0, 8.0, 16.0}) {
          for (std::size_t s = 0; s < d; ++s)
            anchor[s] = prev_x[s] + step * (cur_x[s] - prev_x[s]);
          try_anchor();
        }
      } else {
        width *= 0.5;
      }
      if (width < 1e-9 * (1.0 + scale)) break;
    }
    overall = std::min(overall, cur);
  }
  return overall;
}

}  // namespace detail

// Upper estimate of the pairwise boundary distance, converging to the true
// value as the resolution grows. +infinity when no feasible point exists in
// the search box.
inline double grid_min_pairwise(const PairwiseProblem& pr, std::size_t resolution,
                                const SearchBox& search_box) {
  const std::size_t d = pr.z.size();
  if (d > 4) throw DimensionTooLarge("grid oracle limited to d <= 4");
  const bool box = pr.domain.kind == DomainKind::UnitBox;
  auto feasible = [&](std::span<const double> x) {
    if (box && !in_unit_box(x)) return false;
    return distance(x, pr.wi, pr.p) - distance(x, pr.wj, pr.p) >= 0;
  };
  std::vector<std::vector<double>> seeds{std::vector<double>(pr.wj.begin(), pr.wj.end())};
  // Diagonal worst-case direction of the inf-threat analysis; the l1-metric
  // bisector in particular has thin feasible slivers along it.
  for (double dir : {1.0, -1.0}) {
    std::vector<double> a(d);
    double extent = 0;
    for (std::size_t s = 0; s < d; ++s) extent = std::max(extent, search_box.hi[s] - search_box.lo[s]);
    for (std::size_t s = 0; s < d; ++s)
      a[s] = pr.z[s] + dir * extent * sign(pr.wj[s] - pr.wi[s]);
    if (box)
      for (double& v : a) v = clamp01(v);
    seeds.push_back(std::move(a));
  }
  return detail::refine(search_box, resolution, pr.q, pr.z, feasible, box, 60, seeds);
}

inline double grid_min_pairwise(const PairwiseProblem& pr, std::size_t resolution) {
  // w_j is always feasible, so its distance bounds the search region.
  const double radius = distance(pr.z, pr.wj, pr.q) * 1.05 + 1e-6;
  return grid_min_pairwise(pr, resolution,
                           default_search_box(pr.z, radius,
                                              pr.domain.kind == DomainKind::UnitBox));
}

// Grid oracle for the full minimal adversarial perturbation: feasibility is
// "some other class is at least as close as y".
inline double grid_min_adversarial(const PrototypeModel& model, std::span<const double> z,
                                   std::uint32_t y, Norm q, std::size_t resolution) {
  const std::size_t d = model.dim;
  if (d > 4) throw DimensionTooLarge("grid oracle limited to d <= 4");
  const bool box = model.domain.kind == DomainKind::UnitBox;
  auto feasible = [&](std::span<const double> x) {
    if (box && !in_unit_box(x)) return false;
    const ClassMargins m = class_margins(model, x, y);
    return m.dist_own - m.dist_other >= 0;
  };
  double radius = kInfinity;
  std::vector<std::vector<double>> seeds;
  for (std::size_t j = 0; j < model.num_prototypes(); ++j) {
    if (model.labels[j] == y) continue;
    radius = std::min(radius, distance(z, model.prototype(j), q));
    const auto wj = model.prototype(j);
    seeds.emplace_back(wj.begin(), wj.end());
  }
  if (!std::isfinite(radius)) return kInfinity;
  return detail::refine(default_search_box(z, radius * 1.05 + 1e-6, box), resolution, q, z,
                        feasible, box, 70, seeds);
}

// ---------------------------------------------------------------------------
// Attack: a sound upper bound on the minimal adversarial perturbation.
// Bisects along rays toward opposing prototypes (and pairwise minimizers when
// available); any misclassified point found bounds epsilon from above.
// ---------------------------------------------------------------------------

inline std::optional<double> attack_upper_bound(const PrototypeModel& model,
                                                std::span<const double> z, std::uint32_t y,
                                                const ThreatSpec& threat,
                                                std::size_t budget = 2000) {
  if (budget == 0) return std::nullopt;
  const Norm q = threat.q == Norm::EmbeddedL2 ? Norm::L2 : threat.q;
  const Norm p = model.metric == Norm::EmbeddedL2 ? Norm::L2 : model.metric;
  const bool box = model.domain.kind == DomainKind::UnitBox;

  std::size_t evals = 0;
  auto adversarial = [&](std::span<const double> x) {
    ++evals;
    const ClassMargins m = class_margins(model, x, y);
    return m.dist_own - m.dist_other >= 0;
  };

  {
    const ClassMargins m = class_margins(model, z, y);
    if (m.dist_own - m.dist_other >= 0) return 0.0;
  }

  double best = kInfinity;
  std::vector<double> x(model.dim);
  auto try_ray = [&](std::span<const double> target) {
    // Find an adversarial parameter on the segment z -> target, then bisect.
    double lo = 0.0, hi = 1.0;
    auto at = [&](double t) {
      for (std::size_t s = 0; s < model.dim; ++s) {
        x[s] = z[s] + t * (target[s] - z[s]);
        if (box) x[s] = clamp01(x[s]);
      }
    };
    at(hi);
    if (!adversarial(x)) return;
    for (int it = 0; it < 60 && evals < budget; ++it) {
      const double mid = (lo + hi) / 2;
      at(mid);
      if (adversarial(x))
        hi = mid;
      else
        lo = mid;
    }
    at(hi);
    if (adversarial(x)) best = std::min(best, distance(x, z, q));
  };

  // Opposing prototypes, nearest (in the threat norm) first.
  std::vector<std::pair<double, std::size_t>> targets;
  for (std::size_t j = 0; j < model.num_prototypes(); ++j) {
    if (model.labels[j] == y) continue;
    targets.emplace_back(distance(z, model.prototype(j), q), j);
  }
  std::sort(targets.begin(), targets.end());
  const ClassMargins margins = class_margins(model, z, y);
  const auto wi = model.prototype(margins.nearest_own);
  for (const auto& [dist_j, j] : targets) {
    if (evals >= budget) break;
    try_ray(model.prototype(j));
    // Pairwise minimizers sit on the local decision boundary; overshooting
    // them slightly often lands in the adversarial region much closer than
    // the prototype itself.
    try {
      PairwiseResult pr = pairwise_distance(
          {z, wi, model.prototype(j), p, q, DomainSpec{DomainKind::Unbounded}});
      if (pr.minimizer) {
        std::vector<double> beyond(model.dim);
        for (double push : {1.0 + 1e-9, 1.0 + 1e-4, 1.05}) {
          for (std::size_t s = 0; s < model.dim; ++s)
            beyond[s] = z[s] + push * ((*pr.minimizer)[s] - z[s]);
          if (evals >= budget) break;
          try_ray(beyond);
        }
      }
    } catch (const UnsupportedCombination&) {
    } catch (const DegenerateBoundary&) {
    }
  }

  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

// ---------------------------------------------------------------------------
// Sphere brute force: single block, two channels; scans the quarter circle.
// ---------------------------------------------------------------------------

inline double sphere_brute(const EmbeddedQuery& query, const SphereEmbedding& emb,
                           std::span<const double> wi, std::span<const double> wj,
                           std::size_t resolution) {
  if (emb.blocks.size() != 1 || emb.blocks[0].channels != 2 || emb.blocks[0].positions != 1)
    throw UnsupportedBlockShape("sphere brute force handles a single 2-channel block");
  const double r = emb.blocks[0].radius;
  const std::span<const double> z(query.z);
  const std::vector<double> v = sub(wj, wi);
  const double b = (norm2_sq(wi) - norm2_sq(wj)) / 2.0;

  const double half_pi = std::acos(0.0);
  auto point = [&](double theta, std::vector<double>& x) {
    x[0] = r * std::cos(theta);
    x[1] = r * std::sin(theta);
  };
  std::vector<double> x(2);
  double best = kInfinity, best_theta = 0;
  for (std::size_t k = 0; k <= resolution; ++k) {
    const double theta = half_pi * double(k) / double(resolution);
    point(theta, x);
    if (dot(v, x) + b >= 0) {
      const double cost = distance(x, z, Norm::L2);
      if (cost < best) {
        best = cost;
        best_theta = theta;
      }
    }
  }
  if (!std::isfinite(best)) return kInfinity;
  // Local refinement around the best angle.
  double lo = std::max(0.0, best_theta - half_pi / double(resolution));
  double hi = std::min(half_pi, best_theta + half_pi / double(resolution));
  for (int round = 0; round < 40; ++round) {
    const double step = (hi - lo) / 16.0;
    double local_best = best, local_theta = best_theta;
    for (int k = 0; k <= 16; ++k) {
      const double theta = lo + step * k;
      point(theta, x);
      if (dot(v, x) + b >= 0) {
        const double cost = distance(x, z, Norm::L2);
        if (cost < local_best) {
          local_best = cost;
          local_theta = theta;
        }
      }
    }
    best = local_best;
    best_theta = local_theta;
    lo = std::max(0.0, best_theta - step);
    hi = std::min(half_pi, best_theta + step);
  }
  return best;
}

}  // namespace npcert::oracle
