#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "npcert/types.hpp"
#include "npcert/vec.hpp"

namespace npcert {

struct BoxProjection {
  std::vector<double> x;  // projection of z
  double distance = 0;    // ||x - z||_2
  double lambda = 0;      // x = clamp(z - lambda * w); <= 0 when the constraint is active
};

// Euclidean projection of z onto {x in [0,1]^d : <w,x> + b >= 0}.
//
// The optimum has the form x = clamp(z + mu * w) with mu >= 0 chosen so the
// halfspace constraint holds with equality. phi(mu) = <w, clamp(z + mu w)> + b
// is piecewise linear and non-decreasing, so the active pieces can be walked
// in sorted breakpoint order, O(d log d) total.
inline BoxProjection project_hyperplane_box(std::span<const double> z,
                                            std::span<const double> w, double b) {
  const std::size_t d = z.size();
  if (w.size() != d) throw DimensionMismatch("projection: w and z sizes differ");
  if (!in_unit_box(z)) throw DomainViolation("projection: z must lie in the unit box");

  BoxProjection out;
  if (dot(w, z) + b >= 0) {
    out.x.assign(z.begin(), z.end());
    return out;
  }

  // Maximum of <w,x> + b over the box; below zero means the halfspace misses it.
  double reachable = b;
  for (double ws : w) reachable += std::max(ws, 0.0);
  if (reachable < 0) throw InfeasibleRegion("halfspace does not intersect the unit box");

  // Breakpoint where coordinate s saturates (at 1 if w_s > 0, at 0 if w_s < 0).
  std::vector<std::pair<double, std::size_t>> events;
  events.reserve(d);
  double s1 = 0, s2 = 0, clamped_sum = 0;  // over currently free coordinates
  for (std::size_t s = 0; s < d; ++s) {
    if (w[s] == 0) continue;
    const double mu_s = w[s] > 0 ? (1.0 - z[s]) / w[s] : -z[s] / w[s];
    if (mu_s <= 0) {
      if (w[s] > 0) clamped_sum += w[s];
    } else {
      events.emplace_back(mu_s, s);
      s1 += w[s] * z[s];
      s2 += w[s] * w[s];
    }
  }
  std::sort(events.begin(), events.end());

  double mu = -1;
  double lo = 0;
  for (std::size_t t = 0; t <= events.size(); ++t) {
    const double hi = t < events.size() ? events[t].first : kInfinity;
    // phi(m) = s1 + clamped_sum + b + m * s2 on [lo, hi].
    const double base = s1 + clamped_sum + b;
    if (s2 > 0) {
      const double cross = -base / s2;
      if (cross <= hi) {
        mu = std::max(cross, lo);
        break;
      }
    }
    if (t == events.size()) break;
    const std::size_t s = events[t].second;
    s1 -= w[s] * z[s];
    s2 -= w[s] * w[s];
    if (w[s] > 0) clamped_sum += w[s];
    lo = hi;
  }
  if (mu < 0) {
    // phi saturates at `reachable` >= 0, so a crossing exists; landing here
    // means it sits exactly at the last breakpoint.
    mu = events.empty() ? 0.0 : events.back().first;
  }

  out.x.resize(d);
  for (std::size_t s = 0; s < d; ++s) out.x[s] = clamp01(z[s] + mu * w[s]);
  out.distance = std::sqrt(distance_sq(out.x, z));
  out.lambda = -mu;
  return out;
}

}  // namespace npcert
