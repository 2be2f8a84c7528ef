#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "npcert/lp.hpp"
#include "npcert/projection.hpp"
#include "npcert/support.hpp"
#include "npcert/types.hpp"
#include "npcert/vec.hpp"

namespace npcert {

// Distance (in the threat norm q) from z to the set where prototype w_j is at
// least as close as w_i under the classifier metric p, intersected with the
// domain. +infinity when the domain makes that set unreachable.
struct PairwiseProblem {
  std::span<const double> z, wi, wj;
  Norm p = Norm::L2;
  Norm q = Norm::L2;
  DomainSpec domain;
};

struct PairwiseResult {
  double value = 0;
  SolverClass method = SolverClass::ClosedForm;
  std::optional<std::vector<double>> minimizer;
};

// max{0, (d_other - d_own) / 2}; valid for any semi-metric.
inline double semimetric_bound(double d_own, double d_other) {
  return std::max(0.0, (d_other - d_own) / 2.0);
}

namespace detail {

inline void check_pair(std::span<const double> z, std::span<const double> wi,
                       std::span<const double> wj) {
  if (wi.size() != z.size() || wj.size() != z.size())
    throw DimensionMismatch("pairwise problem: vector sizes differ");
  bool equal = true;
  for (std::size_t l = 0; l < z.size(); ++l) {
    if (wi[l] != wj[l]) {
      equal = false;
      break;
    }
  }
  if (equal) throw DegenerateBoundary("prototypes coincide, no decision boundary");
}

// z already on the boundary or past it: value 0, minimizer is z itself.
inline std::optional<PairwiseResult> trivial_zero(std::span<const double> z,
                                                  std::span<const double> wi,
                                                  std::span<const double> wj, Norm p,
                                                  SolverClass method) {
  if (distance(z, wi, p) - distance(z, wj, p) >= 0) {
    PairwiseResult r;
    r.value = 0;
    r.method = method;
    r.minimizer = std::vector<double>(z.begin(), z.end());
    return r;
  }
  return std::nullopt;
}

inline double hyperplane_offset(std::span<const double> wi, std::span<const double> wj) {
  return (norm2_sq(wi) - norm2_sq(wj)) / 2.0;  // b of <x, wj - wi> + b >= 0
}

}  // namespace detail

// --------------------------------------------------------------------------
// p = 2: distance from z to the bisecting hyperplane in the q-norm.
// --------------------------------------------------------------------------

inline PairwiseResult pairwise_l2(std::span<const double> z, std::span<const double> wi,
                                  std::span<const double> wj, Norm q) {
  detail::check_pair(z, wi, wj);
  if (auto t = detail::trivial_zero(z, wi, wj, Norm::L2, SolverClass::ClosedForm)) return *t;

  const double gap = distance_sq(z, wj) - distance_sq(z, wi);  // > 0 here
  const std::vector<double> v = sub(wj, wi);
  const double denom = norm(v, dual_norm(q));
  PairwiseResult r;
  r.value = gap / (2.0 * denom);
  r.method = SolverClass::ClosedForm;

  std::vector<double> x(z.begin(), z.end());
  switch (q) {
    case Norm::L2:
    case Norm::EmbeddedL2: {
      const double scale = r.value / norm2(v);
      for (std::size_t l = 0; l < x.size(); ++l) x[l] += scale * v[l];
      break;
    }
    case Norm::Linf:
      for (std::size_t l = 0; l < x.size(); ++l) x[l] += r.value * sign(v[l]);
      break;
    case Norm::L1: {
      std::size_t k = 0;
      for (std::size_t l = 1; l < v.size(); ++l)
        if (std::abs(v[l]) > std::abs(v[k])) k = l;
      x[k] += r.value * sign(v[k]);
      break;
    }
  }
  r.minimizer = std::move(x);
  return r;
}

// Same problem restricted to x in [0,1]^d. Exact; value can only grow.
inline PairwiseResult pairwise_l2_box(std::span<const double> z, std::span<const double> wi,
                                      std::span<const double> wj, Norm q) {
  detail::check_pair(z, wi, wj);
  if (!in_unit_box(z)) throw DomainViolation("pairwise box problem: z outside the unit box");
  if (auto t = detail::trivial_zero(z, wi, wj, Norm::L2,
                                    q == Norm::L2 ? SolverClass::SortScan
                                                  : SolverClass::ConvexProgram))
    return *t;

  const std::vector<double> v = sub(wj, wi);
  const double b = detail::hyperplane_offset(wi, wj);
  PairwiseResult r;

  if (q == Norm::L2 || q == Norm::EmbeddedL2) {
    r.method = SolverClass::SortScan;
    try {
      BoxProjection proj = project_hyperplane_box(z, v, b);
      r.value = proj.distance;
      r.minimizer = std::move(proj.x);
    } catch (const InfeasibleRegion&) {
      r.value = kInfinity;
    }
    return r;
  }

  // q in {1, inf}: a one-row LP in epigraph form, x = z + u - v.
  r.method = SolverClass::ConvexProgram;
  const std::size_t d = z.size();
  const bool linf = q == Norm::Linf;
  const std::size_t nt = linf ? 1 : d;
  LpProblem lp;
  lp.num_vars = 2 * d + nt;
  lp.c.assign(lp.num_vars, 0.0);
  for (std::size_t t = 0; t < nt; ++t) lp.c[2 * d + t] = 1.0;
  auto row = [&](std::initializer_list<std::pair<std::size_t, double>> terms, double rhs) {
    std::vector<double> a(lp.num_vars, 0.0);
    for (auto [idx, val] : terms) a[idx] = val;
    lp.rows.push_back(std::move(a));
    lp.rhs.push_back(rhs);
  };
  for (std::size_t s = 0; s < d; ++s) {
    const std::size_t t_idx = 2 * d + (linf ? 0 : s);
    row({{s, 1.0}, {d + s, -1.0}, {t_idx, -1.0}}, 0.0);   // (x-z)_s <= t
    row({{s, -1.0}, {d + s, 1.0}, {t_idx, -1.0}}, 0.0);   // -(x-z)_s <= t
    row({{s, 1.0}, {d + s, -1.0}}, 1.0 - z[s]);           // x_s <= 1
    row({{s, -1.0}, {d + s, 1.0}}, z[s]);                 // x_s >= 0
  }
  {  // <v, x> + b >= 0  ->  -<v, u> + <v, v_neg> <= <v, z> + b
    std::vector<double> a(lp.num_vars, 0.0);
    for (std::size_t s = 0; s < d; ++s) {
      a[s] = -v[s];
      a[d + s] = v[s];
    }
    lp.rows.push_back(std::move(a));
    lp.rhs.push_back(dot(v, z) + b);
  }

  LpSolution sol = solve_lp(lp);
  if (sol.status == LpStatus::Infeasible) {
    r.value = kInfinity;
    return r;
  }
  if (sol.status != LpStatus::Optimal)
    throw Error("pairwise box LP did not reach optimality");
  r.value = sol.objective;
  std::vector<double> x(d);
  for (std::size_t s = 0; s < d; ++s) x[s] = clamp01(z[s] + sol.y[s] - sol.y[d + s]);
  r.minimizer = std::move(x);
  return r;
}

// --------------------------------------------------------------------------
// q = inf decision: is radius eps still fully classified toward w_i?
// --------------------------------------------------------------------------

// Evaluates the constraint at the radius-eps worst case
// x = clamp(z + eps * sign(wj - wi)) and reports whether the pair still
// decides for w_i. O(d). For p = 1 the per-coordinate maximum additionally
// admits snapping x_l to w_j when it is within reach; same value, used to
// keep the evaluation exact at breakpoints.
inline bool linf_threat_certified(std::span<const double> z, std::span<const double> wi,
                                  std::span<const double> wj, Norm p, double eps,
                                  const DomainSpec& domain) {
  const bool box = domain.kind == DomainKind::UnitBox;
  const std::size_t d = z.size();
  if (p == Norm::L1) {
    double diff = 0;
    for (std::size_t l = 0; l < d; ++l) {
      double x = z[l] + eps * sign(wj[l] - wi[l]);
      if (box) x = clamp01(x);
      double best = std::abs(x - wi[l]) - std::abs(x - wj[l]);
      if (std::abs(z[l] - wj[l]) <= eps && (!box || (wj[l] >= 0 && wj[l] <= 1)))
        best = std::max(best, std::abs(wj[l] - wi[l]));
      diff += best;
    }
    return diff < 0;
  }
  std::vector<double> x(d);
  for (std::size_t l = 0; l < d; ++l) {
    x[l] = z[l] + eps * sign(wj[l] - wi[l]);
    if (box) x[l] = clamp01(x[l]);
  }
  return distance(x, wi, p) - distance(x, wj, p) < 0;
}

// --------------------------------------------------------------------------
// p = q = inf, unbounded: closed form.
// --------------------------------------------------------------------------

inline PairwiseResult pairwise_linf_linf(std::span<const double> z, std::span<const double> wi,
                                         std::span<const double> wj) {
  detail::check_pair(z, wi, wj);
  if (auto t = detail::trivial_zero(z, wi, wj, Norm::Linf, SolverClass::ClosedForm)) return *t;

  const std::size_t d = z.size();
  double term_j = -kInfinity, term_i = -kInfinity;
  for (std::size_t l = 0; l < d; ++l) {
    const double s = sign(wj[l] - wi[l]);
    term_j = std::max(term_j, -s * (z[l] - wj[l]));
    term_i = std::max(term_i, s * (z[l] - wi[l]));
  }
  PairwiseResult r;
  r.value = std::max(0.0, (term_j - term_i) / 2.0);
  r.method = SolverClass::ClosedForm;

  std::vector<double> x(d);
  for (std::size_t l = 0; l < d; ++l) x[l] = z[l] + r.value * sign(wj[l] - wi[l]);
  // Coordinates where the prototypes agree contribute equally to both norms;
  // when the i-side maximum falls short, raising the cheapest such coordinate
  // restores feasibility without extra inf-norm cost.
  double mi = distance(x, wi, Norm::Linf), mj = distance(x, wj, Norm::Linf);
  if (mi < mj) {
    std::size_t best = d;
    double best_base = -1;
    for (std::size_t l = 0; l < d; ++l) {
      if (wi[l] == wj[l] && std::abs(z[l] - wi[l]) > best_base) {
        best_base = std::abs(z[l] - wi[l]);
        best = l;
      }
    }
    if (best < d && mj - best_base <= r.value + 1e-12) {
      const double dir = z[best] == wi[best] ? 1.0 : sign(z[best] - wi[best]);
      x[best] = wi[best] + dir * mj;
      mi = distance(x, wi, Norm::Linf);
      mj = distance(x, wj, Norm::Linf);
    }
  }
  if (mi - mj >= -1e-9 && distance(x, z, Norm::Linf) <= r.value + 1e-9) r.minimizer = std::move(x);
  return r;
}

// Box variant for p = inf: bisection over the clamped worst-case point.
inline PairwiseResult pairwise_linf_linf_box(std::span<const double> z,
                                             std::span<const double> wi,
                                             std::span<const double> wj) {
  detail::check_pair(z, wi, wj);
  if (!in_unit_box(z)) throw DomainViolation("pairwise box problem: z outside the unit box");
  if (auto t = detail::trivial_zero(z, wi, wj, Norm::Linf, SolverClass::SortScan)) return *t;

  const DomainSpec box{DomainKind::UnitBox};
  PairwiseResult r;
  r.method = SolverClass::SortScan;
  // All clamps saturate by eps = 1, so the reachable set stops growing there.
  if (linf_threat_certified(z, wi, wj, Norm::Linf, 1.0, box)) {
    r.value = kInfinity;
    return r;
  }
  double lo = 0, hi = 1.0;
  while (hi - lo > 1e-9) {
    const double mid = (lo + hi) / 2;
    if (linf_threat_certified(z, wi, wj, Norm::Linf, mid, box))
      lo = mid;
    else
      hi = mid;
  }
  r.value = hi;
  std::vector<double> x(z.size());
  for (std::size_t l = 0; l < z.size(); ++l)
    x[l] = clamp01(z[l] + hi * sign(wj[l] - wi[l]));
  r.minimizer = std::move(x);
  return r;
}

// --------------------------------------------------------------------------
// p = 1, q = inf: the objective as a function of eps is piecewise linear and
// non-decreasing; locate the zero crossing over sorted breakpoints.
// --------------------------------------------------------------------------

inline PairwiseResult pairwise_l1_linf(std::span<const double> z, std::span<const double> wi,
                                       std::span<const double> wj, const DomainSpec& domain) {
  detail::check_pair(z, wi, wj);
  const bool box = domain.kind == DomainKind::UnitBox;
  if (box && !in_unit_box(z)) throw DomainViolation("pairwise box problem: z outside the unit box");
  if (auto t = detail::trivial_zero(z, wi, wj, Norm::L1, SolverClass::SortScan)) return *t;

  const std::size_t d = z.size();
  auto objective = [&](double eps) {
    double diff = 0;
    for (std::size_t l = 0; l < d; ++l) {
      const double s = sign(wj[l] - wi[l]);
      double x = z[l] + eps * s;
      if (box) x = clamp01(x);
      diff += std::abs(x - wi[l]) - std::abs(x - wj[l]);
    }
    return diff;
  };

  std::vector<double> bps;
  bps.reserve(3 * d);
  for (std::size_t l = 0; l < d; ++l) {
    const double s = sign(wj[l] - wi[l]);
    if (s == 0) continue;
    const double e1 = s * (wi[l] - z[l]);
    const double e2 = s * (wj[l] - z[l]);
    if (e1 > 0) bps.push_back(e1);
    if (e2 > 0) bps.push_back(e2);
    if (box) {
      const double sat = s > 0 ? 1.0 - z[l] : z[l];
      if (sat > 0) bps.push_back(sat);
    }
  }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

  PairwiseResult r;
  r.method = SolverClass::SortScan;
  if (bps.empty() || objective(bps.back()) < 0) {
    // Only possible under the box: the objective saturates below zero.
    r.value = kInfinity;
    return r;
  }
  // First breakpoint with a non-negative objective (monotone -> binary search).
  std::size_t lo_i = 0, hi_i = bps.size() - 1;
  if (objective(bps[0]) < 0) {
    while (hi_i - lo_i > 1) {
      const std::size_t mid = (lo_i + hi_i) / 2;
      if (objective(bps[mid]) < 0)
        lo_i = mid;
      else
        hi_i = mid;
    }
  } else {
    hi_i = 0;
  }
  double lo = hi_i == 0 ? 0.0 : bps[lo_i];
  double hi = bps[hi_i];
  const double f_lo = objective(lo), f_hi = objective(hi);
  // The objective is linear between adjacent breakpoints.
  r.value = f_hi <= f_lo ? hi : lo + (0 - f_lo) * (hi - lo) / (f_hi - f_lo);
  if (r.value < 0) r.value = 0;

  std::vector<double> x(d);
  for (std::size_t l = 0; l < d; ++l) {
    const double s = sign(wj[l] - wi[l]);
    x[l] = z[l] + r.value * s;
    if (box) x[l] = clamp01(x[l]);
  }
  r.minimizer = std::move(x);
  return r;
}

// --------------------------------------------------------------------------
// p = inf, q = 1, unbounded: some minimizer moves a single coordinate.
// --------------------------------------------------------------------------

inline PairwiseResult pairwise_linf_l1(std::span<const double> z, std::span<const double> wi,
                                       std::span<const double> wj) {
  detail::check_pair(z, wi, wj);
  if (auto t = detail::trivial_zero(z, wi, wj, Norm::Linf, SolverClass::ClosedForm)) return *t;

  const std::size_t d = z.size();
  // Top-two statistics so the "max over the other coordinates" is O(1).
  auto top2 = [&](std::span<const double> w) {
    double m1 = -1, m2 = -1;
    std::size_t arg = 0;
    for (std::size_t l = 0; l < d; ++l) {
      const double v = std::abs(z[l] - w[l]);
      if (v > m1) {
        m2 = m1;
        m1 = v;
        arg = l;
      } else if (v > m2) {
        m2 = v;
      }
    }
    return std::tuple<double, double, std::size_t>{m1, std::max(m2, 0.0), arg};
  };
  auto [i1, i2, iarg] = top2(wi);
  auto [j1, j2, jarg] = top2(wj);

  double best = kInfinity;
  std::size_t best_l = 0;
  double best_delta = 0;
  for (std::size_t l = 0; l < d; ++l) {
    const double rest_i = l == iarg ? i2 : i1;
    const double rest_j = l == jarg ? j2 : j1;
    const double a = z[l] - wi[l];
    const double b = z[l] - wj[l];
    auto g = [&](double delta) {
      return std::max(std::abs(a + delta), rest_i) - std::max(std::abs(b + delta), rest_j);
    };
    double kinks[4] = {-a - rest_i, -a + rest_i, -b - rest_j, -b + rest_j};
    std::sort(kinks, kinks + 4);

    // Walk one side: points of interest between 0 and past the last kink.
    auto side = [&](double dir) -> double {
      std::vector<double> pts{0.0};
      for (double k : kinks)
        if (k * dir > 0) pts.push_back(k);
      std::sort(pts.begin(), pts.end(), [&](double x, double y) { return x * dir < y * dir; });
      for (std::size_t t = 0; t < pts.size(); ++t) {
        const double g0 = g(pts[t]);
        if (g0 >= 0) return std::abs(pts[t]);
        if (t + 1 < pts.size()) {
          const double g1 = g(pts[t + 1]);
          if (g1 >= 0)
            return std::abs(pts[t] + (pts[t + 1] - pts[t]) * (0 - g0) / (g1 - g0));
        }
      }
      return kInfinity;  // constant negative tail on this side
    };
    const double right = side(+1.0), left = side(-1.0);
    const double cost = std::min(right, left);
    if (cost < best) {
      best = cost;
      best_l = l;
      best_delta = right <= left ? right : -left;
    }
  }

  PairwiseResult r;
  r.value = best;
  r.method = SolverClass::ClosedForm;
  if (std::isfinite(best)) {
    std::vector<double> x(z.begin(), z.end());
    x[best_l] += best_delta;
    r.minimizer = std::move(x);
  }
  return r;
}

// --------------------------------------------------------------------------
// p = inf, q = 2, unbounded.
//
// Any feasible point has a witness coordinate k with |x_k - wi_k| at least
// every |x_l - wj_l|. For a fixed k and witness deviation D, the cheapest
// configuration is explicit, and the cost is piecewise quadratic in D with
// breakpoints at the sorted values |z_l - wj_l|. Scanning every candidate k
// over the shared breakpoint grid is exact.
// --------------------------------------------------------------------------

inline PairwiseResult pairwise_linf_l2(std::span<const double> z, std::span<const double> wi,
                                       std::span<const double> wj) {
  detail::check_pair(z, wi, wj);
  if (auto t = detail::trivial_zero(z, wi, wj, Norm::Linf, SolverClass::SortScan)) return *t;

  const std::size_t d = z.size();
  std::vector<double> a(d);
  for (std::size_t l = 0; l < d; ++l) a[l] = std::abs(z[l] - wj[l]);
  std::vector<double> sorted_a(a);
  std::sort(sorted_a.begin(), sorted_a.end(), std::greater<double>());
  // Prefix sums over the descending order: the first m entries exceed D.
  std::vector<double> p1(d + 1, 0.0), p2(d + 1, 0.0);
  for (std::size_t m = 0; m < d; ++m) {
    p1[m + 1] = p1[m] + sorted_a[m];
    p2[m + 1] = p2[m] + sorted_a[m] * sorted_a[m];
  }

  double best_sq = kInfinity;
  std::size_t best_k = 0;
  double best_D = 0;

  for (std::size_t k = 0; k < d; ++k) {
    const double g = wj[k] - wi[k];
    const double u = g != 0 ? sign(g) * (z[k] - wi[k]) : std::abs(z[k] - wi[k]);
    const double d_min = std::abs(g) / 2.0;

    // Interval endpoints: descending a-values (plus the D >= d_min cutoff).
    for (std::size_t m = 0; m <= d; ++m) {
      double hi = m == 0 ? kInfinity : sorted_a[m - 1];
      double lo = m == d ? 0.0 : sorted_a[m];
      lo = std::max(lo, d_min);
      if (lo > hi) continue;
      // Sum over { l != k : a_l > D } of (a_l - D)^2 plus the witness term.
      const bool own_in = a[k] > lo;  // a_k counted among the first m on this interval
      const double m_eff = double(m) - (own_in ? 1.0 : 0.0);
      const double c2 = 1.0 + m_eff;
      const double c1 = -2.0 * u - 2.0 * (p1[m] - (own_in ? a[k] : 0.0));
      const double c0 = u * u + p2[m] - (own_in ? a[k] * a[k] : 0.0);
      double D = c2 > 0 ? -c1 / (2.0 * c2) : lo;
      D = std::clamp(D, lo, std::isfinite(hi) ? hi : std::max(lo, D));
      const double val = (c2 * D + c1) * D + c0;
      if (val < best_sq) {
        best_sq = val;
        best_k = k;
        best_D = D;
      }
    }
  }

  PairwiseResult r;
  r.method = SolverClass::SortScan;
  r.value = std::sqrt(std::max(0.0, best_sq));

  std::vector<double> x(d);
  const double g = wj[best_k] - wi[best_k];
  const double side =
      g != 0 ? sign(g) : (z[best_k] == wi[best_k] ? 1.0 : sign(z[best_k] - wi[best_k]));
  for (std::size_t l = 0; l < d; ++l) {
    if (l == best_k)
      x[l] = wi[l] + side * best_D;
    else if (a[l] > best_D)
      x[l] = wj[l] + sign(z[l] - wj[l]) * best_D;
    else
      x[l] = z[l];
  }
  if (distance(x, wi, Norm::Linf) - distance(x, wj, Norm::Linf) >= -1e-9)
    r.minimizer = std::move(x);
  return r;
}

// --------------------------------------------------------------------------
// Dispatcher over the supported cells.
// --------------------------------------------------------------------------

inline PairwiseResult pairwise_distance(const PairwiseProblem& pr) {
  const bool box = pr.domain.kind == DomainKind::UnitBox;
  switch (pr.p) {
    case Norm::L2:
    case Norm::EmbeddedL2:
      return box ? pairwise_l2_box(pr.z, pr.wi, pr.wj, pr.q)
                 : pairwise_l2(pr.z, pr.wi, pr.wj, pr.q);
    case Norm::Linf:
      switch (pr.q) {
        case Norm::Linf:
          return box ? pairwise_linf_linf_box(pr.z, pr.wi, pr.wj)
                     : pairwise_linf_linf(pr.z, pr.wi, pr.wj);
        case Norm::L1:
          if (box)
            throw UnsupportedCombination(
                "box-constrained pairwise values for p=linf, q=l1 are not offered; "
                "use the unbounded value as a lower bound");
          return pairwise_linf_l1(pr.z, pr.wi, pr.wj);
        case Norm::L2:
          if (box)
            throw UnsupportedCombination(
                "box-constrained pairwise values for p=linf, q=l2 are not offered; "
                "use the unbounded value as a lower bound");
          return pairwise_linf_l2(pr.z, pr.wi, pr.wj);
        default: break;
      }
      break;
    case Norm::L1:
      if (pr.q == Norm::Linf) return pairwise_l1_linf(pr.z, pr.wi, pr.wj, pr.domain);
      throw UnsupportedCombination("support matrix " +
                                   support_cell_name(pr.p, pr.q, Exactness::Pairwise) +
                                   ": NP-hard, no polynomial solver offered");
  }
  throw UnsupportedCombination("unsupported pairwise combination " +
                               support_cell_name(pr.p, pr.q, Exactness::Pairwise));
}

}  // namespace npcert
