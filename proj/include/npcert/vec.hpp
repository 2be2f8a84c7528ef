#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "npcert/types.hpp"

namespace npcert {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm1(std::span<const double> a) {
  double s = 0;
  for (double v : a) s += std::abs(v);
  return s;
}

inline double norm2_sq(std::span<const double> a) {
  double s = 0;
  for (double v : a) s += v * v;
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(norm2_sq(a)); }

inline double norm_inf(std::span<const double> a) {
  double s = 0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

inline double norm(std::span<const double> a, Norm n) {
  switch (n) {
    case Norm::L1: return norm1(a);
    case Norm::L2:
    case Norm::EmbeddedL2: return norm2(a);
    case Norm::Linf: return norm_inf(a);
  }
  return 0;
}

inline double distance(std::span<const double> a, std::span<const double> b, Norm n) {
  double s = 0;
  switch (n) {
    case Norm::L1:
      for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
      return s;
    case Norm::L2:
    case Norm::EmbeddedL2:
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
      }
      return std::sqrt(s);
    case Norm::Linf:
      for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
      return s;
  }
  return 0;
}

inline double distance_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Dual exponent: 1/q + 1/q* = 1.
inline Norm dual_norm(Norm q) {
  switch (q) {
    case Norm::L1: return Norm::Linf;
    case Norm::Linf: return Norm::L1;
    case Norm::L2:
    case Norm::EmbeddedL2: return Norm::L2;
  }
  return Norm::L2;
}

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline std::vector<double> sub(std::span<const double> a, std::span<const double> b) {
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline bool in_unit_box(std::span<const double> a, double tol = 0.0) {
  for (double v : a) {
    if (v < -tol || v > 1.0 + tol) return false;
  }
  return true;
}

}  // namespace npcert
