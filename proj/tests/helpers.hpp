#pragma once

#include <vector>

#include "npcert/npcert.hpp"

namespace fixtures {

using namespace npcert;

// One prototype per class on a line: (1,0) class 0, (3,0) class 1.
inline PrototypeModel collinear_pair() {
  PrototypeModel m;
  m.dim = 2;
  m.num_classes = 2;
  m.labels = {0, 1};
  m.prototypes = {1, 0, 3, 0};
  m.validate();
  return m;
}

// Two own-class prototypes flanking the origin and one opposing prototype:
// the pairwise minimizer violates the second constraint, so the min-max bound
// is strictly below the exact value (0.6708... vs 0.75 at z = 0).
inline PrototypeModel two_blocker() {
  PrototypeModel m;
  m.dim = 2;
  m.num_classes = 2;
  m.labels = {0, 0, 1};
  m.prototypes = {0, 1, 0, -1, 2, 0};
  m.validate();
  return m;
}

inline std::vector<double> random_point(Rng& rng, std::size_t d, bool box) {
  std::vector<double> z(d);
  for (auto& v : z) v = box ? rng.uniform() : rng.uniform(-2.0, 2.0);
  return z;
}

inline PrototypeModel random_model(Rng& rng, std::size_t d, std::size_t num_classes,
                                   std::size_t num_prototypes, bool box_range) {
  PrototypeModel m;
  m.dim = d;
  m.num_classes = num_classes;
  for (std::size_t i = 0; i < num_prototypes; ++i) {
    // Round-robin labels guarantee every class is populated.
    m.labels.push_back(std::uint32_t(i % num_classes));
    for (std::size_t l = 0; l < d; ++l)
      m.prototypes.push_back(box_range ? rng.uniform(-0.2, 1.2) : rng.uniform(-2.0, 2.0));
  }
  m.validate();
  return m;
}

// Two well-separated Gaussian blobs, clipped so separability is certain.
inline Dataset blobs(std::size_t n, std::uint64_t seed, double sigma = 0.5) {
  Dataset data;
  data.dim = 2;
  data.num_classes = 2;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t c = std::uint32_t(i % 2);
    const double cx = c == 0 ? -2.0 : 2.0;
    double x, y;
    do {
      x = sigma * rng.normal();
      y = sigma * rng.normal();
    } while (std::abs(x) > 1.5 || std::abs(y) > 1.5);
    data.points.push_back(cx + x);
    data.points.push_back(y);
    data.labels.push_back(c);
  }
  return data;
}

inline Dataset two_moons(std::size_t n, std::uint64_t seed, double noise = 0.08) {
  Dataset data;
  data.dim = 2;
  data.num_classes = 2;
  Rng rng(seed);
  const double pi = std::acos(-1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t c = std::uint32_t(i % 2);
    const double t = pi * rng.uniform();
    double x, y;
    if (c == 0) {
      x = std::cos(t);
      y = std::sin(t);
    } else {
      x = 1.0 - std::cos(t);
      y = 0.4 - std::sin(t);
    }
    data.points.push_back(x + noise * rng.normal());
    data.points.push_back(y + noise * rng.normal());
    data.labels.push_back(c);
  }
  return data;
}

}  // namespace fixtures
