#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "npcert/geometry.hpp"
#include "npcert/model.hpp"
#include "npcert/rng.hpp"
#include "npcert/support.hpp"
#include "npcert/types.hpp"

namespace npcert {

enum class Optimizer : std::uint8_t { Sgd, Adam };
enum class InitScheme : std::uint8_t { KMeans, RandomSamples };

struct TrainConfig {
  std::size_t prototypes_per_class = 1;
  double margin_cap = 1.0;  // R
  Norm metric = Norm::L2;
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  double lr_decay = 0.95;
  InitScheme init = InitScheme::KMeans;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t augment_shift = 0;  // max pixel shift; needs image_side
  std::size_t image_side = 0;
};

struct Dataset {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> points;  // row-major size() x dim
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * dim, dim};
  }
  void validate() const {
    if (dim == 0) throw InvariantViolation("dataset dimension must be positive");
    if (points.size() != labels.size() * dim)
      throw InvariantViolation("dataset matrix shape mismatch");
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::uint32_t c : labels) {
      if (c >= num_classes) throw InvariantViolation("dataset label out of range");
      ++counts[c];
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (counts[c] == 0)
        throw InvariantViolation("class " + std::to_string(c) + " has no samples");
    }
  }
};

// ---------------------------------------------------------------------------
// Signed capped margin and its (sub)gradient
// ---------------------------------------------------------------------------

struct MarginValue {
  double signed_margin = 0;
  std::size_t own_index = 0;    // own-class prototype of the realizing pair
  std::size_t other_index = 0;  // opposing prototype of the realizing pair
  bool correct = false;
};

namespace detail {

inline void require_margin_supported(Norm p, Norm q) {
  require_supported(p, q, Exactness::Pairwise, DomainSpec{DomainKind::Unbounded});
}

}  // namespace detail

// Certified margin of (z, y): for correctly classified points the capped
// nearest-pair boundary distance, for misclassified points the negated
// distance back to the decision boundary (constraint flipped). Margins are
// computed in the unbounded domain.
inline MarginValue margin(const PrototypeModel& model, std::span<const double> z,
                          std::uint32_t y, Norm q, double cap) {
  detail::require_margin_supported(model.metric, q);
  if (cap <= 0) throw InvariantViolation("margin cap must be positive");
  const ClassMargins m = class_margins(model, z, y);
  MarginValue out;
  out.correct = m.dist_own < m.dist_other;
  const DomainSpec unbounded{DomainKind::Unbounded};

  if (out.correct) {
    out.own_index = m.nearest_own;
    double best = kInfinity;
    std::size_t best_j = m.nearest_other;
    for (std::size_t j = 0; j < model.num_prototypes(); ++j) {
      if (model.labels[j] == y) continue;
      const double v = pairwise_distance({z, model.prototype(m.nearest_own),
                                          model.prototype(j), model.metric, q, unbounded})
                           .value;
      if (v < best) {
        best = v;
        best_j = j;
      }
    }
    out.other_index = best_j;
    out.signed_margin = std::min(best, cap);
  } else {
    out.own_index = m.nearest_own;
    out.other_index = m.nearest_other;
    const double v = pairwise_distance({z, model.prototype(m.nearest_other),
                                        model.prototype(m.nearest_own), model.metric, q,
                                        unbounded})
                         .value;
    out.signed_margin = -v;
  }
  return out;
}

struct MarginGradient {
  MarginValue value;
  // (prototype index, gradient row); empty when the cap is active.
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
};

namespace detail {

// Subgradient of the dual norm ||v||_{q*} used in the p=2 closed form.
inline std::vector<double> dual_norm_subgradient(std::span<const double> v, Norm q) {
  std::vector<double> g(v.size(), 0.0);
  switch (dual_norm(q)) {
    case Norm::L2:
    case Norm::EmbeddedL2: {
      const double n = norm2(v);
      for (std::size_t l = 0; l < v.size(); ++l) g[l] = v[l] / n;
      break;
    }
    case Norm::L1:
      for (std::size_t l = 0; l < v.size(); ++l) g[l] = sign(v[l]);
      break;
    case Norm::Linf: {
      std::size_t k = 0;
      for (std::size_t l = 1; l < v.size(); ++l)
        if (std::abs(v[l]) > std::abs(v[k])) k = l;
      g[k] = sign(v[k]);
      break;
    }
  }
  return g;
}

// d(rho)/d(w_own), d(rho)/d(w_other) for the pairwise boundary distance with
// own prototype `wi` and opposing prototype `wj`.
inline void pairwise_gradients(std::span<const double> z, std::span<const double> wi,
                               std::span<const double> wj, Norm p, Norm q,
                               std::vector<double>& grad_wi, std::vector<double>& grad_wj) {
  const std::size_t d = z.size();
  grad_wi.assign(d, 0.0);
  grad_wj.assign(d, 0.0);
  if (p == Norm::L2 || p == Norm::EmbeddedL2) {
    const std::vector<double> v = sub(wj, wi);
    const double n = norm(v, dual_norm(q));
    const double rho =
        (distance_sq(z, wj) - distance_sq(z, wi)) / (2.0 * n);
    const std::vector<double> nu = dual_norm_subgradient(v, q);
    for (std::size_t l = 0; l < d; ++l) {
      grad_wi[l] = (z[l] - wi[l]) / n + rho * nu[l] / n;
      grad_wj[l] = (wj[l] - z[l]) / n - rho * nu[l] / n;
    }
    return;
  }
  if (p == Norm::Linf && q == Norm::Linf) {
    // rho = (max_l -s_l (z_l - wj_l) - max_l s_l (z_l - wi_l)) / 2
    std::size_t l1 = 0, l2 = 0;
    double a1 = -kInfinity, a2 = -kInfinity;
    for (std::size_t l = 0; l < d; ++l) {
      const double s = sign(wj[l] - wi[l]);
      const double t1 = -s * (z[l] - wj[l]);
      const double t2 = s * (z[l] - wi[l]);
      if (t1 > a1) {
        a1 = t1;
        l1 = l;
      }
      if (t2 > a2) {
        a2 = t2;
        l2 = l;
      }
    }
    grad_wj[l1] = sign(wj[l1] - wi[l1]) / 2.0;
    grad_wi[l2] = sign(wj[l2] - wi[l2]) / 2.0;
    return;
  }
  throw UnsupportedCombination("margin gradients are available for p=l2 (any threat) and "
                               "p=linf with the linf threat");
}

}  // namespace detail

// Gradient of the signed capped margin with respect to the two prototypes of
// the realizing pair (all other rows are zero). The active cap yields a zero
// gradient; ties pick the smallest index, matching `margin`.
inline MarginGradient margin_gradient(const PrototypeModel& model, std::span<const double> z,
                                      std::uint32_t y, Norm q, double cap) {
  MarginGradient out;
  out.value = margin(model, z, y, q, cap);
  if (out.value.correct && out.value.signed_margin >= cap) return out;  // capped

  std::vector<double> g_own, g_other;
  if (out.value.correct) {
    detail::pairwise_gradients(z, model.prototype(out.value.own_index),
                               model.prototype(out.value.other_index), model.metric, q, g_own,
                               g_other);
  } else {
    // margin = -rho(z; own=w_j*, other=w_i'); negate and swap roles.
    detail::pairwise_gradients(z, model.prototype(out.value.other_index),
                               model.prototype(out.value.own_index), model.metric, q, g_other,
                               g_own);
    for (double& v : g_own) v = -v;
    for (double& v : g_other) v = -v;
  }
  out.rows.emplace_back(out.value.own_index, std::move(g_own));
  out.rows.emplace_back(out.value.other_index, std::move(g_other));
  return out;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::size_t> class_indices(const Dataset& data, std::uint32_t c) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels[i] == c) idx.push_back(i);
  return idx;
}

// Lloyd iterations with greedy D^2 seeding; deterministic under the rng.
inline std::vector<double> kmeans(const Dataset& data, const std::vector<std::size_t>& idx,
                                  std::size_t k, Rng& rng) {
  const std::size_t d = data.dim;
  std::vector<double> centers(k * d);
  std::vector<double> dist_sq(idx.size(), kInfinity);

  // k-means++ seeding.
  {
    const std::size_t first = idx[rng.index(idx.size())];
    std::copy_n(data.points.data() + first * d, d, centers.data());
  }
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (std::size_t t = 0; t < idx.size(); ++t) {
      const double ds = distance_sq(data.point(idx[t]),
                                    {centers.data() + (c - 1) * d, d});
      dist_sq[t] = std::min(dist_sq[t], ds);
      total += dist_sq[t];
    }
    std::size_t pick = 0;
    if (total > 0) {
      const double target = rng.uniform() * total;
      double acc = 0;
      for (std::size_t t = 0; t < idx.size(); ++t) {
        acc += dist_sq[t];
        if (acc >= target) {
          pick = t;
          break;
        }
      }
    } else {
      pick = rng.index(idx.size());
    }
    std::copy_n(data.points.data() + idx[pick] * d, d, centers.data() + c * d);
  }

  std::vector<std::size_t> assign(idx.size(), 0);
  std::vector<std::size_t> counts(k, 0);
  double prev_inertia = kInfinity;
  for (int iter = 0; iter < 50; ++iter) {
    double inertia = 0;
    for (std::size_t t = 0; t < idx.size(); ++t) {
      double best = kInfinity;
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double ds = distance_sq(data.point(idx[t]), {centers.data() + c * d, d});
        if (ds < best) {
          best = ds;
          arg = c;
        }
      }
      assign[t] = arg;
      inertia += best;
    }
    std::fill(centers.begin(), centers.end(), 0.0);
    std::fill(counts.begin(), counts.end(), std::size_t(0));
    for (std::size_t t = 0; t < idx.size(); ++t) {
      const auto pt = data.point(idx[t]);
      double* c = centers.data() + assign[t] * d;
      for (std::size_t l = 0; l < d; ++l) c[l] += pt[l];
      ++counts[assign[t]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster with the point farthest from its center.
        std::size_t far_t = 0;
        double far_d = -1;
        for (std::size_t t = 0; t < idx.size(); ++t) {
          const double ds = distance_sq(data.point(idx[t]),
                                        {centers.data() + assign[t] * d, d});
          if (ds > far_d) {
            far_d = ds;
            far_t = t;
          }
        }
        std::copy_n(data.points.data() + idx[far_t] * d, d, centers.data() + c * d);
        counts[c] = 1;
        continue;
      }
      double* cc = centers.data() + c * d;
      for (std::size_t l = 0; l < d; ++l) cc[l] /= double(counts[c]);
    }
    if (prev_inertia < kInfinity &&
        std::abs(prev_inertia - inertia) < 1e-4 * (1.0 + prev_inertia))
      break;
    prev_inertia = inertia;
  }
  return centers;
}

}  // namespace detail

inline PrototypeModel init_prototypes(const Dataset& data, const TrainConfig& config) {
  data.validate();
  const std::size_t k = config.prototypes_per_class;
  if (k == 0) throw InvariantViolation("prototypes_per_class must be positive");

  PrototypeModel model;
  model.dim = data.dim;
  model.num_classes = data.num_classes;
  model.metric = config.metric;
  Rng rng(config.seed);

  for (std::uint32_t c = 0; c < data.num_classes; ++c) {
    const auto idx = detail::class_indices(data, c);
    if (idx.size() < k)
      throw ClassTooSmall("class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                          " samples, needs at least " + std::to_string(k));
    if (config.init == InitScheme::RandomSamples) {
      std::vector<std::size_t> pool = idx;
      for (std::size_t t = 0; t < k; ++t) {
        const std::size_t pick = t + rng.index(pool.size() - t);
        std::swap(pool[t], pool[pick]);
        const auto pt = data.point(pool[t]);
        model.prototypes.insert(model.prototypes.end(), pt.begin(), pt.end());
        model.labels.push_back(c);
      }
    } else {
      const std::vector<double> centers = detail::kmeans(data, idx, k, rng);
      model.prototypes.insert(model.prototypes.end(), centers.begin(), centers.end());
      for (std::size_t t = 0; t < k; ++t) model.labels.push_back(c);
    }
  }
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Certified-margin training
// ---------------------------------------------------------------------------

struct TraceRow {
  std::size_t epoch = 0;      // 0 is the initialization baseline
  double objective = 0;       // mean signed capped margin over the full set
  double clean_accuracy = 0;
};

struct TrainResult {
  PrototypeModel model;
  std::vector<TraceRow> trace;
};

namespace detail {

inline TraceRow evaluate_epoch(const PrototypeModel& model, const Dataset& data, Norm q,
                               double cap, std::size_t epoch) {
  TraceRow row;
  row.epoch = epoch;
  std::size_t correct = 0;
  double sum = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const MarginValue m = margin(model, data.point(i), data.labels[i], q, cap);
    sum += m.signed_margin;
    if (classify(model, data.point(i)).label == data.labels[i]) ++correct;
  }
  row.objective = sum / double(data.size());
  row.clean_accuracy = double(correct) / double(data.size());
  return row;
}

inline void shift_image(std::span<const double> src, std::span<double> dst, std::size_t side,
                        int dx, int dy) {
  std::fill(dst.begin(), dst.end(), 0.0);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const int rr = int(r) + dy, cc = int(c) + dx;
      if (rr < 0 || cc < 0 || rr >= int(side) || cc >= int(side)) continue;
      dst[std::size_t(rr) * side + std::size_t(cc)] = src[r * side + c];
    }
  }
}

}  // namespace detail

inline TrainResult train(const Dataset& data, const TrainConfig& config, Norm q,
                         const PrototypeModel* initial = nullptr) {
  detail::require_margin_supported(config.metric, q);
  TrainResult result;
  result.model = initial ? *initial : init_prototypes(data, config);
  result.model.validate();
  if (config.batch_size == 0 || config.batch_size > data.size())
    throw InvariantViolation("batch size must be in [1, dataset size]");
  if (config.augment_shift > 0 && config.image_side * config.image_side != data.dim)
    throw InvariantViolation("shift augmentation needs image_side^2 == dim");

  PrototypeModel& model = result.model;
  const std::size_t d = model.dim;
  const std::size_t rows = model.num_prototypes();
  const double cap = config.margin_cap;

  result.trace.push_back(detail::evaluate_epoch(model, data, q, cap, 0));

  Rng rng(config.seed + 0x5851f42d4c957f2dull);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> accum(rows * d, 0.0);
  std::vector<double> adam_m, adam_v;
  if (config.optimizer == Optimizer::Adam) {
    adam_m.assign(rows * d, 0.0);
    adam_v.assign(rows * d, 0.0);
  }
  std::vector<double> shifted(d);
  std::size_t adam_step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.learning_rate * std::pow(config.lr_decay, double(epoch - 1));
    rng.shuffle(order);
    std::size_t pos = 0;
    while (pos < data.size()) {
      const std::size_t len = std::min(config.batch_size, data.size() - pos);
      std::vector<std::size_t> touched;
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t i = order[pos + t];
        std::span<const double> x = data.point(i);
        if (config.augment_shift > 0) {
          const int s = int(config.augment_shift);
          const int dx = int(rng.index(std::size_t(2 * s + 1))) - s;
          const int dy = int(rng.index(std::size_t(2 * s + 1))) - s;
          detail::shift_image(x, shifted, config.image_side, dx, dy);
          x = shifted;
        }
        MarginGradient g = margin_gradient(model, x, data.labels[i], q, cap);
        for (auto& [row, grad] : g.rows) {
          double* acc = accum.data() + row * d;
          bool fresh = true;
          for (std::size_t r : touched)
            if (r == row) fresh = false;
          if (fresh) touched.push_back(row);
          for (std::size_t l = 0; l < d; ++l) acc[l] += grad[l] / double(len);
        }
      }
      // Ascent step on the touched rows only.
      ++adam_step;
      for (std::size_t row : touched) {
        double* w = model.prototypes.data() + row * d;
        double* acc = accum.data() + row * d;
        if (config.optimizer == Optimizer::Sgd) {
          for (std::size_t l = 0; l < d; ++l) w[l] += lr * acc[l];
        } else {
          double* m = adam_m.data() + row * d;
          double* v = adam_v.data() + row * d;
          const double bc1 = 1.0 - std::pow(config.adam_beta1, double(adam_step));
          const double bc2 = 1.0 - std::pow(config.adam_beta2, double(adam_step));
          for (std::size_t l = 0; l < d; ++l) {
            m[l] = config.adam_beta1 * m[l] + (1.0 - config.adam_beta1) * acc[l];
            v[l] = config.adam_beta2 * v[l] + (1.0 - config.adam_beta2) * acc[l] * acc[l];
            const double mhat = m[l] / bc1;
            const double vhat = v[l] / bc2;
            w[l] += lr * mhat / (std::sqrt(vhat) + config.adam_eps);
          }
        }
        std::fill(acc, acc + d, 0.0);
      }
      pos += len;
    }
    result.trace.push_back(detail::evaluate_epoch(model, data, q, cap, epoch));
  }
  return result;
}

}  // namespace npcert
