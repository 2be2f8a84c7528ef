#pragma once

#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include "npcert/certify.hpp"
#include "npcert/sphere.hpp"
#include "npcert/train.hpp"
#include "npcert/types.hpp"

namespace npcert {

// Routes a query to the right certification path for the model's metric.
inline Certificate certify_point(const PrototypeModel& model, std::span<const double> z,
                                 std::uint32_t y, const ThreatSpec& threat,
                                 CertifyMode mode = CertifyMode::LowerBoundOnly) {
  if (model.metric == Norm::EmbeddedL2) {
    if (mode == CertifyMode::Exact)
      throw UnsupportedCombination(
          "support matrix (exact, p=embedded_l2, q=embedded_l2): no polynomial solver offered; "
          "lower bounds are available (use lower-bound mode)");
    const EmbeddedQuery query = validate_embedding(z, *model.embedding);
    return certify_embedded(model, query, y, threat);
  }
  return certify(model, z, y, threat, mode);
}

struct PointOutcome {
  std::size_t index = 0;
  bool ok = false;
  Certificate cert;
  double bound = 0;  // exact when available, else the certified lower bound
  std::string error;
};

struct BoundReport {
  std::vector<double> radii;
  std::vector<double> certified_robust_accuracy;  // one entry per radius
  double clean_accuracy = 0;
  std::size_t num_points = 0;
  std::size_t num_failures = 0;
  std::vector<PointOutcome> points;
};

// Certifies every point; per-point failures are recorded, never fatal.
// Aggregation counts a point as robust at radius r when it is correctly
// classified and its bound is at least r (closed threat ball).
inline BoundReport certify_dataset(const PrototypeModel& model, const Dataset& data,
                                   const ThreatSpec& threat, CertifyMode mode,
                                   const std::vector<double>& radii, std::size_t jobs = 1) {
  if (data.dim != model.dim)
    throw DimensionMismatch("dataset dimension does not match the model");
  BoundReport report;
  report.radii = radii;
  report.num_points = data.size();
  report.points.resize(data.size());

  auto work = [&](std::size_t i) {
    PointOutcome& out = report.points[i];
    out.index = i;
    try {
      out.cert = certify_point(model, data.point(i), data.labels[i], threat, mode);
      out.bound = out.cert.exact.value_or(out.cert.lower_bound);
      out.ok = true;
    } catch (const Error& e) {
      out.error = e.what();
    }
  };

  if (jobs <= 1 || data.size() < 2) {
    for (std::size_t i = 0; i < data.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t n_workers = std::min(jobs, data.size());
    workers.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= data.size()) return;
          work(i);
        }
      });
    }
    for (auto& t : workers) t.join();
  }

  std::size_t correct = 0;
  std::vector<std::size_t> robust(radii.size(), 0);
  for (const auto& out : report.points) {
    if (!out.ok) {
      ++report.num_failures;
      continue;
    }
    if (out.cert.correct) ++correct;
    for (std::size_t r = 0; r < radii.size(); ++r) {
      if (out.cert.correct && out.bound >= radii[r]) ++robust[r];
    }
  }
  report.clean_accuracy = data.size() ? double(correct) / double(data.size()) : 0.0;
  report.certified_robust_accuracy.resize(radii.size());
  for (std::size_t r = 0; r < radii.size(); ++r) {
    report.certified_robust_accuracy[r] =
        data.size() ? double(robust[r]) / double(data.size()) : 0.0;
  }
  return report;
}

}  // namespace npcert
