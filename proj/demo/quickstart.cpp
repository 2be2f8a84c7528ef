// Minimal tour: build a tiny model, classify a point, and certify it under
// three threat norms.

#include <cstdio>

#include "npcert/npcert.hpp"

int main() {
  using namespace npcert;

  PrototypeModel model;
  model.dim = 2;
  model.num_classes = 2;
  model.labels = {0, 0, 1};
  model.prototypes = {0.0, 1.0,   // class 0
                      0.0, -1.0,  // class 0
                      2.0, 0.0};  // class 1
  model.validate();

  const std::vector<double> z{0.0, 0.0};
  const ClassifyResult pred = classify(model, z);
  std::printf("predicted class %u (own %.3f, other %.3f)\n", pred.label, pred.dist_own,
              pred.dist_other);

  for (Norm q : {Norm::L1, Norm::L2, Norm::Linf}) {
    const Certificate cert = certify(model, z, 0, ThreatSpec{q, {}}, CertifyMode::Exact);
    std::printf("threat %-4s lower %.6f exact %.6f (solved %zu subproblems)\n", to_string(q),
                cert.lower_bound, cert.exact.value_or(-1.0),
                cert.diagnostics.subproblems_solved);
  }
  return 0;
}
