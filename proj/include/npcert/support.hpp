#pragma once

#include <string>

#include "npcert/types.hpp"

namespace npcert {

// Solver class behind a (metric, threat, exactness, domain) request.
enum class SolverClass : std::uint8_t { ClosedForm, SortScan, ConvexProgram, NPHard };

inline const char* to_string(SolverClass c) {
  switch (c) {
    case SolverClass::ClosedForm: return "closed_form";
    case SolverClass::SortScan: return "sort_scan";
    case SolverClass::ConvexProgram: return "convex_program";
    case SolverClass::NPHard: return "np_hard";
  }
  return "?";
}

enum class Exactness : std::uint8_t { Pairwise, Exact };

inline const char* to_string(Exactness e) {
  return e == Exactness::Pairwise ? "pairwise" : "exact";
}

// Complexity/support matrix of the toolkit. Pairwise entries describe the
// single-constraint relaxation solvers; Exact entries describe full
// minimal-perturbation computation. NPHard means no polynomial method is
// offered for that cell and requests fail with UnsupportedCombination.
inline SolverClass dispatch_support(Norm p, Norm q, Exactness exactness,
                                    const DomainSpec& domain) {
  const bool box = domain.kind == DomainKind::UnitBox;

  if (p == Norm::EmbeddedL2 || q == Norm::EmbeddedL2) {
    // Embedded metric: pairwise bounds come from a one-dimensional concave
    // dual maximization; exact values are not offered (the sphere-product
    // constraint set is non-convex).
    if (exactness == Exactness::Pairwise) return SolverClass::ConvexProgram;
    return SolverClass::NPHard;
  }

  if (exactness == Exactness::Pairwise) {
    switch (p) {
      case Norm::L1:
        if (q == Norm::Linf) return SolverClass::SortScan;  // breakpoint search
        return SolverClass::NPHard;                         // q in {1,2}
      case Norm::L2:
        if (!box) return SolverClass::ClosedForm;  // point-to-hyperplane distance
        // Box: O(d log d) projection for q=2, a one-row LP otherwise.
        return q == Norm::L2 ? SolverClass::SortScan : SolverClass::ConvexProgram;
      case Norm::Linf:
        if (q == Norm::Linf) return box ? SolverClass::SortScan : SolverClass::ClosedForm;
        if (q == Norm::L1) return SolverClass::ClosedForm;  // per-coordinate scan
        return SolverClass::SortScan;                       // q = 2, sorted intervals
      default: break;
    }
    return SolverClass::NPHard;
  }

  // Exact minimal perturbation.
  switch (p) {
    case Norm::L1:
      // Reduces to the maximum of pairwise values over the own class.
      return q == Norm::Linf ? SolverClass::SortScan : SolverClass::NPHard;
    case Norm::L2:
      return SolverClass::ConvexProgram;  // QP for q=2, LPs for q in {1,inf}
    case Norm::Linf:
      return SolverClass::NPHard;
    default: break;
  }
  return SolverClass::NPHard;
}

inline std::string support_cell_name(Norm p, Norm q, Exactness e) {
  return std::string("(") + to_string(e) + ", p=" + to_string(p) + ", q=" + to_string(q) + ")";
}

// Throws when the requested cell has no polynomial solver.
inline void require_supported(Norm p, Norm q, Exactness e, const DomainSpec& domain) {
  if (dispatch_support(p, q, e, domain) == SolverClass::NPHard) {
    throw UnsupportedCombination("support matrix " + support_cell_name(p, q, e) +
                                 ": NP-hard, no polynomial solver offered" +
                                 (e == Exactness::Exact && dispatch_support(p, q, Exactness::Pairwise,
                                                                            domain) != SolverClass::NPHard
                                      ? "; pairwise lower bounds are available (use lower-bound mode)"
                                      : ""));
  }
}

}  // namespace npcert
