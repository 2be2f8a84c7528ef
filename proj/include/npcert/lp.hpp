#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "npcert/types.hpp"

namespace npcert {

// min c'y  subject to  rows[i]'y <= rhs[i],  y >= 0.
struct LpProblem {
  std::size_t num_vars = 0;
  std::vector<double> c;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
};

enum class LpStatus : std::uint8_t { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0;
  std::vector<double> y;
  std::vector<double> duals;       // one multiplier per constraint row
  double dual_objective = 0;       // equals `objective` at an optimum
  std::size_t iterations = 0;
};

// Dense two-phase tableau simplex. Bland's rule on both the entering and the
// leaving choice, which rules out cycling on degenerate vertices.
class SimplexSolver {
 public:
  explicit SimplexSolver(const LpProblem& p, std::size_t max_iters = 200000)
      : n_(p.num_vars), m_(p.rows.size()), max_iters_(max_iters) {
    // Columns: structural in [0,n), slack/surplus in [n, n+m), artificial after.
    negated_.assign(m_, false);
    std::size_t n_art = 0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (p.rhs[i] < 0) {
        negated_[i] = true;
        ++n_art;
      }
    }
    cols_ = n_ + m_ + n_art;
    tab_.assign(m_, std::vector<double>(cols_ + 1, 0.0));
    basis_.assign(m_, 0);
    art_begin_ = n_ + m_;

    std::size_t art = art_begin_;
    for (std::size_t i = 0; i < m_; ++i) {
      const double sgn = negated_[i] ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n_; ++j) tab_[i][j] = sgn * p.rows[i][j];
      tab_[i][n_ + i] = sgn;  // slack (surplus when the row was negated)
      tab_[i][cols_] = sgn * p.rhs[i];
      if (negated_[i]) {
        tab_[i][art] = 1.0;
        basis_[i] = art++;
      } else {
        basis_[i] = n_ + i;
      }
    }
  }

  LpSolution solve(const std::vector<double>& c) {
    LpSolution out;

    if (art_begin_ < cols_) {
      // Phase 1: minimize the sum of artificials.
      std::vector<double> c1(cols_, 0.0);
      for (std::size_t j = art_begin_; j < cols_; ++j) c1[j] = 1.0;
      compute_reduced_costs(c1);
      if (!iterate(out, /*allow_artificials=*/true)) return out;
      double art_sum = 0;
      for (std::size_t i = 0; i < m_; ++i)
        if (basis_[i] >= art_begin_) art_sum += tab_[i][cols_];
      if (art_sum > 1e-7) {
        out.status = LpStatus::Infeasible;
        return out;
      }
      // Degenerate artificials left in the basis stay at value zero; they are
      // never eligible to re-enter in phase 2.
    }

    std::vector<double> c2(cols_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) c2[j] = c[j];
    compute_reduced_costs(c2);
    if (!iterate(out, /*allow_artificials=*/false)) return out;

    out.status = LpStatus::Optimal;
    out.y.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < n_) out.y[basis_[i]] = tab_[i][cols_];
    }
    out.objective = 0;
    for (std::size_t j = 0; j < n_; ++j) out.objective += c[j] * out.y[j];

    // Simplex multipliers from the slack columns' reduced costs.
    out.duals.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double pi = -rc_[n_ + i];
      if (negated_[i]) pi = -pi;
      out.duals[i] = pi;
    }
    return out;
  }

 private:
  void compute_reduced_costs(const std::vector<double>& c) {
    rc_ = c;
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = c[basis_[i]];
      if (cb == 0) continue;
      for (std::size_t j = 0; j < cols_; ++j) rc_[j] -= cb * tab_[i][j];
    }
  }

  // Returns false and fills `out.status` on unbounded / iteration limit.
  bool iterate(LpSolution& out, bool allow_artificials) {
    const double tol = 1e-9;
    for (;;) {
      // Bland: smallest-index column with negative reduced cost.
      std::size_t enter = cols_;
      const std::size_t limit = allow_artificials ? cols_ : art_begin_;
      for (std::size_t j = 0; j < limit; ++j) {
        if (rc_[j] < -tol) {
          enter = j;
          break;
        }
      }
      if (enter == cols_) return true;

      // Ratio test; ties resolved toward the smallest basis index (Bland).
      std::size_t leave = m_;
      double best_ratio = kInfinity;
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = tab_[i][enter];
        if (a > 1e-11) {
          const double ratio = tab_[i][cols_] / a;
          if (ratio < best_ratio - 1e-12 ||
              (ratio < best_ratio + 1e-12 && (leave == m_ || basis_[i] < basis_[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave == m_) {
        out.status = LpStatus::Unbounded;
        return false;
      }
      if (++out.iterations > max_iters_) {
        out.status = LpStatus::IterationLimit;
        return false;
      }
      pivot(leave, enter);
    }
  }

  void pivot(std::size_t r, std::size_t c) {
    const double piv = tab_[r][c];
    auto& row = tab_[r];
    const double inv = 1.0 / piv;
    for (auto& v : row) v *= inv;
    row[c] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = tab_[i][c];
      if (f == 0) continue;
      auto& ti = tab_[i];
      for (std::size_t j = 0; j <= cols_; ++j) ti[j] -= f * row[j];
      ti[c] = 0.0;
    }
    const double frc = rc_[c];
    if (frc != 0) {
      for (std::size_t j = 0; j < cols_; ++j) rc_[j] -= frc * row[j];
      rc_[c] = 0.0;
    }
    basis_[r] = c;
  }

  std::size_t n_, m_, cols_ = 0, art_begin_ = 0, max_iters_;
  std::vector<std::vector<double>> tab_;
  std::vector<std::size_t> basis_;
  std::vector<bool> negated_;
  std::vector<double> rc_;
};

inline LpSolution solve_lp(const LpProblem& p, std::size_t max_iters = 200000) {
  SimplexSolver solver(p, max_iters);
  LpSolution s = solver.solve(p.c);
  if (s.status == LpStatus::Optimal) {
    s.dual_objective = 0;
    for (std::size_t i = 0; i < p.rows.size(); ++i) s.dual_objective += p.rhs[i] * s.duals[i];
  }
  return s;
}

}  // namespace npcert
