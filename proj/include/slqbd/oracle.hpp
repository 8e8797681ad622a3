#pragma once

#include <vector>

#include "slqbd/chain.hpp"
#include "slqbd/lpc.hpp"

namespace slqbd::oracle {

// Global steady state by sparse LU on the full generator, with one balance
// equation replaced by the normalization row. Deterministic; O(states^3)
// worst case, fine at test scale.
SteadyState direct_steady_state(const LevelBlockChain& chain);
RowVector direct_steady_state(const SparseMatrix& Q);

// Minimal nonnegative solution of A0 + R A1 + R^2 A2 = 0 by the monotone
// iteration R <- -(A0 + R^2 A2) A1^{-1} from R = 0.
Matrix fixed_point_rate_matrix(const Matrix& A0, const Matrix& A1,
                               const Matrix& A2, double tol = 1e-13,
                               int max_iter = 200000, int* iterations = nullptr);

// One-step map of the same iteration, exposed for monotonicity checks.
Matrix fixed_point_step(const Matrix& R, const Matrix& A0, const Matrix& A1,
                        const Matrix& A2);

// Brute-force descent weight: dynamic program over walks of bounded length,
// absorbing mass on the first stage-down passage with exact level shift h.
double descent_weight_bruteforce(const lpc::JumpProbabilities& jp, int h,
                                 int max_steps);

struct Comparison {
  double linf = 0;
  double l1 = 0;
};

// Entrywise comparison of two distributions; perm (when given) maps index
// in `a` to index in `b`.
Comparison compare_distributions(const RowVector& a, const RowVector& b,
                                 const std::vector<int>* perm = nullptr);

} // namespace slqbd::oracle
