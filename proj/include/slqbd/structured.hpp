#pragma once

#include <optional>

#include "slqbd/errors.hpp"
#include "slqbd/linalg.hpp"

namespace slqbd {

// Tridiagonal-plus-rank-one form of a lumped within-level block:
// B = T + surplus * e_c^T, with T tridiagonal (the within-level part) and
// the surplus column holding the redirected up-level flow. sub(0) and
// super(n-1) are unused and kept at zero.
struct StructuredB {
  Vector diag, super, sub;
  Vector surplus;
  int surplus_col = 0;
  // Constant interior coefficients with the surplus in column 0; enables
  // the scalar-recurrence classification of the single-parameter family.
  bool element_homogeneous = false;

  int dim() const { return static_cast<int>(diag.size()); }
  Matrix dense() const;
};

// Splits B = W + (row sums of U) placed in the entrance column. Fails
// (returns nothing) when W is not tridiagonal. Pass a zero vector for the
// top level, whose block has no up-flow to redirect.
std::optional<StructuredB> extract_structured(const Matrix& W,
                                              const Vector& u_row_sums,
                                              int entrance_col);

// Interior block of a constant-rate family: diagonal -exit_rate, super- and
// sub-diagonal up/down, constant surplus in column 0. The last row keeps
// the up-rate folded into its diagonal (stage-cap re-balance).
StructuredB structured_from_rates(int n, double up, double down,
                                  double surplus, double exit_rate);

// Inverse of a general dense block via full-pivot LU; throws the numerical
// error when the block is singular.
Matrix invert_dense(const Matrix& B);

// Inverse via tridiagonal LU without pivoting (safe for the diagonally
// dominant blocks produced by conservative chains), unit-vector column
// substitution, and a rank-one correction for the surplus column. Falls
// back to dense LU when a pivot or the rank-one denominator degenerates.
Matrix invert_structured(const StructuredB& B);

} // namespace slqbd
