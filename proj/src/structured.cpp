#include "slqbd/structured.hpp"

#include <cmath>

namespace slqbd {

Matrix StructuredB::dense() const {
  const int n = dim();
  Matrix B = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    B(i, i) = diag(i);
    if (i + 1 < n) B(i, i + 1) = super(i);
    if (i >= 1) B(i, i - 1) = sub(i);
  }
  B.col(surplus_col) += surplus;
  return B;
}

namespace {

bool near(double a, double b, double scale) {
  return std::abs(a - b) <= 1e-9 * scale;
}

void detect_element_homogeneous(StructuredB& sb) {
  const int n = sb.dim();
  sb.element_homogeneous = false;
  if (n < 4 || sb.surplus_col != 0) return;
  const double scale =
      std::max({sb.diag.cwiseAbs().maxCoeff(), sb.super.cwiseAbs().maxCoeff(),
                sb.sub.cwiseAbs().maxCoeff(), 1.0});
  const double c = sb.super(0), a = sb.sub(1), z = sb.surplus(0),
               w = sb.diag(0);
  for (int i = 0; i + 1 < n; ++i)
    if (!near(sb.super(i), c, scale)) return;
  for (int i = 1; i < n; ++i)
    if (!near(sb.sub(i), a, scale)) return;
  for (int i = 0; i < n; ++i)
    if (!near(sb.surplus(i), z, scale)) return;
  for (int i = 0; i + 1 < n; ++i)
    if (!near(sb.diag(i), w, scale)) return;
  // Last row: interior diagonal with the clipped up-rate folded back.
  if (!near(sb.diag(n - 1), w + c, scale)) return;
  sb.element_homogeneous = true;
}

} // namespace

std::optional<StructuredB> extract_structured(const Matrix& W,
                                              const Vector& u_row_sums,
                                              int entrance_col) {
  const int n = static_cast<int>(W.rows());
  if (W.cols() != n || u_row_sums.size() != n || entrance_col < 0 ||
      entrance_col >= n)
    throw InputError("lumped-block extraction: inconsistent shapes");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (W(i, j) != 0.0 && std::abs(i - j) >= 2) return std::nullopt;
  StructuredB sb;
  sb.diag = W.diagonal();
  sb.super = Vector::Zero(n);
  sb.sub = Vector::Zero(n);
  for (int i = 0; i + 1 < n; ++i) sb.super(i) = W(i, i + 1);
  for (int i = 1; i < n; ++i) sb.sub(i) = W(i, i - 1);
  sb.surplus = u_row_sums;
  sb.surplus_col = entrance_col;
  detect_element_homogeneous(sb);
  return sb;
}

StructuredB structured_from_rates(int n, double up, double down,
                                  double surplus, double exit_rate) {
  if (n < 2) throw InputError("structured block needs dimension >= 2");
  StructuredB sb;
  sb.diag = Vector::Constant(n, -exit_rate);
  sb.diag(n - 1) = -exit_rate + up;
  sb.super = Vector::Constant(n, up);
  sb.super(n - 1) = 0;
  sb.sub = Vector::Constant(n, down);
  sb.sub(0) = 0;
  sb.surplus = Vector::Constant(n, surplus);
  sb.surplus_col = 0;
  detect_element_homogeneous(sb);
  return sb;
}

Matrix invert_dense(const Matrix& B) {
  Eigen::FullPivLU<Matrix> lu(B);
  if (!lu.isInvertible())
    throw NumericalError("lumped within-level block is singular");
  return lu.inverse();
}

Matrix invert_structured(const StructuredB& B) {
  const int n = B.dim();
  // Tridiagonal LU, no pivoting. Multipliers l, pivots u.
  Vector l = Vector::Zero(n), u = Vector::Zero(n);
  const double tiny = 1e-13 * std::max(B.diag.cwiseAbs().maxCoeff(), 1.0);
  u(0) = B.diag(0);
  bool degenerate = std::abs(u(0)) < tiny;
  for (int i = 1; i < n && !degenerate; ++i) {
    l(i) = B.sub(i) / u(i - 1);
    u(i) = B.diag(i) - l(i) * B.super(i - 1);
    degenerate = std::abs(u(i)) < tiny;
  }
  if (degenerate) return invert_dense(B.dense());

  auto solve_T = [&](Vector rhs) {
    for (int i = 1; i < n; ++i) rhs(i) -= l(i) * rhs(i - 1);
    rhs(n - 1) /= u(n - 1);
    for (int i = n - 2; i >= 0; --i)
      rhs(i) = (rhs(i) - B.super(i) * rhs(i + 1)) / u(i);
    return rhs;
  };

  Matrix C(n, n);
  for (int j = 0; j < n; ++j) {
    // Unit-vector substitution; the forward sweep is zero above row j.
    Vector x = Vector::Zero(n);
    x(j) = 1.0;
    for (int i = j + 1; i < n; ++i) x(i) = -l(i) * x(i - 1);
    x(n - 1) /= u(n - 1);
    for (int i = n - 2; i >= 0; --i)
      x(i) = (x(i) - B.super(i) * x(i + 1)) / u(i);
    C.col(j) = x;
  }

  // Rank-one correction for the surplus column.
  if ((B.surplus.array() != 0.0).any()) {
    Vector w = solve_T(B.surplus);
    const double denom = 1.0 + w(B.surplus_col);
    if (std::abs(denom) < 1e-12) return invert_dense(B.dense());
    const RowVector pivot_row = C.row(B.surplus_col);
    C.noalias() -= (w / denom) * pivot_row;
  }
  return C;
}

} // namespace slqbd
