#include "slqbd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace slqbd::bench {

namespace {

double now_run(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

} // namespace

Timing measure(const std::function<void()>& fn, int repeats) {
  if (repeats < 1) throw InputError("need at least one repeat");
  std::vector<double> runs(static_cast<std::size_t>(repeats));
  for (auto& r : runs) r = now_run(fn);
  std::sort(runs.begin(), runs.end());
  Timing t;
  t.median_seconds = runs[runs.size() / 2];
  if (runs.size() % 2 == 0)
    t.median_seconds = 0.5 * (t.median_seconds + runs[runs.size() / 2 - 1]);
  if (t.median_seconds > 0)
    t.rel_spread = (runs.back() - runs.front()) / t.median_seconds;
  return t;
}

double loglog_slope(const std::vector<double>& sizes,
                    const std::vector<double>& seconds) {
  if (sizes.size() != seconds.size() || sizes.size() < 2)
    throw InputError("slope needs two or more (size, time) points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!(sizes[i] > 0) || !(seconds[i] > 0))
      throw InputError("slope needs positive sizes and times");
    const double x = std::log(sizes[i]);
    const double y = std::log(seconds[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0) throw InputError("slope is undefined for equal sizes");
  return (n * sxy - sx * sy) / denom;
}

double structured_residual(const StructuredB& B, const Matrix& C) {
  const int n = B.dim();
  double worst = 0;
  for (int i = 0; i < n; ++i) {
    // Row i of B: band entries plus the surplus in its column.
    RowVector row = B.diag(i) * C.row(i);
    if (i >= 1) row += B.sub(i) * C.row(i - 1);
    if (i + 1 < n) row += B.super(i) * C.row(i + 1);
    if (B.surplus(i) != 0) row += B.surplus(i) * C.row(B.surplus_col);
    row(i) -= 1.0;
    worst = std::max(worst, row.cwiseAbs().maxCoeff());
  }
  return worst;
}

CellResult time_structured_inverse(int n, double up, double down,
                                   double surplus, double exit_rate) {
  const StructuredB B = structured_from_rates(n, up, down, surplus, exit_rate);
  CellResult out;
  Matrix C;
  out.seconds = now_run([&] { C = invert_structured(B); });
  out.residual_inf = structured_residual(B, C);
  return out;
}

CellResult time_dense_inverse(int n, double up, double down, double surplus,
                              double exit_rate) {
  const StructuredB B = structured_from_rates(n, up, down, surplus, exit_rate);
  const Matrix Bd = B.dense();
  CellResult out;
  Matrix C;
  out.seconds = now_run([&] { C = invert_dense(Bd); });
  out.residual_inf = structured_residual(B, C);
  return out;
}

namespace {

// Truncated convolution of first rows of upper-triangular Toeplitz
// matrices: (a * b)[k] = sum_{i+j=k} a_i b_j.
RowVector toeplitz_product_row(const RowVector& a, const RowVector& b) {
  const int n = static_cast<int>(a.size());
  RowVector c = RowVector::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (a(i) == 0) continue;
    for (int j = 0; i + j < n; ++j) c(i + j) += a(i) * b(j);
  }
  return c;
}

} // namespace

CellResult time_rate_row(const lpc::JumpProbabilities& jp, int dim) {
  CellResult out;
  lpc::ToeplitzRateMatrix R;
  out.seconds = now_run([&] { R = lpc::rate_matrix(jp, dim); });

  // Quadratic defect of the uniformized jump chain, R = F0 + R F1 + R^2 F2,
  // on the pure-Toeplitz interior rows.
  RowVector f0 = RowVector::Zero(dim), f1 = RowVector::Zero(dim),
            f2 = RowVector::Zero(dim);
  f0(0) = jp.stage_up;
  if (dim >= 2) f0(1) = jp.up_up;
  if (dim >= 2) f1(1) = jp.up_flat;
  f2(0) = jp.stage_down;
  if (dim >= 2) f2(1) = jp.up_down;

  RowVector defect = f0 - R.row;
  defect += toeplitz_product_row(R.row, f1);
  defect += toeplitz_product_row(toeplitz_product_row(R.row, R.row), f2);
  out.residual_inf = defect.cwiseAbs().maxCoeff();
  return out;
}

} // namespace slqbd::bench
