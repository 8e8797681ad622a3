#include "slqbd/oracle.hpp"

#include <cmath>

#include <Eigen/SparseLU>

namespace slqbd::oracle {

RowVector direct_steady_state(const SparseMatrix& Q) {
  const int n = static_cast<int>(Q.rows());
  if (n == 1) return RowVector::Ones(1);

  // A = Q^T with the last equation replaced by normalization.
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(Q.nonZeros()) + n);
  for (int k = 0; k < Q.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(Q, k); it; ++it)
      if (it.col() != n - 1)
        trip.emplace_back(static_cast<int>(it.col()),
                          static_cast<int>(it.row()), it.value());
  for (int i = 0; i < n; ++i) trip.emplace_back(n - 1, i, 1.0);
  SparseMatrix A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();

  Eigen::SparseLU<SparseMatrix> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success)
    throw NumericalError("direct solve failed: generator system is singular");
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Vector x = lu.solve(rhs);
  if (lu.info() != Eigen::Success)
    throw NumericalError("direct solve failed during back-substitution");

  double neg = x.minCoeff();
  if (neg < -1e-9)
    throw NumericalError("direct solve produced negative mass (" +
                         std::to_string(neg) + ")");
  x = x.cwiseMax(0.0);
  const double total = x.sum();
  if (!(total > 0)) throw NumericalError("direct solve lost all mass");
  return (x / total).transpose();
}

SteadyState direct_steady_state(const LevelBlockChain& chain) {
  const SparseMatrix Q = assemble_generator(chain);
  const RowVector pi = direct_steady_state(Q);
  SteadyState out;
  out.layout = Layout::LevelMajor;
  out.blocks.resize(chain.num_levels());
  for (int m = 0; m < chain.num_levels(); ++m)
    out.blocks[m] =
        pi.segment(chain.level_offset(m), chain.stages_at(m));
  out.residual_inf = residual_inf(pi, Q);
  out.truncation_mass = out.blocks.back().sum();
  return out;
}

Matrix fixed_point_step(const Matrix& R, const Matrix& A0, const Matrix& A1,
                        const Matrix& A2) {
  const Matrix rhs = A0 + R * R * A2;
  return -A1.transpose().partialPivLu().solve(rhs.transpose()).transpose();
}

Matrix fixed_point_rate_matrix(const Matrix& A0, const Matrix& A1,
                               const Matrix& A2, double tol, int max_iter,
                               int* iterations) {
  Matrix R = Matrix::Zero(A0.rows(), A0.cols());
  const Eigen::PartialPivLU<Matrix> lu(A1.transpose());
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix rhs = A0 + R * R * A2;
    Matrix next = -lu.solve(rhs.transpose()).transpose();
    const double delta = (next - R).cwiseAbs().maxCoeff();
    R.swap(next);
    if (delta <= tol) {
      if (iterations) *iterations = it;
      return R;
    }
  }
  throw NumericalError("rate matrix fixed point did not converge in " +
                       std::to_string(max_iter) + " iterations");
}

double descent_weight_bruteforce(const lpc::JumpProbabilities& jp, int h,
                                 int max_steps) {
  if (h < 0 || max_steps < 1)
    throw InputError("descent enumeration needs h >= 0 and steps >= 1");
  // mass[c][v]: walk is at stage offset c >= 0 with accumulated level
  // shift v; absorbed on the first step to offset -1.
  const int C = max_steps + 2;
  const int V = h + 2;
  std::vector<double> mass(static_cast<std::size_t>(C) * V, 0.0);
  auto at = [&](std::vector<double>& a, int c, int v) -> double& {
    return a[static_cast<std::size_t>(c) * V + v];
  };
  at(mass, 0, 0) = 1.0;
  double absorbed = 0;
  for (int step = 0; step < max_steps; ++step) {
    std::vector<double> next(mass.size(), 0.0);
    for (int c = 0; c <= step && c + 1 < C; ++c)
      for (int v = 0; v <= h; ++v) {
        const double w = at(mass, c, v);
        if (w == 0) continue;
        at(next, c + 1, v) += w * jp.stage_up;
        at(next, c, v + 1) += w * jp.up_flat;
        if (v + 1 <= h) at(next, c + 1, v + 1) += w * jp.up_up;
        if (c == 0) {
          if (v == h) absorbed += w * jp.stage_down;
          if (v + 1 == h) absorbed += w * jp.up_down;
        } else {
          at(next, c - 1, v) += w * jp.stage_down;
          at(next, c - 1, v + 1) += w * jp.up_down;
        }
      }
    mass.swap(next);
  }
  return absorbed;
}

Comparison compare_distributions(const RowVector& a, const RowVector& b,
                                 const std::vector<int>* perm) {
  if (a.size() != b.size())
    throw InputError("distributions have different sizes (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  if (perm && static_cast<int>(perm->size()) != a.size())
    throw InputError("permutation size does not match the distributions");
  Comparison c;
  for (int i = 0; i < a.size(); ++i) {
    const int j = perm ? (*perm)[i] : i;
    if (j < 0 || j >= b.size())
      throw InputError("permutation maps outside the distribution");
    const double d = std::abs(a(i) - b(j));
    c.linf = std::max(c.linf, d);
    c.l1 += d;
  }
  return c;
}

} // namespace slqbd::oracle
