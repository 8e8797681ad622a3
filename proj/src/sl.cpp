#include "slqbd/sl.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace slqbd::sl {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Qdesa: return "qdesa";
    case Variant::QdesaPlus: return "qdesa+";
    case Variant::QdesaPlusPlus: return "qdesa++";
  }
  return "?";
}

std::optional<Variant> variant_from_string(const std::string& name) {
  if (name == "qdesa") return Variant::Qdesa;
  if (name == "qdesa+") return Variant::QdesaPlus;
  if (name == "qdesa++") return Variant::QdesaPlusPlus;
  return std::nullopt;
}

namespace {

Vector up_row_sums(const LevelBlockChain& chain, int m) {
  if (m + 1 < chain.num_levels()) return chain.U(m).rowwise().sum();
  return Vector::Zero(chain.stages_at(m));
}

void require_des(const LevelBlockChain& chain) {
  const auto des = check_des_columns(chain);
  if (!des.ok()) {
    std::ostringstream os;
    os << "down-transition blocks lack the single-entrance structure: "
       << des.violations.front().what;
    if (des.violations.size() > 1)
      os << " (and " << des.violations.size() - 1 << " more)";
    throw ApplicabilityError(os.str());
  }
}

std::optional<StructuredB> try_structured(const LevelBlockChain& chain,
                                          int m) {
  const int e = m + 1 < chain.num_levels() ? chain.entrance_column(m) : 0;
  return extract_structured(chain.W(m), up_row_sums(chain, m), std::max(e, 0));
}

Matrix invert_lumped(const LevelBlockChain& chain, int m, Variant effective) {
  if (effective != Variant::Qdesa) {
    if (auto sb = try_structured(chain, m)) return invert_structured(*sb);
  }
  return invert_dense(lumped_block(chain, m));
}

double spectral_radius_of(const Matrix& R) {
  Eigen::EigenSolver<Matrix> es(R, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace

Variant classify_variant(const LevelBlockChain& chain) {
  require_des(chain);
  const int L = chain.num_levels();
  bool tridiagonal = true;
  for (int m = 0; m < L && tridiagonal; ++m)
    tridiagonal = try_structured(chain, m).has_value();
  if (!tridiagonal) return Variant::Qdesa;
  if (!chain.level_homogeneous() || L < 4) return Variant::QdesaPlus;
  const auto sb = try_structured(chain, 1);
  return (sb && sb->element_homogeneous) ? Variant::QdesaPlusPlus
                                         : Variant::QdesaPlus;
}

Matrix lumped_block(const LevelBlockChain& chain, int m) {
  Matrix B = chain.W(m);
  if (m + 1 < chain.num_levels()) {
    const int e = chain.entrance_column(m);
    if (e < 0)
      throw ApplicabilityError(
          "level " + std::to_string(m) +
          " has no single entrance column; up-flow cannot be redirected");
    B.col(e) += chain.U(m).rowwise().sum();
  }
  return B;
}

RateMatrices compute_rate_matrices(const LevelBlockChain& chain,
                                   std::optional<Variant> request) {
  const Variant classified = classify_variant(chain);
  if (request && static_cast<int>(*request) > static_cast<int>(classified)) {
    std::ostringstream os;
    os << "requested variant " << to_string(*request)
       << " needs more structure than the chain has (it classifies as "
       << to_string(classified) << ")";
    throw ApplicabilityError(os.str());
  }
  const Variant effective = request.value_or(classified);

  RateMatrices rm;
  rm.variant = effective;
  const int L = chain.num_levels();
  const int M = L - 1;
  if (M == 0) return rm;
  rm.R.resize(M);

  const bool share = chain.level_homogeneous() && M >= 2;
  if (share) {
    // Interior levels 1..M-1 lump to the same block; levels 1..M-1 also
    // share the up-block, so one inverse serves all but the top step.
    const Matrix C_int = invert_lumped(chain, 1, effective);
    auto R_int = std::make_shared<Matrix>(-chain.U(0) * C_int);
    for (int m = 1; m < M; ++m) rm.R[m - 1] = R_int;
    const Matrix C_top = invert_lumped(chain, M, effective);
    rm.R[M - 1] = std::make_shared<Matrix>(-chain.U(M - 1) * C_top);
    rm.shared_interior = true;
    rm.spectral_radius = spectral_radius_of(*R_int);
  } else {
    for (int m = 1; m <= M; ++m) {
      const Matrix C = invert_lumped(chain, m, effective);
      rm.R[m - 1] = std::make_shared<Matrix>(-chain.U(m - 1) * C);
    }
  }
  return rm;
}

Vector tail_weights(const LevelBlockChain& chain, const RateMatrices& rm) {
  const int M = chain.num_levels() - 1;
  Vector S = Vector::Ones(chain.stages_at(M));
  for (int m = M; m >= 1; --m)
    S = Vector::Ones(chain.stages_at(m - 1)) + rm.at(m) * S;
  return S;
}

Vector tail_weights_geometric(const Matrix& R) {
  const int n = static_cast<int>(R.rows());
  const double rho = spectral_radius_of(R);
  if (rho >= 1.0 - 1e-12)
    throw NumericalError(
        "geometric tail does not converge: spectral radius " +
        std::to_string(rho) + " is not below 1");
  Matrix A = Matrix::Identity(n, n) - R;
  return A.partialPivLu().solve(Vector::Ones(n));
}

RowVector boundary_vector(const LevelBlockChain& chain, const Vector& S) {
  const int s0 = chain.stages_at(0);
  if (S.size() != s0)
    throw InputError("tail weight vector does not match level 0");
  const int e =
      chain.num_levels() >= 2 ? chain.entrance_column(0) : 0;
  if (e < 0)
    throw ApplicabilityError(
        "level 0 has no single entrance column; the boundary system is "
        "undefined");
  Matrix A = -lumped_block(chain, 0);
  A.col(e) += S;
  Eigen::FullPivLU<Matrix> lu(A.transpose());
  if (!lu.isInvertible())
    throw NumericalError("boundary system is singular");
  Vector rhs = Vector::Zero(s0);
  rhs(e) = 1.0;
  RowVector pi0 = lu.solve(rhs).transpose();
  return pi0;
}

SteadyState propagate(const LevelBlockChain& chain, const RateMatrices& rm,
                      const RowVector& pi0) {
  const int L = chain.num_levels();
  SteadyState out;
  out.layout = Layout::LevelMajor;
  out.blocks.resize(L);
  out.blocks[0] = pi0;
  for (int m = 1; m < L; ++m) out.blocks[m] = out.blocks[m - 1] * rm.at(m);

  double total = 0, most_negative = 0, peak = 0;
  for (auto& b : out.blocks) {
    most_negative = std::min(most_negative, b.minCoeff());
    peak = std::max(peak, b.maxCoeff());
    total += b.sum();
  }
  if (most_negative < -1e-9 * std::max(peak, 1e-300))
    throw NumericalError("propagated distribution has negative entries (" +
                         std::to_string(most_negative) + ")");
  if (!(total > 0) || !std::isfinite(total))
    throw NumericalError("propagated distribution does not normalize");
  for (auto& b : out.blocks) {
    b /= total;
    b = b.cwiseMax(0.0);
  }
  out.truncation_mass = out.blocks.back().sum();
  out.residual_inf = residual_inf(out.flatten(), assemble_generator(chain));
  return out;
}

double quadratic_residual(const LevelBlockChain& chain,
                          const RateMatrices& rm) {
  const int M = chain.num_levels() - 1;
  double worst = 0;
  for (int m = 1; m + 1 <= M; ++m) {
    Matrix defect = chain.U(m - 1) + rm.at(m) * chain.W(m) +
                    rm.at(m) * (rm.at(m + 1) * chain.D_from(m + 1));
    worst = std::max(worst, defect.cwiseAbs().maxCoeff());
  }
  return worst;
}

SolveResult solve(const LevelBlockChain& chain, const SolveOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult res;
  RateMatrices rm = compute_rate_matrices(chain, opts.variant);
  res.variant = rm.variant;
  res.spectral_radius = rm.spectral_radius;
  if (opts.check_stability && chain.meta().level_truncated &&
      rm.shared_interior && rm.spectral_radius >= 1.0 - opts.stability_tol) {
    std::ostringstream os;
    os << "chain is not stable: interior rate matrix has spectral radius "
       << rm.spectral_radius << " (needs < 1)";
    throw NumericalError(os.str());
  }
  const Vector S = tail_weights(chain, rm);
  const RowVector pi0 = boundary_vector(chain, S);
  res.pi = propagate(chain, rm, pi0);
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

} // namespace slqbd::sl
