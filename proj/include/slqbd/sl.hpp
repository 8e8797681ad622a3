#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slqbd/chain.hpp"
#include "slqbd/structured.hpp"

namespace slqbd::sl {

// Specialization ladder for the level-wise elimination solver. Each step
// up requires more structure: Plus needs tridiagonal within-level blocks,
// PlusPlus additionally constant interior coefficients with the entrance
// at stage 0 and level-homogeneous blocks.
enum class Variant { Qdesa, QdesaPlus, QdesaPlusPlus };

std::string to_string(Variant v);
std::optional<Variant> variant_from_string(const std::string& name);

// Most specialized variant the chain supports. Throws the applicability
// error when some D block lacks the single-entrance structure (no variant
// applies at all).
Variant classify_variant(const LevelBlockChain& chain);

// W(m) plus the level's up-flow redirected into its own entrance column;
// the top level has no up-flow and lumps to W alone. This is the block
// whose inverse drives the level-wise elimination.
Matrix lumped_block(const LevelBlockChain& chain, int m);

struct RateMatrices {
  // R[m-1] maps level m-1 mass to level m: pi_m = pi_{m-1} * at(m).
  std::vector<std::shared_ptr<const Matrix>> R;
  Variant variant = Variant::Qdesa;
  bool shared_interior = false; // interior levels reuse one matrix
  // Spectral radius of the repeating interior matrix (NaN when the chain
  // has no repeating interior).
  double spectral_radius = std::numeric_limits<double>::quiet_NaN();

  const Matrix& at(int m) const { return *R[m - 1]; }
  int count() const { return static_cast<int>(R.size()); }
};

// Computes all rate matrices. `request` forces a specialization level:
// requesting more structure than classify_variant grants is an
// applicability error; requesting less runs the more general path.
RateMatrices compute_rate_matrices(const LevelBlockChain& chain,
                                   std::optional<Variant> request = {});

// Expected accumulated visits to levels m..top per entrance visit to
// level m, aggregated down to level 0 by the backward recursion
// S <- 1 + R_m S. Exact on the truncated chain.
Vector tail_weights(const LevelBlockChain& chain, const RateMatrices& rm);

// Geometric-tail variant for an unbounded homogeneous continuation:
// solves (I - R) S = 1; numerical error when the spectral radius reaches 1.
Vector tail_weights_geometric(const Matrix& R);

// Unnormalized boundary distribution: solves pi0 * (entrance-weighted
// lumped level-0 block) = entrance unit vector.
RowVector boundary_vector(const LevelBlockChain& chain, const Vector& S);

// Rolls pi0 forward through the rate matrices, normalizes, and fills the
// residual and truncation mass against the assembled generator.
SteadyState propagate(const LevelBlockChain& chain, const RateMatrices& rm,
                      const RowVector& pi0);

// Max-norm defect of the local balance relation
// U(m-1) + R_m W(m) + R_m R_{m+1} D(m+1) over all applicable m.
double quadratic_residual(const LevelBlockChain& chain,
                          const RateMatrices& rm);

struct SolveOptions {
  std::optional<Variant> variant; // empty: auto-classify
  bool check_stability = true;    // reject truncated-unstable chains
  double stability_tol = 1e-9;
};

struct SolveResult {
  SteadyState pi;
  Variant variant = Variant::Qdesa;
  double spectral_radius = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0;
};

// Full pipeline: classify, rate matrices, tail weights, boundary solve,
// propagation. Stability is only checked for chains truncated from an
// unbounded level direction with a repeating interior.
SolveResult solve(const LevelBlockChain& chain, const SolveOptions& opts = {});

} // namespace slqbd::sl
