#pragma once

#include <vector>

#include "slqbd/chain.hpp"

namespace slqbd::lpc {

// Uniformized jump probabilities of an interior state, indexed by the
// direction (level change, stage change). All level-down and multi-step
// directions are excluded by construction of the stage view.
struct JumpProbabilities {
  double up_down = 0;    // (+1, -1)
  double up_flat = 0;    // (+1,  0)
  double up_up = 0;      // (+1, +1)
  double stage_up = 0;   // ( 0, +1)
  double stage_down = 0; // ( 0, -1)
  double exit_rate = 1;  // uniformization rate

  double sum() const {
    return up_down + up_flat + up_up + stage_up + stage_down;
  }
};

// Unchecked assembly, mainly for driving the series code directly; the
// probabilities may be sub-stochastic (killed walk).
JumpProbabilities make_jumps(double up_down, double up_flat, double up_up,
                             double stage_up, double stage_down);

// Derives jump probabilities from a stage view. Applicability errors, in
// order of detection: non-constant interior exit rate (the walk cannot be
// uniformized with zero self-loops), forbidden transition directions
// (level-down moves out of interior stages), inhomogeneous interior rates.
JumpProbabilities jump_probabilities(const StageBlockChain& view);

struct SeriesOptions {
  double series_tol = 1e-14; // relative term cutoff
  long long max_terms = 4'000'000; // total inner-series budget
};

// Descent weight: probability that the first passage one stage down ends
// h levels above the start. Pure function of the jump probabilities;
// throws the numerical error when the level drift makes the underlying
// series diverge (4 * stage_up-weighted level factors >= 1) or the term
// budget runs out.
double descent_weight(const JumpProbabilities& jp, int h,
                      const SeriesOptions& opts = {});

// G_0 .. G_{count-1}.
std::vector<double> descent_weights(const JumpProbabilities& jp, int count,
                                    const SeriesOptions& opts = {});

// Level-shift convolution coefficients kappa_0 .. kappa_{count-1} built
// from the descent weights (needs G_0 .. G_{count-1}).
std::vector<double> shift_coefficients(const JumpProbabilities& jp,
                                       const std::vector<double>& G);

// Upper-triangular Toeplitz rate matrix, stored as its first row:
// entry(i, j) = row[j - i].
struct ToeplitzRateMatrix {
  RowVector row;
  int dim() const { return static_cast<int>(row.size()); }
  double entry(int i, int j) const {
    return j >= i ? row(j - i) : 0.0;
  }
  double spectral_radius() const { return row(0); }
  Matrix dense() const;
};

// Closed-form rate matrix row from the descent weights (dim entries).
ToeplitzRateMatrix rate_matrix(const JumpProbabilities& jp, int dim,
                               const SeriesOptions& opts = {});

// Completes the rate matrix with the exact boundary blocks of the stage
// view: solves the stage-0/stage-1 system with the geometric-tail
// normalization, then materializes stages up to the view's stage count.
// Stage-major layout. Numerical error when the spectral radius reaches 1.
SteadyState steady_state(const StageBlockChain& view,
                         const ToeplitzRateMatrix& rhat);

struct SolveResult {
  SteadyState pi; // stage-major
  double rhat0 = 0;
  double seconds = 0;
};

// Full pipeline from a level-block chain: stage view, jump probabilities,
// rate matrix, boundary completion.
SolveResult solve(const LevelBlockChain& chain, const SeriesOptions& opts = {});

} // namespace slqbd::lpc
