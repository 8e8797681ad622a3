#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slqbd/errors.hpp"
#include "slqbd/linalg.hpp"

namespace slqbd {

// Bookkeeping attached to a finite chain, mostly provenance of truncation.
struct ChainMeta {
  std::string source;            // model family tag, empty for raw input
  bool level_truncated = false;  // an unbounded level direction was capped
  bool stage_truncated = false;  // an unbounded stage direction was capped
  std::vector<std::string> warnings;
};

struct Violation {
  std::string what;
  int level = -1;
  int row = -1;
  int col = -1;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary(std::size_t max_items = 8) const;
};

// Down-transition structure: for a down-entrance chain every D block has
// exactly one nonzero column (the entrance stage of the level below).
struct DesReport {
  std::vector<int> entrance_columns; // entrance stage of level m, -1 if undefined
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Block-tridiagonal generator of a level-structured Markov chain.
//
// Level m carries stages 0..stages_at(m)-1. W(m) holds within-level
// transitions of level m (diagonal included), U(m) the up-transitions
// level m -> m+1, D(m) the down-transitions level m+1 -> m. Block shapes
// follow: U(m) is stages_at(m) x stages_at(m+1), D(m) is
// stages_at(m+1) x stages_at(m). Stage counts may differ per level.
class LevelBlockChain {
public:
  LevelBlockChain(std::vector<Matrix> W, std::vector<Matrix> U,
                  std::vector<Matrix> D, ChainMeta meta = {},
                  std::vector<std::vector<std::pair<int, int>>> coords = {});

  int num_levels() const { return static_cast<int>(W_.size()); }
  int stages_at(int m) const { return static_cast<int>(W_[m].rows()); }
  int total_states() const { return total_states_; }
  // Common stage count, or empty when levels differ in size.
  std::optional<int> uniform_stages() const;
  bool level_homogeneous() const { return level_homogeneous_; }

  const Matrix& W(int m) const { return W_[m]; }
  const Matrix& U(int m) const { return U_[m]; }       // m in [0, num_levels-2]
  const Matrix& D_from(int m) const { return D_[m - 1]; } // block m -> m-1, m >= 1
  // Entrance stage of level m as witnessed by D(m), -1 when the block has
  // no single nonzero column. The top level has no witness and returns -1.
  int entrance_column(int m) const;

  // Offset of level m's first state in the flattened (level-major) order.
  int level_offset(int m) const { return offsets_[m]; }

  // Optional per-state labels (used by model builders for grid coordinates).
  const std::vector<std::vector<std::pair<int, int>>>& coords() const {
    return coords_;
  }

  const ChainMeta& meta() const { return meta_; }
  ChainMeta& meta() { return meta_; }

private:
  std::vector<Matrix> W_, U_, D_;
  std::vector<int> entrance_;
  std::vector<int> offsets_;
  std::vector<std::vector<std::pair<int, int>>> coords_;
  ChainMeta meta_;
  int total_states_ = 0;
  bool level_homogeneous_ = false;
};

// Checks generator well-formedness: nonnegative off-diagonal entries,
// nonpositive diagonals, zero row sums (within tol), and block shape
// consistency. Reports all violations instead of stopping at the first.
ValidationReport validate_generator(const LevelBlockChain& chain,
                                    double tol = 1e-12);

// Scans every D block for the single-entrance property.
DesReport check_des_columns(const LevelBlockChain& chain);

// Relabels stages inside each level so the entrance sits at index 0:
// stages below the old entrance shift up by one, stages above keep their
// index. Levels without a defined entrance (the top level) are untouched.
LevelBlockChain relabel_entrance_first(const LevelBlockChain& chain);

// Assembles the full sparse generator in level-major state order.
SparseMatrix assemble_generator(const LevelBlockChain& chain);

// Steady-state distribution stored blockwise. Layout tells whether blocks
// are indexed by level (each block runs over stages) or by stage (each
// block runs over levels).
enum class Layout { LevelMajor, StageMajor };

struct SteadyState {
  std::vector<RowVector> blocks;
  Layout layout = Layout::LevelMajor;
  double residual_inf = 0.0;   // max_j |(pi Q)_j| on the assembled generator
  double truncation_mass = 0.0; // probability of the last block

  double total() const;
  RowVector flatten() const;
};

// Converts a stage-major solution (uniform block sizes) to level-major.
SteadyState to_level_major(const SteadyState& pi);

// Infinity-norm residual ||pi Q||_inf of a flattened distribution.
double residual_inf(const RowVector& pi, const SparseMatrix& Q);

// Pattern description of a level-homogeneous chain with an unbounded level
// direction and an unbounded (or fixed) stage direction. Bands give
// interior rates by stage offset; overrides pin individual (i, j) entries
// of every level's W block; d_entries are the D block entries, placed for
// every level >= 1. Diagonals are never specified: truncation derives each
// diagonal entry as minus the sum of the row's surviving outflows, so
// deleting an out-of-range transition re-balances the row automatically
// and the result is conservative by construction.
struct UnboundedQbd {
  std::map<int, double> w_band;                       // stage offset -> rate
  std::map<std::pair<int, int>, double> w_overrides;  // (i, j) -> rate
  std::map<int, double> u_band;
  std::map<std::pair<int, int>, double> d_entries;
  int fixed_stages = -1; // >= 1 pins the stage count; -1 means unbounded
  std::string source;
};

// Cuts the pattern to level indices 0..level_count-1 and stage indices
// 0..stage_count-1 (reflecting truncation, see UnboundedQbd). Counts must
// be >= 2 in each unbounded direction; a fixed stage count wins over
// stage_count.
LevelBlockChain truncate_chain(const UnboundedQbd& spec, int level_count,
                               int stage_count);

// Stage-major view of a level-homogeneous chain: levels become the block
// dimension, stages the block index. A0 (stage +1), A1 (stage 0), A2
// (stage -1) are the interior blocks with the interior pattern continued
// past the level cap, i.e. the top row keeps the interior diagonal and
// drops its up-level outflow instead of folding it back; their row sums
// are therefore sub-conservative in the last row only. B1 (stage 0 at
// stage 0), B0 (stage 0 -> 1) and A2_entry (stage 1 -> 0) are read exactly
// from the truncated chain, boundary effects included.
struct StageBlockChain {
  int num_levels = 0;
  int num_stages = 0;
  Matrix A0, A1, A2;
  Matrix B0, B1, A2_entry;
  double exit_rate = 0;       // interior total exit rate
  double rate_up_down = 0;    // level +1, stage -1
  double rate_up_flat = 0;    // level +1, stage  0
  double rate_up_up = 0;      // level +1, stage +1
  double rate_stage_up = 0;   // level  0, stage +1
  double rate_stage_down = 0; // level  0, stage -1
  bool exit_rate_constant = true;
  bool interior_homogeneous = true;
  std::vector<std::string> notes;     // rate deviations found during the scan
  std::vector<std::string> forbidden; // interior transitions outside the
                                      // allowed direction set
};

// Reindexes a uniform-stage chain into the stage-major view. Throws the
// applicability error on varying stage counts (no common stage view, a
// homogeneity failure) and on any transition spanning two or more stages
// (the chain is not quadrant-structured in the stage direction).
StageBlockChain transpose_to_stage_view(const LevelBlockChain& chain);

// Assembles the generator of the truncated chain from the stage view, in
// stage-major state order. Off-diagonal entries are the same rates as in
// the level-major assembly; diagonal entries are the same sums accumulated
// in a different order.
SparseMatrix assemble_generator(const StageBlockChain& view);

} // namespace slqbd
