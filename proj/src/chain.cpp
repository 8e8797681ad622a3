#include "slqbd/chain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace slqbd {

namespace {

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.array() == b.array()).all();
}

std::string block_name(char kind, int level) {
  std::ostringstream os;
  if (kind == 'D')
    os << "D(" << level << "->" << level - 1 << ")";
  else
    os << kind << "(" << level << ")";
  return os.str();
}

} // namespace

LevelBlockChain::LevelBlockChain(
    std::vector<Matrix> W, std::vector<Matrix> U, std::vector<Matrix> D,
    ChainMeta meta, std::vector<std::vector<std::pair<int, int>>> coords)
    : W_(std::move(W)), U_(std::move(U)), D_(std::move(D)),
      coords_(std::move(coords)), meta_(std::move(meta)) {
  const int L = static_cast<int>(W_.size());
  if (L == 0) throw InputError("chain needs at least one level block");
  if (static_cast<int>(U_.size()) != L - 1 ||
      static_cast<int>(D_.size()) != L - 1) {
    std::ostringstream os;
    os << "block list sizes inconsistent: " << L << " W blocks need " << L - 1
       << " U and D blocks, got " << U_.size() << " and " << D_.size();
    throw InputError(os.str());
  }
  for (int m = 0; m < L; ++m) {
    if (W_[m].rows() != W_[m].cols()) {
      std::ostringstream os;
      os << block_name('W', m) << " is not square: " << W_[m].rows() << "x"
         << W_[m].cols();
      throw InputError(os.str());
    }
    if (W_[m].rows() == 0)
      throw InputError(block_name('W', m) + " is empty");
  }
  for (int m = 0; m + 1 < L; ++m) {
    const auto sm = W_[m].rows(), sn = W_[m + 1].rows();
    if (U_[m].rows() != sm || U_[m].cols() != sn) {
      std::ostringstream os;
      os << block_name('U', m) << " has shape " << U_[m].rows() << "x"
         << U_[m].cols() << ", expected " << sm << "x" << sn;
      throw InputError(os.str());
    }
    if (D_[m].rows() != sn || D_[m].cols() != sm) {
      std::ostringstream os;
      os << block_name('D', m + 1) << " has shape " << D_[m].rows() << "x"
         << D_[m].cols() << ", expected " << sn << "x" << sm;
      throw InputError(os.str());
    }
  }
  if (!coords_.empty()) {
    if (static_cast<int>(coords_.size()) != L)
      throw InputError("coordinate labels must cover every level");
    for (int m = 0; m < L; ++m)
      if (static_cast<int>(coords_[m].size()) != stages_at(m))
        throw InputError("coordinate labels of level " + std::to_string(m) +
                         " do not match its stage count");
  }

  offsets_.resize(L + 1, 0);
  for (int m = 0; m < L; ++m) offsets_[m + 1] = offsets_[m] + stages_at(m);
  total_states_ = offsets_[L];

  // Entrance of level m is the single nonzero column of D(m+1 -> m).
  entrance_.assign(L, -1);
  for (int m = 0; m + 1 < L; ++m) {
    int col = -1;
    bool single = true;
    for (int j = 0; j < D_[m].cols() && single; ++j) {
      if ((D_[m].col(j).array() != 0.0).any()) {
        if (col >= 0)
          single = false;
        else
          col = j;
      }
    }
    entrance_[m] = single ? col : -1;
  }

  level_homogeneous_ = false;
  if (L >= 2 && uniform_stages()) {
    bool homog = true;
    for (int m = 1; m + 1 < L && homog; ++m)
      homog = same_matrix(U_[m], U_[0]) && same_matrix(D_[m], D_[0]);
    for (int m = 2; m + 1 < L && homog; ++m) homog = same_matrix(W_[m], W_[1]);
    level_homogeneous_ = homog;
  }
}

std::optional<int> LevelBlockChain::uniform_stages() const {
  const int s0 = stages_at(0);
  for (int m = 1; m < num_levels(); ++m)
    if (stages_at(m) != s0) return std::nullopt;
  return s0;
}

int LevelBlockChain::entrance_column(int m) const { return entrance_[m]; }

std::string ValidationReport::summary(std::size_t max_items) const {
  if (violations.empty()) return "ok";
  std::ostringstream os;
  os << violations.size() << " violation(s):";
  for (std::size_t k = 0; k < violations.size() && k < max_items; ++k)
    os << "\n  - " << violations[k].what;
  if (violations.size() > max_items) os << "\n  - ...";
  return os.str();
}

ValidationReport validate_generator(const LevelBlockChain& chain, double tol) {
  ValidationReport rep;
  const int L = chain.num_levels();
  double scale = 0;
  for (int m = 0; m < L; ++m) {
    scale = std::max(scale, chain.W(m).cwiseAbs().maxCoeff());
    if (m + 1 < L) {
      scale = std::max(scale, chain.U(m).cwiseAbs().maxCoeff());
      scale = std::max(scale, chain.D_from(m + 1).cwiseAbs().maxCoeff());
    }
  }
  if (scale == 0) scale = 1;

  auto check_nonneg = [&](const Matrix& B, char kind, int level,
                          bool skip_diag) {
    for (int i = 0; i < B.rows(); ++i)
      for (int j = 0; j < B.cols(); ++j) {
        if (skip_diag && i == j) continue;
        if (B(i, j) < -tol * scale) {
          std::ostringstream os;
          os << block_name(kind, level) << " entry (" << i << "," << j
             << ") = " << B(i, j) << " is negative";
          rep.violations.push_back({os.str(), level, i, j});
        }
      }
  };

  for (int m = 0; m < L; ++m) {
    check_nonneg(chain.W(m), 'W', m, true);
    for (int i = 0; i < chain.stages_at(m); ++i)
      if (chain.W(m)(i, i) > tol * scale) {
        std::ostringstream os;
        os << block_name('W', m) << " diagonal entry " << i << " = "
           << chain.W(m)(i, i) << " is positive";
        rep.violations.push_back({os.str(), m, i, i});
      }
    if (m + 1 < L) {
      check_nonneg(chain.U(m), 'U', m, false);
      check_nonneg(chain.D_from(m + 1), 'D', m + 1, false);
    }
  }

  for (int m = 0; m < L; ++m) {
    const int s = chain.stages_at(m);
    for (int i = 0; i < s; ++i) {
      double sum = chain.W(m).row(i).sum();
      if (m + 1 < L) sum += chain.U(m).row(i).sum();
      if (m >= 1) sum += chain.D_from(m).row(i).sum();
      if (std::abs(sum) > tol * scale) {
        std::ostringstream os;
        os << "row sum of state (level " << m << ", stage " << i
           << ") is " << sum << ", not 0";
        rep.violations.push_back({os.str(), m, i, -1});
      }
    }
  }
  return rep;
}

DesReport check_des_columns(const LevelBlockChain& chain) {
  DesReport rep;
  const int L = chain.num_levels();
  rep.entrance_columns.assign(L, -1);
  for (int m = 0; m + 1 < L; ++m) {
    const Matrix& D = chain.D_from(m + 1);
    std::vector<int> nz;
    for (int j = 0; j < D.cols(); ++j)
      if ((D.col(j).array() != 0.0).any()) nz.push_back(j);
    if (nz.size() == 1) {
      rep.entrance_columns[m] = nz[0];
    } else {
      std::ostringstream os;
      os << block_name('D', m + 1) << " has " << nz.size()
         << " nonzero columns (single-entrance structure needs exactly 1)";
      rep.violations.push_back({os.str(), m + 1, -1, -1});
    }
  }
  return rep;
}

namespace {

// new index -> old index: entrance to the front, indices below it shift up.
std::vector<int> entrance_permutation(int n, int entrance) {
  std::vector<int> old_of(n);
  if (entrance <= 0) {
    for (int i = 0; i < n; ++i) old_of[i] = i;
    return old_of;
  }
  old_of[0] = entrance;
  for (int i = 0; i < entrance; ++i) old_of[i + 1] = i;
  for (int i = entrance + 1; i < n; ++i) old_of[i] = i;
  return old_of;
}

Matrix permute(const Matrix& B, const std::vector<int>& row_old,
               const std::vector<int>& col_old) {
  Matrix out(B.rows(), B.cols());
  for (int i = 0; i < B.rows(); ++i)
    for (int j = 0; j < B.cols(); ++j) out(i, j) = B(row_old[i], col_old[j]);
  return out;
}

} // namespace

LevelBlockChain relabel_entrance_first(const LevelBlockChain& chain) {
  const int L = chain.num_levels();
  std::vector<std::vector<int>> perms(L);
  for (int m = 0; m < L; ++m) {
    const int e = chain.entrance_column(m);
    if (m + 1 < L && e < 0)
      throw ApplicabilityError(
          "level " + std::to_string(m) +
          " has no single entrance column; relabeling is undefined");
    perms[m] = entrance_permutation(chain.stages_at(m), std::max(e, 0));
  }
  std::vector<Matrix> W, U, D;
  for (int m = 0; m < L; ++m) W.push_back(permute(chain.W(m), perms[m], perms[m]));
  for (int m = 0; m + 1 < L; ++m) {
    U.push_back(permute(chain.U(m), perms[m], perms[m + 1]));
    D.push_back(permute(chain.D_from(m + 1), perms[m + 1], perms[m]));
  }
  std::vector<std::vector<std::pair<int, int>>> coords;
  if (!chain.coords().empty()) {
    coords.resize(L);
    for (int m = 0; m < L; ++m) {
      coords[m].resize(chain.coords()[m].size());
      for (std::size_t i = 0; i < coords[m].size(); ++i)
        coords[m][i] = chain.coords()[m][perms[m][i]];
    }
  }
  return LevelBlockChain(std::move(W), std::move(U), std::move(D),
                         chain.meta(), std::move(coords));
}

SparseMatrix assemble_generator(const LevelBlockChain& chain) {
  const int L = chain.num_levels();
  const int n = chain.total_states();
  std::vector<Triplet> trip;
  auto add_block = [&](const Matrix& B, int row0, int col0) {
    for (int i = 0; i < B.rows(); ++i)
      for (int j = 0; j < B.cols(); ++j)
        if (B(i, j) != 0.0) trip.emplace_back(row0 + i, col0 + j, B(i, j));
  };
  for (int m = 0; m < L; ++m) {
    const int off = chain.level_offset(m);
    add_block(chain.W(m), off, off);
    if (m + 1 < L) {
      add_block(chain.U(m), off, chain.level_offset(m + 1));
      add_block(chain.D_from(m + 1), chain.level_offset(m + 1), off);
    }
  }
  SparseMatrix Q(n, n);
  Q.setFromTriplets(trip.begin(), trip.end());
  return Q;
}

double SteadyState::total() const {
  double s = 0;
  for (const auto& b : blocks) s += b.sum();
  return s;
}

RowVector SteadyState::flatten() const {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.size());
  RowVector out(n);
  int at = 0;
  for (const auto& b : blocks) {
    out.segment(at, b.size()) = b;
    at += static_cast<int>(b.size());
  }
  return out;
}

SteadyState to_level_major(const SteadyState& pi) {
  if (pi.layout == Layout::LevelMajor) return pi;
  const int NS = static_cast<int>(pi.blocks.size());
  if (NS == 0) return pi;
  const int NL = static_cast<int>(pi.blocks[0].size());
  for (const auto& b : pi.blocks)
    if (static_cast<int>(b.size()) != NL)
      throw InputError("stage-major blocks with unequal sizes cannot be "
                       "re-laid out by level");
  SteadyState out;
  out.layout = Layout::LevelMajor;
  out.blocks.assign(NL, RowVector::Zero(NS));
  for (int i = 0; i < NS; ++i)
    for (int m = 0; m < NL; ++m) out.blocks[m](i) = pi.blocks[i](m);
  out.residual_inf = pi.residual_inf;
  out.truncation_mass = out.blocks.back().sum();
  return out;
}

double residual_inf(const RowVector& pi, const SparseMatrix& Q) {
  RowVector r = pi * Q;
  return r.cwiseAbs().maxCoeff();
}

LevelBlockChain truncate_chain(const UnboundedQbd& spec, int level_count,
                               int stage_count) {
  if (level_count < 2)
    throw InputError("level cap must be at least 2, got " +
                     std::to_string(level_count));
  int NS = stage_count;
  bool stage_truncated = true;
  if (spec.fixed_stages >= 1) {
    NS = spec.fixed_stages;
    stage_truncated = false;
  } else if (stage_count < 2) {
    throw InputError("stage cap must be at least 2, got " +
                     std::to_string(stage_count));
  }
  if (spec.w_band.count(0))
    throw InputError("within-level band offset 0 is not allowed: diagonals "
                     "are derived from outflow sums");
  for (const auto& [ij, rate] : spec.w_overrides) {
    (void)rate;
    if (ij.first == ij.second)
      throw InputError("within-level override on the diagonal is not "
                       "allowed: diagonals are derived from outflow sums");
  }

  const int L = level_count;
  std::vector<Matrix> W(L, Matrix::Zero(NS, NS));
  std::vector<Matrix> U(L - 1, Matrix::Zero(NS, NS));
  std::vector<Matrix> D(L - 1, Matrix::Zero(NS, NS));

  Matrix Wpat = Matrix::Zero(NS, NS);
  for (int i = 0; i < NS; ++i)
    for (const auto& [off, rate] : spec.w_band) {
      const int j = i + off;
      if (j >= 0 && j < NS) Wpat(i, j) = rate;
    }
  for (const auto& [ij, rate] : spec.w_overrides) {
    const auto [i, j] = ij;
    if (i >= 0 && i < NS && j >= 0 && j < NS) Wpat(i, j) = rate;
  }
  Matrix Upat = Matrix::Zero(NS, NS);
  for (int i = 0; i < NS; ++i)
    for (const auto& [off, rate] : spec.u_band) {
      const int j = i + off;
      if (j >= 0 && j < NS) Upat(i, j) = rate;
    }
  Matrix Dpat = Matrix::Zero(NS, NS);
  for (const auto& [ij, rate] : spec.d_entries) {
    const auto [i, j] = ij;
    if (i >= 0 && i < NS && j >= 0 && j < NS) Dpat(i, j) = rate;
  }

  for (int m = 0; m < L; ++m) W[m] = Wpat;
  for (int m = 0; m + 1 < L; ++m) {
    U[m] = Upat;
    D[m] = Dpat;
  }

  // Reflecting truncation: the diagonal absorbs exactly the surviving
  // outflows, summed in W, U, D order within the row.
  for (int m = 0; m < L; ++m)
    for (int i = 0; i < NS; ++i) {
      double out = 0;
      for (int j = 0; j < NS; ++j)
        if (j != i) out += W[m](i, j);
      if (m + 1 < L) out += U[m].row(i).sum();
      if (m >= 1) out += D[m - 1].row(i).sum();
      W[m](i, i) = -out;
    }

  ChainMeta meta;
  meta.source = spec.source;
  meta.level_truncated = true;
  meta.stage_truncated = stage_truncated;
  return LevelBlockChain(std::move(W), std::move(U), std::move(D),
                         std::move(meta));
}

namespace {

void scan_stage_band(const Matrix& B, char kind, int level) {
  for (int i = 0; i < B.rows(); ++i)
    for (int j = 0; j < B.cols(); ++j)
      if (B(i, j) != 0.0 && std::abs(i - j) >= 2) {
        std::ostringstream os;
        os << "not stage-structured: " << block_name(kind, level)
           << " moves from stage " << i << " to stage " << j << " (span "
           << std::abs(i - j) << ")";
        throw ApplicabilityError(os.str());
      }
}

} // namespace

StageBlockChain transpose_to_stage_view(const LevelBlockChain& chain) {
  const auto us = chain.uniform_stages();
  if (!us) {
    std::ostringstream os;
    os << "stage counts vary across levels (level 0 has "
       << chain.stages_at(0) << ", level " << chain.num_levels() - 1 << " has "
       << chain.stages_at(chain.num_levels() - 1)
       << "): the level structure is not homogeneous, no common stage view "
          "exists";
    throw ApplicabilityError(os.str());
  }
  const int NS = *us;
  const int NL = chain.num_levels();
  if (NS < 3)
    throw InputError("stage view needs at least 3 stages per level, got " +
                     std::to_string(NS));

  for (int m = 0; m < NL; ++m) {
    scan_stage_band(chain.W(m), 'W', m);
    if (m + 1 < NL) {
      scan_stage_band(chain.U(m), 'U', m);
      scan_stage_band(chain.D_from(m + 1), 'D', m + 1);
    }
  }

  StageBlockChain v;
  v.num_levels = NL;
  v.num_stages = NS;

  // Sample level 1 when it is interior; level 0's interior stages carry the
  // same rates (only its stage-0 row may differ), the top level's diagonal
  // does not (level-cap re-balance).
  const Matrix& Wref = chain.W(NL >= 3 ? 1 : 0);
  v.rate_stage_up = Wref(1, 2);
  v.rate_stage_down = Wref(1, 0);
  v.exit_rate = -Wref(1, 1);
  if (NL >= 2) {
    const Matrix& Uref = chain.U(NL >= 3 ? 1 : 0);
    v.rate_up_down = Uref(1, 0);
    v.rate_up_flat = Uref(1, 1);
    v.rate_up_up = Uref(1, 2);
  }

  auto note_rate = [&](char kind, int m, int i, int j, double got,
                       double want) {
    if (got == want) return;
    std::ostringstream os;
    os << block_name(kind, m) << " entry (" << i << "," << j << ") = " << got
       << " deviates from the interior rate " << want;
    v.notes.push_back(os.str());
    v.interior_homogeneous = false;
  };

  for (int m = 0; m < NL; ++m)
    for (int i = 1; i + 1 < NS; ++i) {
      note_rate('W', m, i, i + 1, chain.W(m)(i, i + 1), v.rate_stage_up);
      note_rate('W', m, i, i - 1, chain.W(m)(i, i - 1), v.rate_stage_down);
      // The top level's diagonal carries the level-cap re-balance; every
      // other level must show the interior exit rate.
      if (m + 1 < NL && -chain.W(m)(i, i) != v.exit_rate) {
        std::ostringstream os;
        os << "exit rate at (level " << m << ", stage " << i << ") is "
           << -chain.W(m)(i, i) << ", interior rate is " << v.exit_rate;
        v.notes.push_back(os.str());
        v.exit_rate_constant = false;
        v.interior_homogeneous = false;
      }
    }
  for (int m = 0; m + 1 < NL; ++m)
    for (int i = 1; i + 1 < NS; ++i) {
      note_rate('U', m, i, i - 1, chain.U(m)(i, i - 1), v.rate_up_down);
      note_rate('U', m, i, i, chain.U(m)(i, i), v.rate_up_flat);
      note_rate('U', m, i, i + 1, chain.U(m)(i, i + 1), v.rate_up_up);
    }
  for (int m = 1; m < NL; ++m) {
    const Matrix& D = chain.D_from(m);
    for (int i = 1; i < D.rows(); ++i)
      for (int j = 0; j < D.cols(); ++j)
        if (D(i, j) != 0.0) {
          std::ostringstream os;
          os << "down-level transition out of interior stage " << i
             << " of level " << m << " (direction (-1," << j - i
             << ") is outside the allowed set)";
          v.forbidden.push_back(os.str());
        }
  }

  // Interior blocks continue the interior pattern past the level cap: the
  // top row keeps the interior diagonal and simply has no up-level slot.
  v.A0 = Matrix::Zero(NL, NL);
  v.A1 = Matrix::Zero(NL, NL);
  v.A2 = Matrix::Zero(NL, NL);
  for (int m = 0; m < NL; ++m) {
    v.A0(m, m) = v.rate_stage_up;
    v.A1(m, m) = -v.exit_rate;
    v.A2(m, m) = v.rate_stage_down;
    if (m + 1 < NL) {
      v.A0(m, m + 1) = v.rate_up_up;
      v.A1(m, m + 1) = v.rate_up_flat;
      v.A2(m, m + 1) = v.rate_up_down;
    }
  }

  // Boundary blocks are exact, read off the truncated chain level by level.
  v.B1 = Matrix::Zero(NL, NL);
  v.B0 = Matrix::Zero(NL, NL);
  v.A2_entry = Matrix::Zero(NL, NL);
  for (int m = 0; m < NL; ++m) {
    v.B1(m, m) = chain.W(m)(0, 0);
    v.B0(m, m) = chain.W(m)(0, 1);
    v.A2_entry(m, m) = chain.W(m)(1, 0);
    if (m + 1 < NL) {
      v.B1(m, m + 1) = chain.U(m)(0, 0);
      v.B0(m, m + 1) = chain.U(m)(0, 1);
      v.A2_entry(m, m + 1) = chain.U(m)(1, 0);
      v.B1(m + 1, m) = chain.D_from(m + 1)(0, 0);
      v.B0(m + 1, m) = chain.D_from(m + 1)(0, 1);
      v.A2_entry(m + 1, m) = chain.D_from(m + 1)(1, 0);
    }
  }
  return v;
}

SparseMatrix assemble_generator(const StageBlockChain& view) {
  const int NS = view.num_stages;
  const int NL = view.num_levels;
  const int n = NS * NL;
  std::vector<Triplet> trip;
  for (int i = 0; i < NS; ++i)
    for (int m = 0; m < NL; ++m) {
      const int row = i * NL + m;
      double out = 0;
      auto add = [&](const Matrix& B, int stage) {
        for (int mm = 0; mm < NL; ++mm) {
          const double r = B(m, mm);
          const int col = stage * NL + mm;
          if (r != 0.0 && col != row) {
            trip.emplace_back(row, col, r);
            out += r;
          }
        }
      };
      if (i >= 1) add(i == 1 ? view.A2_entry : view.A2, i - 1);
      add(i == 0 ? view.B1 : view.A1, i);
      if (i + 1 < NS) add(i == 0 ? view.B0 : view.A0, i + 1);
      trip.emplace_back(row, row, -out);
    }
  SparseMatrix Q(n, n);
  Q.setFromTriplets(trip.begin(), trip.end());
  return Q;
}

} // namespace slqbd
