#include "slqbd/lpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace slqbd::lpc {

namespace {

// Exact binomial for arguments small enough that every intermediate fits;
// the running product stays integral at each division step.
unsigned long long binom_u64(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r *= static_cast<unsigned>(n - k + i);
    r /= static_cast<unsigned>(i);
  }
  return static_cast<unsigned long long>(r);
}

// Log-domain accumulation for larger arguments.
double lbinom(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  k = std::min(k, n - k);
  double s = 0;
  for (int i = 1; i <= k; ++i)
    s += std::log(static_cast<double>(n - k + i)) -
         std::log(static_cast<double>(i));
  return s;
}

double pow_or_one(double x, int k) { return k == 0 ? 1.0 : std::pow(x, k); }

struct Phi {
  double p01, p0m1, p10, p11, p1m1;
};

// First m-term of the (s, u) sub-series: the walk makes m plain stage-up
// moves, m+1 stage-down moves (s of them with a level bump), u combined
// up-up moves and t plain level bumps, interleaved freely.
double first_term(const Phi& q, int s, int u, int t, int m0) {
  if ((q.p1m1 == 0 && s > 0) || (q.p10 == 0 && t > 0) ||
      (q.p11 == 0 && u > 0) || (q.p01 == 0 && m0 - u > 0) ||
      (q.p0m1 == 0 && m0 + 1 - s > 0))
    return 0;
  if (2 * m0 + t <= 62) {
    const double comb =
        static_cast<double>(binom_u64(2 * m0, m0)) / (m0 + 1) *
        static_cast<double>(binom_u64(m0 + 1, s)) *
        static_cast<double>(binom_u64(m0, u)) *
        static_cast<double>(binom_u64(2 * m0 + t, t));
    return comb * pow_or_one(q.p1m1, s) * pow_or_one(q.p10, t) *
           pow_or_one(q.p11, u) * pow_or_one(q.p01, m0 - u) *
           pow_or_one(q.p0m1, m0 + 1 - s);
  }
  double lg = lbinom(2 * m0, m0) - std::log(static_cast<double>(m0 + 1)) +
              lbinom(m0 + 1, s) + lbinom(m0, u) + lbinom(2 * m0 + t, t);
  if (s > 0) lg += s * std::log(q.p1m1);
  if (t > 0) lg += t * std::log(q.p10);
  if (u > 0) lg += u * std::log(q.p11);
  if (m0 - u > 0) lg += (m0 - u) * std::log(q.p01);
  if (m0 + 1 - s > 0) lg += (m0 + 1 - s) * std::log(q.p0m1);
  return std::exp(lg);
}

// Successive-term ratio of the m-series at fixed (s, u, t).
double term_ratio(const Phi& q, long long m, int s, int u, int t) {
  const double dm = static_cast<double>(m);
  return 2.0 * (2 * dm + 1) / (dm + 2) * ((dm + 2) / (dm + 2 - s)) *
         ((dm + 1) / (dm + 1 - u)) *
         ((2 * dm + t + 2) * (2 * dm + t + 1) /
          ((2 * dm + 2) * (2 * dm + 1))) *
         q.p01 * q.p0m1;
}

double series_su(const Phi& q, int s, int u, int t, const SeriesOptions& opts) {
  const int m0 = std::max({u, s - 1, 0});
  double term = first_term(q, s, u, t, m0);
  if (!(term > 0)) return 0;
  double acc = 0;
  long long used = 0;
  for (long long m = m0;; ++m) {
    acc += term;
    if (++used > opts.max_terms)
      throw NumericalError(
          "descent weight series did not settle within the term budget");
    const double next = term * term_ratio(q, m, s, u, t);
    if (next == 0) break;
    if (m > m0 && next <= term && next < opts.series_tol * (1.0 + acc)) break;
    term = next;
  }
  return acc;
}

Phi phi_of(const JumpProbabilities& jp) {
  return {jp.stage_up, jp.stage_down, jp.up_flat, jp.up_up, jp.up_down};
}

void check_probabilities(const JumpProbabilities& jp) {
  const double entries[] = {jp.up_down, jp.up_flat, jp.up_up, jp.stage_up,
                            jp.stage_down};
  for (double p : entries)
    if (!(p >= 0) || !std::isfinite(p))
      throw InputError("jump probabilities must be finite and nonnegative");
  if (jp.sum() > 1.0 + 1e-12)
    throw InputError("jump probabilities sum to more than 1");
}

void check_drift(const JumpProbabilities& jp) {
  const double x = 4.0 * jp.stage_up * jp.stage_down;
  if (x >= 1.0 - 1e-9) {
    std::ostringstream os;
    os << "descent weights are not summable: 4 * stage_up * stage_down = "
       << x << " must stay below 1";
    throw NumericalError(os.str());
  }
}

} // namespace

JumpProbabilities make_jumps(double up_down, double up_flat, double up_up,
                             double stage_up, double stage_down) {
  JumpProbabilities jp;
  jp.up_down = up_down;
  jp.up_flat = up_flat;
  jp.up_up = up_up;
  jp.stage_up = stage_up;
  jp.stage_down = stage_down;
  jp.exit_rate = 1.0;
  return jp;
}

JumpProbabilities jump_probabilities(const StageBlockChain& view) {
  if (!view.exit_rate_constant) {
    std::string detail;
    for (const auto& n : view.notes)
      if (n.find("exit rate") != std::string::npos) {
        detail = n;
        break;
      }
    throw ApplicabilityError(
        "interior exit rate varies across states, the chain cannot be "
        "uniformized into a self-loop-free jump walk (" +
        detail + ")");
  }
  if (!view.forbidden.empty())
    throw ApplicabilityError(
        "interior transitions leave the allowed direction set: " +
        view.forbidden.front() +
        (view.forbidden.size() > 1
             ? " (and " + std::to_string(view.forbidden.size() - 1) + " more)"
             : ""));
  if (!view.interior_homogeneous)
    throw ApplicabilityError(
        "interior rates are not homogeneous: " +
        (view.notes.empty() ? std::string("rate deviation detected")
                            : view.notes.front()));
  if (!(view.exit_rate > 0))
    throw InputError("interior exit rate must be positive");

  JumpProbabilities jp;
  jp.exit_rate = view.exit_rate;
  jp.up_down = view.rate_up_down / view.exit_rate;
  jp.up_flat = view.rate_up_flat / view.exit_rate;
  jp.up_up = view.rate_up_up / view.exit_rate;
  jp.stage_up = view.rate_stage_up / view.exit_rate;
  jp.stage_down = view.rate_stage_down / view.exit_rate;
  if (std::abs(jp.sum() - 1.0) > 1e-9)
    throw InputError(
        "interior outflow does not match the exit rate; the chain rows are "
        "not conservative");
  return jp;
}

double descent_weight(const JumpProbabilities& jp, int h,
                      const SeriesOptions& opts) {
  if (h < 0) throw InputError("descent level shift must be nonnegative");
  check_probabilities(jp);
  check_drift(jp);
  const Phi q = phi_of(jp);
  // Every term carries p1m1^s p11^u, so a vanishing weight pins its index
  // to zero; skipping here keeps the no-diagonal case at one series per h.
  const int s_max = q.p1m1 > 0 ? h : 0;
  double total = 0;
  for (int s = 0; s <= s_max; ++s) {
    const int u_max = q.p11 > 0 ? h - s : 0;
    for (int u = 0; u <= u_max; ++u)
      total += series_su(q, s, u, h - s - u, opts);
  }
  return total;
}

std::vector<double> descent_weights(const JumpProbabilities& jp, int count,
                                    const SeriesOptions& opts) {
  std::vector<double> G(static_cast<std::size_t>(std::max(count, 0)));
  for (int h = 0; h < count; ++h) G[h] = descent_weight(jp, h, opts);
  return G;
}

std::vector<double> shift_coefficients(const JumpProbabilities& jp,
                                       const std::vector<double>& G) {
  if (G.empty()) return {};
  const double denom = 1.0 - jp.stage_up * G[0];
  if (std::abs(denom) < 1e-14)
    throw NumericalError("shift coefficient recursion is degenerate: "
                         "1 - stage_up * G_0 vanishes");
  std::vector<double> k(G.size());
  k[0] = 1.0;
  for (std::size_t h = 1; h < G.size(); ++h) {
    double conv_up = 0, conv_flat = 0;
    for (std::size_t j = 0; j < h; ++j) {
      conv_up += G[h - j] * k[j];
      conv_flat += G[h - j - 1] * k[j];
    }
    k[h] = (jp.up_flat * k[h - 1] + jp.stage_up * conv_up +
            jp.up_up * conv_flat) /
           denom;
  }
  return k;
}

Matrix ToeplitzRateMatrix::dense() const {
  const int n = dim();
  Matrix R = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) R(i, j) = row(j - i);
  return R;
}

ToeplitzRateMatrix rate_matrix(const JumpProbabilities& jp, int dim,
                               const SeriesOptions& opts) {
  if (dim < 1) throw InputError("rate matrix dimension must be positive");
  check_probabilities(jp);
  check_drift(jp);
  const std::vector<double> G = descent_weights(jp, dim, opts);
  const std::vector<double> kap = shift_coefficients(jp, G);
  const double disc = 1.0 - 4.0 * jp.stage_up * jp.stage_down;
  const double denom = 1.0 + std::sqrt(disc);
  ToeplitzRateMatrix R;
  R.row.resize(dim);
  for (int h = 0; h < dim; ++h) {
    const double prev = h >= 1 ? kap[h - 1] : 0.0;
    R.row(h) = 2.0 * (jp.stage_up * kap[h] + jp.up_up * prev) / denom;
  }
  return R;
}

SteadyState steady_state(const StageBlockChain& view,
                         const ToeplitzRateMatrix& rhat) {
  const int NL = view.num_levels;
  const int NS = view.num_stages;
  if (rhat.dim() != NL)
    throw InputError("rate matrix dimension does not match the level count");
  if (rhat.spectral_radius() >= 1.0 - 1e-12) {
    std::ostringstream os;
    os << "no steady state: rate matrix spectral radius "
       << rhat.spectral_radius() << " is not below 1";
    throw NumericalError(os.str());
  }

  const Matrix Rd = rhat.dense();
  const Matrix I = Matrix::Identity(NL, NL);

  // Unknowns [pi_0, pi_1]; equations are the stage-0 and stage-1 balance
  // columns with the first equation replaced by the geometric-tail
  // normalization pi_0 1 + pi_1 (I - R)^{-1} 1 = 1.
  Matrix Msys(2 * NL, 2 * NL);
  Msys.topLeftCorner(NL, NL) = view.B1;
  Msys.topRightCorner(NL, NL) = view.B0;
  Msys.bottomLeftCorner(NL, NL) = view.A2_entry;
  Msys.bottomRightCorner(NL, NL) = view.A1 + Rd * view.A2;

  const Vector tail = (I - Rd).partialPivLu().solve(Vector::Ones(NL));
  Msys.col(0).head(NL) = Vector::Ones(NL);
  Msys.col(0).tail(NL) = tail;

  Eigen::FullPivLU<Matrix> lu(Msys.transpose());
  if (!lu.isInvertible())
    throw NumericalError("boundary completion system is singular");
  Vector rhs = Vector::Zero(2 * NL);
  rhs(0) = 1.0;
  const Vector x = lu.solve(rhs);

  SteadyState out;
  out.layout = Layout::StageMajor;
  out.blocks.resize(NS);
  out.blocks[0] = x.head(NL).transpose();
  if (NS >= 2) out.blocks[1] = x.tail(NL).transpose();
  for (int i = 2; i < NS; ++i) out.blocks[i] = out.blocks[i - 1] * Rd;

  double total = 0, most_negative = 0, peak = 0;
  for (auto& b : out.blocks) {
    most_negative = std::min(most_negative, b.minCoeff());
    peak = std::max(peak, b.maxCoeff());
    total += b.sum();
  }
  if (most_negative < -1e-9 * std::max(peak, 1e-300))
    throw NumericalError("boundary completion produced negative mass (" +
                         std::to_string(most_negative) + ")");
  if (!(total > 0) || !std::isfinite(total))
    throw NumericalError("boundary completion does not normalize");
  for (auto& b : out.blocks) {
    b /= total;
    b = b.cwiseMax(0.0);
  }
  out.truncation_mass = out.blocks.back().sum();
  out.residual_inf = residual_inf(out.flatten(), assemble_generator(view));
  return out;
}

SolveResult solve(const LevelBlockChain& chain, const SeriesOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const StageBlockChain view = transpose_to_stage_view(chain);
  const JumpProbabilities jp = jump_probabilities(view);
  const ToeplitzRateMatrix rhat = rate_matrix(jp, view.num_levels, opts);
  SolveResult res;
  res.rhat0 = rhat.spectral_radius();
  res.pi = steady_state(view, rhat);
  res.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

} // namespace slqbd::lpc
