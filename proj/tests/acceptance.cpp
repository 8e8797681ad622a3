// Acceptance gate: one line per criterion, [PASS]/[FAIL] (or [SKIP] for the
// opt-in timing criteria when bench mode is compiled out). Exit status is
// nonzero when any executed criterion fails. argv[1] must point at the CLI
// binary; it is exercised through real process invocations.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "slqbd/bench.hpp"
#include "slqbd/chain.hpp"
#include "slqbd/lpc.hpp"
#include "slqbd/models.hpp"
#include "slqbd/oracle.hpp"
#include "slqbd/sl.hpp"
#include "slqbd/structured.hpp"

using namespace slqbd;

namespace {

// Pinned tolerances.
constexpr double kOracleLinf = 1e-8;      // criterion 1
constexpr double kSolveSeconds = 2.0;     // criterion 1
constexpr double kBalanceNorm = 1e-9;     // criterion 2
constexpr double kRateRowVsFp = 1e-8;     // criterion 3
constexpr double kCrossMethodLinf = 1e-7; // criterion 3
constexpr double kG0Closed = 1e-10;       // criterion 4
constexpr double kInverseRel = 1e-9;      // criterion 5
constexpr double kSlopeLo = 1.6;          // criteria 5 and 7
constexpr double kSlopeHi = 2.6;          // criteria 5 and 7
constexpr double kSlopeGap = 1.0;         // criterion 7
constexpr double kSlopeBand = 0.7;        // criterion 7
constexpr double kCapDoubling = 1e-8;     // criterion 8
constexpr double kMarginal = 1e-6;        // criterion 9

int g_failures = 0;

void report(int idx, bool ok, const std::string& label,
            const std::string& detail) {
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << idx << ": "
            << label << " (" << detail << ")" << std::endl;
  if (!ok) ++g_failures;
}

[[maybe_unused]] void report_skip(int idx, const std::string& label,
                                  const std::string& detail) {
  std::cout << "[SKIP] criterion " << idx << ": " << label << " (" << detail
            << ")" << std::endl;
}

void run_criterion(int idx, const std::string& label,
                   const std::function<std::pair<bool, std::string>()>& fn) {
  try {
    const auto [ok, detail] = fn();
    report(idx, ok, label, detail);
  } catch (const std::exception& e) {
    report(idx, false, label, std::string("exception: ") + e.what());
  }
}

struct ModelZoo {
  std::string name;
  std::function<LevelBlockChain(int, int)> build;
};

std::vector<ModelZoo> model_zoo() {
  return {
      {"priority",
       [](int l, int s) { return models::build_priority(0.2, 0.3, 1.0, l, s); }},
      {"longest",
       [](int l, int s) { return models::build_longest_queue(1.0, 3.0, l, s); }},
      {"batch",
       [](int l, int s) {
         return models::build_batch_priority(0.2, 0.2, 1.0,
                                             {{1, 0.5}, {2, 0.5}},
                                             {{1, 1.0}}, l, s);
       }},
      {"hetero",
       [](int l, int s) {
         return models::build_longest_queue_hetero(0.3, 0.5, 1.0, l, s);
       }},
  };
}

std::pair<bool, std::string> criterion1() {
  double worst_linf = 0, worst_secs = 0;
  for (const auto& m : model_zoo()) {
    const LevelBlockChain chain = m.build(60, 60);
    const sl::SolveResult res = sl::solve(chain);
    const SteadyState ref = oracle::direct_steady_state(chain);
    const double linf =
        oracle::compare_distributions(res.pi.flatten(), ref.flatten()).linf;
    worst_linf = std::max(worst_linf, linf);
    worst_secs = std::max(worst_secs, res.seconds);
  }
  std::ostringstream os;
  os << "worst linf " << worst_linf << " vs " << kOracleLinf
     << ", slowest solve " << worst_secs << " s vs " << kSolveSeconds;
  return {worst_linf <= kOracleLinf && worst_secs < kSolveSeconds, os.str()};
}

std::pair<bool, std::string> criterion2() {
  double worst = 0;
  for (const auto& m : model_zoo()) {
    if (m.name != "priority" && m.name != "longest") continue;
    const LevelBlockChain chain = m.build(50, 50);
    const sl::RateMatrices rm = sl::compute_rate_matrices(chain);
    const int L = chain.num_levels();
    for (int lev = 1; lev < L; ++lev) {
      Matrix N = chain.U(lev - 1) + rm.at(lev) * chain.W(lev);
      if (lev + 1 < L)
        N += rm.at(lev) * (rm.at(lev + 1) * chain.D_from(lev + 1));
      worst = std::max(worst, N.cwiseAbs().rowwise().sum().maxCoeff());
    }
  }
  std::ostringstream os;
  os << "max row-sum norm of the level balance defect " << worst << " vs "
     << kBalanceNorm;
  return {worst <= kBalanceNorm, os.str()};
}

std::pair<bool, std::string> criterion3() {
  // Rate row against the quadratic fixed point on 20 level blocks.
  const LevelBlockChain probe = models::build_priority(0.2, 0.3, 1.0, 20, 20);
  const lpc::JumpProbabilities jp =
      lpc::jump_probabilities(transpose_to_stage_view(probe));
  const int M = 20;
  const lpc::ToeplitzRateMatrix rhat = lpc::rate_matrix(jp, M);

  Matrix P0 = Matrix::Zero(M, M), P1 = Matrix::Zero(M, M),
         P2 = Matrix::Zero(M, M);
  for (int n = 0; n < M; ++n) {
    P0(n, n) = jp.stage_up;
    P2(n, n) = jp.stage_down;
    if (n + 1 < M) {
      P0(n, n + 1) = jp.up_up;
      P1(n, n + 1) = jp.up_flat;
      P2(n, n + 1) = jp.up_down;
    }
  }
  const Matrix Rfp = oracle::fixed_point_rate_matrix(
      P0, P1 - Matrix::Identity(M, M), P2);
  double fp_diff = 0;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      fp_diff = std::max(fp_diff, std::abs(rhat.entry(i, j) - Rfp(i, j)));

  // Structural exactness of the Toeplitz form.
  const Matrix D = rhat.dense();
  bool toeplitz = true;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j)
      toeplitz = toeplitz &&
                 D(i, j) == (j >= i ? rhat.row(j - i) : 0.0);

  // Cross-method stationary distribution, re-laid out level-major.
  const LevelBlockChain chain = models::build_priority(0.2, 0.3, 1.0, 60, 60);
  const SteadyState lp = to_level_major(lpc::solve(chain).pi);
  const SteadyState qp = sl::solve(chain).pi;
  const double cross =
      oracle::compare_distributions(lp.flatten(), qp.flatten()).linf;

  std::ostringstream os;
  os << "rate row vs fixed point " << fp_diff << " vs " << kRateRowVsFp
     << ", Toeplitz " << (toeplitz ? "exact" : "broken")
     << ", cross-method linf " << cross << " vs " << kCrossMethodLinf;
  return {fp_diff <= kRateRowVsFp && toeplitz && cross <= kCrossMethodLinf,
          os.str()};
}

std::pair<bool, std::string> criterion4() {
  std::mt19937 gen(20250814);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto draw = [&](double max_drift) {
    for (;;) {
      double p[5];
      for (double& v : p) v = unif(gen);
      const double target = 0.35 + 0.6 * unif(gen);
      const double s = p[0] + p[1] + p[2] + p[3] + p[4];
      for (double& v : p) v *= target / s;
      const lpc::JumpProbabilities jp =
          lpc::make_jumps(p[0], p[1], p[2], p[3], p[4]);
      if (jp.stage_up < 0.02 || jp.stage_down < 0.02) continue;
      if (4.0 * jp.stage_up * jp.stage_down > max_drift) continue;
      return jp;
    }
  };

  double worst_closed = 0;
  for (int k = 0; k < 100; ++k) {
    const lpc::JumpProbabilities jp = draw(0.8);
    const double x = jp.stage_up * jp.stage_down;
    const double closed =
        jp.stage_down * (1.0 - std::sqrt(1.0 - 4.0 * x)) / (2.0 * x);
    worst_closed =
        std::max(worst_closed, std::abs(lpc::descent_weight(jp, 0) - closed));
  }

  // The enumerator sums a strict subset of the walks, so it bounds the
  // series from below; the step from length 34 to 40 bounds the tail.
  bool dp_ok = true;
  double worst_gap = 0;
  for (int k = 0; k < 20; ++k) {
    const lpc::JumpProbabilities jp = draw(0.5);
    for (int h = 0; h <= 2; ++h) {
      const double series = lpc::descent_weight(jp, h);
      const double dp40 = oracle::descent_weight_bruteforce(jp, h, 40);
      const double dp34 = oracle::descent_weight_bruteforce(jp, h, 34);
      const double tail_bound = 2.0 * (dp40 - dp34) + 1e-10;
      dp_ok = dp_ok && series >= dp40 - 1e-12 &&
              series - dp40 <= tail_bound;
      worst_gap = std::max(worst_gap, series - dp40);
    }
  }

  std::ostringstream os;
  os << "closed-form gap " << worst_closed << " vs " << kG0Closed
     << " over 100 draws, enumerator gap " << worst_gap
     << " within its tail bound: " << (dp_ok ? "yes" : "no");
  return {worst_closed <= kG0Closed && dp_ok, os.str()};
}

[[maybe_unused]] double median_seconds(const std::function<double()>& run,
                                       int repeats) {
  std::vector<double> t(static_cast<std::size_t>(repeats));
  for (double& v : t) v = run();
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

std::pair<bool, std::string> criterion5() {
  std::mt19937 gen(912743);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst_rel = 0;
  for (int k = 0; k < 200; ++k) {
    const int n = 2 + static_cast<int>(gen() % 99);
    StructuredB sb;
    sb.diag = Vector::Zero(n);
    sb.super = Vector::Zero(n);
    sb.sub = Vector::Zero(n);
    sb.surplus = Vector::Zero(n);
    sb.surplus_col = static_cast<int>(gen() % n);
    for (int i = 0; i < n; ++i) {
      if (i + 1 < n) sb.super(i) = 2.0 * unif(gen);
      if (i > 0) sb.sub(i) = 2.0 * unif(gen);
      sb.surplus(i) = 2.0 * unif(gen);
      const double slack = 1e-3 + unif(gen);
      sb.diag(i) = -(sb.super(i) + sb.sub(i) + sb.surplus(i) + slack);
    }
    const Matrix C = invert_structured(sb);
    const Matrix Cd = invert_dense(sb.dense());
    const double floor = 1e-14 * Cd.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double denom = std::max(std::abs(Cd(i, j)), floor);
        worst_rel = std::max(worst_rel, std::abs(C(i, j) - Cd(i, j)) / denom);
      }
  }
  const bool correct = worst_rel <= kInverseRel;

  std::ostringstream os;
  os << "worst relative entry error " << worst_rel << " vs " << kInverseRel
     << " over 200 random blocks";
#ifdef SLQBD_BENCH_TESTS
  const std::vector<double> sizes{128, 256, 512, 1024, 2048};
  std::vector<double> secs;
  bench::time_structured_inverse(256, 1.0, 2.5, 0.8, 4.3); // warm up
  for (double n : sizes)
    secs.push_back(median_seconds(
        [&] {
          return bench::time_structured_inverse(static_cast<int>(n), 1.0,
                                                2.5, 0.8, 4.3)
              .seconds;
        },
        5));
  const double slope = bench::loglog_slope(sizes, secs);
  os << ", cost slope " << slope << " in [" << kSlopeLo << ", " << kSlopeHi
     << "]";
  return {correct && slope >= kSlopeLo && slope <= kSlopeHi, os.str()};
#else
  os << "; cost slope not measured (bench mode off)";
  return {correct, os.str()};
#endif
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = cli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::pair<bool, std::string> criterion6(const std::string& cli) {
  namespace fs = std::filesystem;
  const fs::path dir =
      fs::temp_directory_path() /
      ("slqbd_accept_" + std::to_string(static_cast<long>(::getpid())));
  fs::create_directories(dir);
  auto spec_file = [&](const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p.string();
  };

  const std::string priority = spec_file("priority.json", R"({
    "family": "priority",
    "params": {"lambda1": 0.2, "lambda2": 0.3, "mu": 1.0},
    "truncation": {"levels": 12, "stages": 12}
  })");
  const std::string longest = spec_file("longest.json", R"({
    "family": "longest-queue",
    "params": {"lambda": 1.0, "mu": 3.0},
    "truncation": {"levels": 12, "stages": 12}
  })");
  const std::string batch = spec_file("batch.json", R"({
    "family": "batch-priority",
    "params": {"lambda1": 0.2, "lambda2": 0.2, "mu": 1.0},
    "batch1": {"1": 0.5, "2": 0.5},
    "truncation": {"levels": 12, "stages": 12}
  })");
  const std::string hetero = spec_file("hetero.json", R"({
    "family": "longest-queue-hetero",
    "params": {"lambda1": 0.3, "lambda2": 0.5, "mu": 1.0},
    "truncation": {"levels": 12, "stages": 12}
  })");
  const std::string twocol = spec_file("twocol.json", R"({
    "family": "raw",
    "blocks": {
      "W": [
        [[-1.5, 0.5, 0.0], [0.5, -2.0, 0.5], [0.0, 0.5, -1.5]],
        [[-3.5, 0.5, 0.0], [0.5, -2.0, 0.5], [0.0, 0.5, -1.5]],
        [[-2.5, 0.5, 0.0], [0.5, -1.0, 0.5], [0.0, 0.5, -0.5]]
      ],
      "U": [
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
      ],
      "D": [
        [[1.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
        [[1.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
      ]
    }
  })");

  struct Run {
    std::string spec, method;
    int expected;
  };
  const std::vector<Run> runs{
      {batch, "lpca", 2},      {hetero, "lpca", 2},
      {priority, "qdesa++", 0}, {priority, "lpca", 0},
      {longest, "qdesa+", 0},   {longest, "lpca", 0},
      {twocol, "qdesa", 2},     {twocol, "qdesa+", 2},
      {twocol, "qdesa++", 2},
  };
  bool ok = true;
  std::ostringstream os;
  for (const auto& r : runs) {
    const int code =
        run_cli(cli, "solve --spec " + r.spec + " --method " + r.method);
    const bool hit = code == r.expected;
    ok = ok && hit;
    if (!hit)
      os << " [" << fs::path(r.spec).filename().string() << " " << r.method
         << " -> " << code << ", wanted " << r.expected << "]";
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  if (ok) return {true, "9 solver/model pairings exit as contracted"};
  return {false, "mismatches:" + os.str()};
}

#ifdef SLQBD_BENCH_TESTS
std::pair<bool, std::string> criterion7() {
  const std::vector<double> inv_sizes{128, 256, 512, 1024, 2048};
  std::vector<double> inv_secs;
  bench::time_structured_inverse(256, 1.0, 2.5, 0.8, 4.3); // warm up
  for (double n : inv_sizes)
    inv_secs.push_back(median_seconds(
        [&] {
          return bench::time_structured_inverse(static_cast<int>(n), 1.0,
                                                2.5, 0.8, 4.3)
              .seconds;
        },
        5));
  const double inv_slope = bench::loglog_slope(inv_sizes, inv_secs);

  const LevelBlockChain probe = models::build_priority(0.2, 0.3, 1.0, 8, 8);
  const lpc::JumpProbabilities special =
      lpc::jump_probabilities(transpose_to_stage_view(probe));
  const lpc::JumpProbabilities general =
      lpc::make_jumps(0.18, 0.24, 0.12, 0.13, 0.33);

  auto row_slope = [&](const lpc::JumpProbabilities& jp,
                       const std::vector<double>& sizes) {
    std::vector<double> secs;
    bench::time_rate_row(jp, 32); // warm up
    for (double m : sizes)
      secs.push_back(median_seconds(
          [&] {
            return bench::time_rate_row(jp, static_cast<int>(m)).seconds;
          },
          7));
    return bench::loglog_slope(sizes, secs);
  };
  // The general row blows up early, so small sizes already show its order;
  // the special-case row is all constant overhead down there and needs the
  // same window as the inverse lane before its quadratic stage dominates.
  const double general_slope = row_slope(general, {16, 32, 64, 128});
  const double special_slope = row_slope(special, {128, 256, 512, 1024});

  const bool ok = inv_slope >= kSlopeLo && inv_slope <= kSlopeHi &&
                  general_slope - inv_slope >= kSlopeGap &&
                  std::abs(special_slope - inv_slope) <= kSlopeBand;
  std::ostringstream os;
  os << "lumped-inverse slope " << inv_slope << ", general rate-row slope "
     << general_slope << " (gap "
     << general_slope - inv_slope << " vs >= " << kSlopeGap
     << "), special rate-row slope " << special_slope << " (band "
     << std::abs(special_slope - inv_slope) << " vs <= " << kSlopeBand << ")";
  return {ok, os.str()};
}
#endif

std::pair<bool, std::string> criterion8() {
  double worst = 0;
  for (const auto& m : model_zoo()) {
    const SteadyState a = sl::solve(m.build(60, 60)).pi;
    const SteadyState b = sl::solve(m.build(120, 120)).pi;
    worst = std::max(worst, std::abs(a.blocks[0](0) - b.blocks[0](0)));
  }
  std::ostringstream os;
  os << "max empty-state probability shift " << worst << " vs "
     << kCapDoubling;
  return {worst <= kCapDoubling, os.str()};
}

std::pair<bool, std::string> criterion9() {
  const LevelBlockChain chain =
      models::build_priority(0.2, 0.3, 1.0, 120, 120);
  const SteadyState pi = sl::solve(chain).pi;
  const double rho1 = 0.2;
  double worst = 0;
  for (int j = 0; j < 120; ++j) {
    double marginal = 0;
    for (const auto& block : pi.blocks) marginal += block(j);
    worst = std::max(worst,
                     std::abs(marginal - (1.0 - rho1) * std::pow(rho1, j)));
  }
  std::ostringstream os;
  os << "high-priority marginal vs geometric law, worst gap " << worst
     << " vs " << kMarginal;
  return {worst <= kMarginal, os.str()};
}

} // namespace

int main(int argc, char** argv) {
  std::cout.precision(6);

  run_criterion(1, "elimination solver matches the direct oracle",
                criterion1);
  run_criterion(2, "rate matrices satisfy the level balance equation",
                criterion2);
  run_criterion(3, "rate-row method: fixed point, structure, cross-check",
                criterion3);
  run_criterion(4, "descent weights: closed form and path enumeration",
                criterion4);
  run_criterion(5, "structured inversion accuracy and cost scaling",
                criterion5);

  if (argc > 1) {
    const std::string cli = argv[1];
    run_criterion(6, "solver applicability surfaces as CLI exit codes",
                  [&] { return criterion6(cli); });
  } else {
    report(6, false, "solver applicability surfaces as CLI exit codes",
           "CLI path missing: pass it as argv[1]");
  }

#ifdef SLQBD_BENCH_TESTS
  run_criterion(7, "runtime scaling contrast between the solver kernels",
                criterion7);
#else
  report_skip(7, "runtime scaling contrast between the solver kernels",
              "opt-in bench mode off; configure with SLQBD_BENCH_TESTS=ON");
#endif

  run_criterion(8, "cap doubling leaves the distribution in place",
                criterion8);
  run_criterion(9, "high-priority marginal follows the geometric law",
                criterion9);

  if (g_failures > 0) {
    std::cout << g_failures << " criterion check(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all executed criteria passed" << std::endl;
  return 0;
}
