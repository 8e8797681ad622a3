#pragma once

#include <functional>
#include <vector>

#include "slqbd/lpc.hpp"
#include "slqbd/structured.hpp"

namespace slqbd::bench {

struct Timing {
  double median_seconds = 0;
  double rel_spread = 0; // (max - min) / median over the repeats
};

// Runs fn repeats times, timing each run.
Timing measure(const std::function<void()>& fn, int repeats);

// Least-squares slope of log(seconds) against log(size).
double loglog_slope(const std::vector<double>& sizes,
                    const std::vector<double>& seconds);

struct CellResult {
  double seconds = 0;      // one timed run
  double residual_inf = 0; // checked outside the timed window
};

// Inversion kernels on the constant-coefficient interior block. The
// residual is max |(B C - I)_ij|, accumulated from the band form in
// O(n^2) so large cells stay affordable.
CellResult time_structured_inverse(int n, double up, double down,
                                   double surplus, double exit_rate);
CellResult time_dense_inverse(int n, double up, double down, double surplus,
                              double exit_rate);

// Rate-row kernel: descent weights, shift coefficients, and the closed
// form row of length dim. The residual is the max entry of the quadratic
// defect of the jump chain, evaluated by Toeplitz row convolution.
CellResult time_rate_row(const lpc::JumpProbabilities& jp, int dim);

double structured_residual(const StructuredB& B, const Matrix& C);

} // namespace slqbd::bench
