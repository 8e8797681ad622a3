#include "slqbd/slqbd.h"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <limits>
#include <memory>
#include <string>

#include "slqbd/bench.hpp"
#include "slqbd/chain.hpp"
#include "slqbd/lpc.hpp"
#include "slqbd/models.hpp"
#include "slqbd/oracle.hpp"
#include "slqbd/sl.hpp"

struct slqbd_model {
  slqbd::models::ModelSpec spec;
};

struct slqbd_chain {
  slqbd::LevelBlockChain chain;
};

struct slqbd_result {
  slqbd::SteadyState pi; // always level-major
  std::string method;
  double spectral_radius = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0;
};

namespace {

thread_local std::string g_last_error;

void copy_out(const std::string& s, char* buf, size_t buflen) {
  if (!buf || buflen == 0) return;
  const size_t n = std::min(s.size(), buflen - 1);
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
}

template <typename Fn>
slqbd_status wrap(Fn&& fn) {
  try {
    fn();
    return SLQBD_OK;
  } catch (const slqbd::Error& e) {
    g_last_error = e.what();
    return static_cast<slqbd_status>(static_cast<int>(e.kind()));
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SLQBD_ERR_NUMERICAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return SLQBD_ERR_NUMERICAL;
  }
}

slqbd_status fail_input(const std::string& msg) {
  g_last_error = msg;
  return SLQBD_ERR_INPUT;
}

slqbd::SteadyState ensure_level_major(const slqbd::SteadyState& pi) {
  return pi.layout == slqbd::Layout::LevelMajor ? pi
                                                : slqbd::to_level_major(pi);
}

slqbd_result* solve_dispatch(const slqbd::LevelBlockChain& chain,
                             const std::string& method) {
  auto out = std::make_unique<slqbd_result>();
  if (method == "direct") {
    const auto t0 = std::chrono::steady_clock::now();
    out->pi = slqbd::oracle::direct_steady_state(chain);
    out->seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
    out->method = "direct";
  } else if (method == "lpca") {
    auto res = slqbd::lpc::solve(chain);
    out->pi = ensure_level_major(res.pi);
    out->seconds = res.seconds;
    out->spectral_radius = res.rhat0;
    out->method = "lpca";
  } else if (method == "auto") {
    try {
      auto res = slqbd::sl::solve(chain);
      out->pi = res.pi;
      out->seconds = res.seconds;
      out->spectral_radius = res.spectral_radius;
      out->method = slqbd::sl::to_string(res.variant);
    } catch (const slqbd::ApplicabilityError&) {
      try {
        auto res = slqbd::lpc::solve(chain);
        out->pi = ensure_level_major(res.pi);
        out->seconds = res.seconds;
        out->spectral_radius = res.rhat0;
        out->method = "lpca";
      } catch (const slqbd::ApplicabilityError&) {
        const auto t0 = std::chrono::steady_clock::now();
        out->pi = slqbd::oracle::direct_steady_state(chain);
        out->seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        out->method = "direct";
      }
    }
  } else if (auto v = slqbd::sl::variant_from_string(method)) {
    slqbd::sl::SolveOptions opts;
    opts.variant = *v;
    auto res = slqbd::sl::solve(chain, opts);
    out->pi = res.pi;
    out->seconds = res.seconds;
    out->spectral_radius = res.spectral_radius;
    out->method = slqbd::sl::to_string(res.variant);
  } else {
    throw slqbd::InputError(
        "unknown method '" + method +
        "' (expected auto, qdesa, qdesa+, qdesa++, lpca, or direct)");
  }
  return out.release();
}

} // namespace

extern "C" {

const char* slqbd_version(void) { return "1.0.0"; }

const char* slqbd_last_error(void) { return g_last_error.c_str(); }

slqbd_status slqbd_model_from_json(const char* json_text, slqbd_model** out) {
  if (!json_text || !out) return fail_input("null argument");
  *out = nullptr;
  return wrap([&] {
    auto m = std::make_unique<slqbd_model>();
    m->spec = slqbd::models::ModelSpec::from_json_text(json_text);
    *out = m.release();
  });
}

slqbd_status slqbd_model_from_file(const char* path, slqbd_model** out) {
  if (!path || !out) return fail_input("null argument");
  *out = nullptr;
  return wrap([&] {
    auto m = std::make_unique<slqbd_model>();
    m->spec = slqbd::models::ModelSpec::from_file(path);
    *out = m.release();
  });
}

slqbd_status slqbd_model_set_truncation(slqbd_model* model, int levels,
                                        int stages) {
  if (!model) return fail_input("null model");
  return wrap([&] {
    model->spec.levels = levels;
    model->spec.stages = stages;
  });
}

slqbd_status slqbd_model_offered_load(const slqbd_model* model,
                                      double* out_load) {
  if (!model || !out_load) return fail_input("null argument");
  return wrap([&] { *out_load = model->spec.offered_load(); });
}

void slqbd_model_free(slqbd_model* model) { delete model; }

slqbd_status slqbd_chain_build(const slqbd_model* model, slqbd_chain** out) {
  if (!model || !out) return fail_input("null argument");
  *out = nullptr;
  return wrap([&] {
    *out = new slqbd_chain{slqbd::models::build_chain(model->spec)};
  });
}

void slqbd_chain_free(slqbd_chain* chain) { delete chain; }

slqbd_status slqbd_chain_num_levels(const slqbd_chain* chain, int* out) {
  if (!chain || !out) return fail_input("null argument");
  *out = chain->chain.num_levels();
  return SLQBD_OK;
}

slqbd_status slqbd_chain_stages_at(const slqbd_chain* chain, int level,
                                   int* out) {
  if (!chain || !out) return fail_input("null argument");
  if (level < 0 || level >= chain->chain.num_levels())
    return fail_input("level index out of range");
  *out = chain->chain.stages_at(level);
  return SLQBD_OK;
}

slqbd_status slqbd_chain_validate(const slqbd_chain* chain, char* buf,
                                  size_t buflen) {
  if (!chain) return fail_input("null chain");
  return wrap([&] {
    const auto rep = slqbd::validate_generator(chain->chain);
    const auto des = slqbd::check_des_columns(chain->chain);
    std::string msg;
    if (!rep.ok()) msg += rep.summary();
    if (!des.ok()) {
      for (const auto& v : des.violations) {
        if (!msg.empty()) msg += "; ";
        msg += v.what;
      }
    }
    if (!msg.empty()) throw slqbd::ApplicabilityError(msg);
    copy_out("ok", buf, buflen);
  });
}

slqbd_status slqbd_chain_classify(const slqbd_chain* chain, char* buf,
                                  size_t buflen) {
  if (!chain) return fail_input("null chain");
  return wrap([&] {
    copy_out(slqbd::sl::to_string(slqbd::sl::classify_variant(chain->chain)),
             buf, buflen);
  });
}

slqbd_status slqbd_chain_num_warnings(const slqbd_chain* chain, int* out) {
  if (!chain || !out) return fail_input("null argument");
  *out = static_cast<int>(chain->chain.meta().warnings.size());
  return SLQBD_OK;
}

slqbd_status slqbd_chain_warning(const slqbd_chain* chain, int index,
                                 char* buf, size_t buflen) {
  if (!chain) return fail_input("null chain");
  const auto& w = chain->chain.meta().warnings;
  if (index < 0 || index >= static_cast<int>(w.size()))
    return fail_input("warning index out of range");
  copy_out(w[static_cast<std::size_t>(index)], buf, buflen);
  return SLQBD_OK;
}

slqbd_status slqbd_chain_jump_probabilities(const slqbd_chain* chain,
                                            double out_phi[5],
                                            double* out_exit_rate) {
  if (!chain || !out_phi || !out_exit_rate)
    return fail_input("null argument");
  return wrap([&] {
    const auto view = slqbd::transpose_to_stage_view(chain->chain);
    const auto jp = slqbd::lpc::jump_probabilities(view);
    out_phi[0] = jp.up_down;
    out_phi[1] = jp.up_flat;
    out_phi[2] = jp.up_up;
    out_phi[3] = jp.stage_up;
    out_phi[4] = jp.stage_down;
    *out_exit_rate = jp.exit_rate;
  });
}

slqbd_status slqbd_solve(const slqbd_chain* chain, const char* method,
                         slqbd_result** out) {
  if (!chain || !method || !out) return fail_input("null argument");
  *out = nullptr;
  return wrap([&] { *out = solve_dispatch(chain->chain, method); });
}

void slqbd_result_free(slqbd_result* result) { delete result; }

slqbd_status slqbd_result_method(const slqbd_result* result, char* buf,
                                 size_t buflen) {
  if (!result) return fail_input("null result");
  copy_out(result->method, buf, buflen);
  return SLQBD_OK;
}

slqbd_status slqbd_result_residual(const slqbd_result* result, double* out) {
  if (!result || !out) return fail_input("null argument");
  *out = result->pi.residual_inf;
  return SLQBD_OK;
}

slqbd_status slqbd_result_truncation_mass(const slqbd_result* result,
                                          double* out) {
  if (!result || !out) return fail_input("null argument");
  *out = result->pi.truncation_mass;
  return SLQBD_OK;
}

slqbd_status slqbd_result_seconds(const slqbd_result* result, double* out) {
  if (!result || !out) return fail_input("null argument");
  *out = result->seconds;
  return SLQBD_OK;
}

slqbd_status slqbd_result_spectral_radius(const slqbd_result* result,
                                          double* out) {
  if (!result || !out) return fail_input("null argument");
  *out = result->spectral_radius;
  return SLQBD_OK;
}

slqbd_status slqbd_result_num_levels(const slqbd_result* result, int* out) {
  if (!result || !out) return fail_input("null argument");
  *out = static_cast<int>(result->pi.blocks.size());
  return SLQBD_OK;
}

slqbd_status slqbd_result_stages_at(const slqbd_result* result, int level,
                                    int* out) {
  if (!result || !out) return fail_input("null argument");
  if (level < 0 || level >= static_cast<int>(result->pi.blocks.size()))
    return fail_input("level index out of range");
  *out = static_cast<int>(result->pi.blocks[level].size());
  return SLQBD_OK;
}

slqbd_status slqbd_result_probability(const slqbd_result* result, int level,
                                      int stage, double* out) {
  if (!result || !out) return fail_input("null argument");
  if (level < 0 || level >= static_cast<int>(result->pi.blocks.size()))
    return fail_input("level index out of range");
  const auto& block = result->pi.blocks[static_cast<std::size_t>(level)];
  if (stage < 0 || stage >= block.size())
    return fail_input("stage index out of range");
  *out = block(stage);
  return SLQBD_OK;
}

slqbd_status slqbd_result_level_mass(const slqbd_result* result, int level,
                                     double* out) {
  if (!result || !out) return fail_input("null argument");
  if (level < 0 || level >= static_cast<int>(result->pi.blocks.size()))
    return fail_input("level index out of range");
  *out = result->pi.blocks[static_cast<std::size_t>(level)].sum();
  return SLQBD_OK;
}

slqbd_status slqbd_bench_structured_inverse(int n, double up, double down,
                                            double surplus, double exit_rate,
                                            double* out_seconds,
                                            double* out_residual) {
  if (!out_seconds || !out_residual) return fail_input("null argument");
  return wrap([&] {
    const auto cell =
        slqbd::bench::time_structured_inverse(n, up, down, surplus, exit_rate);
    *out_seconds = cell.seconds;
    *out_residual = cell.residual_inf;
  });
}

slqbd_status slqbd_bench_dense_inverse(int n, double up, double down,
                                       double surplus, double exit_rate,
                                       double* out_seconds,
                                       double* out_residual) {
  if (!out_seconds || !out_residual) return fail_input("null argument");
  return wrap([&] {
    const auto cell =
        slqbd::bench::time_dense_inverse(n, up, down, surplus, exit_rate);
    *out_seconds = cell.seconds;
    *out_residual = cell.residual_inf;
  });
}

slqbd_status slqbd_bench_rate_row(const double phi[5], int dim,
                                  double* out_seconds, double* out_residual) {
  if (!phi || !out_seconds || !out_residual)
    return fail_input("null argument");
  return wrap([&] {
    const auto jp =
        slqbd::lpc::make_jumps(phi[0], phi[1], phi[2], phi[3], phi[4]);
    const auto cell = slqbd::bench::time_rate_row(jp, dim);
    *out_seconds = cell.seconds;
    *out_residual = cell.residual_inf;
  });
}

} // extern "C"
