// Command-line front end. Talks to the solver exclusively through the
// shared library's C API; exit codes mirror slqbd_status.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slqbd/slqbd.h"

using nlohmann::json;

namespace {

struct ModelHandle {
  slqbd_model* p = nullptr;
  ~ModelHandle() { slqbd_model_free(p); }
};
struct ChainHandle {
  slqbd_chain* p = nullptr;
  ~ChainHandle() { slqbd_chain_free(p); }
};
struct ResultHandle {
  slqbd_result* p = nullptr;
  ~ResultHandle() { slqbd_result_free(p); }
};

const char* status_name(slqbd_status s) {
  switch (s) {
    case SLQBD_OK: return "ok";
    case SLQBD_ERR_APPLICABILITY: return "applicability";
    case SLQBD_ERR_NUMERICAL: return "numerical";
    case SLQBD_ERR_INPUT: return "input";
  }
  return "unknown";
}

[[noreturn]] void die(slqbd_status s, const std::string& context) {
  std::cerr << "error (" << status_name(s) << "): " << context << ": "
            << slqbd_last_error() << "\n";
  std::exit(static_cast<int>(s));
}

void check(slqbd_status s, const std::string& context) {
  if (s != SLQBD_OK) die(s, context);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error (input): cannot write " << path << "\n";
    std::exit(SLQBD_ERR_INPUT);
  }
  out << text;
}

json spec_file_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) return nullptr;
  json j;
  try {
    in >> j;
  } catch (const json::parse_error&) {
    return nullptr;
  }
  return j;
}

// Full distribution of a result, blocks indexed by level.
json distribution_json(slqbd_result* res) {
  int levels = 0;
  check(slqbd_result_num_levels(res, &levels), "result levels");
  json dist = json::array();
  for (int m = 0; m < levels; ++m) {
    int stages = 0;
    check(slqbd_result_stages_at(res, m, &stages), "result stages");
    json row = json::array();
    for (int i = 0; i < stages; ++i) {
      double p = 0;
      check(slqbd_result_probability(res, m, i, &p), "result probability");
      row.push_back(p);
    }
    dist.push_back(row);
  }
  return dist;
}

json result_summary_json(slqbd_result* res) {
  char method[32] = {0};
  double residual = 0, trunc = 0, seconds = 0, rho = 0;
  check(slqbd_result_method(res, method, sizeof method), "result method");
  check(slqbd_result_residual(res, &residual), "result residual");
  check(slqbd_result_truncation_mass(res, &trunc), "result truncation");
  check(slqbd_result_seconds(res, &seconds), "result seconds");
  check(slqbd_result_spectral_radius(res, &rho), "result spectral radius");
  json j;
  j["method"] = method;
  j["residual_inf"] = residual;
  j["truncation_mass"] = trunc;
  j["seconds"] = seconds;
  if (std::isfinite(rho)) j["spectral_radius"] = rho;
  int levels = 0;
  check(slqbd_result_num_levels(res, &levels), "result levels");
  json mass = json::array();
  for (int m = 0; m < levels; ++m) {
    double lm = 0;
    check(slqbd_result_level_mass(res, m, &lm), "result level mass");
    mass.push_back(lm);
  }
  j["level_mass"] = mass;
  return j;
}

json chain_warnings_json(slqbd_chain* chain) {
  int n = 0;
  check(slqbd_chain_num_warnings(chain, &n), "chain warnings");
  json w = json::array();
  for (int i = 0; i < n; ++i) {
    char buf[512] = {0};
    check(slqbd_chain_warning(chain, i, buf, sizeof buf), "chain warning");
    w.push_back(buf);
  }
  return w;
}

int run_solve(const std::string& spec_path, const std::string& method,
              const std::string& out_path) {
  ModelHandle model;
  check(slqbd_model_from_file(spec_path.c_str(), &model.p), "load model");
  ChainHandle chain;
  check(slqbd_chain_build(model.p, &chain.p), "build chain");
  ResultHandle res;
  check(slqbd_solve(chain.p, method.c_str(), &res.p), "solve");

  json report;
  report["spec_file"] = spec_path;
  const json spec = spec_file_json(spec_path);
  if (!spec.is_null()) report["spec"] = spec;
  report["warnings"] = chain_warnings_json(chain.p);
  report["result"] = result_summary_json(res.p);
  report["result"]["distribution"] = distribution_json(res.p);

  const std::string text = report.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
    std::cout << "method " << report["result"]["method"].get<std::string>()
              << ", residual_inf "
              << report["result"]["residual_inf"].get<double>()
              << ", report written to " << out_path << "\n";
  }
  return 0;
}

int run_validate(const std::string& spec_path) {
  ModelHandle model;
  check(slqbd_model_from_file(spec_path.c_str(), &model.p), "load model");
  ChainHandle chain;
  check(slqbd_chain_build(model.p, &chain.p), "build chain");

  int levels = 0;
  check(slqbd_chain_num_levels(chain.p, &levels), "chain levels");
  int s0 = 0, stop = 0;
  check(slqbd_chain_stages_at(chain.p, 0, &s0), "chain stages");
  check(slqbd_chain_stages_at(chain.p, levels - 1, &stop), "chain stages");
  std::cout << "levels: " << levels << " (stage counts " << s0 << ".."
            << stop << ")\n";

  char buf[2048] = {0};
  const slqbd_status vs = slqbd_chain_validate(chain.p, buf, sizeof buf);
  if (vs != SLQBD_OK) {
    std::cout << "generator: invalid\n";
    die(vs, "validate");
  }
  std::cout << "generator: ok\n";

  const slqbd_status cs = slqbd_chain_classify(chain.p, buf, sizeof buf);
  if (cs != SLQBD_OK) die(cs, "classify");
  std::cout << "variant: " << buf << "\n";

  double load = 0;
  check(slqbd_model_offered_load(model.p, &load), "offered load");
  if (std::isfinite(load)) std::cout << "offered load: " << load << "\n";
  for (const auto& w : chain_warnings_json(chain.p))
    std::cout << "warning: " << w.get<std::string>() << "\n";
  return 0;
}

int run_compare(const std::string& spec_path, const std::string& methods_csv,
                double tol, const std::string& out_path) {
  const std::vector<std::string> methods = split_csv(methods_csv);
  if (methods.size() < 2) {
    std::cerr << "error (input): compare needs at least two methods\n";
    return SLQBD_ERR_INPUT;
  }
  ModelHandle model;
  check(slqbd_model_from_file(spec_path.c_str(), &model.p), "load model");
  ChainHandle chain;
  check(slqbd_chain_build(model.p, &chain.p), "build chain");

  struct Entry {
    std::string method;
    slqbd_status status = SLQBD_OK;
    std::string error;
    std::unique_ptr<ResultHandle> res;
  };
  std::vector<Entry> entries;
  for (const auto& m : methods) {
    Entry e;
    e.method = m;
    e.res = std::make_unique<ResultHandle>();
    e.status = slqbd_solve(chain.p, m.c_str(), &e.res->p);
    if (e.status != SLQBD_OK) e.error = slqbd_last_error();
    entries.push_back(std::move(e));
  }

  json report;
  report["spec_file"] = spec_path;
  report["tol"] = tol;
  report["warnings"] = chain_warnings_json(chain.p);
  report["methods"] = json::object();
  for (auto& e : entries) {
    if (e.status == SLQBD_OK) {
      report["methods"][e.method] = result_summary_json(e.res->p);
    } else {
      report["methods"][e.method] = {{"status", status_name(e.status)},
                                     {"error", e.error}};
    }
    std::cout << e.method << ": "
              << (e.status == SLQBD_OK ? "ok" : status_name(e.status));
    if (e.status != SLQBD_OK) std::cout << " (" << e.error << ")";
    std::cout << "\n";
  }

  bool any_ok = false, all_within = true;
  json pairs = json::array();
  for (std::size_t a = 0; a < entries.size(); ++a) {
    if (entries[a].status != SLQBD_OK) continue;
    any_ok = true;
    for (std::size_t b = a + 1; b < entries.size(); ++b) {
      if (entries[b].status != SLQBD_OK) continue;
      int levels = 0;
      check(slqbd_result_num_levels(entries[a].res->p, &levels), "levels");
      double linf = 0;
      for (int m = 0; m < levels; ++m) {
        int stages = 0;
        check(slqbd_result_stages_at(entries[a].res->p, m, &stages),
              "stages");
        for (int i = 0; i < stages; ++i) {
          double pa = 0, pb = 0;
          check(slqbd_result_probability(entries[a].res->p, m, i, &pa), "p");
          check(slqbd_result_probability(entries[b].res->p, m, i, &pb), "p");
          linf = std::max(linf, std::abs(pa - pb));
        }
      }
      const bool ok = linf <= tol;
      all_within = all_within && ok;
      pairs.push_back({{"a", entries[a].method},
                       {"b", entries[b].method},
                       {"linf", linf},
                       {"within_tol", ok}});
      std::cout << entries[a].method << " vs " << entries[b].method
                << ": linf " << linf << (ok ? " (within" : " (exceeds")
                << " tol " << tol << ")\n";
    }
  }
  report["pairs"] = pairs;

  int exit_code = 0;
  if (!any_ok)
    exit_code = static_cast<int>(entries.front().status);
  else if (!all_within)
    exit_code = SLQBD_ERR_NUMERICAL;
  report["exit_code"] = exit_code;
  if (!out_path.empty()) {
    write_text(out_path, report.dump(2) + "\n");
    std::cout << "report written to " << out_path << "\n";
  } else {
    std::cout << report.dump(2) << "\n";
  }
  return exit_code;
}

struct BenchCell {
  std::string algorithm;
  int size = 0;
  double median_seconds = 0;
  double rel_spread = 0;
  double residual_inf = 0;
  int repeats = 0;
  std::string status = "ok";
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Jump probabilities for the bench lanes: synthetic for the general walk,
// probed from a small instance of the model family otherwise.
void bench_phi(const std::string& family, const std::string& spec_path,
               double phi[5], double* exit_rate) {
  if (family == "lpc-general") {
    phi[0] = 0.18; // up_down
    phi[1] = 0.24; // up_flat
    phi[2] = 0.12; // up_up
    phi[3] = 0.13; // stage_up
    phi[4] = 0.33; // stage_down
    *exit_rate = 1.0;
    return;
  }
  if (spec_path.empty()) {
    std::cerr << "error (input): bench family '" << family
              << "' needs --spec for the model parameters\n";
    std::exit(SLQBD_ERR_INPUT);
  }
  ModelHandle model;
  check(slqbd_model_from_file(spec_path.c_str(), &model.p), "load model");
  check(slqbd_model_set_truncation(model.p, 6, 6), "probe truncation");
  ChainHandle chain;
  check(slqbd_chain_build(model.p, &chain.p), "build probe chain");
  check(slqbd_chain_jump_probabilities(chain.p, phi, exit_rate),
        "jump probabilities");
}

int run_bench(const std::string& family, const std::string& spec_path,
              const std::string& algorithms_csv, const std::string& sizes_csv,
              int repeats, const std::string& out_path) {
  std::vector<int> sizes;
  for (const auto& s : split_csv(sizes_csv)) {
    try {
      sizes.push_back(std::stoi(s));
    } catch (const std::exception&) {
      std::cerr << "error (input): bad size '" << s << "'\n";
      return SLQBD_ERR_INPUT;
    }
  }
  if (sizes.size() < 4) {
    std::cerr << "error (input): bench needs at least four sizes\n";
    return SLQBD_ERR_INPUT;
  }
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) {
      std::cerr << "error (input): sizes must be strictly increasing\n";
      return SLQBD_ERR_INPUT;
    }
  }
  std::vector<std::string> algos = split_csv(algorithms_csv);
  if (algos.empty()) {
    std::cerr << "error (input): bench needs at least one algorithm\n";
    return SLQBD_ERR_INPUT;
  }
  const bool synthetic = family == "lpc-general";
  for (const auto& a : algos) {
    if (a != "structured" && a != "dense" && a != "lpc") {
      std::cerr << "error (input): unknown algorithm '" << a
                << "' (structured, dense, lpc)\n";
      return SLQBD_ERR_INPUT;
    }
    if (synthetic && a != "lpc") {
      std::cerr << "error (input): family lpc-general only drives the lpc "
                   "lane\n";
      return SLQBD_ERR_INPUT;
    }
  }

  double phi[5] = {0};
  double exit_rate = 1.0;
  bench_phi(family, spec_path, phi, &exit_rate);
  const double up = phi[3] * exit_rate;
  const double down = phi[4] * exit_rate;
  const double surplus = (phi[0] + phi[1] + phi[2]) * exit_rate;

  struct Task {
    std::string algo;
    int size;
  };
  std::vector<Task> tasks;
  for (const auto& a : algos)
    for (int n : sizes) tasks.push_back({a, n});

  int threads = 1;
  if (const char* env = std::getenv("SLQBD_THREADS")) {
    try {
      threads = std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      threads = 1;
    }
  }

  auto run_cell = [&](const Task& t) {
    BenchCell cell;
    cell.algorithm = t.algo;
    cell.size = t.size;
    cell.repeats = repeats;
    std::vector<double> times;
    for (int r = 0; r < repeats; ++r) {
      double secs = 0, resid = 0;
      slqbd_status s = SLQBD_OK;
      if (t.algo == "structured")
        s = slqbd_bench_structured_inverse(t.size, up, down, surplus,
                                           exit_rate, &secs, &resid);
      else if (t.algo == "dense")
        s = slqbd_bench_dense_inverse(t.size, up, down, surplus, exit_rate,
                                      &secs, &resid);
      else
        s = slqbd_bench_rate_row(phi, t.size, &secs, &resid);
      if (s != SLQBD_OK) {
        cell.status = std::string(status_name(s)) + ": " + slqbd_last_error();
        return cell;
      }
      times.push_back(secs);
      cell.residual_inf = resid;
    }
    cell.median_seconds = median_of(times);
    const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
    if (cell.median_seconds > 0)
      cell.rel_spread = (*hi - *lo) / cell.median_seconds;
    return cell;
  };

  std::vector<BenchCell> cells(tasks.size());
  if (threads <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) cells[i] = run_cell(tasks[i]);
  } else {
    std::vector<std::future<void>> futs;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < threads; ++w)
      futs.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size();
             i = next.fetch_add(1))
          cells[i] = run_cell(tasks[i]);
      }));
    for (auto& f : futs) f.get();
  }

  for (const auto& c : cells)
    if (c.status == "ok" && c.rel_spread > 0.2)
      std::cerr << "warning: noisy timing for " << c.algorithm << "/"
                << c.size << " (spread " << c.rel_spread * 100
                << "% of the median)\n";

  std::ostringstream csv;
  csv << "record,algorithm,size,median_seconds,rel_spread,residual_inf,"
         "repeats,status,slope\n";
  char line[512];
  for (const auto& c : cells) {
    std::snprintf(line, sizeof line, "cell,%s,%d,%.17g,%.17g,%.17g,%d,%s,\n",
                  c.algorithm.c_str(), c.size, c.median_seconds,
                  c.rel_spread, c.residual_inf, c.repeats,
                  c.status.c_str());
    csv << line;
  }
  for (const auto& a : algos) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& c : cells)
      if (c.algorithm == a && c.status == "ok" && c.median_seconds > 0 &&
          c.repeats >= 3) {
        const double x = std::log(static_cast<double>(c.size));
        const double y = std::log(c.median_seconds);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
      }
    if (n >= 4 && n * sxx - sx * sx != 0) {
      const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      std::snprintf(line, sizeof line, "slope,%s,,,,,,ok,%.17g\n", a.c_str(),
                    slope);
      csv << line;
      std::cout << "lane " << a << ": slope " << slope << "\n";
    } else {
      std::snprintf(line, sizeof line, "slope,%s,,,,,,insufficient,\n",
                    a.c_str());
      csv << line;
      std::cout << "lane " << a << ": slope unavailable\n";
    }
  }

  if (!out_path.empty()) {
    write_text(out_path, csv.str());
    std::cout << "bench table written to " << out_path << "\n";
  } else {
    std::cout << csv.str();
  }
  for (const auto& c : cells)
    if (c.status != "ok") {
      std::cerr << "error: bench cell " << c.algorithm << "/" << c.size
                << " failed: " << c.status << "\n";
      return SLQBD_ERR_NUMERICAL;
    }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Level-structured QBD solver"};
  app.require_subcommand(1);

  std::string spec_path, method = "auto", out_path;
  auto* solve = app.add_subcommand("solve", "Solve a model and report the "
                                            "steady state");
  solve->add_option("--spec", spec_path, "Model spec JSON file")->required();
  solve->add_option("--method", method,
                    "auto, qdesa, qdesa+, qdesa++, lpca, or direct");
  solve->add_option("--out", out_path, "Write the JSON report here");

  std::string cmp_spec, cmp_methods = "auto,direct", cmp_out;
  double cmp_tol = 1e-8;
  auto* compare = app.add_subcommand("compare",
                                     "Solve with several methods and compare");
  compare->add_option("--spec", cmp_spec, "Model spec JSON file")->required();
  compare->add_option("--methods", cmp_methods, "Comma-separated methods");
  compare->add_option("--tol", cmp_tol, "Pairwise max-difference tolerance");
  compare->add_option("--out", cmp_out, "Write the JSON report here");

  std::string val_spec;
  auto* validate = app.add_subcommand("validate",
                                      "Check generator structure and "
                                      "classify the chain");
  validate->add_option("--spec", val_spec, "Model spec JSON file")->required();

  std::string bench_family = "priority", bench_spec, bench_out;
  std::string bench_algos = "structured,dense,lpc";
  std::string bench_sizes = "128,256,512,1024";
  int bench_repeats = 5;
  auto* bench = app.add_subcommand("bench", "Time solver kernels over sizes");
  bench->add_option("--family", bench_family,
                    "priority, longest-queue, batch-priority, "
                    "longest-queue-hetero, or lpc-general");
  bench->add_option("--spec", bench_spec,
                    "Model spec file (parameters for model families)");
  bench->add_option("--algorithms", bench_algos,
                    "Comma-separated lanes: structured, dense, lpc");
  bench->add_option("--sizes", bench_sizes, "Comma-separated sizes");
  bench->add_option("--repeats", bench_repeats, "Repeats per cell");
  bench->add_option("--out", bench_out, "Write the CSV table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return SLQBD_ERR_INPUT;
  }

  if (solve->parsed()) return run_solve(spec_path, method, out_path);
  if (compare->parsed())
    return run_compare(cmp_spec, cmp_methods, cmp_tol, cmp_out);
  if (validate->parsed()) return run_validate(val_spec);
  if (bench->parsed())
    return run_bench(bench_family, bench_spec, bench_algos, bench_sizes,
                     bench_repeats, bench_out);
  return SLQBD_ERR_INPUT;
}
