#include "slqbd/models.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace slqbd::models {

using nlohmann::json;

std::string to_string(Family f) {
  switch (f) {
    case Family::Priority: return "priority";
    case Family::LongestQueue: return "longest-queue";
    case Family::BatchPriority: return "batch-priority";
    case Family::LongestQueueHetero: return "longest-queue-hetero";
    case Family::Raw: return "raw";
  }
  return "?";
}

namespace {

void require_positive(double v, const std::string& name) {
  if (!(v > 0) || !std::isfinite(v))
    throw InputError("rate " + name + " must be positive and finite");
}

void require_caps(int levels, int stages) {
  if (levels < 2 || stages < 2)
    throw InputError("truncation caps must be at least 2 in each direction");
}

void add_load_warning(LevelBlockChain& chain, double load) {
  if (load >= 1.0) {
    std::ostringstream os;
    os << "offered load " << load
       << " is not below 1: the unbounded model has no steady state; "
          "results describe the truncated chain only";
    chain.meta().warnings.push_back(os.str());
  }
}

std::map<int, double> parse_batch(const json& j, const std::string& name) {
  std::map<int, double> out;
  if (!j.is_object())
    throw InputError(name + " must map batch sizes to probabilities");
  for (const auto& [key, val] : j.items()) {
    int size = 0;
    try {
      std::size_t used = 0;
      size = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw InputError(name + " key '" + key + "' is not an integer");
    }
    if (!val.is_number())
      throw InputError(name + " value for size " + key + " must be a number");
    out[size] = val.get<double>();
  }
  return out;
}

Matrix parse_matrix(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty())
    throw InputError(name + " must be a nonempty array of rows");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
      throw InputError(name + " rows have inconsistent lengths");
    for (int c = 0; c < cols; ++c) {
      if (!j[i][c].is_number())
        throw InputError(name + " entries must be numbers");
      M(i, c) = j[i][c].get<double>();
    }
  }
  return M;
}

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int j2 = 0; j2 < M.cols(); ++j2) row.push_back(M(i, j2));
    rows.push_back(row);
  }
  return rows;
}

} // namespace

ModelSpec ModelSpec::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("model spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw InputError("model spec needs a string 'family' field");
  const std::string fam = j["family"].get<std::string>();

  ModelSpec spec;
  if (fam == "priority") spec.family = Family::Priority;
  else if (fam == "longest-queue") spec.family = Family::LongestQueue;
  else if (fam == "batch-priority") spec.family = Family::BatchPriority;
  else if (fam == "longest-queue-hetero") spec.family = Family::LongestQueueHetero;
  else if (fam == "raw") spec.family = Family::Raw;
  else
    throw InputError("unknown family '" + fam +
                     "' (expected priority, longest-queue, batch-priority, "
                     "longest-queue-hetero, or raw)");

  auto param = [&](const std::string& name) {
    if (!j.contains("params") || !j["params"].contains(name) ||
        !j["params"][name].is_number())
      throw InputError("family " + fam + " needs numeric params." + name);
    return j["params"][name].get<double>();
  };

  if (spec.family == Family::Raw) {
    if (!j.contains("blocks"))
      throw InputError("raw family needs a 'blocks' object with W, U, D");
    const json& b = j["blocks"];
    for (const char* key : {"W", "U", "D"})
      if (!b.contains(key) || !b[key].is_array())
        throw InputError(std::string("blocks.") + key +
                         " must be an array of matrices");
    for (const auto& m : b["W"]) spec.raw_W.push_back(parse_matrix(m, "blocks.W"));
    for (const auto& m : b["U"]) spec.raw_U.push_back(parse_matrix(m, "blocks.U"));
    for (const auto& m : b["D"]) spec.raw_D.push_back(parse_matrix(m, "blocks.D"));
    return spec;
  }

  if (spec.family == Family::LongestQueue) {
    spec.lambda = param("lambda");
    spec.mu = param("mu");
  } else {
    spec.lambda1 = param("lambda1");
    spec.lambda2 = param("lambda2");
    spec.mu = param("mu");
  }
  if (spec.family == Family::BatchPriority) {
    spec.batch1 = j.contains("batch1") ? parse_batch(j["batch1"], "batch1")
                                       : std::map<int, double>{{1, 1.0}};
    spec.batch2 = j.contains("batch2") ? parse_batch(j["batch2"], "batch2")
                                       : std::map<int, double>{{1, 1.0}};
  }

  if (!j.contains("truncation") || !j["truncation"].is_object())
    throw InputError("model spec needs a 'truncation' object with levels "
                     "and stages");
  const json& t = j["truncation"];
  for (const char* key : {"levels", "stages"})
    if (!t.contains(key) || !t[key].is_number_integer())
      throw InputError(std::string("truncation.") + key +
                       " must be an integer");
  spec.levels = t["levels"].get<int>();
  spec.stages = t["stages"].get<int>();
  return spec;
}

ModelSpec ModelSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model spec file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string ModelSpec::to_json_text() const {
  json j;
  j["family"] = to_string(family);
  if (family == Family::Raw) {
    json b;
    b["W"] = json::array();
    b["U"] = json::array();
    b["D"] = json::array();
    for (const auto& m : raw_W) b["W"].push_back(matrix_to_json(m));
    for (const auto& m : raw_U) b["U"].push_back(matrix_to_json(m));
    for (const auto& m : raw_D) b["D"].push_back(matrix_to_json(m));
    j["blocks"] = b;
    return j.dump(2);
  }
  json p;
  if (family == Family::LongestQueue) {
    p["lambda"] = lambda;
  } else {
    p["lambda1"] = lambda1;
    p["lambda2"] = lambda2;
  }
  p["mu"] = mu;
  j["params"] = p;
  if (family == Family::BatchPriority) {
    json b1, b2;
    for (const auto& [k, v] : batch1) b1[std::to_string(k)] = v;
    for (const auto& [k, v] : batch2) b2[std::to_string(k)] = v;
    j["batch1"] = b1;
    j["batch2"] = b2;
  }
  j["truncation"] = {{"levels", levels}, {"stages", stages}};
  return j.dump(2);
}

double ModelSpec::offered_load() const {
  switch (family) {
    case Family::Priority:
      return (lambda1 + lambda2) / mu;
    case Family::LongestQueue:
      return 2.0 * lambda / mu;
    case Family::BatchPriority: {
      double mean = 0;
      for (const auto& [k, p] : batch1) mean += k * p;
      return (lambda1 * mean + lambda2) / mu;
    }
    case Family::LongestQueueHetero:
      return (lambda1 + lambda2) / mu;
    case Family::Raw:
      return std::numeric_limits<double>::quiet_NaN();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

LevelBlockChain build_priority(double lambda1, double lambda2, double mu,
                               int levels, int stages) {
  require_positive(lambda1, "lambda1");
  require_positive(lambda2, "lambda2");
  require_positive(mu, "mu");
  require_caps(levels, stages);
  UnboundedQbd q;
  q.w_band = {{1, lambda1}, {-1, mu}};
  q.u_band = {{0, lambda2}};
  q.d_entries = {{{0, 0}, mu}};
  q.source = "priority";
  LevelBlockChain chain = truncate_chain(q, levels, stages);
  add_load_warning(chain, (lambda1 + lambda2) / mu);
  return chain;
}

LevelBlockChain build_longest_queue(double lambda, double mu, int levels,
                                    int stages) {
  require_positive(lambda, "lambda");
  require_positive(mu, "mu");
  require_caps(levels, stages);
  UnboundedQbd q;
  q.w_band = {{1, lambda}, {-1, mu}};
  // At a tie either arrival grows the difference.
  q.w_overrides = {{{0, 1}, 2.0 * lambda}};
  q.u_band = {{-1, lambda}};
  q.d_entries = {{{0, 1}, mu}};
  q.source = "longest-queue";
  LevelBlockChain chain = truncate_chain(q, levels, stages);
  add_load_warning(chain, 2.0 * lambda / mu);
  return chain;
}

LevelBlockChain build_batch_priority(double lambda1, double lambda2,
                                     double mu,
                                     const std::map<int, double>& batch1,
                                     const std::map<int, double>& batch2,
                                     int levels, int stages) {
  require_positive(lambda1, "lambda1");
  require_positive(lambda2, "lambda2");
  require_positive(mu, "mu");
  require_caps(levels, stages);

  if (!(batch2.size() == 1 && batch2.count(1) &&
        std::abs(batch2.at(1) - 1.0) <= 1e-12))
    throw InputError("level-direction batches are limited to single steps: "
                     "batch2 must be {1: 1}");
  if (batch1.empty())
    throw InputError("batch1 must assign probability to at least one size");
  double total = 0;
  for (const auto& [size, p] : batch1) {
    if (size < 1)
      throw InputError("batch sizes must be positive integers, got " +
                       std::to_string(size));
    if (!(p > 0) || !std::isfinite(p))
      throw InputError("batch probabilities must be positive, got " +
                       std::to_string(p) + " for size " +
                       std::to_string(size));
    if (size > stages - 1)
      throw InputError("batch size " + std::to_string(size) +
                       " exceeds the stage cap (max usable size is " +
                       std::to_string(stages - 1) + ")");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw InputError("batch1 probabilities sum to " + std::to_string(total) +
                     ", expected 1");

  UnboundedQbd q;
  q.w_band[-1] = mu;
  double mean = 0;
  for (const auto& [size, p] : batch1) {
    q.w_band[size] = lambda1 * p;
    mean += size * p;
  }
  q.u_band = {{0, lambda2}};
  q.d_entries = {{{0, 0}, mu}};
  q.source = "batch-priority";
  LevelBlockChain chain = truncate_chain(q, levels, stages);
  add_load_warning(chain, (lambda1 * mean + lambda2) / mu);
  return chain;
}

LevelBlockChain build_longest_queue_hetero(double lambda1, double lambda2,
                                           double mu, int cap1, int cap2) {
  require_positive(lambda1, "lambda1");
  require_positive(lambda2, "lambda2");
  require_positive(mu, "mu");
  require_caps(cap1, cap2);
  if (cap1 != cap2)
    throw InputError("the shell partition tiles a square grid only: set "
                     "both truncation caps to the same value");

  // States (n, j), queue lengths on a cap1 x cap2 grid. Level m >= 1 is
  // the L-shaped shell [arm1: (n, m-1), n descending | corner (m, m) |
  // arm2: (m-1, j), j ascending]; level 0 is the empty state alone.
  const int L = std::min(cap1, cap2);
  std::vector<std::vector<std::pair<int, int>>> coords(L);
  coords[0] = {{0, 0}};
  for (int m = 1; m < L; ++m) {
    for (int n = cap1 - 1; n >= m; --n) coords[m].push_back({n, m - 1});
    coords[m].push_back({m, m});
    for (int jj = m; jj <= cap2 - 1; ++jj) coords[m].push_back({m - 1, jj});
  }

  auto level_of = [&](int n, int jj) {
    const int lo = std::min(n, jj);
    return n == jj ? lo : lo + 1;
  };
  std::vector<std::map<std::pair<int, int>, int>> index_of(L);
  for (int m = 0; m < L; ++m)
    for (int i = 0; i < static_cast<int>(coords[m].size()); ++i)
      index_of[m][coords[m][i]] = i;

  std::vector<Matrix> W(L), U(L - 1), D(L - 1);
  for (int m = 0; m < L; ++m) {
    const int s = static_cast<int>(coords[m].size());
    W[m] = Matrix::Zero(s, s);
    if (m + 1 < L) {
      U[m] = Matrix::Zero(s, static_cast<int>(coords[m + 1].size()));
      D[m] = Matrix::Zero(static_cast<int>(coords[m + 1].size()), s);
    }
  }

  auto place = [&](int m, int i, int n2, int j2, double rate) {
    if (n2 < 0 || n2 >= cap1 || j2 < 0 || j2 >= cap2) return; // reflected
    const int m2 = level_of(n2, j2);
    const int i2 = index_of[m2].at({n2, j2});
    if (m2 == m) W[m](i, i2) += rate;
    else if (m2 == m + 1) U[m](i, i2) += rate;
    else if (m2 == m - 1) D[m - 1](i, i2) += rate;
    else
      throw NumericalError("level partition is not quadrant-structured");
  };

  for (int m = 0; m < L; ++m)
    for (int i = 0; i < static_cast<int>(coords[m].size()); ++i) {
      const auto [n, jj] = coords[m][i];
      place(m, i, n + 1, jj, lambda1);
      place(m, i, n, jj + 1, lambda2);
      if (n > jj) place(m, i, n - 1, jj, mu);
      else if (jj > n) place(m, i, n, jj - 1, mu);
      else if (n > 0) {
        // Tie: the server picks either queue with equal odds.
        place(m, i, n - 1, jj, mu / 2);
        place(m, i, n, jj - 1, mu / 2);
      }
    }

  for (int m = 0; m < L; ++m)
    for (int i = 0; i < static_cast<int>(coords[m].size()); ++i) {
      double out = W[m].row(i).sum() - W[m](i, i);
      if (m + 1 < L) out += U[m].row(i).sum();
      if (m >= 1) out += D[m - 1].row(i).sum();
      W[m](i, i) = -out;
    }

  ChainMeta meta;
  meta.source = "longest-queue-hetero";
  meta.level_truncated = true;
  meta.stage_truncated = true;
  LevelBlockChain chain(std::move(W), std::move(U), std::move(D),
                        std::move(meta), std::move(coords));
  add_load_warning(chain, (lambda1 + lambda2) / mu);
  return chain;
}

LevelBlockChain build_chain(const ModelSpec& spec) {
  LevelBlockChain chain = [&] {
    switch (spec.family) {
      case Family::Priority:
        return build_priority(spec.lambda1, spec.lambda2, spec.mu,
                              spec.levels, spec.stages);
      case Family::LongestQueue:
        return build_longest_queue(spec.lambda, spec.mu, spec.levels,
                                   spec.stages);
      case Family::BatchPriority:
        return build_batch_priority(spec.lambda1, spec.lambda2, spec.mu,
                                    spec.batch1, spec.batch2, spec.levels,
                                    spec.stages);
      case Family::LongestQueueHetero:
        return build_longest_queue_hetero(spec.lambda1, spec.lambda2,
                                          spec.mu, spec.levels, spec.stages);
      case Family::Raw: {
        ChainMeta meta;
        meta.source = "raw";
        return LevelBlockChain(spec.raw_W, spec.raw_U, spec.raw_D,
                               std::move(meta));
      }
    }
    throw InputError("unknown model family");
  }();
  return chain;
}

} // namespace slqbd::models
