#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hillclimb/density.hpp"
#include "hillclimb/flow.hpp"
#include "hillclimb/gaussian_mixture.hpp"
#include "hillclimb/kde.hpp"
#include "hillclimb/log.hpp"
#include "hillclimb/medoid.hpp"
#include "hillclimb/parallel.hpp"
#include "hillclimb/point_io.hpp"
#include "hillclimb/shift.hpp"

namespace hillclimb {

// ---------------------------------------------------------------------------
// Mode matching

struct ModeMatching {
  std::vector<int> estimated_to_truth;  // -1 where unmatched
  std::vector<int> truth_to_estimated;
  double bottleneck = 0.0;              // largest matched pair distance
  double hausdorff = 0.0;               // symmetric set distance
  bool cardinality_mismatch = false;
  bool exhaustive = false;              // optimal by enumeration
  bool certified = false;               // bottleneck equals the nearest-neighbour lower bound
};

inline double set_hausdorff(const std::vector<Point>& a, const std::vector<Point>& b) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto directed = [](const std::vector<Point>& from, const std::vector<Point>& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

/// One-to-one matching of the smaller list into the larger one minimizing the
/// largest pair distance (then the sum). Enumerates all injections when there
/// are at most `exhaustive_limit` of them, else matches pairs greedily by
/// distance.
inline ModeMatching match_modes(const std::vector<Point>& estimated, const std::vector<Point>& truth,
                                double exhaustive_limit = 1e6) {
  if (estimated.empty() || truth.empty()) throw InputError("match_modes: empty mode list");
  ModeMatching m;
  m.cardinality_mismatch = estimated.size() != truth.size();
  m.hausdorff = set_hausdorff(estimated, truth);
  const bool est_small = estimated.size() <= truth.size();
  const auto& S = est_small ? estimated : truth;
  const auto& B = est_small ? truth : estimated;
  const std::size_t ns = S.size(), nb = B.size();
  std::vector<std::vector<double>> dist(ns, std::vector<double>(nb));
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nb; ++j) dist[i][j] = (S[i] - B[j]).norm();
  }
  double lower = 0.0;
  for (std::size_t i = 0; i < ns; ++i) lower = std::max(lower, *std::min_element(dist[i].begin(), dist[i].end()));

  double injections = 1.0;
  for (std::size_t i = 0; i < ns; ++i) injections *= static_cast<double>(nb - i);
  std::vector<int> best(ns, -1);
  double best_max = std::numeric_limits<double>::infinity(), best_sum = best_max;
  if (injections <= exhaustive_limit) {
    m.exhaustive = true;
    std::vector<int> cur(ns, -1);
    std::vector<char> used(nb, 0);
    auto dfs = [&](auto&& self, std::size_t i, double cmax, double csum) -> void {
      if (cmax > best_max) return;
      if (i == ns) {
        if (cmax < best_max || (cmax == best_max && csum < best_sum)) {
          best_max = cmax;
          best_sum = csum;
          best = cur;
        }
        return;
      }
      for (std::size_t j = 0; j < nb; ++j) {
        if (used[j]) continue;
        used[j] = 1;
        cur[i] = static_cast<int>(j);
        self(self, i + 1, std::max(cmax, dist[i][j]), csum + dist[i][j]);
        used[j] = 0;
      }
    };
    dfs(dfs, 0, 0.0, 0.0);
  } else {
    struct Pair {
      double d;
      std::size_t i, j;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < nb; ++j) pairs.push_back({dist[i][j], i, j});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      return a.d < b.d || (a.d == b.d && (a.i < b.i || (a.i == b.i && a.j < b.j)));
    });
    std::vector<char> used(nb, 0);
    best_max = 0.0;
    for (const auto& p : pairs) {
      if (best[p.i] >= 0 || used[p.j]) continue;
      best[p.i] = static_cast<int>(p.j);
      used[p.j] = 1;
      best_max = std::max(best_max, p.d);
    }
  }
  m.bottleneck = best_max;
  m.certified = best_max <= lower;
  m.estimated_to_truth.assign(estimated.size(), -1);
  m.truth_to_estimated.assign(truth.size(), -1);
  for (std::size_t i = 0; i < ns; ++i) {
    const int j = best[i];
    if (est_small) {
      m.estimated_to_truth[i] = j;
      m.truth_to_estimated[static_cast<std::size_t>(j)] = static_cast<int>(i);
    } else {
      m.truth_to_estimated[i] = j;
      m.estimated_to_truth[static_cast<std::size_t>(j)] = static_cast<int>(i);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Configuration

enum class AlgorithmId {
  oracle,
  euler,
  euler_log,
  level_shift,
  line_search,
  max_shift,
  max_slope_shift,
  mean_shift,
  medoid_max_shift,
  medoid_max_slope_shift,
  medoid_shift,
  quick_shift,
};

struct AlgorithmInfo {
  const char* name;
  AlgorithmId id;
  std::vector<std::string> sweepable;  // first entry is the default sweep parameter
  std::vector<std::string> fixed;
};

inline const std::vector<AlgorithmInfo>& algorithm_table() {
  static const std::vector<AlgorithmInfo> table = {
      {"oracle", AlgorithmId::oracle, {}, {}},
      {"euler", AlgorithmId::euler, {"rho"}, {"max_iters"}},
      {"euler_log", AlgorithmId::euler_log, {"rho"}, {"max_iters"}},
      {"level_shift", AlgorithmId::level_shift, {"rho", "grad_guard"}, {"max_iters"}},
      {"line_search", AlgorithmId::line_search, {"rho"}, {"max_iters"}},
      {"max_shift", AlgorithmId::max_shift, {"epsilon"}, {"max_iters"}},
      {"max_slope_shift", AlgorithmId::max_slope_shift, {"epsilon", "c"}, {"max_iters", "unregularized"}},
      {"mean_shift", AlgorithmId::mean_shift, {"n", "h"}, {"sample_seed", "profile", "max_iters"}},
      {"medoid_max_shift", AlgorithmId::medoid_max_shift, {"epsilon", "medoid_n", "medoid_spacing"}, {"medoid_seed"}},
      {"medoid_max_slope_shift",
       AlgorithmId::medoid_max_slope_shift,
       {"epsilon", "medoid_n", "medoid_spacing"},
       {"medoid_seed"}},
      {"medoid_shift", AlgorithmId::medoid_shift, {"h", "medoid_n", "medoid_spacing"}, {"medoid_seed", "profile", "form"}},
      {"quick_shift", AlgorithmId::quick_shift, {"epsilon", "medoid_n", "medoid_spacing"}, {"medoid_seed"}},
  };
  return table;
}

/// One algorithm with a parameter sweep. `params` holds the scalar settings;
/// the swept parameter is listed separately and overrides `params` per row.
struct AlgorithmSpec {
  std::string name;
  AlgorithmId id = AlgorithmId::oracle;
  std::string sweep_param;
  std::vector<double> sweep_values;
  nlohmann::json params = nlohmann::json::object();
};

struct StartSpec {
  enum class Type { grid, sample, file } type = Type::grid;
  std::vector<int> resolution{40};
  std::optional<Box> box;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string path;
  double level_floor = 0.01;  // relative to the highest mode value
};

struct ExperimentConfig {
  std::optional<GaussianMixture> model;
  std::string model_file;
  std::vector<AlgorithmSpec> algorithms;
  StartSpec starts;
  nlohmann::json oracle = nlohmann::json::object();
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output;
  bool report_wall_time = false;
  double merge_radius = 0.25;  // endpoint clustering radius, times the mode separation
  double match_radius = 0.5;   // largest accepted estimate-to-mode distance, times the mode separation
};

namespace detail {

/// 1-based line and column of a byte offset.
inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline double positive(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number() || !(v.get<double>() > 0.0) || !std::isfinite(v.get<double>())) {
    throw ConfigError(where, "expected a positive number");
  }
  return v.get<double>();
}

inline std::uint64_t seed_value(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError(where, "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

inline Point json_point(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where, "expected a non-empty array of numbers");
  Point p(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(where + "[" + std::to_string(i) + "]", "expected a number");
    p(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  return p;
}

inline void check_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(where.empty() ? key : where + "." + key, "unknown field");
    }
  }
}

inline AlgorithmSpec parse_algorithm(const nlohmann::json& a, const std::string& where) {
  if (!a.is_object()) throw ConfigError(where, "expected an object");
  check_keys(a, {"name", "params"}, where);
  if (!a.contains("name") || !a["name"].is_string()) throw ConfigError(where + ".name", "expected a string");
  AlgorithmSpec spec;
  spec.name = a["name"].get<std::string>();
  const auto& table = algorithm_table();
  auto it = std::find_if(table.begin(), table.end(), [&](const AlgorithmInfo& i) { return spec.name == i.name; });
  if (it == table.end()) throw ConfigError(where + ".name", "unknown algorithm '" + spec.name + "'");
  spec.id = it->id;
  const nlohmann::json params = a.value("params", nlohmann::json::object());
  const std::string pw = where + ".params";
  if (!params.is_object()) throw ConfigError(pw, "expected an object");
  std::vector<std::string> allowed = it->sweepable;
  allowed.insert(allowed.end(), it->fixed.begin(), it->fixed.end());
  check_keys(params, allowed, pw);

  for (const auto& [key, value] : params.items()) {
    const std::string kw = pw + "." + key;
    if (value.is_array()) {
      if (std::find(it->sweepable.begin(), it->sweepable.end(), key) == it->sweepable.end()) {
        throw ConfigError(kw, "this parameter cannot be swept");
      }
      if (!spec.sweep_param.empty()) {
        throw ConfigError(kw, "only one parameter may be swept (already sweeping '" + spec.sweep_param + "')");
      }
      if (value.empty()) throw ConfigError(kw, "parameter grid must be non-empty");
      spec.sweep_param = key;
      for (std::size_t j = 0; j < value.size(); ++j) {
        spec.sweep_values.push_back(positive(value[j], kw + "[" + std::to_string(j) + "]"));
      }
    } else {
      spec.params[key] = value;
    }
  }
  if (spec.sweep_param.empty() && !it->sweepable.empty()) {
    for (const auto& name : it->sweepable) {
      if (spec.params.contains(name) && spec.params[name].is_number()) {
        spec.sweep_param = name;
        spec.sweep_values.push_back(positive(spec.params[name], pw + "." + name));
        spec.params.erase(name);
        break;
      }
    }
    if (spec.sweep_param.empty()) {
      throw ConfigError(pw + "." + it->sweepable.front(), "required parameter missing");
    }
  }
  // scalar validation
  for (const auto& [key, value] : spec.params.items()) {
    const std::string kw = pw + "." + key;
    if (key == "unregularized") {
      if (!value.is_boolean()) throw ConfigError(kw, "expected true or false");
    } else if (key == "profile") {
      if (!value.is_string()) throw ConfigError(kw, "expected a profile name");
      try {
        (void)KernelProfile::by_name(value.get<std::string>());
      } catch (const InputError& e) {
        throw ConfigError(kw, e.what());
      }
    } else if (key == "form") {
      if (!value.is_string() || (value != "anchored" && value != "printed")) {
        throw ConfigError(kw, "expected \"anchored\" or \"printed\"");
      }
    } else if (key == "h" && value.is_string()) {
      if (value != "scott" && value != "scott_kernel") {
        throw ConfigError(kw, "expected a positive number, \"scott\" or \"scott_kernel\"");
      }
    } else if (key == "sample_seed" || key == "medoid_seed") {
      (void)seed_value(value, kw);
    } else if (key == "max_iters" || key == "n" || key == "medoid_n") {
      if (!value.is_number_integer() || value.get<long long>() < 1) throw ConfigError(kw, "expected a positive integer");
    } else {
      (void)positive(value, kw);
    }
  }
  auto param = [&](const std::string& k) -> std::optional<double> {
    if (spec.sweep_param == k) return spec.sweep_values.front();
    if (spec.params.contains(k) && spec.params[k].is_number()) return spec.params[k].get<double>();
    return std::nullopt;
  };
  if (spec.id == AlgorithmId::level_shift && !param("grad_guard")) {
    throw ConfigError(pw + ".grad_guard", "required parameter missing");
  }
  if (spec.id == AlgorithmId::max_slope_shift) {
    const bool unreg = spec.params.value("unregularized", false);
    const auto c = param("c");
    if (c && !(*c < 1.0)) throw ConfigError(pw + ".c", "slope fraction must lie in (0, 1)");
    if (spec.sweep_param == "c") {
      for (double v : spec.sweep_values) {
        if (!(v < 1.0)) throw ConfigError(pw + ".c", "slope fraction must lie in (0, 1)");
      }
    }
    (void)unreg;
  }
  if (spec.id == AlgorithmId::mean_shift && !param("n")) {
    throw ConfigError(pw + ".n", "sample size required");
  }
  if ((spec.id == AlgorithmId::medoid_max_shift || spec.id == AlgorithmId::medoid_max_slope_shift ||
       spec.id == AlgorithmId::medoid_shift || spec.id == AlgorithmId::quick_shift) &&
      !param("medoid_n") && !param("medoid_spacing")) {
    throw ConfigError(pw + ".medoid_n", "medoid set needs medoid_n or medoid_spacing");
  }
  if (spec.id == AlgorithmId::medoid_shift && !param("h")) throw ConfigError(pw + ".h", "required parameter missing");
  if (spec.id != AlgorithmId::medoid_shift && spec.id != AlgorithmId::oracle && spec.id != AlgorithmId::mean_shift) {
    const std::string main = it->sweepable.front();
    if (!param(main)) throw ConfigError(pw + "." + main, "required parameter missing");
  }
  return spec;
}

inline StartSpec parse_starts(const nlohmann::json& s, int dim) {
  const std::string w = "starts";
  if (!s.is_object()) throw ConfigError(w, "expected an object");
  if (!s.contains("type") || !s["type"].is_string()) throw ConfigError(w + ".type", "expected \"grid\", \"sample\" or \"file\"");
  StartSpec spec;
  const auto type = s["type"].get<std::string>();
  if (s.contains("level_floor")) {
    const auto& v = s["level_floor"];
    if (!v.is_number() || v.get<double>() < 0.0 || v.get<double>() >= 1.0) {
      throw ConfigError(w + ".level_floor", "expected a number in [0, 1)");
    }
    spec.level_floor = v.get<double>();
  }
  if (type == "grid") {
    check_keys(s, {"type", "resolution", "box", "level_floor"}, w);
    spec.type = StartSpec::Type::grid;
    if (!s.contains("resolution")) throw ConfigError(w + ".resolution", "required field missing");
    const auto& r = s["resolution"];
    auto count = [&](const nlohmann::json& v, const std::string& where) {
      if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 100000) {
        throw ConfigError(where, "expected a positive integer");
      }
      return v.get<int>();
    };
    spec.resolution.clear();
    if (r.is_array()) {
      if (static_cast<int>(r.size()) != dim) throw ConfigError(w + ".resolution", "expected one count per dimension");
      for (std::size_t i = 0; i < r.size(); ++i) {
        spec.resolution.push_back(count(r[i], w + ".resolution[" + std::to_string(i) + "]"));
      }
    } else {
      spec.resolution.assign(static_cast<std::size_t>(dim), count(r, w + ".resolution"));
    }
    if (s.contains("box")) {
      const auto& b = s["box"];
      if (!b.is_object()) throw ConfigError(w + ".box", "expected {\"lo\": [...], \"hi\": [...]}");
      check_keys(b, {"lo", "hi"}, w + ".box");
      if (!b.contains("lo") || !b.contains("hi")) throw ConfigError(w + ".box", "expected lo and hi");
      Box box{json_point(b["lo"], w + ".box.lo"), json_point(b["hi"], w + ".box.hi")};
      if (box.lo.size() != dim || box.hi.size() != dim) throw ConfigError(w + ".box", "dimension mismatch");
      if (!(box.hi.array() > box.lo.array()).all()) throw ConfigError(w + ".box", "need lo < hi on every axis");
      spec.box = box;
    }
  } else if (type == "sample") {
    check_keys(s, {"type", "n", "seed", "level_floor"}, w);
    spec.type = StartSpec::Type::sample;
    if (!s.contains("n") || !s["n"].is_number_integer() || s["n"].get<long long>() < 1) {
      throw ConfigError(w + ".n", "expected a positive integer");
    }
    spec.n = s["n"].get<std::size_t>();
    if (s.contains("seed")) spec.seed = seed_value(s["seed"], w + ".seed");
  } else if (type == "file") {
    check_keys(s, {"type", "path", "level_floor"}, w);
    spec.type = StartSpec::Type::file;
    if (!s.contains("path") || !s["path"].is_string()) throw ConfigError(w + ".path", "expected a string");
    spec.path = s["path"].get<std::string>();
  } else {
    throw ConfigError(w + ".type", "expected \"grid\", \"sample\" or \"file\"");
  }
  return spec;
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? p : (base / path).string();
}

}  // namespace detail

/// Parses a JSON experiment configuration. Relative file paths inside it are
/// resolved against `base_dir`. Errors carry a field path or line/column.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::string msg = e.what();
    if (auto pos = msg.find("parse error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError(detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0), msg);
  }
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  detail::check_keys(j,
                     {"model", "model_file", "algorithms", "starts", "oracle", "seed", "threads", "output",
                      "report_wall_time", "merge_radius", "match_radius"},
                     "");
  ExperimentConfig cfg;
  if (j.contains("model") == j.contains("model_file")) {
    throw ConfigError("model", "exactly one of model and model_file is required");
  }
  try {
    if (j.contains("model")) {
      cfg.model = mixture_from_json(j["model"]);
    } else {
      if (!j["model_file"].is_string()) throw ConfigError("model_file", "expected a string");
      cfg.model_file = detail::resolve_path(j["model_file"].get<std::string>(), base_dir);
      cfg.model = load_mixture(cfg.model_file);
    }
  } catch (const InputError& e) {
    throw ConfigError(j.contains("model") ? "model" : "model_file", e.what());
  }
  const int dim = cfg.model->dim();

  if (!j.contains("algorithms") || !j["algorithms"].is_array()) {
    throw ConfigError("algorithms", "expected an array");
  }
  for (std::size_t i = 0; i < j["algorithms"].size(); ++i) {
    cfg.algorithms.push_back(detail::parse_algorithm(j["algorithms"][i], "algorithms[" + std::to_string(i) + "]"));
  }
  if (!j.contains("starts")) throw ConfigError("starts", "required field missing");
  cfg.starts = detail::parse_starts(j["starts"], dim);
  if (cfg.starts.type == StartSpec::Type::file) cfg.starts.path = detail::resolve_path(cfg.starts.path, base_dir);

  if (j.contains("oracle")) {
    const auto& o = j["oracle"];
    if (!o.is_object()) throw ConfigError("oracle", "expected an object");
    detail::check_keys(o, {"rtol", "atol", "initial_step", "max_step", "grad_stop_tol", "max_arc_length",
                           "mode_match_radius", "max_spatial_step", "max_steps"},
                       "oracle");
    for (const auto& [k, v] : o.items()) (void)detail::positive(v, "oracle." + k);
    cfg.oracle = o;
  }
  if (j.contains("seed")) cfg.seed = detail::seed_value(j["seed"], "seed");
  if (j.contains("threads")) {
    if (!j["threads"].is_number_integer() || j["threads"].get<int>() < 1) {
      throw ConfigError("threads", "expected a positive integer");
    }
    cfg.threads = j["threads"].get<int>();
  }
  if (j.contains("output")) {
    if (!j["output"].is_string()) throw ConfigError("output", "expected a string");
    cfg.output = j["output"].get<std::string>();
  }
  if (j.contains("report_wall_time")) {
    if (!j["report_wall_time"].is_boolean()) throw ConfigError("report_wall_time", "expected true or false");
    cfg.report_wall_time = j["report_wall_time"].get<bool>();
  }
  if (j.contains("merge_radius")) cfg.merge_radius = detail::positive(j["merge_radius"], "merge_radius");
  if (j.contains("match_radius")) cfg.match_radius = detail::positive(j["match_radius"], "match_radius");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Shared experiment state

/// Everything derived from the model and start spec, shared by all rows.
struct ExperimentSetup {
  GaussianMixture model;
  ModeList modes;
  SmoothnessBounds bounds;
  FlowConfig flow;
  Box box;                      // start box (grid box or mixture +-3 sigma)
  double level_floor = 0.0;     // absolute
  std::vector<Point> starts;
};

inline FlowConfig apply_oracle_overrides(FlowConfig c, const nlohmann::json& o) {
  if (o.contains("rtol")) c.rtol = o["rtol"].get<double>();
  if (o.contains("atol")) c.atol = o["atol"].get<double>();
  if (o.contains("initial_step")) c.initial_step = o["initial_step"].get<double>();
  if (o.contains("max_step")) c.max_step = o["max_step"].get<double>();
  if (o.contains("grad_stop_tol")) c.grad_stop_tol = o["grad_stop_tol"].get<double>();
  if (o.contains("max_arc_length")) c.max_arc_length = o["max_arc_length"].get<double>();
  if (o.contains("mode_match_radius")) c.mode_match_radius = o["mode_match_radius"].get<double>();
  if (o.contains("max_spatial_step")) c.max_spatial_step = o["max_spatial_step"].get<double>();
  if (o.contains("max_steps")) c.max_steps = o["max_steps"].get<long>();
  return c;
}

inline ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  if (!cfg.model) throw ConfigError("model", "no model");
  ExperimentSetup s{*cfg.model, {}, {}, {}, {}, 0.0, {}};
  s.modes = find_modes(s.model);
  if (s.modes.empty()) throw Error("no modes found for the model");
  s.bounds = estimate_bounds(s.model);
  s.flow = apply_oracle_overrides(FlowConfig::for_model(s.bounds, s.modes, s.model.bounding_box(5.0)), cfg.oracle);
  if (s.modes.size() > 1 && !(s.flow.mode_match_radius < 0.5 * s.modes.min_separation)) {
    throw ConfigError("oracle.mode_match_radius", "must be below half the mode separation");
  }
  s.box = cfg.starts.box ? *cfg.starts.box : s.model.bounding_box(3.0);
  s.level_floor = cfg.starts.level_floor * s.modes.max_value();
  std::vector<Point> raw;
  switch (cfg.starts.type) {
    case StartSpec::Type::grid:
      raw = make_grid(s.box, cfg.starts.resolution);
      break;
    case StartSpec::Type::sample:
      raw = s.model.sample(cfg.starts.n, cfg.starts.seed);
      break;
    case StartSpec::Type::file:
      raw = read_points_csv(cfg.starts.path);
      for (const auto& p : raw) {
        if (p.size() != s.model.dim()) throw ConfigError("starts.path", "start points do not match the model dimension");
      }
      break;
  }
  for (auto& p : raw) {
    if (s.model.value(p) >= s.level_floor) s.starts.push_back(std::move(p));
  }
  return s;
}

/// Oracle verdicts for every start, computed in parallel.
inline std::vector<BasinAssignment> run_oracle(const ExperimentSetup& s, int threads) {
  std::vector<BasinAssignment> out(s.starts.size());
  parallel_for(s.starts.size(), threads, [&](std::size_t i) {
    try {
      out[i] = assign_basin(s.model, s.starts[i], s.modes, s.flow);
    } catch (const Error& e) {
      out[i] = BasinAssignment{};
      out[i].endpoint = s.starts[i];
      out[i].terminal = {TerminalKind::stalled, -1};
    }
  });
  return out;
}

/// Per-start CSV: x0..,mode,e0..,arc_length,status (mode -1 when unresolved).
inline void write_oracle_csv(std::ostream& out, const ExperimentSetup& s, const std::vector<BasinAssignment>& a) {
  const int d = s.model.dim();
  for (int j = 0; j < d; ++j) out << (j ? ",x" : "x") << j;
  out << ",mode";
  for (int j = 0; j < d; ++j) out << ",e" << j;
  out << ",arc_length,status\n";
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int j = 0; j < d; ++j) out << (j ? "," : "") << format_double(s.starts[i](j));
    out << ',' << a[i].mode;
    for (int j = 0; j < d; ++j) out << ',' << format_double(a[i].endpoint(j));
    out << ',' << format_double(a[i].arc_length) << ',' << a[i].terminal.to_string() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Report

struct ReportRow {
  std::string algorithm;
  std::string param_name;
  double param_value = 0.0;
  long n_starts = 0;
  long n_resolved = 0;
  double agreement_fraction = 0.0;
  double mode_hausdorff = 0.0;
  long violations_monotone = 0;
  long violations_steplaw = 0;
  long violations_angle = 0;
  double wall_time_s = 0.0;

  bool operator==(const ReportRow& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return algorithm == o.algorithm && param_name == o.param_name && same(param_value, o.param_value) &&
           n_starts == o.n_starts && n_resolved == o.n_resolved && same(agreement_fraction, o.agreement_fraction) &&
           same(mode_hausdorff, o.mode_hausdorff) && violations_monotone == o.violations_monotone &&
           violations_steplaw == o.violations_steplaw && violations_angle == o.violations_angle &&
           same(wall_time_s, o.wall_time_s);
  }
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  long failed_runs = 0;  // per-start algorithm errors (counted as disagreement)
};

inline constexpr const char* kReportHeader =
    "algorithm,param_name,param_value,n_starts,n_resolved,agreement_fraction,mode_hausdorff,violations_monotone,"
    "violations_steplaw,violations_angle,wall_time_s";

inline void emit_report(const ExperimentReport& r, std::ostream& out) {
  out << kReportHeader << '\n';
  for (const auto& row : r.rows) {
    out << row.algorithm << ',' << row.param_name << ',' << format_double(row.param_value) << ',' << row.n_starts
        << ',' << row.n_resolved << ',' << format_double(row.agreement_fraction) << ','
        << format_double(row.mode_hausdorff) << ',' << row.violations_monotone << ',' << row.violations_steplaw << ','
        << row.violations_angle << ',' << format_double(row.wall_time_s) << '\n';
  }
}

inline void emit_report(const ExperimentReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report to '" + path + "'");
  emit_report(r, out);
  if (!out) throw Error("write failed for '" + path + "'");
}

namespace detail {

inline double parse_double_field(const std::string& s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError("report line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

inline long parse_long_field(const std::string& s, std::size_t line) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError("report line " + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline ExperimentReport parse_report(std::istream& in) {
  ExperimentReport r;
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) throw InputError("report: missing or unexpected header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 11) throw InputError("report line " + std::to_string(lineno) + ": expected 11 fields");
    ReportRow row;
    row.algorithm = f[0];
    row.param_name = f[1];
    row.param_value = detail::parse_double_field(f[2], lineno);
    row.n_starts = detail::parse_long_field(f[3], lineno);
    row.n_resolved = detail::parse_long_field(f[4], lineno);
    row.agreement_fraction = detail::parse_double_field(f[5], lineno);
    row.mode_hausdorff = detail::parse_double_field(f[6], lineno);
    row.violations_monotone = detail::parse_long_field(f[7], lineno);
    row.violations_steplaw = detail::parse_long_field(f[8], lineno);
    row.violations_angle = detail::parse_long_field(f[9], lineno);
    row.wall_time_s = detail::parse_double_field(f[10], lineno);
    r.rows.push_back(std::move(row));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Running

/// Outcome of one algorithm run from one start.
struct StartOutcome {
  Point endpoint;
  double value = 0.0;   // climbed function at the endpoint
  bool usable = false;  // finished normally (not failed, capped or stalled)
  bool failed = false;
  long violations_monotone = 0;
  long violations_steplaw = 0;
  long violations_angle = 0;
};

/// Endpoint clusters: endpoints are visited in start order and join the first
/// cluster whose seed lies within `radius`; each cluster is represented by its
/// member with the largest climbed value (smallest start index on ties).
struct EndpointClusters {
  std::vector<int> cluster_of;   // per start, -1 for unusable outcomes
  std::vector<Point> representatives;
};

inline EndpointClusters cluster_endpoints(const std::vector<StartOutcome>& out, double radius) {
  EndpointClusters c;
  c.cluster_of.assign(out.size(), -1);
  std::vector<Point> seeds;
  std::vector<double> best_value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].usable) continue;
    int k = -1;
    for (std::size_t j = 0; j < seeds.size(); ++j) {
      if ((out[i].endpoint - seeds[j]).norm() <= radius) {
        k = static_cast<int>(j);
        break;
      }
    }
    if (k < 0) {
      seeds.push_back(out[i].endpoint);
      c.representatives.push_back(out[i].endpoint);
      best_value.push_back(out[i].value);
      k = static_cast<int>(seeds.size()) - 1;
    } else if (out[i].value > best_value[static_cast<std::size_t>(k)]) {
      best_value[static_cast<std::size_t>(k)] = out[i].value;
      c.representatives[static_cast<std::size_t>(k)] = out[i].endpoint;
    }
    c.cluster_of[i] = k;
  }
  return c;
}

namespace detail {

inline double param_or(const AlgorithmSpec& a, const std::string& name, double value, double fallback) {
  if (a.sweep_param == name) return value;
  if (a.params.contains(name) && a.params[name].is_number()) return a.params[name].get<double>();
  return fallback;
}

inline long iters_param(const AlgorithmSpec& a, long fallback) {
  return a.params.contains("max_iters") ? a.params["max_iters"].get<long>() : fallback;
}

template <typename Fn>
void run_guarded(StartOutcome& o, Fn&& fn) {
  try {
    fn();
  } catch (const Error&) {
    o = StartOutcome{};
    o.failed = true;
  }
}

inline void record(StartOutcome& o, const Trajectory& t, bool stalled_ok, const PropertyReport& r) {
  o.endpoint = t.endpoint();
  o.value = t.f_values.back();
  const auto k = t.terminal.kind;
  o.usable = k == TerminalKind::converged || k == TerminalKind::converged_to_mode ||
             k == TerminalKind::near_critical || (stalled_ok && k == TerminalKind::stalled);
  o.violations_monotone = r.violations_monotone;
  o.violations_steplaw = r.violations_steplaw;
  o.violations_angle = r.violations_angle;
}

inline std::vector<StartOutcome> run_continuous(const ExperimentSetup& s, const AlgorithmSpec& a, double value,
                                                int threads) {
  std::vector<StartOutcome> out(s.starts.size());
  ShiftConfig c = ShiftConfig::for_model(s.bounds, param_or(a, a.id == AlgorithmId::max_shift ||
                                                                       a.id == AlgorithmId::max_slope_shift
                                                                   ? "epsilon"
                                                                   : "rho",
                                                               value, 0.0));
  c.stop.max_iters = iters_param(a, c.stop.max_iters);
  ShiftKind kind = ShiftKind::euler;
  switch (a.id) {
    case AlgorithmId::euler:
      kind = ShiftKind::euler;
      if (c.step * s.bounds.kappa2 >= 2.0) {
        log(LogLevel::warning, "euler: rho = " + format_double(c.step) + " >= 2/kappa2 = " +
                                   format_double(2.0 / s.bounds.kappa2) + ", iterates may oscillate or diverge");
      }
      break;
    case AlgorithmId::euler_log:
      kind = ShiftKind::euler_variant;
      c.phi = [](double f) { return 1.0 / f; };
      break;
    case AlgorithmId::level_shift:
      kind = ShiftKind::level;
      c.grad_guard = param_or(a, "grad_guard", value, 0.0);
      break;
    case AlgorithmId::line_search: kind = ShiftKind::line_search; break;
    case AlgorithmId::max_shift: kind = ShiftKind::max_shift; break;
    case AlgorithmId::max_slope_shift:
      kind = ShiftKind::max_slope_shift;
      c.slope_fraction = param_or(a, "c", value, 0.5);
      c.unregularized = a.params.value("unregularized", false);
      break;
    default: throw InputError("run_continuous: not a continuous algorithm");
  }
  const auto diag = DiagnosticsConfig::from(kind, c, s.bounds);
  parallel_for(s.starts.size(), threads, [&](std::size_t i) {
    run_guarded(out[i], [&] {
      Trajectory t;
      switch (kind) {
        case ShiftKind::euler: t = euler_shift(s.model, s.starts[i], c); break;
        case ShiftKind::euler_variant: t = euler_shift_variant(s.model, s.starts[i], c); break;
        case ShiftKind::level: t = level_shift(s.model, s.starts[i], c); break;
        case ShiftKind::line_search: t = line_search_shift(s.model, s.starts[i], c); break;
        case ShiftKind::max_shift: t = max_shift(s.model, s.starts[i], c); break;
        case ShiftKind::max_slope_shift: t = max_slope_shift(s.model, s.starts[i], c); break;
        case ShiftKind::mean_shift: break;
      }
      record(out[i], t, kind == ShiftKind::level, step_diagnostics(t, s.model, diag));
    });
  });
  return out;
}

inline KernelProfile profile_param(const AlgorithmSpec& a) {
  return KernelProfile::by_name(a.params.value("profile", std::string("triweight")));
}

inline std::vector<StartOutcome> run_mean_shift(const ExperimentSetup& s, const AlgorithmSpec& a, double value,
                                                std::uint64_t seed, int threads) {
  const auto n = static_cast<std::size_t>(param_or(a, "n", value, 0.0));
  const std::uint64_t sample_seed = a.params.contains("sample_seed") ? a.params["sample_seed"].get<std::uint64_t>() : seed;
  auto sample = s.model.sample(n, sample_seed);
  const KernelProfile profile = profile_param(a);
  const double h = a.sweep_param == "h" ? value
                   : (a.params.contains("h") && a.params["h"].is_number())
                       ? a.params["h"].get<double>()
                       : rule_bandwidth(sample, a.params.value("h", std::string("scott")), profile);
  const Kde K(std::move(sample), h, profile);
  const ShadowKde L = make_shadow(K);
  MeanShiftConfig mc;
  mc.max_iters = iters_param(a, mc.max_iters);
  DiagnosticsConfig diag;
  diag.kind = ShiftKind::mean_shift;
  diag.step = L.step();
  diag.bandwidth = h;
  const int per_axis = s.model.dim() == 1 ? 2001 : (s.model.dim() == 2 ? 101 : 21);
  diag.bounds = estimate_bounds(L.kde, s.box, per_axis);
  std::vector<StartOutcome> out(s.starts.size());
  parallel_for(s.starts.size(), threads, [&](std::size_t i) {
    run_guarded(out[i], [&] {
      const Trajectory t = mean_shift(K, L, s.starts[i], mc);
      record(out[i], t, false, step_diagnostics(t, L.kde, diag));
    });
  });
  return out;
}

inline std::vector<StartOutcome> run_medoid(const ExperimentSetup& s, const AlgorithmSpec& a, double value,
                                            std::uint64_t seed, int threads) {
  std::vector<Point> pts;
  if (a.sweep_param == "medoid_spacing" || (a.sweep_param != "medoid_n" && a.params.contains("medoid_spacing"))) {
    const double g = param_or(a, "medoid_spacing", value, 0.0);
    std::vector<int> counts;
    for (int j = 0; j < s.box.dim(); ++j) {
      counts.push_back(static_cast<int>(std::floor((s.box.hi(j) - s.box.lo(j)) / g + 1e-9)) + 1);
    }
    Box b = s.box;
    for (int j = 0; j < b.dim(); ++j) b.hi(j) = b.lo(j) + g * (counts[static_cast<std::size_t>(j)] - 1);
    pts = make_grid(b, counts);
  } else {
    const auto n = static_cast<std::size_t>(param_or(a, "medoid_n", value, 0.0));
    const std::uint64_t ms = a.params.contains("medoid_seed") ? a.params["medoid_seed"].get<std::uint64_t>() : seed;
    pts = s.model.sample(n, ms);
  }
  const double radius = a.id == AlgorithmId::medoid_shift ? param_or(a, "h", value, 0.0)
                                                          : param_or(a, "epsilon", value, 0.0);
  const MedoidSet Y = MedoidSet::from_model(std::move(pts), s.model, radius);
  const KernelProfile prof = profile_param(a);
  const auto form = a.params.value("form", std::string("anchored")) == "printed" ? MedoidShiftForm::printed
                                                                                 : MedoidShiftForm::anchored;
  std::vector<StartOutcome> out(s.starts.size());
  parallel_for(s.starts.size(), threads, [&](std::size_t i) {
    run_guarded(out[i], [&] {
      MedoidPath<Point> p;
      switch (a.id) {
        case AlgorithmId::medoid_max_shift: p = medoid_max_shift(Y, s.starts[i], radius); break;
        case AlgorithmId::medoid_max_slope_shift: p = medoid_max_slope_shift(Y, s.starts[i], radius); break;
        case AlgorithmId::quick_shift: p = quick_shift(Y, s.starts[i], radius); break;
        default: p = medoid_shift(Y, s.starts[i], radius, prof, form); break;
      }
      auto& o = out[i];
      o.endpoint = endpoint(Y, p);
      o.value = p.f_values.back();
      o.usable = p.terminal.kind == TerminalKind::converged;
      if (a.id != AlgorithmId::medoid_shift) {
        const bool snapped = a.id == AlgorithmId::medoid_max_shift && !is_medoid(Y, s.starts[i]);
        const auto r = medoid_diagnostics(Y, p, radius, snapped);
        o.violations_monotone = r.violations_monotone;
        if (a.id == AlgorithmId::medoid_max_shift) {
          o.violations_steplaw = r.violations_alternating + (r.endpoint_certified ? 0 : 1);
        }
      }
    });
  });
  return out;
}

}  // namespace detail

/// Runs one (algorithm, parameter) row against cached oracle verdicts.
inline ReportRow run_row(const ExperimentConfig& cfg, const ExperimentSetup& s,
                         const std::vector<BasinAssignment>& oracle, const AlgorithmSpec& a, double value,
                         int threads, long* failed = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<StartOutcome> out;
  switch (a.id) {
    case AlgorithmId::oracle:
      out.resize(s.starts.size());
      for (std::size_t i = 0; i < s.starts.size(); ++i) {
        out[i].endpoint = oracle[i].endpoint;
        out[i].value = s.model.value(oracle[i].endpoint);
        out[i].usable = oracle[i].terminal.finished();
      }
      break;
    case AlgorithmId::mean_shift:
      out = detail::run_mean_shift(s, a, value, cfg.seed, threads);
      break;
    case AlgorithmId::medoid_max_shift:
    case AlgorithmId::medoid_max_slope_shift:
    case AlgorithmId::medoid_shift:
    case AlgorithmId::quick_shift:
      out = detail::run_medoid(s, a, value, cfg.seed, threads);
      break;
    default:
      out = detail::run_continuous(s, a, value, threads);
      break;
  }
  const double sep = std::isfinite(s.modes.min_separation) ? s.modes.min_separation : s.box.diameter();
  const auto clusters = cluster_endpoints(out, cfg.merge_radius * sep);
  std::vector<int> cluster_mode(clusters.representatives.size(), -1);
  ReportRow row;
  row.algorithm = a.name;
  row.param_name = a.sweep_param;
  row.param_value = a.sweep_param.empty() ? 0.0 : value;
  row.n_starts = static_cast<long>(s.starts.size());
  if (!clusters.representatives.empty()) {
    const auto m = match_modes(clusters.representatives, s.modes.modes);
    row.mode_hausdorff = m.hausdorff;
    for (std::size_t k = 0; k < cluster_mode.size(); ++k) {
      const int t = m.estimated_to_truth[k];
      if (t >= 0 && (clusters.representatives[k] - s.modes.modes[static_cast<std::size_t>(t)]).norm() <=
                        cfg.match_radius * sep) {
        cluster_mode[k] = t;
      }
    }
  } else {
    row.mode_hausdorff = std::numeric_limits<double>::infinity();
  }
  long agree = 0, fails = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    fails += out[i].failed;
    row.violations_monotone += out[i].violations_monotone;
    row.violations_steplaw += out[i].violations_steplaw;
    row.violations_angle += out[i].violations_angle;
    if (!oracle[i].resolved()) continue;
    ++row.n_resolved;
    const int k = clusters.cluster_of[i];
    if (k >= 0 && cluster_mode[static_cast<std::size_t>(k)] == oracle[i].mode) ++agree;
  }
  row.agreement_fraction = row.n_resolved > 0 ? static_cast<double>(agree) / static_cast<double>(row.n_resolved) : 0.0;
  if (cfg.report_wall_time) {
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  if (fails > 0) {
    log(LogLevel::warning, a.name + " (" + a.sweep_param + " = " + format_double(value) + "): " +
                               std::to_string(fails) + " start(s) raised errors");
  }
  if (failed) *failed += fails;
  return row;
}

/// Full sweep. `threads_override` > 0 replaces the configured worker count.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, int threads_override = 0) {
  const int threads = threads_override > 0 ? threads_override : cfg.threads;
  const ExperimentSetup s = prepare_experiment(cfg);
  const auto oracle = run_oracle(s, threads);
  ExperimentReport report;
  for (const auto& a : cfg.algorithms) {
    if (a.sweep_values.empty()) {
      report.rows.push_back(run_row(cfg, s, oracle, a, 0.0, threads, &report.failed_runs));
    } else {
      for (double v : a.sweep_values) report.rows.push_back(run_row(cfg, s, oracle, a, v, threads, &report.failed_runs));
    }
  }
  return report;
}

/// Per algorithm, whether agreement is nondecreasing along its listed sweep.
struct SweepTrend {
  std::string algorithm;
  std::string param_name;
  std::vector<double> params;
  std::vector<double> agreement;
  bool nondecreasing = true;
};

inline std::vector<SweepTrend> sweep_trends(const ExperimentReport& r) {
  std::vector<SweepTrend> out;
  for (const auto& row : r.rows) {
    if (out.empty() || out.back().algorithm != row.algorithm || out.back().param_name != row.param_name) {
      out.push_back({row.algorithm, row.param_name, {}, {}, true});
    }
    auto& t = out.back();
    if (!t.agreement.empty() && row.agreement_fraction < t.agreement.back()) t.nondecreasing = false;
    t.params.push_back(row.param_value);
    t.agreement.push_back(row.agreement_fraction);
  }
  return out;
}

}  // namespace hillclimb
