// Command-line front end for the experiment harness.
//
//   hillclimb run <config> [-o report.csv] [--threads N]
//   hillclimb sweep <config> [-o report.csv] [--threads N]
//   hillclimb oracle <config> [-o oracle.csv] [--threads N]
//   hillclimb modes <model.json>
//   hillclimb sample <model.json> -n N --seed S -o points.csv
//   hillclimb trace <model.json> --algorithm NAME --param P --start x,y [-o trace.csv]
//
// Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.

#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hillclimb.hpp"

namespace {

using namespace hillclimb;

int write_or_print(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return 0;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  fn(out);
  return 0;
}

ExperimentReport run_and_write(const std::string& config, const std::string& out_override, int threads) {
  const ExperimentConfig cfg = load_config(config);
  const ExperimentReport report = run_experiment(cfg, threads);
  const std::string path = out_override.empty() ? cfg.output : out_override;
  write_or_print(path, [&](std::ostream& o) { emit_report(report, o); });
  return report;
}

Point parse_start(const std::string& text, int dim) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    double x = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), x);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) throw ConfigError("--start", "bad number '" + cell + "'");
    v.push_back(x);
  }
  if (static_cast<int>(v.size()) != dim) throw ConfigError("--start", "expected " + std::to_string(dim) + " coordinates");
  return Eigen::Map<Point>(v.data(), dim);
}

Trajectory trace(const GaussianMixture& m, const std::string& alg, double param, const Point& x0) {
  const auto b = estimate_bounds(m);
  ShiftConfig c = ShiftConfig::for_model(b, param);
  if (alg == "euler") return euler_shift(m, x0, c);
  if (alg == "euler_log") {
    c.phi = [](double f) { return 1.0 / f; };
    return euler_shift_variant(m, x0, c);
  }
  if (alg == "line_search") return line_search_shift(m, x0, c);
  if (alg == "max_shift") return max_shift(m, x0, c);
  if (alg == "max_slope_shift") return max_slope_shift(m, x0, c);
  if (alg == "oracle") {
    const auto modes = find_modes(m);
    return integrate_flow(m, x0, modes, FlowConfig::for_model(b, modes, m.bounding_box(5.0)));
  }
  throw ConfigError("--algorithm", "unknown algorithm '" + alg + "'");
}

}  // namespace

int main(int argc, char** argv) {
  // accept the single-dash spelling "-seed"
  std::vector<std::string> args(argv, argv + argc);
  for (auto& a : args) {
    if (a == "-seed") a = "--seed";
  }
  std::vector<char*> cargs;
  for (auto& a : args) cargs.push_back(a.data());

  CLI::App app{"Hill-climbing mode-seeking algorithms and their gradient-flow oracle"};
  app.require_subcommand(1);
  std::string config, model_file, out, algorithm = "max_shift", start;
  int threads = 0;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double param = 0.05;

  auto* run = app.add_subcommand("run", "Run the configured sweep and write the report CSV");
  auto* sweep = app.add_subcommand("sweep", "Run the sweep and summarize agreement trends");
  auto* oracle = app.add_subcommand("oracle", "Per-start oracle basin assignments as CSV");
  for (auto* sc : {run, sweep, oracle}) {
    sc->add_option("config", config, "Experiment config (JSON)")->required();
    sc->add_option("-o,--output", out, "Output path (default: config output, or stdout)");
    sc->add_option("-t,--threads", threads, "Worker threads (default: config value)")->check(CLI::PositiveNumber);
  }
  auto* modes = app.add_subcommand("modes", "List the modes of a mixture");
  modes->add_option("model", model_file, "Mixture file (JSON)")->required();
  auto* sample = app.add_subcommand("sample", "Draw points from a mixture");
  sample->add_option("model", model_file, "Mixture file (JSON)")->required();
  sample->add_option("-n", n, "Number of points")->required()->check(CLI::PositiveNumber);
  sample->add_option("-s,--seed", seed, "RNG seed");
  sample->add_option("-o,--output", out, "Output CSV (default stdout)");
  auto* tr = app.add_subcommand("trace", "Dump one trajectory as CSV");
  tr->add_option("model", model_file, "Mixture file (JSON)")->required();
  tr->add_option("-a,--algorithm", algorithm, "euler, euler_log, line_search, max_shift, max_slope_shift, oracle");
  tr->add_option("-p,--param", param, "Step size rho or neighborhood epsilon")->check(CLI::PositiveNumber);
  tr->add_option("--start", start, "Start point, comma separated")->required();
  tr->add_option("-o,--output", out, "Output CSV (default stdout)");

  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      run_and_write(config, out, threads);
    } else if (*sweep) {
      const auto report = run_and_write(config, out, threads);
      for (const auto& t : sweep_trends(report)) {
        std::cout << t.algorithm << " " << (t.param_name.empty() ? "-" : t.param_name) << ":";
        for (std::size_t i = 0; i < t.params.size(); ++i) {
          std::cout << (i ? " ->" : "") << " " << format_double(t.params[i]) << " (" << format_double(t.agreement[i])
                    << ")";
        }
        std::cout << (t.nondecreasing ? "  nondecreasing\n" : "  DECREASING\n");
      }
    } else if (*oracle) {
      const auto cfg = load_config(config);
      const auto setup = prepare_experiment(cfg);
      const auto a = run_oracle(setup, threads > 0 ? threads : cfg.threads);
      write_or_print(out, [&](std::ostream& o) { write_oracle_csv(o, setup, a); });
    } else if (*modes) {
      const auto m = load_mixture(model_file);
      const auto list = find_modes(m);
      std::cout << "index";
      for (int j = 0; j < m.dim(); ++j) std::cout << ",x" << j;
      std::cout << ",f,max_hessian_eigenvalue\n";
      for (std::size_t i = 0; i < list.size(); ++i) {
        std::cout << i;
        for (int j = 0; j < m.dim(); ++j) std::cout << ',' << format_double(list.modes[i](j));
        std::cout << ',' << format_double(list.values[i]) << ',' << format_double(list.max_hessian_eigenvalues[i])
                  << '\n';
      }
    } else if (*sample) {
      const auto m = load_mixture(model_file);
      const auto pts = m.sample(n, seed);
      write_or_print(out, [&](std::ostream& o) { write_points_csv(o, pts); });
    } else if (*tr) {
      const auto m = load_mixture(model_file);
      const auto t = trace(m, algorithm, param, parse_start(start, m.dim()));
      write_or_print(out, [&](std::ostream& o) { write_trajectory_csv(o, t); });
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
