#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "oddm/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"oddm: optical dot-product link and equalizer experiments"};
  oddm::ExperimentSpec spec;
  spec.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool list = false;
  app.add_option("experiment", spec.name, "experiment name");
  app.add_option("--config", spec.config_path, "JSON config file (defaults if omitted)");
  app.add_option("--out", spec.out_dir, "output directory");
  app.add_option("--seed", spec.seed, "base RNG seed");
  app.add_option("--repeats", spec.repeats, "Monte-Carlo repeats per sweep point")->check(CLI::PositiveNumber);
  app.add_option("--jobs", spec.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--list", list, "print experiment names");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (list || spec.name.empty()) {
    for (const auto& n : oddm::experiment_names()) std::cout << n << '\n';
    return list ? 0 : 2;
  }
  bool known = false;
  for (const auto& n : oddm::experiment_names()) known = known || n == spec.name;
  if (!known) {
    std::cerr << "oddm: unknown experiment '" << spec.name << "'; known:";
    for (const auto& n : oddm::experiment_names()) std::cerr << ' ' << n;
    std::cerr << '\n';
    return 2;
  }

  oddm::RunConfig cfg;
  try {
    cfg = spec.config_path.empty() ? oddm::default_config() : oddm::load_config(spec.config_path);
  } catch (const oddm::config_error& e) {
    std::cerr << "oddm: config error: " << e.what() << '\n';
    return 1;
  }

  try {
    const auto out = oddm::run_experiment(spec, cfg);
    int fails = 0;
    for (const auto& c : out.checks) fails += c.pass() ? 0 : 1;
    std::cout << spec.name << ": " << out.files.size() << " files, " << out.checks.size()
              << " reference comparisons, " << fails << " outside tolerance, " << out.wall_time_s
              << " s -> " << spec.out_dir << '\n';
  } catch (const oddm::config_error& e) {
    std::cerr << "oddm: config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "oddm: invalid configuration: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "oddm: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
