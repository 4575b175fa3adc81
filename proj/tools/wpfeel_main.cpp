#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "wpfeel/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Convergence bounds and simulation for wirelessly powered federated edge learning"};
  std::string mode = "analyze";
  std::string config;
  std::string sweep;
  std::string seeds = "1";
  std::string out = "out";
  int workers = 0;
  app.add_option("--mode", mode, "analyze | simulate | validate")->required();
  app.add_option("--config", config, "scenario file (key = value)");
  app.add_option("--sweep", sweep, "var:lo:hi:n:log|lin with var in lambda_energy, P0, compute_energy_rate, N0");
  app.add_option("--seeds", seeds, "comma list or ranges, e.g. 1-5,9");
  app.add_option("--out", out, "output directory");
  app.add_option("--workers", workers, "worker threads (0: OpenMP default)");
  CLI11_PARSE(app, argc, argv);

  try {
    wpfeel::experiment::ExperimentSpec spec;
    spec.mode = wpfeel::experiment::parse_mode(mode);
    spec.config = config;
    if (!sweep.empty()) spec.sweep = wpfeel::experiment::parse_sweep(sweep);
    spec.seeds = wpfeel::experiment::parse_seeds(seeds);
    spec.out_dir = out;
    spec.workers = workers;
    const auto result = wpfeel::experiment::run(spec);
    for (const auto& a : result.artifacts) std::printf("%s/%s\n", out.c_str(), a.c_str());
    if (!result.message.empty()) std::fprintf(stderr, "wpfeel: %s\n", result.message.c_str());
    return result.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "wpfeel: %s\n", e.what());
    return 2;
  }
}
