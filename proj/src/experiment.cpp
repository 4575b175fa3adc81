#include "wpfeel/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "wpfeel/analysis.hpp"
#include "wpfeel/csv.hpp"
#include "wpfeel/kernels.hpp"
#include "wpfeel/montecarlo.hpp"
#include "wpfeel/task.hpp"
#include "wpfeel/validation.hpp"

namespace wpfeel::experiment {

namespace {

using nlohmann::json;

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(std::string(what) + ": not a number: '" + s + "'");
  }
}

std::uint64_t to_u64(const std::string& s, std::string_view what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(std::string(what) + ": not a nonnegative integer: '" + s + "'");
  return std::stoull(s);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string grid_tag(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "g%03zu", i);
  return buf;
}

mc::TaskShape shape_of(const Scenario& s) {
  mc::TaskShape shape;
  shape.num_devices = s.system.num_devices;
  shape.samples_per_device = s.devices.samples_per_device;
  shape.feature_dim = s.task.feature_dim;
  shape.num_classes = s.task.num_classes;
  shape.noise_scale = s.task.noise_scale;
  shape.class_separation = s.task.class_separation;
  shape.test_size = s.task.test_size;
  return shape;
}

// With an automatic step size the smoothness constant is taken from the task.
void resolve_learning_rate(Scenario& s, double smoothness_bound) {
  if (!s.learning_rate_auto) return;
  s.system.smoothness = smoothness_bound;
  s.system.learning_rate = 1.0 / smoothness_bound;
}

analysis::BoundReport evaluate_bound(const Scenario& s, std::span<const DeviceProfile> devices,
                                     const analysis::LossMeta& loss) {
  if (const auto* b = std::get_if<BeaconSource>(&s.source))
    return analysis::convergence_bound_beacon(s.system, devices, *b, loss);
  return analysis::convergence_bound_server(s.system, devices, std::get<ServerSource>(s.source), loss);
}

std::vector<double> grid_values(const ExperimentSpec& spec) {
  if (!spec.sweep) return {std::nan("")};
  return spec.sweep->points();
}

Scenario scenario_at(const Scenario& base, const ExperimentSpec& spec, double value) {
  if (!spec.sweep) return base;
  return apply_sweep_value(base, spec.sweep->variable, value);
}

RunResult run_analyze(const ExperimentSpec& spec, const Scenario& base, std::vector<std::string>& artifacts) {
  Scenario resolved = base;
  if (base.learning_rate_auto) {
    const auto task = mc::build_task(base.task.seed, shape_of(base));
    resolve_learning_rate(resolved, mc::smoothness_upper_bound(task));
  }
  const auto values = grid_values(spec);
  std::vector<analysis::BoundReport> reports(values.size());
  kernels::for_each_index(values.size(), kernels::Execution::with_workers(spec.workers), [&](std::size_t i) {
    const Scenario s = scenario_at(resolved, spec, values[i]);
    const auto devices = make_devices(s.devices, s.system.num_devices);
    const analysis::LossMeta loss{s.initial_gap, s.system.smoothness, s.system.grad_norm_bound};
    reports[i] = evaluate_bound(s, devices, loss);
  });
  write_file(spec.out_dir / "bounds.csv", csv::bounds_table(reports));
  artifacts.push_back("bounds.csv");

  RunResult result;
  const bool energy_axis = spec.sweep && (spec.sweep->variable == "lambda_energy" || spec.sweep->variable == "P0");
  if (energy_axis) {
    std::vector<analysis::BoundReport> eligible;
    for (const auto& r : reports)
      if (r.outage_prob < 1e-6) eligible.push_back(r);
    double slope = std::nan("");
    double decades = 0.0;
    if (!eligible.empty()) {
      decades = std::log10(eligible.back().energy_knob / eligible.front().energy_knob);
      try {
        slope = analysis::scaling_exponent(eligible);
      } catch (const analysis::PreconditionError& e) {
        result.message = std::string("scaling fit skipped: ") + e.what();
      }
    }
    write_file(spec.out_dir / "scaling_fit.csv",
               csv::scaling_table(spec.sweep->variable, slope, eligible.size(), std::abs(decades)));
    artifacts.push_back("scaling_fit.csv");
  }
  return result;
}

RunResult run_simulate(const ExperimentSpec& spec, const Scenario& base, std::vector<std::string>& artifacts) {
  const auto task = mc::build_task(base.task.seed, shape_of(base));
  Scenario resolved = base;
  resolve_learning_rate(resolved, mc::smoothness_upper_bound(task));
  const auto values = grid_values(spec);
  struct Job {
    std::size_t grid;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < values.size(); ++g)
    for (auto seed : spec.seeds) jobs.push_back({g, seed});

  struct Outcome {
    double avg_grad_norm, test_accuracy, mean_deviation, final_loss;
    int idle_rounds;
  };
  std::vector<Outcome> outcomes(jobs.size());
  kernels::for_each_index(jobs.size(), kernels::Execution::with_workers(spec.workers), [&](std::size_t j) {
    const Job job = jobs[j];
    const Scenario s = scenario_at(resolved, spec, values[job.grid]);
    const auto devices = make_devices(s.devices, s.system.num_devices);
    mc::RunOptions opts;
    opts.exec = kernels::Execution::serial();
    const auto rep = mc::run_training(s.system, devices, s.source, task, job.seed, opts);

    // Overlay: the closed-form bound with the constants measured on this run.
    auto measured = devices;
    for (std::size_t k = 0; k < measured.size(); ++k) measured[k].grad_variance = rep.constants.sigma2_hat[k];
    const analysis::LossMeta loss{rep.initial_loss, s.system.smoothness, rep.constants.phi_hat};
    analysis::BoundReport overlay;
    try {
      overlay = evaluate_bound(s, measured, loss);
    } catch (const analysis::PreconditionError&) {
      overlay.deviation_term = overlay.residue = overlay.total = std::nan("");
    }

    const std::string stem = grid_tag(job.grid) + "_s" + std::to_string(job.seed);
    write_file(spec.out_dir / ("training_" + stem + ".csv"), csv::training_table(rep, overlay));
    json summary = {
        {"grid_index", job.grid},
        {"grid_value", spec.sweep ? json(values[job.grid]) : json(nullptr)},
        {"seed", job.seed},
        {"rounds", s.system.num_rounds},
        {"learning_rate", rep.learning_rate},
        {"avg_grad_norm", rep.avg_grad_norm},
        {"gradient_norm_data", "training set"},
        {"test_accuracy", rep.test_accuracy},
        {"initial_loss", rep.initial_loss},
        {"final_loss", rep.final_loss},
        {"mean_deviation", rep.mean_deviation},
        {"idle_rounds", rep.idle_rounds},
        {"mu_hat", rep.constants.mu_hat},
        {"phi_hat", rep.constants.phi_hat},
        {"sigma2_hat", rep.constants.sigma2_hat},
        {"descent_plus_deviation", 2.0 * rep.initial_loss / (rep.learning_rate * s.system.num_rounds) +
                                       rep.mean_deviation},
    };
    write_file(spec.out_dir / ("run_" + stem + ".json"), summary.dump(2) + "\n");
    outcomes[j] = {rep.avg_grad_norm, rep.test_accuracy, rep.mean_deviation, rep.final_loss, rep.idle_rounds};
  });

  std::ostringstream table;
  table << "grid_index,grid_value,seed,avg_grad_norm,test_accuracy,mean_deviation,final_loss,idle_rounds\n";
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const std::string stem = grid_tag(jobs[j].grid) + "_s" + std::to_string(jobs[j].seed);
    artifacts.push_back("training_" + stem + ".csv");
    artifacts.push_back("run_" + stem + ".json");
    const auto& o = outcomes[j];
    table << jobs[j].grid << ',' << csv::format_double(values[jobs[j].grid]) << ',' << jobs[j].seed << ','
          << csv::format_double(o.avg_grad_norm) << ',' << csv::format_double(o.test_accuracy) << ','
          << csv::format_double(o.mean_deviation) << ',' << csv::format_double(o.final_loss) << ','
          << o.idle_rounds << '\n';
  }
  write_file(spec.out_dir / "simulation_summary.csv", table.str());
  artifacts.push_back("simulation_summary.csv");
  return {};
}

RunResult run_validate(const ExperimentSpec& spec, std::vector<std::string>& artifacts) {
  validation::Options opts;
  opts.exec = kernels::Execution::with_workers(spec.workers);
  opts.scratch_dir = spec.out_dir / "scratch";
  if (!spec.seeds.empty()) opts.seed = spec.seeds.front();
  std::vector<csv::CheckRow> rows;
  for (const auto& c : validation::acceptance_checks()) rows.push_back(validation::run_check(c, opts));
  for (const auto& c : validation::oracle_checks()) rows.push_back(validation::run_check(c, opts));
  std::filesystem::remove_all(opts.scratch_dir);
  write_file(spec.out_dir / "validation.csv", csv::validation_table(rows));
  artifacts.push_back("validation.csv");
  RunResult result;
  for (const auto& r : rows) {
    if (!r.pass) {
      result.exit_code = 1;
      result.message = "check failed: " + r.name + " (" + r.detail + ")";
      break;
    }
  }
  return result;
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kAnalyze: return "analyze";
    case Mode::kSimulate: return "simulate";
    case Mode::kValidate: return "validate";
  }
  return "?";
}

}  // namespace

Mode parse_mode(std::string_view text) {
  if (text == "analyze") return Mode::kAnalyze;
  if (text == "simulate") return Mode::kSimulate;
  if (text == "validate") return Mode::kValidate;
  throw ConfigError("unknown mode '" + std::string(text) + "' (expected analyze, simulate or validate)");
}

std::vector<double> Sweep::points() const {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    out[static_cast<std::size_t>(i)] =
        log_spaced ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo);
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

Sweep parse_sweep(std::string_view text) {
  const auto parts = split(text, ':');
  if (parts.size() != 5) throw ConfigError("sweep must look like var:lo:hi:n:log|lin");
  Sweep s;
  s.variable = parts[0];
  if (s.variable != "lambda_energy" && s.variable != "P0" && s.variable != "compute_energy_rate" &&
      s.variable != "N0")
    throw ConfigError("unknown sweep variable '" + s.variable + "'");
  s.lo = to_double(parts[1], "sweep lo");
  s.hi = to_double(parts[2], "sweep hi");
  const auto n = to_u64(parts[3], "sweep count");
  if (n < 2 || n > 100000) throw ConfigError("sweep count must be in [2, 100000]");
  s.count = static_cast<int>(n);
  if (parts[4] == "log") {
    s.log_spaced = true;
  } else if (parts[4] == "lin") {
    s.log_spaced = false;
  } else {
    throw ConfigError("sweep spacing must be log or lin");
  }
  if (!(s.hi > s.lo)) throw ConfigError("sweep needs hi > lo");
  if (s.log_spaced && !(s.lo > 0.0)) throw ConfigError("log sweep needs lo > 0");
  return s;
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split(text, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_u64(item, "seed"));
      continue;
    }
    const auto a = to_u64(item.substr(0, dash), "seed range");
    const auto b = to_u64(item.substr(dash + 1), "seed range");
    if (b < a || b - a > 100000) throw ConfigError("bad seed range '" + item + "'");
    for (auto v = a; v <= b; ++v) out.push_back(v);
  }
  return out;
}

void ExperimentSpec::validate() const {
  if (mode != Mode::kValidate && config.empty()) throw ConfigError("--config is required for this mode");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (workers < 0) throw ConfigError("--workers must be >= 0");
  if (sweep && mode == Mode::kValidate) throw ConfigError("validate mode takes no sweep");
  if (sweep && sweep->count < 2) throw ConfigError("sweep count must be >= 2");
}

Scenario apply_sweep_value(Scenario scenario, std::string_view variable, double value) {
  if (!(value > 0.0) && variable != "N0") throw ConfigError(std::string(variable) + " must be positive");
  if (variable == "lambda_energy") {
    auto* b = std::get_if<BeaconSource>(&scenario.source);
    if (!b) throw ConfigError("lambda_energy sweeps need a beacon source");
    b->beacon_density_per_m2 = value / (b->beacon_power_w * scenario.system.round_s);
  } else if (variable == "P0") {
    auto* s = std::get_if<ServerSource>(&scenario.source);
    if (!s) throw ConfigError("P0 sweeps need a server source");
    s->per_device_power_w = value;
  } else if (variable == "compute_energy_rate") {
    const double w = scenario.devices.per_sample_flops;
    const double t = scenario.system.compute_s;
    scenario.devices.compute_coeff_choices = {value * t * t / (w * w * w)};
  } else if (variable == "N0") {
    scenario.system.noise_psd_w_per_hz = dbm_per_hz_to_w_per_hz(value);
  } else {
    throw ConfigError("unknown sweep variable '" + std::string(variable) + "'");
  }
  scenario.validate();
  return scenario;
}

RunResult run(const ExperimentSpec& spec) {
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);
  std::vector<std::string> artifacts;
  RunResult result;
  if (spec.mode == Mode::kValidate) {
    result = run_validate(spec, artifacts);
  } else {
    const Scenario base = load_scenario(spec.config);
    if (spec.sweep) apply_sweep_value(base, spec.sweep->variable, spec.sweep->points().front());
    result = spec.mode == Mode::kAnalyze ? run_analyze(spec, base, artifacts) : run_simulate(spec, base, artifacts);
  }
  std::sort(artifacts.begin(), artifacts.end());
  json index = {
      {"mode", mode_name(spec.mode)},
      {"config", spec.config.filename().string()},
      {"seeds", spec.seeds},
      {"schema_versions",
       {{"bounds", csv::kBoundsSchemaVersion},
        {"training", csv::kTrainingSchemaVersion},
        {"validation", csv::kValidationSchemaVersion}}},
      {"artifacts", artifacts},
      {"exit_code", result.exit_code},
  };
  if (spec.sweep) {
    index["sweep"] = {{"variable", spec.sweep->variable},
                      {"lo", spec.sweep->lo},
                      {"hi", spec.sweep->hi},
                      {"count", spec.sweep->count},
                      {"spacing", spec.sweep->log_spaced ? "log" : "lin"}};
  }
  write_file(spec.out_dir / "index.json", index.dump(2) + "\n");
  result.artifacts = artifacts;
  return result;
}

}  // namespace wpfeel::experiment
