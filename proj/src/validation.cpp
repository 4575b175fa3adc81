#include "wpfeel/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "wpfeel/analysis.hpp"
#include "wpfeel/experiment.hpp"
#include "wpfeel/mathkit.hpp"
#include "wpfeel/montecarlo.hpp"
#include "wpfeel/oracles.hpp"
#include "wpfeel/policy.hpp"
#include "wpfeel/task.hpp"

namespace wpfeel::validation {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

CheckRow make_row(std::string name, bool pass, double value, double threshold, std::string detail) {
  return {std::move(name), pass, value, threshold, std::move(detail)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

std::vector<double> default_coefficients() {
  std::vector<double> c;
  for (int i = 1; i <= 10; ++i) c.push_back(0.01 * i * kPerMflopsCubed);
  return c;
}

std::vector<DeviceProfile> default_devices(const SystemConfig& cfg) {
  DeviceSpec spec;
  spec.compute_coeff_choices = default_coefficients();
  return make_devices(spec, cfg.num_devices);
}

// Acceptance 1 ---------------------------------------------------------------
CheckRow outage_matches_monte_carlo(const Options& o) {
  constexpr std::uint64_t n = 1000000;
  double worst = 0.0;
  std::string where;
  std::uint64_t idx = 0;
  for (int L : {1, 2, 8, 64}) {
    for (double xi : {0.01, 0.1, 1.0, 10.0}) {
      for (double alpha : {2.0, 3.8}) {
        const double p = analysis::beacon_outage_probability(xi, L, alpha);
        const auto c = kernels::count_beacon_outages(L, alpha, xi, n, o.seed + 1000 + idx++, o.exec);
        const double tol = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)) + 1e-4;
        const double ratio = std::abs(c.estimate() - p) / tol;
        if (ratio > worst) {
          worst = ratio;
          where = "L=" + std::to_string(L) + " xi=" + fmt(xi) + " alpha=" + fmt(alpha) + " closed=" + fmt(p) +
                  " mc=" + fmt(c.estimate());
        }
      }
    }
  }
  return make_row("outage_closed_form_vs_monte_carlo", worst <= 1.0, worst, 1.0,
                  "largest |closed - mc| / (3 sigma + 1e-4) over 32 points, at " + where);
}

// Acceptance 2 ---------------------------------------------------------------
CheckRow outage_exact_special_case(const Options&) {
  const double p = analysis::beacon_outage_probability(1.0, 1, 2.0);
  const double err = std::abs(p - std::exp(-1.0));
  return make_row("outage_special_case_L1_alpha2_xi1", err <= 1e-10, err, 1e-10, "P_out = " + fmt(p));
}

// Acceptance 3 ---------------------------------------------------------------
CheckRow local_computation_vs_grid(const Options& o) {
  double worst_batch = 0.0;
  double worst_binding = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    RandomStream rng(o.seed, {purpose(StreamPurpose::kProbe), 3, i});
    SystemConfig cfg;
    cfg.compute_s = 0.1 + 0.9 * rng.uniform();
    DeviceProfile dev;
    dev.compute_coeff = (0.01 + 0.09 * rng.uniform()) * kPerMflopsCubed;
    dev.per_sample_flops = std::pow(10.0, 5.0 + 2.0 * rng.uniform());
    const double energy = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
    const auto plan = policy::optimal_local_computation(energy, dev, cfg);
    const double grid = oracles::max_feasible_batch_grid(energy, dev, cfg);
    worst_batch = std::max(worst_batch, std::abs(grid - plan.batch_size) / plan.batch_size);
    worst_binding = std::max({worst_binding, std::abs(plan.energy_j - energy) / energy,
                              std::abs(plan.time_s - cfg.compute_s) / cfg.compute_s});
  }
  const bool pass = worst_batch <= 0.01 && worst_binding <= 1e-9;
  return make_row("optimal_batch_vs_grid_search", pass, worst_batch, 0.01,
                  "worst relative batch gap over 100 instances; worst constraint slack " + fmt(worst_binding) +
                      " (limit 1e-9)");
}

// Acceptance 4 ---------------------------------------------------------------
CheckRow reciprocal_vs_enumeration(const Options&) {
  double worst = 0.0;
  for (int K = 1; K <= 12; ++K) {
    for (int j = 1; j <= 9; ++j) {
      const double p = 0.1 * j;
      worst = std::max(worst, std::abs(analysis::expected_reciprocal_active(p, K) -
                                       oracles::reciprocal_by_enumeration(p, K)));
    }
  }
  const double special = std::abs(analysis::expected_reciprocal_active(0.5, 2) - 5.0 / 6.0);
  return make_row("expected_reciprocal_vs_enumeration", worst <= 1e-12 && special <= 1e-12, worst, 1e-12,
                  "K <= 12, P in {0.1..0.9}; K=2, P=0.5 off 5/6 by " + fmt(special));
}

// Acceptance 5 ---------------------------------------------------------------
CheckRow local_deviation_dominance(const Options& o) {
  const SystemConfig cfg;
  const double e0 = std::pow(cfg.cell_radius_m, cfg.uplink_pathloss_exp) * phi(cfg.comm_s, cfg);
  const std::vector<double> energies = {e0, 8.0 * e0, 64.0 * e0};
  double worst_ratio = 0.0;
  double worst_slope = 0.0;
  std::uint64_t idx = 0;
  for (double c_mflops : {0.01, 0.05, 0.1}) {
    DeviceProfile dev;
    dev.compute_coeff = c_mflops * kPerMflopsCubed;
    std::vector<double> means;
    for (double e : energies) {
      const auto m = kernels::deviation_moments(cfg, dev, e, 100000, o.seed + 5000 + idx++, o.exec);
      means.push_back(m.mean());
      worst_ratio = std::max(worst_ratio, m.mean() / analysis::local_deviation_bound(dev, e, cfg));
    }
    worst_slope = std::max(worst_slope, std::abs(ols_slope(energies, means) + 1.0 / 3.0));
  }
  const bool pass = worst_ratio <= 1.0 && worst_slope <= 0.05;
  return make_row("local_deviation_bound_dominance", pass, worst_ratio, 1.0,
                  "max MC / bound on the 3x3 grid; worst |slope + 1/3| = " + fmt(worst_slope) + " (limit 0.05)");
}

// Acceptance 6 ---------------------------------------------------------------
CheckRow energy_scaling_exponent(const Options&) {
  const SystemConfig cfg;
  const auto devices = default_devices(cfg);
  const analysis::LossMeta loss{1.0, cfg.smoothness, cfg.grad_norm_bound};
  std::vector<analysis::BoundReport> sweep;
  for (int i = 0; i < 13; ++i) {
    const double lambda = 10.0 * std::pow(10.0, 3.0 * i / 12.0);
    sweep.push_back(analysis::convergence_bound_beacon(cfg, devices, beacon_for_density(lambda, cfg), loss));
  }
  const double slope = analysis::scaling_exponent(sweep);
  const bool pass = slope >= -0.36 && slope <= -0.31;
  return make_row("bound_scaling_in_energy_density", pass, slope, -0.31,
                  "fitted slope over lambda_energy in [10, 1e4], required in [-0.36, -0.31]; max P_out " +
                      fmt(sweep.front().outage_prob));
}

// Acceptance 7 ---------------------------------------------------------------
CheckRow server_outage_checks(const Options& o) {
  constexpr std::uint64_t n = 1000000;
  double worst = 0.0;
  std::string where;
  std::uint64_t idx = 0;
  for (int L : {1, 2}) {
    for (double tau : {1e-3, 1e-2}) {
      SystemConfig cfg;
      cfg.num_antennas = L;
      const ServerSource src = server_for_tau(tau, cfg);
      const double t = analysis::tau_parameter(src, cfg);
      const double q = analysis::server_outage_probability(t, L, cfg.uplink_pathloss_exp);
      const auto c = kernels::count_outages(cfg, src, n, o.seed + 7000 + idx++, o.exec);
      const double sigma = std::sqrt(q * (1.0 - q) / static_cast<double>(n));
      const double ratio = std::abs(c.estimate() - q) / (3.0 * sigma);
      if (ratio > worst) {
        worst = ratio;
        where = "L=" + std::to_string(L) + " tau=" + fmt(tau) + " quad=" + fmt(q) + " mc=" + fmt(c.estimate());
      }
    }
  }
  double dominance = 0.0;
  for (int L : {1, 2, 4})
    for (double alpha : {2.0, 3.0, 3.8})
      for (double tau : {1e-5, 1e-4, 1e-3, 3e-3, 1e-2}) {
        const double q = analysis::server_outage_probability(tau, L, alpha);
        dominance = std::max(dominance, q / analysis::server_outage_bound_with_remainder(tau, L, alpha));
      }
  const bool pass = worst <= 1.0 && dominance <= 1.0;
  return make_row("server_outage_quadrature_vs_monte_carlo", pass, worst, 1.0,
                  "largest |quad - mc| / 3 sigma, at " + where + "; max quadrature / bound = " + fmt(dominance));
}

// Acceptance 8 ---------------------------------------------------------------
CheckRow power_allocation_checks(const Options& o) {
  double worst_sum = 0.0;
  double worst_gap = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    RandomStream rng(o.seed, {purpose(StreamPurpose::kProbe), 8, i});
    SystemConfig cfg;
    const int m = 2 + static_cast<int>(rng.below(9));
    std::vector<ChannelDraw> draws;
    std::vector<DeviceProfile> devices;
    std::vector<int> active;
    double max_floor = 0.0;
    for (int k = 0; k < m; ++k) {
      draws.push_back(sample_channel(rng, cfg, true));
      DeviceProfile d;
      d.grad_variance = 0.5 + 1.5 * rng.uniform();
      d.compute_coeff = (0.01 + 0.09 * rng.uniform()) * kPerMflopsCubed;
      devices.push_back(d);
      active.push_back(k);
      max_floor = std::max(max_floor, policy::communication_floor(draws.back(), cfg));
    }
    const double p0 = max_floor * (1.2 + 1.8 * rng.uniform());
    const auto plan = policy::allocate_server_power(draws, devices, active, p0, cfg);
    double sum = 0.0;
    for (double p : plan.powers) sum += p;
    worst_sum = std::max(worst_sum, std::abs(sum - m * p0) / (m * p0));
    const double closed = policy::allocation_objective(draws, devices, active, plan.powers, cfg);
    const auto ref = oracles::projected_gradient_allocation(draws, devices, active, p0, cfg);
    worst_gap = std::max(worst_gap, std::abs(closed - ref.objective) / ref.objective);
  }
  SystemConfig cfg;
  RandomStream rng(o.seed, {purpose(StreamPurpose::kProbe), 8, 1000});
  const std::vector<ChannelDraw> one = {sample_channel(rng, cfg, true)};
  const std::vector<DeviceProfile> dev(1);
  const std::vector<int> idx = {0};
  const double p0 = 2.0 * policy::communication_floor(one[0], cfg);
  const bool single_exact = policy::allocate_server_power(one, dev, idx, p0, cfg).powers.at(0) == p0;
  const bool pass = worst_sum <= 1e-9 && worst_gap <= 1e-3 && single_exact;
  return make_row("power_allocation_vs_projected_gradient", pass, worst_gap, 1e-3,
                  "worst objective gap over 50 sets; worst sum-power error " + fmt(worst_sum) +
                      "; single device gets P0 exactly: " + (single_exact ? "yes" : "no"));
}

// Training runs shared by acceptance 9 and 10 --------------------------------

const mc::SyntheticTask& desk_task() {
  static const mc::SyntheticTask task = [] {
    const Scenario s = desk_scenario(1.0);
    mc::TaskShape shape;
    shape.num_devices = s.system.num_devices;
    shape.samples_per_device = s.devices.samples_per_device;
    shape.feature_dim = s.task.feature_dim;
    shape.num_classes = s.task.num_classes;
    shape.noise_scale = s.task.noise_scale;
    shape.class_separation = s.task.class_separation;
    shape.test_size = s.task.test_size;
    return mc::build_task(s.task.seed, shape);
  }();
  return task;
}

double desk_smoothness() {
  static const double mu = mc::smoothness_upper_bound(desk_task());
  return mu;
}

struct DeskOutcome {
  double avg_grad_norm = 0.0;
  double prop1_rhs = 0.0;
  double eta_mu_hat = 0.0;
  double min_mean_batch = 0.0;
  int min_active = 0;
  double seconds = 0.0;
};

DeskOutcome desk_run(double lambda, std::uint64_t seed) {
  static std::mutex mu;
  static std::map<std::pair<double, std::uint64_t>, DeskOutcome> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find({lambda, seed}); it != cache.end()) return it->second;
  }
  const auto start = std::chrono::steady_clock::now();
  Scenario s = desk_scenario(lambda);
  s.system.smoothness = desk_smoothness();
  s.system.learning_rate = 1.0 / s.system.smoothness;
  const auto devices = make_devices(s.devices, s.system.num_devices);
  mc::RunOptions opts;
  opts.exec = kernels::Execution::serial();
  const auto rep = mc::run_training(s.system, devices, s.source, desk_task(), seed, opts);
  DeskOutcome out;
  out.avg_grad_norm = rep.avg_grad_norm;
  // F* >= 0 for cross-entropy, so F(w0) bounds the initial gap.
  out.prop1_rhs = 2.0 * rep.initial_loss / (rep.learning_rate * s.system.num_rounds) + rep.mean_deviation;
  out.eta_mu_hat = rep.learning_rate * rep.constants.mu_hat;
  out.min_mean_batch = *std::min_element(rep.mean_batch.begin(), rep.mean_batch.end());
  out.min_active = *std::min_element(rep.active_count.begin(), rep.active_count.end());
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::lock_guard<std::mutex> lock(mu);
  cache[{lambda, seed}] = out;
  return out;
}

std::vector<DeskOutcome> desk_runs(double lambda, const Options& o) {
  std::vector<DeskOutcome> out(5);
  kernels::for_each_index(out.size(), o.exec, [&](std::size_t i) { out[i] = desk_run(lambda, o.seed + i); });
  return out;
}

// Acceptance 9 ---------------------------------------------------------------
CheckRow gradient_norm_bound_holds(const Options& o) {
  double worst = 0.0;
  double worst_eta = 0.0;
  double slowest = 0.0;
  for (double lambda : {kTrendBaseDensity, 10.0 * kTrendBaseDensity}) {
    for (const auto& r : desk_runs(lambda, o)) {
      worst = std::max(worst, r.avg_grad_norm / r.prop1_rhs);
      worst_eta = std::max(worst_eta, r.eta_mu_hat);
      slowest = std::max(slowest, r.seconds);
    }
  }
  const bool pass = worst <= 1.0 && worst_eta <= 1.0 && slowest < 300.0;
  return make_row("average_gradient_norm_bound_per_run", pass, worst, 1.0,
                  "max avg_grad_norm / (descent + mean deviation) over 10 runs; max eta*mu_hat " + fmt(worst_eta) +
                      "; slowest run " + fmt(slowest) + " s");
}

// Acceptance 10 --------------------------------------------------------------
CheckRow learning_improves_with_energy(const Options& o) {
  std::vector<double> medians;
  for (double f : {1.0, 10.0, 100.0}) {
    std::vector<double> v;
    for (const auto& r : desk_runs(kTrendBaseDensity * f, o)) v.push_back(r.avg_grad_norm);
    medians.push_back(median(v));
  }
  const bool decreasing = medians[0] > medians[1] && medians[1] > medians[2];
  const double sat = saturation_density(desk_scenario(1.0));
  std::vector<double> a, b;
  int min_batch = 1 << 30;
  for (const auto& r : desk_runs(sat, o)) {
    a.push_back(r.avg_grad_norm);
    min_batch = std::min(min_batch, static_cast<int>(r.min_mean_batch));
  }
  for (const auto& r : desk_runs(10.0 * sat, o)) b.push_back(r.avg_grad_norm);
  const double change = std::abs(median(b) - median(a)) / median(a);
  const bool pass = decreasing && change <= 0.05 && min_batch >= desk_scenario(1.0).devices.samples_per_device;
  return make_row("learning_trend_in_energy_density", pass, change, 0.05,
                  "medians " + fmt(medians[0]) + " > " + fmt(medians[1]) + " > " + fmt(medians[2]) + ": " +
                      (decreasing ? "yes" : "no") + "; saturated change at lambda " + fmt(sat) +
                      " vs 10x; smallest mean batch there " + std::to_string(min_batch));
}

// Acceptance 11 --------------------------------------------------------------
std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> directory_contents(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file()) out[e.path().filename().string()] = read_file(e.path());
  return out;
}

constexpr const char* kDeterminismBeacon = R"(# small beacon scenario
cell_radius_m = 50
num_devices = 6
num_antennas = 8
num_rounds = 40
samples_per_device = 20
learning_rate = auto
wpt_source = beacon
beacon_power_w = 1
beacon_density_per_m2 = 0.05
compute_coeff_mflops = 0.01:0.1:0.01
task_feature_dim = 5
task_num_classes = 3
task_test_size = 100
)";

constexpr const char* kDeterminismServer = R"(# small server scenario with optimised power
cell_radius_m = 20
num_devices = 6
num_antennas = 8
num_rounds = 40
samples_per_device = 20
learning_rate = auto
wpt_source = server
server_power_w = 50
server_power_control = optimized
compute_coeff_mflops = 0.01:0.1:0.01
task_feature_dim = 5
task_num_classes = 3
task_test_size = 100
)";

CheckRow outputs_are_deterministic(const Options& o) {
  namespace fs = std::filesystem;
  fs::remove_all(o.scratch_dir);
  fs::create_directories(o.scratch_dir);
  const fs::path beacon_cfg = o.scratch_dir / "beacon.cfg";
  const fs::path server_cfg = o.scratch_dir / "server.cfg";
  std::ofstream(beacon_cfg) << kDeterminismBeacon;
  std::ofstream(server_cfg) << kDeterminismServer;

  struct Case {
    std::string name;
    experiment::Mode mode;
    fs::path config;
    std::string sweep;
  };
  const std::vector<Case> cases = {
      {"beacon_sim", experiment::Mode::kSimulate, beacon_cfg, "lambda_energy:0.02:2:3:log"},
      {"server_sim", experiment::Mode::kSimulate, server_cfg, "P0:20:200:2:log"},
      {"beacon_bounds", experiment::Mode::kAnalyze, beacon_cfg, "lambda_energy:1:1000:7:log"},
  };
  std::size_t files = 0;
  std::string mismatch;
  for (const auto& c : cases) {
    std::map<std::string, std::string> reference;
    for (int workers : {1, 4, 16}) {
      experiment::ExperimentSpec spec;
      spec.mode = c.mode;
      spec.config = c.config;
      spec.sweep = experiment::parse_sweep(c.sweep);
      spec.seeds = {1, 2};
      spec.workers = workers;
      spec.out_dir = o.scratch_dir / (c.name + "_w" + std::to_string(workers));
      experiment::run(spec);
      auto contents = directory_contents(spec.out_dir);
      if (workers == 1) {
        reference = std::move(contents);
        files += reference.size();
      } else if (contents != reference && mismatch.empty()) {
        mismatch = c.name + " at " + std::to_string(workers) + " workers";
      }
    }
  }
  // Monte Carlo kernels: serial reference against 16 threads.
  const auto serial = kernels::count_beacon_outages(4, 3.8, 2.0, 300000, o.seed, kernels::Execution::serial());
  const auto threaded =
      kernels::count_beacon_outages(4, 3.8, 2.0, 300000, o.seed, kernels::Execution::with_workers(16));
  if (serial.hits != threaded.hits && mismatch.empty()) mismatch = "outage kernel";
  fs::remove_all(o.scratch_dir);
  return make_row("byte_identical_outputs_across_workers", mismatch.empty(), mismatch.empty() ? 0.0 : 1.0, 0.0,
                  mismatch.empty() ? std::to_string(files) + " files per worker count compared at 1, 4, 16 workers"
                                   : "mismatch: " + mismatch);
}

// Oracle cross-checks ----------------------------------------------------------

CheckRow bessel_small_argument(const Options&) {
  const double x = 1e-6;
  const double asym = -std::log(x / 2.0) - math::kEulerGamma;
  const double rel = std::abs(math::bessel_k0(x) - asym) / asym;
  return make_row("bessel_k0_small_argument", rel <= 1e-6, rel, 1e-6, "K0(1e-6) against -ln(x/2) - gamma");
}

CheckRow product_density_normalised(const Options&) {
  double worst = 0.0;
  for (int L : {1, 2, 4}) {
    const double lg = 2.0 * math::ln_gamma(L);
    const double total = math::integrate(
        [&](double x) {
          return x <= 0.0 ? 0.0
                          : 2.0 * std::exp((L - 1.0) * std::log(x) - lg) * math::bessel_k0(2.0 * std::sqrt(x));
        },
        0.0, INFINITY, {}, true);
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return make_row("product_channel_density_normalised", worst <= 1e-7, worst, 1e-7, "L in {1, 2, 4}");
}

CheckRow log_singularity(const Options&) {
  const double v = math::integrate([](double x) { return -std::log(x); }, 0.0, 1.0, {}, true);
  return make_row("log_singular_quadrature", std::abs(v - 1.0) <= 1e-9, std::abs(v - 1.0), 1e-9,
                  "integral of -ln x over (0, 1]");
}

CheckRow outage_vs_location_integral(const Options&) {
  double worst = 0.0;
  for (int L : {1, 2, 8, 64})
    for (double xi : {0.01, 0.1, 1.0, 10.0, 40.0, 200.0})
      for (double alpha : {2.0, 3.0, 3.8}) {
        const double closed = analysis::beacon_outage_probability(xi, L, alpha);
        const double ref = oracles::beacon_outage_by_location_integral(xi, L, alpha);
        if (ref < 1e-280) continue;
        worst = std::max(worst, std::abs(closed - ref) / ref);
      }
  return make_row("outage_closed_form_vs_location_integral", worst <= 1e-7, worst, 1e-7,
                  "relative error over L x xi x alpha grid");
}

CheckRow outage_physical_path(const Options& o) {
  double worst = 0.0;
  std::uint64_t idx = 0;
  for (int L : {2, 8})
    for (double xi : {0.5, 5.0, 20.0}) {
      SystemConfig cfg;
      cfg.num_antennas = L;
      const auto src = beacon_for_xi(xi, cfg);
      const double p = analysis::beacon_outage_probability(analysis::xi_parameter(src, cfg), L,
                                                           cfg.uplink_pathloss_exp);
      const auto est = mc::mc_outage(src, cfg, 1000000, o.seed + 11000 + idx++, o.exec);
      worst = std::max(worst, std::abs(est.estimate - p) / (3.0 * std::sqrt(p * (1 - p) / 1e6) + 1e-4));
    }
  return make_row("outage_through_energy_split", worst <= 1.0, worst, 1.0,
                  "sampled channels and energy split against the closed form");
}

CheckRow reciprocal_monte_carlo(const Options& o) {
  SystemConfig cfg;
  cfg.num_devices = 5;
  cfg.num_antennas = 1;
  const auto src = beacon_for_xi(2.0, cfg);
  const double p = analysis::beacon_outage_probability(analysis::xi_parameter(src, cfg), 1, cfg.uplink_pathloss_exp);
  const auto m = kernels::reciprocal_active_moments(cfg, src, 100000, o.seed + 12000, o.exec);
  const double closed = analysis::expected_reciprocal_active(p, cfg.num_devices);
  const double z = std::abs(m.mean() - closed) / m.standard_error();
  return make_row("expected_reciprocal_vs_simulated_rounds", z <= 3.0, z, 3.0,
                  "closed " + fmt(closed) + " simulated " + fmt(m.mean()) + " at P_out " + fmt(p));
}

CheckRow global_deviation_assembly(const Options&) {
  double worst = 0.0;
  for (int K : {2, 5, 12})
    for (double p : {0.0, 0.2, 0.7}) {
      std::vector<double> terms(static_cast<std::size_t>(K));
      for (int k = 0; k < K; ++k) terms[static_cast<std::size_t>(k)] = 0.1 * (k + 1);
      const double got = analysis::global_deviation_bound(terms, p, K, 2.0);
      double sum = 0.0;
      for (double t : terms) sum += t;
      const double pk = std::pow(p, K);
      const double ref = 2.0 * sum / (K * K) +
                         2.0 * ((1 - pk) * (oracles::reciprocal_by_enumeration(p, K) - 1.0 / K) + p * p) * 2.0;
      worst = std::max(worst, std::abs(got - ref) / ref);
    }
  return make_row("global_deviation_vs_enumeration", worst <= 1e-12, worst, 1e-12, "K in {2, 5, 12}");
}

CheckRow bounds_monotone_in_energy(const Options&) {
  SystemConfig cfg;
  const auto devices = default_devices(cfg);
  const analysis::LossMeta loss{1.0, cfg.smoothness, cfg.grad_norm_bound};
  int violations = 0;
  double prev = INFINITY;
  for (int i = 0; i <= 60; ++i) {
    const double lambda = std::pow(10.0, -2.0 + 0.1 * i);
    const double t = analysis::convergence_bound_beacon(cfg, devices, beacon_for_density(lambda, cfg), loss).total;
    violations += t > prev ? 1 : 0;
    prev = t;
  }
  prev = INFINITY;
  for (int i = 0; i <= 40; ++i) {
    const double tau = std::pow(10.0, 2.0 - 0.15 * i);
    const double t = analysis::convergence_bound_server(cfg, devices, server_for_tau(tau, cfg), loss).total;
    violations += t > prev ? 1 : 0;
    prev = t;
  }
  return make_row("bounds_nonincreasing_in_energy", violations == 0, violations, 0.0,
                  "beacon over lambda_energy, server over P0");
}

CheckRow measured_deviation_dominated(const Options& o) {
  // Measured G_gl against the deviation bound assembled from measured constants.
  const double lambda = 10.0 * kTrendBaseDensity;
  Scenario s = desk_scenario(lambda);
  s.system.smoothness = desk_smoothness();
  s.system.learning_rate = 1.0 / s.system.smoothness;
  s.system.num_rounds = 200;
  auto devices = make_devices(s.devices, s.system.num_devices);
  mc::RunOptions opts;
  opts.exec = o.exec;
  const auto rep = mc::run_training(s.system, devices, s.source, desk_task(), o.seed, opts);
  const auto& src = std::get<BeaconSource>(s.source);
  const double energy = beacon_harvested_energy(src, s.system);
  const double p = analysis::beacon_outage_probability(analysis::xi_parameter(src, s.system),
                                                       s.system.num_antennas, s.system.uplink_pathloss_exp);
  std::vector<double> terms;
  for (std::size_t k = 0; k < devices.size(); ++k) {
    devices[k].grad_variance = rep.constants.sigma2_hat[k];
    terms.push_back((1.0 - p) * analysis::local_deviation_bound(devices[k], energy, s.system));
  }
  const double bound = analysis::global_deviation_bound(terms, p, s.system.num_devices, rep.constants.phi_hat);
  return make_row("measured_global_deviation_dominated", rep.mean_deviation <= bound, rep.mean_deviation / bound,
                  1.0, "mean ||g - grad F||^2 = " + fmt(rep.mean_deviation) + ", bound " + fmt(bound));
}

}  // namespace

BeaconSource beacon_for_density(double lambda_energy, const SystemConfig& cfg) {
  BeaconSource b;
  b.beacon_power_w = 1.0;
  b.beacon_density_per_m2 = lambda_energy / (b.beacon_power_w * cfg.round_s);
  return b;
}

BeaconSource beacon_for_xi(double xi, const SystemConfig& cfg) {
  const double energy = std::pow(cfg.cell_radius_m, cfg.uplink_pathloss_exp) * phi(cfg.comm_s, cfg) / xi;
  return beacon_for_density(energy / beacon_harvest_factor(cfg), cfg);
}

ServerSource server_for_tau(double tau, const SystemConfig& cfg) {
  ServerSource s;
  s.per_device_power_w = std::pow(cfg.cell_radius_m, 2.0 * cfg.uplink_pathloss_exp) * phi(cfg.comm_s, cfg) /
                         (cfg.conversion_gain * tau * cfg.compute_s);
  return s;
}

Scenario desk_scenario(double lambda_energy) {
  Scenario s;
  s.devices.compute_coeff_choices = default_coefficients();
  s.devices.samples_per_device = 100;
  s.task.class_separation = 0.5;
  s.learning_rate_auto = true;
  s.source = beacon_for_density(lambda_energy, s.system);
  s.validate();
  return s;
}

double saturation_density(const Scenario& scenario) {
  const auto& cfg = scenario.system;
  const auto& coeffs = scenario.devices.compute_coeff_choices;
  const double c_max = *std::max_element(coeffs.begin(), coeffs.end());
  const double flops = scenario.devices.samples_per_device * scenario.devices.per_sample_flops;
  // Twice the compute energy of a full shard, plus the uplink of a cell-edge
  // device whose gain is a quarter of its mean.
  const double compute = 2.0 * flops * flops * flops * c_max / (cfg.compute_s * cfg.compute_s);
  const double uplink =
      std::pow(cfg.cell_radius_m, cfg.uplink_pathloss_exp) * phi(cfg.comm_s, cfg) / (0.25 * cfg.num_antennas);
  return (compute + uplink) / beacon_harvest_factor(cfg);
}

std::vector<Check> acceptance_checks() {
  return {
      {"1 outage probability vs Monte Carlo", outage_matches_monte_carlo},
      {"2 outage special case", outage_exact_special_case},
      {"3 optimal local computation vs grid search", local_computation_vs_grid},
      {"4 expected reciprocal vs enumeration", reciprocal_vs_enumeration},
      {"5 local deviation bound dominance and scaling", local_deviation_dominance},
      {"6 bound scaling exponent", energy_scaling_exponent},
      {"7 server outage quadrature, Monte Carlo and bound", server_outage_checks},
      {"8 server power allocation", power_allocation_checks},
      {"9 average gradient norm bound on training runs", gradient_norm_bound_holds},
      {"10 learning trend and saturation in energy density", learning_improves_with_energy},
      {"11 determinism across worker counts", outputs_are_deterministic},
  };
}

std::vector<Check> oracle_checks() {
  return {
      {"bessel small argument", bessel_small_argument},
      {"product channel density", product_density_normalised},
      {"log singular quadrature", log_singularity},
      {"outage vs location integral", outage_vs_location_integral},
      {"outage through the energy split", outage_physical_path},
      {"expected reciprocal vs simulated rounds", reciprocal_monte_carlo},
      {"global deviation assembly", global_deviation_assembly},
      {"bounds monotone in energy", bounds_monotone_in_energy},
      {"measured deviation dominated", measured_deviation_dominated},
  };
}

CheckRow run_check(const Check& check, const Options& opts) {
  try {
    return check.run(opts);
  } catch (const std::exception& e) {
    return make_row(check.name, false, NAN, NAN, std::string("error: ") + e.what());
  }
}

}  // namespace wpfeel::validation
