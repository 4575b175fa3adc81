// Serial reference against the OpenMP kernels: wall time and identical results.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "wpfeel/kernels.hpp"
#include "wpfeel/montecarlo.hpp"
#include "wpfeel/validation.hpp"

namespace {

double seconds(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-28s serial %8.3f s   parallel %8.3f s   speedup %5.2fx   %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  using wpfeel::kernels::Execution;
  std::printf("OpenMP threads available: %d\n", omp_get_max_threads());
  const auto par = Execution{};
  const auto ser = Execution::serial();

  {
    wpfeel::kernels::BinomialCount a, b;
    const double ts = seconds([&] { a = wpfeel::kernels::count_beacon_outages(64, 3.8, 40.0, 4000000, 1, ser); });
    const double tp = seconds([&] { b = wpfeel::kernels::count_beacon_outages(64, 3.8, 40.0, 4000000, 1, par); });
    report("beacon outage (4e6 draws)", ts, tp, a.hits == b.hits);
  }
  {
    wpfeel::SystemConfig cfg;
    wpfeel::DeviceProfile dev;
    const double e = 200.0;
    wpfeel::kernels::ActiveMoments a, b;
    const double ts = seconds([&] { a = wpfeel::kernels::deviation_moments(cfg, dev, e, 2000000, 2, ser); });
    const double tp = seconds([&] { b = wpfeel::kernels::deviation_moments(cfg, dev, e, 2000000, 2, par); });
    report("local deviation (2e6 draws)", ts, tp, a.sum == b.sum && a.active == b.active);
  }
  {
    auto s = wpfeel::validation::desk_scenario(1.0);
    s.system.num_rounds = 50;
    wpfeel::mc::TaskShape shape;
    const auto task = wpfeel::mc::build_task(s.task.seed, shape);
    s.system.learning_rate = 1.0 / wpfeel::mc::smoothness_upper_bound(task);
    const auto devices = wpfeel::make_devices(s.devices, s.system.num_devices);
    wpfeel::mc::TrainingReport a, b;
    wpfeel::mc::RunOptions os, op;
    os.exec = ser;
    op.exec = par;
    os.estimate_constants = op.estimate_constants = false;
    const double ts = seconds([&] { a = wpfeel::mc::run_training(s.system, devices, s.source, task, 3, os); });
    const double tp = seconds([&] { b = wpfeel::mc::run_training(s.system, devices, s.source, task, 3, op); });
    report("training (50 rounds)", ts, tp, a.final_model == b.final_model);
  }
  return 0;
}
