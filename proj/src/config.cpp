#include "wpfeel/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace wpfeel {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end || !std::isfinite(out)) throw ConfigError("not a number: '" + v + "'");
  return out;
}

long long parse_int(const std::string& v) {
  long long out = 0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError("not an integer: '" + v + "'");
  return out;
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

// "lo:hi:step" or a comma list, in W*(MFLOPs/s)^-3.
std::vector<double> parse_coeff_mflops(const std::string& v) {
  std::vector<double> mflops;
  if (v.find(':') != std::string::npos) {
    std::stringstream ss(v);
    std::string part;
    std::vector<double> parts;
    while (std::getline(ss, part, ':')) parts.push_back(parse_double(trim(part)));
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0])
      throw ConfigError("range must be lo:hi:step with step > 0 and hi >= lo");
    const auto n = static_cast<long>(std::llround((parts[1] - parts[0]) / parts[2])) + 1;
    for (long i = 0; i < n; ++i) mflops.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  } else {
    mflops = parse_list(v);
  }
  std::vector<double> si;
  for (double m : mflops) si.push_back(m * kPerMflopsCubed);
  return si;
}

struct Parser {
  Scenario s;
  std::string source_kind = "beacon";
  BeaconSource beacon;
  ServerSource server;
  std::set<std::string> seen;

  using Setter = std::function<void(const std::string&)>;
  std::map<std::string, Setter> setters;

  Parser() {
    auto& sys = s.system;
    auto real = [](double& dst) { return [&dst](const std::string& v) { dst = parse_double(v); }; };
    auto integer = [](auto& dst) {
      return [&dst](const std::string& v) {
        dst = static_cast<std::remove_reference_t<decltype(dst)>>(parse_int(v));
      };
    };
    setters = {
        {"cell_radius_m", real(sys.cell_radius_m)},
        {"num_devices", integer(sys.num_devices)},
        {"num_antennas", integer(sys.num_antennas)},
        {"bandwidth_hz", real(sys.bandwidth_hz)},
        {"noise_psd_dbm_per_hz",
         [&sys](const std::string& v) { sys.noise_psd_w_per_hz = dbm_per_hz_to_w_per_hz(parse_double(v)); }},
        {"noise_psd_w_per_hz", real(sys.noise_psd_w_per_hz)},
        {"uplink_pathloss_exp", real(sys.uplink_pathloss_exp)},
        {"wpt_pathloss_exp", real(sys.wpt_pathloss_exp)},
        {"wpt_min_dist_m", real(sys.wpt_min_dist_m)},
        {"conversion_gain", real(sys.conversion_gain)},
        {"round_s", real(sys.round_s)},
        {"compute_s", real(sys.compute_s)},
        {"comm_s", real(sys.comm_s)},
        {"model_dim", integer(sys.model_dim)},
        {"quant_bits", integer(sys.quant_bits)},
        {"num_rounds", integer(sys.num_rounds)},
        {"learning_rate",
         [this](const std::string& v) {
           if (v == "auto") {
             s.learning_rate_auto = true;
           } else {
             s.learning_rate_auto = false;
             s.system.learning_rate = parse_double(v);
           }
         }},
        {"grad_norm_bound", real(sys.grad_norm_bound)},
        {"smoothness", real(sys.smoothness)},
        {"initial_gap", real(s.initial_gap)},
        {"per_sample_flops", real(s.devices.per_sample_flops)},
        {"samples_per_device", integer(s.devices.samples_per_device)},
        {"grad_variance", real(s.devices.grad_variance)},
        {"compute_coeff_mflops",
         [this](const std::string& v) { s.devices.compute_coeff_choices = parse_coeff_mflops(v); }},
        {"compute_coeff_si", [this](const std::string& v) { s.devices.compute_coeff_choices = parse_list(v); }},
        {"device_seed", integer(s.devices.seed)},
        {"wpt_source",
         [this](const std::string& v) {
           if (v != "beacon" && v != "server") throw ConfigError("wpt_source must be beacon or server");
           source_kind = v;
         }},
        {"beacon_power_w", real(beacon.beacon_power_w)},
        {"beacon_density_per_m2", real(beacon.beacon_density_per_m2)},
        {"server_power_w", real(server.per_device_power_w)},
        {"server_power_control",
         [this](const std::string& v) {
           if (v == "equal") server.control = PowerControl::kEqual;
           else if (v == "optimized") server.control = PowerControl::kOptimized;
           else throw ConfigError("server_power_control must be equal or optimized");
         }},
        {"task_feature_dim", integer(s.task.feature_dim)},
        {"task_num_classes", integer(s.task.num_classes)},
        {"task_noise_scale", real(s.task.noise_scale)},
        {"task_class_separation", real(s.task.class_separation)},
        {"task_test_size", integer(s.task.test_size)},
        {"task_seed", integer(s.task.seed)},
    };
  }

  void line(int lineno, const std::string& raw) {
    std::string text = raw;
    if (auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    text = trim(text);
    if (text.empty()) return;
    const auto eq = text.find('=');
    auto where = [lineno] { return "line " + std::to_string(lineno) + ": "; };
    if (eq == std::string::npos) throw ConfigError(where() + "expected 'key = value'");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(where() + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where() + "repeated key '" + key + "'");
    if ((key == "noise_psd_dbm_per_hz" && seen.count("noise_psd_w_per_hz")) ||
        (key == "noise_psd_w_per_hz" && seen.count("noise_psd_dbm_per_hz")))
      throw ConfigError(where() + "give the noise PSD once, in dBm/Hz or W/Hz");
    if ((key == "compute_coeff_mflops" && seen.count("compute_coeff_si")) ||
        (key == "compute_coeff_si" && seen.count("compute_coeff_mflops")))
      throw ConfigError(where() + "give compute coefficients once");
    try {
      it->second(value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + key + ": " + e.what());
    }
  }

  Scenario finish() {
    for (const char* required : {"cell_radius_m", "num_devices", "num_antennas", "wpt_source"}) {
      if (!seen.count(required)) throw ConfigError(std::string("missing required key '") + required + "'");
    }
    if (source_kind == "beacon") {
      if (seen.count("server_power_w") || seen.count("server_power_control"))
        throw ConfigError("server_* keys given with wpt_source = beacon");
      s.source = beacon;
    } else {
      if (seen.count("beacon_power_w") || seen.count("beacon_density_per_m2"))
        throw ConfigError("beacon_* keys given with wpt_source = server");
      s.source = server;
    }
    s.validate();
    return s;
  }
};

}  // namespace

void Scenario::validate() const {
  system.validate();
  wpfeel::validate(source);
  if (devices.compute_coeff_choices.empty()) throw ConfigError("no compute coefficients given");
  for (double c : devices.compute_coeff_choices)
    if (!(c > 0.0)) throw ConfigError("invariant violated: compute coefficients > 0");
  if (devices.grad_variance < 0.0) throw ConfigError("invariant violated: grad_variance >= 0");
  if (!(devices.per_sample_flops > 0.0)) throw ConfigError("invariant violated: per_sample_flops > 0");
  if (devices.samples_per_device < 1) throw ConfigError("invariant violated: samples_per_device >= 1");
  if (task.feature_dim < 1 || task.num_classes < 2 || task.test_size < 0 || task.noise_scale < 0.0)
    throw ConfigError("invariant violated: task needs feature_dim >= 1, num_classes >= 2");
  if (initial_gap < 0.0) throw ConfigError("invariant violated: initial_gap >= 0");
}

std::vector<DeviceProfile> make_devices(const DeviceSpec& spec, int num_devices) {
  std::vector<DeviceProfile> out;
  out.reserve(static_cast<std::size_t>(num_devices));
  for (int k = 0; k < num_devices; ++k) {
    RandomStream rng(spec.seed, {purpose(StreamPurpose::kDeviceProfile), static_cast<std::uint64_t>(k)});
    DeviceProfile p;
    p.compute_coeff = spec.compute_coeff_choices[rng.below(spec.compute_coeff_choices.size())];
    p.grad_variance = spec.grad_variance;
    p.per_sample_flops = spec.per_sample_flops;
    p.local_dataset_size = spec.samples_per_device;
    p.validate();
    out.push_back(p);
  }
  return out;
}

Scenario parse_scenario(const std::string& text) {
  Parser p;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) p.line(++lineno, raw);
  return p.finish();
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_config_text(const Scenario& s) {
  std::ostringstream os;
  const auto& y = s.system;
  os << "cell_radius_m = " << fmt(y.cell_radius_m) << "\n"
     << "num_devices = " << y.num_devices << "\n"
     << "num_antennas = " << y.num_antennas << "\n"
     << "bandwidth_hz = " << fmt(y.bandwidth_hz) << "\n"
     << "noise_psd_w_per_hz = " << fmt(y.noise_psd_w_per_hz) << "\n"
     << "uplink_pathloss_exp = " << fmt(y.uplink_pathloss_exp) << "\n"
     << "wpt_pathloss_exp = " << fmt(y.wpt_pathloss_exp) << "\n"
     << "wpt_min_dist_m = " << fmt(y.wpt_min_dist_m) << "\n"
     << "conversion_gain = " << fmt(y.conversion_gain) << "\n"
     << "round_s = " << fmt(y.round_s) << "\n"
     << "compute_s = " << fmt(y.compute_s) << "\n"
     << "comm_s = " << fmt(y.comm_s) << "\n"
     << "model_dim = " << y.model_dim << "\n"
     << "quant_bits = " << y.quant_bits << "\n"
     << "num_rounds = " << y.num_rounds << "\n"
     << "learning_rate = " << (s.learning_rate_auto ? std::string("auto") : fmt(y.learning_rate)) << "\n"
     << "grad_norm_bound = " << fmt(y.grad_norm_bound) << "\n"
     << "smoothness = " << fmt(y.smoothness) << "\n"
     << "initial_gap = " << fmt(s.initial_gap) << "\n"
     << "per_sample_flops = " << fmt(s.devices.per_sample_flops) << "\n"
     << "samples_per_device = " << s.devices.samples_per_device << "\n"
     << "grad_variance = " << fmt(s.devices.grad_variance) << "\n"
     << "compute_coeff_si = ";
  for (std::size_t i = 0; i < s.devices.compute_coeff_choices.size(); ++i)
    os << (i ? "," : "") << fmt(s.devices.compute_coeff_choices[i]);
  os << "\n"
     << "device_seed = " << s.devices.seed << "\n";
  if (const auto* b = std::get_if<BeaconSource>(&s.source)) {
    os << "wpt_source = beacon\n"
       << "beacon_power_w = " << fmt(b->beacon_power_w) << "\n"
       << "beacon_density_per_m2 = " << fmt(b->beacon_density_per_m2) << "\n";
  } else {
    const auto& v = std::get<ServerSource>(s.source);
    os << "wpt_source = server\n"
       << "server_power_w = " << fmt(v.per_device_power_w) << "\n"
       << "server_power_control = " << (v.control == PowerControl::kEqual ? "equal" : "optimized") << "\n";
  }
  os << "task_feature_dim = " << s.task.feature_dim << "\n"
     << "task_num_classes = " << s.task.num_classes << "\n"
     << "task_noise_scale = " << fmt(s.task.noise_scale) << "\n"
     << "task_class_separation = " << fmt(s.task.class_separation) << "\n"
     << "task_test_size = " << s.task.test_size << "\n"
     << "task_seed = " << s.task.seed << "\n";
  return os.str();
}

}  // namespace wpfeel
