#include "wpfeel/csv.hpp"

#include <cstdio>
#include <sstream>

namespace wpfeel::csv {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string bounds_row(const analysis::BoundReport& r) {
  std::string s;
  for (double v : {r.energy_knob, r.xi_or_tau, r.outage_prob, r.descent_term, r.deviation_term, r.residue,
                   r.total}) {
    if (!s.empty()) s += ',';
    s += format_double(v);
  }
  return s;
}

std::string bounds_table(std::span<const analysis::BoundReport> rows) {
  std::string out(kBoundsHeader);
  out += '\n';
  for (const auto& r : rows) out += bounds_row(r) + '\n';
  return out;
}

std::string scaling_table(std::string_view variable, double slope, std::size_t points, double decades) {
  std::ostringstream os;
  os << kScalingHeader << '\n'
     << escape(variable) << ',' << format_double(slope) << ',' << points << ',' << format_double(decades) << '\n';
  return os.str();
}

std::string training_table(const mc::TrainingReport& rep, const analysis::BoundReport& overlay) {
  std::ostringstream os;
  os << kTrainingHeader << '\n';
  const std::string tail = format_double(overlay.deviation_term) + ',' + format_double(overlay.residue) + ',' +
                           format_double(overlay.total);
  for (std::size_t i = 0; i < rep.loss.size(); ++i) {
    os << i << ',' << format_double(rep.loss[i]) << ',' << format_double(rep.grad_norm_sq[i]) << ','
       << rep.active_count[i] << ',' << format_double(rep.deviation[i]) << ',' << format_double(rep.mean_batch[i])
       << ',' << tail << '\n';
  }
  return os.str();
}

std::string validation_table(std::span<const CheckRow> rows) {
  std::ostringstream os;
  os << kValidationHeader << '\n';
  for (const auto& r : rows) {
    os << escape(r.name) << ',' << (r.pass ? "pass" : "fail") << ',' << format_double(r.value) << ','
       << format_double(r.threshold) << ',' << escape(r.detail) << '\n';
  }
  return os.str();
}

}  // namespace wpfeel::csv
