#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wpfeel/analysis.hpp"
#include "wpfeel/montecarlo.hpp"

namespace wpfeel::csv {

inline constexpr int kBoundsSchemaVersion = 1;
inline constexpr int kTrainingSchemaVersion = 1;
inline constexpr int kValidationSchemaVersion = 1;

inline constexpr std::string_view kBoundsHeader =
    "lambda_energy_or_P0,xi_or_tau,P_out,descent,deviation,residue,total";
inline constexpr std::string_view kScalingHeader = "variable,slope,points,decades";
inline constexpr std::string_view kTrainingHeader =
    "round,loss,grad_norm_sq,active_count,deviation,mean_batch,bound_deviation,bound_residue,bound_total";
inline constexpr std::string_view kValidationHeader = "check,pass,value,threshold,detail";

/// Round-trippable decimal form (%.17g).
std::string format_double(double v);

std::string bounds_row(const analysis::BoundReport& r);
std::string bounds_table(std::span<const analysis::BoundReport> rows);

std::string scaling_table(std::string_view variable, double slope, std::size_t points, double decades);

/// One row per round; the bound columns repeat the analytical overlay.
std::string training_table(const mc::TrainingReport& rep, const analysis::BoundReport& overlay);

struct CheckRow {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

std::string validation_table(std::span<const CheckRow> rows);

/// Quotes a field if it holds a comma, quote or newline.
std::string escape(std::string_view field);

}  // namespace wpfeel::csv
