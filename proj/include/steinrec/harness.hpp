#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "steinrec/bounds.hpp"
#include "steinrec/metrics.hpp"
#include "steinrec/recursion.hpp"

namespace steinrec {

enum class Method { exact, pool, both };

const char* to_string(Method m);

struct ExperimentConfig {
  std::optional<RecursionModel> x;
  std::optional<RecursionModel> y;
  int horizon = 8;
  Method method = Method::exact;
  std::size_t pool_size = 100'000;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  std::size_t atom_cap = 1'000'000;
  unsigned threads = 1;
  /// Levels below this are left out of the decay fit.
  int fit_min_level = 2;
  /// Coupled draws per level for beta_n; 0 skips the column.
  std::size_t beta_draws = 0;
  /// Draws per level for Monte Carlo moments of dependent perturbations.
  std::size_t perturbation_draws = 100'000;
  std::filesystem::path out_dir = "out";

  TwoEffectModel models() const;
};

/// Parses a JSON configuration. Unknown keys, missing models and invalid
/// values raise Errc::config (model-level failures keep their own codes).
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct CurveRow {
  int n = 0;
  Method method = Method::exact;
  double d_n = 0.0;
  double stderr_d = 0.0;  // NaN when not sampled or a single replicate
  double beta_n = 0.0;    // NaN when not computed
  double r_x = 0.0;       // NaN on the last level
  double r_y = 0.0;
  bool gap_ok = true;
};

struct DecayFitResult {
  double c_fit = 0.0;
  double gamma_fit = 0.0;
  double gamma_lo = 0.0;  // 95% band
  double gamma_hi = 0.0;
  double c_lo = 0.0;
  double c_hi = 0.0;
  std::size_t rows_used = 0;
};

/// Least squares of log d_n on n. Throws Errc::out_of_range with fewer than
/// three rows or any d_n <= 0.
DecayFitResult fit_decay(const std::vector<std::pair<int, double>>& rows);

struct DecayCurve {
  std::vector<CurveRow> rows;
  std::optional<DecayFitResult> fit;
  Method fit_method = Method::exact;
};

struct ExperimentResult {
  DecayCurve curve;
  ConditionConstants cx;
  ConditionConstants cy;
  RateReport report;
  std::string verdict;
};

/// Rows that enter the fit: all exact rows; sampled rows with
/// d_n > 10 stderr (or all when stderr is unavailable). Levels below
/// fit_min_level are skipped.
std::vector<std::pair<int, double>> qualifying_rows(const DecayCurve& curve, Method method, int fit_min_level);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Only the bounds half of the pipeline: moments, envelope fit, rate report.
ExperimentResult run_bounds(const ExperimentConfig& cfg);

inline constexpr double kGammaMargin = 0.05;

std::string verdict(const RateReport& report, const std::optional<DecayFitResult>& fit);

std::string curve_csv(const DecayCurve& curve);
std::string report_text(const ExperimentResult& result);

/// Writes curve.csv and report.txt into dir (created if needed).
void emit_report(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace steinrec
