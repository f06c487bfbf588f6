#pragma once

// Pareto analysis over (execution time minimized, success rate maximized) and
// report emission: a CSV table plus a hand-emitted SVG scatter, both written
// atomically (temp file, then rename).

#include <filesystem>
#include <string>
#include <vector>

namespace actbench {

struct ParetoPoint {
  std::string label;
  double execution_time = 0.0;  // minutes
  double success_rate = 0.0;    // percent
};

// flags[i] iff no other point has execution_time <= and success_rate >= with
// at least one strict inequality; exact ties are all flagged. Empty input
// yields empty flags. Throws std::invalid_argument on non-finite values or
// success rates outside [0, 100].
std::vector<bool> pareto_frontier(const std::vector<ParetoPoint>& points);

struct AblationRow {
  std::string policy;
  int state_dim = 0;
  double train_wall_s = 0.0;
  int trials = 0;
  double exec_time_min = 0.0;
  double success_rate_pct = 0.0;
  bool pareto = false;
  bool failed = false;  // excluded from report files and pareto analysis
  std::string error;
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

// Recomputes every pareto flag over the non-failed rows.
void flag_pareto(AblationReport& report);

inline constexpr const char* kReportCsvHeader =
    "policy,state_dim,train_wall_s,trials,exec_time_min,success_rate_pct,pareto";

std::string report_csv_text(const AblationReport& report);
std::string pareto_svg_text(const AblationReport& report);

// Writes report.csv and pareto.svg under out_dir, skipping failed rows.
// Throws std::invalid_argument when no row is emittable, std::runtime_error
// on unwritable paths.
void emit_report(const AblationReport& report, const std::filesystem::path& out_dir);

// Parses a report.csv produced by report_csv_text (strict header and column
// count). Throws FormatError-compatible std::runtime_error on malformed rows.
AblationReport read_report_csv(const std::filesystem::path& csv_path);

}  // namespace actbench
