#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotkde/model.hpp"
#include "rotkde/risk.hpp"
#include "rotkde/selector.hpp"

namespace rotkde::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kFailure = 2 };

/// Runs one invocation (args exclude the program name). Output goes to `out`,
/// diagnostics to `err`; never throws.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);
int run(int argc, char **argv);

/// Two-column CSV of points; a non-numeric first line is taken as a header.
Points read_points_csv(const std::string &path);

/// Shortest round-trip decimal ("nan" and "inf" for non-finite values).
std::string format_number(double v);

/// Report CSV: "# config: <json>", header, one row per n, slope footer rows.
void write_report_csv(std::ostream &out, const RiskReport &report, const nlohmann::json &config);

/// Log-log plot of risk against n with error bars.
void write_report_svg(std::ostream &out, const RiskReport &report);

/// rule, stage, theta_q, h, r_value, criterion, chosen.
void write_adaptive_diagnostics(std::ostream &out, const SelectionResult &r, const RotationNet &net,
                                const std::string &rule = "adaptive", int stage = 0);
void write_minimax_diagnostics(std::ostream &out, const MinimaxResult &r, const RotationNet &net);

}  // namespace rotkde::cli
